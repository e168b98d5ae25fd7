/* tslint:disable */
/* eslint-disable */

/**
 * Fine occupancy grid of one synthetic viewpoint.
 */
export class AnnotationView {
    free(): void;
    [Symbol.dispose](): void;
    dims(): Uint32Array;
    /**
     * Generates a one-room scene and annotates its first viewpoint.
     */
    constructor(seed: bigint, objects: number);
    /**
     * Height slice `z` as RGBA rows of length X, y growing downwards.
     * Free space is white, unknown is black.
     */
    slice_rgba(z: number): Uint8Array;
    summary(): string;
}

/**
 * A peaked volume state over a 30 x 30 x 8 grid and the action
 * distribution it induces on seeded candidates.
 */
export class StateAction {
    free(): void;
    [Symbol.dispose](): void;
    /**
     * `(x, y, probability)` per candidate; the first is STOP.
     */
    candidates(): Float64Array;
    dims(): Uint32Array;
    /**
     * Height-mean state, index `x * Y + y`.
     */
    heatmap(): Float64Array;
    /**
     * `peak_x`, `peak_y` in cells; larger `sharpness` concentrates the state.
     */
    constructor(seed: bigint, peak_x: number, peak_y: number, sharpness: number, count: number);
}

/**
 * Sample points of a seeded deformable attention for a query read from a
 * seeded `size` x `size` feature map at pixel `(u, v)`. Returns
 * `(x, y, weight, head)` per sample in feature-map cells.
 */
export function attention_samples(seed: bigint, size: number, heads: number, samples: number, u: number, v: number): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_annotationview_free: (a: number, b: number) => void;
    readonly __wbg_stateaction_free: (a: number, b: number) => void;
    readonly annotationview_dims: (a: number) => [number, number];
    readonly annotationview_new: (a: bigint, b: number) => [number, number, number];
    readonly annotationview_slice_rgba: (a: number, b: number) => [number, number];
    readonly annotationview_summary: (a: number) => [number, number];
    readonly attention_samples: (a: bigint, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
    readonly stateaction_candidates: (a: number) => [number, number];
    readonly stateaction_dims: (a: number) => [number, number];
    readonly stateaction_heatmap: (a: number) => [number, number];
    readonly stateaction_new: (a: bigint, b: number, c: number, d: number, e: number) => [number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_start: () => void;
}

export type SyncInitInput = BufferSource | WebAssembly.Module;

/**
 * Instantiates the given `module`, which can either be bytes or
 * a precompiled `WebAssembly.Module`.
 *
 * @param {{ module: SyncInitInput }} module - Passing `SyncInitInput` directly is deprecated.
 *
 * @returns {InitOutput}
 */
export function initSync(module: { module: SyncInitInput } | SyncInitInput): InitOutput;

/**
 * If `module_or_path` is {RequestInfo} or {URL}, makes a request and
 * for everything else, calls `WebAssembly.instantiate` directly.
 *
 * @param {{ module_or_path: InitInput | Promise<InitInput> }} module_or_path - Passing `InitInput` directly is deprecated.
 *
 * @returns {Promise<InitOutput>}
 */
export default function __wbg_init (module_or_path?: { module_or_path: InitInput | Promise<InitInput> } | InitInput | Promise<InitInput>): Promise<InitOutput>;
