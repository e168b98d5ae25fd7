/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_annotationview_free: (a: number, b: number) => void;
export const __wbg_stateaction_free: (a: number, b: number) => void;
export const annotationview_dims: (a: number) => [number, number];
export const annotationview_new: (a: bigint, b: number) => [number, number, number];
export const annotationview_slice_rgba: (a: number, b: number) => [number, number];
export const annotationview_summary: (a: number) => [number, number];
export const attention_samples: (a: bigint, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
export const stateaction_candidates: (a: number) => [number, number];
export const stateaction_dims: (a: number) => [number, number];
export const stateaction_heatmap: (a: number) => [number, number];
export const stateaction_new: (a: bigint, b: number, c: number, d: number, e: number) => [number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_start: () => void;
