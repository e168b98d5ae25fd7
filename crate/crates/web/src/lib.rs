//! Browser demo bindings: an annotation slice viewer, the volume-state to
//! action mapping, and deformable-attention sample points.

use wasm_bindgen::prelude::*;

use ver_core::annotation::{generate_annotations, AnnotateOptions, VoxelGrid, FREE, UNKNOWN};
use ver_core::camera::Camera;
use ver_core::encoder::{bilinear_sample, DeformableAttention, ViewFeature};
use ver_core::grid::{GridSpec, Vec3};
use ver_core::params::Init;
use ver_core::policy::{map_state_to_action, VolumeStateDist};
use ver_core::scene::NodeId;
use ver_core::synth::{generate_synthetic_scene, SynthParams};

const PALETTE: [[u8; 3]; 16] = [
    [230, 25, 75],
    [60, 180, 75],
    [255, 225, 25],
    [0, 130, 200],
    [245, 130, 48],
    [145, 30, 180],
    [70, 240, 240],
    [240, 50, 230],
    [210, 245, 60],
    [250, 190, 212],
    [0, 128, 128],
    [128, 128, 128],
    [170, 110, 40],
    [200, 200, 255],
    [128, 0, 0],
    [60, 60, 60],
];

fn js_err(e: ver_core::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// Fine occupancy grid of one synthetic viewpoint.
#[wasm_bindgen]
pub struct AnnotationView {
    grid: VoxelGrid,
    summary: String,
}

#[wasm_bindgen]
impl AnnotationView {
    /// Generates a one-room scene and annotates its first viewpoint.
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u64, objects: usize) -> Result<AnnotationView, JsError> {
        let mut p = SynthParams::new(seed, 1, objects);
        p.density = 120.0;
        p.viewpoints_per_room = 1;
        let scene = generate_synthetic_scene(&p).map_err(js_err)?;
        let vp: NodeId = *scene.graph.nodes().keys().next().ok_or_else(|| JsError::new("scene has no viewpoint"))?;
        let set = generate_annotations(&scene, vp, &AnnotateOptions::default()).map_err(js_err)?;
        let summary = format!(
            "{} points, {} occupied voxels, {} boxes, layout {}",
            scene.cloud.len(),
            set.fine().occupied_count(),
            set.boxes.len(),
            if set.layout.is_some() { "found" } else { "none" }
        );
        Ok(Self { grid: set.grids[2].clone(), summary })
    }

    pub fn dims(&self) -> Vec<u32> {
        self.grid.spec.dims().iter().map(|&d| d as u32).collect()
    }

    pub fn summary(&self) -> String {
        self.summary.clone()
    }

    /// Height slice `z` as RGBA rows of length X, y growing downwards.
    /// Free space is white, unknown is black.
    pub fn slice_rgba(&self, z: usize) -> Vec<u8> {
        let [dx, dy, dz] = self.grid.spec.dims();
        let z = z.min(dz - 1);
        let mut out = Vec::with_capacity(dx * dy * 4);
        for y in (0..dy).rev() {
            for x in 0..dx {
                let rgb = match self.grid.labels[(x * dy + y) * dz + z] {
                    FREE => [255, 255, 255],
                    UNKNOWN => [0, 0, 0],
                    l => PALETTE[l as usize % PALETTE.len()],
                };
                out.extend_from_slice(&[rgb[0], rgb[1], rgb[2], 255]);
            }
        }
        out
    }
}

/// A peaked volume state over a 30 x 30 x 8 grid and the action
/// distribution it induces on seeded candidates.
#[wasm_bindgen]
pub struct StateAction {
    heatmap: Vec<f64>,
    candidates: Vec<f64>,
}

const STATE_DIMS: [usize; 3] = [30, 30, 8];

#[wasm_bindgen]
impl StateAction {
    /// `peak_x`, `peak_y` in cells; larger `sharpness` concentrates the state.
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u64, peak_x: f64, peak_y: f64, sharpness: f64, count: usize) -> Result<StateAction, JsError> {
        let [dx, dy, dz] = STATE_DIMS;
        let spec = GridSpec::from_dims((0.0, dx as f64), (0.0, dy as f64), (0.0, dz as f64), STATE_DIMS).map_err(js_err)?;
        let mut init = Init::new(seed);
        let mut logits = Vec::with_capacity(spec.len());
        for x in 0..dx {
            for y in 0..dy {
                let d2 = (x as f64 + 0.5 - peak_x).powi(2) + (y as f64 + 0.5 - peak_y).powi(2);
                for _ in 0..dz {
                    logits.push(-sharpness * d2 / 50.0 + 0.5 * init.unit());
                }
            }
        }
        let state = VolumeStateDist::from_logits(STATE_DIMS, logits).map_err(js_err)?;
        let cands: Vec<(NodeId, Vec3)> = (0..count.clamp(1, 12))
            .map(|i| {
                let p = Vec3::new(1.0 + init.unit() * (dx - 2) as f64, 1.0 + init.unit() * (dy - 2) as f64, 4.0);
                (i as NodeId, p)
            })
            .collect();
        let action = map_state_to_action(&state, &cands, &spec).map_err(js_err)?;
        let heatmap = state.height_mean();
        let candidates = cands.iter().zip(&action.probs).flat_map(|((_, p), &q)| [p.x, p.y, q]).collect();
        Ok(Self { heatmap, candidates })
    }

    pub fn dims(&self) -> Vec<u32> {
        vec![STATE_DIMS[0] as u32, STATE_DIMS[1] as u32]
    }

    /// Height-mean state, index `x * Y + y`.
    pub fn heatmap(&self) -> Vec<f64> {
        self.heatmap.clone()
    }

    /// `(x, y, probability)` per candidate; the first is STOP.
    pub fn candidates(&self) -> Vec<f64> {
        self.candidates.clone()
    }
}

/// Sample points of a seeded deformable attention for a query read from a
/// seeded `size` x `size` feature map at pixel `(u, v)`. Returns
/// `(x, y, weight, head)` per sample in feature-map cells.
#[wasm_bindgen]
pub fn attention_samples(seed: u64, size: usize, heads: usize, samples: usize, u: f64, v: f64) -> Result<Vec<f64>, JsError> {
    let channels = 8 * heads.max(1);
    let mut init = Init::new(seed);
    let cam = Camera::looking(Vec3::zeros(), 0.0, 0.0, 1.2, size as u32, size as u32);
    let data = init.uniform(&[size * size * channels], 1.0).data;
    let map = ViewFeature::new(cam, channels, size, size, 1.0, data).map_err(js_err)?;
    let da = DeformableAttention::seeded(&mut init, channels, heads.max(1), samples.max(1));
    let (fx, fy) = map.feature_coords(u, v);
    let mut query = vec![0.0; channels];
    bilinear_sample(&map, fx, fy, &mut query);
    let plan = da.plan(&query);
    Ok(plan
        .weights
        .iter()
        .zip(&plan.offsets)
        .enumerate()
        .flat_map(|(i, (w, (ox, oy)))| [fx + ox, fy + oy, *w, (i / da.samples) as f64])
        .collect())
}
