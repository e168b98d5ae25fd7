//! Acceptance checks. Each criterion compares library output against an
//! independent brute-force or closed-form computation written here, and
//! reports pass/fail with the measured numbers.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI};
use std::time::Instant;

use crate::annotation::{
    carve_free_space, densify_nearest_neighbor, downsample_labels, fit_oriented_box, generate_annotations,
    voxelize_majority, AnnotateOptions, Label, VoxelGrid, FREE, UNKNOWN,
};
use crate::camera::{panorama_rig, Camera};
use crate::encoder::{
    encode_ver, reference_points, DeformableAttention, EncoderConfig, EncoderParams, Upsampling, ViewFeature,
};
use crate::error::Result;
use crate::grid::{GridSpec, Vec3};
use crate::metrics::{
    detection_metrics, dtw, fidelity_metrics, layout_iou, nav_metrics, occupancy_metrics, Detection, SUCCESS_RADIUS,
};
use crate::params::{Init, Linear};
use crate::policy::{
    estimate_state, fuse_actions, global_action, map_state_to_action, EpisodicGraph, MltBlock,
    PolicyConfig, PolicyParams, ScoreMlp, VolumeStateDist,
};
use crate::scene::{Instruction, NodeId};
use crate::shapes::{box_iou, OrientedBox, RoomLayout};
use crate::sim::{generate_episodes, simulate, write_trajectories, Mode};
use crate::synth::{generate_synthetic_scene, SynthParams};
use crate::views::Renderer;

#[derive(Debug, Clone)]
pub struct Outcome {
    pub id: u8,
    pub name: &'static str,
    pub tolerance: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

/// Number, name and pinned tolerance of every criterion.
pub const CRITERIA: [(u8, &str, &str); 9] = [
    (1, "annotation oracle equivalence", "label-exact on 20 scenes of <= 5000 points, < 30 s"),
    (2, "oriented box fitting", "containment 1e-9 m, yaw 1e-6 rad mod pi/2, extents 1e-6 m"),
    (3, "synthetic round trip", "mIoU >= 0.9, box recall 1.0 at IoU 0.5, layout IoU >= 0.95"),
    (4, "encoder invariants", "scalar oracle 1e-10, weight sums 1e-6, exact pyramid shapes"),
    (5, "policy distribution contracts", "sums 1e-6, neighborhood sums exact, fusion 1e-10"),
    (6, "episodic memory running mean", "1e-12 over 10 revisits"),
    (7, "metric closed forms", "SPL 0.5 exact, nDTW 1 exact, DTW 1e-9, layout IoU 1e-12, mAP 1e-12"),
    (8, "end-to-end determinism", "byte-identical trajectory files"),
    (9, "trilinear upsampling variant", "identical shapes, finite values"),
];

/// Runs one criterion by number (1..=9).
pub fn run(id: u8) -> Outcome {
    let (name, tolerance) = CRITERIA.iter().find(|c| c.0 == id).map_or(("unknown criterion", ""), |c| (c.1, c.2));
    let t = Instant::now();
    let result = match id {
        1 => annotation_oracles(),
        2 => oriented_boxes(),
        3 => synthetic_round_trip(),
        4 => encoder_invariants(),
        5 => policy_contracts(),
        6 => running_mean(),
        7 => metric_closed_forms(),
        8 => determinism(),
        9 => trilinear_variant(),
        _ => Ok(Check::fail("no such criterion")),
    };
    let seconds = t.elapsed().as_secs_f64();
    let (passed, detail) = match result {
        Ok(mut c) => {
            c.require(id != 1 || seconds < 30.0, || format!("took {seconds:.1}s"));
            (c.failures.is_empty(), c.summary())
        }
        Err(e) => (false, format!("error: {e}")),
    };
    Outcome { id, name, tolerance, passed, detail, seconds }
}

pub fn run_all() -> Vec<Outcome> {
    CRITERIA.iter().map(|c| run(c.0)).collect()
}

impl Outcome {
    pub fn line(&self) -> String {
        format!(
            "criterion {} [{}] {} (tolerance: {}): {} ({:.1}s)",
            self.id,
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.tolerance,
            self.detail,
            self.seconds
        )
    }
}

#[derive(Default)]
struct Check {
    notes: Vec<String>,
    failures: Vec<String>,
}

impl Check {
    fn fail(msg: &str) -> Self {
        Self { notes: Vec::new(), failures: vec![msg.to_string()] }
    }

    fn require(&mut self, ok: bool, msg: impl FnOnce() -> String) {
        if !ok && self.failures.len() < 5 {
            self.failures.push(msg());
        }
    }

    fn note(&mut self, s: impl Into<String>) {
        self.notes.push(s.into());
    }

    fn summary(&self) -> String {
        if self.failures.is_empty() {
            self.notes.join("; ")
        } else {
            format!("{} | failures: {}", self.notes.join("; "), self.failures.join("; "))
        }
    }
}

// ---------------------------------------------------------------- 1

fn oracle_voxelize(points: &[(Vec3, u16)], spec: &GridSpec) -> Vec<Label> {
    let mut hist: BTreeMap<usize, [u32; 16]> = BTreeMap::new();
    let (lo, hi) = (spec.min(), spec.max());
    let dims = spec.dims();
    let res = spec.cell_size();
    for (p, l) in points {
        let mut cell = [0usize; 3];
        let mut inside = true;
        for a in 0..3 {
            if p[a] < lo[a] || p[a] > hi[a] {
                inside = false;
                break;
            }
            cell[a] = (((p[a] - lo[a]) / res[a]).floor() as usize).min(dims[a] - 1);
        }
        if inside {
            hist.entry((cell[0] * dims[1] + cell[1]) * dims[2] + cell[2]).or_insert([0; 16])[*l as usize] += 1;
        }
    }
    let mut out = vec![UNKNOWN; spec.len()];
    for (i, h) in hist {
        let max = *h.iter().max().unwrap();
        out[i] = h.iter().position(|&c| c == max).unwrap() as Label;
    }
    out
}

fn oracle_densify(grid: &VoxelGrid, free: &[bool]) -> Vec<Label> {
    let dims = grid.spec.dims();
    let coord = |i: usize| [(i / (dims[1] * dims[2])) as i64, ((i / dims[2]) % dims[1]) as i64, (i % dims[2]) as i64];
    let sites: Vec<([i64; 3], Label)> = grid
        .labels
        .iter()
        .enumerate()
        .filter(|(_, &l)| l != FREE && l != UNKNOWN)
        .map(|(i, &l)| (coord(i), l))
        .collect();
    grid.labels
        .iter()
        .enumerate()
        .map(|(i, &l)| {
            if l != UNKNOWN {
                return l;
            }
            if free[i] {
                return FREE;
            }
            let q = coord(i);
            // sites are in index order, so the first strict minimum is the
            // lowest-index tie
            let mut best = (i64::MAX, UNKNOWN);
            for (c, label) in &sites {
                let d = (0..3).map(|a| (c[a] - q[a]).pow(2)).sum::<i64>();
                if d < best.0 {
                    best = (d, *label);
                }
            }
            best.1
        })
        .collect()
}

fn oracle_downsample(fine: &VoxelGrid, f: usize) -> Vec<Label> {
    let fd = fine.spec.dims();
    let cd = [fd[0].div_ceil(f), fd[1].div_ceil(f), fd[2].div_ceil(f)];
    let mut out = Vec::with_capacity(cd.iter().product());
    for cx in 0..cd[0] {
        for cy in 0..cd[1] {
            for cz in 0..cd[2] {
                let mut counts = [0usize; 16];
                let mut free = false;
                for x in cx * f..cx * f + f {
                    for y in cy * f..cy * f + f {
                        for z in cz * f..cz * f + f {
                            if x >= fd[0] || y >= fd[1] || z >= fd[2] {
                                continue;
                            }
                            match fine.labels[(x * fd[1] + y) * fd[2] + z] {
                                FREE => free = true,
                                UNKNOWN => {}
                                l => counts[l as usize] += 1,
                            }
                        }
                    }
                }
                let max = *counts.iter().max().unwrap();
                out.push(if max > 0 {
                    counts.iter().position(|&c| c == max).unwrap() as Label
                } else if free {
                    FREE
                } else {
                    UNKNOWN
                });
            }
        }
    }
    out
}

fn small_scene_params(seed: u64) -> SynthParams {
    let mut p = SynthParams::new(seed, 1 + (seed % 2) as usize, 3);
    p.density = 20.0;
    p.viewpoints_per_room = 1;
    p
}

fn annotation_oracles() -> Result<Check> {
    let mut c = Check::default();
    let grid = GridSpec::new((-6.0, 6.0), (-6.0, 6.0), (-1.5, 2.0), 0.25)?;
    let (mut max_points, mut filled) = (0usize, 0usize);
    for seed in 0..20 {
        let scene = generate_synthetic_scene(&small_scene_params(seed))?;
        max_points = max_points.max(scene.cloud.len());
        c.require(scene.cloud.len() <= 5000, || format!("scene {seed} has {} points", scene.cloud.len()));
        let vp = *scene.graph.nodes().keys().next().unwrap();
        let spec = grid.translated(&scene.viewpoint(vp)?);
        let sparse = voxelize_majority(&scene.cloud, &spec);
        let pts: Vec<(Vec3, u16)> = scene.cloud.points.iter().copied().zip(scene.cloud.labels.iter().copied()).collect();
        c.require(sparse.labels == oracle_voxelize(&pts, &spec), || format!("scene {seed}: voxelization differs"));
        let free = carve_free_space(&sparse, &[scene.viewpoint(vp)?]);
        let dense = densify_nearest_neighbor(&sparse, &free)?;
        let want = oracle_densify(&sparse, &free);
        filled += sparse.labels.iter().filter(|&&l| l == UNKNOWN).count();
        c.require(dense.labels == want, || format!("scene {seed}: densification differs"));
        for f in [2, 4] {
            let got = downsample_labels(&dense, f)?;
            c.require(got.labels == oracle_downsample(&dense, f), || format!("scene {seed}: downsample x{f} differs"));
        }
    }
    c.note(format!("20 scenes, max {max_points} points, {filled} voxels filled, all label-exact"));
    Ok(c)
}

// ---------------------------------------------------------------- 2

fn yaw_error(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(FRAC_PI_2);
    d.min(FRAC_PI_2 - d)
}

fn oriented_boxes() -> Result<Check> {
    let mut c = Check::default();
    let mut init = Init::new(2024);
    let (mut worst_yaw, mut worst_ext, mut worst_out) = (0.0f64, 0.0f64, 0.0f64);
    for k in 0..1000 {
        let h = [0.1 + 2.0 * init.unit(), 0.1 + 2.0 * init.unit(), 0.1 + 1.5 * init.unit()];
        let yaw = (init.unit() * 2.0 - 1.0) * PI;
        let center = Vec3::new(init.unit() * 20.0 - 10.0, init.unit() * 20.0 - 10.0, init.unit() * 3.0);
        let (s, co) = yaw.sin_cos();
        let place = |l: [f64; 3]| center + Vec3::new(co * l[0] - s * l[1], s * l[0] + co * l[1], l[2]);
        // corners plus random points mirrored across both box axes
        let mut pts = Vec::new();
        for sx in [-1.0, 1.0] {
            for sy in [-1.0, 1.0] {
                for sz in [-1.0, 1.0] {
                    pts.push(place([sx * h[0], sy * h[1], sz * h[2]]));
                }
            }
        }
        for _ in 0..10 {
            let l = [h[0] * init.unit(), h[1] * init.unit(), h[2] * (2.0 * init.unit() - 1.0)];
            for (sx, sy) in [(1.0, 1.0), (-1.0, 1.0), (1.0, -1.0), (-1.0, -1.0)] {
                pts.push(place([sx * l[0], sy * l[1], l[2]]));
            }
        }
        let b = fit_oriented_box(&pts, 1, None)?;
        let ye = yaw_error(b.yaw, yaw);
        // extents compare as an unordered horizontal pair
        let mut got = [b.half_extents.x, b.half_extents.y];
        let mut want = [h[0], h[1]];
        got.sort_by(f64::total_cmp);
        want.sort_by(f64::total_cmp);
        let ee = (got[0] - want[0]).abs().max((got[1] - want[1]).abs()).max((b.half_extents.z - h[2]).abs());
        let out = pts
            .iter()
            .map(|p| {
                let q = b.to_local(p);
                (0..3).map(|a| q[a].abs() - b.half_extents[a]).fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        worst_yaw = worst_yaw.max(ye);
        worst_ext = worst_ext.max(ee);
        worst_out = worst_out.max(out);
        c.require(ye <= 1e-6, || format!("box {k}: yaw error {ye:.2e}"));
        c.require(ee <= 1e-6, || format!("box {k}: extent error {ee:.2e}"));
        c.require(out <= 1e-9, || format!("box {k}: point outside by {out:.2e}"));
    }
    c.note(format!(
        "1000 boxes, max yaw error {worst_yaw:.1e} rad, max extent error {worst_ext:.1e} m, max containment excess {worst_out:.1e} m"
    ));
    Ok(c)
}

// ---------------------------------------------------------------- 3

fn synthetic_round_trip() -> Result<Check> {
    let mut c = Check::default();
    for seed in 1..=3 {
        let params = SynthParams::new(seed, 2, 6);
        let scene = generate_synthetic_scene(&params)?;
        let truth = scene.truth.clone().expect("synthetic scenes carry truth");
        let vp = *scene.graph.nodes().keys().next().unwrap();
        let set = generate_annotations(&scene, vp, &AnnotateOptions::default())?;
        let gt = truth.oracle_occupancy(&set.fine().spec, 0.5 / params.density);
        let occ = occupancy_metrics(set.fine(), &gt)?;
        let room = truth.room_of(&scene.viewpoint(vp)?);
        let targets: Vec<OrientedBox> = truth.objects.iter().filter(|o| Some(o.room) == room).map(|o| o.as_box()).collect();
        let found = targets
            .iter()
            .filter(|t| set.boxes.iter().any(|b| b.class == t.class && box_iou(b, t) >= 0.5))
            .count();
        let recall = if targets.is_empty() { 1.0 } else { found as f64 / targets.len() as f64 };
        let liou = match (set.layout, room) {
            (Some(l), Some(r)) => layout_iou(&l, &truth.rooms[r].layout()),
            _ => 0.0,
        };
        c.note(format!("scene {seed}: mIoU {:.3}, box recall {recall:.2} ({found}/{}), layout IoU {liou:.3}", occ.miou, targets.len()));
        c.require(occ.miou >= 0.9, || format!("scene {seed}: mIoU {:.3} < 0.9", occ.miou));
        c.require(recall == 1.0, || format!("scene {seed}: box recall {recall:.2}"));
        c.require(liou >= 0.95, || format!("scene {seed}: layout IoU {liou:.3} < 0.95"));
    }
    Ok(c)
}

// ---------------------------------------------------------------- 4

fn scalar_da(da: &DeformableAttention, q: &[f64], u: f64, v: f64, m: &ViewFeature) -> Vec<f64> {
    let (d, heads, samples) = (da.channels, da.heads, da.samples);
    let dh = d / heads;
    let lin = |l: &Linear, row: usize| (0..l.input).fold(l.bias[row], |acc, c| acc + l.weight[row * l.input + c] * q[c]);
    let (w, h) = (m.width as f64, m.height as f64);
    let texel = |x: f64, y: f64, ch: usize| m.data[((y as usize) * m.width + x as usize) * m.channels + ch];
    let sample = |x: f64, y: f64, ch: usize| {
        let (x, y) = (x.clamp(0.0, w - 1.0), y.clamp(0.0, h - 1.0));
        let (x0, y0) = (x.floor(), y.floor());
        let (x1, y1) = ((x0 + 1.0).min(w - 1.0), (y0 + 1.0).min(h - 1.0));
        let (ax, ay) = (x - x0, y - y0);
        texel(x0, y0, ch) * (1.0 - ax) * (1.0 - ay)
            + texel(x1, y0, ch) * ax * (1.0 - ay)
            + texel(x0, y1, ch) * (1.0 - ax) * ay
            + texel(x1, y1, ch) * ax * ay
    };
    let (fx, fy) = (u / m.scale - 0.5, v / m.scale - 0.5);
    let mut out = vec![0.0; d];
    for k in 0..heads {
        let logits: Vec<f64> = (0..samples).map(|s| lin(&da.weight, k * samples + s)).collect();
        let z: f64 = logits.iter().map(|l| l.exp()).sum();
        let mut head = vec![0.0; dh];
        for s in 0..samples {
            let a = logits[s].exp() / z;
            let px = fx + lin(&da.offset, 2 * (k * samples + s));
            let py = fy + lin(&da.offset, 2 * (k * samples + s) + 1);
            for r in 0..dh {
                let row = (k * dh + r) * d;
                head[r] += a * (0..d).map(|c| da.value.weight[row + c] * sample(px, py, c)).sum::<f64>();
            }
        }
        for r in 0..dh {
            head[r] += da.value.bias[k * dh + r];
            for o in 0..d {
                out[o] += da.output.weight[o * d + k * dh + r] * head[r];
            }
        }
    }
    out
}

fn random_views(init: &mut Init, channels: usize, origin: Vec3) -> Result<Vec<ViewFeature>> {
    panorama_rig(origin, 4, &[0.0], 1.7, (12, 12))
        .into_iter()
        .map(|cam| ViewFeature::new(cam, channels, 6, 6, 2.0, init.uniform(&[36 * channels], 1.0).data))
        .collect()
}

fn encoder_invariants() -> Result<Check> {
    let mut c = Check::default();
    let mut init = Init::new(77);
    let cam = Camera::looking(Vec3::zeros(), 0.0, 0.0, 1.2, 2, 2);
    let (mut worst, mut worst_sum) = (0.0f64, 0.0f64);
    for _ in 0..200 {
        let map = ViewFeature::new(cam.clone(), 4, 2, 2, 1.0, init.uniform(&[16], 1.0).data)?;
        let da = DeformableAttention::seeded(&mut init, 4, 2, 3);
        let q = init.uniform(&[4], 1.0).data;
        let (u, v) = (init.unit() * 2.0, init.unit() * 2.0);
        let got = da.forward(&q, u, v, &map);
        let want = scalar_da(&da, &q, u, v, &map);
        worst = got.iter().zip(&want).map(|(a, b)| (a - b).abs()).fold(worst, f64::max);
        for head in da.plan(&q).weights.chunks(da.samples) {
            worst_sum = worst_sum.max((head.iter().sum::<f64>() - 1.0).abs());
        }
    }
    c.require(worst <= 1e-10, || format!("DA differs from scalar oracle by {worst:.2e}"));
    c.require(worst_sum <= 1e-6, || format!("attention weights off by {worst_sum:.2e}"));
    let origin = Vec3::new(0.0, 0.0, 1.5);
    let cfg = EncoderConfig { channels: 4, heads: 2, samples: 2, cva_layers: 1, ..EncoderConfig::default() };
    let params = EncoderParams::seeded(&cfg, 5)?;
    let pyr = encode_ver(&random_views(&mut init, 4, origin)?, origin, &params)?;
    let dims: Vec<[usize; 3]> = pyr.levels.iter().map(|l| l.dims).collect();
    let want = vec![[15, 15, 4], [30, 30, 8], [60, 60, 16], [120, 120, 32]];
    c.require(dims == want, || format!("pyramid dims {dims:?}"));
    c.note(format!("200 DA cases max |diff| {worst:.1e}, weight-sum error {worst_sum:.1e}, pyramid {dims:?}"));
    Ok(c)
}

// ---------------------------------------------------------------- 5

fn policy_contracts() -> Result<Check> {
    let mut c = Check::default();
    let mut init = Init::new(5);
    let d = 4;
    let blocks = vec![MltBlock::seeded(&mut init, d)];
    let head = ScoreMlp::seeded(&mut init, d);
    let (mut worst_sum, mut worst_fuse, mut mismatches) = (0.0f64, 0.0f64, 0usize);
    for trial in 0..1000 {
        let dims = [3 + trial % 4, 3 + (trial / 4) % 3, 1 + trial % 3];
        let spec = GridSpec::from_dims((0.0, dims[0] as f64), (0.0, dims[1] as f64), (0.0, 1.0), dims)?;
        let instr = Instruction::seeded(trial as u64, 1 + trial % 3, d);
        // volume state from the network on every tenth trial, random otherwise
        let state = if trial % 10 == 0 {
            let mut f = crate::encoder::VolumeFeature::zeros(dims, d, 0);
            f.data = init.uniform(&[f.data.len()], 1.0).data;
            estimate_state(&instr, &f, &blocks, &head)?.dist
        } else {
            let logits = (0..spec.len()).map(|_| 6.0 * init.unit() - 3.0).collect();
            VolumeStateDist::from_logits(dims, logits)?
        };
        worst_sum = worst_sum.max((state.probs.iter().sum::<f64>() - 1.0).abs());
        let interior = |init: &mut Init, n: usize| 1.0 + (init.unit() * (n - 2) as f64).floor() + 0.5;
        let n_cand = 1 + trial % 4;
        let cands: Vec<(NodeId, Vec3)> =
            (0..n_cand).map(|i| (i as NodeId, Vec3::new(interior(&mut init, dims[0]), interior(&mut init, dims[1]), 0.5))).collect();
        let local = map_state_to_action(&state, &cands, &spec)?;
        // brute force: height mean, 3x3 sums, renormalize, same summation order
        let z = dims[2];
        let ph = |x: usize, y: usize| (0..z).map(|k| state.probs[(x * dims[1] + y) * z + k]).sum::<f64>() / z as f64;
        let mass: Vec<f64> = cands
            .iter()
            .map(|(_, p)| {
                let (cx, cy) = (p.x.floor() as usize, p.y.floor() as usize);
                let mut m = 0.0;
                for x in cx - 1..=cx + 1 {
                    for y in cy - 1..=cy + 1 {
                        m += ph(x, y);
                    }
                }
                m
            })
            .collect();
        let total: f64 = mass.iter().sum();
        let want: Vec<f64> = mass.iter().map(|m| m / total).collect();
        if want != local.probs {
            mismatches += 1;
        }
        worst_sum = worst_sum.max((local.total() - 1.0).abs());
        // graph: current candidate list plus a few past nodes
        let past = trial % 3;
        let mut nodes: Vec<NodeId> = (100..100 + past as NodeId).collect();
        nodes.extend(cands.iter().map(|c| c.0));
        let mut g = EpisodicGraph::new();
        let obs: Vec<(NodeId, Vec3)> = nodes.iter().map(|&n| (n, Vec3::zeros())).collect();
        let emb: Vec<Vec<f64>> = nodes.iter().map(|_| init.uniform(&[d], 1.0).data).collect();
        g.observe(&obs, &emb)?;
        let global = global_action(&instr, &g, &blocks, &head)?;
        worst_sum = worst_sum.max((global.total() - 1.0).abs());
        for w in [0.0, 0.5, 1.0] {
            let fused = fuse_actions(&local, &global, &nodes, w)?;
            let stop = local.probs[0];
            let lifted: Vec<f64> = nodes.iter().map(|n| if *n >= 100 { stop } else { local.probs[*n as usize] }).collect();
            let lt: f64 = lifted.iter().sum();
            for (i, f) in fused.probs.iter().enumerate() {
                let hand = w * global.probs[i] + (1.0 - w) * lifted[i] / lt;
                worst_fuse = worst_fuse.max((f - hand).abs());
            }
            worst_sum = worst_sum.max((fused.total() - 1.0).abs());
        }
    }
    c.require(worst_sum <= 1e-6, || format!("a distribution sums to 1 +- {worst_sum:.2e}"));
    c.require(mismatches == 0, || format!("{mismatches} local actions differ from brute force"));
    c.require(worst_fuse <= 1e-10, || format!("fusion off by {worst_fuse:.2e}"));
    c.note(format!(
        "1000 inputs: max |sum - 1| {worst_sum:.1e}, neighborhood sums exact, fusion max diff {worst_fuse:.1e}"
    ));
    Ok(c)
}

// ---------------------------------------------------------------- 6

fn running_mean() -> Result<Check> {
    let mut c = Check::default();
    let mut init = Init::new(6);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let mut g = EpisodicGraph::new();
        let mut history: Vec<Vec<f64>> = Vec::new();
        for k in 1..=10u32 {
            let e = init.uniform(&[8], 5.0).data;
            history.push(e.clone());
            g.observe(&[(0, Vec3::zeros()), (k, Vec3::zeros())], &[e, init.uniform(&[8], 1.0).data])?;
            let node = g.node(0).expect("node 0 observed");
            for ch in 0..8 {
                let batch = history.iter().map(|h| h[ch]).sum::<f64>() / history.len() as f64;
                worst = worst.max((node.embedding[ch] - batch).abs());
            }
        }
    }
    c.require(worst <= 1e-12, || format!("running mean off by {worst:.2e}"));
    c.note(format!("100 histories of 10 revisits, max |running - batch| {worst:.1e}"));
    Ok(c)
}

// ---------------------------------------------------------------- 7

fn dtw_enumerated(a: &[Vec3], b: &[Vec3], i: usize, j: usize) -> f64 {
    let here = (a[i] - b[j]).norm();
    if i + 1 == a.len() && j + 1 == b.len() {
        return here;
    }
    let mut best = f64::INFINITY;
    if i + 1 < a.len() {
        best = best.min(dtw_enumerated(a, b, i + 1, j));
    }
    if j + 1 < b.len() {
        best = best.min(dtw_enumerated(a, b, i, j + 1));
    }
    if i + 1 < a.len() && j + 1 < b.len() {
        best = best.min(dtw_enumerated(a, b, i + 1, j + 1));
    }
    here + best
}

fn metric_closed_forms() -> Result<Check> {
    let mut c = Check::default();
    let x = |v: &[f64]| -> Vec<Vec3> { v.iter().map(|&t| Vec3::new(t, 0.0, 0.0)).collect() };
    let goal = Vec3::new(10.0, 0.0, 0.0);
    let spl = nav_metrics(&x(&[0.0, 10.0, 15.0, 10.0]), &goal, 10.0, SUCCESS_RADIUS).spl;
    c.require(spl == 0.5, || format!("detour SPL {spl}"));
    let path = x(&[0.0, 2.0, 5.0, 9.0]);
    let ndtw = fidelity_metrics(&path, &path, 1.0, SUCCESS_RADIUS).ndtw;
    c.require(ndtw == 1.0, || format!("nDTW of identical paths {ndtw}"));
    let mut init = Init::new(7);
    let mut worst = 0.0f64;
    for n in 1..=6 {
        for m in 1..=6 {
            for _ in 0..3 {
                let a: Vec<Vec3> = (0..n).map(|_| Vec3::new(init.unit() * 9.0, init.unit() * 9.0, 0.0)).collect();
                let b: Vec<Vec3> = (0..m).map(|_| Vec3::new(init.unit() * 9.0, init.unit() * 9.0, 0.0)).collect();
                worst = worst.max((dtw(&a, &b) - dtw_enumerated(&a, &b, 0, 0)).abs());
            }
        }
    }
    c.require(worst <= 1e-9, || format!("DTW differs from enumeration by {worst:.2e}"));
    let cube = RoomLayout { center: Vec3::zeros(), width: 1.0, length: 1.0, height: 1.0, rotation: 0.0 };
    let shifted = RoomLayout { center: Vec3::new(0.5, 0.0, 0.0), ..cube };
    let liou = layout_iou(&cube, &shifted);
    c.require((liou - 1.0 / 3.0).abs() <= 1e-12, || format!("offset cube IoU {liou}"));
    // ranked hits T F T over two truths: envelope area 1/2 * 1 + 1/2 * 2/3
    let bx = |x: f64| OrientedBox { center: Vec3::new(x, 0.0, 0.0), half_extents: Vec3::new(0.5, 0.5, 0.5), yaw: 0.0, class: 3, instance: None };
    let gt = [bx(0.0), bx(4.0)];
    let pred = [
        Detection { bbox: bx(0.05), score: 0.9 },
        Detection { bbox: bx(9.0), score: 0.6 },
        Detection { bbox: bx(4.05), score: 0.3 },
    ];
    let ap = detection_metrics(&pred, &gt).map;
    let want = 0.5 + 0.5 * (2.0 / 3.0);
    c.require((ap - want).abs() <= 1e-12, || format!("hand-case mAP {ap} vs {want}"));
    c.note(format!("SPL {spl}, nDTW {ndtw}, DTW max diff {worst:.1e}, layout IoU {liou:.15}, mAP {ap:.6}"));
    Ok(c)
}

// ---------------------------------------------------------------- 8

/// Trajectory file text of a small seeded simulation.
pub fn seeded_simulation(seed: u64) -> Result<String> {
    let scene = generate_synthetic_scene(&SynthParams::new(seed, 2, 3))?;
    let episodes = generate_episodes(&scene, "selfcheck", 2, seed, 3)?;
    let enc = EncoderParams::seeded(&EncoderConfig::desk(), seed)?;
    let pol = PolicyParams::seeded(&PolicyConfig::desk(), seed + 1)?;
    let renderer = Renderer::new(&scene.cloud, scene.header.classes.len(), pol.config.channels, 4, seed + 2)?;
    Ok(write_trajectories(&simulate(&scene, &episodes, &renderer, &enc, &pol, Mode::Argmax)?))
}

fn determinism() -> Result<Check> {
    let mut c = Check::default();
    let a = seeded_simulation(1)?;
    let b = seeded_simulation(1)?;
    c.require(a == b, || "trajectory files differ between runs".into());
    c.note(format!("two runs, {} identical bytes", a.len()));
    Ok(c)
}

// ---------------------------------------------------------------- 9

fn trilinear_variant() -> Result<Check> {
    let mut c = Check::default();
    let mut init = Init::new(9);
    let origin = Vec3::new(0.0, 0.0, 1.5);
    let views = random_views(&mut init, 4, origin)?;
    let deconv = EncoderConfig { channels: 4, heads: 2, samples: 2, cva_layers: 1, ..EncoderConfig::default() };
    let tri = EncoderConfig { upsampling: Upsampling::Trilinear, ..deconv };
    let a = encode_ver(&views, origin, &EncoderParams::seeded(&deconv, 3)?)?;
    let b = encode_ver(&views, origin, &EncoderParams::seeded(&tri, 3)?)?;
    let da: Vec<[usize; 3]> = a.levels.iter().map(|l| l.dims).collect();
    let db: Vec<[usize; 3]> = b.levels.iter().map(|l| l.dims).collect();
    c.require(da == db, || format!("shapes {da:?} vs {db:?}"));
    let finite = b.levels.iter().all(|l| l.data.iter().all(|v| v.is_finite()));
    c.require(finite, || "non-finite trilinear features".into());
    let differs = a.levels.last().map(|l| &l.data) != b.levels.last().map(|l| &l.data);
    let refs = reference_points(&b.specs[0], &views.iter().map(|v| v.camera.clone()).collect::<Vec<_>>());
    let visible = (0..b.specs[0].len()).filter(|&i| refs.any_visible(i)).count();
    c.note(format!("shapes {db:?} match, values differ: {differs}, {visible} visible query cells"));
    Ok(c)
}
