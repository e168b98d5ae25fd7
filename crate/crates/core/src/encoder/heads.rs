//! Forward-only task heads over the pyramid: per-level occupancy logits
//! scored with a multi-class focal loss, per-level objectness, and a room
//! layout regression from pooled features.

use crate::annotation::{Label, VoxelGrid, FREE, UNKNOWN};
use crate::encoder::Pyramid;
use crate::error::{Error, Result};
use crate::grid::Vec3;
use crate::params::{softmax_in_place, Init, Linear, TensorStore};
use crate::scene::FOREGROUND_CLASSES;
use crate::shapes::RoomLayout;

pub const FOCAL_ALPHA: f64 = 0.25;
pub const FOCAL_GAMMA: f64 = 2.0;
/// Task weights for occupancy, layout and box terms.
pub const TASK_WEIGHTS: [f64; 3] = [2.0, 0.25, 0.25];

const EPS: f64 = 1e-12;

/// `-alpha (1 - p_t)^gamma ln p_t` with `p = softmax(logits)`.
pub fn focal_loss_multiclass(logits: &[f64], target: usize, alpha: f64, gamma: f64) -> f64 {
    let mut p = logits.to_vec();
    softmax_in_place(&mut p);
    let pt = p[target].clamp(EPS, 1.0);
    -alpha * (1.0 - pt).powf(gamma) * pt.ln()
}

/// Focal loss for a probability `p` against a target `t` in [0, 1]:
/// `-|t - p|^gamma (alpha t ln p + (1 - alpha)(1 - t) ln(1 - p))`. For a
/// binary target this is the usual form.
pub fn focal_loss_binary(p: f64, t: f64, alpha: f64, gamma: f64) -> f64 {
    let p = p.clamp(EPS, 1.0 - EPS);
    -(t - p).abs().powf(gamma) * (alpha * t * p.ln() + (1.0 - alpha) * (1.0 - t) * (1.0 - p).ln())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Heads {
    /// Semantic classes; the occupancy heads emit one more logit for free.
    pub classes: usize,
    pub occupancy: Vec<Linear>,
    pub objectness: Linear,
    pub layout: Linear,
}

impl Heads {
    pub fn seeded(init: &mut Init, channels: usize, levels: usize, classes: usize) -> Self {
        Self {
            classes,
            occupancy: (0..levels).map(|_| Linear::seeded(init, channels, classes + 1)).collect(),
            objectness: Linear::seeded(init, channels, 1),
            layout: Linear::seeded(init, channels, 7),
        }
    }

    pub fn store(&self, store: &mut TensorStore) {
        for (i, h) in self.occupancy.iter().enumerate() {
            h.store(store, &format!("heads.occupancy{i}"));
        }
        self.objectness.store(store, "heads.objectness");
        self.layout.store(store, "heads.layout");
    }

    pub fn load(store: &TensorStore, channels: usize, levels: usize, classes: usize) -> Result<Self> {
        Ok(Self {
            classes,
            occupancy: (0..levels)
                .map(|i| Linear::load(store, &format!("heads.occupancy{i}"), channels, classes + 1))
                .collect::<Result<_>>()?,
            objectness: Linear::load(store, "heads.objectness", channels, 1)?,
            layout: Linear::load(store, "heads.layout", channels, 7)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelScore {
    pub level: usize,
    /// Mean focal loss over voxels with known labels.
    pub occupancy_loss: f64,
    pub objectness_loss: f64,
    pub supervised: usize,
    pub prediction: VoxelGrid,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeadReport {
    pub levels: Vec<LevelScore>,
    pub occupancy_loss: f64,
    pub box_loss: f64,
    pub layout_loss: Option<f64>,
    pub layout: RoomLayout,
    pub total: f64,
}

fn class_index(label: Label, classes: usize) -> Option<usize> {
    match label {
        UNKNOWN => None,
        FREE => Some(classes),
        l => Some(l as usize),
    }
}

/// Score every pyramid level that has a label grid of the same shape.
/// Levels without labels are skipped; a label grid on a different lattice
/// than its level is an error, as is a pyramid with no labeled level.
pub fn multiscale_heads(
    pyramid: &Pyramid,
    labels: &[VoxelGrid],
    layout: Option<&RoomLayout>,
    origin: Vec3,
    heads: &Heads,
) -> Result<HeadReport> {
    if heads.occupancy.len() != pyramid.levels.len() {
        return Err(Error::Shape(format!(
            "{} occupancy heads for {} pyramid levels",
            heads.occupancy.len(),
            pyramid.levels.len()
        )));
    }
    let mut levels = Vec::new();
    for (m, (f, spec)) in pyramid.levels.iter().zip(&pyramid.specs).enumerate() {
        let Some(g) = labels.iter().find(|g| g.spec.dims() == f.dims) else { continue };
        if !g.spec.same_lattice(spec) {
            return Err(Error::Shape(format!("labels for level {m} lie on a different grid")));
        }
        let head = &heads.occupancy[m];
        let mut prediction = VoxelGrid::filled(*spec, UNKNOWN);
        let (mut occ, mut obj, mut n) = (0.0, 0.0, 0usize);
        let mut logits = vec![0.0; heads.classes + 1];
        for i in 0..f.cells() {
            let x = f.at(i);
            head.apply(x, &mut logits);
            let best = logits
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
                .map(|e| e.0)
                .unwrap_or(0);
            prediction.labels[i] = if best == heads.classes { FREE } else { best as Label };
            if let Some(t) = class_index(g.labels[i], heads.classes) {
                occ += focal_loss_multiclass(&logits, t, FOCAL_ALPHA, FOCAL_GAMMA);
                let p = 1.0 / (1.0 + (-heads.objectness.forward(x)[0]).exp());
                let is_object = f64::from(u8::from(t < FOREGROUND_CLASSES));
                obj += focal_loss_binary(p, is_object, FOCAL_ALPHA, FOCAL_GAMMA);
                n += 1;
            }
        }
        let denom = n.max(1) as f64;
        levels.push(LevelScore {
            level: m,
            occupancy_loss: occ / denom,
            objectness_loss: obj / denom,
            supervised: n,
            prediction,
        });
    }
    if levels.is_empty() {
        return Err(Error::Shape("no pyramid level matches a label grid".into()));
    }
    let occupancy_loss = levels.iter().map(|l| l.occupancy_loss).sum::<f64>() / levels.len() as f64;
    let box_loss = levels.iter().map(|l| l.objectness_loss).sum::<f64>() / levels.len() as f64;

    let (finest, _) = pyramid.finest();
    let mut pooled = vec![0.0; finest.channels];
    for i in 0..finest.cells() {
        for (p, v) in pooled.iter_mut().zip(finest.at(i)) {
            *p += v;
        }
    }
    pooled.iter_mut().for_each(|p| *p /= finest.cells() as f64);
    let r = heads.layout.forward(&pooled);
    let predicted = RoomLayout {
        center: origin + Vec3::new(r[0], r[1], r[2]),
        width: r[3].abs(),
        length: r[4].abs(),
        height: r[5].abs(),
        rotation: r[6],
    };
    let layout_loss = layout.map(|t| {
        let target = [
            t.center.x - origin.x,
            t.center.y - origin.y,
            t.center.z - origin.z,
            t.width,
            t.length,
            t.height,
            t.rotation,
        ];
        r.iter().zip(target).map(|(a, b)| (a - b).abs()).sum::<f64>() / 7.0
    });
    let total = TASK_WEIGHTS[0] * occupancy_loss + TASK_WEIGHTS[1] * layout_loss.unwrap_or(0.0) + TASK_WEIGHTS[2] * box_loss;
    Ok(HeadReport { levels, occupancy_loss, box_loss, layout_loss, layout: predicted, total })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn confident_correct_logits_give_zero_loss() {
        let mut logits = vec![0.0; 16];
        logits[5] = 100.0;
        assert!(focal_loss_multiclass(&logits, 5, FOCAL_ALPHA, FOCAL_GAMMA) < 1e-30);
    }

    #[test]
    fn uniform_logits_closed_form() {
        let p: f64 = 1.0 / 16.0;
        let expect = -0.25 * (1.0 - p).powi(2) * p.ln();
        let got = focal_loss_multiclass(&[0.3; 16], 7, FOCAL_ALPHA, FOCAL_GAMMA);
        assert!((got - expect).abs() < 1e-15);
    }

    #[test]
    fn binary_focal_is_minimal_at_target() {
        for t in [0.0, 0.2, 0.5, 0.9, 1.0] {
            let at = focal_loss_binary(t, t, FOCAL_ALPHA, FOCAL_GAMMA);
            for d in [-0.05, -0.01, 0.01, 0.05] {
                let p: f64 = t + d;
                if (0.0..=1.0).contains(&p) {
                    assert!(focal_loss_binary(p, t, FOCAL_ALPHA, FOCAL_GAMMA) >= at);
                }
            }
        }
    }
}
