//! Occupancy, detection and layout scores.

use crate::annotation::{VoxelGrid, FREE, UNKNOWN};
use crate::error::{Error, Result};
use crate::scene::{ClassId, OTHER};
use crate::shapes::{box_iou, OrientedBox, RoomLayout};

/// Semantic classes scored by mIoU (everything below "other").
pub const SCORED_CLASSES: usize = OTHER as usize;
pub const DETECTION_IOU: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyScores {
    /// Class-agnostic occupied IoU.
    pub iou: f64,
    /// Mean over classes present in either grid.
    pub miou: f64,
    /// Mean over all scored classes, absent ones counting 0.
    pub miou_inclusive: f64,
    pub per_class: Vec<Option<f64>>,
}

fn ratio(i: usize, u: usize) -> f64 {
    if u == 0 {
        1.0
    } else {
        i as f64 / u as f64
    }
}

/// Voxels whose ground truth is unknown are skipped.
pub fn occupancy_metrics(pred: &VoxelGrid, gt: &VoxelGrid) -> Result<OccupancyScores> {
    if pred.spec != gt.spec || pred.labels.len() != gt.labels.len() {
        return Err(Error::Shape("prediction and ground truth grids differ".into()));
    }
    let occ = |l: u16| l != FREE && l != UNKNOWN;
    let (mut inter, mut union) = (0usize, 0usize);
    let mut ci = vec![0usize; SCORED_CLASSES];
    let mut cu = vec![0usize; SCORED_CLASSES];
    for (&p, &g) in pred.labels.iter().zip(&gt.labels) {
        if g == UNKNOWN {
            continue;
        }
        let (po, go) = (occ(p), occ(g));
        inter += (po && go) as usize;
        union += (po || go) as usize;
        for c in [p, g] {
            if (c as usize) < SCORED_CLASSES {
                cu[c as usize] += 1;
            }
        }
        if p == g && (p as usize) < SCORED_CLASSES {
            ci[p as usize] += 1;
            cu[p as usize] -= 1;
        }
    }
    let per_class: Vec<Option<f64>> = (0..SCORED_CLASSES).map(|c| (cu[c] > 0).then(|| ratio(ci[c], cu[c]))).collect();
    let present: Vec<f64> = per_class.iter().flatten().copied().collect();
    let miou = if present.is_empty() { 1.0 } else { present.iter().sum::<f64>() / present.len() as f64 };
    let miou_inclusive = present.iter().fold(0.0, |a, b| a + b) / SCORED_CLASSES as f64;
    Ok(OccupancyScores { iou: ratio(inter, union), miou, miou_inclusive, per_class })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub bbox: OrientedBox,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionScores {
    pub map: f64,
    pub mar: f64,
    /// Per evaluated class: (class, AP, recall).
    pub per_class: Vec<(ClassId, f64, f64)>,
}

/// Area under the precision envelope of a ranked list of hits.
pub fn average_precision(hits: &[bool], positives: usize) -> (f64, f64) {
    if positives == 0 {
        return (0.0, 0.0);
    }
    let mut tp = 0usize;
    let mut points = Vec::with_capacity(hits.len());
    for (k, &h) in hits.iter().enumerate() {
        tp += h as usize;
        points.push((tp as f64 / positives as f64, tp as f64 / (k + 1) as f64));
    }
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for i in 0..points.len() {
        let (r, _) = points[i];
        if r > prev_recall {
            let envelope = points[i..].iter().map(|p| p.1).fold(0.0, f64::max);
            ap += (r - prev_recall) * envelope;
            prev_recall = r;
        }
    }
    (ap, prev_recall)
}

/// Per class: predictions by descending score each claim the unmatched
/// ground-truth box of highest IoU if it reaches the threshold. Classes
/// are those with ground truth; without any, both scores are 0.
pub fn detection_metrics(pred: &[Detection], gt: &[OrientedBox]) -> DetectionScores {
    let mut classes: Vec<ClassId> = gt.iter().map(|b| b.class).collect();
    classes.sort_unstable();
    classes.dedup();
    let mut per_class = Vec::new();
    for &c in &classes {
        let g: Vec<&OrientedBox> = gt.iter().filter(|b| b.class == c).collect();
        let mut p: Vec<&Detection> = pred.iter().filter(|d| d.bbox.class == c).collect();
        p.sort_by(|a, b| b.score.total_cmp(&a.score));
        let mut used = vec![false; g.len()];
        let hits: Vec<bool> = p
            .iter()
            .map(|d| {
                let mut best: Option<(usize, f64)> = None;
                for (j, gb) in g.iter().enumerate() {
                    let iou = box_iou(&d.bbox, gb);
                    if !used[j] && iou >= DETECTION_IOU && best.is_none_or(|(_, b)| iou > b) {
                        best = Some((j, iou));
                    }
                }
                best.map(|(j, _)| used[j] = true).is_some()
            })
            .collect();
        let (ap, recall) = average_precision(&hits, g.len());
        per_class.push((c, ap, recall));
    }
    let n = per_class.len().max(1) as f64;
    DetectionScores {
        map: per_class.iter().map(|c| c.1).sum::<f64>() / n,
        mar: per_class.iter().map(|c| c.2).sum::<f64>() / n,
        per_class,
    }
}

pub fn layout_iou(pred: &RoomLayout, gt: &RoomLayout) -> f64 {
    box_iou(&pred.as_box(), &gt.as_box())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{GridSpec, Vec3};

    fn cube(x: f64, class: ClassId) -> OrientedBox {
        OrientedBox { center: Vec3::new(x, 0.0, 0.0), half_extents: Vec3::new(0.5, 0.5, 0.5), yaw: 0.0, class, instance: None }
    }

    #[test]
    fn perfect_and_empty_detections() {
        let gt = vec![cube(0.0, 1), cube(3.0, 2)];
        let pred: Vec<Detection> = gt.iter().map(|b| Detection { bbox: *b, score: 1.0 }).collect();
        let s = detection_metrics(&pred, &gt);
        assert_eq!((s.map, s.mar), (1.0, 1.0));
        assert_eq!(detection_metrics(&[], &gt).map, 0.0);
    }

    #[test]
    fn occupancy_identity_and_disjoint() {
        let spec = GridSpec::from_dims((0.0, 2.0), (0.0, 1.0), (0.0, 1.0), [2, 1, 1]).unwrap();
        let a = VoxelGrid { spec: spec.clone(), labels: vec![3, FREE] };
        let b = VoxelGrid { spec, labels: vec![FREE, 3] };
        let s = occupancy_metrics(&a, &a).unwrap();
        assert_eq!((s.iou, s.miou), (1.0, 1.0));
        assert_eq!(occupancy_metrics(&a, &b).unwrap().iou, 0.0);
    }

    #[test]
    fn offset_unit_cubes() {
        let a = RoomLayout { center: Vec3::zeros(), width: 1.0, length: 1.0, height: 1.0, rotation: 0.0 };
        let b = RoomLayout { center: Vec3::new(0.5, 0.0, 0.0), ..a };
        assert!((layout_iou(&a, &b) - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(layout_iou(&a, &a), 1.0);
    }
}
