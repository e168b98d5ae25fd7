//! Local actions from the volume state, the heatmap target used to score
//! them, and fusion with the global action over the episodic graph.

use super::state::VolumeStateDist;
use crate::encoder::{focal_loss_binary, FOCAL_ALPHA, FOCAL_GAMMA};
use crate::error::{Error, Result};
use crate::grid::{GridSpec, Vec3};
use crate::scene::NodeId;

/// Default Gaussian width of the heatmap target, in cells.
pub const HEATMAP_SIGMA: f64 = 3.0;

/// Distribution over node ids. For local actions the first id is the
/// current viewpoint, whose probability is STOP.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionDist {
    pub ids: Vec<NodeId>,
    pub probs: Vec<f64>,
}

impl ActionDist {
    pub fn new(ids: Vec<NodeId>, probs: Vec<f64>) -> Result<Self> {
        if ids.is_empty() || ids.len() != probs.len() {
            return Err(Error::Shape(format!("{} ids for {} probabilities", ids.len(), probs.len())));
        }
        Ok(Self { ids, probs })
    }

    pub fn prob_of(&self, id: NodeId) -> Option<f64> {
        self.ids.iter().position(|&i| i == id).map(|k| self.probs[k])
    }

    /// Highest-probability entry; the earlier entry wins ties.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.probs.iter().enumerate() {
            if p > self.probs[best] {
                best = i;
            }
        }
        best
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }
}

/// Horizontal cell of `p`, required to have its full 3x3 neighborhood
/// inside the grid.
pub fn neighborhood_center(spec: &GridSpec, p: &Vec3) -> Result<(usize, usize)> {
    let [nx, ny, _] = spec.dims();
    match (spec.axis_cell(0, p.x), spec.axis_cell(1, p.y)) {
        (Some(x), Some(y)) if x >= 1 && y >= 1 && x + 1 < nx && y + 1 < ny => Ok((x, y)),
        _ => Err(Error::OutOfGrid(format!("3x3 neighborhood of ({:.3}, {:.3}) leaves the grid", p.x, p.y))),
    }
}

/// Cells `(x, y)` of the 3x3 square around `center`.
pub fn neighborhood(center: (usize, usize)) -> impl Iterator<Item = (usize, usize)> {
    let (cx, cy) = center;
    (cx - 1..=cx + 1).flat_map(move |x| (cy - 1..=cy + 1).map(move |y| (x, y)))
}

/// Sums the height-averaged state over each candidate's neighborhood and
/// renormalizes. `candidates[0]` is the current viewpoint (STOP).
pub fn map_state_to_action(d: &VolumeStateDist, candidates: &[(NodeId, Vec3)], spec: &GridSpec) -> Result<ActionDist> {
    if spec.dims() != d.dims {
        return Err(Error::Shape(format!("state {:?} vs grid {:?}", d.dims, spec.dims())));
    }
    if candidates.is_empty() {
        return Err(Error::invalid("candidates", "the current viewpoint is required"));
    }
    let ph = d.height_mean();
    let ny = d.dims[1];
    let mut mass = Vec::with_capacity(candidates.len());
    for (_, p) in candidates {
        let c = neighborhood_center(spec, p)?;
        mass.push(neighborhood(c).map(|(x, y)| ph[x * ny + y]).sum::<f64>());
    }
    let total: f64 = mass.iter().sum();
    let probs = if total > 0.0 {
        mass.iter().map(|m| m / total).collect()
    } else {
        vec![1.0 / mass.len() as f64; mass.len()]
    };
    ActionDist::new(candidates.iter().map(|c| c.0).collect(), probs)
}

/// Gaussian target over the horizontal cells (`x * Y + y`), peak 1 at the
/// target's cell.
pub fn heatmap_target(target: &Vec3, spec: &GridSpec, sigma: f64) -> Result<Vec<f64>> {
    let [nx, ny, _] = spec.dims();
    let (Some(tx), Some(ty)) = (spec.axis_cell(0, target.x), spec.axis_cell(1, target.y)) else {
        return Err(Error::OutOfGrid(format!("target ({:.3}, {:.3})", target.x, target.y)));
    };
    let mut map = Vec::with_capacity(nx * ny);
    for x in 0..nx {
        for y in 0..ny {
            let r2 = (x as f64 - tx as f64).powi(2) + (y as f64 - ty as f64).powi(2);
            map.push((-r2 / (2.0 * sigma * sigma)).exp());
        }
    }
    Ok(map)
}

/// Mean soft-target focal loss of a predicted map against a heatmap.
pub fn heatmap_loss(pred: &[f64], target: &[f64]) -> Result<f64> {
    if pred.len() != target.len() || pred.is_empty() {
        return Err(Error::Shape(format!("prediction {} vs target {}", pred.len(), target.len())));
    }
    let sum: f64 = pred.iter().zip(target).map(|(&p, &t)| focal_loss_binary(p, t, FOCAL_ALPHA, FOCAL_GAMMA)).sum();
    Ok(sum / pred.len() as f64)
}

/// Lifts the local distribution onto `nodes` (graph order): candidates keep
/// their probability, every other node takes the STOP probability. The
/// lifted vector is renormalized and blended as `w_g * global + (1 - w_g) *
/// lifted`.
pub fn fuse_actions(local: &ActionDist, global: &ActionDist, nodes: &[NodeId], w_g: f64) -> Result<ActionDist> {
    if !(0.0..=1.0).contains(&w_g) {
        return Err(Error::invalid("w_g", format!("{w_g} outside [0, 1]")));
    }
    if global.ids != nodes {
        return Err(Error::Shape("global action does not cover the graph nodes in order".into()));
    }
    if let Some(id) = local.ids.iter().find(|id| !nodes.contains(id)) {
        return Err(Error::Shape(format!("local candidate {id} is not a graph node")));
    }
    let stop = local.probs[0];
    let lifted: Vec<f64> = nodes.iter().map(|&n| local.prob_of(n).unwrap_or(stop)).collect();
    let total: f64 = lifted.iter().sum();
    let probs = lifted
        .iter()
        .zip(&global.probs)
        .map(|(l, g)| {
            let l = if total > 0.0 { l / total } else { 1.0 / nodes.len() as f64 };
            w_g * g + (1.0 - w_g) * l
        })
        .collect();
    ActionDist::new(nodes.to_vec(), probs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> GridSpec {
        GridSpec::from_dims((0.0, 8.0), (0.0, 8.0), (0.0, 2.0), [8, 8, 2]).unwrap()
    }

    #[test]
    fn uniform_state_splits_evenly() {
        let d = VolumeStateDist::uniform([8, 8, 2]);
        let a = map_state_to_action(&d, &[(0, Vec3::new(2.5, 2.5, 1.0)), (1, Vec3::new(5.5, 5.5, 1.0))], &spec()).unwrap();
        assert_eq!(a.probs, vec![0.5, 0.5]);
    }

    #[test]
    fn mass_in_one_neighborhood() {
        let mut d = VolumeStateDist::uniform([8, 8, 2]);
        d.probs.iter_mut().for_each(|p| *p = 0.0);
        d.probs[(5 * 8 + 6) * 2 + 1] = 1.0;
        let a = map_state_to_action(&d, &[(3, Vec3::new(2.5, 2.5, 1.0)), (4, Vec3::new(5.5, 5.5, 1.0))], &spec()).unwrap();
        assert_eq!(a.probs, vec![0.0, 1.0]);
    }

    #[test]
    fn border_candidate_is_rejected() {
        let d = VolumeStateDist::uniform([8, 8, 2]);
        assert!(map_state_to_action(&d, &[(0, Vec3::new(0.5, 3.5, 1.0))], &spec()).is_err());
        assert!(map_state_to_action(&d, &[(0, Vec3::new(9.0, 3.5, 1.0))], &spec()).is_err());
    }

    #[test]
    fn heatmap_peak_and_three_cell_falloff() {
        let s = GridSpec::from_dims((0.0, 10.0), (0.0, 10.0), (0.0, 1.0), [10, 10, 1]).unwrap();
        let m = heatmap_target(&Vec3::new(4.5, 4.5, 0.5), &s, HEATMAP_SIGMA).unwrap();
        assert_eq!(m[4 * 10 + 4], 1.0);
        assert!((m[7 * 10 + 4] - (-0.5f64).exp()).abs() < 1e-15);
        let base = heatmap_loss(&m, &m).unwrap();
        assert!(base < 1e-20);
        let mut off = m.clone();
        off[3] += 0.01;
        assert!(heatmap_loss(&off, &m).unwrap() > base);
    }

    #[test]
    fn fusion_endpoints() {
        let local = ActionDist::new(vec![1, 2], vec![0.3, 0.7]).unwrap();
        let global = ActionDist::new(vec![1, 2], vec![0.9, 0.1]).unwrap();
        assert_eq!(fuse_actions(&local, &global, &[1, 2], 1.0).unwrap().probs, global.probs);
        assert_eq!(fuse_actions(&local, &global, &[1, 2], 0.0).unwrap().probs, local.probs);
        assert!(fuse_actions(&local, &global, &[2, 1], 0.5).is_err());
        assert!(fuse_actions(&local, &global, &[1, 2], 1.5).is_err());
    }
}
