//! Volume state estimation: instruction-conditioned self-attention over
//! each horizontal slice, then a per-cell score normalized over the volume.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use super::mlt::{mlt_forward, MltBlock, ScoreMlp};
use crate::encoder::VolumeFeature;
use crate::error::{Error, Result};
use crate::params::softmax_in_place;
use crate::scene::Instruction;

/// Probability of transitioning into each cell, in the volume's linear
/// cell order.
#[derive(Debug, Clone, PartialEq)]
pub struct VolumeStateDist {
    pub dims: [usize; 3],
    pub probs: Vec<f64>,
}

impl VolumeStateDist {
    pub fn uniform(dims: [usize; 3]) -> Self {
        let n = dims.iter().product::<usize>();
        Self { dims, probs: vec![1.0 / n as f64; n] }
    }

    /// Normalizes raw logits over all cells.
    pub fn from_logits(dims: [usize; 3], mut logits: Vec<f64>) -> Result<Self> {
        if logits.len() != dims.iter().product::<usize>() || logits.is_empty() {
            return Err(Error::Shape(format!("{} logits for a {dims:?} volume", logits.len())));
        }
        softmax_in_place(&mut logits);
        Ok(Self { dims, probs: logits })
    }

    pub fn at(&self, x: usize, y: usize, z: usize) -> f64 {
        self.probs[(x * self.dims[1] + y) * self.dims[2] + z]
    }

    /// Mean over the height axis, indexed `x * Y + y`.
    pub fn height_mean(&self) -> Vec<f64> {
        let z = self.dims[2];
        self.probs.chunks(z).map(|col| col.iter().sum::<f64>() / z as f64).collect()
    }

    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.probs.iter().enumerate() {
            if p > self.probs[best] {
                best = i;
            }
        }
        best
    }
}

/// Splits a volume into its horizontal slices: group `z` holds the cells
/// `(x, y, z)` in `x * Y + y` order.
pub fn height_group(f: &VolumeFeature) -> Vec<Vec<Vec<f64>>> {
    let [nx, ny, nz] = f.dims;
    (0..nz)
        .map(|z| {
            let mut g = Vec::with_capacity(nx * ny);
            for x in 0..nx {
                for y in 0..ny {
                    g.push(f.cell([x, y, z]).to_vec());
                }
            }
            g
        })
        .collect()
}

/// Inverse of [`height_group`].
pub fn height_ungroup(groups: &[Vec<Vec<f64>>], dims: [usize; 3], channels: usize, level: usize) -> Result<VolumeFeature> {
    let [nx, ny, nz] = dims;
    if groups.len() != nz || groups.iter().any(|g| g.len() != nx * ny || g.iter().any(|c| c.len() != channels)) {
        return Err(Error::Shape(format!("groups do not tile a {dims:?} x {channels} volume")));
    }
    let mut f = VolumeFeature::zeros(dims, channels, level);
    for (z, g) in groups.iter().enumerate() {
        for x in 0..nx {
            for y in 0..ny {
                f.cell_mut([x, y, z]).copy_from_slice(&g[x * ny + y]);
            }
        }
    }
    Ok(f)
}

/// Output of state estimation: the distribution and the updated volume the
/// pillars are pooled from.
#[derive(Debug, Clone)]
pub struct StateEstimate {
    pub dist: VolumeStateDist,
    pub updated: VolumeFeature,
}

pub(crate) fn check_instruction(instr: &Instruction, channels: usize) -> Result<()> {
    if instr.dim() != channels {
        return Err(Error::Shape(format!("instruction width {} vs feature width {channels}", instr.dim())));
    }
    Ok(())
}

/// Runs the shared blocks on `[E; slice]` for every slice, re-stacks the
/// cell outputs in height order and scores every cell.
pub fn estimate_state(instr: &Instruction, f: &VolumeFeature, blocks: &[MltBlock], head: &ScoreMlp) -> Result<StateEstimate> {
    f.validate()?;
    check_instruction(instr, f.channels)?;
    let l = instr.len();
    let run = |slice: Vec<Vec<f64>>| -> Vec<Vec<f64>> {
        let mut tokens = instr.tokens().to_vec();
        tokens.extend(slice);
        mlt_forward(&tokens, blocks).split_off(l)
    };
    let groups = height_group(f);
    #[cfg(feature = "parallel")]
    let out: Vec<Vec<Vec<f64>>> = groups.into_par_iter().map(run).collect();
    #[cfg(not(feature = "parallel"))]
    let out: Vec<Vec<Vec<f64>>> = groups.into_iter().map(run).collect();
    let updated = height_ungroup(&out, f.dims, f.channels, f.level)?;
    let logits = (0..updated.cells()).map(|i| head.score(updated.at(i))).collect();
    Ok(StateEstimate { dist: VolumeStateDist::from_logits(f.dims, logits)?, updated })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::Init;

    fn volume(dims: [usize; 3], d: usize, seed: u64) -> VolumeFeature {
        let mut f = VolumeFeature::zeros(dims, d, 0);
        f.data = Init::new(seed).uniform(&[f.data.len()], 1.0).data;
        f
    }

    #[test]
    fn grouping_round_trips() {
        let f = volume([3, 2, 4], 2, 1);
        let g = height_group(&f);
        assert_eq!(g.len(), 4);
        assert!(g.iter().all(|s| s.len() == 6));
        for z in 0..4 {
            for x in 0..3 {
                for y in 0..2 {
                    assert_eq!(g[z][x * 2 + y], f.cell([x, y, z]));
                }
            }
        }
        assert_eq!(height_ungroup(&g, f.dims, 2, 0).unwrap(), f);
    }

    #[test]
    fn zero_head_gives_uniform_state() {
        let mut init = Init::new(4);
        let f = volume([4, 4, 2], 4, 2);
        let blocks = vec![MltBlock::seeded(&mut init, 4)];
        let est = estimate_state(&Instruction::seeded(1, 3, 4), &f, &blocks, &ScoreMlp::zeros(4)).unwrap();
        for p in &est.dist.probs {
            assert!((p - 1.0 / 32.0).abs() < 1e-15);
        }
    }

    #[test]
    fn spike_takes_all_mass() {
        let mut logits = vec![0.0; 8];
        logits[5] = 60.0;
        let d = VolumeStateDist::from_logits([2, 2, 2], logits).unwrap();
        assert!(d.probs[5] > 1.0 - 1e-12);
        assert_eq!(d.argmax(), 5);
    }

    #[test]
    fn instruction_width_must_match() {
        let f = volume([2, 2, 1], 4, 2);
        let err = estimate_state(&Instruction::seeded(1, 2, 3), &f, &[], &ScoreMlp::zeros(4));
        assert!(err.is_err());
    }
}
