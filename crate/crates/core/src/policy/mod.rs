//! Navigation policy: volume state estimation, local actions from the
//! state, pillar embeddings in an episodic graph, a global action over
//! that graph, and their fusion.

mod action;
mod grounding;
mod io;
mod memory;
mod mlt;
mod state;

pub use action::{
    fuse_actions, heatmap_loss, heatmap_target, map_state_to_action, neighborhood, neighborhood_center, ActionDist,
    HEATMAP_SIGMA,
};
pub use grounding::object_grounding;
pub use io::{read_instruction, write_action_dist, write_instruction, GraphFile};
pub use memory::{extract_pillar, global_action, update_memory, EpisodicGraph, MemoryNode};
pub use mlt::{mlt_forward, LayerNorm, MltBlock, ScoreMlp};
pub use state::{estimate_state, height_group, height_ungroup, StateEstimate, VolumeStateDist};

use crate::encoder::VolumeFeature;
use crate::error::{Error, Result};
use crate::grid::{GridSpec, Vec3};
use crate::params::{Init, Tensor, TensorStore};
use crate::scene::{Instruction, NodeId};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyConfig {
    pub channels: usize,
    pub state_layers: usize,
    pub graph_layers: usize,
    /// Weight of the global action in the fused distribution.
    pub w_g: f64,
    pub object_head: bool,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self { channels: 768, state_layers: 4, graph_layers: 4, w_g: 0.5, object_head: false }
    }
}

impl PolicyConfig {
    /// Width matching [`crate::encoder::EncoderConfig::desk`].
    pub fn desk() -> Self {
        Self { channels: 16, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.channels == 0 {
            return Err(Error::invalid("policy.channels", "must be positive"));
        }
        if !(0.0..=1.0).contains(&self.w_g) {
            return Err(Error::invalid("policy.w_g", format!("{} outside [0, 1]", self.w_g)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams {
    pub config: PolicyConfig,
    pub state_blocks: Vec<MltBlock>,
    pub state_head: ScoreMlp,
    pub graph_blocks: Vec<MltBlock>,
    pub graph_head: ScoreMlp,
    pub object_head: Option<ScoreMlp>,
}

impl PolicyParams {
    pub fn seeded(config: &PolicyConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let d = config.channels;
        let mut init = Init::new(seed);
        let state_blocks = (0..config.state_layers).map(|_| MltBlock::seeded(&mut init, d)).collect();
        let state_head = ScoreMlp::seeded(&mut init, d);
        let graph_blocks = (0..config.graph_layers).map(|_| MltBlock::seeded(&mut init, d)).collect();
        let graph_head = ScoreMlp::seeded(&mut init, d);
        let object_head = config.object_head.then(|| ScoreMlp::seeded(&mut init, d));
        Ok(Self { config: *config, state_blocks, state_head, graph_blocks, graph_head, object_head })
    }

    pub fn to_store(&self) -> TensorStore {
        let mut s = TensorStore::default();
        for (i, b) in self.state_blocks.iter().enumerate() {
            b.store(&mut s, &format!("policy.state{i}"));
        }
        self.state_head.store(&mut s, "policy.state_head");
        for (i, b) in self.graph_blocks.iter().enumerate() {
            b.store(&mut s, &format!("policy.graph{i}"));
        }
        self.graph_head.store(&mut s, "policy.graph_head");
        if let Some(h) = &self.object_head {
            h.store(&mut s, "policy.object_head");
        }
        s.insert("policy.w_g", Tensor { dims: vec![1], data: vec![self.config.w_g] });
        s
    }

    /// Loads with the layer counts and width of `config`; `w_g` comes from
    /// the file.
    pub fn from_store(config: &PolicyConfig, s: &TensorStore) -> Result<Self> {
        let d = config.channels;
        let w_g = s.get("policy.w_g", &[1])?.data[0];
        let config = PolicyConfig { w_g, ..*config };
        config.validate()?;
        Ok(Self {
            config,
            state_blocks: (0..config.state_layers)
                .map(|i| MltBlock::load(s, &format!("policy.state{i}"), d))
                .collect::<Result<_>>()?,
            state_head: ScoreMlp::load(s, "policy.state_head", d)?,
            graph_blocks: (0..config.graph_layers)
                .map(|i| MltBlock::load(s, &format!("policy.graph{i}"), d))
                .collect::<Result<_>>()?,
            graph_head: ScoreMlp::load(s, "policy.graph_head", d)?,
            object_head: if config.object_head { Some(ScoreMlp::load(s, "policy.object_head", d)?) } else { None },
        })
    }
}

/// Everything one decision produces.
#[derive(Debug, Clone)]
pub struct StepOutput {
    pub state: VolumeStateDist,
    pub local: ActionDist,
    pub global: ActionDist,
    pub fused: ActionDist,
    pub object: Option<ActionDist>,
}

/// One policy decision at the current viewpoint. `candidates[0]` is the
/// viewpoint itself; `graph` receives the pillar embeddings of all
/// candidates before the global action is computed.
pub fn policy_step(
    instr: &Instruction,
    feature: &VolumeFeature,
    spec: &GridSpec,
    candidates: &[(NodeId, Vec3)],
    objects: &[(u32, Vec3)],
    graph: &mut EpisodicGraph,
    params: &PolicyParams,
) -> Result<StepOutput> {
    let est = estimate_state(instr, feature, &params.state_blocks, &params.state_head)?;
    let local = map_state_to_action(&est.dist, candidates, spec)?;
    let embeddings = candidates
        .iter()
        .map(|(_, p)| extract_pillar(&est.updated, p, spec))
        .collect::<Result<Vec<_>>>()?;
    graph.observe(candidates, &embeddings)?;
    let global = global_action(instr, graph, &params.graph_blocks, &params.graph_head)?;
    let fused = fuse_actions(&local, &global, &graph.ids(), params.config.w_g)?;
    let object = match (&params.object_head, objects.is_empty()) {
        (Some(h), false) => Some(object_grounding(&est.updated, objects, spec, h)?),
        _ => None,
    };
    Ok(StepOutput { state: est.dist, local, global, fused, object })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn params_store_round_trip() {
        let cfg = PolicyConfig { channels: 4, state_layers: 2, graph_layers: 1, w_g: 0.25, object_head: true };
        let p = PolicyParams::seeded(&cfg, 3).unwrap();
        let back = PolicyParams::from_store(&cfg, &TensorStore::from_bytes(&p.to_store().to_bytes()).unwrap()).unwrap();
        assert_eq!(p, back);
        assert!(PolicyParams::seeded(&PolicyConfig { w_g: 1.5, ..cfg }, 1).is_err());
    }
}
