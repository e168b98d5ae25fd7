//! Episodic memory graph built online from pillar embeddings, and the
//! global action over its nodes.

use std::collections::BTreeSet;

use super::action::{neighborhood, neighborhood_center, ActionDist};
use super::mlt::{mlt_forward, MltBlock, ScoreMlp};
use super::state::check_instruction;
use crate::encoder::VolumeFeature;
use crate::error::{Error, Result};
use crate::grid::{GridSpec, Vec3};
use crate::params::softmax_in_place;
use crate::scene::{Instruction, NodeId};

/// Average of the updated features over the 3x3 pillar around `p`,
/// all heights included.
pub fn extract_pillar(f: &VolumeFeature, p: &Vec3, spec: &GridSpec) -> Result<Vec<f64>> {
    if spec.dims() != f.dims {
        return Err(Error::Shape(format!("feature {:?} vs grid {:?}", f.dims, spec.dims())));
    }
    let center = neighborhood_center(spec, p)?;
    let mut acc = vec![0.0; f.channels];
    let mut n = 0usize;
    for (x, y) in neighborhood(center) {
        for z in 0..f.dims[2] {
            for (a, v) in acc.iter_mut().zip(f.cell([x, y, z])) {
                *a += v;
            }
            n += 1;
        }
    }
    acc.iter_mut().for_each(|a| *a /= n as f64);
    Ok(acc)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MemoryNode {
    pub id: NodeId,
    pub position: Vec3,
    pub embedding: Vec<f64>,
    /// Number of embeddings averaged into this node.
    pub visits: u32,
}

/// Nodes in insertion order, undirected edges, and the current node.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EpisodicGraph {
    pub nodes: Vec<MemoryNode>,
    pub edges: BTreeSet<(NodeId, NodeId)>,
    pub current: Option<NodeId>,
}

impl EpisodicGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn ids(&self) -> Vec<NodeId> {
        self.nodes.iter().map(|n| n.id).collect()
    }

    pub fn node(&self, id: NodeId) -> Option<&MemoryNode> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.node(id).is_some()
    }

    pub fn has_edge(&self, a: NodeId, b: NodeId) -> bool {
        self.edges.contains(&(a.min(b), a.max(b)))
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Records one observation: `observed[0]` is the agent's viewpoint and
    /// becomes current, the rest are its navigable candidates. Known nodes
    /// fold the new embedding into their running mean.
    pub fn observe(&mut self, observed: &[(NodeId, Vec3)], embeddings: &[Vec<f64>]) -> Result<()> {
        if observed.is_empty() || observed.len() != embeddings.len() {
            return Err(Error::Shape(format!("{} nodes with {} embeddings", observed.len(), embeddings.len())));
        }
        if let Some(d) = self.nodes.first().map(|n| n.embedding.len()) {
            if embeddings.iter().any(|e| e.len() != d) {
                return Err(Error::Shape(format!("embeddings must have width {d}")));
            }
        }
        for (&(id, position), e) in observed.iter().zip(embeddings) {
            match self.nodes.iter_mut().find(|n| n.id == id) {
                Some(n) => {
                    n.visits += 1;
                    let k = n.visits as f64;
                    for (m, v) in n.embedding.iter_mut().zip(e) {
                        *m += (v - *m) / k;
                    }
                }
                None => self.nodes.push(MemoryNode { id, position, embedding: e.clone(), visits: 1 }),
            }
        }
        let here = observed[0].0;
        for &(id, _) in &observed[1..] {
            if id != here {
                self.edges.insert((here.min(id), here.max(id)));
            }
        }
        self.current = Some(here);
        Ok(())
    }
}

/// Functional form of [`EpisodicGraph::observe`].
pub fn update_memory(g: &EpisodicGraph, observed: &[(NodeId, Vec3)], embeddings: &[Vec<f64>]) -> Result<EpisodicGraph> {
    let mut next = g.clone();
    next.observe(observed, embeddings)?;
    Ok(next)
}

/// Self-attention over `[E; node embeddings]` and a normalized score per
/// node, in insertion order.
pub fn global_action(instr: &Instruction, g: &EpisodicGraph, blocks: &[MltBlock], head: &ScoreMlp) -> Result<ActionDist> {
    let Some(first) = g.nodes.first() else {
        return Err(Error::invalid("graph", "no nodes"));
    };
    check_instruction(instr, first.embedding.len())?;
    let mut tokens = instr.tokens().to_vec();
    tokens.extend(g.nodes.iter().map(|n| n.embedding.clone()));
    let out = mlt_forward(&tokens, blocks);
    let mut logits: Vec<f64> = out[instr.len()..].iter().map(|t| head.score(t)).collect();
    softmax_in_place(&mut logits);
    ActionDist::new(g.ids(), logits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::Init;

    #[test]
    fn fresh_graph_with_three_candidates() {
        let obs: Vec<(NodeId, Vec3)> = (0..4).map(|i| (i, Vec3::new(i as f64, 0.0, 0.0))).collect();
        let g = update_memory(&EpisodicGraph::new(), &obs, &vec![vec![1.0; 2]; 4]).unwrap();
        assert_eq!((g.len(), g.edges.len(), g.current), (4, 3, Some(0)));
        assert!(g.has_edge(2, 0));
    }

    #[test]
    fn revisit_averages() {
        let mut g = EpisodicGraph::new();
        g.observe(&[(7, Vec3::zeros())], &[vec![1.0, 4.0]]).unwrap();
        g.observe(&[(7, Vec3::zeros())], &[vec![3.0, -2.0]]).unwrap();
        assert_eq!(g.node(7).unwrap().embedding, vec![2.0, 1.0]);
        assert_eq!(g.node(7).unwrap().visits, 2);
        assert!(g.observe(&[(7, Vec3::zeros())], &[vec![1.0]]).is_err());
    }

    #[test]
    fn pillar_of_constant_volume() {
        let spec = GridSpec::from_dims((0.0, 5.0), (0.0, 5.0), (0.0, 2.0), [5, 5, 4]).unwrap();
        let mut f = VolumeFeature::zeros([5, 5, 4], 3, 0);
        f.data.iter_mut().for_each(|v| *v = 0.25);
        assert_eq!(extract_pillar(&f, &Vec3::new(2.5, 1.5, 0.0), &spec).unwrap(), vec![0.25; 3]);
        assert!(extract_pillar(&f, &Vec3::new(4.5, 2.5, 0.0), &spec).is_err());
    }

    #[test]
    fn single_node_and_zero_head() {
        let mut init = Init::new(9);
        let blocks = vec![MltBlock::seeded(&mut init, 3)];
        let instr = Instruction::seeded(2, 4, 3);
        let mut g = EpisodicGraph::new();
        g.observe(&[(5, Vec3::zeros())], &[vec![0.1, 0.2, 0.3]]).unwrap();
        let a = global_action(&instr, &g, &blocks, &ScoreMlp::seeded(&mut init, 3)).unwrap();
        assert_eq!((a.ids.clone(), a.probs.clone()), (vec![5], vec![1.0]));
        g.observe(&[(6, Vec3::zeros()), (5, Vec3::zeros()), (8, Vec3::zeros())], &vec![vec![0.5; 3]; 3]).unwrap();
        let a = global_action(&instr, &g, &blocks, &ScoreMlp::zeros(3)).unwrap();
        assert_eq!(a.ids, vec![5, 6, 8]);
        assert!(a.probs.iter().all(|p| (p - 1.0 / 3.0).abs() < 1e-15));
    }
}
