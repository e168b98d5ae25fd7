//! Episode execution: observe, decide, move (expanding memory jumps into
//! walks over observed edges) until STOP or the step limit.

mod agent;
mod episode;
mod path;

pub use agent::{instance_centroids, viewpoint_cameras, VerAgent};
pub use episode::{
    generate_episodes, read_episodes, read_trajectories, write_episodes, write_trajectories, Episode, StepRecord,
    Termination, Trajectory,
};
pub use path::dijkstra;

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::Vec3;
use crate::policy::ActionDist;
use crate::scene::{NodeId, Scene};

pub const DEFAULT_MAX_STEPS: usize = 15;

/// What the policy sees at one step. `candidates[0]` is the current
/// viewpoint; the rest are its navigable neighbors.
pub struct Observation<'a> {
    pub step: usize,
    pub viewpoint: NodeId,
    pub position: Vec3,
    pub candidates: &'a [(NodeId, Vec3)],
}

pub struct Decision {
    /// Distribution over node ids the agent knows; the current viewpoint
    /// means STOP.
    pub dist: ActionDist,
    /// Object choice with its probability, when grounding is enabled.
    pub object: Option<(u32, f64)>,
}

pub trait Policy {
    fn decide(&mut self, obs: &Observation) -> Result<Decision>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Argmax,
    Sample(u64),
}

/// Agent position plus what it has observed so far.
pub struct Env<'a> {
    scene: &'a Scene,
    pub current: NodeId,
    pub walk: Vec<NodeId>,
    pub visited: BTreeSet<NodeId>,
    pub observed_edges: BTreeSet<(NodeId, NodeId)>,
}

impl<'a> Env<'a> {
    pub fn new(scene: &'a Scene, start: NodeId) -> Result<Self> {
        scene.viewpoint(start)?;
        Ok(Self {
            scene,
            current: start,
            walk: vec![start],
            visited: BTreeSet::from([start]),
            observed_edges: BTreeSet::new(),
        })
    }

    /// Current viewpoint followed by its neighbors (ascending id); their
    /// edges become observed.
    pub fn candidates(&mut self) -> Vec<(NodeId, Vec3)> {
        let g = &self.scene.graph;
        let here = self.current;
        let mut out = vec![(here, g.position(here).expect("current node is in the graph"))];
        for n in g.neighbors(here) {
            self.observed_edges.insert((here.min(n), here.max(n)));
            out.push((n, g.position(n).expect("neighbor is in the graph")));
        }
        out
    }

    /// Moves to `target`: directly along an edge, or along the shortest
    /// observed path whose intermediate nodes were all visited. Returns the
    /// nodes appended to the walk.
    pub fn step(&mut self, target: NodeId) -> Result<Vec<NodeId>> {
        if target == self.current {
            return Ok(Vec::new());
        }
        let g = &self.scene.graph;
        let edges = &self.observed_edges;
        let visited = &self.visited;
        let start = self.current;
        let path = dijkstra(start, target, |n| {
            if n != start && !visited.contains(&n) {
                return Vec::new();
            }
            g.neighbors(n)
                .into_iter()
                .filter(|&m| edges.contains(&(n.min(m), n.max(m))))
                .map(|m| (m, (g.nodes()[&n] - g.nodes()[&m]).norm()))
                .collect()
        })
        .ok_or(Error::Unreachable(target))?;
        let moved = path[1..].to_vec();
        self.walk.extend(&moved);
        self.visited.extend(&moved);
        self.current = target;
        Ok(moved)
    }
}

fn choose(dist: &ActionDist, rng: &mut Option<ChaCha8Rng>) -> usize {
    match rng {
        None => dist.argmax(),
        Some(r) => {
            let mut u: f64 = r.random::<f64>() * dist.total();
            for (i, p) in dist.probs.iter().enumerate() {
                if u < *p {
                    return i;
                }
                u -= p;
            }
            dist.probs.len() - 1
        }
    }
}

/// Runs one episode. Every recorded distribution is checked to sum to 1.
pub fn run_episode(scene: &Scene, episode: &Episode, policy: &mut dyn Policy, mode: Mode) -> Result<Trajectory> {
    episode.validate(scene)?;
    let mut env = Env::new(scene, episode.start)?;
    let mut rng = match mode {
        Mode::Argmax => None,
        Mode::Sample(seed) => Some(ChaCha8Rng::seed_from_u64(seed ^ (episode.id as u64).rotate_left(32))),
    };
    let mut steps = Vec::new();
    let mut reason = Termination::StepLimit;
    for step in 0..episode.max_steps {
        let candidates = env.candidates();
        let obs = Observation { step, viewpoint: env.current, position: candidates[0].1, candidates: &candidates };
        let decision = policy.decide(&obs)?;
        let total = decision.dist.total();
        if (total - 1.0).abs() > 1e-6 || decision.dist.probs.iter().any(|&p| !(p >= 0.0)) {
            return Err(Error::invalid("decision", format!("distribution sums to {total}")));
        }
        let k = choose(&decision.dist, &mut rng);
        let chosen = decision.dist.ids[k];
        let known = chosen == env.current
            || env.visited.contains(&chosen)
            || env.observed_edges.iter().any(|&(a, b)| a == chosen || b == chosen);
        if !known {
            return Err(Error::Unreachable(chosen));
        }
        let moved = env.step(chosen)?;
        steps.push(StepRecord { chosen, prob: decision.dist.probs[k], dist: decision.dist, object: decision.object });
        if moved.is_empty() {
            reason = Termination::Stop;
            break;
        }
    }
    Ok(Trajectory { episode: episode.id, walk: env.walk, steps, reason })
}

/// Runs every episode with a fresh [`VerAgent`]; episodes are independent
/// and run in parallel when the `parallel` feature is on. Output order
/// follows `episodes`.
pub fn simulate(
    scene: &Scene,
    episodes: &[Episode],
    renderer: &crate::views::Renderer,
    encoder: &crate::encoder::EncoderParams,
    policy: &crate::policy::PolicyParams,
    mode: Mode,
) -> Result<Vec<Trajectory>> {
    let run = |e: &Episode| {
        let mut agent = VerAgent::new(scene, renderer, encoder, policy, e.instruction(policy.config.channels));
        run_episode(scene, e, &mut agent, mode)
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        episodes.par_iter().map(run).collect()
    }
    #[cfg(not(feature = "parallel"))]
    episodes.iter().map(run).collect()
}
