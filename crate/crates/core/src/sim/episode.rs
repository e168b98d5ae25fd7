//! Episodes, trajectories and their line-oriented text files.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::policy::ActionDist;
use crate::scene::{Instruction, NodeId, Scene};

#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub id: u32,
    /// Free-form label of the scene the episode belongs to.
    pub scene: String,
    pub start: NodeId,
    pub goals: Vec<NodeId>,
    /// Reference walk from `start` to a goal.
    pub path: Vec<NodeId>,
    pub max_steps: usize,
    pub instruction_seed: u64,
    pub instruction_len: usize,
    /// Target object instance for grounding.
    pub object: Option<u32>,
}

impl Episode {
    pub fn validate(&self, scene: &Scene) -> Result<()> {
        let g = &scene.graph;
        let field = |f: &str| format!("episode {}.{f}", self.id);
        for &n in std::iter::once(&self.start).chain(&self.goals).chain(&self.path) {
            if !g.contains(n) {
                return Err(Error::invalid(field("nodes"), format!("{n} is not in the scene graph")));
            }
        }
        if self.goals.is_empty() || self.max_steps == 0 || self.instruction_len == 0 {
            return Err(Error::invalid(field("goals"), "needs a goal, a positive step limit and instruction length"));
        }
        if self.path.first() != Some(&self.start) || !self.goals.contains(self.path.last().unwrap()) {
            return Err(Error::invalid(field("path"), "must run from start to a goal"));
        }
        if self.path.windows(2).any(|w| !g.has_edge(w[0], w[1])) {
            return Err(Error::invalid(field("path"), "consecutive nodes must be connected"));
        }
        Ok(())
    }

    pub fn instruction(&self, dim: usize) -> Instruction {
        Instruction::seeded(self.instruction_seed, self.instruction_len, dim)
    }
}

/// Seeded start/goal pairs joined by shortest paths. Goals are preferably
/// at least two edges away.
pub fn generate_episodes(scene: &Scene, label: &str, count: usize, seed: u64, max_steps: usize) -> Result<Vec<Episode>> {
    let ids: Vec<NodeId> = scene.graph.nodes().keys().copied().collect();
    if ids.len() < 2 {
        return Err(Error::Degenerate("episodes need at least two viewpoints".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs: Vec<(NodeId, NodeId, Vec<NodeId>)> = Vec::new();
    for &a in &ids {
        for &b in &ids {
            if a != b {
                if let Some(p) = scene.graph.shortest_path(a, b) {
                    pairs.push((a, b, p));
                }
            }
        }
    }
    let far: Vec<_> = pairs.iter().filter(|p| p.2.len() >= 3).cloned().collect();
    let mut pool = if far.is_empty() { pairs } else { far };
    if pool.is_empty() {
        return Err(Error::Degenerate("no connected viewpoint pairs".into()));
    }
    pool.shuffle(&mut rng);
    Ok((0..count)
        .map(|i| {
            let (start, goal, path) = pool[i % pool.len()].clone();
            let object = scene.truth.as_ref().and_then(|t| {
                let room = t.viewpoint_room.get(&goal)?;
                t.objects.iter().find(|o| o.room == *room).map(|o| o.instance)
            });
            Episode {
                id: i as u32,
                scene: label.to_string(),
                start,
                goals: vec![goal],
                path,
                max_steps,
                instruction_seed: seed.wrapping_mul(1000).wrapping_add(i as u64),
                instruction_len: 8,
                object,
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Stop,
    StepLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub chosen: NodeId,
    pub prob: f64,
    pub dist: ActionDist,
    pub object: Option<(u32, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub episode: u32,
    /// Every viewpoint passed through, starting at the start node.
    pub walk: Vec<NodeId>,
    pub steps: Vec<StepRecord>,
    pub reason: Termination,
}

impl Trajectory {
    /// Object chosen at the final step, if any.
    pub fn chosen_object(&self) -> Option<u32> {
        self.steps.last().and_then(|s| s.object).map(|o| o.0)
    }
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

pub fn write_episodes(episodes: &[Episode]) -> String {
    let mut s = String::new();
    for e in episodes {
        let _ = writeln!(s, "episode {}", e.id);
        let _ = writeln!(s, "scene {}", e.scene);
        let _ = writeln!(s, "start {}", e.start);
        let _ = writeln!(s, "goals {}", join(&e.goals));
        let _ = writeln!(s, "path {}", join(&e.path));
        let _ = writeln!(s, "max_steps {}", e.max_steps);
        let _ = writeln!(s, "instruction {} {}", e.instruction_seed, e.instruction_len);
        if let Some(o) = e.object {
            let _ = writeln!(s, "object {o}");
        }
        s.push_str("end\n");
    }
    s
}

struct Lines<'a> {
    it: std::iter::Enumerate<std::str::Lines<'a>>,
    context: &'static str,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str, context: &'static str) -> Self {
        Self { it: text.lines().enumerate(), context }
    }

    /// Next non-blank line as (line number, keyword, rest).
    fn next(&mut self) -> Option<(usize, &'a str, Vec<&'a str>)> {
        for (i, line) in self.it.by_ref() {
            let mut words = line.split_whitespace();
            if let Some(k) = words.next() {
                return Some((i + 1, k, words.collect()));
            }
        }
        None
    }

    fn err(&self, line: usize, msg: impl std::fmt::Display) -> Error {
        Error::parse(format!("{} line {line}", self.context), msg.to_string())
    }

    fn num<T: std::str::FromStr>(&self, line: usize, w: &str) -> Result<T> {
        w.parse().map_err(|_| self.err(line, format!("bad number {w:?}")))
    }

    fn nums<T: std::str::FromStr>(&self, line: usize, ws: &[&str]) -> Result<Vec<T>> {
        ws.iter().map(|w| self.num(line, w)).collect()
    }

    fn one<T: std::str::FromStr>(&self, line: usize, ws: &[&str]) -> Result<T> {
        match ws {
            [w] => self.num(line, w),
            _ => Err(self.err(line, "expected one value")),
        }
    }
}

pub fn read_episodes(text: &str) -> Result<Vec<Episode>> {
    let mut lines = Lines::new(text, "episodes");
    let mut out = Vec::new();
    while let Some((ln, key, rest)) = lines.next() {
        if key != "episode" {
            return Err(lines.err(ln, format!("expected `episode`, found `{key}`")));
        }
        let mut e = Episode {
            id: lines.one(ln, &rest)?,
            scene: String::new(),
            start: 0,
            goals: Vec::new(),
            path: Vec::new(),
            max_steps: super::DEFAULT_MAX_STEPS,
            instruction_seed: 0,
            instruction_len: 0,
            object: None,
        };
        let mut have_start = false;
        loop {
            let Some((ln, key, rest)) = lines.next() else {
                return Err(lines.err(ln, "unterminated episode"));
            };
            match key {
                "scene" => e.scene = rest.join(" "),
                "start" => {
                    e.start = lines.one(ln, &rest)?;
                    have_start = true;
                }
                "goals" => e.goals = lines.nums(ln, &rest)?,
                "path" => e.path = lines.nums(ln, &rest)?,
                "max_steps" => e.max_steps = lines.one(ln, &rest)?,
                "instruction" => match rest.as_slice() {
                    [s, l] => {
                        e.instruction_seed = lines.num(ln, s)?;
                        e.instruction_len = lines.num(ln, l)?;
                    }
                    _ => return Err(lines.err(ln, "expected `instruction <seed> <len>`")),
                },
                "object" => e.object = Some(lines.one(ln, &rest)?),
                "end" => break,
                other => return Err(lines.err(ln, format!("unknown key `{other}`"))),
            }
        }
        if !have_start || e.goals.is_empty() || e.path.is_empty() || e.instruction_len == 0 {
            return Err(lines.err(ln, format!("episode {} is missing start, goals, path or instruction", e.id)));
        }
        out.push(e);
    }
    Ok(out)
}

pub fn write_trajectories(trajs: &[Trajectory]) -> String {
    let mut s = String::new();
    for t in trajs {
        let _ = writeln!(s, "trajectory {}", t.episode);
        let _ = writeln!(s, "walk {}", join(&t.walk));
        for (i, st) in t.steps.iter().enumerate() {
            let _ = write!(s, "step {i} {} {}", st.chosen, st.prob);
            if let Some((o, p)) = st.object {
                let _ = write!(s, " object {o} {p}");
            }
            s.push('\n');
            let pairs: Vec<String> = st.dist.ids.iter().zip(&st.dist.probs).map(|(i, p)| format!("{i}:{p}")).collect();
            let _ = writeln!(s, "dist {}", pairs.join(" "));
        }
        let reason = match t.reason {
            Termination::Stop => "STOP",
            Termination::StepLimit => "step-limit",
        };
        let _ = writeln!(s, "reason {reason}");
        s.push_str("end\n");
    }
    s
}

pub fn read_trajectories(text: &str) -> Result<Vec<Trajectory>> {
    let mut lines = Lines::new(text, "trajectories");
    let mut out = Vec::new();
    while let Some((ln, key, rest)) = lines.next() {
        if key != "trajectory" {
            return Err(lines.err(ln, format!("expected `trajectory`, found `{key}`")));
        }
        let mut t = Trajectory { episode: lines.one(ln, &rest)?, walk: Vec::new(), steps: Vec::new(), reason: Termination::StepLimit };
        let mut pending: Option<(NodeId, f64, Option<(u32, f64)>)> = None;
        let mut have_reason = false;
        loop {
            let Some((ln, key, rest)) = lines.next() else {
                return Err(lines.err(ln, "unterminated trajectory"));
            };
            match key {
                "walk" => t.walk = lines.nums(ln, &rest)?,
                "step" => {
                    if pending.is_some() {
                        return Err(lines.err(ln, "step without dist"));
                    }
                    let (idx, chosen, prob, object) = match rest.as_slice() {
                        [i, c, p] => (lines.num::<usize>(ln, i)?, lines.num(ln, c)?, lines.num(ln, p)?, None),
                        [i, c, p, "object", o, q] => (
                            lines.num::<usize>(ln, i)?,
                            lines.num(ln, c)?,
                            lines.num(ln, p)?,
                            Some((lines.num(ln, o)?, lines.num(ln, q)?)),
                        ),
                        _ => return Err(lines.err(ln, "expected `step <t> <node> <prob> [object <id> <prob>]`")),
                    };
                    if idx != t.steps.len() {
                        return Err(lines.err(ln, "steps out of order"));
                    }
                    pending = Some((chosen, prob, object));
                }
                "dist" => {
                    let Some((chosen, prob, object)) = pending.take() else {
                        return Err(lines.err(ln, "dist without step"));
                    };
                    let mut ids = Vec::new();
                    let mut probs = Vec::new();
                    for w in rest {
                        let (i, p) = w.split_once(':').ok_or_else(|| lines.err(ln, "expected id:prob"))?;
                        ids.push(lines.num(ln, i)?);
                        probs.push(lines.num(ln, p)?);
                    }
                    let dist = ActionDist::new(ids, probs).map_err(|e| lines.err(ln, e))?;
                    t.steps.push(StepRecord { chosen, prob, dist, object });
                }
                "reason" => {
                    t.reason = match rest.as_slice() {
                        ["STOP"] => Termination::Stop,
                        ["step-limit"] => Termination::StepLimit,
                        _ => return Err(lines.err(ln, "reason must be STOP or step-limit")),
                    };
                    have_reason = true;
                }
                "end" => break,
                other => return Err(lines.err(ln, format!("unknown key `{other}`"))),
            }
        }
        if t.walk.is_empty() || !have_reason || pending.is_some() {
            return Err(lines.err(ln, format!("trajectory {} is incomplete", t.episode)));
        }
        out.push(t);
    }
    Ok(out)
}
