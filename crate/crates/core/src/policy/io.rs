//! Text records for policy inputs and outputs.
//!
//! Instruction: optional `text ...` line, then one `token v1 .. vD` line per
//! token. Graph: `node id x y z visits e1 .. eD`, `edge a b`, `current id`
//! and `candidate id x y z` lines (the first candidate is the viewpoint).
//! Action distribution: `node_id prob` per line.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use super::{ActionDist, EpisodicGraph, MemoryNode};
use crate::error::{Error, Result};
use crate::grid::Vec3;
use crate::scene::{Instruction, NodeId};

fn nums<T: std::str::FromStr>(ctx: &str, line: usize, words: &[&str]) -> Result<Vec<T>> {
    words
        .iter()
        .map(|w| w.parse().map_err(|_| Error::parse(format!("{ctx} line {line}"), format!("bad number {w:?}"))))
        .collect()
}

fn records(text: &str) -> impl Iterator<Item = (usize, &str, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, l)| {
        let mut w = l.split_whitespace();
        w.next().map(|k| (i + 1, k, w.collect()))
    })
}

pub fn write_instruction(instr: &Instruction) -> String {
    let mut s = String::new();
    if let Some(t) = &instr.text {
        let _ = writeln!(s, "text {}", t.replace('\n', " "));
    }
    for tok in instr.tokens() {
        s.push_str("token");
        for v in tok {
            let _ = write!(s, " {v}");
        }
        s.push('\n');
    }
    s
}

pub fn read_instruction(text: &str) -> Result<Instruction> {
    let mut tokens = Vec::new();
    let mut label = None;
    for (line, key, rest) in records(text) {
        match key {
            "text" => label = Some(rest.join(" ")),
            "token" => tokens.push(nums("instruction", line, &rest)?),
            _ => return Err(Error::parse(format!("instruction line {line}"), format!("unknown record {key:?}"))),
        }
    }
    Instruction::new(tokens, label)
}

/// Memory graph plus the candidates observed at the current step.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GraphFile {
    pub graph: EpisodicGraph,
    pub candidates: Vec<(NodeId, Vec3)>,
}

impl GraphFile {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for n in &self.graph.nodes {
            let _ = write!(s, "node {} {} {} {} {}", n.id, n.position.x, n.position.y, n.position.z, n.visits);
            for v in &n.embedding {
                let _ = write!(s, " {v}");
            }
            s.push('\n');
        }
        for (a, b) in &self.graph.edges {
            let _ = writeln!(s, "edge {a} {b}");
        }
        if let Some(c) = self.graph.current {
            let _ = writeln!(s, "current {c}");
        }
        for (id, p) in &self.candidates {
            let _ = writeln!(s, "candidate {id} {} {} {}", p.x, p.y, p.z);
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let err = |line: usize, m: &str| Error::parse(format!("graph line {line}"), m.to_string());
        let mut out = GraphFile::default();
        let mut edges = BTreeSet::new();
        for (line, key, rest) in records(text) {
            match key {
                "node" if rest.len() >= 5 => {
                    let head: Vec<f64> = nums("graph", line, &rest[1..4])?;
                    let id: Vec<NodeId> = nums("graph", line, &rest[..1])?;
                    let visits: Vec<u32> = nums("graph", line, &rest[4..5])?;
                    if out.graph.contains(id[0]) {
                        return Err(err(line, "duplicate node"));
                    }
                    if visits[0] == 0 {
                        return Err(err(line, "visit count must be positive"));
                    }
                    out.graph.nodes.push(MemoryNode {
                        id: id[0],
                        position: Vec3::new(head[0], head[1], head[2]),
                        embedding: nums("graph", line, &rest[5..])?,
                        visits: visits[0],
                    });
                }
                "edge" if rest.len() == 2 => {
                    let ab: Vec<NodeId> = nums("graph", line, &rest)?;
                    edges.insert((ab[0].min(ab[1]), ab[0].max(ab[1])));
                }
                "current" if rest.len() == 1 => out.graph.current = Some(nums("graph", line, &rest)?[0]),
                "candidate" if rest.len() == 4 => {
                    let id: Vec<NodeId> = nums("graph", line, &rest[..1])?;
                    let p: Vec<f64> = nums("graph", line, &rest[1..])?;
                    out.candidates.push((id[0], Vec3::new(p[0], p[1], p[2])));
                }
                _ => return Err(err(line, &format!("malformed {key:?} record"))),
            }
        }
        if let Some(w) = out.graph.nodes.first().map(|n| n.embedding.len()) {
            if out.graph.nodes.iter().any(|n| n.embedding.len() != w) {
                return Err(Error::Shape("node embeddings differ in width".into()));
            }
        }
        if edges.iter().any(|(a, b)| !out.graph.contains(*a) || !out.graph.contains(*b)) {
            return Err(Error::invalid("graph.edges", "edge endpoint is not a node"));
        }
        out.graph.edges = edges;
        Ok(out)
    }
}

pub fn write_action_dist(d: &ActionDist) -> String {
    let mut s = String::new();
    for (id, p) in d.ids.iter().zip(&d.probs) {
        let _ = writeln!(s, "{id} {p}");
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn instruction_round_trip() {
        let mut i = Instruction::seeded(4, 3, 5);
        i.text = Some("walk past the sofa".into());
        assert_eq!(read_instruction(&write_instruction(&i)).unwrap(), i);
        assert!(read_instruction("word 1 2").is_err());
    }

    #[test]
    fn graph_round_trip() {
        let mut g = EpisodicGraph::new();
        g.observe(&[(3, Vec3::new(0.1, 0.2, 1.5)), (7, Vec3::new(1.0 / 3.0, 2.0, 1.5))], &[vec![0.1, -2.5], vec![1e-9, 4.0]])
            .unwrap();
        let f = GraphFile { graph: g, candidates: vec![(7, Vec3::new(1.0 / 3.0, 2.0, 1.5)), (3, Vec3::zeros())] };
        assert_eq!(GraphFile::from_text(&f.to_text()).unwrap(), f);
        assert!(GraphFile::from_text("edge 1 2").is_err());
    }
}
