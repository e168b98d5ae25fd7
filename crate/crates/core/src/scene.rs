//! Scene substrate: class table, labeled point clouds, navigation graphs,
//! instructions and per-viewpoint camera rigs.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::camera::Camera;
use crate::error::{Error, Result};
use crate::grid::{GridSpec, Vec3};

pub type ClassId = u16;
pub type NodeId = u32;

pub const WALL: ClassId = 11;
pub const FLOOR: ClassId = 12;
pub const CEILING: ClassId = 13;
pub const STAIRS: ClassId = 14;
pub const OTHER: ClassId = 15;

/// Number of foreground (object) classes in the default table.
pub const FOREGROUND_CLASSES: usize = 11;

#[derive(Debug, Clone, PartialEq)]
pub struct ClassEntry {
    pub name: String,
    pub stuff: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassTable {
    pub entries: Vec<ClassEntry>,
}

impl Default for ClassTable {
    /// 11 foreground object classes followed by 5 background stuff classes.
    fn default() -> Self {
        let fg = [
            "chair", "table", "sofa", "bed", "cabinet", "plant", "tv_monitor", "sink", "toilet",
            "bathtub", "shelving",
        ];
        let stuff = ["wall", "floor", "ceiling", "stairs", "other"];
        let entries = fg
            .iter()
            .map(|n| ClassEntry { name: n.to_string(), stuff: false })
            .chain(stuff.iter().map(|n| ClassEntry { name: n.to_string(), stuff: true }))
            .collect();
        Self { entries }
    }
}

impl ClassTable {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn is_stuff(&self, class: ClassId) -> bool {
        self.entries.get(class as usize).is_some_and(|e| e.stuff)
    }

    pub fn name(&self, class: ClassId) -> &str {
        self.entries.get(class as usize).map_or("?", |e| e.name.as_str())
    }
}

/// Labeled 3D points; `instances[i]` is `None` for background stuff.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SemanticPointCloud {
    pub points: Vec<Vec3>,
    pub labels: Vec<ClassId>,
    pub instances: Vec<Option<u32>>,
}

impl SemanticPointCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn push(&mut self, p: Vec3, label: ClassId, instance: Option<u32>) {
        self.points.push(p);
        self.labels.push(label);
        self.instances.push(instance);
    }

    pub fn validate(&self, classes: &ClassTable) -> Result<()> {
        if self.labels.len() != self.points.len() || self.instances.len() != self.points.len() {
            return Err(Error::invalid(
                "points",
                format!(
                    "length mismatch: {} points, {} labels, {} instances",
                    self.points.len(),
                    self.labels.len(),
                    self.instances.len()
                ),
            ));
        }
        for (i, (&label, inst)) in self.labels.iter().zip(&self.instances).enumerate() {
            if label as usize >= classes.len() {
                return Err(Error::invalid(format!("points[{i}].label"), format!("class {label} out of range")));
            }
            if !classes.is_stuff(label) && inst.is_none() {
                return Err(Error::invalid(
                    format!("points[{i}].instance"),
                    "foreground point without instance id",
                ));
            }
            if self.points[i].iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("points[{i}].position"), "non-finite"));
            }
        }
        Ok(())
    }

    /// Points inside the closed box of `spec`.
    pub fn crop(&self, spec: &GridSpec) -> SemanticPointCloud {
        let mut out = SemanticPointCloud::default();
        for i in 0..self.len() {
            if spec.contains(&self.points[i]) {
                out.push(self.points[i], self.labels[i], self.instances[i]);
            }
        }
        out
    }
}

/// Undirected navigation graph over viewpoints.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SceneGraph {
    nodes: BTreeMap<NodeId, Vec3>,
    edges: BTreeSet<(NodeId, NodeId)>,
}

impl SceneGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_node(&mut self, id: NodeId, pos: Vec3) {
        self.nodes.insert(id, pos);
    }

    /// Stores the pair ordered; endpoints are not checked here, see [`SceneGraph::validate`].
    pub fn add_edge(&mut self, a: NodeId, b: NodeId) {
        self.edges.insert((a.min(b), a.max(b)));
    }

    pub fn nodes(&self) -> &BTreeMap<NodeId, Vec3> {
        &self.nodes
    }

    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.edges.iter().copied()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn position(&self, id: NodeId) -> Option<Vec3> {
        self.nodes.get(&id).copied()
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.nodes.contains_key(&id)
    }

    pub fn has_edge(&self, a: NodeId, b: NodeId) -> bool {
        self.edges.contains(&(a.min(b), a.max(b)))
    }

    /// Neighbors in ascending id order.
    pub fn neighbors(&self, id: NodeId) -> Vec<NodeId> {
        let mut out: Vec<NodeId> = self
            .edges
            .iter()
            .filter_map(|&(a, b)| {
                if a == id {
                    Some(b)
                } else if b == id {
                    Some(a)
                } else {
                    None
                }
            })
            .collect();
        out.sort_unstable();
        out
    }

    pub fn is_connected(&self) -> bool {
        let Some(&start) = self.nodes.keys().next() else {
            return true;
        };
        let mut seen = BTreeSet::from([start]);
        let mut queue = VecDeque::from([start]);
        while let Some(n) = queue.pop_front() {
            for m in self.neighbors(n) {
                if seen.insert(m) {
                    queue.push_back(m);
                }
            }
        }
        seen.len() == self.nodes.len()
    }

    pub fn validate(&self) -> Result<()> {
        for &(a, b) in &self.edges {
            for end in [a, b] {
                if !self.nodes.contains_key(&end) {
                    return Err(Error::invalid(
                        format!("graph.edge({a},{b})"),
                        format!("endpoint {end} is not a viewpoint"),
                    ));
                }
            }
            if a == b {
                return Err(Error::invalid(format!("graph.edge({a},{b})"), "self loop"));
            }
        }
        if !self.is_connected() {
            return Err(Error::invalid("graph", "viewpoint graph is not connected"));
        }
        Ok(())
    }

    /// Shortest path by Euclidean edge length (Dijkstra), ties by node id.
    pub fn shortest_path(&self, from: NodeId, to: NodeId) -> Option<Vec<NodeId>> {
        crate::sim::dijkstra(from, to, |n| {
            self.neighbors(n)
                .into_iter()
                .map(|m| (m, (self.nodes[&n] - self.nodes[&m]).norm()))
                .collect()
        })
    }
}

/// Instruction as `L` token embeddings of dimension `D_w`.
#[derive(Debug, Clone, PartialEq)]
pub struct Instruction {
    tokens: Vec<Vec<f64>>,
    pub text: Option<String>,
}

impl Instruction {
    pub fn new(tokens: Vec<Vec<f64>>, text: Option<String>) -> Result<Self> {
        let Some(first) = tokens.first() else {
            return Err(Error::invalid("instruction.tokens", "needs at least one token"));
        };
        let d = first.len();
        if d == 0 || tokens.iter().any(|t| t.len() != d) {
            return Err(Error::invalid("instruction.tokens", "inconsistent embedding width"));
        }
        if tokens.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::invalid("instruction.tokens", "non-finite value"));
        }
        Ok(Self { tokens, text })
    }

    /// Seeded stand-in for word embeddings, entries ~ N(0, 1/D).
    pub fn seeded(seed: u64, len: usize, dim: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scale = 1.0 / (dim as f64).sqrt();
        let tokens = (0..len.max(1))
            .map(|_| {
                (0..dim)
                    .map(|_| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        z * scale
                    })
                    .collect()
            })
            .collect();
        Self { tokens, text: None }
    }

    pub fn tokens(&self) -> &[Vec<f64>] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.tokens[0].len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneHeader {
    pub version: u32,
    pub classes: ClassTable,
    pub grid: GridSpec,
}

impl Default for SceneHeader {
    fn default() -> Self {
        Self {
            version: crate::scene_io::FORMAT_VERSION,
            classes: ClassTable::default(),
            grid: GridSpec::perception_default(),
        }
    }
}

/// Everything an episode or annotation job needs about one environment.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub header: SceneHeader,
    pub cloud: SemanticPointCloud,
    pub graph: SceneGraph,
    pub cameras: BTreeMap<NodeId, Vec<Camera>>,
    /// Generator ground truth, present for synthetic scenes.
    pub truth: Option<crate::synth::SceneTruth>,
}

impl Scene {
    pub fn validate(&self) -> Result<()> {
        self.cloud.validate(&self.header.classes)?;
        self.graph.validate()?;
        for id in self.cameras.keys() {
            if !self.graph.contains(*id) {
                return Err(Error::invalid(
                    format!("cameras[{id}]"),
                    "rig for a viewpoint missing from the graph",
                ));
            }
        }
        Ok(())
    }

    pub fn viewpoint(&self, id: NodeId) -> Result<Vec3> {
        self.graph
            .position(id)
            .ok_or_else(|| Error::invalid("viewpoint", format!("{id} is not in the scene graph")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn class_table_layout() {
        let t = ClassTable::default();
        assert_eq!(t.len(), 16);
        assert_eq!(t.entries.iter().filter(|e| e.stuff).count(), 5);
        assert_eq!(t.name(WALL), "wall");
        assert!(t.is_stuff(FLOOR) && !t.is_stuff(0));
    }

    #[test]
    fn foreground_needs_instance() {
        let mut c = SemanticPointCloud::default();
        c.push(Vec3::zeros(), 2, None);
        assert!(c.validate(&ClassTable::default()).is_err());
        c.instances[0] = Some(4);
        assert!(c.validate(&ClassTable::default()).is_ok());
    }

    #[test]
    fn graph_validation_names_edge() {
        let mut g = SceneGraph::new();
        g.add_node(1, Vec3::zeros());
        g.add_edge(1, 9);
        let err = g.validate().unwrap_err().to_string();
        assert!(err.contains("edge(1,9)"), "{err}");
    }

    #[test]
    fn shortest_path_prefers_short_edges() {
        let mut g = SceneGraph::new();
        g.add_node(0, Vec3::new(0.0, 0.0, 0.0));
        g.add_node(1, Vec3::new(1.0, 1.0, 0.0));
        g.add_node(2, Vec3::new(2.0, 0.0, 0.0));
        g.add_node(3, Vec3::new(1.0, 5.0, 0.0));
        g.add_edge(0, 1);
        g.add_edge(1, 2);
        g.add_edge(0, 3);
        g.add_edge(3, 2);
        assert_eq!(g.shortest_path(0, 2), Some(vec![0, 1, 2]));
        assert!(g.validate().is_ok());
    }

    #[test]
    fn instruction_rejects_ragged() {
        assert!(Instruction::new(vec![], None).is_err());
        assert!(Instruction::new(vec![vec![1.0], vec![1.0, 2.0]], None).is_err());
        let i = Instruction::seeded(3, 4, 8);
        assert_eq!((i.len(), i.dim()), (4, 8));
        assert_eq!(i, Instruction::seeded(3, 4, 8));
    }
}
