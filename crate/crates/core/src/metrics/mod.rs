//! Navigation, fidelity, grounding and perception metrics, and the
//! aggregated report.

mod nav;
mod perception;

pub use nav::{
    cls, dtw, fidelity_metrics, grounding_metrics, nav_metrics, path_length, spl_factor, FidelityScores, NavScores,
    SUCCESS_RADIUS,
};
pub use perception::{
    average_precision, detection_metrics, layout_iou, occupancy_metrics, Detection, DetectionScores, OccupancyScores,
    DETECTION_IOU, SCORED_CLASSES,
};

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::Vec3;
use crate::scene::{NodeId, Scene};
use crate::sim::{Episode, Trajectory};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpisodeMetrics {
    pub episode: u32,
    pub tl: f64,
    pub ne: f64,
    pub sr: f64,
    pub osr: f64,
    pub spl: f64,
    pub cls: f64,
    pub ndtw: f64,
    pub sdtw: f64,
    pub rgs: Option<f64>,
    pub rgspl: Option<f64>,
}

fn positions(scene: &Scene, nodes: &[NodeId]) -> Result<Vec<Vec3>> {
    nodes.iter().map(|&n| scene.viewpoint(n)).collect()
}

/// Scores one trajectory. The goal is the episode goal nearest to the
/// final position; the reference length is the graph shortest path to it.
pub fn evaluate_episode(scene: &Scene, episode: &Episode, traj: &Trajectory, radius: f64) -> Result<EpisodeMetrics> {
    if traj.walk.is_empty() {
        return Err(Error::invalid("trajectory.walk", "empty"));
    }
    let walk = positions(scene, &traj.walk)?;
    let reference = positions(scene, &episode.path)?;
    let end = *walk.last().unwrap();
    let mut best: Option<(Vec3, f64)> = None;
    for &g in &episode.goals {
        let gp = scene.viewpoint(g)?;
        if best.is_none_or(|(b, _)| (gp - end).norm() < (b - end).norm()) {
            let path = scene
                .graph
                .shortest_path(episode.start, g)
                .ok_or_else(|| Error::invalid("episode.goals", format!("{g} unreachable from start")))?;
            best = Some((gp, path_length(&positions(scene, &path)?)));
        }
    }
    let (goal, shortest) = best.ok_or_else(|| Error::invalid("episode.goals", "empty"))?;
    let nav = nav_metrics(&walk, &goal, shortest, radius);
    let fid = fidelity_metrics(&walk, &reference, nav.sr, radius);
    let grounding = episode.object.map(|o| grounding_metrics(traj.chosen_object(), o, nav.sr, shortest, nav.tl));
    Ok(EpisodeMetrics {
        episode: episode.id,
        tl: nav.tl,
        ne: nav.ne,
        sr: nav.sr,
        osr: nav.osr,
        spl: nav.spl,
        cls: fid.cls,
        ndtw: fid.ndtw,
        sdtw: fid.sdtw,
        rgs: grounding.map(|g| g.0),
        rgspl: grounding.map(|g| g.1),
    })
}

/// Means over episodes plus optional perception scores, keyed by metric
/// name.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Report {
    pub metrics: BTreeMap<String, f64>,
    pub episodes: Vec<EpisodeMetrics>,
}

impl Report {
    pub fn from_episodes(episodes: Vec<EpisodeMetrics>) -> Self {
        let mut metrics = BTreeMap::new();
        if !episodes.is_empty() {
            let n = episodes.len() as f64;
            let mean = |f: &dyn Fn(&EpisodeMetrics) -> f64| episodes.iter().map(f).sum::<f64>() / n;
            metrics.insert("episodes".into(), n);
            metrics.insert("tl".into(), mean(&|e| e.tl));
            metrics.insert("ne".into(), mean(&|e| e.ne));
            metrics.insert("sr".into(), mean(&|e| e.sr));
            metrics.insert("osr".into(), mean(&|e| e.osr));
            metrics.insert("spl".into(), mean(&|e| e.spl));
            metrics.insert("cls".into(), mean(&|e| e.cls));
            metrics.insert("ndtw".into(), mean(&|e| e.ndtw));
            metrics.insert("sdtw".into(), mean(&|e| e.sdtw));
            let grounded: Vec<&EpisodeMetrics> = episodes.iter().filter(|e| e.rgs.is_some()).collect();
            if !grounded.is_empty() {
                let g = grounded.len() as f64;
                metrics.insert("rgs".into(), grounded.iter().filter_map(|e| e.rgs).sum::<f64>() / g);
                metrics.insert("rgspl".into(), grounded.iter().filter_map(|e| e.rgspl).sum::<f64>() / g);
            }
        }
        Self { metrics, episodes }
    }

    pub fn add_occupancy(&mut self, s: &OccupancyScores) {
        self.metrics.insert("occupancy_iou".into(), s.iou);
        self.metrics.insert("occupancy_miou".into(), s.miou);
        self.metrics.insert("occupancy_miou_inclusive".into(), s.miou_inclusive);
    }

    pub fn add_detection(&mut self, s: &DetectionScores) {
        self.metrics.insert("map_50".into(), s.map);
        self.metrics.insert("mar_50".into(), s.mar);
    }

    pub fn add_layout(&mut self, iou: f64) {
        self.metrics.insert("layout_iou".into(), iou);
    }

    /// One `metric value` line per entry, sorted by name.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.metrics {
            let _ = writeln!(s, "{k} {v}");
        }
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
