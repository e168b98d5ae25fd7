//! The full pipeline as a [`Policy`]: render views, encode the volume,
//! estimate the state and fuse local and global actions.

use std::collections::BTreeMap;

use super::{Decision, Observation, Policy};
use crate::camera::{panorama_rig, Camera};
use crate::encoder::{encode_ver, EncoderParams};
use crate::error::Result;
use crate::grid::Vec3;
use crate::policy::{neighborhood_center, policy_step, EpisodicGraph, PolicyParams};
use crate::scene::{Instruction, NodeId, Scene};
use crate::views::Renderer;

pub struct VerAgent<'a> {
    scene: &'a Scene,
    renderer: &'a Renderer,
    encoder: &'a EncoderParams,
    policy: &'a PolicyParams,
    instruction: Instruction,
    objects: Vec<(u32, Vec3)>,
    pub graph: EpisodicGraph,
}

/// Centroid of every labeled instance in the cloud, by instance id.
pub fn instance_centroids(scene: &Scene) -> Vec<(u32, Vec3)> {
    let mut acc: BTreeMap<u32, (Vec3, usize)> = BTreeMap::new();
    for (p, inst) in scene.cloud.points.iter().zip(&scene.cloud.instances) {
        if let Some(i) = inst {
            let e = acc.entry(*i).or_insert((Vec3::zeros(), 0));
            e.0 += p;
            e.1 += 1;
        }
    }
    acc.into_iter().map(|(i, (s, n))| (i, s / n as f64)).collect()
}

impl<'a> VerAgent<'a> {
    pub fn new(
        scene: &'a Scene,
        renderer: &'a Renderer,
        encoder: &'a EncoderParams,
        policy: &'a PolicyParams,
        instruction: Instruction,
    ) -> Self {
        let objects = if policy.object_head.is_some() { instance_centroids(scene) } else { Vec::new() };
        Self { scene, renderer, encoder, policy, instruction, objects, graph: EpisodicGraph::new() }
    }

}

/// The scene's camera rig at a viewpoint, or a 12 x 3 panorama when the
/// scene has none.
pub fn viewpoint_cameras(scene: &Scene, viewpoint: NodeId, position: Vec3) -> Vec<Camera> {
    match scene.cameras.get(&viewpoint) {
        Some(rig) if !rig.is_empty() => rig.clone(),
        _ => panorama_rig(position, 12, &[-0.5, 0.0, 0.5], std::f64::consts::FRAC_PI_3, (48, 48)),
    }
}

impl Policy for VerAgent<'_> {
    fn decide(&mut self, obs: &Observation) -> Result<Decision> {
        let views = self.renderer.render_all(&viewpoint_cameras(self.scene, obs.viewpoint, obs.position))?;
        let pyramid = encode_ver(&views, obs.position, self.encoder)?;
        let (feature, spec) = pyramid.finest();
        // neighbors whose 3x3 neighborhood leaves the volume are not actionable
        let candidates: Vec<(NodeId, Vec3)> = obs
            .candidates
            .iter()
            .enumerate()
            .filter(|(i, c)| *i == 0 || neighborhood_center(spec, &c.1).is_ok())
            .map(|(_, c)| *c)
            .collect();
        let objects: Vec<(u32, Vec3)> = self.objects.iter().filter(|o| spec.contains(&o.1)).copied().collect();
        let out = policy_step(&self.instruction, feature, spec, &candidates, &objects, &mut self.graph, self.policy)?;
        let object = out.object.map(|d| {
            let k = d.argmax();
            (d.ids[k], d.probs[k])
        });
        Ok(Decision { dist: out.fused, object })
    }
}
