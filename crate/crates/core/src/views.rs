//! Stand-in for learned image features: every feature pixel casts a ray
//! into a voxelized copy of the scene cloud and takes a seeded embedding of
//! the first class it hits, attenuated with depth.

use std::collections::HashMap;

use crate::camera::Camera;
use crate::encoder::ViewFeature;
use crate::error::{Error, Result};
use crate::params::Init;
use crate::scene::{ClassId, SemanticPointCloud};

const VOXEL: f64 = 0.2;
const STEP: f64 = 0.1;
const MAX_RANGE: f64 = 12.0;
const DEPTH_SCALE: f64 = 8.0;

pub struct Renderer {
    voxels: HashMap<[i64; 3], ClassId>,
    embeddings: Vec<Vec<f64>>,
    pub channels: usize,
    /// Image pixels per feature pixel.
    pub scale: usize,
}

fn key(p: &crate::grid::Vec3) -> [i64; 3] {
    [(p.x / VOXEL).floor() as i64, (p.y / VOXEL).floor() as i64, (p.z / VOXEL).floor() as i64]
}

impl Renderer {
    pub fn new(cloud: &SemanticPointCloud, classes: usize, channels: usize, scale: usize, seed: u64) -> Result<Self> {
        if channels == 0 || scale == 0 {
            return Err(Error::invalid("renderer", "channels and scale must be positive"));
        }
        let mut counts: HashMap<[i64; 3], Vec<u32>> = HashMap::new();
        for (p, &l) in cloud.points.iter().zip(&cloud.labels) {
            counts.entry(key(p)).or_insert_with(|| vec![0; classes])[l as usize] += 1;
        }
        let voxels = counts
            .into_iter()
            .map(|(k, c)| {
                let mut best = 0;
                for (i, &n) in c.iter().enumerate() {
                    if n > c[best] {
                        best = i;
                    }
                }
                (k, best as ClassId)
            })
            .collect();
        let mut init = Init::new(seed);
        let embeddings = (0..classes).map(|_| init.uniform(&[channels], 1.0).data).collect();
        Ok(Self { voxels, embeddings, channels, scale })
    }

    pub fn render(&self, camera: &Camera) -> Result<ViewFeature> {
        let (h, w) = (camera.height() as usize / self.scale, camera.width() as usize / self.scale);
        if h == 0 || w == 0 {
            return Err(Error::invalid("renderer.scale", "larger than the image"));
        }
        let origin = camera.center();
        let s = self.scale as f64;
        let mut data = vec![0.0; h * w * self.channels];
        for row in 0..h {
            for col in 0..w {
                let dir = camera.pixel_ray((col as f64 + 0.5) * s, (row as f64 + 0.5) * s);
                let mut t = STEP;
                while t < MAX_RANGE {
                    if let Some(&class) = self.voxels.get(&key(&(origin + dir * t))) {
                        let att = (-t / DEPTH_SCALE).exp();
                        let out = &mut data[(row * w + col) * self.channels..][..self.channels];
                        for (o, e) in out.iter_mut().zip(&self.embeddings[class as usize]) {
                            *o = e * att;
                        }
                        break;
                    }
                    t += STEP;
                }
            }
        }
        ViewFeature::new(camera.clone(), self.channels, h, w, s, data)
    }

    pub fn render_all(&self, cameras: &[Camera]) -> Result<Vec<ViewFeature>> {
        cameras.iter().map(|c| self.render(c)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Vec3;

    #[test]
    fn wall_ahead_is_seen_with_its_class() {
        let mut cloud = SemanticPointCloud::default();
        for i in -20..=20 {
            for j in -20..=20 {
                cloud.push(Vec3::new(3.0, i as f64 * 0.1, j as f64 * 0.1), 11, None);
            }
        }
        let r = Renderer::new(&cloud, 16, 4, 4, 1).unwrap();
        let cam = Camera::looking(Vec3::zeros(), 0.0, 0.0, 1.0, 16, 16);
        let v = r.render(&cam).unwrap();
        assert_eq!((v.height, v.width), (4, 4));
        let px = v.pixel(1, 1);
        let ratio = px[0] / r.embeddings[11][0];
        assert!(ratio > 0.6 && ratio < 0.75, "{ratio}");
        for c in 1..4 {
            assert!((px[c] - ratio * r.embeddings[11][c]).abs() < 1e-12);
        }
        let back = Camera::looking(Vec3::zeros(), std::f64::consts::PI, 0.0, 1.0, 16, 16);
        assert!(r.render(&back).unwrap().data.iter().all(|&x| x == 0.0));
    }
}
