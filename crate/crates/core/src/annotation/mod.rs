//! Ground-truth generation from a labeled point cloud: room layout, object
//! boxes, majority-vote voxels, ray-carved free space, amodal object fill,
//! nearest-neighbor densification and multi-resolution downsampling.

mod amodal;
mod carve;
mod densify;
mod downsample;
mod export;
mod layout;
mod obb;
mod voxelize;

use std::collections::BTreeMap;

pub use amodal::amodal_fill;
pub use carve::{carve_free_space, traverse, walk};
pub use densify::{densify_nearest_neighbor, CellKdTree};
pub use downsample::downsample_labels;
pub use export::{read_annotations, write_annotations};
pub use layout::fit_room_layout;
pub use obb::{convex_hull, fit_oriented_box};
pub use voxelize::voxelize_majority;

use crate::error::{Error, Result};
use crate::grid::{Cell, GridSpec, Vec3};
use crate::scene::{NodeId, Scene, WALL};
use crate::shapes::{OrientedBox, RoomLayout};

pub type Label = u16;
pub const FREE: Label = 0xFFFE;
pub const UNKNOWN: Label = 0xFFFF;

/// Dense label array over a grid; entries are class ids, `FREE` or `UNKNOWN`.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelGrid {
    pub spec: GridSpec,
    pub labels: Vec<Label>,
}

impl VoxelGrid {
    pub fn filled(spec: GridSpec, label: Label) -> Self {
        Self { spec, labels: vec![label; spec.len()] }
    }

    pub fn is_occupied(label: Label) -> bool {
        label != FREE && label != UNKNOWN
    }

    pub fn get(&self, c: Cell) -> Label {
        self.labels[self.spec.index(c)]
    }

    pub fn set(&mut self, c: Cell, label: Label) {
        let i = self.spec.index(c);
        self.labels[i] = label;
    }

    pub fn occupied_count(&self) -> usize {
        self.labels.iter().filter(|&&l| Self::is_occupied(l)).count()
    }

    /// Keep the lowest `z` cells of every column.
    pub fn crop_z(&self, z: usize) -> Result<VoxelGrid> {
        let [dx, dy, dz] = self.spec.dims();
        if z == 0 || z > dz {
            return Err(Error::Shape(format!("cannot crop {dz} z cells to {z}")));
        }
        let (z0, _) = self.spec.range(2);
        let top = z0 + self.spec.cell_size()[2] * z as f64;
        let spec = GridSpec::from_dims(self.spec.range(0), self.spec.range(1), (z0, top), [dx, dy, z])?;
        let mut labels = Vec::with_capacity(dx * dy * z);
        for col in self.labels.chunks(dz) {
            labels.extend_from_slice(&col[..z]);
        }
        Ok(VoxelGrid { spec, labels })
    }

    pub fn validate(&self, num_classes: usize) -> Result<()> {
        if self.labels.len() != self.spec.len() {
            return Err(Error::invalid("labels", format!("{} entries for {} cells", self.labels.len(), self.spec.len())));
        }
        if let Some(l) = self.labels.iter().find(|&&l| Self::is_occupied(l) && l as usize >= num_classes) {
            return Err(Error::invalid("labels", format!("class id {l} out of range")));
        }
        Ok(())
    }
}

/// Annotations for one viewpoint. `grids` holds the 0.4, 0.2 and 0.1 m
/// occupancy, coarse first.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationSet {
    pub viewpoint: NodeId,
    pub grids: [VoxelGrid; 3],
    pub boxes: Vec<OrientedBox>,
    pub layout: Option<RoomLayout>,
}

/// Downsampling factors of `AnnotationSet::grids` relative to the fine grid.
pub const LEVEL_FACTORS: [usize; 3] = [4, 2, 1];

impl AnnotationSet {
    pub fn fine(&self) -> &VoxelGrid {
        &self.grids[2]
    }

    /// Grids cropped to the lowest `fine_z / factor` cells, the height the
    /// encoder produces at each level.
    pub fn supervision(&self, fine_z: usize) -> Result<[VoxelGrid; 3]> {
        let crop = |k: usize| self.grids[k].crop_z(fine_z / LEVEL_FACTORS[k]);
        Ok([crop(0)?, crop(1)?, crop(2)?])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnotateOptions {
    /// Egocentric grid, relative to the viewpoint.
    pub grid: GridSpec,
    /// Carve free space from every scene viewpoint near the grid rather
    /// than only the annotated one.
    pub carve_all_viewpoints: bool,
    /// Horizontal padding (meters) of the region whose viewpoints and
    /// surfaces take part in carving.
    pub carve_margin: f64,
}

impl Default for AnnotateOptions {
    fn default() -> Self {
        Self { grid: GridSpec::perception_default(), carve_all_viewpoints: true, carve_margin: 6.0 }
    }
}

/// World-frame egocentric grid around a viewpoint.
pub fn egocentric_grid(opts: &AnnotateOptions, viewpoint: Vec3) -> GridSpec {
    opts.grid.translated(&viewpoint)
}

pub fn generate_annotations(scene: &Scene, viewpoint: NodeId, opts: &AnnotateOptions) -> Result<AnnotationSet> {
    let agent = scene.viewpoint(viewpoint)?;
    let spec = egocentric_grid(opts, agent);
    let local = scene.cloud.crop(&spec);
    if local.is_empty() {
        return Err(Error::Degenerate(format!("no points within range of viewpoint {viewpoint}")));
    }
    let sparse = voxelize_majority(&local, &spec);

    // layout from the wall points the agent can see
    let walls: Vec<Vec3> = local
        .points
        .iter()
        .zip(&local.labels)
        .filter(|(_, &l)| l == WALL)
        .map(|(p, _)| *p)
        .filter(|p| visible(&sparse, agent, p))
        .collect();
    let layout = fit_room_layout(&walls, agent);

    // objects with a point in range, boxed from their full point sets
    let mut members: BTreeMap<u32, (Label, Vec<Vec3>)> = BTreeMap::new();
    let in_range: std::collections::BTreeSet<u32> = local.instances.iter().flatten().copied().collect();
    for ((p, &l), inst) in scene.cloud.points.iter().zip(&scene.cloud.labels).zip(&scene.cloud.instances) {
        if let Some(id) = inst.filter(|id| in_range.contains(id)) {
            members.entry(id).or_insert((l, Vec::new())).1.push(*p);
        }
    }
    let mut boxes = Vec::new();
    for (id, (class, pts)) in members {
        let class = majority_class(&scene.cloud, id).unwrap_or(class);
        let b = fit_oriented_box(&pts, class, Some(id))?;
        let keep = match &layout {
            Some(room) => room.contains_horizontal(b.center.x, b.center.y),
            None => true,
        };
        if keep {
            boxes.push(b);
        }
    }

    let free = if opts.carve_all_viewpoints {
        carve_padded(scene, &spec, opts.carve_margin)?
    } else {
        carve_free_space(&sparse, &[agent])
    };
    let filled = amodal_fill(&sparse, &boxes);
    let fine = densify_nearest_neighbor(&filled, &free)?;
    let mid = downsample_labels(&fine, 2)?;
    let coarse = downsample_labels(&fine, 4)?;
    Ok(AnnotationSet { viewpoint, grids: [coarse, mid, fine], boxes, layout })
}

/// Carve on a horizontally padded copy of `spec` so that surfaces and
/// viewpoints just outside the crop still shape its free space.
fn carve_padded(scene: &Scene, spec: &GridSpec, margin: f64) -> Result<Vec<bool>> {
    let size = spec.cell_size();
    let pad = [(margin / size[0]).round() as usize, (margin / size[1]).round() as usize];
    let [dx, dy, dz] = spec.dims();
    let widen = |a: usize| {
        let (lo, hi) = spec.range(a);
        (lo - pad[a] as f64 * size[a], hi + pad[a] as f64 * size[a])
    };
    let big = GridSpec::from_dims(widen(0), widen(1), spec.range(2), [dx + 2 * pad[0], dy + 2 * pad[1], dz])?;
    let occupancy = voxelize_majority(&scene.cloud, &big);
    let origins: Vec<Vec3> = scene.graph.nodes().values().copied().filter(|p| big.contains(p)).collect();
    let big_free = carve_free_space(&occupancy, &origins);
    let mut free = vec![false; spec.len()];
    for (i, slot) in free.iter_mut().enumerate() {
        let [x, y, z] = spec.cell_of(i);
        *slot = big_free[big.index([x + pad[0], y + pad[1], z])];
    }
    Ok(free)
}

fn majority_class(cloud: &crate::scene::SemanticPointCloud, instance: u32) -> Option<Label> {
    let mut counts: BTreeMap<Label, usize> = BTreeMap::new();
    for (l, inst) in cloud.labels.iter().zip(&cloud.instances) {
        if *inst == Some(instance) {
            *counts.entry(*l).or_default() += 1;
        }
    }
    counts.into_iter().max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0))).map(|e| e.0)
}

/// A point is visible when the ray from the agent reaches its cell's
/// neighborhood without crossing another occupied cell.
fn visible(grid: &VoxelGrid, agent: Vec3, p: &Vec3) -> bool {
    let spec = &grid.spec;
    let Some(target) = spec.world_to_cell(p) else { return false };
    let mut seen = true;
    walk(spec, agent, *p, |c| {
        let near = (0..3).all(|a| c[a].abs_diff(target[a]) <= 1);
        if near {
            return false;
        }
        if VoxelGrid::is_occupied(grid.get(c)) {
            seen = false;
            return false;
        }
        true
    });
    seen
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn crop_keeps_lowest_cells() {
        let s = GridSpec::new((0.0, 0.2), (0.0, 0.1), (0.0, 0.4), 0.1).unwrap();
        let mut g = VoxelGrid::filled(s, FREE);
        g.set([1, 0, 0], 3);
        g.set([1, 0, 3], 4);
        let c = g.crop_z(3).unwrap();
        assert_eq!(c.spec.dims(), [2, 1, 3]);
        assert_eq!(c.get([1, 0, 0]), 3);
        assert!(!c.labels.contains(&4));
        assert!(g.crop_z(5).is_err());
    }
}
