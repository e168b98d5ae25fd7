//! Regular 3D lattices over an axis-aligned box and the quantization used by
//! every voxel-based stage.
//!
//! Cells are half-open `[min + i*cell, min + (i+1)*cell)` per axis, except
//! that a point exactly on the upper face of the box is clamped into the last
//! cell, so quantization is total on the closed box.

use crate::error::{Error, Result};

pub type Vec3 = nalgebra::Vector3<f64>;

/// Integer cell coordinate `[x, y, z]`.
pub type Cell = [usize; 3];

/// Egocentric perception range on the horizontal axes, meters.
pub const PERCEPTION_XY: (f64, f64) = (-6.0, 6.0);
/// Egocentric perception range on the height axis, meters.
pub const PERCEPTION_Z: (f64, f64) = (-1.5, 2.0);
/// Finest label resolution, meters.
pub const FINE_RESOLUTION: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    min: [f64; 3],
    max: [f64; 3],
    cell: [f64; 3],
    dims: [usize; 3],
}

impl GridSpec {
    /// Cubic cells of edge `resolution`; `dims[i] = round(extent_i / resolution)`.
    pub fn new(x: (f64, f64), y: (f64, f64), z: (f64, f64), resolution: f64) -> Result<Self> {
        if !(resolution > 0.0) || !resolution.is_finite() {
            return Err(Error::invalid("resolution", format!("{resolution} must be > 0")));
        }
        let ranges = [x, y, z];
        let mut dims = [0usize; 3];
        for (axis, (lo, hi)) in ranges.iter().enumerate() {
            check_range(axis, *lo, *hi)?;
            let n = ((hi - lo) / resolution).round();
            if n < 1.0 {
                return Err(Error::invalid(
                    axis_name(axis),
                    format!("range [{lo}, {hi}] is narrower than one cell"),
                ));
            }
            dims[axis] = n as usize;
        }
        Ok(Self {
            min: [x.0, y.0, z.0],
            max: [x.1, y.1, z.1],
            cell: [resolution; 3],
            dims,
        })
    }

    /// Lattice with explicit cell counts; cells may be anisotropic.
    pub fn from_dims(x: (f64, f64), y: (f64, f64), z: (f64, f64), dims: [usize; 3]) -> Result<Self> {
        let ranges = [x, y, z];
        let mut cell = [0.0; 3];
        for (axis, (lo, hi)) in ranges.iter().enumerate() {
            check_range(axis, *lo, *hi)?;
            if dims[axis] == 0 {
                return Err(Error::invalid(axis_name(axis), "zero cells"));
            }
            cell[axis] = (hi - lo) / dims[axis] as f64;
        }
        Ok(Self {
            min: [x.0, y.0, z.0],
            max: [x.1, y.1, z.1],
            cell,
            dims,
        })
    }

    /// The egocentric fine label grid: 120 x 120 x 35 cells of 0.1 m.
    pub fn perception_default() -> Self {
        Self::new(PERCEPTION_XY, PERCEPTION_XY, PERCEPTION_Z, FINE_RESOLUTION)
            .expect("default perception grid is valid")
    }

    pub fn min(&self) -> Vec3 {
        Vec3::new(self.min[0], self.min[1], self.min[2])
    }

    pub fn max(&self) -> Vec3 {
        Vec3::new(self.max[0], self.max[1], self.max[2])
    }

    pub fn range(&self, axis: usize) -> (f64, f64) {
        (self.min[axis], self.max[axis])
    }

    /// Edge length along x; equal on all axes for grids built with [`GridSpec::new`].
    pub fn resolution(&self) -> f64 {
        self.cell[0]
    }

    pub fn cell_size(&self) -> [f64; 3] {
        self.cell
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_volume(&self) -> f64 {
        self.cell[0] * self.cell[1] * self.cell[2]
    }

    /// Quantize one coordinate; `None` outside the closed range.
    pub fn axis_cell(&self, axis: usize, v: f64) -> Option<usize> {
        let (lo, hi) = (self.min[axis], self.max[axis]);
        if !(v >= lo && v <= hi) {
            return None;
        }
        let i = ((v - lo) / self.cell[axis]).floor() as usize;
        Some(i.min(self.dims[axis] - 1))
    }

    pub fn world_to_cell(&self, p: &Vec3) -> Option<Cell> {
        Some([
            self.axis_cell(0, p.x)?,
            self.axis_cell(1, p.y)?,
            self.axis_cell(2, p.z)?,
        ])
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|a| p[a] >= self.min[a] && p[a] <= self.max[a])
    }

    pub fn cell_center(&self, c: Cell) -> Vec3 {
        Vec3::new(
            self.min[0] + (c[0] as f64 + 0.5) * self.cell[0],
            self.min[1] + (c[1] as f64 + 0.5) * self.cell[1],
            self.min[2] + (c[2] as f64 + 0.5) * self.cell[2],
        )
    }

    /// Lower and upper corners of a cell.
    pub fn cell_bounds(&self, c: Cell) -> (Vec3, Vec3) {
        let lo = Vec3::new(
            self.min[0] + c[0] as f64 * self.cell[0],
            self.min[1] + c[1] as f64 * self.cell[1],
            self.min[2] + c[2] as f64 * self.cell[2],
        );
        (lo, lo + Vec3::new(self.cell[0], self.cell[1], self.cell[2]))
    }

    /// Linear index, z fastest.
    #[inline]
    pub fn index(&self, c: Cell) -> usize {
        (c[0] * self.dims[1] + c[1]) * self.dims[2] + c[2]
    }

    #[inline]
    pub fn cell_of(&self, index: usize) -> Cell {
        let z = index % self.dims[2];
        let rest = index / self.dims[2];
        [rest / self.dims[1], rest % self.dims[1], z]
    }

    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.len()).map(move |i| self.cell_of(i))
    }

    /// Same lattice shifted by `offset` (egocentric to world frame).
    pub fn translated(&self, offset: &Vec3) -> Self {
        let mut out = *self;
        for a in 0..3 {
            out.min[a] += offset[a];
            out.max[a] += offset[a];
        }
        out
    }

    /// Same box, different cell counts.
    pub fn with_dims(&self, dims: [usize; 3]) -> Result<Self> {
        Self::from_dims(self.range(0), self.range(1), self.range(2), dims)
    }

    /// Cubic-cell grid over the same lower corner with `factor`-times larger
    /// cells; the cell count is rounded up so every fine cell has a parent.
    pub fn coarsened(&self, factor: usize) -> Self {
        let mut out = *self;
        for a in 0..3 {
            out.dims[a] = self.dims[a].div_ceil(factor);
            out.cell[a] = self.cell[a] * factor as f64;
            out.max[a] = out.min[a] + out.cell[a] * out.dims[a] as f64;
        }
        out
    }

    pub fn same_lattice(&self, other: &GridSpec) -> bool {
        const EPS: f64 = 1e-9;
        self.dims == other.dims
            && (0..3).all(|a| {
                (self.min[a] - other.min[a]).abs() < EPS
                    && (self.max[a] - other.max[a]).abs() < EPS
                    && (self.cell[a] - other.cell[a]).abs() < EPS
            })
    }
}

fn axis_name(axis: usize) -> &'static str {
    ["x_range", "y_range", "z_range"][axis]
}

fn check_range(axis: usize, lo: f64, hi: f64) -> Result<()> {
    if !(lo.is_finite() && hi.is_finite() && hi > lo) {
        return Err(Error::invalid(axis_name(axis), format!("[{lo}, {hi}] is degenerate")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn default_dims() {
        let g = GridSpec::perception_default();
        assert_eq!(g.dims(), [120, 120, 35]);
    }

    #[test]
    fn world_to_cell_examples() {
        let g = GridSpec::perception_default();
        assert_eq!(g.world_to_cell(&Vec3::new(-6.0, -6.0, -1.5)), Some([0, 0, 0]));
        assert_eq!(g.world_to_cell(&Vec3::new(0.0, 0.0, 0.0)), Some([60, 60, 15]));
        assert_eq!(g.world_to_cell(&Vec3::new(7.0, 0.0, 0.0)), None);
        // upper boundary clamps into the last cell
        assert_eq!(g.world_to_cell(&Vec3::new(6.0, 6.0, 2.0)), Some([119, 119, 34]));
    }

    #[test]
    fn rejects_degenerate() {
        assert!(GridSpec::new((0.0, 0.0), (0.0, 1.0), (0.0, 1.0), 0.1).is_err());
        assert!(GridSpec::new((0.0, 1.0), (0.0, 1.0), (0.0, 1.0), 0.0).is_err());
        assert!(GridSpec::new((0.0, 1.0), (0.0, 1.0), (0.0, 1.0), -1.0).is_err());
    }

    #[test]
    fn index_round_trip() {
        let g = GridSpec::from_dims((0.0, 1.0), (0.0, 2.0), (0.0, 3.0), [3, 4, 5]).unwrap();
        for i in 0..g.len() {
            assert_eq!(g.index(g.cell_of(i)), i);
        }
    }

    #[test]
    fn coarsened_pads() {
        let g = GridSpec::perception_default().coarsened(2);
        assert_eq!(g.dims(), [60, 60, 18]);
        assert!((g.resolution() - 0.2).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn quantization_error_bounded(x in -6.0f64..6.0, y in -6.0f64..6.0, z in -1.5f64..2.0) {
            let g = GridSpec::perception_default();
            let p = Vec3::new(x, y, z);
            let c = g.world_to_cell(&p).unwrap();
            let back = g.cell_center(c);
            for a in 0..3 {
                prop_assert!((back[a] - p[a]).abs() <= g.resolution() * 0.5 + 1e-9);
            }
        }
    }
}
