use crate::annotation::VoxelGrid;
use crate::grid::{Cell, GridSpec, Vec3};

/// Cells visited by the segment `from -> to` (world coordinates) inside the
/// grid, in traversal order (3D DDA). The segment is clipped to the grid box.
pub fn traverse(spec: &GridSpec, from: Vec3, to: Vec3) -> Vec<Cell> {
    let mut out = Vec::new();
    walk(spec, from, to, |c| {
        out.push(c);
        true
    });
    out
}

/// Visit cells along a segment until `visit` returns false.
pub fn walk(spec: &GridSpec, from: Vec3, to: Vec3, mut visit: impl FnMut(Cell) -> bool) {
    let d = to - from;
    let (lo, hi) = (spec.min(), spec.max());
    // slab clip to [0, 1]
    let (mut t0, mut t1) = (0.0f64, 1.0f64);
    for a in 0..3 {
        if d[a].abs() < 1e-15 {
            if from[a] < lo[a] || from[a] > hi[a] {
                return;
            }
        } else {
            let (mut ta, mut tb) = ((lo[a] - from[a]) / d[a], (hi[a] - from[a]) / d[a]);
            if ta > tb {
                std::mem::swap(&mut ta, &mut tb);
            }
            t0 = t0.max(ta);
            t1 = t1.min(tb);
        }
    }
    if t0 > t1 {
        return;
    }
    let start = from + d * t0;
    let size = spec.cell_size();
    let dims = spec.dims();
    let mut cell = [0i64; 3];
    let mut step = [0i64; 3];
    let mut t_max = [f64::INFINITY; 3];
    let mut t_delta = [f64::INFINITY; 3];
    for a in 0..3 {
        let rel = ((start[a] - lo[a]) / size[a]).floor() as i64;
        cell[a] = rel.clamp(0, dims[a] as i64 - 1);
        if d[a] > 0.0 {
            step[a] = 1;
            let boundary = lo[a] + (cell[a] + 1) as f64 * size[a];
            t_max[a] = (boundary - from[a]) / d[a];
            t_delta[a] = size[a] / d[a];
        } else if d[a] < 0.0 {
            step[a] = -1;
            let boundary = lo[a] + cell[a] as f64 * size[a];
            t_max[a] = (boundary - from[a]) / d[a];
            t_delta[a] = -size[a] / d[a];
        }
    }
    let limit = dims.iter().sum::<usize>() + 3;
    for _ in 0..limit {
        if !visit([cell[0] as usize, cell[1] as usize, cell[2] as usize]) {
            return;
        }
        let a = if t_max[0] <= t_max[1] && t_max[0] <= t_max[2] {
            0
        } else if t_max[1] <= t_max[2] {
            1
        } else {
            2
        };
        if t_max[a] > t1 {
            return;
        }
        cell[a] += step[a];
        if cell[a] < 0 || cell[a] >= dims[a] as i64 {
            return;
        }
        t_max[a] += t_delta[a];
    }
}

/// Mark as free every non-occupied cell crossed by a ray from any origin to
/// the center of any occupied cell, stopping at the first occupied cell.
pub fn carve_free_space(grid: &VoxelGrid, origins: &[Vec3]) -> Vec<bool> {
    let spec = grid.spec;
    let targets: Vec<usize> = (0..spec.len()).filter(|&i| VoxelGrid::is_occupied(grid.labels[i])).collect();
    let carve_one = |origin: &Vec3| -> Vec<usize> {
        let mut hits = Vec::new();
        for &t in &targets {
            let goal = spec.cell_center(spec.cell_of(t));
            walk(&spec, *origin, goal, |c| {
                let i = spec.index(c);
                if VoxelGrid::is_occupied(grid.labels[i]) {
                    return false;
                }
                hits.push(i);
                true
            });
        }
        hits.sort_unstable();
        hits.dedup();
        hits
    };
    #[cfg(feature = "parallel")]
    let per_origin: Vec<Vec<usize>> = {
        use rayon::prelude::*;
        origins.par_iter().map(carve_one).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let per_origin: Vec<Vec<usize>> = origins.iter().map(carve_one).collect();

    let mut free = vec![false; spec.len()];
    for i in per_origin.into_iter().flatten() {
        free[i] = true;
    }
    free
}
