//! Nearest-labeled-voxel fill backed by a static kd-tree over integer cell
//! coordinates. Distances are squared index distances (cubic cells), and
//! ties go to the lexicographically smallest cell, so results are exact and
//! order independent.

use crate::annotation::{Label, VoxelGrid, FREE, UNKNOWN};
use crate::error::{Error, Result};
use crate::grid::Cell;

const CHUNK: usize = 4096;

#[derive(Clone, Copy, Debug)]
struct Site {
    at: [i64; 3],
    key: usize,
    label: Label,
}

/// Static kd-tree answering exact nearest-site queries.
pub struct CellKdTree {
    sites: Vec<Site>,
    /// (key, position in `sites`), sorted by key.
    index: Vec<(usize, usize)>,
}

impl CellKdTree {
    /// `sites` as (cell, tie-break key, label).
    pub fn build(sites: impl IntoIterator<Item = (Cell, usize, Label)>) -> Self {
        let mut sites: Vec<Site> = sites
            .into_iter()
            .map(|(c, key, label)| Site {
                at: [c[0] as i64, c[1] as i64, c[2] as i64],
                key,
                label,
            })
            .collect();
        build_rec(&mut sites[..], 0);
        let mut index: Vec<(usize, usize)> = sites.iter().enumerate().map(|(i, s)| (s.key, i)).collect();
        index.sort_unstable();
        Self { sites, index }
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    /// Nearest site as (squared distance, key, label).
    pub fn nearest(&self, q: Cell) -> Option<(i64, usize, Label)> {
        self.nearest_with_hint(q, None)
    }

    /// Like `nearest`, seeded with a known site (for example the answer for
    /// a neighboring query) to tighten pruning from the start.
    pub fn nearest_with_hint(&self, q: Cell, hint: Option<usize>) -> Option<(i64, usize, Label)> {
        if self.sites.is_empty() {
            return None;
        }
        let q = [q[0] as i64, q[1] as i64, q[2] as i64];
        let mut best = match hint.and_then(|k| self.by_key(k)) {
            Some(s) => (dist2(&s.at, &q), s.key, s.label),
            None => (i64::MAX, usize::MAX, 0),
        };
        let mut off = [0i64; 3];
        search(&self.sites, 0, &q, &mut best, &mut off, 0);
        Some(best)
    }

    fn by_key(&self, key: usize) -> Option<Site> {
        self.index.binary_search_by_key(&key, |&(k, _)| k).ok().map(|i| self.sites[self.index[i].1])
    }
}

fn dist2(a: &[i64; 3], b: &[i64; 3]) -> i64 {
    (0..3).map(|i| (a[i] - b[i]).pow(2)).sum()
}

fn build_rec(sites: &mut [Site], depth: usize) {
    if sites.len() <= 1 {
        return;
    }
    let axis = depth % 3;
    let mid = sites.len() / 2;
    sites.select_nth_unstable_by_key(mid, |s| (s.at[axis], s.key));
    let (left, right) = sites.split_at_mut(mid);
    build_rec(left, depth + 1);
    build_rec(&mut right[1..], depth + 1);
}

/// `rd` is the squared distance from `q` to the cell of the current subtree
/// (accumulated per axis in `off`), so whole subtrees are skipped once they
/// lie strictly farther than the best candidate.
fn search(sites: &[Site], depth: usize, q: &[i64; 3], best: &mut (i64, usize, Label), off: &mut [i64; 3], rd: i64) {
    if sites.is_empty() || rd > best.0 {
        return;
    }
    let axis = depth % 3;
    let mid = sites.len() / 2;
    let s = sites[mid];
    let d2 = dist2(&s.at, q);
    if (d2, s.key) < (best.0, best.1) {
        *best = (d2, s.key, s.label);
    }
    let diff = q[axis] - s.at[axis];
    let (near, far) = if diff < 0 {
        (&sites[..mid], &sites[mid + 1..])
    } else {
        (&sites[mid + 1..], &sites[..mid])
    };
    search(near, depth + 1, q, best, off, rd);
    let old = off[axis];
    let far_rd = rd - old * old + diff * diff;
    // equal distance can still hold a smaller tie-break key
    if far_rd <= best.0 {
        off[axis] = diff;
        search(far, depth + 1, q, best, off, far_rd);
        off[axis] = old;
    }
}

/// Fill every unknown voxel that is not known free with the label of the
/// nearest labeled voxel. Voxels flagged in `free_mask` (or already free)
/// become free; labeled voxels are unchanged.
pub fn densify_nearest_neighbor(grid: &VoxelGrid, free_mask: &[bool]) -> Result<VoxelGrid> {
    let spec = grid.spec;
    if free_mask.len() != spec.len() {
        return Err(Error::Shape(format!(
            "free mask has {} entries for {} voxels",
            free_mask.len(),
            spec.len()
        )));
    }
    let tree = CellKdTree::build(
        grid.labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| VoxelGrid::is_occupied(l))
            .map(|(i, &l)| (spec.cell_of(i), i, l)),
    );
    if tree.is_empty() {
        return Err(Error::Degenerate("densification needs at least one labeled voxel".into()));
    }
    // consecutive cells are neighbors, so each answer seeds the next query
    let fill_chunk = |(c, out): (usize, &mut [Label])| {
        let base = c * CHUNK;
        let mut hint = None;
        for (j, slot) in out.iter_mut().enumerate() {
            let i = base + j;
            let l = grid.labels[i];
            *slot = if l != UNKNOWN {
                l
            } else if free_mask[i] {
                FREE
            } else {
                let (_, key, label) = tree.nearest_with_hint(spec.cell_of(i), hint).expect("tree is non-empty");
                hint = Some(key);
                label
            };
        }
    };
    let mut labels = vec![UNKNOWN; spec.len()];
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        labels.par_chunks_mut(CHUNK).enumerate().for_each(fill_chunk);
    }
    #[cfg(not(feature = "parallel"))]
    labels.chunks_mut(CHUNK).enumerate().for_each(fill_chunk);
    Ok(VoxelGrid { spec, labels })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use rand::{Rng, SeedableRng};

    fn cube(n: usize) -> GridSpec {
        GridSpec::new((0.0, n as f64), (0.0, n as f64), (0.0, n as f64), 1.0).unwrap()
    }

    /// Exhaustive scan over all labeled voxels.
    fn brute(grid: &VoxelGrid, free: &[bool]) -> Vec<Label> {
        let s = grid.spec;
        let seeds: Vec<(Cell, usize, Label)> = (0..s.len())
            .filter(|&i| VoxelGrid::is_occupied(grid.labels[i]))
            .map(|i| (s.cell_of(i), i, grid.labels[i]))
            .collect();
        (0..s.len())
            .map(|i| {
                let l = grid.labels[i];
                if l != UNKNOWN {
                    return l;
                }
                if free[i] {
                    return FREE;
                }
                let q = s.cell_of(i);
                let mut best = (i64::MAX, usize::MAX, 0);
                for &(c, key, label) in &seeds {
                    let d: i64 = (0..3).map(|a| (c[a] as i64 - q[a] as i64).pow(2)).sum();
                    if (d, key) < (best.0, best.1) {
                        best = (d, key, label);
                    }
                }
                best.2
            })
            .collect()
    }

    #[test]
    fn single_seed_fills_everything_not_free() {
        let s = cube(6);
        let mut g = VoxelGrid::filled(s, UNKNOWN);
        g.set([2, 3, 4], 5);
        let mut free = vec![false; s.len()];
        free[0] = true;
        let d = densify_nearest_neighbor(&g, &free).unwrap();
        assert_eq!(d.labels[0], FREE);
        assert!(d.labels[1..].iter().all(|&l| l == 5));
    }

    #[test]
    fn opposite_corners_split() {
        let s = cube(5);
        let mut g = VoxelGrid::filled(s, UNKNOWN);
        g.set([0, 0, 0], 1);
        g.set([4, 4, 4], 2);
        let free = vec![false; s.len()];
        let d = densify_nearest_neighbor(&g, &free).unwrap();
        assert_eq!(d.labels, brute(&g, &free));
        assert_eq!(d.get([1, 1, 1]), 1);
        assert_eq!(d.get([3, 3, 3]), 2);
        // equidistant cell goes to the lexicographically smaller seed
        assert_eq!(d.get([2, 2, 2]), 1);
    }

    #[test]
    fn hundred_seeds_64_cubed() {
        let s = cube(64);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(64);
        let mut g = VoxelGrid::filled(s, UNKNOWN);
        for _ in 0..100 {
            let c = [rng.random_range(0..64), rng.random_range(0..64), rng.random_range(0..64)];
            g.set(c, rng.random_range(0..16));
        }
        let free: Vec<bool> = (0..s.len()).map(|_| rng.random_bool(0.1)).collect();
        let d = densify_nearest_neighbor(&g, &free).unwrap();
        assert_eq!(d.labels, brute(&g, &free));
    }

    #[test]
    fn all_unknown_is_error() {
        let s = cube(3);
        let g = VoxelGrid::filled(s, UNKNOWN);
        assert!(densify_nearest_neighbor(&g, &vec![false; s.len()]).is_err());
    }

    #[test]
    fn idempotent_on_dense() {
        let s = cube(8);
        let mut g = VoxelGrid::filled(s, UNKNOWN);
        g.set([1, 2, 3], 4);
        g.set([6, 6, 1], 9);
        let free = vec![false; s.len()];
        let once = densify_nearest_neighbor(&g, &free).unwrap();
        let twice = densify_nearest_neighbor(&once, &free).unwrap();
        assert_eq!(once, twice);
    }
}
