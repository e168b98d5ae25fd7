use crate::annotation::{Label, VoxelGrid, UNKNOWN};
use crate::grid::GridSpec;
use crate::scene::SemanticPointCloud;

/// Sparse majority-vote voxelization: every voxel holding at least one point
/// takes the most frequent label among its points (ties go to the lowest
/// class id); voxels without points stay unknown. Points outside `spec` are
/// ignored.
pub fn voxelize_majority(cloud: &SemanticPointCloud, spec: &GridSpec) -> VoxelGrid {
    let mut keyed: Vec<(usize, Label)> = cloud
        .points
        .iter()
        .zip(&cloud.labels)
        .filter_map(|(p, &l)| spec.world_to_cell(p).map(|c| (spec.index(c), l)))
        .collect();
    keyed.sort_unstable();

    let mut grid = VoxelGrid::filled(*spec, UNKNOWN);
    let mut i = 0;
    while i < keyed.len() {
        let cell = keyed[i].0;
        let (mut best, mut best_count) = (keyed[i].1, 0usize);
        while i < keyed.len() && keyed[i].0 == cell {
            let label = keyed[i].1;
            let mut run = 0;
            while i < keyed.len() && keyed[i] == (cell, label) {
                run += 1;
                i += 1;
            }
            // labels arrive ascending, so strict > keeps the lowest id on ties
            if run > best_count {
                best = label;
                best_count = run;
            }
        }
        grid.labels[cell] = best;
    }
    grid
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Vec3;
    use rand::{Rng, SeedableRng};

    fn spec() -> GridSpec {
        GridSpec::new((0.0, 1.0), (0.0, 1.0), (0.0, 1.0), 0.25).unwrap()
    }

    #[test]
    fn single_point() {
        let mut c = SemanticPointCloud::default();
        c.push(Vec3::new(0.3, 0.3, 0.9), 7, Some(0));
        let g = voxelize_majority(&c, &spec());
        assert_eq!(g.labels.iter().filter(|&&l| l != UNKNOWN).count(), 1);
        assert_eq!(g.get([1, 1, 3]), 7);
    }

    #[test]
    fn strict_majority_and_tie() {
        let mut c = SemanticPointCloud::default();
        for l in [4, 4, 2] {
            c.push(Vec3::new(0.1, 0.1, 0.1), l, Some(0));
        }
        for l in [9, 3] {
            c.push(Vec3::new(0.9, 0.9, 0.9), l, Some(0));
        }
        let g = voxelize_majority(&c, &spec());
        assert_eq!(g.get([0, 0, 0]), 4);
        assert_eq!(g.get([3, 3, 3]), 3);
    }

    #[test]
    fn matches_histogram_oracle() {
        let s = spec();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let mut c = SemanticPointCloud::default();
        for _ in 0..5000 {
            let p = Vec3::new(rng.random(), rng.random(), rng.random());
            c.push(p, rng.random_range(0..5), Some(0));
        }
        let g = voxelize_majority(&c, &s);
        for idx in 0..s.len() {
            let mut hist = [0usize; 5];
            for (p, &l) in c.points.iter().zip(&c.labels) {
                if s.world_to_cell(p).map(|cc| s.index(cc)) == Some(idx) {
                    hist[l as usize] += 1;
                }
            }
            let max = *hist.iter().max().unwrap();
            let expect = if max == 0 { UNKNOWN } else { hist.iter().position(|&h| h == max).unwrap() as Label };
            assert_eq!(g.labels[idx], expect);
        }
    }
}
