use crate::annotation::VoxelGrid;
use crate::shapes::OrientedBox;

/// Fill the interior of every box with its class: each voxel whose center
/// lies inside a box takes that box's class, and where boxes overlap the
/// smaller box wins.
pub fn amodal_fill(grid: &VoxelGrid, boxes: &[OrientedBox]) -> VoxelGrid {
    let spec = grid.spec;
    let mut out = grid.clone();
    let mut order: Vec<usize> = (0..boxes.len()).collect();
    // paint large to small so smaller boxes overwrite
    order.sort_by(|&a, &b| boxes[b].volume().total_cmp(&boxes[a].volume()).then(b.cmp(&a)));
    for &k in &order {
        let b = &boxes[k];
        let r = b.half_extents.norm();
        let mut range = [(0usize, 0usize); 3];
        for (a, slot) in range.iter_mut().enumerate() {
            let (lo, hi) = spec.range(a);
            let size = spec.cell_size()[a];
            let from = ((b.center[a] - r - lo) / size).floor().max(0.0) as usize;
            let to = (((b.center[a] + r - lo) / size).ceil().max(0.0) as usize).min(spec.dims()[a]);
            *slot = (from.min(to), to);
            let _ = hi;
        }
        for x in range[0].0..range[0].1 {
            for y in range[1].0..range[1].1 {
                for z in range[2].0..range[2].1 {
                    let c = [x, y, z];
                    if b.contains(&spec.cell_center(c), 0.0) {
                        out.labels[spec.index(c)] = b.class;
                    }
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotation::{FREE, UNKNOWN};
    use crate::grid::{GridSpec, Vec3};

    fn spec() -> GridSpec {
        GridSpec::new((0.0, 4.0), (0.0, 4.0), (0.0, 4.0), 0.5).unwrap()
    }

    fn abox(center: Vec3, half: f64, class: u16) -> OrientedBox {
        OrientedBox { center, half_extents: Vec3::repeat(half), yaw: 0.0, class, instance: None }
    }

    #[test]
    fn fills_interior_only() {
        let g = VoxelGrid::filled(spec(), FREE);
        let out = amodal_fill(&g, &[abox(Vec3::new(2.0, 2.0, 2.0), 0.6, 3)]);
        let filled = out.labels.iter().filter(|&&l| l == 3).count();
        assert_eq!(filled, 8);
        assert!(out.labels.iter().all(|&l| l == 3 || l == FREE));
    }

    #[test]
    fn smaller_box_wins_regardless_of_order() {
        let g = VoxelGrid::filled(spec(), UNKNOWN);
        let big = abox(Vec3::new(2.0, 2.0, 2.0), 1.6, 1);
        let small = abox(Vec3::new(2.0, 2.0, 2.0), 0.6, 2);
        let a = amodal_fill(&g, &[big, small]);
        let b = amodal_fill(&g, &[small, big]);
        assert_eq!(a, b);
        assert_eq!(a.get([3, 3, 3]), 2);
        assert_eq!(a.get([1, 1, 1]), 1);
    }
}
