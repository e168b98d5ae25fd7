use crate::annotation::{Label, VoxelGrid, FREE, UNKNOWN};
use crate::error::{Error, Result};

/// Reduce a label grid by an integer factor. Each coarse voxel takes the
/// most frequent occupied label among its children (lowest id on ties); a
/// block with no occupied child is free if any child is free and unknown
/// otherwise. Children beyond the fine grid count as unknown.
pub fn downsample_labels(fine: &VoxelGrid, factor: usize) -> Result<VoxelGrid> {
    if factor == 0 {
        return Err(Error::invalid("factor", "must be at least 1"));
    }
    if factor == 1 {
        return Ok(fine.clone());
    }
    let coarse_spec = fine.spec.coarsened(factor);
    let fd = fine.spec.dims();
    let mut out = VoxelGrid::filled(coarse_spec, UNKNOWN);
    let mut counts: Vec<(Label, usize)> = Vec::new();
    for c in coarse_spec.cells() {
        counts.clear();
        let mut any_free = false;
        for x in c[0] * factor..((c[0] + 1) * factor).min(fd[0]) {
            for y in c[1] * factor..((c[1] + 1) * factor).min(fd[1]) {
                for z in c[2] * factor..((c[2] + 1) * factor).min(fd[2]) {
                    let l = fine.get([x, y, z]);
                    if l == FREE {
                        any_free = true;
                    } else if l != UNKNOWN {
                        match counts.iter_mut().find(|e| e.0 == l) {
                            Some(e) => e.1 += 1,
                            None => counts.push((l, 1)),
                        }
                    }
                }
            }
        }
        let label = counts
            .iter()
            .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
            .map(|e| e.0)
            .unwrap_or(if any_free { FREE } else { UNKNOWN });
        out.set(c, label);
    }
    Ok(out)
}
