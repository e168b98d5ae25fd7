//! Optional object-grounding head: each object column of the updated
//! volume is summed over height and scored, normalized over the objects.

use super::action::ActionDist;
use super::mlt::ScoreMlp;
use crate::encoder::VolumeFeature;
use crate::error::{Error, Result};
use crate::grid::{GridSpec, Vec3};

pub fn object_grounding(f: &VolumeFeature, objects: &[(u32, Vec3)], spec: &GridSpec, head: &ScoreMlp) -> Result<ActionDist> {
    if spec.dims() != f.dims {
        return Err(Error::Shape(format!("feature {:?} vs grid {:?}", f.dims, spec.dims())));
    }
    let mut logits = Vec::with_capacity(objects.len());
    for (id, p) in objects {
        let (Some(x), Some(y)) = (spec.axis_cell(0, p.x), spec.axis_cell(1, p.y)) else {
            return Err(Error::OutOfGrid(format!("object {id}")));
        };
        let mut column = vec![0.0; f.channels];
        for z in 0..f.dims[2] {
            for (a, v) in column.iter_mut().zip(f.cell([x, y, z])) {
                *a += v;
            }
        }
        logits.push(head.score(&column));
    }
    crate::params::softmax_in_place(&mut logits);
    ActionDist::new(objects.iter().map(|o| o.0).collect(), logits)
}
