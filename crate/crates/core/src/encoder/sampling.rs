use crate::camera::{Camera, Projection};
use crate::encoder::ViewFeature;
use crate::grid::GridSpec;

/// Bilinear blend of the four feature cells around `(x, y)` (column, row in
/// feature-grid units, cell centers at integers). Coordinates are clamped
/// to the map, so edge cells extend outward.
pub fn bilinear_sample(map: &ViewFeature, x: f64, y: f64, out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    bilinear_accumulate(map, x, y, 1.0, out);
}

/// `out += weight * bilinear(map, x, y)`.
pub fn bilinear_accumulate(map: &ViewFeature, x: f64, y: f64, weight: f64, out: &mut [f64]) {
    let d = map.channels;
    let x = x.clamp(0.0, (map.width - 1) as f64);
    let y = y.clamp(0.0, (map.height - 1) as f64);
    let (x0, y0) = (x.floor() as usize, y.floor() as usize);
    let (x1, y1) = ((x0 + 1).min(map.width - 1), (y0 + 1).min(map.height - 1));
    let (fx, fy) = (x - x0 as f64, y - y0 as f64);
    let taps = [
        (x0, y0, (1.0 - fx) * (1.0 - fy)),
        (x1, y0, fx * (1.0 - fy)),
        (x0, y1, (1.0 - fx) * fy),
        (x1, y1, fx * fy),
    ];
    for (cx, cy, w) in taps {
        if w == 0.0 {
            continue;
        }
        let px = map.pixel(cy, cx);
        let w = w * weight;
        for c in 0..d {
            out[c] += w * px[c];
        }
    }
}

/// Camera projection of every cell center of `spec` into every camera,
/// indexed `[cell][view]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferencePoints {
    pub views: usize,
    pub points: Vec<Projection>,
}

impl ReferencePoints {
    pub fn at(&self, cell: usize, view: usize) -> &Projection {
        &self.points[cell * self.views + view]
    }

    pub fn visible_views(&self, cell: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.views).filter(move |&v| self.at(cell, v).visible)
    }

    pub fn any_visible(&self, cell: usize) -> bool {
        self.visible_views(cell).next().is_some()
    }
}

pub fn reference_points(spec: &GridSpec, cameras: &[Camera]) -> ReferencePoints {
    let mut points = Vec::with_capacity(spec.len() * cameras.len());
    for cell in spec.cells() {
        let p = spec.cell_center(cell);
        points.extend(cameras.iter().map(|c| c.project(&p)));
    }
    ReferencePoints { views: cameras.len(), points }
}
