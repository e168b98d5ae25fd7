//! Gravity-aligned boxes and cuboid room layouts, plus the planar polygon
//! clipping used for their volumes of intersection.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::grid::Vec3;

pub type Point2 = [f64; 2];

/// Wrap an angle into `[-pi/2, pi/2)`.
pub fn normalize_yaw(yaw: f64) -> f64 {
    let mut y = (yaw + FRAC_PI_2).rem_euclid(PI) - FRAC_PI_2;
    if y >= FRAC_PI_2 {
        y -= PI;
    }
    y
}

/// Distance between two angles modulo `period`.
pub fn angle_distance_mod(a: f64, b: f64, period: f64) -> f64 {
    let d = (a - b).rem_euclid(period);
    d.min(period - d)
}

/// A box rotated about the vertical axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientedBox {
    pub center: Vec3,
    pub half_extents: Vec3,
    pub yaw: f64,
    pub class: u16,
    pub instance: Option<u32>,
}

impl OrientedBox {
    pub fn axes(&self) -> (Point2, Point2) {
        yaw_axes(self.yaw)
    }

    pub fn volume(&self) -> f64 {
        8.0 * self.half_extents.x * self.half_extents.y * self.half_extents.z
    }

    pub fn contains(&self, p: &Vec3, tol: f64) -> bool {
        let local = self.to_local(p);
        (0..3).all(|a| local[a].abs() <= self.half_extents[a] + tol)
    }

    /// Coordinates of `p` in the box frame.
    pub fn to_local(&self, p: &Vec3) -> Vec3 {
        let (u, v) = self.axes();
        let d = p - self.center;
        Vec3::new(d.x * u[0] + d.y * u[1], d.x * v[0] + d.y * v[1], d.z)
    }

    pub fn footprint(&self) -> [Point2; 4] {
        rect_corners(
            [self.center.x, self.center.y],
            self.half_extents.x,
            self.half_extents.y,
            self.yaw,
        )
    }

    pub fn z_range(&self) -> (f64, f64) {
        (self.center.z - self.half_extents.z, self.center.z + self.half_extents.z)
    }

    /// Closed-set overlap with an axis-aligned box. Zero half extents are
    /// allowed, which makes this usable for planar faces.
    pub fn touches_aabb(&self, lo: &Vec3, hi: &Vec3) -> bool {
        let (z0, z1) = self.z_range();
        if z1 < lo.z || z0 > hi.z {
            return false;
        }
        let square = [[lo.x, lo.y], [hi.x, lo.y], [hi.x, hi.y], [lo.x, hi.y]];
        let fp = self.footprint();
        let (u, v) = self.axes();
        [[1.0, 0.0], [0.0, 1.0], u, v].iter().all(|axis| {
            let (a0, a1) = project(&fp, axis);
            let (b0, b1) = project(&square, axis);
            a1 >= b0 && b1 >= a0
        })
    }

    /// Yaw rotated into `[-pi/2, pi/2)`; a quarter turn swaps the horizontal extents.
    pub fn canonical(mut self) -> Self {
        let mut yaw = normalize_yaw(self.yaw);
        // representation with yaw in [-pi/4, pi/4) is unique up to extents
        if yaw >= FRAC_PI_2 / 2.0 {
            yaw -= FRAC_PI_2;
            self.half_extents = Vec3::new(self.half_extents.y, self.half_extents.x, self.half_extents.z);
        } else if yaw < -FRAC_PI_2 / 2.0 {
            yaw += FRAC_PI_2;
            self.half_extents = Vec3::new(self.half_extents.y, self.half_extents.x, self.half_extents.z);
        }
        self.yaw = yaw;
        self
    }
}

/// Cuboid room: `width` along the rotated x axis, `length` along rotated y.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoomLayout {
    pub center: Vec3,
    pub width: f64,
    pub length: f64,
    pub height: f64,
    pub rotation: f64,
}

impl RoomLayout {
    pub fn as_box(&self) -> OrientedBox {
        OrientedBox {
            center: self.center,
            half_extents: Vec3::new(0.5 * self.width, 0.5 * self.length, 0.5 * self.height),
            yaw: self.rotation,
            class: 0,
            instance: None,
        }
    }

    pub fn contains_horizontal(&self, x: f64, y: f64) -> bool {
        let b = self.as_box();
        let local = b.to_local(&Vec3::new(x, y, b.center.z));
        local.x.abs() <= b.half_extents.x && local.y.abs() <= b.half_extents.y
    }
}

pub fn yaw_axes(yaw: f64) -> (Point2, Point2) {
    let (s, c) = yaw.sin_cos();
    ([c, s], [-s, c])
}

/// Counter-clockwise corners of a rotated rectangle.
pub fn rect_corners(center: Point2, hx: f64, hy: f64, yaw: f64) -> [Point2; 4] {
    let (u, v) = yaw_axes(yaw);
    let at = |a: f64, b: f64| [center[0] + a * u[0] + b * v[0], center[1] + a * u[1] + b * v[1]];
    [at(-hx, -hy), at(hx, -hy), at(hx, hy), at(-hx, hy)]
}

fn project(poly: &[Point2], axis: &Point2) -> (f64, f64) {
    poly.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
        let d = p[0] * axis[0] + p[1] * axis[1];
        (lo.min(d), hi.max(d))
    })
}

pub fn polygon_area(poly: &[Point2]) -> f64 {
    let n = poly.len();
    if n < 3 {
        return 0.0;
    }
    let mut twice = 0.0;
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        twice += a[0] * b[1] - a[1] * b[0];
    }
    0.5 * twice.abs()
}

/// Sutherland-Hodgman clip of `subject` by the convex counter-clockwise `clip`.
pub fn clip_convex(subject: &[Point2], clip: &[Point2]) -> Vec<Point2> {
    let mut out: Vec<Point2> = subject.to_vec();
    let n = clip.len();
    for i in 0..n {
        if out.is_empty() {
            break;
        }
        let (a, b) = (clip[i], clip[(i + 1) % n]);
        let side = |p: &Point2| (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
        let input = std::mem::take(&mut out);
        for j in 0..input.len() {
            let cur = input[j];
            let prev = input[(j + input.len() - 1) % input.len()];
            let (sc, sp) = (side(&cur), side(&prev));
            if sc >= 0.0 {
                if sp < 0.0 {
                    out.push(intersect(prev, cur, sp, sc));
                }
                out.push(cur);
            } else if sp >= 0.0 {
                out.push(intersect(prev, cur, sp, sc));
            }
        }
    }
    out
}

fn intersect(p: Point2, q: Point2, sp: f64, sq: f64) -> Point2 {
    let t = sp / (sp - sq);
    [p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]
}

/// Volume of the intersection of two yaw-rotated boxes.
pub fn intersection_volume(a: &OrientedBox, b: &OrientedBox) -> f64 {
    let (a0, a1) = a.z_range();
    let (b0, b1) = b.z_range();
    let dz = a1.min(b1) - a0.max(b0);
    if dz <= 0.0 {
        return 0.0;
    }
    let area = polygon_area(&clip_convex(&a.footprint(), &b.footprint()));
    area * dz
}

pub fn box_iou(a: &OrientedBox, b: &OrientedBox) -> f64 {
    let inter = intersection_volume(a, b);
    let union = a.volume() + b.volume() - inter;
    if union <= 0.0 {
        0.0
    } else {
        (inter / union).clamp(0.0, 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cube(x: f64, yaw: f64) -> OrientedBox {
        OrientedBox {
            center: Vec3::new(x, 0.0, 0.0),
            half_extents: Vec3::new(0.5, 0.5, 0.5),
            yaw,
            class: 0,
            instance: None,
        }
    }

    #[test]
    fn normalize_range() {
        for k in -20..20 {
            let y = normalize_yaw(k as f64 * 0.37);
            assert!((-FRAC_PI_2..FRAC_PI_2).contains(&y));
        }
        assert_eq!(normalize_yaw(FRAC_PI_2), -FRAC_PI_2);
    }

    #[test]
    fn offset_cubes_third() {
        let iou = box_iou(&cube(0.0, 0.0), &cube(0.5, 0.0));
        assert!((iou - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn identical_and_disjoint() {
        assert!((box_iou(&cube(0.0, 0.3), &cube(0.0, 0.3)) - 1.0).abs() < 1e-12);
        assert_eq!(box_iou(&cube(0.0, 0.0), &cube(3.0, 0.2)), 0.0);
    }

    #[test]
    fn rotated_square_overlap_area() {
        // unit square vs same square rotated 45 degrees: regular octagon
        let a = cube(0.0, 0.0);
        let b = cube(0.0, std::f64::consts::FRAC_PI_4);
        let expect = 2.0 * (2.0f64.sqrt() - 1.0); // octagon area for unit square overlap
        assert!((intersection_volume(&a, &b) - expect).abs() < 1e-12);
    }

    #[test]
    fn face_touch() {
        let face = OrientedBox {
            center: Vec3::new(0.0, 0.0, 0.5),
            half_extents: Vec3::new(1.0, 0.0, 0.5),
            yaw: 0.3,
            class: 0,
            instance: None,
        };
        assert!(face.touches_aabb(&Vec3::new(-0.05, -0.05, 0.0), &Vec3::new(0.05, 0.05, 0.1)));
        assert!(!face.touches_aabb(&Vec3::new(0.0, 0.5, 0.0), &Vec3::new(0.1, 0.6, 0.1)));
    }
}
