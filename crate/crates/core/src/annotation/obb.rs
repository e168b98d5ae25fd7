use crate::error::{Error, Result};
use crate::grid::Vec3;
use crate::scene::ClassId;
use crate::shapes::{normalize_yaw, OrientedBox};

const MIN_HALF_EXTENT: f64 = 1e-6;

/// Gravity-aligned oriented box around `points`. The heading is the
/// principal axis of the horizontal covariance; when the footprint is
/// isotropic (a square, say) the principal axis is undefined and the
/// minimum-area rectangle over convex-hull edge directions is used instead.
pub fn fit_oriented_box(points: &[Vec3], class: ClassId, instance: Option<u32>) -> Result<OrientedBox> {
    if points.len() < 3 {
        return Err(Error::Degenerate(format!("box fit needs at least 3 points, got {}", points.len())));
    }
    check_not_collinear(points)?;

    let n = points.len() as f64;
    let (mx, my) = points.iter().fold((0.0, 0.0), |(a, b), p| (a + p.x, b + p.y));
    let (mx, my) = (mx / n, my / n);
    let (mut cxx, mut cyy, mut cxy) = (0.0, 0.0, 0.0);
    for p in points {
        let (dx, dy) = (p.x - mx, p.y - my);
        cxx += dx * dx;
        cyy += dy * dy;
        cxy += dx * dy;
    }
    let (cxx, cyy, cxy) = (cxx / n, cyy / n, cxy / n);
    let gap = ((cxx - cyy).powi(2) + 4.0 * cxy * cxy).sqrt();
    let trace = cxx + cyy;
    let theta = if trace > 0.0 && gap > 1e-9 * trace {
        0.5 * (2.0 * cxy).atan2(cxx - cyy)
    } else {
        min_area_heading(points)
    };
    Ok(box_along(points, theta, class, instance))
}

fn check_not_collinear(points: &[Vec3]) -> Result<()> {
    let a = points[0];
    let far = points
        .iter()
        .copied()
        .max_by(|p, q| (p - a).norm_squared().total_cmp(&(q - a).norm_squared()))
        .unwrap();
    let axis = far - a;
    let len = axis.norm();
    if len < 1e-12 {
        return Err(Error::Degenerate("all points coincide".into()));
    }
    let dir = axis / len;
    let off_line = points.iter().any(|p| (p - a).cross(&dir).norm() > 1e-9 * len.max(1.0));
    if off_line {
        Ok(())
    } else {
        Err(Error::Degenerate("points are collinear".into()))
    }
}

fn box_along(points: &[Vec3], theta: f64, class: ClassId, instance: Option<u32>) -> OrientedBox {
    let (s, c) = theta.sin_cos();
    let (mut lo, mut hi) = ([f64::INFINITY; 3], [f64::NEG_INFINITY; 3]);
    for p in points {
        let q = [c * p.x + s * p.y, -s * p.x + c * p.y, p.z];
        for a in 0..3 {
            lo[a] = lo[a].min(q[a]);
            hi[a] = hi[a].max(q[a]);
        }
    }
    let mid = [(lo[0] + hi[0]) / 2.0, (lo[1] + hi[1]) / 2.0, (lo[2] + hi[2]) / 2.0];
    let center = Vec3::new(c * mid[0] - s * mid[1], s * mid[0] + c * mid[1], mid[2]);
    let half = Vec3::new(
        ((hi[0] - lo[0]) / 2.0).max(MIN_HALF_EXTENT),
        ((hi[1] - lo[1]) / 2.0).max(MIN_HALF_EXTENT),
        ((hi[2] - lo[2]) / 2.0).max(MIN_HALF_EXTENT),
    );
    OrientedBox {
        center,
        half_extents: half,
        yaw: normalize_yaw(theta),
        class,
        instance,
    }
}

fn min_area_heading(points: &[Vec3]) -> f64 {
    let hull = convex_hull(points.iter().map(|p| (p.x, p.y)).collect());
    if hull.len() < 2 {
        return 0.0;
    }
    let mut best = (f64::INFINITY, 0.0);
    for i in 0..hull.len() {
        let (a, b) = (hull[i], hull[(i + 1) % hull.len()]);
        let theta = (b.1 - a.1).atan2(b.0 - a.0);
        let (s, c) = theta.sin_cos();
        let (mut u0, mut u1, mut v0, mut v1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for &(x, y) in &hull {
            let (u, v) = (c * x + s * y, -s * x + c * y);
            u0 = u0.min(u);
            u1 = u1.max(u);
            v0 = v0.min(v);
            v1 = v1.max(v);
        }
        let area = (u1 - u0) * (v1 - v0);
        if area < best.0 - 1e-12 {
            best = (area, theta);
        }
    }
    best.1
}

/// Andrew's monotone chain, counter-clockwise, collinear points dropped.
pub fn convex_hull(mut pts: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: (f64, f64), a: (f64, f64), b: (f64, f64)| (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0);
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(pts.len() * 2);
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &(f64, f64)>> =
            if pass == 0 { Box::new(pts.iter()) } else { Box::new(pts.iter().rev()) };
        for &p in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes::angle_distance_mod;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    fn corners(b: &OrientedBox) -> Vec<Vec3> {
        let (s, c) = b.yaw.sin_cos();
        let mut out = Vec::new();
        for sx in [-1.0, 1.0] {
            for sy in [-1.0, 1.0] {
                for sz in [-1.0, 1.0] {
                    let (u, v) = (sx * b.half_extents.x, sy * b.half_extents.y);
                    out.push(b.center + Vec3::new(c * u - s * v, s * u + c * v, sz * b.half_extents.z));
                }
            }
        }
        out
    }

    fn rotate_z(p: &Vec3, t: f64) -> Vec3 {
        let (s, c) = t.sin_cos();
        Vec3::new(c * p.x - s * p.y, s * p.x + c * p.y, p.z)
    }

    #[test]
    fn axis_aligned_unit_cube() {
        let b = OrientedBox {
            center: Vec3::new(0.5, 0.5, 0.5),
            half_extents: Vec3::repeat(0.5),
            yaw: 0.0,
            class: 0,
            instance: None,
        };
        let fit = fit_oriented_box(&corners(&b), 0, None).unwrap();
        assert!((fit.center - b.center).norm() < 1e-12);
        assert!((fit.half_extents - b.half_extents).norm() < 1e-12);
        assert!(angle_distance_mod(fit.yaw, 0.0, FRAC_PI_2) < 1e-9);
    }

    #[test]
    fn rotated_rectangle_30deg() {
        let b = OrientedBox {
            center: Vec3::new(1.0, -2.0, 0.4),
            half_extents: Vec3::new(1.0, 0.5, 0.4),
            yaw: 30f64.to_radians(),
            class: 2,
            instance: Some(3),
        };
        let fit = fit_oriented_box(&corners(&b), 2, Some(3)).unwrap();
        assert!(angle_distance_mod(fit.yaw, b.yaw, FRAC_PI_2) < 1e-6);
        let mut got = [fit.half_extents.x, fit.half_extents.y];
        got.sort_by(f64::total_cmp);
        assert!((got[0] - 0.5).abs() < 1e-9 && (got[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn rotated_cube_uses_hull_fallback() {
        let b = OrientedBox {
            center: Vec3::zeros(),
            half_extents: Vec3::repeat(0.7),
            yaw: 0.3,
            class: 0,
            instance: None,
        };
        let fit = fit_oriented_box(&corners(&b), 0, None).unwrap();
        assert!(angle_distance_mod(fit.yaw, 0.3, FRAC_PI_2) < 1e-6);
        assert!((fit.volume() - b.volume()).abs() < 1e-9);
    }

    #[test]
    fn degenerate_inputs() {
        let p = Vec3::new(1.0, 2.0, 3.0);
        assert!(fit_oriented_box(&[p, p, p], 0, None).is_err());
        let line: Vec<Vec3> = (0..5).map(|i| Vec3::new(i as f64, 2.0 * i as f64, 0.0)).collect();
        assert!(fit_oriented_box(&line, 0, None).is_err());
        assert!(fit_oriented_box(&line[..2], 0, None).is_err());
    }

    proptest! {
        #[test]
        fn contains_all_points_and_is_rotation_equivariant(
            seed in 0u64..10_000, theta in -3.0f64..3.0, n in 5usize..60,
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let pts: Vec<Vec3> = (0..n)
                .map(|_| Vec3::new(rng.random_range(-2.0..2.0), rng.random_range(-0.5..0.5), rng.random_range(0.0..1.0)))
                .collect();
            let fit = fit_oriented_box(&pts, 1, None).unwrap();
            for p in &pts {
                let l = fit.to_local(p);
                for a in 0..3 {
                    prop_assert!(l[a].abs() <= fit.half_extents[a] + 1e-9);
                }
            }
            let rotated: Vec<Vec3> = pts.iter().map(|p| rotate_z(p, theta)).collect();
            let fit2 = fit_oriented_box(&rotated, 1, None).unwrap();
            prop_assert!(angle_distance_mod(fit2.yaw, fit.yaw + theta, FRAC_PI_2) < 1e-6);
            let mut e1 = [fit.half_extents.x, fit.half_extents.y];
            let mut e2 = [fit2.half_extents.x, fit2.half_extents.y];
            e1.sort_by(f64::total_cmp);
            e2.sort_by(f64::total_cmp);
            prop_assert!((e1[0] - e2[0]).abs() < 1e-6 && (e1[1] - e2[1]).abs() < 1e-6);
            prop_assert!((fit.half_extents.z - fit2.half_extents.z).abs() < 1e-9);
        }
    }
}
