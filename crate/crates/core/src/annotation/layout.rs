//! Cuboid room layout from wall points around an agent.
//!
//! The dominant wall direction is found by scanning headings for the
//! sharpest projection histograms. On each axis the nearest strong
//! histogram peak on either side of the agent seeds a wall line; a trimmed
//! least-squares pass (fixed assignment to the nearest wall, golden-section
//! search on the heading) then refines all four lines.

use std::f64::consts::FRAC_PI_4;

use crate::grid::Vec3;
use crate::shapes::RoomLayout;

const BIN: f64 = 0.05;
const INLIER: f64 = 0.2;
const MIN_POINTS: usize = 40;

/// Fit the room enclosing `agent`. Returns `None` when the walls do not
/// surround the agent (open areas, corridors seen end-on) or there are too
/// few wall points to decide.
pub fn fit_room_layout(wall_points: &[Vec3], agent: Vec3) -> Option<RoomLayout> {
    if wall_points.len() < MIN_POINTS || !encloses(wall_points, &agent) {
        return None;
    }
    let rel: Vec<[f64; 2]> = wall_points.iter().map(|p| [p.x - agent.x, p.y - agent.y]).collect();

    let theta0 = scan_heading(&rel);
    let mut theta = theta0;
    let mut lines = seed_lines(&rel, theta)?;
    for _ in 0..3 {
        let groups = assign(&rel, theta, &lines);
        if groups.iter().any(|g| g.len() < 3) {
            return None;
        }
        theta = golden_section(theta - 1f64.to_radians(), theta + 1f64.to_radians(), |t| cost(&rel, &groups, t));
        lines = refit_offsets(&rel, &groups, theta);
    }
    // lines: [u_neg, u_pos, v_neg, v_pos], agent at the origin
    if !(lines[0] < 0.0 && lines[1] > 0.0 && lines[2] < 0.0 && lines[3] > 0.0) {
        return None;
    }

    let inliers: Vec<f64> = assign(&rel, theta, &lines)
        .iter()
        .flatten()
        .map(|&i| wall_points[i].z)
        .collect();
    let zmin = inliers.iter().copied().fold(f64::INFINITY, f64::min);
    let zmax = inliers.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    let (s, c) = theta.sin_cos();
    let (mu, mv) = ((lines[0] + lines[1]) / 2.0, (lines[2] + lines[3]) / 2.0);
    let (mut width, mut length) = (lines[1] - lines[0], lines[3] - lines[2]);
    let mut rotation = theta;
    if rotation >= FRAC_PI_4 {
        rotation -= std::f64::consts::FRAC_PI_2;
        std::mem::swap(&mut width, &mut length);
    } else if rotation < -FRAC_PI_4 {
        rotation += std::f64::consts::FRAC_PI_2;
        std::mem::swap(&mut width, &mut length);
    }
    Some(RoomLayout {
        center: Vec3::new(agent.x + c * mu - s * mv, agent.y + s * mu + c * mv, (zmin + zmax) / 2.0),
        width,
        length,
        height: zmax - zmin,
        rotation,
    })
}

fn encloses(points: &[Vec3], agent: &Vec3) -> bool {
    let mut quadrants = [0usize; 4];
    for p in points {
        let q = usize::from(p.x >= agent.x) + 2 * usize::from(p.y >= agent.y);
        quadrants[q] += 1;
    }
    let need = (points.len() / 100).max(3);
    quadrants.iter().all(|&n| n >= need)
}

fn project(p: &[f64; 2], theta: f64) -> (f64, f64) {
    let (s, c) = theta.sin_cos();
    (c * p[0] + s * p[1], -s * p[0] + c * p[1])
}

fn histogram(values: impl Iterator<Item = f64>) -> (f64, Vec<usize>) {
    let vals: Vec<f64> = values.collect();
    let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let n = ((hi - lo) / BIN).floor() as usize + 1;
    let mut h = vec![0usize; n];
    for v in vals {
        h[((v - lo) / BIN).floor() as usize] += 1;
    }
    (lo, h)
}

fn sharpness(rel: &[[f64; 2]], theta: f64) -> f64 {
    let (_, hu) = histogram(rel.iter().map(|p| project(p, theta).0));
    let (_, hv) = histogram(rel.iter().map(|p| project(p, theta).1));
    hu.iter().chain(&hv).map(|&c| (c * c) as f64).sum()
}

/// Heading in `[-pi/4, pi/4)` whose axes give the sharpest histograms.
fn scan_heading(rel: &[[f64; 2]]) -> f64 {
    let steps = 180;
    let mut best = (f64::NEG_INFINITY, 0.0);
    for k in 0..steps {
        let t = -FRAC_PI_4 + k as f64 * (2.0 * FRAC_PI_4 / steps as f64);
        let s = sharpness(rel, t);
        if s > best.0 {
            best = (s, t);
        }
    }
    best.1
}

/// Nearest strong histogram peak on each side of the origin, per axis.
fn seed_lines(rel: &[[f64; 2]], theta: f64) -> Option<[f64; 4]> {
    let mut out = [0.0; 4];
    for axis in 0..2 {
        let vals: Vec<f64> = rel
            .iter()
            .map(|p| {
                let (u, v) = project(p, theta);
                if axis == 0 { u } else { v }
            })
            .collect();
        let (lo, h) = histogram(vals.iter().copied());
        let max = *h.iter().max()?;
        let strong = |i: usize| h[i] * 4 >= max && (i == 0 || h[i] >= h[i - 1]) && (i + 1 == h.len() || h[i] >= h[i + 1]);
        let center = |i: usize| lo + (i as f64 + 0.5) * BIN;
        let neg = (0..h.len()).filter(|&i| strong(i) && center(i) < 0.0).max_by(|&a, &b| center(a).total_cmp(&center(b)))?;
        let pos = (0..h.len()).filter(|&i| strong(i) && center(i) > 0.0).min_by(|&a, &b| center(a).total_cmp(&center(b)))?;
        for (slot, bin) in [(2 * axis, neg), (2 * axis + 1, pos)] {
            let c = center(bin);
            let near: Vec<f64> = vals.iter().copied().filter(|v| (v - c).abs() <= 2.0 * BIN).collect();
            out[slot] = near.iter().sum::<f64>() / near.len() as f64;
        }
    }
    Some(out)
}

/// Points within the inlier band of each wall line, restricted to the span
/// between the perpendicular walls.
fn assign(rel: &[[f64; 2]], theta: f64, lines: &[f64; 4]) -> [Vec<usize>; 4] {
    let mut groups: [Vec<usize>; 4] = Default::default();
    for (i, p) in rel.iter().enumerate() {
        let (u, v) = project(p, theta);
        let in_u = u >= lines[0] - INLIER && u <= lines[1] + INLIER;
        let in_v = v >= lines[2] - INLIER && v <= lines[3] + INLIER;
        let d = [
            (u - lines[0]).abs(),
            (u - lines[1]).abs(),
            (v - lines[2]).abs(),
            (v - lines[3]).abs(),
        ];
        let (k, dk) = d.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).unwrap();
        let within_span = if k < 2 { in_v } else { in_u };
        if *dk <= INLIER && within_span {
            groups[k].push(i);
        }
    }
    groups
}

fn cost(rel: &[[f64; 2]], groups: &[Vec<usize>; 4], theta: f64) -> f64 {
    groups
        .iter()
        .enumerate()
        .map(|(k, g)| {
            let vals: Vec<f64> = g
                .iter()
                .map(|&i| {
                    let (u, v) = project(&rel[i], theta);
                    if k < 2 { u } else { v }
                })
                .collect();
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            vals.iter().map(|x| (x - mean).powi(2)).sum::<f64>()
        })
        .sum()
}

fn refit_offsets(rel: &[[f64; 2]], groups: &[Vec<usize>; 4], theta: f64) -> [f64; 4] {
    let mut out = [0.0; 4];
    for (k, g) in groups.iter().enumerate() {
        let sum: f64 = g
            .iter()
            .map(|&i| {
                let (u, v) = project(&rel[i], theta);
                if k < 2 { u } else { v }
            })
            .sum();
        out[k] = sum / g.len() as f64;
    }
    out
}

fn golden_section(mut a: f64, mut b: f64, f: impl Fn(f64) -> f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..60 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    (a + b) / 2.0
}
