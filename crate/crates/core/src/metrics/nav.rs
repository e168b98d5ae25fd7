//! Per-episode navigation, path-fidelity and grounding scores.

use crate::grid::Vec3;

/// Success radius and the distance scale of the fidelity metrics, meters.
pub const SUCCESS_RADIUS: f64 = 3.0;

pub fn path_length(path: &[Vec3]) -> f64 {
    path.windows(2).fold(0.0, |acc, w| acc + (w[1] - w[0]).norm())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NavScores {
    pub tl: f64,
    pub ne: f64,
    pub sr: f64,
    pub osr: f64,
    pub spl: f64,
}

/// `walk` is the traversed sequence of positions, `goal` the target
/// position and `shortest` the graph shortest-path length start to goal.
pub fn nav_metrics(walk: &[Vec3], goal: &Vec3, shortest: f64, radius: f64) -> NavScores {
    let tl = path_length(walk);
    let ne = walk.last().map_or(f64::INFINITY, |p| (p - goal).norm());
    let sr = if ne <= radius { 1.0 } else { 0.0 };
    let osr = if walk.iter().any(|p| (p - goal).norm() <= radius) { 1.0 } else { 0.0 };
    NavScores { tl, ne, sr, osr, spl: sr * spl_factor(shortest, tl) }
}

/// `d / max(d, tl)`, 1 when both are zero.
pub fn spl_factor(shortest: f64, tl: f64) -> f64 {
    let m = shortest.max(tl);
    if m > 0.0 {
        shortest / m
    } else {
        1.0
    }
}

/// Dynamic time warping cost between two position sequences.
pub fn dtw(a: &[Vec3], b: &[Vec3]) -> f64 {
    let (n, m) = (a.len(), b.len());
    let mut d = vec![f64::INFINITY; (n + 1) * (m + 1)];
    d[0] = 0.0;
    for i in 1..=n {
        for j in 1..=m {
            let best = d[(i - 1) * (m + 1) + j].min(d[i * (m + 1) + j - 1]).min(d[(i - 1) * (m + 1) + j - 1]);
            d[i * (m + 1) + j] = (a[i - 1] - b[j - 1]).norm() + best;
        }
    }
    d[n * (m + 1) + m]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FidelityScores {
    pub cls: f64,
    pub ndtw: f64,
    pub sdtw: f64,
}

/// Coverage weighted by length score of `path` against `reference`.
pub fn cls(path: &[Vec3], reference: &[Vec3], d_th: f64) -> f64 {
    let coverage = reference
        .iter()
        .map(|r| (-path.iter().map(|p| (p - r).norm()).fold(f64::INFINITY, f64::min) / d_th).exp())
        .sum::<f64>()
        / reference.len() as f64;
    let expected = coverage * path_length(reference);
    let actual = path_length(path);
    let denom = expected + (expected - actual).abs();
    let ls = if denom > 0.0 { expected / denom } else { 1.0 };
    coverage * ls
}

pub fn fidelity_metrics(path: &[Vec3], reference: &[Vec3], success: f64, d_th: f64) -> FidelityScores {
    let ndtw = (-dtw(reference, path) / (reference.len() as f64 * d_th)).exp();
    FidelityScores { cls: cls(path, reference, d_th), ndtw, sdtw: success * ndtw }
}

/// Remote grounding success and its path-length weighted form.
pub fn grounding_metrics(chosen: Option<u32>, target: u32, success: f64, shortest: f64, tl: f64) -> (f64, f64) {
    let rgs = if success > 0.0 && chosen == Some(target) { 1.0 } else { 0.0 };
    (rgs, rgs * spl_factor(shortest, tl))
}
