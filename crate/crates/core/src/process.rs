//! Flat per-path storage for grid-indexed processes and the weighted norms
//! used by the solver's stopping rule and by the bound diagnostics.

use crate::la;
use crate::noise::TimeGrid;

/// Dense `paths x len x width` array of `f64`, row-major in `(path, index)`.
///
/// `len` is `N + 1` for node-indexed processes (state `Y`) and `N` for
/// step-indexed processes (`Z`, `U`).
#[derive(Debug, Clone, PartialEq)]
pub struct PathArray {
    paths: usize,
    len: usize,
    width: usize,
    data: Vec<f64>,
}

impl PathArray {
    pub fn zeros(paths: usize, len: usize, width: usize) -> Self {
        Self { paths, len, width, data: vec![0.0; paths * len * width] }
    }

    #[inline]
    pub fn paths(&self) -> usize {
        self.paths
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    fn offset(&self, path: usize, index: usize) -> usize {
        debug_assert!(path < self.paths && index < self.len);
        (path * self.len + index) * self.width
    }

    #[inline]
    pub fn at(&self, path: usize, index: usize) -> &[f64] {
        let o = self.offset(path, index);
        &self.data[o..o + self.width]
    }

    #[inline]
    pub fn at_mut(&mut self, path: usize, index: usize) -> &mut [f64] {
        let o = self.offset(path, index);
        &mut self.data[o..o + self.width]
    }

    pub fn set(&mut self, path: usize, index: usize, value: &[f64]) {
        self.at_mut(path, index).copy_from_slice(value);
    }

    pub fn fill_zero(&mut self) {
        self.data.fill(0.0);
    }
}

/// Mean over paths of `sup_i e^{beta t_i} |x_i|^2` over all stored indices.
pub fn weighted_sup_norm_sq(x: &PathArray, grid: &TimeGrid, beta: f64) -> f64 {
    per_path_mean(x, |p| path_sup_sq(x, grid, beta, p, None))
}

/// Mean over paths of `sum_i h e^{beta t_i} |x_i|^2` (left-endpoint rule).
pub fn weighted_h2_norm_sq(x: &PathArray, grid: &TimeGrid, beta: f64) -> f64 {
    per_path_mean(x, |p| path_h2_sq(x, grid, beta, p, None))
}

/// Weighted sup-distance between two node-indexed processes.
/// Returns `(mean, standard error of the mean)` over paths.
pub fn weighted_sup_dist_sq(a: &PathArray, b: &PathArray, grid: &TimeGrid, beta: f64) -> (f64, f64) {
    per_path_stats(a, |p| path_sup_sq(a, grid, beta, p, Some(b)))
}

/// Weighted squared H2-distance between two step-indexed processes.
pub fn weighted_h2_dist_sq(a: &PathArray, b: &PathArray, grid: &TimeGrid, beta: f64) -> (f64, f64) {
    per_path_stats(a, |p| path_h2_sq(a, grid, beta, p, Some(b)))
}

fn path_sup_sq(a: &PathArray, grid: &TimeGrid, beta: f64, p: usize, b: Option<&PathArray>) -> f64 {
    let mut best = 0.0_f64;
    for i in 0..a.len() {
        let sq = match b {
            Some(b) => la::dist_sq(a.at(p, i), b.at(p, i)),
            None => la::norm_sq(a.at(p, i)),
        };
        best = best.max((beta * grid.time(i)).exp() * sq);
    }
    best
}

fn path_h2_sq(a: &PathArray, grid: &TimeGrid, beta: f64, p: usize, b: Option<&PathArray>) -> f64 {
    let h = grid.h();
    let mut acc = 0.0;
    for i in 0..a.len() {
        let sq = match b {
            Some(b) => la::dist_sq(a.at(p, i), b.at(p, i)),
            None => la::norm_sq(a.at(p, i)),
        };
        acc += h * (beta * grid.time(i)).exp() * sq;
    }
    acc
}

fn per_path_mean(x: &PathArray, f: impl Fn(usize) -> f64) -> f64 {
    if x.paths() == 0 {
        return 0.0;
    }
    (0..x.paths()).map(f).sum::<f64>() / x.paths() as f64
}

fn per_path_stats(x: &PathArray, f: impl Fn(usize) -> f64) -> (f64, f64) {
    let m = x.paths();
    if m == 0 {
        return (0.0, 0.0);
    }
    let vals: Vec<f64> = (0..m).map(f).collect();
    let mean = vals.iter().sum::<f64>() / m as f64;
    if m < 2 {
        return (mean, 0.0);
    }
    let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (m as f64 - 1.0);
    (mean, (var / m as f64).sqrt())
}
