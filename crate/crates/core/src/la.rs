//! Small dense vector helpers used throughout the crate.
//!
//! State dimensions are tiny (a handful of components), so plain slices are
//! used everywhere instead of a matrix library.

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm_sq(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    norm_sq(a).sqrt()
}

#[inline]
pub fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[inline]
pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    dist_sq(a, b).sqrt()
}

/// `out += c * x`.
#[inline]
pub fn add_scaled(out: &mut [f64], c: f64, x: &[f64]) {
    debug_assert_eq!(out.len(), x.len());
    for (o, v) in out.iter_mut().zip(x) {
        *o += c * v;
    }
}

/// Multiply a row-major `k x d` matrix by a `d`-vector.
#[inline]
pub fn mat_vec(mat: &[f64], k: usize, d: usize, v: &[f64]) -> Vec<f64> {
    debug_assert_eq!(mat.len(), k * d);
    debug_assert_eq!(v.len(), d);
    (0..k).map(|row| dot(&mat[row * d..(row + 1) * d], v)).collect()
}

pub fn all_finite(a: &[f64]) -> bool {
    a.iter().all(|x| x.is_finite())
}
