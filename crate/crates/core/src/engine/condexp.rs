//! Conditional-expectation estimators for the backward recursion.
//!
//! Conditioning at step `i` is on the information carried by the forward
//! increments before `t_i` together with the backward increments after
//! `t_i`. Two estimators are provided:
//!
//! - an exact one on the sign-pattern tree, which averages within the
//!   scenario classes that share `(dW_0..dW_{i-1}, dB_i..dB_{N-1})`;
//! - least-squares regression on a polynomial basis of the state
//!   `(W_{t_i}, B_T - B_{t_i})`, the scalable Monte Carlo route.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::noise::{NoiseMode, PathEnsemble};

pub(crate) struct FitOutcome {
    /// Flat `paths x cols` matrix of fitted conditional expectations.
    pub fitted: Vec<f64>,
    /// Number of degree degradations forced by rank deficiency.
    pub fallbacks: usize,
}

/// Exact conditional expectation on the Rademacher tree by scenario
/// grouping. `targets` is flat `paths x cols`.
pub(crate) fn tree_fit(ens: &PathEnsemble, step: usize, targets: &[f64], cols: usize) -> FitOutcome {
    debug_assert_eq!(ens.mode(), NoiseMode::RademacherTree);
    let n = ens.grid().steps();
    let m = ens.paths();
    let groups = 1usize << n;
    let group_size = (m >> n) as f64;
    let w_mask = (1usize << step) - 1;

    let key = |p: usize| -> usize { (p & w_mask) | ((p >> (n + step)) << step) };

    let mut sums = vec![0.0; groups * cols];
    for p in 0..m {
        let k = key(p);
        for c in 0..cols {
            sums[k * cols + c] += targets[p * cols + c];
        }
    }
    let mut fitted = vec![0.0; m * cols];
    for p in 0..m {
        let k = key(p);
        for c in 0..cols {
            fitted[p * cols + c] = sums[k * cols + c] / group_size;
        }
    }
    FitOutcome { fitted, fallbacks: 0 }
}

/// Least-squares projection of each target column onto polynomials of the
/// step-`i` state, with SVD-based rank control.
///
/// Structurally constant columns (for example every power of `W_0 = 0`)
/// are dropped before the solve; a genuine rank deficiency among the
/// remaining columns degrades the polynomial degree and is counted.
pub(crate) fn regression_fit(
    ens: &PathEnsemble,
    step: usize,
    targets: &[f64],
    cols: usize,
    degree: usize,
) -> Result<FitOutcome> {
    let m = ens.paths();
    let d = ens.dim();
    let nvars = 2 * d;

    // state variables per path
    let mut vars = vec![0.0; m * nvars];
    for p in 0..m {
        let w = ens.w_at(p, step);
        let tail = ens.b_tail(p, step);
        vars[p * nvars..p * nvars + d].copy_from_slice(w);
        vars[p * nvars + d..(p + 1) * nvars].copy_from_slice(&tail);
    }

    let rhs = DMatrix::from_fn(m, cols, |r, c| targets[r * cols + c]);
    let mut fallbacks = 0;
    let mut deg = degree;
    loop {
        let exponents = monomials(nvars, deg);
        let mut columns: Vec<Vec<f64>> = Vec::with_capacity(exponents.len());
        for expo in &exponents {
            let col: Vec<f64> = (0..m)
                .map(|p| {
                    let mut v = 1.0;
                    for (j, &e) in expo.iter().enumerate() {
                        for _ in 0..e {
                            v *= vars[p * nvars + j];
                        }
                    }
                    v
                })
                .collect();
            let is_intercept = expo.iter().all(|&e| e == 0);
            if is_intercept || !is_constant(&col) {
                columns.push(col);
            }
        }
        let k = columns.len();
        if m < k {
            return Err(Error::InvalidArgument(format!(
                "regression needs at least {k} paths for degree {deg}, got {m}"
            )));
        }
        let design = DMatrix::from_fn(m, k, |r, c| columns[c][r]);
        let svd = design.clone().svd(true, true);
        let smax = svd.singular_values.iter().cloned().fold(0.0_f64, f64::max);
        let threshold = smax * m.max(k) as f64 * f64::EPSILON;
        let rank = svd.singular_values.iter().filter(|s| **s > threshold).count();
        if rank < k && deg > 0 {
            fallbacks += 1;
            deg -= 1;
            continue;
        }
        let beta = svd
            .solve(&rhs, threshold)
            .map_err(|_| Error::NumericFailure { context: "regression solve", residual: f64::NAN, iterations: 0 })?;
        let fit = design * beta;
        let mut fitted = vec![0.0; m * cols];
        for p in 0..m {
            for c in 0..cols {
                fitted[p * cols + c] = fit[(p, c)];
            }
        }
        return Ok(FitOutcome { fitted, fallbacks });
    }
}

fn is_constant(col: &[f64]) -> bool {
    let first = col[0];
    col.iter().all(|v| (v - first).abs() <= 1e-12 * (1.0 + first.abs()))
}

/// All exponent vectors with total degree at most `max_degree`, intercept
/// first, then by total degree.
fn monomials(nvars: usize, max_degree: usize) -> Vec<Vec<u32>> {
    let mut out: Vec<Vec<u32>> = Vec::new();
    let mut current = vec![0u32; nvars];
    fn rec(out: &mut Vec<Vec<u32>>, current: &mut Vec<u32>, var: usize, remaining: u32) {
        if var == current.len() {
            out.push(current.clone());
            return;
        }
        for e in 0..=remaining {
            current[var] = e;
            rec(out, current, var + 1, remaining - e);
        }
        current[var] = 0;
    }
    rec(&mut out, &mut current, 0, max_degree as u32);
    out.sort_by_key(|e| e.iter().sum::<u32>());
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::TimeGrid;

    #[test]
    fn monomial_count_matches_binomial() {
        // C(nvars + p, p) monomials of total degree <= p
        assert_eq!(monomials(2, 2).len(), 6);
        assert_eq!(monomials(2, 1).len(), 3);
        assert_eq!(monomials(4, 2).len(), 15);
        assert_eq!(monomials(2, 0).len(), 1);
    }

    #[test]
    fn tree_grouping_recovers_exact_conditional_expectation() {
        let grid = TimeGrid::new(1.0, 3).unwrap();
        let ens = PathEnsemble::rademacher_tree(grid).unwrap();
        let m = ens.paths();
        // conditioning at step 1 keys on (dW_0, dB_1, dB_2), so
        // E[dW_1 dB_0 | key] = E[dW_1] E[dB_0] = 0 exactly.
        let targets: Vec<f64> = (0..m).map(|p| ens.dw(p, 1)[0] * ens.db(p, 0)[0]).collect();
        let fit = tree_fit(&ens, 1, &targets, 1);
        for v in &fit.fitted {
            assert!(v.abs() < 1e-14);
        }
        // a target measurable w.r.t. the conditioning information comes
        // back unchanged: W_{t_1} * (B_T - B_{t_1})
        let targets: Vec<f64> = (0..m).map(|p| ens.w_at(p, 1)[0] * ens.b_tail(p, 1)[0]).collect();
        let fit = tree_fit(&ens, 1, &targets, 1);
        for (p, v) in fit.fitted.iter().enumerate() {
            assert!((v - targets[p]).abs() < 1e-14);
        }
    }

    #[test]
    fn regression_reproduces_polynomial_targets() {
        let grid = TimeGrid::new(1.0, 4).unwrap();
        let ens = PathEnsemble::gaussian(grid, 1, 512, 3).unwrap();
        let m = ens.paths();
        // target already a degree-2 polynomial of the state: exact fit
        let targets: Vec<f64> = (0..m)
            .map(|p| {
                let w = ens.w_at(p, 2)[0];
                let b = ens.b_tail(p, 2)[0];
                1.5 - 0.5 * w + 0.25 * b * b + w * b
            })
            .collect();
        let fit = regression_fit(&ens, 2, &targets, 1, 2).unwrap();
        assert_eq!(fit.fallbacks, 0);
        for p in 0..m {
            assert!((fit.fitted[p] - targets[p]).abs() < 1e-8);
        }
    }

    #[test]
    fn regression_at_time_zero_keeps_backward_state() {
        // W_0 = 0 produces structurally constant basis columns which must
        // be dropped, not trigger a degree fallback, and the fit must still
        // track the backward variable.
        let grid = TimeGrid::new(1.0, 4).unwrap();
        let ens = PathEnsemble::gaussian(grid, 1, 512, 9).unwrap();
        let m = ens.paths();
        let targets: Vec<f64> = (0..m).map(|p| 2.0 * ens.b_tail(p, 0)[0] - 1.0).collect();
        let fit = regression_fit(&ens, 0, &targets, 1, 2).unwrap();
        assert_eq!(fit.fallbacks, 0);
        for p in 0..m {
            assert!((fit.fitted[p] - targets[p]).abs() < 1e-8);
        }
    }

    #[test]
    fn regression_mean_is_preserved() {
        let grid = TimeGrid::new(1.0, 2).unwrap();
        let ens = PathEnsemble::gaussian(grid, 1, 256, 17).unwrap();
        let m = ens.paths();
        let targets: Vec<f64> = (0..m).map(|p| (ens.w_at(p, 1)[0]).sin() + 0.3).collect();
        let fit = regression_fit(&ens, 1, &targets, 1, 2).unwrap();
        let mean_t = targets.iter().sum::<f64>() / m as f64;
        let mean_f = fit.fitted.iter().sum::<f64>() / m as f64;
        assert!((mean_t - mean_f).abs() < 1e-10);
    }
}
