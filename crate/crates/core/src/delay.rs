//! Delay measures on `[-T, 0)`, the delayed-segment functionals entering the
//! coefficients, and the exponential moment controlling how delay terms add
//! up in weighted-norm estimates.
//!
//! Everything is evaluated on the solver grid: a measure is reduced once to
//! a stencil of `(lag, weight)` atoms and segment functionals become short
//! weighted sums over past grid values, with the convention that values at
//! negative times are zero.

use crate::error::{Error, Result};
use crate::la;
use crate::noise::TimeGrid;

/// A finite non-random measure supported on `[-T, 0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayMeasure {
    kind: DelayKind,
    horizon: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DelayKind {
    /// Unit mass at `theta = -lag` with `lag` in `(0, T]`.
    Dirac { lag: f64 },
    /// Density `c > 0` with respect to Lebesgue measure on `[-T, 0)`.
    LebesgueScaled { density: f64 },
    /// Finitely many atoms `(theta_j, w_j)` with `theta_j` in `[-T, 0)`.
    Atoms { atoms: Vec<(f64, f64)> },
}

/// Grid reduction of a measure: atoms at whole-step lags. For a Dirac
/// measure the lag is snapped to the nearest grid step and the snap
/// distance is reported so callers can surface it.
#[derive(Debug, Clone)]
pub struct DelayStencil {
    /// `(lag in steps >= 1, weight)`.
    pub atoms: Vec<(usize, f64)>,
    /// Worst distance between a requested lag and its grid snap.
    pub snap_distance: f64,
}

impl DelayMeasure {
    pub fn dirac(lag: f64, horizon: f64) -> Result<Self> {
        if !(lag > 0.0 && lag <= horizon) {
            return Err(Error::InvalidArgument(format!(
                "dirac lag must lie in (0, {horizon}], got {lag}"
            )));
        }
        Ok(Self { kind: DelayKind::Dirac { lag }, horizon })
    }

    pub fn lebesgue(density: f64, horizon: f64) -> Result<Self> {
        if !(density > 0.0) {
            return Err(Error::InvalidArgument("density must be positive".into()));
        }
        if !(horizon > 0.0) {
            return Err(Error::InvalidArgument("horizon must be positive".into()));
        }
        Ok(Self { kind: DelayKind::LebesgueScaled { density }, horizon })
    }

    pub fn atoms(atoms: Vec<(f64, f64)>, horizon: f64) -> Result<Self> {
        for &(theta, w) in &atoms {
            if !(theta >= -horizon && theta < 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "atom location {theta} outside [-{horizon}, 0)"
                )));
            }
            if !(w >= 0.0) {
                return Err(Error::InvalidArgument("atom weights must be nonnegative".into()));
            }
        }
        Ok(Self { kind: DelayKind::Atoms { atoms }, horizon })
    }

    #[inline]
    pub fn kind(&self) -> &DelayKind {
        &self.kind
    }

    #[inline]
    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Total mass of the measure.
    pub fn total_mass(&self) -> f64 {
        match &self.kind {
            DelayKind::Dirac { .. } => 1.0,
            DelayKind::LebesgueScaled { density } => density * self.horizon,
            DelayKind::Atoms { atoms } => atoms.iter().map(|(_, w)| w).sum(),
        }
    }

    /// Exponential moment `integral e^{-beta theta} alpha(d theta)` in
    /// closed form. For `beta >= 0` this dominates the total mass because
    /// `e^{-beta theta} >= 1` on the support.
    pub fn exp_moment(&self, beta: f64) -> f64 {
        assert!(beta >= 0.0, "exp_moment requires beta >= 0");
        match &self.kind {
            DelayKind::Dirac { lag } => (beta * lag).exp(),
            DelayKind::LebesgueScaled { density } => {
                if beta == 0.0 {
                    density * self.horizon
                } else {
                    density * ((beta * self.horizon).exp() - 1.0) / beta
                }
            }
            DelayKind::Atoms { atoms } => atoms.iter().map(|(theta, w)| w * (-beta * theta).exp()).sum(),
        }
    }

    /// Reduce the measure to grid-step atoms on `grid`.
    ///
    /// Non-atomic mass is discretised by left-endpoint sums on the solver
    /// grid (one atom of weight `c h` per step lag), matching the order of
    /// the time stepper.
    pub fn stencil(&self, grid: &TimeGrid) -> Result<DelayStencil> {
        if (grid.horizon() - self.horizon).abs() > 1e-12 * (1.0 + self.horizon) {
            return Err(Error::InvalidArgument(format!(
                "measure horizon {} does not match grid horizon {}",
                self.horizon,
                grid.horizon()
            )));
        }
        let n = grid.steps();
        let h = grid.h();
        let snap = |lag: f64| -> (usize, f64) {
            let steps = (lag / h).round().max(1.0).min(n as f64) as usize;
            (steps, (lag - steps as f64 * h).abs())
        };
        Ok(match &self.kind {
            DelayKind::Dirac { lag } => {
                let (steps, dist) = snap(*lag);
                DelayStencil { atoms: vec![(steps, 1.0)], snap_distance: dist }
            }
            DelayKind::LebesgueScaled { density } => DelayStencil {
                atoms: (1..=n).map(|m| (m, density * h)).collect(),
                snap_distance: 0.0,
            },
            DelayKind::Atoms { atoms } => {
                let mut out = Vec::with_capacity(atoms.len());
                let mut worst = 0.0_f64;
                for &(theta, w) in atoms {
                    let (steps, dist) = snap(-theta);
                    worst = worst.max(dist);
                    out.push((steps, w));
                }
                DelayStencil { atoms: out, snap_distance: worst }
            }
        })
    }

    /// Exponential moment of the grid reduction, `sum_j w_j e^{beta m_j h}`.
    ///
    /// The discrete change-of-order inequality holds exactly against this
    /// value; it differs from [`Self::exp_moment`] by `O(h)`.
    pub fn exp_moment_discrete(&self, grid: &TimeGrid, beta: f64) -> Result<f64> {
        let stencil = self.stencil(grid)?;
        let h = grid.h();
        Ok(stencil.atoms.iter().map(|&(m, w)| w * (beta * m as f64 * h).exp()).sum())
    }
}

/// Grid-indexed history of a vector process; index `i` holds the value at
/// `t_i` and values before time zero are implicitly zero.
#[derive(Debug, Clone)]
pub struct GridSegment {
    pub values: Vec<Vec<f64>>,
}

impl GridSegment {
    pub fn new(values: Vec<Vec<f64>>) -> Self {
        Self { values }
    }

    /// Value at signed grid index, zero-extended to negative indices.
    pub fn squared_norm_at(&self, index: isize) -> f64 {
        if index < 0 {
            0.0
        } else {
            la::norm_sq(&self.values[index as usize])
        }
    }
}

/// `integral |x(t + theta)|^2 alpha(d theta)` with `x` zero-extended to
/// negative times, evaluated at the grid node closest to `t`.
pub fn delayed_quadratic(
    measure: &DelayMeasure,
    grid: &TimeGrid,
    segment: &GridSegment,
    t: f64,
) -> Result<f64> {
    let i = grid.index_of(t)? as isize;
    let stencil = measure.stencil(grid)?;
    Ok(stencil
        .atoms
        .iter()
        .map(|&(lag, w)| w * segment.squared_norm_at(i - lag as isize))
        .sum())
}

/// The vector-valued first moment `integral x(t + theta) alpha(d theta)`,
/// the form in which delayed values enter the built-in coefficients.
pub fn delayed_mean(
    measure: &DelayMeasure,
    grid: &TimeGrid,
    segment: &GridSegment,
    t: f64,
) -> Result<Vec<f64>> {
    let i = grid.index_of(t)? as isize;
    let stencil = measure.stencil(grid)?;
    let width = segment.values.first().map_or(0, Vec::len);
    let mut acc = vec![0.0; width];
    for &(lag, w) in &stencil.atoms {
        let j = i - lag as isize;
        if j >= 0 {
            la::add_scaled(&mut acc, w, &segment.values[j as usize]);
        }
    }
    Ok(acc)
}

/// Both sides of the weighted change-of-order bound for one path.
#[derive(Debug, Clone)]
pub struct ChangeOfOrderReport {
    /// `sum_i h e^{beta t_i} integral |x(t_i + theta)|^2 alpha(d theta)`.
    pub lhs: f64,
    /// Discrete exponential moment times the weighted time integral.
    pub rhs_integral: f64,
    /// `T * moment * sup_i e^{beta t_i} |x(t_i)|^2`.
    pub rhs_sup: f64,
    pub exp_moment_exact: f64,
    pub exp_moment_discrete: f64,
    pub margin_integral: f64,
    pub margin_sup: f64,
}

impl ChangeOfOrderReport {
    pub fn pass(&self, tol: f64) -> bool {
        self.margin_integral >= -tol && self.margin_sup >= -tol
    }
}

/// Verify numerically that swapping the time integral and the delay measure
/// is controlled by the exponential moment:
/// the weighted time integral of the delayed quadratic is bounded by
/// `moment * integral e^{beta t} |x(t)|^2 dt` and by the companion
/// `T * moment * sup` bound. Margins are normalised by `1 + lhs + rhs`.
pub fn change_of_order_check(
    measure: &DelayMeasure,
    grid: &TimeGrid,
    beta: f64,
    path: &GridSegment,
) -> Result<ChangeOfOrderReport> {
    let n = grid.steps();
    let h = grid.h();
    let stencil = measure.stencil(grid)?;

    let mut lhs = 0.0;
    let mut weighted_integral = 0.0;
    let mut weighted_sup = 0.0_f64;
    for i in 0..n {
        let weight = (beta * grid.time(i)).exp();
        let delayed: f64 = stencil
            .atoms
            .iter()
            .map(|&(lag, w)| w * path.squared_norm_at(i as isize - lag as isize))
            .sum();
        lhs += h * weight * delayed;
        let here = path.squared_norm_at(i as isize);
        weighted_integral += h * weight * here;
        weighted_sup = weighted_sup.max(weight * here);
    }
    // include the terminal node in the sup
    weighted_sup = weighted_sup.max((beta * grid.horizon()).exp() * path.squared_norm_at(n as isize));

    let moment_disc = stencil.atoms.iter().map(|&(m, w)| w * (beta * m as f64 * h).exp()).sum::<f64>();
    let rhs_integral = moment_disc * weighted_integral;
    let rhs_sup = grid.horizon() * moment_disc * weighted_sup;
    let scale_i = 1.0 + lhs.abs() + rhs_integral.abs();
    let scale_s = 1.0 + lhs.abs() + rhs_sup.abs();

    Ok(ChangeOfOrderReport {
        lhs,
        rhs_integral,
        rhs_sup,
        exp_moment_exact: measure.exp_moment(beta),
        exp_moment_discrete: moment_disc,
        margin_integral: (rhs_integral - lhs) / scale_i,
        margin_sup: (rhs_sup - lhs) / scale_s,
    })
}
