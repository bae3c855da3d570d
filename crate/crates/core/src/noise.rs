//! Uniform time grid, generation of the two independent driving noises and
//! the forward/backward discrete stochastic integrals.
//!
//! Two generation modes are supported:
//! - `Gaussian`: seeded Brownian increments from a counter-based ChaCha
//!   stream, one independent stream per driver, so that a single `(seed,
//!   grid, dim, paths)` tuple pins the whole ensemble bit-for-bit.
//! - `RademacherTree`: exhaustive enumeration of all sign patterns of
//!   `+/- sqrt(h)` increments for both drivers (scalar noise only). Every
//!   expectation computed on this ensemble is exact, which makes it the
//!   oracle mode for conditional expectations.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use std::io::Write;

use crate::error::{Error, Result};
use crate::la;
use crate::process::PathArray;

/// Largest tree depth: `4^N` scenarios must stay around a million.
pub const MAX_TREE_STEPS: usize = 10;

/// Uniform grid `t_i = i * T / N` on `[0, T]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    horizon: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "time horizon must be positive and finite, got {horizon}"
            )));
        }
        if steps == 0 {
            return Err(Error::InvalidArgument("grid needs at least one step".into()));
        }
        Ok(Self { horizon, steps })
    }

    #[inline]
    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Number of steps `N`; the grid has `N + 1` nodes.
    #[inline]
    pub fn steps(&self) -> usize {
        self.steps
    }

    #[inline]
    pub fn nodes(&self) -> usize {
        self.steps + 1
    }

    #[inline]
    pub fn h(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    #[inline]
    pub fn time(&self, i: usize) -> f64 {
        self.horizon * i as f64 / self.steps as f64
    }

    /// Index of the grid node closest to `t`, if `t` lies on the grid up to
    /// `1e-9` relative slack.
    pub fn index_of(&self, t: f64) -> Result<usize> {
        let raw = t / self.h();
        let i = raw.round();
        if i < 0.0 || i > self.steps as f64 || (raw - i).abs() > 1e-9 * (1.0 + raw.abs()) {
            return Err(Error::InvalidArgument(format!("time {t} is not a grid node")));
        }
        Ok(i as usize)
    }
}

/// Increment generation mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseMode {
    Gaussian { seed: u64 },
    RademacherTree,
}

/// `M` sampled paths of the two independent drivers on a uniform grid.
///
/// Increment layout is flat `(path, step, component)`; cumulative driver
/// values at the grid nodes are precomputed at generation time.
pub struct PathEnsemble {
    grid: TimeGrid,
    dim: usize,
    paths: usize,
    mode: NoiseMode,
    dw: Vec<f64>,
    db: Vec<f64>,
    w_cum: Vec<f64>,
    b_cum: Vec<f64>,
}

/// Read-only view of one path's cumulative driver values, handed to
/// terminal-condition evaluators.
pub struct PathHistory<'a> {
    pub grid: TimeGrid,
    pub dim: usize,
    w: &'a [f64],
    b: &'a [f64],
}

impl<'a> PathHistory<'a> {
    /// Forward driver at node `i` (all components).
    #[inline]
    pub fn w_at(&self, i: usize) -> &[f64] {
        &self.w[i * self.dim..(i + 1) * self.dim]
    }

    /// Backward driver at node `i`.
    #[inline]
    pub fn b_at(&self, i: usize) -> &[f64] {
        &self.b[i * self.dim..(i + 1) * self.dim]
    }

    #[inline]
    pub fn w_terminal(&self) -> &[f64] {
        self.w_at(self.grid.steps())
    }

    #[inline]
    pub fn b_terminal(&self) -> &[f64] {
        self.b_at(self.grid.steps())
    }
}

impl PathEnsemble {
    /// Seeded Gaussian ensemble with per-component increment variance `h`.
    ///
    /// The per-component second moment of the generated increments is
    /// validated against `h` within five standard errors; a failure marks a
    /// broken generator rather than bad luck and is reported as a numeric
    /// failure.
    pub fn gaussian(grid: TimeGrid, dim: usize, paths: usize, seed: u64) -> Result<Self> {
        if dim == 0 || paths == 0 {
            return Err(Error::InvalidArgument("dim and paths must be positive".into()));
        }
        let n = grid.steps();
        let sqrt_h = grid.h().sqrt();
        let count = paths * n * dim;

        // Independent streams for the two drivers, one shared seed.
        let draw = |stream: u64| -> Vec<f64> {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            rng.set_stream(stream);
            (0..count)
                .map(|_| sqrt_h * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng))
                .collect()
        };
        let dw = draw(1);
        let db = draw(2);

        let mut ens = Self { grid, dim, paths, mode: NoiseMode::Gaussian { seed }, dw, db, w_cum: vec![], b_cum: vec![] };
        ens.accumulate();
        ens.validate_moments()?;
        Ok(ens)
    }

    /// Exhaustive sign-pattern ensemble: scalar noise, all `4^N` patterns of
    /// `+/- sqrt(h)` increments, equal weights.
    ///
    /// Scenario index bits encode the pattern: bit `l` is the sign of the
    /// forward increment at step `l`, bit `N + l` the sign of the backward
    /// increment (`0 -> +sqrt(h)`, `1 -> -sqrt(h)`).
    pub fn rademacher_tree(grid: TimeGrid) -> Result<Self> {
        let n = grid.steps();
        if n > MAX_TREE_STEPS {
            return Err(Error::InvalidArgument(format!(
                "tree mode supports at most {MAX_TREE_STEPS} steps, got {n}"
            )));
        }
        let paths = 1usize << (2 * n);
        let sqrt_h = grid.h().sqrt();
        let mut dw = vec![0.0; paths * n];
        let mut db = vec![0.0; paths * n];
        for p in 0..paths {
            for l in 0..n {
                dw[p * n + l] = if (p >> l) & 1 == 0 { sqrt_h } else { -sqrt_h };
                db[p * n + l] = if (p >> (n + l)) & 1 == 0 { sqrt_h } else { -sqrt_h };
            }
        }
        let mut ens = Self { grid, dim: 1, paths, mode: NoiseMode::RademacherTree, dw, db, w_cum: vec![], b_cum: vec![] };
        ens.accumulate();
        Ok(ens)
    }

    fn accumulate(&mut self) {
        let n = self.grid.steps();
        let d = self.dim;
        let nodes = n + 1;
        self.w_cum = vec![0.0; self.paths * nodes * d];
        self.b_cum = vec![0.0; self.paths * nodes * d];
        for p in 0..self.paths {
            for i in 0..n {
                for c in 0..d {
                    let w = self.w_cum[(p * nodes + i) * d + c] + self.dw[(p * n + i) * d + c];
                    self.w_cum[(p * nodes + i + 1) * d + c] = w;
                    let b = self.b_cum[(p * nodes + i) * d + c] + self.db[(p * n + i) * d + c];
                    self.b_cum[(p * nodes + i + 1) * d + c] = b;
                }
            }
        }
    }

    fn validate_moments(&self) -> Result<()> {
        let n_samples = self.paths * self.grid.steps();
        if n_samples < 2 {
            return Ok(());
        }
        let h = self.grid.h();
        let se = h * (2.0 / n_samples as f64).sqrt();
        for (name, data) in [("dW", &self.dw), ("dB", &self.db)] {
            for c in 0..self.dim {
                let m2 = data
                    .iter()
                    .skip(c)
                    .step_by(self.dim)
                    .map(|x| x * x)
                    .sum::<f64>()
                    / n_samples as f64;
                if (m2 - h).abs() > 5.0 * se {
                    let _ = name;
                    return Err(Error::NumericFailure {
                        context: "increment variance validation",
                        residual: (m2 - h).abs(),
                        iterations: n_samples,
                    });
                }
            }
        }
        Ok(())
    }

    #[inline]
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn paths(&self) -> usize {
        self.paths
    }

    #[inline]
    pub fn mode(&self) -> NoiseMode {
        self.mode
    }

    /// Forward increment over `[t_i, t_{i+1}]`.
    #[inline]
    pub fn dw(&self, path: usize, step: usize) -> &[f64] {
        let o = (path * self.grid.steps() + step) * self.dim;
        &self.dw[o..o + self.dim]
    }

    /// Backward-driver increment over `[t_i, t_{i+1}]`.
    #[inline]
    pub fn db(&self, path: usize, step: usize) -> &[f64] {
        let o = (path * self.grid.steps() + step) * self.dim;
        &self.db[o..o + self.dim]
    }

    /// Cumulative forward driver at node `i`.
    #[inline]
    pub fn w_at(&self, path: usize, node: usize) -> &[f64] {
        let o = (path * self.grid.nodes() + node) * self.dim;
        &self.w_cum[o..o + self.dim]
    }

    /// Cumulative backward driver at node `i`.
    #[inline]
    pub fn b_at(&self, path: usize, node: usize) -> &[f64] {
        let o = (path * self.grid.nodes() + node) * self.dim;
        &self.b_cum[o..o + self.dim]
    }

    /// `B_T - B_{t_i}`, the portion of the backward driver after node `i`.
    pub fn b_tail(&self, path: usize, node: usize) -> Vec<f64> {
        let last = self.b_at(path, self.grid.steps());
        let here = self.b_at(path, node);
        last.iter().zip(here).map(|(a, b)| a - b).collect()
    }

    pub fn path_history(&self, path: usize) -> PathHistory<'_> {
        let nodes = self.grid.nodes();
        let o = path * nodes * self.dim;
        PathHistory {
            grid: self.grid,
            dim: self.dim,
            w: &self.w_cum[o..o + nodes * self.dim],
            b: &self.b_cum[o..o + nodes * self.dim],
        }
    }

    /// Columnar CSV dump `(path, step, dw components, db components)`.
    pub fn export_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        write!(out, "path,step")?;
        for c in 0..self.dim {
            write!(out, ",dw{c}")?;
        }
        for c in 0..self.dim {
            write!(out, ",db{c}")?;
        }
        writeln!(out)?;
        for p in 0..self.paths {
            for i in 0..self.grid.steps() {
                write!(out, "{p},{i}")?;
                for v in self.dw(p, i) {
                    write!(out, ",{}", crate::format_float(*v))?;
                }
                for v in self.db(p, i) {
                    write!(out, ",{}", crate::format_float(*v))?;
                }
                writeln!(out)?;
            }
        }
        Ok(())
    }
}

/// Discrete forward integral `sum_{l=i}^{j-1} Z_l dW_l` per path.
///
/// `z` is step-indexed with width `k * d`; the integrand is evaluated at the
/// left endpoint, matching the forward stochastic integral.
pub fn forward_integral(z: &PathArray, ens: &PathEnsemble, from: usize, to: usize) -> Vec<Vec<f64>> {
    let d = ens.dim();
    let k = z.width() / d;
    (0..ens.paths())
        .map(|p| {
            let mut acc = vec![0.0; k];
            for l in from..to {
                let zl = la::mat_vec(z.at(p, l), k, d, ens.dw(p, l));
                la::add_scaled(&mut acc, 1.0, &zl);
            }
            acc
        })
        .collect()
}

/// Discrete backward integral `sum_{l=i}^{j-1} G_{l+1} dB_l` per path.
///
/// `g` is node-indexed with width `k * d` and is read at the right endpoint
/// of each step. Right-endpoint evaluation is what distinguishes the
/// backward integral from the forward one.
pub fn backward_integral(g: &PathArray, ens: &PathEnsemble, from: usize, to: usize) -> Vec<Vec<f64>> {
    let d = ens.dim();
    let k = g.width() / d;
    (0..ens.paths())
        .map(|p| {
            let mut acc = vec![0.0; k];
            for l in from..to {
                let gl = la::mat_vec(g.at(p, l + 1), k, d, ens.db(p, l));
                la::add_scaled(&mut acc, 1.0, &gl);
            }
            acc
        })
        .collect()
}
