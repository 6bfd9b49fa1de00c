//! Adaptive integration of nonautonomous ODEs `x' = f(t, x)`, transition
//! matrices of linear systems, linearization along bounded signals and the
//! closed-form Bernoulli comparison solution.

mod dopri;
mod field;

pub use field::{linearize_along, FieldSource, FnField, LinearField, PiecewiseSignal, PolyField, VectorField};
pub(crate) use field::MatrixField;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IntegratorConfig {
    pub rtol: f64,
    pub atol: f64,
    #[serde(with = "crate::unbounded")]
    pub max_step: f64,
    /// Norm above which the solution is declared to blow up.
    pub blowup_threshold: f64,
    /// Output times. When empty every accepted step is recorded.
    pub sample_times: Vec<f64>,
    /// Longest admissible integration window.
    pub max_horizon: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self { rtol: 1e-9, atol: 1e-12, max_step: f64::INFINITY, blowup_threshold: 1e8, sample_times: Vec::new(), max_horizon: 1e4 }
    }
}

impl IntegratorConfig {
    pub fn with_tolerances(rtol: f64, atol: f64) -> Self {
        Self { rtol, atol, ..Self::default() }
    }

    pub fn with_samples(mut self, times: Vec<f64>) -> Self {
        self.sample_times = times;
        self
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.rtol > 0.0 && self.atol > 0.0) {
            return Err(format!("rtol and atol must be positive (rtol={}, atol={})", self.rtol, self.atol));
        }
        if !(self.blowup_threshold > 0.0) {
            return Err("blowup_threshold must be positive".into());
        }
        if !(self.max_step > 0.0) {
            return Err("max_step must be positive".into());
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SolverStats {
    pub steps: usize,
    pub rejections: usize,
    pub evaluations: usize,
}

/// Samples `(t, x(t, t0, x0))` with strictly increasing `t`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Trajectory {
    pub t0: f64,
    pub x0: Vec<f64>,
    pub samples: Vec<(f64, Vec<f64>)>,
    pub stats: SolverStats,
}

impl Trajectory {
    pub fn last(&self) -> &(f64, Vec<f64>) {
        self.samples.last().expect("trajectory always holds its initial sample")
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.0)
    }

    pub fn norms(&self) -> Vec<(f64, f64)> {
        self.samples.iter().map(|(t, x)| (*t, x.iter().map(|v| v * v).sum::<f64>().sqrt())).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum SolveOutcome {
    Completed(Trajectory),
    Blowup { t_star: f64, last_norm: f64, partial: Trajectory },
    StepFailure { t: f64, diagnostics: String, partial: Trajectory },
}

impl SolveOutcome {
    pub fn trajectory(&self) -> &Trajectory {
        match self {
            SolveOutcome::Completed(t) => t,
            SolveOutcome::Blowup { partial, .. } | SolveOutcome::StepFailure { partial, .. } => partial,
        }
    }

    pub fn completed(self) -> Option<Trajectory> {
        match self {
            SolveOutcome::Completed(t) => Some(t),
            _ => None,
        }
    }

    pub fn is_completed(&self) -> bool {
        matches!(self, SolveOutcome::Completed(_))
    }

    pub fn describe(&self) -> String {
        match self {
            SolveOutcome::Completed(t) => format!("completed at t={}", t.last().0),
            SolveOutcome::Blowup { t_star, last_norm, .. } => format!("blowup at t*={t_star} (|x|={last_norm:e})"),
            SolveOutcome::StepFailure { t, diagnostics, .. } => format!("step failure at t={t}: {diagnostics}"),
        }
    }
}

/// Integrates `x' = f(t, x)` from `(t0, x0)` up to `tf` with Dormand-Prince 5(4).
pub fn integrate<F: VectorField + ?Sized>(field: &F, t0: f64, x0: &[f64], tf: f64, cfg: &IntegratorConfig) -> SolveOutcome {
    dopri::integrate_impl(field, t0, x0, tf, cfg, false)
}

#[derive(Clone, Debug, thiserror::Error, PartialEq)]
#[error("transition matrix integration failed: {0}")]
pub struct TransitionError(pub String);

/// `Phi(t, s) = e^{log_scale} * matrix`, kept in this form so that strongly
/// decaying or growing systems neither underflow nor lose relative accuracy.
#[derive(Clone, Debug, PartialEq)]
pub struct ScaledMatrix {
    pub t: f64,
    pub log_scale: f64,
    pub matrix: DMatrix<f64>,
}

impl ScaledMatrix {
    pub fn value(&self) -> DMatrix<f64> {
        &self.matrix * self.log_scale.exp()
    }

    /// `ln ||Phi||_2`.
    pub fn log_norm(&self) -> f64 {
        self.log_scale + self.matrix.clone().singular_values().max().ln()
    }
}

/// Largest time span integrated between renormalizations.
const RENORM_INTERVAL: f64 = 0.25;

/// `Phi(t, s)` in scaled form for each `t` in `t_grid` (all `>= s`), from the
/// matrix ODE `Phi' = A(t) Phi`, `Phi(s, s) = I`. The state is renormalized to
/// unit norm every [`RENORM_INTERVAL`] and at every grid time, and `atol` is
/// taken relative to the current size of `Phi`.
pub fn transition_scaled(
    field: &LinearField,
    s: f64,
    t_grid: &[f64],
    cfg: &IntegratorConfig,
) -> Result<Vec<ScaledMatrix>, TransitionError> {
    let n = field.dimension();
    propagate_scaled(field, s, &DMatrix::identity(n, n), t_grid, cfg)
}

/// `Phi(t, s) X0` in scaled form for an `n x k` matrix `X0`, with the same
/// renormalization as [`transition_scaled`]. Small invariant directions keep
/// their relative accuracy because tolerances follow the propagated block only.
pub fn propagate_scaled(
    field: &LinearField,
    s: f64,
    x0: &DMatrix<f64>,
    t_grid: &[f64],
    cfg: &IntegratorConfig,
) -> Result<Vec<ScaledMatrix>, TransitionError> {
    let n = field.dimension();
    if x0.nrows() != n || x0.ncols() == 0 {
        return Err(TransitionError(format!("initial block is {}x{}, expected {n} rows", x0.nrows(), x0.ncols())));
    }
    let cols = x0.ncols();
    if let Some(bad) = t_grid.iter().find(|t| **t < s || !t.is_finite()) {
        return Err(TransitionError(format!("grid time {bad} precedes s = {s}")));
    }
    let mut times: Vec<f64> = t_grid.to_vec();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let cfg = IntegratorConfig { sample_times: Vec::new(), blowup_threshold: f64::MAX, ..cfg.clone() };
    let mf = MatrixField { inner: field, cols };
    let mut cur = s;
    let mut log_scale = 0.0;
    let mut m = x0.clone();
    let mut out = Vec::with_capacity(times.len());
    for target in times {
        while cur < target {
            let next = if target - cur > RENORM_INTERVAL * 1.5 { cur + RENORM_INTERVAL } else { target };
            let x = match dopri::integrate_impl(&mf, cur, m.as_slice(), next, &cfg, true) {
                SolveOutcome::Completed(tr) => tr.last().1.clone(),
                other => return Err(TransitionError(other.describe())),
            };
            m = DMatrix::from_column_slice(n, cols, &x);
            let nu = m.amax();
            if !(nu > 0.0 && nu.is_finite()) {
                return Err(TransitionError(format!("degenerate transition matrix at t={next}")));
            }
            m /= nu;
            log_scale += nu.ln();
            cur = next;
        }
        out.push(ScaledMatrix { t: target, log_scale, matrix: m.clone() });
    }
    Ok(out)
}

/// `Phi(t, s)` for each `t` in `t_grid`; see [`transition_scaled`].
pub fn transition_matrix(
    field: &LinearField,
    s: f64,
    t_grid: &[f64],
    cfg: &IntegratorConfig,
) -> Result<Vec<(f64, DMatrix<f64>)>, TransitionError> {
    Ok(transition_scaled(field, s, t_grid, cfg)?.into_iter().map(|p| (p.t, p.value())).collect())
}

/// `Phi(t, s)` for all grid pairs `s <= t`, one integration per `s`, in
/// parallel. Row `i` holds `Phi(t_j, t_i)` for `j >= i`.
pub fn transition_table(
    field: &LinearField,
    grid: &[f64],
    cfg: &IntegratorConfig,
) -> Result<Vec<Vec<ScaledMatrix>>, TransitionError> {
    grid.par_iter()
        .enumerate()
        .map(|(i, s)| transition_scaled(field, *s, &grid[i..], cfg))
        .collect()
}

/// Closed-form solution of `v' = lambda v + c v^3`, `v(t0) = v0`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BernoulliReference {
    pub lambda: f64,
    pub c: f64,
    pub v0: f64,
    pub t0: f64,
    /// `None` when the solution is global (`v0^2 <= |lambda| / c`).
    pub blowup_time: Option<f64>,
}

impl BernoulliReference {
    /// `v(t)` for `t >= t0`; `None` at or past the blow-up time.
    pub fn value(&self, t: f64) -> Option<f64> {
        if self.v0 == 0.0 {
            return Some(0.0);
        }
        if let Some(tb) = self.blowup_time {
            if t >= tb {
                return None;
            }
        }
        let l = self.lambda.abs();
        let q = self.c / l;
        let w0 = self.v0.powi(-2);
        let w = (w0 - q) * (2.0 * l * (t - self.t0)).exp() + q;
        (w > 0.0).then(|| w.powf(-0.5))
    }

    pub fn is_global(&self) -> bool {
        self.blowup_time.is_none()
    }
}

/// Reference solution via `w = v^{-2}`:
/// `w(t) = (w0 - c/|lambda|) e^{2|lambda|(t - t0)} + c/|lambda|`.
pub fn bernoulli_reference(lambda: f64, c: f64, v0: f64, t0: f64) -> BernoulliReference {
    let l = lambda.abs();
    let q = c / l;
    let blowup_time = if v0 > 0.0 && v0 * v0 > l / c {
        let w0 = v0.powi(-2);
        Some(t0 + (q / (q - w0)).ln() / (2.0 * l))
    } else {
        None
    };
    BernoulliReference { lambda, c, v0, t0, blowup_time }
}
