use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dichotomy::{envelope_search, fit_gnuas_envelope, EnvelopeOutcome, FitSearch};
use crate::injectivity::ParamFamily;
use crate::odeint::{integrate, FnField, IntegratorConfig, PolyField, SolveOutcome, Trajectory, VectorField};
use crate::polyalg::{GaussianRational, ParamPolyMap};

use super::{cubic_nilpotent_lambda, MyCheckError};

/// Initial conditions `x0` combined with every start time `t0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IcGrid {
    pub x0s: Vec<Vec<f64>>,
    pub t0s: Vec<f64>,
}

/// `{-a, 0, a}^n` with `a = radius / sqrt(n)`, so the corners have norm `radius`.
pub fn cube_ic_grid(n: usize, radius: f64, t0s: Vec<f64>) -> IcGrid {
    let a = radius / (n as f64).sqrt();
    let mut x0s = vec![vec![]];
    for _ in 0..n {
        x0s = x0s.into_iter().flat_map(|v: Vec<f64>| [-a, 0.0, a].map(|c| [v.clone(), vec![c]].concat())).collect();
    }
    IcGrid { x0s, t0s }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GnuasConfig {
    /// Each trajectory runs on `[t0, t0 + span]`.
    pub span: f64,
    pub decay_threshold: f64,
    pub sample_step: f64,
    pub integrator: IntegratorConfig,
    pub search: FitSearch,
    /// Allowed error in `x + z = e^{lambda (t - t0)} (x0 + z0)`, relative to
    /// the largest state norm seen so far on the trajectory.
    pub identity_tol: f64,
}

impl Default for GnuasConfig {
    fn default() -> Self {
        Self {
            span: 40.0,
            decay_threshold: 1e-6,
            sample_step: 0.5,
            integrator: IntegratorConfig { blowup_threshold: 1e12, ..IntegratorConfig::default() },
            search: envelope_search(),
            identity_tol: 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrajectorySummary {
    pub t0: f64,
    pub x0: Vec<f64>,
    pub outcome: String,
    pub final_norm: f64,
    pub peak_norm: f64,
    pub decayed: bool,
    pub identity_error: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GnuasReport {
    pub trajectories: Vec<TrajectorySummary>,
    pub all_completed: bool,
    pub all_decayed: bool,
    /// Largest relative error of the `x + z` identity (cubic nilpotent example only).
    pub identity_max_error: Option<f64>,
    pub identity_holds: Option<bool>,
    pub envelope: EnvelopeOutcome,
    pub passed: bool,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Integrates `x' = map(t, x)` over the grid, checks decay, fits the envelope
/// `K e^{eps t0} |x0| e^{-alpha (t - t0)}` and, for the cubic nilpotent
/// example, checks the explicit `x + z` identity.
pub fn verify_gnuas(map: &ParamPolyMap, ics: &IcGrid, cfg: &GnuasConfig) -> Result<GnuasReport, MyCheckError> {
    let n = map.dimension();
    if ics.x0s.iter().any(|x| x.len() != n) || ics.x0s.is_empty() || ics.t0s.is_empty() {
        return Err(MyCheckError::PreconditionViolated(format!("initial conditions must be nonempty vectors of length {n}")));
    }
    if !(cfg.span > 0.0 && cfg.sample_step > 0.0) {
        return Err(MyCheckError::PreconditionViolated("span and sample_step must be positive".into()));
    }
    let lambda = cubic_nilpotent_lambda(map).and_then(|l| l.to_f64());
    let field = PolyField::new(map.clone());
    let jobs: Vec<(f64, &Vec<f64>)> = ics.t0s.iter().flat_map(|&t0| ics.x0s.iter().map(move |x| (t0, x))).collect();
    let runs: Vec<(SolveOutcome, TrajectorySummary)> = jobs
        .par_iter()
        .map(|&(t0, x0)| {
            let steps = (cfg.span / cfg.sample_step).round() as usize;
            let times = (1..=steps).map(|k| t0 + cfg.span * k as f64 / steps as f64).collect();
            let icfg = cfg.integrator.clone().with_samples(times);
            let out = integrate(&field, t0, x0, t0 + cfg.span, &icfg);
            let tr = out.trajectory();
            let final_norm = norm(&tr.last().1);
            let peak_norm = tr.samples.iter().map(|(_, x)| norm(x)).fold(0.0, f64::max);
            let identity_error = lambda.map(|l| {
                let mut peak: f64 = 0.0;
                tr.samples
                    .iter()
                    .map(|(t, x)| {
                        peak = peak.max(norm(x));
                        let pred = (l * (t - t0)).exp() * (x0[0] + x0[2]);
                        let err = (x[0] + x[2] - pred).abs();
                        if peak > 0.0 { err / peak } else { err }
                    })
                    .fold(0.0, f64::max)
            });
            let summary = TrajectorySummary {
                t0,
                x0: x0.clone(),
                outcome: out.describe(),
                final_norm,
                peak_norm,
                decayed: out.is_completed() && final_norm < cfg.decay_threshold,
                identity_error,
            };
            (out, summary)
        })
        .collect();
    let all_completed = runs.iter().all(|(o, _)| o.is_completed());
    let all_decayed = runs.iter().all(|(_, s)| s.decayed);
    let identity_max_error =
        lambda.map(|_| runs.iter().filter_map(|(_, s)| s.identity_error).fold(0.0, f64::max));
    let identity_holds = identity_max_error.map(|e| e <= cfg.identity_tol);
    let trajectories: Vec<Trajectory> = runs.iter().filter(|(o, _)| o.is_completed()).map(|(o, _)| o.trajectory().clone()).collect();
    let envelope = fit_gnuas_envelope(&trajectories, &cfg.search);
    let passed = all_completed && all_decayed && !envelope.is_violation() && identity_holds != Some(false);
    Ok(GnuasReport {
        trajectories: runs.into_iter().map(|(_, s)| s).collect(),
        all_completed,
        all_decayed,
        identity_max_error,
        identity_holds,
        envelope,
        passed,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConstantCheckConfig {
    /// Start time of the window.
    pub tau: f64,
    /// Window length.
    pub window: f64,
    /// Times at which `F_t(x) = F_t(y)` is checked.
    pub probe_times: Vec<f64>,
    pub tol: f64,
    pub sample_step: f64,
    pub integrator: IntegratorConfig,
}

impl Default for ConstantCheckConfig {
    fn default() -> Self {
        Self {
            tau: 0.0,
            window: 20.0,
            probe_times: (0..=40).map(|k| 0.5 * k as f64).collect(),
            tol: 1e-6,
            sample_step: 0.1,
            integrator: IntegratorConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConstantSolutionReport {
    pub family: String,
    pub x: Vec<String>,
    pub y: Vec<String>,
    pub z0: Vec<f64>,
    /// `G(t, 0) = 0` as an exact polynomial identity (polynomial families).
    pub shifted_vanishes_at_zero: Option<bool>,
    /// `F_t(x) = F_t(y)` for every `t` (exact) or on every probe time.
    pub premise_holds: bool,
    pub premise_exact: bool,
    pub max_deviation: f64,
    pub constant: bool,
    pub envelope: EnvelopeOutcome,
    pub passed: bool,
}

/// For `F_t(x) = F_t(y)`, `G(t, z) = F(t, z + x) - F(t, x)` has the constant
/// solution `z = y - x`, which rules out global asymptotic stability of `z' = G(t, z)`.
pub fn constant_solution_check(
    family: &ParamFamily,
    x: &[BigRational],
    y: &[BigRational],
    cfg: &ConstantCheckConfig,
) -> Result<ConstantSolutionReport, MyCheckError> {
    let n = family.dimension();
    if x.len() != n || y.len() != n {
        return Err(MyCheckError::PreconditionViolated(format!("points must have dimension {n}")));
    }
    if x == y {
        return Err(MyCheckError::PreconditionViolated("x and y must differ".into()));
    }
    let fl = |v: &[BigRational]| v.iter().map(|r| r.to_f64().unwrap_or(f64::NAN)).collect::<Vec<f64>>();
    let (xf, yf) = (fl(x), fl(y));
    let z0: Vec<f64> = yf.iter().zip(&xf).map(|(a, b)| a - b).collect();
    let win_end = cfg.tau + cfg.window;

    let (field, shifted_vanishes_at_zero, premise_holds, premise_exact): (Box<dyn VectorField>, _, _, _) =
        match family.exact_map() {
            Some(map) => {
                let sc = map.shift_conjugate(x, y).map_err(|e| MyCheckError::PreconditionViolated(e.to_string()))?;
                let zero = vec![GaussianRational::real(BigRational::zero()); n];
                let vanishes = sc.map.eval_exact(&zero).iter().all(|p| p.is_zero());
                let g = |v: &[BigRational]| map.eval_exact(&v.iter().cloned().map(GaussianRational::real).collect::<Vec<_>>());
                let same = g(x) == g(y);
                (Box::new(PolyField::new(sc.map)), Some(vanishes), same, true)
            }
            None => {
                let same = cfg.probe_times.iter().filter(|t| **t >= cfg.tau && **t <= win_end).all(|&t| {
                    let (a, b) = (family.eval(t, &xf), family.eval(t, &yf));
                    norm(&a.iter().zip(&b).map(|(p, q)| p - q).collect::<Vec<_>>()) <= 1e-12 * norm(&a).max(norm(&b)).max(1.0)
                });
                let f = family.clone();
                let xs = xf.clone();
                let g = FnField::new(format!("shift of {}", family.id()), n, move |t, z, out| {
                    let zx: Vec<f64> = z.iter().zip(&xs).map(|(a, b)| a + b).collect();
                    let (a, b) = (f.eval(t, &zx), f.eval(t, &xs));
                    for (o, (p, q)) in out.iter_mut().zip(a.iter().zip(&b)) {
                        *o = p - q;
                    }
                });
                (Box::new(g), None, same, false)
            }
        };

    let steps = (cfg.window / cfg.sample_step).round().max(1.0) as usize;
    let times = (1..=steps).map(|k| cfg.tau + cfg.window * k as f64 / steps as f64).collect();
    let out = integrate(field.as_ref(), cfg.tau, &z0, win_end, &cfg.integrator.clone().with_samples(times));
    let tr = out.trajectory();
    let max_deviation = tr
        .samples
        .iter()
        .map(|(_, z)| norm(&z.iter().zip(&z0).map(|(a, b)| a - b).collect::<Vec<_>>()))
        .fold(0.0, f64::max);
    let constant = out.is_completed() && max_deviation <= cfg.tol;
    let envelope = fit_gnuas_envelope(std::slice::from_ref(tr), &envelope_search());
    let passed = premise_holds && constant && envelope.is_violation() && shifted_vanishes_at_zero != Some(false);
    Ok(ConstantSolutionReport {
        family: family.id().to_string(),
        x: x.iter().map(crate::polyalg::ratio_serde::to_string).collect(),
        y: y.iter().map(crate::polyalg::ratio_serde::to_string).collect(),
        z0,
        shifted_vanishes_at_zero,
        premise_holds,
        premise_exact,
        max_deviation,
        constant,
        envelope,
        passed,
    })
}
