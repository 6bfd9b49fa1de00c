use num_traits::{ToPrimitive, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dichotomy::{fit_stability_certificate, FitReport, FitSearch, GridSpec, NormSampleGrid};
use crate::odeint::{integrate, linearize_along, IntegratorConfig, PiecewiseSignal, PolyField, SolveOutcome};
use crate::polyalg::{cubic_bound_constant, unit_sphere_point, GaussianRational, Homogeneity, ParamPolyMap};

use super::condition::{condition_iv_threshold, ConditionIvCertificate, ThresholdConfig};
use super::MyCheckError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CheckId {
    G1,
    G2,
    G3star,
    #[serde(rename = "cond_i")]
    CondI,
    #[serde(rename = "cond_ii")]
    CondII,
    #[serde(rename = "cond_iii")]
    CondIII,
    #[serde(rename = "cond_iv")]
    CondIV,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Pass,
    EvidenceOnly,
    Fail,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckEntry {
    pub id: CheckId,
    pub status: CheckStatus,
    pub details: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HypothesisReport {
    pub map: String,
    pub lambda: String,
    pub checks: Vec<CheckEntry>,
    /// Worst status over all checks; G1 caps it at `evidence_only`.
    pub overall: CheckStatus,
    pub omega_suite: Vec<String>,
    pub condition_iv: Vec<ConditionIvCertificate>,
    pub linearized_fits: Vec<FitReport>,
    /// Radius below which the comparison equation keeps solutions global.
    pub comparison_radius: Option<f64>,
}

impl HypothesisReport {
    pub fn status(&self, id: CheckId) -> Option<CheckStatus> {
        self.checks.iter().find(|c| c.id == id).map(|c| c.status)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CheckConfig {
    /// Defaults to `-lambda / 2`.
    pub delta: Option<f64>,
    pub eps: f64,
    pub threshold: ThresholdConfig,
    pub fit_grid: GridSpec,
    pub fit_search: FitSearch,
    pub integrator: IntegratorConfig,
    pub g1_radii: Vec<f64>,
    pub g1_directions: usize,
    pub g1_horizon: f64,
    pub bound_samples: usize,
    pub seed: u64,
}

impl Default for CheckConfig {
    fn default() -> Self {
        Self {
            delta: None,
            eps: 0.0,
            threshold: ThresholdConfig::default(),
            fit_grid: GridSpec::new(10.0, 0.5, 40.0, 0.5),
            fit_search: FitSearch { k_max: 1e6, ..FitSearch::default() },
            integrator: IntegratorConfig { blowup_threshold: 1e12, ..IntegratorConfig::default() },
            g1_radii: vec![0.5, 1.0, 5.0, 10.0],
            g1_directions: 6,
            g1_horizon: 20.0,
            bound_samples: 2000,
            seed: 0,
        }
    }
}

/// `0`, constants of norm 1 and 5, a switch between them and a sinusoid.
pub fn default_omega_suite(n: usize) -> Vec<PiecewiseSignal> {
    let dir = |r: f64| vec![r / (n as f64).sqrt(); n];
    let neg = |v: Vec<f64>| v.into_iter().map(|x| -x).collect::<Vec<_>>();
    vec![
        PiecewiseSignal::constant(vec![0.0; n]).with_declared_bound(0.0),
        PiecewiseSignal::constant(dir(1.0)).with_declared_bound(1.0 + 1e-12),
        PiecewiseSignal::constant(dir(5.0)).with_declared_bound(5.0 + 1e-12),
        PiecewiseSignal::switch(5.0, dir(1.0), neg(dir(5.0))).with_declared_bound(5.0 + 1e-12),
        PiecewiseSignal::sinusoid(vec![1.0; n], 1.0).with_declared_bound((n as f64).sqrt()),
    ]
}

fn entry(id: CheckId, status: CheckStatus, details: impl Into<String>) -> CheckEntry {
    CheckEntry { id, status, details: details.into() }
}

fn pass_if(ok: bool) -> CheckStatus {
    if ok {
        CheckStatus::Pass
    } else {
        CheckStatus::Fail
    }
}

/// Checks (i)-(iv), (G1), (G2) and (G3*) for `map = lambda X + H` over a finite
/// suite of bounded signals.
pub fn check_hypotheses(
    map: &ParamPolyMap,
    omega_suite: &[PiecewiseSignal],
    cfg: &CheckConfig,
) -> Result<HypothesisReport, MyCheckError> {
    let lambda_q = map
        .linear_coefficient()
        .ok_or_else(|| MyCheckError::NotLambdaPlusH("map has no common linear coefficient".into()))?
        .clone();
    let lambda = lambda_q.to_f64().unwrap_or(f64::NAN);
    if !(lambda < 0.0) {
        return Err(MyCheckError::PreconditionViolated(format!("lambda = {lambda} must be negative")));
    }
    let h = map.nonlinear_map().map_err(|e| MyCheckError::NotLambdaPlusH(e.to_string()))?;
    let n = map.dimension();
    if omega_suite.iter().any(|w| w.dimension() != n) {
        return Err(MyCheckError::PreconditionViolated("signal dimension differs from the map".into()));
    }
    let mut checks = Vec::new();

    checks.push(entry(
        CheckId::CondI,
        CheckStatus::Pass,
        "coefficients are polynomials in parameters bound to continuous functions of t",
    ));

    let homog = h.homogeneity();
    let cubic = homog.iter().all(|d| matches!(d, Homogeneity::Zero | Homogeneity::Degree(3)));
    let nil = h.jacobian().is_nilpotent();
    checks.push(entry(
        CheckId::CondII,
        pass_if(cubic && nil.nilpotent),
        format!("homogeneity per coordinate {homog:?}; JH nilpotent: {} (index {:?})", nil.nilpotent, nil.index),
    ));

    let bound = cubic_bound_constant(&h, cfg.bound_samples, cfg.seed);
    let a_sup = match &bound {
        Ok(b) => match &b.time_factor {
            None => Some(1.0),
            Some((sym, p)) => map.binding(sym).and_then(|bd| bd.declared_sup()).map(|s| s.powi(*p as i32)),
        },
        Err(_) => None,
    };
    checks.push(entry(
        CheckId::CondIII,
        pass_if(a_sup.is_some()),
        match (&bound, a_sup) {
            (Ok(b), Some(sup)) => format!("||H(t,x)|| <= C a(t) ||x||^3 with C = {:.6}, sup a = {sup}", b.c_coeff),
            (Ok(_), None) => "time factor a(t) has no finite declared supremum".into(),
            (Err(e), _) => format!("no cubic bound: {e}"),
        },
    ));

    let delta = cfg.delta.unwrap_or(-lambda / 2.0);
    let per_omega: Vec<(Result<ConditionIvCertificate, MyCheckError>, FitReport)> = omega_suite
        .par_iter()
        .map(|w| {
            let cert = condition_iv_threshold(map, w, delta, cfg.eps, &cfg.threshold);
            let fit = linearize_along(map, w)
                .map_err(MyCheckError::PreconditionViolated)
                .and_then(|field| {
                    NormSampleGrid::sample(&field, &cfg.fit_grid, &cfg.integrator)
                        .map_err(|e| MyCheckError::Failed(e.to_string()))
                })
                .map(|grid| FitReport::from_result(fit_stability_certificate(&grid, &cfg.fit_search)));
            let fit = fit.unwrap_or_else(|e| {
                FitReport::Infeasible(crate::dichotomy::Infeasible {
                    reason: e.to_string(),
                    best_eps: None,
                    alpha_bound: None,
                    alpha_required: None,
                    binding: None,
                })
            });
            (cert, fit)
        })
        .collect();
    let mut condition_iv = Vec::new();
    let mut iv_fail = Vec::new();
    for (w, (c, _)) in omega_suite.iter().zip(&per_omega) {
        match c {
            Ok(c) if c.holds => condition_iv.push(c.clone()),
            Ok(c) => {
                iv_fail.push(format!("{}: sampled violation {:e}", w.name(), c.max_violation));
                condition_iv.push(c.clone());
            }
            Err(e) => iv_fail.push(format!("{}: {e}", w.name())),
        }
    }
    let unbounded: Vec<&str> = omega_suite
        .iter()
        .filter(|w| !w.check_declared_bound(cfg.threshold.horizon, 0.01))
        .map(|w| w.name())
        .collect();
    checks.push(entry(
        CheckId::CondIV,
        pass_if(iv_fail.is_empty() && unbounded.is_empty()),
        if iv_fail.is_empty() && unbounded.is_empty() {
            format!(
                "delta = {delta}, eps = {}; T_omega = {:?}",
                cfg.eps,
                condition_iv.iter().map(|c| c.t_omega).collect::<Vec<_>>()
            )
        } else {
            format!("{}; signals exceeding declared bound: {unbounded:?}", iv_fail.join("; "))
        },
    ));

    let zero = vec![GaussianRational::real(num_rational::BigRational::zero()); n];
    let g2 = map.eval_exact(&zero).iter().all(|p| p.is_zero());
    checks.push(entry(CheckId::G2, pass_if(g2), "exact evaluation at x = 0"));

    let c_bound = bound.as_ref().ok().map(|b| b.c_coeff);
    let comparison_radius = match (c_bound, a_sup) {
        (Some(c), Some(a)) if c * a > 0.0 && lambda < 0.0 => Some((-lambda / (c * a)).sqrt()),
        _ => None,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let ics: Vec<Vec<f64>> = cfg
        .g1_radii
        .iter()
        .flat_map(|&r| (0..cfg.g1_directions).map(|_| unit_sphere_point(&mut rng, n)).map(move |d| d.iter().map(|x| r * x).collect::<Vec<_>>()).collect::<Vec<_>>())
        .collect();
    let field = PolyField::new(map.clone());
    let bad: Vec<String> = ics
        .par_iter()
        .filter_map(|x0| match integrate(&field, 0.0, x0, cfg.g1_horizon, &cfg.integrator) {
            SolveOutcome::Completed(_) => None,
            other => Some(other.describe()),
        })
        .collect();
    checks.push(entry(
        CheckId::G1,
        if bad.is_empty() { CheckStatus::EvidenceOnly } else { CheckStatus::Fail },
        if bad.is_empty() {
            format!(
                "{} initial conditions up to norm {} integrated to t = {}; comparison-guaranteed for |x0| <= {}",
                ics.len(),
                cfg.g1_radii.iter().copied().fold(0.0, f64::max),
                cfg.g1_horizon,
                comparison_radius.map_or("n/a".into(), |r| format!("{r:.6}"))
            )
        } else {
            format!("{} of {} probes did not complete: {}", bad.len(), ics.len(), bad[0])
        },
    ));

    let fits: Vec<FitReport> = per_omega.into_iter().map(|(_, f)| f).collect();
    let infeasible: Vec<&str> =
        omega_suite.iter().zip(&fits).filter(|(_, f)| !f.is_feasible()).map(|(w, _)| w.name()).collect();
    checks.push(entry(
        CheckId::G3star,
        pass_if(infeasible.is_empty()),
        if infeasible.is_empty() {
            format!("stability certificate with eps < alpha along all {} sampled signals (finite suite only)", omega_suite.len())
        } else {
            format!("no certificate along {infeasible:?}")
        },
    ));

    let overall = checks.iter().map(|c| c.status).max().unwrap_or(CheckStatus::Pass);
    Ok(HypothesisReport {
        map: map.to_string(),
        lambda: crate::polyalg::ratio_serde::to_string(&lambda_q),
        checks,
        overall,
        omega_suite: omega_suite.iter().map(|w| w.name().to_string()).collect(),
        condition_iv,
        linearized_fits: fits,
        comparison_radius,
    })
}
