use nalgebra::DMatrix;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use crate::odeint::PiecewiseSignal;
use crate::polyalg::{CompiledMap, ParamPolyMap};

use super::{cubic_nilpotent_lambda, MyCheckError};

/// How `T_omega` was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdMethod {
    ClosedForm,
    Scan,
}

/// `||JH(t, omega(t))|| <= delta e^{-eps t}` for sampled `t` in `[t_omega, horizon]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionIvCertificate {
    pub signal: String,
    pub eps: f64,
    pub delta: f64,
    pub t_omega: f64,
    /// `sup max{omega_2^2, (omega_1 + omega_3)^2}` for the closed form.
    pub l_omega: Option<f64>,
    pub method: ThresholdMethod,
    pub horizon: f64,
    pub samples: usize,
    /// Largest `||JH|| - delta e^{-eps t}` over the samples (`<= 0` is a pass
    /// up to [`ThresholdConfig::boundary_tol`]).
    pub max_violation: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ThresholdConfig {
    pub horizon: f64,
    pub step: f64,
    /// Relative slack allowed at `t_omega`, where the bound is attained.
    pub boundary_tol: f64,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        Self { horizon: 50.0, step: 0.01, boundary_tol: 1e-12 }
    }
}

/// `||JH(t, x)||_2` for `H = map - lambda X`.
pub fn jh_norm(h: &CompiledMap, t: f64, x: &[f64]) -> f64 {
    spectral_norm(h.jacobian_at(t, x))
}

fn spectral_norm(m: DMatrix<f64>) -> f64 {
    m.singular_values().max()
}

fn grid(t0: f64, horizon: f64, step: f64) -> Vec<f64> {
    let n = ((horizon - t0) / step).ceil().max(0.0) as usize;
    (0..=n).map(|k| (t0 + k as f64 * step).min(horizon)).collect()
}

fn l_omega(omega: &PiecewiseSignal, horizon: f64, step: f64) -> f64 {
    let f = |w: Vec<f64>| (w[1] * w[1]).max((w[0] + w[2]).powi(2));
    let mut sup = grid(0.0, horizon, step).into_iter().map(|t| f(omega.eval(t))).fold(0.0, f64::max);
    for &b in omega.breakpoints() {
        sup = sup.max(f(omega.eval_on_piece(b, b - 1e-9 * b.max(1.0)))).max(f(omega.eval(b)));
    }
    sup
}

/// `T_omega` for condition (iv). For the cubic nilpotent example with `eps < 1`
/// the closed form `ln(delta^2 / (18 L^2)) / (2 (eps - 1))` is used (clamped at
/// 0); otherwise the first time after the last sampled violation, refined by
/// bisection. The result is re-validated on the sampling grid either way.
pub fn condition_iv_threshold(
    map: &ParamPolyMap,
    omega: &PiecewiseSignal,
    delta: f64,
    eps: f64,
    cfg: &ThresholdConfig,
) -> Result<ConditionIvCertificate, MyCheckError> {
    let lambda = map
        .linear_coefficient()
        .ok_or_else(|| MyCheckError::NotLambdaPlusH("no linear coefficient".into()))?
        .to_f64()
        .unwrap_or(f64::NAN);
    if !(delta > 0.0 && delta < -lambda) {
        return Err(MyCheckError::PreconditionViolated(format!("need 0 < delta < -lambda = {}, got {delta}", -lambda)));
    }
    if !(eps >= 0.0) {
        return Err(MyCheckError::PreconditionViolated(format!("eps = {eps} must be nonnegative")));
    }
    if omega.dimension() != map.dimension() {
        return Err(MyCheckError::PreconditionViolated("signal dimension differs from the map".into()));
    }
    if !(cfg.horizon > 0.0 && cfg.step > 0.0) {
        return Err(MyCheckError::PreconditionViolated("horizon and step must be positive".into()));
    }
    let h = map.nonlinear_map().map_err(|e| MyCheckError::NotLambdaPlusH(e.to_string()))?.compiled();
    let excess = |t: f64| jh_norm(&h, t, &omega.eval(t)) - delta * (-eps * t).exp();

    let closed = cubic_nilpotent_lambda(map).is_some() && eps < 1.0;
    let (t_omega, l, method) = if closed {
        let l = l_omega(omega, cfg.horizon, cfg.step);
        let t = if l == 0.0 { 0.0 } else { ((delta * delta / (18.0 * l * l)).ln() / (2.0 * (eps - 1.0))).max(0.0) };
        (t, Some(l), ThresholdMethod::ClosedForm)
    } else {
        let ts = grid(0.0, cfg.horizon, cfg.step);
        let t = match ts.iter().rposition(|&t| excess(t) > 0.0) {
            None => 0.0,
            Some(i) if i + 1 == ts.len() => {
                return Err(MyCheckError::NoThreshold(format!("bound still fails at t = {}", cfg.horizon)));
            }
            Some(i) => {
                let (mut lo, mut hi) = (ts[i], ts[i + 1]);
                for _ in 0..80 {
                    let m = 0.5 * (lo + hi);
                    if excess(m) > 0.0 {
                        lo = m;
                    } else {
                        hi = m;
                    }
                }
                hi
            }
        };
        (t, None, ThresholdMethod::Scan)
    };
    if t_omega >= cfg.horizon {
        return Err(MyCheckError::NoThreshold(format!("T_omega = {t_omega} is beyond the horizon {}", cfg.horizon)));
    }
    let samples = grid(t_omega, cfg.horizon, cfg.step);
    let max_violation = samples.iter().map(|&t| excess(t)).fold(f64::NEG_INFINITY, f64::max);
    Ok(ConditionIvCertificate {
        signal: omega.name().to_string(),
        eps,
        delta,
        t_omega,
        l_omega: l,
        method,
        horizon: cfg.horizon,
        samples: samples.len(),
        max_violation,
        holds: max_violation <= cfg.boundary_tol * delta,
    })
}
