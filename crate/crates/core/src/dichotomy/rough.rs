use serde::{Deserialize, Serialize};

use super::fit::DichotomyCertificate;
use super::DichotomyError;

/// Certificate for `x' = [A(t) + B(t)] x` when `||B(t)|| <= delta e^{-eps_pert t}`:
/// `(K, alpha - delta K, eps)` on the same interval.
pub fn roughness_predict(
    cert: &DichotomyCertificate,
    delta: f64,
    eps_pert: f64,
) -> Result<DichotomyCertificate, DichotomyError> {
    if !(delta >= 0.0) {
        return Err(DichotomyError::PreconditionViolated(format!("delta = {delta} must be nonnegative")));
    }
    if delta * cert.k >= cert.alpha {
        return Err(DichotomyError::PreconditionViolated(format!(
            "delta = {delta} must be below alpha / K = {}",
            cert.alpha / cert.k
        )));
    }
    if eps_pert < cert.eps {
        return Err(DichotomyError::PreconditionViolated(format!(
            "perturbation decay rate {eps_pert} is below the certificate's eps = {}",
            cert.eps
        )));
    }
    let alpha = cert.alpha - delta * cert.k;
    if cert.eps >= alpha {
        return Err(DichotomyError::PreconditionViolated(format!(
            "degraded rate {alpha} no longer exceeds eps = {}",
            cert.eps
        )));
    }
    Ok(DichotomyCertificate { alpha, binding: None, worst_slack: None, ..cert.clone() })
}

/// Certificate on the whole half line built from one on `[T, inf)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Extension {
    /// Constant `K' = L K e^{alpha T}`.
    pub certificate: DichotomyCertificate,
    /// `L K e^{(alpha + eps) T}`, which also covers `s < T <= t` when `eps > 0`.
    pub k_covering: f64,
}

/// Extends a certificate on `[T, inf)` to `[0, inf)` given
/// `L >= sup ||Phi(t,s) P(s)||` over `0 <= s <= t <= T`.
pub fn extend_certificate(cert: &DichotomyCertificate, l: f64) -> Result<Extension, DichotomyError> {
    if !(l.is_finite() && l > 0.0) {
        return Err(DichotomyError::PreconditionViolated(format!("L = {l} must be finite and positive")));
    }
    let t = cert.interval_start;
    let k = l * cert.k * (cert.alpha * t).exp();
    Ok(Extension {
        certificate: DichotomyCertificate { k, interval_start: 0.0, binding: None, worst_slack: None, ..cert.clone() },
        k_covering: l * cert.k * ((cert.alpha + cert.eps) * t).exp(),
    })
}
