use serde::{Deserialize, Serialize};

use crate::odeint::Trajectory;

use super::fit::{Constraint, FitSearch, Problem, STRICT_GAP};

/// Search box for envelopes; the constant must absorb nonlinear transients,
/// hence the large default cap.
pub fn envelope_search() -> FitSearch {
    FitSearch { k_max: 1e12, ..FitSearch::default() }
}

/// `|x(t)| <= K e^{eps t0} |x0| e^{-alpha (t - t0)}` over an ensemble, i.e.
/// `beta(r, tau) = K r e^{-alpha tau}` and `theta(t0) = e^{eps t0}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeFit {
    pub k: f64,
    pub alpha: f64,
    pub eps: f64,
    pub worst_slack: f64,
    pub samples: usize,
}

impl EnvelopeFit {
    pub fn bound(&self, t0: f64, x0_norm: f64, t: f64) -> f64 {
        self.k * (self.eps * t0).exp() * x0_norm * (-self.alpha * (t - t0)).exp()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeSample {
    pub trajectory: usize,
    pub t0: f64,
    pub t: f64,
    pub x0_norm: f64,
    pub norm: f64,
}

/// A trajectory that ends at least half as large as it started.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NonDecayWitness {
    pub trajectory: usize,
    pub t0: f64,
    pub t_end: f64,
    pub x0_norm: f64,
    pub final_norm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum EnvelopeOutcome {
    Fit(EnvelopeFit),
    Violation {
        reason: String,
        sample: Option<EnvelopeSample>,
        non_decay: Option<NonDecayWitness>,
        best_eps: Option<f64>,
    },
}

impl EnvelopeOutcome {
    pub fn fit(&self) -> Option<&EnvelopeFit> {
        match self {
            EnvelopeOutcome::Fit(f) => Some(f),
            EnvelopeOutcome::Violation { .. } => None,
        }
    }

    pub fn is_violation(&self) -> bool {
        matches!(self, EnvelopeOutcome::Violation { .. })
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn non_decay(ensemble: &[Trajectory]) -> Option<NonDecayWitness> {
    ensemble.iter().enumerate().find_map(|(i, tr)| {
        let x0 = norm(&tr.x0);
        let (t_end, x) = tr.last();
        let fin = norm(x);
        (x0 > 0.0 && *t_end > tr.t0 && fin >= 0.5 * x0).then_some(NonDecayWitness {
            trajectory: i,
            t0: tr.t0,
            t_end: *t_end,
            x0_norm: x0,
            final_norm: fin,
        })
    })
}

/// Fits a linear-in-`|x0|` exponential envelope to completed trajectories.
pub fn fit_gnuas_envelope(ensemble: &[Trajectory], search: &FitSearch) -> EnvelopeOutcome {
    let violation = |reason: String, sample, best_eps| EnvelopeOutcome::Violation {
        reason,
        sample,
        non_decay: non_decay(ensemble),
        best_eps,
    };
    let mut cons = Vec::new();
    let mut owner = Vec::new();
    let mut span: f64 = 0.0;
    for (i, tr) in ensemble.iter().enumerate() {
        let x0 = norm(&tr.x0);
        for (t, x) in &tr.samples {
            let nx = norm(x);
            span = span.max(t - tr.t0);
            if x0 == 0.0 {
                if nx > 0.0 {
                    let s = EnvelopeSample { trajectory: i, t0: tr.t0, t: *t, x0_norm: 0.0, norm: nx };
                    return violation("trajectory leaves the origin".into(), Some(s), None);
                }
                continue;
            }
            if nx == 0.0 {
                continue;
            }
            cons.push(Constraint { t: *t, s: tr.t0, tau: t - tr.t0, sigma: tr.t0, ell: (nx / x0).ln() });
            owner.push(i);
        }
    }
    if cons.is_empty() || span <= 0.0 {
        return violation("no samples with elapsed time".into(), None, None);
    }
    let sample_of = |c: &Constraint| {
        let idx = cons.iter().position(|d| d == c)?;
        let tr = &ensemble[owner[idx]];
        let x0 = norm(&tr.x0);
        Some(EnvelopeSample { trajectory: owner[idx], t0: tr.t0, t: c.t, x0_norm: x0, norm: x0 * c.ell.exp() })
    };
    match Problem::new(&cons, search, span, Some(STRICT_GAP)).solve() {
        Ok(b) => {
            let fit = EnvelopeFit { k: b.k, alpha: b.alpha, eps: b.eps, worst_slack: b.worst_slack, samples: cons.len() };
            // Exhaustive re-check against the raw norms.
            for (i, tr) in ensemble.iter().enumerate() {
                let x0 = norm(&tr.x0);
                for (t, x) in &tr.samples {
                    let lhs = norm(x).ln();
                    let rhs = fit.k.ln() + fit.eps * tr.t0 + x0.ln() - fit.alpha * (t - tr.t0);
                    if lhs > rhs + 1e-12 * rhs.abs().max(1.0) {
                        let s = EnvelopeSample { trajectory: i, t0: tr.t0, t: *t, x0_norm: x0, norm: norm(x) };
                        return violation("fitted envelope fails on a sample".into(), Some(s), Some(fit.eps));
                    }
                }
            }
            EnvelopeOutcome::Fit(fit)
        }
        Err(inf) => violation(inf.to_string(), inf.binding.as_ref().and_then(sample_of), inf.best_eps),
    }
}
