use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::odeint::LinearField;

use super::grid::{GridSpec, NormSample};

/// The scalar system `x' = (lambda0 + a t sin t) x`, whose transition is known
/// in closed form.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OscillatingScalar {
    pub lambda0: f64,
    pub a: f64,
}

/// Lattice evidence that no certificate with `eps < alpha` exists when
/// `eps_needed >= alpha_allowed`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundWitness {
    /// Slope of `ln ||Phi||` in `s` along `t = 2k pi`, `s = (2j+1) pi`.
    pub eps_needed: f64,
    /// Best decay rate: `ln ||Phi||` grows like `(lambda0 + |a|)(t - s)`.
    pub alpha_allowed: f64,
    pub samples: Vec<NormSample>,
}

impl LowerBoundWitness {
    pub fn rules_out_strict_certificate(&self) -> bool {
        self.eps_needed >= self.alpha_allowed
    }
}

impl OscillatingScalar {
    pub fn new(lambda0: f64, a: f64) -> Self {
        Self { lambda0, a }
    }

    pub fn coefficient(&self, t: f64) -> f64 {
        self.lambda0 + self.a * t * t.sin()
    }

    pub fn field(&self) -> LinearField {
        let me = *self;
        LinearField::scalar(format!("x' = ({} + {} t sin t) x", self.lambda0, self.a), move |t| me.coefficient(t))
    }

    fn antiderivative(&self, t: f64) -> f64 {
        self.lambda0 * t + self.a * (t.sin() - t * t.cos())
    }

    /// `ln Phi(t, s)`.
    pub fn log_transition(&self, t: f64, s: f64) -> f64 {
        self.antiderivative(t) - self.antiderivative(s)
    }

    /// Pairs `t = 2k pi >= s = (2j+1) pi` with both below `horizon`.
    pub fn lattice_pairs(horizon: f64) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        let mut j = 0;
        while (2 * j + 1) as f64 * PI <= horizon {
            let s = (2 * j + 1) as f64 * PI;
            let mut k = j + 1;
            while 2.0 * k as f64 * PI <= horizon {
                out.push((2.0 * k as f64 * PI, s));
                k += 1;
            }
            j += 1;
        }
        out
    }

    /// Default grid plus the lattice pairs within it.
    pub fn grid(&self) -> GridSpec {
        let mut g = GridSpec::default();
        g.extra_pairs = Self::lattice_pairs(g.s_max.min(g.tau_max));
        g
    }

    pub fn lower_bound(&self, horizon: f64) -> LowerBoundWitness {
        let samples = Self::lattice_pairs(horizon)
            .into_iter()
            .map(|(t, s)| NormSample { t, s, log_norm: self.log_transition(t, s) })
            .collect();
        LowerBoundWitness { eps_needed: 2.0 * self.a.abs(), alpha_allowed: -(self.lambda0 + self.a.abs()), samples }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lattice_exponent_is_affine() {
        let o = OscillatingScalar::new(-4.0, -1.0);
        let w = o.lower_bound(40.0);
        assert!(!w.samples.is_empty());
        for p in &w.samples {
            let affine = -3.0 * (p.t - p.s) + 2.0 * p.s;
            assert!((p.log_norm - affine).abs() < 1e-9 * affine.abs().max(1.0));
        }
        assert!(!w.rules_out_strict_certificate());
        assert!(OscillatingScalar::new(-2.0, -1.0).lower_bound(40.0).rules_out_strict_certificate());
    }
}
