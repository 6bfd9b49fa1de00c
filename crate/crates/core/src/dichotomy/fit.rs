//! Feasibility fitting of bounds `ell <= k - alpha tau + eps sigma` over
//! sampled constraints, with `k = ln K` capped at `ln k_max`.
//!
//! For a fixed `eps` the largest admissible rate is
//! `alpha_max(eps) = min_{tau > 0} (ln k_max - ell + eps sigma) / tau`, a concave
//! function of `eps`. A finite horizon always leaves room of
//! `ln k_max / tau_span` in this rate that the samples cannot rule out, so that
//! amount is subtracted before comparing with the required `eps + gap`.

use serde::{Deserialize, Serialize};

use super::grid::{NormSample, NormSampleGrid};

/// Margin enforcing `eps < alpha`.
pub const STRICT_GAP: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub t: f64,
    pub s: f64,
    /// Elapsed time.
    pub tau: f64,
    /// Anchor multiplying `eps`.
    pub sigma: f64,
    pub ell: f64,
}

impl Constraint {
    /// Stable-side sample: `tau = t - s`, anchored at `s`.
    pub fn stable(n: &NormSample) -> Self {
        Self { t: n.t, s: n.s, tau: n.t - n.s, sigma: n.s, ell: n.log_norm }
    }
}

/// Search box and refinement settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitSearch {
    #[serde(with = "crate::unbounded::pair")]
    pub alpha_range: (f64, f64),
    pub eps_range: (f64, f64),
    /// Cap on the constant `K`.
    pub k_max: f64,
    /// Coarse grid points over `eps_range` before golden-section refinement.
    pub coarse_points: usize,
    /// Bisection / golden-section iterations.
    pub refinement: usize,
}

impl Default for FitSearch {
    fn default() -> Self {
        Self { alpha_range: (0.0, 100.0), eps_range: (0.0, 20.0), k_max: 10.0, coarse_points: 64, refinement: 80 }
    }
}

impl FitSearch {
    pub fn uniform() -> Self {
        Self { eps_range: (0.0, 0.0), ..Self::default() }
    }
}

/// Fitted bound `ell <= ln K - alpha tau + eps sigma`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bound {
    pub k: f64,
    pub alpha: f64,
    pub eps: f64,
    /// Smallest `ln K - alpha tau + eps sigma - ell` over the samples.
    pub worst_slack: f64,
    pub binding: Option<Constraint>,
}

/// No `(alpha, eps)` in the search box fits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Infeasible {
    pub reason: String,
    /// `eps` closest to feasibility.
    pub best_eps: Option<f64>,
    /// Largest certifiable rate at `best_eps`.
    pub alpha_bound: Option<f64>,
    /// Rate that would have been required at `best_eps`.
    pub alpha_required: Option<f64>,
    pub binding: Option<Constraint>,
}

impl std::fmt::Display for Infeasible {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "infeasible: {}", self.reason)?;
        if let (Some(e), Some(a), Some(r)) = (self.best_eps, self.alpha_bound, self.alpha_required) {
            write!(f, " (best eps {e:.6}: alpha <= {a:.6} but {r:.6} required)")?;
        }
        Ok(())
    }
}

pub(crate) struct Problem<'a> {
    pub c: &'a [Constraint],
    pub ln_kmax: f64,
    /// Rate resolution `ln k_max / tau_span`.
    pub r: f64,
    pub alpha_lo: f64,
    pub alpha_hi: f64,
    pub eps_range: (f64, f64),
    /// `Some(gap)` demands `alpha >= eps + gap`.
    pub gap: Option<f64>,
    pub coarse: usize,
    pub iters: usize,
}

impl<'a> Problem<'a> {
    pub fn new(c: &'a [Constraint], search: &FitSearch, tau_span: f64, gap: Option<f64>) -> Self {
        let ln_kmax = search.k_max.ln();
        Self {
            c,
            ln_kmax,
            r: ln_kmax / tau_span,
            alpha_lo: search.alpha_range.0,
            alpha_hi: search.alpha_range.1,
            eps_range: search.eps_range,
            gap,
            coarse: search.coarse_points.max(2),
            iters: search.refinement.max(1),
        }
    }

    fn alpha_max(&self, eps: f64) -> (f64, Option<usize>) {
        let mut best = self.alpha_hi;
        let mut arg = None;
        for (i, c) in self.c.iter().enumerate() {
            if c.tau > 0.0 {
                let a = (self.ln_kmax - c.ell + eps * c.sigma) / c.tau;
                if a < best {
                    best = a;
                    arg = Some(i);
                }
            }
        }
        (best, arg)
    }

    fn need(&self, eps: f64) -> f64 {
        match self.gap {
            Some(g) => self.alpha_lo.max(eps + g),
            None => self.alpha_lo,
        }
    }

    fn margin(&self, eps: f64) -> f64 {
        self.alpha_max(eps).0 - self.r - self.need(eps)
    }

    /// Lower bound on `eps` from samples with no elapsed time.
    fn eps_floor(&self) -> Result<f64, usize> {
        let mut floor = f64::NEG_INFINITY;
        for (i, c) in self.c.iter().enumerate() {
            if c.tau <= 0.0 {
                let excess = c.ell - self.ln_kmax;
                if excess > 0.0 {
                    if c.sigma <= 0.0 {
                        return Err(i);
                    }
                    floor = floor.max(excess / c.sigma);
                }
            }
        }
        Ok(floor)
    }

    fn log_k(&self, alpha: f64, eps: f64) -> (f64, Option<usize>) {
        let mut k = 0.0;
        let mut arg = None;
        for (i, c) in self.c.iter().enumerate() {
            let v = c.ell + alpha * c.tau - eps * c.sigma;
            if v > k {
                k = v;
                arg = Some(i);
            }
        }
        (k, arg)
    }

    fn infeasible(&self, reason: &str, eps: Option<f64>) -> Infeasible {
        match eps {
            Some(e) => {
                let (a, arg) = self.alpha_max(e);
                Infeasible {
                    reason: reason.into(),
                    best_eps: Some(e),
                    alpha_bound: Some(a - self.r),
                    alpha_required: Some(self.need(e)),
                    binding: arg.map(|i| self.c[i]),
                }
            }
            None => Infeasible { reason: reason.into(), best_eps: None, alpha_bound: None, alpha_required: None, binding: None },
        }
    }

    /// Maximum of the concave margin over `[lo, hi]`: coarse grid, then
    /// golden-section search around the best grid point.
    fn maximize_margin(&self, lo: f64, hi: f64) -> (f64, f64) {
        if hi <= lo {
            return (lo, self.margin(lo));
        }
        let n = self.coarse;
        let xs: Vec<f64> = (0..=n).map(|k| lo + (hi - lo) * k as f64 / n as f64).collect();
        let ms: Vec<f64> = xs.iter().map(|&e| self.margin(e)).collect();
        let best = (0..=n).max_by(|&a, &b| ms[a].total_cmp(&ms[b]).then(b.cmp(&a))).unwrap();
        let (mut a, mut b) = (xs[best.saturating_sub(1)], xs[(best + 1).min(n)]);
        let (mut peak, mut peak_m) = (xs[best], ms[best]);
        let g = (5f64.sqrt() - 1.0) / 2.0;
        let mut x1 = b - g * (b - a);
        let mut x2 = a + g * (b - a);
        let (mut f1, mut f2) = (self.margin(x1), self.margin(x2));
        for _ in 0..self.iters {
            if f1 < f2 {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + g * (b - a);
                f2 = self.margin(x2);
            } else {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - g * (b - a);
                f1 = self.margin(x1);
            }
            if b - a < 1e-12 {
                break;
            }
        }
        for (x, f) in [(x1, f1), (x2, f2)] {
            if f > peak_m {
                peak = x;
                peak_m = f;
            }
        }
        (peak, peak_m)
    }

    /// Largest margin over admissible `eps`, `None` when samples at `t = s`
    /// already rule out every `eps` in range.
    pub fn best_margin(&self) -> Option<(f64, f64)> {
        let floor = self.eps_floor().ok()?;
        let lo = self.eps_range.0.max(floor);
        let hi = self.eps_range.1;
        if lo > hi {
            return None;
        }
        Some(self.maximize_margin(lo, hi))
    }

    /// Smallest feasible `eps`, or the infeasibility witness.
    fn min_eps(&self) -> Result<f64, Infeasible> {
        let floor = match self.eps_floor() {
            Ok(f) => f,
            Err(i) => {
                return Err(Infeasible {
                    binding: Some(self.c[i]),
                    ..self.infeasible("a sample at t = s = 0 exceeds the constant cap", None)
                })
            }
        };
        let lo = self.eps_range.0.max(floor);
        let hi = self.eps_range.1;
        if lo > hi {
            return Err(self.infeasible("eps lower bound from t = s samples exceeds the search range", Some(hi)));
        }
        if self.margin(lo) >= 0.0 {
            return Ok(lo);
        }
        if hi == lo {
            return Err(self.infeasible("no admissible rate at the pinned eps", Some(lo)));
        }
        let (peak, peak_m) = self.maximize_margin(lo, hi);
        if peak_m < 0.0 {
            return Err(self.infeasible("no eps in the search range admits eps < alpha", Some(peak)));
        }
        let (mut l, mut r) = (lo, peak);
        for _ in 0..self.iters {
            let m = 0.5 * (l + r);
            if m <= l || m >= r {
                break;
            }
            if self.margin(m) >= 0.0 {
                r = m;
            } else {
                l = m;
            }
        }
        Ok(r)
    }

    pub fn solve(&self) -> Result<Bound, Infeasible> {
        if self.c.is_empty() {
            return Err(self.infeasible("no samples", None));
        }
        let eps = self.min_eps()?;
        let (amax, _) = self.alpha_max(eps);
        let base = (amax - self.r).max(self.need(eps));
        let k_base = self.log_k(base, eps).0;
        let target = k_base + 1e-9 * k_base.abs() + 1e-12;
        let (mut l, mut r) = (base, amax.max(base));
        if self.log_k(r, eps).0 <= target {
            l = r;
        } else {
            for _ in 0..self.iters {
                let m = 0.5 * (l + r);
                if m <= l || m >= r {
                    break;
                }
                if self.log_k(m, eps).0 <= target {
                    l = m;
                } else {
                    r = m;
                }
            }
        }
        let alpha = l;
        let (k, arg) = self.log_k(alpha, eps);
        let worst_slack = self.c.iter().map(|c| k - alpha * c.tau + eps * c.sigma - c.ell).fold(f64::INFINITY, f64::min);
        Ok(Bound { k: k.exp(), alpha, eps, worst_slack, binding: arg.map(|i| self.c[i]) })
    }
}

/// Projector attached to a certificate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProjectorKind {
    Identity,
    Zero,
    DeclaredSplitting,
    EstimatedSplitting,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Projector {
    pub rank: usize,
    pub kind: ProjectorKind,
}

/// Nonuniform exponential dichotomy certificate
/// `||Phi(t,s) P(s)|| <= K e^{-alpha (t-s) + eps s}` on `[interval_start, inf)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DichotomyCertificate {
    pub k: f64,
    pub alpha: f64,
    pub eps: f64,
    pub projector: Projector,
    /// `0` means the whole half-line.
    pub interval_start: f64,
    /// Smallest margin over the fitted samples; `None` for derived certificates.
    pub worst_slack: Option<f64>,
    pub binding: Option<Constraint>,
}

impl DichotomyCertificate {
    pub fn is_uniform(&self) -> bool {
        self.eps == 0.0
    }

    /// Value of the bound at `(t, s)`.
    pub fn log_bound(&self, t: f64, s: f64) -> f64 {
        self.k.ln() - self.alpha * (t - s) + self.eps * s
    }

    pub fn from_bound(b: Bound, n: usize, interval_start: f64) -> Self {
        Self {
            k: b.k,
            alpha: b.alpha,
            eps: b.eps,
            projector: Projector { rank: n, kind: ProjectorKind::Identity },
            interval_start,
            worst_slack: Some(b.worst_slack),
            binding: b.binding,
        }
    }
}

/// Fits a nonuniform exponential stability certificate (identity projector):
/// least `eps`, then the largest `alpha` with `eps <= alpha - 1e-6` that does
/// not raise `K`, then the least `K >= 1`.
pub fn fit_stability_certificate(grid: &NormSampleGrid, search: &FitSearch) -> Result<DichotomyCertificate, Infeasible> {
    let c: Vec<Constraint> = grid.entries.iter().map(Constraint::stable).collect();
    let start = grid.entries.iter().map(|e| e.s).fold(f64::INFINITY, f64::min);
    let b = Problem::new(&c, search, grid.tau_span, Some(STRICT_GAP)).solve()?;
    Ok(DichotomyCertificate::from_bound(b, grid.dimension, start.max(0.0)))
}

/// Outcome of a fit, in serializable form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum FitReport {
    Feasible(DichotomyCertificate),
    Infeasible(Infeasible),
}

impl FitReport {
    pub fn from_result(r: Result<DichotomyCertificate, Infeasible>) -> Self {
        match r {
            Ok(c) => FitReport::Feasible(c),
            Err(e) => FitReport::Infeasible(e),
        }
    }

    pub fn is_feasible(&self) -> bool {
        matches!(self, FitReport::Feasible(_))
    }

    pub fn certificate(&self) -> Option<&DichotomyCertificate> {
        match self {
            FitReport::Feasible(c) => Some(c),
            FitReport::Infeasible(_) => None,
        }
    }
}

/// [`fit_stability_certificate`] with `eps` pinned to zero.
pub fn check_uniform_fit(grid: &NormSampleGrid, search: &FitSearch) -> FitReport {
    let search = FitSearch { eps_range: (0.0, 0.0), ..search.clone() };
    FitReport::from_result(fit_stability_certificate(grid, &search))
}

/// Smallest margin of `cert` over the stable-side samples of `grid`.
pub fn validate_certificate(cert: &DichotomyCertificate, grid: &NormSampleGrid) -> f64 {
    grid.entries.iter().map(|e| cert.log_bound(e.t, e.s) - e.log_norm).fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exp_grid(rate: f64) -> NormSampleGrid {
        let mut e = Vec::new();
        for i in 0..=20 {
            for j in 0..=20 {
                let s = i as f64 * 0.5;
                let t = s + j as f64 * 0.5;
                e.push(NormSample { t, s, log_norm: rate * (t - s) });
            }
        }
        NormSampleGrid::new("exp", 1, e, 10.0).unwrap()
    }

    #[test]
    fn exact_exponential_recovers_rate() {
        let c = fit_stability_certificate(&exp_grid(-1.0), &FitSearch::default()).unwrap();
        assert_eq!(c.eps, 0.0);
        assert!((c.alpha - 1.0).abs() < 1e-9, "{c:?}");
        assert!((c.k - 1.0).abs() < 1e-9, "{c:?}");
        assert!(c.worst_slack.unwrap() >= 0.0);
    }

    #[test]
    fn growth_is_infeasible() {
        let r = fit_stability_certificate(&exp_grid(0.1), &FitSearch::default());
        let w = r.unwrap_err();
        assert!(w.best_eps.is_some() && w.binding.is_some());
    }

    #[test]
    fn nonuniform_part_needs_eps() {
        // ell = -tau + 0.5 s: needs eps >= 0.5 and allows alpha up to 1.
        let mut e = Vec::new();
        for i in 0..=40 {
            for j in 0..=40 {
                let (s, tau) = (i as f64 * 0.5, j as f64 * 0.5);
                e.push(NormSample { t: s + tau, s, log_norm: -tau + 0.5 * s });
            }
        }
        let g = NormSampleGrid::new("nu", 1, e, 20.0).unwrap();
        let c = fit_stability_certificate(&g, &FitSearch::default()).unwrap();
        assert!(c.eps > 0.3 && c.eps <= 0.5 + 1e-9, "{c:?}");
        assert!(c.alpha > c.eps);
        assert!(validate_certificate(&c, &g) >= 0.0);
        assert!(!check_uniform_fit(&g, &FitSearch::default()).is_feasible());
    }
}
