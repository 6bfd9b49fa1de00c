//! Dichotomy spectrum by scanning shifts `lambda`.
//!
//! Shifting by `lambda` multiplies `Phi(t, s)` by `e^{-lambda (t - s)}`, which
//! moves every certifiable rate by exactly `lambda`. Each coordinate block is
//! therefore reduced once to thresholds: stable for `lambda >= stable_from`,
//! unstable for `lambda <= unstable_until`. The scan and bisection below run on
//! these thresholds.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::odeint::{propagate_scaled, IntegratorConfig, LinearField, ScaledMatrix, VectorField};

use super::fit::{Bound, Constraint, FitSearch, Problem, STRICT_GAP};
use super::grid::{sample_matrices, GridSpec};
use super::DichotomyError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScanConfig {
    /// Scanned `lambda` range; by default `+-(sup ||A|| + 1)` over the grid.
    pub range: Option<(f64, f64)>,
    pub coarse_step: f64,
    /// Bisection tolerance for interval endpoints.
    pub tol: f64,
    pub grid: GridSpec,
    pub search: FitSearch,
    /// Endpoint drift between the full and the half-horizon grid above which
    /// the estimate is labeled low confidence.
    pub horizon_drift_tol: f64,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            range: None,
            coarse_step: 0.1,
            tol: 1e-3,
            grid: GridSpec::default(),
            search: FitSearch { alpha_range: (0.0, f64::INFINITY), eps_range: (0.0, 50.0), ..FitSearch::default() },
            horizon_drift_tol: 0.25,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralInterval {
    pub lower: f64,
    pub upper: f64,
}

impl SpectralInterval {
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "level", rename_all = "snake_case")]
pub enum Confidence {
    High,
    Low { reasons: Vec<String> },
}

/// Sampled bound `||Phi(t,s)|| <= M e^{nu (t-s) + delta s}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundedGrowth {
    pub m: f64,
    pub nu: f64,
    pub delta: f64,
}

/// Classification thresholds for one block.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnitReport {
    pub coordinates: Vec<usize>,
    /// Stable (identity projector) for `lambda >= stable_from`.
    pub stable_from: Option<f64>,
    /// Unstable (zero projector) for `lambda <= unstable_until`.
    pub unstable_until: Option<f64>,
    /// Estimated splittings: `(rank, stable part from, unstable part until)`.
    pub splittings: Vec<(usize, Option<f64>, Option<f64>)>,
    pub intervals: Vec<SpectralInterval>,
    pub bounded_growth: Option<BoundedGrowth>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanMeta {
    pub range: (f64, f64),
    pub coarse_step: f64,
    pub tol: f64,
    pub grid: GridSpec,
    pub classifications: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumEstimate {
    pub intervals: Vec<SpectralInterval>,
    pub left_unbounded: bool,
    pub right_unbounded: bool,
    pub units: Vec<UnitReport>,
    pub confidence: Confidence,
    pub scan: ScanMeta,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Class {
    Unstable,
    Split(usize),
    Stable,
    Spectrum,
}

#[derive(Clone, Debug)]
struct Thresholds {
    stable_from: Option<f64>,
    unstable_until: Option<f64>,
    splits: Vec<(usize, Option<f64>, Option<f64>)>,
}

impl Thresholds {
    fn classify(&self, lambda: f64) -> Class {
        if self.stable_from.is_some_and(|l| lambda >= l) {
            return Class::Stable;
        }
        if self.unstable_until.is_some_and(|l| lambda <= l) {
            return Class::Unstable;
        }
        for &(k, s, u) in &self.splits {
            if s.is_some_and(|l| lambda >= l) && u.is_some_and(|l| lambda <= l) {
                return Class::Split(k);
            }
        }
        Class::Spectrum
    }
}

/// Stable side: `lambda >= -margin`. Unstable side: `lambda <= margin`.
fn threshold(c: &[Constraint], search: &FitSearch, tau_span: f64) -> Option<f64> {
    let p = Problem::new(c, search, tau_span, Some(STRICT_GAP));
    p.best_margin().map(|(_, m)| m)
}

fn op_norm(m: DMatrix<f64>) -> f64 {
    m.singular_values().max()
}

struct UnitData {
    coords: Vec<usize>,
    stable: Vec<Constraint>,
    unstable: Vec<Constraint>,
    /// Per splitting rank: stable and unstable constraints.
    splits: Vec<(usize, Vec<Constraint>, Vec<Constraint>)>,
}

fn log_norm_of_product(a: &ScaledMatrix, b: &ScaledMatrix) -> f64 {
    a.log_scale + b.log_scale + op_norm(&a.matrix * b.matrix.transpose()).ln()
}

fn unit_data(
    field: &LinearField,
    coords: Vec<usize>,
    coupled: bool,
    grid: &GridSpec,
    cfg: &IntegratorConfig,
) -> Result<UnitData, DichotomyError> {
    let n = field.dimension();
    let table = sample_matrices(field, grid, cfg)?;
    // ||Phi(t,s)^{-1}|| is the norm of the adjoint transition.
    let adjoint = if n > 1 { Some(sample_matrices(&field.adjoint(), grid, cfg)?) } else { None };
    let mut stable = Vec::new();
    let mut unstable = Vec::new();
    for (r, (s, row)) in table.iter().enumerate() {
        for (c, m) in row.iter().enumerate() {
            let tau = m.t - s;
            let inv = match &adjoint {
                Some(adj) => adj[r].1[c].log_norm(),
                None => -m.log_norm(),
            };
            stable.push(Constraint { t: m.t, s: *s, tau, sigma: *s, ell: m.log_norm() });
            unstable.push(Constraint { t: *s, s: m.t, tau, sigma: m.t, ell: inv });
        }
    }
    let mut splits = Vec::new();
    if coupled && n > 1 {
        let row0 = &table
            .iter()
            .find(|(s, _)| *s == 0.0)
            .ok_or_else(|| DichotomyError::InvalidGrid("grid must contain s = 0".into()))?
            .1;
        let times: Vec<f64> = row0.iter().map(|m| m.t).collect();
        let last = row0.last().expect("nonempty row");
        let svd = last.matrix.clone().svd(false, true);
        let vt = svd.v_t.expect("requested V^T");
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]));
        let basis = |idx: &[usize]| DMatrix::from_fn(n, idx.len(), |r, c| vt[(idx[c], r)]);
        let adj = field.adjoint();
        let prop = |f: &LinearField, x0: &DMatrix<f64>| {
            propagate_scaled(f, 0.0, x0, &times, cfg).map_err(|e| DichotomyError::Integration(e.to_string()))
        };
        for k in 1..n {
            // Range of P(0): the k least expanded directions; kernel: their
            // orthogonal complement.
            let v = basis(&order[..k]);
            let w = basis(&order[k..]);
            let (xv, yv, xw, yw) = (prop(field, &v)?, prop(&adj, &v)?, prop(field, &w)?, prop(&adj, &w)?);
            let mut st = Vec::new();
            let mut un = Vec::new();
            for i in 0..times.len() {
                for j in i..times.len() {
                    let (ti, tj) = (times[i], times[j]);
                    let tau = tj - ti;
                    // Phi(t_j, t_i) P(t_i) = [Phi(t_j,0) V] [Phi(t_i,0)^{-T} V]^T
                    if ti <= grid.s_max {
                        st.push(Constraint { t: tj, s: ti, tau, sigma: ti, ell: log_norm_of_product(&xv[j], &yv[i]) });
                    }
                    un.push(Constraint { t: ti, s: tj, tau, sigma: tj, ell: log_norm_of_product(&xw[i], &yw[j]) });
                }
            }
            splits.push((k, st, un));
        }
    }
    Ok(UnitData { coords, stable, unstable, splits })
}

fn thresholds(u: &UnitData, search: &FitSearch, tau_span: f64, keep: &dyn Fn(&Constraint) -> bool) -> Thresholds {
    let f = |c: &[Constraint]| c.iter().copied().filter(|c| keep(c)).collect::<Vec<_>>();
    Thresholds {
        stable_from: threshold(&f(&u.stable), search, tau_span).map(|m| -m),
        unstable_until: threshold(&f(&u.unstable), search, tau_span),
        splits: u
            .splits
            .iter()
            .map(|(k, st, un)| {
                (*k, threshold(&f(st), search, tau_span).map(|m| -m), threshold(&f(un), search, tau_span))
            })
            .collect(),
    }
}

struct Scan<'a> {
    th: &'a Thresholds,
    tol: f64,
    count: usize,
}

impl Scan<'_> {
    fn class(&mut self, l: f64) -> Class {
        self.count += 1;
        self.th.classify(l)
    }

    /// Boundary of the region where the class equals `c`, between `inside`
    /// (class `c`) and `outside`; returns the bracket midpoint.
    fn boundary(&mut self, c: Class, mut inside: f64, mut outside: f64) -> f64 {
        while (outside - inside).abs() > self.tol {
            let m = 0.5 * (inside + outside);
            if self.class(m) == c {
                inside = m;
            } else {
                outside = m;
            }
        }
        0.5 * (inside + outside)
    }

    fn run(&mut self, range: (f64, f64), step: f64) -> (Vec<SpectralInterval>, bool, bool) {
        let n = ((range.1 - range.0) / step).ceil().max(1.0) as usize;
        let ls: Vec<f64> = (0..=n).map(|k| (range.0 + k as f64 * step).min(range.1)).collect();
        let cs: Vec<Class> = ls.iter().map(|&l| self.class(l)).collect();
        let mut out = Vec::new();
        let left_unbounded = cs[0] == Class::Spectrum;
        let right_unbounded = cs[n] == Class::Spectrum;
        let mut k = 0;
        while k <= n {
            if cs[k] == Class::Spectrum {
                let start = k;
                while k < n && cs[k + 1] == Class::Spectrum {
                    k += 1;
                }
                let lower = if start == 0 { range.0 } else { self.boundary(cs[start - 1], ls[start - 1], ls[start]) };
                let upper = if k == n { range.1 } else { self.boundary(cs[k + 1], ls[k + 1], ls[k]) };
                out.push(SpectralInterval { lower, upper });
            } else if k < n && cs[k + 1] != Class::Spectrum && cs[k + 1] != cs[k] {
                let a = self.boundary(cs[k], ls[k], ls[k + 1]);
                let b = self.boundary(cs[k + 1], ls[k + 1], ls[k]);
                let (lower, upper) = if a <= b { (a, b) } else { (0.5 * (a + b), 0.5 * (a + b)) };
                out.push(SpectralInterval { lower, upper });
            }
            k += 1;
        }
        (out, left_unbounded, right_unbounded)
    }
}

fn merge(mut v: Vec<SpectralInterval>) -> Vec<SpectralInterval> {
    v.sort_by(|a, b| a.lower.total_cmp(&b.lower));
    let mut out: Vec<SpectralInterval> = Vec::new();
    for i in v {
        match out.last_mut() {
            Some(last) if i.lower <= last.upper => last.upper = last.upper.max(i.upper),
            _ => out.push(i),
        }
    }
    out
}

fn bounded_growth(stable: &[Constraint], search: &FitSearch, tau_span: f64) -> Option<BoundedGrowth> {
    let s = FitSearch { alpha_range: (-1e6, f64::INFINITY), ..search.clone() };
    let b: Bound = Problem::new(stable, &s, tau_span, None).solve().ok()?;
    Some(BoundedGrowth { m: b.k, nu: -b.alpha, delta: b.eps })
}

fn sup_norm(field: &LinearField, grid: &GridSpec) -> f64 {
    let horizon = grid.s_max + grid.tau_max;
    let n = (horizon / grid.tau_step.min(0.1)).ceil() as usize;
    (0..=n)
        .map(|k| field.matrix(k as f64 * horizon / n as f64).norm())
        .fold(0.0, f64::max)
}

/// Estimates the nonuniform dichotomy spectrum of `x' = A(t) x` on the half
/// line, from transition matrices on `scan.grid`.
pub fn estimate_spectrum(
    field: &LinearField,
    scan: &ScanConfig,
    cfg: &IntegratorConfig,
) -> Result<SpectrumEstimate, DichotomyError> {
    if !(scan.coarse_step > 0.0 && scan.tol > 0.0) {
        return Err(DichotomyError::InvalidGrid("coarse_step and tol must be positive".into()));
    }
    let n = field.dimension();
    let (units, coupled): (Vec<(LinearField, Vec<usize>)>, bool) = match field.blocks() {
        Some(blocks) => (blocks.iter().map(|b| (field.restrict(b), b.clone())).collect(), false),
        None => (vec![(field.clone(), (0..n).collect())], n > 1),
    };
    let range = match scan.range {
        Some(r) if r.0 < r.1 => r,
        Some(r) => return Err(DichotomyError::InvalidGrid(format!("empty scan range {r:?}"))),
        None => {
            let r = sup_norm(field, &scan.grid) + 1.0;
            (-r.ceil(), r.ceil())
        }
    };
    let span = scan.grid.tau_max;
    let half_span = 0.5 * span;
    let half_s = 0.5 * scan.grid.s_max;
    let mut reasons = Vec::new();
    if coupled {
        reasons.push("coupled system: splitting projector estimated from singular vectors".to_string());
    }
    let mut reports = Vec::new();
    let mut all = Vec::new();
    let (mut left_unbounded, mut right_unbounded) = (false, false);
    let mut count = 0;
    for (unit, coords) in units {
        let data = unit_data(&unit, coords, coupled, &scan.grid, cfg)?;
        let th = thresholds(&data, &scan.search, span, &|_| true);
        let mut sc = Scan { th: &th, tol: scan.tol, count: 0 };
        let (intervals, lu, ru) = sc.run(range, scan.coarse_step);
        count += sc.count;
        let th_half = thresholds(&data, &scan.search, half_span, &|c| c.tau <= half_span && c.s.min(c.t) <= half_s);
        let mut sc = Scan { th: &th_half, tol: scan.tol, count: 0 };
        let (half_intervals, _, _) = sc.run(range, scan.coarse_step);
        count += sc.count;
        if half_intervals.len() != intervals.len() {
            reasons.push(format!("block {:?}: interval count changes on the half-horizon grid", data.coords));
        } else {
            for (a, b) in intervals.iter().zip(&half_intervals) {
                let drift = (a.lower - b.lower).abs().max((a.upper - b.upper).abs());
                if drift > scan.horizon_drift_tol {
                    reasons.push(format!(
                        "block {:?}: endpoints move by {drift:.3} on the half-horizon grid",
                        data.coords
                    ));
                }
            }
        }
        left_unbounded |= lu;
        right_unbounded |= ru;
        all.extend(intervals.iter().copied());
        reports.push(UnitReport {
            coordinates: data.coords.clone(),
            stable_from: th.stable_from,
            unstable_until: th.unstable_until,
            splittings: th.splits.clone(),
            intervals,
            bounded_growth: bounded_growth(&data.stable, &scan.search, span),
        });
    }
    let intervals = merge(all);
    if intervals.len() > n {
        reasons.push(format!("{} intervals for dimension {n}", intervals.len()));
    }
    Ok(SpectrumEstimate {
        intervals,
        left_unbounded,
        right_unbounded,
        units: reports,
        confidence: if reasons.is_empty() { Confidence::High } else { Confidence::Low { reasons } },
        scan: ScanMeta { range, coarse_step: scan.coarse_step, tol: scan.tol, grid: scan.grid.clone(), classifications: count },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merge_overlapping() {
        let v = vec![
            SpectralInterval { lower: 1.0, upper: 2.0 },
            SpectralInterval { lower: -1.0, upper: 0.0 },
            SpectralInterval { lower: 1.5, upper: 3.0 },
        ];
        let m = merge(v);
        assert_eq!(m.len(), 2);
        assert_eq!(m[1], SpectralInterval { lower: 1.0, upper: 3.0 });
    }

    #[test]
    fn hidden_interval_between_scan_points() {
        let th = Thresholds { stable_from: Some(0.0301), unstable_until: Some(0.0299), splits: vec![] };
        let mut sc = Scan { th: &th, tol: 1e-4, count: 0 };
        let (iv, l, r) = sc.run((-1.0, 1.0), 0.1);
        assert!(!l && !r);
        assert_eq!(iv.len(), 1);
        assert!((iv[0].midpoint() - 0.03).abs() < 1e-4);
        assert!(iv[0].width() <= 2e-4);
    }
}
