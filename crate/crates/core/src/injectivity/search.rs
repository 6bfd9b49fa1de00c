use std::collections::HashMap;

use num_rational::BigRational;
use num_traits::{ToPrimitive};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::polyalg::{GaussianRational, Poly};

use super::{CollisionWitness, InjectivityError, InjectivityVerdict, Notion, NotionWitness, Outcome, ParamFamily};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Exactness {
    /// Rational inputs and exact polynomial images where the family is polynomial.
    ExactRational,
    /// Relative equality tolerance.
    Float { tol: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    pub tau_grid: Vec<f64>,
    pub horizon: f64,
    pub t_step: f64,
    /// Number of sampled pairs `(x, y)`.
    pub pairs: usize,
    /// Pair coordinates are uniform on `[-radius, radius]`...
    pub radius: f64,
    /// ...snapped to multiples of `1 / snap` (a power of two keeps them exact).
    pub snap: u32,
    /// Budget for the exact lattice collision search.
    pub lattice_points: usize,
    pub mode: Exactness,
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            tau_grid: (0..=10).map(f64::from).collect(),
            horizon: 100.0,
            t_step: 0.1,
            pairs: 200,
            radius: 10.0,
            snap: 64,
            lattice_points: 4096,
            mode: Exactness::ExactRational,
            seed: 0,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<(), InjectivityError> {
        let max_tau = self.tau_grid.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if self.tau_grid.is_empty() || self.tau_grid.iter().any(|t| !(*t >= 0.0)) {
            return Err(InjectivityError::InvalidConfig("tau grid must be nonempty and nonnegative".into()));
        }
        if !(self.horizon > max_tau) {
            return Err(InjectivityError::InvalidConfig(format!("horizon {} must exceed max tau {max_tau}", self.horizon)));
        }
        if !(self.t_step > 0.0) || self.pairs == 0 || !(self.radius > 0.0) || self.snap == 0 {
            return Err(InjectivityError::InvalidConfig("t_step, pairs, radius and snap must be positive".into()));
        }
        if let Exactness::Float { tol } = self.mode {
            if !(tol > 0.0) {
                return Err(InjectivityError::InvalidConfig("float tolerance must be positive".into()));
            }
        }
        Ok(())
    }

    fn tol(&self) -> f64 {
        match self.mode {
            Exactness::Float { tol } => tol,
            Exactness::ExactRational => 1e-10,
        }
    }

    fn t_values(&self, tau: f64) -> Vec<f64> {
        let n = ((self.horizon - tau) / self.t_step + 1e-9).floor().max(0.0) as usize;
        (0..=n).map(|k| tau + k as f64 * self.t_step).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "result", rename_all = "snake_case")]
pub enum InjectiveAt {
    Injective { certificate: String },
    Collision(CollisionWitness),
    Inconclusive { lattice_points: usize, pairs: usize },
}

impl InjectiveAt {
    pub fn is_injective(&self) -> bool {
        matches!(self, InjectiveAt::Injective { .. })
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SearchStats {
    pub tau_points: usize,
    pub t_points: usize,
    pub pairs: usize,
    pub exact: bool,
    /// Smallest grid `tau` from which the sampled property held.
    pub tau_found: Option<f64>,
}

pub(crate) fn rat_strings(v: &[BigRational]) -> Vec<String> {
    v.iter().map(crate::polyalg::ratio_serde::to_string).collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn float_collide(f: &ParamFamily, t: f64, x: &[f64], y: &[f64], tol: f64) -> bool {
    let (fx, fy) = (f.eval(t, x), f.eval(t, y));
    let d: Vec<f64> = fx.iter().zip(&fy).map(|(a, b)| a - b).collect();
    norm(&d) <= tol * norm(&fx).max(norm(&fy)).max(1.0)
}

fn exact_image(f: &ParamFamily, x: &[BigRational]) -> Option<Vec<Poly>> {
    let g: Vec<GaussianRational> = x.iter().cloned().map(GaussianRational::real).collect();
    f.exact_map().map(|m| m.eval_exact(&g))
}

fn witness(t: f64, x: &[BigRational], y: &[BigRational], uniform: bool) -> CollisionWitness {
    let fl = |v: &[BigRational]| v.iter().map(|r| r.to_f64().unwrap_or(f64::NAN)).collect();
    CollisionWitness {
        t,
        x: fl(x),
        y: fl(y),
        x_exact: Some(rat_strings(x)),
        y_exact: Some(rat_strings(y)),
        uniform_in_t: uniform,
    }
}

/// Small rationals `p / q` (`q` in 1, 2, 4) within `radius`, simplest first.
fn lattice_values(radius: f64, count: usize) -> Vec<BigRational> {
    let mut v: Vec<(u32, i64, i64)> = Vec::new();
    for q in [1i64, 2, 4] {
        let pmax = (radius * q as f64).floor() as i64;
        for p in -pmax..=pmax {
            if q > 1 && p % 2 == 0 {
                continue;
            }
            v.push((q as u32, p, q));
        }
    }
    v.sort_by_key(|&(q, p, _)| (q, p.unsigned_abs(), p < 0));
    v.into_iter().take(count).map(|(_, p, q)| BigRational::new(p.into(), q.into())).collect()
}

/// Exact collision among lattice points whose images agree for every `t`.
fn lattice_collision(f: &ParamFamily, cfg: &SearchConfig) -> Option<(Vec<BigRational>, Vec<BigRational>)> {
    f.exact_map()?;
    let n = f.dimension();
    let per = ((cfg.lattice_points as f64).powf(1.0 / n as f64).floor() as usize).clamp(2, 41);
    let vals = lattice_values(cfg.radius, per);
    let m = vals.len();
    let mut idx: Vec<Vec<usize>> = Vec::new();
    let mut cur = vec![0usize; n];
    loop {
        idx.push(cur.clone());
        let mut k = 0;
        while k < n {
            cur[k] += 1;
            if cur[k] < m {
                break;
            }
            cur[k] = 0;
            k += 1;
        }
        if k == n {
            break;
        }
    }
    idx.sort_by_key(|i| (i.iter().sum::<usize>(), i.clone()));
    let points: Vec<Vec<BigRational>> = idx.into_iter().map(|i| i.into_iter().map(|k| vals[k].clone()).collect()).collect();
    let images: Vec<Vec<Poly>> = points.par_iter().map(|p| exact_image(f, p).expect("exact map")).collect();
    let mut seen: HashMap<&Vec<Poly>, usize> = HashMap::new();
    for (i, img) in images.iter().enumerate() {
        if let Some(&j) = seen.get(img) {
            return Some((points[j].clone(), points[i].clone()));
        }
        seen.insert(img, i);
    }
    None
}

fn sample_pairs(n: usize, cfg: &SearchConfig) -> Vec<(Vec<BigRational>, Vec<BigRational>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let q = i64::from(cfg.snap);
    let pmax = (cfg.radius * q as f64).floor() as i64;
    let draw = |rng: &mut ChaCha8Rng| -> Vec<BigRational> {
        (0..n).map(|_| BigRational::new(rng.gen_range(-pmax..=pmax).into(), q.into())).collect()
    };
    let mut out = Vec::with_capacity(cfg.pairs);
    while out.len() < cfg.pairs {
        let (x, y) = (draw(&mut rng), draw(&mut rng));
        if x != y {
            out.push((x, y));
        }
    }
    out
}

fn to_f64(v: &[BigRational]) -> Vec<f64> {
    v.iter().map(|r| r.to_f64().unwrap_or(f64::NAN)).collect()
}

/// Injectivity of the single map `F_t`: analytic decider, then polynomial
/// inverse, then exact lattice search, then randomized float search.
pub fn injective_at(f: &ParamFamily, t: f64, cfg: &SearchConfig) -> InjectiveAt {
    if let Some(d) = f.analytic_at(t) {
        return d;
    }
    if f.symbolic_inverse().is_some() {
        return InjectiveAt::Injective { certificate: "polynomial inverse".into() };
    }
    let mut lattice = 0;
    if f.exact_map().is_some() {
        if let Some((x, y)) = lattice_collision(f, cfg) {
            return InjectiveAt::Collision(witness(t, &x, &y, true));
        }
        lattice = cfg.lattice_points;
    }
    let pairs = sample_pairs(f.dimension(), cfg);
    let hit = pairs.par_iter().find_first(|(x, y)| float_collide(f, t, &to_f64(x), &to_f64(y), cfg.tol()));
    match hit {
        Some((x, y)) => InjectiveAt::Collision(witness(t, x, y, false)),
        None => InjectiveAt::Inconclusive { lattice_points: lattice, pairs: pairs.len() },
    }
}

/// Re-evaluates the family at the witness points.
pub fn verify_witness(f: &ParamFamily, w: &CollisionWitness, cfg: &SearchConfig) -> bool {
    if w.x == w.y {
        return false;
    }
    if let (Some(xe), Some(ye), Some(_)) = (&w.x_exact, &w.y_exact, f.exact_map()) {
        let parse = |v: &[String]| v.iter().map(|s| s.parse::<BigRational>().ok()).collect::<Option<Vec<_>>>();
        if let (Some(x), Some(y)) = (parse(xe), parse(ye)) {
            if x == y {
                return false;
            }
            if w.uniform_in_t || matches!(cfg.mode, Exactness::ExactRational) {
                let same = exact_image(f, &x) == exact_image(f, &y);
                if w.uniform_in_t || same {
                    return same;
                }
            }
        }
    }
    float_collide(f, w.t, &w.x, &w.y, cfg.tol())
}

fn stats(cfg: &SearchConfig, pairs: usize, exact: bool) -> SearchStats {
    SearchStats {
        tau_points: cfg.tau_grid.len(),
        t_points: cfg.tau_grid.iter().map(|&tau| cfg.t_values(tau).len()).sum(),
        pairs,
        exact,
        tau_found: None,
    }
}

fn search(f: &ParamFamily, notion: Notion, cfg: &SearchConfig) -> Outcome {
    let exact = f.exact_map().is_some() && matches!(cfg.mode, Exactness::ExactRational);
    match notion {
        Notion::Partial | Notion::Eventual => {
            let mut st = stats(cfg, 0, exact);
            let mut taus = cfg.tau_grid.clone();
            taus.sort_by(f64::total_cmp);
            let per_tau: Vec<(bool, bool, Option<CollisionWitness>)> = taus
                .par_iter()
                .map(|&tau| {
                    let res: Vec<InjectiveAt> = cfg.t_values(tau).iter().map(|&t| injective_at(f, t, cfg)).collect();
                    let collision = res.iter().find_map(|r| match r {
                        InjectiveAt::Collision(w) => Some(w.clone()),
                        _ => None,
                    });
                    (res.iter().any(InjectiveAt::is_injective), res.iter().all(InjectiveAt::is_injective), collision)
                })
                .collect();
            if let Some(w) = per_tau.iter().find_map(|p| p.2.clone().filter(|w| w.uniform_in_t)) {
                return Outcome::Falsified {
                    witness: NotionWitness {
                        argument: "the images agree for every t, so no F_t is injective".into(),
                        collisions: vec![w],
                        roots: vec![],
                    },
                };
            }
            let ok = match notion {
                Notion::Partial => per_tau.iter().all(|p| p.0),
                _ => {
                    st.tau_found = taus.iter().zip(&per_tau).find(|(_, p)| p.1).map(|(t, _)| *t);
                    st.tau_found.is_some()
                }
            };
            if ok {
                Outcome::SupportedBySearch { stats: st }
            } else {
                let reason = match per_tau.iter().find_map(|p| p.2.as_ref()) {
                    Some(w) => format!("collision at t = {} on the sampled window; not a proof beyond it", w.t),
                    None => "no single-t decision was possible on the sampled window".into(),
                };
                Outcome::Inconclusive { stats: st, reason }
            }
        }
        Notion::PseudoPartial | Notion::PseudoEventual => {
            let pairs = sample_pairs(f.dimension(), cfg);
            let st = stats(cfg, pairs.len(), exact);
            if exact {
                // Distinct polynomial images in s = e^{-t} agree for finitely many t only.
                let hit = pairs.par_iter().find_first(|(x, y)| exact_image(f, x) == exact_image(f, y));
                return match hit {
                    Some((x, y)) => Outcome::Falsified {
                        witness: NotionWitness {
                            argument: "the images agree for every t".into(),
                            collisions: vec![witness(0.0, x, y, true)],
                            roots: vec![],
                        },
                    },
                    None => Outcome::SupportedBySearch { stats: st },
                };
            }
            let tol = cfg.tol();
            let ok = pairs.par_iter().all(|(x, y)| {
                let (xf, yf) = (to_f64(x), to_f64(y));
                cfg.tau_grid.iter().all(|&tau| {
                    let ts = cfg.t_values(tau);
                    match notion {
                        Notion::PseudoPartial => ts.iter().any(|&t| !float_collide(f, t, &xf, &yf, tol)),
                        _ => ts.iter().all(|&t| !float_collide(f, t, &xf, &yf, tol)) || {
                            // some later tau may still work
                            cfg.tau_grid.iter().any(|&t2| t2 > tau && cfg.t_values(t2).iter().all(|&t| !float_collide(f, t, &xf, &yf, tol)))
                        },
                    }
                })
            });
            if ok {
                Outcome::SupportedBySearch { stats: st }
            } else {
                Outcome::Inconclusive { stats: st, reason: "a sampled pair was not separated on the window".into() }
            }
        }
    }
}

/// Evaluates `notion` for `f`: notion-level decider, polynomial inverse,
/// exact uniform collision, then bounded search.
pub fn test_injectivity(f: &ParamFamily, notion: Notion, cfg: &SearchConfig) -> Result<InjectivityVerdict, InjectivityError> {
    cfg.validate()?;
    let verdict = |outcome| InjectivityVerdict { family: f.id().to_string(), notion, outcome, seed: cfg.seed };
    if let Some(o) = f.decide_notion(notion, cfg) {
        return Ok(verdict(o));
    }
    if f.symbolic_inverse().is_some() {
        return Ok(verdict(Outcome::Holds {
            argument: "F_t has a polynomial inverse with coefficients polynomial in the time parameters, so every F_t is injective".into(),
        }));
    }
    if let Some((x, y)) = lattice_collision(f, cfg) {
        return Ok(verdict(Outcome::Falsified {
            witness: NotionWitness {
                argument: "exact lattice collision whose images agree for every t".into(),
                collisions: vec![witness(0.0, &x, &y, true)],
                roots: vec![],
            },
        }));
    }
    Ok(verdict(search(f, notion, cfg)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub consistent: bool,
    pub violations: Vec<String>,
}

/// Checks `partial => pseudo_partial`, `eventual => pseudo_eventual` and
/// `eventual => partial` at the level of outcomes.
pub fn implication_audit(verdicts: &[InjectivityVerdict]) -> AuditReport {
    const RULES: [(Notion, Notion); 3] = [
        (Notion::Partial, Notion::PseudoPartial),
        (Notion::Eventual, Notion::PseudoEventual),
        (Notion::Eventual, Notion::Partial),
    ];
    let holds = |n: Notion| verdicts.iter().any(|v| v.notion == n && matches!(v.outcome, Outcome::Holds { .. }));
    let falsified = |n: Notion| verdicts.iter().any(|v| v.notion == n && matches!(v.outcome, Outcome::Falsified { .. }));
    let violations: Vec<String> = RULES
        .iter()
        .filter(|(a, b)| holds(*a) && falsified(*b))
        .map(|(a, b)| format!("{} holds but {} is falsified", a.name(), b.name()))
        .collect();
    AuditReport { consistent: violations.is_empty(), violations }
}
