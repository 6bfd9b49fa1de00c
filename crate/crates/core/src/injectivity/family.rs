use std::fmt;
use std::sync::{Arc, OnceLock};

use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::polyalg::{catalog, formal_inverse, ParamPolyMap};

use super::search::{rat_strings, InjectiveAt, SearchConfig};
use super::{CollisionWitness, InjectivityError, Notion, NotionWitness, Outcome};

type Evaluator = dyn Fn(f64, &[f64]) -> Vec<f64> + Send + Sync;
type AtDecider = dyn Fn(f64) -> Option<InjectiveAt> + Send + Sync;
type NotionDecider = dyn Fn(Notion, &SearchConfig) -> Option<Outcome> + Send + Sync;

/// A family of maps `x -> F_t(x)`, `t >= 0`.
#[derive(Clone)]
pub struct ParamFamily {
    id: String,
    dimension: usize,
    domain: String,
    eval: Arc<Evaluator>,
    exact: Option<ParamPolyMap>,
    analytic_at: Option<Arc<AtDecider>>,
    notion_decider: Option<Arc<NotionDecider>>,
    inverse: Arc<OnceLock<Option<ParamPolyMap>>>,
}

impl fmt::Debug for ParamFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ParamFamily")
            .field("id", &self.id)
            .field("dimension", &self.dimension)
            .field("domain", &self.domain)
            .field("exact", &self.exact.is_some())
            .finish()
    }
}

impl ParamFamily {
    pub fn new(
        id: impl Into<String>,
        dimension: usize,
        eval: impl Fn(f64, &[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        Self {
            id: id.into(),
            dimension,
            domain: format!("R^{dimension}"),
            eval: Arc::new(eval),
            exact: None,
            analytic_at: None,
            notion_decider: None,
            inverse: Arc::new(OnceLock::new()),
        }
    }

    /// Family given by an exact polynomial map with symbolic time dependence.
    pub fn polynomial(id: impl Into<String>, map: ParamPolyMap) -> Self {
        let compiled = map.compiled();
        let n = map.dimension();
        let mut f = Self::new(id, n, move |t, x| {
            let mut out = vec![0.0; x.len()];
            compiled.eval_real(t, x, &mut out);
            out
        });
        f.exact = Some(map);
        f
    }

    /// Decider treated as ground truth for single `t`; `None` defers to search.
    pub fn with_analytic_at(mut self, d: impl Fn(f64) -> Option<InjectiveAt> + Send + Sync + 'static) -> Self {
        self.analytic_at = Some(Arc::new(d));
        self
    }

    /// Decider for whole notions; `None` defers to search.
    pub fn with_notion_decider(
        mut self,
        d: impl Fn(Notion, &SearchConfig) -> Option<Outcome> + Send + Sync + 'static,
    ) -> Self {
        self.notion_decider = Some(Arc::new(d));
        self
    }

    pub fn with_domain(mut self, domain: impl Into<String>) -> Self {
        self.domain = domain.into();
        self
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn domain(&self) -> &str {
        &self.domain
    }

    pub fn eval(&self, t: f64, x: &[f64]) -> Vec<f64> {
        (self.eval)(t, x)
    }

    pub fn exact_map(&self) -> Option<&ParamPolyMap> {
        self.exact.as_ref()
    }

    pub(crate) fn analytic_at(&self, t: f64) -> Option<InjectiveAt> {
        self.analytic_at.as_ref().and_then(|d| d(t))
    }

    pub(crate) fn decide_notion(&self, notion: Notion, cfg: &SearchConfig) -> Option<Outcome> {
        self.notion_decider.as_ref().and_then(|d| d(notion, cfg))
    }

    /// Polynomial inverse valid for every `t` (computed once).
    pub fn symbolic_inverse(&self) -> Option<&ParamPolyMap> {
        self.inverse
            .get_or_init(|| self.exact.as_ref().and_then(|m| formal_inverse(m, None).ok()))
            .as_ref()
    }
}

/// Parameters of the built-in families.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FamilyParams {
    pub lambda0: f64,
    pub a: f64,
    /// Linear coefficient of the cubic nilpotent family (exact rational).
    #[serde(with = "crate::polyalg::ratio_serde")]
    pub lambda: BigRational,
}

impl Default for FamilyParams {
    fn default() -> Self {
        Self { lambda0: -4.0, a: -1.0, lambda: -BigRational::one() }
    }
}

pub const BUILTIN_FAMILIES: [&str; 5] = ["example_3_2", "example_3_3", "example_3_4", "example_4_2", "noninjective_demo"];

fn threshold_family() -> ParamFamily {
    // F_t(x) = 0 for t < x, t x otherwise.
    let f = |t: f64, x: f64| if t < x { 0.0 } else { t * x };
    ParamFamily::new("example_3_2", 1, move |t, x| vec![f(t, x[0])])
        .with_analytic_at(move |t| {
            let (x, y) = ((t.floor() + 1.0), (t.floor() + 2.0));
            Some(InjectiveAt::Collision(CollisionWitness::exact_scalar(t, x, y, false)))
        })
        .with_notion_decider(move |notion, cfg| {
            let witnesses = || {
                cfg.tau_grid
                    .iter()
                    .map(|&tau| CollisionWitness::exact_scalar(tau, tau.floor() + 1.0, tau.floor() + 2.0, false))
                    .collect()
            };
            Some(match notion {
                Notion::Partial | Notion::Eventual => Outcome::Falsified {
                    witness: NotionWitness {
                        argument: "for every t, any x, y > t satisfy F_t(x) = F_t(y) = 0".into(),
                        collisions: witnesses(),
                        roots: vec![],
                    },
                },
                Notion::PseudoPartial | Notion::PseudoEventual => Outcome::Holds {
                    argument: "for t > max{x, y, 0} both points use the branch t x, and t x = t y forces x = y".into(),
                },
            })
        })
}

/// `t_tau`: least root of `c` in `(tau, horizon]`, located on a `step` grid and
/// refined by bisection.
pub fn first_root_after(c: &dyn Fn(f64) -> f64, tau: f64, step: f64, horizon: f64) -> Option<f64> {
    let mut a = tau;
    let mut ca = c(a);
    while a < horizon {
        let b = (a + step).min(horizon);
        let cb = c(b);
        if cb == 0.0 && b > tau {
            return Some(b);
        }
        if ca != 0.0 && ca.signum() != cb.signum() {
            let (mut lo, mut hi) = (a, b);
            for _ in 0..200 {
                let m = 0.5 * (lo + hi);
                if m <= lo || m >= hi {
                    break;
                }
                if c(m).signum() == ca.signum() {
                    lo = m;
                } else {
                    hi = m;
                }
            }
            return Some(0.5 * (lo + hi));
        }
        a = b;
        ca = cb;
    }
    None
}

fn oscillating_family(lambda0: f64, a: f64) -> Result<ParamFamily, InjectivityError> {
    if !(lambda0 < a && a < 0.0) {
        return Err(InjectivityError::InvalidParameters(format!("need lambda0 < a < 0, got lambda0={lambda0}, a={a}")));
    }
    let c = move |t: f64| lambda0 + a * t * t.sin();
    let near_root = move |t: f64| c(t).abs() <= 1e-12 * (lambda0.abs() + a.abs() * t.abs());
    let fam = ParamFamily::new("example_3_4", 1, move |t, x| vec![c(t) * x[0]])
        .with_analytic_at(move |t| {
            Some(if near_root(t) {
                InjectiveAt::Collision(CollisionWitness::exact_scalar(t, 0.0, 1.0, false))
            } else {
                InjectiveAt::Injective { certificate: "nonzero coefficient lambda0 + a t sin t".into() }
            })
        })
        .with_notion_decider(move |notion, cfg| {
            let roots: Vec<(f64, f64)> = cfg
                .tau_grid
                .iter()
                .filter_map(|&tau| {
                    let limit = tau.max(lambda0 / a) + 4.0 * std::f64::consts::PI + 1.0;
                    first_root_after(&c, tau, cfg.t_step.min(0.1), limit).map(|r| (tau, r))
                })
                .collect();
            Some(match notion {
                Notion::Partial | Notion::PseudoPartial => Outcome::Holds {
                    argument: "lambda0 + a t sin t is analytic and not identically zero, so its zeros are isolated and every [tau, inf) contains t with F_t injective".into(),
                },
                Notion::Eventual | Notion::PseudoEventual => Outcome::Falsified {
                    witness: NotionWitness {
                        argument: format!(
                            "lambda0 + a t sin t equals lambda0 < 0 at t = 2k pi and lambda0 + |a| t at t = 2k pi + 3 pi / 2, so it vanishes in every such window once 2k pi > {:.4}; F_t is identically zero at each root",
                            lambda0.abs() / a.abs()
                        ),
                        collisions: roots.iter().map(|&(_, r)| CollisionWitness::exact_scalar(r, 0.0, 1.0, false)).collect(),
                        roots,
                    },
                },
            })
        });
    Ok(fam)
}

/// One of [`BUILTIN_FAMILIES`].
pub fn builtin_family(id: &str, params: &FamilyParams) -> Result<ParamFamily, InjectivityError> {
    match id {
        "example_3_2" => Ok(threshold_family().with_domain("R, t >= 0")),
        "example_3_3" => Ok(ParamFamily::polynomial("example_3_3", catalog::eventual_cubic_map())),
        "example_3_4" => oscillating_family(params.lambda0, params.a),
        "example_4_2" => {
            if !params.lambda.is_negative() {
                return Err(InjectivityError::InvalidParameters(format!("lambda must be negative, got {}", params.lambda)));
            }
            Ok(ParamFamily::polynomial("example_4_2", catalog::cubic_nilpotent_map(params.lambda.clone())))
        }
        "noninjective_demo" => Ok(ParamFamily::polynomial("noninjective_demo", catalog::noninjective_cubic())),
        other => Err(InjectivityError::UnknownFamily(other.to_string())),
    }
}

impl CollisionWitness {
    /// Scalar witness at dyadic points (exactly representable).
    pub(crate) fn exact_scalar(t: f64, x: f64, y: f64, uniform_in_t: bool) -> Self {
        let r = |v: f64| BigRational::from_float(v).unwrap_or_else(BigRational::zero);
        CollisionWitness {
            t,
            x: vec![x],
            y: vec![y],
            x_exact: Some(rat_strings(&[r(x)])),
            y_exact: Some(rat_strings(&[r(y)])),
            uniform_in_t,
        }
    }
}
