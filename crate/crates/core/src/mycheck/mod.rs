//! End-to-end checks for cubic nilpotent families `M_t = lambda X + H`:
//! hypotheses (G1), (G2), (G3*) and conditions (i)-(iv), empirical global
//! stability of the flow, the constant-solution mechanic for non-injective
//! maps, and reproductions of the worked examples.

mod condition;
mod gnuas;
mod hypotheses;
mod reproduce;

pub use condition::{condition_iv_threshold, jh_norm, ConditionIvCertificate, ThresholdConfig, ThresholdMethod};
pub use gnuas::{
    constant_solution_check, cube_ic_grid, verify_gnuas, ConstantCheckConfig, ConstantSolutionReport, GnuasConfig,
    GnuasReport, IcGrid, TrajectorySummary,
};
pub use hypotheses::{check_hypotheses, default_omega_suite, CheckConfig, CheckEntry, CheckId, CheckStatus, HypothesisReport};
pub use reproduce::{reproduce_example, ExampleCheck, ExampleReport, EXAMPLE_IDS};

use num_rational::BigRational;

use crate::polyalg::{catalog, BindingKind, ParamPolyMap};

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum MyCheckError {
    #[error("map is not of the form lambda X + H: {0}")]
    NotLambdaPlusH(String),
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
    #[error("no threshold found within the horizon: {0}")]
    NoThreshold(String),
    #[error("unknown example `{0}`")]
    UnknownExample(String),
    #[error("{0}")]
    Failed(String),
}

/// `lambda` when `map` is exactly `(lambda x + s y^3, lambda y + s (x+z)^3,
/// lambda z - s y^3)` with `s = e^{-t}`.
pub fn cubic_nilpotent_lambda(map: &ParamPolyMap) -> Option<BigRational> {
    let lambda = map.linear_coefficient()?.clone();
    let s = catalog::decay_symbol();
    let decays = matches!(map.binding(&s).map(|b| &b.kind), Some(BindingKind::ExpDecay { rate }) if *rate == 1.0);
    (decays && map.bindings().count() == 1 && *map == catalog::cubic_nilpotent_map(lambda.clone())).then_some(lambda)
}
