//! The four injectivity notions for families `F_t`, `t >= 0`: partial,
//! pseudo partial, eventual and pseudo eventual.
//!
//! `Holds` is only ever produced by an argument valid for all `t` (an analytic
//! decider or a polynomial inverse with symbolic time dependence). Bounded
//! search yields `SupportedBySearch`, and `Falsified` requires a witness that
//! re-verifies: an analytic argument or an exact collision that holds for every `t`.

mod family;
mod search;

pub use family::{builtin_family, first_root_after, FamilyParams, ParamFamily, BUILTIN_FAMILIES};
pub use search::{
    implication_audit, injective_at, test_injectivity, verify_witness, AuditReport, Exactness, InjectiveAt,
    SearchConfig, SearchStats,
};

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Notion {
    Partial,
    PseudoPartial,
    Eventual,
    PseudoEventual,
}

impl Notion {
    pub const ALL: [Notion; 4] = [Notion::Partial, Notion::PseudoPartial, Notion::Eventual, Notion::PseudoEventual];

    pub fn name(self) -> &'static str {
        match self {
            Notion::Partial => "partial",
            Notion::PseudoPartial => "pseudo_partial",
            Notion::Eventual => "eventual",
            Notion::PseudoEventual => "pseudo_eventual",
        }
    }
}

impl std::str::FromStr for Notion {
    type Err = InjectivityError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Notion::ALL
            .into_iter()
            .find(|n| n.name() == s.replace('-', "_"))
            .ok_or_else(|| InjectivityError::UnknownNotion(s.to_string()))
    }
}

/// `F_t(x) = F_t(y)` with `x != y`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollisionWitness {
    pub t: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Exact coordinates as `p/q` strings when the points are rational.
    pub x_exact: Option<Vec<String>>,
    pub y_exact: Option<Vec<String>>,
    /// The images agree as polynomials in the time parameters, so the
    /// collision holds at every `t`.
    pub uniform_in_t: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NotionWitness {
    pub argument: String,
    pub collisions: Vec<CollisionWitness>,
    /// `(tau, t_tau)` with `F_{t_tau}` not injective.
    pub roots: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum Outcome {
    Holds { argument: String },
    Falsified { witness: NotionWitness },
    SupportedBySearch { stats: SearchStats },
    Inconclusive { stats: SearchStats, reason: String },
}

impl Outcome {
    pub fn label(&self) -> &'static str {
        match self {
            Outcome::Holds { .. } => "holds",
            Outcome::Falsified { .. } => "falsified",
            Outcome::SupportedBySearch { .. } => "supported_by_search",
            Outcome::Inconclusive { .. } => "inconclusive",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InjectivityVerdict {
    pub family: String,
    pub notion: Notion,
    pub outcome: Outcome,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum InjectivityError {
    #[error("unknown family `{0}`")]
    UnknownFamily(String),
    #[error("unknown notion `{0}`")]
    UnknownNotion(String),
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
    #[error("invalid search configuration: {0}")]
    InvalidConfig(String),
}
