//! Exact algebra for parametrized polynomial maps over `Q(i)`.
//!
//! Time dependence is carried by parameter symbols (for instance `s` bound to
//! `e^{-t}`), so identities such as `M o N = id` or `(JH)^3 = 0` are decided by
//! exact structural equality rather than floating point.

mod bound;
pub mod catalog;
mod gaussian;
mod inverse;
mod map;
mod poly;
pub mod ratio_serde;

pub use bound::{cubic_bound_constant, CubicBound};
pub(crate) use bound::unit_sphere_point;
pub use gaussian::{rat_from_f64, GaussianRational};
pub use inverse::{default_degree_cap, formal_inverse};
pub use map::{BindingKind, CompiledMap, Nilpotency, ParamBinding, ParamPolyMap, PolyMatrix, ShiftConjugate};
pub use poly::{Homogeneity, Monomial, Poly, Symbol};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolyError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("conflicting bindings for symbol `{0}`")]
    ConflictingBinding(String),
    #[error("unbound parameter symbol `{0}`")]
    UnboundSymbol(String),
    #[error("invalid binding: {0}")]
    InvalidBinding(String),
    #[error("map is not of the form lambda X + H: {0}")]
    NotLambdaPlusH(String),
    #[error("formal inverse did not stabilize within degree cap {cap}: {reason}")]
    NoStabilization { cap: u32, reason: String },
    #[error("map is not zero-or-homogeneous of degree 3")]
    NotCubic,
    #[error("terms carry different time factors; a single shared a(t) is required")]
    MixedTimeFactors,
    #[error("complex coefficients; realify the map first")]
    ComplexCoefficients,
    #[error("matrix is not square")]
    NotSquare,
}
