//! Nonuniform exponential dichotomies estimated from sampled transition
//! matrices: certificate fitting, roughness and extension arithmetic,
//! spectrum scans, stability envelopes for nonlinear trajectories and checks
//! of the comparison-function classes.

mod comparison;
mod envelope;
mod fit;
mod grid;
mod oscillating;
mod rough;
mod spectrum;

pub use comparison::{
    validate_comparison_function, ComparisonCheck, ComparisonFunctionSample, ComparisonViolation, FunctionClass,
};
pub use envelope::{
    envelope_search, fit_gnuas_envelope, EnvelopeFit, EnvelopeOutcome, EnvelopeSample, NonDecayWitness,
};
pub use fit::{
    check_uniform_fit, fit_stability_certificate, validate_certificate, Bound, Constraint, DichotomyCertificate,
    FitReport, FitSearch, Infeasible, Projector, ProjectorKind, STRICT_GAP,
};
pub use grid::{GridSpec, NormSample, NormSampleGrid};
pub use oscillating::{LowerBoundWitness, OscillatingScalar};
pub use rough::{extend_certificate, roughness_predict, Extension};
pub use spectrum::{
    estimate_spectrum, BoundedGrowth, Confidence, ScanConfig, ScanMeta, SpectralInterval, SpectrumEstimate,
    UnitReport,
};

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum DichotomyError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("integration failed: {0}")]
    Integration(String),
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
}
