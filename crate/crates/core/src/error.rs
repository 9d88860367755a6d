use thiserror::Error;

use crate::phase_space::PhaseVector;

/// Errors raised by the library.
///
/// Check failures (an axiom that does not hold on a sample) are report content
/// and never surface here.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("dimension mismatch: expected half-dimension {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("q block has length {q} but p block has length {p}")]
    BlockMismatch { q: usize, p: usize },

    #[error("half-dimension must be at least 1")]
    ZeroDimension,

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("undefined extended-real expression (+inf) - (+inf)")]
    InfiniteDifference,

    #[error("not a likelihood value: {0}")]
    NotLikelihoodValue(f64),

    #[error("empty effective domain in bounds")]
    EmptyDomain,

    #[error("base point outside effective domain")]
    OutsideDomain,

    #[error("no closed form for {0}")]
    NoClosedForm(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("not a likelihood: axiom ({axiom}) fails, {witness}")]
    NotLikelihood { axiom: &'static str, witness: String },

    #[error("not a bipotential: {0}")]
    NotBipotential(String),

    #[error("bipotential equivalence violated: {0}")]
    EquivalenceViolated(String),

    #[error("inner solve did not converge in {iterations} iterations (last residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("gap residual stalled at {residual:e} (best gap {eta:?})")]
    ResidualStalled { eta: PhaseVector, residual: f64 },

    #[error("not a bipotential along iterates: residual {0:e}")]
    NotBipotentialAlongIterates(f64),

    #[error("step {step}: {source}")]
    Step {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("grid or state mismatch: {0}")]
    GridMismatch(String),

    #[error("perturbation violates the initial condition: |c'(0) - c(0)| = {0:e}")]
    InitialConditionViolated(f64),

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: String,
        value: f64,
        reason: &'static str,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
