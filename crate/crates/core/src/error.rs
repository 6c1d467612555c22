use thiserror::Error;

/// Failure modes of every stage of the pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("no nontrivial soliton for lambda = {lambda} (requires lambda > 2)")]
    NoSoliton { lambda: f64 },

    #[error("soliton solver did not converge after {iterations} iterations (residual {residual:e})")]
    SolverFailure { iterations: usize, residual: f64 },

    #[error("degenerate linearized operator: smallest eigenvalue {eigenvalue:e}")]
    Degeneracy { eigenvalue: f64 },

    #[error("assembly error: asymmetry {asymmetry:e} exceeds tolerance")]
    Assembly { asymmetry: f64 },

    #[error("spectral consistency error: H_- eigenvalue {eigenvalue:e} is negative beyond tolerance")]
    SpectralConsistency { eigenvalue: f64 },

    #[error("resonance degeneracy: |<Q^2, H_+^(-1/2) psi_1>| = {denominator:e}")]
    ResonanceDegeneracy { denominator: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("step size underflow at s = {s} (h = {h:e})")]
    Stiffness { s: f64, h: f64 },

    #[error("trajectory blow-up at s = {s}: L = {l}")]
    BlowUp { s: f64, l: f64 },

    #[error("value {value} outside the sampled range [{lo}, {hi}]")]
    Range { value: f64, lo: f64, hi: f64 },

    #[error("bootstrap violation at s = {s}: |w|_H3 = {norm:e} exceeds {limit:e}")]
    BootstrapViolation { s: f64, norm: f64, limit: f64 },

    #[error("not converged: {0}")]
    NotConverged(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
