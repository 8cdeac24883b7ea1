use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("site {site} out of range for a chain of {sites} sites")]
    SiteOutOfRange { site: usize, sites: usize },

    #[error("self-coupling: sites {i} and {j} coincide modulo {sites}")]
    SelfCoupling { i: usize, j: usize, sites: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("eigenvalue {index} did not converge within {iterations} QL iterations")]
    NoConvergence { index: usize, iterations: usize },

    #[error("zero column {0} cannot be gauge fixed")]
    ZeroColumn(usize),

    #[error("state is not normalized (norm^2 = {0})")]
    NotNormalized(f64),

    #[error("degenerate spectrum: E_max equals E_0")]
    DegenerateSpectrum,

    #[error("protocol does not fit the spectrum: {0}")]
    Protocol(String),

    #[error("loss normalization is zero (all target energies vanish and epsilon = 0)")]
    ZeroNormalization,

    #[error("non-finite value at epoch {epoch}: {what}")]
    Divergence { epoch: usize, what: String },

    #[error("sample {sample}: {source}")]
    Sample {
        sample: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("bad file format: {0}")]
    Format(String),

    #[error("config: {0}")]
    Config(String),

    #[error("run failed: {0}")]
    RunFailed(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
