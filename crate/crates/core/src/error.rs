use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("{what} is not hermitian (max deviation {deviation:.3e})")]
    NotHermitian { what: &'static str, deviation: f64 },

    #[error("state is not normalized (norm {norm:.15})")]
    NotNormalized { norm: f64 },

    #[error(
        "configuration space has {size} determinants for {electrons} electrons in {spin_orbitals} \
         spin-orbitals, limit is {limit}"
    )]
    ConfigurationOverflow {
        size: u128,
        limit: usize,
        electrons: usize,
        spin_orbitals: usize,
    },

    #[error("SCF did not converge in {iterations} iterations (last density change {last:.3e})")]
    ScfNotConverged {
        iterations: usize,
        last: f64,
        history: Vec<f64>,
    },

    #[error("grid spacing {spacing} too coarse: at most {required} is required")]
    UnderResolvedGrid { spacing: f64, required: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("band {0} is not converged at every k-point")]
    UnconvergedBand(usize),

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// Short machine-readable tag used in the CLI error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid_input",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::NotHermitian { .. } => "not_hermitian",
            Error::NotNormalized { .. } => "not_normalized",
            Error::ConfigurationOverflow { .. } => "configuration_overflow",
            Error::ScfNotConverged { .. } => "scf_not_converged",
            Error::UnderResolvedGrid { .. } => "under_resolved_grid",
            Error::Unsupported(_) => "unsupported",
            Error::UnconvergedBand(_) => "unconverged_band",
            Error::Config { .. } => "config",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}
