use thiserror::Error;

/// Errors raised by the library. Each variant names the module contract it violates.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("shape mismatch: expected {expected:?}, got {found:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("region out of domain: {0}")]
    OutOfDomain(String),

    #[error("axis regularity violated: {0}")]
    AxisRegularity(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("stability bound violated: {0}")]
    Stability(String),

    #[error("poisson solve failed: {0}")]
    Poisson(String),

    #[error("blow-up detected at step {step} (t = {t}): {reason}")]
    BlowUp {
        step: u64,
        t: f64,
        reason: String,
        last_state: Box<crate::solver::SolverState>,
    },

    #[error("step {step} failed: {source}")]
    AtStep {
        step: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("degenerate exponent: {0}")]
    DegenerateExponent(String),

    #[error("inadmissible mixed-norm spec (s, l) = ({s}, {l}): {reason}")]
    Inadmissible { s: String, l: String, reason: String },

    #[error("inconsistent interpolation audit: {0}")]
    Inconsistent(String),

    #[error("empty trajectory")]
    EmptyTrajectory,

    #[error("invalid peak: {0}")]
    InvalidPeak(String),

    #[error("zoom window escapes the sampled domain (maximal admissible a = {max_admissible_a}): {detail}")]
    WindowEscapes { max_admissible_a: f64, detail: String },

    #[error("geometry mismatch: {0}")]
    GeometryMismatch(String),

    #[error("cutoff support violation: {0}")]
    CutoffSupport(String),

    #[error("snapshot format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable snake_case name of the variant, used in machine-readable error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidGrid(_) => "invalid_grid",
            Error::ShapeMismatch { .. } => "shape_mismatch",
            Error::OutOfDomain(_) => "out_of_domain",
            Error::AxisRegularity(_) => "axis_regularity",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::Stability(_) => "stability",
            Error::Poisson(_) => "poisson",
            Error::BlowUp { .. } => "blow_up",
            Error::AtStep { .. } => "at_step",
            Error::DegenerateExponent(_) => "degenerate_exponent",
            Error::Inadmissible { .. } => "inadmissible",
            Error::Inconsistent(_) => "inconsistent",
            Error::EmptyTrajectory => "empty_trajectory",
            Error::InvalidPeak(_) => "invalid_peak",
            Error::WindowEscapes { .. } => "window_escapes",
            Error::GeometryMismatch(_) => "geometry_mismatch",
            Error::CutoffSupport(_) => "cutoff_support",
            Error::Format(_) => "format",
            Error::Io(_) => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
