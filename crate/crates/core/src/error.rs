use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: expected {expected}, got {found}")]
    ShapeMismatch { expected: String, found: String },

    #[error("occupation out of range at flat index {index}: {value}")]
    OccupationOutOfRange { index: usize, value: f64 },

    #[error("matrix is not Hermitian (defect {defect:.3e} > {tolerance:.1e})")]
    NotHermitian { defect: f64, tolerance: f64 },

    #[error("time step {dt} exceeds the stability bound {bound} ({reason})")]
    TimeStepTooLarge { dt: f64, bound: f64, reason: &'static str },

    #[error("positivity violated at step {step} (t = {t}): n = {value} at m = {m}, n = {n}")]
    PositivityViolation { step: usize, t: f64, m: usize, n: i64, value: f64 },

    #[error("Hermiticity defect {defect:.3e} exceeds 1e-8 at step {step}")]
    HermiticityLost { step: usize, defect: f64 },

    #[error("{}", format_config_errors(.0))]
    Config(Vec<ConfigIssue>),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// One problem found while parsing a scenario config.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigIssue {
    /// 1-based line number, 0 when the problem is not tied to a line
    /// (missing keys).
    pub line: usize,
    pub key: String,
    pub message: String,
}

impl std::fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.line > 0 {
            write!(f, "line {}: {}: {}", self.line, self.key, self.message)
        } else {
            write!(f, "{}: {}", self.key, self.message)
        }
    }
}

fn format_config_errors(issues: &[ConfigIssue]) -> String {
    let parts: Vec<String> = issues.iter().map(|i| i.to_string()).collect();
    format!("invalid config: {}", parts.join("; "))
}

impl Error {
    /// Short machine-parsable code used by the CLI on every failure path.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidGrid(_) => "invalid_grid",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::ShapeMismatch { .. } => "shape_mismatch",
            Error::OccupationOutOfRange { .. } => "occupation_out_of_range",
            Error::NotHermitian { .. } => "not_hermitian",
            Error::TimeStepTooLarge { .. } => "dt_bound",
            Error::PositivityViolation { .. } => "positivity",
            Error::HermiticityLost { .. } => "hermiticity",
            Error::Config(_) => "config_invalid",
            Error::Io { .. } => "io",
        }
    }

    /// Errors caused by the invocation itself (bad config, arguments or
    /// grid) rather than by the run.
    pub fn is_usage(&self) -> bool {
        matches!(self, Error::Config(_) | Error::InvalidArgument(_) | Error::InvalidGrid(_))
    }
}
