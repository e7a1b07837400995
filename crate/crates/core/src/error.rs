use thiserror::Error;

#[derive(Debug, Error)]
pub enum EprError {
    #[error("size error: {0}")]
    Size(String),
    #[error("format error: {0}")]
    Format(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("hadamard validation failed: {0}")]
    Validation(String),
    #[error("order mismatch: expected {expected}, got {got}")]
    OrderMismatch { expected: usize, got: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("capability error: {0}")]
    Capability(String),
    #[error("measurement ambiguity: closest outcome weight {weight:.3e} off unity")]
    Ambiguity { weight: f64 },
    #[error("node proximity at t={t}, y1={y1}, y2={y2}")]
    Node { t: f64, y1: f64, y2: f64 },
    #[error("coverage error: {0}")]
    Coverage(String),
    #[error("state error: {0}")]
    State(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl EprError {
    /// True for failures of the numerics rather than of the input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, EprError::Ambiguity { .. } | EprError::Node { .. } | EprError::Coverage(_))
    }

    pub fn kind(&self) -> &'static str {
        match self {
            EprError::Size(_) => "size",
            EprError::Format(_) => "format",
            EprError::Parse { .. } => "parse",
            EprError::Validation(_) => "validation",
            EprError::OrderMismatch { .. } => "order_mismatch",
            EprError::Dimension { .. } => "dimension",
            EprError::Capability(_) => "capability",
            EprError::Ambiguity { .. } => "ambiguity",
            EprError::Node { .. } => "node",
            EprError::Coverage(_) => "coverage",
            EprError::State(_) => "state",
            EprError::Config(_) => "config",
            EprError::Io(_) => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, EprError>;
