use std::path::PathBuf;

use crate::model::AttributeRef;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("condition on {attr} but profile only has {len} attributes")]
    AttributeOutOfRange { attr: AttributeRef, len: usize },

    #[error("conflicting conditions on {attr}: values {first} and {second}")]
    ConflictingConditions {
        attr: AttributeRef,
        first: u32,
        second: u32,
    },

    #[error("deny rule encountered under permit-only semantics")]
    DenyRuleUnderPermitOnly,

    #[error("invalid generation parameters: {0}")]
    InvalidParams(String),

    #[error("could not draw {wanted} distinct rules after {attempts} redraws")]
    GenerationExhausted { wanted: usize, attempts: usize },

    #[error("density {target:.4} ± {tolerance:.4} unreachable after {attempts} attempts")]
    DensityUnreachable {
        target: f64,
        tolerance: f64,
        attempts: usize,
    },

    #[error("matrix has no cells")]
    EmptyMatrix,

    #[error("matrix dimensions differ: {left:?} vs {right:?}")]
    DimensionMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("scenario invariant violated: {0}")]
    InvalidScenario(String),

    #[error("no rule lines found ({skipped} lines skipped)")]
    NoRulesFound { skipped: usize },

    #[error("line {line}: malformed rule: {reason}")]
    MalformedRule { line: usize, reason: String },

    #[error("line {line}: attribute {name} does not agree with value {token}")]
    KindMismatch {
        line: usize,
        name: String,
        token: String,
    },

    #[error("line {line}: {source}")]
    AtLine {
        line: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("malformed {what}: {reason}")]
    Format { what: &'static str, reason: String },

    #[error("strategy {strategy} cannot consume the {method} input method")]
    IncompatibleInputMethod { strategy: String, method: String },

    #[error("unknown {what}: {name}")]
    Unknown { what: &'static str, name: String },

    #[error("prompt template {0} is missing")]
    MissingTemplate(String),

    #[error("access data has no permit entries")]
    NoPermits,

    #[error("access data is inconsistent: a permit entry has a deny twin")]
    InconsistentData,

    #[error("oracle preconditions violated: {0}")]
    ScaleExceeded(String),

    #[error("no consistent policy with at most {budget} rules")]
    BudgetExceeded { budget: usize },

    #[error("invalid confusion counts: {0}")]
    InvalidCounts(String),

    #[error("provider {provider}: {reason}")]
    Provider { provider: String, reason: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(what: &'static str, reason: impl Into<String>) -> Self {
        Error::Format {
            what,
            reason: reason.into(),
        }
    }
}
