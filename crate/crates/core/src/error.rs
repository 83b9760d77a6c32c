use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("SCM error: {0}")]
    Scm(String),

    #[error("expression error at offset {pos}: {msg}")]
    Expr { pos: usize, msg: String },

    #[error(
        "exogenous support has {states} joint states, above the enumeration cap of {cap}; \
         use Monte Carlo ground truth instead"
    )]
    EnumerationTooLarge { states: u128, cap: u64 },

    #[error("transport error: {0}")]
    Transport(String),

    #[error("clustering error: {0}")]
    Cluster(String),

    #[error("estimation error: {0}")]
    Estimation(String),

    /// A bound was requested for an assignment that does not meet the
    /// assumptions the bound is derived under.
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn in_stage(self, stage: &'static str) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// True for errors caused by invalid user input (schema, data, config),
    /// as opposed to failures while running a computation.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::Schema(_) | Error::Data(_) | Error::Config(_) | Error::Expr { .. } => true,
            Error::Scm(_) | Error::Csv(_) | Error::Json(_) => true,
            Error::Stage { source, .. } => source.is_validation(),
            _ => false,
        }
    }
}
