use thiserror::Error;

use crate::topology::ComponentId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// A failure set that breaks identifiability: `component` has no monitored
/// measurement path that avoids every member of `failure_set`.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Witness {
    pub component: ComponentId,
    pub failure_set: Vec<ComponentId>,
}

impl std::fmt::Display for Witness {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} unobservable when {{", self.component)?;
        for (i, c) in self.failure_set.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, "}} fail")
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("HA pairing error: {0}")]
    Pairing(String),

    #[error("invalid topology spec: {0}")]
    Spec(String),

    #[error("not found: {0}")]
    NotFound(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("monitor budget infeasible: {witness}")]
    Infeasible { witness: Witness },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("window {0} has no probe records")]
    EmptyWindow(u32),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl From<toml::de::Error> for Error {
    fn from(e: toml::de::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
