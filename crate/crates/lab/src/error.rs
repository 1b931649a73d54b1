use std::path::PathBuf;

use rmdp_core::hardness::CnfError;

pub type Result<T, E = LabError> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum LabError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: invalid JSON: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: {source}")]
    Cnf {
        path: PathBuf,
        #[source]
        source: CnfError,
    },
    #[error("csv output failed: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Core(#[from] rmdp_core::Error),
    #[error("{0}")]
    Usage(String),
}

/// Process exit statuses. Zero means every requested check passed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Status {
    Ok = 0,
    CheckFailed = 1,
    Usage = 2,
    Numeric = 3,
    Io = 4,
}

impl LabError {
    pub fn usage(msg: impl Into<String>) -> Self {
        LabError::Usage(msg.into())
    }

    pub fn status(&self) -> Status {
        use rmdp_core::Error as E;
        match self {
            LabError::Io { .. } | LabError::Csv(_) => Status::Io,
            LabError::Core(E::NonFinite(_) | E::Lp(_)) => Status::Numeric,
            _ => Status::Usage,
        }
    }
}
