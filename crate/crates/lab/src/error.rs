use std::fmt;
use std::path::PathBuf;

/// Where in a config file a problem was found.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Location {
    pub file: PathBuf,
    pub line: Option<usize>,
    pub key: String,
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "{}:{}: key `{}`", self.file.display(), l, self.key),
            None => write!(f, "{}: key `{}`", self.file.display(), self.key),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum LabError {
    #[error("config error at {at}: {message}")]
    Config { at: Location, message: String },
    #[error("{command}: {source}")]
    Module {
        command: &'static str,
        #[source]
        source: anosov_core::Error,
    },
    #[error("{command}: inconsistent verdicts ({detail})")]
    Inconsistent { command: &'static str, detail: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Usage(String),
}

impl LabError {
    /// Process exit status; the table is documented in `docs/exit-codes.md`.
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Module { .. } => 1,
            LabError::Config { .. } | LabError::Usage(_) => 2,
            LabError::Inconsistent { .. } => 3,
            LabError::Io { .. } => 4,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        LabError::Io { path: path.into(), source }
    }

    /// Ordering used when `all` collects several failures: the worst one
    /// decides the exit status.
    pub fn severity(&self) -> u8 {
        match self {
            LabError::Config { .. } | LabError::Usage(_) => 4,
            LabError::Io { .. } => 3,
            LabError::Module { .. } => 2,
            LabError::Inconsistent { .. } => 1,
        }
    }
}

pub type LabResult<T> = Result<T, LabError>;

pub(crate) trait ModuleContext<T> {
    fn during(self, command: &'static str) -> LabResult<T>;
}

impl<T> ModuleContext<T> for anosov_core::Result<T> {
    fn during(self, command: &'static str) -> LabResult<T> {
        self.map_err(|source| LabError::Module { command, source })
    }
}
