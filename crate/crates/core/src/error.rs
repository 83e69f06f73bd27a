use thiserror::Error;

/// Every failure the laboratory can report.
///
/// The variants map one-to-one onto the CLI exit codes, see [`Error::exit_code`].
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid or inconsistent configuration, detected before any compute.
    #[error("configuration error: {0}")]
    Config(String),

    /// A mathematically invalid argument (negative inverse SNR, empty ledger, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A numerical-accuracy check failed (strict step convergence).
    #[error("numerical accuracy error: {0}")]
    Numerical(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    /// An error raised while running a particular scenario.
    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// Wraps the error with a description of what was being done.
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// The innermost error, with all context layers removed.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            other => other,
        }
    }

    /// Process exit code: 2 configuration, 3 numerical accuracy, 4 anything else.
    pub fn exit_code(&self) -> i32 {
        match self.root() {
            Error::Config(_) | Error::Json(_) => 2,
            Error::Numerical(_) => 3,
            _ => 4,
        }
    }

    /// Short machine-readable kind label used in error reports.
    pub fn kind(&self) -> &'static str {
        match self.root() {
            Error::Config(_) | Error::Json(_) => "configuration",
            Error::Domain(_) => "domain",
            Error::Numerical(_) => "numerical-accuracy",
            Error::Io { .. } => "io",
            Error::Context { .. } => unreachable!(),
        }
    }
}
