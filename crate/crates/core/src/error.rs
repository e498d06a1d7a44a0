use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An argument fell outside the domain of a lens function.
    #[error("domain error: {0}")]
    Domain(String),

    /// Inputs that do not fit together (mismatched sizes, missing profile, ...).
    #[error("usage error: {0}")]
    Usage(String),

    /// A calibration profile that fails a field check or an invariant.
    #[error("invalid calibration profile: {0}")]
    Profile(String),

    #[error("polynomial fit failed: {0}")]
    Fit(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed file contents.
    #[error("{}: {message}", path.display())]
    Format { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }

    /// True for errors caused by how the library was called rather than by data.
    pub fn is_usage(&self) -> bool {
        matches!(self, Error::Usage(_))
    }
}
