use thiserror::Error;

/// Errors produced anywhere in the crate.
///
/// Variants split into two families: problems with the caller's input
/// (malformed files, violated preconditions) and failures of a numerical
/// routine. [`Error::is_input`] tells them apart.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A text document could not be parsed; `line` is 1-based.
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// A value violates an invariant of the type being built.
    #[error("invalid {what}: {msg}")]
    Invalid { what: &'static str, msg: String },

    /// An operation was called outside its domain.
    #[error("{0}")]
    Precondition(String),

    /// A numerical routine failed to produce an acceptable result.
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }

    pub(crate) fn invalid(what: &'static str, msg: impl Into<String>) -> Self {
        Error::Invalid {
            what,
            msg: msg.into(),
        }
    }

    pub(crate) fn pre(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }

    /// True when the error is attributable to caller input rather than to an
    /// internal numerical failure.
    pub fn is_input(&self) -> bool {
        !matches!(self, Error::Numerical(_))
    }

    /// Line number for parse errors.
    pub fn line(&self) -> Option<usize> {
        match self {
            Error::Parse { line, .. } => Some(*line),
            _ => None,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
