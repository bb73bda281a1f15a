use thiserror::Error;

/// Errors raised by parsing, validation and metric computation.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid {name}: {value} (expected {expected})")]
    InvalidParameter {
        name: &'static str,
        value: String,
        expected: &'static str,
    },
    #[error("rank must be >= 1, got {0}")]
    InvalidRank(usize),
    #[error("category `{0}` has no items")]
    EmptyCategory(String),
    #[error("unknown category `{0}`")]
    UnknownCategory(String),
    #[error("user `{0}` has an empty ranking")]
    EmptyRanking(String),
    #[error("system `{system}` has no ranking for user `{user}`")]
    MissingRanking { system: String, user: String },
    #[error("empty {0}")]
    Empty(&'static str),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("no categories")]
    NoCategories,
    #[error("duplicate system `{0}`")]
    DuplicateSystem(String),
    #[error("unknown system `{0}`")]
    UnknownSystem(String),
    #[error("{0}")]
    MismatchedSystems(String),
    #[error("metric undefined: {0}")]
    Undefined(String),
    #[error("infeasible synthetic spec: {0}")]
    Infeasible(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// True for failures caused by malformed or inconsistent input rather than
    /// by the computation itself.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. }
                | Error::NoCategories
                | Error::Io(_)
                | Error::InvalidParameter { .. }
                | Error::MissingRanking { .. }
                | Error::EmptyRanking(_)
                | Error::DuplicateSystem(_)
                | Error::UnknownSystem(_)
                | Error::UnknownCategory(_)
        )
    }

    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
