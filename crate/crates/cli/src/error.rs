use std::fmt;

/// Failure classes with their exit codes: semantic rejections exit 1, I/O
/// and parse failures exit 2.
#[derive(Debug)]
pub enum CliError {
    Io(String),
    Parse(String),
    Semantic(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Semantic(_) => 1,
            CliError::Io(_) | CliError::Parse(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Io(m) => write!(f, "I/O error: {m}"),
            CliError::Parse(m) => write!(f, "parse error: {m}"),
            CliError::Semantic(m) => write!(f, "{m}"),
        }
    }
}

impl From<tvwb_core::Error> for CliError {
    fn from(e: tvwb_core::Error) -> Self {
        match e {
            tvwb_core::Error::Parse(m) => CliError::Parse(m),
            other => CliError::Semantic(other.to_string()),
        }
    }
}
