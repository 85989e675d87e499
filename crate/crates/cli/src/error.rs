use std::fmt;

/// Failure of a command, carrying its process exit code.
#[derive(Debug)]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad flags or configuration file.
    Config,
    /// Unreadable or malformed input data.
    Data,
    /// The particle system blew up.
    Diverged,
    /// Anything else, e.g. failing to write outputs.
    Io,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Config => 2,
            ErrorKind::Data => 3,
            ErrorKind::Diverged => 4,
            ErrorKind::Io => 1,
        }
    }
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        Self {
            kind: ErrorKind::Config,
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Self {
            kind: ErrorKind::Data,
            message: message.into(),
        }
    }

    pub fn io(message: impl Into<String>) -> Self {
        Self {
            kind: ErrorKind::Io,
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        self.kind.exit_code()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::io(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::io(e.to_string())
    }
}

/// Library errors raised while running the solver. Divergence maps to its own
/// exit code; invalid settings are configuration errors; anything the data
/// can cause is a data error.
impl From<mgd::Error> for CliError {
    fn from(e: mgd::Error) -> Self {
        use mgd::Error as E;
        let kind = match &e {
            E::Diverged { .. } | E::OptimizerDiverged(_) => ErrorKind::Diverged,
            E::InvalidConfig(_) | E::Unsupported(_) => ErrorKind::Config,
            E::Domain(_) | E::DimensionMismatch { .. } | E::Empty(_) | E::NonFinite(_) | E::Degenerate(_) => {
                ErrorKind::Data
            }
        };
        Self {
            kind,
            message: e.to_string(),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_the_contract() {
        assert_eq!(CliError::config("x").exit_code(), 2);
        assert_eq!(CliError::data("x").exit_code(), 3);
        let e: CliError = mgd::Error::Diverged { step: 3, residual: 1.0 }.into();
        assert_eq!(e.exit_code(), 4);
        let e: CliError = mgd::Error::InvalidConfig("n".into()).into();
        assert_eq!(e.exit_code(), 2);
        let e: CliError = mgd::Error::Degenerate("flat".into()).into();
        assert_eq!(e.exit_code(), 3);
    }
}
