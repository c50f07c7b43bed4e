use std::fmt;
use std::path::Path;

/// Failure classes, mapped to the process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, settings or config file: exit 1.
    Usage(String),
    /// Unreadable or invalid input data, failed writes, protocol errors: exit 2.
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
        }
    }

    pub fn write(path: &Path, e: impl fmt::Display) -> Self {
        CliError::Data(format!("cannot write {}: {e}", path.display()))
    }

    /// Treats a core error raised while validating settings as a usage error.
    pub fn usage(e: xspec_core::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Data(m) => f.write_str(m),
        }
    }
}

impl From<xspec_core::Error> for CliError {
    fn from(e: xspec_core::Error) -> Self {
        CliError::Data(e.to_string())
    }
}
