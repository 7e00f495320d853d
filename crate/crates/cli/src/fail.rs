use std::fmt;

/// Command failure split by exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, config or input files; exit 2.
    Usage(String),
    /// The pipeline itself failed; exit 1.
    Runtime(String),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) => f.write_str(m),
        }
    }
}

impl From<adaptp::Error> for CliError {
    fn from(e: adaptp::Error) -> Self {
        use adaptp::Error::*;
        match e {
            Config(_) | NotFound(_) | Split(_) => CliError::Usage(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

/// Tags a failure to read a user-supplied input as a usage error.
pub fn input<'a, E: fmt::Display>(what: &str, path: &'a std::path::Path) -> impl FnOnce(E) -> CliError + 'a {
    let what = what.to_string();
    move |e| CliError::Usage(format!("cannot read {what} {}: {e}", path.display()))
}
