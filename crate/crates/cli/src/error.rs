use std::fmt;

/// Process exit status classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitKind {
    Config,
    Input,
    Annotator,
    Internal,
}

impl ExitKind {
    pub fn code(self) -> i32 {
        match self {
            ExitKind::Config => 2,
            ExitKind::Input => 3,
            ExitKind::Annotator => 4,
            ExitKind::Internal => 5,
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub kind: ExitKind,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError { kind: ExitKind::Config, message: message.into() }
    }

    pub fn input(message: impl Into<String>) -> Self {
        CliError { kind: ExitKind::Input, message: message.into() }
    }

    pub fn annotator(message: impl Into<String>) -> Self {
        CliError { kind: ExitKind::Annotator, message: message.into() }
    }

    pub fn internal(message: impl Into<String>) -> Self {
        CliError { kind: ExitKind::Internal, message: message.into() }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

pub type CliResult<T> = Result<T, CliError>;
