use std::fmt;

/// A failed command together with its process exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub error: anyhow::Error,
}

pub const EXIT_USAGE: u8 = 2;
pub const EXIT_PARSE: u8 = 3;
pub const EXIT_TRANSPORT: u8 = 4;
pub const EXIT_OTHER: u8 = 1;

impl CliError {
    pub fn usage(msg: impl fmt::Display) -> Self {
        CliError {
            code: EXIT_USAGE,
            error: anyhow::anyhow!("{msg}"),
        }
    }

    pub fn parse(msg: impl fmt::Display) -> Self {
        CliError {
            code: EXIT_PARSE,
            error: anyhow::anyhow!("{msg}"),
        }
    }

    pub fn transport(msg: impl fmt::Display) -> Self {
        CliError {
            code: EXIT_TRANSPORT,
            error: anyhow::anyhow!("{msg}"),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError {
            code: EXIT_OTHER,
            error: e.into(),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError {
            code: EXIT_OTHER,
            error: e.into(),
        }
    }
}

pub type CliResult<T = ()> = Result<T, CliError>;
