use std::process::ExitCode;

use serde::Serialize;
use verispace_core::Error;

/// A failed command: exit status plus the JSON written to stderr.
#[derive(Debug, Serialize)]
pub struct CliError {
    #[serde(skip)]
    pub exit: u8,
    pub code: &'static str,
    pub message: String,
}

pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_INFEASIBLE: u8 = 3;
pub const EXIT_INTERNAL: u8 = 4;

impl CliError {
    pub fn config(code: &'static str, message: impl Into<String>) -> Self {
        CliError {
            exit: EXIT_CONFIG,
            code,
            message: message.into(),
        }
    }

    pub fn internal(message: impl Into<String>) -> Self {
        CliError {
            exit: EXIT_INTERNAL,
            code: "internal",
            message: message.into(),
        }
    }

    pub fn report(&self) -> ExitCode {
        let body = serde_json::json!({ "error": self });
        eprintln!("{body}");
        ExitCode::from(self.exit)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let (exit, code) = match &e {
            Error::Infeasible(_) => (EXIT_INFEASIBLE, "infeasible"),
            Error::InvalidNetwork(_)
            | Error::UnknownNode(_)
            | Error::MalformedAssignment { .. }
            | Error::InvalidScenario(_)
            | Error::UnknownActivity(_)
            | Error::AlreadyVerified(_)
            | Error::NotFailed(_)
            | Error::HorizonReached(_)
            | Error::UnknownRule(_)
            | Error::Unsupported(_)
            | Error::ImpossibleEvidence => (EXIT_CONFIG, "invalid_scenario"),
            Error::InvalidConfig(_) => (EXIT_CONFIG, "invalid_config"),
            Error::Io { .. } | Error::Json { .. } => (EXIT_CONFIG, "input"),
            _ => (EXIT_INTERNAL, "internal"),
        };
        CliError {
            exit,
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError {
            exit: EXIT_INTERNAL,
            code: "io",
            message: e.to_string(),
        }
    }
}
