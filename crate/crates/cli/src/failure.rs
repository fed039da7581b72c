use std::fmt;
use std::process::ExitCode;

use setconv::Error;

/// Exit codes. Usage errors share clap's code 2.
pub const EXIT_OTHER: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_DATA: u8 = 3;
pub const EXIT_COMPAT: u8 = 4;

/// A command failure carrying its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Self { code: EXIT_USAGE, message: message.into() }
    }

    pub fn compat(message: impl Into<String>) -> Self {
        Self { code: EXIT_COMPAT, message: message.into() }
    }

    /// Library errors raised while validating flags are usage errors.
    pub fn usage_from(e: Error) -> Self {
        Self::usage(e.to_string())
    }

    pub fn from_core(e: Error) -> Self {
        let code = match &e {
            Error::InvalidConfig(_) => EXIT_USAGE,
            Error::Dimension { .. } | Error::ModelVersion { .. } => EXIT_COMPAT,
            Error::MissingFile(_)
            | Error::RaggedRow { .. }
            | Error::NonNumeric { .. }
            | Error::UnknownLabelColumn(_)
            | Error::Csv(_)
            | Error::InsufficientData { .. }
            | Error::EmptyInput(_)
            | Error::EmptyMinority
            | Error::UndefinedAuc
            | Error::MalformedModel(_)
            | Error::ShapeInconsistency(_) => EXIT_DATA,
            _ => EXIT_OTHER,
        };
        Self { code, message: e.to_string() }
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(self.code)
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}
