//! Job files, command dispatch, report output and the example corpus behind
//! the `borelforge` binary.

pub mod commands;
pub mod corpus;
pub mod job;
pub mod output;

use borelforge::verify::VerificationReport;

pub use commands::{dispatch, Outcome, COMMANDS};
pub use job::{parse_job, JobFile, Settings};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid job: {0}")]
    Validation(String),
    #[error("construction failed: {message}")]
    Construction { message: String, report: Box<VerificationReport> },
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn construction(message: String, report: VerificationReport) -> CliError {
        CliError::Construction { message, report: Box::new(report.finish()) }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Construction { .. } | CliError::Io(_) => 2,
        }
    }
}

/// Exit status for a run that produced an outcome.
pub fn outcome_code(o: &Outcome) -> i32 {
    if o.report.pass {
        0
    } else {
        3
    }
}
