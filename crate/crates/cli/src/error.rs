use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] asht_core::Error),
}

impl CliError {
    /// Short machine-readable category, first field of the error line.
    pub fn category(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Config(_) => "config",
            CliError::Io { .. } => "io",
            CliError::Core(e) => core_category(e),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }

    /// The message collapsed onto one line.
    pub fn one_line(&self) -> String {
        self.to_string().split_whitespace().collect::<Vec<_>>().join(" ")
    }
}

fn core_category(e: &asht_core::Error) -> &'static str {
    use asht_core::Error as E;
    match e {
        E::ProbabilityOutOfRange { .. }
        | E::NotNormalized { .. }
        | E::Shape { .. }
        | E::IndexOutOfRange { .. }
        | E::Config(_)
        | E::Parse { .. } => "config",
        E::Io { .. } => "io",
        E::Checkpoint(_) => "checkpoint",
        E::InconsistentObservation { .. } | E::NonFinite(_) | E::Empty(_) => "runtime",
        E::Phase { source, .. } => core_category(source),
    }
}
