use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] gadc_core::Error),

    #[error("cannot parse config {path}: {source}")]
    Config { path: PathBuf, source: toml::de::Error },

    #[error("unknown preset {0:?}; run `gadc presets` for the list")]
    UnknownPreset(String),

    #[error("{0}")]
    Usage(String),

    #[error("cannot write {path}: {source}")]
    Output { path: PathBuf, source: std::io::Error },

    /// A verification check did not hold.
    #[error("{0} check(s) failed")]
    CheckFailed(usize),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        use gadc_core::Error as E;
        match self {
            CliError::CheckFailed(_) => 1,
            CliError::Core(E::Capacity { .. }) => 3,
            CliError::Core(E::Numeric(_)) => 4,
            _ => 2,
        }
    }
}
