use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] npfusion::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("serialization error: {0}")]
    Serialize(String),
}

impl CliError {
    /// 2 for malformed input, 3 for well-formed but infeasible setups, 1 for
    /// output failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Model(e) if e.is_infeasibility() => 3,
            CliError::Config(_) | CliError::Model(_) => 2,
            CliError::Io(_) | CliError::Csv(_) | CliError::Serialize(_) => 1,
        }
    }
}
