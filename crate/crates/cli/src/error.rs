use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{0}")]
    Core(#[from] chiral_array::Error),
    #[error("io error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl CliError {
    /// 2 config, 3 numerical or io failure, 4 resource cap.
    pub fn exit_code(&self) -> i32 {
        use chiral_array::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Core(E::InvalidInput(_) | E::Data(_)) => 2,
            CliError::Core(E::ResourceCap(_)) => 4,
            CliError::Core(E::Numerical(_) | E::Io(_)) => 3,
            CliError::Io { .. } => 3,
        }
    }

    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.display().to_string(), source }
    }
}
