use std::process::ExitCode;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),

    #[error("{0}")]
    Io(String),

    #[error(transparent)]
    Core(#[from] autosynth::Error),
}

impl CliError {
    /// 2 for bad configuration or input, 3 for I/O, 4 for numeric failure.
    pub fn exit_code(&self) -> ExitCode {
        use autosynth::Error as E;
        let code = match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
            CliError::Core(e) => match e.root() {
                E::Io { .. } => 3,
                E::NonFinite(_) => 4,
                E::InvalidParameter(_) | E::ShapeMismatch(_) | E::SizeMismatch { .. } | E::Format { .. } => 2,
                _ => 1,
            },
        };
        ExitCode::from(code)
    }
}
