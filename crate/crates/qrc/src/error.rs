use crate::config::ConfigError;

#[derive(Debug, thiserror::Error)]
pub enum QrcError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Core(#[from] qrc_core::Error),
    #[error("{0}")]
    Io(String),
    /// Some sweep points failed; `code` is the exit status of the first.
    #[error("{failed} of {total} sweep points failed")]
    PartialSweep { failed: usize, total: usize, code: i32 },
}

pub type Result<T> = std::result::Result<T, QrcError>;

/// Process exit status for a failed command.
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_OTHER: i32 = 1;

impl QrcError {
    pub fn exit_code(&self) -> i32 {
        match self {
            QrcError::Config(_) => EXIT_CONFIG,
            QrcError::Core(e) if e.is_numerical() => EXIT_NUMERICAL,
            QrcError::Core(_) => EXIT_CONFIG,
            QrcError::Io(_) => EXIT_OTHER,
            QrcError::PartialSweep { code, .. } => *code,
        }
    }
}
