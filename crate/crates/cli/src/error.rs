use std::path::Path;

use nilwalk_core::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config: {0}")]
    Schema(String),

    #[error(transparent)]
    Core(#[from] CoreError),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    /// 2 schema, 3 resource ceiling, 4 numerical validation, 5 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Schema(_) => 2,
            CliError::Validation(_) => 4,
            CliError::Io { .. } => 5,
            CliError::Core(e) => match e {
                CoreError::UnknownPreset(_)
                | CoreError::InvalidConfig(_)
                | CoreError::Json(_)
                | CoreError::DimensionMismatch { .. }
                | CoreError::StepTooLarge { .. }
                | CoreError::NonPositiveDilation(_) => 2,
                CoreError::ResourceCeiling { .. } => 3,
                _ => 4,
            },
        }
    }
}
