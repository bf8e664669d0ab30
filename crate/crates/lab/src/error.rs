use rwrs_core::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum LabError {
    /// Bad flags, config keys or parameter values; exit code 2.
    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] CoreError),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("thread pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

impl LabError {
    /// 2 for validation errors, 1 for failures while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Usage(_) => 2,
            LabError::Core(e) => match e {
                CoreError::InvalidParameter(_)
                | CoreError::RegimeViolation { .. }
                | CoreError::RecurrentWalk(_)
                | CoreError::MgfDiverges { .. }
                | CoreError::NoAdmissibleLevels { .. }
                | CoreError::TooManyCoefficients(_) => 2,
                _ => 1,
            },
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, LabError>;

pub fn usage(msg: impl Into<String>) -> LabError {
    LabError::Usage(msg.into())
}
