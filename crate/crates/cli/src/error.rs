use thiserror::Error;

use condgen::data::DataError;
use condgen::generation::GenerationError;
use condgen::health_index::HealthIndexError;
use condgen::reliability::ReliabilityError;
use condgen::validation::ValidationError;

/// `Invalid` covers bad configuration or inputs (exit 1); `Runtime` covers
/// failures during computation or output (exit 2).
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Invalid(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Invalid(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        CliError::Invalid(e.to_string())
    }
}

impl From<GenerationError> for CliError {
    fn from(e: GenerationError) -> Self {
        match e {
            GenerationError::Config(_) | GenerationError::Uncovered(_) | GenerationError::Data(_) => {
                CliError::Invalid(e.to_string())
            }
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<HealthIndexError> for CliError {
    fn from(e: HealthIndexError) -> Self {
        match e {
            HealthIndexError::Config(_) | HealthIndexError::MissingLabel { .. } => {
                CliError::Invalid(e.to_string())
            }
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<ReliabilityError> for CliError {
    fn from(e: ReliabilityError) -> Self {
        match e {
            ReliabilityError::Assumptions(_)
            | ReliabilityError::NoIterations
            | ReliabilityError::NoCandidates
            | ReliabilityError::MissingLoad(_) => CliError::Invalid(e.to_string()),
            ReliabilityError::Generation(g) => g.into(),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<ValidationError> for CliError {
    fn from(e: ValidationError) -> Self {
        match e {
            ValidationError::TooFewYears(_)
            | ValidationError::NoTestPairs
            | ValidationError::TrainingSize { .. } => CliError::Invalid(e.to_string()),
            ValidationError::Generation(g) => g.into(),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}
