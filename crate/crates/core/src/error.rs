use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the toolkit can report.
///
/// [`Error::code`] gives a stable, machine-parsable name for each variant and
/// [`Error::class`] groups them the way the command-line front end maps them
/// onto exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("sample count header declares {declared} samples but {found} were read")]
    CountMismatch { declared: usize, found: usize },
    #[error("file contains no samples")]
    EmptyFile,
    #[error("timestamp decreases at line {0}")]
    NonMonotoneTime(usize),
    #[error("trajectory has no samples")]
    EmptyTrajectory,
    #[error("task id {0} is outside 1..=8")]
    InvalidTask(u32),
    #[error("invalid column map: {0}")]
    InvalidColumnMap(String),
    #[error("invalid manifest: {0}")]
    InvalidManifest(String),

    #[error("invalid render configuration: {0}")]
    InvalidRenderConfig(String),

    #[error("model file not found: {}", .0.display())]
    ModelFileMissing(PathBuf),
    #[error("model shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("model error: {0}")]
    Model(String),
    #[error("extractor expects a {expected}x{expected}x3 image, got {width}x{height}")]
    BadInputShape { expected: usize, width: usize, height: usize },
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),

    #[error("{feature} needs at least {needed} samples, got {got}")]
    InsufficientSamples { feature: &'static str, needed: usize, got: usize },
    #[error("trajectory has no on-surface strokes")]
    NoOnSurfaceStrokes,
    #[error("cannot summarize an empty vector")]
    EmptyVector,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("training set contains a single class")]
    SingleClassTrainingSet,
    #[error("classifier needs at least one feature")]
    DimTooSmall,
    #[error("no voters")]
    NoVoters,
    #[error("matrix is missing {} selected dims (first: {})", .0.len(), .0.first().map(String::as_str).unwrap_or(""))]
    MissingDims(Vec<String>),

    #[error("too few subjects: {0}")]
    TooFewSubjects(String),
    #[error("AUC needs both classes among the scored subjects")]
    SingleClass,
    #[error("need at least {needed} evaluated tasks, got {got}")]
    TooFewTasks { needed: usize, got: usize },
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Image(#[from] image::ImageError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("model serialization: {0}")]
    Serialization(String),
}

/// Coarse grouping of errors, used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    Model,
}

impl Error {
    /// Stable identifier of the variant, e.g. `ModelFileMissing`.
    pub fn code(&self) -> &'static str {
        match self {
            Error::MalformedLine { .. } => "MalformedLine",
            Error::CountMismatch { .. } => "CountMismatch",
            Error::EmptyFile => "EmptyFile",
            Error::NonMonotoneTime(_) => "NonMonotoneTime",
            Error::EmptyTrajectory => "EmptyTrajectory",
            Error::InvalidTask(_) => "InvalidTask",
            Error::InvalidColumnMap(_) => "InvalidColumnMap",
            Error::InvalidManifest(_) => "InvalidManifest",
            Error::InvalidRenderConfig(_) => "InvalidRenderConfig",
            Error::ModelFileMissing(_) => "ModelFileMissing",
            Error::ShapeMismatch(_) => "ShapeMismatch",
            Error::Model(_) => "ModelError",
            Error::BadInputShape { .. } => "BadInputShape",
            Error::DimMismatch(_) => "DimMismatch",
            Error::InsufficientSamples { .. } => "InsufficientSamples",
            Error::NoOnSurfaceStrokes => "NoOnSurfaceStrokes",
            Error::EmptyVector => "EmptyVector",
            Error::InvalidParameter(_) => "InvalidParameter",
            Error::SingleClassTrainingSet => "SingleClassTrainingSet",
            Error::DimTooSmall => "DimTooSmall",
            Error::NoVoters => "NoVoters",
            Error::MissingDims(_) => "MissingDims",
            Error::TooFewSubjects(_) => "TooFewSubjects",
            Error::SingleClass => "SingleClass",
            Error::TooFewTasks { .. } => "TooFewTasks",
            Error::Config(_) => "ConfigError",
            Error::Io(_) => "IoError",
            Error::Image(_) => "ImageError",
            Error::Json(_) => "JsonError",
            Error::Csv(_) => "CsvError",
            Error::Serialization(_) => "SerializationError",
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::InvalidColumnMap(_)
            | Error::InvalidRenderConfig(_)
            | Error::InvalidParameter(_)
            | Error::Config(_) => ErrorClass::Config,
            Error::ModelFileMissing(_)
            | Error::ShapeMismatch(_)
            | Error::Model(_)
            | Error::BadInputShape { .. }
            | Error::Serialization(_) => ErrorClass::Model,
            _ => ErrorClass::Data,
        }
    }
}
