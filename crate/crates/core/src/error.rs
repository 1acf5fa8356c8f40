use thiserror::Error;

use crate::localization::LocalizationError;
use crate::metrics::MetricsError;
use crate::morphsnakes::SnakeError;
use crate::pipeline::PipelineError;
use crate::preprocess::PreprocessError;
use crate::volume_io::{LabelError, NiftiError, VolumeError};

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Crate-level error; every variant carries the name of the module it came from.
#[derive(Debug, Error)]
pub enum Error {
    #[error("volume_io: {0}")]
    Volume(#[from] VolumeError),
    #[error("volume_io: {0}")]
    Nifti(#[from] NiftiError),
    #[error("volume_io: {0}")]
    Label(#[from] LabelError),
    #[error("preprocess: {0}")]
    Preprocess(#[from] PreprocessError),
    #[error("localization: {0}")]
    Localization(#[from] LocalizationError),
    #[error("morphsnakes: {0}")]
    Snake(#[from] SnakeError),
    #[error("pipeline: {0}")]
    Pipeline(#[from] PipelineError),
    #[error("metrics: {0}")]
    Metrics(#[from] MetricsError),
}
