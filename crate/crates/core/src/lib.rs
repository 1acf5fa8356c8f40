//! Pancreas segmentation in CT with morphological active contours.
//!
//! The crate reads and writes a subset of NIfTI-1, preprocesses slices in
//! Hounsfield units, derives seeds from detector boxes or a fixed crop,
//! evolves morphological snakes, and scores the result with detection and
//! segmentation metrics.

mod error;
mod grid;

pub mod localization;
pub mod metrics;
pub mod morphsnakes;
pub mod pipeline;
pub mod preprocess;
pub mod volume_io;

pub use error::{Error, Result};
pub use grid::{Grid, LevelSet, ShapeError, Slice2D};
pub use morphsnakes::{AcweParams, Balloon, Evolution, GacParams};
pub use pipeline::{PipelineParams, SliceDetections};
pub use volume_io::{CtVolume, Detection, MaskVolume, PixelRect};
