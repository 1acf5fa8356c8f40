//! Detection and segmentation quality metrics.

mod detection;
mod report;
mod segmentation;

pub use detection::{
    average_precision, box_iou, match_predictions, mean_ap, per_class_ap, pr_curve, precision,
    recall, ConfusionCounts, GroundTruth, Matching, PrCurve, RankedPrediction, RECALL_LEVELS,
};
pub use report::{report, EvalReport};
pub use segmentation::{dice, dice_loss, dice_sets, dsc_from_iou, mask_iou, overlap};

use thiserror::Error;

use crate::volume_io::PixelRect;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("box {0:?} has no area")]
    DegenerateBox(PixelRect),
    #[error("shapes differ: {0:?} vs {1:?}")]
    ShapeMismatch(Vec<usize>, Vec<usize>),
    #[error("epsilon must be positive, got {0}")]
    BadEpsilon(f64),
    #[error("IoU threshold must lie in (0, 1], got {0}")]
    BadIouThreshold(f64),
    #[error("{what} must lie in [0, 1], got {value}")]
    OutOfUnitRange { what: &'static str, value: f64 },
    #[error("cannot summarise an empty list")]
    Empty,
}

fn check_unit(what: &'static str, value: f64) -> Result<(), MetricsError> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(MetricsError::OutOfUnitRange { what, value })
    }
}
