//! Morphological snakes: curve evolution on a binary level set by repeated
//! application of discrete morphological operators.
//!
//! Two evolutions are provided. [`morph_acwe`] drives the contour by the
//! difference of region means (active contours without edges) and works on
//! the raw image. [`morph_gac`] follows an [`EdgeIndicator`] (geodesic active
//! contours) and combines a balloon force, attraction to edges, and
//! curvature smoothing.
//!
//! Both stop early when the level set collapses to empty or floods the whole
//! grid, returning the last non-degenerate state with
//! [`Evolution::degenerate`] set.

mod acwe;
mod gac;
mod operators;

pub use acwe::{morph_acwe, AcweParams};
pub use gac::{morph_gac, Balloon, GacParams};
pub use operators::{curvature_smooth, dilate, erode, CurvatureSmoother};

pub(crate) use operators::boundary;

use thiserror::Error;

use crate::grid::LevelSet;
#[cfg(doc)]
use crate::preprocess::EdgeIndicator;

#[derive(Debug, Error, PartialEq)]
pub enum SnakeError {
    #[error("image is {image:?} but level set is {level_set:?}")]
    ShapeMismatch {
        image: (usize, usize),
        level_set: (usize, usize),
    },
    #[error("initial level set is empty")]
    EmptyInit,
    #[error("initial level set covers the whole image")]
    FullInit,
    #[error("invalid parameter: {0}")]
    BadParameter(String),
}

/// Result of a contour evolution.
#[derive(Debug, Clone, PartialEq)]
pub struct Evolution {
    pub level_set: LevelSet,
    /// Iterations whose result was kept.
    pub iterations: usize,
    /// The next iteration would have produced an empty or full level set.
    pub degenerate: bool,
}

fn check_shape(image: (usize, usize), u: &LevelSet) -> Result<(), SnakeError> {
    if image != u.shape() {
        return Err(SnakeError::ShapeMismatch {
            image,
            level_set: u.shape(),
        });
    }
    Ok(())
}

fn is_degenerate(u: &LevelSet) -> bool {
    u.is_all_false() || u.is_all_true()
}
