use super::{boundary, check_shape, is_degenerate, CurvatureSmoother, Evolution, SnakeError};
use crate::grid::{LevelSet, Slice2D};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcweParams {
    pub iterations: usize,
    /// Curvature passes per iteration.
    pub smoothing: usize,
    /// Weight of the inside term.
    pub lambda1: f64,
    /// Weight of the outside term.
    pub lambda2: f64,
}

impl Default for AcweParams {
    fn default() -> Self {
        Self {
            iterations: 50,
            smoothing: 1,
            lambda1: 1.0,
            lambda2: 1.0,
        }
    }
}

impl AcweParams {
    fn validate(&self) -> Result<(), SnakeError> {
        for (name, v) in [("lambda1", self.lambda1), ("lambda2", self.lambda2)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(SnakeError::BadParameter(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Mean intensity inside and outside `u`.
fn region_means(image: &Slice2D, u: &LevelSet) -> (f64, f64) {
    let (mut s_in, mut n_in, mut s_out, mut n_out) = (0.0, 0usize, 0.0, 0usize);
    for (&v, &inside) in image.iter().zip(u.iter()) {
        if inside {
            s_in += v;
            n_in += 1;
        } else {
            s_out += v;
            n_out += 1;
        }
    }
    (s_in / n_in as f64, s_out / n_out as f64)
}

/// Morphological active contours without edges.
///
/// Each iteration recomputes the inside mean `c1` and outside mean `c2`, then
/// moves every boundary pixel to the side whose weighted squared deviation
/// `lambda * (I - c)^2` is smaller; exact ties keep their current value.
/// The curvature operator is applied `smoothing` times afterwards.
pub fn morph_acwe(
    image: &Slice2D,
    init: &LevelSet,
    params: &AcweParams,
) -> Result<Evolution, SnakeError> {
    check_shape(image.shape(), init)?;
    params.validate()?;
    if init.is_all_false() {
        return Err(SnakeError::EmptyInit);
    }
    if init.is_all_true() {
        return Err(SnakeError::FullInit);
    }

    let mut u = init.clone();
    let mut smoother = CurvatureSmoother::new();
    for it in 0..params.iterations {
        let (c1, c2) = region_means(image, &u);
        let edge = boundary(&u);
        let mut next = u.clone();
        for i in 0..u.len() {
            if !edge.as_slice()[i] {
                continue;
            }
            let v = image.as_slice()[i];
            let inside = params.lambda1 * (v - c1).powi(2);
            let outside = params.lambda2 * (v - c2).powi(2);
            if inside < outside {
                next.as_mut_slice()[i] = true;
            } else if inside > outside {
                next.as_mut_slice()[i] = false;
            }
        }
        for _ in 0..params.smoothing {
            next = smoother.apply(&next);
        }
        if is_degenerate(&next) {
            return Ok(Evolution {
                level_set: u,
                iterations: it,
                degenerate: true,
            });
        }
        u = next;
    }
    Ok(Evolution {
        level_set: u,
        iterations: params.iterations,
        degenerate: false,
    })
}
