use super::{
    boundary, check_shape, dilate, erode, is_degenerate, CurvatureSmoother, Evolution, SnakeError,
};
use crate::grid::LevelSet;
use crate::preprocess::{gradient, EdgeIndicator};

/// Direction of the constant balloon force.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Balloon {
    Deflate,
    None,
    #[default]
    Inflate,
}

impl Balloon {
    pub fn from_sign(sign: i32) -> Option<Self> {
        match sign {
            -1 => Some(Self::Deflate),
            0 => Some(Self::None),
            1 => Some(Self::Inflate),
            _ => None,
        }
    }

    pub fn sign(self) -> i32 {
        match self {
            Self::Deflate => -1,
            Self::None => 0,
            Self::Inflate => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GacParams {
    pub iterations: usize,
    pub smoothing: usize,
    pub balloon: Balloon,
    /// The balloon only moves the contour where `g > threshold`.
    pub threshold: f64,
}

impl Default for GacParams {
    fn default() -> Self {
        Self {
            iterations: 60,
            smoothing: 1,
            balloon: Balloon::Inflate,
            threshold: 0.3,
        }
    }
}

impl GacParams {
    pub fn validate(&self) -> Result<(), SnakeError> {
        if !(0.0..1.0).contains(&self.threshold) {
            return Err(SnakeError::BadParameter(format!(
                "threshold must lie in [0, 1), got {}",
                self.threshold
            )));
        }
        Ok(())
    }
}

/// Morphological geodesic active contours over the edge map `g`.
///
/// Per iteration: the balloon dilates or erodes `u`, committed only where
/// `g > threshold`; boundary pixels then follow the sign of `∇u · ∇g`
/// (central differences, ties unchanged); finally `smoothing` curvature
/// passes.
pub fn morph_gac(
    g: &EdgeIndicator,
    init: &LevelSet,
    params: &GacParams,
) -> Result<Evolution, SnakeError> {
    check_shape(g.shape(), init)?;
    params.validate()?;
    if init.is_all_false() {
        return Err(SnakeError::EmptyInit);
    }

    let gv = g.values();
    let (gx, gy) = gradient(gv);
    let gate: Vec<bool> = gv.iter().map(|&v| v > params.threshold).collect();

    let mut u = init.clone();
    let mut smoother = CurvatureSmoother::new();
    for it in 0..params.iterations {
        let mut next = u.clone();

        let pushed = match params.balloon {
            Balloon::Inflate => Some(dilate(&next)),
            Balloon::Deflate => Some(erode(&next)),
            Balloon::None => None,
        };
        if let Some(pushed) = pushed {
            for ((cell, &open), &moved) in
                next.as_mut_slice().iter_mut().zip(&gate).zip(pushed.iter())
            {
                if open {
                    *cell = moved;
                }
            }
        }

        let edge = boundary(&next);
        let (ux, uy) = gradient(&next.map(|&b| b as u8 as f64));
        for i in 0..next.len() {
            if !edge.as_slice()[i] {
                continue;
            }
            let dot = ux.as_slice()[i] * gx.as_slice()[i] + uy.as_slice()[i] * gy.as_slice()[i];
            if dot > 0.0 {
                next.as_mut_slice()[i] = true;
            } else if dot < 0.0 {
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
