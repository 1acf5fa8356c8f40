//! Per-slice intensity conditioning: HU clipping, median denoising and the
//! edge indicator consumed by the geodesic snake.

use thiserror::Error;

use crate::grid::{Grid, Slice2D};

pub const DEFAULT_HU_WINDOW: (f64, f64) = (-200.0, 300.0);
pub const DEFAULT_SIGMA: f64 = 2.0;
pub const DEFAULT_ALPHA: f64 = 100.0;

#[derive(Debug, Error, PartialEq)]
pub enum PreprocessError {
    #[error("clip window ({lo}, {hi}) must satisfy lo < hi")]
    BadWindow { lo: f64, hi: f64 },
    #[error("sigma must be positive, got {0}")]
    BadSigma(f64),
    #[error("alpha must be positive, got {0}")]
    BadAlpha(f64),
}

/// Clamps every sample into `[lo, hi]`.
pub fn clip_hu(slice: &Slice2D, lo: f64, hi: f64) -> Result<Slice2D, PreprocessError> {
    if !(lo < hi) {
        return Err(PreprocessError::BadWindow { lo, hi });
    }
    Ok(slice.map(|&v| v.clamp(lo, hi)))
}

/// Affine map of `[lo, hi]` onto `[0, 1]`. Inputs are expected to be clipped.
pub fn rescale_window(slice: &Slice2D, lo: f64, hi: f64) -> Result<Slice2D, PreprocessError> {
    if !(lo < hi) {
        return Err(PreprocessError::BadWindow { lo, hi });
    }
    Ok(slice.map(|&v| (v - lo) / (hi - lo)))
}

fn median_in_place(buf: &mut [f64]) -> f64 {
    buf.sort_unstable_by(f64::total_cmp);
    let n = buf.len();
    if n % 2 == 1 {
        buf[n / 2]
    } else {
        0.5 * (buf[n / 2 - 1] + buf[n / 2])
    }
}

fn median3x3(slice: &Slice2D) -> Slice2D {
    let (nx, ny) = slice.shape();
    let mut buf = Vec::with_capacity(9);
    Grid::from_fn(nx, ny, |x, y| {
        buf.clear();
        for yy in y.saturating_sub(1)..=(y + 1).min(ny - 1) {
            for xx in x.saturating_sub(1)..=(x + 1).min(nx - 1) {
                buf.push(slice.at(xx, yy));
            }
        }
        median_in_place(&mut buf)
    })
}

/// Curvature-style denoising: `passes` rounds of a 3×3 median filter.
///
/// Border pixels take the median of the neighbours that exist; an even count
/// averages the two central order statistics.
pub fn curvature_denoise(slice: &Slice2D, passes: usize) -> Slice2D {
    let mut out = slice.clone();
    for _ in 0..passes {
        out = median3x3(&out);
    }
    out
}

/// Edge map `g = 1 / sqrt(1 + alpha * |grad(G_sigma * I)|)`, small on contours.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeIndicator {
    g: Slice2D,
    sigma: f64,
    alpha: f64,
}

impl EdgeIndicator {
    pub fn values(&self) -> &Slice2D {
        &self.g
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn shape(&self) -> (usize, usize) {
        self.g.shape()
    }

    /// Wraps an arbitrary map, e.g. a constant one for tests. Values must
    /// lie in `(0, 1]`.
    pub fn from_values(g: Slice2D) -> Option<Self> {
        g.iter().all(|&v| v > 0.0 && v <= 1.0).then_some(Self {
            g,
            sigma: f64::NAN,
            alpha: f64::NAN,
        })
    }
}

/// Normalized 1D Gaussian of radius `ceil(3 sigma)`.
pub(crate) fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as i64;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);
    k
}

/// Mirror index with the edge sample repeated (`d c b a | a b c d`).
#[inline]
pub(crate) fn reflect(i: i64, n: usize) -> usize {
    let n = n as i64;
    let period = 2 * n;
    let mut m = i.rem_euclid(period);
    if m >= n {
        m = period - 1 - m;
    }
    m as usize
}

pub(crate) fn gaussian_blur(slice: &Slice2D, sigma: f64) -> Slice2D {
    let k = gaussian_kernel(sigma);
    let r = (k.len() / 2) as i64;
    let (nx, ny) = slice.shape();
    let rows = Grid::<f64>::from_fn(nx, ny, |x, y| {
        k.iter()
            .enumerate()
            .map(|(j, w)| w * slice.at(reflect(x as i64 + j as i64 - r, nx), y))
            .sum()
    });
    Grid::<f64>::from_fn(nx, ny, |x, y| {
        k.iter()
            .enumerate()
            .map(|(j, w)| w * rows.at(x, reflect(y as i64 + j as i64 - r, ny)))
            .sum()
    })
}

/// Central differences inside, one-sided at the borders; zero along an axis
/// of length 1.
pub(crate) fn gradient(f: &Slice2D) -> (Slice2D, Slice2D) {
    let (nx, ny) = f.shape();
    let d = |a: f64, b: f64, span: f64| (b - a) / span;
    let gx = Grid::from_fn(nx, ny, |x, y| match (x, nx) {
        (_, 1) => 0.0,
        (0, _) => d(f.at(0, y), f.at(1, y), 1.0),
        (x, n) if x == n - 1 => d(f.at(x - 1, y), f.at(x, y), 1.0),
        (x, _) => d(f.at(x - 1, y), f.at(x + 1, y), 2.0),
    });
    let gy = Grid::from_fn(nx, ny, |x, y| match (y, ny) {
        (_, 1) => 0.0,
        (0, _) => d(f.at(x, 0), f.at(x, 1), 1.0),
        (y, n) if y == n - 1 => d(f.at(x, y - 1), f.at(x, y), 1.0),
        (y, _) => d(f.at(x, y - 1), f.at(x, y + 1), 2.0),
    });
    (gx, gy)
}

/// Both edge-map parameters must be positive and finite.
pub fn check_edge_params(sigma: f64, alpha: f64) -> Result<(), PreprocessError> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(PreprocessError::BadSigma(sigma));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(PreprocessError::BadAlpha(alpha));
    }
    Ok(())
}

pub fn inverse_gaussian_gradient(
    slice: &Slice2D,
    sigma: f64,
    alpha: f64,
) -> Result<EdgeIndicator, PreprocessError> {
    check_edge_params(sigma, alpha)?;
    let smooth = gaussian_blur(slice, sigma);
    let (gx, gy) = gradient(&smooth);
    let g = Grid::from_fn(slice.nx(), slice.ny(), |x, y| {
        let m = gx.at(x, y).hypot(gy.at(x, y));
        1.0 / (1.0 + alpha * m).sqrt()
    });
    Ok(EdgeIndicator { g, sigma, alpha })
}
