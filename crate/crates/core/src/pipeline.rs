//! Detector-seeded segmentation of a whole CT volume.
//!
//! Each detection box on a slice is padded, cropped out of the HU-clipped
//! slice, turned into an edge map, and evolved with the geodesic snake from
//! a seed at the box centroid. Crops are pasted back into the full frame and
//! OR-combined; slices are stacked into a mask volume and optionally cleaned
//! with the three-slice consistency pass.

use std::time::{Duration, Instant};

use thiserror::Error;

use crate::grid::{LevelSet, Slice2D};
use crate::localization::{seed_from_rect, CropSpec, LocalizationError};
use crate::morphsnakes::{morph_gac, GacParams, SnakeError};
use crate::preprocess::{
    check_edge_params, clip_hu, inverse_gaussian_gradient, rescale_window, PreprocessError,
    DEFAULT_ALPHA, DEFAULT_HU_WINDOW, DEFAULT_SIGMA,
};
use crate::volume_io::labels::{parse_detection_fields, records};
use crate::volume_io::{CtVolume, Detection, LabelError, MaskVolume, PixelRect, VolumeError};

pub const DEFAULT_PAD: f64 = 1.2;
pub const DEFAULT_CONFIDENCE: f64 = 0.25;

#[derive(Debug, Error, PartialEq)]
pub enum PipelineError {
    #[error("detections reference slice {z} but the volume has {nz}")]
    SliceOutOfRange { z: usize, nz: usize },
    #[error("detection frame {frame:?} does not match slice size {slice:?}")]
    FrameMismatch {
        frame: (usize, usize),
        slice: (usize, usize),
    },
    #[error("window {window:?} at origin {origin:?} exceeds frame {frame:?}")]
    WindowOutsideFrame {
        window: (usize, usize),
        origin: (usize, usize),
        frame: (usize, usize),
    },
    #[error("invalid parameter: {0}")]
    BadParameter(String),
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
    #[error(transparent)]
    Localization(#[from] LocalizationError),
    #[error(transparent)]
    Snake(#[from] SnakeError),
    #[error(transparent)]
    Volume(#[from] VolumeError),
    #[error(transparent)]
    Label(#[from] LabelError),
}

/// Confidence-filtered detections for one slice.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceDetections {
    pub z: usize,
    pub detections: Vec<Detection>,
}

/// What to do on slices without any detection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Fallback {
    /// Leave the slice empty.
    #[default]
    Empty,
    /// Evolve a contour inside the fixed crop, seeded at its centre.
    DefaultCrop(CropSpec),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineParams {
    pub gac: GacParams,
    pub sigma: f64,
    pub alpha: f64,
    /// HU clip window; the clipped range is mapped onto `[0, 1]` before the
    /// edge map is computed.
    pub window: (f64, f64),
    /// Crop side relative to the detection box.
    pub pad: f64,
    /// Detections at or below this confidence are ignored.
    pub confidence: f64,
    pub postprocess: bool,
    pub fallback: Fallback,
}

impl Default for PipelineParams {
    fn default() -> Self {
        Self {
            gac: GacParams::default(),
            sigma: DEFAULT_SIGMA,
            alpha: DEFAULT_ALPHA,
            window: DEFAULT_HU_WINDOW,
            pad: DEFAULT_PAD,
            confidence: DEFAULT_CONFIDENCE,
            postprocess: false,
            fallback: Fallback::Empty,
        }
    }
}

impl PipelineParams {
    pub fn validate(&self) -> Result<(), PipelineError> {
        if !(self.pad >= 1.0 && self.pad.is_finite()) {
            return Err(PipelineError::BadParameter(format!(
                "pad must be >= 1, got {}",
                self.pad
            )));
        }
        if !(0.0..=1.0).contains(&self.confidence) {
            return Err(PipelineError::BadParameter(format!(
                "confidence must lie in [0, 1], got {}",
                self.confidence
            )));
        }
        if !(self.window.0 < self.window.1) {
            return Err(PreprocessError::BadWindow {
                lo: self.window.0,
                hi: self.window.1,
            }
            .into());
        }
        check_edge_params(self.sigma, self.alpha)?;
        self.gac.validate()?;
        Ok(())
    }
}

/// Per-slice record passed to the progress callback.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceOutcome {
    pub z: usize,
    /// Contours evolved on this slice.
    pub contours: usize,
    /// Contours that collapsed or flooded their crop.
    pub degenerate: usize,
    pub foreground: usize,
    pub elapsed: Duration,
}

/// Integer crop `(x0, y0, w, h)` covering `rect` scaled by `pad` about its
/// centre, intersected with the frame.
pub fn padded_window(
    rect: PixelRect,
    pad: f64,
    nx: usize,
    ny: usize,
) -> (usize, usize, usize, usize) {
    let (cx, cy) = rect.center();
    let hw = 0.5 * pad * rect.width();
    let hh = 0.5 * pad * rect.height();
    let lo = |c: f64, h: f64, n: usize| ((c - h).floor().max(0.0) as usize).min(n - 1);
    let hi = |c: f64, h: f64, n: usize| ((c + h).ceil().max(0.0) as usize).min(n);
    let x0 = lo(cx, hw, nx);
    let y0 = lo(cy, hh, ny);
    let x1 = hi(cx, hw, nx).max(x0 + 1);
    let y1 = hi(cy, hh, ny).max(y0 + 1);
    (x0, y0, x1 - x0, y1 - y0)
}

/// Places `cropped` into an all-outside frame of size `frame` at `origin`.
pub fn reposition(
    cropped: &LevelSet,
    origin: (usize, usize),
    frame: (usize, usize),
) -> Result<LevelSet, PipelineError> {
    let (w, h) = cropped.shape();
    if origin.0 + w > frame.0 || origin.1 + h > frame.1 {
        return Err(PipelineError::WindowOutsideFrame {
            window: (w, h),
            origin,
            frame,
        });
    }
    let mut out = LevelSet::filled(frame.0, frame.1, false);
    for (x, y, &v) in cropped.indexed() {
        if v {
            out.set(origin.0 + x, origin.1 + y, true);
        }
    }
    Ok(out)
}

struct Contour {
    mask: LevelSet,
    degenerate: bool,
}

/// Evolves one contour inside the crop `(x0, y0, w, h)` of `normalized`,
/// seeded from `rect`. Returns `None` when the seed misses the crop.
fn evolve_in_window(
    normalized: &Slice2D,
    rect: PixelRect,
    window: (usize, usize, usize, usize),
    params: &PipelineParams,
) -> Result<Option<Contour>, PipelineError> {
    let (x0, y0, w, h) = window;
    let seed = seed_from_rect(rect)?;
    let init = seed.level_set(w, h, (x0, y0));
    if init.is_all_false() {
        return Ok(None);
    }
    let crop = normalized.window(x0, y0, w, h);
    let g = inverse_gaussian_gradient(&crop, params.sigma, params.alpha)?;
    let evo = morph_gac(&g, &init, &params.gac)?;
    Ok(Some(Contour {
        mask: reposition(&evo.level_set, (x0, y0), normalized.shape())?,
        degenerate: evo.degenerate,
    }))
}

/// Segments one HU slice from its detections (already confidence-gated).
pub fn segment_slice(
    slice: &Slice2D,
    detections: &[Detection],
    params: &PipelineParams,
) -> Result<(LevelSet, SliceOutcome), PipelineError> {
    let start = Instant::now();
    let (nx, ny) = slice.shape();
    let (lo, hi) = params.window;
    let normalized = rescale_window(&clip_hu(slice, lo, hi)?, lo, hi)?;

    let mut jobs: Vec<(PixelRect, (usize, usize, usize, usize))> = Vec::new();
    for d in detections {
        if d.frame != (nx, ny) {
            return Err(PipelineError::FrameMismatch {
                frame: d.frame,
                slice: (nx, ny),
            });
        }
        let rect = d.rect_px();
        if rect.is_degenerate() {
            return Err(LocalizationError::DegenerateBox(rect).into());
        }
        jobs.push((rect, padded_window(rect, params.pad, nx, ny)));
    }
    if jobs.is_empty() {
        if let Fallback::DefaultCrop(spec) = params.fallback {
            let (x0, y0) = spec.origin(nx, ny)?;
            let s = spec.size;
            let rect = PixelRect::new(x0 as f64, y0 as f64, (x0 + s) as f64, (y0 + s) as f64);
            jobs.push((rect, (x0, y0, s, s)));
        }
    }

    let mut mask = LevelSet::filled(nx, ny, false);
    let mut outcome = SliceOutcome {
        z: 0,
        contours: 0,
        degenerate: 0,
        foreground: 0,
        elapsed: Duration::ZERO,
    };
    for (rect, window) in jobs {
        if let Some(c) = evolve_in_window(&normalized, rect, window, params)? {
            outcome.contours += 1;
            outcome.degenerate += c.degenerate as usize;
            for (m, v) in mask.as_mut_slice().iter_mut().zip(c.mask.iter()) {
                *m |= *v;
            }
        }
    }
    outcome.foreground = mask.count();
    outcome.elapsed = start.elapsed();
    Ok((mask, outcome))
}

pub fn segment_volume(
    volume: &CtVolume,
    dets: &[SliceDetections],
    params: &PipelineParams,
) -> Result<MaskVolume, PipelineError> {
    segment_volume_traced(volume, dets, params, |_| {})
}

/// [`segment_volume`] reporting every processed slice to `on_slice`.
pub fn segment_volume_traced(
    volume: &CtVolume,
    dets: &[SliceDetections],
    params: &PipelineParams,
    mut on_slice: impl FnMut(&SliceOutcome),
) -> Result<MaskVolume, PipelineError> {
    params.validate()?;
    let [nx, ny, nz] = volume.dims();
    let mut per_slice: Vec<Vec<Detection>> = vec![Vec::new(); nz];
    for sd in dets {
        if sd.z >= nz {
            return Err(PipelineError::SliceOutOfRange { z: sd.z, nz });
        }
        per_slice[sd.z].extend(
            sd.detections
                .iter()
                .filter(|d| d.confidence > params.confidence)
                .copied(),
        );
    }

    let mut slices = Vec::with_capacity(nz);
    for (z, slice_dets) in per_slice.iter().enumerate() {
        if slice_dets.is_empty() && params.fallback == Fallback::Empty {
            slices.push(LevelSet::filled(nx, ny, false));
            continue;
        }
        let slice = volume.slice(z)?;
        let (mask, mut outcome) = segment_slice(&slice, slice_dets, params)?;
        outcome.z = z;
        on_slice(&outcome);
        slices.push(mask);
    }
    let mask = MaskVolume::from_level_sets(&slices, volume.spacing())?;
    Ok(if params.postprocess {
        postprocess(&mask)
    } else {
        mask
    })
}

/// Three-slice consistency pass along z.
///
/// A voxel whose two z-neighbours agree with each other but not with it takes
/// their value. Neighbours are always read from the input, so the result
/// does not depend on sweep order. Volumes with fewer than three slices are
/// returned unchanged.
pub fn postprocess(mask: &MaskVolume) -> MaskVolume {
    let [nx, ny, nz] = mask.dims();
    let mut out = mask.clone();
    if nz < 3 {
        return out;
    }
    let plane = nx * ny;
    let src = mask.labels();
    let dst = out.labels_mut();
    for z in 1..nz - 1 {
        for i in 0..plane {
            let below = src[(z - 1) * plane + i];
            let here = src[z * plane + i];
            let above = src[(z + 1) * plane + i];
            if below == above && below != here {
                dst[z * plane + i] = below;
            }
        }
    }
    out
}

/// Parses a whole-volume detection file of `z class confidence cx cy w h`
/// lines, keeping detections above `min_conf`. Slices are returned in
/// ascending z; every slice that appears in the file gets an entry.
pub fn parse_volume_detections(
    text: &str,
    nx: usize,
    ny: usize,
    min_conf: f64,
) -> Result<Vec<SliceDetections>, LabelError> {
    let mut by_z: std::collections::BTreeMap<usize, Vec<Detection>> = Default::default();
    for (line, fields) in records(text) {
        let z = fields[0]
            .parse::<usize>()
            .map_err(|_| LabelError::Malformed {
                line,
                reason: format!("slice index {:?} is not a non-negative integer", fields[0]),
            })?;
        let d = parse_detection_fields(line, &fields[1..], nx, ny)?;
        let entry = by_z.entry(z).or_default();
        if d.confidence > min_conf {
            entry.push(d);
        }
    }
    Ok(by_z
        .into_iter()
        .map(|(z, detections)| SliceDetections { z, detections })
        .collect())
}

/// Inverse of [`parse_volume_detections`].
pub fn serialize_volume_detections(dets: &[SliceDetections]) -> String {
    let mut out = String::new();
    for sd in dets {
        for d in &sd.detections {
            out.push_str(&format!("{} {}\n", sd.z, d));
        }
    }
    out
}
