//! Text exchange with the external detector.
//!
//! Ground-truth label lines are `class cx cy w h`; detection lines are
//! `class confidence cx cy w h`. All box values are normalized to `[0, 1]`
//! by the image width (x) and height (y). Fields are whitespace separated,
//! one record per line, blank lines ignored.

use std::fmt;

use thiserror::Error;

use super::{MaskVolume, VolumeError};
use crate::grid::Grid;

#[derive(Debug, Error, PartialEq)]
pub enum LabelError {
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
}

fn malformed(line: usize, reason: impl Into<String>) -> LabelError {
    LabelError::Malformed {
        line,
        reason: reason.into(),
    }
}

/// Axis-aligned box in pixel coordinates, half-open `[x0, x1) × [y0, y1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelRect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl PixelRect {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self { x0, y0, x1, y1 }
    }

    pub fn from_center(cx: f64, cy: f64, w: f64, h: f64) -> Self {
        Self::new(cx - w / 2.0, cy - h / 2.0, cx + w / 2.0, cy + h / 2.0)
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> f64 {
        self.width().max(0.0) * self.height().max(0.0)
    }

    pub fn center(&self) -> (f64, f64) {
        ((self.x0 + self.x1) / 2.0, (self.y0 + self.y1) / 2.0)
    }

    pub fn is_degenerate(&self) -> bool {
        !(self.width() > 0.0 && self.height() > 0.0)
    }
}

/// One ground-truth box, as written to a label file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabelLine {
    pub class_id: u32,
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
}

impl LabelLine {
    pub fn rect_px(&self, nx: usize, ny: usize) -> PixelRect {
        PixelRect::from_center(
            self.cx * nx as f64,
            self.cy * ny as f64,
            self.w * nx as f64,
            self.h * ny as f64,
        )
    }
}

impl fmt::Display for LabelLine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} {} {} {}",
            self.class_id, self.cx, self.cy, self.w, self.h
        )
    }
}

/// A detector prediction: normalized box, confidence, and the frame size used
/// to map it to pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub class_id: u32,
    pub confidence: f64,
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
    pub frame: (usize, usize),
}

impl Detection {
    pub fn center_px(&self) -> (f64, f64) {
        (self.cx * self.frame.0 as f64, self.cy * self.frame.1 as f64)
    }

    pub fn size_px(&self) -> (f64, f64) {
        (self.w * self.frame.0 as f64, self.h * self.frame.1 as f64)
    }

    pub fn rect_px(&self) -> PixelRect {
        let (cx, cy) = self.center_px();
        let (w, h) = self.size_px();
        PixelRect::from_center(cx, cy, w, h)
    }

    /// Builds a detection from a pixel-space box inside an `nx`×`ny` frame.
    pub fn from_rect(
        class_id: u32,
        confidence: f64,
        rect: PixelRect,
        nx: usize,
        ny: usize,
    ) -> Self {
        let (cx, cy) = rect.center();
        Self {
            class_id,
            confidence,
            cx: cx / nx as f64,
            cy: cy / ny as f64,
            w: rect.width() / nx as f64,
            h: rect.height() / ny as f64,
            frame: (nx, ny),
        }
    }
}

impl fmt::Display for Detection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} {} {} {} {}",
            self.class_id, self.confidence, self.cx, self.cy, self.w, self.h
        )
    }
}

/// Non-blank lines with their 1-based line numbers.
pub(crate) fn records(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split_whitespace().collect::<Vec<_>>()))
        .filter(|(_, f)| !f.is_empty())
}

pub(crate) fn parse_class(line: usize, field: &str) -> Result<u32, LabelError> {
    field.parse::<u32>().map_err(|_| {
        malformed(
            line,
            format!("class id {field:?} is not a non-negative integer"),
        )
    })
}

pub(crate) fn parse_unit(line: usize, name: &str, field: &str) -> Result<f64, LabelError> {
    let v: f64 = field
        .parse()
        .map_err(|_| malformed(line, format!("{name} {field:?} is not a number")))?;
    if !(0.0..=1.0).contains(&v) {
        return Err(malformed(line, format!("{name} {v} is outside [0, 1]")));
    }
    Ok(v)
}

/// Parses the six detection fields of one record (without any prefix).
pub(crate) fn parse_detection_fields(
    line: usize,
    fields: &[&str],
    nx: usize,
    ny: usize,
) -> Result<Detection, LabelError> {
    if fields.len() != 6 {
        return Err(malformed(
            line,
            format!(
                "expected 6 fields (class confidence cx cy w h), got {}",
                fields.len()
            ),
        ));
    }
    Ok(Detection {
        class_id: parse_class(line, fields[0])?,
        confidence: parse_unit(line, "confidence", fields[1])?,
        cx: parse_unit(line, "cx", fields[2])?,
        cy: parse_unit(line, "cy", fields[3])?,
        w: parse_unit(line, "w", fields[4])?,
        h: parse_unit(line, "h", fields[5])?,
        frame: (nx, ny),
    })
}

/// Reads detector output for an `nx`×`ny` image, keeping only lines whose
/// confidence is strictly greater than `min_conf`. Input order is preserved.
pub fn parse_detections(
    text: &str,
    nx: usize,
    ny: usize,
    min_conf: f64,
) -> Result<Vec<Detection>, LabelError> {
    let mut out = Vec::new();
    for (line, fields) in records(text) {
        let d = parse_detection_fields(line, &fields, nx, ny)?;
        if d.confidence > min_conf {
            out.push(d);
        }
    }
    Ok(out)
}

pub fn serialize_detections(dets: &[Detection]) -> String {
    dets.iter().map(|d| format!("{d}\n")).collect()
}

pub fn parse_labels(text: &str) -> Result<Vec<LabelLine>, LabelError> {
    records(text)
        .map(|(line, f)| {
            if f.len() != 5 {
                return Err(malformed(
                    line,
                    format!("expected 5 fields (class cx cy w h), got {}", f.len()),
                ));
            }
            Ok(LabelLine {
                class_id: parse_class(line, f[0])?,
                cx: parse_unit(line, "cx", f[1])?,
                cy: parse_unit(line, "cy", f[2])?,
                w: parse_unit(line, "w", f[3])?,
                h: parse_unit(line, "h", f[4])?,
            })
        })
        .collect()
}

/// Tight bounding box and pixel count of one 8-connected component.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Component {
    pub label: u16,
    pub x_min: usize,
    pub x_max: usize,
    pub y_min: usize,
    pub y_max: usize,
    pub area: usize,
}

/// 8-connected components of the non-zero cells, in raster order of their
/// first pixel. With `merge` set all non-zero labels form one class.
pub(crate) fn components(slice: &Grid<u16>, merge: bool) -> Vec<Component> {
    let (nx, ny) = slice.shape();
    let key = |v: u16| if merge { (v != 0) as u16 } else { v };
    let mut seen = vec![false; nx * ny];
    let mut out = Vec::new();
    let mut stack = Vec::new();
    for start in 0..nx * ny {
        let label = key(slice.as_slice()[start]);
        if label == 0 || seen[start] {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let mut c = Component {
            label,
            x_min: usize::MAX,
            x_max: 0,
            y_min: usize::MAX,
            y_max: 0,
            area: 0,
        };
        while let Some(i) = stack.pop() {
            let (x, y) = (i % nx, i / nx);
            c.x_min = c.x_min.min(x);
            c.x_max = c.x_max.max(x);
            c.y_min = c.y_min.min(y);
            c.y_max = c.y_max.max(y);
            c.area += 1;
            for yy in y.saturating_sub(1)..=(y + 1).min(ny - 1) {
                for xx in x.saturating_sub(1)..=(x + 1).min(nx - 1) {
                    let j = yy * nx + xx;
                    if !seen[j] && key(slice.as_slice()[j]) == label {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        out.push(c);
    }
    out
}

/// One label line per connected component of slice `z`.
///
/// Label value `k` maps to class `k - 1`; with `merge_classes` every
/// component of the binarized slice is class 0. Components with fewer than
/// `min_area` pixels are dropped.
pub fn mask_to_labels(
    mask: &MaskVolume,
    z: usize,
    merge_classes: bool,
    min_area: usize,
) -> Result<Vec<LabelLine>, VolumeError> {
    let slice = mask.slice(z)?;
    let (nx, ny) = (slice.nx() as f64, slice.ny() as f64);
    Ok(components(&slice, merge_classes)
        .into_iter()
        .filter(|c| c.area >= min_area)
        .map(|c| {
            let w = (c.x_max + 1 - c.x_min) as f64;
            let h = (c.y_max + 1 - c.y_min) as f64;
            LabelLine {
                class_id: if merge_classes { 0 } else { c.label as u32 - 1 },
                cx: (c.x_min as f64 + w / 2.0) / nx,
                cy: (c.y_min as f64 + h / 2.0) / ny,
                w: w / nx,
                h: h / ny,
            }
        })
        .collect())
}
