use std::collections::BTreeMap;

use super::{check_unit, MetricsError};
use crate::volume_io::PixelRect;

/// Number of interpolation points of the average-precision sweep.
pub const RECALL_LEVELS: usize = 11;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn new(tp: u64, fp: u64, fn_: u64) -> Self {
        Self { tp, fp, fn_ }
    }
}

/// `tp / (tp + fp)`, or 0 without predictions.
pub fn precision(c: ConfusionCounts) -> f64 {
    ratio(c.tp, c.tp + c.fp)
}

/// `tp / (tp + fn)`, or 0 without positives.
pub fn recall(c: ConfusionCounts) -> f64 {
    ratio(c.tp, c.tp + c.fn_)
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn check_box(r: &PixelRect) -> Result<(), MetricsError> {
    if r.is_degenerate() || !r.area().is_finite() {
        return Err(MetricsError::DegenerateBox(*r));
    }
    Ok(())
}

/// Intersection over union of two half-open boxes.
pub fn box_iou(a: &PixelRect, b: &PixelRect) -> Result<f64, MetricsError> {
    check_box(a)?;
    check_box(b)?;
    let w = (a.x1.min(b.x1) - a.x0.max(b.x0)).max(0.0);
    let h = (a.y1.min(b.y1) - a.y0.max(b.y0)).max(0.0);
    let inter = w * h;
    Ok(inter / (a.area() + b.area() - inter))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankedPrediction {
    pub image_id: usize,
    pub rect: PixelRect,
    pub confidence: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundTruth {
    pub image_id: usize,
    pub rect: PixelRect,
}

/// Outcome of greedy matching, in ranked order.
#[derive(Debug, Clone, PartialEq)]
pub struct Matching {
    /// Input indices of the predictions, most confident first.
    pub order: Vec<usize>,
    pub is_tp: Vec<bool>,
    pub counts: ConfusionCounts,
}

fn check_threshold(t: f64) -> Result<(), MetricsError> {
    if t > 0.0 && t <= 1.0 {
        Ok(())
    } else {
        Err(MetricsError::BadIouThreshold(t))
    }
}

/// Ranks predictions by descending confidence (stable) and assigns each to
/// the still unmatched ground-truth box of its image with the highest IoU.
/// The pair is a true positive iff that IoU reaches `iou_thresh`.
pub fn match_predictions(
    preds: &[RankedPrediction],
    gts: &[GroundTruth],
    iou_thresh: f64,
) -> Result<Matching, MetricsError> {
    check_threshold(iou_thresh)?;
    for p in preds {
        check_box(&p.rect)?;
        check_unit("confidence", p.confidence)?;
    }
    for g in gts {
        check_box(&g.rect)?;
    }

    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&a, &b| preds[b].confidence.total_cmp(&preds[a].confidence));

    let mut taken = vec![false; gts.len()];
    let mut is_tp = Vec::with_capacity(preds.len());
    for &i in &order {
        let p = &preds[i];
        let mut best: Option<(usize, f64)> = None;
        for (j, g) in gts.iter().enumerate() {
            if taken[j] || g.image_id != p.image_id {
                continue;
            }
            let iou = box_iou(&p.rect, &g.rect)?;
            if best.is_none_or(|(_, b)| iou > b) {
                best = Some((j, iou));
            }
        }
        let hit = match best {
            Some((j, iou)) if iou >= iou_thresh => {
                taken[j] = true;
                true
            }
            _ => false,
        };
        is_tp.push(hit);
    }
    let tp = is_tp.iter().filter(|&&h| h).count() as u64;
    Ok(Matching {
        order,
        is_tp,
        counts: ConfusionCounts::new(tp, preds.len() as u64 - tp, gts.len() as u64 - tp),
    })
}

/// Precision/recall sweep over ranked predictions.
#[derive(Debug, Clone, PartialEq)]
pub struct PrCurve {
    pub n_gt: usize,
    /// Cumulative true positives after each ranked prediction.
    pub true_positives: Vec<usize>,
}

impl PrCurve {
    pub fn from_hits(hits: &[bool], n_gt: usize) -> Self {
        let mut tp = 0;
        let true_positives = hits
            .iter()
            .map(|&h| {
                tp += h as usize;
                tp
            })
            .collect();
        Self {
            n_gt,
            true_positives,
        }
    }

    /// `(recall, precision)` after each ranked prediction.
    pub fn points(&self) -> Vec<(f64, f64)> {
        self.true_positives
            .iter()
            .enumerate()
            .map(|(k, &tp)| (tp as f64 / self.n_gt as f64, tp as f64 / (k + 1) as f64))
            .collect()
    }

    /// Interpolated precision at recall `0, 0.1, …, 1`: the best precision
    /// among points whose recall is at least the level, 0 if there is none.
    /// Recall levels are compared in integers so that 0.3 is hit exactly.
    pub fn interpolated(&self) -> [f64; RECALL_LEVELS] {
        let mut out = [0.0; RECALL_LEVELS];
        for (level, slot) in out.iter_mut().enumerate() {
            for (k, &tp) in self.true_positives.iter().enumerate() {
                if (RECALL_LEVELS - 1) * tp >= level * self.n_gt {
                    *slot = f64::max(*slot, tp as f64 / (k + 1) as f64);
                }
            }
        }
        out
    }

    pub fn average_precision(&self) -> f64 {
        self.interpolated().iter().sum::<f64>() / RECALL_LEVELS as f64
    }
}

/// Runs the matching and returns the sweep, or `None` without ground truth.
pub fn pr_curve(
    preds: &[RankedPrediction],
    gts: &[GroundTruth],
    iou_thresh: f64,
) -> Result<Option<PrCurve>, MetricsError> {
    let m = match_predictions(preds, gts, iou_thresh)?;
    if gts.is_empty() {
        return Ok(None);
    }
    Ok(Some(PrCurve::from_hits(&m.is_tp, gts.len())))
}

/// 11-point interpolated average precision; `None` when there is no ground
/// truth to recall.
pub fn average_precision(
    preds: &[RankedPrediction],
    gts: &[GroundTruth],
    iou_thresh: f64,
) -> Result<Option<f64>, MetricsError> {
    Ok(pr_curve(preds, gts, iou_thresh)?.map(|c| c.average_precision()))
}

pub fn mean_ap(per_class_ap: &[f64]) -> Result<f64, MetricsError> {
    if per_class_ap.is_empty() {
        return Err(MetricsError::Empty);
    }
    Ok(per_class_ap.iter().sum::<f64>() / per_class_ap.len() as f64)
}

/// Average precision for every class present in either list.
pub fn per_class_ap(
    preds: &[(u32, RankedPrediction)],
    gts: &[(u32, GroundTruth)],
    iou_thresh: f64,
) -> Result<BTreeMap<u32, Option<f64>>, MetricsError> {
    let mut classes: BTreeMap<u32, (Vec<RankedPrediction>, Vec<GroundTruth>)> = BTreeMap::new();
    for (c, p) in preds {
        classes.entry(*c).or_default().0.push(*p);
    }
    for (c, g) in gts {
        classes.entry(*c).or_default().1.push(*g);
    }
    classes
        .into_iter()
        .map(|(c, (p, g))| Ok((c, average_precision(&p, &g, iou_thresh)?)))
        .collect()
}
