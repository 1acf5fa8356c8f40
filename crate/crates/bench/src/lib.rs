//! Fixtures shared by the benchmarks.

use snakeseg::metrics::{GroundTruth, RankedPrediction};
use snakeseg::{LevelSet, PixelRect, Slice2D};

/// Unit-contrast disk of radius `n / 4` centred in an `n × n` image, with its
/// analytic mask and a small seed at the centre.
pub fn disk_phantom(n: usize) -> (Slice2D, LevelSet, LevelSet) {
    let c = n as f64 / 2.0;
    let truth = LevelSet::disk(n, n, c, c, n as f64 / 4.0);
    let image = truth.map(|&b| b as u8 as f64);
    let seed = LevelSet::disk(n, n, c, c, n as f64 / 12.0);
    (image, truth, seed)
}

/// Deterministic detection scenario: `images` frames with one ground-truth
/// box each and `per_image` predictions jittered around it.
pub fn detection_scenario(
    images: usize,
    per_image: usize,
) -> (Vec<RankedPrediction>, Vec<GroundTruth>) {
    let mut preds = Vec::new();
    let mut gts = Vec::new();
    for image_id in 0..images {
        let base = (image_id % 7) as f64 * 10.0;
        gts.push(GroundTruth {
            image_id,
            rect: PixelRect::new(base, base, base + 40.0, base + 40.0),
        });
        for k in 0..per_image {
            let shift = (k * 3 % 17) as f64;
            preds.push(RankedPrediction {
                image_id,
                rect: PixelRect::new(base + shift, base, base + shift + 40.0, base + 40.0),
                confidence: ((image_id * 31 + k * 17) % 100) as f64 / 100.0,
            });
        }
    }
    (preds, gts)
}
