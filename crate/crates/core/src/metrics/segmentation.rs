use super::{check_unit, MetricsError};
use crate::volume_io::MaskVolume;

/// `(|A ∩ B|, |A|, |B|)` over two foreground indicators.
pub fn overlap(a: &[bool], b: &[bool]) -> Result<(usize, usize, usize), MetricsError> {
    if a.len() != b.len() {
        return Err(MetricsError::ShapeMismatch(vec![a.len()], vec![b.len()]));
    }
    let mut inter = 0;
    let mut na = 0;
    let mut nb = 0;
    for (&p, &q) in a.iter().zip(b) {
        inter += (p && q) as usize;
        na += p as usize;
        nb += q as usize;
    }
    Ok((inter, na, nb))
}

/// Dice score of two voxel sets; two empty sets agree perfectly.
pub fn dice_sets(a: &[bool], b: &[bool]) -> Result<f64, MetricsError> {
    let (inter, na, nb) = overlap(a, b)?;
    if na + nb == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * inter as f64 / (na + nb) as f64)
}

fn foregrounds(a: &MaskVolume, b: &MaskVolume) -> Result<(Vec<bool>, Vec<bool>), MetricsError> {
    if a.dims() != b.dims() {
        return Err(MetricsError::ShapeMismatch(
            a.dims().to_vec(),
            b.dims().to_vec(),
        ));
    }
    let fg = |m: &MaskVolume| m.labels().iter().map(|&l| l != 0).collect();
    Ok((fg(a), fg(b)))
}

/// Dice score of the non-zero voxels of two masks.
pub fn dice(a: &MaskVolume, b: &MaskVolume) -> Result<f64, MetricsError> {
    let (fa, fb) = foregrounds(a, b)?;
    dice_sets(&fa, &fb)
}

/// Voxel IoU of the non-zero voxels; 1 for two empty masks.
pub fn mask_iou(a: &MaskVolume, b: &MaskVolume) -> Result<f64, MetricsError> {
    let (fa, fb) = foregrounds(a, b)?;
    let (inter, na, nb) = overlap(&fa, &fb)?;
    let union = na + nb - inter;
    if union == 0 {
        return Ok(1.0);
    }
    Ok(inter as f64 / union as f64)
}

/// Soft Dice loss `1 - (2 Σ p·y + ε) / (Σ p + Σ y + ε)`.
pub fn dice_loss(pred: &[f64], truth: &[bool], epsilon: f64) -> Result<f64, MetricsError> {
    if pred.len() != truth.len() {
        return Err(MetricsError::ShapeMismatch(
            vec![pred.len()],
            vec![truth.len()],
        ));
    }
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(MetricsError::BadEpsilon(epsilon));
    }
    let mut inter = 0.0;
    let mut sp = 0.0;
    let mut sy = 0.0;
    for (&p, &y) in pred.iter().zip(truth) {
        check_unit("prediction", p)?;
        let y = y as u8 as f64;
        inter += p * y;
        sp += p;
        sy += y;
    }
    Ok(1.0 - (2.0 * inter + epsilon) / (sp + sy + epsilon))
}

/// Dice score equivalent to an IoU.
pub fn dsc_from_iou(iou: f64) -> Result<f64, MetricsError> {
    check_unit("IoU", iou)?;
    Ok(2.0 * iou / (1.0 + iou))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mask(bits: &[u16]) -> MaskVolume {
        MaskVolume::new([bits.len(), 1, 1], [1.0; 3], bits.to_vec()).unwrap()
    }

    #[test]
    fn dice_examples() {
        let a = mask(&[1, 1, 0, 0]);
        assert_eq!(dice(&a, &a).unwrap(), 1.0);
        assert_eq!(dice(&a, &mask(&[0, 0, 1, 1])).unwrap(), 0.0);
        assert_eq!(dice(&a, &mask(&[0, 1, 1, 0])).unwrap(), 0.5);
        assert_eq!(dice(&mask(&[0, 0]), &mask(&[0, 0])).unwrap(), 1.0);
        // any non-zero label is foreground
        assert_eq!(dice(&a, &mask(&[2, 1, 0, 0])).unwrap(), 1.0);
        assert!(matches!(
            dice(&a, &mask(&[1, 1, 0])),
            Err(MetricsError::ShapeMismatch(..))
        ));
    }

    #[test]
    fn dice_loss_examples() {
        let truth = [true, false, true, true];
        let pred: Vec<f64> = truth.iter().map(|&t| t as u8 as f64).collect();
        for eps in [1e-6, 1.0] {
            assert_eq!(dice_loss(&pred, &truth, eps).unwrap(), 0.0);
            assert_eq!(dice_loss(&[0.0; 4], &[false; 4], eps).unwrap(), 0.0);
        }
        let loss = dice_loss(&[1.0; 100], &[false; 100], 1.0).unwrap();
        assert!((loss - (1.0 - 1.0 / 101.0)).abs() < 1e-15);
        assert_eq!(
            dice_loss(&pred, &truth, 0.0),
            Err(MetricsError::BadEpsilon(0.0))
        );
        assert!(dice_loss(&pred, &truth[..3], 1.0).is_err());
        assert!(dice_loss(&[1.5, 0.0, 0.0, 0.0], &truth, 1.0).is_err());
    }

    #[test]
    fn dsc_from_iou_examples() {
        assert_eq!(dsc_from_iou(0.0).unwrap(), 0.0);
        assert_eq!(dsc_from_iou(1.0).unwrap(), 1.0);
        assert!((dsc_from_iou(0.5).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!(dsc_from_iou(1.1).is_err());
    }

    proptest! {
        #[test]
        fn dice_ignores_voxel_relabeling(
            pairs in proptest::collection::vec((0u16..2, 0u16..2), 1..40)
                .prop_flat_map(|v| (Just(v.clone()), Just(v).prop_shuffle())),
        ) {
            let (orig, shuffled) = pairs;
            let split = |v: &[(u16, u16)]| -> (Vec<u16>, Vec<u16>) { v.iter().copied().unzip() };
            let (a, b) = split(&orig);
            let (c, d) = split(&shuffled);
            prop_assert_eq!(dice(&mask(&a), &mask(&b)).unwrap(), dice(&mask(&c), &mask(&d)).unwrap());
        }

        #[test]
        fn dice_matches_iou(a in proptest::collection::vec(0u16..3, 1..64), flip in any::<u64>()) {
            let b: Vec<u16> = a.iter().enumerate()
                .map(|(i, &v)| if flip >> (i % 64) & 1 == 1 { (v == 0) as u16 } else { v })
                .collect();
            let (ma, mb) = (mask(&a), mask(&b));
            let d = dice(&ma, &mb).unwrap();
            let via = dsc_from_iou(mask_iou(&ma, &mb).unwrap()).unwrap();
            prop_assert!((d - via).abs() < 1e-12);
            prop_assert_eq!(d, dice(&mb, &ma).unwrap());
        }

        #[test]
        fn dice_loss_tends_to_one_minus_dice(
            bits in proptest::collection::vec(any::<(bool, bool)>(), 1..50),
        ) {
            let pred: Vec<f64> = bits.iter().map(|b| b.0 as u8 as f64).collect();
            let truth: Vec<bool> = bits.iter().map(|b| b.1).collect();
            let p: Vec<bool> = bits.iter().map(|b| b.0).collect();
            prop_assume!(p.iter().chain(&truth).any(|&v| v));
            let d = dice_sets(&p, &truth).unwrap();
            let loss = dice_loss(&pred, &truth, 1e-12).unwrap();
            prop_assert!((loss - (1.0 - d)).abs() < 1e-9);
        }
    }
}
