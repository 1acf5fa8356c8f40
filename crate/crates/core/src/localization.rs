//! Where to look: probability-map priors built from annotated masks, the
//! fixed default crop, seeds derived from detector boxes, and HU statistics
//! of the annotated organ.

use thiserror::Error;

use crate::grid::{Grid, LevelSet};
use crate::volume_io::{CtVolume, Detection, MaskVolume, PixelRect};

/// Default crop centre `(x, y)` on a 512×512 slice.
pub const DEFAULT_CROP_CENTER: (usize, usize) = (287, 250);
pub const DEFAULT_CROP_SIZE: usize = 224;
/// Voxels at or below this HU are treated as air and excluded from the
/// organ fraction denominator.
pub const AIR_HU_THRESHOLD: f64 = -800.0;
pub const MIN_SEED_RADIUS: usize = 3;

#[derive(Debug, Error, PartialEq)]
pub enum LocalizationError {
    #[error("at least one mask is required")]
    NoMasks,
    #[error("mask {index} has in-plane shape {got:?}, expected {expected:?}")]
    ShapeMismatch {
        index: usize,
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("threshold {0} must lie in [0, 1)")]
    BadThreshold(f64),
    #[error("empty support: no pixel exceeds threshold {0}")]
    EmptySupport(f64),
    #[error("crop size {size} exceeds image {nx}x{ny}")]
    CropTooLarge { size: usize, nx: usize, ny: usize },
    #[error("degenerate box {0:?}")]
    DegenerateBox(PixelRect),
    #[error("volume {0:?} and mask {1:?} differ in shape")]
    VolumeMaskMismatch([usize; 3], [usize; 3]),
    #[error("mask has no foreground voxels")]
    EmptyMask,
    #[error("no voxel above {AIR_HU_THRESHOLD} HU")]
    NoBody,
}

/// How per-pixel occupancy is normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ProbMapMode {
    /// Foreground slices over all slices of all volumes.
    #[default]
    PerSlice,
    /// Volumes with foreground in any slice over the number of volumes.
    AnySlice,
}

/// Per-pixel organ frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbMap {
    counts: Grid<u64>,
    p: Grid<f64>,
    n_slices_counted: u64,
}

impl ProbMap {
    pub fn shape(&self) -> (usize, usize) {
        self.p.shape()
    }

    pub fn values(&self) -> &Grid<f64> {
        &self.p
    }

    /// Raw occupancy counts; `p = counts / n_slices_counted`.
    pub fn counts(&self) -> &Grid<u64> {
        &self.counts
    }

    /// Denominator of `p`: slices, or volumes in [`ProbMapMode::AnySlice`].
    pub fn n_slices_counted(&self) -> u64 {
        self.n_slices_counted
    }

    /// The map as a single-slice float volume, `nz = 1`.
    pub fn to_volume(&self) -> CtVolume {
        let (nx, ny) = self.shape();
        // float32 storage
        let data = self.p.iter().map(|&v| v as f32 as f64).collect();
        CtVolume::new([nx, ny, 1], [1.0; 3], data).expect("probability map geometry")
    }
}

pub fn build_probmap(masks: &[MaskVolume]) -> Result<ProbMap, LocalizationError> {
    build_probmap_with(masks, ProbMapMode::PerSlice)
}

pub fn build_probmap_with(
    masks: &[MaskVolume],
    mode: ProbMapMode,
) -> Result<ProbMap, LocalizationError> {
    let first = masks.first().ok_or(LocalizationError::NoMasks)?;
    let [nx, ny, _] = first.dims();
    let mut counts = Grid::filled(nx, ny, 0u64);
    let mut total = 0u64;
    for (index, m) in masks.iter().enumerate() {
        let [mx, my, nz] = m.dims();
        if (mx, my) != (nx, ny) {
            return Err(LocalizationError::ShapeMismatch {
                index,
                expected: (nx, ny),
                got: (mx, my),
            });
        }
        let plane = nx * ny;
        match mode {
            ProbMapMode::PerSlice => {
                for z in 0..nz {
                    let labels = &m.labels()[z * plane..(z + 1) * plane];
                    for (c, &l) in counts.as_mut_slice().iter_mut().zip(labels) {
                        *c += (l != 0) as u64;
                    }
                }
                total += nz as u64;
            }
            ProbMapMode::AnySlice => {
                let mut any = vec![false; plane];
                for (i, &l) in m.labels().iter().enumerate() {
                    any[i % plane] |= l != 0;
                }
                for (c, hit) in counts.as_mut_slice().iter_mut().zip(any) {
                    *c += hit as u64;
                }
                total += 1;
            }
        }
    }
    let p = counts.map(|&c| c as f64 / total as f64);
    Ok(ProbMap {
        counts,
        p,
        n_slices_counted: total,
    })
}

/// Inclusive pixel bounds of a support region.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Extents {
    pub x_min: usize,
    pub x_max: usize,
    pub y_min: usize,
    pub y_max: usize,
}

/// Tight bounds of `{p > threshold}`.
pub fn probmap_extents(map: &ProbMap, threshold: f64) -> Result<Extents, LocalizationError> {
    if !(0.0..1.0).contains(&threshold) {
        return Err(LocalizationError::BadThreshold(threshold));
    }
    let mut ext: Option<Extents> = None;
    for (x, y, &p) in map.values().indexed() {
        if p > threshold {
            let e = ext.get_or_insert(Extents {
                x_min: x,
                x_max: x,
                y_min: y,
                y_max: y,
            });
            e.x_min = e.x_min.min(x);
            e.x_max = e.x_max.max(x);
            e.y_min = e.y_min.min(y);
            e.y_max = e.y_max.max(y);
        }
    }
    ext.ok_or(LocalizationError::EmptySupport(threshold))
}

/// Fixed square crop around a centre pixel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CropSpec {
    pub center: (usize, usize),
    pub size: usize,
}

impl Default for CropSpec {
    fn default() -> Self {
        Self {
            center: DEFAULT_CROP_CENTER,
            size: DEFAULT_CROP_SIZE,
        }
    }
}

impl CropSpec {
    /// Top-left corner of the window `[c - s/2, c + ceil(s/2))`, shifted back
    /// inside the image when it would cross a border.
    pub fn origin(&self, nx: usize, ny: usize) -> Result<(usize, usize), LocalizationError> {
        let s = self.size;
        if s > nx || s > ny {
            return Err(LocalizationError::CropTooLarge { size: s, nx, ny });
        }
        let place = |c: usize, n: usize| c.saturating_sub(s / 2).min(n - s);
        Ok((place(self.center.0, nx), place(self.center.1, ny)))
    }
}

/// Extracts the `s`×`s` window of `spec` and the origin it was taken at.
pub fn default_crop<T: Clone>(
    image: &Grid<T>,
    spec: CropSpec,
) -> Result<(Grid<T>, (usize, usize)), LocalizationError> {
    let (x0, y0) = spec.origin(image.nx(), image.ny())?;
    Ok((image.window(x0, y0, spec.size, spec.size), (x0, y0)))
}

/// Initial disk for a contour, in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Seed {
    pub x: i64,
    pub y: i64,
    pub radius: usize,
}

impl Seed {
    /// Rasterizes the disk into an `nx`×`ny` frame whose origin sits at
    /// `offset` in the seed's coordinates.
    pub fn level_set(&self, nx: usize, ny: usize, offset: (usize, usize)) -> LevelSet {
        let cx = (self.x - offset.0 as i64) as f64;
        let cy = (self.y - offset.1 as i64) as f64;
        LevelSet::disk(nx, ny, cx, cy, self.radius as f64)
    }
}

/// Seed at the rounded centroid of `rect`, radius a quarter of the short side
/// (floored, at least [`MIN_SEED_RADIUS`]).
pub fn seed_from_rect(rect: PixelRect) -> Result<Seed, LocalizationError> {
    if rect.is_degenerate() || !rect.area().is_finite() {
        return Err(LocalizationError::DegenerateBox(rect));
    }
    let (cx, cy) = rect.center();
    let short = rect.width().min(rect.height());
    let radius = ((0.25 * short).floor() as usize).max(MIN_SEED_RADIUS);
    Ok(Seed {
        x: cx.round() as i64,
        y: cy.round() as i64,
        radius,
    })
}

pub fn seed_from_detection(d: &Detection) -> Result<Seed, LocalizationError> {
    seed_from_rect(d.rect_px())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HuStats {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub organ_fraction: f64,
    pub foreground_voxels: usize,
    pub body_voxels: usize,
}

/// Intensity statistics of the masked organ and its share of the body
/// (voxels above [`AIR_HU_THRESHOLD`]).
pub fn hu_statistics(volume: &CtVolume, mask: &MaskVolume) -> Result<HuStats, LocalizationError> {
    if volume.dims() != mask.dims() {
        return Err(LocalizationError::VolumeMaskMismatch(
            volume.dims(),
            mask.dims(),
        ));
    }
    let fg: Vec<f64> = volume
        .data()
        .iter()
        .zip(mask.labels())
        .filter(|(_, &l)| l != 0)
        .map(|(&v, _)| v)
        .collect();
    if fg.is_empty() {
        return Err(LocalizationError::EmptyMask);
    }
    let body = volume
        .data()
        .iter()
        .filter(|&&v| v > AIR_HU_THRESHOLD)
        .count();
    if body == 0 {
        return Err(LocalizationError::NoBody);
    }
    let n = fg.len() as f64;
    let mean = fg.iter().sum::<f64>() / n;
    let var = fg.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Ok(HuStats {
        mean,
        std: var.sqrt(),
        organ_fraction: fg.len() as f64 / body as f64,
        foreground_voxels: fg.len(),
        body_voxels: body,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mask2x2(v: [u16; 4]) -> MaskVolume {
        MaskVolume::new([2, 2, 1], [1.0; 3], v.to_vec()).unwrap()
    }

    #[test]
    fn probmap_counts_slices() {
        let map = build_probmap(&[mask2x2([1, 0, 0, 0]), mask2x2([1, 1, 0, 0])]).unwrap();
        assert_eq!(map.values().as_slice(), &[1.0, 0.5, 0.0, 0.0]);
        assert_eq!(map.n_slices_counted(), 2);
        assert_eq!(map.counts().as_slice(), &[2, 1, 0, 0]);
    }

    #[test]
    fn probmap_of_empty_masks_is_zero() {
        let map = build_probmap(&[mask2x2([0; 4]), mask2x2([0; 4])]).unwrap();
        assert!(map.values().iter().all(|&p| p == 0.0));
        assert_eq!(
            probmap_extents(&map, 0.0).unwrap_err(),
            LocalizationError::EmptySupport(0.0)
        );
    }

    #[test]
    fn probmap_single_pixel() {
        let map = build_probmap(&[mask2x2([0, 0, 0, 3])]).unwrap();
        assert_eq!(map.values().at(1, 1), 1.0);
    }

    #[test]
    fn probmap_errors() {
        assert_eq!(build_probmap(&[]).unwrap_err(), LocalizationError::NoMasks);
        let odd = MaskVolume::zeros([3, 2, 1], [1.0; 3]).unwrap();
        assert!(matches!(
            build_probmap(&[mask2x2([0; 4]), odd]),
            Err(LocalizationError::ShapeMismatch { index: 1, .. })
        ));
    }

    #[test]
    fn any_slice_mode_counts_volumes() {
        let two_slices = MaskVolume::new([2, 1, 2], [1.0; 3], vec![1, 0, 1, 1]).unwrap();
        let map =
            build_probmap_with(std::slice::from_ref(&two_slices), ProbMapMode::AnySlice).unwrap();
        assert_eq!(map.values().as_slice(), &[1.0, 1.0]);
        let per_slice = build_probmap(&[two_slices]).unwrap();
        assert_eq!(per_slice.values().as_slice(), &[1.0, 0.5]);
    }

    #[test]
    fn extents_follow_threshold() {
        let map = build_probmap(&[mask2x2([1, 0, 0, 0]), mask2x2([1, 1, 0, 0])]).unwrap();
        let e = probmap_extents(&map, 0.0).unwrap();
        assert_eq!((e.x_min, e.x_max, e.y_min, e.y_max), (0, 1, 0, 0));
        let e = probmap_extents(&map, 0.6).unwrap();
        assert_eq!((e.x_min, e.x_max, e.y_min, e.y_max), (0, 0, 0, 0));
        assert!(matches!(
            probmap_extents(&map, 1.0),
            Err(LocalizationError::BadThreshold(_))
        ));
    }

    #[test]
    fn default_crop_on_512() {
        let img = Grid::from_fn(512, 512, |x, y| (x, y));
        let (crop, origin) = default_crop(&img, CropSpec::default()).unwrap();
        assert_eq!(origin, (175, 138));
        assert_eq!(crop.shape(), (224, 224));
        assert_eq!(*crop.get(0, 0), (175, 138));
        assert_eq!(*crop.get(223, 223), (398, 361));
    }

    #[test]
    fn crop_shifts_inside_borders() {
        let img = Grid::filled(512, 512, 0u8);
        let spec = CropSpec {
            center: (0, 0),
            size: 224,
        };
        assert_eq!(default_crop(&img, spec).unwrap().1, (0, 0));
        let spec = CropSpec {
            center: (511, 500),
            size: 224,
        };
        assert_eq!(default_crop(&img, spec).unwrap().1, (288, 288));
        let spec = CropSpec {
            center: (256, 256),
            size: 600,
        };
        assert!(matches!(
            default_crop(&img, spec),
            Err(LocalizationError::CropTooLarge { .. })
        ));
    }

    #[test]
    fn seeds_from_boxes() {
        let s = seed_from_rect(PixelRect::new(100.0, 120.0, 150.0, 160.0)).unwrap();
        assert_eq!(
            s,
            Seed {
                x: 125,
                y: 140,
                radius: 10
            }
        );
        let s = seed_from_rect(PixelRect::new(0.0, 0.0, 8.0, 8.0)).unwrap();
        assert_eq!(s.radius, 3);
        assert!(matches!(
            seed_from_rect(PixelRect::new(5.0, 0.0, 5.0, 8.0)),
            Err(LocalizationError::DegenerateBox(_))
        ));
    }

    #[test]
    fn hu_statistics_examples() {
        let ct = CtVolume::new([3, 1, 1], [1.0; 3], vec![0.0, 100.0, -1000.0]).unwrap();
        let mask = MaskVolume::new([3, 1, 1], [1.0; 3], vec![1, 1, 0]).unwrap();
        let s = hu_statistics(&ct, &mask).unwrap();
        assert_eq!((s.mean, s.std), (50.0, 50.0));
        // both body voxels are covered
        assert_eq!(s.organ_fraction, 1.0);
        let empty = MaskVolume::zeros([3, 1, 1], [1.0; 3]).unwrap();
        assert_eq!(
            hu_statistics(&ct, &empty).unwrap_err(),
            LocalizationError::EmptyMask
        );
    }

    proptest! {
        #[test]
        fn probmap_recovers_integer_counts(
            vols in proptest::collection::vec(
                (1usize..4).prop_flat_map(|nz| proptest::collection::vec(0u16..2, 9 * nz)),
                1..5,
            )
        ) {
            let masks: Vec<MaskVolume> = vols
                .into_iter()
                .map(|l| MaskVolume::new([3, 3, l.len() / 9], [1.0; 3], l).unwrap())
                .collect();
            let map = build_probmap(&masks).unwrap();
            let total = map.n_slices_counted() as f64;
            for (p, c) in map.values().iter().zip(map.counts().iter()) {
                let scaled = p * total;
                prop_assert!((scaled - scaled.round()).abs() < 1e-9);
                prop_assert_eq!(scaled.round() as u64, *c);
            }
            let mut prev: Option<Extents> = None;
            for t in [0.0, 0.2, 0.4, 0.6, 0.8, 0.99] {
                match probmap_extents(&map, t) {
                    Ok(e) => {
                        if let Some(p) = prev {
                            prop_assert!(e.x_min >= p.x_min && e.x_max <= p.x_max);
                            prop_assert!(e.y_min >= p.y_min && e.y_max <= p.y_max);
                        }
                        prev = Some(e);
                    }
                    Err(_) => prev = Some(Extents { x_min: usize::MAX, x_max: 0, y_min: usize::MAX, y_max: 0 }),
                }
            }
        }

        #[test]
        fn crop_then_reposition_is_identity(cx in 0usize..64, cy in 0usize..48, s in 1usize..48) {
            let img = Grid::from_fn(64, 48, |x, y| x * 100 + y);
            let (crop, (x0, y0)) = default_crop(&img, CropSpec { center: (cx, cy), size: s }).unwrap();
            prop_assert!(x0 + s <= 64 && y0 + s <= 48);
            for (x, y, &v) in crop.indexed() {
                prop_assert_eq!(v, *img.get(x0 + x, y0 + y));
            }
        }

        #[test]
        fn seed_radius_rule(w in 0.5f64..200.0, h in 0.5f64..200.0) {
            let s = seed_from_rect(PixelRect::new(10.0, 10.0, 10.0 + w, 10.0 + h)).unwrap();
            prop_assert!(s.radius >= MIN_SEED_RADIUS);
            prop_assert!(s.radius == MIN_SEED_RADIUS || s.radius as f64 <= w.min(h) / 4.0);
        }
    }
}
