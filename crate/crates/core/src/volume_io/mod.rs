//! Volume containers plus their file formats: a NIfTI-1 subset, PGM slice
//! export, and the detection/label line formats exchanged with a detector.

pub(crate) mod labels;
mod nifti;
mod slice_export;

pub use labels::{
    mask_to_labels, parse_detections, parse_labels, serialize_detections, Detection, LabelError,
    LabelLine, PixelRect,
};
pub use nifti::{
    read_nifti, write_nifti, write_nifti_described, ByteOrder, DataType, NiftiError, NiftiHeader,
    NiftiVolume, VolumeRef,
};
pub use slice_export::{export_slice, GrayImage};

use thiserror::Error;

use crate::grid::{Grid, LevelSet, Slice2D};

#[derive(Debug, Error, PartialEq)]
pub enum VolumeError {
    #[error("dimensions must be positive, got {0:?}")]
    ZeroDimension([usize; 3]),
    #[error("spacing must be finite and positive, got {0:?}")]
    BadSpacing([f64; 3]),
    #[error("volume of {dims:?} needs {expected} voxels, got {got}")]
    Length {
        dims: [usize; 3],
        expected: usize,
        got: usize,
    },
    #[error("non-finite voxel value at index {0}")]
    NonFinite(usize),
    #[error("slice index {z} out of range for {nz} slices")]
    SliceOutOfRange { z: usize, nz: usize },
    #[error("voxel value {0} is not a valid label")]
    NotALabel(f64),
    #[error("window ({0}, {1}) must satisfy lo < hi")]
    BadWindow(f64, f64),
    #[error("shape mismatch: {0:?} vs {1:?}")]
    ShapeMismatch([usize; 3], [usize; 3]),
}

fn check_geometry(dims: [usize; 3], spacing: [f64; 3], len: usize) -> Result<(), VolumeError> {
    if dims.contains(&0) {
        return Err(VolumeError::ZeroDimension(dims));
    }
    if spacing.iter().any(|s| !s.is_finite() || *s <= 0.0) {
        return Err(VolumeError::BadSpacing(spacing));
    }
    let expected = dims[0] * dims[1] * dims[2];
    if len != expected {
        return Err(VolumeError::Length {
            dims,
            expected,
            got: len,
        });
    }
    Ok(())
}

/// CT scan in Hounsfield units, stored x-fastest then y then z.
#[derive(Debug, Clone, PartialEq)]
pub struct CtVolume {
    dims: [usize; 3],
    spacing: [f64; 3],
    data: Vec<f64>,
}

impl CtVolume {
    pub fn new(dims: [usize; 3], spacing: [f64; 3], data: Vec<f64>) -> Result<Self, VolumeError> {
        check_geometry(dims, spacing, data.len())?;
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(VolumeError::NonFinite(i));
        }
        Ok(Self {
            dims,
            spacing,
            data,
        })
    }

    /// Stacks equally sized slices along z.
    pub fn from_slices(slices: &[Slice2D], spacing: [f64; 3]) -> Result<Self, VolumeError> {
        let (nx, ny) = slices.first().map(Grid::shape).unwrap_or((0, 0));
        let dims = [nx, ny, slices.len()];
        let mut data = Vec::with_capacity(nx * ny * slices.len());
        for s in slices {
            if s.shape() != (nx, ny) {
                return Err(VolumeError::ShapeMismatch(dims, [s.nx(), s.ny(), 1]));
            }
            data.extend_from_slice(s.as_slice());
        }
        Self::new(dims, spacing, data)
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.spacing
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn nz(&self) -> usize {
        self.dims[2]
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> f64 {
        self.data[x + self.dims[0] * (y + self.dims[1] * z)]
    }

    pub fn slice(&self, z: usize) -> Result<Slice2D, VolumeError> {
        let [nx, ny, nz] = self.dims;
        if z >= nz {
            return Err(VolumeError::SliceOutOfRange { z, nz });
        }
        let plane = nx * ny;
        let data = self.data[z * plane..(z + 1) * plane].to_vec();
        Ok(Grid::from_vec(nx, ny, data).expect("plane length"))
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    /// Reinterprets the samples as labels; every value must be a non-negative
    /// integer that fits in `u16`.
    pub fn to_mask(&self) -> Result<MaskVolume, VolumeError> {
        let labels = self
            .data
            .iter()
            .map(|&v| {
                if v >= 0.0 && v <= u16::MAX as f64 && v.fract() == 0.0 {
                    Ok(v as u16)
                } else {
                    Err(VolumeError::NotALabel(v))
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        MaskVolume::new(self.dims, self.spacing, labels)
    }
}

/// Label volume aligned with a [`CtVolume`]; 0 is background.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskVolume {
    dims: [usize; 3],
    spacing: [f64; 3],
    labels: Vec<u16>,
}

impl MaskVolume {
    pub fn new(dims: [usize; 3], spacing: [f64; 3], labels: Vec<u16>) -> Result<Self, VolumeError> {
        check_geometry(dims, spacing, labels.len())?;
        Ok(Self {
            dims,
            spacing,
            labels,
        })
    }

    pub fn zeros(dims: [usize; 3], spacing: [f64; 3]) -> Result<Self, VolumeError> {
        Self::new(dims, spacing, vec![0; dims.iter().product()])
    }

    /// Stacks binary slices along z; `true` becomes label 1.
    pub fn from_level_sets(slices: &[LevelSet], spacing: [f64; 3]) -> Result<Self, VolumeError> {
        let (nx, ny) = slices.first().map(Grid::shape).unwrap_or((0, 0));
        let dims = [nx, ny, slices.len()];
        let mut labels = Vec::with_capacity(nx * ny * slices.len());
        for s in slices {
            if s.shape() != (nx, ny) {
                return Err(VolumeError::ShapeMismatch(dims, [s.nx(), s.ny(), 1]));
            }
            labels.extend(s.iter().map(|&b| b as u16));
        }
        Self::new(dims, spacing, labels)
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.spacing
    }

    pub fn labels(&self) -> &[u16] {
        &self.labels
    }

    pub fn labels_mut(&mut self) -> &mut [u16] {
        &mut self.labels
    }

    pub fn nz(&self) -> usize {
        self.dims[2]
    }

    #[inline]
    pub fn offset(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.dims[0] * (y + self.dims[1] * z)
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> u16 {
        self.labels[self.offset(x, y, z)]
    }

    pub fn foreground_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l != 0).count()
    }

    /// Collapses every non-zero label to 1.
    pub fn binarize(&self) -> Self {
        Self {
            dims: self.dims,
            spacing: self.spacing,
            labels: self.labels.iter().map(|&l| (l != 0) as u16).collect(),
        }
    }

    pub fn slice(&self, z: usize) -> Result<Grid<u16>, VolumeError> {
        let [nx, ny, nz] = self.dims;
        if z >= nz {
            return Err(VolumeError::SliceOutOfRange { z, nz });
        }
        let plane = nx * ny;
        Ok(
            Grid::from_vec(nx, ny, self.labels[z * plane..(z + 1) * plane].to_vec())
                .expect("plane length"),
        )
    }

    /// Foreground of slice `z` as a level set.
    pub fn slice_binary(&self, z: usize) -> Result<LevelSet, VolumeError> {
        Ok(self.slice(z)?.map(|&l| l != 0))
    }

    /// `(label, count)` pairs in ascending label order, background included.
    pub fn histogram(&self) -> Vec<(u16, usize)> {
        let mut counts = std::collections::BTreeMap::new();
        for &l in &self.labels {
            *counts.entry(l).or_insert(0usize) += 1;
        }
        counts.into_iter().collect()
    }

    pub fn check_same_shape(&self, other_dims: [usize; 3]) -> Result<(), VolumeError> {
        if self.dims != other_dims {
            return Err(VolumeError::ShapeMismatch(self.dims, other_dims));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_geometry() {
        assert!(matches!(
            CtVolume::new([2, 2, 0], [1.0; 3], vec![]),
            Err(VolumeError::ZeroDimension(_))
        ));
        assert!(matches!(
            CtVolume::new([1, 1, 1], [1.0, 0.0, 1.0], vec![0.0]),
            Err(VolumeError::BadSpacing(_))
        ));
        assert!(matches!(
            MaskVolume::new([2, 2, 1], [1.0; 3], vec![0; 3]),
            Err(VolumeError::Length { .. })
        ));
        assert!(matches!(
            CtVolume::new([1, 1, 1], [1.0; 3], vec![f64::NAN]),
            Err(VolumeError::NonFinite(0))
        ));
    }

    #[test]
    fn binarize_is_idempotent() {
        let m = MaskVolume::new([3, 1, 1], [1.0; 3], vec![0, 2, 7]).unwrap();
        let b = m.binarize();
        assert_eq!(b.labels(), &[0, 1, 1]);
        assert_eq!(b.binarize(), b);
    }

    #[test]
    fn slice_extraction_order() {
        let v = CtVolume::new([2, 1, 2], [1.0; 3], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(v.slice(1).unwrap().as_slice(), &[3.0, 4.0]);
        assert_eq!(v.get(1, 0, 1), 4.0);
        assert!(v.slice(2).is_err());
    }

    #[test]
    fn ct_to_mask_requires_integers() {
        let v = CtVolume::new([2, 1, 1], [1.0; 3], vec![1.0, 0.5]).unwrap();
        assert!(matches!(v.to_mask(), Err(VolumeError::NotALabel(_))));
        let v = CtVolume::new([2, 1, 1], [1.0; 3], vec![1.0, 300.0]).unwrap();
        assert_eq!(v.to_mask().unwrap().labels(), &[1, 300]);
    }

    #[test]
    fn histogram_counts_labels() {
        let m = MaskVolume::new([4, 1, 1], [1.0; 3], vec![0, 2, 2, 1]).unwrap();
        assert_eq!(m.histogram(), vec![(0, 1), (1, 1), (2, 2)]);
    }
}
