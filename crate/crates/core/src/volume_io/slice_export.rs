use super::{CtVolume, VolumeError};

/// 8-bit grayscale raster, row-major from the top row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl GrayImage {
    /// Binary PGM (`P5`, maxval 255).
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }
}

/// Maps one HU sample into `0..=255` under the window `(lo, hi)`.
#[inline]
pub(crate) fn window_to_u8(v: f64, lo: f64, hi: f64) -> u8 {
    let t = (v.clamp(lo, hi) - lo) * 255.0 / (hi - lo);
    // f64::round rounds half away from zero
    t.round() as u8
}

/// Renders slice `z` of `volume` through the HU window `(lo, hi)`.
pub fn export_slice(
    volume: &CtVolume,
    z: usize,
    window: (f64, f64),
) -> Result<GrayImage, VolumeError> {
    let (lo, hi) = window;
    if !(lo < hi) {
        return Err(VolumeError::BadWindow(lo, hi));
    }
    let slice = volume.slice(z)?;
    Ok(GrayImage {
        width: slice.nx(),
        height: slice.ny(),
        pixels: slice.iter().map(|&v| window_to_u8(v, lo, hi)).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn window_endpoints_and_midpoint() {
        assert_eq!(window_to_u8(-200.0, -200.0, 300.0), 0);
        assert_eq!(window_to_u8(300.0, -200.0, 300.0), 255);
        assert_eq!(window_to_u8(-1000.0, -200.0, 300.0), 0);
        // 250 * 255 / 500 = 127.5
        assert_eq!(window_to_u8(50.0, -200.0, 300.0), 128);
    }

    #[test]
    fn pgm_layout() {
        let v = CtVolume::new([2, 1, 2], [1.0; 3], vec![0.0, 0.0, -200.0, 300.0]).unwrap();
        let img = export_slice(&v, 1, (-200.0, 300.0)).unwrap();
        assert_eq!(img.to_pgm(), b"P5\n2 1\n255\n\x00\xff".to_vec());
        assert_eq!(
            export_slice(&v, 2, (-200.0, 300.0)).unwrap_err(),
            VolumeError::SliceOutOfRange { z: 2, nz: 2 }
        );
    }

    proptest! {
        #[test]
        fn window_is_monotone(a in -2000.0f64..4000.0, b in -2000.0f64..4000.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(window_to_u8(lo, -200.0, 300.0) <= window_to_u8(hi, -200.0, 300.0));
        }
    }
}
