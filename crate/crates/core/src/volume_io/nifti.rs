//! Uncompressed single-file NIfTI-1 (`.nii`) volumes.
//!
//! Only what the CT and mask volumes need is supported: 3D payloads of
//! uint8, int16 or float32 samples in either byte order. Gzip streams and
//! header extensions are rejected rather than skipped.

use byteorder::{BigEndian, ByteOrder as _, LittleEndian};
use thiserror::Error;

use super::{CtVolume, MaskVolume, VolumeError};

pub const HEADER_SIZE: usize = 348;
/// Header plus the 4-byte extension flag.
const DEFAULT_VOX_OFFSET: usize = 352;
const MAGIC: [u8; 4] = *b"n+1\0";

mod offsets {
    pub const SIZEOF_HDR: usize = 0;
    pub const DIM: usize = 40;
    pub const DATATYPE: usize = 70;
    pub const BITPIX: usize = 72;
    pub const PIXDIM: usize = 76;
    pub const VOX_OFFSET: usize = 108;
    pub const SCL_SLOPE: usize = 112;
    pub const SCL_INTER: usize = 116;
    pub const XYZT_UNITS: usize = 123;
    pub const DESCRIP: usize = 148;
    pub const MAGIC: usize = 344;
    pub const EXTENSION: usize = 348;
}

#[derive(Debug, Error, PartialEq)]
pub enum NiftiError {
    #[error("gzip-compressed NIfTI is not supported; decompress the file first")]
    Compressed,
    #[error("truncated payload: need {needed} bytes, got {got}")]
    Truncated { needed: usize, got: usize },
    #[error("dim[0] is invalid in both byte orders (le={le}, be={be})")]
    BadDimCount { le: i16, be: i16 },
    #[error("sizeof_hdr must be 348, got {0}")]
    BadHeaderSize(i32),
    #[error("magic mismatch: expected \"n+1\\0\", got {0:?}")]
    BadMagic([u8; 4]),
    #[error("unsupported datatype code {0}")]
    UnsupportedDatatype(i16),
    #[error("dim[{index}] = {value} is not a positive size")]
    BadDim { index: usize, value: i16 },
    #[error("vox_offset {0} is below the 348-byte header")]
    BadVoxOffset(f32),
    #[error("header extensions are not supported")]
    Extension,
    #[error("dimension {0} exceeds the NIfTI-1 limit of 32767")]
    DimTooLarge(usize),
    #[error("value {value} is not representable as {datatype}")]
    Unrepresentable { value: f64, datatype: DataType },
    #[error("spacing {0} is not representable as float32")]
    SpacingPrecision(f64),
    #[error(transparent)]
    Volume(#[from] VolumeError),
}

/// Voxel storage codes accepted by the reader and writer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataType {
    UInt8,
    Int16,
    Float32,
}

impl DataType {
    pub fn from_code(code: i16) -> Result<Self, NiftiError> {
        match code {
            2 => Ok(Self::UInt8),
            4 => Ok(Self::Int16),
            16 => Ok(Self::Float32),
            other => Err(NiftiError::UnsupportedDatatype(other)),
        }
    }

    pub fn code(self) -> i16 {
        match self {
            Self::UInt8 => 2,
            Self::Int16 => 4,
            Self::Float32 => 16,
        }
    }

    pub fn bytes_per_voxel(self) -> usize {
        match self {
            Self::UInt8 => 1,
            Self::Int16 => 2,
            Self::Float32 => 4,
        }
    }

    pub fn bitpix(self) -> i16 {
        8 * self.bytes_per_voxel() as i16
    }

    /// Whether `v` survives a write/read cycle in this type unchanged.
    fn represents(self, v: f64) -> bool {
        match self {
            Self::UInt8 => v.fract() == 0.0 && (0.0..=255.0).contains(&v),
            Self::Int16 => v.fract() == 0.0 && (-32768.0..=32767.0).contains(&v),
            Self::Float32 => (v as f32) as f64 == v,
        }
    }
}

impl std::fmt::Display for DataType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::UInt8 => "uint8",
            Self::Int16 => "int16",
            Self::Float32 => "float32",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ByteOrder {
    #[default]
    Little,
    Big,
}

impl ByteOrder {
    fn i16(self, b: &[u8]) -> i16 {
        match self {
            Self::Little => LittleEndian::read_i16(b),
            Self::Big => BigEndian::read_i16(b),
        }
    }

    fn i32(self, b: &[u8]) -> i32 {
        match self {
            Self::Little => LittleEndian::read_i32(b),
            Self::Big => BigEndian::read_i32(b),
        }
    }

    fn f32(self, b: &[u8]) -> f32 {
        match self {
            Self::Little => LittleEndian::read_f32(b),
            Self::Big => BigEndian::read_f32(b),
        }
    }

    fn put_i16(self, b: &mut [u8], v: i16) {
        match self {
            Self::Little => LittleEndian::write_i16(b, v),
            Self::Big => BigEndian::write_i16(b, v),
        }
    }

    fn put_i32(self, b: &mut [u8], v: i32) {
        match self {
            Self::Little => LittleEndian::write_i32(b, v),
            Self::Big => BigEndian::write_i32(b, v),
        }
    }

    fn put_f32(self, b: &mut [u8], v: f32) {
        match self {
            Self::Little => LittleEndian::write_f32(b, v),
            Self::Big => BigEndian::write_f32(b, v),
        }
    }
}

/// The header fields this subset reads and writes.
#[derive(Debug, Clone, PartialEq)]
pub struct NiftiHeader {
    pub sizeof_hdr: i32,
    pub dim: [i16; 8],
    pub datatype: DataType,
    pub bitpix: i16,
    pub pixdim: [f32; 8],
    pub vox_offset: f32,
    pub scl_slope: f32,
    pub scl_inter: f32,
    pub descrip: String,
    pub magic: [u8; 4],
    pub byte_order: ByteOrder,
}

impl NiftiHeader {
    /// The first three dims, padding missing ones with 1.
    pub fn dims3(&self) -> [usize; 3] {
        let n = self.dim[0] as usize;
        std::array::from_fn(|i| if i < n { self.dim[i + 1] as usize } else { 1 })
    }

    pub fn spacing3(&self) -> [f64; 3] {
        let n = self.dim[0] as usize;
        std::array::from_fn(|i| {
            if i < n {
                (self.pixdim[i + 1] as f64).abs()
            } else {
                1.0
            }
        })
    }

    fn scaling(&self) -> Option<(f64, f64)> {
        (self.scl_slope != 0.0 && self.scl_slope.is_finite())
            .then_some((self.scl_slope as f64, self.scl_inter as f64))
    }

    fn parse(bytes: &[u8]) -> Result<Self, NiftiError> {
        if bytes.len() >= 2 && bytes[0] == 0x1f && bytes[1] == 0x8b {
            return Err(NiftiError::Compressed);
        }
        if bytes.len() < HEADER_SIZE {
            return Err(NiftiError::Truncated {
                needed: HEADER_SIZE,
                got: bytes.len(),
            });
        }
        let dim0 = &bytes[offsets::DIM..offsets::DIM + 2];
        let le = LittleEndian::read_i16(dim0);
        let be = BigEndian::read_i16(dim0);
        let order = if (1..=7).contains(&le) {
            ByteOrder::Little
        } else if (1..=7).contains(&be) {
            ByteOrder::Big
        } else {
            return Err(NiftiError::BadDimCount { le, be });
        };

        let sizeof_hdr = order.i32(&bytes[offsets::SIZEOF_HDR..]);
        if sizeof_hdr != HEADER_SIZE as i32 {
            return Err(NiftiError::BadHeaderSize(sizeof_hdr));
        }
        let mut magic = [0u8; 4];
        magic.copy_from_slice(&bytes[offsets::MAGIC..offsets::MAGIC + 4]);
        if magic != MAGIC {
            return Err(NiftiError::BadMagic(magic));
        }

        let dim: [i16; 8] = std::array::from_fn(|i| order.i16(&bytes[offsets::DIM + 2 * i..]));
        for index in 1..=dim[0] as usize {
            if dim[index] < 1 {
                return Err(NiftiError::BadDim {
                    index,
                    value: dim[index],
                });
            }
        }
        let datatype = DataType::from_code(order.i16(&bytes[offsets::DATATYPE..]))?;
        let pixdim: [f32; 8] =
            std::array::from_fn(|i| order.f32(&bytes[offsets::PIXDIM + 4 * i..]));
        let vox_offset = order.f32(&bytes[offsets::VOX_OFFSET..]);
        if !(vox_offset >= HEADER_SIZE as f32) {
            return Err(NiftiError::BadVoxOffset(vox_offset));
        }
        if bytes.len() > offsets::EXTENSION && bytes[offsets::EXTENSION] != 0 {
            return Err(NiftiError::Extension);
        }
        let descrip_raw = &bytes[offsets::DESCRIP..offsets::DESCRIP + 80];
        let end = descrip_raw.iter().position(|&b| b == 0).unwrap_or(80);
        let descrip = String::from_utf8_lossy(&descrip_raw[..end]).into_owned();

        Ok(Self {
            sizeof_hdr,
            dim,
            datatype,
            bitpix: order.i16(&bytes[offsets::BITPIX..]),
            pixdim,
            vox_offset,
            scl_slope: order.f32(&bytes[offsets::SCL_SLOPE..]),
            scl_inter: order.f32(&bytes[offsets::SCL_INTER..]),
            descrip,
            magic,
            byte_order: order,
        })
    }

    fn encode(&self) -> [u8; HEADER_SIZE] {
        let o = self.byte_order;
        let mut h = [0u8; HEADER_SIZE];
        o.put_i32(&mut h[offsets::SIZEOF_HDR..], self.sizeof_hdr);
        for (i, &d) in self.dim.iter().enumerate() {
            o.put_i16(&mut h[offsets::DIM + 2 * i..], d);
        }
        o.put_i16(&mut h[offsets::DATATYPE..], self.datatype.code());
        o.put_i16(&mut h[offsets::BITPIX..], self.bitpix);
        for (i, &p) in self.pixdim.iter().enumerate() {
            o.put_f32(&mut h[offsets::PIXDIM + 4 * i..], p);
        }
        o.put_f32(&mut h[offsets::VOX_OFFSET..], self.vox_offset);
        o.put_f32(&mut h[offsets::SCL_SLOPE..], self.scl_slope);
        o.put_f32(&mut h[offsets::SCL_INTER..], self.scl_inter);
        // millimetres
        h[offsets::XYZT_UNITS] = 2;
        let d = self.descrip.as_bytes();
        let n = d.len().min(79);
        h[offsets::DESCRIP..offsets::DESCRIP + n].copy_from_slice(&d[..n]);
        h[offsets::MAGIC..offsets::MAGIC + 4].copy_from_slice(&self.magic);
        h
    }
}

/// What a file decoded into: uint8 payloads are masks, everything else CT.
#[derive(Debug, Clone, PartialEq)]
pub enum NiftiVolume {
    Ct(CtVolume),
    Mask(MaskVolume),
}

impl NiftiVolume {
    pub fn dims(&self) -> [usize; 3] {
        match self {
            Self::Ct(v) => v.dims(),
            Self::Mask(m) => m.dims(),
        }
    }

    pub fn into_ct(self) -> CtVolume {
        match self {
            Self::Ct(v) => v,
            Self::Mask(m) => {
                let data = m.labels().iter().map(|&l| l as f64).collect();
                CtVolume::new(m.dims(), m.spacing(), data).expect("mask geometry already valid")
            }
        }
    }

    pub fn into_mask(self) -> Result<MaskVolume, VolumeError> {
        match self {
            Self::Ct(v) => v.to_mask(),
            Self::Mask(m) => Ok(m),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub enum VolumeRef<'a> {
    Ct(&'a CtVolume),
    Mask(&'a MaskVolume),
}

impl<'a> From<&'a CtVolume> for VolumeRef<'a> {
    fn from(v: &'a CtVolume) -> Self {
        Self::Ct(v)
    }
}

impl<'a> From<&'a MaskVolume> for VolumeRef<'a> {
    fn from(m: &'a MaskVolume) -> Self {
        Self::Mask(m)
    }
}

impl VolumeRef<'_> {
    fn dims(&self) -> [usize; 3] {
        match self {
            Self::Ct(v) => v.dims(),
            Self::Mask(m) => m.dims(),
        }
    }

    fn spacing(&self) -> [f64; 3] {
        match self {
            Self::Ct(v) => v.spacing(),
            Self::Mask(m) => m.spacing(),
        }
    }

    fn values(&self) -> Box<dyn Iterator<Item = f64> + '_> {
        match self {
            Self::Ct(v) => Box::new(v.data().iter().copied()),
            Self::Mask(m) => Box::new(m.labels().iter().map(|&l| l as f64)),
        }
    }
}

/// Decodes a `.nii` payload.
///
/// Samples are scaled by `scl_slope`/`scl_inter` when the slope is non-zero.
/// Only the first three dimensions are read.
pub fn read_nifti(bytes: &[u8]) -> Result<(NiftiVolume, NiftiHeader), NiftiError> {
    let header = NiftiHeader::parse(bytes)?;
    let dims = header.dims3();
    let spacing = header.spacing3();
    let count: usize = dims.iter().product();
    let width = header.datatype.bytes_per_voxel();
    let start = header.vox_offset as usize;
    let needed = start + count * width;
    if bytes.len() < needed {
        return Err(NiftiError::Truncated {
            needed,
            got: bytes.len(),
        });
    }
    let payload = &bytes[start..needed];
    let order = header.byte_order;
    let scaling = header.scaling();

    if header.datatype == DataType::UInt8 && scaling.is_none_or(|s| s == (1.0, 0.0)) {
        let labels = payload.iter().map(|&b| b as u16).collect();
        let mask = MaskVolume::new(dims, spacing, labels)?;
        return Ok((NiftiVolume::Mask(mask), header));
    }

    let raw: Vec<f64> = match header.datatype {
        DataType::UInt8 => payload.iter().map(|&b| b as f64).collect(),
        DataType::Int16 => payload
            .chunks_exact(2)
            .map(|c| order.i16(c) as f64)
            .collect(),
        DataType::Float32 => payload
            .chunks_exact(4)
            .map(|c| order.f32(c) as f64)
            .collect(),
    };
    let data = match scaling {
        Some((slope, inter)) => raw.into_iter().map(|r| r * slope + inter).collect(),
        None => raw,
    };
    let volume = CtVolume::new(dims, spacing, data)?;
    Ok((NiftiVolume::Ct(volume), header))
}

/// Encodes a volume; fails if any voxel or spacing value cannot be stored
/// exactly in the chosen type.
pub fn write_nifti<'a>(
    volume: impl Into<VolumeRef<'a>>,
    datatype: DataType,
    order: ByteOrder,
) -> Result<Vec<u8>, NiftiError> {
    write_nifti_described(volume, datatype, order, "")
}

/// [`write_nifti`] with a free-text `descrip` field (truncated to 79 bytes).
pub fn write_nifti_described<'a>(
    volume: impl Into<VolumeRef<'a>>,
    datatype: DataType,
    order: ByteOrder,
    descrip: &str,
) -> Result<Vec<u8>, NiftiError> {
    let volume = volume.into();
    let dims = volume.dims();
    let spacing = volume.spacing();
    for &d in &dims {
        if d > i16::MAX as usize {
            return Err(NiftiError::DimTooLarge(d));
        }
    }
    for &s in &spacing {
        if (s as f32) as f64 != s {
            return Err(NiftiError::SpacingPrecision(s));
        }
    }
    // always 3-D so a single slice keeps its z spacing
    let mut dim = [1i16; 8];
    dim[0] = 3;
    for i in 0..3 {
        dim[i + 1] = dims[i] as i16;
    }
    let mut pixdim = [1.0f32; 8];
    for i in 0..3 {
        pixdim[i + 1] = spacing[i] as f32;
    }
    let header = NiftiHeader {
        sizeof_hdr: HEADER_SIZE as i32,
        dim,
        datatype,
        bitpix: datatype.bitpix(),
        pixdim,
        vox_offset: DEFAULT_VOX_OFFSET as f32,
        scl_slope: 1.0,
        scl_inter: 0.0,
        descrip: descrip.to_owned(),
        magic: MAGIC,
        byte_order: order,
    };

    let count: usize = dims.iter().product();
    let mut out = Vec::with_capacity(DEFAULT_VOX_OFFSET + count * datatype.bytes_per_voxel());
    out.extend_from_slice(&header.encode());
    out.extend_from_slice(&[0u8; DEFAULT_VOX_OFFSET - HEADER_SIZE]);
    let mut buf = [0u8; 4];
    for value in volume.values() {
        if !datatype.represents(value) {
            return Err(NiftiError::Unrepresentable { value, datatype });
        }
        match datatype {
            DataType::UInt8 => out.push(value as u8),
            DataType::Int16 => {
                order.put_i16(&mut buf, value as i16);
                out.extend_from_slice(&buf[..2]);
            }
            DataType::Float32 => {
                order.put_f32(&mut buf, value as f32);
                out.extend_from_slice(&buf);
            }
        }
    }
    Ok(out)
}
