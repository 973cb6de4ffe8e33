//! Dense volumes, binary masks and voxel coordinates.
//!
//! Every flat buffer in this crate is laid out x-fastest, then y, then z:
//! the voxel at `(i, j, k)` lives at `i + nx * (j + ny * k)`.

use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

/// Volume extent in voxels along x, y and z.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(from = "[u32; 3]", into = "[u32; 3]"))]
pub struct Dims {
    pub nx: u32,
    pub ny: u32,
    pub nz: u32,
}

impl Dims {
    pub const fn new(nx: u32, ny: u32, nz: u32) -> Self {
        Dims { nx, ny, nz }
    }

    pub const fn as_array(self) -> [u32; 3] {
        [self.nx, self.ny, self.nz]
    }

    /// Total voxel count, or `None` when it does not fit in `usize`.
    pub fn voxel_count(self) -> Option<usize> {
        let n = (self.nx as u128) * (self.ny as u128) * (self.nz as u128);
        usize::try_from(n).ok()
    }

    /// Voxel count as an exact 128-bit value; never overflows.
    pub fn voxel_count_u128(self) -> u128 {
        (self.nx as u128) * (self.ny as u128) * (self.nz as u128)
    }

    pub fn has_zero(self) -> bool {
        self.nx == 0 || self.ny == 0 || self.nz == 0
    }

    pub fn contains(self, c: VoxelCoord) -> bool {
        c.i < self.nx && c.j < self.ny && c.k < self.nz
    }

    /// Linear index of an in-bounds coordinate.
    #[inline]
    pub fn index(self, c: VoxelCoord) -> usize {
        c.i as usize + self.nx as usize * (c.j as usize + self.ny as usize * c.k as usize)
    }

    /// Inverse of [`Dims::index`].
    #[inline]
    pub fn coord(self, idx: usize) -> VoxelCoord {
        let nx = self.nx as usize;
        let ny = self.ny as usize;
        VoxelCoord::new((idx % nx) as u32, ((idx / nx) % ny) as u32, (idx / (nx * ny)) as u32)
    }
}

impl From<[u32; 3]> for Dims {
    fn from(a: [u32; 3]) -> Self {
        Dims::new(a[0], a[1], a[2])
    }
}

impl From<Dims> for [u32; 3] {
    fn from(d: Dims) -> Self {
        d.as_array()
    }
}

/// Physical voxel size in millimeters.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Spacing {
    pub sx: f32,
    pub sy: f32,
    pub sz: f32,
}

impl Spacing {
    pub const UNIT: Spacing = Spacing { sx: 1.0, sy: 1.0, sz: 1.0 };

    pub const fn new(sx: f32, sy: f32, sz: f32) -> Self {
        Spacing { sx, sy, sz }
    }

    pub fn is_valid(self) -> bool {
        [self.sx, self.sy, self.sz].iter().all(|s| s.is_finite() && *s > 0.0)
    }

    fn bits(self) -> [u32; 3] {
        [self.sx.to_bits(), self.sy.to_bits(), self.sz.to_bits()]
    }
}

/// Integer voxel index `(i, j, k)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(from = "[u32; 3]", into = "[u32; 3]"))]
pub struct VoxelCoord {
    pub i: u32,
    pub j: u32,
    pub k: u32,
}

impl VoxelCoord {
    pub const fn new(i: u32, j: u32, k: u32) -> Self {
        VoxelCoord { i, j, k }
    }
}

impl From<[u32; 3]> for VoxelCoord {
    fn from(a: [u32; 3]) -> Self {
        VoxelCoord::new(a[0], a[1], a[2])
    }
}

impl From<VoxelCoord> for [u32; 3] {
    fn from(c: VoxelCoord) -> Self {
        [c.i, c.j, c.k]
    }
}

/// Voxel element type. The discriminant is the SVOL1 dtype code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[repr(u8)]
pub enum Dtype {
    U8 = 0,
    I16 = 1,
    U16 = 2,
    F32 = 3,
}

impl Dtype {
    pub const ALL: [Dtype; 4] = [Dtype::U8, Dtype::I16, Dtype::U16, Dtype::F32];

    pub const fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Dtype::U8),
            1 => Some(Dtype::I16),
            2 => Some(Dtype::U16),
            3 => Some(Dtype::F32),
            _ => None,
        }
    }

    pub const fn byte_width(self) -> usize {
        match self {
            Dtype::U8 => 1,
            Dtype::I16 | Dtype::U16 => 2,
            Dtype::F32 => 4,
        }
    }
}

/// Typed voxel buffer.
///
/// Equality is bitwise for `F32`, so a NaN voxel equals itself and `0.0`
/// differs from `-0.0`. This matches the digest, which hashes raw bytes.
#[derive(Debug, Clone)]
pub enum VoxelData {
    U8(Vec<u8>),
    I16(Vec<i16>),
    U16(Vec<u16>),
    F32(Vec<f32>),
}

impl VoxelData {
    pub fn dtype(&self) -> Dtype {
        match self {
            VoxelData::U8(_) => Dtype::U8,
            VoxelData::I16(_) => Dtype::I16,
            VoxelData::U16(_) => Dtype::U16,
            VoxelData::F32(_) => Dtype::F32,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            VoxelData::U8(v) => v.len(),
            VoxelData::I16(v) => v.len(),
            VoxelData::U16(v) => v.len(),
            VoxelData::F32(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Value at `idx`, widened to `f64`.
    #[inline]
    pub fn get_f64(&self, idx: usize) -> f64 {
        match self {
            VoxelData::U8(v) => v[idx] as f64,
            VoxelData::I16(v) => v[idx] as f64,
            VoxelData::U16(v) => v[idx] as f64,
            VoxelData::F32(v) => v[idx] as f64,
        }
    }
}

impl PartialEq for VoxelData {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (VoxelData::U8(a), VoxelData::U8(b)) => a == b,
            (VoxelData::I16(a), VoxelData::I16(b)) => a == b,
            (VoxelData::U16(a), VoxelData::U16(b)) => a == b,
            (VoxelData::F32(a), VoxelData::F32(b)) => {
                a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
            }
            _ => false,
        }
    }
}

impl Eq for VoxelData {}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VolumeError {
    #[error("ZeroDim: every dimension must be at least 1")]
    ZeroDim,
    #[error("NonPositiveSpacing: spacing components must be finite and > 0")]
    NonPositiveSpacing,
    #[error("DimsOverflow: voxel count does not fit in memory")]
    DimsOverflow,
    #[error("LengthMismatch: buffer has {actual} voxels, dims imply {expected}")]
    LengthMismatch { expected: usize, actual: usize },
}

/// A dense scalar 3D image.
#[derive(Debug, Clone)]
pub struct Volume3D {
    dims: Dims,
    spacing: Spacing,
    data: VoxelData,
}

impl Volume3D {
    pub fn new(dims: Dims, spacing: Spacing, data: VoxelData) -> Result<Self, VolumeError> {
        if dims.has_zero() {
            return Err(VolumeError::ZeroDim);
        }
        if !spacing.is_valid() {
            return Err(VolumeError::NonPositiveSpacing);
        }
        let expected = dims.voxel_count().ok_or(VolumeError::DimsOverflow)?;
        if data.len() != expected {
            return Err(VolumeError::LengthMismatch { expected, actual: data.len() });
        }
        Ok(Volume3D { dims, spacing, data })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn spacing(&self) -> Spacing {
        self.spacing
    }

    pub fn dtype(&self) -> Dtype {
        self.data.dtype()
    }

    pub fn data(&self) -> &VoxelData {
        &self.data
    }

    pub fn into_data(self) -> VoxelData {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn intensity(&self, idx: usize) -> f64 {
        self.data.get_f64(idx)
    }

    #[inline]
    pub fn intensity_at(&self, c: VoxelCoord) -> f64 {
        self.data.get_f64(self.dims.index(c))
    }
}

impl PartialEq for Volume3D {
    fn eq(&self, other: &Self) -> bool {
        self.dims == other.dims
            && self.spacing.bits() == other.spacing.bits()
            && self.data == other.data
    }
}

impl Eq for Volume3D {}

/// A binary segmentation volume.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Mask3D {
    dims: Dims,
    bits: Vec<bool>,
}

impl Mask3D {
    /// All-zero mask.
    pub fn zeros(dims: Dims) -> Result<Self, VolumeError> {
        if dims.has_zero() {
            return Err(VolumeError::ZeroDim);
        }
        let n = dims.voxel_count().ok_or(VolumeError::DimsOverflow)?;
        Ok(Mask3D { dims, bits: vec![false; n] })
    }

    pub fn from_bits(dims: Dims, bits: Vec<bool>) -> Result<Self, VolumeError> {
        if dims.has_zero() {
            return Err(VolumeError::ZeroDim);
        }
        let expected = dims.voxel_count().ok_or(VolumeError::DimsOverflow)?;
        if bits.len() != expected {
            return Err(VolumeError::LengthMismatch { expected, actual: bits.len() });
        }
        Ok(Mask3D { dims, bits })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn bits_mut(&mut self) -> &mut [bool] {
        &mut self.bits
    }

    pub fn into_bits(self) -> Vec<bool> {
        self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn get(&self, c: VoxelCoord) -> bool {
        self.bits[self.dims.index(c)]
    }

    pub fn set(&mut self, c: VoxelCoord, value: bool) {
        let idx = self.dims.index(c);
        self.bits[idx] = value;
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn is_all_zero(&self) -> bool {
        !self.bits.iter().any(|b| *b)
    }

    /// Number of voxels where `self` and `other` differ. Panics on dims mismatch.
    pub fn hamming_distance(&self, other: &Mask3D) -> usize {
        assert_eq!(self.dims, other.dims, "hamming distance needs congruent masks");
        self.bits.iter().zip(&other.bits).filter(|(a, b)| a != b).count()
    }

    /// Iterator over the coordinates of set voxels.
    pub fn ones(&self) -> impl Iterator<Item = VoxelCoord> + '_ {
        let dims = self.dims;
        self.bits.iter().enumerate().filter(|(_, b)| **b).map(move |(i, _)| dims.coord(i))
    }
}
