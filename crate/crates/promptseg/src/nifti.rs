//! Read-only NIfTI-1 single-file (`.nii`, `.nii.gz`) ingestion.
//!
//! Only the fields needed to build a [`Volume3D`] are read: `dim`,
//! `datatype`, `pixdim` and `vox_offset`. Byte order is detected from
//! `sizeof_hdr`. `scl_slope`/`scl_inter` are ignored; voxels keep their
//! stored values.

use std::io::Read;

use flate2::read::MultiGzDecoder;
use promptseg_core::{Dims, Spacing, Volume3D, VoxelData};
use thiserror::Error;

pub const HEADER_SIZE: usize = 348;
pub const MAGIC: &[u8; 4] = b"n+1\0";

const OFF_DIM: usize = 40;
const OFF_DATATYPE: usize = 70;
const OFF_PIXDIM: usize = 76;
const OFF_VOX_OFFSET: usize = 108;
const OFF_MAGIC: usize = 344;

pub const DT_UINT8: i16 = 2;
pub const DT_INT16: i16 = 4;
pub const DT_FLOAT32: i16 = 16;
pub const DT_UINT16: i16 = 512;

#[derive(Debug, Error)]
pub enum NiftiError {
    #[error("BadHeader: {0}")]
    BadHeader(String),
    #[error("UnsupportedDatatype: code {0}")]
    UnsupportedDatatype(i16),
    #[error("BadMagic: magic field is not \"n+1\\0\"")]
    BadMagic,
    #[error("TruncatedPayload: need {expected} payload bytes, found {actual}")]
    TruncatedPayload { expected: u128, actual: usize },
    #[error("NonPositivePixdim: pixdim[{0}] must be finite and > 0")]
    NonPositivePixdim(usize),
    #[error("gzip: {0}")]
    Gzip(#[from] std::io::Error),
}

impl NiftiError {
    pub fn name(&self) -> &'static str {
        match self {
            NiftiError::BadHeader(_) => "BadHeader",
            NiftiError::UnsupportedDatatype(_) => "UnsupportedDatatype",
            NiftiError::BadMagic => "BadMagic",
            NiftiError::TruncatedPayload { .. } => "TruncatedPayload",
            NiftiError::NonPositivePixdim(_) => "NonPositivePixdim",
            NiftiError::Gzip(_) => "Gzip",
        }
    }
}

#[derive(Clone, Copy)]
struct Reader<'a> {
    b: &'a [u8],
    big_endian: bool,
}

impl Reader<'_> {
    fn bytes<const N: usize>(&self, at: usize) -> [u8; N] {
        let mut a = [0u8; N];
        a.copy_from_slice(&self.b[at..at + N]);
        if self.big_endian {
            a.reverse();
        }
        a
    }

    fn i16(&self, at: usize) -> i16 {
        i16::from_le_bytes(self.bytes(at))
    }

    fn i32(&self, at: usize) -> i32 {
        i32::from_le_bytes(self.bytes(at))
    }

    fn f32(&self, at: usize) -> f32 {
        f32::from_le_bytes(self.bytes(at))
    }
}

pub fn is_gzip(b: &[u8]) -> bool {
    b.len() >= 2 && b[0] == 0x1f && b[1] == 0x8b
}

pub fn parse_nifti(b: &[u8]) -> Result<Volume3D, NiftiError> {
    if is_gzip(b) {
        let mut out = Vec::new();
        MultiGzDecoder::new(b).read_to_end(&mut out)?;
        return parse_raw(&out);
    }
    parse_raw(b)
}

fn parse_raw(b: &[u8]) -> Result<Volume3D, NiftiError> {
    if b.len() < HEADER_SIZE {
        return Err(NiftiError::BadHeader(format!("{} bytes, header needs {HEADER_SIZE}", b.len())));
    }
    let raw = [b[0], b[1], b[2], b[3]];
    let big_endian = if i32::from_le_bytes(raw) == HEADER_SIZE as i32 {
        false
    } else if i32::from_be_bytes(raw) == HEADER_SIZE as i32 {
        true
    } else {
        return Err(NiftiError::BadHeader(format!(
            "sizeof_hdr is {} (LE) / {} (BE), expected 348",
            i32::from_le_bytes(raw),
            i32::from_be_bytes(raw)
        )));
    };
    let r = Reader { b, big_endian };
    debug_assert_eq!(r.i32(0), HEADER_SIZE as i32);

    if &b[OFF_MAGIC..OFF_MAGIC + 4] != MAGIC {
        return Err(NiftiError::BadMagic);
    }

    let dim: Vec<i16> = (0..8).map(|i| r.i16(OFF_DIM + 2 * i)).collect();
    let rank = dim[0];
    if !(1..=7).contains(&rank) {
        return Err(NiftiError::BadHeader(format!("dim[0] = {rank}")));
    }
    let rank = rank as usize;
    let mut extent = [1u32; 3];
    for axis in 1..=rank {
        if dim[axis] < 1 {
            return Err(NiftiError::BadHeader(format!("dim[{axis}] = {}", dim[axis])));
        }
        if axis <= 3 {
            extent[axis - 1] = dim[axis] as u32;
        } else if dim[axis] != 1 {
            return Err(NiftiError::BadHeader(format!(
                "dim[{axis}] = {}, only 3D volumes are supported",
                dim[axis]
            )));
        }
    }

    let datatype = r.i16(OFF_DATATYPE);
    let width = match datatype {
        DT_UINT8 => 1,
        DT_INT16 | DT_UINT16 => 2,
        DT_FLOAT32 => 4,
        other => return Err(NiftiError::UnsupportedDatatype(other)),
    };

    let mut spacing = [1.0f32; 3];
    for axis in 1..=3 {
        let p = r.f32(OFF_PIXDIM + 4 * axis);
        if axis > rank {
            continue;
        }
        if !(p.is_finite() && p > 0.0) {
            return Err(NiftiError::NonPositivePixdim(axis));
        }
        spacing[axis - 1] = p;
    }

    let vox_offset = r.f32(OFF_VOX_OFFSET);
    if !vox_offset.is_finite() || vox_offset < 0.0 {
        return Err(NiftiError::BadHeader(format!("vox_offset = {vox_offset}")));
    }
    // single-file images place data no earlier than the end of the header
    let start = (vox_offset as usize).max(HEADER_SIZE);

    let dims = Dims::new(extent[0], extent[1], extent[2]);
    let expected = dims.voxel_count_u128() * width as u128;
    let available = b.len().saturating_sub(start);
    if (available as u128) < expected {
        return Err(NiftiError::TruncatedPayload { expected, actual: available });
    }
    let payload = &b[start..start + expected as usize];
    let data = decode_payload(payload, datatype, big_endian);
    Volume3D::new(dims, Spacing::new(spacing[0], spacing[1], spacing[2]), data)
        .map_err(|e| NiftiError::BadHeader(e.to_string()))
}

fn decode_payload(p: &[u8], datatype: i16, big_endian: bool) -> VoxelData {
    fn pairs(p: &[u8], be: bool) -> impl Iterator<Item = [u8; 2]> + '_ {
        p.chunks_exact(2).map(move |c| if be { [c[1], c[0]] } else { [c[0], c[1]] })
    }
    match datatype {
        DT_UINT8 => VoxelData::U8(p.to_vec()),
        DT_INT16 => VoxelData::I16(pairs(p, big_endian).map(i16::from_le_bytes).collect()),
        DT_UINT16 => VoxelData::U16(pairs(p, big_endian).map(u16::from_le_bytes).collect()),
        DT_FLOAT32 => VoxelData::F32(
            p.chunks_exact(4)
                .map(|c| {
                    let a = [c[0], c[1], c[2], c[3]];
                    if big_endian {
                        f32::from_be_bytes(a)
                    } else {
                        f32::from_le_bytes(a)
                    }
                })
                .collect(),
        ),
        _ => unreachable!("datatype validated by caller"),
    }
}
