//! SVOL1 volume wire format.
//!
//! ```text
//! offset  size  field
//! 0       4     magic "SVOL"
//! 4       1     version (0x01)
//! 5       1     dtype code (U8=0, I16=1, U16=2, F32=3)
//! 6       12    nx, ny, nz   (u32 LE)
//! 18      12    sx, sy, sz   (f32 LE)
//! 30      ..    voxels, little-endian, x-fastest
//! ```

use alloc::vec::Vec;

use thiserror::Error;

use crate::volume::{Dims, Dtype, Spacing, Volume3D, VolumeError, VoxelData};

pub const MAGIC: &[u8; 4] = b"SVOL";
pub const VERSION: u8 = 0x01;
pub const HEADER_LEN: usize = 30;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SvolError {
    #[error("BadMagic: stream does not start with \"SVOL\"")]
    BadMagic,
    #[error("UnsupportedVersion: version byte {0:#04x}")]
    UnsupportedVersion(u8),
    #[error("UnknownDtype: dtype code {0}")]
    UnknownDtype(u8),
    #[error("TruncatedHeader: {0} bytes, header needs {HEADER_LEN}")]
    TruncatedHeader(usize),
    #[error("TruncatedPayload: payload has {actual} bytes, header implies {expected}")]
    TruncatedPayload { expected: u128, actual: usize },
    #[error("ZeroDim: every dimension must be at least 1")]
    ZeroDim,
    #[error("NonPositiveSpacing: spacing components must be finite and > 0")]
    NonPositiveSpacing,
    #[error("DimsOverflow: voxel count does not fit in memory")]
    DimsOverflow,
}

impl SvolError {
    /// Stable error name, as echoed in API error bodies.
    pub fn name(&self) -> &'static str {
        match self {
            SvolError::BadMagic => "BadMagic",
            SvolError::UnsupportedVersion(_) => "UnsupportedVersion",
            SvolError::UnknownDtype(_) => "UnknownDtype",
            SvolError::TruncatedHeader(_) => "TruncatedHeader",
            SvolError::TruncatedPayload { .. } => "TruncatedPayload",
            SvolError::ZeroDim => "ZeroDim",
            SvolError::NonPositiveSpacing => "NonPositiveSpacing",
            SvolError::DimsOverflow => "DimsOverflow",
        }
    }
}

/// Parsed SVOL1 header, available before the payload is touched.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvolHeader {
    pub dtype: Dtype,
    pub dims: Dims,
    pub spacing: Spacing,
}

impl SvolHeader {
    pub fn payload_len(&self) -> u128 {
        self.dims.voxel_count_u128() * self.dtype.byte_width() as u128
    }
}

pub fn encode_svol(v: &Volume3D) -> Vec<u8> {
    let dims = v.dims();
    let spacing = v.spacing();
    let mut out = Vec::with_capacity(HEADER_LEN + v.len() * v.dtype().byte_width());
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.push(v.dtype().code());
    for d in dims.as_array() {
        out.extend_from_slice(&d.to_le_bytes());
    }
    for s in [spacing.sx, spacing.sy, spacing.sz] {
        out.extend_from_slice(&s.to_le_bytes());
    }
    match v.data() {
        VoxelData::U8(d) => out.extend_from_slice(d),
        VoxelData::I16(d) => d.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
        VoxelData::U16(d) => d.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
        VoxelData::F32(d) => d.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
    }
    out
}

fn le_u32(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

/// Decodes and validates the fixed header only.
pub fn decode_svol_header(b: &[u8]) -> Result<SvolHeader, SvolError> {
    if b.len() >= 4 && &b[..4] != MAGIC {
        return Err(SvolError::BadMagic);
    }
    if b.len() < HEADER_LEN {
        return Err(SvolError::TruncatedHeader(b.len()));
    }
    if b[4] != VERSION {
        return Err(SvolError::UnsupportedVersion(b[4]));
    }
    let dtype = Dtype::from_code(b[5]).ok_or(SvolError::UnknownDtype(b[5]))?;
    let dims = Dims::new(le_u32(b, 6), le_u32(b, 10), le_u32(b, 14));
    if dims.has_zero() {
        return Err(SvolError::ZeroDim);
    }
    let spacing = Spacing::new(
        f32::from_bits(le_u32(b, 18)),
        f32::from_bits(le_u32(b, 22)),
        f32::from_bits(le_u32(b, 26)),
    );
    if !spacing.is_valid() {
        return Err(SvolError::NonPositiveSpacing);
    }
    Ok(SvolHeader { dtype, dims, spacing })
}

pub fn decode_svol(b: &[u8]) -> Result<Volume3D, SvolError> {
    let header = decode_svol_header(b)?;
    let payload = &b[HEADER_LEN..];
    let expected = header.payload_len();
    if payload.len() as u128 != expected {
        return Err(SvolError::TruncatedPayload { expected, actual: payload.len() });
    }
    // payload fits in memory, so the voxel count does too
    let data = match header.dtype {
        Dtype::U8 => VoxelData::U8(payload.to_vec()),
        Dtype::I16 => VoxelData::I16(
            payload.chunks_exact(2).map(|c| i16::from_le_bytes([c[0], c[1]])).collect(),
        ),
        Dtype::U16 => VoxelData::U16(
            payload.chunks_exact(2).map(|c| u16::from_le_bytes([c[0], c[1]])).collect(),
        ),
        Dtype::F32 => VoxelData::F32(
            payload
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect(),
        ),
    };
    Volume3D::new(header.dims, header.spacing, data).map_err(|e| match e {
        VolumeError::ZeroDim => SvolError::ZeroDim,
        VolumeError::NonPositiveSpacing => SvolError::NonPositiveSpacing,
        VolumeError::DimsOverflow | VolumeError::LengthMismatch { .. } => SvolError::DimsOverflow,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn one_voxel() -> Volume3D {
        Volume3D::new(Dims::new(1, 1, 1), Spacing::UNIT, VoxelData::U8(vec![0])).unwrap()
    }

    #[test]
    fn smallest_stream_layout() {
        let b = encode_svol(&one_voxel());
        assert_eq!(b.len(), 31);
        assert_eq!(&b[..4], b"SVOL");
        assert_eq!(b[4], 0x01);
        assert_eq!(b[5], 0x00);
        for w in 0..3 {
            assert_eq!(le_u32(&b, 6 + 4 * w), 1);
            assert_eq!(f32::from_bits(le_u32(&b, 18 + 4 * w)), 1.0);
        }
        assert_eq!(b[30], 0x00);
        assert_eq!(decode_svol(&b).unwrap(), one_voxel());
    }

    #[test]
    fn payload_is_x_fastest() {
        let v = Volume3D::new(Dims::new(2, 1, 1), Spacing::UNIT, VoxelData::U8(vec![7, 9])).unwrap();
        assert_eq!(&encode_svol(&v)[HEADER_LEN..], &[0x07, 0x09]);
    }

    #[test]
    fn multibyte_payload_is_little_endian() {
        let v = Volume3D::new(Dims::new(2, 1, 1), Spacing::UNIT, VoxelData::I16(vec![0x0102, -2]))
            .unwrap();
        assert_eq!(&encode_svol(&v)[HEADER_LEN..], &[0x02, 0x01, 0xfe, 0xff]);
    }

    #[test]
    fn malformed_streams() {
        let good = encode_svol(&one_voxel());

        let mut bad = good.clone();
        bad[0] = b'X';
        assert_eq!(decode_svol(&bad), Err(SvolError::BadMagic));

        let mut bad = good.clone();
        bad[4] = 2;
        assert_eq!(decode_svol(&bad), Err(SvolError::UnsupportedVersion(2)));

        let mut bad = good.clone();
        bad[5] = 9;
        assert_eq!(decode_svol(&bad), Err(SvolError::UnknownDtype(9)));

        let mut bad = good.clone();
        bad[6..10].copy_from_slice(&0u32.to_le_bytes());
        assert_eq!(decode_svol(&bad), Err(SvolError::ZeroDim));

        for s in [0.0f32, -1.0, f32::INFINITY, f32::NAN] {
            let mut bad = good.clone();
            bad[22..26].copy_from_slice(&s.to_le_bytes());
            assert_eq!(decode_svol(&bad), Err(SvolError::NonPositiveSpacing));
        }

        assert_eq!(decode_svol(&good[..10]), Err(SvolError::TruncatedHeader(10)));
        assert_eq!(decode_svol(b""), Err(SvolError::TruncatedHeader(0)));

        let mut extra = good.clone();
        extra.push(0);
        assert!(matches!(decode_svol(&extra), Err(SvolError::TruncatedPayload { .. })));
    }

    #[test]
    fn short_payload_4x4x4() {
        let v = Volume3D::new(Dims::new(4, 4, 4), Spacing::UNIT, VoxelData::U8(vec![1; 64])).unwrap();
        let b = encode_svol(&v);
        assert_eq!(
            decode_svol(&b[..b.len() - 1]),
            Err(SvolError::TruncatedPayload { expected: 64, actual: 63 })
        );
    }

    #[test]
    fn huge_header_does_not_allocate() {
        let mut b = encode_svol(&one_voxel());
        for w in 0..3 {
            b[6 + 4 * w..10 + 4 * w].copy_from_slice(&u32::MAX.to_le_bytes());
        }
        assert!(matches!(decode_svol(&b), Err(SvolError::TruncatedPayload { .. })));
    }
}
