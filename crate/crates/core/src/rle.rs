//! Run-length mask wire format.
//!
//! A stream is `nx, ny, nz` as u32 LE followed by unsigned LEB128 run
//! lengths of alternating voxel values in x-fastest order. The first run
//! counts zeros and is the only run allowed to have length 0.

use alloc::vec::Vec;

use thiserror::Error;

use crate::volume::{Dims, Mask3D};

pub const DIMS_HEADER_LEN: usize = 12;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RleError {
    #[error("TruncatedHeader: {0} bytes, dims header needs {DIMS_HEADER_LEN}")]
    TruncatedHeader(usize),
    #[error("ZeroDim: every dimension must be at least 1")]
    ZeroDim,
    #[error("TruncatedVarint: stream ends inside a run length")]
    TruncatedVarint,
    #[error("VarintOverflow: run length exceeds 64 bits")]
    VarintOverflow,
    #[error("InteriorZeroRun: run {index} has length 0")]
    InteriorZeroRun { index: usize },
    #[error("RunSumMismatch: runs cover {actual} voxels, dims imply {expected}")]
    RunSumMismatch { expected: u128, actual: u128 },
    #[error("DimsOverflow: voxel count does not fit in memory")]
    DimsOverflow,
}

impl RleError {
    pub fn name(&self) -> &'static str {
        match self {
            RleError::TruncatedHeader(_) => "TruncatedHeader",
            RleError::ZeroDim => "ZeroDim",
            RleError::TruncatedVarint => "TruncatedVarint",
            RleError::VarintOverflow => "VarintOverflow",
            RleError::InteriorZeroRun { .. } => "InteriorZeroRun",
            RleError::RunSumMismatch { .. } => "RunSumMismatch",
            RleError::DimsOverflow => "DimsOverflow",
        }
    }
}

pub fn write_varint(out: &mut Vec<u8>, mut value: u64) {
    loop {
        let byte = (value & 0x7f) as u8;
        value >>= 7;
        if value == 0 {
            out.push(byte);
            return;
        }
        out.push(byte | 0x80);
    }
}

/// Reads one LEB128 value, returning it and the number of bytes consumed.
pub fn read_varint(b: &[u8]) -> Result<(u64, usize), RleError> {
    let mut value: u64 = 0;
    for (n, &byte) in b.iter().enumerate() {
        let shift = 7 * n as u32;
        let bits = (byte & 0x7f) as u64;
        if shift >= 64 || (shift == 63 && bits > 1) {
            return Err(RleError::VarintOverflow);
        }
        value |= bits << shift;
        if byte & 0x80 == 0 {
            return Ok((value, n + 1));
        }
    }
    Err(RleError::TruncatedVarint)
}

/// A validated run-length mask, not yet expanded to voxels.
///
/// Holding the runs lets a receiver check dims against its image before
/// allocating the full bitmap.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RleMask {
    dims: Dims,
    runs: Vec<u64>,
}

impl RleMask {
    pub fn from_mask(m: &Mask3D) -> Self {
        let mut runs = Vec::new();
        let mut current = false;
        let mut len: u64 = 0;
        for &bit in m.bits() {
            if bit == current {
                len += 1;
            } else {
                runs.push(len);
                current = bit;
                len = 1;
            }
        }
        runs.push(len);
        RleMask { dims: m.dims(), runs }
    }

    pub fn parse(b: &[u8]) -> Result<Self, RleError> {
        if b.len() < DIMS_HEADER_LEN {
            return Err(RleError::TruncatedHeader(b.len()));
        }
        let word = |at: usize| u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]]);
        let dims = Dims::new(word(0), word(4), word(8));
        if dims.has_zero() {
            return Err(RleError::ZeroDim);
        }
        let expected = dims.voxel_count_u128();
        let mut runs = Vec::new();
        let mut sum: u128 = 0;
        let mut rest = &b[DIMS_HEADER_LEN..];
        while !rest.is_empty() {
            let (len, used) = read_varint(rest)?;
            if len == 0 && !runs.is_empty() {
                return Err(RleError::InteriorZeroRun { index: runs.len() });
            }
            runs.push(len);
            sum += len as u128;
            rest = &rest[used..];
        }
        if sum != expected {
            return Err(RleError::RunSumMismatch { expected, actual: sum });
        }
        Ok(RleMask { dims, runs })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn runs(&self) -> &[u64] {
        &self.runs
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(DIMS_HEADER_LEN + self.runs.len() * 2);
        for d in self.dims.as_array() {
            out.extend_from_slice(&d.to_le_bytes());
        }
        for &r in &self.runs {
            write_varint(&mut out, r);
        }
        out
    }

    pub fn to_mask(&self) -> Result<Mask3D, RleError> {
        let n = self.dims.voxel_count().ok_or(RleError::DimsOverflow)?;
        let mut bits = Vec::new();
        bits.try_reserve_exact(n).map_err(|_| RleError::DimsOverflow)?;
        let mut value = false;
        for &r in &self.runs {
            bits.resize(bits.len() + r as usize, value);
            value = !value;
        }
        Mask3D::from_bits(self.dims, bits).map_err(|_| RleError::DimsOverflow)
    }
}

pub fn rle_encode(m: &Mask3D) -> Vec<u8> {
    RleMask::from_mask(m).to_bytes()
}

pub fn rle_decode(b: &[u8]) -> Result<Mask3D, RleError> {
    RleMask::parse(b)?.to_mask()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn mask(bits: &[u8]) -> Mask3D {
        let dims = Dims::new(bits.len() as u32, 1, 1);
        Mask3D::from_bits(dims, bits.iter().map(|b| *b == 1).collect()).unwrap()
    }

    fn stream(dims: [u32; 3], runs: &[u64]) -> Vec<u8> {
        let mut out = Vec::new();
        for d in dims {
            out.extend_from_slice(&d.to_le_bytes());
        }
        for &r in runs {
            write_varint(&mut out, r);
        }
        out
    }

    #[test]
    fn encoder_runs() {
        let zeros = Mask3D::zeros(Dims::new(2, 2, 2)).unwrap();
        assert_eq!(RleMask::from_mask(&zeros).runs(), &[8]);
        assert_eq!(RleMask::from_mask(&mask(&[0, 0, 1, 1, 0])).runs(), &[2, 2, 1]);
        assert_eq!(RleMask::from_mask(&mask(&[1, 1, 0])).runs(), &[0, 2, 1]);
    }

    #[test]
    fn decoder_examples() {
        assert_eq!(rle_decode(&stream([5, 1, 1], &[2, 2, 1])).unwrap(), mask(&[0, 0, 1, 1, 0]));
        assert_eq!(
            rle_decode(&stream([4, 1, 1], &[2, 1])),
            Err(RleError::RunSumMismatch { expected: 4, actual: 3 })
        );
        assert_eq!(
            rle_decode(&stream([4, 1, 1], &[2, 0, 2])),
            Err(RleError::InteriorZeroRun { index: 1 })
        );
        assert_eq!(
            rle_decode(&stream([4, 1, 1], &[4, 0])),
            Err(RleError::InteriorZeroRun { index: 1 })
        );
        assert_eq!(rle_decode(&stream([3, 1, 1], &[0, 2, 1])).unwrap(), mask(&[1, 1, 0]));
        assert_eq!(rle_decode(&stream([0, 1, 1], &[])), Err(RleError::ZeroDim));
        assert_eq!(rle_decode(&[0; 5]), Err(RleError::TruncatedHeader(5)));

        let mut truncated = stream([200, 1, 1], &[200]);
        truncated.pop();
        assert_eq!(rle_decode(&truncated), Err(RleError::TruncatedVarint));
        assert_eq!(
            rle_decode(&stream([1, 1, 1], &[])),
            Err(RleError::RunSumMismatch { expected: 1, actual: 0 })
        );
    }

    #[test]
    fn varint_roundtrip_edges() {
        for v in [0u64, 1, 127, 128, 300, 16383, 16384, u32::MAX as u64, u64::MAX] {
            let mut out = Vec::new();
            write_varint(&mut out, v);
            assert_eq!(read_varint(&out).unwrap(), (v, out.len()));
        }
        let mut b = vec![0x80u8; 9];
        b.push(0x02);
        assert_eq!(read_varint(&b), Err(RleError::VarintOverflow));
        assert_eq!(read_varint(&[0xff; 11]), Err(RleError::VarintOverflow));
    }

    #[test]
    fn known_varint_bytes() {
        let mut out = Vec::new();
        write_varint(&mut out, 300);
        assert_eq!(out, vec![0xac, 0x02]);
    }
}
