//! Deterministic synthetic U8 volume with a few well-separated structures,
//! used by the sample scripts and tests.

use promptseg_core::{Dims, Spacing, Volume3D, VoxelData};

pub const BACKGROUND: u8 = 10;
pub const BRIGHT_SPHERE: u8 = 200;
pub const DIM_SPHERE: u8 = 120;
pub const SLAB: u8 = 80;

/// Dims of the bundled `phantom.svol`.
pub const BUNDLED_DIMS: Dims = Dims::new(40, 32, 16);

/// Low-amplitude texture in 0..=4 so region growing has something to do.
fn texture(i: u32, j: u32, k: u32) -> u8 {
    let mut h = i.wrapping_mul(0x9E37_79B1) ^ j.wrapping_mul(0x85EB_CA77) ^ k.wrapping_mul(0xC2B2_AE3D);
    h ^= h >> 15;
    h = h.wrapping_mul(0x2C1B_3C6D);
    h ^= h >> 12;
    (h % 5) as u8
}

/// Structures are placed at fixed fractions of the extent, so any dims work.
pub fn phantom(dims: Dims) -> Volume3D {
    let f = |n: u32, t: f64| t * n as f64;
    let (nx, ny, nz) = (dims.nx, dims.ny, dims.nz);
    let bright = ([f(nx, 0.30), f(ny, 0.35), f(nz, 0.5)], 0.17 * nx.min(ny) as f64);
    let dim = ([f(nx, 0.70), f(ny, 0.60), f(nz, 0.5)], 0.14 * nx.min(ny) as f64);
    let slab = ([f(nx, 0.10), f(ny, 0.70), f(nz, 0.20)], [f(nx, 0.25), f(ny, 0.92), f(nz, 0.80)]);

    let inside = |c: [f64; 3], r: f64, p: [f64; 3]| {
        let d: f64 = (0..3).map(|a| (p[a] - c[a]).powi(2)).sum();
        d <= r * r
    };
    let mut data = Vec::with_capacity(dims.voxel_count().expect("phantom dims fit in memory"));
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                let p = [i as f64 + 0.5, j as f64 + 0.5, k as f64 + 0.5];
                let base = if inside(bright.0, bright.1, p) {
                    BRIGHT_SPHERE
                } else if inside(dim.0, dim.1, p) {
                    DIM_SPHERE
                } else if (0..3).all(|a| p[a] >= slab.0[a] && p[a] < slab.1[a]) {
                    SLAB
                } else {
                    BACKGROUND
                };
                data.push(base + texture(i, j, k));
            }
        }
    }
    Volume3D::new(dims, Spacing::new(1.0, 1.0, 2.0), VoxelData::U8(data)).expect("sizes agree")
}

#[cfg(test)]
mod tests {
    use super::*;
    use promptseg_core::VoxelCoord;

    #[test]
    fn structures_present() {
        let v = phantom(BUNDLED_DIMS);
        let at = |i, j, k| v.intensity_at(VoxelCoord::new(i, j, k)) as u8;
        assert!((BRIGHT_SPHERE..=BRIGHT_SPHERE + 4).contains(&at(12, 11, 8)));
        assert!((DIM_SPHERE..=DIM_SPHERE + 4).contains(&at(28, 19, 8)));
        assert!((SLAB..=SLAB + 4).contains(&at(6, 26, 8)));
        assert!((BACKGROUND..=BACKGROUND + 4).contains(&at(39, 0, 0)));
        assert_eq!(phantom(BUNDLED_DIMS), v);
    }
}
