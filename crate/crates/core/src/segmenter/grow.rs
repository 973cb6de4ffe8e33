use alloc::collections::VecDeque;
use alloc::vec;

use super::{Radius, SegmentError};
use crate::volume::{Mask3D, Volume3D, VoxelCoord};

/// Multi-source 6-connected region growing.
///
/// Seeds are enqueued in list order. A voxel joins when a neighbor pops
/// from the queue, its intensity lies within `tolerance` of the intensity
/// of the seed that claimed that neighbor, and its BFS depth is admitted by
/// `radius`. Neighbors expand in the order -x, +x, -y, +y, -z, +z. Seeds are
/// always part of the result.
pub fn region_grow(
    image: &Volume3D,
    seeds: &[VoxelCoord],
    tolerance: f64,
    radius: Radius,
) -> Result<Mask3D, SegmentError> {
    if seeds.is_empty() {
        return Err(SegmentError::NoSeeds);
    }
    let dims = image.dims();
    if !seeds.iter().all(|s| dims.contains(*s)) {
        return Err(SegmentError::OutOfBounds);
    }

    let (nx, ny, nz) = (dims.nx as usize, dims.ny as usize, dims.nz as usize);
    let plane = nx * ny;
    let mut claimed = vec![false; image.len()];
    // (voxel index, reference intensity, depth)
    let mut queue: VecDeque<(usize, f64, u32)> = VecDeque::new();

    for s in seeds {
        let idx = dims.index(*s);
        if !claimed[idx] {
            claimed[idx] = true;
            queue.push_back((idx, image.intensity(idx), 0));
        }
    }

    while let Some((idx, reference, depth)) = queue.pop_front() {
        let next_depth = depth + 1;
        if !radius.admits(next_depth) {
            continue;
        }
        let i = idx % nx;
        let j = (idx / nx) % ny;
        let k = idx / plane;
        let neighbors = [
            (i > 0).then(|| idx - 1),
            (i + 1 < nx).then(|| idx + 1),
            (j > 0).then(|| idx - nx),
            (j + 1 < ny).then(|| idx + nx),
            (k > 0).then(|| idx - plane),
            (k + 1 < nz).then(|| idx + plane),
        ];
        for n in neighbors.into_iter().flatten() {
            if claimed[n] {
                continue;
            }
            if (image.intensity(n) - reference).abs() <= tolerance {
                claimed[n] = true;
                queue.push_back((n, reference, next_depth));
            }
        }
    }

    Ok(Mask3D::from_bits(dims, claimed).expect("bitmap sized from image"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::{Dims, Spacing, VoxelData};
    use alloc::vec::Vec;

    fn vol(dims: Dims, values: Vec<u8>) -> Volume3D {
        Volume3D::new(dims, Spacing::UNIT, VoxelData::U8(values)).unwrap()
    }

    #[test]
    fn stops_at_intensity_step() {
        let img = vol(Dims::new(4, 1, 1), vec![0, 0, 100, 0]);
        let r = region_grow(&img, &[VoxelCoord::new(0, 0, 0)], 0.0, Radius::Unbounded).unwrap();
        assert_eq!(r.bits(), &[true, true, false, false]);
    }

    #[test]
    fn uniform_floods() {
        let img = vol(Dims::new(3, 3, 3), vec![5; 27]);
        let r = region_grow(&img, &[VoxelCoord::new(1, 2, 0)], 0.0, Radius::Unbounded).unwrap();
        assert_eq!(r.count_ones(), 27);
    }

    #[test]
    fn zero_radius_keeps_seeds_only() {
        let img = vol(Dims::new(3, 3, 3), vec![5; 27]);
        let seeds = [VoxelCoord::new(1, 1, 1), VoxelCoord::new(0, 0, 0)];
        let r = region_grow(&img, &seeds, 100.0, Radius::Steps(0)).unwrap();
        assert_eq!(r.ones().collect::<Vec<_>>(), vec![seeds[1], seeds[0]]);
    }

    #[test]
    fn radius_limits_depth() {
        let img = vol(Dims::new(7, 1, 1), vec![0; 7]);
        let r = region_grow(&img, &[VoxelCoord::new(3, 0, 0)], 0.0, Radius::Steps(2)).unwrap();
        assert_eq!(r.bits(), &[false, true, true, true, true, true, false]);
    }

    #[test]
    fn claimed_voxel_carries_first_seed_reference() {
        // row 0: A=0, w=5, B=10; row 1: 200, x=15, 200. A claims w before B,
        // so x is compared against A's intensity and stays out.
        let img = vol(Dims::new(3, 2, 1), vec![0, 5, 10, 200, 15, 200]);
        let seeds = [VoxelCoord::new(0, 0, 0), VoxelCoord::new(2, 0, 0)];
        let r = region_grow(&img, &seeds, 5.0, Radius::Unbounded).unwrap();
        assert_eq!(r.bits(), &[true, true, true, false, false, false]);

        // with B listed first, B claims w and x joins
        let seeds = [VoxelCoord::new(2, 0, 0), VoxelCoord::new(0, 0, 0)];
        let r = region_grow(&img, &seeds, 5.0, Radius::Unbounded).unwrap();
        assert_eq!(r.bits(), &[true, true, true, false, true, false]);
    }

    #[test]
    fn rejects_bad_seeds() {
        let img = vol(Dims::new(2, 1, 1), vec![0, 0]);
        assert_eq!(
            region_grow(&img, &[VoxelCoord::new(2, 0, 0)], 0.0, Radius::Unbounded),
            Err(SegmentError::OutOfBounds)
        );
        assert_eq!(region_grow(&img, &[], 0.0, Radius::Unbounded), Err(SegmentError::NoSeeds));
    }
}
