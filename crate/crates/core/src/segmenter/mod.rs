//! Segmentation backends and the deterministic reference segmenter.
//!
//! A backend turns `(image, mask, prompt)` into a new mask. The reference
//! backend computes a prompt region `P` from the image alone and returns
//! `mask ∪ P` for positive prompts and `mask \ P` for negative ones.

mod grow;
mod otsu;
mod raster;

use alloc::vec::Vec;

use thiserror::Error;

use crate::volume::{Dims, Mask3D, Volume3D, VoxelCoord};

pub use grow::region_grow;
pub use otsu::{otsu_cut, otsu_threshold, Histogram, HISTOGRAM_BINS};
pub use raster::{polygon_area, rasterize_polygon, Bitmap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Polarity {
    #[default]
    Positive,
    Negative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub fn extent(self, dims: Dims) -> u32 {
        match self {
            Axis::X => dims.nx,
            Axis::Y => dims.ny,
            Axis::Z => dims.nz,
        }
    }

    /// In-plane extents `(w, h)`: Z → (x, y), Y → (x, z), X → (y, z).
    pub fn plane_dims(self, dims: Dims) -> (u32, u32) {
        match self {
            Axis::Z => (dims.nx, dims.ny),
            Axis::Y => (dims.nx, dims.nz),
            Axis::X => (dims.ny, dims.nz),
        }
    }

    /// Maps plane pixel `(a, b)` on `slice` to its voxel.
    pub fn voxel(self, slice: u32, a: u32, b: u32) -> VoxelCoord {
        match self {
            Axis::Z => VoxelCoord::new(a, b, slice),
            Axis::Y => VoxelCoord::new(a, slice, b),
            Axis::X => VoxelCoord::new(slice, a, b),
        }
    }
}

/// The geometric part of a prompt.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "type", rename_all = "snake_case"))]
pub enum PromptKind {
    Point { coord: VoxelCoord },
    /// Inclusive on both corners.
    #[cfg_attr(feature = "serde", serde(rename = "bbox"))]
    BBox { min: VoxelCoord, max: VoxelCoord },
    Scribble { points: Vec<VoxelCoord> },
    /// Closed polygon in plane coordinates on one slice.
    Lasso { axis: Axis, slice: i64, polygon: Vec<[f64; 2]> },
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Prompt {
    #[cfg_attr(feature = "serde", serde(flatten))]
    pub kind: PromptKind,
    #[cfg_attr(feature = "serde", serde(default))]
    pub polarity: Polarity,
}

impl Prompt {
    pub fn new(kind: PromptKind, polarity: Polarity) -> Self {
        Prompt { kind, polarity }
    }

    pub fn point(coord: VoxelCoord, polarity: Polarity) -> Self {
        Prompt::new(PromptKind::Point { coord }, polarity)
    }

    pub fn bbox(min: VoxelCoord, max: VoxelCoord, polarity: Polarity) -> Self {
        Prompt::new(PromptKind::BBox { min, max }, polarity)
    }

    pub fn scribble(points: Vec<VoxelCoord>, polarity: Polarity) -> Self {
        Prompt::new(PromptKind::Scribble { points }, polarity)
    }

    pub fn lasso(axis: Axis, slice: i64, polygon: Vec<[f64; 2]>, polarity: Polarity) -> Self {
        Prompt::new(PromptKind::Lasso { axis, slice, polygon }, polarity)
    }

    /// Checks the prompt's geometry against image dims.
    pub fn validate(&self, dims: Dims) -> Result<(), SegmentError> {
        match &self.kind {
            PromptKind::Point { coord } => in_bounds(dims, *coord),
            PromptKind::BBox { min, max } => {
                if min.i > max.i || min.j > max.j || min.k > max.k {
                    return Err(SegmentError::InvalidBox);
                }
                in_bounds(dims, *max)
            }
            PromptKind::Scribble { points } => {
                if points.is_empty() {
                    return Err(SegmentError::NoSeeds);
                }
                points.iter().try_for_each(|p| in_bounds(dims, *p))
            }
            PromptKind::Lasso { axis, slice, polygon } => {
                if *slice < 0 || *slice >= axis.extent(dims) as i64 {
                    return Err(SegmentError::OutOfBounds);
                }
                let area = polygon_area(polygon);
                if polygon.len() < 3 || area == 0.0 || area.is_nan() {
                    return Err(SegmentError::DegeneratePolygon);
                }
                Ok(())
            }
        }
    }
}

fn in_bounds(dims: Dims, c: VoxelCoord) -> Result<(), SegmentError> {
    if dims.contains(c) {
        Ok(())
    } else {
        Err(SegmentError::OutOfBounds)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum SegmentError {
    #[error("DimsMismatch: mask dims differ from image dims")]
    DimsMismatch,
    #[error("OutOfBounds: prompt coordinate outside the image")]
    OutOfBounds,
    #[error("InvalidBox: bounding box min exceeds max")]
    InvalidBox,
    #[error("NoSeeds: prompt needs at least one point")]
    NoSeeds,
    #[error("DegeneratePolygon: lasso needs at least 3 vertices and nonzero area")]
    DegeneratePolygon,
}

impl SegmentError {
    pub fn name(&self) -> &'static str {
        match self {
            SegmentError::DimsMismatch => "DimsMismatch",
            SegmentError::OutOfBounds => "OutOfBounds",
            SegmentError::InvalidBox => "InvalidBox",
            SegmentError::NoSeeds => "NoSeeds",
            SegmentError::DegeneratePolygon => "DegeneratePolygon",
        }
    }
}

/// Maximum BFS depth for region growing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Radius {
    #[default]
    Unbounded,
    Steps(u32),
}

impl Radius {
    #[inline]
    pub fn admits(self, depth: u32) -> bool {
        match self {
            Radius::Unbounded => true,
            Radius::Steps(r) => depth <= r,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("InvalidParams: tolerance must be a non-negative number, got {0}")]
pub struct InvalidParams(pub f64);

/// Knobs of the reference segmenter. Connectivity is fixed at 6 and the
/// bounding-box histogram at 256 bins.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmenterParams {
    tolerance: f64,
    radius: Radius,
}

impl SegmenterParams {
    pub const DEFAULT_TOLERANCE: f64 = 10.0;

    pub fn new(tolerance: f64, radius: Radius) -> Result<Self, InvalidParams> {
        if tolerance.is_nan() || tolerance < 0.0 {
            return Err(InvalidParams(tolerance));
        }
        Ok(SegmenterParams { tolerance, radius })
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    pub fn radius(&self) -> Radius {
        self.radius
    }
}

impl Default for SegmenterParams {
    fn default() -> Self {
        SegmenterParams { tolerance: Self::DEFAULT_TOLERANCE, radius: Radius::Unbounded }
    }
}

/// A segmentation model slot.
///
/// `apply` must return a mask congruent with `image` and be a pure function
/// of its arguments.
pub trait SegmenterBackend {
    fn apply(&self, image: &Volume3D, mask: &Mask3D, prompt: &Prompt) -> Result<Mask3D, SegmentError>;

    /// Whether `apply` may be invoked from several threads at once.
    fn is_concurrent(&self) -> bool;
}

/// The classical stand-in model: region growing for points and scribbles,
/// Otsu thresholding inside boxes, polygon fill for lassos.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ReferenceSegmenter {
    pub params: SegmenterParams,
}

impl ReferenceSegmenter {
    pub fn new(params: SegmenterParams) -> Self {
        ReferenceSegmenter { params }
    }
}

impl SegmenterBackend for ReferenceSegmenter {
    fn apply(&self, image: &Volume3D, mask: &Mask3D, prompt: &Prompt) -> Result<Mask3D, SegmentError> {
        apply_prompt(image, mask, prompt, &self.params)
    }

    fn is_concurrent(&self) -> bool {
        true
    }
}

/// Region `P` selected by a prompt, independent of any mask.
pub fn prompt_region(image: &Volume3D, prompt: &Prompt, params: &SegmenterParams) -> Result<Mask3D, SegmentError> {
    let dims = image.dims();
    prompt.validate(dims)?;
    match &prompt.kind {
        PromptKind::Point { coord } => region_grow(image, &[*coord], params.tolerance, params.radius),
        PromptKind::Scribble { points } => region_grow(image, points, params.tolerance, params.radius),
        PromptKind::BBox { min, max } => Ok(bbox_region(image, *min, *max)),
        PromptKind::Lasso { axis, slice, polygon } => {
            let (w, h) = axis.plane_dims(dims);
            let bitmap = rasterize_polygon(polygon, w, h)?;
            let mut region = empty_like(dims);
            let slice = *slice as u32;
            for b in 0..h {
                for a in 0..w {
                    if bitmap.get(a, b) {
                        region.set(axis.voxel(slice, a, b), true);
                    }
                }
            }
            Ok(region)
        }
    }
}

fn empty_like(dims: Dims) -> Mask3D {
    // dims come from a valid volume
    Mask3D::zeros(dims).expect("dims of a valid volume")
}

fn box_voxels(min: VoxelCoord, max: VoxelCoord) -> impl Iterator<Item = VoxelCoord> {
    (min.k..=max.k).flat_map(move |k| {
        (min.j..=max.j).flat_map(move |j| (min.i..=max.i).map(move |i| VoxelCoord::new(i, j, k)))
    })
}

fn bbox_region(image: &Volume3D, min: VoxelCoord, max: VoxelCoord) -> Mask3D {
    let dims = image.dims();
    let mut region = empty_like(dims);

    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for c in box_voxels(min, max) {
        let v = image.intensity_at(c);
        if v.is_nan() {
            continue;
        }
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if lo > hi {
        // no comparable voxel in the box
        return region;
    }

    let mut hist = Histogram::new(lo, hi);
    for c in box_voxels(min, max) {
        hist.add(image.intensity_at(c));
    }
    let t = otsu_threshold(hist.counts(), lo, hi).expect("box holds at least one finite voxel");
    for c in box_voxels(min, max) {
        if image.intensity_at(c) >= t {
            region.set(c, true);
        }
    }
    region
}

/// The reference backend: `mask ∪ P` or `mask \ P` depending on polarity.
pub fn apply_prompt(
    image: &Volume3D,
    mask: &Mask3D,
    prompt: &Prompt,
    params: &SegmenterParams,
) -> Result<Mask3D, SegmentError> {
    if mask.dims() != image.dims() {
        return Err(SegmentError::DimsMismatch);
    }
    let region = prompt_region(image, prompt, params)?;
    let mut out = mask.clone();
    let value = prompt.polarity == Polarity::Positive;
    for (dst, &hit) in out.bits_mut().iter_mut().zip(region.bits()) {
        if hit {
            *dst = value;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::{Spacing, VoxelData};
    use alloc::vec;

    fn line(values: &[u8]) -> Volume3D {
        Volume3D::new(Dims::new(values.len() as u32, 1, 1), Spacing::UNIT, VoxelData::U8(values.to_vec()))
            .unwrap()
    }

    fn exact() -> SegmenterParams {
        SegmenterParams::new(0.0, Radius::Unbounded).unwrap()
    }

    #[test]
    fn positive_point_on_step_image() {
        let img = line(&[0, 0, 100, 0]);
        let mask = Mask3D::zeros(img.dims()).unwrap();
        let out = apply_prompt(&img, &mask, &Prompt::point(VoxelCoord::new(0, 0, 0), Polarity::Positive), &exact())
            .unwrap();
        assert_eq!(out.bits(), &[true, true, false, false]);
    }

    #[test]
    fn negative_point_on_empty_mask_is_noop() {
        let img = line(&[0, 0, 100, 0]);
        let mask = Mask3D::zeros(img.dims()).unwrap();
        let out = apply_prompt(&img, &mask, &Prompt::point(VoxelCoord::new(2, 0, 0), Polarity::Negative), &exact())
            .unwrap();
        assert_eq!(out, mask);
    }

    #[test]
    fn constant_box_is_fully_selected() {
        let dims = Dims::new(5, 5, 3);
        let img = Volume3D::new(dims, Spacing::UNIT, VoxelData::I16(vec![42; 75])).unwrap();
        let mask = Mask3D::zeros(dims).unwrap();
        let (lo, hi) = (VoxelCoord::new(1, 1, 0), VoxelCoord::new(3, 2, 1));
        let out = apply_prompt(&img, &mask, &Prompt::bbox(lo, hi, Polarity::Positive), &exact()).unwrap();
        assert_eq!(out.count_ones(), 3 * 2 * 2);
        for c in out.ones() {
            assert!(c.i >= 1 && c.i <= 3 && c.j >= 1 && c.j <= 2 && c.k <= 1);
        }
    }

    #[test]
    fn bbox_picks_bright_class() {
        let img = line(&[10, 10, 200, 200, 10, 255]);
        let mask = Mask3D::zeros(img.dims()).unwrap();
        let p = Prompt::bbox(VoxelCoord::new(0, 0, 0), VoxelCoord::new(4, 0, 0), Polarity::Positive);
        let out = apply_prompt(&img, &mask, &p, &exact()).unwrap();
        assert_eq!(out.bits(), &[false, false, true, true, false, false]);
    }

    #[test]
    fn lasso_plane_mapping() {
        let dims = Dims::new(4, 5, 6);
        let img = Volume3D::new(dims, Spacing::UNIT, VoxelData::U8(vec![0; 120])).unwrap();
        let mask = Mask3D::zeros(dims).unwrap();
        let square = vec![[0.0, 0.0], [1.0, 0.0], [1.0, 2.0], [0.0, 2.0]];
        for (axis, expect) in [
            (Axis::Z, [VoxelCoord::new(0, 0, 3), VoxelCoord::new(0, 1, 3)]),
            (Axis::Y, [VoxelCoord::new(0, 3, 0), VoxelCoord::new(0, 3, 1)]),
            (Axis::X, [VoxelCoord::new(3, 0, 0), VoxelCoord::new(3, 0, 1)]),
        ] {
            let p = Prompt::lasso(axis, 3, square.clone(), Polarity::Positive);
            let out = apply_prompt(&img, &mask, &p, &exact()).unwrap();
            assert_eq!(out.ones().collect::<Vec<_>>(), expect.to_vec(), "{axis:?}");
        }
    }

    #[test]
    fn validation_errors() {
        let img = line(&[0, 0, 100, 0]);
        let mask = Mask3D::zeros(img.dims()).unwrap();
        let p = exact();
        let run = |prompt: Prompt| apply_prompt(&img, &mask, &prompt, &p);
        assert_eq!(run(Prompt::point(VoxelCoord::new(9, 0, 0), Polarity::Positive)), Err(SegmentError::OutOfBounds));
        assert_eq!(
            run(Prompt::bbox(VoxelCoord::new(2, 0, 0), VoxelCoord::new(1, 0, 0), Polarity::Positive)),
            Err(SegmentError::InvalidBox)
        );
        assert_eq!(
            run(Prompt::bbox(VoxelCoord::new(0, 0, 0), VoxelCoord::new(4, 0, 0), Polarity::Positive)),
            Err(SegmentError::OutOfBounds)
        );
        assert_eq!(run(Prompt::scribble(vec![], Polarity::Positive)), Err(SegmentError::NoSeeds));
        assert_eq!(
            run(Prompt::lasso(Axis::Z, 1, vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], Polarity::Positive)),
            Err(SegmentError::OutOfBounds)
        );
        assert_eq!(
            run(Prompt::lasso(Axis::Z, -1, vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], Polarity::Positive)),
            Err(SegmentError::OutOfBounds)
        );
        assert_eq!(
            run(Prompt::lasso(Axis::Z, 0, vec![[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]], Polarity::Positive)),
            Err(SegmentError::DegeneratePolygon)
        );
        let other = Mask3D::zeros(Dims::new(2, 2, 1)).unwrap();
        assert_eq!(
            apply_prompt(&img, &other, &Prompt::point(VoxelCoord::new(0, 0, 0), Polarity::Positive), &p),
            Err(SegmentError::DimsMismatch)
        );
    }

    #[test]
    fn params_reject_negative_tolerance() {
        assert!(SegmenterParams::new(-1.0, Radius::Unbounded).is_err());
        assert!(SegmenterParams::new(f64::NAN, Radius::Unbounded).is_err());
        assert!(SegmenterParams::new(0.0, Radius::Steps(0)).is_ok());
    }
}
