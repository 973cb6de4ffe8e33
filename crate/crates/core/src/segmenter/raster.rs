use alloc::vec;
use alloc::vec::Vec;

use super::SegmentError;

/// Row-major 2D bitmap; pixel `(a, b)` lives at `a + width * b`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bitmap {
    width: u32,
    height: u32,
    bits: Vec<bool>,
}

impl Bitmap {
    pub fn new(width: u32, height: u32) -> Self {
        Bitmap { width, height, bits: vec![false; width as usize * height as usize] }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn get(&self, a: u32, b: u32) -> bool {
        self.bits[a as usize + self.width as usize * b as usize]
    }

    pub fn set(&mut self, a: u32, b: u32, value: bool) {
        self.bits[a as usize + self.width as usize * b as usize] = value;
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }
}

/// Signed shoelace area; NaN if any vertex is not finite.
pub fn polygon_area(polygon: &[[f64; 2]]) -> f64 {
    if polygon.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
        return f64::NAN;
    }
    let n = polygon.len();
    let twice: f64 = (0..n)
        .map(|i| {
            let [x0, y0] = polygon[i];
            let [x1, y1] = polygon[(i + 1) % n];
            x0 * y1 - x1 * y0
        })
        .sum();
    twice / 2.0
}

/// Fills pixels whose centers lie inside `polygon` under the even-odd rule.
///
/// An edge crosses scanline `y` when `y_min <= y < y_max`, which keeps
/// shared edges from double-claiming pixels.
pub fn rasterize_polygon(polygon: &[[f64; 2]], width: u32, height: u32) -> Result<Bitmap, SegmentError> {
    let area = polygon_area(polygon);
    if polygon.len() < 3 || area == 0.0 || area.is_nan() {
        return Err(SegmentError::DegeneratePolygon);
    }

    // edges with the lower-y endpoint first; horizontal edges never cross
    let edges: Vec<([f64; 2], [f64; 2])> = (0..polygon.len())
        .filter_map(|i| {
            let p = polygon[i];
            let q = polygon[(i + 1) % polygon.len()];
            match p[1].partial_cmp(&q[1]) {
                Some(core::cmp::Ordering::Less) => Some((p, q)),
                Some(core::cmp::Ordering::Greater) => Some((q, p)),
                _ => None,
            }
        })
        .collect();

    let mut out = Bitmap::new(width, height);
    let mut crossings: Vec<f64> = Vec::new();
    for b in 0..height {
        let y = b as f64 + 0.5;
        crossings.clear();
        for &(lo, hi) in &edges {
            if lo[1] <= y && y < hi[1] {
                crossings.push(lo[0] + (y - lo[1]) * (hi[0] - lo[0]) / (hi[1] - lo[1]));
            }
        }
        crossings.sort_by(f64::total_cmp);
        for span in crossings.chunks_exact(2) {
            let (x0, x1) = (span[0], span[1]);
            let guess = ((x0 - 0.5).floor() - 1.0).max(0.0);
            if guess >= width as f64 {
                continue;
            }
            let mut a = guess as u32;
            while a < width && (a as f64 + 0.5) < x0 {
                a += 1;
            }
            while a < width && (a as f64 + 0.5) < x1 {
                out.set(a, b, true);
                a += 1;
            }
        }
    }
    Ok(out)
}
