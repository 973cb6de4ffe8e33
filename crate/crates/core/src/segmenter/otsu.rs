use num_bigint::BigUint;
use thiserror::Error;

pub const HISTOGRAM_BINS: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("EmptyHistogram: all bin counts are zero")]
pub struct EmptyHistogram;

/// 256-bin histogram over `[lo, hi]`.
///
/// Bins are `(hi - lo) / 255` wide, so bin `b` starts at
/// `lo + b * (hi - lo) / 255` and `hi` itself lands in the last bin.
#[derive(Debug, Clone)]
pub struct Histogram {
    lo: f64,
    hi: f64,
    counts: [u64; HISTOGRAM_BINS],
}

impl Histogram {
    pub fn new(lo: f64, hi: f64) -> Self {
        Histogram { lo, hi, counts: [0; HISTOGRAM_BINS] }
    }

    pub fn bin_of(&self, value: f64) -> Option<usize> {
        if value.is_nan() {
            return None;
        }
        if self.hi <= self.lo {
            return Some(0);
        }
        let scaled = (value - self.lo) * 255.0 / (self.hi - self.lo);
        Some(if scaled <= 0.0 { 0 } else { (scaled as usize).min(HISTOGRAM_BINS - 1) })
    }

    /// Counts `value`; NaN is skipped.
    pub fn add(&mut self, value: f64) {
        if let Some(b) = self.bin_of(value) {
            self.counts[b] += 1;
        }
    }

    pub fn counts(&self) -> &[u64; HISTOGRAM_BINS] {
        &self.counts
    }
}

/// Cut position `c` in `1..=255` maximizing between-class variance, where
/// the lower class is bins `[0, c)`. Smallest `c` wins ties. `None` when
/// every count sits in one bin.
///
/// Scores are compared exactly. With bin index as the value, `N` total
/// count, `S` total mass, `n0`/`s0` the lower class count/mass, the
/// variance is proportional to `(s0 N - S n0)^2 / (n0 n1)`.
pub fn otsu_cut(counts: &[u64; HISTOGRAM_BINS]) -> Result<Option<usize>, EmptyHistogram> {
    let total: u128 = counts.iter().map(|&c| c as u128).sum();
    if total == 0 {
        return Err(EmptyHistogram);
    }
    if counts.iter().filter(|&&c| c > 0).count() == 1 {
        return Ok(None);
    }
    let mass: u128 = counts.iter().enumerate().map(|(b, &c)| b as u128 * c as u128).sum();

    let big_total = BigUint::from(total);
    let big_mass = BigUint::from(mass);
    // best score as numerator / denominator
    let mut best: Option<(usize, BigUint, BigUint)> = None;
    let mut n0: u128 = 0;
    let mut s0: u128 = 0;
    for cut in 1..HISTOGRAM_BINS {
        n0 += counts[cut - 1] as u128;
        s0 += (cut as u128 - 1) * counts[cut - 1] as u128;
        let n1 = total - n0;
        let (num, den) = if n0 == 0 || n1 == 0 {
            (BigUint::from(0u8), BigUint::from(1u8))
        } else {
            let a = BigUint::from(s0) * &big_total;
            let b = &big_mass * BigUint::from(n0);
            let diff = if a >= b { a - b } else { b - a };
            (&diff * &diff, BigUint::from(n0) * BigUint::from(n1))
        };
        let better = match &best {
            None => true,
            Some((_, bn, bd)) => &num * bd > bn * &den,
        };
        if better {
            best = Some((cut, num, den));
        }
    }
    Ok(best.map(|(cut, _, _)| cut))
}

/// Otsu threshold in intensity units: the lower edge of the first bin of
/// the upper class, or `lo` when the histogram has a single occupied bin.
pub fn otsu_threshold(counts: &[u64; HISTOGRAM_BINS], lo: f64, hi: f64) -> Result<f64, EmptyHistogram> {
    Ok(match otsu_cut(counts)? {
        None => lo,
        Some(cut) => lo + cut as f64 * (hi - lo) / 255.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_extreme_bins() {
        let mut h = [0u64; 256];
        h[0] = 10;
        h[255] = 10;
        assert_eq!(otsu_cut(&h), Ok(Some(1)));
        assert_eq!(otsu_threshold(&h, 0.0, 255.0), Ok(1.0));
    }

    #[test]
    fn two_clusters() {
        let mut h = [0u64; 256];
        h[50] = 7;
        h[200] = 7;
        assert_eq!(otsu_threshold(&h, 0.0, 255.0), Ok(51.0));
    }

    #[test]
    fn single_bin_returns_lo() {
        let mut h = [0u64; 256];
        h[17] = 3;
        assert_eq!(otsu_threshold(&h, -4.0, 9.0), Ok(-4.0));
    }

    #[test]
    fn empty_histogram() {
        assert_eq!(otsu_threshold(&[0; 256], 0.0, 1.0), Err(EmptyHistogram));
    }

    #[test]
    fn binning() {
        let h = Histogram::new(0.0, 255.0);
        assert_eq!(h.bin_of(0.0), Some(0));
        assert_eq!(h.bin_of(50.0), Some(50));
        assert_eq!(h.bin_of(255.0), Some(255));
        assert_eq!(h.bin_of(f64::NAN), None);
        assert_eq!(Histogram::new(3.0, 3.0).bin_of(3.0), Some(0));
        let h = Histogram::new(10.0, 200.0);
        assert_eq!(h.bin_of(10.0), Some(0));
        assert_eq!(h.bin_of(200.0), Some(255));
    }

    #[test]
    fn huge_counts_do_not_overflow() {
        let mut h = [0u64; 256];
        h[0] = u64::MAX;
        h[128] = u64::MAX;
        h[255] = u64::MAX / 2;
        assert!(otsu_cut(&h).unwrap().is_some());
    }
}
