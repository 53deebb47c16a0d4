use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniformly sampled real series.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TimeSeries {
    pub values: Vec<f64>,
    /// Seconds per step.
    pub dt: f64,
}

impl TimeSeries {
    pub fn new(values: Vec<f64>, dt: f64) -> Self {
        TimeSeries { values, dt }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// The six statistics every vector feature is reduced to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub mean: f64,
    pub median: f64,
    /// Population standard deviation.
    pub std: f64,
    pub p01: f64,
    pub p99: f64,
    /// `p99 - p01`.
    pub range_robust: f64,
}

impl SummaryStats {
    pub const NAMES: [&'static str; 6] = ["mean", "median", "std", "p01", "p99", "range"];

    pub fn to_array(self) -> [f64; 6] {
        [self.mean, self.median, self.std, self.p01, self.p99, self.range_robust]
    }
}

/// Percentile `q` in `[0, 1]` of sorted data, interpolating linearly
/// between order statistics at position `q * (n - 1)`.
pub fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn summarize(values: &[f64]) -> Result<SummaryStats> {
    if values.is_empty() {
        return Err(Error::EmptyVector);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let p01 = percentile_sorted(&sorted, 0.01);
    let p99 = percentile_sorted(&sorted, 0.99);
    Ok(SummaryStats {
        mean,
        median: percentile_sorted(&sorted, 0.5),
        std: var.sqrt(),
        p01,
        p99,
        range_robust: p99 - p01,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn one_to_hundred() {
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        let s = summarize(&v).unwrap();
        assert_eq!(s.mean, 50.5);
        assert_eq!(s.median, 50.5);
        assert!((s.p01 - 1.99).abs() < 1e-12);
        assert!((s.p99 - 99.01).abs() < 1e-12);
        assert!((s.range_robust - 97.02).abs() < 1e-12);
        // population std of 1..=n is sqrt((n^2 - 1) / 12)
        assert!((s.std - (9999.0f64 / 12.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn single_element() {
        let s = summarize(&[7.0]).unwrap();
        assert_eq!(s.to_array(), [7.0, 7.0, 0.0, 7.0, 7.0, 0.0]);
    }

    #[test]
    fn empty_is_error() {
        assert!(matches!(summarize(&[]), Err(Error::EmptyVector)));
    }

    proptest! {
        #[test]
        fn ordering_holds(v in prop::collection::vec(-1e6f64..1e6, 1..200)) {
            let s = summarize(&v).unwrap();
            prop_assert!(s.p01 <= s.median && s.median <= s.p99);
            prop_assert!(s.range_robust >= 0.0);
            prop_assert!(s.std >= 0.0);
        }

        #[test]
        fn symmetric_series_mean_equals_median(v in prop::collection::vec(-1e3f64..1e3, 1..50)) {
            let mut sym = v.clone();
            sym.extend(v.iter().map(|x| -x));
            let s = summarize(&sym).unwrap();
            prop_assert!((s.mean - s.median).abs() < 1e-9);
        }
    }
}
