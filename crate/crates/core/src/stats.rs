//! Sample statistics used for error bars.

use alloc::vec::Vec;
use num_traits::Float;

/// Number of batches for batch-means standard errors.
pub const BATCHES: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MeanEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
}

/// Mean and standard error of i.i.d. samples.
pub fn iid(samples: &[f64]) -> MeanEstimate {
    let n = samples.len();
    if n == 0 {
        return MeanEstimate { mean: f64::NAN, stderr: f64::NAN, n };
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return MeanEstimate { mean, stderr: f64::INFINITY, n };
    }
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    MeanEstimate { mean, stderr: (var / n as f64).sqrt(), n }
}

/// Mean of a correlated series with a batch-means standard error. The tail
/// that does not fill a whole batch still counts toward the mean.
pub fn batch_means(series: &[f64], batches: usize) -> MeanEstimate {
    let n = series.len();
    let mean = series.iter().sum::<f64>() / n as f64;
    let b = batches.max(2);
    let len = n / b;
    if len == 0 {
        return MeanEstimate { mean, stderr: f64::INFINITY, n };
    }
    let means: Vec<f64> = (0..b).map(|i| series[i * len..(i + 1) * len].iter().sum::<f64>() / len as f64).collect();
    let mm = means.iter().sum::<f64>() / b as f64;
    let var = means.iter().map(|x| (x - mm).powi(2)).sum::<f64>() / (b - 1) as f64;
    MeanEstimate { mean, stderr: (var / b as f64).sqrt(), n }
}

/// Kolmogorov–Smirnov distance between the empirical CDF of `samples` and
/// the uniform CDF on `[0,1]`.
pub fn ks_uniform(samples: &[f64]) -> f64 {
    let mut s: Vec<f64> = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, x)| {
            let lo = (x - i as f64 / n).abs();
            let hi = ((i + 1) as f64 / n - x).abs();
            lo.max(hi)
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn iid_known_values() {
        let e = iid(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(e.mean, 2.5);
        assert!((e.stderr - (5.0f64 / 12.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn batch_means_of_constant_series() {
        let e = batch_means(&[0.7; 1000], BATCHES);
        assert!((e.mean - 0.7).abs() < 1e-12);
        assert!(e.stderr < 1e-15);
    }

    #[test]
    fn ks_of_perfect_grid_is_small() {
        let s: Vec<f64> = (0..100).map(|i| (i as f64 + 0.5) / 100.0).collect();
        assert!((ks_uniform(&s) - 0.005).abs() < 1e-12);
    }
}
