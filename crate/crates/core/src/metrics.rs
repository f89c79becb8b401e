//! Accuracy metrics for generated condition data, plus the uniform benchmark
//! generator used as a KL reference.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_BINS: usize = 20;
pub const SMOOTHING_EPSILON: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("length mismatch: {actual} actual vs {generated} generated values")]
    LengthMismatch { actual: usize, generated: usize },
    #[error("empty input")]
    Empty,
    #[error("actual value at index {index} is zero; percentage error is undefined")]
    ZeroActual { index: usize },
    #[error("actual values are constant; R² is undefined")]
    ConstantActual,
    #[error("at least 2 bins are required, got {0}")]
    TooFewBins(usize),
    #[error("invalid range [{min}, {max}]")]
    InvalidRange { min: f64, max: f64 },
    #[error("non-finite value in input")]
    NonFinite,
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
}

fn check_pair<T>(actual: &[T], generated: &[T]) -> Result<(), MetricsError> {
    if actual.len() != generated.len() {
        return Err(MetricsError::LengthMismatch {
            actual: actual.len(),
            generated: generated.len(),
        });
    }
    if actual.is_empty() {
        return Err(MetricsError::Empty);
    }
    Ok(())
}

fn check_finite(values: &[f64]) -> Result<(), MetricsError> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(MetricsError::NonFinite)
    }
}

/// Mean absolute percent error, in percent.
pub fn mape(actual: &[f64], generated: &[f64]) -> Result<f64, MetricsError> {
    check_pair(actual, generated)?;
    check_finite(actual)?;
    check_finite(generated)?;
    let mut sum = 0.0;
    for (index, (c, g)) in actual.iter().zip(generated).enumerate() {
        if *c == 0.0 {
            return Err(MetricsError::ZeroActual { index });
        }
        sum += ((c - g) / c).abs();
    }
    Ok(sum / actual.len() as f64 * 100.0)
}

/// Condition mismatch percentage: mean absolute rating difference, in percent.
pub fn cmp(actual: &[u32], generated: &[u32]) -> Result<f64, MetricsError> {
    check_pair(actual, generated)?;
    let total: u64 = actual
        .iter()
        .zip(generated)
        .map(|(a, g)| a.abs_diff(*g) as u64)
        .sum();
    Ok(total as f64 / actual.len() as f64 * 100.0)
}

/// Health-index mismatch percentage; [`cmp`] over discrete HI levels.
pub fn himp(actual: &[u32], generated: &[u32]) -> Result<f64, MetricsError> {
    cmp(actual, generated)
}

/// Coefficient of determination `1 - SS_res / SS_tot`.
pub fn r_squared(actual: &[f64], predicted: &[f64]) -> Result<f64, MetricsError> {
    check_pair(actual, predicted)?;
    check_finite(actual)?;
    check_finite(predicted)?;
    let mean = actual.iter().sum::<f64>() / actual.len() as f64;
    let ss_tot: f64 = actual.iter().map(|a| (a - mean).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(MetricsError::ConstantActual);
    }
    let ss_res: f64 = actual.iter().zip(predicted).map(|(a, p)| (a - p).powi(2)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

/// A histogram normalized to probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinnedDistribution {
    pub bin_edges: Vec<f64>,
    pub probabilities: Vec<f64>,
    pub smoothing_epsilon: f64,
}

impl BinnedDistribution {
    /// Histogram of `values` over `edges` (`edges.len() - 1` bins). The last
    /// bin is closed on the right; values outside the edges are clamped into
    /// the end bins.
    pub fn from_samples(values: &[f64], edges: &[f64]) -> Result<Self, MetricsError> {
        if edges.len() < 3 {
            return Err(MetricsError::TooFewBins(edges.len().saturating_sub(1)));
        }
        if values.is_empty() {
            return Err(MetricsError::Empty);
        }
        check_finite(values)?;
        check_finite(edges)?;
        if edges.windows(2).any(|w| w[0] >= w[1]) {
            return Err(MetricsError::InvalidDistribution("bin edges must be strictly ascending".into()));
        }
        let bins = edges.len() - 1;
        let mut counts = vec![0usize; bins];
        for v in values {
            // first edge strictly greater than v, minus one
            let upper = edges[1..bins].partition_point(|e| e <= v);
            counts[upper] += 1;
        }
        let n = values.len() as f64;
        Ok(Self {
            bin_edges: edges.to_vec(),
            probabilities: counts.into_iter().map(|c| c as f64 / n).collect(),
            smoothing_epsilon: SMOOTHING_EPSILON,
        })
    }
}

/// `bins + 1` equal-width edges spanning `[min, max]`. A zero-width range is
/// widened to one unit so the edges stay strictly ascending.
pub fn equal_width_edges(min: f64, max: f64, bins: usize) -> Result<Vec<f64>, MetricsError> {
    if bins < 2 {
        return Err(MetricsError::TooFewBins(bins));
    }
    if !(min.is_finite() && max.is_finite()) || min > max {
        return Err(MetricsError::InvalidRange { min, max });
    }
    let (lo, hi) = if min == max { (min - 0.5, max + 0.5) } else { (min, max) };
    let width = (hi - lo) / bins as f64;
    let mut edges: Vec<f64> = (0..bins).map(|i| lo + width * i as f64).collect();
    edges.push(hi);
    Ok(edges)
}

/// `Σ P ln(P/Q)` over the bins where `P > 0`. Bins where `Q` is zero but `P`
/// is not receive `epsilon`, after which `Q` is renormalized.
pub fn kl_from_probabilities(p: &[f64], q: &[f64], epsilon: f64) -> Result<f64, MetricsError> {
    check_pair(p, q)?;
    for dist in [p, q] {
        let total: f64 = dist.iter().sum();
        if dist.iter().any(|x| !(*x >= 0.0) || !x.is_finite()) || (total - 1.0).abs() > 1e-9 {
            return Err(MetricsError::InvalidDistribution(
                "probabilities must be non-negative and sum to 1".into(),
            ));
        }
    }
    if !(epsilon > 0.0) {
        return Err(MetricsError::InvalidDistribution("smoothing epsilon must be positive".into()));
    }
    let mut q: Vec<f64> = q.to_vec();
    let mut smoothed = false;
    for (qi, pi) in q.iter_mut().zip(p) {
        if *qi == 0.0 && *pi > 0.0 {
            *qi = epsilon;
            smoothed = true;
        }
    }
    if smoothed {
        let total: f64 = q.iter().sum();
        q.iter_mut().for_each(|x| *x /= total);
    }
    let d: f64 = p
        .iter()
        .zip(&q)
        .filter(|(pi, _)| **pi > 0.0)
        .map(|(pi, qi)| pi * (pi / qi).ln())
        .sum();
    Ok(d.max(0.0))
}

/// KL divergence of the generated sample from the real one, over `bins`
/// equal-width bins spanning the pooled range.
pub fn kl_divergence(real: &[f64], generated: &[f64], bins: usize) -> Result<f64, MetricsError> {
    if bins < 2 {
        return Err(MetricsError::TooFewBins(bins));
    }
    if real.is_empty() || generated.is_empty() {
        return Err(MetricsError::Empty);
    }
    check_finite(real)?;
    check_finite(generated)?;
    let (min, max) = real
        .iter()
        .chain(generated)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
    let edges = equal_width_edges(min, max, bins)?;
    let p = BinnedDistribution::from_samples(real, &edges)?;
    let q = BinnedDistribution::from_samples(generated, &edges)?;
    kl_from_probabilities(&p.probabilities, &q.probabilities, SMOOTHING_EPSILON)
}

/// KL divergence between two rating samples, one bin per level `1..=levels`.
pub fn kl_categorical(real: &[u32], generated: &[u32], levels: u32) -> Result<f64, MetricsError> {
    if levels < 2 {
        return Err(MetricsError::TooFewBins(levels as usize));
    }
    let hist = |xs: &[u32]| -> Result<Vec<f64>, MetricsError> {
        if xs.is_empty() {
            return Err(MetricsError::Empty);
        }
        let mut counts = vec![0usize; levels as usize];
        for x in xs {
            if *x < 1 || *x > levels {
                return Err(MetricsError::InvalidDistribution(format!(
                    "rating {x} outside 1..={levels}"
                )));
            }
            counts[*x as usize - 1] += 1;
        }
        Ok(counts.into_iter().map(|c| c as f64 / xs.len() as f64).collect())
    };
    kl_from_probabilities(&hist(real)?, &hist(generated)?, SMOOTHING_EPSILON)
}

/// `count` independent uniform draws on `[min, max]`.
pub fn benchmark_uniform<R: Rng + ?Sized>(
    min: f64,
    max: f64,
    count: usize,
    rng: &mut R,
) -> Result<Vec<f64>, MetricsError> {
    if !(min.is_finite() && max.is_finite()) || min > max {
        return Err(MetricsError::InvalidRange { min, max });
    }
    if min == max {
        return Ok(vec![min; count]);
    }
    Ok((0..count).map(|_| rng.random_range(min..=max)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::StreamKey;
    use proptest::prelude::*;

    #[test]
    fn mape_hand_values() {
        assert_eq!(mape(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert!((mape(&[100.0, 200.0], &[110.0, 180.0]).unwrap() - 10.0).abs() < 1e-12);
        assert!((mape(&[50.0], &[49.0]).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(mape(&[1.0, 0.0], &[1.0, 1.0]), Err(MetricsError::ZeroActual { index: 1 }));
        assert!(matches!(mape(&[1.0], &[1.0, 2.0]), Err(MetricsError::LengthMismatch { .. })));
    }

    #[test]
    fn cmp_and_himp_hand_values() {
        assert_eq!(cmp(&[1, 2, 3], &[1, 2, 3]).unwrap(), 0.0);
        assert!((cmp(&[1, 2, 3], &[1, 3, 3]).unwrap() - 100.0 / 3.0).abs() < 1e-12);
        assert_eq!(cmp(&[1], &[3]).unwrap(), 200.0);
        assert_eq!(himp(&[5, 5], &[4, 5]).unwrap(), 50.0);
        assert_eq!(himp(&[1, 2, 3, 4], &[2, 3, 4, 5]).unwrap(), 100.0);
        assert!(matches!(cmp(&[1, 2], &[1]), Err(MetricsError::LengthMismatch { .. })));
    }

    #[test]
    fn r_squared_hand_values() {
        let a = [1.0, 2.0, 3.0];
        assert_eq!(r_squared(&a, &a).unwrap(), 1.0);
        assert_eq!(r_squared(&a, &[2.0, 2.0, 2.0]).unwrap(), 0.0);
        assert_eq!(r_squared(&a, &[1.0, 2.0, 4.0]).unwrap(), 0.5);
        assert_eq!(r_squared(&[2.0, 2.0], &[1.0, 3.0]), Err(MetricsError::ConstantActual));
    }

    #[test]
    fn kl_hand_values() {
        let expected = 0.5 * 2f64.ln() + 0.5 * (2.0f64 / 3.0).ln();
        let d = kl_from_probabilities(&[0.5, 0.5], &[0.25, 0.75], SMOOTHING_EPSILON).unwrap();
        assert!((d - expected).abs() < 1e-15);
        assert!((d - 0.1438).abs() < 1e-3);
        // same split via samples: real half in each bin, generated 1/4 : 3/4
        let real = [0.0, 0.0, 1.0, 1.0];
        let gen = [0.0, 1.0, 1.0, 1.0];
        assert!((kl_divergence(&real, &gen, 2).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn kl_identical_is_zero() {
        let xs: Vec<f64> = (0..500).map(|i| ((i * 37) % 101) as f64 * 0.3).collect();
        assert_eq!(kl_divergence(&xs, &xs, DEFAULT_BINS).unwrap(), 0.0);
        assert_eq!(kl_divergence(&[3.0; 4], &[3.0; 7], 5).unwrap(), 0.0);
        assert_eq!(kl_divergence(&xs, &xs, 1), Err(MetricsError::TooFewBins(1)));
    }

    #[test]
    fn kl_smoothing_keeps_finite() {
        let d = kl_divergence(&[0.0, 1.0], &[1.0, 1.0], 2).unwrap();
        assert!(d.is_finite() && d > 5.0);
    }

    #[test]
    fn rating_bins_match_categorical() {
        let real = [1u32, 1, 2, 3, 3, 3, 4, 5, 5, 2];
        let gen = [1u32, 2, 2, 2, 3, 4, 4, 5, 5, 5];
        let as_f = |xs: &[u32]| xs.iter().map(|x| *x as f64).collect::<Vec<_>>();
        // edges 0.5..5.5 give one bin per level
        let edges: Vec<f64> = (0..=5).map(|i| 0.5 + i as f64).collect();
        let p = BinnedDistribution::from_samples(&as_f(&real), &edges).unwrap();
        let q = BinnedDistribution::from_samples(&as_f(&gen), &edges).unwrap();
        let binned = kl_from_probabilities(&p.probabilities, &q.probabilities, SMOOTHING_EPSILON).unwrap();
        let direct = kl_categorical(&real, &gen, 5).unwrap();
        assert!((binned - direct).abs() < 1e-15);
        let oracle: f64 = [(0.2, 0.1), (0.2, 0.3), (0.3, 0.1), (0.1, 0.2), (0.2, 0.3)]
            .iter()
            .map(|(p, q): &(f64, f64)| p * (p / q).ln())
            .sum();
        assert!((direct - oracle).abs() < 1e-12);
    }

    #[test]
    fn benchmark_draws() {
        let mut rng = StreamKey::new(5, "bench").stream();
        assert_eq!(benchmark_uniform(2.0, 2.0, 3, &mut rng).unwrap(), vec![2.0; 3]);
        let xs = benchmark_uniform(0.0, 1.0, 100_000, &mut rng).unwrap();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        assert!((mean - 0.5).abs() < 0.005);
        let a = benchmark_uniform(0.0, 9.0, 10, &mut StreamKey::new(1, "b").stream()).unwrap();
        let b = benchmark_uniform(0.0, 9.0, 10, &mut StreamKey::new(1, "b").stream()).unwrap();
        assert_eq!(a, b);
        assert!(benchmark_uniform(1.0, 0.0, 1, &mut rng).is_err());
    }

    proptest! {
        #[test]
        fn kl_non_negative(
            real in prop::collection::vec(-50.0f64..50.0, 1..60),
            gen in prop::collection::vec(-50.0f64..50.0, 1..60),
            bins in 2usize..30,
        ) {
            let d = kl_divergence(&real, &gen, bins).unwrap();
            prop_assert!(d >= 0.0 && d.is_finite());
            prop_assert!(kl_divergence(&real, &real, bins).unwrap() < 1e-10);
        }

        #[test]
        fn cmp_symmetric(pairs in prop::collection::vec((1u32..6, 1u32..6), 1..40)) {
            let (a, b): (Vec<u32>, Vec<u32>) = pairs.into_iter().unzip();
            prop_assert_eq!(cmp(&a, &b).unwrap(), cmp(&b, &a).unwrap());
            prop_assert_eq!(himp(&a, &b).unwrap(), himp(&b, &a).unwrap());
        }
    }
}
