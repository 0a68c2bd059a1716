//! Small statistics helpers shared by the Monte Carlo experiments.

use serde::{Deserialize, Serialize};

/// z-score of the two-sided 95% normal interval.
pub const Z95: f64 = 1.959_963_984_540_054;

/// A Bernoulli-rate estimate with a normal-approximation 95% interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinomialEstimate {
    pub successes: u64,
    pub trials: u64,
    pub estimate: f64,
    pub std_error: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl BinomialEstimate {
    pub fn new(successes: u64, trials: u64) -> Self {
        assert!(successes <= trials, "successes exceed trials");
        if trials == 0 {
            return Self {
                successes,
                trials,
                estimate: 0.0,
                std_error: 0.0,
                ci_low: 0.0,
                ci_high: 0.0,
            };
        }
        let n = trials as f64;
        let p = successes as f64 / n;
        let se = (p * (1.0 - p) / n).sqrt();
        Self {
            successes,
            trials,
            estimate: p,
            std_error: se,
            ci_low: (p - Z95 * se).max(0.0),
            ci_high: (p + Z95 * se).min(1.0),
        }
    }

    pub fn ci_width(&self) -> f64 {
        self.ci_high - self.ci_low
    }

    /// Binomial standard deviation of the rate under a hypothesised `p`.
    pub fn sigma_under(&self, p: f64) -> f64 {
        (p * (1.0 - p) / self.trials as f64).sqrt()
    }

    /// Whether the estimate lies within `k` binomial sigmas of `p`.
    ///
    /// When `p` is 0 or 1 the sigma collapses and the comparison is exact.
    pub fn within_sigmas(&self, p: f64, k: f64) -> bool {
        (self.estimate - p).abs() <= k * self.sigma_under(p)
    }
}

/// Median of a sample; the mean of the two middle values for even lengths.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len().is_multiple_of(2) {
        (v[mid - 1] + v[mid]) / 2.0
    } else {
        v[mid]
    })
}

/// Least-squares slope of `ys` against `xs`. `None` with fewer than two
/// distinct abscissae.
pub fn least_squares_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    assert_eq!(xs.len(), ys.len());
    if xs.len() < 2 {
        return None;
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    Some(sxy / sxx)
}

/// Equal-width histogram over `[lo, hi]`; values at `hi` land in the last bin.
pub fn histogram(values: &[f64], lo: f64, hi: f64, bins: usize) -> (Vec<f64>, Vec<u64>) {
    let width = (hi - lo) / bins as f64;
    let edges = (0..=bins).map(|i| lo + width * i as f64).collect();
    let mut counts = vec![0u64; bins];
    for &v in values {
        let b = (((v - lo) / width).floor().max(0.0) as usize).min(bins - 1);
        counts[b] += 1;
    }
    (edges, counts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 3.0, 2.0]), Some(2.5));
        assert_eq!(median(&[]), None);
    }

    #[test]
    fn slope_of_a_line() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x - 1.0).collect();
        assert!((least_squares_slope(&xs, &ys).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(least_squares_slope(&[1.0], &[1.0]), None);
    }

    #[test]
    fn histogram_covers_the_closed_range() {
        let (edges, counts) = histogram(&[0.0, 0.5, 1.0], 0.0, 1.0, 4);
        assert_eq!(edges.len(), 5);
        assert_eq!(counts, vec![1, 0, 1, 1]);
    }

    #[test]
    fn degenerate_binomial() {
        let e = BinomialEstimate::new(0, 100);
        assert_eq!(e.estimate, 0.0);
        assert!(e.within_sigmas(0.0, 3.0));
        assert!(!e.within_sigmas(0.5, 3.0));
    }
}
