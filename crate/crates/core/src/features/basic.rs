//! Distributional, crossing, entropy and chunked-trend features.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::stats::{min_max, pearson, pop_std, pop_var, quantile_sorted};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregate {
    Mean,
    Var,
    Max,
    Min,
}

impl Aggregate {
    pub fn name(self) -> &'static str {
        match self {
            Aggregate::Mean => "mean",
            Aggregate::Var => "var",
            Aggregate::Max => "max",
            Aggregate::Min => "min",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "mean" => Some(Aggregate::Mean),
            "var" => Some(Aggregate::Var),
            "max" => Some(Aggregate::Max),
            "min" => Some(Aggregate::Min),
            _ => None,
        }
    }

    /// Variance is the population variance.
    pub fn apply(self, x: &[f64]) -> f64 {
        match self {
            Aggregate::Mean => crate::stats::mean(x),
            Aggregate::Var => pop_var(x),
            Aggregate::Max => min_max(x).1,
            Aggregate::Min => min_max(x).0,
        }
    }
}

/// Fraction of observations `<= t`.
pub fn count_below(x: &[f64], t: f64) -> f64 {
    x.iter().filter(|v| **v <= t).count() as f64 / x.len() as f64
}

pub fn has_duplicate_max(x: &[f64]) -> f64 {
    let max = min_max(x).1;
    let hits = x.iter().filter(|v| **v == max).count();
    if hits > 1 {
        1.0
    } else {
        0.0
    }
}

pub fn variance_larger_than_standard_deviation(x: &[f64]) -> f64 {
    let var = pop_var(x);
    if var > var.sqrt() {
        1.0
    } else {
        0.0
    }
}

/// Number of switches of the indicator `x > m` along the series.
pub fn number_crossing_m(x: &[f64], m: f64) -> f64 {
    x.windows(2)
        .filter(|w| (w[0] > m) != (w[1] > m))
        .count() as f64
}

/// Aggregate of consecutive changes whose endpoints both lie in the closed
/// corridor `[quantile(ql), quantile(qh)]`. No qualifying change gives 0.
pub fn change_quantiles(x: &[f64], ql: f64, qh: f64, isabs: bool, agg: Aggregate) -> f64 {
    if ql >= qh || x.len() < 2 {
        return 0.0;
    }
    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    let lo = quantile_sorted(&sorted, ql);
    let hi = quantile_sorted(&sorted, qh);
    let inside = |v: f64| v >= lo && v <= hi;
    let changes: Vec<f64> = x
        .windows(2)
        .filter(|w| inside(w[0]) && inside(w[1]))
        .map(|w| if isabs { (w[1] - w[0]).abs() } else { w[1] - w[0] })
        .collect();
    if changes.is_empty() {
        0.0
    } else {
        agg.apply(&changes)
    }
}

/// Fraction of observations further than `r` population standard deviations
/// from the mean.
pub fn ratio_beyond_r_sigma(x: &[f64], r: f64) -> f64 {
    let m = crate::stats::mean(x);
    let s = pop_std(x);
    x.iter().filter(|v| (*v - m).abs() > r * s).count() as f64 / x.len() as f64
}

pub fn large_standard_deviation(x: &[f64], r: f64) -> f64 {
    let (lo, hi) = min_max(x);
    if pop_std(x) > r * (hi - lo) {
        1.0
    } else {
        0.0
    }
}

/// Pearson r of a least-squares line through chunk aggregates against chunk
/// index. The last chunk may be partial. A flat aggregate sequence gives 0.
pub fn agg_linear_trend_rvalue(x: &[f64], chunk_len: usize, agg: Aggregate) -> Option<f64> {
    if chunk_len == 0 {
        return None;
    }
    let aggs: Vec<f64> = x.chunks(chunk_len).map(|c| agg.apply(c)).collect();
    if aggs.len() < 2 {
        return None;
    }
    let idx: Vec<f64> = (0..aggs.len()).map(|i| i as f64).collect();
    Some(pearson(&idx, &aggs).unwrap_or(0.0))
}

/// Ricker ("Mexican hat") wavelet sampled at `points` positions.
pub fn ricker(points: usize, a: f64) -> Vec<f64> {
    let amp = 2.0 / ((3.0 * a).sqrt() * PI.powf(0.25));
    let wsq = a * a;
    let centre = (points as f64 - 1.0) / 2.0;
    (0..points)
        .map(|i| {
            let v = i as f64 - centre;
            let xsq = v * v;
            amp * (1.0 - xsq / wsq) * (-xsq / (2.0 * wsq)).exp()
        })
        .collect()
}

/// Continuous wavelet transform value at position `coeff` for width `width`:
/// the series convolved with a Ricker wavelet of `min(10 * width, N)` points,
/// output aligned to the input ("same" mode).
pub fn cwt_coefficient(x: &[f64], width: f64, coeff: usize) -> Option<f64> {
    let n = x.len();
    if coeff >= n || width <= 0.0 {
        return None;
    }
    let points = ((10.0 * width) as usize).min(n);
    let wavelet = ricker(points, width);
    // same-mode output i is full-convolution index i + (M - 1) / 2
    let t = coeff + (points - 1) / 2;
    let mut acc = 0.0;
    for (j, w) in wavelet.iter().enumerate() {
        if t >= j && t - j < n {
            acc += x[t - j] * w;
        }
    }
    Some(acc)
}

/// Approximate entropy with embedding `m` and tolerance `r * std(x)`.
pub fn approximate_entropy(x: &[f64], m: usize, r: f64) -> f64 {
    let n = x.len();
    if n <= m + 1 {
        return 0.0;
    }
    let tol = r * pop_std(x);
    let phi = |m: usize| -> f64 {
        let count = n - m + 1;
        let mut total = 0.0;
        for i in 0..count {
            let mut c = 0usize;
            for j in 0..count {
                let close = (0..m).all(|k| (x[i + k] - x[j + k]).abs() <= tol);
                if close {
                    c += 1;
                }
            }
            total += (c as f64 / count as f64).ln();
        }
        total / count as f64
    };
    (phi(m) - phi(m + 1)).abs()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn count_below_zero() {
        assert_eq!(count_below(&[0.0, 1.0, 2.0, 0.0], 0.0), 0.5);
    }

    #[test]
    fn duplicate_max() {
        assert_eq!(has_duplicate_max(&[1.0, 3.0, 3.0]), 1.0);
        assert_eq!(has_duplicate_max(&[1.0, 3.0, 2.0]), 0.0);
    }

    #[test]
    fn variance_vs_std() {
        // population var of [0, 4] is 4 > 2
        assert_eq!(variance_larger_than_standard_deviation(&[0.0, 4.0]), 1.0);
        // var 0.25 < std 0.5
        assert_eq!(variance_larger_than_standard_deviation(&[0.0, 1.0]), 0.0);
    }

    #[test]
    fn crossings() {
        assert_eq!(number_crossing_m(&[0.0, 2.0, 0.0, 1.0, 3.0], 1.0), 3.0);
    }

    #[test]
    fn change_quantiles_all_unit_steps() {
        let x: Vec<f64> = (0..=10).map(f64::from).collect();
        assert_eq!(change_quantiles(&x, 0.0, 1.0, true, Aggregate::Mean), 1.0);
        assert_eq!(change_quantiles(&x, 0.0, 1.0, false, Aggregate::Var), 0.0);
        assert_eq!(change_quantiles(&x, 0.5, 0.5, true, Aggregate::Mean), 0.0);
    }

    #[test]
    fn change_quantiles_corridor() {
        // corridor [q(0.5), q(1)] = [2, 5]; inside pairs: (2,5), (5,3)
        let x = [0.0, 2.0, 5.0, 3.0, 1.0];
        assert_eq!(change_quantiles(&x, 0.5, 1.0, true, Aggregate::Mean), 2.5);
        assert_eq!(change_quantiles(&x, 0.5, 1.0, false, Aggregate::Mean), 0.5);
    }

    #[test]
    fn ratio_beyond_one_sigma() {
        // mean 2.5, population std 4.3301; only 10 deviates by more
        assert_eq!(ratio_beyond_r_sigma(&[0.0, 0.0, 0.0, 10.0], 1.0), 0.25);
    }

    #[test]
    fn large_std() {
        assert_eq!(large_standard_deviation(&[0.0, 1.0], 0.3), 1.0);
        assert_eq!(large_standard_deviation(&[0.0, 0.0, 0.0, 0.0, 0.0, 10.0], 0.4), 0.0);
    }

    #[test]
    fn linear_trend_of_chunk_max() {
        let x: Vec<f64> = (0..20).map(f64::from).collect();
        let r = agg_linear_trend_rvalue(&x, 5, Aggregate::Max).unwrap();
        assert!((r - 1.0).abs() < 1e-12);
        assert_eq!(agg_linear_trend_rvalue(&[1.0; 20], 5, Aggregate::Var), Some(0.0));
        assert_eq!(agg_linear_trend_rvalue(&x[..5], 5, Aggregate::Max), None);
    }

    #[test]
    fn ricker_is_symmetric_and_peaks_at_centre() {
        let w = ricker(20, 2.0);
        for i in 0..10 {
            assert!((w[i] - w[19 - i]).abs() < 1e-15);
        }
        let w = ricker(21, 2.0);
        let amp = 2.0 / ((6.0f64).sqrt() * PI.powf(0.25));
        assert!((w[10] - amp).abs() < 1e-15);
    }

    #[test]
    fn cwt_matches_direct_convolution() {
        // brute force full convolution, then take the "same" slice
        let x: Vec<f64> = (0..30).map(|i| ((i * 37) % 11) as f64).collect();
        let w = ricker(20, 2.0);
        let full: Vec<f64> = (0..x.len() + w.len() - 1)
            .map(|t| {
                (0..w.len())
                    .filter(|&j| t >= j && t - j < x.len())
                    .map(|j| x[t - j] * w[j])
                    .sum()
            })
            .collect();
        let same = &full[(w.len() - 1) / 2..(w.len() - 1) / 2 + x.len()];
        assert!((cwt_coefficient(&x, 2.0, 12).unwrap() - same[12]).abs() < 1e-12);
        assert!(cwt_coefficient(&x[..12], 2.0, 12).is_none());
    }

    #[test]
    fn apen_constant_is_zero() {
        assert_eq!(approximate_entropy(&[4.0; 50], 2, 0.5), 0.0);
    }

    #[test]
    fn apen_regular_below_irregular() {
        let regular: Vec<f64> = (0..60).map(|i| (i % 2) as f64).collect();
        let irregular: Vec<f64> = (0..60).map(|i| ((i * 7919 + 13) % 17) as f64).collect();
        assert!(approximate_entropy(&regular, 2, 0.5) < approximate_entropy(&irregular, 2, 0.5));
    }
}
