//! Classical additive decomposition (centred moving-average trend,
//! period-mean seasonality) and the strength measures built on it.

use crate::stats::{acf, sample_var};

#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub period: usize,
    /// Index of the first observation with a defined trend.
    pub offset: usize,
    /// Trend over `offset..offset + trend.len()`.
    pub trend: Vec<f64>,
    /// Seasonal component for every observation of the input.
    pub seasonal: Vec<f64>,
    /// Remainder over the same window as `trend`.
    pub remainder: Vec<f64>,
    /// Re-centred seasonal index per phase (phase 0 = first observation).
    pub seasonal_index: Vec<f64>,
}

/// Decomposes `x` with seasonal period `period`. Needs `period >= 2` and at
/// least two full periods.
pub fn decompose(x: &[f64], period: usize) -> Option<Decomposition> {
    let n = x.len();
    if period < 2 || n < 2 * period {
        return None;
    }
    let half = period / 2;
    let (offset, trend): (usize, Vec<f64>) = if period % 2 == 1 {
        let t = (half..n - half)
            .map(|t| x[t - half..=t + half].iter().sum::<f64>() / period as f64)
            .collect();
        (half, t)
    } else {
        // 2 x m moving average
        let t = (half..n - half)
            .map(|t| {
                let inner: f64 = x[t - half + 1..t + half].iter().sum();
                (0.5 * x[t - half] + inner + 0.5 * x[t + half]) / period as f64
            })
            .collect();
        (half, t)
    };

    let mut sums = vec![0.0; period];
    let mut counts = vec![0usize; period];
    for (i, tr) in trend.iter().enumerate() {
        let t = offset + i;
        sums[t % period] += x[t] - tr;
        counts[t % period] += 1;
    }
    let raw: Vec<f64> = sums
        .iter()
        .zip(&counts)
        .map(|(s, c)| s / *c as f64)
        .collect();
    let centre = raw.iter().sum::<f64>() / period as f64;
    let seasonal_index: Vec<f64> = raw.iter().map(|v| v - centre).collect();
    let seasonal: Vec<f64> = (0..n).map(|t| seasonal_index[t % period]).collect();
    let remainder = trend
        .iter()
        .enumerate()
        .map(|(i, tr)| {
            let t = offset + i;
            x[t] - tr - seasonal[t]
        })
        .collect();
    Some(Decomposition {
        period,
        offset,
        trend,
        seasonal,
        remainder,
        seasonal_index,
    })
}

impl Decomposition {
    fn window(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.trend.len()
    }

    /// `max(0, 1 - var(R) / var(T + R))`
    pub fn trend_strength(&self) -> Option<f64> {
        let deseasonal: Vec<f64> = self
            .trend
            .iter()
            .zip(&self.remainder)
            .map(|(t, r)| t + r)
            .collect();
        strength(&self.remainder, &deseasonal)
    }

    /// `max(0, 1 - var(R) / var(S + R))`
    pub fn seasonality_strength(&self) -> Option<f64> {
        let detrended: Vec<f64> = self
            .window()
            .zip(&self.remainder)
            .map(|(t, r)| self.seasonal[t] + r)
            .collect();
        strength(&self.remainder, &detrended)
    }

    /// Lag-1 autocorrelation of the remainder.
    pub fn remainder_acf1(&self) -> Option<f64> {
        acf(&self.remainder, 1)
    }

    /// 1-based phase of the smallest seasonal index (first on ties).
    pub fn trough(&self) -> usize {
        let mut best = 0;
        for (i, v) in self.seasonal_index.iter().enumerate() {
            if *v < self.seasonal_index[best] {
                best = i;
            }
        }
        best + 1
    }
}

fn strength(remainder: &[f64], with_component: &[f64]) -> Option<f64> {
    if remainder.len() < 2 {
        return None;
    }
    let denom = sample_var(with_component);
    if denom <= 0.0 || !denom.is_finite() {
        return None;
    }
    Some((1.0 - sample_var(remainder) / denom).max(0.0))
}
