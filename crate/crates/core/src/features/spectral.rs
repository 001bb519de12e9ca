//! Fourier-domain features.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DftCoefficient {
    pub re: f64,
    pub im: f64,
}

impl DftCoefficient {
    pub fn abs(&self) -> f64 {
        self.re.hypot(self.im)
    }

    /// Phase in radians, in (-pi, pi].
    pub fn angle(&self) -> f64 {
        let a = self.im.atan2(self.re);
        if a <= -PI {
            PI
        } else {
            a
        }
    }
}

/// `c_k = sum_n x_n exp(-2 pi i k n / N)`, evaluated directly.
///
/// The phase index `k * n` is reduced modulo `N` before the trigonometric
/// call so large `k` and `n` do not lose precision.
pub fn dft_coefficient(x: &[f64], k: usize) -> Result<DftCoefficient> {
    let n = x.len();
    if k >= n {
        return Err(Error::Parameter(format!(
            "DFT coefficient {k} out of range for length {n}"
        )));
    }
    let (mut re, mut im) = (0.0, 0.0);
    for (t, &v) in x.iter().enumerate() {
        let phase = ((k * t) % n) as f64;
        let theta = -2.0 * PI * phase / n as f64;
        let (s, c) = theta.sin_cos();
        re += v * c;
        im += v * s;
    }
    Ok(DftCoefficient { re, im })
}

/// Full DFT through rustfft.
pub fn fft(x: &[f64]) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    if buf.is_empty() {
        return buf;
    }
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(buf.len()).process(&mut buf);
    buf
}

/// Periodogram ordinates |X_k|^2 of the mean-removed series at the positive
/// frequencies k = 1..=N/2.
pub fn periodogram(x: &[f64]) -> Vec<f64> {
    let m = crate::stats::mean(x);
    let centred: Vec<f64> = x.iter().map(|v| v - m).collect();
    let spectrum = fft(&centred);
    (1..=x.len() / 2).map(|k| spectrum[k].norm_sqr()).collect()
}

/// Shannon entropy of the normalised periodogram divided by the log of the
/// number of frequencies, so white noise is near 1 and a pure tone near 0.
pub fn spectral_entropy(x: &[f64]) -> Option<f64> {
    let p = periodogram(x);
    if p.len() < 2 {
        return None;
    }
    let total: f64 = p.iter().sum();
    if total <= 0.0 || !total.is_finite() {
        return None;
    }
    let h: f64 = p
        .iter()
        .map(|v| v / total)
        .filter(|q| *q > 0.0)
        .map(|q| -q * q.ln())
        .sum();
    Some(h / (p.len() as f64).ln())
}

/// Entropy of the max-normalised periodogram values histogrammed into
/// `bins` equal-width bins over their range.
pub fn fourier_entropy(x: &[f64], bins: usize) -> Option<f64> {
    if bins == 0 {
        return None;
    }
    let p = periodogram(x);
    let max = p.iter().cloned().fold(0.0, f64::max);
    if p.is_empty() || max <= 0.0 {
        return None;
    }
    let scaled: Vec<f64> = p.iter().map(|v| v / max).collect();
    Some(binned_entropy(&scaled, bins))
}

/// Histogram entropy with numpy's bin convention (last bin closed).
pub fn binned_entropy(x: &[f64], bins: usize) -> f64 {
    let (lo, hi) = crate::stats::min_max(x);
    let mut counts = vec![0usize; bins];
    let width = hi - lo;
    for &v in x {
        let b = if width > 0.0 {
            (((v - lo) / width * bins as f64).floor() as usize).min(bins - 1)
        } else {
            0
        };
        counts[b] += 1;
    }
    let n = x.len() as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}
