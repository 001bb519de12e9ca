//! Guerrero's method for the Box-Cox transformation parameter.

use crate::stats::{mean, sample_var};

const GOLDEN: f64 = 0.618_033_988_749_894_9;
pub const LAMBDA_TOL: f64 = 1e-4;

/// Coefficient of variation of `sd_b / mean_b^(1 - lambda)` across blocks.
fn guerrero_cv(blocks: &[(f64, f64)], lambda: f64) -> f64 {
    let ratios: Vec<f64> = blocks
        .iter()
        .map(|(m, s)| s / m.powf(1.0 - lambda))
        .collect();
    let mu = mean(&ratios);
    if !(mu > 0.0) {
        return f64::INFINITY;
    }
    let cv = sample_var(&ratios).sqrt() / mu;
    if cv.is_finite() {
        cv
    } else {
        f64::INFINITY
    }
}

/// Lambda in [0, 1] minimising Guerrero's criterion, by golden-section
/// search. The series is cut into non-overlapping blocks of `max(2, period)`
/// observations aligned to its end; blocks with zero mean are skipped.
pub fn guerrero_lambda(x: &[f64], period: usize) -> Option<f64> {
    let period = period.max(2);
    let nblocks = x.len() / period;
    let start = x.len() - nblocks * period;
    let blocks: Vec<(f64, f64)> = x[start..]
        .chunks_exact(period)
        .filter_map(|b| {
            let m = mean(b);
            (m > 0.0).then(|| (m, sample_var(b).sqrt()))
        })
        .collect();
    if blocks.len() < 2 || blocks.iter().all(|(_, s)| *s == 0.0) {
        return None;
    }

    let f = |l: f64| guerrero_cv(&blocks, l);
    let (mut a, mut b) = (0.0f64, 1.0f64);
    let mut c = b - GOLDEN * (b - a);
    let mut d = a + GOLDEN * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > LAMBDA_TOL {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - GOLDEN * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + GOLDEN * (b - a);
            fd = f(d);
        }
    }
    let lambda = (a + b) / 2.0;
    f(lambda).is_finite().then_some(lambda)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_spread_prefers_no_transform() {
        // sd independent of level -> ratio sd / m^(1-l) is constant at l = 1
        let x: Vec<f64> = (0..120)
            .map(|t| 10.0 + (t / 12) as f64 * 5.0 + if t % 2 == 0 { 1.0 } else { -1.0 })
            .collect();
        let l = guerrero_lambda(&x, 12).unwrap();
        assert!(l > 1.0 - 1e-3, "lambda {l}");
    }

    #[test]
    fn proportional_spread_prefers_log() {
        // sd proportional to level -> ratio constant at l = 0
        let x: Vec<f64> = (0..120)
            .map(|t| {
                let level = 10.0 * (1.0 + (t / 12) as f64);
                level * if t % 2 == 0 { 1.1 } else { 0.9 }
            })
            .collect();
        let l = guerrero_lambda(&x, 12).unwrap();
        assert!(l < 1e-3, "lambda {l}");
    }

    #[test]
    fn within_unit_interval_and_scale_free() {
        let x: Vec<f64> = (0..140).map(|t| 1.0 + ((t * 7919) % 23) as f64).collect();
        let l = guerrero_lambda(&x, 7).unwrap();
        assert!((0.0..=1.0).contains(&l));
        let scaled: Vec<f64> = x.iter().map(|v| v * 3.5).collect();
        let l2 = guerrero_lambda(&scaled, 7).unwrap();
        assert!((l - l2).abs() <= 2.0 * LAMBDA_TOL);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(guerrero_lambda(&[0.0; 30], 7).is_none());
        assert!(guerrero_lambda(&[3.0; 30], 7).is_none());
        assert!(guerrero_lambda(&[1.0, 2.0, 3.0], 7).is_none());
    }
}
