//! Augmented Dickey-Fuller t-statistic with AIC lag selection.

use nalgebra::{DMatrix, DVector};

/// Schwert's rule, capped so the largest model keeps positive degrees of
/// freedom.
pub fn max_lag(n: usize) -> Option<usize> {
    let schwert = (12.0 * (n as f64 / 100.0).powf(0.25)).floor() as usize;
    let cap = (n / 2).checked_sub(2)?;
    Some(schwert.min(cap))
}

struct Fit {
    ssr: f64,
    nobs: usize,
    tstat: f64,
}

/// OLS of dy_t on [1, y_{t-1}, dy_{t-1}, .., dy_{t-lag}] for t in
/// `start..n`, returning the residual sum of squares and the t-statistic of
/// the y_{t-1} coefficient.
fn fit(y: &[f64], lag: usize, start: usize) -> Option<Fit> {
    let n = y.len();
    let nobs = n - start;
    let k = lag + 2;
    if nobs <= k {
        return None;
    }
    let mut x = DMatrix::<f64>::zeros(nobs, k);
    let mut dy = DVector::<f64>::zeros(nobs);
    for (row, t) in (start..n).enumerate() {
        dy[row] = y[t] - y[t - 1];
        x[(row, 0)] = 1.0;
        x[(row, 1)] = y[t - 1];
        for j in 1..=lag {
            x[(row, 1 + j)] = y[t - j] - y[t - j - 1];
        }
    }
    let xtx = x.transpose() * &x;
    let chol = xtx.cholesky()?;
    let beta = chol.solve(&(x.transpose() * &dy));
    let resid = &dy - &x * &beta;
    let ssr = resid.norm_squared();
    if !(ssr > 0.0) {
        return None;
    }
    let sigma2 = ssr / (nobs - k) as f64;
    let inv = chol.inverse();
    let se = (sigma2 * inv[(1, 1)]).sqrt();
    let tstat = beta[1] / se;
    tstat.is_finite().then_some(Fit { ssr, nobs, tstat })
}

/// ADF statistic (constant, no trend). Every candidate lag is scored by AIC
/// on the common sample that the largest lag allows; the chosen lag is then
/// refitted on all observations available to it.
pub fn adf_statistic(y: &[f64]) -> Option<f64> {
    let n = y.len();
    if n < 8 {
        return None;
    }
    let maxlag = max_lag(n)?;
    let common_start = maxlag + 1;
    let mut best: Option<(f64, usize)> = None;
    for lag in 0..=maxlag {
        let Some(f) = fit(y, lag, common_start) else {
            continue;
        };
        let aic = f.nobs as f64 * (f.ssr / f.nobs as f64).ln() + 2.0 * (lag + 2) as f64;
        if best.is_none_or(|(b, _)| aic < b) {
            best = Some((aic, lag));
        }
    }
    let (_, lag) = best?;
    fit(y, lag, lag + 1).map(|f| f.tstat)
}
