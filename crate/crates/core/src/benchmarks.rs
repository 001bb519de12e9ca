//! Per-series regression targets from seven simple forecasters evaluated on
//! a holdout tail.

use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{LabeledDataset, Level};
use crate::error::{Error, Result};
use crate::io::write_atomic;
use crate::stats::mean;

pub const MA_WINDOW: usize = 7;
pub const CROSTON_ALPHA: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Naive,
    SeasonalNaive,
    Mean,
    MovingAverage,
    Ses,
    Croston,
    Drift,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Naive,
        Method::SeasonalNaive,
        Method::Mean,
        Method::MovingAverage,
        Method::Ses,
        Method::Croston,
        Method::Drift,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Naive => "naive",
            Method::SeasonalNaive => "snaive",
            Method::Mean => "mean",
            Method::MovingAverage => "ma7",
            Method::Ses => "ses",
            Method::Croston => "croston",
            Method::Drift => "drift",
        }
    }

    /// Point forecasts for horizons `1..=h` from the training prefix only.
    pub fn forecast(self, train: &[f64], period: usize, h: usize) -> Vec<f64> {
        let n = train.len();
        let last = train[n - 1];
        match self {
            Method::Naive => vec![last; h],
            Method::SeasonalNaive => {
                let p = period.min(n);
                (0..h).map(|i| train[n - p + i % p]).collect()
            }
            Method::Mean => vec![mean(train); h],
            Method::MovingAverage => vec![mean(&train[n.saturating_sub(MA_WINDOW)..]); h],
            Method::Ses => vec![ses_level(train); h],
            Method::Croston => vec![croston(train, CROSTON_ALPHA); h],
            Method::Drift => {
                let slope = if n > 1 {
                    (last - train[0]) / (n - 1) as f64
                } else {
                    0.0
                };
                (1..=h).map(|i| last + slope * i as f64).collect()
            }
        }
    }
}

fn ses_run(x: &[f64], alpha: f64) -> (f64, f64) {
    let mut level = x[0];
    let mut sse = 0.0;
    for v in &x[1..] {
        let e = v - level;
        sse += e * e;
        level += alpha * e;
    }
    (level, sse)
}

/// Final level of simple exponential smoothing with alpha chosen from
/// 0.01..=0.99 (step 0.01) by in-sample one-step SSE; ties keep the smaller
/// alpha.
pub fn ses_level(x: &[f64]) -> f64 {
    let mut best = (f64::INFINITY, x[0]);
    for step in 1..=99 {
        let (level, sse) = ses_run(x, step as f64 / 100.0);
        if sse < best.0 {
            best = (sse, level);
        }
    }
    best.1
}

/// Croston's method: smoothed demand size over smoothed inter-demand
/// interval, initialised from the first demand. No demand forecasts 0.
pub fn croston(x: &[f64], alpha: f64) -> f64 {
    let mut demands = x.iter().enumerate().filter(|(_, v)| **v > 0.0);
    let Some((first, &size)) = demands.next() else {
        return 0.0;
    };
    let mut z = size;
    let mut p = (first + 1) as f64;
    let mut prev = first;
    for (t, &v) in demands {
        z += alpha * (v - z);
        p += alpha * ((t - prev) as f64 - p);
        prev = t;
    }
    z / p
}

/// How forecasts are turned into targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    /// Holdout mean absolute error scaled by the in-sample seasonal-naive
    /// mean absolute error.
    #[default]
    ScaledError,
    /// Mean holdout forecast divided by the in-sample mean absolute level.
    Forecast,
}

impl FromStr for TargetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "scaled_error" | "error" => Ok(TargetKind::ScaledError),
            "forecast" => Ok(TargetKind::Forecast),
            other => Err(Error::Parameter(format!("unknown target kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TargetConfig {
    /// Holdout length; `None` picks 28 / 4 / 1 for daily / weekly / monthly.
    pub holdout: Option<usize>,
    pub kind: TargetKind,
}

impl Default for TargetConfig {
    fn default() -> Self {
        TargetConfig {
            holdout: None,
            kind: TargetKind::ScaledError,
        }
    }
}

pub fn default_holdout(level: Level) -> usize {
    match level {
        Level::Daily => 28,
        Level::Weekly => 4,
        Level::Monthly => 1,
    }
}

/// Targets for a single series, or the reason it is excluded.
pub fn series_targets(
    x: &[f64],
    period: usize,
    holdout: usize,
    kind: TargetKind,
) -> std::result::Result<Vec<f64>, String> {
    let needed = holdout + 2 * period;
    if x.len() <= needed {
        return Err(format!("length {} does not exceed {needed}", x.len()));
    }
    let (train, test) = x.split_at(x.len() - holdout);
    let scale = match kind {
        TargetKind::ScaledError => {
            train
                .iter()
                .zip(&train[period..])
                .map(|(a, b)| (b - a).abs())
                .sum::<f64>()
                / (train.len() - period) as f64
        }
        TargetKind::Forecast => mean(&train.iter().map(|v| v.abs()).collect::<Vec<_>>()),
    };
    if !(scale > 0.0) {
        return Err("zero scaling denominator".into());
    }
    let values: Vec<f64> = Method::ALL
        .iter()
        .map(|m| {
            let f = m.forecast(train, period, holdout);
            match kind {
                TargetKind::ScaledError => {
                    f.iter().zip(test).map(|(a, b)| (a - b).abs()).sum::<f64>()
                        / holdout as f64
                        / scale
                }
                TargetKind::Forecast => mean(&f) / scale,
            }
        })
        .collect();
    if values.iter().all(|v| v.is_finite()) {
        Ok(values)
    } else {
        Err("non-finite target".into())
    }
}

/// Seven targets per retained series, plus the series left out and why.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetBank {
    pub methods: Vec<String>,
    pub series_ids: Vec<String>,
    /// One row per retained series, one column per method.
    pub values: Vec<Vec<f64>>,
    pub excluded: Vec<(String, String)>,
}

pub fn make_targets(ds: &LabeledDataset, cfg: &TargetConfig) -> Result<TargetBank> {
    let holdout = cfg.holdout.unwrap_or_else(|| default_holdout(ds.level));
    if holdout == 0 {
        return Err(Error::Parameter("holdout must be positive".into()));
    }
    let results: Vec<_> = ds
        .series
        .par_iter()
        .map(|s| series_targets(&s.values, s.frequency, holdout, cfg.kind))
        .collect();
    let mut bank = TargetBank {
        methods: Method::ALL.iter().map(|m| m.name().to_string()).collect(),
        series_ids: Vec::new(),
        values: Vec::new(),
        excluded: Vec::new(),
    };
    for (s, r) in ds.series.iter().zip(results) {
        match r {
            Ok(v) => {
                bank.series_ids.push(s.id.clone());
                bank.values.push(v);
            }
            Err(reason) => bank.excluded.push((s.id.clone(), reason)),
        }
    }
    Ok(bank)
}

impl TargetBank {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_atomic(path, |w| {
            let mut csv = csv::Writer::from_writer(w);
            let mut header = vec!["series_id".to_string()];
            header.extend(self.methods.iter().cloned());
            csv.write_record(&header)?;
            for (id, row) in self.series_ids.iter().zip(&self.values) {
                let mut rec = vec![id.clone()];
                rec.extend(row.iter().map(|v| v.to_string()));
                csv.write_record(&rec)?;
            }
            csv.flush().map_err(|e| Error::io(path, e))?;
            Ok(())
        })
    }

    pub fn read_csv(path: &Path) -> Result<TargetBank> {
        let mut rdr = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::Schema {
                path: path.to_path_buf(),
                message: format!("{other:?}"),
            },
        })?;
        let headers = rdr.headers()?.clone();
        if headers.get(0) != Some("series_id") || headers.len() < 2 {
            return Err(Error::Schema {
                path: path.to_path_buf(),
                message: "expected `series_id` followed by method columns".into(),
            });
        }
        let methods: Vec<String> = headers.iter().skip(1).map(String::from).collect();
        let mut bank = TargetBank {
            methods,
            series_ids: Vec::new(),
            values: Vec::new(),
            excluded: Vec::new(),
        };
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let row = rec
                .iter()
                .skip(1)
                .map(|f| {
                    f.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| Error::Data {
                        path: path.to_path_buf(),
                        row: i + 2,
                        message: format!("`{f}` is not a finite number"),
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            bank.series_ids.push(rec.get(0).unwrap_or_default().to_string());
            bank.values.push(row);
        }
        Ok(bank)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::SalesSeries;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn forecasts_by_hand() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0];
        assert_eq!(Method::Naive.forecast(&x, 3, 2), vec![8.0, 8.0]);
        assert_eq!(Method::SeasonalNaive.forecast(&x, 3, 4), vec![6.0, 7.0, 8.0, 6.0]);
        assert_eq!(Method::Mean.forecast(&x, 3, 1), vec![4.5]);
        assert_eq!(Method::MovingAverage.forecast(&x, 3, 1), vec![5.0]);
        assert_eq!(Method::Drift.forecast(&x, 3, 2), vec![9.0, 10.0]);
        // 0 0 3 0 0 6: z = 3 + 0.1 * 3 = 3.3, p = 3 + 0.1 * (3 - 3) = 3
        let c = croston(&[0.0, 0.0, 3.0, 0.0, 0.0, 6.0], 0.1);
        assert!((c - 1.1).abs() < 1e-12);
        assert_eq!(croston(&[0.0; 5], 0.1), 0.0);
    }

    #[test]
    fn ses_matches_brute_force_grid() {
        let x: [f64; 7] = [3.0, 5.0, 4.0, 6.0, 8.0, 7.0, 9.0];
        let mut best = (f64::INFINITY, 0.0);
        for a in 1..=99 {
            let alpha = a as f64 / 100.0;
            let mut l = x[0];
            let mut sse = 0.0;
            for v in &x[1..] {
                sse += (v - l).powi(2);
                l = alpha * v + (1.0 - alpha) * l;
            }
            if sse < best.0 {
                best = (sse, l);
            }
        }
        assert!((ses_level(&x) - best.1).abs() < 1e-9);
    }

    #[test]
    fn holdout_is_never_read() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x: Vec<f64> = (0..120).map(|_| rng.random_range(0.0..10.0)).collect();
        let train = &x[..92];
        for m in Method::ALL {
            let mut poisoned = x.clone();
            for v in poisoned[92..].iter_mut() {
                *v = 1e300;
            }
            let a = m.forecast(train, 7, 28);
            let b = m.forecast(&poisoned[..92], 7, 28);
            assert_eq!(a, b, "{}", m.name());
        }
        let clean = series_targets(&x, 7, 28, TargetKind::Forecast).unwrap();
        let mut poisoned = x.clone();
        for v in poisoned[92..].iter_mut() {
            *v = 1e6;
        }
        assert_eq!(clean, series_targets(&poisoned, 7, 28, TargetKind::Forecast).unwrap());
    }

    #[test]
    fn exact_seasonality_favours_seasonal_naive() {
        let pattern = [4.0, 0.0, 2.0, 9.0, 1.0, 5.0, 3.0];
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 7 * 20;
        let x: Vec<f64> = (0..n)
            .map(|t| {
                let clean = pattern[t % 7];
                // noise everywhere except the last in-sample week and the holdout
                if t < n - 28 - 7 {
                    clean + rng.random_range(0.0..2.0)
                } else {
                    clean
                }
            })
            .collect();
        let t = series_targets(&x, 7, 28, TargetKind::ScaledError).unwrap();
        assert!(t[1].abs() < 1e-12);
        assert!(t.iter().all(|v| *v >= t[1]));
    }

    fn naive_wins_on_random_walks(n: usize) -> usize {
        let mut wins = 0;
        for seed in 0..200 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut level = 1000.0f64;
            let x: Vec<f64> = (0..n)
                .map(|_| {
                    level = (level + rng.random_range(-1.0..1.0)).max(0.0);
                    level
                })
                .collect();
            let t = series_targets(&x, 7, 28, TargetKind::ScaledError).unwrap();
            if t[0] <= t[2] {
                wins += 1;
            }
        }
        wins
    }

    #[test]
    fn random_walk_naive_beats_mean() {
        // the gap between last value and sample mean grows like sqrt(n), so
        // the ordering only becomes reliable on multi-year daily histories
        let wins = naive_wins_on_random_walks(2000);
        assert!(wins >= 180, "{wins}/200");
    }

    #[test]
    fn constant_and_short_series_are_excluded() {
        let series = vec![
            SalesSeries::undated("flat", vec![5.0; 100]).unwrap(),
            SalesSeries::undated("short", vec![1.0; 40]).unwrap(),
            SalesSeries::undated("ok", (0..100).map(|t| (t % 5) as f64).collect()).unwrap(),
        ];
        let ds = LabeledDataset::unlabeled(series).unwrap();
        let bank = make_targets(&ds, &TargetConfig::default()).unwrap();
        assert_eq!(bank.series_ids, vec!["ok".to_string()]);
        assert_eq!(bank.methods.len(), 7);
        let reasons: Vec<&str> = bank.excluded.iter().map(|(id, _)| id.as_str()).collect();
        assert_eq!(reasons, vec!["flat", "short"]);
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        let bank = TargetBank {
            methods: vec!["a".into(), "b".into()],
            series_ids: vec!["x".into()],
            values: vec![vec![0.1 + 0.2, 3.0]],
            excluded: vec![],
        };
        bank.write_csv(&p).unwrap();
        assert_eq!(TargetBank::read_csv(&p).unwrap(), bank);
    }

    proptest! {
        #[test]
        fn targets_are_scale_invariant(seed in 0u64..1000, c in 0.01f64..100.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x: Vec<f64> = (0..90)
                .map(|t| if rng.random::<f64>() < 0.3 { 0.0 } else { (t % 7) as f64 + rng.random_range(0.0..5.0) })
                .collect();
            let y: Vec<f64> = x.iter().map(|v| v * c).collect();
            for kind in [TargetKind::ScaledError, TargetKind::Forecast] {
                let a = series_targets(&x, 7, 28, kind).unwrap();
                let b = series_targets(&y, 7, 28, kind).unwrap();
                for (u, v) in a.iter().zip(&b) {
                    prop_assert!((u - v).abs() <= 1e-9 * u.abs().max(1.0), "{kind:?}: {u} vs {v}");
                }
            }
        }
    }
}
