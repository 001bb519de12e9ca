//! Feature catalog and feature-matrix extraction.
//!
//! Conventions: angles are radians in (-pi, pi]; quantiles are type 7;
//! sigma-based features use the population standard deviation.

pub mod basic;
pub mod boxcox;
pub mod decomp;
mod matrix;
pub mod spectral;
pub mod unitroot;

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use basic::Aggregate;
pub use decomp::{decompose, Decomposition};
pub use matrix::FeatureMatrix;
pub use spectral::{dft_coefficient, DftCoefficient};

use crate::dataset::{aggregate, LabeledDataset, Level, SalesSeries};
use crate::demand_class;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FftAttr {
    Real,
    Imag,
    Abs,
    Angle,
}

impl FftAttr {
    fn name(self) -> &'static str {
        match self {
            FftAttr::Real => "real",
            FftAttr::Imag => "imag",
            FftAttr::Abs => "abs",
            FftAttr::Angle => "angle",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "real" => Some(FftAttr::Real),
            "imag" => Some(FftAttr::Imag),
            "abs" => Some(FftAttr::Abs),
            "angle" => Some(FftAttr::Angle),
            _ => None,
        }
    }
}

/// A parameterised feature definition, independent of aggregation level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Feature {
    CountBelow { t: f64 },
    HasDuplicateMax,
    VarianceLargerThanStandardDeviation,
    NumberCrossingM { m: f64 },
    ChangeQuantiles { ql: f64, qh: f64, isabs: bool, agg: Aggregate },
    RatioBeyondRSigma { r: f64 },
    LargeStandardDeviation { r: f64 },
    AggLinearTrendRvalue { chunk_len: usize, agg: Aggregate },
    CwtCoefficient { width: f64, coeff: usize },
    ApproximateEntropy { m: usize, r: f64 },
    FourierEntropy { bins: usize },
    FftCoefficient { coeff: usize, attr: FftAttr },
    AdfStatistic,
    RemainderAcf1,
    Trough,
    SpectralEntropy,
    TrendStrength,
    SeasonalityStrength,
    SeasonalPeriod,
    Acf1,
    BoxCoxLambda,
    Adi,
    Cv2,
}

fn num(v: f64) -> String {
    v.to_string()
}

impl Feature {
    /// Canonical base name and ordered `(key, value)` parameters.
    fn parts(&self) -> (&'static str, Vec<(&'static str, String)>) {
        use Feature::*;
        match *self {
            CountBelow { t } => ("count_below", vec![("t", num(t))]),
            HasDuplicateMax => ("has_duplicate_max", vec![]),
            VarianceLargerThanStandardDeviation => {
                ("variance_larger_than_standard_deviation", vec![])
            }
            NumberCrossingM { m } => ("number_crossing", vec![("m", num(m))]),
            ChangeQuantiles { ql, qh, isabs, agg } => (
                "change_quantiles",
                vec![
                    ("f_agg", agg.name().to_string()),
                    ("isabs", isabs.to_string()),
                    ("qh", num(qh)),
                    ("ql", num(ql)),
                ],
            ),
            RatioBeyondRSigma { r } => ("ratio_beyond_r_sigma", vec![("r", num(r))]),
            LargeStandardDeviation { r } => ("large_standard_deviation", vec![("r", num(r))]),
            AggLinearTrendRvalue { chunk_len, agg } => (
                "agg_linear_trend",
                vec![
                    ("attr", "rvalue".to_string()),
                    ("chunk_len", chunk_len.to_string()),
                    ("f_agg", agg.name().to_string()),
                ],
            ),
            CwtCoefficient { width, coeff } => (
                "cwt_coefficients",
                vec![("coeff", coeff.to_string()), ("w", num(width))],
            ),
            ApproximateEntropy { m, r } => (
                "approximate_entropy",
                vec![("m", m.to_string()), ("r", num(r))],
            ),
            FourierEntropy { bins } => ("fourier_entropy", vec![("bins", bins.to_string())]),
            FftCoefficient { coeff, attr } => (
                "fft_coefficient",
                vec![("attr", attr.name().to_string()), ("coeff", coeff.to_string())],
            ),
            AdfStatistic => ("augmented_dickey_fuller_teststat", vec![]),
            RemainderAcf1 => ("e_acf1", vec![]),
            Trough => ("trough", vec![]),
            SpectralEntropy => ("spectral_entropy", vec![]),
            TrendStrength => ("trend_strength", vec![]),
            SeasonalityStrength => ("seasonality_strength", vec![]),
            SeasonalPeriod => ("seasonal_period", vec![]),
            Acf1 => ("acf1", vec![]),
            BoxCoxLambda => ("boxcox_lambda", vec![]),
            Adi => ("adi", vec![]),
            Cv2 => ("cv2", vec![]),
        }
    }

    pub fn name(&self) -> String {
        let (base, params) = self.parts();
        let mut s = base.to_string();
        for (k, v) in params {
            s.push('_');
            s.push_str(k);
            s.push('_');
            s.push_str(&v);
        }
        s
    }

    /// Named numeric parameters (booleans as 0/1; categorical ones omitted).
    pub fn params(&self) -> Vec<(&'static str, f64)> {
        self.parts()
            .1
            .into_iter()
            .filter_map(|(k, v)| match v.as_str() {
                "true" => Some((k, 1.0)),
                "false" => Some((k, 0.0)),
                _ => v.parse().ok().map(|x| (k, x)),
            })
            .collect()
    }

    /// Shortest series this feature is defined for at seasonal period `freq`.
    pub fn min_length(&self, freq: usize) -> usize {
        use Feature::*;
        match *self {
            FftCoefficient { coeff, .. } => coeff + 1,
            CwtCoefficient { coeff, .. } => coeff + 1,
            ApproximateEntropy { m, .. } => m + 2,
            AggLinearTrendRvalue { chunk_len, .. } => chunk_len + 1,
            RemainderAcf1 | Trough | TrendStrength | SeasonalityStrength => 2 * freq.max(2),
            BoxCoxLambda => 2 * freq.max(2),
            AdfStatistic => 8,
            SpectralEntropy | FourierEntropy { .. } => 4,
            _ => 2,
        }
    }

    fn from_parts(base: &str, vals: &[&str]) -> Option<Feature> {
        use Feature::*;
        let f = |i: usize| vals[i].parse::<f64>().ok();
        let u = |i: usize| vals[i].parse::<usize>().ok();
        let b = |i: usize| vals[i].parse::<bool>().ok();
        let a = |i: usize| Aggregate::parse(vals[i]);
        Some(match base {
            "count_below" => CountBelow { t: f(0)? },
            "number_crossing" => NumberCrossingM { m: f(0)? },
            "change_quantiles" => ChangeQuantiles {
                agg: a(0)?,
                isabs: b(1)?,
                qh: f(2)?,
                ql: f(3)?,
            },
            "ratio_beyond_r_sigma" => RatioBeyondRSigma { r: f(0)? },
            "large_standard_deviation" => LargeStandardDeviation { r: f(0)? },
            "agg_linear_trend" if vals[0] == "rvalue" => AggLinearTrendRvalue {
                chunk_len: u(1)?,
                agg: a(2)?,
            },
            "cwt_coefficients" => CwtCoefficient {
                coeff: u(0)?,
                width: f(1)?,
            },
            "approximate_entropy" => ApproximateEntropy { m: u(0)?, r: f(1)? },
            "fourier_entropy" => FourierEntropy { bins: u(0)? },
            "fft_coefficient" => FftCoefficient {
                attr: FftAttr::parse(vals[0])?,
                coeff: u(1)?,
            },
            _ => return None,
        })
    }
}

const PARAM_KEYS: &[(&str, &[&str])] = &[
    ("count_below", &["t"]),
    ("number_crossing", &["m"]),
    ("change_quantiles", &["f_agg", "isabs", "qh", "ql"]),
    ("ratio_beyond_r_sigma", &["r"]),
    ("large_standard_deviation", &["r"]),
    ("agg_linear_trend", &["attr", "chunk_len", "f_agg"]),
    ("cwt_coefficients", &["coeff", "w"]),
    ("approximate_entropy", &["m", "r"]),
    ("fourier_entropy", &["bins"]),
    ("fft_coefficient", &["attr", "coeff"]),
];

const PLAIN: &[Feature] = &[
    Feature::HasDuplicateMax,
    Feature::VarianceLargerThanStandardDeviation,
    Feature::AdfStatistic,
    Feature::RemainderAcf1,
    Feature::Trough,
    Feature::SpectralEntropy,
    Feature::TrendStrength,
    Feature::SeasonalityStrength,
    Feature::SeasonalPeriod,
    Feature::Acf1,
    Feature::BoxCoxLambda,
    Feature::Adi,
    Feature::Cv2,
];

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for Feature {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if let Some(p) = PLAIN.iter().find(|p| p.name() == s) {
            return Ok(*p);
        }
        let bad = || Error::Parameter(format!("unknown feature `{s}`"));
        for (base, keys) in PARAM_KEYS {
            let Some(mut rest) = s.strip_prefix(base) else {
                continue;
            };
            let mut vals = Vec::with_capacity(keys.len());
            for (i, key) in keys.iter().enumerate() {
                let head = format!("_{key}_");
                let Some(after) = rest.strip_prefix(head.as_str()) else {
                    break;
                };
                let end = match keys.get(i + 1) {
                    Some(next) => match after.find(&format!("_{next}_")) {
                        Some(e) => e,
                        None => break,
                    },
                    None => after.len(),
                };
                vals.push(&after[..end]);
                rest = &after[end..];
            }
            if vals.len() == keys.len() {
                if let Some(f) = Feature::from_parts(base, &vals) {
                    if f.name() == s {
                        return Ok(f);
                    }
                }
            }
        }
        Err(bad())
    }
}

/// A feature evaluated at one aggregation level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureId {
    pub feature: Feature,
    pub level: Level,
}

impl FeatureId {
    pub fn new(feature: Feature, level: Level) -> Self {
        FeatureId { feature, level }
    }

    /// `name@level`, the column header used in feature CSVs.
    pub fn key(&self) -> String {
        format!("{}@{}", self.feature.name(), self.level.name())
    }
}

impl fmt::Display for FeatureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.key())
    }
}

impl FromStr for FeatureId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, level) = s
            .rsplit_once('@')
            .ok_or_else(|| Error::Parameter(format!("feature key `{s}` lacks `@level`")))?;
        Ok(FeatureId {
            feature: name.parse()?,
            level: level.parse()?,
        })
    }
}

fn fft(coeff: usize, attr: FftAttr) -> Feature {
    Feature::FftCoefficient { coeff, attr }
}

/// The 42 level-specific features of the reference selection.
pub fn table_catalog() -> Vec<FeatureId> {
    use FftAttr::*;
    use Level::*;
    let d = |f| FeatureId::new(f, Daily);
    let w = |f| FeatureId::new(f, Weekly);
    let m = |f| FeatureId::new(f, Monthly);
    let cq = |ql, qh, isabs, agg| Feature::ChangeQuantiles { ql, qh, isabs, agg };
    vec![
        d(Feature::CountBelow { t: 0.0 }),
        d(fft(63, Angle)),
        d(Feature::Trough),
        d(fft(73, Angle)),
        d(Feature::HasDuplicateMax),
        d(fft(1, Angle)),
        m(fft(1, Angle)),
        d(fft(22, Angle)),
        d(fft(59, Angle)),
        d(Feature::VarianceLargerThanStandardDeviation),
        d(fft(26, Angle)),
        w(fft(26, Angle)),
        w(Feature::AdfStatistic),
        w(cq(0.8, 1.0, true, Aggregate::Mean)),
        w(fft(47, Imag)),
        w(fft(36, Real)),
        w(Feature::NumberCrossingM { m: 1.0 }),
        w(fft(2, Angle)),
        m(fft(2, Angle)),
        w(fft(5, Angle)),
        w(fft(44, Imag)),
        w(Feature::CwtCoefficient {
            width: 2.0,
            coeff: 12,
        }),
        w(fft(38, Real)),
        w(fft(42, Real)),
        w(fft(20, Angle)),
        w(fft(49, Imag)),
        w(Feature::AggLinearTrendRvalue {
            chunk_len: 10,
            agg: Aggregate::Var,
        }),
        w(fft(45, Real)),
        w(fft(46, Real)),
        w(fft(46, Imag)),
        w(fft(49, Abs)),
        w(Feature::ApproximateEntropy { m: 2, r: 0.5 }),
        w(fft(43, Real)),
        w(fft(48, Real)),
        m(Feature::FourierEntropy { bins: 5 }),
        m(cq(0.2, 0.4, true, Aggregate::Mean)),
        m(Feature::RatioBeyondRSigma { r: 1.0 }),
        m(Feature::RemainderAcf1),
        m(cq(0.2, 0.4, false, Aggregate::Var)),
        m(cq(0.4, 0.6, false, Aggregate::Var)),
        m(Feature::LargeStandardDeviation { r: 0.3 }),
        m(Feature::AggLinearTrendRvalue {
            chunk_len: 5,
            agg: Aggregate::Max,
        }),
    ]
}

/// The eight interpretable features at each of the three levels.
pub fn validation_catalog() -> Vec<FeatureId> {
    let base = [
        Feature::SpectralEntropy,
        Feature::TrendStrength,
        Feature::SeasonalityStrength,
        Feature::SeasonalPeriod,
        Feature::Acf1,
        Feature::BoxCoxLambda,
        Feature::Adi,
        Feature::Cv2,
    ];
    Level::ALL
        .iter()
        .flat_map(|l| base.iter().map(move |f| FeatureId::new(*f, *l)))
        .collect()
}

/// Named catalogs selectable from configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CatalogChoice {
    #[default]
    Table,
    Validation,
    All,
}

impl CatalogChoice {
    pub fn features(self) -> Vec<FeatureId> {
        match self {
            CatalogChoice::Table => table_catalog(),
            CatalogChoice::Validation => validation_catalog(),
            CatalogChoice::All => {
                let mut v = table_catalog();
                v.extend(validation_catalog());
                v
            }
        }
    }
}

impl FromStr for CatalogChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "table" => Ok(CatalogChoice::Table),
            "validation" => Ok(CatalogChoice::Validation),
            "all" => Ok(CatalogChoice::All),
            other => Err(Error::Parameter(format!("unknown catalog `{other}`"))),
        }
    }
}

/// Evaluates one feature on a series already at the feature's level.
/// `None` marks a missing value (precondition failed or result non-finite).
pub fn compute_feature(x: &[f64], frequency: usize, feature: &Feature) -> Option<f64> {
    use Feature::*;
    if x.len() < feature.min_length(frequency) {
        return None;
    }
    let value = match *feature {
        CountBelow { t } => basic::count_below(x, t),
        HasDuplicateMax => basic::has_duplicate_max(x),
        VarianceLargerThanStandardDeviation => basic::variance_larger_than_standard_deviation(x),
        NumberCrossingM { m } => basic::number_crossing_m(x, m),
        ChangeQuantiles { ql, qh, isabs, agg } => basic::change_quantiles(x, ql, qh, isabs, agg),
        RatioBeyondRSigma { r } => basic::ratio_beyond_r_sigma(x, r),
        LargeStandardDeviation { r } => basic::large_standard_deviation(x, r),
        AggLinearTrendRvalue { chunk_len, agg } => basic::agg_linear_trend_rvalue(x, chunk_len, agg)?,
        CwtCoefficient { width, coeff } => basic::cwt_coefficient(x, width, coeff)?,
        ApproximateEntropy { m, r } => basic::approximate_entropy(x, m, r),
        FourierEntropy { bins } => spectral::fourier_entropy(x, bins)?,
        FftCoefficient { coeff, attr } => {
            let c = dft_coefficient(x, coeff).ok()?;
            match attr {
                FftAttr::Real => c.re,
                FftAttr::Imag => c.im,
                FftAttr::Abs => c.abs(),
                FftAttr::Angle => c.angle(),
            }
        }
        AdfStatistic => unitroot::adf_statistic(x)?,
        RemainderAcf1 => decompose(x, frequency)?.remainder_acf1()?,
        Trough => decompose(x, frequency)?.trough() as f64,
        SpectralEntropy => spectral::spectral_entropy(x)?,
        TrendStrength => decompose(x, frequency)?.trend_strength()?,
        SeasonalityStrength => decompose(x, frequency)?.seasonality_strength()?,
        SeasonalPeriod => frequency as f64,
        Acf1 => crate::stats::acf(x, 1)?,
        BoxCoxLambda => boxcox::guerrero_lambda(x, frequency)?,
        Adi => demand_class::adi(x)?,
        Cv2 => demand_class::cv2(x)?,
    };
    value.is_finite().then_some(value)
}

/// Feature row of one daily series for the given catalog. Levels the series
/// is too short to aggregate to produce missing cells.
pub fn feature_row(s: &SalesSeries, base: Level, catalog: &[FeatureId]) -> Vec<Option<f64>> {
    let mut cache: HashMap<Level, Option<SalesSeries>> = HashMap::new();
    catalog
        .iter()
        .map(|fid| {
            let series = cache.entry(fid.level).or_insert_with(|| {
                if fid.level == base {
                    Some(s.clone())
                } else if base == Level::Daily {
                    aggregate(s, fid.level).ok()
                } else {
                    None
                }
            });
            series
                .as_ref()
                .and_then(|s| compute_feature(&s.values, s.frequency, &fid.feature))
        })
        .collect()
}

/// Feature matrix of a dataset: one row per series (dataset order), one
/// column per catalog entry whose level is in `levels` (catalog order).
/// Rows are computed in parallel and assembled by position.
pub fn extract_matrix(
    ds: &LabeledDataset,
    catalog: &[FeatureId],
    levels: &BTreeSet<Level>,
) -> Result<FeatureMatrix> {
    let columns: Vec<FeatureId> = catalog
        .iter()
        .filter(|f| levels.contains(&f.level))
        .copied()
        .collect();
    if columns.is_empty() {
        return Err(Error::Parameter("feature catalog is empty for the requested levels".into()));
    }
    let mut seen = BTreeSet::new();
    for c in &columns {
        if !seen.insert(c.key()) {
            return Err(Error::Parameter(format!("duplicate catalog entry {}", c.key())));
        }
    }
    let rows: Vec<Vec<Option<f64>>> = ds
        .series
        .par_iter()
        .map(|s| feature_row(s, ds.level, &columns))
        .collect();
    FeatureMatrix::new(ds.ids(), columns, rows.into_iter().flatten().collect())
}
