//! Intermittency / erraticness categorisation of demand series.
//!
//! Each series is placed in one quadrant of the (ADI, CV²) plane:
//!
//! | | CV² < cut | CV² ≥ cut |
//! |---|---|---|
//! | ADI < cut | smooth | erratic |
//! | ADI ≥ cut | intermittent | lumpy |
//!
//! Values exactly on a cutoff go to the higher quadrant.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::stats::{mean, sample_var};

/// Average inter-demand interval: periods per nonzero observation.
pub fn adi(x: &[f64]) -> Option<f64> {
    let nonzero = x.iter().filter(|v| **v > 0.0).count();
    (nonzero > 0).then(|| x.len() as f64 / nonzero as f64)
}

/// Squared coefficient of variation of the nonzero demand sizes, using the
/// sample variance. Needs at least two nonzero observations.
pub fn cv2(x: &[f64]) -> Option<f64> {
    let sizes: Vec<f64> = x.iter().copied().filter(|v| *v > 0.0).collect();
    if sizes.len() < 2 {
        return None;
    }
    let m = mean(&sizes);
    Some(sample_var(&sizes) / (m * m))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DemandStats {
    pub adi: Option<f64>,
    pub cv2: Option<f64>,
}

impl DemandStats {
    pub fn from_values(x: &[f64]) -> Self {
        DemandStats {
            adi: adi(x),
            cv2: cv2(x),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DemandClass {
    Smooth,
    Erratic,
    Intermittent,
    Lumpy,
}

impl DemandClass {
    pub const ALL: [DemandClass; 4] = [
        DemandClass::Smooth,
        DemandClass::Erratic,
        DemandClass::Intermittent,
        DemandClass::Lumpy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DemandClass::Smooth => "smooth",
            DemandClass::Erratic => "erratic",
            DemandClass::Intermittent => "intermittent",
            DemandClass::Lumpy => "lumpy",
        }
    }
}

impl fmt::Display for DemandClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cutoffs {
    pub adi: f64,
    pub cv2: f64,
}

impl Default for Cutoffs {
    fn default() -> Self {
        Cutoffs {
            adi: 1.32,
            cv2: 0.49,
        }
    }
}

pub fn classify(stats: &DemandStats, cut: &Cutoffs) -> Result<DemandClass> {
    let unclassifiable = |reason: &str| Error::Unclassifiable {
        id: String::new(),
        reason: reason.to_string(),
    };
    let adi = stats
        .adi
        .filter(|v| v.is_finite())
        .ok_or_else(|| unclassifiable("no nonzero demand"))?;
    let cv2 = stats
        .cv2
        .filter(|v| v.is_finite())
        .ok_or_else(|| unclassifiable("fewer than two nonzero demands"))?;
    Ok(match (adi >= cut.adi, cv2 >= cut.cv2) {
        (false, false) => DemandClass::Smooth,
        (false, true) => DemandClass::Erratic,
        (true, false) => DemandClass::Intermittent,
        (true, true) => DemandClass::Lumpy,
    })
}

/// Per-series classes of a dataset, in series order.
pub fn classify_dataset(ds: &LabeledDataset, cut: &Cutoffs) -> Result<Vec<(String, DemandClass)>> {
    ds.series
        .iter()
        .map(|s| {
            classify(&DemandStats::from_values(&s.values), cut)
                .map(|c| (s.id.clone(), c))
                .map_err(|e| match e {
                    Error::Unclassifiable { reason, .. } => Error::Unclassifiable {
                        id: s.id.clone(),
                        reason,
                    },
                    other => other,
                })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandProfile {
    pub series: usize,
    pub counts: BTreeMap<DemandClass, usize>,
    /// Percentage of series per class; every class is present, possibly 0.
    pub percentages: BTreeMap<DemandClass, f64>,
}

pub fn profile(ds: &LabeledDataset, cut: &Cutoffs) -> Result<DemandProfile> {
    let classes = classify_dataset(ds, cut)?;
    profile_of(classes.iter().map(|(_, c)| *c))
}

/// Profile of the classifiable series, plus the ids that were skipped.
pub fn profile_skipping(ds: &LabeledDataset, cut: &Cutoffs) -> Result<(DemandProfile, Vec<String>)> {
    let mut classes = Vec::new();
    let mut skipped = Vec::new();
    for s in &ds.series {
        match classify(&DemandStats::from_values(&s.values), cut) {
            Ok(c) => classes.push(c),
            Err(_) => skipped.push(s.id.clone()),
        }
    }
    Ok((profile_of(classes)?, skipped))
}

pub fn profile_of(classes: impl IntoIterator<Item = DemandClass>) -> Result<DemandProfile> {
    let mut counts: BTreeMap<DemandClass, usize> =
        DemandClass::ALL.iter().map(|c| (*c, 0)).collect();
    let mut n = 0;
    for c in classes {
        *counts.get_mut(&c).expect("all classes present") += 1;
        n += 1;
    }
    if n == 0 {
        return Err(Error::InvalidDataset("cannot profile an empty dataset".into()));
    }
    let percentages = counts
        .iter()
        .map(|(c, k)| (*c, 100.0 * *k as f64 / n as f64))
        .collect();
    Ok(DemandProfile {
        series: n,
        counts,
        percentages,
    })
}
