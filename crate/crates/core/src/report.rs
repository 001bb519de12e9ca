//! The JSON run report.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::benchmarks::TargetBank;
use crate::coverage::CoverageReport;
use crate::demand_class::DemandProfile;
use crate::embedding::EmbeddingMethod;
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::io::write_string_atomic;
use crate::pipeline::RunConfig;
use crate::selection::SelectionAudit;

pub const TOOL: &str = "tsrep";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageSeeds {
    pub relieff: u64,
    pub tsne: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub tag: String,
    pub series: usize,
    pub tasks: Vec<String>,
    pub feature_columns: usize,
    pub missing_cells: usize,
    pub profile: DemandProfile,
    /// Series without enough nonzero demand to classify.
    pub unclassified: Vec<String>,
    pub target_series: usize,
    pub target_excluded: Vec<(String, String)>,
}

impl DatasetSummary {
    pub fn new(
        tag: &str,
        tasks: Vec<String>,
        features: &FeatureMatrix,
        profile: (DemandProfile, Vec<String>),
        targets: &TargetBank,
    ) -> Self {
        let missing_cells = (0..features.nrows())
            .map(|r| features.row(r).iter().filter(|c| c.is_none()).count())
            .sum();
        DatasetSummary {
            tag: tag.to_string(),
            series: features.nrows(),
            tasks,
            feature_columns: features.ncols(),
            missing_cells,
            profile: profile.0,
            unclassified: profile.1,
            target_series: targets.series_ids.len(),
            target_excluded: targets.excluded.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingSummary {
    pub method: EmbeddingMethod,
    pub points: usize,
    /// Feature columns the embedding was computed from, in matrix order.
    pub features_used: Vec<String>,
    pub kl_trace: Option<Vec<(usize, f64)>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

/// Everything a run produced apart from the matrices themselves. All fields
/// except `timings` are a deterministic function of `config`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub tool: String,
    pub version: String,
    pub config: RunConfig,
    pub seeds: StageSeeds,
    pub datasets: Vec<DatasetSummary>,
    pub selection: Option<SelectionAudit>,
    pub embedding: EmbeddingSummary,
    pub coverage: Vec<CoverageReport>,
    /// Files written by the run, relative to the output directory.
    pub artifacts: Vec<String>,
    pub timings: Vec<StageTiming>,
}

impl Report {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_string_atomic(path, &self.to_json()?)
    }

    pub fn read(path: &Path) -> Result<Report> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let report: Report = serde_json::from_str(&text)?;
        if report.tool != TOOL {
            return Err(Error::Schema {
                path: path.to_path_buf(),
                message: format!("not a {TOOL} report (tool = {})", report.tool),
            });
        }
        Ok(report)
    }

    /// The report with wall-clock data removed, for reproducibility checks.
    pub fn without_timings(&self) -> Report {
        Report {
            timings: Vec::new(),
            ..self.clone()
        }
    }
}
