//! Run configuration and the stage runner behind the command-line tool.
//!
//! Every stage reads its inputs either from memory or from the artifacts an
//! earlier stage left in the output directory, so stages can be rerun one at
//! a time.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::benchmarks::{make_targets, TargetBank, TargetConfig};
use crate::coverage::{pairwise_grids, CoverageReport, GridScope, DEFAULT_N_SIDE};
use crate::dataset::{attach_labels, load_long_csv, CsvColumns, LabeledDataset, Level, DEFAULT_DAILY_FREQUENCY};
use crate::demand_class::{classify, profile_skipping, Cutoffs, DemandProfile, DemandStats};
use crate::embedding::{joint_matrix, pca_embedding, tsne, Embedding2D, EmbeddingMethod, TsneConfig};
use crate::error::{Error, Result};
use crate::features::{extract_matrix, CatalogChoice, FeatureMatrix};
use crate::io::{write_atomic, write_string_atomic};
use crate::plot::render_scatter;
use crate::report::{DatasetSummary, EmbeddingSummary, Report, StageSeeds, StageTiming, TOOL};
use crate::selection::{run_cascade, SelectionAudit, SelectionConfig};

pub const PROFILES_FILE: &str = "profiles.json";
pub const SELECTION_FILE: &str = "selection.json";
pub const EMBEDDING_FILE: &str = "embedding.csv";
pub const EMBEDDING_META_FILE: &str = "embedding_meta.json";
pub const COVERAGE_FILE: &str = "coverage.json";
pub const REPORT_FILE: &str = "report.json";

pub fn features_file(tag: &str) -> String {
    format!("features_{tag}.csv")
}

pub fn targets_file(tag: &str) -> String {
    format!("targets_{tag}.csv")
}

pub fn classes_file(tag: &str) -> String {
    format!("classes_{tag}.csv")
}

pub fn cells_file(a: &str, b: &str) -> String {
    format!("cells_{a}_{b}.csv")
}

/// Counters fed to [`stage_seed`].
const RELIEFF_STREAM: u64 = 1;
const TSNE_STREAM: u64 = 2;

/// Seed of one stage: the first word of stream `stage` of a ChaCha8
/// generator keyed by the run seed.
pub fn stage_seed(seed: u64, stage: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stage);
    rng.next_u64()
}

fn default_label_id_col() -> String {
    "id".into()
}

fn default_frequency() -> usize {
    DEFAULT_DAILY_FREQUENCY
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetInput {
    pub tag: String,
    pub path: PathBuf,
    #[serde(default)]
    pub labels: Option<PathBuf>,
    #[serde(default = "default_label_id_col")]
    pub label_id_col: String,
    #[serde(default)]
    pub columns: CsvColumns,
    #[serde(default = "default_frequency")]
    pub frequency: usize,
}

impl DatasetInput {
    pub fn new(tag: impl Into<String>, path: impl Into<PathBuf>) -> Self {
        DatasetInput {
            tag: tag.into(),
            path: path.into(),
            labels: None,
            label_id_col: default_label_id_col(),
            columns: CsvColumns::default(),
            frequency: default_frequency(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub n_side: usize,
    pub scope: GridScope,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            n_side: DEFAULT_N_SIDE,
            scope: GridScope::default(),
        }
    }
}

/// Everything a run depends on. The run `seed` determines the RReliefF and
/// t-SNE seeds, so the `seed` fields inside `selection` and `embedding` are
/// overridden.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub datasets: Vec<DatasetInput>,
    pub levels: BTreeSet<Level>,
    pub catalog: CatalogChoice,
    pub cutoffs: Cutoffs,
    pub targets: TargetConfig,
    pub selection: SelectionConfig,
    /// Labelled dataset the cascade runs on; the first labelled one if unset.
    pub selection_dataset: Option<String>,
    pub embedding_method: EmbeddingMethod,
    pub embedding: TsneConfig,
    pub grid: GridConfig,
    pub seed: u64,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            datasets: Vec::new(),
            levels: Level::ALL.into_iter().collect(),
            catalog: CatalogChoice::default(),
            cutoffs: Cutoffs::default(),
            targets: TargetConfig::default(),
            selection: SelectionConfig::default(),
            selection_dataset: None,
            embedding_method: EmbeddingMethod::default(),
            embedding: TsneConfig::default(),
            grid: GridConfig::default(),
            seed: 0,
            out_dir: PathBuf::from("out"),
        }
    }
}

fn valid_tag(tag: &str) -> bool {
    !tag.is_empty() && tag.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

fn absolute_under(base: &Path, p: &Path) -> Result<PathBuf> {
    let joined = if p.is_relative() { base.join(p) } else { p.to_path_buf() };
    std::path::absolute(&joined).map_err(|e| Error::io(&joined, e))
}

impl RunConfig {
    /// Reads a TOML or JSON (by extension) configuration. Relative paths are
    /// taken relative to the file's directory.
    pub fn from_path(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: RunConfig = match path.extension().and_then(|e| e.to_str()) {
            Some("json") => serde_json::from_str(&text)?,
            _ => toml::from_str(&text)?,
        };
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base)?;
        Ok(cfg)
    }

    /// Makes every path absolute relative to `base`, and turns an empty date
    /// column name into "no date column".
    pub fn resolve_paths(&mut self, base: &Path) -> Result<()> {
        for d in &mut self.datasets {
            d.path = absolute_under(base, &d.path)?;
            if let Some(l) = &d.labels {
                d.labels = Some(absolute_under(base, l)?);
            }
            if d.columns.date.as_deref().is_some_and(|c| c.trim().is_empty()) {
                d.columns.date = None;
            }
        }
        self.out_dir = absolute_under(base, &self.out_dir)?;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.datasets.is_empty() {
            return bad("no dataset configured".into());
        }
        let mut tags = BTreeSet::new();
        for d in &self.datasets {
            if !valid_tag(&d.tag) {
                return bad(format!("dataset tag `{}` must be nonempty ASCII letters, digits, - or _", d.tag));
            }
            if !tags.insert(d.tag.as_str()) {
                return bad(format!("dataset tag `{}` is used twice", d.tag));
            }
            if d.frequency == 0 {
                return bad(format!("dataset `{}` has frequency 0", d.tag));
            }
            if !d.path.is_file() {
                return bad(format!("dataset `{}`: input {} does not exist", d.tag, d.path.display()));
            }
            if let Some(l) = &d.labels {
                if !l.is_file() {
                    return bad(format!("dataset `{}`: label file {} does not exist", d.tag, l.display()));
                }
            }
        }
        if self.levels.is_empty() {
            return bad("no aggregation level selected".into());
        }
        if let Some(sel) = &self.selection_dataset {
            match self.datasets.iter().find(|d| &d.tag == sel) {
                None => return bad(format!("selection dataset `{sel}` is not configured")),
                Some(d) if d.labels.is_none() => {
                    return bad(format!("selection dataset `{sel}` has no label file"))
                }
                _ => {}
            }
        }
        if !(self.cutoffs.adi > 0.0 && self.cutoffs.cv2 > 0.0) {
            return bad("demand class cutoffs must be positive".into());
        }
        if self.targets.holdout == Some(0) {
            return bad("target holdout must be positive".into());
        }
        if self.grid.n_side == 0 {
            return bad("grid n_side must be positive".into());
        }
        self.selection
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        // the row count is only known after loading; check the rest now
        if self.embedding_method == EmbeddingMethod::Tsne {
            self.embedding
                .validate(usize::MAX)
                .map_err(|e| Error::Config(e.to_string()))?;
        }
        Ok(())
    }

    pub fn seeds(&self) -> StageSeeds {
        StageSeeds {
            relieff: stage_seed(self.seed, RELIEFF_STREAM),
            tsne: stage_seed(self.seed, TSNE_STREAM),
        }
    }

    /// Tag of the dataset the selection cascade runs on, if any is labelled.
    pub fn selection_tag(&self) -> Option<&str> {
        match &self.selection_dataset {
            Some(t) => Some(t),
            None => self
                .datasets
                .iter()
                .find(|d| d.labels.is_some())
                .map(|d| d.tag.as_str()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetProfile {
    pub tag: String,
    pub profile: DemandProfile,
    pub unclassified: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct EmbeddingMeta {
    method: EmbeddingMethod,
    features_used: Vec<String>,
    kl_trace: Option<Vec<(usize, f64)>>,
}

pub type Tagged<T> = Vec<(String, T)>;

/// Stage runner over a validated configuration.
#[derive(Debug, Clone)]
pub struct Pipeline {
    cfg: RunConfig,
}

impl Pipeline {
    pub fn new(cfg: RunConfig) -> Result<Pipeline> {
        cfg.validate().map_err(|e| e.in_stage("config"))?;
        Ok(Pipeline { cfg })
    }

    pub fn config(&self) -> &RunConfig {
        &self.cfg
    }

    fn out(&self, name: &str) -> PathBuf {
        self.cfg.out_dir.join(name)
    }

    fn tags(&self) -> Vec<&str> {
        self.cfg.datasets.iter().map(|d| d.tag.as_str()).collect()
    }

    pub fn load(&self) -> Result<Tagged<LabeledDataset>> {
        self.cfg
            .datasets
            .iter()
            .map(|d| {
                let ds = load_long_csv(&d.path, &d.columns, d.frequency)?;
                let ds = match &d.labels {
                    Some(l) => attach_labels(ds, l, &d.label_id_col)?,
                    None => ds,
                };
                Ok((d.tag.clone(), ds))
            })
            .collect::<Result<_>>()
            .map_err(|e: Error| e.in_stage("load"))
    }

    /// Demand profiles; series that cannot be classified are listed rather
    /// than failing the stage.
    pub fn classify(&self, data: &Tagged<LabeledDataset>) -> Result<Vec<DatasetProfile>> {
        let run = || -> Result<Vec<DatasetProfile>> {
            let mut out = Vec::new();
            for (tag, ds) in data {
                let (profile, unclassified) = profile_skipping(ds, &self.cfg.cutoffs)?;
                let path = self.out(&classes_file(tag));
                write_atomic(&path, |w| {
                    let mut csv = csv::Writer::from_writer(w);
                    csv.write_record(["series_id", "adi", "cv2", "class"])?;
                    for s in &ds.series {
                        let st = DemandStats::from_values(&s.values);
                        let cell = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
                        let class = classify(&st, &self.cfg.cutoffs)
                            .map(|c| c.name().to_string())
                            .unwrap_or_default();
                        csv.write_record([s.id.clone(), cell(st.adi), cell(st.cv2), class])?;
                    }
                    csv.flush().map_err(|e| Error::io(&path, e))?;
                    Ok(())
                })?;
                out.push(DatasetProfile {
                    tag: tag.clone(),
                    profile,
                    unclassified,
                });
            }
            write_string_atomic(&self.out(PROFILES_FILE), &serde_json::to_string_pretty(&out)?)?;
            Ok(out)
        };
        run().map_err(|e| e.in_stage("classify"))
    }

    pub fn extract(&self, data: &Tagged<LabeledDataset>) -> Result<Tagged<FeatureMatrix>> {
        let catalog = self.cfg.catalog.features();
        data.iter()
            .map(|(tag, ds)| {
                let m = extract_matrix(ds, &catalog, &self.cfg.levels)?;
                m.write_csv(&self.out(&features_file(tag)))?;
                Ok((tag.clone(), m))
            })
            .collect::<Result<_>>()
            .map_err(|e: Error| e.in_stage("extract"))
    }

    pub fn targets(&self, data: &Tagged<LabeledDataset>) -> Result<Tagged<TargetBank>> {
        data.iter()
            .map(|(tag, ds)| {
                let bank = make_targets(ds, &self.cfg.targets)?;
                bank.write_csv(&self.out(&targets_file(tag)))?;
                Ok((tag.clone(), bank))
            })
            .collect::<Result<_>>()
            .map_err(|e: Error| e.in_stage("targets"))
    }

    /// Runs the cascade on the selection dataset. Without any labelled
    /// dataset there is nothing to select on and `None` is recorded.
    pub fn select(
        &self,
        data: &Tagged<LabeledDataset>,
        features: &Tagged<FeatureMatrix>,
        targets: &Tagged<TargetBank>,
    ) -> Result<Option<SelectionAudit>> {
        let run = || -> Result<Option<SelectionAudit>> {
            let audit = match self.cfg.selection_tag() {
                None => None,
                Some(tag) => {
                    let find = |what: &str| Error::pipeline("select", format!("no {what} for dataset `{tag}`"));
                    let ds = lookup(data, tag).ok_or_else(|| find("data"))?;
                    let m = lookup(features, tag).ok_or_else(|| find("feature matrix"))?;
                    let bank = lookup(targets, tag).ok_or_else(|| find("targets"))?;
                    let mut cfg = self.cfg.selection;
                    cfg.relieff.seed = self.cfg.seeds().relieff;
                    Some(run_cascade(m, ds, bank, &cfg)?)
                }
            };
            write_string_atomic(&self.out(SELECTION_FILE), &serde_json::to_string_pretty(&audit)?)?;
            Ok(audit)
        };
        run().map_err(|e| e.in_stage("select"))
    }

    /// Joint embedding of every dataset over the selected features (all
    /// features when nothing was selected). Returns the embedding and the
    /// feature columns it used.
    pub fn embed(
        &self,
        features: &Tagged<FeatureMatrix>,
        selected: Option<&[String]>,
    ) -> Result<(Embedding2D, Vec<String>)> {
        let run = || -> Result<(Embedding2D, Vec<String>)> {
            let narrowed: Vec<(String, FeatureMatrix)> = features
                .iter()
                .map(|(t, m)| match selected {
                    Some(keys) => m.select_keys(keys).map(|s| (t.clone(), s)),
                    None => Ok((t.clone(), m.clone())),
                })
                .collect::<Result<_>>()?;
            let parts: Vec<(String, &FeatureMatrix)> = narrowed.iter().map(|(t, m)| (t.clone(), m)).collect();
            let (z, tags) = joint_matrix(&parts)?;
            let e = match self.cfg.embedding_method {
                EmbeddingMethod::Tsne => {
                    let mut cfg = self.cfg.embedding;
                    cfg.seed = self.cfg.seeds().tsne;
                    tsne(&z, &tags, &cfg)?
                }
                EmbeddingMethod::Pca => pca_embedding(&z, &tags)?,
            };
            let used = z.column_keys();
            e.write_csv(&self.out(EMBEDDING_FILE))?;
            let meta = EmbeddingMeta {
                method: e.method,
                features_used: used.clone(),
                kl_trace: e.kl_trace.clone(),
            };
            write_string_atomic(&self.out(EMBEDDING_META_FILE), &serde_json::to_string_pretty(&meta)?)?;
            render_scatter(&e, &self.cfg.out_dir, "embedding")?;
            Ok((e, used))
        };
        run().map_err(|e| e.in_stage("embed"))
    }

    pub fn coverage(&self, e: &Embedding2D) -> Result<Vec<CoverageReport>> {
        write_coverage(e, &self.cfg.grid, &self.cfg.out_dir).map_err(|e| e.in_stage("coverage"))
    }

    /// All stages end to end, finishing with the report.
    pub fn run(&self) -> Result<Report> {
        let mut timings = Vec::new();
        let mut timed = |stage: &str, start: Instant| {
            timings.push(StageTiming {
                stage: stage.to_string(),
                seconds: start.elapsed().as_secs_f64(),
            })
        };
        let t = Instant::now();
        let data = self.load()?;
        timed("load", t);
        let t = Instant::now();
        let profiles = self.classify(&data)?;
        timed("classify", t);
        let t = Instant::now();
        let features = self.extract(&data)?;
        timed("extract", t);
        let t = Instant::now();
        let targets = self.targets(&data)?;
        timed("targets", t);
        let t = Instant::now();
        let selection = self.select(&data, &features, &targets)?;
        timed("select", t);
        let t = Instant::now();
        let (embedding, used) = self.embed(&features, selection.as_ref().map(|s| s.selected.as_slice()))?;
        timed("embed", t);
        let t = Instant::now();
        let coverage = self.coverage(&embedding)?;
        timed("coverage", t);

        let datasets = data
            .iter()
            .zip(&profiles)
            .zip(features.iter().zip(&targets))
            .map(|(((tag, ds), p), ((_, m), (_, bank)))| {
                DatasetSummary::new(
                    tag,
                    ds.tasks.keys().cloned().collect(),
                    m,
                    (p.profile.clone(), p.unclassified.clone()),
                    bank,
                )
            })
            .collect();
        let mut artifacts = vec![PROFILES_FILE.to_string()];
        for tag in self.tags() {
            artifacts.push(classes_file(tag));
            artifacts.push(features_file(tag));
            artifacts.push(targets_file(tag));
        }
        artifacts.push(SELECTION_FILE.into());
        artifacts.push(EMBEDDING_FILE.into());
        artifacts.push(EMBEDDING_META_FILE.into());
        for tag in embedding.tags() {
            artifacts.push(format!("embedding_{tag}.svg"));
        }
        artifacts.push("embedding_overlay.svg".into());
        artifacts.push(COVERAGE_FILE.into());
        for c in &coverage {
            artifacts.push(cells_file(&c.a, &c.b));
        }
        artifacts.push(REPORT_FILE.into());

        let report = Report {
            tool: TOOL.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config: self.cfg.clone(),
            seeds: self.cfg.seeds(),
            datasets,
            selection,
            embedding: EmbeddingSummary {
                method: embedding.method,
                points: embedding.len(),
                features_used: used,
                kl_trace: embedding.kl_trace.clone(),
            },
            coverage,
            artifacts,
            timings,
        };
        report
            .write(&self.out(REPORT_FILE))
            .map_err(|e| e.in_stage("report"))?;
        Ok(report)
    }

    fn require(&self, name: &str, hint: &str) -> Result<PathBuf> {
        let path = self.out(name);
        if path.is_file() {
            Ok(path)
        } else {
            Err(Error::MissingArtifact {
                path,
                hint: hint.to_string(),
            })
        }
    }

    /// Per-dataset artifacts named by `file`. Refuses when only some of the
    /// datasets have one, since mixing runs would give inconsistent results.
    fn require_all(&self, file: fn(&str) -> String, command: &str) -> Result<Vec<(String, PathBuf)>> {
        let tags = self.tags();
        let (present, missing): (Vec<&str>, Vec<&str>) =
            tags.iter().partition(|t| self.out(&file(t)).is_file());
        if missing.is_empty() {
            return Ok(tags.iter().map(|t| (t.to_string(), self.out(&file(t)))).collect());
        }
        let hint = if present.is_empty() {
            format!("run `tsrep {command}` first")
        } else {
            format!(
                "partial upstream outputs (present for {}, missing for {}); rerun `tsrep {command}` for all datasets",
                present.join(", "),
                missing.join(", ")
            )
        };
        Err(Error::MissingArtifact {
            path: self.out(&file(missing[0])),
            hint,
        })
    }

    pub fn read_features(&self) -> Result<Tagged<FeatureMatrix>> {
        self.require_all(features_file, "extract")?
            .into_iter()
            .map(|(t, p)| Ok((t, FeatureMatrix::read_csv(&p)?)))
            .collect()
    }

    pub fn read_targets(&self) -> Result<Tagged<TargetBank>> {
        self.require_all(targets_file, "targets")?
            .into_iter()
            .map(|(t, p)| Ok((t, TargetBank::read_csv(&p)?)))
            .collect()
    }

    pub fn read_selection(&self) -> Result<Option<SelectionAudit>> {
        let path = self.require(SELECTION_FILE, "run `tsrep select` first")?;
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn read_embedding(&self) -> Result<Embedding2D> {
        read_embedding_from(&self.cfg.out_dir)
    }
}

fn lookup<'a, T>(items: &'a Tagged<T>, tag: &str) -> Option<&'a T> {
    items.iter().find(|(t, _)| t == tag).map(|(_, v)| v)
}

/// Reads `embedding.csv` and its metadata from an output directory.
pub fn read_embedding_from(dir: &Path) -> Result<Embedding2D> {
    let hint = "run `tsrep embed` first";
    let csv_path = dir.join(EMBEDDING_FILE);
    let meta_path = dir.join(EMBEDDING_META_FILE);
    for p in [&csv_path, &meta_path] {
        if !p.is_file() {
            return Err(Error::MissingArtifact {
                path: p.clone(),
                hint: hint.into(),
            });
        }
    }
    let text = std::fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let meta: EmbeddingMeta = serde_json::from_str(&text)?;
    let mut e = Embedding2D::read_csv(&csv_path, meta.method)?;
    e.kl_trace = meta.kl_trace;
    Ok(e)
}

/// Coverage reports for every pair of tags in `e`, written to
/// `coverage.json` with one cell table per pair.
pub fn write_coverage(e: &Embedding2D, grid: &GridConfig, out_dir: &Path) -> Result<Vec<CoverageReport>> {
    let grids = pairwise_grids(e, grid.n_side, grid.scope)?;
    let mut reports = Vec::with_capacity(grids.len());
    for (a, b, g) in &grids {
        g.write_cells_csv(a, b, &out_dir.join(cells_file(a, b)))?;
        reports.push(CoverageReport::from_grid(g, a, b)?);
    }
    write_string_atomic(&out_dir.join(COVERAGE_FILE), &serde_json::to_string_pretty(&reports)?)?;
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::write_long_csv;
    use crate::synth::{Generator, Regime};

    #[test]
    fn stage_seeds_are_distinct_and_stable() {
        assert_eq!(stage_seed(7, 1), stage_seed(7, 1));
        assert_ne!(stage_seed(7, 1), stage_seed(7, 2));
        assert_ne!(stage_seed(7, 1), stage_seed(8, 1));
    }

    fn write_dataset(dir: &Path, tag: &str, g: &Generator, n: usize, seed: u64, labelled: bool) -> DatasetInput {
        let ds = g.dataset(&format!("{tag}_"), n, seed).unwrap();
        let cols = CsvColumns {
            date: None,
            ..CsvColumns::default()
        };
        let path = dir.join(format!("{tag}.csv"));
        write_long_csv(&ds, &path, &cols).unwrap();
        let mut input = DatasetInput::new(tag, &path);
        input.columns = cols;
        if labelled {
            let lp = dir.join(format!("{tag}_labels.csv"));
            let mut w = csv::Writer::from_path(&lp).unwrap();
            w.write_record(["id", "regime"]).unwrap();
            for (s, l) in ds.series.iter().zip(&ds.tasks["regime"]) {
                w.write_record([&s.id, l]).unwrap();
            }
            w.flush().unwrap();
            input.labels = Some(lp);
        }
        input
    }

    fn small_config(dir: &Path) -> RunConfig {
        let g = Generator::retail(400);
        RunConfig {
            datasets: vec![
                write_dataset(dir, "a", &g, 40, 1, true),
                write_dataset(dir, "b", &Generator::single(Regime::Smooth, 400), 30, 2, false),
            ],
            levels: [Level::Daily, Level::Weekly].into_iter().collect(),
            embedding: TsneConfig {
                perplexity: 10.0,
                iterations: 300,
                ..TsneConfig::default()
            },
            grid: GridConfig {
                n_side: 10,
                scope: GridScope::Pairwise,
            },
            out_dir: dir.join("out"),
            ..RunConfig::default()
        }
    }

    #[test]
    fn validation_catches_bad_configs() {
        let dir = tempfile::tempdir().unwrap();
        let ok = small_config(dir.path());
        ok.validate().unwrap();

        let mut c = ok.clone();
        c.datasets[1].tag = "a".into();
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        let mut c = ok.clone();
        c.datasets[0].tag = "a/b".into();
        assert!(c.validate().is_err());
        let mut c = ok.clone();
        c.datasets[0].path = dir.path().join("nope.csv");
        assert!(c.validate().is_err());
        let mut c = ok.clone();
        c.selection_dataset = Some("b".into());
        assert!(c.validate().is_err());
        let mut c = ok.clone();
        c.embedding.perplexity = 0.5;
        assert!(c.validate().is_err());
        let mut c = ok.clone();
        c.levels.clear();
        assert!(c.validate().is_err());
        let c = RunConfig::default();
        let err = Pipeline::new(c).unwrap_err();
        assert_eq!(err.stage(), Some("config"));
    }

    #[test]
    fn config_files_resolve_relative_paths() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("x.csv"), "id,value\na,1\n").unwrap();
        let toml_text = r#"
seed = 3
levels = ["daily"]
out_dir = "results"

[[datasets]]
tag = "x"
path = "x.csv"
columns = { date = "" }
"#;
        let p = dir.path().join("run.toml");
        std::fs::write(&p, toml_text).unwrap();
        let cfg = RunConfig::from_path(&p).unwrap();
        assert_eq!(cfg.seed, 3);
        assert!(cfg.datasets[0].path.is_absolute());
        assert!(cfg.datasets[0].path.ends_with("x.csv"));
        assert_eq!(cfg.datasets[0].columns.date, None);
        assert_eq!(cfg.datasets[0].columns.id, "id");
        assert!(cfg.out_dir.ends_with("results"));
        cfg.validate().unwrap();

        let jp = dir.path().join("run.json");
        std::fs::write(&jp, serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(RunConfig::from_path(&jp).unwrap(), cfg);

        std::fs::write(&p, "sed = 3\n").unwrap();
        assert!(RunConfig::from_path(&p).is_err());
    }

    #[test]
    fn stages_refuse_missing_or_partial_upstream() {
        let dir = tempfile::tempdir().unwrap();
        let p = Pipeline::new(small_config(dir.path())).unwrap();
        assert!(matches!(p.read_features(), Err(Error::MissingArtifact { .. })));
        assert!(matches!(p.read_selection(), Err(Error::MissingArtifact { .. })));
        assert!(matches!(p.read_embedding(), Err(Error::MissingArtifact { .. })));

        let data = p.load().unwrap();
        p.extract(&data[..1].to_vec()).unwrap();
        match p.read_features() {
            Err(Error::MissingArtifact { hint, .. }) => {
                assert!(hint.contains("partial"), "{hint}");
                assert!(hint.contains("tsrep extract"), "{hint}");
            }
            other => panic!("expected a partial-output refusal, got {other:?}"),
        }
    }

    #[test]
    fn full_run_writes_every_artifact_and_replays() {
        let dir = tempfile::tempdir().unwrap();
        let p = Pipeline::new(small_config(dir.path())).unwrap();
        let report = p.run().unwrap();
        for a in &report.artifacts {
            assert!(p.out(a).is_file(), "missing {a}");
        }
        assert_eq!(report.datasets.len(), 2);
        assert_eq!(report.embedding.points, 70);
        assert_eq!(report.coverage.len(), 1);
        let audit = report.selection.as_ref().unwrap();
        for s in &audit.stages {
            assert_eq!(s.input, s.output + s.dropped.len(), "{}", s.stage);
        }

        let on_disk = Report::read(&p.out(REPORT_FILE)).unwrap();
        assert_eq!(on_disk, report);

        // the embedded configuration reproduces the run
        let replay = Pipeline::new(on_disk.config.clone()).unwrap().run().unwrap();
        assert_eq!(replay.without_timings().to_json().unwrap(), report.without_timings().to_json().unwrap());

        // downstream stages from files agree with the in-memory run
        let e = p.read_embedding().unwrap();
        assert_eq!(e.points.len(), 70);
        assert_eq!(p.coverage(&e).unwrap(), report.coverage);
        assert_eq!(p.read_selection().unwrap(), report.selection);
    }
}
