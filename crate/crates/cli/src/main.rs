use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tsrep::coverage::GridScope;
use tsrep::dataset::Level;
use tsrep::embedding::{Embedding2D, EmbeddingMethod};
use tsrep::features::CatalogChoice;
use tsrep::pipeline::{self, DatasetInput, GridConfig, Pipeline, RunConfig};
use tsrep::report::Report;
use tsrep::{Error, Result};

#[derive(Parser)]
#[command(name = "tsrep", version, about = "Feature-based representativeness analysis of demand time series")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute feature matrices (features_<tag>.csv).
    Extract(RunArgs),
    /// Demand-class profiles (profiles.json, classes_<tag>.csv).
    Classify(RunArgs),
    /// Benchmark forecast targets (targets_<tag>.csv).
    Targets(RunArgs),
    /// Feature selection cascade on the labelled dataset (selection.json).
    Select(RunArgs),
    /// Joint 2-D embedding of all datasets (embedding.csv and SVG plots).
    Embed(RunArgs),
    /// Coverage metrics between embedded datasets (coverage.json).
    Coverage(CoverageArgs),
    /// Run every stage and write report.json.
    Report(ReportArgs),
}

fn parse_level_list(s: &str) -> std::result::Result<Vec<Level>, String> {
    Level::parse_list(s)
        .map(|l| l.into_iter().collect())
        .map_err(|e| e.to_string())
}

fn parse_tagged(s: &str) -> std::result::Result<(String, PathBuf), String> {
    let (tag, path) = s
        .split_once('=')
        .ok_or_else(|| format!("expected TAG=PATH, got `{s}`"))?;
    Ok((tag.to_string(), PathBuf::from(path)))
}

#[derive(Args, Clone, Default)]
struct RunArgs {
    /// TOML or JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset as TAG=PATH; repeat for several. Replaces configured datasets.
    #[arg(long = "input", value_parser = parse_tagged)]
    inputs: Vec<(String, PathBuf)>,
    /// Label file for a dataset as TAG=PATH.
    #[arg(long = "labels", value_parser = parse_tagged)]
    labels: Vec<(String, PathBuf)>,
    #[arg(long)]
    id_col: Option<String>,
    /// Date column; an empty string means the file has none.
    #[arg(long)]
    date_col: Option<String>,
    #[arg(long)]
    value_col: Option<String>,
    /// Seasonal period of the base (daily) level.
    #[arg(long)]
    frequency: Option<usize>,
    /// Aggregation levels, e.g. d,w,m.
    #[arg(long, value_parser = parse_level_list)]
    levels: Option<Vec<Level>>,
    /// table, validation or all.
    #[arg(long, value_parser = |s: &str| s.parse::<CatalogChoice>().map_err(|e| e.to_string()))]
    catalog: Option<CatalogChoice>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Correlation-distance cut for redundancy clustering.
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    k_neighbors: Option<usize>,
    #[arg(long)]
    perplexity: Option<f64>,
    #[arg(long)]
    iterations: Option<usize>,
    /// Use PCA instead of t-SNE for the embedding.
    #[arg(long)]
    pca: bool,
    /// Grid cells per side.
    #[arg(long)]
    grid: Option<usize>,
    /// One grid over all datasets instead of one per pair.
    #[arg(long)]
    shared_grid: bool,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (defaults to all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CoverageArgs {
    /// Embedding CSV holding at least two dataset tags.
    #[arg(long, conflicts_with_all = ["a", "b"])]
    embedding: Option<PathBuf>,
    /// Embedding CSV whose points are all tagged A.
    #[arg(long, requires = "b")]
    a: Option<PathBuf>,
    /// Embedding CSV whose points are all tagged B.
    #[arg(long, requires = "a")]
    b: Option<PathBuf>,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Args)]
struct ReportArgs {
    /// Rerun with the configuration embedded in an earlier report.
    #[arg(long, conflicts_with = "config")]
    replay: Option<PathBuf>,
    #[command(flatten)]
    run: RunArgs,
}

impl RunArgs {
    /// Configuration from `--config` (or defaults) with flags layered on top.
    fn resolve(&self, base: Option<RunConfig>) -> Result<RunConfig> {
        let cwd = std::env::current_dir().map_err(|e| Error::Config(format!("no working directory: {e}")))?;
        let mut cfg = match (&self.config, base) {
            (_, Some(b)) => b,
            (Some(p), None) => RunConfig::from_path(p)?,
            (None, None) => RunConfig::default(),
        };
        if !self.inputs.is_empty() {
            cfg.datasets = self
                .inputs
                .iter()
                .map(|(tag, path)| DatasetInput::new(tag.clone(), path.clone()))
                .collect();
        }
        for (tag, path) in &self.labels {
            let d = cfg
                .datasets
                .iter_mut()
                .find(|d| &d.tag == tag)
                .ok_or_else(|| Error::Config(format!("--labels names unknown dataset `{tag}`")))?;
            d.labels = Some(path.clone());
        }
        for d in &mut cfg.datasets {
            if let Some(c) = &self.id_col {
                d.columns.id = c.clone();
                d.label_id_col = c.clone();
            }
            if let Some(c) = &self.date_col {
                d.columns.date = Some(c.clone());
            }
            if let Some(c) = &self.value_col {
                d.columns.value = c.clone();
            }
            if let Some(f) = self.frequency {
                d.frequency = f;
            }
        }
        if let Some(l) = &self.levels {
            cfg.levels = l.iter().copied().collect();
        }
        if let Some(c) = self.catalog {
            cfg.catalog = c;
        }
        if let Some(a) = self.alpha {
            cfg.selection.alpha = a;
        }
        if let Some(t) = self.threshold {
            cfg.selection.threshold = t;
        }
        if let Some(k) = self.k_neighbors {
            cfg.selection.relieff.k_neighbors = k;
        }
        if let Some(p) = self.perplexity {
            cfg.embedding.perplexity = p;
        }
        if let Some(i) = self.iterations {
            cfg.embedding.iterations = i;
        }
        if self.pca {
            cfg.embedding_method = EmbeddingMethod::Pca;
        }
        if let Some(n) = self.grid {
            cfg.grid.n_side = n;
        }
        if self.shared_grid {
            cfg.grid.scope = GridScope::Shared;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = &self.out {
            cfg.out_dir = o.clone();
        }
        cfg.resolve_paths(&cwd)?;
        Ok(cfg)
    }

    fn pipeline(&self) -> Result<Pipeline> {
        Pipeline::new(self.resolve(None)?)
    }

    fn grid(&self) -> Result<(GridConfig, PathBuf)> {
        let cfg = match &self.config {
            Some(p) => RunConfig::from_path(p)?,
            None => RunConfig::default(),
        };
        let mut grid = cfg.grid;
        if let Some(n) = self.grid {
            grid.n_side = n;
        }
        if self.shared_grid {
            grid.scope = GridScope::Shared;
        }
        if grid.n_side == 0 {
            return Err(Error::Config("grid n_side must be positive".into()));
        }
        let out = self.out.clone().unwrap_or(cfg.out_dir);
        Ok((grid, out))
    }
}

fn retag(mut e: Embedding2D, tag: &str) -> Embedding2D {
    e.dataset_tags = vec![tag.to_string(); e.len()];
    e
}

fn read_plain_embedding(path: &Path) -> Result<Embedding2D> {
    if !path.is_file() {
        return Err(Error::MissingArtifact {
            path: path.to_path_buf(),
            hint: "pass an embedding CSV written by `tsrep embed`".into(),
        });
    }
    Embedding2D::read_csv(path, EmbeddingMethod::Tsne)
}

fn say(out: &Path, name: &str) {
    println!("wrote {}", out.join(name).display());
}

fn run(cli: Cli) -> Result<()> {
    let threads = match &cli.command {
        Command::Extract(a) | Command::Classify(a) | Command::Targets(a) | Command::Select(a) | Command::Embed(a) => {
            a.threads
        }
        Command::Coverage(c) => c.run.threads,
        Command::Report(r) => r.run.threads,
    };
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("cannot start {n} worker threads: {e}")))?;
    }

    match cli.command {
        Command::Extract(a) => {
            let p = a.pipeline()?;
            let data = p.load()?;
            for (tag, m) in p.extract(&data)? {
                println!("{tag}: {} series x {} features", m.nrows(), m.ncols());
                say(&p.config().out_dir, &pipeline::features_file(&tag));
            }
        }
        Command::Classify(a) => {
            let p = a.pipeline()?;
            let data = p.load()?;
            for d in p.classify(&data)? {
                let shares: Vec<String> = d
                    .profile
                    .percentages
                    .iter()
                    .map(|(c, v)| format!("{c} {v:.2}%"))
                    .collect();
                println!("{}: {}", d.tag, shares.join(", "));
                if !d.unclassified.is_empty() {
                    println!("{}: {} series could not be classified", d.tag, d.unclassified.len());
                }
            }
            say(&p.config().out_dir, pipeline::PROFILES_FILE);
        }
        Command::Targets(a) => {
            let p = a.pipeline()?;
            let data = p.load()?;
            for (tag, bank) in p.targets(&data)? {
                println!("{tag}: {} series, {} excluded", bank.series_ids.len(), bank.excluded.len());
                say(&p.config().out_dir, &pipeline::targets_file(&tag));
            }
        }
        Command::Select(a) => {
            let p = a.pipeline()?;
            let data = p.load()?;
            let features = p.read_features().map_err(|e| e.in_stage("select"))?;
            let targets = p.read_targets().map_err(|e| e.in_stage("select"))?;
            match p.select(&data, &features, &targets)? {
                Some(audit) => {
                    for s in &audit.stages {
                        println!("{}: {} -> {}", s.stage, s.input, s.output);
                    }
                }
                None => println!("no labelled dataset; nothing selected"),
            }
            say(&p.config().out_dir, pipeline::SELECTION_FILE);
        }
        Command::Embed(a) => {
            let p = a.pipeline()?;
            let features = p.read_features().map_err(|e| e.in_stage("embed"))?;
            let selection = p.read_selection().map_err(|e| e.in_stage("embed"))?;
            let (e, used) = p.embed(&features, selection.as_ref().map(|s| s.selected.as_slice()))?;
            println!("{} points from {} features", e.len(), used.len());
            say(&p.config().out_dir, pipeline::EMBEDDING_FILE);
        }
        Command::Coverage(c) => {
            let (grid, out) = c.run.grid().map_err(|e| e.in_stage("coverage"))?;
            let e = match (&c.embedding, &c.a, &c.b) {
                (Some(path), _, _) => read_plain_embedding(path),
                (None, Some(a), Some(b)) => (|| {
                    let mut ea = retag(read_plain_embedding(a)?, "A");
                    let eb = retag(read_plain_embedding(b)?, "B");
                    ea.series_ids.extend(eb.series_ids);
                    ea.dataset_tags.extend(eb.dataset_tags);
                    ea.points.extend(eb.points);
                    Ok(ea)
                })(),
                _ => pipeline::read_embedding_from(&out),
            }
            .map_err(|e| e.in_stage("coverage"))?;
            let reports = pipeline::write_coverage(&e, &grid, &out).map_err(|e| e.in_stage("coverage"))?;
            for r in &reports {
                println!(
                    "{} vs {}: miscoverage {:.4} / {:.4}, NOR {:.4} / {:.4}",
                    r.a, r.b, r.miscoverage_ab, r.miscoverage_ba, r.nor_ab, r.nor_ba
                );
            }
            say(&out, pipeline::COVERAGE_FILE);
        }
        Command::Report(r) => {
            let base = match &r.replay {
                Some(path) => Some(Report::read(path).map_err(|e| e.in_stage("replay"))?.config),
                None => None,
            };
            let p = Pipeline::new(r.run.resolve(base)?)?;
            let report = p.run()?;
            for c in &report.coverage {
                println!("{} vs {}: max coverage gap {:.4}", c.a, c.b, c.max_value());
            }
            say(&p.config().out_dir, pipeline::REPORT_FILE);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let stage = e.stage().unwrap_or("setup").to_string();
            eprintln!("tsrep: {stage} stage failed: {}", root_message(&e));
            if let Error::MissingArtifact { hint, .. } = root(&e) {
                eprintln!("hint: {hint}");
            }
            ExitCode::FAILURE
        }
    }
}

fn root(e: &Error) -> &Error {
    match e {
        Error::Stage { source, .. } => root(source),
        other => other,
    }
}

fn root_message(e: &Error) -> String {
    match root(e) {
        Error::Pipeline { message, .. } => message.clone(),
        other => other.to_string(),
    }
}
