//! Three-stage feature selection: statistical pre-filtering, RReliefF
//! quality vectors, and redundancy clustering of those vectors.

use std::collections::{BTreeMap, HashMap};

use rand::seq::index::sample as sample_indices;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::benchmarks::TargetBank;
use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::stats::{chi2_sf, mean, mid_ranks, min_max, pearson, sample_var};

/// Smallest p-value fed to the logarithm in Fisher's method.
pub const P_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dropped {
    pub feature: String,
    pub reason: String,
}

/// Drops columns with any missing cell and columns that are constant.
pub fn prefilter(m: &FeatureMatrix) -> Result<(FeatureMatrix, Vec<Dropped>)> {
    let mut keep = Vec::new();
    let mut dropped = Vec::new();
    for c in 0..m.ncols() {
        let col = m.column(c);
        let key = m.feature_ids[c].key();
        let Some(values) = col.into_iter().collect::<Option<Vec<f64>>>() else {
            dropped.push(Dropped {
                feature: key,
                reason: "missing values".into(),
            });
            continue;
        };
        if values.iter().all(|v| *v == values[0]) {
            dropped.push(Dropped {
                feature: key,
                reason: "constant".into(),
            });
            continue;
        }
        keep.push(c);
    }
    if keep.is_empty() {
        return Err(Error::pipeline("prefilter", "no feature column survives"));
    }
    Ok((m.select_columns(&keep), dropped))
}

/// Standardises every column to mean 0 and sample standard deviation 1.
pub fn zscore(m: &FeatureMatrix) -> Result<FeatureMatrix> {
    let dense = m
        .dense()
        .ok_or_else(|| Error::Parameter("z-scoring needs a matrix without missing cells".into()))?;
    let mut out = dense.clone();
    for c in 0..m.ncols() {
        let col: Vec<f64> = dense.iter().map(|r| r[c]).collect();
        let mu = mean(&col);
        let sd = sample_var(&col).sqrt();
        if !(sd > 0.0) || !sd.is_finite() {
            return Err(Error::ZeroVariance {
                column: m.feature_ids[c].key(),
            });
        }
        for (r, v) in out.iter_mut().zip(&col) {
            r[c] = (v - mu) / sd;
        }
    }
    FeatureMatrix::from_rows(m.series_ids.clone(), m.feature_ids.clone(), &out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KruskalWallis {
    pub h: f64,
    pub p: f64,
}

/// Kruskal-Wallis H test with mid-ranks and tie correction.
pub fn kruskal_wallis<L: Ord>(values: &[f64], labels: &[L]) -> Result<KruskalWallis> {
    if values.len() != labels.len() {
        return Err(Error::Parameter("values and labels differ in length".into()));
    }
    let ranks = mid_ranks(values);
    let mut groups: BTreeMap<&L, (f64, usize)> = BTreeMap::new();
    for (r, l) in ranks.iter().zip(labels) {
        let g = groups.entry(l).or_insert((0.0, 0));
        g.0 += r;
        g.1 += 1;
    }
    if groups.len() < 2 {
        return Err(Error::Parameter("Kruskal-Wallis needs at least two groups".into()));
    }
    let n = values.len() as f64;
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut ties = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        ties += t * t * t - t;
        i = j + 1;
    }
    let correction = 1.0 - ties / (n * n * n - n);
    if correction <= 0.0 {
        return Ok(KruskalWallis { h: 0.0, p: 1.0 });
    }
    let sum: f64 = groups.values().map(|(s, c)| s * s / *c as f64).sum();
    let h = (12.0 / (n * (n + 1.0)) * sum - 3.0 * (n + 1.0)) / correction;
    let h = h.max(0.0);
    Ok(KruskalWallis {
        h,
        p: chi2_sf(h, (groups.len() - 1) as f64),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FisherCombined {
    pub statistic: f64,
    pub p: f64,
}

/// Fisher's method: `X = -2 sum ln p` against chi-squared with `2k` dof.
pub fn fisher_combine(pvals: &[f64]) -> Result<FisherCombined> {
    if pvals.is_empty() {
        return Err(Error::Parameter("Fisher combination of zero p-values".into()));
    }
    if let Some(p) = pvals.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::Parameter(format!("p-value {p} outside [0, 1]")));
    }
    let statistic = -2.0 * pvals.iter().map(|p| p.max(P_FLOOR).ln()).sum::<f64>();
    Ok(FisherCombined {
        statistic,
        p: chi2_sf(statistic, 2.0 * pvals.len() as f64),
    })
}

/// Holm's step-down procedure; `true` marks hypotheses rejected at `alpha`
/// (features kept).
pub fn holm_bonferroni(pvals: &[f64], alpha: f64) -> Vec<bool> {
    let n = pvals.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|a, b| pvals[*a].total_cmp(&pvals[*b]));
    let mut keep = vec![false; n];
    for (j, &i) in order.iter().enumerate() {
        if pvals[i] > alpha / (n - j) as f64 {
            break;
        }
        keep[i] = true;
    }
    keep
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelieffConfig {
    pub k_neighbors: usize,
    /// Width of the exponential rank weighting.
    pub sigma: f64,
    /// Number of sampled instances; `None` uses every row in order.
    pub sample: Option<usize>,
    pub seed: u64,
}

impl Default for RelieffConfig {
    fn default() -> Self {
        RelieffConfig {
            k_neighbors: 10,
            sigma: 20.0,
            sample: None,
            seed: 0,
        }
    }
}

/// Nearest-neighbour structure of a set of rows, reusable across targets.
pub struct Neighbourhood {
    /// Min-max normalised feature values, row-major.
    norm: Vec<Vec<f64>>,
    /// `(instance, [(neighbour, weight)])` for every sampled instance.
    neighbours: Vec<(usize, Vec<(usize, f64)>)>,
}

impl Neighbourhood {
    pub fn new(rows: &[Vec<f64>], cfg: &RelieffConfig) -> Result<Self> {
        let m = rows.len();
        let k = cfg.k_neighbors;
        if k == 0 {
            return Err(Error::Parameter("k_neighbors must be positive".into()));
        }
        if m < k + 1 {
            return Err(Error::Parameter(format!(
                "RReliefF with k = {k} needs at least {} rows, got {m}",
                k + 1
            )));
        }
        let p = rows[0].len();
        if rows.iter().any(|r| r.len() != p || r.iter().any(|v| !v.is_finite())) {
            return Err(Error::Parameter("RReliefF needs finite rows of equal width".into()));
        }
        let mut norm = rows.to_vec();
        for c in 0..p {
            let col: Vec<f64> = rows.iter().map(|r| r[c]).collect();
            let (lo, hi) = min_max(&col);
            let span = hi - lo;
            for r in norm.iter_mut() {
                r[c] = if span > 0.0 { (r[c] - lo) / span } else { 0.0 };
            }
        }

        let rank_w: Vec<f64> = (1..=k)
            .map(|rank| (-(rank as f64 / cfg.sigma).powi(2)).exp())
            .collect();
        let total: f64 = rank_w.iter().sum();
        let rank_w: Vec<f64> = rank_w.iter().map(|w| w / total).collect();

        let instances: Vec<usize> = match cfg.sample {
            Some(s) if s < m => {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                let mut idx = sample_indices(&mut rng, m, s).into_vec();
                idx.sort_unstable();
                idx
            }
            _ => (0..m).collect(),
        };
        let neighbours = instances
            .par_iter()
            .map(|&i| {
                let mut d: Vec<(f64, usize)> = (0..m)
                    .filter(|j| *j != i)
                    .map(|j| (manhattan(&norm[i], &norm[j]), j))
                    .collect();
                d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                let nn = d[..k]
                    .iter()
                    .zip(&rank_w)
                    .map(|((_, j), w)| (*j, *w))
                    .collect();
                (i, nn)
            })
            .collect();
        Ok(Neighbourhood { norm, neighbours })
    }

    /// RReliefF weight of every feature column against `target`.
    pub fn weights(&self, target: &[f64]) -> Result<Vec<f64>> {
        if target.len() != self.norm.len() || target.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parameter("target must be finite, one value per row".into()));
        }
        let (lo, hi) = min_max(target);
        let span = hi - lo;
        if !(span > 0.0) {
            return Err(Error::ConstantTarget);
        }
        let p = self.norm[0].len();
        let mut n_dc = 0.0;
        let mut n_da = vec![0.0; p];
        let mut n_dcda = vec![0.0; p];
        for (i, nn) in &self.neighbours {
            for (j, w) in nn {
                let dc = (target[*i] - target[*j]).abs() / span;
                n_dc += dc * w;
                for f in 0..p {
                    let da = (self.norm[*i][f] - self.norm[*j][f]).abs();
                    n_da[f] += da * w;
                    n_dcda[f] += dc * da * w;
                }
            }
        }
        let m = self.neighbours.len() as f64;
        if n_dc <= 0.0 {
            return Err(Error::ConstantTarget);
        }
        if m - n_dc <= 0.0 {
            return Err(Error::Parameter(
                "every neighbour pair differs maximally in the target".into(),
            ));
        }
        Ok((0..p)
            .map(|f| n_dcda[f] / n_dc - (n_da[f] - n_dcda[f]) / (m - n_dc))
            .collect())
    }
}

fn manhattan(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// RReliefF weights of each column of `rows` for a single target.
pub fn rrelieff(rows: &[Vec<f64>], target: &[f64], cfg: &RelieffConfig) -> Result<Vec<f64>> {
    Neighbourhood::new(rows, cfg)?.weights(target)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityVector {
    pub feature: String,
    pub weights: Vec<f64>,
    pub mean_quality: f64,
}

/// One RReliefF weight per (feature, target). Rows whose series is absent
/// from the bank, or whose target is missing, are left out for that target.
pub fn quality_matrix(
    m: &FeatureMatrix,
    targets: &TargetBank,
    cfg: &RelieffConfig,
) -> Result<Vec<QualityVector>> {
    let dense = m
        .dense()
        .ok_or_else(|| Error::Parameter("quality scoring needs a complete matrix".into()))?;
    let bank_row: HashMap<&str, usize> = targets
        .series_ids
        .iter()
        .enumerate()
        .map(|(i, s)| (s.as_str(), i))
        .collect();
    let mut cache: HashMap<Vec<usize>, Neighbourhood> = HashMap::new();
    let mut per_target = Vec::with_capacity(targets.methods.len());
    for t in 0..targets.methods.len() {
        let (rows, ys): (Vec<usize>, Vec<f64>) = m
            .series_ids
            .iter()
            .enumerate()
            .filter_map(|(r, id)| {
                let b = *bank_row.get(id.as_str())?;
                let y = targets.values[b][t];
                y.is_finite().then_some((r, y))
            })
            .unzip();
        if !cache.contains_key(&rows) {
            let sub: Vec<Vec<f64>> = rows.iter().map(|r| dense[*r].clone()).collect();
            cache.insert(rows.clone(), Neighbourhood::new(&sub, cfg)?);
        }
        per_target.push(cache[&rows].weights(&ys).map_err(|e| match e {
            Error::ConstantTarget => Error::pipeline(
                "quality",
                format!("target `{}` is constant", targets.methods[t]),
            ),
            other => other,
        })?);
    }
    Ok((0..m.ncols())
        .map(|f| {
            let weights: Vec<f64> = per_target.iter().map(|w| w[f]).collect();
            QualityVector {
                feature: m.feature_ids[f].key(),
                mean_quality: mean(&weights),
                weights,
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureCluster {
    pub members: Vec<String>,
    pub representative: String,
}

/// Vectors to cluster, keyed by feature, with the score used to pick each
/// cluster's representative.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterItem {
    pub feature: String,
    pub vector: Vec<f64>,
    pub score: f64,
}

impl From<&QualityVector> for ClusterItem {
    fn from(q: &QualityVector) -> Self {
        ClusterItem {
            feature: q.feature.clone(),
            vector: q.weights.clone(),
            score: q.mean_quality,
        }
    }
}

/// Complete-linkage clustering under `d = 1 - pearson`. Clusters merge while
/// their complete-link distance is strictly below `threshold`, so members of
/// one cluster are pairwise correlated above `1 - threshold`. Vectors without
/// variance stay singletons. The result does not depend on input order.
pub fn redundancy_cluster(items: &[ClusterItem], threshold: f64) -> Vec<FeatureCluster> {
    let mut items: Vec<&ClusterItem> = items.iter().collect();
    items.sort_by(|a, b| a.feature.cmp(&b.feature));
    let n = items.len();
    let mut dist = vec![vec![f64::INFINITY; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            if let Some(r) = pearson(&items[i].vector, &items[j].vector) {
                dist[i][j] = 1.0 - r;
                dist[j][i] = 1.0 - r;
            }
        }
    }
    let mut clusters: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    loop {
        let mut best: Option<(f64, usize, usize)> = None;
        for a in 0..clusters.len() {
            for b in a + 1..clusters.len() {
                let d = clusters[a]
                    .iter()
                    .flat_map(|i| clusters[b].iter().map(move |j| (*i, *j)))
                    .map(|(i, j)| dist[i][j])
                    .fold(0.0, f64::max);
                if d < threshold && best.is_none_or(|(bd, _, _)| d < bd) {
                    best = Some((d, a, b));
                }
            }
        }
        let Some((_, a, b)) = best else { break };
        let merged = clusters.remove(b);
        clusters[a].extend(merged);
        clusters[a].sort_unstable();
    }
    let mut out: Vec<FeatureCluster> = clusters
        .into_iter()
        .map(|members| {
            let rep = members
                .iter()
                .copied()
                .reduce(|best, i| {
                    // members are in key order, so ties keep the smaller key
                    if items[i].score > items[best].score {
                        i
                    } else {
                        best
                    }
                })
                .expect("clusters are nonempty");
            FeatureCluster {
                representative: items[rep].feature.clone(),
                members: members.iter().map(|i| items[*i].feature.clone()).collect(),
            }
        })
        .collect();
    out.sort_by(|a, b| a.members[0].cmp(&b.members[0]));
    out
}

/// What the redundancy stage correlates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClusterInput {
    /// Per-feature RReliefF weight vectors.
    #[default]
    QualityVectors,
    /// Standardised feature values across series.
    FeatureValues,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelectionConfig {
    pub alpha: f64,
    pub threshold: f64,
    pub relieff: RelieffConfig,
    pub cluster_input: ClusterInput,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            alpha: 0.05,
            threshold: 0.2,
            relieff: RelieffConfig::default(),
            cluster_input: ClusterInput::default(),
        }
    }
}

impl SelectionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Parameter(format!("alpha {} outside (0, 1)", self.alpha)));
        }
        if !(self.threshold > 0.0 && self.threshold <= 2.0) {
            return Err(Error::Parameter(format!(
                "cluster threshold {} outside (0, 2]",
                self.threshold
            )));
        }
        if self.relieff.k_neighbors == 0 || !(self.relieff.sigma > 0.0) {
            return Err(Error::Parameter("RReliefF needs k >= 1 and sigma > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PValueRecord {
    pub feature: String,
    pub task_pvalues: Vec<f64>,
    pub combined_p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageCount {
    pub stage: String,
    pub input: usize,
    pub output: usize,
    pub dropped: Vec<Dropped>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionAudit {
    pub tasks: Vec<String>,
    pub stages: Vec<StageCount>,
    pub pvalues: Vec<PValueRecord>,
    pub quality: Vec<QualityVector>,
    pub clusters: Vec<FeatureCluster>,
    pub selected: Vec<String>,
}

/// Full cascade. The matrix rows must all belong to `ds`, whose tasks supply
/// the class labels for the statistical filter.
pub fn run_cascade(
    m: &FeatureMatrix,
    ds: &LabeledDataset,
    targets: &TargetBank,
    cfg: &SelectionConfig,
) -> Result<SelectionAudit> {
    cfg.validate()?;
    if ds.tasks.is_empty() {
        return Err(Error::pipeline("statistical", "dataset has no classification task"));
    }
    let mut stages = Vec::new();

    let (filtered, dropped) = prefilter(m)?;
    stages.push(StageCount {
        stage: "prefilter".into(),
        input: m.ncols(),
        output: filtered.ncols(),
        dropped,
    });
    let z = zscore(&filtered)?;
    let dense = z.dense().expect("z-scored matrix is complete");

    let tasks: Vec<String> = ds.tasks.keys().cloned().collect();
    let task_labels: Vec<Vec<&str>> = tasks
        .iter()
        .map(|t| {
            let by_id = ds.labels_by_id(t).expect("task exists");
            z.series_ids
                .iter()
                .map(|id| {
                    by_id.get(id.as_str()).copied().ok_or_else(|| {
                        Error::pipeline("statistical", format!("series {id} is not in the dataset"))
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let pvalues = (0..z.ncols())
        .into_par_iter()
        .map(|c| {
            let col: Vec<f64> = dense.iter().map(|r| r[c]).collect();
            let task_pvalues = task_labels
                .iter()
                .map(|labels| kruskal_wallis(&col, labels).map(|kw| kw.p))
                .collect::<Result<Vec<f64>>>()?;
            Ok(PValueRecord {
                feature: z.feature_ids[c].key(),
                combined_p: fisher_combine(&task_pvalues)?.p,
                task_pvalues,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let combined: Vec<f64> = pvalues.iter().map(|r| r.combined_p).collect();
    let keep = holm_bonferroni(&combined, cfg.alpha);
    let kept_cols: Vec<usize> = (0..z.ncols()).filter(|c| keep[*c]).collect();
    stages.push(StageCount {
        stage: "statistical".into(),
        input: z.ncols(),
        output: kept_cols.len(),
        dropped: pvalues
            .iter()
            .zip(&keep)
            .filter(|(_, k)| !**k)
            .map(|(r, _)| Dropped {
                feature: r.feature.clone(),
                reason: format!("combined p {:e} not significant", r.combined_p),
            })
            .collect(),
    });
    if kept_cols.is_empty() {
        return Err(Error::pipeline("statistical", "no feature passes the Holm correction"));
    }
    let survivors = z.select_columns(&kept_cols);

    let quality = quality_matrix(&survivors, targets, &cfg.relieff)?;
    let items: Vec<ClusterItem> = match cfg.cluster_input {
        ClusterInput::QualityVectors => quality.iter().map(ClusterItem::from).collect(),
        ClusterInput::FeatureValues => quality
            .iter()
            .enumerate()
            .map(|(c, q)| ClusterItem {
                feature: q.feature.clone(),
                vector: survivors.column(c).into_iter().map(|v| v.expect("complete")).collect(),
                score: q.mean_quality,
            })
            .collect(),
    };
    let clusters = redundancy_cluster(&items, cfg.threshold);
    let mut selected: Vec<String> = clusters.iter().map(|c| c.representative.clone()).collect();
    let order: HashMap<&str, usize> = quality
        .iter()
        .enumerate()
        .map(|(i, q)| (q.feature.as_str(), i))
        .collect();
    selected.sort_by_key(|f| order[f.as_str()]);
    stages.push(StageCount {
        stage: "redundancy".into(),
        input: survivors.ncols(),
        output: selected.len(),
        dropped: clusters
            .iter()
            .flat_map(|c| {
                c.members
                    .iter()
                    .filter(|f| **f != c.representative)
                    .map(|f| Dropped {
                        feature: f.clone(),
                        reason: format!("redundant with {}", c.representative),
                    })
            })
            .collect(),
    });

    Ok(SelectionAudit {
        tasks,
        stages,
        pvalues,
        quality,
        clusters,
        selected,
    })
}
