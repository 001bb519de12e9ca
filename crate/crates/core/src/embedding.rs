//! Two-dimensional projections of feature matrices: PCA and exact t-SNE.

use std::path::Path;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::io::write_atomic;
use crate::selection::zscore;
use crate::stats::{mean, pop_std};

pub const PERPLEXITY_TOL: f64 = 1e-5;
pub const PERPLEXITY_MAX_STEPS: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct Pca {
    /// `n x ncomp` scores, row-major.
    pub scores: Vec<Vec<f64>>,
    /// `ncomp` loading vectors over the input columns.
    pub loadings: Vec<Vec<f64>>,
    pub explained_variance_ratio: Vec<f64>,
}

/// Principal components of the column-centred rows. Each loading vector is
/// signed so its largest-magnitude entry is positive.
pub fn pca(rows: &[Vec<f64>], ncomp: usize) -> Result<Pca> {
    let n = rows.len();
    let p = rows.first().map_or(0, Vec::len);
    if ncomp == 0 || ncomp > n.min(p) {
        return Err(Error::Parameter(format!(
            "cannot take {ncomp} components of a {n} x {p} matrix"
        )));
    }
    let means: Vec<f64> = (0..p)
        .map(|c| mean(&rows.iter().map(|r| r[c]).collect::<Vec<_>>()))
        .collect();
    let x = DMatrix::from_fn(n, p, |r, c| rows[r][c] - means[c]);
    let svd = x.clone().svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|a, b| svd.singular_values[*b].total_cmp(&svd.singular_values[*a]));
    let sv: Vec<f64> = order.iter().map(|i| svd.singular_values[*i]).collect();
    let top = sv.first().copied().unwrap_or(0.0);
    let tol = top * n.max(p) as f64 * f64::EPSILON;
    let rank = sv.iter().filter(|s| **s > tol).count();
    if rank < ncomp {
        return Err(Error::RankDeficient {
            rank,
            requested: ncomp,
        });
    }
    let total: f64 = sv.iter().map(|s| s * s).sum();
    let loadings: Vec<Vec<f64>> = order[..ncomp]
        .iter()
        .map(|i| {
            let mut v: Vec<f64> = v_t.row(*i).iter().copied().collect();
            let lead = v
                .iter()
                .copied()
                .reduce(|a, b| if b.abs() > a.abs() { b } else { a })
                .unwrap_or(0.0);
            if lead < 0.0 {
                v.iter_mut().for_each(|e| *e = -*e);
            }
            v
        })
        .collect();
    let scores = (0..n)
        .map(|r| {
            loadings
                .iter()
                .map(|l| (0..p).map(|c| x[(r, c)] * l[c]).sum())
                .collect()
        })
        .collect();
    Ok(Pca {
        scores,
        loadings,
        explained_variance_ratio: sv[..ncomp].iter().map(|s| s * s / total).collect(),
    })
}

/// Conditional neighbour distribution of one point with the requested
/// perplexity, found by bisection on the precision `beta`.
#[derive(Debug, Clone, PartialEq)]
pub struct Conditional {
    pub probabilities: Vec<f64>,
    pub beta: f64,
    pub perplexity: f64,
}

/// `sq_dists` are squared distances to every *other* point.
pub fn perplexity_search(sq_dists: &[f64], target: f64, row: usize) -> Result<Conditional> {
    let m = sq_dists.len();
    if !(target >= 1.0) || target > m as f64 {
        return Err(Error::Parameter(format!(
            "perplexity {target} outside [1, {m}] for row {row}"
        )));
    }
    let d_min = sq_dists.iter().copied().fold(f64::INFINITY, f64::min);
    let shifted: Vec<f64> = sq_dists.iter().map(|d| d - d_min).collect();
    let evaluate = |beta: f64| {
        let w: Vec<f64> = shifted.iter().map(|d| (-beta * d).exp()).collect();
        let sum: f64 = w.iter().sum();
        let mean_d: f64 = w.iter().zip(&shifted).map(|(w, d)| w * d).sum::<f64>() / sum;
        let entropy = sum.ln() + beta * mean_d;
        (w, sum, entropy.exp())
    };
    let (mut lo, mut hi) = (0.0f64, f64::INFINITY);
    let mut beta = 1.0;
    for _ in 0..PERPLEXITY_MAX_STEPS {
        let (w, sum, perp) = evaluate(beta);
        if (perp - target).abs() <= PERPLEXITY_TOL {
            return Ok(Conditional {
                probabilities: w.iter().map(|v| v / sum).collect(),
                beta,
                perplexity: perp,
            });
        }
        if perp > target {
            lo = beta;
            beta = if hi.is_finite() { (beta + hi) / 2.0 } else { beta * 2.0 };
        } else {
            hi = beta;
            beta = (beta + lo) / 2.0;
        }
    }
    Err(Error::PerplexityNotConverged { row })
}

fn squared_distances(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    rows.par_iter()
        .map(|a| {
            rows.iter()
                .map(|b| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum())
                .collect()
        })
        .collect()
}

/// Symmetrised joint probabilities `P`, dense `n x n`, summing to 1.
pub fn joint_probabilities(rows: &[Vec<f64>], perplexity: f64) -> Result<Vec<Vec<f64>>> {
    let n = rows.len();
    let d = squared_distances(rows);
    let cond: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let others: Vec<f64> = (0..n).filter(|j| *j != i).map(|j| d[i][j]).collect();
            let c = perplexity_search(&others, perplexity, i)?;
            let mut row = c.probabilities;
            row.insert(i, 0.0);
            Ok(row)
        })
        .collect::<Result<_>>()?;
    let mut p: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| (cond[i][j] + cond[j][i]) / (2.0 * n as f64)).collect())
        .collect();
    let total: f64 = p.iter().map(|r| r.iter().sum::<f64>()).sum();
    for r in p.iter_mut() {
        for v in r.iter_mut() {
            *v /= total;
        }
    }
    Ok(p)
}

/// Student-t (one degree of freedom) similarities: numerators and their sum.
fn student_kernel(y: &[[f64; 2]]) -> (Vec<Vec<f64>>, f64) {
    let num: Vec<Vec<f64>> = y
        .par_iter()
        .enumerate()
        .map(|(i, a)| {
            y.iter()
                .enumerate()
                .map(|(j, b)| {
                    if i == j {
                        0.0
                    } else {
                        let (dx, dy) = (a[0] - b[0], a[1] - b[1]);
                        1.0 / (1.0 + dx * dx + dy * dy)
                    }
                })
                .collect()
        })
        .collect();
    let z = num.iter().map(|r| r.iter().sum::<f64>()).sum();
    (num, z)
}

/// Low-dimensional joint distribution `Q` of an embedding.
pub fn student_q(y: &[[f64; 2]]) -> Vec<Vec<f64>> {
    let (num, z) = student_kernel(y);
    num.into_iter()
        .map(|r| r.into_iter().map(|v| v / z).collect())
        .collect()
}

pub fn kl_divergence(p: &[Vec<f64>], y: &[[f64; 2]]) -> f64 {
    let (num, z) = student_kernel(y);
    p.iter()
        .zip(&num)
        .map(|(pr, nr)| {
            pr.iter()
                .zip(nr)
                .filter(|(pv, _)| **pv > 0.0)
                .map(|(pv, nv)| pv * (pv / (nv / z).max(f64::MIN_POSITIVE)).ln())
                .sum::<f64>()
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TsneConfig {
    pub perplexity: f64,
    pub iterations: usize,
    pub early_exaggeration: f64,
    pub exaggeration_iterations: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub final_momentum: f64,
    pub momentum_switch: usize,
    /// Standard deviation of the first initial coordinate.
    pub init_scale: f64,
    pub min_gain: f64,
    pub kl_every: usize,
    /// Only used when PCA cannot supply two components.
    pub seed: u64,
}

impl Default for TsneConfig {
    fn default() -> Self {
        TsneConfig {
            perplexity: 30.0,
            iterations: 1000,
            early_exaggeration: 12.0,
            exaggeration_iterations: 250,
            learning_rate: 200.0,
            momentum: 0.5,
            final_momentum: 0.8,
            momentum_switch: 250,
            init_scale: 1e-4,
            min_gain: 0.01,
            kl_every: 50,
            seed: 0,
        }
    }
}

impl TsneConfig {
    pub fn validate(&self, n: usize) -> Result<()> {
        if n < 10 {
            return Err(Error::Parameter(format!("t-SNE needs at least 10 rows, got {n}")));
        }
        if !(self.perplexity >= 1.0) || self.perplexity >= (n - 1) as f64 / 3.0 {
            return Err(Error::Parameter(format!(
                "perplexity {} must lie in [1, {:.3}) for {n} rows",
                self.perplexity,
                (n - 1) as f64 / 3.0
            )));
        }
        if self.iterations < 250 {
            return Err(Error::Parameter("t-SNE needs at least 250 iterations".into()));
        }
        if !(self.learning_rate > 0.0 && self.init_scale > 0.0 && self.kl_every > 0) {
            return Err(Error::Parameter(
                "learning rate, init scale and KL interval must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbeddingMethod {
    Pca,
    #[default]
    Tsne,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding2D {
    pub series_ids: Vec<String>,
    pub dataset_tags: Vec<String>,
    pub points: Vec<[f64; 2]>,
    pub method: EmbeddingMethod,
    /// `(iteration, KL(P || Q))` samples.
    pub kl_trace: Option<Vec<(usize, f64)>>,
}

fn initial_layout(rows: &[Vec<f64>], cfg: &TsneConfig) -> Vec<[f64; 2]> {
    let from_pca = pca(rows, 2).ok().and_then(|p| {
        let first: Vec<f64> = p.scores.iter().map(|s| s[0]).collect();
        let sd = pop_std(&first);
        (sd > 0.0).then(|| {
            p.scores
                .iter()
                .map(|s| [s[0] / sd * cfg.init_scale, s[1] / sd * cfg.init_scale])
                .collect()
        })
    });
    from_pca.unwrap_or_else(|| {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        (0..rows.len())
            .map(|_| {
                let a: f64 = StandardNormal.sample(&mut rng);
                let b: f64 = StandardNormal.sample(&mut rng);
                [a * cfg.init_scale, b * cfg.init_scale]
            })
            .collect()
    })
}

/// Layout and KL trace of exact t-SNE on complete rows.
pub fn tsne_points(rows: &[Vec<f64>], cfg: &TsneConfig) -> Result<(Vec<[f64; 2]>, Vec<(usize, f64)>)> {
    let n = rows.len();
    cfg.validate(n)?;
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Parameter("t-SNE input must be finite".into()));
    }
    let p = joint_probabilities(rows, cfg.perplexity)?;
    let mut y = initial_layout(rows, cfg);
    let mut update = vec![[0.0f64; 2]; n];
    let mut gains = vec![[1.0f64; 2]; n];
    let mut trace = Vec::new();

    for iter in 0..cfg.iterations {
        if iter % cfg.kl_every == 0 {
            trace.push((iter, kl_divergence(&p, &y)));
        }
        let exaggeration = if iter < cfg.exaggeration_iterations {
            cfg.early_exaggeration
        } else {
            1.0
        };
        let momentum = if iter < cfg.momentum_switch {
            cfg.momentum
        } else {
            cfg.final_momentum
        };
        let (num, z) = student_kernel(&y);
        let grad: Vec<[f64; 2]> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut g = [0.0; 2];
                for j in 0..n {
                    if i == j {
                        continue;
                    }
                    let w = (exaggeration * p[i][j] - num[i][j] / z) * num[i][j];
                    g[0] += w * (y[i][0] - y[j][0]);
                    g[1] += w * (y[i][1] - y[j][1]);
                }
                [4.0 * g[0], 4.0 * g[1]]
            })
            .collect();
        if grad.iter().flatten().any(|g| !g.is_finite()) {
            return Err(Error::Divergence { iteration: iter });
        }
        for i in 0..n {
            for d in 0..2 {
                let reversing = update[i][d] * grad[i][d] < 0.0;
                gains[i][d] = if reversing {
                    gains[i][d] + 0.2
                } else {
                    gains[i][d] * 0.8
                }
                .max(cfg.min_gain);
                update[i][d] = momentum * update[i][d] - cfg.learning_rate * gains[i][d] * grad[i][d];
                y[i][d] += update[i][d];
            }
        }
        for d in 0..2 {
            let c = y.iter().map(|v| v[d]).sum::<f64>() / n as f64;
            y.iter_mut().for_each(|v| v[d] -= c);
        }
    }
    trace.push((cfg.iterations, kl_divergence(&p, &y)));
    if y.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Divergence {
            iteration: cfg.iterations,
        });
    }
    Ok((y, trace))
}

pub fn tsne(m: &FeatureMatrix, tags: &[String], cfg: &TsneConfig) -> Result<Embedding2D> {
    let rows = m
        .dense()
        .ok_or_else(|| Error::Parameter("t-SNE input has missing cells".into()))?;
    if tags.len() != rows.len() {
        return Err(Error::Parameter("one dataset tag per row is required".into()));
    }
    let (points, trace) = tsne_points(&rows, cfg)?;
    Ok(Embedding2D {
        series_ids: m.series_ids.clone(),
        dataset_tags: tags.to_vec(),
        points,
        method: EmbeddingMethod::Tsne,
        kl_trace: Some(trace),
    })
}

/// Stacks the matrices of several datasets, keeps the columns complete and
/// non-constant across all of them, standardises jointly and returns the
/// matrix with a dataset tag per row.
pub fn joint_matrix(parts: &[(String, &FeatureMatrix)]) -> Result<(FeatureMatrix, Vec<String>)> {
    let matrices: Vec<&FeatureMatrix> = parts.iter().map(|(_, m)| *m).collect();
    let stacked = FeatureMatrix::vstack(&matrices)?;
    let tags: Vec<String> = parts
        .iter()
        .flat_map(|(t, m)| std::iter::repeat_n(t.clone(), m.nrows()))
        .collect();
    let (kept, _) = crate::selection::prefilter(&stacked)
        .map_err(|_| Error::pipeline("embed", "no complete, varying feature column across datasets"))?;
    Ok((zscore(&kept)?, tags))
}

pub fn pca_embedding(m: &FeatureMatrix, tags: &[String]) -> Result<Embedding2D> {
    let rows = m
        .dense()
        .ok_or_else(|| Error::Parameter("PCA input has missing cells".into()))?;
    let p = pca(&rows, 2)?;
    Ok(Embedding2D {
        series_ids: m.series_ids.clone(),
        dataset_tags: tags.to_vec(),
        points: p.scores.iter().map(|s| [s[0], s[1]]).collect(),
        method: EmbeddingMethod::Pca,
        kl_trace: None,
    })
}

impl Embedding2D {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Distinct tags in first-appearance order.
    pub fn tags(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for t in &self.dataset_tags {
            if !out.contains(t) {
                out.push(t.clone());
            }
        }
        out
    }

    pub fn points_of(&self, tag: &str) -> Vec<[f64; 2]> {
        self.points
            .iter()
            .zip(&self.dataset_tags)
            .filter(|(_, t)| *t == tag)
            .map(|(p, _)| *p)
            .collect()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_atomic(path, |w| {
            let mut csv = csv::Writer::from_writer(w);
            csv.write_record(["series_id", "dataset_tag", "dim1", "dim2"])?;
            for ((id, tag), p) in self.series_ids.iter().zip(&self.dataset_tags).zip(&self.points) {
                csv.write_record([id.clone(), tag.clone(), p[0].to_string(), p[1].to_string()])?;
            }
            csv.flush().map_err(|e| Error::io(path, e))?;
            Ok(())
        })
    }

    pub fn read_csv(path: &Path, method: EmbeddingMethod) -> Result<Embedding2D> {
        let mut rdr = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::Schema {
                path: path.to_path_buf(),
                message: format!("{other:?}"),
            },
        })?;
        let headers = rdr.headers()?.clone();
        let expected = ["series_id", "dataset_tag", "dim1", "dim2"];
        if headers.iter().collect::<Vec<_>>() != expected {
            return Err(Error::Schema {
                path: path.to_path_buf(),
                message: format!("expected columns {}", expected.join(",")),
            });
        }
        let mut e = Embedding2D {
            series_ids: Vec::new(),
            dataset_tags: Vec::new(),
            points: Vec::new(),
            method,
            kl_trace: None,
        };
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let coord = |k: usize| {
                rec[k].parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| Error::Data {
                    path: path.to_path_buf(),
                    row: i + 2,
                    message: format!("`{}` is not a finite coordinate", &rec[k]),
                })
            };
            e.points.push([coord(2)?, coord(3)?]);
            e.series_ids.push(rec[0].to_string());
            e.dataset_tags.push(rec[1].to_string());
        }
        Ok(e)
    }
}
