//! Grid-occupancy comparison of embedded datasets.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::embedding::Embedding2D;
use crate::error::{Error, Result};
use crate::io::write_atomic;

pub const DEFAULT_N_SIDE: usize = 30;
/// Relative margin added to each side of the bounding box.
pub const MARGIN: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub n_side: usize,
    pub x_lo: f64,
    pub x_hi: f64,
    pub y_lo: f64,
    pub y_hi: f64,
    /// Per tag, point count of every cell (index `cy * n_side + cx`).
    pub occupancy: BTreeMap<String, Vec<usize>>,
}

fn axis(lo: f64, hi: f64) -> (f64, f64) {
    let pad = (hi - lo) * MARGIN;
    (lo - pad, hi + pad)
}

fn cell(v: f64, lo: f64, hi: f64, n: usize) -> usize {
    let width = hi - lo;
    if width <= 0.0 {
        return 0;
    }
    (((v - lo) / width * n as f64).floor().max(0.0) as usize).min(n - 1)
}

impl Grid {
    /// Grid over the joint bounding box of every tagged set. An axis along
    /// which all points coincide maps every point to its first cell.
    pub fn build(sets: &[(&str, &[[f64; 2]])], n_side: usize) -> Result<Grid> {
        if n_side == 0 {
            return Err(Error::Parameter("grid needs at least one cell per side".into()));
        }
        if sets.is_empty() || sets.iter().any(|(_, p)| p.is_empty()) {
            return Err(Error::DegenerateGrid("every point set must be nonempty".into()));
        }
        let all = sets.iter().flat_map(|(_, p)| p.iter());
        if all.clone().flatten().any(|v| !v.is_finite()) {
            return Err(Error::DegenerateGrid("non-finite coordinate".into()));
        }
        let (mut x_lo, mut x_hi, mut y_lo, mut y_hi) =
            (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for p in all {
            x_lo = x_lo.min(p[0]);
            x_hi = x_hi.max(p[0]);
            y_lo = y_lo.min(p[1]);
            y_hi = y_hi.max(p[1]);
        }
        let (x_lo, x_hi) = axis(x_lo, x_hi);
        let (y_lo, y_hi) = axis(y_lo, y_hi);
        let mut occupancy = BTreeMap::new();
        for (tag, points) in sets {
            let counts = occupancy
                .entry(tag.to_string())
                .or_insert_with(|| vec![0usize; n_side * n_side]);
            for p in points.iter() {
                let cx = cell(p[0], x_lo, x_hi, n_side);
                let cy = cell(p[1], y_lo, y_hi, n_side);
                counts[cy * n_side + cx] += 1;
            }
        }
        Ok(Grid {
            n_side,
            x_lo,
            x_hi,
            y_lo,
            y_hi,
            occupancy,
        })
    }

    /// Grid for one pair of tags of an embedding.
    pub fn from_embedding(e: &Embedding2D, a: &str, b: &str, n_side: usize) -> Result<Grid> {
        let pa = e.points_of(a);
        let pb = e.points_of(b);
        Grid::build(&[(a, &pa), (b, &pb)], n_side)
    }

    fn counts(&self, tag: &str) -> Result<&[usize]> {
        self.occupancy
            .get(tag)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::Parameter(format!("grid has no dataset `{tag}`")))
    }

    pub fn cells(&self) -> usize {
        self.n_side * self.n_side
    }

    pub fn occupied(&self, tag: &str) -> Result<usize> {
        Ok(self.counts(tag)?.iter().filter(|c| **c > 0).count())
    }

    /// Fraction of all cells occupied by `b` but not by `a`.
    pub fn miscoverage(&self, a: &str, b: &str) -> Result<f64> {
        let (ca, cb) = (self.counts(a)?, self.counts(b)?);
        let missed = ca
            .iter()
            .zip(cb)
            .filter(|(na, nb)| **na == 0 && **nb > 0)
            .count();
        Ok(missed as f64 / self.cells() as f64)
    }

    /// Fraction of `a`'s points lying in cells that `b` leaves empty.
    pub fn nor(&self, a: &str, b: &str) -> Result<f64> {
        let (ca, cb) = (self.counts(a)?, self.counts(b)?);
        let total: usize = ca.iter().sum();
        let outside: usize = ca
            .iter()
            .zip(cb)
            .filter(|(_, nb)| **nb == 0)
            .map(|(na, _)| *na)
            .sum();
        Ok(outside as f64 / total as f64)
    }

    /// `cell_x, cell_y, count_<a>, count_<b>` for every cell.
    pub fn write_cells_csv(&self, a: &str, b: &str, path: &Path) -> Result<()> {
        let (ca, cb) = (self.counts(a)?, self.counts(b)?);
        write_atomic(path, |w| {
            let mut csv = csv::Writer::from_writer(w);
            csv.write_record(["cell_x", "cell_y", "count_A", "count_B"])?;
            for cy in 0..self.n_side {
                for cx in 0..self.n_side {
                    let i = cy * self.n_side + cx;
                    csv.write_record([
                        cx.to_string(),
                        cy.to_string(),
                        ca[i].to_string(),
                        cb[i].to_string(),
                    ])?;
                }
            }
            csv.flush().map_err(|e| Error::io(path, e))?;
            Ok(())
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub a: String,
    pub b: String,
    pub n_side: usize,
    pub miscoverage_ab: f64,
    pub miscoverage_ba: f64,
    pub nor_ab: f64,
    pub nor_ba: f64,
    pub occupied_a: usize,
    pub occupied_b: usize,
}

impl CoverageReport {
    pub fn from_grid(g: &Grid, a: &str, b: &str) -> Result<Self> {
        Ok(CoverageReport {
            a: a.to_string(),
            b: b.to_string(),
            n_side: g.n_side,
            miscoverage_ab: g.miscoverage(a, b)?,
            miscoverage_ba: g.miscoverage(b, a)?,
            nor_ab: g.nor(a, b)?,
            nor_ba: g.nor(b, a)?,
            occupied_a: g.occupied(a)?,
            occupied_b: g.occupied(b)?,
        })
    }

    pub fn max_value(&self) -> f64 {
        [self.miscoverage_ab, self.miscoverage_ba, self.nor_ab, self.nor_ba]
            .into_iter()
            .fold(0.0, f64::max)
    }
}

/// How grids are laid over more than two datasets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridScope {
    /// Each pair gets its own grid over the union of the two sets.
    #[default]
    Pairwise,
    /// One grid over every dataset.
    Shared,
}

/// Grid for every unordered pair of tags, in tag order. Under the shared
/// scope every pair refers to the same grid.
pub fn pairwise_grids(
    e: &Embedding2D,
    n_side: usize,
    scope: GridScope,
) -> Result<Vec<(String, String, Grid)>> {
    let tags = e.tags();
    if tags.len() < 2 {
        return Err(Error::Parameter("coverage needs at least two dataset tags".into()));
    }
    let shared = match scope {
        GridScope::Shared => {
            let pts: Vec<Vec<[f64; 2]>> = tags.iter().map(|t| e.points_of(t)).collect();
            let sets: Vec<(&str, &[[f64; 2]])> = tags
                .iter()
                .zip(&pts)
                .map(|(t, p)| (t.as_str(), p.as_slice()))
                .collect();
            Some(Grid::build(&sets, n_side)?)
        }
        GridScope::Pairwise => None,
    };
    let mut out = Vec::new();
    for i in 0..tags.len() {
        for j in i + 1..tags.len() {
            let (a, b) = (&tags[i], &tags[j]);
            let grid = match &shared {
                Some(g) => g.clone(),
                None => Grid::from_embedding(e, a, b, n_side)?,
            };
            out.push((a.clone(), b.clone(), grid));
        }
    }
    Ok(out)
}

/// Coverage report for every unordered pair of tags, in tag order.
pub fn pairwise_reports(e: &Embedding2D, n_side: usize, scope: GridScope) -> Result<Vec<CoverageReport>> {
    pairwise_grids(e, n_side, scope)?
        .iter()
        .map(|(a, b, g)| CoverageReport::from_grid(g, a, b))
        .collect()
}
