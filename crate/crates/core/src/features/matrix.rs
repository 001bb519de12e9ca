use std::collections::HashMap;
use std::path::Path;

use super::FeatureId;
use crate::error::{Error, Result};
use crate::io::write_atomic;

/// Row-major feature matrix with optional (missing) cells.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub series_ids: Vec<String>,
    pub feature_ids: Vec<FeatureId>,
    cells: Vec<Option<f64>>,
}

impl FeatureMatrix {
    pub fn new(
        series_ids: Vec<String>,
        feature_ids: Vec<FeatureId>,
        cells: Vec<Option<f64>>,
    ) -> Result<Self> {
        if cells.len() != series_ids.len() * feature_ids.len() {
            return Err(Error::Parameter(format!(
                "matrix has {} cells, expected {} x {}",
                cells.len(),
                series_ids.len(),
                feature_ids.len()
            )));
        }
        Ok(FeatureMatrix {
            series_ids,
            feature_ids,
            cells,
        })
    }

    /// Dense constructor; non-finite entries become missing.
    pub fn from_rows(
        series_ids: Vec<String>,
        feature_ids: Vec<FeatureId>,
        rows: &[Vec<f64>],
    ) -> Result<Self> {
        let cells = rows
            .iter()
            .flat_map(|r| r.iter().map(|v| v.is_finite().then_some(*v)))
            .collect();
        Self::new(series_ids, feature_ids, cells)
    }

    pub fn nrows(&self) -> usize {
        self.series_ids.len()
    }

    pub fn ncols(&self) -> usize {
        self.feature_ids.len()
    }

    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        self.cells[row * self.ncols() + col]
    }

    pub fn row(&self, row: usize) -> &[Option<f64>] {
        let n = self.ncols();
        &self.cells[row * n..(row + 1) * n]
    }

    pub fn column(&self, col: usize) -> Vec<Option<f64>> {
        (0..self.nrows()).map(|r| self.get(r, col)).collect()
    }

    pub fn column_keys(&self) -> Vec<String> {
        self.feature_ids.iter().map(|f| f.key()).collect()
    }

    pub fn column_index(&self, key: &str) -> Option<usize> {
        self.feature_ids.iter().position(|f| f.key() == key)
    }

    /// Dense rows; `None` if any cell is missing.
    pub fn dense(&self) -> Option<Vec<Vec<f64>>> {
        (0..self.nrows())
            .map(|r| self.row(r).iter().copied().collect::<Option<Vec<f64>>>())
            .collect()
    }

    pub fn select_columns(&self, cols: &[usize]) -> FeatureMatrix {
        let cells = (0..self.nrows())
            .flat_map(|r| cols.iter().map(move |c| (r, *c)))
            .map(|(r, c)| self.get(r, c))
            .collect();
        FeatureMatrix {
            series_ids: self.series_ids.clone(),
            feature_ids: cols.iter().map(|c| self.feature_ids[*c]).collect(),
            cells,
        }
    }

    /// Columns by key, in the given order.
    pub fn select_keys(&self, keys: &[String]) -> Result<FeatureMatrix> {
        let cols = keys
            .iter()
            .map(|k| {
                self.column_index(k)
                    .ok_or_else(|| Error::Parameter(format!("feature matrix lacks column {k}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(self.select_columns(&cols))
    }

    pub fn select_rows(&self, rows: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            series_ids: rows.iter().map(|r| self.series_ids[*r].clone()).collect(),
            feature_ids: self.feature_ids.clone(),
            cells: rows.iter().flat_map(|r| self.row(*r).iter().copied()).collect(),
        }
    }

    /// Stacks matrices with identical columns.
    pub fn vstack(parts: &[&FeatureMatrix]) -> Result<FeatureMatrix> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Parameter("nothing to stack".into()))?;
        let mut out = (*first).clone();
        for p in &parts[1..] {
            if p.feature_ids != first.feature_ids {
                return Err(Error::Parameter("stacked matrices differ in columns".into()));
            }
            out.series_ids.extend(p.series_ids.iter().cloned());
            out.cells.extend(p.cells.iter().copied());
        }
        Ok(out)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_atomic(path, |w| {
            let mut csv = csv::Writer::from_writer(w);
            let mut header = vec!["series_id".to_string()];
            header.extend(self.column_keys());
            csv.write_record(&header)?;
            for r in 0..self.nrows() {
                let mut rec = vec![self.series_ids[r].clone()];
                rec.extend(
                    self.row(r)
                        .iter()
                        .map(|c| c.map(|v| v.to_string()).unwrap_or_default()),
                );
                csv.write_record(&rec)?;
            }
            csv.flush().map_err(|e| Error::io(path, e))?;
            Ok(())
        })
    }

    pub fn read_csv(path: &Path) -> Result<FeatureMatrix> {
        let mut rdr = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::Schema {
                path: path.to_path_buf(),
                message: format!("{other:?}"),
            },
        })?;
        let headers = rdr.headers()?.clone();
        if headers.get(0) != Some("series_id") {
            return Err(Error::Schema {
                path: path.to_path_buf(),
                message: "first column must be `series_id`".into(),
            });
        }
        let feature_ids = headers
            .iter()
            .skip(1)
            .map(|h| {
                h.parse::<FeatureId>().map_err(|e| Error::Schema {
                    path: path.to_path_buf(),
                    message: e.to_string(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut series_ids = Vec::new();
        let mut cells = Vec::new();
        let mut seen = HashMap::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let row = i + 2;
            let data_err = |message: String| Error::Data {
                path: path.to_path_buf(),
                row,
                message,
            };
            let id = rec.get(0).unwrap_or_default().to_string();
            if seen.insert(id.clone(), row).is_some() {
                return Err(data_err(format!("duplicate series id `{id}`")));
            }
            for field in rec.iter().skip(1) {
                if field.is_empty() {
                    cells.push(None);
                } else {
                    let v: f64 = field
                        .parse()
                        .map_err(|_| data_err(format!("`{field}` is not a number")))?;
                    cells.push(v.is_finite().then_some(v));
                }
            }
            series_ids.push(id);
        }
        FeatureMatrix::new(series_ids, feature_ids, cells)
    }
}
