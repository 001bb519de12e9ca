//! Demand series, labelled collections of them, CSV loading and temporal
//! aggregation.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::write_atomic;

/// Days per bucket when monthly aggregation has no calendar to follow.
pub const UNDATED_MONTH_DAYS: usize = 30;
pub const DEFAULT_DAILY_FREQUENCY: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Daily,
    Weekly,
    Monthly,
}

impl Level {
    pub const ALL: [Level; 3] = [Level::Daily, Level::Weekly, Level::Monthly];

    /// Nominal seasonal period at this level.
    pub fn frequency(self) -> usize {
        match self {
            Level::Daily => DEFAULT_DAILY_FREQUENCY,
            Level::Weekly => 52,
            Level::Monthly => 12,
        }
    }

    pub fn code(self) -> char {
        match self {
            Level::Daily => 'd',
            Level::Weekly => 'w',
            Level::Monthly => 'm',
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Level::Daily => "daily",
            Level::Weekly => "weekly",
            Level::Monthly => "monthly",
        }
    }

    /// Parses a comma separated list such as `d,w,m`.
    pub fn parse_list(s: &str) -> Result<BTreeSet<Level>> {
        let levels = s
            .split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(Level::from_str)
            .collect::<Result<BTreeSet<_>>>()?;
        if levels.is_empty() {
            return Err(Error::Parameter("empty level list".into()));
        }
        Ok(levels)
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Level {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "d" | "daily" => Ok(Level::Daily),
            "w" | "weekly" => Ok(Level::Weekly),
            "m" | "monthly" => Ok(Level::Monthly),
            other => Err(Error::Parameter(format!("unknown aggregation level `{other}`"))),
        }
    }
}

/// One non-negative demand series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SalesSeries {
    pub id: String,
    pub values: Vec<f64>,
    pub dates: Option<Vec<NaiveDate>>,
    pub frequency: usize,
}

impl SalesSeries {
    pub fn new(
        id: impl Into<String>,
        values: Vec<f64>,
        dates: Option<Vec<NaiveDate>>,
        frequency: usize,
    ) -> Result<Self> {
        let id = id.into();
        if frequency == 0 {
            return Err(Error::Parameter(format!("series {id}: frequency must be positive")));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidDataset(format!(
                "series {id}: value {} at position {i} is not a finite non-negative number",
                values[i]
            )));
        }
        if let Some(d) = &dates {
            if d.len() != values.len() {
                return Err(Error::InvalidDataset(format!(
                    "series {id}: {} dates for {} values",
                    d.len(),
                    values.len()
                )));
            }
            check_spacing(&id, d)?;
        }
        Ok(SalesSeries {
            id,
            values,
            dates,
            frequency,
        })
    }

    /// Undated series with the default daily frequency.
    pub fn undated(id: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        Self::new(id, values, None, DEFAULT_DAILY_FREQUENCY)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }
}

// Gaps must be constant in days, or the dates must be consecutive
// month starts (the output of calendar aggregation).
fn check_spacing(id: &str, dates: &[NaiveDate]) -> Result<()> {
    if dates.len() < 2 {
        return Ok(());
    }
    let gaps: Vec<i64> = dates
        .windows(2)
        .map(|w| (w[1] - w[0]).num_days())
        .collect();
    if gaps.iter().any(|g| *g <= 0) {
        return Err(Error::InvalidDataset(format!(
            "series {id}: dates are not strictly increasing"
        )));
    }
    if gaps.iter().all(|g| *g == gaps[0]) {
        return Ok(());
    }
    let monthly = dates.iter().all(|d| d.day() == 1)
        && dates.windows(2).all(|w| month_index(w[1]) == month_index(w[0]) + 1);
    if monthly {
        Ok(())
    } else {
        Err(Error::InvalidDataset(format!(
            "series {id}: dates are not equally spaced"
        )))
    }
}

fn month_index(d: NaiveDate) -> i64 {
    d.year() as i64 * 12 + d.month0() as i64
}

/// A collection of series with one label per series for each classification task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    pub series: Vec<SalesSeries>,
    /// task name -> labels aligned with `series`
    pub tasks: BTreeMap<String, Vec<String>>,
    pub level: Level,
}

impl LabeledDataset {
    pub fn new(
        series: Vec<SalesSeries>,
        tasks: BTreeMap<String, Vec<String>>,
        level: Level,
    ) -> Result<Self> {
        let mut seen = HashSet::new();
        for s in &series {
            if !seen.insert(s.id.as_str()) {
                return Err(Error::InvalidDataset(format!("duplicate series id {}", s.id)));
            }
        }
        for (task, labels) in &tasks {
            if labels.len() != series.len() {
                return Err(Error::InvalidDataset(format!(
                    "task {task} labels {} series but the dataset has {}",
                    labels.len(),
                    series.len()
                )));
            }
            let distinct: HashSet<&String> = labels.iter().collect();
            if distinct.len() < 2 {
                return Err(Error::InvalidDataset(format!(
                    "task {task} needs at least two distinct labels"
                )));
            }
        }
        Ok(LabeledDataset {
            series,
            tasks,
            level,
        })
    }

    pub fn unlabeled(series: Vec<SalesSeries>) -> Result<Self> {
        Self::new(series, BTreeMap::new(), Level::Daily)
    }

    pub fn len(&self) -> usize {
        self.series.len()
    }

    pub fn is_empty(&self) -> bool {
        self.series.is_empty()
    }

    pub fn ids(&self) -> Vec<String> {
        self.series.iter().map(|s| s.id.clone()).collect()
    }

    /// Labels of one task keyed by series id.
    pub fn labels_by_id(&self, task: &str) -> Option<HashMap<&str, &str>> {
        self.tasks.get(task).map(|labels| {
            self.series
                .iter()
                .zip(labels)
                .map(|(s, l)| (s.id.as_str(), l.as_str()))
                .collect()
        })
    }
}

/// Column names of a long-format sales file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct CsvColumns {
    pub id: String,
    /// `None` keeps file order and produces undated series.
    pub date: Option<String>,
    pub value: String,
}

impl Default for CsvColumns {
    fn default() -> Self {
        CsvColumns {
            id: "id".into(),
            date: Some("date".into()),
            value: "value".into(),
        }
    }
}

fn column_index(headers: &csv::StringRecord, name: &str, path: &Path) -> Result<usize> {
    headers.iter().position(|h| h.trim() == name).ok_or_else(|| Error::Schema {
        path: path.to_path_buf(),
        message: format!("missing column `{name}`"),
    })
}

/// Loads a long CSV (one row per id and period) into unlabelled daily series.
/// Series appear in order of first occurrence; each is sorted by date.
pub fn load_long_csv(path: &Path, cols: &CsvColumns, frequency: usize) -> Result<LabeledDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => Error::io(path, std::io::Error::other(e.to_string())),
            _ => Error::Csv(e),
        })?;
    let headers = rdr.headers()?.clone();
    let id_idx = column_index(&headers, &cols.id, path)?;
    let value_idx = column_index(&headers, &cols.value, path)?;
    let date_idx = cols
        .date
        .as_deref()
        .map(|d| column_index(&headers, d, path))
        .transpose()?;

    struct Pending {
        rows: Vec<(Option<NaiveDate>, f64, usize)>,
    }
    let mut order: Vec<String> = Vec::new();
    let mut groups: HashMap<String, Pending> = HashMap::new();

    for rec in rdr.records() {
        let rec = rec?;
        let row = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let data_err = |message: String| Error::Data {
            path: path.to_path_buf(),
            row,
            message,
        };
        let id = rec.get(id_idx).unwrap_or("").to_string();
        if id.is_empty() {
            return Err(data_err("empty id".into()));
        }
        let raw = rec.get(value_idx).unwrap_or("");
        let value: f64 = raw
            .parse()
            .map_err(|_| data_err(format!("value `{raw}` is not a number")))?;
        if !value.is_finite() || value < 0.0 {
            return Err(data_err(format!("value `{raw}` is not a finite non-negative number")));
        }
        let date = match date_idx {
            Some(i) => {
                let raw = rec.get(i).unwrap_or("");
                Some(
                    NaiveDate::parse_from_str(raw, "%Y-%m-%d")
                        .map_err(|_| data_err(format!("date `{raw}` is not YYYY-MM-DD")))?,
                )
            }
            None => None,
        };
        let entry = groups.entry(id.clone()).or_insert_with(|| {
            order.push(id.clone());
            Pending { rows: Vec::new() }
        });
        entry.rows.push((date, value, row));
    }

    let mut series = Vec::with_capacity(order.len());
    for id in order {
        let mut pending = groups.remove(&id).expect("grouped id");
        let dates = if date_idx.is_some() {
            pending.rows.sort_by_key(|(d, _, row)| (*d, *row));
            for w in pending.rows.windows(2) {
                if w[0].0 == w[1].0 {
                    return Err(Error::Data {
                        path: path.to_path_buf(),
                        row: w[1].2,
                        message: format!(
                            "duplicate date {} for id {id}",
                            w[1].0.expect("dated row")
                        ),
                    });
                }
            }
            Some(pending.rows.iter().map(|r| r.0.expect("dated row")).collect())
        } else {
            None
        };
        let values = pending.rows.iter().map(|r| r.1).collect();
        series.push(SalesSeries::new(id, values, dates, frequency)?);
    }
    LabeledDataset::unlabeled(series)
}

/// Writes the dataset back in long format. Dates are written only when every
/// series carries them.
pub fn write_long_csv(ds: &LabeledDataset, path: &Path, cols: &CsvColumns) -> Result<()> {
    let dated = cols.date.is_some() && ds.series.iter().all(|s| s.dates.is_some());
    write_atomic(path, |w| {
        let mut wtr = csv::Writer::from_writer(w);
        if dated {
            wtr.write_record([
                cols.id.as_str(),
                cols.date.as_deref().expect("dated"),
                cols.value.as_str(),
            ])?;
        } else {
            wtr.write_record([cols.id.as_str(), cols.value.as_str()])?;
        }
        for s in &ds.series {
            for (i, v) in s.values.iter().enumerate() {
                let value = v.to_string();
                if dated {
                    let date = s.dates.as_ref().expect("dated")[i].format("%Y-%m-%d").to_string();
                    wtr.write_record([s.id.as_str(), date.as_str(), value.as_str()])?;
                } else {
                    wtr.write_record([s.id.as_str(), value.as_str()])?;
                }
            }
        }
        wtr.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    })
}

/// Attaches class labels from a CSV whose id column is `id_col` (or the first
/// column when no header matches) and whose remaining columns are tasks.
pub fn attach_labels(ds: LabeledDataset, path: &Path, id_col: &str) -> Result<LabeledDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)?;
    let headers = rdr.headers()?.clone();
    if headers.len() < 2 {
        return Err(Error::Schema {
            path: path.to_path_buf(),
            message: "label file needs an id column and at least one task column".into(),
        });
    }
    let id_idx = headers.iter().position(|h| h == id_col).unwrap_or(0);
    let task_cols: Vec<(usize, String)> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != id_idx)
        .map(|(i, h)| (i, h.to_string()))
        .collect();

    let known: HashSet<&str> = ds.series.iter().map(|s| s.id.as_str()).collect();
    let mut by_id: HashMap<String, Vec<String>> = HashMap::new();
    let mut unknown = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let row = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let id = rec.get(id_idx).unwrap_or("").to_string();
        if !known.contains(id.as_str()) {
            unknown.push(id);
            continue;
        }
        let labels: Vec<String> = task_cols
            .iter()
            .map(|(i, _)| rec.get(*i).unwrap_or("").to_string())
            .collect();
        if by_id.insert(id.clone(), labels).is_some() {
            return Err(Error::Data {
                path: path.to_path_buf(),
                row,
                message: format!("duplicate label row for id {id}"),
            });
        }
    }
    if !unknown.is_empty() {
        return Err(Error::UnknownLabelIds { unknown });
    }
    let missing: Vec<String> = ds
        .series
        .iter()
        .filter(|s| !by_id.contains_key(&s.id))
        .map(|s| s.id.clone())
        .collect();
    if !missing.is_empty() {
        return Err(Error::LabelCoverage { missing });
    }

    let mut tasks = ds.tasks;
    for (k, (_, name)) in task_cols.iter().enumerate() {
        let labels = ds.series.iter().map(|s| by_id[&s.id][k].clone()).collect();
        tasks.insert(name.clone(), labels);
    }
    LabeledDataset::new(ds.series, tasks, ds.level)
}

/// Temporal aggregation of a daily series.
///
/// Weekly buckets are consecutive 7-day blocks anchored at the first
/// observation. Monthly buckets follow the calendar when dates exist and are
/// 30-day blocks otherwise. Incomplete buckets at either end are dropped, so
/// every retained bucket sums the same number of base periods.
pub fn aggregate(s: &SalesSeries, level: Level) -> Result<SalesSeries> {
    if level == Level::Daily {
        return Ok(s.clone());
    }
    let (values, dates) = bucket_sums(s, level)?;
    if values.len() < 2 {
        return Err(Error::TooShort {
            needed: 2,
            got: values.len(),
        });
    }
    SalesSeries::new(s.id.clone(), values, dates, level.frequency())
}

/// The retained bucket totals (and bucket start dates) of [`aggregate`],
/// without the minimum-length check.
pub fn bucket_sums(s: &SalesSeries, level: Level) -> Result<(Vec<f64>, Option<Vec<NaiveDate>>)> {
    Ok(match level {
        Level::Daily => (s.values.clone(), s.dates.clone()),
        Level::Weekly => block_sums(s, 7),
        Level::Monthly => match &s.dates {
            Some(dates) => calendar_month_sums(&s.id, &s.values, dates)?,
            None => block_sums(s, UNDATED_MONTH_DAYS),
        },
    })
}

fn block_sums(s: &SalesSeries, width: usize) -> (Vec<f64>, Option<Vec<NaiveDate>>) {
    let values = s
        .values
        .chunks_exact(width)
        .map(|c| c.iter().sum())
        .collect();
    let dates = s
        .dates
        .as_ref()
        .map(|d| d.chunks_exact(width).map(|c| c[0]).collect());
    (values, dates)
}

fn calendar_month_sums(
    id: &str,
    values: &[f64],
    dates: &[NaiveDate],
) -> Result<(Vec<f64>, Option<Vec<NaiveDate>>)> {
    if dates.windows(2).any(|w| (w[1] - w[0]).num_days() != 1) {
        return Err(Error::Parameter(format!(
            "series {id}: calendar aggregation needs consecutive daily dates"
        )));
    }
    let mut sums = Vec::new();
    let mut starts = Vec::new();
    let mut i = 0;
    while i < dates.len() {
        let (y, m) = (dates[i].year(), dates[i].month());
        let mut j = i;
        let mut total = 0.0;
        while j < dates.len() && dates[j].year() == y && dates[j].month() == m {
            total += values[j];
            j += 1;
        }
        let first = NaiveDate::from_ymd_opt(y, m, 1).expect("valid month start");
        if (j - i) as u32 == days_in_month(y, m) {
            sums.push(total);
            starts.push(first);
        }
        i = j;
    }
    Ok((sums, Some(starts)))
}

fn days_in_month(year: i32, month: u32) -> u32 {
    let (ny, nm) = if month == 12 { (year + 1, 1) } else { (year, month + 1) };
    let next = NaiveDate::from_ymd_opt(ny, nm, 1).expect("valid month");
    let this = NaiveDate::from_ymd_opt(year, month, 1).expect("valid month");
    (next - this).num_days() as u32
}
