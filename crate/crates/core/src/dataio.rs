//! Ingest of daily CSV data into an aligned, date-indexed frame.

use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_MIN_ROWS: usize = 30;
pub const ISO_DATE: &str = "%Y-%m-%d";

fn epoch() -> NaiveDate {
    NaiveDate::from_ymd_opt(1970, 1, 1).expect("valid epoch")
}

/// Days since 1970-01-01.
pub fn to_day_number(d: NaiveDate) -> i64 {
    (d - epoch()).num_days()
}

pub fn from_day_number(n: i64) -> NaiveDate {
    epoch() + chrono::Duration::days(n)
}

pub fn parse_iso_date(s: &str) -> Result<i64> {
    NaiveDate::parse_from_str(s.trim(), ISO_DATE)
        .map(to_day_number)
        .map_err(|e| Error::Argument(format!("invalid date '{s}': {e}")))
}

pub fn format_day(n: i64) -> String {
    from_day_number(n).format(ISO_DATE).to_string()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ColumnRole {
    Cumulative,
    #[default]
    Daily,
    TextDerived,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColumnSpec {
    pub name: String,
    #[serde(default)]
    pub role: ColumnRole,
    #[serde(default = "one")]
    pub divisor: f64,
}

fn one() -> f64 {
    1.0
}

fn iso() -> String {
    ISO_DATE.to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IngestSchema {
    pub date_column: String,
    #[serde(default = "iso")]
    pub date_format: String,
    pub columns: Vec<ColumnSpec>,
}

impl IngestSchema {
    pub fn validate(&self) -> Result<()> {
        if self.columns.is_empty() {
            return Err(Error::Schema("schema lists no value columns".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for c in &self.columns {
            if c.name == self.date_column {
                return Err(Error::Schema(format!("`{}` is both the date column and a value column", c.name)));
            }
            if !seen.insert(c.name.as_str()) {
                return Err(Error::Schema(format!("column `{}` listed twice", c.name)));
            }
            if !(c.divisor.is_finite() && c.divisor > 0.0) {
                return Err(Error::Schema(format!("column `{}` has non-positive divisor {}", c.name, c.divisor)));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<IngestSchema> {
        let s: IngestSchema = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<IngestSchema> {
        IngestSchema::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Rows removed by `align_and_validate`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AlignReport {
    pub dropped: Vec<i64>,
}

/// Date-indexed matrix of daily series; missing cells are NaN.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeriesFrame {
    /// Days since 1970-01-01, strictly increasing.
    pub dates: Vec<i64>,
    pub names: Vec<String>,
    pub roles: Vec<ColumnRole>,
    /// One vector per variable.
    pub columns: Vec<Vec<f64>>,
    #[serde(default)]
    pub report: AlignReport,
}

impl TimeSeriesFrame {
    pub fn new(dates: Vec<i64>, names: Vec<String>, columns: Vec<Vec<f64>>) -> Result<TimeSeriesFrame> {
        let roles = vec![ColumnRole::Daily; names.len()];
        let f = TimeSeriesFrame {
            dates,
            names,
            roles,
            columns,
            report: AlignReport::default(),
        };
        f.check()?;
        Ok(f)
    }

    fn check(&self) -> Result<()> {
        if self.names.len() != self.columns.len() || self.roles.len() != self.columns.len() {
            return Err(Error::Argument("column count differs from label count".into()));
        }
        if self.columns.iter().any(|c| c.len() != self.dates.len()) {
            return Err(Error::Argument("column length differs from the number of dates".into()));
        }
        if let Some(i) = (1..self.dates.len()).find(|&i| self.dates[i] <= self.dates[i - 1]) {
            return Err(Error::Ingest {
                row: i + 1,
                column: "date".into(),
                message: format!("date {} is not after {}", format_day(self.dates[i]), format_day(self.dates[i - 1])),
            });
        }
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.dates.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::Schema(format!("no column named `{name}`")))
    }

    pub fn column(&self, name: &str) -> Result<&[f64]> {
        Ok(&self.columns[self.index_of(name)?])
    }

    /// Row position of a date, if present.
    pub fn row_of(&self, day: i64) -> Option<usize> {
        self.dates.binary_search(&day).ok()
    }

    /// Rows `range` of every column.
    pub fn slice_rows(&self, range: std::ops::Range<usize>) -> TimeSeriesFrame {
        TimeSeriesFrame {
            dates: self.dates[range.clone()].to_vec(),
            names: self.names.clone(),
            roles: self.roles.clone(),
            columns: self.columns.iter().map(|c| c[range.clone()].to_vec()).collect(),
            report: self.report.clone(),
        }
    }

    /// Subset of columns in the given order.
    pub fn select(&self, names: &[String]) -> Result<TimeSeriesFrame> {
        let idx: Vec<usize> = names.iter().map(|n| self.index_of(n)).collect::<Result<_>>()?;
        Ok(TimeSeriesFrame {
            dates: self.dates.clone(),
            names: names.to_vec(),
            roles: idx.iter().map(|i| self.roles[*i]).collect(),
            columns: idx.iter().map(|i| self.columns[*i].clone()).collect(),
            report: self.report.clone(),
        })
    }

    pub fn is_complete(&self) -> bool {
        self.columns.iter().flatten().all(|x| !x.is_nan())
    }

    /// Write as CSV with an ISO `date` column; missing cells become `NA`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["date".to_string()];
        header.extend(self.names.iter().cloned());
        wr.write_record(&header)?;
        for (i, d) in self.dates.iter().enumerate() {
            let mut rec = vec![format_day(*d)];
            for c in &self.columns {
                rec.push(if c[i].is_nan() { "NA".to_string() } else { format!("{}", c[i]) });
            }
            wr.write_record(&rec)?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    /// Schema matching `write_csv` output, with every column daily and undivided.
    pub fn schema(&self) -> IngestSchema {
        IngestSchema {
            date_column: "date".into(),
            date_format: ISO_DATE.into(),
            columns: self
                .names
                .iter()
                .zip(&self.roles)
                .map(|(n, r)| ColumnSpec {
                    name: n.clone(),
                    role: *r,
                    divisor: 1.0,
                })
                .collect(),
        }
    }
}

fn parse_cell(s: &str) -> Option<std::result::Result<f64, std::num::ParseFloatError>> {
    let t = s.trim();
    if t.is_empty() || t == "NA" {
        None
    } else {
        Some(t.parse::<f64>())
    }
}

/// Read CSV text against a schema.
pub fn read_dataset<R: Read>(reader: R, schema: &IngestSchema) -> Result<TimeSeriesFrame> {
    schema.validate()?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("missing required column `{name}`")))
    };
    let date_idx = find(&schema.date_column)?;
    let idx: Vec<usize> = schema.columns.iter().map(|c| find(&c.name)).collect::<Result<_>>()?;
    let mut dates = Vec::new();
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); idx.len()];
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = r + 1;
        let raw_date = rec.get(date_idx).unwrap_or("");
        let d = NaiveDate::parse_from_str(raw_date, &schema.date_format).map_err(|e| Error::Ingest {
            row,
            column: schema.date_column.clone(),
            message: format!("cannot parse date '{raw_date}': {e}"),
        })?;
        dates.push(to_day_number(d));
        for (j, (spec, &k)) in schema.columns.iter().zip(&idx).enumerate() {
            let cell = rec.get(k).unwrap_or("");
            let x = match parse_cell(cell) {
                None => f64::NAN,
                Some(Ok(x)) if x.is_finite() => x / spec.divisor,
                Some(_) => {
                    return Err(Error::Ingest {
                        row,
                        column: spec.name.clone(),
                        message: format!("cannot parse number '{cell}'"),
                    })
                }
            };
            columns[j].push(x);
        }
    }
    let f = TimeSeriesFrame {
        dates,
        names: schema.columns.iter().map(|c| c.name.clone()).collect(),
        roles: schema.columns.iter().map(|c| c.role).collect(),
        columns,
        report: AlignReport::default(),
    };
    f.check()?;
    Ok(f)
}

pub fn load_dataset(path: &Path, schema: &IngestSchema) -> Result<TimeSeriesFrame> {
    read_dataset(std::fs::File::open(path)?, schema)
}

/// Positions where a cumulative series decreases.
pub fn negative_increments(series: &[f64]) -> Vec<usize> {
    (1..series.len()).filter(|&t| series[t] < series[t - 1]).collect()
}

/// First differences; the first entry is missing (NaN).
pub fn cumulative_to_daily(series: &[f64]) -> Result<Vec<f64>> {
    if series.len() < 2 {
        return Err(Error::Argument("differencing needs at least two values".into()));
    }
    let neg = negative_increments(series);
    if !neg.is_empty() {
        log::warn!("cumulative series decreases at {} position(s); negative daily values kept", neg.len());
    }
    let mut out = Vec::with_capacity(series.len());
    out.push(f64::NAN);
    out.extend(series.windows(2).map(|w| w[1] - w[0]));
    Ok(out)
}

/// Difference every cumulative column; roles become daily.
pub fn convert_cumulative(frame: &TimeSeriesFrame) -> Result<TimeSeriesFrame> {
    let mut out = frame.clone();
    for (j, role) in frame.roles.iter().enumerate() {
        if *role == ColumnRole::Cumulative {
            out.columns[j] = cumulative_to_daily(&frame.columns[j]).map_err(|e| e.for_variable(&frame.names[j]))?;
            out.roles[j] = ColumnRole::Daily;
        }
    }
    Ok(out)
}

pub fn align_and_validate(frame: &TimeSeriesFrame) -> Result<TimeSeriesFrame> {
    align_and_validate_with(frame, DEFAULT_MIN_ROWS)
}

/// Keep the longest run of consecutive complete rows (the latest on ties).
pub fn align_and_validate_with(frame: &TimeSeriesFrame, min_rows: usize) -> Result<TimeSeriesFrame> {
    let n = frame.n_rows();
    let complete: Vec<bool> = (0..n).map(|i| frame.columns.iter().all(|c| !c[i].is_nan())).collect();
    let (mut best, mut start) = ((0usize, 0usize), None);
    for i in 0..=n {
        let ok = i < n && complete[i];
        match (ok, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                if i - s >= best.1 - best.0 {
                    best = (s, i);
                }
                start = None;
            }
            _ => {}
        }
    }
    let kept = best.1 - best.0;
    if kept < min_rows {
        return Err(Error::InsufficientData { have: kept, need: min_rows });
    }
    let mut out = frame.slice_rows(best.0..best.1);
    let mut dropped = frame.report.dropped.clone();
    dropped.extend(frame.dates[..best.0].iter().chain(&frame.dates[best.1..]));
    dropped.sort_unstable();
    out.report = AlignReport { dropped };
    if out.report.dropped.len() > frame.report.dropped.len() {
        log::info!("dropped {} incomplete or non-contiguous row(s)", out.report.dropped.len() - frame.report.dropped.len());
    }
    Ok(out)
}

/// Load, difference cumulative columns and align.
pub fn prepare_dataset(path: &Path, schema: &IngestSchema, min_rows: usize) -> Result<TimeSeriesFrame> {
    let raw = load_dataset(path, schema)?;
    align_and_validate_with(&convert_cumulative(&raw)?, min_rows)
}
