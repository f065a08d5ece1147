//! CSV ingestion of return panels and exogenous series, and the CSV writer
//! every output table goes through.
//!
//! Long files carry `series,date,ret` (plus an optional `family` column),
//! wide files `date,<series>...`, exogenous files `date,value`. Dates are
//! `YYYYMM` or `YYYY-MM`. Percent inputs are divided by 100 on the way in;
//! everything downstream is decimal.

use std::fmt::Display;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use mislearn_core::{ExogenousSeries, MonthIndex, ReturnPanel};
use serde::Deserialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Layout {
    Wide,
    Long,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Unit {
    Percent,
    Decimal,
}

impl Unit {
    fn to_decimal(self, v: f64) -> f64 {
        match self {
            Unit::Percent => v / 100.0,
            Unit::Decimal => v,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Open {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}: header: {message}")]
    Header { path: PathBuf, message: String },
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: u64, message: String },
    #[error("{path}:{line}: duplicate observation for ({series}, {month}) in row `{row}`")]
    Duplicate {
        path: PathBuf,
        line: u64,
        series: String,
        month: MonthIndex,
        row: String,
    },
    #[error("{path}: writing: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },
}

fn reader(path: &Path) -> Result<csv::Reader<File>, IoError> {
    let file = File::open(path).map_err(|source| IoError::Open {
        path: path.into(),
        source,
    })?;
    Ok(csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(false)
        .from_reader(file))
}

fn headers(path: &Path, rdr: &mut csv::Reader<File>) -> Result<Vec<String>, IoError> {
    let h = rdr.headers().map_err(|source| IoError::Csv {
        path: path.into(),
        source,
    })?;
    let h: Vec<String> = h.iter().map(str::to_owned).collect();
    if h.is_empty() || h.iter().all(String::is_empty) {
        return Err(IoError::Header {
            path: path.into(),
            message: "missing header row".into(),
        });
    }
    Ok(h)
}

fn position(path: &Path, header: &[String], name: &str) -> Result<usize, IoError> {
    header
        .iter()
        .position(|h| h.eq_ignore_ascii_case(name))
        .ok_or_else(|| IoError::Header {
            path: path.into(),
            message: format!("required column `{name}` not found"),
        })
}

struct Row {
    line: u64,
    record: csv::StringRecord,
}

impl Row {
    fn raw(&self) -> String {
        self.record.iter().collect::<Vec<_>>().join(",")
    }
}

fn rows<'a>(path: &Path, rdr: &'a mut csv::Reader<File>) -> impl Iterator<Item = Result<Row, IoError>> + 'a {
    let path = path.to_path_buf();
    rdr.records().map(move |r| {
        let record = r.map_err(|source| IoError::Csv {
            path: path.clone(),
            source,
        })?;
        let line = record.position().map_or(0, |p| p.line());
        Ok(Row { line, record })
    })
}

fn parse_err(path: &Path, line: u64, message: String) -> IoError {
    IoError::Parse {
        path: path.into(),
        line,
        message,
    }
}

fn parse_date(path: &Path, row: &Row, field: &str) -> Result<MonthIndex, IoError> {
    MonthIndex::parse(field).map_err(|e| parse_err(path, row.line, e.to_string()))
}

fn parse_number(path: &Path, row: &Row, field: &str, column: &str) -> Result<f64, IoError> {
    match field.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(parse_err(
            path,
            row.line,
            format!("column `{column}`: cannot parse `{field}` as a finite number"),
        )),
    }
}

fn insert(panel: &mut ReturnPanel, path: &Path, row: &Row, series: &str, t: MonthIndex, v: f64) -> Result<(), IoError> {
    if panel.get(series, t).is_some() {
        return Err(IoError::Duplicate {
            path: path.into(),
            line: row.line,
            series: series.into(),
            month: t,
            row: row.raw(),
        });
    }
    panel
        .insert(series, t, v)
        .map_err(|e| parse_err(path, row.line, e.to_string()))
}

/// Reads a return panel. In the wide layout an empty cell is a missing
/// month; in the long layout every row must carry a return.
pub fn load_returns(path: &Path, layout: Layout, unit: Unit) -> Result<ReturnPanel, IoError> {
    let mut rdr = reader(path)?;
    let header = headers(path, &mut rdr)?;
    let mut panel = ReturnPanel::new();
    match layout {
        Layout::Long => {
            let si = position(path, &header, "series")?;
            let di = position(path, &header, "date")?;
            let ri = position(path, &header, "ret")?;
            let fi = header.iter().position(|h| h.eq_ignore_ascii_case("family"));
            for row in rows(path, &mut rdr) {
                let row = row?;
                let series = &row.record[si];
                if series.is_empty() {
                    return Err(parse_err(path, row.line, "empty series id".into()));
                }
                let t = parse_date(path, &row, &row.record[di])?;
                let v = unit.to_decimal(parse_number(path, &row, &row.record[ri], "ret")?);
                insert(&mut panel, path, &row, series, t, v)?;
                if let Some(fi) = fi {
                    let fam = &row.record[fi];
                    if !fam.is_empty() {
                        panel.set_family(series, Some(fam.into()));
                    }
                }
            }
        }
        Layout::Wide => {
            let di = position(path, &header, "date")?;
            let names: Vec<(usize, &String)> = header.iter().enumerate().filter(|(i, _)| *i != di).collect();
            if let Some((_, n)) = names.iter().find(|(_, n)| n.is_empty()) {
                return Err(IoError::Header {
                    path: path.into(),
                    message: format!("empty series name after `{n}`"),
                });
            }
            for row in rows(path, &mut rdr) {
                let row = row?;
                let t = parse_date(path, &row, &row.record[di])?;
                for (i, name) in &names {
                    let cell = &row.record[*i];
                    if cell.is_empty() {
                        continue;
                    }
                    let v = unit.to_decimal(parse_number(path, &row, cell, name)?);
                    insert(&mut panel, path, &row, name, t, v)?;
                }
            }
        }
    }
    Ok(panel)
}

/// Reads a `date,value` file.
pub fn load_exogenous(path: &Path, unit: Unit) -> Result<ExogenousSeries, IoError> {
    let mut rdr = reader(path)?;
    let header = headers(path, &mut rdr)?;
    let di = position(path, &header, "date")?;
    let vi = position(path, &header, "value")?;
    let mut out = ExogenousSeries::new();
    for row in rows(path, &mut rdr) {
        let row = row?;
        let t = parse_date(path, &row, &row.record[di])?;
        let v = unit.to_decimal(parse_number(path, &row, &row.record[vi], "value")?);
        if out.get(t).is_some() {
            return Err(IoError::Duplicate {
                path: path.into(),
                line: row.line,
                series: "value".into(),
                month: t,
                row: row.raw(),
            });
        }
        out.insert(t, v).map_err(|e| parse_err(path, row.line, e.to_string()))?;
    }
    Ok(out)
}

/// Writes a panel in the long layout with decimal returns. Values use the
/// shortest representation that parses back to the same `f64`.
pub fn write_panel(panel: &ReturnPanel, path: &Path) -> Result<(), IoError> {
    let has_family = panel.series_ids().any(|s| panel.family(s).is_some());
    let mut header = vec!["series", "date", "ret"];
    if has_family {
        header.push("family");
    }
    let mut table = Table::new(&header);
    for (s, t, v) in panel.observations() {
        let mut row = vec![s.to_owned(), t.to_string(), num(v)];
        if has_family {
            row.push(panel.family(s).unwrap_or("").to_owned());
        }
        table.push(row);
    }
    table.write(path)
}

/// Shortest round-trip rendering; `NaN` and infinities spelled out.
pub fn num(v: f64) -> String {
    format!("{v}")
}

/// `num` for present values, empty for absent ones.
pub fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

pub fn flag(b: bool) -> String {
    if b { "1" } else { "0" }.into()
}

pub fn text(v: impl Display) -> String {
    v.to_string()
}

/// An in-memory CSV table, written in one go.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|h| (*h).to_owned()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len(), "row width");
        self.rows.push(row);
    }

    pub fn extend(&mut self, other: Table) {
        self.rows.extend(other.rows);
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn write(&self, path: &Path) -> Result<(), IoError> {
        let werr = |source| IoError::Write {
            path: path.into(),
            source,
        };
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(werr)?;
        }
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        let cerr = |source| IoError::Csv {
            path: path.into(),
            source,
        };
        w.write_record(&self.header).map_err(cerr)?;
        for r in &self.rows {
            w.write_record(r).map_err(cerr)?;
        }
        let bytes = w.into_inner().map_err(|e| werr(e.into_error()))?;
        let mut f = File::create(path).map_err(werr)?;
        f.write_all(&bytes).map_err(werr)
    }
}
