//! CSV input: a header row, an optional date column, numeric columns otherwise.

use std::io::Read;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::numeric::Panel;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub headers: Vec<String>,
    pub dates: Option<Vec<String>>,
    /// Column-major values of the non-date columns, in header order.
    pub columns: Vec<(String, Vec<f64>)>,
}

impl Dataset {
    pub fn rows(&self) -> usize {
        self.columns.first().map_or(0, |(_, v)| v.len())
    }

    pub fn column(&self, name: &str) -> Result<&[f64]> {
        self.columns
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
            .ok_or_else(|| Error::Ingest(format!("column '{name}' not found")))
    }

    /// Panel of the named columns and the instrument series.
    pub fn select(&self, variables: &[String], instrument: &str) -> Result<(Panel, Vec<f64>)> {
        let z = self.column(instrument)?.to_vec();
        let t = self.rows();
        let mut values = DMatrix::zeros(t, variables.len());
        for (j, v) in variables.iter().enumerate() {
            values.column_mut(j).copy_from_slice(self.column(v)?);
        }
        let mut panel = Panel::new(values, variables.to_vec())?;
        if let Some(d) = self.dates.as_ref().and_then(|d| d.first()) {
            panel = panel.with_t0_label(d.clone());
        }
        Ok((panel, z))
    }

    /// Every numeric column except `exclude`, in file order.
    pub fn numeric_columns_except(&self, exclude: &str) -> Vec<String> {
        self.columns.iter().map(|(n, _)| n.clone()).filter(|n| n != exclude).collect()
    }
}

pub fn read_csv_path(path: &Path, date_column: Option<&str>) -> Result<Dataset> {
    let file = std::fs::File::open(path)
        .map_err(|e| Error::Ingest(format!("cannot open {}: {e}", path.display())))?;
    read_csv(file, date_column)
}

/// Parses a CSV. `date_column` names the date column; when `None`, a first
/// column headed `date` (any case) is taken as the date.
pub fn read_csv<R: Read>(reader: R, date_column: Option<&str>) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).trim(csv::Trim::All).from_reader(reader);
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Ingest(format!("cannot read header: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();
    if headers.is_empty() || headers.iter().all(String::is_empty) {
        return Err(Error::Ingest("empty header row".into()));
    }
    if let Some(dup) = headers.iter().enumerate().find(|(i, h)| headers[..*i].contains(h)) {
        return Err(Error::Ingest(format!("duplicate column '{}'", dup.1)));
    }
    let date_idx = match date_column {
        Some(name) => Some(
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::Ingest(format!("column '{name}' not found")))?,
        ),
        None => headers.first().filter(|h| h.eq_ignore_ascii_case("date")).map(|_| 0),
    };
    let mut dates = date_idx.map(|_| Vec::new());
    let numeric: Vec<usize> = (0..headers.len()).filter(|i| Some(*i) != date_idx).collect();
    let mut cols: Vec<Vec<f64>> = vec![Vec::new(); numeric.len()];
    for (r, record) in rdr.records().enumerate() {
        // header is line 1
        let line = r + 2;
        let record = record.map_err(|e| Error::Ingest(format!("line {line}: {e}")))?;
        if record.len() != headers.len() {
            return Err(Error::Ingest(format!(
                "line {line}: ragged row with {} fields, expected {}",
                record.len(),
                headers.len()
            )));
        }
        if let (Some(d), Some(i)) = (dates.as_mut(), date_idx) {
            d.push(record[i].to_string());
        }
        for (k, &i) in numeric.iter().enumerate() {
            let cell = &record[i];
            if cell.is_empty() {
                return Err(Error::Ingest(format!("line {line}: missing value in column '{}'", headers[i])));
            }
            let v: f64 = cell.parse().map_err(|_| {
                Error::Ingest(format!("line {line}: non-numeric value '{cell}' in column '{}'", headers[i]))
            })?;
            if !v.is_finite() {
                return Err(Error::Ingest(format!("line {line}: non-finite value in column '{}'", headers[i])));
            }
            cols[k].push(v);
        }
    }
    if cols.first().is_none_or(Vec::is_empty) {
        return Err(Error::Ingest("no data rows".into()));
    }
    let columns = numeric.iter().map(|&i| headers[i].clone()).zip(cols).collect();
    Ok(Dataset { headers, dates, columns })
}
