//! Delimited patient files.
//!
//! One header row, then one patient per row: an id column, a 0/1 treatment
//! column, a 0/1 response column and any number of numeric covariate
//! columns. Covariates keep their header order. Missing values are rejected.

use crate::{Arm, Error, PatientRecord, Result};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

/// Names of the non-covariate columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnMapping {
    pub id: String,
    pub treatment: String,
    pub response: String,
}

impl Default for ColumnMapping {
    fn default() -> Self {
        ColumnMapping {
            id: "id".into(),
            treatment: "treatment".into(),
            response: "response".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub covariate_names: Vec<String>,
    pub patients: Vec<PatientRecord>,
}

fn data_error(line: u64, column: &str, message: impl Into<String>) -> Error {
    Error::Data {
        line,
        column: column.to_string(),
        message: message.into(),
    }
}

fn parse_binary(raw: &str, line: u64, column: &str) -> Result<u8> {
    match raw.trim() {
        "0" => Ok(0),
        "1" => Ok(1),
        "" => Err(data_error(line, column, "missing value")),
        other => Err(data_error(line, column, format!("expected 0 or 1, found '{other}'"))),
    }
}

/// Reads a dataset with a header row.
pub fn read_dataset<R: Read>(reader: R, mapping: &ColumnMapping) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| csv_error(e, "header"))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect::<Vec<_>>();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| data_error(1, name, "column not found in header"))
    };
    let (id_col, t_col, y_col) = (find(&mapping.id)?, find(&mapping.treatment)?, find(&mapping.response)?);
    let covariate_cols: Vec<usize> = (0..headers.len())
        .filter(|i| ![id_col, t_col, y_col].contains(i))
        .collect();
    let covariate_names = covariate_cols.iter().map(|&i| headers[i].clone()).collect();

    let mut patients = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| csv_error(e, "row"))?;
        let line = row.position().map_or(0, |p| p.line());
        let id = row[id_col].trim();
        if id.is_empty() {
            return Err(data_error(line, &headers[id_col], "missing value"));
        }
        let t = parse_binary(&row[t_col], line, &headers[t_col])?;
        let y = parse_binary(&row[y_col], line, &headers[y_col])?;
        let mut covariates = Vec::with_capacity(covariate_cols.len());
        for &c in &covariate_cols {
            let raw = row[c].trim();
            if raw.is_empty() {
                return Err(data_error(line, &headers[c], "missing value"));
            }
            let v: f64 = raw
                .parse()
                .map_err(|_| data_error(line, &headers[c], format!("not a number: '{raw}'")))?;
            if !v.is_finite() {
                return Err(data_error(line, &headers[c], format!("not a finite number: '{raw}'")));
            }
            covariates.push(v);
        }
        let arm = Arm::from_indicator(t).expect("indicator is 0 or 1");
        patients.push(PatientRecord::new(id, arm, covariates).with_response(y == 1));
    }
    Ok(Dataset {
        covariate_names,
        patients,
    })
}

fn csv_error(e: csv::Error, what: &str) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        csv::ErrorKind::UnequalLengths { expected_len, len, .. } => {
            data_error(line, what, format!("expected {expected_len} fields, found {len}"))
        }
        csv::ErrorKind::Utf8 { .. } => data_error(line, what, "invalid UTF-8"),
        other => data_error(line, what, format!("{other:?}")),
    }
}

pub fn ingest_dataset(path: &Path, mapping: &ColumnMapping) -> Result<Dataset> {
    read_dataset(File::open(path)?, mapping)
}

/// Writes a dataset in the layout `read_dataset` expects. Patients without a
/// response are rejected.
pub fn write_dataset<W: Write>(writer: W, dataset: &Dataset, mapping: &ColumnMapping) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec![
        mapping.id.as_str(),
        mapping.treatment.as_str(),
        mapping.response.as_str(),
    ];
    header.extend(dataset.covariate_names.iter().map(String::as_str));
    w.write_record(&header).map_err(|e| csv_error(e, "header"))?;
    for (i, p) in dataset.patients.iter().enumerate() {
        if p.covariates.len() != dataset.covariate_names.len() {
            return Err(Error::Dimension(format!(
                "patient '{}' has {} covariates, header has {}",
                p.id,
                p.covariates.len(),
                dataset.covariate_names.len()
            )));
        }
        let y = p.response.ok_or_else(|| {
            data_error(
                i as u64 + 2,
                &mapping.response,
                format!("patient '{}' has no response", p.id),
            )
        })?;
        let mut row = vec![p.id.clone(), p.treatment.indicator().to_string(), (y as u8).to_string()];
        row.extend(p.covariates.iter().map(|v| v.to_string()));
        w.write_record(&row).map_err(|e| csv_error(e, "row"))?;
    }
    w.flush()?;
    Ok(())
}

pub fn export_dataset(path: &Path, dataset: &Dataset, mapping: &ColumnMapping) -> Result<()> {
    write_dataset(File::create(path)?, dataset, mapping)
}
