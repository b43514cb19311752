use std::path::Path;

use super::config::Transform;
use crate::error::{Error, Result};

pub const MIN_RETURNS: usize = 10;

#[derive(Clone, Debug, PartialEq)]
pub struct ReturnSeries {
    pub values: Vec<f64>,
    pub source: String,
    pub transform: Transform,
}

impl ReturnSeries {
    /// Checks length, finiteness and variation.
    pub fn new(values: Vec<f64>, source: impl Into<String>, transform: Transform) -> Result<Self> {
        if values.len() < MIN_RETURNS {
            return Err(Error::InsufficientData {
                needed: MIN_RETURNS,
                got: values.len(),
            });
        }
        if let Some((row, v)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite {
                row,
                value: v.to_string(),
            });
        }
        if values.iter().all(|&v| v == values[0]) {
            return Err(Error::ConstantData);
        }
        Ok(Self {
            values,
            source: source.into(),
            transform,
        })
    }
}

/// `100 ln(p_t / p_{t-1})`; prices must be positive.
pub fn log_returns(prices: &[f64]) -> Result<Vec<f64>> {
    if let Some((row, p)) = prices.iter().enumerate().find(|(_, p)| !(**p > 0.0) || !p.is_finite()) {
        return Err(Error::NonFinite {
            row,
            value: p.to_string(),
        });
    }
    Ok(prices.windows(2).map(|w| 100.0 * (w[1] / w[0]).ln()).collect())
}

/// Reads `column` from a headed CSV and applies `transform`. Row numbers in
/// errors count data rows from 1.
pub fn load_returns(path: &Path, column: &str, transform: Transform) -> Result<ReturnSeries> {
    let shown = path.display().to_string();
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let idx = reader
        .headers()?
        .iter()
        .position(|h| h == column)
        .ok_or_else(|| Error::MissingColumn {
            column: column.to_string(),
            path: path.to_path_buf(),
        })?;
    let mut raw = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let cell = record.get(idx).unwrap_or("");
        let v: f64 = cell.parse().map_err(|_| Error::Parse {
            path: path.to_path_buf(),
            row: i + 1,
            cell: cell.to_string(),
        })?;
        if !v.is_finite() {
            return Err(Error::NonFinite {
                row: i + 1,
                value: cell.to_string(),
            });
        }
        raw.push(v);
    }
    let values = match transform {
        Transform::None => raw,
        Transform::LogReturn => log_returns(&raw)?,
    };
    ReturnSeries::new(values, shown, transform)
}
