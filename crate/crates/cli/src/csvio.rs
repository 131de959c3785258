//! CSV readers and writers specific to the command line.

use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use rankrefine_core::{Error, RegressorEstimate};
use serde::Deserialize;

use crate::error::Result;

pub fn open(path: &Path) -> Result<File> {
    Ok(File::open(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?)
}

/// `--out` target: a file, or stdout when absent.
pub fn output(path: Option<&PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| Error::Io {
            path: p.clone(),
            source: e,
        })?)),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

fn column(headers: &csv::StringRecord, name: &str, source: &str) -> Result<usize> {
    headers.iter().position(|h| h == name).ok_or_else(|| {
        Error::MissingColumn {
            column: name.to_string(),
            path: source.to_string(),
        }
        .into()
    })
}

fn number(raw: &str, source: &str, line: u64, column: &str) -> Result<f64> {
    match raw.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::Parse {
            path: source.to_string(),
            line,
            message: format!("column `{column}`: `{raw}` is not a finite number"),
        }
        .into()),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub id: String,
    pub estimate: RegressorEstimate,
}

/// Reads `id,y_reg,var_reg`.
pub fn read_predictions<R: Read>(reader: R, source: &str) -> Result<Vec<Prediction>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let (id, y, var) = (
        column(&headers, "id", source)?,
        column(&headers, "y_reg", source)?,
        column(&headers, "var_reg", source)?,
    );
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let value = number(&record[y], source, line, "y_reg")?;
        let variance = number(&record[var], source, line, "var_reg")?;
        let estimate = RegressorEstimate::new(value, variance).map_err(|e| Error::Parse {
            path: source.to_string(),
            line,
            message: e.to_string(),
        })?;
        out.push(Prediction {
            id: record[id].to_string(),
            estimate,
        });
    }
    Ok(out)
}

/// A row of a query or reference file for `rank`: `id` plus optional `text`
/// and ground-truth `y`. Other columns are ignored.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct Item {
    pub id: String,
    #[serde(default)]
    pub text: Option<String>,
    #[serde(default)]
    pub y: Option<f64>,
}

impl Item {
    pub fn display_text(&self) -> &str {
        self.text.as_deref().unwrap_or(&self.id)
    }
}

pub fn read_items(path: &Path) -> Result<Vec<Item>> {
    let source = path.display().to_string();
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(open(path)?);
    column(&rdr.headers()?.clone(), "id", &source)?;
    let mut items = Vec::new();
    for row in rdr.deserialize::<Item>() {
        let item = row?;
        if item.y.is_some_and(|y| !y.is_finite()) {
            return Err(Error::NonFinite(format!("y of `{}` in {source}", item.id)).into());
        }
        items.push(item);
    }
    Ok(items)
}

/// Reads rows to predict: an optional `id` column (row index otherwise) and
/// every column in `feature_names`. Other columns, including `y`, are ignored.
pub fn read_features(path: &Path, feature_names: &[String]) -> Result<Vec<(String, Vec<f64>)>> {
    let source = path.display().to_string();
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(open(path)?);
    let headers = rdr.headers()?.clone();
    let id_col = headers.iter().position(|h| h == "id");
    let cols = feature_names
        .iter()
        .map(|name| column(&headers, name, &source))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let features = cols
            .iter()
            .zip(feature_names)
            .map(|(&c, name)| number(&record[c], &source, line, name))
            .collect::<Result<Vec<_>>>()?;
        let id = id_col.map_or_else(|| i.to_string(), |c| record[c].to_string());
        rows.push((id, features));
    }
    Ok(rows)
}
