//! Dataset files.
//!
//! * CSV: one sample per line, comma separated. A first line that does not
//!   parse as numbers is treated as a header. With labels enabled the last
//!   column is a non-negative integer class id.
//! * Binary: `<file>` holds row-major little-endian `f64` values and
//!   `<file>.json` holds `{"rows": r, "cols": c, "has_labels": bool}`. With
//!   labels each row stores `c` features followed by its label as an `f64`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use laot_core::evaluation::LabeledDataset;
use laot_core::Matrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Binary,
}

impl Format {
    /// `.csv` is CSV, anything else is the binary format.
    pub fn from_path(path: &Path) -> Format {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => Format::Csv,
            _ => Format::Binary,
        }
    }
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "bin" | "f64-binary" | "binary" => Ok(Format::Binary),
            _ => Err(Error::invalid(format!("unknown dataset format `{s}`"))),
        }
    }
}

/// Features with optional integer labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Matrix,
    pub labels: Option<Vec<usize>>,
}

impl Dataset {
    pub fn into_labeled(self, num_classes: Option<usize>) -> Result<LabeledDataset> {
        let labels = self
            .labels
            .ok_or_else(|| Error::invalid("dataset has no labels".to_string()))?;
        Ok(LabeledDataset::new(self.features, labels, num_classes)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sidecar {
    pub rows: usize,
    pub cols: usize,
    pub has_labels: bool,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn load_dataset(path: &Path, format: Format, labels: bool) -> Result<Dataset> {
    match format {
        Format::Csv => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            parse_csv(&text, labels).map_err(|e| e.in_file(path))
        }
        Format::Binary => load_binary(path, labels),
    }
}

fn parse_label(v: f64, line: usize) -> Result<usize> {
    if v < 0.0 || v.fract() != 0.0 || v > u32::MAX as f64 {
        return Err(Error::invalid(format!(
            "line {line}: label {v} is not a non-negative integer"
        )));
    }
    Ok(v as usize)
}

pub fn parse_csv(text: &str, labels: bool) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut width = None;
    let mut data = Vec::new();
    let mut ys = Vec::new();
    let mut rows = 0usize;
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::invalid(format!("malformed CSV: {e}")))?;
        let line = rec.position().map_or(i as u64 + 1, |p| p.line()) as usize;
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        let values = match parsed {
            Ok(v) => v,
            // A non-numeric first line is a header.
            Err(_) if rows == 0 && width.is_none() && i == 0 => continue,
            Err(_) => {
                let (col, field) = rec
                    .iter()
                    .enumerate()
                    .find(|(_, f)| f.parse::<f64>().is_err())
                    .expect("some field failed");
                return Err(Error::invalid(format!(
                    "line {line}, column {}: cannot parse `{field}` as a number",
                    col + 1
                )));
            }
        };
        match width {
            None => width = Some(values.len()),
            Some(w) if w != values.len() => {
                return Err(Error::invalid(format!(
                    "line {line}: row {} has {} fields, expected {w}",
                    rows + 1,
                    values.len()
                )))
            }
            _ => {}
        }
        if labels {
            let (&y, x) = values
                .split_last()
                .ok_or_else(|| Error::invalid(format!("line {line}: empty row")))?;
            if x.is_empty() {
                return Err(Error::invalid(format!("line {line}: row has a label but no features")));
            }
            ys.push(parse_label(y, line)?);
            data.extend_from_slice(x);
        } else {
            data.extend_from_slice(&values);
        }
        rows += 1;
    }
    let cols = width.map_or(0, |w| if labels { w - 1 } else { w });
    if let Some(bad) = data.iter().position(|v| !v.is_finite()) {
        return Err(Error::invalid(format!(
            "row {}: non-finite value",
            bad / cols.max(1) + 1
        )));
    }
    Ok(Dataset {
        features: Matrix::from_vec(rows, cols, data)?,
        labels: labels.then_some(ys),
    })
}

fn load_binary(path: &Path, labels: bool) -> Result<Dataset> {
    let side_path = sidecar_path(path);
    let side_text = fs::read_to_string(&side_path).map_err(|e| Error::io(&side_path, e))?;
    let side: Sidecar = serde_json::from_str(&side_text)
        .map_err(|e| Error::invalid(format!("{}: bad sidecar: {e}", side_path.display())))?;
    if labels && !side.has_labels {
        return Err(Error::invalid(format!(
            "{}: labels requested but the sidecar says there are none",
            path.display()
        )));
    }
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let stride = side.cols + usize::from(side.has_labels);
    let expected = side.rows * stride * 8;
    if bytes.len() != expected {
        return Err(Error::invalid(format!(
            "{}: {} bytes but the sidecar describes {}x{} values ({expected} bytes)",
            path.display(),
            bytes.len(),
            side.rows,
            stride
        )));
    }
    let values: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    let mut data = Vec::with_capacity(side.rows * side.cols);
    let mut ys = Vec::new();
    for (r, row) in values.chunks(stride.max(1)).enumerate().take(side.rows) {
        if let Some(c) = row[..side.cols].iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "{}: row {}, column {}: non-finite value",
                path.display(),
                r + 1,
                c + 1
            )));
        }
        data.extend_from_slice(&row[..side.cols]);
        if side.has_labels && labels {
            ys.push(parse_label(row[side.cols], r + 1).map_err(|e| e.in_file(path))?);
        }
    }
    Ok(Dataset {
        features: Matrix::from_vec(side.rows, side.cols, data)?,
        labels: labels.then_some(ys),
    })
}

pub fn save_dataset(path: &Path, format: Format, data: &Dataset) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    match format {
        Format::Csv => save_csv(path, data),
        Format::Binary => save_binary(path, data),
    }
}

fn save_csv(path: &Path, data: &Dataset) -> Result<()> {
    let mut out = String::new();
    for (i, row) in data.features.row_iter().enumerate() {
        let mut fields: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        if let Some(ys) = &data.labels {
            fields.push(ys[i].to_string());
        }
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

fn save_binary(path: &Path, data: &Dataset) -> Result<()> {
    let side = Sidecar {
        rows: data.features.rows(),
        cols: data.features.cols(),
        has_labels: data.labels.is_some(),
    };
    let mut bytes = Vec::with_capacity(side.rows * (side.cols + 1) * 8);
    for (i, row) in data.features.row_iter().enumerate() {
        for v in row {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        if let Some(ys) = &data.labels {
            bytes.extend_from_slice(&(ys[i] as f64).to_le_bytes());
        }
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(path, e))?;
    let side_path = sidecar_path(path);
    let json = serde_json::to_string_pretty(&side).expect("plain struct");
    fs::write(&side_path, json).map_err(|e| Error::io(&side_path, e))
}
