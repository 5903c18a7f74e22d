//! Model JSON and header-free CSV matrices.

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{DdeError, Result};
use crate::family::ObservedFamily;
use crate::model::DdeModel;
use crate::SCHEMA;

/// On-disk model layout. `B[d]` is `B^(d+1)` as a list of rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub schema: String,
    #[serde(rename = "D")]
    pub depth: usize,
    #[serde(rename = "K")]
    pub dims: Vec<usize>,
    #[serde(rename = "J")]
    pub n_obs: usize,
    pub family: ObservedFamily,
    pub p: Vec<f64>,
    #[serde(rename = "B")]
    pub coefs: Vec<Vec<Vec<f64>>>,
    pub gamma: Option<Vec<f64>>,
}

impl From<&DdeModel> for ModelFile {
    fn from(m: &DdeModel) -> Self {
        Self {
            schema: SCHEMA.to_string(),
            depth: m.depth(),
            dims: m.dims.clone(),
            n_obs: m.n_obs,
            family: m.family,
            p: m.p.to_vec(),
            coefs: m
                .coefs
                .iter()
                .map(|b| b.rows().into_iter().map(|r| r.to_vec()).collect())
                .collect(),
            gamma: m.gamma.as_ref().map(|g| g.to_vec()),
        }
    }
}

impl ModelFile {
    pub fn into_model(self) -> Result<DdeModel> {
        if self.depth != self.dims.len() || self.coefs.len() != self.depth {
            return Err(DdeError::shape(format!(
                "D = {} but K has {} entries and B has {} matrices",
                self.depth,
                self.dims.len(),
                self.coefs.len()
            )));
        }
        let coefs = self
            .coefs
            .into_iter()
            .enumerate()
            .map(|(d, rows)| {
                rows_to_array(rows).map_err(|e| DdeError::shape(format!("B^({}): {e}", d + 1)))
            })
            .collect::<Result<Vec<_>>>()?;
        let model = DdeModel {
            dims: self.dims,
            n_obs: self.n_obs,
            family: self.family,
            p: Array1::from(self.p),
            coefs,
            gamma: self.gamma.map(Array1::from),
        };
        model.validate()?;
        Ok(model)
    }
}

fn rows_to_array(rows: Vec<Vec<f64>>) -> std::result::Result<Array2<f64>, String> {
    let nr = rows.len();
    let nc = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != nc) {
        return Err("ragged rows".into());
    }
    Array2::from_shape_vec((nr, nc), rows.into_iter().flatten().collect())
        .map_err(|e| e.to_string())
}

fn io_err(path: &Path, source: std::io::Error) -> DdeError {
    DdeError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn parse_err(path: &Path, message: impl Into<String>) -> DdeError {
    DdeError::Parse {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

pub fn model_to_json(model: &DdeModel) -> String {
    let mut s = serde_json::to_string_pretty(&ModelFile::from(model)).expect("model serializes");
    s.push('\n');
    s
}

pub fn model_from_json(text: &str) -> Result<DdeModel> {
    let file: ModelFile =
        serde_json::from_str(text).map_err(|e| DdeError::invalid(format!("model JSON: {e}")))?;
    file.into_model()
}

pub fn write_model(path: &Path, model: &DdeModel) -> Result<()> {
    fs::write(path, model_to_json(model)).map_err(|e| io_err(path, e))
}

pub fn read_model(path: &Path) -> Result<DdeModel> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let file: ModelFile =
        serde_json::from_str(&text).map_err(|e| parse_err(path, e.to_string()))?;
    file.into_model()
        .map_err(|e| parse_err(path, e.to_string()))
}

/// Writes a header-free comma-separated matrix.
pub fn write_matrix<T: std::fmt::Display>(path: &Path, m: &Array2<T>) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| parse_err(path, e.to_string()))?;
    for row in m.rows() {
        w.write_record(row.iter().map(|v| v.to_string()))
            .map_err(|e| parse_err(path, e.to_string()))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Reads a header-free comma-separated numeric matrix.
pub fn read_matrix(path: &Path) -> Result<Array2<f64>> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| parse_err(path, e.to_string()))?;
    let mut values = Vec::new();
    let mut ncols = None;
    let mut nrows = 0;
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| parse_err(path, e.to_string()))?;
        if ncols.is_some_and(|c| c != rec.len()) {
            return Err(parse_err(
                path,
                format!(
                    "row {} has {} fields, expected {}",
                    i + 1,
                    rec.len(),
                    ncols.unwrap()
                ),
            ));
        }
        ncols = Some(rec.len());
        for (j, f) in rec.iter().enumerate() {
            let v: f64 = f.parse().map_err(|_| {
                parse_err(
                    path,
                    format!("row {}, column {}: '{f}' is not a number", i + 1, j + 1),
                )
            })?;
            values.push(v);
        }
        nrows += 1;
    }
    Array2::from_shape_vec((nrows, ncols.unwrap_or(0)), values)
        .map_err(|e| parse_err(path, e.to_string()))
}

/// Reads a binary matrix.
pub fn read_binary_matrix(path: &Path) -> Result<Array2<u8>> {
    let m = read_matrix(path)?;
    if let Some(v) = m.iter().find(|v| **v != 0.0 && **v != 1.0) {
        return Err(parse_err(path, format!("expected 0/1 entries, found {v}")));
    }
    Ok(m.mapv(|v| v as u8))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_benchmark_params, ParamKind};

    #[test]
    fn model_json_round_trip_is_byte_stable() {
        for fam in [ObservedFamily::NORMAL, ObservedFamily::POISSON] {
            let mut m = make_benchmark_params(ParamKind::Generic, 18, &[6, 2], fam).unwrap();
            m.p[0] = 0.123_456_789_012_345_67;
            let text = model_to_json(&m);
            assert!(text.contains("\"schema\": \"dde/v1\""));
            let back = model_from_json(&text).unwrap();
            assert_eq!(back, m);
            assert_eq!(model_to_json(&back), text);
        }
    }

    #[test]
    fn bad_model_json_is_rejected() {
        let m = make_benchmark_params(ParamKind::Strict, 18, &[6, 2], ObservedFamily::BERNOULLI)
            .unwrap();
        let text = model_to_json(&m).replace("\"D\": 2", "\"D\": 3");
        assert!(model_from_json(&text).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let dir = std::env::temp_dir().join(format!("dde-io-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("m.csv");
        let m = ndarray::array![[1.5, -2.0, 1e-300], [0.1, 3.0, 7.25]];
        write_matrix(&path, &m).unwrap();
        assert_eq!(read_matrix(&path).unwrap(), m);
        fs::write(&path, "1,2\n3\n").unwrap();
        assert!(matches!(read_matrix(&path), Err(DdeError::Parse { .. })));
        fs::remove_dir_all(&dir).unwrap();
    }
}
