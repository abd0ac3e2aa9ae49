//! Shot-averaged measurement datasets and their on-disk formats.
//!
//! Data files are UTF-8 CSV with a `#`-prefixed metadata preamble and one
//! row per sweep point; a TOML manifest next to them records the resolved
//! configuration, seed, and per-file content hashes. Outputs carry no
//! wall-clock information, so identical (config, seed) runs are
//! byte-identical.

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// One labeled sweep axis.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Axis {
    pub name: String,
    pub values: Vec<f64>,
}

/// Per-point measurement value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum PointValue {
    /// Shot-averaged excited-state estimate with its binomial error.
    Population { p: f64, se: f64, shots: u64 },
    /// Complex response (frequency-domain sweeps).
    Complex { re: f64, im: f64 },
    /// Deterministic scalar response (steady-state spectroscopy).
    Scalar { value: f64 },
}

/// Provenance stamped on every dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct RunMetadata {
    pub experiment: String,
    pub device_name: String,
    pub seed: u64,
    pub device_sha256: String,
    pub plan_sha256: String,
}

/// A labeled measurement grid in row-major order over its axes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DataSet {
    pub label: String,
    pub axes: Vec<Axis>,
    pub points: Vec<PointValue>,
    pub metadata: RunMetadata,
}

impl DataSet {
    /// Row-major coordinates of point `index`.
    pub fn coords(&self, index: usize) -> Vec<f64> {
        let mut idx = index;
        let mut out = vec![0.0; self.axes.len()];
        for (k, axis) in self.axes.iter().enumerate().rev() {
            out[k] = axis.values[idx % axis.values.len()];
            idx /= axis.values.len();
        }
        out
    }

    pub fn expected_len(&self) -> usize {
        self.axes.iter().map(|a| a.values.len()).product()
    }

    pub fn validate(&self) -> Result<()> {
        if self.points.len() != self.expected_len() {
            return Err(Error::usage(format!(
                "dataset '{}' has {} points for a {}-point grid",
                self.label,
                self.points.len(),
                self.expected_len()
            )));
        }
        for (k, p) in self.points.iter().enumerate() {
            if let PointValue::Population { p, se, shots } = p {
                if !(0.0..=1.0).contains(p) {
                    return Err(Error::domain(format!("point {k}: population {p} outside [0,1]")));
                }
                let expected_se = (p * (1.0 - p) / *shots as f64).sqrt();
                if (se - expected_se).abs() > 1e-12 {
                    return Err(Error::domain(format!(
                        "point {k}: SE {se} does not satisfy sqrt(p(1-p)/n) = {expected_se}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Population columns as parallel vectors (population datasets only).
    pub fn population_columns(&self) -> Result<(Vec<f64>, Vec<f64>, Vec<u64>)> {
        let mut p = Vec::with_capacity(self.points.len());
        let mut se = Vec::with_capacity(self.points.len());
        let mut shots = Vec::with_capacity(self.points.len());
        for point in &self.points {
            match point {
                PointValue::Population { p: pi, se: si, shots: ni } => {
                    p.push(*pi);
                    se.push(*si);
                    shots.push(*ni);
                }
                other => {
                    return Err(Error::usage(format!(
                        "dataset '{}' holds {other:?}, not populations",
                        self.label
                    )))
                }
            }
        }
        Ok((p, se, shots))
    }

    /// Complex columns as parallel vectors (complex datasets only).
    pub fn complex_columns(&self) -> Result<Vec<num_complex::Complex64>> {
        self.points
            .iter()
            .map(|point| match point {
                PointValue::Complex { re, im } => Ok(num_complex::Complex64::new(*re, *im)),
                other => Err(Error::usage(format!(
                    "dataset '{}' holds {other:?}, not complex responses",
                    self.label
                ))),
            })
            .collect()
    }

    /// Serialize as CSV: `#` metadata preamble, header row, then one row
    /// per point with the axis coordinates followed by the value columns.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str("# transim dataset\n");
        out.push_str("# format_version = 1\n");
        out.push_str(&format!("# label = {}\n", self.label));
        out.push_str(&format!("# experiment = {}\n", self.metadata.experiment));
        out.push_str(&format!("# device = {}\n", self.metadata.device_name));
        out.push_str(&format!("# seed = {}\n", self.metadata.seed));
        out.push_str(&format!("# device_sha256 = {}\n", self.metadata.device_sha256));
        out.push_str(&format!("# plan_sha256 = {}\n", self.metadata.plan_sha256));
        let axis_names: Vec<&str> = self.axes.iter().map(|a| a.name.as_str()).collect();
        let value_header = match self.points.first() {
            Some(PointValue::Population { .. }) | None => "p_excited,standard_error,shots",
            Some(PointValue::Complex { .. }) => "re,im",
            Some(PointValue::Scalar { .. }) => "value",
        };
        out.push_str(&format!("{},{}\n", axis_names.join(","), value_header));
        for (k, point) in self.points.iter().enumerate() {
            let coords = self.coords(k);
            let coord_str: Vec<String> = coords.iter().map(|c| format!("{c}")).collect();
            let value_str = match point {
                PointValue::Population { p, se, shots } => format!("{p},{se},{shots}"),
                PointValue::Complex { re, im } => format!("{re},{im}"),
                PointValue::Scalar { value } => format!("{value}"),
            };
            out.push_str(&format!("{},{}\n", coord_str.join(","), value_str));
        }
        out
    }
}

/// Hex SHA-256 of a value's canonical TOML serialization.
pub fn toml_digest<T: Serialize>(value: &T) -> Result<String> {
    let text = toml::to_string(value)
        .map_err(|e| Error::usage(format!("cannot serialize for hashing: {e}")))?;
    Ok(sha256_hex(text.as_bytes()))
}

/// Hex SHA-256 of raw bytes (used for data-file integrity in manifests).
pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Parsed CSV dataset, the read side of [`DataSet::to_csv`].
#[derive(Debug, Clone)]
pub struct CsvDataSet {
    pub preamble: Vec<(String, String)>,
    pub header: Vec<String>,
    pub columns: Vec<Vec<f64>>,
}

impl CsvDataSet {
    pub fn parse(text: &str) -> Result<Self> {
        let mut preamble = Vec::new();
        let mut header: Option<Vec<String>> = None;
        let mut columns: Vec<Vec<f64>> = Vec::new();
        for line in text.lines() {
            if let Some(rest) = line.strip_prefix('#') {
                if let Some((k, v)) = rest.split_once('=') {
                    preamble.push((k.trim().to_string(), v.trim().to_string()));
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            match &header {
                None => {
                    let names: Vec<String> =
                        line.split(',').map(|s| s.trim().to_string()).collect();
                    columns = vec![Vec::new(); names.len()];
                    header = Some(names);
                }
                Some(names) => {
                    let fields: Vec<&str> = line.split(',').collect();
                    if fields.len() != names.len() {
                        return Err(Error::usage(format!(
                            "row has {} fields for {} columns",
                            fields.len(),
                            names.len()
                        )));
                    }
                    for (col, field) in columns.iter_mut().zip(fields) {
                        let v: f64 = field.trim().parse().map_err(|e| {
                            Error::usage(format!("bad numeric field '{field}': {e}"))
                        })?;
                        col.push(v);
                    }
                }
            }
        }
        let header = header.ok_or_else(|| Error::usage("CSV has no header row".to_string()))?;
        Ok(Self { preamble, header, columns })
    }

    pub fn preamble_value(&self, key: &str) -> Option<&str> {
        self.preamble.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn column(&self, name: &str) -> Result<&[f64]> {
        self.header
            .iter()
            .position(|h| h == name)
            .map(|idx| self.columns[idx].as_slice())
            .ok_or_else(|| Error::usage(format!("CSV has no column '{name}'")))
    }
}
