//! Run reports and their JSON / flat CSV encodings.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{Map, Value};

use crate::connect::{SMatrixMap, ScatteringCoefficients, TransferMatrix};
use crate::model::ProblemConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
}

mod nan_as_null {
    use super::*;

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_f64(*x)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    #[serde(with = "nan_as_null")]
    pub defect: f64,
    pub tolerance: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl CheckResult {
    pub fn measure(name: &str, defect: f64, tolerance: f64) -> Self {
        Self {
            name: name.to_string(),
            passed: defect <= tolerance,
            defect,
            tolerance,
            detail: None,
        }
    }

    pub fn skipped(name: &str, reason: &str) -> Self {
        Self {
            name: name.to_string(),
            passed: true,
            defect: 0.0,
            tolerance: 0.0,
            detail: Some(format!("skipped: {reason}")),
        }
    }

    pub fn failed(name: &str, reason: String) -> Self {
        Self {
            name: name.to_string(),
            passed: false,
            defect: f64::NAN,
            tolerance: 0.0,
            detail: Some(reason),
        }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = Some(detail.into());
        self
    }
}

/// Wall-clock block; the only part of a report that is not reproducible.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct Timing {
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: ProblemConfig,
    pub transfer: TransferMatrix,
    pub coefficients: ScatteringCoefficients,
    /// `|a| > 1/tol`: the transmission amplitude is numerically zero.
    pub degenerate_transmission: bool,
    pub s_matrix: SMatrixMap,
    /// `e^(iπ(l+ν))`, the factor between `Ŝ` and the full `S`.
    pub full_phase: Complex64,
    pub checks: Vec<CheckResult>,
    pub status: Status,
    pub timing: Timing,
}

impl RunReport {
    pub fn failing(&self) -> Vec<&str> {
        self.checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.name.as_str())
            .collect()
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }

    /// Two-column `field,value` table: dotted paths, JSON literals as values,
    /// floats with 17 significant digits.
    pub fn to_csv(&self) -> Result<String, CsvReportError> {
        let value = serde_json::to_value(self)?;
        let mut rows = Vec::new();
        flatten("", &value, &mut rows);
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["field", "value"])?;
        for (k, v) in rows {
            w.write_record([k, v])?;
        }
        let bytes = w.into_inner().map_err(|e| CsvReportError(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| CsvReportError(e.to_string()))
    }

    pub fn from_csv(text: &str) -> Result<Self, CsvReportError> {
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let mut root = Value::Object(Map::new());
        for row in rdr.records() {
            let row = row?;
            let path = row.get(0).unwrap_or_default();
            let literal: Value = serde_json::from_str(row.get(1).unwrap_or_default())?;
            insert(&mut root, path, literal)?;
        }
        Ok(serde_json::from_value(root)?)
    }
}

#[derive(Debug, thiserror::Error)]
#[error("report csv: {0}")]
pub struct CsvReportError(pub String);

impl From<csv::Error> for CsvReportError {
    fn from(e: csv::Error) -> Self {
        CsvReportError(e.to_string())
    }
}

impl From<serde_json::Error> for CsvReportError {
    fn from(e: serde_json::Error) -> Self {
        CsvReportError(e.to_string())
    }
}

pub fn format_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn scalar(v: &Value) -> String {
    match v {
        Value::Number(n) if n.is_f64() => format_f64(n.as_f64().unwrap_or(f64::NAN)),
        other => other.to_string(),
    }
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    let join = |k: &str| {
        if prefix.is_empty() {
            k.to_string()
        } else {
            format!("{prefix}.{k}")
        }
    };
    match v {
        Value::Object(m) if !m.is_empty() => {
            for (k, x) in m {
                flatten(&join(k), x, out);
            }
        }
        Value::Array(a) if !a.is_empty() => {
            for (i, x) in a.iter().enumerate() {
                flatten(&join(&i.to_string()), x, out);
            }
        }
        other => out.push((prefix.to_string(), scalar(other))),
    }
}

/// Rebuilds nested JSON from a dotted path; all-numeric segments are array
/// indices (no report object has numeric keys).
fn insert(root: &mut Value, path: &str, leaf: Value) -> Result<(), CsvReportError> {
    let segments: Vec<&str> = path.split('.').collect();
    let mut node = root;
    for (i, seg) in segments.iter().enumerate() {
        let last = i + 1 == segments.len();
        let next_is_index = segments
            .get(i + 1)
            .is_some_and(|s| s.chars().all(|c| c.is_ascii_digit()));
        let fresh = || {
            if next_is_index {
                Value::Array(Vec::new())
            } else {
                Value::Object(Map::new())
            }
        };
        if let Ok(idx) = seg.parse::<usize>() {
            let arr = node
                .as_array_mut()
                .ok_or_else(|| CsvReportError(format!("{path}: index into non-array")))?;
            if idx > arr.len() {
                return Err(CsvReportError(format!("{path}: indices out of order")));
            }
            if idx == arr.len() {
                arr.push(if last { leaf.clone() } else { fresh() });
            } else if last {
                arr[idx] = leaf.clone();
            }
            node = &mut arr[idx];
        } else {
            let obj = node
                .as_object_mut()
                .ok_or_else(|| CsvReportError(format!("{path}: field of non-object")))?;
            if last {
                obj.insert(seg.to_string(), leaf.clone());
            }
            node = obj.entry(seg.to_string()).or_insert_with(fresh);
        }
    }
    Ok(())
}

/// Plain table written by `sweep` and `reconstruct`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn to_csv(&self) -> Result<String, CsvReportError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        let bytes = w.into_inner().map_err(|e| CsvReportError(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| CsvReportError(e.to_string()))
    }

    /// Column name → column values, for tests and downstream tooling.
    pub fn columns(&self) -> BTreeMap<&str, Vec<&str>> {
        self.header
            .iter()
            .enumerate()
            .map(|(i, h)| (h.as_str(), self.rows.iter().map(|r| r[i].as_str()).collect()))
            .collect()
    }
}
