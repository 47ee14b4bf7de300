//! Field format conversion.

use std::path::Path;

use morphic_core::ScalarField;
use serde::Serialize;

use crate::error::CliError;

#[derive(Debug, Serialize)]
pub struct FieldJson<'a> {
    pub name: &'a str,
    pub origin: Vec<f64>,
    pub spacing: Vec<f64>,
    pub shape: Vec<usize>,
    /// Row-major, last axis fastest.
    pub values: &'a [f64],
}

/// Reads a field CSV (with its sidecar) and renders it as JSON.
pub fn field_to_json(csv: &Path) -> Result<String, CliError> {
    let f = ScalarField::read_csv(csv)?;
    let axes = f.grid().axes();
    let doc = FieldJson {
        name: f.name(),
        origin: axes.iter().map(|a| a.origin).collect(),
        spacing: axes.iter().map(|a| a.spacing).collect(),
        shape: f.grid().shape(),
        values: f.values(),
    };
    let mut s = serde_json::to_string_pretty(&doc).map_err(|e| CliError::Io(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use morphic_core::{Axis, Grid};

    #[test]
    fn round_trips_values() {
        let dir = tempfile::tempdir().unwrap();
        let g = Grid::plane(Axis::new(0.0, 0.5, 6).unwrap(), Axis::new(-1.0, 0.25, 5).unwrap()).unwrap();
        let f = ScalarField::from_fn(&g, "phi", |p| p[0] + 10.0 * p[1]);
        let path = dir.path().join("phi.csv");
        f.write_csv(&path).unwrap();
        let v: serde_json::Value = serde_json::from_str(&field_to_json(&path).unwrap()).unwrap();
        assert_eq!(v["name"], "phi");
        assert_eq!(v["shape"], serde_json::json!([6, 5]));
        let values: Vec<f64> = serde_json::from_value(v["values"].clone()).unwrap();
        assert_eq!(values, f.values());
        assert!(matches!(field_to_json(&dir.path().join("absent.csv")), Err(CliError::Io(_))));
    }
}
