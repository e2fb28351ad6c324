//! Standalone barcode export for a point cloud stored as CSV.

use std::path::Path;

use mai_core::{build_rips, persistence_z2, Barcode, Interval, PointCloud};
use serde_json::{json, Value};

use crate::error::CliError;
use crate::report::write_atomic;

/// One point per row. A first row that does not parse as numbers is taken
/// as a header; every other row must parse and have the same width.
pub fn read_cloud(text: &str) -> Result<Vec<Vec<f64>>, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut points: Vec<Vec<f64>> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::Input(format!("row {}: {e}", i + 1)))?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        let parsed: Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
        let row = match parsed {
            Ok(row) => row,
            Err(_) if i == 0 => continue,
            Err(e) => return Err(CliError::Input(format!("row {}: {e}", i + 1))),
        };
        if let Some(first) = points.first() {
            if first.len() != row.len() {
                return Err(CliError::Input(format!(
                    "row {}: ragged row with {} columns, expected {}",
                    i + 1,
                    row.len(),
                    first.len()
                )));
            }
        }
        points.push(row);
    }
    if points.is_empty() {
        return Err(CliError::Input("cloud file holds no points".into()));
    }
    Ok(points)
}

fn interval_json(iv: &Interval) -> Value {
    json!({ "birth": iv.birth, "death": iv.death.is_finite().then_some(iv.death) })
}

/// JSON form: intervals per dimension, with each H₁ interval's
/// representative loop as vertex indices into the cloud.
pub fn barcode_json(barcode: &Barcode, points: usize, dim: usize) -> Value {
    let h1: Vec<Value> = barcode
        .h1
        .iter()
        .zip(&barcode.h1_representatives)
        .map(|(iv, rep)| {
            let mut v = interval_json(iv);
            v["representative"] = json!(rep);
            v
        })
        .collect();
    json!({
        "points": points,
        "dimension": dim,
        "max_filtration": barcode.max_filtration,
        "h0": barcode.h0.iter().map(interval_json).collect::<Vec<_>>(),
        "h1": h1,
        "h2_births": barcode.h2_births,
    })
}

pub fn export(cloud_path: &Path, max_filtration: f64, out: &Path) -> Result<Value, CliError> {
    if !(max_filtration.is_finite() && max_filtration >= 0.0) {
        return Err(CliError::Input(format!(
            "max filtration must be finite and >= 0, got {max_filtration}"
        )));
    }
    let text = std::fs::read_to_string(cloud_path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", cloud_path.display())))?;
    let points = read_cloud(&text)?;
    let (n, dim) = (points.len(), points[0].len());
    let cloud = PointCloud::new(points).map_err(|e| CliError::Input(e.to_string()))?;
    let barcode = persistence_z2(&build_rips(&cloud, max_filtration)?)?;
    let value = barcode_json(&barcode, n, dim);
    let mut bytes = serde_json::to_vec_pretty(&value).map_err(|e| CliError::Runtime(e.to_string()))?;
    bytes.push(b'\n');
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    write_atomic(out, &bytes)?;
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_row_is_skipped() {
        assert_eq!(
            read_cloud("x,y\n0,1\n2,3\n").unwrap(),
            vec![vec![0.0, 1.0], vec![2.0, 3.0]]
        );
    }

    #[test]
    fn ragged_and_empty_inputs_are_rejected() {
        assert!(read_cloud("0,1\n2\n").unwrap_err().to_string().contains("ragged"));
        assert!(read_cloud("").is_err());
        assert!(read_cloud("0,1\nx,2\n").is_err());
    }
}
