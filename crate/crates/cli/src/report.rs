//! Turning seed outputs into report.json and CSV files.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde_json::{json, Map, Value};

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::experiments::{run_seed, SeedOutput, Table};

/// Writes `bytes` to a temporary file next to `path`, then renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// CSV body with a header row, '\n' line endings and shortest round-trip floats.
pub fn csv_bytes(header: &[&str], rows: &[Vec<String>]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let io = |e: csv::Error| CliError::Runtime(format!("csv: {e}"));
    w.write_record(header).map_err(io)?;
    for row in rows {
        w.write_record(row).map_err(io)?;
    }
    w.into_inner().map_err(|e| CliError::Runtime(format!("csv: {e}")))
}

/// Linear-interpolated quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn aggregate(outputs: &[SeedOutput]) -> Map<String, Value> {
    let mut agg = Map::new();
    for (name, first) in &outputs[0].metrics {
        let values: Vec<_> = outputs.iter().filter_map(|o| o.metric(name)).collect();
        let entry = match first.as_f64() {
            None => {
                let trues = values
                    .iter()
                    .filter(|m| matches!(m, crate::experiments::Metric::Bool(true)))
                    .count();
                json!({ "fraction_true": trues as f64 / values.len() as f64 })
            }
            Some(_) => {
                let mut finite: Vec<f64> = values
                    .iter()
                    .filter_map(|m| m.as_f64())
                    .filter(|x| x.is_finite())
                    .collect();
                if finite.is_empty() {
                    json!({ "median": null, "q1": null, "q3": null, "iqr": null, "finite": 0 })
                } else {
                    finite.sort_by(f64::total_cmp);
                    let (q1, q3) = (quantile(&finite, 0.25), quantile(&finite, 0.75));
                    json!({
                        "median": quantile(&finite, 0.5),
                        "q1": q1,
                        "q3": q3,
                        "iqr": q3 - q1,
                        "finite": finite.len(),
                    })
                }
            }
        };
        agg.insert((*name).to_string(), entry);
    }
    agg
}

fn unix_seconds(t: SystemTime) -> f64 {
    t.duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64())
}

#[derive(Debug)]
pub struct RunSummary {
    pub output_dir: PathBuf,
    pub files: Vec<String>,
    pub outputs: Vec<SeedOutput>,
}

/// Runs all seeds (in parallel), then writes metrics.csv, any per-kind tables
/// and report.json into `out_dir`. Everything outside the report's
/// `metadata` block is a pure function of the config.
pub fn run_experiment(config: &ExperimentConfig, out_dir: &Path) -> Result<RunSummary, CliError> {
    let started = SystemTime::now();
    let clock = Instant::now();
    let outputs: Vec<SeedOutput> = config
        .seeds
        .par_iter()
        .map(|&s| run_seed(config, s))
        .collect::<Result<Vec<_>, _>>()?;
    std::fs::create_dir_all(out_dir)?;

    let mut files = Vec::new();
    let names: Vec<&str> = outputs[0].metrics.iter().map(|(n, _)| *n).collect();
    let mut header = vec!["seed"];
    header.extend(&names);
    let rows: Vec<Vec<String>> = outputs
        .iter()
        .map(|o| {
            std::iter::once(o.seed.to_string())
                .chain(o.metrics.iter().map(|(_, m)| m.to_csv()))
                .collect()
        })
        .collect();
    write_atomic(&out_dir.join("metrics.csv"), &csv_bytes(&header, &rows)?)?;
    files.push("metrics.csv".to_string());

    let mut tables: BTreeMap<&str, Table> = BTreeMap::new();
    for table in outputs.iter().flat_map(|o| &o.tables) {
        tables
            .entry(table.file)
            .and_modify(|t| t.rows.extend(table.rows.iter().cloned()))
            .or_insert_with(|| table.clone());
    }
    for table in tables.values() {
        write_atomic(&out_dir.join(table.file), &csv_bytes(table.header, &table.rows)?)?;
        files.push(table.file.to_string());
    }

    let seeds: Vec<Value> = outputs
        .iter()
        .map(|o| {
            let mut metrics: Map<String, Value> =
                o.metrics.iter().map(|(n, m)| ((*n).to_string(), m.to_json())).collect();
            metrics.extend(o.extra.clone());
            json!({ "seed": o.seed, "metrics": metrics })
        })
        .collect();
    let report = json!({
        "version": env!("CARGO_PKG_VERSION"),
        "experiment": config.experiment.name(),
        "config_hash": config.hash(),
        "config": config,
        "metric_columns": names,
        "seeds": seeds,
        "aggregate": aggregate(&outputs),
        "files": files,
        "metadata": {
            "started_unix": unix_seconds(started),
            "finished_unix": unix_seconds(SystemTime::now()),
            "wall_clock_seconds": clock.elapsed().as_secs_f64(),
        },
    });
    let mut text = serde_json::to_vec_pretty(&report).map_err(|e| CliError::Runtime(e.to_string()))?;
    text.push(b'\n');
    write_atomic(&out_dir.join("report.json"), &text)?;
    files.push("report.json".to_string());
    Ok(RunSummary {
        output_dir: out_dir.to_path_buf(),
        files,
        outputs,
    })
}
