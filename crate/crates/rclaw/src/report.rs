//! Deterministic CSV tables and a JSON manifest per experiment.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::experiments::ExperimentResult;

/// Shortest round-trip float formatting (rustc's float Display); no locale,
/// no platform dependence, so outputs are byte-identical across runs.
fn fmt(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e15 {
        format!("{v:.1}")
    } else {
        format!("{v}")
    }
}

/// Writes one CSV file per table. Returns the written paths.
pub fn write_tables(dir: &Path, result: &ExperimentResult) -> Result<Vec<std::path::PathBuf>> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut paths = Vec::new();
    for table in &result.tables {
        let mut text = table.columns.join(",");
        text.push('\n');
        for row in &table.rows {
            let cells: Vec<String> = row.iter().map(|&v| fmt(v)).collect();
            text.push_str(&cells.join(","));
            text.push('\n');
        }
        let path = dir.join(format!("{}-{}.csv", result.name, table.name));
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        paths.push(path);
    }
    Ok(paths)
}

#[derive(Serialize)]
struct Manifest<'a> {
    result: &'a ExperimentResult,
    config: Option<&'a ExperimentConfig>,
    version: &'a str,
}

/// Writes the JSON manifest (config echo + results + version) so the run
/// can be reproduced.
pub fn write_manifest(
    dir: &Path,
    result: &ExperimentResult,
    config: Option<&ExperimentConfig>,
) -> Result<std::path::PathBuf> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let manifest = Manifest {
        result,
        config,
        version: env!("CARGO_PKG_VERSION"),
    };
    let path = dir.join(format!("{}-manifest.json", result.name));
    let text = serde_json::to_string_pretty(&manifest).context("serializing manifest")?;
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

/// Prints the checks of a result; returns whether all passed.
pub fn print_checks(result: &ExperimentResult) -> bool {
    for c in &result.checks {
        println!(
            "[{}] {}: {}",
            if c.pass { "PASS" } else { "FAIL" },
            c.label,
            c.detail
        );
    }
    result.passed()
}
