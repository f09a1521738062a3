//! `fracap plot-data`: long-format CSVs merged across run directories.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde_json::{json, Value};

use crate::config::Experiment;

const SCHEMA: &str = "# columns: run = run directory; experiment; n, s = run parameters; table = source CSV stem; row = 0-based row in the source table; variable = source column; value = source cell";

struct Run {
    name: String,
    dir: PathBuf,
    experiment: Experiment,
    n: u64,
    s: f64,
    summary: Value,
}

fn expected_layout(dir: &Path) -> String {
    let lists: Vec<String> = Experiment::ALL.iter().map(|e| format!("{}: {}", e.name(), e.tables().iter().map(|t| format!("{t}.csv")).collect::<Vec<_>>().join(", "))).collect();
    format!(
        "expected {0}/manifest.json or {0}/<run>/manifest.json, each next to summary.json and the experiment CSVs ({1})",
        dir.display(),
        lists.join("; ")
    )
}

fn read_run(name: String, dir: &Path) -> Result<Run> {
    let manifest: Value = serde_json::from_str(&fs::read_to_string(dir.join("manifest.json"))?).with_context(|| format!("parsing {}/manifest.json", dir.display()))?;
    let config = manifest.get("config").ok_or_else(|| anyhow!("{}/manifest.json has no `config`", dir.display()))?;
    let experiment = config
        .get("experiment")
        .and_then(Value::as_str)
        .and_then(Experiment::from_name)
        .ok_or_else(|| anyhow!("{}/manifest.json names no known experiment", dir.display()))?;
    let n = config.get("n").and_then(Value::as_u64).ok_or_else(|| anyhow!("{}/manifest.json has no `config.n`", dir.display()))?;
    let s = config.get("s").and_then(Value::as_f64).ok_or_else(|| anyhow!("{}/manifest.json has no `config.s`", dir.display()))?;
    let mut missing: Vec<String> = experiment.tables().iter().map(|t| format!("{t}.csv")).chain(["summary.json".to_string()]).filter(|f| !dir.join(f).is_file()).collect();
    if !missing.is_empty() {
        missing.sort();
        bail!("run {} ({}) is missing {}", dir.display(), experiment.name(), missing.join(", "));
    }
    let summary: Value = serde_json::from_str(&fs::read_to_string(dir.join("summary.json"))?).with_context(|| format!("parsing {}/summary.json", dir.display()))?;
    Ok(Run { name, dir: dir.to_path_buf(), experiment, n, s, summary })
}

fn discover(results: &Path) -> Result<Vec<Run>> {
    if !results.is_dir() {
        bail!("{} is not a directory; {}", results.display(), expected_layout(results));
    }
    let mut runs = Vec::new();
    if results.join("manifest.json").is_file() {
        let name = results.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| ".".into());
        runs.push(read_run(name, results)?);
    }
    let mut subdirs: Vec<PathBuf> = fs::read_dir(results)?.filter_map(|e| e.ok().map(|e| e.path())).filter(|p| p.join("manifest.json").is_file()).collect();
    subdirs.sort();
    for dir in subdirs {
        let name = dir.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        runs.push(read_run(name, &dir)?);
    }
    if runs.is_empty() {
        bail!("no runs found in {}; {}", results.display(), expected_layout(results));
    }
    Ok(runs)
}

/// Splits a line written by `Table::to_csv`; cells never contain commas.
fn cells(line: &str) -> Vec<&str> {
    line.split(',').collect()
}

/// Whether the `value` column of a capacity sweep never increases by more
/// than `tol` relative.
pub fn sweep_is_monotone(csv: &str, tol: f64) -> Result<bool> {
    let mut lines = csv.lines();
    let header = cells(lines.next().ok_or_else(|| anyhow!("empty sweep table"))?);
    let col = header.iter().position(|c| *c == "value").ok_or_else(|| anyhow!("sweep table has no `value` column"))?;
    let mut previous: Option<f64> = None;
    for line in lines {
        let v: f64 = cells(line).get(col).ok_or_else(|| anyhow!("short sweep row"))?.parse()?;
        if previous.is_some_and(|p| v > p + tol * (1.0 + p.abs())) {
            return Ok(false);
        }
        previous = Some(v);
    }
    Ok(true)
}

/// Writes `plot_<experiment>.csv` per experiment present and
/// `plot_summary.json`; returns the written paths.
pub fn plot_data(results: &Path, out: &Path) -> Result<Vec<PathBuf>> {
    let runs = discover(results)?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut by_experiment: BTreeMap<&str, Vec<&Run>> = BTreeMap::new();
    for run in &runs {
        by_experiment.entry(run.experiment.name()).or_default().push(run);
    }
    let mut written = Vec::new();
    let mut summary = serde_json::Map::new();
    for (name, group) in &by_experiment {
        let mut text = format!("{SCHEMA}\nrun,experiment,n,s,table,row,variable,value\n");
        let mut entries = Vec::new();
        for run in group {
            let s = format!("{:.16e}", run.s);
            for table in run.experiment.tables() {
                let csv = fs::read_to_string(run.dir.join(format!("{table}.csv")))?;
                let mut lines = csv.lines();
                let header = cells(lines.next().unwrap_or_default());
                for (row, line) in lines.enumerate() {
                    for (variable, value) in header.iter().zip(cells(line)) {
                        text.push_str(&format!("{},{name},{},{s},{table},{row},{variable},{value}\n", run.name, run.n));
                    }
                }
            }
            let mut entry = json!({
                "run": run.name,
                "n": run.n,
                "s": run.s,
                "status": run.summary.get("status").cloned().unwrap_or(Value::Null),
                "checks": run.summary.get("checks").cloned().unwrap_or(Value::Null),
            });
            if run.experiment == Experiment::CapacitySweep {
                let csv = fs::read_to_string(run.dir.join("sweep.csv"))?;
                entry["monotone"] = Value::Bool(sweep_is_monotone(&csv, 1e-9)?);
            }
            entries.push(entry);
        }
        let path = out.join(format!("plot_{name}.csv"));
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        written.push(path);
        summary.insert(name.to_string(), Value::Array(entries));
    }
    let path = out.join("plot_summary.json");
    fs::write(&path, serde_json::to_string_pretty(&Value::Object(summary))? + "\n").with_context(|| format!("writing {}", path.display()))?;
    written.push(path);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn monotone_detection() {
        assert!(sweep_is_monotone("k,value\n1,1.0\n2,1.0\n3,0.5\n", 1e-9).unwrap());
        assert!(!sweep_is_monotone("k,value\n1,0.9\n2,1.0\n", 1e-9).unwrap());
        assert!(sweep_is_monotone("k,value\n", 1e-9).unwrap());
    }

    #[test]
    fn empty_directory_lists_expected_files() {
        let dir = tempfile::tempdir().unwrap();
        let err = plot_data(dir.path(), dir.path()).unwrap_err().to_string();
        assert!(err.contains("manifest.json") && err.contains("sweep.csv"), "{err}");
    }
}
