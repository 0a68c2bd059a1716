//! Config loading, single-experiment runs and report files.
//!
//! Every run writes two kinds of files. Payload files (`<name>.json` and
//! untimed CSV tables) depend only on the config and seed and are
//! byte-identical across re-runs. Timing files (`<name>.timing.json`,
//! `*.timing.csv`) carry wall-clock measurements.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Map, Value};
use traplab_core::SeedStream;

use crate::catalog::{self, Outcome, Table};
use crate::error::RunError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const DEFAULT_OUTPUT_DIR: &str = "traplab-out";

const RESERVED: [&str; 4] = ["experiment", "seed", "output_dir", "params"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub experiment: String,
    pub params: Map<String, Value>,
    pub seed: u64,
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    /// Parses `{"experiment": ..., "seed": ..., "output_dir": ..., ...}`.
    /// Parameters may sit at top level, inside `"params"`, or both (but not
    /// twice).
    pub fn from_json(text: &str) -> Result<Self, RunError> {
        let v: Value = serde_json::from_str(text).map_err(|e| RunError::Config(format!("invalid JSON: {e}")))?;
        let Value::Object(mut obj) = v else {
            return Err(RunError::Config("config must be a JSON object".into()));
        };
        let experiment = match obj.remove("experiment") {
            Some(Value::String(s)) => s,
            Some(_) => return Err(RunError::Config("`experiment` must be a string".into())),
            None => return Err(RunError::Config("missing `experiment`".into())),
        };
        let seed = match obj.remove("seed") {
            None => 0,
            Some(v) => v
                .as_u64()
                .ok_or_else(|| RunError::Config("`seed` must be a non-negative 64-bit integer".into()))?,
        };
        let output_dir = match obj.remove("output_dir") {
            None => PathBuf::from(DEFAULT_OUTPUT_DIR),
            Some(Value::String(s)) => PathBuf::from(s),
            Some(_) => return Err(RunError::Config("`output_dir` must be a string".into())),
        };
        let mut params = match obj.remove("params") {
            None => Map::new(),
            Some(Value::Object(m)) => m,
            Some(_) => return Err(RunError::Config("`params` must be an object".into())),
        };
        for (k, v) in obj {
            debug_assert!(!RESERVED.contains(&k.as_str()));
            if params.insert(k.clone(), v).is_some() {
                return Err(RunError::Config(format!("parameter `{k}` given twice")));
            }
        }
        Ok(Self {
            experiment,
            params,
            seed,
            output_dir,
        })
    }

    pub fn load(path: &Path) -> Result<Self, RunError> {
        let text = fs::read_to_string(path).map_err(|e| RunError::io(path, e))?;
        Self::from_json(&text)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub experiment: String,
    pub claim: String,
    /// Full config with defaults applied.
    pub config: Value,
    pub duration_secs: f64,
    pub payload: Value,
    pub timing: Option<Value>,
    pub artifacts: Vec<PathBuf>,
    pub version: String,
}

/// Seed stream of an experiment: the root seed split by experiment name.
pub fn experiment_seed(root: u64, experiment: &str) -> SeedStream {
    SeedStream::new(root).child(experiment)
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<RunReport, RunError> {
    let exp = catalog::find(&config.experiment)
        .ok_or_else(|| RunError::Config(format!("unknown experiment `{}`", config.experiment)))?;
    let start = Instant::now();
    let (params, outcome) = catalog::execute(exp.name, &config.params, &experiment_seed(config.seed, exp.name))?;
    let duration_secs = start.elapsed().as_secs_f64();
    let echo = json!({
        "experiment": exp.name,
        "seed": config.seed,
        "params": params.as_map(),
    });
    let dir = &config.output_dir;
    let artifacts = write_outcome(dir, dir, exp.name, exp.claim, &echo, &outcome, duration_secs)?;
    Ok(RunReport {
        experiment: exp.name.into(),
        claim: exp.claim.into(),
        config: echo,
        duration_secs,
        payload: outcome.payload,
        timing: outcome.timing,
        artifacts,
        version: VERSION.into(),
    })
}

pub(crate) fn create_dir(dir: &Path) -> Result<(), RunError> {
    fs::create_dir_all(dir).map_err(|e| RunError::io(dir, e))
}

pub(crate) fn write_json(path: &Path, v: &impl Serialize) -> Result<(), RunError> {
    let mut text = serde_json::to_string_pretty(v).map_err(|e| RunError::Experiment(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| RunError::io(path, e))
}

pub(crate) fn write_csv(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<(), RunError> {
    let err = |e: csv::Error| RunError::Io {
        path: path.display().to_string(),
        source: e.into(),
    };
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.write_record(r).map_err(err)?;
    }
    w.flush().map_err(|e| RunError::io(path, e))
}

fn write_table(dir: &Path, prefix: &str, t: &Table) -> Result<PathBuf, RunError> {
    let suffix = if t.timed { ".timing.csv" } else { ".csv" };
    let path = dir.join(format!("{prefix}.{}{suffix}", t.name));
    write_csv(&path, &t.header, &t.rows)?;
    Ok(path)
}

/// Writes the payload files under `payload_dir` and the timing file under
/// `timing_dir`; returns every path written.
pub(crate) fn write_outcome(
    payload_dir: &Path,
    timing_dir: &Path,
    prefix: &str,
    claim: &str,
    config: &Value,
    outcome: &Outcome,
    duration_secs: f64,
) -> Result<Vec<PathBuf>, RunError> {
    create_dir(payload_dir)?;
    create_dir(timing_dir)?;
    let mut written = Vec::new();
    let payload_path = payload_dir.join(format!("{prefix}.json"));
    write_json(
        &payload_path,
        &json!({
            "claim": claim,
            "config": config,
            "payload": outcome.payload,
            "version": VERSION,
        }),
    )?;
    written.push(payload_path);
    for t in &outcome.tables {
        let dir = if t.timed { timing_dir } else { payload_dir };
        written.push(write_table(dir, prefix, t)?);
    }
    let timing_path = timing_dir.join(format!("{prefix}.timing.json"));
    write_json(
        &timing_path,
        &json!({ "duration_secs": duration_secs, "timing": outcome.timing }),
    )?;
    written.push(timing_path);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_and_nested_params_merge() {
        let c = ExperimentConfig::from_json(r#"{"experiment": "crs.mtbf", "eps": 1e-9, "params": {"rate": 1000}}"#).unwrap();
        assert_eq!(c.params.len(), 2);
        assert_eq!(c.seed, 0);
        let dup = ExperimentConfig::from_json(r#"{"experiment": "crs.mtbf", "eps": 1, "params": {"eps": 2}}"#);
        assert!(dup.is_err());
        assert!(ExperimentConfig::from_json(r#"{"seed": 1}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"experiment": "x", "seed": -3}"#).is_err());
    }

    #[test]
    fn mtbf_run_writes_payload_and_timing() {
        let dir = tempfile::tempdir().unwrap();
        let config = ExperimentConfig {
            experiment: "crs.mtbf".into(),
            params: json!({"eps": 1e-9, "rate": 1000}).as_object().unwrap().clone(),
            seed: 7,
            output_dir: dir.path().into(),
        };
        let r = run_experiment(&config).unwrap();
        let days = r.payload["mtbf_days"].as_f64().unwrap();
        assert!((days - 11.574).abs() < 1e-3);
        assert!(dir.path().join("crs.mtbf.json").exists());
        assert!(dir.path().join("crs.mtbf.timing.json").exists());
        assert_eq!(r.config["seed"], 7);
    }
}
