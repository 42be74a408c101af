//! Running scenarios and persisting their results.
//!
//! A run directory holds `metrics.csv`, `frames.csv`, `events.csv` and
//! `run.toml`; the last records what `report` needs to recompute the metrics
//! from the event log alone.

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eventlog::{EventLog, LogLevel};
use crate::metrics::{compute_metrics, frames_from_log, write_frames_csv, RunMetrics};
use crate::scenario::Scenario;
use crate::sim::{SimResult, SimWorld};

pub const METRICS_FILE: &str = "metrics.csv";
pub const FRAMES_FILE: &str = "frames.csv";
pub const EVENTS_FILE: &str = "events.csv";
pub const RUN_INFO_FILE: &str = "run.toml";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunInfo {
    pub seed: u64,
    pub flow_ids: Vec<u32>,
    pub window_start_us: u64,
    pub window_end_us: u64,
    pub frame_interval_us: u64,
}

pub fn run_scenario(scn: &Scenario) -> Result<SimResult> {
    let mut cfg = scn.sim_config()?;
    if cfg.log_level == LogLevel::Off {
        cfg.log_level = LogLevel::Frames;
    }
    Ok(SimWorld::new(cfg)?.run())
}

fn run_info(scn: &Scenario, result: &SimResult) -> RunInfo {
    RunInfo {
        seed: scn.seed,
        flow_ids: result.metrics.flows.iter().map(|f| f.flow_id).collect(),
        window_start_us: result.metrics.window_us.0,
        window_end_us: result.metrics.window_us.1,
        frame_interval_us: crate::sender::FRAME_INTERVAL_US,
    }
}

fn create(path: &Path) -> Result<fs::File> {
    fs::File::create(path).map_err(|e| Error::io(path, e))
}

pub fn write_metrics(metrics: &RunMetrics, dir: &Path) -> Result<()> {
    let p = dir.join(METRICS_FILE);
    metrics.write_csv(create(&p)?).map_err(|e| Error::io(&p, e))
}

pub fn write_outputs(scn: &Scenario, result: &SimResult, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_metrics(&result.metrics, dir)?;
    let p = dir.join(FRAMES_FILE);
    write_frames_csv(&result.frames, std::io::BufWriter::new(create(&p)?)).map_err(|e| Error::io(&p, e))?;
    let p = dir.join(EVENTS_FILE);
    result
        .log
        .write_to(std::io::BufWriter::new(create(&p)?))
        .map_err(|e| Error::io(&p, e))?;
    let p = dir.join(RUN_INFO_FILE);
    let info = toml::to_string(&run_info(scn, result)).map_err(|e| Error::Config(e.to_string()))?;
    fs::write(&p, info).map_err(|e| Error::io(&p, e))
}

/// Recomputes metrics of a run directory from its event log.
pub fn report_dir(dir: &Path) -> Result<RunMetrics> {
    let p = dir.join(RUN_INFO_FILE);
    let text = fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
    let info: RunInfo = toml::from_str(&text)?;
    let p = dir.join(EVENTS_FILE);
    let f = fs::File::open(&p).map_err(|e| Error::io(&p, e))?;
    let records = EventLog::read_from(BufReader::new(f))?;
    let frames = frames_from_log(&records)?;
    Ok(compute_metrics(
        &frames,
        &info.flow_ids,
        (info.window_start_us, info.window_end_us),
        info.frame_interval_us,
    ))
}

/// Run directories at or directly below `dir`.
pub fn find_run_dirs(dir: &Path) -> Result<Vec<PathBuf>> {
    if dir.join(RUN_INFO_FILE).is_file() {
        return Ok(vec![dir.to_path_buf()]);
    }
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let p = entry.path();
        if p.join(RUN_INFO_FILE).is_file() {
            out.push(p);
        }
    }
    out.sort();
    Ok(out)
}

/// One variant of a sweep.
#[derive(Debug)]
pub struct SweepRun {
    pub key: String,
    pub value: String,
    pub scenario: Scenario,
    pub result: SimResult,
}

/// Runs the scenario once per value of `key`, in parallel. Each run owns
/// its world, so results do not depend on scheduling.
pub fn sweep(base: &Scenario, key: &str, values: &[String]) -> Result<Vec<SweepRun>> {
    let variants: Vec<(String, Scenario)> = values
        .iter()
        .map(|v| {
            let mut s = base.clone();
            s.apply_override(key, v)?;
            Ok((v.clone(), s))
        })
        .collect::<Result<_>>()?;
    variants
        .into_par_iter()
        .map(|(value, scenario)| {
            let result = run_scenario(&scenario)?;
            Ok(SweepRun {
                key: key.to_string(),
                value,
                scenario,
                result,
            })
        })
        .collect()
}

/// Parses `key=v1,v2,...`.
pub fn parse_vary(spec: &str) -> Result<(String, Vec<String>)> {
    let (k, vs) = spec
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("--vary expects key=v1,v2,..., got `{spec}`")))?;
    let values: Vec<String> = vs
        .split(',')
        .map(|v| v.trim().to_string())
        .filter(|v| !v.is_empty())
        .collect();
    if k.trim().is_empty() || values.is_empty() {
        return Err(Error::Config(format!("--vary expects key=v1,v2,..., got `{spec}`")));
    }
    Ok((k.trim().to_string(), values))
}
