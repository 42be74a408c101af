//! Capacity traces: the CSV format and synthetic generators.
//!
//! A trace file is a CSV with header `tti_index,bytes_per_prb`. Rows give the
//! per-PRB block size of a full downlink slot from that TTI on; indices must
//! strictly increase.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ran::CapacityTrace;

pub fn load_trace(path: impl AsRef<Path>) -> Result<CapacityTrace> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::TraceParse {
        path: path.to_path_buf(),
        line: 0,
        msg: e.to_string(),
    })?;
    parse_trace(&text, path)
}

pub fn parse_trace(text: &str, path: &Path) -> Result<CapacityTrace> {
    let err = |line: usize, msg: String| Error::TraceParse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = rdr.headers().map_err(|e| err(1, e.to_string()))?.clone();
    if headers.is_empty() || headers.len() == 1 && headers[0].is_empty() {
        return Err(Error::EmptyTrace(path.to_path_buf()));
    }
    if headers.len() != 2 || &headers[0] != "tti_index" || &headers[1] != "bytes_per_prb" {
        return Err(err(1, "expected header `tti_index,bytes_per_prb`".into()));
    }
    let mut points: Vec<(u64, u32)> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            err(line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != 2 {
            return Err(err(line, format!("expected 2 fields, got {}", rec.len())));
        }
        let tti: u64 = rec[0]
            .parse()
            .map_err(|_| err(line, format!("bad tti_index `{}`", &rec[0])))?;
        let bpp: u32 = rec[1]
            .parse()
            .map_err(|_| err(line, format!("bad bytes_per_prb `{}`", &rec[1])))?;
        if let Some(&(prev, _)) = points.last() {
            if tti <= prev {
                return Err(err(line, format!("tti_index {tti} not greater than {prev}")));
            }
        }
        points.push((tti, bpp));
    }
    if points.is_empty() {
        return Err(Error::EmptyTrace(path.to_path_buf()));
    }
    CapacityTrace::from_points(points)
}

pub fn write_trace(trace: &CapacityTrace, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("tti_index,bytes_per_prb\n");
    for (t, b) in trace.points() {
        out.push_str(&format!("{t},{b}\n"));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Generated capacity patterns, in bytes per PRB.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SyntheticTrace {
    Constant {
        bytes_per_prb: u32,
    },
    Step {
        before: u32,
        after: u32,
        at_s: f64,
    },
    Square {
        high: u32,
        low: u32,
        period_s: f64,
    },
    /// Bounded random walk: every `interval_ms` the value moves by a uniform
    /// step in `[-max_step, max_step]`, clamped to `[min, max]`.
    RandomWalk {
        start: u32,
        min: u32,
        max: u32,
        max_step: u32,
        interval_ms: f64,
        #[serde(default)]
        seed: u64,
    },
}

impl SyntheticTrace {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("synthetic trace: {m}")));
        match *self {
            SyntheticTrace::Step { at_s, .. } if !(at_s >= 0.0) => bad("at_s must be >= 0"),
            SyntheticTrace::Square { period_s, .. } if !(period_s > 0.0) => bad("period_s must be > 0"),
            SyntheticTrace::RandomWalk {
                start,
                min,
                max,
                interval_ms,
                ..
            } => {
                if min > max || start < min || start > max {
                    bad("random walk needs min <= start <= max")
                } else if !(interval_ms > 0.0) {
                    bad("interval_ms must be > 0")
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    /// Materializes the pattern over `duration_s` at the given TTI length.
    pub fn build(&self, tti_len_ms: f64, duration_s: f64) -> Result<CapacityTrace> {
        self.validate()?;
        let ttis = |ms: f64| (ms / tti_len_ms).round() as u64;
        let end = ttis(duration_s * 1000.0).max(1);
        let points = match *self {
            SyntheticTrace::Constant { bytes_per_prb } => vec![(0, bytes_per_prb)],
            SyntheticTrace::Step { before, after, at_s } => {
                let at = ttis(at_s * 1000.0);
                if at == 0 {
                    vec![(0, after)]
                } else {
                    vec![(0, before), (at, after)]
                }
            }
            SyntheticTrace::Square { high, low, period_s } => {
                let half = ttis(period_s * 500.0).max(1);
                (0..end.div_ceil(half))
                    .map(|k| (k * half, if k % 2 == 0 { high } else { low }))
                    .collect()
            }
            SyntheticTrace::RandomWalk {
                start,
                min,
                max,
                max_step,
                interval_ms,
                seed,
            } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let every = ttis(interval_ms).max(1);
                let mut v = start as i64;
                let mut pts = Vec::new();
                let mut t = 0;
                while t < end {
                    pts.push((t, v as u32));
                    let step = rng.gen_range(-(max_step as i64)..=max_step as i64);
                    v = (v + step).clamp(min as i64, max as i64);
                    t += every;
                }
                pts
            }
        };
        CapacityTrace::from_points(points)
    }
}
