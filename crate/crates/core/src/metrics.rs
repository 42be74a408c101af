//! Frame-delay, bitrate and fairness metrics.
//!
//! Metrics are a pure function of the per-frame records, which the event log
//! carries in full, so a persisted log reproduces them exactly.

use std::collections::BTreeMap;
use std::io::Write;

use crate::error::{Error, Result};
use crate::eventlog::{EventKind, LogRecord};
use crate::Micros;

pub const METRICS_HEADER: &str = "flow_id,avg_delay_ms,p95_ms,p999_ms,avg_mbps,jain";
pub const FRAMES_HEADER: &str = "flow_id,frame_id,encode_ms,decode_ms,delay_ms,bytes";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FrameRecord {
    pub flow_id: u32,
    pub frame_id: u64,
    pub encode_us: Micros,
    pub decode_us: Option<Micros>,
    pub bytes: u64,
}

impl FrameRecord {
    pub fn delay_ms(&self) -> Option<f64> {
        self.decode_us.map(|d| (d - self.encode_us) as f64 / 1000.0)
    }
}

/// Nearest-rank percentile of an ascending slice: the value at rank
/// `ceil(p/100 * n)`. `None` for an empty slice.
pub fn percentile_sorted(sorted: &[f64], p: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    // the small slack keeps e.g. 99.9% of 1000 at rank 999 despite rounding
    let rank = ((p / 100.0) * sorted.len() as f64 - 1e-9).ceil() as usize;
    Some(sorted[rank.clamp(1, sorted.len()) - 1])
}

/// `(sum x)^2 / (n * sum x^2)`; 1 for an all-zero list.
pub fn jain_index(xs: &[f64]) -> Result<f64> {
    if xs.is_empty() {
        return Err(Error::Config("jain index of an empty list".into()));
    }
    if xs.iter().any(|&x| x < 0.0 || x.is_nan()) {
        return Err(Error::Config("jain index needs non-negative values".into()));
    }
    let sum: f64 = xs.iter().sum();
    let sq: f64 = xs.iter().map(|x| x * x).sum();
    if sq == 0.0 {
        return Ok(1.0);
    }
    Ok(sum * sum / (xs.len() as f64 * sq))
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Standard deviation over mean; 0 for a constant or empty series.
pub fn coefficient_of_variation(xs: &[f64]) -> f64 {
    let m = mean(xs);
    if xs.is_empty() || m == 0.0 {
        return 0.0;
    }
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64;
    var.sqrt() / m
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlowMetrics {
    pub flow_id: u32,
    pub frames: usize,
    pub delivered: usize,
    pub undelivered: usize,
    pub avg_delay_ms: f64,
    pub p95_ms: f64,
    pub p99_ms: f64,
    pub p999_ms: f64,
    pub max_delay_ms: f64,
    pub avg_mbps: f64,
    pub bitrate_cv: f64,
    /// Delays of delivered frames in encode order.
    pub delays_ms: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunMetrics {
    pub flows: Vec<FlowMetrics>,
    pub jain: f64,
    pub window_us: (Micros, Micros),
}

impl RunMetrics {
    pub fn flow(&self, id: u32) -> Option<&FlowMetrics> {
        self.flows.iter().find(|f| f.flow_id == id)
    }

    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "{METRICS_HEADER}")?;
        for f in &self.flows {
            writeln!(
                w,
                "{},{:.3},{:.3},{:.3},{:.4},{:.6}",
                f.flow_id, f.avg_delay_ms, f.p95_ms, f.p999_ms, f.avg_mbps, self.jain
            )?;
        }
        Ok(())
    }
}

/// Metrics over frames encoded in `[window.0, window.1)`. Every flow in
/// `flow_ids` gets a row, even without frames. Per-frame bitrate is frame
/// bits over the nominal frame interval `fi_us`.
pub fn compute_metrics(frames: &[FrameRecord], flow_ids: &[u32], window: (Micros, Micros), fi_us: Micros) -> RunMetrics {
    let mut by_flow: BTreeMap<u32, Vec<&FrameRecord>> = flow_ids.iter().map(|&id| (id, Vec::new())).collect();
    for f in frames {
        if f.encode_us >= window.0 && f.encode_us < window.1 {
            by_flow.entry(f.flow_id).or_default().push(f);
        }
    }
    let mut flows = Vec::new();
    for (flow_id, mut fs) in by_flow {
        fs.sort_by_key(|f| (f.encode_us, f.frame_id));
        let delays: Vec<f64> = fs.iter().filter_map(|f| f.delay_ms()).collect();
        let mut sorted = delays.clone();
        sorted.sort_by(f64::total_cmp);
        let mbps: Vec<f64> = fs
            .iter()
            .map(|f| f.bytes as f64 * 8.0 / (fi_us as f64 / 1e6) / 1e6)
            .collect();
        let pct = |p| percentile_sorted(&sorted, p).unwrap_or(f64::NAN);
        flows.push(FlowMetrics {
            flow_id,
            frames: fs.len(),
            delivered: delays.len(),
            undelivered: fs.len() - delays.len(),
            avg_delay_ms: mean(&delays),
            p95_ms: pct(95.0),
            p99_ms: pct(99.0),
            p999_ms: pct(99.9),
            max_delay_ms: sorted.last().copied().unwrap_or(f64::NAN),
            avg_mbps: if mbps.is_empty() { 0.0 } else { mean(&mbps) },
            bitrate_cv: coefficient_of_variation(&mbps),
            delays_ms: delays,
        });
    }
    let rates: Vec<f64> = flows.iter().map(|f| f.avg_mbps).collect();
    let jain = if rates.is_empty() { 1.0 } else { jain_index(&rates).unwrap_or(1.0) };
    RunMetrics {
        flows,
        jain,
        window_us: window,
    }
}

fn detail_field<'a>(detail: &'a str, key: &str) -> Option<&'a str> {
    detail
        .split(';')
        .find_map(|kv| kv.split_once('=').filter(|(k, _)| *k == key).map(|(_, v)| v))
}

/// Rebuilds per-frame records from frame encode/decode log records.
pub fn frames_from_log(records: &[LogRecord]) -> Result<Vec<FrameRecord>> {
    let mut frames: BTreeMap<(u32, u64), FrameRecord> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        if !matches!(r.event, EventKind::FrameEncode | EventKind::FrameDecode) {
            continue;
        }
        let bad = |msg: &str| Error::EventLogParse {
            line: i + 2,
            msg: msg.to_string(),
        };
        let flow = r.flow_id.ok_or_else(|| bad("frame record without flow"))?;
        let id: u64 = detail_field(&r.detail, "frame")
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| bad("frame record without frame id"))?;
        match r.event {
            EventKind::FrameEncode => {
                frames.insert(
                    (flow, id),
                    FrameRecord {
                        flow_id: flow,
                        frame_id: id,
                        encode_us: r.time_us,
                        decode_us: None,
                        bytes: r.bytes,
                    },
                );
            }
            _ => {
                let f = frames.get_mut(&(flow, id)).ok_or_else(|| bad("decode before encode"))?;
                f.decode_us = Some(r.time_us);
            }
        }
    }
    Ok(frames.into_values().collect())
}

pub fn write_frames_csv(frames: &[FrameRecord], mut w: impl Write) -> std::io::Result<()> {
    use crate::eventlog::format_ms;
    writeln!(w, "{FRAMES_HEADER}")?;
    for f in frames {
        let (dec, delay) = match f.decode_us {
            Some(d) => (format_ms(d), format_ms(d - f.encode_us)),
            None => (String::new(), String::new()),
        };
        writeln!(
            w,
            "{},{},{},{},{},{}",
            f.flow_id,
            f.frame_id,
            format_ms(f.encode_us),
            dec,
            delay,
            f.bytes
        )?;
    }
    Ok(())
}
