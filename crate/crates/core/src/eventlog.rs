//! Line-delimited event log: `time_ms,event,flow_id,bytes,detail`.
//!
//! Times are written with exactly three decimals so the microsecond clock
//! survives a round trip through the file.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Micros;

pub const HEADER: &str = "time_ms,event,flow_id,bytes,detail";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LogLevel {
    Off,
    /// Frame encode and decode records, enough to recompute metrics.
    #[default]
    Frames,
    /// Adds packets, deliveries, ACKs, block failures and per-TTI predictions.
    Full,
}

impl FromStr for LogLevel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "off" => Ok(LogLevel::Off),
            "frames" => Ok(LogLevel::Frames),
            "full" => Ok(LogLevel::Full),
            other => Err(Error::Config(format!("unknown log level `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EventKind {
    FrameEncode,
    FrameDecode,
    PacketEnqueue,
    Delivery,
    BlockFail,
    AckSend,
    AckArrive,
    Prediction,
    FlowStart,
    FlowStop,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::FrameEncode => "frame_encode",
            EventKind::FrameDecode => "frame_decode",
            EventKind::PacketEnqueue => "enqueue",
            EventKind::Delivery => "deliver",
            EventKind::BlockFail => "block_fail",
            EventKind::AckSend => "ack_send",
            EventKind::AckArrive => "ack_arrive",
            EventKind::Prediction => "predict",
            EventKind::FlowStart => "flow_start",
            EventKind::FlowStop => "flow_stop",
        }
    }

    fn level(self) -> LogLevel {
        match self {
            EventKind::FrameEncode | EventKind::FrameDecode | EventKind::FlowStart | EventKind::FlowStop => {
                LogLevel::Frames
            }
            _ => LogLevel::Full,
        }
    }
}

impl FromStr for EventKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Ok(match s {
            "frame_encode" => EventKind::FrameEncode,
            "frame_decode" => EventKind::FrameDecode,
            "enqueue" => EventKind::PacketEnqueue,
            "deliver" => EventKind::Delivery,
            "block_fail" => EventKind::BlockFail,
            "ack_send" => EventKind::AckSend,
            "ack_arrive" => EventKind::AckArrive,
            "predict" => EventKind::Prediction,
            "flow_start" => EventKind::FlowStart,
            "flow_stop" => EventKind::FlowStop,
            other => return Err(format!("unknown event `{other}`")),
        })
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LogRecord {
    pub time_us: Micros,
    pub event: EventKind,
    pub flow_id: Option<u32>,
    pub bytes: u64,
    pub detail: String,
}

pub fn format_ms(us: Micros) -> String {
    format!("{}.{:03}", us / 1000, us % 1000)
}

fn parse_ms(s: &str) -> std::result::Result<Micros, String> {
    let (whole, frac) = s.split_once('.').unwrap_or((s, "0"));
    if frac.len() > 3 || frac.is_empty() {
        return Err(format!("bad time `{s}`"));
    }
    let whole: u64 = whole.parse().map_err(|_| format!("bad time `{s}`"))?;
    let f: u64 = frac.parse().map_err(|_| format!("bad time `{s}`"))?;
    Ok(whole * 1000 + f * 10u64.pow(3 - frac.len() as u32))
}

impl fmt::Display for LogRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let flow = self.flow_id.map(|id| id.to_string()).unwrap_or_default();
        write!(
            f,
            "{},{},{},{},{}",
            format_ms(self.time_us),
            self.event,
            flow,
            self.bytes,
            self.detail
        )
    }
}

impl FromStr for LogRecord {
    type Err = String;

    fn from_str(line: &str) -> std::result::Result<Self, String> {
        let mut it = line.splitn(5, ',');
        let mut next = |name: &str| it.next().ok_or_else(|| format!("missing {name}"));
        let time_us = parse_ms(next("time_ms")?)?;
        let event = next("event")?.parse()?;
        let flow = next("flow_id")?;
        let flow_id = if flow.is_empty() {
            None
        } else {
            Some(flow.parse().map_err(|_| format!("bad flow_id `{flow}`"))?)
        };
        let b = next("bytes")?;
        let bytes = b.parse().map_err(|_| format!("bad bytes `{b}`"))?;
        let detail = next("detail")?.to_string();
        Ok(LogRecord {
            time_us,
            event,
            flow_id,
            bytes,
            detail,
        })
    }
}

/// In-memory event log filtered by level.
#[derive(Clone, Debug, Default)]
pub struct EventLog {
    level: LogLevel,
    records: Vec<LogRecord>,
}

impl EventLog {
    pub fn new(level: LogLevel) -> Self {
        EventLog {
            level,
            records: Vec::new(),
        }
    }

    pub fn level(&self) -> LogLevel {
        self.level
    }

    pub fn enabled(&self, event: EventKind) -> bool {
        self.level != LogLevel::Off && event.level() <= self.level
    }

    pub fn push(&mut self, time_us: Micros, event: EventKind, flow_id: Option<u32>, bytes: u64, detail: impl Into<String>) {
        if self.enabled(event) {
            self.records.push(LogRecord {
                time_us,
                event,
                flow_id,
                bytes,
                detail: detail.into(),
            });
        }
    }

    pub fn records(&self) -> &[LogRecord] {
        &self.records
    }

    pub fn write_to(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "{HEADER}")?;
        for r in &self.records {
            writeln!(w, "{r}")?;
        }
        Ok(())
    }

    pub fn read_from(r: impl BufRead) -> Result<Vec<LogRecord>> {
        let mut out = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line.map_err(|e| Error::EventLogParse {
                line: i + 1,
                msg: e.to_string(),
            })?;
            if i == 0 {
                if line.trim() != HEADER {
                    return Err(Error::EventLogParse {
                        line: 1,
                        msg: "missing header".into(),
                    });
                }
                continue;
            }
            if line.is_empty() {
                continue;
            }
            out.push(line.parse().map_err(|msg| Error::EventLogParse { line: i + 1, msg })?);
        }
        Ok(out)
    }
}
