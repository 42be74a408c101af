//! Scenario files (TOML) and their translation into a simulator config.
//!
//! ```toml
//! duration_s = 30
//! seed = 7
//!
//! [ran]
//! prb_total = 106
//! tdd_pattern = "DDDSU"
//! bler = 0.1
//!
//! [trace]
//! kind = "square"
//! high = 30
//! low = 15
//! period_s = 2.0
//!
//! [[flows]]
//! controller = "choir"
//! wired_nd_ms = 10
//! replicas = 4
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::baselines::Controller;
use crate::error::{Error, Result};
use crate::eventlog::LogLevel;
use crate::predictor::DEFAULT_ETA;
use crate::ran::{CapacityTrace, RanConfig, TddPattern};
use crate::sender::{EncoderMode, SenderConfig, DEFAULT_INITIAL_BITRATE, DEFAULT_MIN_BITRATE, DEFAULT_RHO};
use crate::sim::{FlowSpec, SimConfig};
use crate::trace::{load_trace, SyntheticTrace};
use crate::ms_to_us;

fn default_duration() -> f64 {
    30.0
}
fn default_warmup() -> f64 {
    2.0
}
fn default_one() -> u32 {
    1
}
fn default_wired() -> f64 {
    1.0
}
fn default_controller() -> String {
    "choir".into()
}
fn default_eta() -> f64 {
    DEFAULT_ETA
}
fn default_rho() -> f64 {
    DEFAULT_RHO
}
fn default_initial() -> f64 {
    DEFAULT_INITIAL_BITRATE / 1e6
}
fn default_min() -> f64 {
    DEFAULT_MIN_BITRATE / 1e6
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RanSection {
    pub prb_total: u32,
    pub tti_ms: f64,
    pub tdd_pattern: TddPattern,
    pub bler: f64,
    pub harq_rtx_delay_ms: f64,
    pub harq_rtx_delay_subsequent_ms: f64,
    pub harq_max_rtx: u32,
    pub tb_header_bytes: u32,
    pub segment_header_bytes: u32,
    pub control_slot_every: Option<u32>,
    /// Constant capacity used when neither a trace file nor a synthetic
    /// trace is given.
    pub bytes_per_prb: u32,
}

impl Default for RanSection {
    fn default() -> Self {
        let r = RanConfig::default();
        RanSection {
            prb_total: r.prb_total,
            tti_ms: r.tti_len_ms,
            tdd_pattern: r.tdd_pattern,
            bler: r.bler,
            harq_rtx_delay_ms: r.harq_rtx_delay_ms,
            harq_rtx_delay_subsequent_ms: r.harq_rtx_delay_subsequent_ms,
            harq_max_rtx: r.harq_max_rtx,
            tb_header_bytes: r.tb_header_bytes,
            segment_header_bytes: r.segment_header_bytes,
            control_slot_every: r.control_slot_every,
            bytes_per_prb: r.capacity.at(0),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowSection {
    #[serde(default = "default_controller")]
    pub controller: String,
    #[serde(default = "default_wired")]
    pub wired_nd_ms: f64,
    #[serde(default = "default_one")]
    pub ack_per_frames: u32,
    #[serde(default = "default_one")]
    pub epsilon: u32,
    #[serde(default)]
    pub start_s: f64,
    #[serde(default)]
    pub stop_s: Option<f64>,
    #[serde(default)]
    pub encoder: EncoderMode,
    #[serde(default = "default_one")]
    pub replicas: u32,
    #[serde(default)]
    pub phase_ms: Option<f64>,
    #[serde(default = "default_eta")]
    pub eta: f64,
    #[serde(default = "default_rho")]
    pub rho: f64,
    #[serde(default = "default_initial")]
    pub initial_mbps: f64,
    #[serde(default = "default_min")]
    pub min_mbps: f64,
}

impl Default for FlowSection {
    fn default() -> Self {
        toml::from_str("").expect("all fields defaulted")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default = "default_duration")]
    pub duration_s: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_warmup")]
    pub warmup_s: f64,
    #[serde(default)]
    pub log_level: LogLevel,
    #[serde(default)]
    pub ran: RanSection,
    #[serde(default)]
    pub trace_path: Option<PathBuf>,
    #[serde(default)]
    pub trace: Option<SyntheticTrace>,
    #[serde(default)]
    pub flows: Vec<FlowSection>,
}

/// Keys accepted by [`Scenario::apply_override`].
pub const OVERRIDE_KEYS: &[&str] = &[
    "wired_nd",
    "ack_per_frames",
    "epsilon",
    "bler",
    "replicas",
    "seed",
    "duration",
    "encoder",
    "controller",
];

impl Scenario {
    pub fn parse(text: &str) -> Result<Self> {
        let s: Scenario = toml::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    /// Reads a scenario; a relative `trace_path` is resolved against the
    /// scenario's directory.
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut s = Scenario::parse(&text)?;
        if let Some(tp) = &s.trace_path {
            if tp.is_relative() {
                let base = path.parent().unwrap_or_else(|| Path::new("."));
                s.trace_path = Some(base.join(tp));
            }
        }
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration_s > 0.0) {
            return Err(Error::Config("duration_s must be positive".into()));
        }
        if !(self.warmup_s >= 0.0 && self.warmup_s < self.duration_s) {
            return Err(Error::Config("warmup_s must be in [0, duration_s)".into()));
        }
        if self.flows.is_empty() {
            return Err(Error::NoFlows);
        }
        if self.trace_path.is_some() && self.trace.is_some() {
            return Err(Error::Config("give either trace_path or [trace], not both".into()));
        }
        for f in &self.flows {
            f.controller.parse::<Controller>()?;
            if f.replicas == 0 {
                return Err(Error::Config("replicas must be >= 1".into()));
            }
            if !(f.initial_mbps >= 0.0 && f.min_mbps >= 0.0) {
                return Err(Error::Config("bitrates must be >= 0".into()));
            }
        }
        if let Some(t) = &self.trace {
            t.validate()?;
        }
        Ok(())
    }

    pub fn flow_count(&self) -> usize {
        self.flows.iter().map(|f| f.replicas as usize).sum()
    }

    fn capacity(&self) -> Result<CapacityTrace> {
        if let Some(p) = &self.trace_path {
            return load_trace(p);
        }
        if let Some(t) = &self.trace {
            return t.build(self.ran.tti_ms, self.duration_s);
        }
        Ok(CapacityTrace::constant(self.ran.bytes_per_prb))
    }

    pub fn ran_config(&self) -> Result<RanConfig> {
        let r = &self.ran;
        let cfg = RanConfig {
            prb_total: r.prb_total,
            tti_len_ms: r.tti_ms,
            tdd_pattern: r.tdd_pattern.clone(),
            bler: r.bler,
            harq_rtx_delay_ms: r.harq_rtx_delay_ms,
            harq_rtx_delay_subsequent_ms: r.harq_rtx_delay_subsequent_ms,
            harq_max_rtx: r.harq_max_rtx,
            tb_header_bytes: r.tb_header_bytes,
            segment_header_bytes: r.segment_header_bytes,
            control_slot_every: r.control_slot_every,
            capacity: self.capacity()?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn sim_config(&self) -> Result<SimConfig> {
        self.validate()?;
        let mut flows = Vec::new();
        for f in &self.flows {
            let controller: Controller = f.controller.parse()?;
            for _ in 0..f.replicas {
                flows.push(FlowSpec {
                    controller,
                    wired_nd_ms: f.wired_nd_ms,
                    ack_per_frames: f.ack_per_frames,
                    sender: SenderConfig {
                        epsilon: f.epsilon,
                        rho: f.rho,
                        initial_bitrate: f.initial_mbps * 1e6,
                        min_bitrate: f.min_mbps * 1e6,
                        encoder: f.encoder,
                        ..SenderConfig::default()
                    },
                    start_us: ms_to_us(f.start_s * 1000.0),
                    stop_us: f.stop_s.map(|s| ms_to_us(s * 1000.0)),
                    phase_us: f.phase_ms.map(ms_to_us),
                    eta: f.eta,
                });
            }
        }
        let cfg = SimConfig {
            ran: self.ran_config()?,
            flows,
            duration_us: ms_to_us(self.duration_s * 1000.0),
            warmup_us: ms_to_us(self.warmup_s * 1000.0),
            seed: self.seed,
            log_level: self.log_level,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Sets one sweep parameter on the scenario (all flow groups for
    /// per-flow keys).
    pub fn apply_override(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = || Error::Config(format!("bad value `{value}` for `{key}`"));
        let num = || value.parse::<f64>().map_err(|_| bad());
        let int = || value.parse::<u32>().map_err(|_| bad());
        match key {
            "wired_nd" | "wired_nd_ms" => {
                let v = num()?;
                self.flows.iter_mut().for_each(|f| f.wired_nd_ms = v);
            }
            "ack_per_frames" => {
                let v = int()?;
                self.flows.iter_mut().for_each(|f| f.ack_per_frames = v);
            }
            "epsilon" => {
                let v = int()?;
                self.flows.iter_mut().for_each(|f| f.epsilon = v);
            }
            "replicas" => {
                let v = int()?;
                self.flows.iter_mut().for_each(|f| f.replicas = v);
            }
            "encoder" => {
                let v: EncoderMode = value.parse()?;
                self.flows.iter_mut().for_each(|f| f.encoder = v);
            }
            "controller" => {
                value.parse::<Controller>()?;
                self.flows.iter_mut().for_each(|f| f.controller = value.to_string());
            }
            "bler" => self.ran.bler = num()?,
            "seed" => self.seed = value.parse().map_err(|_| bad())?,
            "duration" | "duration_s" => self.duration_s = num()?,
            other => {
                return Err(Error::Config(format!(
                    "unknown sweep key `{other}` (expected one of {})",
                    OVERRIDE_KEYS.join(", ")
                )))
            }
        }
        self.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_with_defaults() {
        let s = Scenario::parse("[[flows]]\n").unwrap();
        assert_eq!(s.duration_s, 30.0);
        assert_eq!(s.ran.prb_total, 106);
        assert_eq!(s.flows[0].controller, "choir");
        let cfg = s.sim_config().unwrap();
        assert_eq!(cfg.flows.len(), 1);
        assert_eq!(cfg.warmup_us, 2_000_000);
        assert_eq!(cfg.ran.capacity.at(0), 25);
    }

    #[test]
    fn replicas_and_synthetic_trace() {
        let s = Scenario::parse(
            r#"
duration_s = 4
[ran]
prb_total = 273
bytes_per_prb = 100
[trace]
kind = "step"
before = 100
after = 50
at_s = 2.0
[[flows]]
controller = "scone"
replicas = 3
wired_nd_ms = 10
"#,
        )
        .unwrap();
        let cfg = s.sim_config().unwrap();
        assert_eq!(cfg.flows.len(), 3);
        assert!(cfg.flows.iter().all(|f| f.controller == Controller::Scone));
        assert_eq!(cfg.ran.capacity.at(3999), 100);
        assert_eq!(cfg.ran.capacity.at(4000), 50);
    }

    #[test]
    fn config_errors() {
        let e = Scenario::parse("[[flows]]\ncontroller = \"copa\"\n").unwrap_err();
        assert!(matches!(e, Error::UnknownController(_)));
        assert!(e.is_config_error());
        assert!(Scenario::parse("").unwrap_err().is_config_error());
        assert!(Scenario::parse("[[flows]]\nbogus = 1\n").unwrap_err().is_config_error());
        assert!(Scenario::parse("duration_s = -1\n[[flows]]\n").unwrap_err().is_config_error());
        let s = Scenario::parse("trace_path = \"/nonexistent.csv\"\n[[flows]]\n").unwrap();
        assert!(s.sim_config().unwrap_err().is_config_error());
    }

    #[test]
    fn overrides() {
        let mut s = Scenario::parse("[[flows]]\n[[flows]]\n").unwrap();
        s.apply_override("wired_nd", "20").unwrap();
        assert!(s.flows.iter().all(|f| f.wired_nd_ms == 20.0));
        s.apply_override("bler", "0.1").unwrap();
        assert_eq!(s.ran.bler, 0.1);
        assert!(s.apply_override("nope", "1").is_err());
        assert!(s.apply_override("epsilon", "x").is_err());
    }
}
