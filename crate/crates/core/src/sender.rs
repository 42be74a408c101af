//! Video sender: fixed-rate frame source, encoder bitrate smoothing and
//! pacing. Rates are in bits/s.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::Micros;

pub const DEFAULT_RHO: f64 = 1.25;
pub const DEFAULT_INITIAL_BITRATE: f64 = 5e6;
pub const DEFAULT_MIN_BITRATE: f64 = 500e3;
pub const PACKET_PAYLOAD: u32 = 1400;
pub const FRAME_INTERVAL_US: Micros = 16_600;

const RECV_BIN_US: Micros = 100_000;
const RECV_WINDOW_BINS: u64 = 10;
const HIST_CAP: usize = 64;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EncoderMode {
    /// Frame size tracks the target bitrate immediately.
    #[default]
    Instant,
    /// Actual bitrate closes a third of the gap to the target per frame.
    Ramp,
}

impl FromStr for EncoderMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "instant" => Ok(EncoderMode::Instant),
            "ramp" => Ok(EncoderMode::Ramp),
            other => Err(Error::Config(format!("unknown encoder mode `{other}`"))),
        }
    }
}

impl fmt::Display for EncoderMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EncoderMode::Instant => "instant",
            EncoderMode::Ramp => "ramp",
        })
    }
}

/// Mean of the last `epsilon - 1` encoder bitrates and the current guidance.
/// While fewer than `epsilon - 1` bitrates exist, the available ones are used.
pub fn target_bitrate(guidance: f64, hist: &[f64], epsilon: u32) -> f64 {
    let take = (epsilon.max(1) as usize - 1).min(hist.len());
    let sum: f64 = hist[hist.len() - take..].iter().sum();
    (sum + guidance) / (take + 1) as f64
}

pub fn pacing_rate(recv_rate_max: f64, br: f64, rho: f64) -> f64 {
    rho * recv_rate_max.max(br)
}

/// One ramp-mode encoder step.
pub fn ramp_step(actual: f64, target: f64) -> f64 {
    actual + (target - actual) / 3.0
}

/// Frame bytes for a bitrate over one frame interval.
pub fn frame_bytes(bitrate: f64, fi_us: Micros) -> u64 {
    (bitrate * fi_us as f64 / 8e6).round().max(0.0) as u64
}

/// Splits a frame into payload-sized packets. An empty frame still yields one
/// zero-byte packet so the receiver sees it.
pub fn packetize(bytes: u64, payload: u32) -> Vec<u32> {
    if bytes == 0 {
        return vec![0];
    }
    let full = bytes / payload as u64;
    let mut out = vec![payload; full as usize];
    let rest = (bytes % payload as u64) as u32;
    if rest > 0 {
        out.push(rest);
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct SenderConfig {
    pub epsilon: u32,
    pub rho: f64,
    pub initial_bitrate: f64,
    pub min_bitrate: f64,
    pub encoder: EncoderMode,
    pub frame_interval_us: Micros,
    pub packet_payload: u32,
}

impl Default for SenderConfig {
    fn default() -> Self {
        SenderConfig {
            epsilon: 1,
            rho: DEFAULT_RHO,
            initial_bitrate: DEFAULT_INITIAL_BITRATE,
            min_bitrate: DEFAULT_MIN_BITRATE,
            encoder: EncoderMode::Instant,
            frame_interval_us: FRAME_INTERVAL_US,
            packet_payload: PACKET_PAYLOAD,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VideoFrame {
    pub frame_id: u64,
    pub encode_us: Micros,
    pub bytes: u64,
    pub target_bps: f64,
    pub actual_bps: f64,
    pub pacing_bps: f64,
    pub decode_us: Option<Micros>,
}

impl VideoFrame {
    pub fn delay_ms(&self) -> Option<f64> {
        self.decode_us.map(|d| (d - self.encode_us) as f64 / 1000.0)
    }
}

#[derive(Clone, Debug)]
pub struct SenderState {
    pub cfg: SenderConfig,
    bitrate_hist: VecDeque<f64>,
    last_guidance: Option<(f64, Micros)>,
    recv_bins: VecDeque<(u64, u64)>,
    actual: f64,
    pacing: f64,
    next_frame_id: u64,
}

impl SenderState {
    pub fn new(cfg: SenderConfig) -> Self {
        assert!(cfg.epsilon >= 1, "epsilon must be at least 1");
        assert!(cfg.rho > 1.0, "rho must exceed 1");
        let actual = cfg.initial_bitrate;
        SenderState {
            pacing: cfg.rho * actual,
            cfg,
            bitrate_hist: VecDeque::new(),
            last_guidance: None,
            recv_bins: VecDeque::new(),
            actual,
            next_frame_id: 0,
        }
    }

    pub fn last_guidance(&self) -> Option<(f64, Micros)> {
        self.last_guidance
    }

    pub fn bitrate_history(&self) -> impl Iterator<Item = &f64> + '_ {
        self.bitrate_hist.iter()
    }

    pub fn pacing_bps(&self) -> f64 {
        self.pacing
    }

    /// Applies a decoded guidance value. Returns whether it replaced the
    /// current one; values not newer than the current stamp are ignored.
    pub fn on_feedback(&mut self, guidance_bps: Option<f64>, stamped_ts: Micros) -> bool {
        let Some(g) = guidance_bps else {
            return false;
        };
        if self.last_guidance.is_some_and(|(_, ts)| stamped_ts <= ts) {
            return false;
        }
        self.last_guidance = Some((g, stamped_ts));
        true
    }

    /// Counts ACKed bytes toward the receive-rate window.
    pub fn on_ack(&mut self, now: Micros, acked_bytes: u64) {
        let bin = now / RECV_BIN_US;
        match self.recv_bins.back_mut() {
            Some((b, bytes)) if *b == bin => *bytes += acked_bytes,
            _ => self.recv_bins.push_back((bin, acked_bytes)),
        }
        while self
            .recv_bins
            .front()
            .is_some_and(|&(b, _)| b + RECV_WINDOW_BINS <= bin)
        {
            self.recv_bins.pop_front();
        }
    }

    /// Largest per-100 ms receive rate within the last second.
    pub fn recv_rate_max(&self, now: Micros) -> f64 {
        let bin = now / RECV_BIN_US;
        self.recv_bins
            .iter()
            .filter(|&&(b, _)| b + RECV_WINDOW_BINS > bin)
            .map(|&(_, bytes)| bytes as f64 * 8.0 / (RECV_BIN_US as f64 / 1e6))
            .fold(0.0, f64::max)
    }

    /// Produces the frame for the tick at `now`.
    pub fn encode_frame(&mut self, now: Micros) -> VideoFrame {
        let hist: Vec<f64> = self.bitrate_hist.iter().copied().collect();
        let target = match self.last_guidance {
            Some((g, _)) => target_bitrate(g, &hist, self.cfg.epsilon).max(self.cfg.min_bitrate),
            None => self.cfg.initial_bitrate,
        };
        if self.bitrate_hist.len() == HIST_CAP {
            self.bitrate_hist.pop_front();
        }
        self.bitrate_hist.push_back(target);
        self.actual = match self.cfg.encoder {
            EncoderMode::Instant => target,
            EncoderMode::Ramp => ramp_step(self.actual, target),
        };
        self.pacing = pacing_rate(self.recv_rate_max(now), target.max(self.actual), self.cfg.rho);
        let frame = VideoFrame {
            frame_id: self.next_frame_id,
            encode_us: now,
            bytes: frame_bytes(self.actual, self.cfg.frame_interval_us),
            target_bps: target,
            actual_bps: self.actual,
            pacing_bps: self.pacing,
            decode_us: None,
        };
        self.next_frame_id += 1;
        frame
    }

    /// Time needed to release `bytes` at the current pacing rate.
    pub fn pacing_gap_us(&self, bytes: u32) -> Micros {
        if bytes == 0 || self.pacing <= 0.0 {
            return 0;
        }
        (bytes as f64 * 8.0 / self.pacing * 1e6).ceil() as Micros
    }
}
