use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Micros;

/// One slot of the TDD frame structure.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SlotKind {
    Downlink,
    /// Downlink symbols in the first half, guard and uplink symbols after.
    Special,
    Uplink,
}

impl SlotKind {
    /// Downlink weight in half-slot units: D = 2, S = 1, U = 0.
    pub fn dl_halves(self) -> u32 {
        match self {
            SlotKind::Downlink => 2,
            SlotKind::Special => 1,
            SlotKind::Uplink => 0,
        }
    }

    pub fn carries_downlink(self) -> bool {
        self.dl_halves() > 0
    }

    pub fn carries_uplink(self) -> bool {
        matches!(self, SlotKind::Uplink)
    }

    fn letter(self) -> char {
        match self {
            SlotKind::Downlink => 'D',
            SlotKind::Special => 'S',
            SlotKind::Uplink => 'U',
        }
    }
}

/// Ordered, repeating slot pattern such as `DDDSU`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct TddPattern(Vec<SlotKind>);

impl TddPattern {
    pub fn new(slots: Vec<SlotKind>) -> Result<Self> {
        if slots.is_empty() {
            return Err(Error::Config("tdd pattern is empty".into()));
        }
        if !slots.contains(&SlotKind::Downlink) {
            return Err(Error::Config(
                "tdd pattern needs at least one downlink slot".into(),
            ));
        }
        Ok(TddPattern(slots))
    }

    pub fn dddsu() -> Self {
        "DDDSU".parse().expect("static pattern")
    }

    pub fn all_downlink() -> Self {
        "D".parse().expect("static pattern")
    }

    pub fn slots(&self) -> &[SlotKind] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn slot_at(&self, tti: u64) -> SlotKind {
        self.0[(tti % self.0.len() as u64) as usize]
    }

    /// Fraction of air time usable for downlink data (`DDDSU` gives 0.7).
    pub fn downlink_fraction(&self) -> f64 {
        let halves: u32 = self.0.iter().map(|s| s.dl_halves()).sum();
        halves as f64 / (2 * self.0.len()) as f64
    }

    /// Longest run of slots that are not full downlink slots, counted
    /// cyclically.
    pub fn max_non_downlink_run(&self) -> usize {
        let n = self.0.len();
        let mut best = 0;
        let mut run = 0;
        for i in 0..2 * n {
            if self.0[i % n] == SlotKind::Downlink {
                run = 0;
            } else {
                run += 1;
                best = best.max(run.min(n));
            }
        }
        best
    }
}

impl FromStr for TddPattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let slots = s
            .chars()
            .filter(|c| !c.is_whitespace())
            .map(|c| match c.to_ascii_uppercase() {
                'D' => Ok(SlotKind::Downlink),
                'S' => Ok(SlotKind::Special),
                'U' => Ok(SlotKind::Uplink),
                other => Err(Error::Config(format!("unknown slot kind `{other}`"))),
            })
            .collect::<Result<Vec<_>>>()?;
        TddPattern::new(slots)
    }
}

impl TryFrom<String> for TddPattern {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<TddPattern> for String {
    fn from(p: TddPattern) -> String {
        p.to_string()
    }
}

impl fmt::Display for TddPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.0 {
            write!(f, "{}", s.letter())?;
        }
        Ok(())
    }
}

/// Per-TTI capacity in bytes per PRB for a full downlink slot, stored as
/// step points and held between them.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CapacityTrace {
    points: Vec<(u64, u32)>,
}

impl CapacityTrace {
    /// `points` must be non-empty with strictly increasing TTI indices.
    pub fn from_points(points: Vec<(u64, u32)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Config("capacity trace has no points".into()));
        }
        if let Some(w) = points.windows(2).find(|w| w[1].0 <= w[0].0) {
            return Err(Error::Config(format!(
                "capacity trace tti_index not increasing at {}",
                w[1].0
            )));
        }
        Ok(CapacityTrace { points })
    }

    pub fn constant(bytes_per_prb: u32) -> Self {
        CapacityTrace {
            points: vec![(0, bytes_per_prb)],
        }
    }

    pub fn points(&self) -> &[(u64, u32)] {
        &self.points
    }

    /// Step-interpolated value at `tti`; indices before the first point take
    /// the first value.
    pub fn at(&self, tti: u64) -> u32 {
        let idx = self.points.partition_point(|&(t, _)| t <= tti);
        if idx == 0 {
            self.points[0].1
        } else {
            self.points[idx - 1].1
        }
    }
}

/// Static parameters of the simulated cell.
#[derive(Clone, Debug)]
pub struct RanConfig {
    pub prb_total: u32,
    pub tti_len_ms: f64,
    pub tdd_pattern: TddPattern,
    pub bler: f64,
    /// Delay before the first HARQ retransmission of a failed block.
    pub harq_rtx_delay_ms: f64,
    /// Delay before each later HARQ retransmission.
    pub harq_rtx_delay_subsequent_ms: f64,
    pub harq_max_rtx: u32,
    pub tb_header_bytes: u32,
    pub segment_header_bytes: u32,
    /// Every n-th downlink slot carries only control signalling.
    pub control_slot_every: Option<u32>,
    pub capacity: CapacityTrace,
}

impl Default for RanConfig {
    fn default() -> Self {
        RanConfig {
            prb_total: 106,
            tti_len_ms: 0.5,
            tdd_pattern: TddPattern::dddsu(),
            bler: 0.0,
            harq_rtx_delay_ms: 6.0,
            harq_rtx_delay_subsequent_ms: 5.0,
            harq_max_rtx: 3,
            tb_header_bytes: 8,
            segment_header_bytes: 4,
            control_slot_every: None,
            capacity: CapacityTrace::constant(25),
        }
    }
}

impl RanConfig {
    pub fn validate(&self) -> Result<()> {
        if self.prb_total == 0 {
            return Err(Error::Config("prb_total must be positive".into()));
        }
        if self.tti_len_ms != 0.5 && self.tti_len_ms != 1.0 {
            return Err(Error::Config(format!(
                "tti_len must be 0.5 or 1.0 ms, got {}",
                self.tti_len_ms
            )));
        }
        if !(0.0..1.0).contains(&self.bler) {
            return Err(Error::Config(format!("bler must be in [0, 1), got {}", self.bler)));
        }
        if self.harq_rtx_delay_ms <= 0.0 || self.harq_rtx_delay_subsequent_ms <= 0.0 {
            return Err(Error::Config("harq delays must be positive".into()));
        }
        if self.control_slot_every == Some(0) {
            return Err(Error::Config("control_slot_every must be >= 1".into()));
        }
        Ok(())
    }

    pub fn tti_us(&self) -> Micros {
        (self.tti_len_ms * 1000.0).round() as Micros
    }

    pub fn ttis_in(&self, window_ms: f64) -> usize {
        (window_ms / self.tti_len_ms).round() as usize
    }

    /// HARQ delay before retransmission number `rtx` (1-based).
    pub fn harq_delay_us(&self, rtx: u32) -> Micros {
        let ms = if rtx <= 1 {
            self.harq_rtx_delay_ms
        } else {
            self.harq_rtx_delay_subsequent_ms
        };
        (ms * 1000.0).round() as Micros
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pattern_parsing_and_fraction() {
        let p = TddPattern::dddsu();
        assert_eq!(p.to_string(), "DDDSU");
        assert!((p.downlink_fraction() - 0.7).abs() < 1e-12);
        assert_eq!(p.max_non_downlink_run(), 2);
        assert!("".parse::<TddPattern>().is_err());
        assert!("UUS".parse::<TddPattern>().is_err());
        assert!("DDX".parse::<TddPattern>().is_err());
        assert_eq!("DSUUD".parse::<TddPattern>().unwrap().max_non_downlink_run(), 3);
    }

    #[test]
    fn trace_step_semantics() {
        let t = CapacityTrace::from_points(vec![(0, 1000), (600, 500)]).unwrap();
        assert_eq!(t.at(0), 1000);
        assert_eq!(t.at(599), 1000);
        assert_eq!(t.at(600), 500);
        assert_eq!(t.at(10_000), 500);
        assert!(CapacityTrace::from_points(vec![(5, 1), (5, 2)]).is_err());
    }

    #[test]
    fn config_validation() {
        let mut c = RanConfig::default();
        assert!(c.validate().is_ok());
        c.tti_len_ms = 0.25;
        assert!(c.validate().is_err());
        c.tti_len_ms = 1.0;
        c.bler = 1.0;
        assert!(c.validate().is_err());
        c.bler = 0.1;
        c.prb_total = 0;
        assert!(c.validate().is_err());
    }
}
