//! Base-station guided rate control for real-time video over a simulated 5G
//! downlink.
//!
//! The crate is organised bottom-up:
//!
//! * [`ran`] simulates the cell: TDD slots, PRB scheduling, HARQ and RLC.
//! * [`estimator`] maps per-TTI radio statistics to each flow's allocated
//!   transport bandwidth.
//! * [`predictor`] turns allocated bandwidth and the flow's frame pattern
//!   into the guidance bandwidth fed back to the sender.
//! * [`codec`] is the 4-byte feedback option carried on uplink ACKs.
//! * [`sender`] converts guidance into encoder bitrate and pacing rate.
//! * [`baselines`] holds the comparison controllers.
//! * [`sim`], [`scenario`], [`trace`], [`metrics`], [`eventlog`] and
//!   [`runner`] wire everything into reproducible experiments.

// NaN-rejecting checks read as `!(x > 0.0)`; indexed loops walk parallel per-flow vectors
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

use std::fmt;

pub mod baselines;
pub mod codec;
pub mod error;
pub mod estimator;
pub mod eventlog;
pub mod metrics;
pub mod predictor;
pub mod ran;
pub mod runner;
pub mod scenario;
pub mod sender;
pub mod sim;
pub mod trace;

pub use error::{Error, Result};

/// Simulation time in microseconds.
pub type Micros = u64;

/// Nominal frame interval of a 60 fps source, in ms.
pub const FRAME_INTERVAL_MS: f64 = 16.6;

/// Dense per-run flow index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FlowId(pub u32);

impl FlowId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for FlowId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

pub fn us_to_ms(t: Micros) -> f64 {
    t as f64 / 1000.0
}

pub fn ms_to_us(ms: f64) -> Micros {
    (ms * 1000.0).round().max(0.0) as Micros
}
