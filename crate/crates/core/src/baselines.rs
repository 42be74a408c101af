//! Comparison controllers sharing the sender and simulator interfaces.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::codec::{decode_rate, encode_rate, GuidanceFeedback, WIRE_LEN};
use crate::error::Error;
use crate::{Micros, FRAME_INTERVAL_MS};

/// Rate controller driving a flow's sender.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Controller {
    /// Queue-aware guidance from the base station.
    Choir,
    /// Capacity and queue length reported, sender drains the queue over a
    /// fixed time.
    Scone,
    /// Ground-truth fair capacity, no queue awareness.
    Oracle,
}

impl Controller {
    pub const ALL: [Controller; 3] = [Controller::Choir, Controller::Scone, Controller::Oracle];
}

impl FromStr for Controller {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "choir" => Ok(Controller::Choir),
            "scone" => Ok(Controller::Scone),
            "oracle" => Ok(Controller::Oracle),
            other => Err(Error::UnknownController(other.to_string())),
        }
    }
}

impl fmt::Display for Controller {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Controller::Choir => "choir",
            Controller::Scone => "scone",
            Controller::Oracle => "oracle",
        })
    }
}

/// Capacity in bytes/ms, queue length in bytes, drain time in ms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SconeFeedback {
    pub capacity: f64,
    pub queue_len: f64,
    pub drain_time: f64,
}

impl SconeFeedback {
    pub fn new(capacity: f64, queue_len: f64) -> Self {
        SconeFeedback {
            capacity,
            queue_len,
            drain_time: FRAME_INTERVAL_MS,
        }
    }

    /// Two codec fields: capacity in bits/s, then queue length in bits.
    pub fn to_wire(&self, stamped_ts: Micros) -> [GuidanceFeedback; 2] {
        [
            encode_rate(self.capacity * 8000.0, stamped_ts),
            encode_rate(self.queue_len * 8.0, stamped_ts),
        ]
    }

    pub fn to_bytes(&self) -> [u8; 2 * WIRE_LEN] {
        let [c, q] = self.to_wire(0);
        let mut out = [0u8; 2 * WIRE_LEN];
        out[..WIRE_LEN].copy_from_slice(&c.to_bytes());
        out[WIRE_LEN..].copy_from_slice(&q.to_bytes());
        out
    }

    /// `None` when either field is invalid.
    pub fn from_wire(fields: &[GuidanceFeedback; 2]) -> Option<Self> {
        let cap = decode_rate(&fields[0])? / 8000.0;
        let q = decode_rate(&fields[1])? / 8.0;
        Some(SconeFeedback::new(cap, q))
    }
}

/// `max(0, capacity - queue_len / drain_time)` in bytes/ms.
pub fn scone_target_rate(fb: &SconeFeedback) -> f64 {
    (fb.capacity - fb.queue_len / fb.drain_time).max(0.0)
}

pub fn oracle_rate(true_capacity: f64) -> f64 {
    true_capacity
}
