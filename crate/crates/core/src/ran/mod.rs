//! Discrete-time model of a 5G downlink cell.
//!
//! The cell runs on a TTI clock over a repeating TDD slot pattern. Each flow
//! has a dedicated RLC queue; downlink slots split PRBs equally among flows
//! with queued data, blocks fail independently with the configured BLER, and
//! failed blocks go through HARQ retransmission and finally RLC AM re-entry.

pub mod cell;
pub mod config;
pub mod queue;
pub mod scheduler;

pub use cell::{Cell, Delivery, FlowTti, TbRecord, TransportBlock, TtiReport};
pub use config::{CapacityTrace, RanConfig, SlotKind, TddPattern};
pub use queue::{sample_rlc_queue, FlowQueueState, QueueSamples, Segment};
pub use scheduler::{schedule_prbs, PrbScheduler};
