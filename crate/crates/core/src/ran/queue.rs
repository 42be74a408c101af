use std::collections::VecDeque;

use crate::{FlowId, Micros};

/// A packet, or the unsent remainder of one, waiting in an RLC queue.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Segment {
    pub packet_id: u64,
    pub bytes: u32,
    pub enqueue_us: Micros,
}

/// Bounded ring of `(timestamp, queue bytes)` samples taken once per TTI.
#[derive(Clone, Debug)]
pub struct QueueSamples {
    ring: VecDeque<(Micros, u64)>,
    capacity: usize,
}

impl QueueSamples {
    pub fn new(capacity: usize) -> Self {
        QueueSamples {
            ring: VecDeque::with_capacity(capacity),
            capacity: capacity.max(1),
        }
    }

    pub fn push(&mut self, ts: Micros, bytes: u64) {
        if self.ring.len() == self.capacity {
            self.ring.pop_front();
        }
        self.ring.push_back((ts, bytes));
    }

    pub fn iter(&self) -> impl DoubleEndedIterator<Item = &(Micros, u64)> + '_ {
        self.ring.iter()
    }

    pub fn len(&self) -> usize {
        self.ring.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ring.is_empty()
    }
}

/// Per-flow state of the dedicated base-station queue.
#[derive(Clone, Debug)]
pub struct FlowQueueState {
    pub flow_id: FlowId,
    rlc_queue: VecDeque<Segment>,
    queued_bytes: u64,
    /// PRBs this flow used in the last TTI.
    pub uprb_last: u32,
    /// Queue (or HARQ work) was non-empty at the last TTI boundary.
    pub active: bool,
    /// One-way wired delay between the sender and the base station.
    pub wired_nd_ms: f64,
    pub samples: QueueSamples,
}

impl FlowQueueState {
    pub fn new(flow_id: FlowId, wired_nd_ms: f64) -> Self {
        FlowQueueState {
            flow_id,
            rlc_queue: VecDeque::new(),
            queued_bytes: 0,
            uprb_last: 0,
            active: false,
            wired_nd_ms,
            samples: QueueSamples::new(1024),
        }
    }

    pub fn queued_bytes(&self) -> u64 {
        self.queued_bytes
    }

    pub fn segment_count(&self) -> usize {
        self.rlc_queue.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rlc_queue.is_empty()
    }

    pub fn segments(&self) -> impl Iterator<Item = &Segment> + '_ {
        self.rlc_queue.iter()
    }

    /// Appends at the tail. Timestamps stay nondecreasing because the
    /// simulator only enqueues at the current clock.
    pub fn push(&mut self, seg: Segment) {
        debug_assert!(self
            .rlc_queue
            .back()
            .is_none_or(|b| b.enqueue_us <= seg.enqueue_us));
        self.queued_bytes += seg.bytes as u64;
        self.rlc_queue.push_back(seg);
    }

    /// Removes up to `budget` payload bytes from the head, spending
    /// `seg_header` bytes of the budget per segment taken. Partially sent
    /// packets stay at the head with their remainder.
    pub fn take(&mut self, mut budget: u32, seg_header: u32) -> Vec<Segment> {
        let mut out = Vec::new();
        while budget > seg_header {
            let Some(head) = self.rlc_queue.front_mut() else {
                break;
            };
            let room = budget - seg_header;
            if head.bytes <= room {
                let seg = self.rlc_queue.pop_front().expect("front exists");
                budget -= seg_header + seg.bytes;
                self.queued_bytes -= seg.bytes as u64;
                out.push(seg);
            } else {
                head.bytes -= room;
                self.queued_bytes -= room as u64;
                out.push(Segment {
                    bytes: room,
                    ..*head
                });
                budget = 0;
            }
        }
        out
    }
}

/// Returns the current queue byte total and records it in the flow's sample
/// ring for the min-window statistic.
pub fn sample_rlc_queue(flow: &mut FlowQueueState, now: Micros) -> u64 {
    let q = flow.queued_bytes();
    flow.samples.push(now, q);
    q
}
