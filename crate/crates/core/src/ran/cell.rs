use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{RanConfig, SlotKind};
use super::queue::{sample_rlc_queue, FlowQueueState, Segment};
use super::scheduler::PrbScheduler;
use crate::error::{Error, Result};
use crate::{FlowId, Micros};

/// One MAC transport block.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TransportBlock {
    pub id: u64,
    pub flow_id: FlowId,
    /// Transport block size of the grant (TBS), headers and padding included.
    pub bytes: u32,
    /// MAC and RLC header bytes.
    pub overhead_bytes: u32,
    pub prbs: u32,
    pub rtx_count: u32,
    pub created_tti: u64,
    pub payload: Vec<Segment>,
}

impl TransportBlock {
    pub fn payload_bytes(&self) -> u32 {
        self.payload.iter().map(|s| s.bytes).sum()
    }

    /// Fraction of the block left for user data once headers are removed.
    pub fn effective_fraction(&self) -> f64 {
        (self.bytes - self.overhead_bytes) as f64 / self.bytes as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum PendingKind {
    Retransmit,
    RlcReentry,
}

#[derive(Clone, Debug)]
struct Pending {
    due_us: Micros,
    kind: PendingKind,
    tb: TransportBlock,
}

/// Summary of one block transmitted in a TTI.
#[derive(Clone, Debug, PartialEq)]
pub struct TbRecord {
    pub tb_id: u64,
    pub bytes: u32,
    pub overhead_bytes: u32,
    pub payload_bytes: u32,
    pub prbs: u32,
    pub rtx_count: u32,
    pub success: bool,
    pub effective_fraction: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct FlowTti {
    pub uprb: u32,
    pub demand_prbs: u32,
    pub blocks: Vec<TbRecord>,
    pub harq_rtx: bool,
    pub rlc_reentered_bytes: u64,
}

/// Payload bytes of one packet handed to the receiver.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Delivery {
    pub flow_id: FlowId,
    pub packet_id: u64,
    pub bytes: u32,
    pub at_us: Micros,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TtiReport {
    pub tti: u64,
    pub start_us: Micros,
    pub slot: SlotKind,
    /// Downlink capacity usable for data, in half slots (0 for uplink and
    /// control-only slots).
    pub data_halves: u32,
    pub bytes_per_prb: u32,
    pub prb_used: u32,
    pub n_active: u32,
    pub flows: Vec<FlowTti>,
    pub deliveries: Vec<Delivery>,
}

impl TtiReport {
    pub fn is_uplink(&self) -> bool {
        self.slot.carries_uplink()
    }
}

/// The base station's downlink: per-flow RLC queues, the PRB scheduler, HARQ
/// processes and the TDD clock.
#[derive(Debug)]
pub struct Cell {
    cfg: RanConfig,
    tti: u64,
    flows: Vec<FlowQueueState>,
    pending: Vec<Vec<Pending>>,
    scheduler: PrbScheduler,
    rng: ChaCha8Rng,
    scripted: BTreeMap<u64, u32>,
    next_tb_id: u64,
    injected: Vec<u64>,
    delivered: Vec<u64>,
}

impl Cell {
    pub fn new(cfg: RanConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        Ok(Cell {
            cfg,
            tti: 0,
            flows: Vec::new(),
            pending: Vec::new(),
            scheduler: PrbScheduler::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            scripted: BTreeMap::new(),
            next_tb_id: 0,
            injected: Vec::new(),
            delivered: Vec::new(),
        })
    }

    pub fn config(&self) -> &RanConfig {
        &self.cfg
    }

    pub fn add_flow(&mut self, wired_nd_ms: f64) -> FlowId {
        let id = FlowId(self.flows.len() as u32);
        self.flows.push(FlowQueueState::new(id, wired_nd_ms));
        self.pending.push(Vec::new());
        self.injected.push(0);
        self.delivered.push(0);
        id
    }

    pub fn flow_count(&self) -> usize {
        self.flows.len()
    }

    pub fn flow(&self, id: FlowId) -> &FlowQueueState {
        &self.flows[id.index()]
    }

    pub fn flows(&self) -> &[FlowQueueState] {
        &self.flows
    }

    pub fn tti(&self) -> u64 {
        self.tti
    }

    pub fn now_us(&self) -> Micros {
        self.tti * self.cfg.tti_us()
    }

    /// Forces the block with id `tb_id` to fail its next `failures`
    /// transmissions regardless of BLER.
    pub fn script_failures(&mut self, tb_id: u64, failures: u32) {
        self.scripted.insert(tb_id, failures);
    }

    pub fn enqueue(&mut self, flow: FlowId, packet_id: u64, bytes: u32, at_us: Micros) -> Result<()> {
        let f = self
            .flows
            .get_mut(flow.index())
            .ok_or_else(|| Error::Config(format!("unknown flow {flow}")))?;
        f.push(Segment {
            packet_id,
            bytes,
            enqueue_us: at_us,
        });
        self.injected[flow.index()] += bytes as u64;
        Ok(())
    }

    pub fn injected_bytes(&self, flow: FlowId) -> u64 {
        self.injected[flow.index()]
    }

    pub fn delivered_bytes(&self, flow: FlowId) -> u64 {
        self.delivered[flow.index()]
    }

    /// Payload bytes held by HARQ processes or waiting for RLC re-entry.
    pub fn in_flight_bytes(&self, flow: FlowId) -> u64 {
        self.pending[flow.index()]
            .iter()
            .map(|p| p.tb.payload_bytes() as u64)
            .sum()
    }

    pub fn has_pending_harq(&self, flow: FlowId) -> bool {
        !self.pending[flow.index()].is_empty()
    }

    fn is_control_slot(&self, tti: u64) -> bool {
        let Some(every) = self.cfg.control_slot_every else {
            return false;
        };
        let slots = self.cfg.tdd_pattern.slots();
        let per_period = slots.iter().filter(|s| **s == SlotKind::Downlink).count() as u64;
        let period = tti / slots.len() as u64;
        let pos = (tti % slots.len() as u64) as usize;
        if slots[pos] != SlotKind::Downlink {
            return false;
        }
        let before = slots[..pos].iter().filter(|s| **s == SlotKind::Downlink).count() as u64;
        (period * per_period + before).is_multiple_of(every as u64)
    }

    /// Downlink data capacity of a slot in half-slot units.
    pub fn data_halves_at(&self, tti: u64) -> u32 {
        if self.is_control_slot(tti) {
            0
        } else {
            self.cfg.tdd_pattern.slot_at(tti).dl_halves()
        }
    }

    /// Nominal payload drain rate of one flow's equal share of the cell,
    /// in bytes per ms. This is the ground truth the oracle controller sees.
    pub fn fair_capacity(&self, n_flows: usize) -> f64 {
        let n = n_flows.max(1) as f64;
        let bpp = self.cfg.capacity.at(self.tti) as f64;
        let prbs = self.cfg.prb_total as f64 / n;
        let tbs = prbs * bpp;
        if tbs <= 0.0 {
            return 0.0;
        }
        let header = (self.cfg.tb_header_bytes + 2 * self.cfg.segment_header_bytes) as f64;
        let gamma = ((tbs - header) / tbs).max(0.0);
        tbs / self.cfg.tti_len_ms * self.cfg.tdd_pattern.downlink_fraction() * gamma * (1.0 - self.cfg.bler)
    }

    /// Runs one TTI: HARQ bookkeeping, PRB scheduling, block formation and
    /// transmission, then queue sampling. The clock advances by one TTI.
    pub fn advance_tti(&mut self) -> TtiReport {
        let tti = self.tti;
        let now = self.now_us();
        let tti_us = self.cfg.tti_us();
        let slot = self.cfg.tdd_pattern.slot_at(tti);
        let halves = self.data_halves_at(tti);
        let bpp = self.cfg.capacity.at(tti);
        let n = self.flows.len();
        let mut flows_out = vec![FlowTti::default(); n];

        // RLC AM: blocks that exhausted HARQ go back to the queue tail.
        for (i, pend) in self.pending.iter_mut().enumerate() {
            let mut k = 0;
            while k < pend.len() {
                if pend[k].kind == PendingKind::RlcReentry && pend[k].due_us <= now {
                    let p = pend.remove(k);
                    for seg in p.tb.payload {
                        flows_out[i].rlc_reentered_bytes += seg.bytes as u64;
                        self.flows[i].push(Segment {
                            enqueue_us: now,
                            ..seg
                        });
                    }
                } else {
                    k += 1;
                }
            }
        }

        let slot_bytes = |prbs: u32| -> u32 { (prbs as u64 * bpp as u64 * halves as u64 / 2) as u32 };
        let prbs_for = |bytes: u32| -> u32 {
            let per = bpp as u64 * halves as u64;
            ((bytes as u64 * 2).div_ceil(per)) as u32
        };

        let mut deliveries = Vec::new();
        let mut prb_used = 0u32;
        let mut n_active = 0u32;
        let can_send = halves > 0 && bpp > 0;

        let mut demands = Vec::with_capacity(n);
        for i in 0..n {
            let f = &self.flows[i];
            let has_work = !f.is_empty() || self.pending[i].iter().any(|p| p.kind == PendingKind::Retransmit);
            if has_work {
                n_active += 1;
            }
            if !can_send {
                continue;
            }
            let mut d: u64 = 0;
            for p in &self.pending[i] {
                if p.kind == PendingKind::Retransmit && p.due_us <= now {
                    d += prbs_for(p.tb.bytes) as u64;
                }
            }
            if !f.is_empty() {
                let need = f.queued_bytes()
                    + self.cfg.tb_header_bytes as u64
                    + self.cfg.segment_header_bytes as u64 * f.segment_count() as u64;
                let need = need.min(u32::MAX as u64 / 4) as u32;
                d += prbs_for(need) as u64;
            }
            let d = d.min(self.cfg.prb_total as u64) as u32;
            flows_out[i].demand_prbs = d;
            if d > 0 {
                demands.push((FlowId(i as u32), d));
            }
        }

        let alloc = if can_send {
            self.scheduler.allocate(&demands, self.cfg.prb_total)
        } else {
            BTreeMap::new()
        };

        for i in 0..n {
            let id = FlowId(i as u32);
            let mut remaining = alloc.get(&id).copied().unwrap_or(0);
            let mut to_send: Vec<TransportBlock> = Vec::new();

            if remaining > 0 {
                // HARQ retransmissions first, oldest due time first.
                let mut due: Vec<usize> = (0..self.pending[i].len())
                    .filter(|&k| {
                        let p = &self.pending[i][k];
                        p.kind == PendingKind::Retransmit && p.due_us <= now
                    })
                    .collect();
                due.sort_by_key(|&k| (self.pending[i][k].due_us, self.pending[i][k].tb.id));
                // the block size is fixed; after a capacity drop it is
                // squeezed into whatever the grant leaves
                let mut taken = Vec::new();
                for k in due {
                    if remaining == 0 {
                        break;
                    }
                    let prbs = prbs_for(self.pending[i][k].tb.bytes).min(remaining);
                    remaining -= prbs;
                    taken.push((k, prbs));
                }
                taken.sort_unstable_by_key(|&(k, _)| std::cmp::Reverse(k));
                let mut rtx: Vec<TransportBlock> = taken
                    .into_iter()
                    .map(|(k, prbs)| {
                        let mut tb = self.pending[i].remove(k).tb;
                        tb.rtx_count += 1;
                        tb.prbs = prbs;
                        tb
                    })
                    .collect();
                rtx.sort_by_key(|tb| tb.id);
                if !rtx.is_empty() {
                    flows_out[i].harq_rtx = true;
                }
                to_send.extend(rtx);
            }

            if remaining > 0 && !self.flows[i].is_empty() {
                let max_tbs = slot_bytes(remaining);
                if max_tbs > self.cfg.tb_header_bytes + self.cfg.segment_header_bytes {
                    let segs = self.flows[i].take(max_tbs - self.cfg.tb_header_bytes, self.cfg.segment_header_bytes);
                    let payload: u32 = segs.iter().map(|s| s.bytes).sum();
                    let overhead = self.cfg.tb_header_bytes + self.cfg.segment_header_bytes * segs.len() as u32;
                    let prbs = prbs_for(payload + overhead).min(remaining);
                    let tb = TransportBlock {
                        id: self.next_tb_id,
                        flow_id: id,
                        bytes: slot_bytes(prbs),
                        overhead_bytes: overhead,
                        prbs,
                        rtx_count: 0,
                        created_tti: tti,
                        payload: segs,
                    };
                    self.next_tb_id += 1;
                    remaining -= prbs;
                    to_send.push(tb);
                }
            }

            let mut used = 0;
            for tb in to_send {
                used += tb.prbs;
                let forced = match self.scripted.get_mut(&tb.id) {
                    Some(k) if *k > 0 => {
                        *k -= 1;
                        true
                    }
                    _ => false,
                };
                let fail = forced || (self.cfg.bler > 0.0 && self.rng.gen::<f64>() < self.cfg.bler);
                flows_out[i].blocks.push(TbRecord {
                    tb_id: tb.id,
                    bytes: tb.bytes,
                    overhead_bytes: tb.overhead_bytes,
                    payload_bytes: tb.payload_bytes(),
                    prbs: tb.prbs,
                    rtx_count: tb.rtx_count,
                    success: !fail,
                    effective_fraction: tb.effective_fraction(),
                });
                if fail {
                    let next = tb.rtx_count + 1;
                    let kind = if tb.rtx_count < self.cfg.harq_max_rtx {
                        PendingKind::Retransmit
                    } else {
                        PendingKind::RlcReentry
                    };
                    self.pending[i].push(Pending {
                        due_us: now + self.cfg.harq_delay_us(next),
                        kind,
                        tb,
                    });
                } else {
                    for seg in &tb.payload {
                        self.delivered[i] += seg.bytes as u64;
                        deliveries.push(Delivery {
                            flow_id: id,
                            packet_id: seg.packet_id,
                            bytes: seg.bytes,
                            at_us: now + tti_us,
                        });
                    }
                }
            }
            flows_out[i].uprb = used;
            prb_used += used;
        }

        for (i, f) in self.flows.iter_mut().enumerate() {
            f.uprb_last = flows_out[i].uprb;
            f.active = flows_out[i].demand_prbs > 0 || !f.is_empty();
            sample_rlc_queue(f, now);
        }

        self.tti += 1;
        TtiReport {
            tti,
            start_us: now,
            slot,
            data_halves: halves,
            bytes_per_prb: bpp,
            prb_used,
            n_active,
            flows: flows_out,
            deliveries,
        }
    }
}
