//! Closed-loop world: senders, wired links, the cell, receivers and the
//! uplink ACK path, driven by one clock.
//!
//! Sender-side and wired-link events live in a time-ordered queue. Before
//! each TTI every event due at or before the TTI start is processed, so a
//! packet reaching the base station exactly at a slot boundary is eligible
//! for that slot. Receivers ACK every `ack_per_frames` completed frames; the
//! UE sends pending ACKs in the next uplink slot, the base station stamps its
//! feedback when the slot ends, and the ACK reaches the sender one wired
//! delay later.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::baselines::{oracle_rate, scone_target_rate, Controller, SconeFeedback};
use crate::codec::{decode_rate, encode_rate, GuidanceFeedback};
use crate::error::{Error, Result};
use crate::estimator::{CapacityEstimator, FlowCapacity, RadioStats};
use crate::eventlog::{EventKind, EventLog, LogLevel};
use crate::metrics::{compute_metrics, FrameRecord, RunMetrics};
use crate::predictor::{FlowPredictor, PredictorConfig, DEFAULT_ETA};
use crate::ran::{Cell, RanConfig, TtiReport};
use crate::sender::{packetize, SenderConfig, SenderState};
use crate::{ms_to_us, us_to_ms, FlowId, Micros};

/// Time simulated after the last frame tick so in-flight frames can land.
pub const DRAIN_TAIL_US: Micros = 500_000;

const PACKET_INDEX_BITS: u32 = 16;

#[derive(Clone, Debug)]
pub struct FlowSpec {
    pub controller: Controller,
    pub wired_nd_ms: f64,
    pub ack_per_frames: u32,
    pub sender: SenderConfig,
    pub start_us: Micros,
    pub stop_us: Option<Micros>,
    /// Offset of the first frame tick after `start_us`; drawn from the run
    /// seed when unset.
    pub phase_us: Option<Micros>,
    pub eta: f64,
}

impl Default for FlowSpec {
    fn default() -> Self {
        FlowSpec {
            controller: Controller::Choir,
            wired_nd_ms: 1.0,
            ack_per_frames: 1,
            sender: SenderConfig::default(),
            start_us: 0,
            stop_us: None,
            phase_us: None,
            eta: DEFAULT_ETA,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SimConfig {
    pub ran: RanConfig,
    pub flows: Vec<FlowSpec>,
    pub duration_us: Micros,
    pub warmup_us: Micros,
    pub seed: u64,
    pub log_level: LogLevel,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        self.ran.validate()?;
        if self.flows.is_empty() {
            return Err(Error::NoFlows);
        }
        if self.duration_us == 0 {
            return Err(Error::Config("duration must be positive".into()));
        }
        if self.warmup_us >= self.duration_us {
            return Err(Error::Config("warm-up must be shorter than the run".into()));
        }
        for (i, f) in self.flows.iter().enumerate() {
            let bad = |m: &str| Err(Error::Config(format!("flow {i}: {m}")));
            if !(f.wired_nd_ms >= 0.0) {
                return bad("wired_nd must be >= 0");
            }
            if f.ack_per_frames == 0 {
                return bad("ack_per_frames must be >= 1");
            }
            if f.sender.epsilon == 0 {
                return bad("epsilon must be >= 1");
            }
            if !(f.sender.rho > 1.0) {
                return bad("rho must be > 1");
            }
            if !(f.eta > 0.0 && f.eta <= 1.0) {
                return bad("eta must be in (0, 1]");
            }
            if f.stop_us.is_some_and(|s| s <= f.start_us) {
                return bad("stop must be after start");
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
enum AckPayload {
    Guidance(GuidanceFeedback),
    Scone([GuidanceFeedback; 2]),
}

#[derive(Clone, Debug)]
enum Ev {
    FrameTick(usize),
    PacketSend(usize),
    PacketArrive { flow: usize, packet_id: u64, bytes: u32 },
    AckArrive { flow: usize, acked_bytes: u64, payload: AckPayload },
}

#[derive(Debug)]
struct Scheduled {
    at: Micros,
    seq: u64,
    ev: Ev,
}

impl PartialEq for Scheduled {
    fn eq(&self, other: &Self) -> bool {
        (self.at, self.seq) == (other.at, other.seq)
    }
}

impl Eq for Scheduled {}

impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Scheduled {
    fn cmp(&self, other: &Self) -> Ordering {
        (other.at, other.seq).cmp(&(self.at, self.seq))
    }
}

#[derive(Clone, Debug)]
struct FrameState {
    rec: FrameRecord,
    remaining: u64,
}

#[derive(Debug)]
struct FlowRuntime {
    spec: FlowSpec,
    id: FlowId,
    sender: SenderState,
    estimator: CapacityEstimator,
    capacity: FlowCapacity,
    predictor: FlowPredictor,
    pacer: VecDeque<(u64, u32)>,
    pacer_busy_until: Micros,
    pacer_scheduled: bool,
    frames: Vec<FrameState>,
    completed_since_ack: u32,
    bytes_since_ack: u64,
    ue_acks: Vec<u64>,
    wired_us: Micros,
    first_tick_us: Micros,
}

impl FlowRuntime {
    fn is_on(&self, now: Micros) -> bool {
        now >= self.spec.start_us && self.spec.stop_us.is_none_or(|s| now < s)
    }
}

/// Outcome of a finished run.
#[derive(Clone, Debug)]
pub struct SimResult {
    pub metrics: RunMetrics,
    pub frames: Vec<FrameRecord>,
    pub log: EventLog,
}

pub struct SimWorld {
    cfg: SimConfig,
    cell: Cell,
    stats: RadioStats,
    flows: Vec<FlowRuntime>,
    events: BinaryHeap<Scheduled>,
    seq: u64,
    log: EventLog,
    end_us: Micros,
}

impl SimWorld {
    pub fn new(cfg: SimConfig) -> Result<Self> {
        cfg.validate()?;
        let mut cell = Cell::new(cfg.ran.clone(), cfg.seed)?;
        let stats = RadioStats::new(&cfg.ran);
        let mut phase_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_f1a9_e000_0001);
        let mut flows = Vec::with_capacity(cfg.flows.len());
        for spec in &cfg.flows {
            let id = cell.add_flow(spec.wired_nd_ms);
            let phase = match spec.phase_us {
                Some(p) => p,
                None => phase_rng.gen_range(0..spec.sender.frame_interval_us),
            };
            let pcfg = PredictorConfig {
                eta: spec.eta,
                ..PredictorConfig::new(cfg.ran.tti_len_ms, spec.wired_nd_ms)
            };
            flows.push(FlowRuntime {
                id,
                sender: SenderState::new(spec.sender.clone()),
                estimator: CapacityEstimator::new(),
                capacity: FlowCapacity::default(),
                predictor: FlowPredictor::new(pcfg),
                pacer: VecDeque::new(),
                pacer_busy_until: 0,
                pacer_scheduled: false,
                frames: Vec::new(),
                completed_since_ack: 0,
                bytes_since_ack: 0,
                ue_acks: Vec::new(),
                wired_us: ms_to_us(spec.wired_nd_ms),
                first_tick_us: spec.start_us + phase,
                spec: spec.clone(),
            });
        }
        let mut world = SimWorld {
            end_us: cfg.duration_us + DRAIN_TAIL_US,
            log: EventLog::new(cfg.log_level),
            cfg,
            cell,
            stats,
            flows,
            events: BinaryHeap::new(),
            seq: 0,
        };
        for i in 0..world.flows.len() {
            let t = world.flows[i].first_tick_us;
            if t < world.cfg.duration_us {
                world.schedule(t, Ev::FrameTick(i));
            }
        }
        Ok(world)
    }

    fn schedule(&mut self, at: Micros, ev: Ev) {
        self.seq += 1;
        self.events.push(Scheduled { at, seq: self.seq, ev });
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn now_us(&self) -> Micros {
        self.cell.now_us()
    }

    pub fn end_us(&self) -> Micros {
        self.end_us
    }

    pub fn is_finished(&self) -> bool {
        self.cell.now_us() >= self.end_us
    }

    pub fn cell(&self) -> &Cell {
        &self.cell
    }

    pub fn cell_mut(&mut self) -> &mut Cell {
        &mut self.cell
    }

    pub fn flow_count(&self) -> usize {
        self.flows.len()
    }

    pub fn predictor(&self, flow: usize) -> &FlowPredictor {
        &self.flows[flow].predictor
    }

    pub fn sender(&self, flow: usize) -> &SenderState {
        &self.flows[flow].sender
    }

    pub fn capacity_estimate(&self, flow: usize) -> &FlowCapacity {
        &self.flows[flow].capacity
    }

    pub fn frames(&self, flow: usize) -> impl Iterator<Item = &FrameRecord> + '_ {
        self.flows[flow].frames.iter().map(|f| &f.rec)
    }

    /// Bytes waiting in the sender's pacer.
    pub fn pacer_backlog(&self, flow: usize) -> u64 {
        self.flows[flow].pacer.iter().map(|&(_, b)| b as u64).sum()
    }

    pub fn log(&self) -> &EventLog {
        &self.log
    }

    /// Processes queued events due at or before `t`.
    fn process_events(&mut self, t: Micros) {
        while self.events.peek().is_some_and(|s| s.at <= t) {
            let Scheduled { at, ev, .. } = self.events.pop().expect("peeked");
            match ev {
                Ev::FrameTick(i) => self.on_frame_tick(i, at),
                Ev::PacketSend(i) => self.on_packet_send(i, at),
                Ev::PacketArrive { flow, packet_id, bytes } => {
                    let f = &mut self.flows[flow];
                    self.cell
                        .enqueue(f.id, packet_id, bytes, at)
                        .expect("flow registered");
                    if f.spec.controller == Controller::Choir {
                        f.predictor.on_packet(us_to_ms(at), bytes);
                    }
                    self.log.push(
                        at,
                        EventKind::PacketEnqueue,
                        Some(f.id.0),
                        bytes as u64,
                        format!("pkt={packet_id}"),
                    );
                }
                Ev::AckArrive {
                    flow,
                    acked_bytes,
                    payload,
                } => self.on_ack_arrive(flow, at, acked_bytes, payload),
            }
        }
    }

    fn on_frame_tick(&mut self, i: usize, now: Micros) {
        let duration = self.cfg.duration_us;
        let f = &mut self.flows[i];
        if !f.is_on(now) {
            self.log.push(now, EventKind::FlowStop, Some(f.id.0), 0, "");
            return;
        }
        let frame = f.sender.encode_frame(now);
        if frame.frame_id == 0 {
            self.log.push(now, EventKind::FlowStart, Some(f.id.0), 0, "");
        }
        self.log.push(
            now,
            EventKind::FrameEncode,
            Some(f.id.0),
            frame.bytes,
            format!(
                "frame={};target={:.0};actual={:.0};pacing={:.0}",
                frame.frame_id, frame.target_bps, frame.actual_bps, frame.pacing_bps
            ),
        );
        for (k, bytes) in packetize(frame.bytes, f.sender.cfg.packet_payload).into_iter().enumerate() {
            f.pacer.push_back(((frame.frame_id << PACKET_INDEX_BITS) | k as u64, bytes));
        }
        f.frames.push(FrameState {
            rec: FrameRecord {
                flow_id: f.id.0,
                frame_id: frame.frame_id,
                encode_us: now,
                decode_us: None,
                bytes: frame.bytes,
            },
            remaining: frame.bytes,
        });
        let next = now + f.sender.cfg.frame_interval_us;
        let start_pacer = !f.pacer_scheduled;
        let send_at = now.max(f.pacer_busy_until);
        if start_pacer {
            f.pacer_scheduled = true;
            self.schedule(send_at, Ev::PacketSend(i));
        }
        if next < duration {
            self.schedule(next, Ev::FrameTick(i));
        }
    }

    fn on_packet_send(&mut self, i: usize, now: Micros) {
        let f = &mut self.flows[i];
        let Some((packet_id, bytes)) = f.pacer.pop_front() else {
            f.pacer_scheduled = false;
            return;
        };
        let arrive = now + f.wired_us;
        f.pacer_busy_until = now + f.sender.pacing_gap_us(bytes);
        let more = !f.pacer.is_empty();
        let next = f.pacer_busy_until;
        f.pacer_scheduled = more;
        self.schedule(arrive, Ev::PacketArrive { flow: i, packet_id, bytes });
        if more {
            self.schedule(next, Ev::PacketSend(i));
        }
    }

    fn on_ack_arrive(&mut self, i: usize, now: Micros, acked_bytes: u64, payload: AckPayload) {
        let f = &mut self.flows[i];
        f.sender.on_ack(now, acked_bytes);
        let (rate_bps, stamped) = match payload {
            AckPayload::Guidance(fb) => (decode_rate(&fb), fb.stamped_ts),
            AckPayload::Scone(fields) => (
                SconeFeedback::from_wire(&fields).map(|fb| scone_target_rate(&fb) * 8000.0),
                fields[0].stamped_ts,
            ),
        };
        f.sender.on_feedback(rate_bps, stamped);
        self.log.push(
            now,
            EventKind::AckArrive,
            Some(f.id.0),
            acked_bytes,
            format!("rate={:.0};stamp={}", rate_bps.unwrap_or(-1.0), stamped),
        );
    }

    fn on_delivery(&mut self, i: usize, packet_id: u64, bytes: u32, at: Micros) {
        let f = &mut self.flows[i];
        let frame_id = (packet_id >> PACKET_INDEX_BITS) as usize;
        f.bytes_since_ack += bytes as u64;
        let fs = &mut f.frames[frame_id];
        if fs.rec.decode_us.is_some() {
            return;
        }
        fs.remaining -= bytes as u64;
        if fs.remaining == 0 {
            fs.rec.decode_us = Some(at);
            self.log.push(
                at,
                EventKind::FrameDecode,
                Some(f.id.0),
                fs.rec.bytes,
                format!("frame={}", fs.rec.frame_id),
            );
            f.completed_since_ack += 1;
            if f.completed_since_ack >= f.spec.ack_per_frames {
                f.ue_acks.push(f.bytes_since_ack);
                f.completed_since_ack = 0;
                f.bytes_since_ack = 0;
            }
        }
    }

    /// Sends the UE's pending ACKs; the base station stamps them at `stamp`.
    fn flush_acks(&mut self, stamp: Micros) {
        let n_on = self.flows.iter().filter(|f| f.is_on(stamp)).count().max(1);
        let fair = self.cell.fair_capacity(n_on);
        for i in 0..self.flows.len() {
            if self.flows[i].ue_acks.is_empty() {
                continue;
            }
            let acks = std::mem::take(&mut self.flows[i].ue_acks);
            let f = &mut self.flows[i];
            let payload = match f.spec.controller {
                Controller::Choir => {
                    let fb = encode_rate(f.predictor.guidance() * 8000.0, stamp);
                    if let Some(bps) = decode_rate(&fb) {
                        f.predictor.record_feedback(us_to_ms(stamp), bps / 8000.0);
                    }
                    AckPayload::Guidance(fb)
                }
                Controller::Scone => {
                    let q = self.cell.flow(f.id).queued_bytes() as f64;
                    AckPayload::Scone(SconeFeedback::new(f.capacity.alloc_bw, q).to_wire(stamp))
                }
                Controller::Oracle => AckPayload::Guidance(encode_rate(oracle_rate(fair) * 8000.0, stamp)),
            };
            let arrive = stamp + f.wired_us;
            let id = f.id.0;
            for acked in acks {
                self.log.push(stamp, EventKind::AckSend, Some(id), acked, "");
                self.schedule(
                    arrive,
                    Ev::AckArrive {
                        flow: i,
                        acked_bytes: acked,
                        payload: payload.clone(),
                    },
                );
            }
        }
    }

    /// Runs one TTI of the closed loop and returns the cell's report.
    pub fn step(&mut self) -> TtiReport {
        let t0 = self.cell.now_us();
        self.process_events(t0);
        let report = self.cell.advance_tti();
        self.stats.observe(&report);
        let prb_total = self.cfg.ran.prb_total;
        let tti_ms = self.cfg.ran.tti_len_ms;
        for (i, f) in self.flows.iter_mut().enumerate() {
            if f.spec.controller == Controller::Oracle {
                continue;
            }
            let ws = self.stats.snapshot(i);
            f.capacity = f.estimator.update(
                &ws,
                &report.flows[i],
                report.data_halves,
                prb_total,
                tti_ms,
                report.bytes_per_prb,
            );
            if f.spec.controller == Controller::Choir {
                let p = f
                    .predictor
                    .on_tti(us_to_ms(t0), f.capacity.alloc_bw, &self.cell.flow(f.id).samples);
                if self.log.level() == LogLevel::Full {
                    self.log.push(
                        t0,
                        EventKind::Prediction,
                        Some(f.id.0),
                        p.pred_q.round() as u64,
                        format!(
                            "bw={:.3};mean_bw={:.3};fi={:.3};guidance={:.3}",
                            f.capacity.alloc_bw, p.mean_bw, p.fi, p.guidance
                        ),
                    );
                }
            }
            if self.log.level() == LogLevel::Full {
                for b in report.flows[i].blocks.iter().filter(|b| !b.success) {
                    self.log.push(
                        t0,
                        EventKind::BlockFail,
                        Some(f.id.0),
                        b.bytes as u64,
                        format!("tb={};rtx={}", b.tb_id, b.rtx_count),
                    );
                }
            }
        }
        for d in &report.deliveries {
            self.log.push(
                d.at_us,
                EventKind::Delivery,
                Some(d.flow_id.0),
                d.bytes as u64,
                format!("pkt={}", d.packet_id),
            );
            self.on_delivery(d.flow_id.index(), d.packet_id, d.bytes, d.at_us);
        }
        if report.is_uplink() {
            self.flush_acks(t0 + self.cfg.ran.tti_us());
        }
        report
    }

    /// Steps until the clock reaches `t` (or the end of the run).
    pub fn run_until(&mut self, t: Micros) {
        while self.cell.now_us() < t.min(self.end_us) {
            self.step();
        }
    }

    pub fn all_frames(&self) -> Vec<FrameRecord> {
        self.flows
            .iter()
            .flat_map(|f| f.frames.iter().map(|s| s.rec.clone()))
            .collect()
    }

    pub fn metrics(&self) -> RunMetrics {
        let ids: Vec<u32> = self.flows.iter().map(|f| f.id.0).collect();
        let fi = self.flows.first().map_or(16_600, |f| f.sender.cfg.frame_interval_us);
        compute_metrics(&self.all_frames(), &ids, (self.cfg.warmup_us, self.cfg.duration_us), fi)
    }

    pub fn run(mut self) -> SimResult {
        self.run_until(self.end_us);
        let frames = self.all_frames();
        SimResult {
            metrics: self.metrics(),
            frames,
            log: self.log,
        }
    }
}
