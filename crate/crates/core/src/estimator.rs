//! Per-flow allocated bandwidth from radio-layer statistics.
//!
//! Every TTI the base station predicts, for each flow, the PRBs it will get
//! next, the physical rate one PRB carries, and from those the flow's
//! transport-layer bandwidth after header overhead and retransmissions.
//! Rates are in bytes per ms throughout.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::ran::{FlowTti, RanConfig, TtiReport};

/// PRB share at connection start: the cell's PRBs split over active flows.
pub fn initial_prb_share(prb_total: u32, n_active: u32) -> Result<f64> {
    if n_active == 0 {
        return Err(Error::NoActiveFlows);
    }
    Ok(prb_total as f64 / n_active as f64)
}

/// PRB share for the next TTI: last TTI's usage plus an equal part of the
/// idle PRBs, never below the share of an even split over all flows.
pub fn update_prb_share(uprb: f64, prb_total: u32, prb_used: u32, n_active: u32, n_total: u32) -> Result<f64> {
    if n_total == 0 {
        return Err(Error::NoFlows);
    }
    if n_active == 0 {
        return Err(Error::NoActiveFlows);
    }
    let idle = prb_total.saturating_sub(prb_used) as f64;
    Ok((uprb + idle / n_active as f64).max(prb_total as f64 / n_total as f64))
}

/// Physical rate of one PRB in bytes/ms, scaled by the share of TTIs that
/// carry downlink data.
pub fn per_prb_rate(tbs: f64, tti_len_ms: f64, prb_share: f64, dn: f64, tn: f64) -> Result<f64> {
    if tn <= 0.0 {
        return Err(Error::InsufficientWindow);
    }
    if prb_share <= 0.0 {
        return Ok(0.0);
    }
    Ok(tbs / (tti_len_ms * prb_share) * (dn / tn))
}

pub fn flow_capacity(prb_share: f64, per_prb_rate: f64) -> f64 {
    prb_share * per_prb_rate
}

/// HARQ retransmission TTIs over downlink data TTIs; 0 for an empty window.
pub fn retx_rate(hn: f64, dn_short: f64) -> f64 {
    if dn_short <= 0.0 {
        0.0
    } else {
        hn / dn_short
    }
}

pub fn alloc_bw(capacity: f64, gamma: f64, retx: f64) -> f64 {
    capacity * gamma / (1.0 + retx)
}

/// Effective-payload fraction used before any block has been observed.
pub const DEFAULT_GAMMA: f64 = 0.97;

/// Sliding-window counters for one flow at one TTI.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WindowStats {
    /// TTIs observed in the long (100 ms) window.
    pub tn: f64,
    /// Downlink data TTIs in the long window; special slots count one half.
    pub dn: f64,
    /// TTIs carrying a HARQ retransmission of this flow in the short window.
    pub hn: f64,
    /// Downlink data TTIs in the short (10 ms) window.
    pub dn_short: f64,
    /// PRBs used by all flows in the last TTI.
    pub prb_used: u32,
    /// Mean effective-payload fraction of this flow's blocks in the short window.
    pub gamma: f64,
    pub n_active: u32,
    pub n_total: u32,
}

#[derive(Clone, Debug)]
struct Window<T> {
    len: u64,
    items: VecDeque<(u64, T)>,
}

impl<T> Window<T> {
    fn new(len: usize) -> Self {
        Window {
            len: len.max(1) as u64,
            items: VecDeque::new(),
        }
    }

    fn push(&mut self, tti: u64, v: T) {
        self.items.push_back((tti, v));
    }

    fn evict(&mut self, tti: u64) {
        while let Some(&(t, _)) = self.items.front() {
            if t + self.len <= tti {
                self.items.pop_front();
            } else {
                break;
            }
        }
    }
}

#[derive(Clone, Debug)]
struct FlowWindows {
    rtx_halves: Window<u32>,
    gamma: Window<f64>,
}

/// Causal window statistics fed by the cell's per-TTI reports.
#[derive(Clone, Debug)]
pub struct RadioStats {
    long: Window<u32>,
    short: Window<u32>,
    flows: Vec<FlowWindows>,
    short_len: usize,
    last_prb_used: u32,
    last_n_active: u32,
    last_tti: Option<u64>,
}

impl RadioStats {
    pub fn new(cfg: &RanConfig) -> Self {
        Self::with_windows(cfg.ttis_in(100.0), cfg.ttis_in(10.0))
    }

    pub fn with_windows(long_ttis: usize, short_ttis: usize) -> Self {
        RadioStats {
            long: Window::new(long_ttis),
            short: Window::new(short_ttis),
            flows: Vec::new(),
            short_len: short_ttis,
            last_prb_used: 0,
            last_n_active: 0,
            last_tti: None,
        }
    }

    pub fn observe(&mut self, report: &TtiReport) {
        let t = report.tti;
        while self.flows.len() < report.flows.len() {
            self.flows.push(FlowWindows {
                rtx_halves: Window::new(self.short_len),
                gamma: Window::new(self.short_len),
            });
        }
        self.long.push(t, report.data_halves);
        self.short.push(t, report.data_halves);
        self.long.evict(t);
        self.short.evict(t);
        for (fw, ft) in self.flows.iter_mut().zip(&report.flows) {
            if ft.harq_rtx {
                fw.rtx_halves.push(t, report.data_halves);
            }
            for b in &ft.blocks {
                fw.gamma.push(t, b.effective_fraction);
            }
            fw.rtx_halves.evict(t);
            fw.gamma.evict(t);
        }
        self.last_prb_used = report.prb_used;
        self.last_n_active = report.n_active;
        self.last_tti = Some(t);
    }

    pub fn snapshot(&self, flow: usize) -> WindowStats {
        let halves = |w: &Window<u32>| w.items.iter().map(|&(_, h)| h as f64).sum::<f64>() / 2.0;
        let (hn, gamma) = match self.flows.get(flow) {
            Some(fw) => {
                let g = if fw.gamma.items.is_empty() {
                    DEFAULT_GAMMA
                } else {
                    fw.gamma.items.iter().map(|&(_, g)| g).sum::<f64>() / fw.gamma.items.len() as f64
                };
                (halves(&fw.rtx_halves), g)
            }
            None => (0.0, DEFAULT_GAMMA),
        };
        WindowStats {
            tn: self.long.items.len() as f64,
            dn: halves(&self.long),
            hn,
            dn_short: halves(&self.short),
            prb_used: self.last_prb_used,
            gamma,
            n_active: self.last_n_active,
            n_total: self.flows.len() as u32,
        }
    }
}

/// Estimator output for one flow and TTI.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct FlowCapacity {
    pub prb_share: f64,
    pub per_prb_rate: f64,
    pub capacity: f64,
    pub retx: f64,
    pub gamma: f64,
    pub alloc_bw: f64,
}

/// Stateful per-flow capacity estimator.
#[derive(Clone, Debug, Default)]
pub struct CapacityEstimator {
    /// (TBS, PRBs) of the most recent block sent in a full downlink slot.
    last_block: Option<(f64, f64)>,
    last_retx: f64,
    started: bool,
}

impl CapacityEstimator {
    pub fn new() -> Self {
        Self::default()
    }

    /// Updates the estimate after a TTI. `nominal_bpp` is the per-PRB block
    /// size the scheduler would use in a full downlink slot; it stands in
    /// for the measured value until the flow has sent a block.
    pub fn update(
        &mut self,
        stats: &WindowStats,
        flow: &FlowTti,
        data_halves: u32,
        prb_total: u32,
        tti_len_ms: f64,
        nominal_bpp: u32,
    ) -> FlowCapacity {
        if data_halves == 2 {
            // retransmissions keep their original size, so only fresh blocks
            // reflect the current rate
            if let Some(b) = flow.blocks.iter().rev().find(|b| b.rtx_count == 0) {
                self.last_block = Some((b.bytes as f64, b.prbs as f64));
            }
        }
        let prb_share = if stats.n_total == 0 {
            0.0
        } else if stats.n_active == 0 {
            prb_total as f64 / stats.n_total as f64
        } else if !self.started {
            self.started = true;
            initial_prb_share(prb_total, stats.n_active).unwrap_or(0.0)
        } else {
            // an idle flow asks what it would get on joining the active set
            let idle_self = flow.uprb == 0 && flow.demand_prbs == 0 && !flow.harq_rtx;
            let n_active = (stats.n_active + idle_self as u32).min(stats.n_total);
            update_prb_share(flow.uprb as f64, prb_total, stats.prb_used, n_active, stats.n_total).unwrap_or(0.0)
        };
        let (tbs, prbs) = self.last_block.unwrap_or((nominal_bpp as f64, 1.0));
        let pr = per_prb_rate(tbs, tti_len_ms, prbs, stats.dn, stats.tn).unwrap_or(0.0);
        let capacity = flow_capacity(prb_share, pr);
        if stats.dn_short > 0.0 {
            self.last_retx = retx_rate(stats.hn, stats.dn_short);
        }
        let bw = alloc_bw(capacity, stats.gamma, self.last_retx);
        FlowCapacity {
            prb_share,
            per_prb_rate: pr,
            capacity,
            retx: self.last_retx,
            gamma: stats.gamma,
            alloc_bw: bw,
        }
    }
}
