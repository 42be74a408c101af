//! Queue-aware guidance bandwidth for one video flow.
//!
//! The base station does not know the sender's frame size or frame rate. It
//! infers the frame interval from gaps between enqueued packets, predicts how
//! much data is already committed to its queue before a new rate can take
//! effect, and feeds back the rate that leaves the queue empty by the next
//! frame while using a fraction `eta` of the allocated bandwidth.
//!
//! Times are in ms, rates in bytes/ms, queue sizes in bytes.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::ran::QueueSamples;
use crate::{ms_to_us, Micros, FRAME_INTERVAL_MS};

pub const DEFAULT_ALPHA: f64 = 0.8;
pub const DEFAULT_ETA: f64 = 0.95;
pub const DEFAULT_GAP_THRESHOLD_MS: f64 = 4.0;
/// Weight of the newest discrepancy in the error-correction EWMA.
pub const ERROR_WEIGHT: f64 = 0.5;

/// Two consecutive packets belong to different frames when the gap between
/// them is strictly larger than the threshold.
pub fn detect_frame_boundary(prev_pkt_ts: f64, pkt_ts: f64, gap_threshold: f64) -> bool {
    pkt_ts - prev_pkt_ts > gap_threshold
}

/// Frame interval tracking from packet arrival times.
#[derive(Clone, Debug, PartialEq)]
pub struct FramePatternState {
    fi_est: Option<f64>,
    pub alpha: f64,
    pub last_frame_head_ts: Option<f64>,
    pub last_frame_tail_ts: Option<f64>,
    pub gap_threshold: f64,
}

impl Default for FramePatternState {
    fn default() -> Self {
        FramePatternState {
            fi_est: None,
            alpha: DEFAULT_ALPHA,
            last_frame_head_ts: None,
            last_frame_tail_ts: None,
            gap_threshold: DEFAULT_GAP_THRESHOLD_MS,
        }
    }
}

impl FramePatternState {
    pub fn fi_est(&self) -> Option<f64> {
        self.fi_est
    }

    /// EWMA update `alpha * old + (1 - alpha) * new`; the first observation
    /// seeds the estimate. Non-positive observations are rejected.
    pub fn update_frame_interval(&mut self, new_fi: f64) -> Result<f64> {
        if !(new_fi > 0.0) {
            return Err(Error::NonPositiveInterval(new_fi));
        }
        let fi = match self.fi_est {
            Some(old) => self.alpha * old + (1.0 - self.alpha) * new_fi,
            None => new_fi,
        };
        self.fi_est = Some(fi);
        Ok(fi)
    }
}

/// Number of TTIs in one frame interval, at least one.
pub fn n_tti_for(fi: f64, tti_len: f64) -> usize {
    ((fi / tti_len).round() as usize).max(1)
}

/// Mean of the last `n_tti` per-TTI bandwidth samples, or of all samples
/// while fewer are available.
pub fn mean_alloc_bw(bw_samples: &[f64], n_tti: usize) -> f64 {
    let n = n_tti.max(1).min(bw_samples.len());
    if n == 0 {
        return 0.0;
    }
    bw_samples[bw_samples.len() - n..].iter().sum::<f64>() / n as f64
}

/// Frames in flight plus frames generated while feedback travels back.
pub fn inflight_frame_count(wired_nd: f64, fi: f64) -> u32 {
    (2.0 * wired_nd / fi).floor() as u32 + 1
}

pub fn decision_horizon(tti_len: f64, fi: f64, fnum: u32) -> f64 {
    tti_len + fi * fnum as f64
}

/// Lookback interval for historical feedback, returned as `(min, max)`.
///
/// The two bounds are `now - fi*(fnum-1) - 2*wired_nd` and
/// `now - fi*fnum - 2*wired_nd`.
pub fn history_window(now: f64, fi: f64, fnum: u32, wired_nd: f64) -> (f64, f64) {
    let a = now - fi * (fnum as f64 - 1.0) - 2.0 * wired_nd;
    let b = now - fi * fnum as f64 - 2.0 * wired_nd;
    (a.min(b), a.max(b))
}

/// Minimum sampled queue length with timestamp in `(now - window, now]`;
/// zero when no sample falls in the window.
pub fn min_rlc_queue<'a>(
    samples: impl IntoIterator<Item = &'a (Micros, u64)>,
    window: f64,
    now: f64,
) -> u64 {
    let now_us = ms_to_us(now);
    let lo = now_us.saturating_sub(ms_to_us(window));
    samples
        .into_iter()
        .filter(|&&(ts, _)| ts > lo && ts <= now_us)
        .map(|&(_, q)| q)
        .min()
        .unwrap_or(0)
}

/// Predicted queue when the next rate decision reaches the queue: committed
/// arrivals (`his_bw - err` per frame) plus the current queue, minus what the
/// allocated bandwidth drains over the horizon. Clamped at zero.
pub fn predict_queue(hist: &[(f64, f64)], fi: f64, rlc_q_min: f64, mean_bw: f64, t_horizon: f64) -> f64 {
    let incoming: f64 = hist.iter().map(|&(bw, e)| (bw - e) * fi).sum();
    (incoming + rlc_q_min - mean_bw * t_horizon).max(0.0)
}

pub fn drain_rate(pred_q: f64, fi: f64) -> f64 {
    pred_q / fi
}

pub fn guidance_bw(mean_bw: f64, drain_rate: f64, eta: f64) -> f64 {
    (eta * mean_bw - drain_rate).max(0.0)
}

/// Feedback values previously stamped on ACKs for one flow.
#[derive(Clone, Debug)]
pub struct FeedbackHistory {
    ring: VecDeque<(f64, f64)>,
    err_est: f64,
    capacity: usize,
}

impl FeedbackHistory {
    pub fn new(capacity: usize) -> Self {
        FeedbackHistory {
            ring: VecDeque::new(),
            err_est: 0.0,
            capacity: capacity.max(1),
        }
    }

    pub fn err_est(&self) -> f64 {
        self.err_est
    }

    pub fn len(&self) -> usize {
        self.ring.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ring.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = &(f64, f64)> + '_ {
        self.ring.iter()
    }

    /// Records a stamped value. Timestamps must strictly increase; a value
    /// with a stale or duplicate timestamp is dropped.
    pub fn record(&mut self, ts: f64, his_bw: f64) -> bool {
        if self.ring.back().is_some_and(|&(t, _)| ts <= t) {
            return false;
        }
        if self.ring.len() == self.capacity {
            self.ring.pop_front();
        }
        self.ring.push_back((ts, his_bw));
        true
    }

    /// Entries with timestamp in `[lo, hi]`, or the single latest entry at or
    /// before `hi` when none falls inside.
    pub fn select(&self, lo: f64, hi: f64) -> Vec<(f64, f64)> {
        let inside: Vec<(f64, f64)> = self
            .ring
            .iter()
            .copied()
            .filter(|&(t, _)| t >= lo && t <= hi)
            .collect();
        if !inside.is_empty() {
            return inside;
        }
        self.ring
            .iter()
            .rev()
            .find(|&&(t, _)| t <= hi)
            .copied()
            .into_iter()
            .collect()
    }

    /// Builds the `fnum` feedback values that govern in-flight frames: the
    /// selection for `[lo, hi]`, extended with newer entries in time order
    /// and then with the last value if the history runs out. `None` when
    /// the history is empty.
    pub fn in_flight_values(&self, lo: f64, hi: f64, fnum: u32) -> Option<Vec<f64>> {
        if self.ring.is_empty() {
            return None;
        }
        let fnum = fnum.max(1) as usize;
        let selected = self.select(lo, hi);
        let skip = selected.len().saturating_sub(fnum);
        let mut out: Vec<f64> = selected[skip..].iter().map(|&(_, bw)| bw).collect();
        let newer = self.ring.iter().filter(|&&(t, _)| t > hi).map(|&(_, bw)| bw);
        for bw in newer {
            if out.len() >= fnum {
                break;
            }
            out.push(bw);
        }
        let last = *out.last().expect("non-empty");
        out.resize(fnum, last);
        Some(out)
    }

    /// `err <- (1 - w) * err + w * (predicted - actual)`.
    pub fn update_error_correction(&mut self, hist_entry: f64, actual_arrival_rate: f64) -> f64 {
        self.err_est = (1.0 - ERROR_WEIGHT) * self.err_est + ERROR_WEIGHT * (hist_entry - actual_arrival_rate);
        self.err_est
    }
}

/// Everything computed in one prediction step.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct QueuePrediction {
    pub now: f64,
    pub fi: f64,
    pub rlc_q_min: f64,
    pub fnum: u32,
    pub t_horizon: f64,
    pub lower_t: f64,
    pub upper_t: f64,
    /// Raw feedback values used for the in-flight frames, oldest first.
    pub hist: Vec<f64>,
    pub err: f64,
    pub pred_q: f64,
    pub drain_rate: f64,
    pub mean_bw: f64,
    pub n_tti: usize,
    pub guidance: f64,
    pub eta: f64,
    pub warm_up: bool,
}

/// Inputs of a single prediction step.
#[derive(Clone, Debug)]
pub struct PredictionInputs<'a> {
    /// Current frame interval estimate; `None` before any frame was seen.
    pub fi_prev: Option<f64>,
    /// A newly measured frame interval to fold in before predicting.
    pub fi_new: Option<f64>,
    pub alpha: f64,
    pub bw_samples: &'a [f64],
    pub tti_len: f64,
    pub wired_nd: f64,
    pub now: f64,
    pub history: &'a FeedbackHistory,
    pub rlc_q_min: f64,
    pub eta: f64,
}

/// One full prediction step: frame interval, mean allocated bandwidth,
/// in-flight frames, horizon, predicted queue, drain rate and guidance.
pub fn predict(inp: &PredictionInputs<'_>) -> QueuePrediction {
    let fi = match (inp.fi_prev, inp.fi_new) {
        (Some(old), Some(new)) => inp.alpha * old + (1.0 - inp.alpha) * new,
        (None, Some(new)) => new,
        (Some(old), None) => old,
        (None, None) => FRAME_INTERVAL_MS,
    };
    let seen_frame = inp.fi_prev.is_some() || inp.fi_new.is_some();
    let n_tti = n_tti_for(fi, inp.tti_len);
    let mean_bw = mean_alloc_bw(inp.bw_samples, n_tti);
    let fnum = inflight_frame_count(inp.wired_nd, fi);
    let t_horizon = decision_horizon(inp.tti_len, fi, fnum);
    let (lower_t, upper_t) = history_window(inp.now, fi, fnum, inp.wired_nd);
    let err = inp.history.err_est();
    let hist = if seen_frame {
        inp.history.in_flight_values(lower_t, upper_t, fnum)
    } else {
        None
    };
    let (hist, pred_q, warm_up) = match hist {
        Some(h) => {
            let pairs: Vec<(f64, f64)> = h.iter().map(|&bw| (bw, err)).collect();
            let q = predict_queue(&pairs, fi, inp.rlc_q_min, mean_bw, t_horizon);
            (h, q, false)
        }
        None => (Vec::new(), inp.rlc_q_min, true),
    };
    let dr = drain_rate(pred_q, fi);
    QueuePrediction {
        now: inp.now,
        fi,
        rlc_q_min: inp.rlc_q_min,
        fnum,
        t_horizon,
        lower_t,
        upper_t,
        hist,
        err,
        pred_q,
        drain_rate: dr,
        mean_bw,
        n_tti,
        guidance: guidance_bw(mean_bw, dr, inp.eta),
        eta: inp.eta,
        warm_up,
    }
}

#[derive(Clone, Debug)]
pub struct PredictorConfig {
    pub eta: f64,
    pub alpha: f64,
    pub gap_threshold_ms: f64,
    pub tti_len_ms: f64,
    pub wired_nd_ms: f64,
}

impl PredictorConfig {
    pub fn new(tti_len_ms: f64, wired_nd_ms: f64) -> Self {
        PredictorConfig {
            eta: DEFAULT_ETA,
            alpha: DEFAULT_ALPHA,
            gap_threshold_ms: DEFAULT_GAP_THRESHOLD_MS,
            tti_len_ms,
            wired_nd_ms,
        }
    }
}

const BW_RING: usize = 1024;

/// Per-flow predictor driven by packet arrivals and the TTI loop.
#[derive(Clone, Debug)]
pub struct FlowPredictor {
    cfg: PredictorConfig,
    pattern: FramePatternState,
    history: FeedbackHistory,
    bw: VecDeque<f64>,
    last_pkt_ts: Option<f64>,
    frame_bytes: u64,
    expected_for_frame: Option<f64>,
    last: QueuePrediction,
}

impl FlowPredictor {
    pub fn new(cfg: PredictorConfig) -> Self {
        let pattern = FramePatternState {
            alpha: cfg.alpha,
            gap_threshold: cfg.gap_threshold_ms,
            ..FramePatternState::default()
        };
        FlowPredictor {
            cfg,
            pattern,
            history: FeedbackHistory::new(64),
            bw: VecDeque::with_capacity(BW_RING),
            last_pkt_ts: None,
            frame_bytes: 0,
            expected_for_frame: None,
            last: QueuePrediction::default(),
        }
    }

    pub fn pattern(&self) -> &FramePatternState {
        &self.pattern
    }

    pub fn history(&self) -> &FeedbackHistory {
        &self.history
    }

    pub fn last_prediction(&self) -> &QueuePrediction {
        &self.last
    }

    pub fn guidance(&self) -> f64 {
        self.last.guidance
    }

    /// Packet enqueued at the base station at `ts` (ms).
    pub fn on_packet(&mut self, ts: f64, bytes: u32) {
        match self.last_pkt_ts {
            None => self.pattern.last_frame_head_ts = Some(ts),
            Some(prev) if detect_frame_boundary(prev, ts, self.pattern.gap_threshold) => {
                self.pattern.last_frame_tail_ts = Some(prev);
                if let Some(head) = self.pattern.last_frame_head_ts {
                    // paced frames can leave gaps under the threshold; a span
                    // covering k intervals counts as k merged frames
                    let span = ts - head;
                    let k = self.pattern.fi_est().map_or(1.0, |fi| (span / fi).round().max(1.0));
                    if let Ok(fi) = self.pattern.update_frame_interval(span / k) {
                        if k == 1.0 {
                            let actual = self.frame_bytes as f64 / fi;
                            if let Some(expected) = self.expected_for_frame {
                                self.history.update_error_correction(expected, actual);
                            }
                        }
                    }
                }
                self.pattern.last_frame_head_ts = Some(ts);
                self.frame_bytes = 0;
                self.expected_for_frame = self.last.hist.first().copied();
            }
            Some(_) => {}
        }
        self.frame_bytes += bytes as u64;
        self.last_pkt_ts = Some(ts);
    }

    /// Feedback value stamped on an ACK at `ts`.
    pub fn record_feedback(&mut self, ts: f64, his_bw: f64) {
        self.history.record(ts, his_bw);
    }

    /// Recomputes the prediction after a TTI. `queue_samples` holds the
    /// flow's per-TTI queue samples in time order.
    pub fn on_tti(&mut self, now: f64, alloc_bw: f64, queue_samples: &QueueSamples) -> &QueuePrediction {
        if self.bw.len() == BW_RING {
            self.bw.pop_front();
        }
        self.bw.push_back(alloc_bw);
        let fi = self.pattern.fi_est().unwrap_or(FRAME_INTERVAL_MS);
        let lo = ms_to_us(now).saturating_sub(ms_to_us(fi));
        let recent = queue_samples.iter().rev().take_while(|&&(ts, _)| ts > lo);
        let rlc_q_min = min_rlc_queue(recent, fi, now) as f64;
        let bw = self.bw.make_contiguous();
        self.last = predict(&PredictionInputs {
            fi_prev: self.pattern.fi_est(),
            fi_new: None,
            alpha: self.cfg.alpha,
            bw_samples: bw,
            tti_len: self.cfg.tti_len_ms,
            wired_nd: self.cfg.wired_nd_ms,
            now,
            history: &self.history,
            rlc_q_min,
            eta: self.cfg.eta,
        });
        &self.last
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn frame_boundary_examples() {
        assert!(!detect_frame_boundary(100.0, 100.2, 4.0));
        assert!(detect_frame_boundary(100.0, 116.6, 4.0));
        assert!(!detect_frame_boundary(100.0, 104.0, 4.0));
    }

    #[test]
    fn frame_interval_ewma() {
        let mut s = FramePatternState::default();
        assert_eq!(s.update_frame_interval(16.6).unwrap(), 16.6);
        assert_relative_eq!(s.update_frame_interval(16.6).unwrap(), 16.6, epsilon = 1e-12);
        assert_relative_eq!(s.update_frame_interval(20.0).unwrap(), 17.28, epsilon = 1e-12);
        let before = s.clone();
        assert!(s.update_frame_interval(0.0).is_err());
        assert!(s.update_frame_interval(-3.0).is_err());
        assert_eq!(s, before);
    }

    #[test]
    fn mean_bw_examples() {
        assert_eq!(mean_alloc_bw(&[1800.0; 33], 33), 1800.0);
        assert_eq!(n_tti_for(16.6, 0.5), 33);
        let mut v = vec![1000.0; 16];
        v.extend(vec![2000.0; 17]);
        assert_relative_eq!(mean_alloc_bw(&v, 33), 50000.0 / 33.0);
        // warm-up: fewer samples than requested
        assert_eq!(mean_alloc_bw(&[10.0, 20.0], 33), 15.0);
        assert_eq!(mean_alloc_bw(&[], 33), 0.0);
    }

    #[test]
    fn inflight_and_horizon_examples() {
        assert_eq!(inflight_frame_count(10.0, 16.6), 2);
        assert_eq!(inflight_frame_count(1.0, 16.6), 1);
        assert_eq!(inflight_frame_count(20.0, 16.6), 3);
        assert_relative_eq!(decision_horizon(0.5, 16.6, 2), 33.7, epsilon = 1e-12);
        assert_relative_eq!(decision_horizon(0.5, 16.6, 1), 17.1, epsilon = 1e-12);
        assert_relative_eq!(decision_horizon(1.0, 16.6, 3), 50.8, epsilon = 1e-12);
    }

    #[test]
    fn history_window_examples() {
        let (lo, hi) = history_window(1000.0, 16.6, 2, 10.0);
        assert_relative_eq!(lo, 946.8, epsilon = 1e-9);
        assert_relative_eq!(hi, 963.4, epsilon = 1e-9);
        let (lo, hi) = history_window(500.0, 16.6, 1, 0.0);
        assert_relative_eq!(lo, 500.0 - 16.6, epsilon = 1e-9);
        assert_eq!(hi, 500.0);

        let mut h = FeedbackHistory::new(16);
        h.record(900.0, 1.0);
        h.record(950.0, 2.0);
        h.record(990.0, 3.0);
        assert_eq!(h.select(946.8, 963.4), vec![(950.0, 2.0)]);
        // nothing inside: nearest entry below the upper bound
        assert_eq!(h.select(920.0, 940.0), vec![(900.0, 1.0)]);
        assert!(h.select(100.0, 200.0).is_empty());
    }

    #[test]
    fn history_rejects_stale_timestamps_and_is_bounded() {
        let mut h = FeedbackHistory::new(3);
        assert!(h.record(1.0, 1.0));
        assert!(!h.record(1.0, 9.0));
        assert!(!h.record(0.5, 9.0));
        for t in 2..10 {
            h.record(t as f64, t as f64);
        }
        assert_eq!(h.len(), 3);
        let ts: Vec<f64> = h.entries().map(|e| e.0).collect();
        assert_eq!(ts, vec![7.0, 8.0, 9.0]);
    }

    #[test]
    fn in_flight_values_extend_forward() {
        let mut h = FeedbackHistory::new(16);
        for (t, v) in [(10.0, 1.0), (20.0, 2.0), (30.0, 3.0), (40.0, 4.0)] {
            h.record(t, v);
        }
        assert_eq!(h.in_flight_values(15.0, 25.0, 1), Some(vec![2.0]));
        assert_eq!(h.in_flight_values(15.0, 25.0, 3), Some(vec![2.0, 3.0, 4.0]));
        assert_eq!(h.in_flight_values(15.0, 25.0, 5), Some(vec![2.0, 3.0, 4.0, 4.0, 4.0]));
        assert_eq!(h.in_flight_values(5.0, 35.0, 2), Some(vec![2.0, 3.0]));
        assert_eq!(h.in_flight_values(0.0, 5.0, 2), Some(vec![1.0, 2.0]));
        assert_eq!(FeedbackHistory::new(4).in_flight_values(0.0, 5.0, 2), None);
    }

    #[test]
    fn min_queue_examples() {
        let s = vec![(10_000, 5000), (10_500, 1200), (11_000, 3000)];
        assert_eq!(min_rlc_queue(&s, 16.6, 11.0), 1200);
        assert_eq!(min_rlc_queue(&s, 16.6, 100.0), 0);
        // window is half-open at the old end
        assert_eq!(min_rlc_queue(&s, 0.5, 11.0), 3000);
    }

    #[test]
    fn predict_queue_examples() {
        let steady = predict_queue(&[(1800.0, 0.0), (1800.0, 0.0)], 16.6, 0.0, 1800.0, 33.7);
        assert_eq!(steady, 0.0);
        let overload = predict_queue(&[(2400.0, 0.0), (2400.0, 0.0)], 16.6, 5000.0, 1800.0, 33.7);
        assert_relative_eq!(overload, 24020.0, epsilon = 1e-6);
        assert_eq!(predict_queue(&[], 16.6, 0.0, 0.0, 0.0), 0.0);
    }

    #[test]
    fn error_correction_examples() {
        let mut h = FeedbackHistory::new(4);
        assert_eq!(h.update_error_correction(300.0, 100.0), 100.0);
        let mut h = FeedbackHistory::new(4);
        for _ in 0..100 {
            h.update_error_correction(1500.0, 1500.0);
        }
        assert_eq!(h.err_est(), 0.0);
        // persistent 10% under-sending converges to 10% of guidance
        let mut h = FeedbackHistory::new(4);
        for _ in 0..60 {
            h.update_error_correction(2000.0, 1800.0);
        }
        assert_relative_eq!(h.err_est(), 200.0, epsilon = 1e-9);
    }

    #[test]
    fn guidance_examples() {
        assert_relative_eq!(guidance_bw(1800.0, 0.0, 0.95), 1710.0);
        assert_eq!(guidance_bw(1800.0, 2000.0, 0.95), 0.0);
        assert_eq!(guidance_bw(0.0, 0.0, 0.95), 0.0);
    }

    #[test]
    fn warm_up_falls_back_to_eta_times_mean() {
        let h = FeedbackHistory::new(4);
        let bw = [1000.0; 40];
        let p = predict(&PredictionInputs {
            fi_prev: Some(16.6),
            fi_new: None,
            alpha: DEFAULT_ALPHA,
            bw_samples: &bw,
            tti_len: 0.5,
            wired_nd: 1.0,
            now: 100.0,
            history: &h,
            rlc_q_min: 0.0,
            eta: DEFAULT_ETA,
        });
        assert!(p.warm_up);
        assert_relative_eq!(p.guidance, 950.0);
        let p2 = predict(&PredictionInputs {
            rlc_q_min: 1660.0,
            ..PredictionInputs {
                fi_prev: Some(16.6),
                fi_new: None,
                alpha: DEFAULT_ALPHA,
                bw_samples: &bw,
                tti_len: 0.5,
                wired_nd: 1.0,
                now: 100.0,
                history: &h,
                rlc_q_min: 0.0,
                eta: DEFAULT_ETA,
            }
        });
        assert_relative_eq!(p2.guidance, 850.0, epsilon = 1e-9);
    }

    #[test]
    fn frame_detection_from_packets() {
        let mut p = FlowPredictor::new(PredictorConfig::new(0.5, 1.0));
        let mut t = 0.0;
        for _frame in 0..10 {
            for k in 0..5 {
                p.on_packet(t + 0.3 * k as f64, 1400);
            }
            t += 16.6;
        }
        assert_relative_eq!(p.pattern().fi_est().unwrap(), 16.6, epsilon = 1e-9);
    }

    #[test]
    fn merged_frames_split_the_span() {
        let mut p = FlowPredictor::new(PredictorConfig::new(0.5, 1.0));
        for k in 0..4 {
            p.on_packet(16.6 * k as f64, 1400);
        }
        // three heads without a gap over the threshold in between
        let mut t = 49.8;
        while t < 99.6 {
            t += 3.0;
            p.on_packet(t, 1400);
        }
        p.on_packet(99.6 + 16.6, 1400);
        assert_relative_eq!(p.pattern().fi_est().unwrap(), 16.6, epsilon = 0.3);
    }

    proptest! {
        #[test]
        fn guidance_bounded(mean in 0.0f64..1e5, dr in 0.0f64..1e5, eta in 0.01f64..0.99) {
            let g = guidance_bw(mean, dr, eta);
            prop_assert!(g >= 0.0);
            prop_assert!(g <= eta * mean + 1e-9);
        }
    }
}
