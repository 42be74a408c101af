use std::collections::BTreeMap;

use crate::FlowId;

/// Equal-share PRB split with round-robin remainder.
///
/// `demands` lists each flow's PRB need for this TTI; flows with zero demand
/// are inactive and get nothing. Every round splits the remaining PRBs evenly
/// among flows that still want more, capped at each flow's demand, so unused
/// share flows back to backlogged flows in the next round. PRBs left over
/// once an even split is no longer possible go out one at a time starting at
/// `rotation`.
pub fn schedule_prbs(
    demands: &[(FlowId, u32)],
    prb_total: u32,
    rotation: u64,
) -> BTreeMap<FlowId, u32> {
    let mut active: Vec<(FlowId, u32)> = demands.iter().copied().filter(|d| d.1 > 0).collect();
    active.sort_by_key(|d| d.0);
    let n = active.len();
    if n == 0 {
        return BTreeMap::new();
    }
    let start = (rotation % n as u64) as usize;
    active.rotate_left(start);

    let mut alloc = vec![0u32; n];
    let mut remaining = prb_total;
    loop {
        let hungry: Vec<usize> = (0..n).filter(|&i| alloc[i] < active[i].1).collect();
        if hungry.is_empty() {
            break;
        }
        let share = remaining / hungry.len() as u32;
        if share == 0 {
            // fewer PRBs than hungry flows: one each in rotation order
            for &i in hungry.iter().take(remaining as usize) {
                alloc[i] += 1;
            }
            break;
        }
        for &i in &hungry {
            let give = share.min(active[i].1 - alloc[i]);
            alloc[i] += give;
            remaining -= give;
        }
    }
    active
        .iter()
        .zip(alloc)
        .map(|(&(id, _), a)| (id, a))
        .collect()
}

/// Stateful wrapper that rotates the remainder across TTIs.
#[derive(Clone, Debug, Default)]
pub struct PrbScheduler {
    rotation: u64,
}

impl PrbScheduler {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn allocate(&mut self, demands: &[(FlowId, u32)], prb_total: u32) -> BTreeMap<FlowId, u32> {
        let out = schedule_prbs(demands, prb_total, self.rotation);
        if !out.is_empty() {
            self.rotation = self.rotation.wrapping_add(1);
        }
        out
    }
}
