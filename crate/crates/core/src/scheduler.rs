//! Per-cell uplink RB allocation.
//!
//! Minimum demands are served first (fewest RBs needed first); leftover RBs
//! then go one at a time to the UE with the largest gain in
//! `sum(log(throughput))`, which is proportional fairness for throughputs
//! linear in RB count. UEs that cannot reach their minimum get nothing.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::scenario::{DemandProfile, UeId};

/// Mapping from SINR to per-RB rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkParams {
    /// Below this SINR the link carries nothing (QPSK edge).
    pub min_sinr_db: f64,
    /// Spectral-efficiency ceiling in bit/s/Hz (64-QAM).
    pub se_cap: f64,
}

impl Default for LinkParams {
    fn default() -> Self {
        LinkParams {
            min_sinr_db: -7.0,
            se_cap: 6.0,
        }
    }
}

impl LinkParams {
    pub fn validate(&self) -> Result<()> {
        if !self.min_sinr_db.is_finite() {
            return Err(Error::invalid("link.min_sinr_db", "must be finite"));
        }
        if !(self.se_cap.is_finite() && self.se_cap > 0.0) {
            return Err(Error::invalid("link.se_cap", "must be positive"));
        }
        Ok(())
    }

    pub fn spectral_efficiency(&self, sinr_db: f64) -> f64 {
        if !(sinr_db >= self.min_sinr_db) {
            return 0.0;
        }
        let lin = 10f64.powf(sinr_db / 10.0);
        (lin.ln_1p() / std::f64::consts::LN_2).min(self.se_cap)
    }
}

/// Shannon rate of one RB, floored at `min_sinr` and capped at `se_cap`.
pub fn per_rb_rate(sinr_db: f64, rb_bandwidth_hz: f64, link: &LinkParams) -> f64 {
    rb_bandwidth_hz * link.spectral_efficiency(sinr_db)
}

/// One UE as seen by its serving cell's scheduler.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub ue: UeId,
    pub per_rb_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Allocation {
    /// Served UEs with their RB counts, in candidate order.
    pub rb_counts: Vec<(UeId, usize)>,
    /// Throughput per candidate, in candidate order (0 for outage).
    pub throughput: Vec<(UeId, f64)>,
    pub outage: BTreeSet<UeId>,
}

impl Allocation {
    pub fn rbs_used(&self) -> usize {
        self.rb_counts.iter().map(|(_, n)| n).sum()
    }

    pub fn rb_count(&self, ue: UeId) -> usize {
        self.rb_counts
            .iter()
            .find(|(u, _)| *u == ue)
            .map_or(0, |(_, n)| *n)
    }
}

/// RBs needed to reach `r_min` at `rate` per RB.
fn rbs_needed(r_min: f64, rate: f64) -> f64 {
    (r_min / rate).ceil().max(1.0)
}

fn throughput(n: usize, rate: f64, r_max: f64) -> f64 {
    (n as f64 * rate).min(r_max)
}

pub fn schedule_cell(ues: &[Candidate], n_rb: usize, demand: &DemandProfile) -> Allocation {
    let mut outage = BTreeSet::new();

    // admission by ascending need, ties by id
    let mut admissible: Vec<(f64, UeId, usize)> = Vec::new();
    for (i, c) in ues.iter().enumerate() {
        if c.per_rb_rate > 0.0 && c.per_rb_rate.is_finite() {
            admissible.push((rbs_needed(demand.r_min, c.per_rb_rate), c.ue, i));
        } else {
            outage.insert(c.ue);
        }
    }
    admissible.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let mut counts = vec![0usize; ues.len()];
    let mut budget = n_rb;
    let mut admitted = Vec::new();
    for (need, id, i) in admissible {
        if need <= budget as f64 {
            let need = need as usize;
            counts[i] = need;
            budget -= need;
            admitted.push(i);
        } else {
            outage.insert(id);
        }
    }

    // surplus by largest marginal log-throughput gain, ties by id
    while budget > 0 {
        let mut best: Option<(f64, UeId, usize)> = None;
        for &i in &admitted {
            let c = &ues[i];
            let now = throughput(counts[i], c.per_rb_rate, demand.r_max);
            if now >= demand.r_max {
                continue;
            }
            let next = throughput(counts[i] + 1, c.per_rb_rate, demand.r_max);
            let gain = (next / now).ln();
            let better = match best {
                None => true,
                Some((bg, bid, _)) => gain > bg || (gain == bg && c.ue < bid),
            };
            if better {
                best = Some((gain, c.ue, i));
            }
        }
        let Some((_, _, i)) = best else { break };
        counts[i] += 1;
        budget -= 1;
    }

    let mut alloc = Allocation {
        outage,
        ..Default::default()
    };
    for (i, c) in ues.iter().enumerate() {
        if counts[i] > 0 {
            alloc.rb_counts.push((c.ue, counts[i]));
            alloc
                .throughput
                .push((c.ue, throughput(counts[i], c.per_rb_rate, demand.r_max)));
        } else {
            alloc.throughput.push((c.ue, 0.0));
        }
    }
    alloc
}
