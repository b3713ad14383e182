//! Common per-slot interface for caching schemes.
//!
//! At the start of slot `t` each scheme exposes the decision it made at the
//! end of slot `t-1`; the harness serves slot `t`'s requests with it and then
//! hands the scheme the slot's observation so it can learn and decide again.

use crate::coded_cache::{row_load, Placement};
use crate::dqn::DuelingNet;
use crate::env::{cost_from_loads, Delays, RewardParams, SlotCost};
use crate::popularity::RequestBatch;
use crate::Result;

#[derive(Debug, Clone, PartialEq)]
pub enum Decision {
    /// Two-group coded caching.
    Coded(Placement),
    /// Whole contents cached at every F-AP; misses are unicast.
    Uncoded { cached: Vec<bool>, cache_size: usize },
}

impl Decision {
    pub fn uncoded(set: &[usize], n_contents: usize) -> Self {
        let mut cached = vec![false; n_contents];
        for &c in set {
            cached[c] = true;
        }
        Decision::Uncoded {
            cached,
            cache_size: set.len(),
        }
    }

    pub fn n_cached(&self) -> usize {
        match self {
            Decision::Coded(p) => p.n_cached(),
            Decision::Uncoded { cache_size, .. } => *cache_size,
        }
    }

    /// Fraction of each cached content stored at one F-AP.
    pub fn caching_fraction(&self) -> f64 {
        match self {
            Decision::Coded(p) => p.caching_fraction(),
            Decision::Uncoded { .. } => 1.0,
        }
    }

    pub fn is_cached(&self, content: usize) -> bool {
        match self {
            Decision::Coded(p) => p.is_cached(content),
            Decision::Uncoded { cached, .. } => cached.get(content).copied().unwrap_or(false),
        }
    }

    pub fn evaluate<R: AsRef<[usize]>>(&self, rows: &[R], k_faps: usize, delays: Delays, params: RewardParams) -> Result<SlotCost> {
        let mut loads = Vec::with_capacity(rows.len());
        let mut hits = 0;
        for row in rows {
            let row = row.as_ref();
            let u = row.iter().filter(|&&r| self.is_cached(r)).count();
            hits += u;
            loads.push(match self {
                Decision::Coded(p) => row_load(row, p)?.total,
                Decision::Uncoded { .. } => (row.len() - u) as f64,
            });
        }
        Ok(cost_from_loads(&loads, hits, k_faps, delays, params))
    }
}

/// What every scheme sees at the end of a slot.
#[derive(Debug, Clone, Copy)]
pub struct SlotObservation<'a> {
    /// One-based slot index.
    pub slot: usize,
    pub batches: &'a [RequestBatch],
    /// Row `i` holds the `i`-th request of every F-AP queue.
    pub rows: &'a [Vec<usize>],
    pub local_popularity: &'a [Vec<f64>],
    pub global_popularity: &'a [f64],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotReport {
    /// Training loss this slot, NaN for schemes that do not learn.
    pub loss: f64,
}

impl SlotReport {
    pub fn none() -> Self {
        SlotReport { loss: f64::NAN }
    }
}

pub trait Scheme: Send {
    fn name(&self) -> &str;

    /// Decision in effect for the current slot.
    fn decision(&self) -> &Decision;

    /// Learns from the served slot and fixes the decision for the next one.
    fn observe(&mut self, obs: &SlotObservation<'_>, served: &SlotCost) -> Result<SlotReport>;

    /// Named networks worth checkpointing.
    fn models(&self) -> Vec<(String, &DuelingNet)> {
        Vec::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uncoded_load_counts_misses() {
        let d = Decision::uncoded(&[0, 1], 10);
        let delays = Delays { d_f: 5.0, d_a: 1.0 };
        let params = RewardParams {
            mu1: 0.95,
            mu2: 0.05,
            phi: 3.0,
            normalize_rows: false,
        };
        let cost = d.evaluate(&[vec![0, 1, 2], vec![0, 0, 0]], 3, delays, params).unwrap();
        // row 1: one miss, row 2: none
        assert_eq!(cost.delay_ms, 5.0 * 1.0 + 3.0 + 3.0);
        assert_eq!(cost.hits, 5);
        assert_eq!(d.caching_fraction(), 1.0);
    }
}
