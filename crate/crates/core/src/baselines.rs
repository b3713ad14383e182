//! Comparison schemes and an exhaustive placement oracle.
//!
//! LFU, APCC and NUCC read the running mean of the global per-slot request
//! frequencies over every slot seen so far. The centralized scheme is a single
//! learner on real network-wide rows.

use crate::coded_cache::{binomial, row_load, Placement};
use crate::dqn::DuelingNet;
use crate::env::{build_action_space, place_top_popular, top_indices, ActionSpace, CacheGeometry, Delays, SlotCost};
use crate::federated::DrlCore;
use crate::harness::config::ExperimentConfig;
use crate::popularity::RunningMean;
use crate::scheme::{Decision, Scheme, SlotObservation, SlotReport};
use crate::{Error, Result};

/// The `M` most popular contents, cached whole.
pub fn lfu_policy(stat_popularity: &[f64], cache_size: usize) -> Result<Vec<usize>> {
    if cache_size > stat_popularity.len() {
        return Err(Error::InvalidParameter(format!(
            "cache size {cache_size} exceeds catalog of {}",
            stat_popularity.len()
        )));
    }
    Ok(top_indices(stat_popularity, cache_size))
}

/// First group = contents above `threshold`, clamped into `(M, min(KM, N)]`
/// by popularity rank.
pub fn apcc_policy(stat_popularity: &[f64], threshold: f64, geom: CacheGeometry) -> Result<Placement> {
    if threshold.is_nan() || threshold < 0.0 {
        return Err(Error::InvalidParameter(format!("threshold {threshold} must be >= 0")));
    }
    let above = stat_popularity.iter().filter(|&&p| p > threshold).count();
    let n_cached = above.clamp(geom.cache_size + 1, geom.max_cached());
    place_top_popular(n_cached, stat_popularity, geom)
}

/// `E[R]` for one row of K i.i.d. requests drawn from `popularity`: the
/// number of cached requests is Binomial(K, h) with h the cached mass.
pub fn expected_row_load(placement: &Placement, popularity: &[f64]) -> Result<f64> {
    let k = placement.k_faps();
    let h: f64 = popularity
        .iter()
        .enumerate()
        .filter(|(n, _)| placement.is_cached(*n))
        .map(|(_, p)| p)
        .sum::<f64>()
        .clamp(0.0, 1.0);
    (0..=k).try_fold(0.0, |acc, u| {
        let prob = binomial(k, u) as f64 * h.powi(u as i32) * (1.0 - h).powi((k - u) as i32);
        Ok(acc + prob * (placement.coded_load(u)? + (k - u) as f64))
    })
}

/// Grid point with the least expected slot delay under `popularity`; ties go
/// to the smaller `N_c`.
pub fn nucc_policy(
    longrun_popularity: &[f64],
    geom: CacheGeometry,
    space: &ActionSpace,
    delays: Delays,
    rows_per_slot: usize,
) -> Result<Placement> {
    if space.is_empty() {
        return Err(Error::Config("NUCC needs a nonempty action space".into()));
    }
    let k = geom.k_faps as f64;
    let mut best: Option<(f64, Placement)> = None;
    for &n_cached in space.candidates() {
        let placement = place_top_popular(n_cached, longrun_popularity, geom)?;
        let load = expected_row_load(&placement, longrun_popularity)?;
        let delay = rows_per_slot as f64 * (delays.d_f * load + delays.d_a * k);
        if best.as_ref().is_none_or(|(d, _)| delay < *d) {
            best = Some((delay, placement));
        }
    }
    Ok(best.expect("nonempty action space").1)
}

#[derive(Debug, Clone)]
pub struct Lfu {
    geom: CacheGeometry,
    mean: RunningMean,
    decision: Decision,
}

impl Lfu {
    pub fn new(geom: CacheGeometry) -> Result<Self> {
        let mean = RunningMean::new(geom.n_contents);
        let set = lfu_policy(&mean.mean(), geom.cache_size)?;
        Ok(Lfu {
            geom,
            decision: Decision::uncoded(&set, geom.n_contents),
            mean,
        })
    }
}

impl Scheme for Lfu {
    fn name(&self) -> &str {
        "lfu"
    }

    fn decision(&self) -> &Decision {
        &self.decision
    }

    fn observe(&mut self, obs: &SlotObservation<'_>, _served: &SlotCost) -> Result<SlotReport> {
        self.mean.push(obs.global_popularity);
        let set = lfu_policy(&self.mean.mean(), self.geom.cache_size)?;
        self.decision = Decision::uncoded(&set, self.geom.n_contents);
        Ok(SlotReport::none())
    }
}

#[derive(Debug, Clone)]
pub struct Apcc {
    geom: CacheGeometry,
    threshold: f64,
    mean: RunningMean,
    decision: Decision,
}

impl Apcc {
    pub fn new(geom: CacheGeometry, threshold: f64) -> Result<Self> {
        let mean = RunningMean::new(geom.n_contents);
        let placement = apcc_policy(&mean.mean(), threshold, geom)?;
        Ok(Apcc {
            geom,
            threshold,
            mean,
            decision: Decision::Coded(placement),
        })
    }
}

impl Scheme for Apcc {
    fn name(&self) -> &str {
        "apcc"
    }

    fn decision(&self) -> &Decision {
        &self.decision
    }

    fn observe(&mut self, obs: &SlotObservation<'_>, _served: &SlotCost) -> Result<SlotReport> {
        self.mean.push(obs.global_popularity);
        self.decision = Decision::Coded(apcc_policy(&self.mean.mean(), self.threshold, self.geom)?);
        Ok(SlotReport::none())
    }
}

/// Partition optimizer on the long-run popularity estimate. Re-optimizes
/// every slot during warm-up, then only every `reestimate` slots (never when 0).
#[derive(Debug, Clone)]
pub struct Nucc {
    geom: CacheGeometry,
    space: ActionSpace,
    delays: Delays,
    rows_per_slot: usize,
    warmup: usize,
    reestimate: usize,
    mean: RunningMean,
    decision: Decision,
}

impl Nucc {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self> {
        let geom = cfg.geometry();
        let space = build_action_space(geom, &cfg.action_grid)?;
        let mean = RunningMean::new(geom.n_contents);
        let rows_per_slot = cfg.requests_per_slot;
        let placement = nucc_policy(&mean.mean(), geom, &space, cfg.delays(), rows_per_slot)?;
        Ok(Nucc {
            geom,
            space,
            delays: cfg.delays(),
            rows_per_slot,
            warmup: cfg.nucc_warmup,
            reestimate: cfg.nucc_reestimate,
            mean,
            decision: Decision::Coded(placement),
        })
    }
}

impl Scheme for Nucc {
    fn name(&self) -> &str {
        "nucc"
    }

    fn decision(&self) -> &Decision {
        &self.decision
    }

    fn observe(&mut self, obs: &SlotObservation<'_>, _served: &SlotCost) -> Result<SlotReport> {
        self.mean.push(obs.global_popularity);
        let after = obs.slot.saturating_sub(self.warmup);
        let refresh = after == 0 || (self.reestimate > 0 && after.is_multiple_of(self.reestimate));
        if refresh {
            let placement = nucc_policy(&self.mean.mean(), self.geom, &self.space, self.delays, self.rows_per_slot)?;
            self.decision = Decision::Coded(placement);
        }
        Ok(SlotReport::none())
    }
}

/// One learner at the cloud on the real global rows and the global
/// popularity, deployed greedily with the same refresh period as the
/// federated model.
#[derive(Debug, Clone)]
pub struct Centralized {
    core: DrlCore,
}

impl Centralized {
    pub fn new(cfg: &ExperimentConfig, master_seed: u64) -> Result<Self> {
        Ok(Centralized {
            core: DrlCore::new(cfg, master_seed, 1)?,
        })
    }

    pub fn deployed_model(&self) -> &DuelingNet {
        &self.core.global
    }

    pub fn learner(&self) -> &DuelingNet {
        self.core.trainers[0].online()
    }
}

impl Scheme for Centralized {
    fn name(&self) -> &str {
        "centralized"
    }

    fn decision(&self) -> &Decision {
        self.core.decision()
    }

    fn observe(&mut self, obs: &SlotObservation<'_>, _served: &SlotCost) -> Result<SlotReport> {
        let inputs = [(obs.rows.to_vec(), obs.global_popularity)];
        self.core.step(obs.slot, obs.global_popularity, &inputs)
    }

    fn models(&self) -> Vec<(String, &DuelingNet)> {
        vec![("global".to_string(), &self.core.global)]
    }
}

pub const ORACLE_MAX_CONTENTS: usize = 12;
pub const ORACLE_MAX_FAPS: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct OraclePoint {
    pub n_cached: usize,
    pub cached_set: Vec<usize>,
    /// Expected slot delay in ms.
    pub expected_delay: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub best: OraclePoint,
    /// Best set for every admissible `N_c`, ascending in `N_c`.
    pub per_n_cached: Vec<OraclePoint>,
}

impl OracleResult {
    /// Best point among the given `N_c` values.
    pub fn restricted_to(&self, grid: &[usize]) -> Option<&OraclePoint> {
        self.per_n_cached
            .iter()
            .filter(|p| grid.contains(&p.n_cached))
            .min_by(|a, b| a.expected_delay.total_cmp(&b.expected_delay))
    }
}

/// Enumerates every admissible first group and every row of K requests to
/// find the placement with the least expected slot delay of
/// `rows_per_slot` i.i.d. rows.
pub fn brute_force_placement_oracle(
    popularity: &[f64],
    geom: CacheGeometry,
    delays: Delays,
    rows_per_slot: usize,
) -> Result<OracleResult> {
    let CacheGeometry {
        n_contents: n,
        k_faps: k,
        cache_size: m,
    } = geom;
    if n > ORACLE_MAX_CONTENTS || k > ORACLE_MAX_FAPS {
        return Err(Error::Capacity(format!(
            "oracle enumerates up to N = {ORACLE_MAX_CONTENTS}, K = {ORACLE_MAX_FAPS}; got N = {n}, K = {k}"
        )));
    }
    if popularity.len() != n {
        return Err(Error::Shape(format!("popularity has {} entries, N = {n}", popularity.len())));
    }
    let rows: Vec<(Vec<usize>, f64)> = (0..n.pow(k as u32))
        .map(|mut code| {
            let mut row = Vec::with_capacity(k);
            let mut prob = 1.0;
            for _ in 0..k {
                row.push(code % n);
                prob *= popularity[code % n];
                code /= n;
            }
            (row, prob)
        })
        .collect();
    let mut per_n_cached: Vec<OraclePoint> = Vec::new();
    for mask in 0u32..(1 << n) {
        let n_cached = mask.count_ones() as usize;
        if n_cached <= m || n_cached > geom.max_cached() {
            continue;
        }
        let set: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
        let placement = Placement::new(&set, n, k, m)?;
        let mut per_row = 0.0;
        for (row, prob) in &rows {
            let load = row_load(row, &placement)?.total;
            per_row += prob * (delays.d_f * load + delays.d_a * k as f64);
        }
        let point = OraclePoint {
            n_cached,
            cached_set: set,
            expected_delay: rows_per_slot as f64 * per_row,
        };
        match per_n_cached.iter_mut().find(|p| p.n_cached == n_cached) {
            Some(p) if point.expected_delay < p.expected_delay => *p = point,
            Some(_) => {}
            None => per_n_cached.push(point),
        }
    }
    per_n_cached.sort_by_key(|p| p.n_cached);
    let best = per_n_cached
        .iter()
        .min_by(|a, b| a.expected_delay.total_cmp(&b.expected_delay))
        .cloned()
        .ok_or_else(|| Error::ConstraintViolation(format!("no admissible N_c for K = {k}, M = {m}, N = {n}")))?;
    Ok(OracleResult { best, per_n_cached })
}
