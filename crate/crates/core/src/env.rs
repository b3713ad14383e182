//! The placement MDP.
//!
//! An action is a first-group size `N_c` from a discrete grid; the cached
//! contents are the `N_c` most popular ones under the observed request
//! frequencies. The state is the previous placement (indicator vector plus
//! `N_c/N`) concatenated with the observed frequencies, `2N+1` values.
//! The reward maps the slot's fronthaul and access delay through a negative
//! exponential.

use crate::coded_cache::{count_cached_hits, Placement};
use crate::popularity::{empirical_popularity, mean_popularity, RequestBatch};
use crate::{Error, Result};

/// Catalog size, number of F-APs and per-F-AP cache size (contents-worth).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CacheGeometry {
    pub n_contents: usize,
    pub k_faps: usize,
    pub cache_size: usize,
}

impl CacheGeometry {
    pub fn state_dim(&self) -> usize {
        2 * self.n_contents + 1
    }

    /// Largest admissible first group, `min(K*M, N)`.
    pub fn max_cached(&self) -> usize {
        (self.k_faps * self.cache_size).min(self.n_contents)
    }
}

/// Per-content transmission delays in ms: fronthaul `d_f`, access `d_a`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Delays {
    pub d_f: f64,
    pub d_a: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardParams {
    pub mu1: f64,
    pub mu2: f64,
    pub phi: f64,
    /// Divide the exponent by the number of rows.
    pub normalize_rows: bool,
}

impl RewardParams {
    pub fn validate(&self) -> Result<()> {
        let RewardParams { mu1, mu2, phi, .. } = *self;
        if (mu1 + mu2 - 1.0).abs() > 1e-9 || !(0.0 < mu2 && mu2 < mu1 && mu1 < 1.0) {
            return Err(Error::Config(format!(
                "reward weights need mu1 + mu2 = 1 and 0 < mu2 < mu1 < 1, got mu1 = {mu1}, mu2 = {mu2}"
            )));
        }
        if !(phi > 0.0 && phi.is_finite()) {
            return Err(Error::Config(format!("reward scale phi must be positive, got {phi}")));
        }
        Ok(())
    }
}

/// Admissible first-group sizes, ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionSpace {
    candidates: Vec<usize>,
}

impl ActionSpace {
    pub fn candidates(&self) -> &[usize] {
        &self.candidates
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn n_cached(&self, action: usize) -> usize {
        self.candidates[action]
    }

    pub fn index_of(&self, n_cached: usize) -> Option<usize> {
        self.candidates.binary_search(&n_cached).ok()
    }
}

/// Default grid `round(K*M / L)` for `L = 1..K-1` (halves round up), clipped
/// to `(M, min(K*M, N)]`, merged with any admissible `extra_grid` entries.
pub fn build_action_space(geom: CacheGeometry, extra_grid: &[usize]) -> Result<ActionSpace> {
    let CacheGeometry {
        n_contents,
        k_faps,
        cache_size,
    } = geom;
    if k_faps < 2 {
        return Err(Error::Config(format!(
            "coded caching needs K >= 2 F-APs (M < N_c <= K*M is empty for K = {k_faps})"
        )));
    }
    if cache_size == 0 || cache_size >= n_contents {
        return Err(Error::Config(format!(
            "cache size must satisfy 1 <= M < N, got M = {cache_size}, N = {n_contents}"
        )));
    }
    let km = k_faps * cache_size;
    let admissible = |c: usize| c > cache_size && c <= geom.max_cached();
    let mut candidates: Vec<usize> = (1..k_faps)
        .map(|l| (2 * km + l) / (2 * l))
        .chain(extra_grid.iter().copied())
        .filter(|&c| admissible(c))
        .collect();
    candidates.sort_unstable();
    candidates.dedup();
    if candidates.is_empty() {
        return Err(Error::Config(format!(
            "no admissible N_c in ({cache_size}, {}]",
            geom.max_cached()
        )));
    }
    Ok(ActionSpace { candidates })
}

/// Indices of the `n` largest entries, ties to the lowest index.
pub fn top_indices(popularity: &[f64], n: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..popularity.len()).collect();
    order.sort_by(|&a, &b| popularity[b].total_cmp(&popularity[a]).then(a.cmp(&b)));
    order.truncate(n);
    order.sort_unstable();
    order
}

pub fn place_top_popular(n_cached: usize, stat_popularity: &[f64], geom: CacheGeometry) -> Result<Placement> {
    if stat_popularity.len() != geom.n_contents {
        return Err(Error::Shape(format!(
            "popularity has {} entries, catalog has {}",
            stat_popularity.len(),
            geom.n_contents
        )));
    }
    let set = top_indices(stat_popularity, n_cached);
    Placement::new(&set, geom.n_contents, geom.k_faps, geom.cache_size)
}

/// Agent observation `[indicator(prev set); N_c/N; popularity]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalState {
    values: Vec<f64>,
    n_contents: usize,
}

impl LocalState {
    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn prev_cache_indicator(&self) -> &[f64] {
        &self.values[..self.n_contents]
    }

    pub fn prev_n_cached_norm(&self) -> f64 {
        self.values[self.n_contents]
    }

    pub fn stat_popularity(&self) -> &[f64] {
        &self.values[self.n_contents + 1..]
    }

    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if values.len() % 2 != 1 {
            return Err(Error::Shape(format!("state length {} is not 2N+1", values.len())));
        }
        let n_contents = values.len() / 2;
        Ok(LocalState { values, n_contents })
    }
}

pub fn encode_state(prev: &Placement, stat_popularity: &[f64]) -> Result<LocalState> {
    let n = prev.n_contents();
    if stat_popularity.len() != n {
        return Err(Error::Shape(format!(
            "popularity has {} entries, placement covers {n}",
            stat_popularity.len()
        )));
    }
    let mut values = Vec::with_capacity(2 * n + 1);
    values.extend(prev.cached_mask().iter().map(|&c| if c { 1.0 } else { 0.0 }));
    values.push(prev.n_cached() as f64 / n as f64);
    values.extend_from_slice(stat_popularity);
    Ok(LocalState { values, n_contents: n })
}

/// State before any observation: smallest grid placement under uniform popularity.
pub fn initial_state(space: &ActionSpace, geom: CacheGeometry) -> Result<(Placement, LocalState)> {
    let uniform = vec![1.0 / geom.n_contents as f64; geom.n_contents];
    let placement = place_top_popular(space.n_cached(0), &uniform, geom)?;
    let state = encode_state(&placement, &uniform)?;
    Ok((placement, state))
}

/// Splits one F-AP's requests into rows of K by arrival order; the
/// `V mod K` trailing requests are left out.
pub fn virtual_rows(batch: &RequestBatch, k_faps: usize) -> Result<Vec<Vec<usize>>> {
    if batch.len() < k_faps {
        return Err(Error::InvalidParameter(format!(
            "virtual coded caching needs V >= K, got V = {}, K = {k_faps}",
            batch.len()
        )));
    }
    Ok(batch
        .requests()
        .chunks_exact(k_faps)
        .map(<[usize]>::to_vec)
        .collect())
}

/// Row `i` holds the `i`-th request of every F-AP queue.
pub fn global_rows(batches: &[RequestBatch]) -> Result<Vec<Vec<usize>>> {
    let v = batches.first().map_or(0, RequestBatch::len);
    if batches.iter().any(|b| b.len() != v) {
        return Err(Error::InvalidParameter("F-AP request batches differ in length".into()));
    }
    Ok((0..v)
        .map(|i| batches.iter().map(|b| b.requests()[i]).collect())
        .collect())
}

/// Delay, hit count and reward of serving `rows` with `placement`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotCost {
    pub delay_ms: f64,
    pub hits: usize,
    pub requests: usize,
    pub reward: f64,
}

impl SlotCost {
    pub fn hit_rate(&self) -> f64 {
        if self.requests == 0 {
            0.0
        } else {
            self.hits as f64 / self.requests as f64
        }
    }
}

/// Evaluates rows whose fronthaul loads are already known.
pub fn cost_from_loads(
    loads: &[f64],
    hits: usize,
    k_faps: usize,
    delays: Delays,
    params: RewardParams,
) -> SlotCost {
    let k = k_faps as f64;
    let delay_ms = loads.iter().map(|r| delays.d_f * r + delays.d_a * k).sum();
    let mut exponent: f64 = loads
        .iter()
        .map(|r| params.mu1 * delays.d_f * r + params.mu2 * delays.d_a * k)
        .sum();
    if params.normalize_rows && !loads.is_empty() {
        exponent /= loads.len() as f64;
    }
    // exp underflows to zero past ~745; the reward stays strictly positive.
    let reward = (params.phi * (-exponent).exp()).max(f64::MIN_POSITIVE);
    SlotCost {
        delay_ms,
        hits,
        requests: loads.len() * k_faps,
        reward,
    }
}

pub fn evaluate_rows<R: AsRef<[usize]>>(
    rows: &[R],
    placement: &Placement,
    delays: Delays,
    params: RewardParams,
) -> Result<SlotCost> {
    let mut loads = Vec::with_capacity(rows.len());
    let mut hits = 0;
    for row in rows {
        let load = crate::coded_cache::row_load(row.as_ref(), placement)?;
        hits += count_cached_hits(row.as_ref(), placement);
        loads.push(load.total);
    }
    Ok(cost_from_loads(&loads, hits, placement.k_faps(), delays, params))
}

/// `phi * exp(-sum_i (mu1 d_f R_i + mu2 d_a K))`.
pub fn reward<R: AsRef<[usize]>>(
    rows: &[R],
    placement: &Placement,
    delays: Delays,
    params: RewardParams,
) -> Result<f64> {
    params.validate()?;
    Ok(evaluate_rows(rows, placement, delays, params)?.reward)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub reward: f64,
    pub delay_ms: f64,
    pub hit_rate: f64,
    pub placement: Placement,
    pub next_state: LocalState,
}

/// Virtual coded caching at one F-AP: its own requests are treated as K
/// queues sharing its popularity.
pub fn local_virtual_step(
    fap_requests: &RequestBatch,
    n_cached: usize,
    stat_popularity: &[f64],
    geom: CacheGeometry,
    delays: Delays,
    params: RewardParams,
) -> Result<StepOutcome> {
    let rows = virtual_rows(fap_requests, geom.k_faps)?;
    let placement = place_top_popular(n_cached, stat_popularity, geom)?;
    let cost = evaluate_rows(&rows, &placement, delays, params)?;
    let observed = empirical_popularity(fap_requests, geom.n_contents)?;
    let next_state = encode_state(&placement, &observed)?;
    Ok(StepOutcome {
        reward: cost.reward,
        delay_ms: cost.delay_ms,
        hit_rate: cost.hit_rate(),
        placement,
        next_state,
    })
}

/// Serves the real K queues with one network-wide placement.
pub fn global_step(
    all_fap_requests: &[RequestBatch],
    n_cached: usize,
    global_stat_popularity: &[f64],
    geom: CacheGeometry,
    delays: Delays,
    params: RewardParams,
) -> Result<StepOutcome> {
    if all_fap_requests.len() != geom.k_faps {
        return Err(Error::InvalidParameter(format!(
            "expected {} request batches, got {}",
            geom.k_faps,
            all_fap_requests.len()
        )));
    }
    let rows = global_rows(all_fap_requests)?;
    let placement = place_top_popular(n_cached, global_stat_popularity, geom)?;
    let cost = evaluate_rows(&rows, &placement, delays, params)?;
    let locals = all_fap_requests
        .iter()
        .map(|b| empirical_popularity(b, geom.n_contents))
        .collect::<Result<Vec<_>>>()?;
    let next_state = encode_state(&placement, &mean_popularity(&locals))?;
    Ok(StepOutcome {
        reward: cost.reward,
        delay_ms: cost.delay_ms,
        hit_rate: cost.hit_rate(),
        placement,
        next_state,
    })
}
