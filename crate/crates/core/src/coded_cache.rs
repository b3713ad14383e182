//! Coded-caching arithmetic for the two-group scheme.
//!
//! The `N_c` contents of the first group are cached with the centralized
//! coded-caching placement: each is split into `C(K, t)` fragments with
//! `t = K*M/N_c`, and every F-AP stores the fragments whose label contains
//! it. Requests in the same row of the K F-AP queues are served together: the
//! `u` cached requests by coded multicast, the other `K - u` by unicast.
//!
//! Loads are measured in contents-worth of fronthaul traffic. A non-integral
//! `t` is realized by memory sharing between `floor(t)` and `ceil(t)`.

use num_rational::Ratio;

use crate::{Error, Result};

/// `C(n, r)`, zero when `r > n`.
pub fn binomial(n: usize, r: usize) -> u64 {
    if r > n {
        return 0;
    }
    let r = r.min(n - r);
    let mut acc: u128 = 1;
    for i in 0..r {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc as u64
}

/// Memory-sharing split of `t = K*M/N_c` into two integer schemes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fragmentation {
    pub t_low: usize,
    pub t_high: usize,
    /// Weight of the `t_low` scheme; `weight_low*t_low + (1-weight_low)*t_high = t`.
    pub weight_low: f64,
}

impl Fragmentation {
    pub fn t(&self) -> f64 {
        self.weight_low * self.t_low as f64 + (1.0 - self.weight_low) * self.t_high as f64
    }
}

pub fn fragmentation_param(k_faps: usize, cache_size: usize, n_cached: usize) -> Result<Fragmentation> {
    let km = k_faps * cache_size;
    if n_cached <= cache_size || n_cached > km {
        return Err(Error::ConstraintViolation(format!(
            "N_c = {n_cached} must satisfy M < N_c <= K*M with M = {cache_size}, K*M = {km}"
        )));
    }
    if km.is_multiple_of(n_cached) {
        let t = km / n_cached;
        return Ok(Fragmentation {
            t_low: t,
            t_high: t,
            weight_low: 1.0,
        });
    }
    let t_low = km / n_cached;
    let t_high = t_low + 1;
    // ceil(t) - t = (t_high*N_c - K*M) / N_c
    let weight_low = (t_high * n_cached - km) as f64 / n_cached as f64;
    Ok(Fragmentation {
        t_low,
        t_high,
        weight_low,
    })
}

fn check_load_args(u: usize, k_faps: usize, t: usize) -> Result<()> {
    if u > k_faps {
        return Err(Error::InvalidParameter(format!("u = {u} exceeds K = {k_faps}")));
    }
    if t == 0 || t > k_faps {
        return Err(Error::InvalidParameter(format!("t = {t} outside [1, {k_faps}]")));
    }
    Ok(())
}

/// Coded multicast load `[C(K,t+1) - C(K-u,t+1)] / C(K,t)` for `u` cached
/// requests at integer fragmentation `t`.
pub fn coded_multicast_load(u: usize, k_faps: usize, t: usize) -> Result<f64> {
    check_load_args(u, k_faps, t)?;
    let messages = binomial(k_faps, t + 1) - binomial(k_faps - u, t + 1);
    Ok(messages as f64 / binomial(k_faps, t) as f64)
}

/// Same closed form as [`coded_multicast_load`], in exact rationals.
pub fn coded_multicast_load_exact(u: usize, k_faps: usize, t: usize) -> Result<Ratio<u64>> {
    check_load_args(u, k_faps, t)?;
    let messages = binomial(k_faps, t + 1) - binomial(k_faps - u, t + 1);
    Ok(Ratio::new(messages, binomial(k_faps, t)))
}

pub const ORACLE_MAX_K: usize = 12;

/// Enumerates every `(t+1)`-subset of the K F-APs and counts those that
/// contain at least one of the `u` requesters; each such subset carries one
/// coded message of `1/C(K,t)` contents-worth. The fragment count `C(K,t)`
/// is itself obtained by enumeration.
pub fn brute_force_multicast_oracle(u: usize, k_faps: usize, t: usize) -> Result<Ratio<u64>> {
    if k_faps > ORACLE_MAX_K {
        return Err(Error::Capacity(format!(
            "multicast oracle enumerates 2^K subsets; K = {k_faps} exceeds {ORACLE_MAX_K}"
        )));
    }
    check_load_args(u, k_faps, t)?;
    let requesters: u32 = (1u32 << u) - 1;
    let mut messages = 0u64;
    let mut fragments = 0u64;
    for subset in 0u32..(1u32 << k_faps) {
        let size = subset.count_ones() as usize;
        if size == t {
            fragments += 1;
        }
        if size == t + 1 && subset & requesters != 0 {
            messages += 1;
        }
    }
    Ok(Ratio::new(messages, fragments))
}

/// A coded-caching placement: the first group of `N_c` contents.
#[derive(Debug, Clone, PartialEq)]
pub struct Placement {
    cached: Vec<bool>,
    n_cached: usize,
    k_faps: usize,
    cache_size: usize,
    frag: Fragmentation,
}

impl Placement {
    /// Builds a placement over a catalog of `n_contents` from the cached ids.
    pub fn new(cached_set: &[usize], n_contents: usize, k_faps: usize, cache_size: usize) -> Result<Self> {
        let mut cached = vec![false; n_contents];
        for &c in cached_set {
            if c >= n_contents {
                return Err(Error::InvalidParameter(format!(
                    "cached content {c} outside catalog of {n_contents}"
                )));
            }
            if std::mem::replace(&mut cached[c], true) {
                return Err(Error::InvalidParameter(format!("content {c} cached twice")));
            }
        }
        let n_cached = cached_set.len();
        if n_cached > n_contents {
            return Err(Error::ConstraintViolation(format!(
                "N_c = {n_cached} exceeds catalog size {n_contents}"
            )));
        }
        let frag = fragmentation_param(k_faps, cache_size, n_cached)?;
        Ok(Placement {
            cached,
            n_cached,
            k_faps,
            cache_size,
            frag,
        })
    }

    pub fn is_cached(&self, content: usize) -> bool {
        self.cached.get(content).copied().unwrap_or(false)
    }

    pub fn cached_set(&self) -> Vec<usize> {
        (0..self.cached.len()).filter(|&c| self.cached[c]).collect()
    }

    pub fn cached_mask(&self) -> &[bool] {
        &self.cached
    }

    pub fn n_cached(&self) -> usize {
        self.n_cached
    }

    pub fn n_contents(&self) -> usize {
        self.cached.len()
    }

    pub fn k_faps(&self) -> usize {
        self.k_faps
    }

    pub fn cache_size(&self) -> usize {
        self.cache_size
    }

    pub fn fragmentation(&self) -> Fragmentation {
        self.frag
    }

    /// Fraction of each first-group content stored at one F-AP, `M/N_c`.
    pub fn caching_fraction(&self) -> f64 {
        self.cache_size as f64 / self.n_cached as f64
    }

    /// Contents-worth stored per F-AP, summed from the memory-sharing mix of
    /// per-content fractions `t/K`.
    pub fn storage_used(&self) -> f64 {
        let k = self.k_faps as f64;
        let per_content = self.frag.weight_low * self.frag.t_low as f64 / k
            + (1.0 - self.frag.weight_low) * self.frag.t_high as f64 / k;
        per_content * self.n_cached as f64
    }

    /// Coded load for `u` cached requests, memory-shared and capped at `N_c - M`.
    pub fn coded_load(&self, u: usize) -> Result<f64> {
        let Fragmentation {
            t_low,
            t_high,
            weight_low,
        } = self.frag;
        let mut load = weight_low * coded_multicast_load(u, self.k_faps, t_low)?;
        if weight_low < 1.0 {
            load += (1.0 - weight_low) * coded_multicast_load(u, self.k_faps, t_high)?;
        }
        Ok(load.min((self.n_cached - self.cache_size) as f64))
    }
}

/// Fronthaul load of one row of K requests.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RowLoad {
    pub coded_load: f64,
    pub uncached_load: usize,
    pub total: f64,
}

fn check_row(row: &[usize], placement: &Placement) -> Result<()> {
    if row.len() != placement.k_faps {
        return Err(Error::InvalidParameter(format!(
            "row has {} requests, expected K = {}",
            row.len(),
            placement.k_faps
        )));
    }
    if let Some(&bad) = row.iter().find(|&&r| r >= placement.n_contents()) {
        return Err(Error::InvalidParameter(format!(
            "request for content {bad} outside catalog of {}",
            placement.n_contents()
        )));
    }
    Ok(())
}

/// Number of requests in `row` for first-group contents; duplicates count once per request.
pub fn count_cached_hits(row: &[usize], placement: &Placement) -> usize {
    row.iter().filter(|&&r| placement.is_cached(r)).count()
}

pub fn row_load(row: &[usize], placement: &Placement) -> Result<RowLoad> {
    check_row(row, placement)?;
    let u = count_cached_hits(row, placement);
    let coded_load = placement.coded_load(u)?;
    let uncached_load = placement.k_faps - u;
    Ok(RowLoad {
        coded_load,
        uncached_load,
        total: coded_load + uncached_load as f64,
    })
}

/// Total access delay of a slot: `sum_i (d_f * R_i + d_a * K)`.
pub fn slot_delay<R: AsRef<[usize]>>(rows: &[R], placement: &Placement, d_f: f64, d_a: f64) -> Result<f64> {
    let k = placement.k_faps as f64;
    rows.iter().try_fold(0.0, |acc, row| {
        let load = row_load(row.as_ref(), placement)?;
        Ok(acc + d_f * load.total + d_a * k)
    })
}
