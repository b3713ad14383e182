//! Time-variant content popularity.
//!
//! Each F-AP owns a [`PopularityProcess`]: a fixed set of Z Zipf profiles
//! drawn at construction, and a symmetric Markov chain that decides which
//! profile is active in each slot. Requests inside a slot are i.i.d. draws
//! from the active profile.

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

/// Zipf popularity over `N` contents, `p_n ∝ 1 / (n+1)^alpha` for zero-based `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct ZipfProfile {
    probabilities: Vec<f64>,
    alpha: f64,
}

impl ZipfProfile {
    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn n_contents(&self) -> usize {
        self.probabilities.len()
    }
}

pub fn zipf_profile(alpha: f64, n_contents: usize) -> Result<ZipfProfile> {
    if !alpha.is_finite() || alpha < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "zipf exponent must be finite and nonnegative, got {alpha}"
        )));
    }
    if n_contents == 0 {
        return Err(Error::InvalidParameter("zipf profile needs at least one content".into()));
    }
    let weights: Vec<f64> = (1..=n_contents).map(|n| (n as f64).powf(-alpha)).collect();
    let total: f64 = weights.iter().sum();
    Ok(ZipfProfile {
        probabilities: weights.into_iter().map(|w| w / total).collect(),
        alpha,
    })
}

/// Ordered requests of one F-AP during one slot (zero-based content ids).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RequestBatch(Vec<usize>);

impl RequestBatch {
    pub fn new(requests: Vec<usize>, n_contents: usize) -> Result<Self> {
        if let Some(&bad) = requests.iter().find(|&&r| r >= n_contents) {
            return Err(Error::InvalidParameter(format!(
                "request for content {bad} outside catalog of {n_contents}"
            )));
        }
        Ok(RequestBatch(requests))
    }

    pub fn requests(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Draws `v` i.i.d. requests from `profile`.
pub fn sample_requests<R: Rng + ?Sized>(profile: &ZipfProfile, v: usize, rng: &mut R) -> RequestBatch {
    let dist = WeightedIndex::new(&profile.probabilities).expect("zipf weights are positive");
    RequestBatch((0..v).map(|_| dist.sample(rng)).collect())
}

/// Per-content request frequencies `count_n / V`.
pub fn empirical_popularity(batch: &RequestBatch, n_contents: usize) -> Result<Vec<f64>> {
    if batch.is_empty() {
        return Err(Error::InvalidParameter("empty request batch".into()));
    }
    let mut counts = vec![0usize; n_contents];
    for &r in batch.requests() {
        if r >= n_contents {
            return Err(Error::InvalidParameter(format!(
                "request for content {r} outside catalog of {n_contents}"
            )));
        }
        counts[r] += 1;
    }
    let v = batch.len() as f64;
    Ok(counts.into_iter().map(|c| c as f64 / v).collect())
}

/// Equal-weight mean of local popularity vectors.
pub fn mean_popularity(locals: &[Vec<f64>]) -> Vec<f64> {
    let n = locals.first().map_or(0, Vec::len);
    let k = locals.len() as f64;
    (0..n)
        .map(|i| locals.iter().map(|p| p[i]).sum::<f64>() / k)
        .collect()
}

/// Mean of all observed popularity vectors; uniform before the first one.
#[derive(Debug, Clone, PartialEq)]
pub struct RunningMean {
    sum: Vec<f64>,
    count: usize,
}

impl RunningMean {
    pub fn new(n_contents: usize) -> Self {
        RunningMean {
            sum: vec![0.0; n_contents],
            count: 0,
        }
    }

    pub fn push(&mut self, p: &[f64]) {
        for (s, x) in self.sum.iter_mut().zip(p) {
            *s += x;
        }
        self.count += 1;
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn mean(&self) -> Vec<f64> {
        if self.count == 0 {
            return vec![1.0 / self.sum.len() as f64; self.sum.len()];
        }
        let c = self.count as f64;
        self.sum.iter().map(|s| s / c).collect()
    }
}

// ChaCha stream ids inside one process seed.
const PROFILE_STREAM: u64 = 0;
const SWITCH_STREAM: u64 = 1;
const REQUEST_STREAM: u64 = 2;

/// Markov-switched set of Zipf profiles for one F-AP.
///
/// With probability `stay_prob` the active profile is kept; otherwise one of
/// the other `Z-1` profiles is chosen uniformly. The chain is symmetric, so
/// its stationary distribution is uniform over profiles.
#[derive(Debug, Clone)]
pub struct PopularityProcess {
    profiles: Vec<ZipfProfile>,
    current: usize,
    stay_prob: f64,
    seed: u64,
    switch_rng: ChaCha8Rng,
    request_rng: ChaCha8Rng,
}

pub fn build_process(
    z_profiles: usize,
    alpha_range: (f64, f64),
    stay_prob: f64,
    n_contents: usize,
    seed: u64,
) -> Result<PopularityProcess> {
    let (lo, hi) = alpha_range;
    if z_profiles == 0 {
        return Err(Error::InvalidParameter("need at least one popularity profile".into()));
    }
    if !(lo.is_finite() && hi.is_finite()) || lo < 0.0 || lo > hi {
        return Err(Error::InvalidParameter(format!(
            "alpha range [{lo}, {hi}] is empty or outside [0, inf)"
        )));
    }
    if !(0.0..=1.0).contains(&stay_prob) {
        return Err(Error::InvalidParameter(format!(
            "stay probability {stay_prob} outside [0, 1]"
        )));
    }
    let mut profile_rng = stream_rng(seed, PROFILE_STREAM);
    let profiles = (0..z_profiles)
        .map(|_| {
            let alpha = if lo == hi { lo } else { profile_rng.gen_range(lo..=hi) };
            zipf_profile(alpha, n_contents)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PopularityProcess {
        profiles,
        current: 0,
        stay_prob,
        seed,
        switch_rng: stream_rng(seed, SWITCH_STREAM),
        request_rng: stream_rng(seed, REQUEST_STREAM),
    })
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

impl PopularityProcess {
    /// Moves the chain one slot forward and returns the active profile index.
    pub fn advance(&mut self) -> usize {
        let z = self.profiles.len();
        if z > 1 && self.switch_rng.gen::<f64>() >= self.stay_prob {
            let other = self.switch_rng.gen_range(0..z - 1);
            self.current = if other >= self.current { other + 1 } else { other };
        }
        self.current
    }

    pub fn sample_requests(&mut self, v: usize) -> RequestBatch {
        sample_requests(&self.profiles[self.current], v, &mut self.request_rng)
    }

    pub fn current(&self) -> usize {
        self.current
    }

    pub fn current_profile(&self) -> &ZipfProfile {
        &self.profiles[self.current]
    }

    pub fn profiles(&self) -> &[ZipfProfile] {
        &self.profiles
    }

    pub fn stay_prob(&self) -> f64 {
        self.stay_prob
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Row `i` of the switching matrix.
    pub fn transition_row(&self, i: usize) -> Vec<f64> {
        let z = self.profiles.len();
        if z == 1 {
            return vec![1.0];
        }
        let move_prob = (1.0 - self.stay_prob) / (z - 1) as f64;
        (0..z)
            .map(|j| if j == i { self.stay_prob } else { move_prob })
            .collect()
    }
}
