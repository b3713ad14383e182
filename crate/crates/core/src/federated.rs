//! Federated training of the placement policy.
//!
//! Every F-AP runs one learning iteration per slot on its own requests,
//! split into K virtual queues. Every `T_s` slots the online networks are
//! averaged with weights equal to the experiences each F-AP contributed since
//! the previous round, and the average replaces every online and target
//! network. The global placement is chosen greedily by the averaged model and
//! is never trained directly.
//!
//! Timeline of one trainer: at the end of slot `t` it observes `p̄(t)`, forms
//! `s(t) = [a(t-1), p̄(t)]` and picks `a(t)`. That placement serves slot
//! `t+1`, whose requests complete the experience `(s(t), a(t), r(t+1), s(t+1))`.
//!
//! An action only fixes `N_c`; the contents are the top `N_c` of the running
//! mean of every `p̄` observed so far, which ranks far more reliably than a
//! single slot's request counts.

use rayon::prelude::*;

use crate::coded_cache::Placement;
use crate::dqn::{greedy_action, DqnAgent, DuelingNet, Experience};
use crate::env::{
    encode_state, evaluate_rows, initial_state, place_top_popular, virtual_rows, ActionSpace, CacheGeometry,
    Delays, LocalState, RewardParams,
};
use crate::harness::config::ExperimentConfig;
use crate::harness::experiment::{simulate_with, MetricRecord};
use crate::popularity::RunningMean;
use crate::scheme::{Decision, Scheme, SlotObservation, SlotReport};
use crate::seeds::{self, Component};
use crate::{Error, Result};

/// Elementwise weighted mean `sum_k w_k theta_k / sum_k w_k`.
///
/// Computed as `theta_0 + sum_k (w_k / W)(theta_k - theta_0)`, so identical
/// snapshots aggregate to themselves bit for bit.
pub fn aggregate<P: AsRef<[f64]>>(snapshots: &[P], weights: &[f64]) -> Result<Vec<f64>> {
    let total = check_weights(weights, snapshots.len())?;
    let base = snapshots[0].as_ref();
    if let Some((k, s)) = snapshots
        .iter()
        .enumerate()
        .find(|(_, s)| s.as_ref().len() != base.len())
    {
        return Err(Error::Aggregation(format!(
            "snapshot {k} has {} parameters, snapshot 0 has {}",
            s.as_ref().len(),
            base.len()
        )));
    }
    let mut out = base.to_vec();
    for (s, &w) in snapshots.iter().zip(weights).skip(1) {
        let share = w / total;
        if share == 0.0 {
            continue;
        }
        for ((o, &x), &x0) in out.iter_mut().zip(s.as_ref()).zip(base) {
            *o += share * (x - x0);
        }
    }
    // theta_0's own share is implicit: (1 - sum_{k>0} share_k) = share_0.
    Ok(out)
}

/// `sum_k D_k L_k / sum_k D_k`, a diagnostic only.
pub fn global_loss(local_losses: &[f64], weights: &[f64]) -> Result<f64> {
    let total = check_weights(weights, local_losses.len())?;
    Ok(local_losses.iter().zip(weights).map(|(l, w)| l * w).sum::<f64>() / total)
}

fn check_weights(weights: &[f64], n: usize) -> Result<f64> {
    if n == 0 || weights.len() != n {
        return Err(Error::Aggregation(format!(
            "{n} inputs but {} weights",
            weights.len()
        )));
    }
    if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
        return Err(Error::InvalidParameter(format!("weight {w} is not a nonnegative real")));
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::InvalidParameter("aggregation weights sum to zero".into()));
    }
    Ok(total)
}

/// Online snapshots and data weights collected at one aggregation.
#[derive(Debug, Clone, PartialEq)]
pub struct FederationRound {
    pub snapshots: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub period: usize,
}

impl FederationRound {
    pub fn global_model(&self) -> Result<Vec<f64>> {
        aggregate(&self.snapshots, &self.weights)
    }
}

/// The choice a trainer made at the end of the previous slot.
#[derive(Debug, Clone)]
struct Pending {
    state: LocalState,
    action: usize,
    placement: Placement,
}

/// One learner: Alg.-1 style epsilon-greedy DDQN over its own experience.
#[derive(Debug, Clone)]
pub struct LocalTrainer {
    pub fap_id: usize,
    pub agent: DqnAgent,
    /// Experiences contributed since the last aggregation.
    pub data_weight: usize,
    space: ActionSpace,
    geom: CacheGeometry,
    delays: Delays,
    params: RewardParams,
    ranking: RunningMean,
    pending: Pending,
}

/// Result of one training slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainDiagnostics {
    pub reward: f64,
    pub delay_ms: f64,
    /// `None` while the replay buffer is warming up.
    pub loss: Option<f64>,
    pub action: usize,
}

impl LocalTrainer {
    pub fn new(
        fap_id: usize,
        init: &DuelingNet,
        cfg: &ExperimentConfig,
        space: ActionSpace,
        master_seed: u64,
    ) -> Result<Self> {
        let geom = cfg.geometry();
        let mut agent = DqnAgent::new(
            init,
            cfg.hyperparams(),
            seeds::rng(master_seed, Component::Exploration, fap_id as u64),
            seeds::rng(master_seed, Component::Replay, fap_id as u64),
        );
        let (_, state) = initial_state(&space, geom)?;
        let action = agent.act(&state)?;
        let placement = place_top_popular(space.n_cached(action), state.stat_popularity(), geom)?;
        Ok(LocalTrainer {
            fap_id,
            agent,
            data_weight: 0,
            space,
            geom,
            delays: cfg.delays(),
            params: cfg.reward_params(),
            ranking: RunningMean::new(geom.n_contents),
            pending: Pending {
                state,
                action,
                placement,
            },
        })
    }

    /// Completes the pending experience on `rows`, learns once, and picks the
    /// next action from the popularity observed this slot.
    pub fn train_slot(&mut self, rows: &[Vec<usize>], observed: &[f64]) -> Result<TrainDiagnostics> {
        let cost = evaluate_rows(rows, &self.pending.placement, self.delays, self.params)?;
        let next_state = encode_state(&self.pending.placement, observed)?;
        self.agent.remember(Experience {
            state: self.pending.state.clone(),
            action: self.pending.action,
            reward: cost.reward,
            next_state: next_state.clone(),
        });
        self.data_weight += 1;
        let loss = self.agent.learn()?;
        let action = self.agent.act(&next_state)?;
        self.ranking.push(observed);
        let placement = place_top_popular(self.space.n_cached(action), &self.ranking.mean(), self.geom)?;
        self.pending = Pending {
            state: next_state,
            action,
            placement,
        };
        Ok(TrainDiagnostics {
            reward: cost.reward,
            delay_ms: cost.delay_ms,
            loss,
            action,
        })
    }

    pub fn online(&self) -> &DuelingNet {
        &self.agent.online
    }
}

/// One Alg.-1 iteration at F-AP `k`: virtual rows from its own batch.
pub fn local_train_slot(
    trainer: &mut LocalTrainer,
    slot_requests: &crate::popularity::RequestBatch,
    observed: &[f64],
) -> Result<TrainDiagnostics> {
    let rows = virtual_rows(slot_requests, trainer.geom.k_faps)?;
    trainer.train_slot(&rows, observed)
}

/// Trainers plus a greedily executed model refreshed every `T_s` slots.
/// Shared by the federated and the centralized schemes.
#[derive(Debug, Clone)]
pub(crate) struct DrlCore {
    pub(crate) trainers: Vec<LocalTrainer>,
    pub(crate) global: DuelingNet,
    space: ActionSpace,
    geom: CacheGeometry,
    period: usize,
    decision: Decision,
    placement: Placement,
    ranking: RunningMean,
    rounds: usize,
}

impl DrlCore {
    pub(crate) fn new(cfg: &ExperimentConfig, master_seed: u64, n_trainers: usize) -> Result<Self> {
        let geom = cfg.geometry();
        let space = crate::env::build_action_space(geom, &cfg.action_grid)?;
        let shape = cfg.net_shape(space.len());
        let global = DuelingNet::new(shape, &mut seeds::rng(master_seed, Component::NetInit, 0))?;
        let trainers = (0..n_trainers)
            .map(|k| LocalTrainer::new(k, &global, cfg, space.clone(), master_seed))
            .collect::<Result<Vec<_>>>()?;
        let (placement, _) = initial_state(&space, geom)?;
        Ok(DrlCore {
            trainers,
            global,
            space,
            geom,
            period: cfg.aggregation_period,
            decision: Decision::Coded(placement.clone()),
            placement,
            ranking: RunningMean::new(geom.n_contents),
            rounds: 0,
        })
    }

    pub(crate) fn decision(&self) -> &Decision {
        &self.decision
    }

    /// One slot: greedy global action, one training slot per
    /// trainer on `inputs[k] = (rows, observed popularity)`, then aggregation
    /// when `slot` is a multiple of `T_s`.
    pub(crate) fn step(
        &mut self,
        slot: usize,
        global_popularity: &[f64],
        inputs: &[(Vec<Vec<usize>>, &[f64])],
    ) -> Result<SlotReport> {
        let state = encode_state(&self.placement, global_popularity)?;
        let action = greedy_action(&self.global, &state)?;
        self.ranking.push(global_popularity);
        self.placement = place_top_popular(self.space.n_cached(action), &self.ranking.mean(), self.geom)?;
        self.decision = Decision::Coded(self.placement.clone());

        let diags = self
            .trainers
            .par_iter_mut()
            .zip(inputs.par_iter())
            .map(|(tr, (rows, pop))| tr.train_slot(rows, pop))
            .collect::<Result<Vec<_>>>()?;
        let (losses, weights): (Vec<f64>, Vec<f64>) = diags
            .iter()
            .zip(&self.trainers)
            .filter_map(|(d, tr)| d.loss.map(|l| (l, tr.data_weight as f64)))
            .unzip();
        let loss = if losses.is_empty() {
            f64::NAN
        } else {
            global_loss(&losses, &weights)?
        };

        if slot.is_multiple_of(self.period) {
            self.federate()?;
        }
        Ok(SlotReport { loss })
    }

    fn federate(&mut self) -> Result<()> {
        let round = FederationRound {
            snapshots: self.trainers.iter().map(|t| t.online().params().to_vec()).collect(),
            weights: self.trainers.iter().map(|t| t.data_weight as f64).collect(),
            period: self.period,
        };
        let merged = round.global_model()?;
        self.global.set_params(&merged)?;
        for tr in &mut self.trainers {
            tr.agent.load_model(&self.global)?;
            tr.data_weight = 0;
        }
        self.rounds += 1;
        Ok(())
    }

    pub(crate) fn rounds(&self) -> usize {
        self.rounds
    }
}

/// The proposed scheme: K local trainers on virtual coded caching.
#[derive(Debug, Clone)]
pub struct FederatedScheme {
    core: DrlCore,
}

impl FederatedScheme {
    pub fn new(cfg: &ExperimentConfig, master_seed: u64) -> Result<Self> {
        Ok(FederatedScheme {
            core: DrlCore::new(cfg, master_seed, cfg.k_faps)?,
        })
    }

    pub fn global_model(&self) -> &DuelingNet {
        &self.core.global
    }

    pub fn trainers(&self) -> &[LocalTrainer] {
        &self.core.trainers
    }

    /// Completed aggregation rounds.
    pub fn rounds(&self) -> usize {
        self.core.rounds()
    }
}

impl Scheme for FederatedScheme {
    fn name(&self) -> &str {
        "fdrl"
    }

    fn decision(&self) -> &Decision {
        self.core.decision()
    }

    fn observe(&mut self, obs: &SlotObservation<'_>, _served: &crate::env::SlotCost) -> Result<SlotReport> {
        let k = self.core.geom.k_faps;
        let inputs = obs
            .batches
            .iter()
            .zip(obs.local_popularity)
            .map(|(b, p)| Ok((virtual_rows(b, k)?, p.as_slice())))
            .collect::<Result<Vec<_>>>()?;
        self.core.step(obs.slot, obs.global_popularity, &inputs)
    }

    fn models(&self) -> Vec<(String, &DuelingNet)> {
        let mut out = vec![("global".to_string(), &self.core.global)];
        out.extend(
            self.core
                .trainers
                .iter()
                .map(|t| (format!("fap{}", t.fap_id), t.online())),
        );
        out
    }
}

/// Artifacts of a federated-only run.
#[derive(Debug, Clone)]
pub struct FederatedRun {
    pub records: Vec<MetricRecord>,
    pub scheme: FederatedScheme,
}

/// Runs the proposed scheme alone for `cfg.slots` slots on seed `seed`.
pub fn run(cfg: &ExperimentConfig, seed: u64) -> Result<FederatedRun> {
    cfg.validate()?;
    let mut scheme = FederatedScheme::new(cfg, seed)?;
    let records = simulate_with(cfg, seed, &mut [&mut scheme as &mut dyn Scheme])?;
    Ok(FederatedRun { records, scheme })
}
