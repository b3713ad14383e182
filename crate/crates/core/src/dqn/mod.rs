//! Dueling double deep Q-learning.
//!
//! Actions are chosen by the online network; bootstrap targets read the
//! chosen action's value from the target network, which is a periodic copy
//! of the online one. The task is continuing, so targets always bootstrap.

pub mod checkpoint;
pub mod gradcheck;
pub mod net;
pub mod optim;
pub mod replay;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub use net::{argmax, DuelingNet, NetShape};
pub use optim::{Optimizer, OptimizerKind};
pub use replay::{Experience, ReplayBuffer};

use crate::env::LocalState;
use crate::{Error, Result};

/// Linear epsilon decay from `start` to `end` over `decay_steps`, then flat.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExploreSchedule {
    pub start: f64,
    pub end: f64,
    pub decay_steps: u64,
}

impl ExploreSchedule {
    pub fn epsilon(&self, step: u64) -> f64 {
        if self.decay_steps == 0 || step >= self.decay_steps {
            return self.end;
        }
        let frac = step as f64 / self.decay_steps as f64;
        self.start + (self.end - self.start) * frac
    }
}

impl Default for ExploreSchedule {
    fn default() -> Self {
        ExploreSchedule {
            start: 1.0,
            end: 0.05,
            decay_steps: 2000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hyperparams {
    pub gamma: f64,
    pub learn_rate: f64,
    pub batch: usize,
    pub capacity: usize,
    /// Target network copy period `E`, in training steps.
    pub target_sync_steps: u64,
    pub explore: ExploreSchedule,
    pub optimizer: OptimizerKind,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            gamma: 0.9,
            learn_rate: 0.001,
            batch: 32,
            capacity: 5000,
            target_sync_steps: 200,
            explore: ExploreSchedule::default(),
            optimizer: OptimizerKind::adam(),
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::Config(format!("gamma {} outside [0, 1]", self.gamma)));
        }
        if !(self.learn_rate > 0.0 && self.learn_rate.is_finite()) {
            return Err(Error::Config(format!("learning rate {} must be positive", self.learn_rate)));
        }
        if self.batch == 0 || self.batch > self.capacity {
            return Err(Error::Config(format!(
                "batch size {} must be in [1, capacity {}]",
                self.batch, self.capacity
            )));
        }
        if self.target_sync_steps == 0 {
            return Err(Error::Config("target sync period must be positive".into()));
        }
        let e = self.explore;
        if !(0.0..=1.0).contains(&e.start) || !(0.0..=1.0).contains(&e.end) {
            return Err(Error::Config("exploration rates must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

pub fn greedy_action(net: &DuelingNet, state: &LocalState) -> Result<usize> {
    Ok(argmax(&net.forward(state.as_slice())?))
}

/// Uniform random action with probability `epsilon`, greedy otherwise.
pub fn select_action<R: Rng + ?Sized>(net: &DuelingNet, state: &LocalState, epsilon: f64, rng: &mut R) -> Result<usize> {
    let n = net.n_actions();
    if n == 1 {
        return Ok(0);
    }
    if rng.gen::<f64>() < epsilon {
        return Ok(rng.gen_range(0..n));
    }
    greedy_action(net, state)
}

/// `r + gamma * Q_target(s', argmax_a' Q_online(s', a'))`.
pub fn double_q_target(reward: f64, next_state: &LocalState, online: &DuelingNet, target: &DuelingNet, gamma: f64) -> Result<f64> {
    let pick = argmax(&online.forward(next_state.as_slice())?);
    let value = target.forward(next_state.as_slice())?[pick];
    Ok(reward + gamma * value)
}

/// Batched double-Q targets for `batch` row-major next states.
pub fn double_q_targets(
    rewards: &[f64],
    next_states: &[f64],
    online: &DuelingNet,
    target: &DuelingNet,
    gamma: f64,
) -> Result<Vec<f64>> {
    let b = rewards.len();
    let chooser = online.forward_batch(next_states, b)?;
    let valuer = target.forward_batch(next_states, b)?;
    Ok((0..b)
        .map(|j| rewards[j] + gamma * valuer.q_row(j)[argmax(chooser.q_row(j))])
        .collect())
}

pub fn sync_target(online: &DuelingNet, target: &mut DuelingNet) -> Result<()> {
    target.set_params(online.params())
}

/// One minibatch update of the online network on the mean squared TD error.
///
/// Returns the loss before the update, or `None` when the buffer holds fewer
/// than `hyper.batch` experiences (no update happens).
pub fn td_step<R: Rng + ?Sized>(
    online: &mut DuelingNet,
    target: &DuelingNet,
    buffer: &ReplayBuffer,
    hyper: &Hyperparams,
    optimizer: &mut Optimizer,
    rng: &mut R,
) -> Result<Option<f64>> {
    let Some(idx) = buffer.sample_indices(hyper.batch, rng) else {
        return Ok(None);
    };
    let dim = online.input_dim();
    let mut states = Vec::with_capacity(idx.len() * dim);
    let mut next_states = Vec::with_capacity(idx.len() * dim);
    let mut rewards = Vec::with_capacity(idx.len());
    let mut actions = Vec::with_capacity(idx.len());
    for &i in &idx {
        let e = buffer.get(i);
        states.extend_from_slice(e.state.as_slice());
        next_states.extend_from_slice(e.next_state.as_slice());
        rewards.push(e.reward);
        actions.push(e.action);
    }
    let targets = double_q_targets(&rewards, &next_states, online, target, hyper.gamma)?;
    let (loss, grads) = gradcheck::td_loss_grad(online, &states, &actions, &targets)?;
    optimizer.step(online.params_mut(), &grads);
    Ok(Some(loss))
}

/// Online and target networks with their replay memory, optimizer state and
/// private random streams.
#[derive(Debug, Clone)]
pub struct DqnAgent {
    pub online: DuelingNet,
    pub target: DuelingNet,
    pub buffer: ReplayBuffer,
    pub optimizer: Optimizer,
    pub hyper: Hyperparams,
    explore_rng: ChaCha8Rng,
    replay_rng: ChaCha8Rng,
    steps: u64,
}

impl DqnAgent {
    /// Starts with `online = target = init`.
    pub fn new(init: &DuelingNet, hyper: Hyperparams, explore_rng: ChaCha8Rng, replay_rng: ChaCha8Rng) -> Self {
        DqnAgent {
            online: init.clone(),
            target: init.clone(),
            buffer: ReplayBuffer::new(hyper.capacity),
            optimizer: Optimizer::new(hyper.optimizer, hyper.learn_rate, init.n_params()),
            hyper,
            explore_rng,
            replay_rng,
            steps: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn epsilon(&self) -> f64 {
        self.hyper.explore.epsilon(self.steps)
    }

    pub fn act(&mut self, state: &LocalState) -> Result<usize> {
        let eps = self.epsilon();
        select_action(&self.online, state, eps, &mut self.explore_rng)
    }

    pub fn remember(&mut self, exp: Experience) {
        self.buffer.push(exp);
    }

    /// One training step: a TD update when the buffer is warm, then the step
    /// counter advances and the target is refreshed every `E` steps.
    pub fn learn(&mut self) -> Result<Option<f64>> {
        let loss = td_step(
            &mut self.online,
            &self.target,
            &self.buffer,
            &self.hyper,
            &mut self.optimizer,
            &mut self.replay_rng,
        )?;
        self.steps += 1;
        if self.steps.is_multiple_of(self.hyper.target_sync_steps) {
            sync_target(&self.online, &mut self.target)?;
        }
        Ok(loss)
    }

    /// Replaces both networks with `model`.
    pub fn load_model(&mut self, model: &DuelingNet) -> Result<()> {
        self.online.set_params(model.params())?;
        self.target.set_params(model.params())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn linear_shape(input: usize, n_actions: usize) -> NetShape {
        NetShape {
            input,
            trunk: vec![],
            value_hidden: vec![],
            advantage_hidden: vec![],
            n_actions,
        }
    }

    /// Linear net whose Q-values equal the advantage biases plus `value_bias`
    /// minus their mean.
    fn biased_net(value_bias: f64, adv_bias: &[f64]) -> DuelingNet {
        let mut net = DuelingNet::zeros(linear_shape(3, adv_bias.len())).unwrap();
        let layers = net.layers().to_vec();
        let v = layers[0].param_range();
        net.params_mut()[v.end - 1] = value_bias;
        let a = layers[1].param_range();
        let n = adv_bias.len();
        net.params_mut()[a.end - n..a.end].copy_from_slice(adv_bias);
        net
    }

    fn state() -> LocalState {
        LocalState::from_values(vec![0.2, 0.5, 0.3]).unwrap()
    }

    #[test]
    fn double_q_target_example() {
        // online Q = [1, 3] picks action 1; target Q = [2, 1] values it at 1
        let online = biased_net(2.0, &[-1.0, 1.0]);
        let target = biased_net(1.5, &[0.5, -0.5]);
        assert_eq!(online.forward(state().as_slice()).unwrap(), vec![1.0, 3.0]);
        assert_eq!(target.forward(state().as_slice()).unwrap(), vec![2.0, 1.0]);
        let y = double_q_target(0.5, &state(), &online, &target, 0.9).unwrap();
        assert!((y - 1.4).abs() < 1e-9);
        assert_eq!(double_q_target(0.5, &state(), &online, &target, 0.0).unwrap(), 0.5);
        // same net on both sides: plain max target
        let y = double_q_target(0.5, &state(), &online, &online, 0.9).unwrap();
        assert!((y - (0.5 + 0.9 * 3.0)).abs() < 1e-12);
    }

    #[test]
    fn target_perturbation_keeps_argmax() {
        let online = biased_net(2.0, &[-1.0, 1.0]);
        let a = double_q_target(0.0, &state(), &online, &biased_net(0.0, &[5.0, 0.0]), 1.0).unwrap();
        let b = double_q_target(0.0, &state(), &online, &biased_net(0.0, &[0.0, 5.0]), 1.0).unwrap();
        // action 1 is always read from the target
        assert!((a - -2.5).abs() < 1e-12);
        assert!((b - 2.5).abs() < 1e-12);
    }

    #[test]
    fn select_action_examples() {
        let net = biased_net(0.0, &[0.0, 1.0, 0.5]);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            assert_eq!(select_action(&net, &state(), 0.0, &mut rng).unwrap(), 1);
        }
        let draws = 100_000;
        let mut counts = [0usize; 3];
        for _ in 0..draws {
            counts[select_action(&net, &state(), 1.0, &mut rng).unwrap()] += 1;
        }
        for c in counts {
            assert!((c as f64 / draws as f64 - 1.0 / 3.0).abs() < 0.01);
        }
        let single = biased_net(0.0, &[0.0]);
        assert_eq!(select_action(&single, &state(), 1.0, &mut rng).unwrap(), 0);
    }

    fn buffer_with(exps: Vec<Experience>) -> ReplayBuffer {
        let mut b = ReplayBuffer::new(exps.len().max(1));
        exps.into_iter().for_each(|e| b.push(e));
        b
    }

    #[test]
    fn zero_error_batch_leaves_parameters() {
        // Q = 0 everywhere, reward 0, gamma 0 -> Y = 0
        let mut net = DuelingNet::zeros(linear_shape(3, 2)).unwrap();
        let target = net.clone();
        let exp = Experience {
            state: state(),
            action: 1,
            reward: 0.0,
            next_state: state(),
        };
        let buf = buffer_with(vec![exp.clone(), exp]);
        let hyper = Hyperparams {
            gamma: 0.0,
            batch: 2,
            capacity: 2,
            ..Hyperparams::default()
        };
        let mut opt = Optimizer::new(hyper.optimizer, hyper.learn_rate, net.n_params());
        let loss = td_step(&mut net, &target, &buf, &hyper, &mut opt, &mut ChaCha8Rng::seed_from_u64(0))
            .unwrap()
            .unwrap();
        assert_eq!(loss, 0.0);
        assert!(net.params().iter().all(|&p| p == 0.0));
    }

    #[test]
    fn linear_update_matches_hand_gradient() {
        // Q(s,a) = w_v.s + b_v + (W_a s + b_a)_a - mean(W_a s + b_a)
        // L = (Q(s,a) - r)^2 with gamma = 0, SGD step lr * dL/dtheta
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut net = DuelingNet::new(linear_shape(3, 2), &mut rng).unwrap();
        let before = net.params().to_vec();
        let s = state();
        let action = 0;
        let r = 0.7;
        let q = net.forward(s.as_slice()).unwrap();
        let err = q[action] - r;
        let lr = 0.01;

        let mut expected = before.clone();
        let x = s.as_slice();
        // value layer: 3 weights then bias
        for i in 0..3 {
            expected[i] -= lr * 2.0 * err * x[i];
        }
        expected[3] -= lr * 2.0 * err;
        // advantage layer: rows for actions 0 and 1, then biases;
        // dQ_a/dA_b = [a == b] - 1/2
        for b in 0..2 {
            let coef = if b == action { 0.5 } else { -0.5 };
            for i in 0..3 {
                expected[4 + b * 3 + i] -= lr * 2.0 * err * coef * x[i];
            }
            expected[10 + b] -= lr * 2.0 * err * coef;
        }

        let target = net.clone();
        let buf = buffer_with(vec![Experience {
            state: s.clone(),
            action,
            reward: r,
            next_state: s,
        }]);
        let hyper = Hyperparams {
            gamma: 0.0,
            batch: 1,
            capacity: 1,
            learn_rate: lr,
            optimizer: OptimizerKind::Sgd,
            ..Hyperparams::default()
        };
        let mut opt = Optimizer::new(hyper.optimizer, lr, net.n_params());
        let loss = td_step(&mut net, &target, &buf, &hyper, &mut opt, &mut rng).unwrap().unwrap();
        assert!((loss - err * err).abs() < 1e-12);
        for (got, want) in net.params().iter().zip(&expected) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn td_step_needs_full_batch() {
        let mut net = DuelingNet::zeros(linear_shape(3, 2)).unwrap();
        let target = net.clone();
        let buf = ReplayBuffer::new(10);
        let hyper = Hyperparams {
            capacity: 10,
            batch: 4,
            ..Hyperparams::default()
        };
        let mut opt = Optimizer::new(hyper.optimizer, hyper.learn_rate, net.n_params());
        let out = td_step(&mut net, &target, &buf, &hyper, &mut opt, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert!(out.is_none());
    }

    #[test]
    fn sync_copies_and_detaches() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut online = DuelingNet::new(NetShape::standard(7, 3), &mut rng).unwrap();
        let mut target = DuelingNet::new(NetShape::standard(7, 3), &mut rng).unwrap();
        sync_target(&online, &mut target).unwrap();
        assert_eq!(online.forward(state_7().as_slice()).unwrap(), target.forward(state_7().as_slice()).unwrap());
        sync_target(&online, &mut target).unwrap();
        assert_eq!(online.params(), target.params());
        online.params_mut()[0] += 1.0;
        assert_ne!(online.params()[0], target.params()[0]);
    }

    fn state_7() -> LocalState {
        LocalState::from_values(vec![1.0, 0.0, 1.0, 0.66, 0.5, 0.3, 0.2]).unwrap()
    }

    #[test]
    fn explore_schedule_is_linear_then_flat() {
        let s = ExploreSchedule::default();
        assert_eq!(s.epsilon(0), 1.0);
        assert!((s.epsilon(1000) - 0.525).abs() < 1e-12);
        assert_eq!(s.epsilon(2000), 0.05);
        assert_eq!(s.epsilon(10_000), 0.05);
    }

    #[test]
    fn agent_syncs_target_every_period() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let init = DuelingNet::new(NetShape::standard(7, 3), &mut rng).unwrap();
        let hyper = Hyperparams {
            batch: 1,
            capacity: 10,
            target_sync_steps: 5,
            ..Hyperparams::default()
        };
        let mut agent = DqnAgent::new(&init, hyper, ChaCha8Rng::seed_from_u64(1), ChaCha8Rng::seed_from_u64(2));
        agent.remember(Experience {
            state: state_7(),
            action: 1,
            reward: 1.0,
            next_state: state_7(),
        });
        for step in 1..=12u64 {
            agent.learn().unwrap();
            let synced = agent.online.params() == agent.target.params();
            assert_eq!(synced, step % 5 == 0, "step {step}");
        }
    }
}
