//! Central finite differences against the analytic backward pass.

use rand::Rng;

use super::net::{DuelingNet, NetShape, Role};
use crate::Result;

/// Squared TD error averaged over the batch, the loss minimized by `td_step`.
pub fn td_loss(net: &DuelingNet, states: &[f64], actions: &[usize], targets: &[f64]) -> Result<f64> {
    let pass = net.forward_batch(states, actions.len())?;
    Ok(actions
        .iter()
        .zip(targets)
        .enumerate()
        .map(|(j, (&a, &y))| (pass.q_row(j)[a] - y).powi(2))
        .sum::<f64>()
        / actions.len() as f64)
}

pub fn td_loss_grad(net: &DuelingNet, states: &[f64], actions: &[usize], targets: &[f64]) -> Result<(f64, Vec<f64>)> {
    let b = actions.len();
    let n = net.n_actions();
    let pass = net.forward_batch(states, b)?;
    let mut d_q = vec![0.0; b * n];
    let mut loss = 0.0;
    for (j, (&a, &y)) in actions.iter().zip(targets).enumerate() {
        let err = pass.q_row(j)[a] - y;
        loss += err * err;
        d_q[j * n + a] = 2.0 * err / b as f64;
    }
    Ok((loss / b as f64, net.backward(&pass, &d_q)?))
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Worst relative error per layer, in network order.
    pub per_layer: Vec<(Role, f64)>,
    pub analytic: Vec<f64>,
    pub numeric: Vec<f64>,
}

pub fn rel_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

pub fn grad_check(net: &DuelingNet, states: &[f64], actions: &[usize], targets: &[f64], h: f64) -> Result<GradCheckReport> {
    let (_, analytic) = td_loss_grad(net, states, actions, targets)?;
    let mut probe = net.clone();
    let mut numeric = vec![0.0; net.n_params()];
    for (i, slot) in numeric.iter_mut().enumerate() {
        let orig = probe.params()[i];
        probe.params_mut()[i] = orig + h;
        let plus = td_loss(&probe, states, actions, targets)?;
        probe.params_mut()[i] = orig - h;
        let minus = td_loss(&probe, states, actions, targets)?;
        probe.params_mut()[i] = orig;
        *slot = (plus - minus) / (2.0 * h);
    }
    let per_layer: Vec<(Role, f64)> = net
        .layers()
        .iter()
        .map(|l| {
            let worst = l
                .param_range()
                .map(|i| rel_error(analytic[i], numeric[i]))
                .fold(0.0, f64::max);
            (l.role, worst)
        })
        .collect();
    let max_rel_error = per_layer.iter().map(|p| p.1).fold(0.0, f64::max);
    Ok(GradCheckReport {
        max_rel_error,
        per_layer,
        analytic,
        numeric,
    })
}

/// A small random network with a matching batch of TD targets.
#[derive(Debug, Clone)]
pub struct GradProblem {
    pub net: DuelingNet,
    pub states: Vec<f64>,
    pub actions: Vec<usize>,
    pub targets: Vec<f64>,
}

/// Random widths, weights and biases. Nonzero biases keep ReLU
/// pre-activations off the kink at 0 when a trunk unit is inactive.
pub fn random_problem<R: Rng + ?Sized>(rng: &mut R) -> Result<GradProblem> {
    let input = rng.gen_range(3..8);
    let n_actions = rng.gen_range(2..5);
    let shape = NetShape {
        input,
        trunk: vec![rng.gen_range(3..7)],
        value_hidden: vec![rng.gen_range(2..5)],
        advantage_hidden: vec![rng.gen_range(2..5)],
        n_actions,
    };
    let mut net = DuelingNet::new(shape, rng)?;
    for l in net.layers().to_vec() {
        let end = l.param_range().end;
        for b in &mut net.params_mut()[end - l.outputs..end] {
            *b = rng.gen_range(-0.5..0.5);
        }
    }
    let batch = rng.gen_range(1..6);
    Ok(GradProblem {
        net,
        states: (0..batch * input).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        actions: (0..batch).map(|_| rng.gen_range(0..n_actions)).collect(),
        targets: (0..batch).map(|_| rng.gen_range(-1.0..1.0)).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn analytic_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let p = random_problem(&mut rng).unwrap();
            let r = grad_check(&p.net, &p.states, &p.actions, &p.targets, 1e-5).unwrap();
            assert!(r.max_rel_error < 1e-4, "{:?}", r.per_layer);
        }
    }

    #[test]
    fn loss_grad_returns_loss() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let p = random_problem(&mut rng).unwrap();
        let (loss, grad) = td_loss_grad(&p.net, &p.states, &p.actions, &p.targets).unwrap();
        assert_eq!(loss, td_loss(&p.net, &p.states, &p.actions, &p.targets).unwrap());
        assert_eq!(grad.len(), p.net.n_params());
    }

    #[test]
    fn rel_error_floors_tiny_magnitudes() {
        assert_eq!(rel_error(0.0, 0.0), 0.0);
        assert!((rel_error(1e-10, 0.0) - 1e-2).abs() < 1e-12);
        assert!((rel_error(2.0, 1.0) - 0.5).abs() < 1e-15);
    }
}
