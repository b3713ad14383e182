//! Dense dueling Q-network with hand-written backpropagation.
//!
//! Layout: a shared ReLU trunk feeds a value head (ending in one linear
//! output) and an advantage head (ending in `|A|` linear outputs), combined
//! as `Q(s,a) = V(s) + A(s,a) - mean_a' A(s,a')`.
//!
//! All parameters live in one flat vector, layer by layer (trunk, value
//! head, advantage head), each layer storing its `outputs x inputs` weight
//! matrix row-major followed by its bias. Aggregation, optimizers and
//! checkpoints operate on that vector directly.

use rand::Rng;

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetShape {
    pub input: usize,
    pub trunk: Vec<usize>,
    pub value_hidden: Vec<usize>,
    pub advantage_hidden: Vec<usize>,
    pub n_actions: usize,
}

impl NetShape {
    /// Two 128-wide trunk layers, one 64-wide hidden layer per head.
    pub fn standard(input: usize, n_actions: usize) -> Self {
        NetShape {
            input,
            trunk: vec![128, 128],
            value_hidden: vec![64],
            advantage_hidden: vec![64],
            n_actions,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Trunk,
    Value,
    Advantage,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerSpec {
    pub role: Role,
    pub inputs: usize,
    pub outputs: usize,
    pub relu: bool,
    w_off: usize,
    b_off: usize,
}

impl LayerSpec {
    pub fn n_params(&self) -> usize {
        self.inputs * self.outputs + self.outputs
    }

    pub fn param_range(&self) -> std::ops::Range<usize> {
        self.w_off..self.b_off + self.outputs
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DuelingNet {
    shape: NetShape,
    layers: Vec<LayerSpec>,
    params: Vec<f64>,
}

fn layout(shape: &NetShape) -> Result<Vec<LayerSpec>> {
    if shape.input == 0 || shape.n_actions == 0 {
        return Err(Error::Shape("network needs nonzero input and action widths".into()));
    }
    if shape
        .trunk
        .iter()
        .chain(&shape.value_hidden)
        .chain(&shape.advantage_hidden)
        .any(|&w| w == 0)
    {
        return Err(Error::Shape("hidden layers must be nonempty".into()));
    }
    let mut layers = Vec::new();
    let mut offset = 0;
    let mut push = |role, inputs, outputs, relu| {
        let w_off = offset;
        let b_off = w_off + inputs * outputs;
        offset = b_off + outputs;
        layers.push(LayerSpec {
            role,
            inputs,
            outputs,
            relu,
            w_off,
            b_off,
        });
    };
    let mut width = shape.input;
    for &w in &shape.trunk {
        push(Role::Trunk, width, w, true);
        width = w;
    }
    let trunk_out = width;
    for (role, hidden, out) in [
        (Role::Value, &shape.value_hidden, 1),
        (Role::Advantage, &shape.advantage_hidden, shape.n_actions),
    ] {
        let mut width = trunk_out;
        for &w in hidden {
            push(role, width, w, true);
            width = w;
        }
        push(role, width, out, false);
    }
    Ok(layers)
}

/// `C = A*B + beta*C` with explicit strides.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    (rsa, csa): (usize, usize),
    b: &[f64],
    (rsb, csb): (usize, usize),
    beta: f64,
    c: &mut [f64],
) {
    if m == 0 || n == 0 {
        return;
    }
    assert!(k == 0 || a.len() > (m - 1) * rsa + (k - 1) * csa);
    assert!(k == 0 || b.len() > (k - 1) * rsb + (n - 1) * csb);
    assert!(c.len() >= m * n);
    // SAFETY: bounds of every strided access checked above; C is row-major m x n.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Activations kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    pub batch: usize,
    /// `batch x |A|`, row-major.
    pub q: Vec<f64>,
    pub value: Vec<f64>,
    pub advantage: Vec<f64>,
    /// `acts[i]` is the input of layer `i`; `outs[i]` its output.
    acts: Vec<Vec<f64>>,
    outs: Vec<Vec<f64>>,
}

impl ForwardPass {
    pub fn q_row(&self, j: usize) -> &[f64] {
        let n = self.q.len() / self.batch;
        &self.q[j * n..(j + 1) * n]
    }
}

impl DuelingNet {
    pub fn new<R: Rng + ?Sized>(shape: NetShape, rng: &mut R) -> Result<Self> {
        let layers = layout(&shape)?;
        let total = layers.last().map_or(0, |l| l.b_off + l.outputs);
        let mut params = vec![0.0; total];
        for l in &layers {
            // He-uniform for ReLU layers, LeCun-uniform for linear outputs.
            let gain = if l.relu { 6.0 } else { 3.0 };
            let bound = (gain / l.inputs as f64).sqrt();
            for w in &mut params[l.w_off..l.b_off] {
                *w = rng.gen_range(-bound..bound);
            }
        }
        Ok(DuelingNet { shape, layers, params })
    }

    pub fn zeros(shape: NetShape) -> Result<Self> {
        let layers = layout(&shape)?;
        let total = layers.last().map_or(0, |l| l.b_off + l.outputs);
        Ok(DuelingNet {
            shape,
            layers,
            params: vec![0.0; total],
        })
    }

    pub fn from_params(shape: NetShape, params: Vec<f64>) -> Result<Self> {
        let mut net = Self::zeros(shape)?;
        net.set_params(&params)?;
        Ok(net)
    }

    pub fn shape(&self) -> &NetShape {
        &self.shape
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn n_actions(&self) -> usize {
        self.shape.n_actions
    }

    pub fn input_dim(&self) -> usize {
        self.shape.input
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(Error::Shape(format!(
                "expected {} parameters, got {}",
                self.params.len(),
                params.len()
            )));
        }
        self.params.copy_from_slice(params);
        Ok(())
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }

    fn weights(&self, l: &LayerSpec) -> &[f64] {
        &self.params[l.w_off..l.b_off]
    }

    fn apply(&self, l: &LayerSpec, x: &[f64], batch: usize) -> Vec<f64> {
        let mut y = Vec::with_capacity(batch * l.outputs);
        for _ in 0..batch {
            y.extend_from_slice(&self.params[l.b_off..l.b_off + l.outputs]);
        }
        // y (b x out) += x (b x in) * W^T (in x out)
        gemm(
            batch,
            l.inputs,
            l.outputs,
            x,
            (l.inputs, 1),
            self.weights(l),
            (1, l.inputs),
            1.0,
            &mut y,
        );
        if l.relu {
            for v in &mut y {
                *v = v.max(0.0);
            }
        }
        y
    }

    /// Forward pass over `batch` row-major states.
    pub fn forward_batch(&self, states: &[f64], batch: usize) -> Result<ForwardPass> {
        if states.len() != batch * self.shape.input {
            return Err(Error::Shape(format!(
                "expected {batch} states of width {}, got {} values",
                self.shape.input,
                states.len()
            )));
        }
        let mut acts = Vec::with_capacity(self.layers.len());
        let mut outs = Vec::with_capacity(self.layers.len());
        let mut trunk_out = states.to_vec();
        let mut head_in = trunk_out.clone();
        let mut value = Vec::new();
        let mut advantage = Vec::new();
        let mut prev_role = Role::Trunk;
        for l in &self.layers {
            if l.role != prev_role {
                // a new head starts from the trunk output
                if prev_role == Role::Trunk {
                    trunk_out = head_in.clone();
                }
                head_in = trunk_out.clone();
                prev_role = l.role;
            }
            let y = self.apply(l, &head_in, batch);
            acts.push(std::mem::replace(&mut head_in, y.clone()));
            outs.push(y);
            if !l.relu {
                match l.role {
                    Role::Value => value = head_in.clone(),
                    Role::Advantage => advantage = head_in.clone(),
                    Role::Trunk => unreachable!("trunk layers are ReLU"),
                }
            }
        }
        let n = self.shape.n_actions;
        let mut q = Vec::with_capacity(batch * n);
        for j in 0..batch {
            let adv = &advantage[j * n..(j + 1) * n];
            let mean = adv.iter().sum::<f64>() / n as f64;
            q.extend(adv.iter().map(|a| value[j] + a - mean));
        }
        Ok(ForwardPass {
            batch,
            q,
            value,
            advantage,
            acts,
            outs,
        })
    }

    pub fn forward(&self, state: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_batch(state, 1)?.q)
    }

    /// Gradient of a loss with respect to every parameter, given `dL/dQ`
    /// (`batch x |A|`).
    pub fn backward(&self, pass: &ForwardPass, d_q: &[f64]) -> Result<Vec<f64>> {
        let b = pass.batch;
        let n = self.shape.n_actions;
        if d_q.len() != b * n {
            return Err(Error::Shape(format!("dQ has {} entries, expected {}", d_q.len(), b * n)));
        }
        // dueling combine
        let mut d_value = Vec::with_capacity(b);
        let mut d_adv = Vec::with_capacity(b * n);
        for j in 0..b {
            let row = &d_q[j * n..(j + 1) * n];
            let total: f64 = row.iter().sum();
            d_value.push(total);
            d_adv.extend(row.iter().map(|d| d - total / n as f64));
        }

        let mut grads = vec![0.0; self.params.len()];
        let trunk_width = self.shape.trunk.last().copied().unwrap_or(self.shape.input);
        let mut d_trunk_out = vec![0.0; b * trunk_width];
        let head_layers = |role: Role| -> Vec<usize> {
            (0..self.layers.len()).filter(|&i| self.layers[i].role == role).collect()
        };
        for (role, d_out) in [(Role::Value, d_value), (Role::Advantage, d_adv)] {
            let d_in = self.backprop_chain(pass, &head_layers(role), d_out, &mut grads);
            for (acc, d) in d_trunk_out.iter_mut().zip(d_in) {
                *acc += d;
            }
        }
        self.backprop_chain(pass, &head_layers(Role::Trunk), d_trunk_out, &mut grads);
        Ok(grads)
    }

    /// Backpropagates through consecutive layers, last to first; returns the
    /// gradient with respect to the chain's input.
    fn backprop_chain(&self, pass: &ForwardPass, chain: &[usize], mut dy: Vec<f64>, grads: &mut [f64]) -> Vec<f64> {
        let b = pass.batch;
        for &i in chain.iter().rev() {
            let l = &self.layers[i];
            if l.relu {
                for (d, &y) in dy.iter_mut().zip(&pass.outs[i]) {
                    if y <= 0.0 {
                        *d = 0.0;
                    }
                }
            }
            let x = &pass.acts[i];
            // dW (out x in) += dy^T (out x b) * x (b x in)
            gemm(
                l.outputs,
                b,
                l.inputs,
                &dy,
                (1, l.outputs),
                x,
                (l.inputs, 1),
                1.0,
                &mut grads[l.w_off..l.b_off],
            );
            let gb = &mut grads[l.b_off..l.b_off + l.outputs];
            for row in dy.chunks_exact(l.outputs) {
                for (g, d) in gb.iter_mut().zip(row) {
                    *g += d;
                }
            }
            // dx (b x in) = dy (b x out) * W (out x in)
            let mut dx = vec![0.0; b * l.inputs];
            gemm(
                b,
                l.outputs,
                l.inputs,
                &dy,
                (l.outputs, 1),
                self.weights(l),
                (l.inputs, 1),
                0.0,
                &mut dx,
            );
            dy = dx;
        }
        dy
    }
}

/// Index of the largest entry, ties to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small() -> NetShape {
        NetShape {
            input: 7,
            trunk: vec![8, 6],
            value_hidden: vec![5],
            advantage_hidden: vec![4],
            n_actions: 3,
        }
    }

    #[test]
    fn dueling_combine_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = DuelingNet::new(small(), &mut rng).unwrap();
        let states: Vec<f64> = (0..7 * 10).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let pass = net.forward_batch(&states, 10).unwrap();
        for j in 0..10 {
            let centered: f64 = pass.q_row(j).iter().map(|q| q - pass.value[j]).sum();
            assert!(centered.abs() < 1e-9);
        }
    }

    #[test]
    fn constant_advantage_gives_value() {
        // zero advantage weights, bias 2 on every action
        let shape = NetShape {
            input: 2,
            trunk: vec![],
            value_hidden: vec![],
            advantage_hidden: vec![],
            n_actions: 2,
        };
        let mut net = DuelingNet::zeros(shape).unwrap();
        // value layer: weights [0,0], bias 1
        let v = net.layers()[0];
        net.params_mut()[v.param_range()].copy_from_slice(&[0.0, 0.0, 1.0]);
        let a = net.layers()[1];
        net.params_mut()[a.param_range()].copy_from_slice(&[0.0, 0.0, 0.0, 0.0, 2.0, 2.0]);
        assert_eq!(net.forward(&[0.3, -0.2]).unwrap(), vec![1.0, 1.0]);

        // A = [0, 2] -> Q = V + A - 1 = [0, 2]
        net.params_mut()[a.param_range()].copy_from_slice(&[0.0, 0.0, 0.0, 0.0, 0.0, 2.0]);
        assert_eq!(net.forward(&[0.3, -0.2]).unwrap(), vec![0.0, 2.0]);
    }

    #[test]
    fn batch_rows_match_single_forward() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let net = DuelingNet::new(small(), &mut rng).unwrap();
        let states: Vec<f64> = (0..7 * 4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let pass = net.forward_batch(&states, 4).unwrap();
        for j in 0..4 {
            let single = net.forward(&states[j * 7..(j + 1) * 7]).unwrap();
            for (a, b) in single.iter().zip(pass.q_row(j)) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn shape_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let net = DuelingNet::new(small(), &mut rng).unwrap();
        assert!(matches!(net.forward(&[0.0; 6]), Err(Error::Shape(_))));
        let mut bad = small();
        bad.trunk = vec![0];
        assert!(DuelingNet::zeros(bad).is_err());
    }

    #[test]
    fn argmax_ties_to_lowest() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), 1);
        assert_eq!(argmax(&[2.0, 2.0]), 0);
    }
}
