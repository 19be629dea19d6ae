use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_len, init_uniform, sigmoid, Loss, NeuralError, Trainable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Identity,
    Tanh,
    Relu,
    Sigmoid,
}

impl Activation {
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Identity => z,
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(0.0),
            Activation::Sigmoid => sigmoid(z),
        }
    }

    /// Derivative expressed through the pre-activation z and output y.
    pub fn derivative(self, z: f64, y: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Tanh => 1.0 - y * y,
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => y * (1.0 - y),
        }
    }
}

/// Fully connected layer. Parameters are stored flat: weights row-major
/// (n_out × n_in) followed by biases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub n_in: usize,
    pub n_out: usize,
    pub act: Activation,
    pub params: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseCache {
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    pub y: Vec<f64>,
}

impl Dense {
    pub fn new(n_in: usize, n_out: usize, act: Activation, rng: &mut ChaCha8Rng) -> Self {
        Self { n_in, n_out, act, params: init_uniform(n_out * n_in + n_out, n_in, rng) }
    }

    pub fn zeros(n_in: usize, n_out: usize, act: Activation) -> Self {
        Self { n_in, n_out, act, params: vec![0.0; n_out * n_in + n_out] }
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn weight(&self, o: usize, i: usize) -> f64 {
        self.params[o * self.n_in + i]
    }

    pub fn bias(&self, o: usize) -> f64 {
        self.params[self.n_out * self.n_in + o]
    }

    pub fn forward_cached(&self, x: &[f64]) -> Result<DenseCache, NeuralError> {
        check_len(self.n_in, x.len())?;
        let (w, b) = self.params.split_at(self.n_out * self.n_in);
        let z: Vec<f64> = (0..self.n_out)
            .map(|o| b[o] + w[o * self.n_in..(o + 1) * self.n_in].iter().zip(x).map(|(a, c)| a * c).sum::<f64>())
            .collect();
        let y = z.iter().map(|&v| self.act.apply(v)).collect();
        Ok(DenseCache { x: x.to_vec(), z, y })
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>, NeuralError> {
        Ok(self.forward_cached(x)?.y)
    }

    /// Accumulates parameter gradients into `grad` and returns dL/dx.
    pub fn backward(&self, cache: &DenseCache, dy: &[f64], grad: &mut [f64]) -> Result<Vec<f64>, NeuralError> {
        check_len(self.n_out, dy.len())?;
        let dz: Vec<f64> = (0..self.n_out).map(|o| dy[o] * self.act.derivative(cache.z[o], cache.y[o])).collect();
        self.backward_pre(cache, &dz, grad)
    }

    /// Same as [`Dense::backward`] but starting from dL/dz.
    pub fn backward_pre(&self, cache: &DenseCache, dz: &[f64], grad: &mut [f64]) -> Result<Vec<f64>, NeuralError> {
        check_len(self.n_out, dz.len())?;
        check_len(self.n_params(), grad.len())?;
        let n_in = self.n_in;
        let (gw, gb) = grad.split_at_mut(self.n_out * n_in);
        let w = &self.params[..self.n_out * n_in];
        let mut dx = vec![0.0; n_in];
        for o in 0..self.n_out {
            let d = dz[o];
            if d == 0.0 {
                continue;
            }
            gb[o] += d;
            let row = o * n_in;
            for i in 0..n_in {
                gw[row + i] += d * cache.x[i];
                dx[i] += w[row + i] * d;
            }
        }
        Ok(dx)
    }
}

/// Stack of dense layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Dense>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpCache {
    pub layers: Vec<DenseCache>,
}

impl MlpCache {
    pub fn output(&self) -> &[f64] {
        &self.layers.last().expect("at least one layer").y
    }
}

impl Mlp {
    /// `sizes` = [input, hidden..., output]; hidden layers use `hidden`, the
    /// last layer uses `out`.
    pub fn new(sizes: &[usize], hidden: Activation, out: Activation, seed: u64) -> Self {
        assert!(sizes.len() >= 2, "need input and output sizes");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = sizes.len() - 1;
        let layers = (0..n)
            .map(|l| Dense::new(sizes[l], sizes[l + 1], if l + 1 == n { out } else { hidden }, &mut rng))
            .collect();
        Self { layers }
    }

    pub fn n_in(&self) -> usize {
        self.layers[0].n_in
    }

    pub fn n_out(&self) -> usize {
        self.layers.last().map(|l| l.n_out).unwrap_or(0)
    }

    pub fn forward_cached(&self, x: &[f64]) -> Result<MlpCache, NeuralError> {
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut h = x.to_vec();
        for l in &self.layers {
            let c = l.forward_cached(&h)?;
            h = c.y.clone();
            caches.push(c);
        }
        Ok(MlpCache { layers: caches })
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>, NeuralError> {
        let mut h = x.to_vec();
        for l in &self.layers {
            h = l.forward(&h)?;
        }
        Ok(h)
    }

    /// Accumulates gradients (flat, in [`Trainable::params`] order) and
    /// returns dL/dx.
    pub fn backward(&self, cache: Option<&MlpCache>, dy: &[f64], grad: &mut [f64]) -> Result<Vec<f64>, NeuralError> {
        self.backward_impl(cache, dy, grad, false)
    }

    /// Like [`Mlp::backward`] but `dz` is the gradient with respect to the
    /// last layer's pre-activation.
    pub fn backward_pre(
        &self,
        cache: Option<&MlpCache>,
        dz: &[f64],
        grad: &mut [f64],
    ) -> Result<Vec<f64>, NeuralError> {
        self.backward_impl(cache, dz, grad, true)
    }

    fn backward_impl(
        &self,
        cache: Option<&MlpCache>,
        d_out: &[f64],
        grad: &mut [f64],
        pre: bool,
    ) -> Result<Vec<f64>, NeuralError> {
        let cache = cache.ok_or(NeuralError::NoCache)?;
        check_len(self.layers.len(), cache.layers.len())?;
        check_len(self.n_params(), grad.len())?;
        let mut offsets = Vec::with_capacity(self.layers.len());
        let mut off = 0;
        for l in &self.layers {
            offsets.push(off);
            off += l.n_params();
        }
        let last = self.layers.len() - 1;
        let mut d = d_out.to_vec();
        for (i, l) in self.layers.iter().enumerate().rev() {
            let o = offsets[i];
            let g = &mut grad[o..o + l.n_params()];
            d = if pre && i == last {
                l.backward_pre(&cache.layers[i], &d, g)?
            } else {
                l.backward(&cache.layers[i], &d, g)?
            };
        }
        Ok(d)
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(Dense::n_params).sum()
    }

    pub fn params(&self) -> Vec<f64> {
        self.layers.iter().flat_map(|l| l.params.iter().copied()).collect()
    }

    pub fn set_params(&mut self, p: &[f64]) {
        let mut off = 0;
        for l in &mut self.layers {
            let n = l.params.len();
            l.params.copy_from_slice(&p[off..off + n]);
            off += n;
        }
    }
}

impl Trainable for Mlp {
    type Input = Vec<f64>;

    fn n_params(&self) -> usize {
        Mlp::n_params(self)
    }

    fn params(&self) -> Vec<f64> {
        Mlp::params(self)
    }

    fn set_params(&mut self, p: &[f64]) {
        Mlp::set_params(self, p)
    }

    fn predict(&self, x: &Vec<f64>) -> Result<f64, NeuralError> {
        Ok(self.forward(x)?[0])
    }

    fn loss_grad(
        &self,
        x: &Vec<f64>,
        y: f64,
        loss: Loss,
        grad: &mut [f64],
        _rng: Option<&mut ChaCha8Rng>,
    ) -> Result<f64, NeuralError> {
        let cache = self.forward_cached(x)?;
        let out = cache.output()[0];
        let d = loss.grad(out, y);
        if loss == Loss::Bce {
            self.backward_pre(Some(&cache), &[d], grad)?;
        } else {
            self.backward(Some(&cache), &[d], grad)?;
        }
        Ok(loss.value(out, y))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn zero_net_outputs_zero() {
        let net = Mlp { layers: vec![Dense::zeros(3, 4, Activation::Tanh), Dense::zeros(4, 1, Activation::Identity)] };
        assert_eq!(net.forward(&[1.0, 2.0, 3.0]).unwrap(), vec![0.0]);
    }

    #[test]
    fn identity_net() {
        let mut d = Dense::zeros(1, 1, Activation::Identity);
        d.params = vec![1.0, 0.0];
        assert_eq!(d.forward(&[3.5]).unwrap(), vec![3.5]);
    }

    #[test]
    fn hand_computed_two_layer() {
        let mut l1 = Dense::zeros(2, 2, Activation::Relu);
        l1.params = vec![1.0, -1.0, 0.5, 2.0, 0.1, -0.2];
        let mut l2 = Dense::zeros(2, 1, Activation::Identity);
        l2.params = vec![3.0, -1.0, 0.25];
        let net = Mlp { layers: vec![l1, l2] };
        // h = relu([1 - 2 + 0.1, 0.5 + 4 - 0.2]) = [0, 4.3]; y = -4.3 + 0.25
        assert_abs_diff_eq!(net.forward(&[1.0, 2.0]).unwrap()[0], -4.05, epsilon = 1e-12);
    }

    #[test]
    fn scalar_linear_squared_error_gradient() {
        let (w, x, y) = (0.7, 2.0, 3.0);
        let mut d = Dense::zeros(1, 1, Activation::Identity);
        d.params = vec![w, 0.0];
        let net = Mlp { layers: vec![d] };
        let mut g = vec![0.0; 2];
        net.loss_grad(&vec![x], y, Loss::Mse, &mut g, None).unwrap();
        assert_abs_diff_eq!(g[0], 2.0 * (w * x - y) * x, epsilon = 1e-12);
    }

    #[test]
    fn constant_loss_zero_gradient() {
        let net = Mlp::new(&[3, 5, 2], Activation::Tanh, Activation::Identity, 1);
        let cache = net.forward_cached(&[0.1, 0.2, 0.3]).unwrap();
        let mut g = vec![0.0; net.n_params()];
        net.backward(Some(&cache), &[0.0, 0.0], &mut g).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
        assert_eq!(net.backward(None, &[0.0, 0.0], &mut g), Err(NeuralError::NoCache));
    }
}
