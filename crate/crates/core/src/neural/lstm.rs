use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_len, init_uniform, sigmoid, Activation, Dense, DenseCache, Loss, NeuralError, Trainable};

/// One LSTM layer. Gate rows are ordered input, forget, cell, output.
/// Parameters: W (4h × (n_in + h)) row-major, then b (4h).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmLayer {
    pub n_in: usize,
    pub hidden: usize,
    pub params: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmCache {
    u: Vec<Vec<f64>>,
    gates: Vec<Vec<f64>>,
    c: Vec<Vec<f64>>,
    tanh_c: Vec<Vec<f64>>,
    pub h: Vec<Vec<f64>>,
}

impl LstmLayer {
    pub fn new(n_in: usize, hidden: usize, rng: &mut ChaCha8Rng) -> Self {
        let cols = n_in + hidden;
        Self { n_in, hidden, params: init_uniform(4 * hidden * cols + 4 * hidden, cols, rng) }
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn forward(&self, xs: &[Vec<f64>]) -> Result<LstmCache, NeuralError> {
        let h = self.hidden;
        let cols = self.n_in + h;
        let (w, b) = self.params.split_at(4 * h * cols);
        let mut cache = LstmCache {
            u: Vec::with_capacity(xs.len()),
            gates: Vec::with_capacity(xs.len()),
            c: Vec::with_capacity(xs.len()),
            tanh_c: Vec::with_capacity(xs.len()),
            h: Vec::with_capacity(xs.len()),
        };
        let mut h_prev = vec![0.0; h];
        let mut c_prev = vec![0.0; h];
        for x in xs {
            check_len(self.n_in, x.len())?;
            let mut u = Vec::with_capacity(cols);
            u.extend_from_slice(x);
            u.extend_from_slice(&h_prev);
            let mut a: Vec<f64> = (0..4 * h)
                .map(|r| b[r] + w[r * cols..(r + 1) * cols].iter().zip(&u).map(|(p, q)| p * q).sum::<f64>())
                .collect();
            for (r, v) in a.iter_mut().enumerate() {
                *v = if (2 * h..3 * h).contains(&r) { v.tanh() } else { sigmoid(*v) };
            }
            let c: Vec<f64> = (0..h).map(|j| a[h + j] * c_prev[j] + a[j] * a[2 * h + j]).collect();
            let tc: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
            let hn: Vec<f64> = (0..h).map(|j| a[3 * h + j] * tc[j]).collect();
            h_prev.clone_from(&hn);
            c_prev.clone_from(&c);
            cache.u.push(u);
            cache.gates.push(a);
            cache.c.push(c);
            cache.tanh_c.push(tc);
            cache.h.push(hn);
        }
        Ok(cache)
    }

    /// BPTT. `dh` holds the external gradient on each step's hidden output.
    /// Accumulates into `grad` and returns dL/dx per step.
    pub fn backward(&self, cache: &LstmCache, dh: &[Vec<f64>], grad: &mut [f64]) -> Result<Vec<Vec<f64>>, NeuralError> {
        let t_len = cache.h.len();
        check_len(t_len, dh.len())?;
        check_len(self.n_params(), grad.len())?;
        let h = self.hidden;
        let cols = self.n_in + h;
        let w = &self.params[..4 * h * cols];
        let (gw, gb) = grad.split_at_mut(4 * h * cols);
        let mut dx = vec![Vec::new(); t_len];
        let mut dh_next = vec![0.0; h];
        let mut dc_next = vec![0.0; h];
        let mut da = vec![0.0; 4 * h];
        for t in (0..t_len).rev() {
            let g = &cache.gates[t];
            let tc = &cache.tanh_c[t];
            for j in 0..h {
                let dht = dh[t][j] + dh_next[j];
                let (i, f, cg, o) = (g[j], g[h + j], g[2 * h + j], g[3 * h + j]);
                let c_prev = if t > 0 { cache.c[t - 1][j] } else { 0.0 };
                let dc = dht * o * (1.0 - tc[j] * tc[j]) + dc_next[j];
                da[j] = dc * cg * i * (1.0 - i);
                da[h + j] = dc * c_prev * f * (1.0 - f);
                da[2 * h + j] = dc * i * (1.0 - cg * cg);
                da[3 * h + j] = dht * tc[j] * o * (1.0 - o);
                dc_next[j] = dc * f;
            }
            let u = &cache.u[t];
            let mut du = vec![0.0; cols];
            for r in 0..4 * h {
                let d = da[r];
                if d == 0.0 {
                    continue;
                }
                gb[r] += d;
                let row = r * cols;
                for k in 0..cols {
                    gw[row + k] += d * u[k];
                    du[k] += w[row + k] * d;
                }
            }
            dh_next.copy_from_slice(&du[self.n_in..]);
            du.truncate(self.n_in);
            dx[t] = du;
        }
        Ok(dx)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HeadKind {
    Linear,
    Sigmoid,
}

/// Stacked LSTM, dropout on the last hidden state, one-unit dense head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmNet {
    pub layers: Vec<LstmLayer>,
    pub dropout: f64,
    pub head: Dense,
    pub head_kind: HeadKind,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmNetCache {
    layers: Vec<LstmCache>,
    mask: Vec<f64>,
    head: DenseCache,
}

impl LstmNet {
    pub fn new(n_in: usize, hidden: &[usize], dropout: f64, head_kind: HeadKind, seed: u64) -> Self {
        assert!(!hidden.is_empty(), "need at least one recurrent layer");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::with_capacity(hidden.len());
        let mut prev = n_in;
        for &hs in hidden {
            layers.push(LstmLayer::new(prev, hs, &mut rng));
            prev = hs;
        }
        let act = match head_kind {
            HeadKind::Linear => Activation::Identity,
            HeadKind::Sigmoid => Activation::Sigmoid,
        };
        Self { layers, dropout, head: Dense::new(prev, 1, act, &mut rng), head_kind, seed }
    }

    pub fn n_in(&self) -> usize {
        self.layers[0].n_in
    }

    /// Forward pass. With `rng` set, inverted dropout is applied to the
    /// final hidden state.
    pub fn forward_cached(&self, xs: &[Vec<f64>], rng: Option<&mut ChaCha8Rng>) -> Result<LstmNetCache, NeuralError> {
        if xs.is_empty() {
            return Err(NeuralError::ShapeMismatch { expected: 1, got: 0 });
        }
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut seq: Vec<Vec<f64>> = xs.to_vec();
        for l in &self.layers {
            let c = l.forward(&seq)?;
            seq = c.h.clone();
            caches.push(c);
        }
        let last = seq.last().expect("non-empty").clone();
        let mask: Vec<f64> = match rng {
            Some(r) if self.dropout > 0.0 => {
                let keep = 1.0 - self.dropout;
                (0..last.len()).map(|_| if r.random::<f64>() < keep { 1.0 / keep } else { 0.0 }).collect()
            }
            _ => vec![1.0; last.len()],
        };
        let dropped: Vec<f64> = last.iter().zip(&mask).map(|(a, m)| a * m).collect();
        let head = self.head.forward_cached(&dropped)?;
        Ok(LstmNetCache { layers: caches, mask, head })
    }

    pub fn forward(&self, xs: &[Vec<f64>]) -> Result<f64, NeuralError> {
        Ok(self.forward_cached(xs, None)?.head.y[0])
    }

    fn backward_impl(&self, cache: &LstmNetCache, d: f64, pre: bool, grad: &mut [f64]) -> Result<(), NeuralError> {
        check_len(self.n_params(), grad.len())?;
        let mut offsets = Vec::new();
        let mut off = 0;
        for l in &self.layers {
            offsets.push(off);
            off += l.n_params();
        }
        let (lg, hg) = grad.split_at_mut(off);
        let dlast = if pre {
            self.head.backward_pre(&cache.head, &[d], hg)?
        } else {
            self.head.backward(&cache.head, &[d], hg)?
        };
        let t_len = cache.layers[0].h.len();
        let top = self.layers.last().expect("layer").hidden;
        let mut dh = vec![vec![0.0; top]; t_len];
        dh[t_len - 1] = dlast.iter().zip(&cache.mask).map(|(a, m)| a * m).collect();
        for (i, l) in self.layers.iter().enumerate().rev() {
            let o = offsets[i];
            dh = l.backward(&cache.layers[i], &dh, &mut lg[o..o + l.n_params()])?;
        }
        Ok(())
    }

    /// Backward from dL/d(output).
    pub fn backward(&self, cache: Option<&LstmNetCache>, d_out: f64, grad: &mut [f64]) -> Result<(), NeuralError> {
        self.backward_impl(cache.ok_or(NeuralError::NoCache)?, d_out, false, grad)
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(LstmLayer::n_params).sum::<usize>() + self.head.n_params()
    }

    pub fn params(&self) -> Vec<f64> {
        let mut p: Vec<f64> = self.layers.iter().flat_map(|l| l.params.iter().copied()).collect();
        p.extend_from_slice(&self.head.params);
        p
    }

    pub fn set_params(&mut self, p: &[f64]) {
        let mut off = 0;
        for l in &mut self.layers {
            let n = l.params.len();
            l.params.copy_from_slice(&p[off..off + n]);
            off += n;
        }
        self.head.params.copy_from_slice(&p[off..]);
    }
}

impl Trainable for LstmNet {
    type Input = Vec<Vec<f64>>;

    fn n_params(&self) -> usize {
        LstmNet::n_params(self)
    }

    fn params(&self) -> Vec<f64> {
        LstmNet::params(self)
    }

    fn set_params(&mut self, p: &[f64]) {
        LstmNet::set_params(self, p)
    }

    fn predict(&self, x: &Vec<Vec<f64>>) -> Result<f64, NeuralError> {
        self.forward(x)
    }

    fn loss_grad(
        &self,
        x: &Vec<Vec<f64>>,
        y: f64,
        loss: Loss,
        grad: &mut [f64],
        rng: Option<&mut ChaCha8Rng>,
    ) -> Result<f64, NeuralError> {
        let cache = self.forward_cached(x, rng)?;
        let out = cache.head.y[0];
        let pre = loss == Loss::Bce && self.head_kind == HeadKind::Sigmoid;
        self.backward_impl(&cache, loss.grad(out, y), pre, grad)?;
        Ok(loss.value(out, y))
    }
}
