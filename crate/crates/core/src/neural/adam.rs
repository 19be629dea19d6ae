use serde::{Deserialize, Serialize};

use super::{check_len, NeuralError};

/// Adam with bias correction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub t: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl Adam {
    pub fn new(n: usize, lr: f64) -> Self {
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, t: 0, m: vec![0.0; n], v: vec![0.0; n] }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<(), NeuralError> {
        check_len(self.m.len(), params.len())?;
        check_len(self.m.len(), grads.len())?;
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn zero_gradient_is_noop() {
        let mut a = Adam::new(3, 1e-3);
        let mut p = vec![1.0, -2.0, 0.5];
        a.step(&mut p, &[0.0; 3]).unwrap();
        assert_eq!(p, vec![1.0, -2.0, 0.5]);
    }

    #[test]
    fn first_unit_step() {
        let mut a = Adam::new(1, 1e-3);
        let mut p = vec![0.0];
        a.step(&mut p, &[1.0]).unwrap();
        assert_abs_diff_eq!(p[0], -1e-3 / (1.0 + 1e-8), epsilon = 1e-18);
    }

    #[test]
    fn scripted_three_steps() {
        let (lr, b1, b2, eps) = (0.1, 0.9, 0.999, 1e-8);
        let gs = [0.5, -1.0, 2.0];
        let (mut m, mut v, mut x) = (0.0f64, 0.0f64, 1.0f64);
        for (t, g) in gs.iter().enumerate() {
            let t = (t + 1) as i32;
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            x -= lr * (m / (1.0 - b1.powi(t))) / ((v / (1.0 - b2.powi(t))).sqrt() + eps);
        }
        let mut a = Adam::new(1, lr);
        let mut p = vec![1.0];
        for g in gs {
            a.step(&mut p, &[g]).unwrap();
        }
        assert_abs_diff_eq!(p[0], x, epsilon = 1e-15);
    }

    #[test]
    fn shape_mismatch() {
        let mut a = Adam::new(2, 1e-3);
        assert!(a.step(&mut [0.0; 3], &[0.0; 3]).is_err());
    }
}
