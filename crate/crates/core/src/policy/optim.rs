//! Adam with global gradient-norm clipping.

use serde::{Deserialize, Serialize};

use super::net::{Gradients, PolicyNet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Global L2 clip; `0` disables clipping.
    pub max_grad_norm: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            max_grad_norm: 1.0,
        }
    }
}

/// Scales `g` so its norm is at most `max_norm`; returns the pre-clip norm.
pub fn clip_grad_norm(g: &mut Gradients, max_norm: f64) -> f64 {
    let n = g.norm();
    if max_norm > 0.0 && n > max_norm {
        g.scale(max_norm / n);
    }
    n
}

#[derive(Debug, Clone)]
pub struct Adam {
    pub cfg: AdamConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(cfg: AdamConfig, num_params: usize) -> Self {
        Self {
            cfg,
            m: vec![0.0; num_params],
            v: vec![0.0; num_params],
            t: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// Descends along `grads` (gradient of a loss to minimize). Returns the
    /// gradient norm before clipping.
    pub fn step(&mut self, net: &mut PolicyNet, mut grads: Gradients) -> f64 {
        let norm = clip_grad_norm(&mut grads, self.cfg.max_grad_norm);
        self.t += 1;
        let c = &self.cfg;
        let bc1 = 1.0 - c.beta1.powi(self.t as i32);
        let bc2 = 1.0 - c.beta2.powi(self.t as i32);
        let params = net.params_mut();
        for i in 0..params.len() {
            let g = grads.0[i];
            if g == 0.0 && self.m[i] == 0.0 {
                continue;
            }
            self.m[i] = c.beta1 * self.m[i] + (1.0 - c.beta1) * g;
            self.v[i] = c.beta2 * self.v[i] + (1.0 - c.beta2) * g * g;
            let mhat = self.m[i] / bc1;
            let vhat = self.v[i] / bc2;
            params[i] -= c.lr * mhat / (vhat.sqrt() + c.eps);
        }
        net.round_params();
        norm
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::test_fixtures::small_net;

    #[test]
    fn clipping_caps_the_norm() {
        let mut g = Gradients(vec![3.0, 4.0]);
        assert_eq!(clip_grad_norm(&mut g, 1.0), 5.0);
        assert!((g.norm() - 1.0).abs() < 1e-12);
        let mut g = Gradients(vec![0.3, 0.4]);
        clip_grad_norm(&mut g, 1.0);
        assert_eq!(g.0, vec![0.3, 0.4]);
    }

    #[test]
    fn first_step_moves_by_lr_and_stays_f32() {
        let mut net = small_net(1);
        let before = net.params().to_vec();
        let mut g = net.zero_grads();
        g.0[0] = 1e-3;
        g.0[1] = -2e-3;
        let mut opt = Adam::new(
            AdamConfig {
                lr: 0.01,
                max_grad_norm: 0.0,
                ..AdamConfig::default()
            },
            net.num_params(),
        );
        opt.step(&mut net, g);
        assert!((net.params()[0] - (before[0] - 0.01)).abs() < 1e-6);
        assert!((net.params()[1] - (before[1] + 0.01)).abs() < 1e-6);
        assert_eq!(net.params()[2..], before[2..]);
        assert!(net.params().iter().all(|p| (*p as f32 as f64) == *p));
    }
}
