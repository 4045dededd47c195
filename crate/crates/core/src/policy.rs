//! Stochastic Gaussian policies and state-value critics.

use alloc::vec;
use alloc::vec::Vec;

use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::nn::Mlp;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;
pub const LOG_STD_MIN: f64 = -3.0;
pub const LOG_STD_MAX: f64 = 1.0;

/// A stochastic continuous-action policy `π(a|s)` with evaluable log-density.
pub trait Policy {
    fn action_dim(&self) -> usize;
    fn num_params(&self) -> usize;
    fn params(&self) -> Vec<f64>;
    fn set_params(&mut self, params: &[f64]);
    /// Most likely action, used for evaluation.
    fn mean_action(&self, state: &[f64]) -> Vec<f64>;
    fn sample(&self, state: &[f64], rng: &mut dyn RngCore) -> Vec<f64>;
    fn log_prob(&self, state: &[f64], action: &[f64]) -> f64;
    /// Adds `scale · ∂ log π(a|s) / ∂θ` to `grad` and returns `log π(a|s)`.
    fn accumulate_log_prob_grad(&self, state: &[f64], action: &[f64], scale: f64, grad: &mut [f64]) -> f64;
    /// Like [`Policy::accumulate_log_prob_grad`], with the scale chosen from
    /// the log-probability itself.
    fn accumulate_log_prob_grad_by(
        &self,
        state: &[f64],
        action: &[f64],
        scale_of: &mut dyn FnMut(f64) -> f64,
        grad: &mut [f64],
    ) -> f64 {
        let lp = self.log_prob(state, action);
        let scale = scale_of(lp);
        if scale != 0.0 {
            self.accumulate_log_prob_grad(state, action, scale, grad);
        }
        lp
    }
    /// Adds `scale · ∂H/∂θ` of the (state-independent) action entropy and
    /// returns `H`. Policies without a closed form report 0.
    fn accumulate_entropy_grad(&self, _scale: f64, _grad: &mut [f64]) -> f64 {
        0.0
    }
}

/// Diagonal Gaussian log-density and its gradients with respect to the mean
/// and the (clamped) log standard deviation.
fn gaussian_terms(mean: &[f64], log_std: &[f64], action: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
    let mut lp = 0.0;
    let mut d_mean = Vec::with_capacity(mean.len());
    let mut d_log_std = Vec::with_capacity(mean.len());
    for i in 0..mean.len() {
        let ls = log_std[i].clamp(LOG_STD_MIN, LOG_STD_MAX);
        let inv_var = libm::exp(-2.0 * ls);
        let diff = action[i] - mean[i];
        lp += -0.5 * diff * diff * inv_var - ls - HALF_LN_2PI;
        d_mean.push(diff * inv_var);
        let inside = log_std[i] > LOG_STD_MIN && log_std[i] < LOG_STD_MAX;
        d_log_std.push(if inside { diff * diff * inv_var - 1.0 } else { 0.0 });
    }
    (lp, d_mean, d_log_std)
}

fn gaussian_entropy_grad(log_std: &[f64], scale: f64, grad: &mut [f64]) -> f64 {
    // H = Σ (log σ_i + ½ ln(2πe)); the log_std block sits at the end of the parameters.
    let off = grad.len() - log_std.len();
    let mut h = 0.0;
    for (i, &ls) in log_std.iter().enumerate() {
        h += ls.clamp(LOG_STD_MIN, LOG_STD_MAX) + 0.5 * libm::log(2.0 * core::f64::consts::PI * core::f64::consts::E);
        if ls > LOG_STD_MIN && ls < LOG_STD_MAX {
            grad[off + i] += scale;
        }
    }
    h
}

fn gaussian_sample(mean: &[f64], log_std: &[f64], rng: &mut dyn RngCore) -> Vec<f64> {
    mean.iter()
        .zip(log_std)
        .map(|(m, ls)| {
            let z: f64 = StandardNormal.sample(rng);
            m + libm::exp(ls.clamp(LOG_STD_MIN, LOG_STD_MAX)) * z
        })
        .collect()
}

/// `a ~ N(W s, diag(exp(log_std))²)`. Parameters: `W` row-major, then `log_std`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearGaussianPolicy {
    obs_dim: usize,
    act_dim: usize,
    weights: Vec<f64>,
    log_std: Vec<f64>,
}

impl LinearGaussianPolicy {
    pub fn new(obs_dim: usize, act_dim: usize, weights: Vec<f64>, log_std: Vec<f64>) -> Self {
        assert_eq!(weights.len(), obs_dim * act_dim);
        assert_eq!(log_std.len(), act_dim);
        LinearGaussianPolicy { obs_dim, act_dim, weights, log_std }
    }

    fn mean(&self, s: &[f64]) -> Vec<f64> {
        (0..self.act_dim)
            .map(|o| self.weights[o * self.obs_dim..(o + 1) * self.obs_dim].iter().zip(s).map(|(w, x)| w * x).sum())
            .collect()
    }
}

impl Policy for LinearGaussianPolicy {
    fn action_dim(&self) -> usize {
        self.act_dim
    }

    fn num_params(&self) -> usize {
        self.weights.len() + self.log_std.len()
    }

    fn params(&self) -> Vec<f64> {
        self.weights.iter().chain(&self.log_std).copied().collect()
    }

    fn set_params(&mut self, params: &[f64]) {
        let n = self.weights.len();
        self.weights.copy_from_slice(&params[..n]);
        self.log_std.copy_from_slice(&params[n..]);
    }

    fn mean_action(&self, state: &[f64]) -> Vec<f64> {
        self.mean(state)
    }

    fn sample(&self, state: &[f64], rng: &mut dyn RngCore) -> Vec<f64> {
        gaussian_sample(&self.mean(state), &self.log_std, rng)
    }

    fn log_prob(&self, state: &[f64], action: &[f64]) -> f64 {
        gaussian_terms(&self.mean(state), &self.log_std, action).0
    }

    fn accumulate_log_prob_grad(&self, state: &[f64], action: &[f64], scale: f64, grad: &mut [f64]) -> f64 {
        let (lp, d_mean, d_ls) = gaussian_terms(&self.mean(state), &self.log_std, action);
        for o in 0..self.act_dim {
            for i in 0..self.obs_dim {
                grad[o * self.obs_dim + i] += scale * d_mean[o] * state[i];
            }
            grad[self.weights.len() + o] += scale * d_ls[o];
        }
        lp
    }

    fn accumulate_entropy_grad(&self, scale: f64, grad: &mut [f64]) -> f64 {
        gaussian_entropy_grad(&self.log_std, scale, grad)
    }
}

/// Gaussian policy whose mean is an MLP of the state; the log standard
/// deviation is a free, state-independent parameter vector stored after the
/// network weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianMlpPolicy {
    net: Mlp,
    log_std: Vec<f64>,
}

impl GaussianMlpPolicy {
    pub fn new(net: Mlp, init_log_std: f64) -> Self {
        let log_std = vec![init_log_std; net.output_dim()];
        GaussianMlpPolicy { net, log_std }
    }

    pub fn log_std(&self) -> &[f64] {
        &self.log_std
    }
}

impl Policy for GaussianMlpPolicy {
    fn action_dim(&self) -> usize {
        self.net.output_dim()
    }

    fn num_params(&self) -> usize {
        self.net.num_params() + self.log_std.len()
    }

    fn params(&self) -> Vec<f64> {
        self.net.params().iter().chain(&self.log_std).copied().collect()
    }

    fn set_params(&mut self, params: &[f64]) {
        let n = self.net.num_params();
        self.net.params_mut().copy_from_slice(&params[..n]);
        self.log_std.copy_from_slice(&params[n..]);
    }

    fn mean_action(&self, state: &[f64]) -> Vec<f64> {
        self.net.forward(state)
    }

    fn sample(&self, state: &[f64], rng: &mut dyn RngCore) -> Vec<f64> {
        gaussian_sample(&self.net.forward(state), &self.log_std, rng)
    }

    fn log_prob(&self, state: &[f64], action: &[f64]) -> f64 {
        gaussian_terms(&self.net.forward(state), &self.log_std, action).0
    }

    fn accumulate_log_prob_grad(&self, state: &[f64], action: &[f64], scale: f64, grad: &mut [f64]) -> f64 {
        self.accumulate_log_prob_grad_by(state, action, &mut |_| scale, grad)
    }

    fn accumulate_log_prob_grad_by(
        &self,
        state: &[f64],
        action: &[f64],
        scale_of: &mut dyn FnMut(f64) -> f64,
        grad: &mut [f64],
    ) -> f64 {
        let acts = self.net.forward_cached(state);
        let (lp, d_mean, d_ls) = gaussian_terms(acts.last().expect("output"), &self.log_std, action);
        let scale = scale_of(lp);
        if scale == 0.0 {
            return lp;
        }
        let g_out: Vec<f64> = d_mean.iter().map(|d| scale * d).collect();
        let n = self.net.num_params();
        self.net.backward(&acts, &g_out, &mut grad[..n]);
        for (g, d) in grad[n..].iter_mut().zip(&d_ls) {
            *g += scale * d;
        }
        lp
    }

    fn accumulate_entropy_grad(&self, scale: f64, grad: &mut [f64]) -> f64 {
        gaussian_entropy_grad(&self.log_std, scale, grad)
    }
}

/// State-value function `V(s)`.
pub trait Critic {
    fn num_params(&self) -> usize;
    fn params(&self) -> &[f64];
    fn params_mut(&mut self) -> &mut [f64];
    fn value(&self, state: &[f64]) -> f64;
    /// Adds `scale · ∂V(s)/∂θ` to `grad` and returns `V(s)`.
    fn accumulate_value_grad(&self, state: &[f64], scale: f64, grad: &mut [f64]) -> f64;
    /// Like [`Critic::accumulate_value_grad`], with the scale chosen from `V(s)`.
    fn accumulate_value_grad_by(&self, state: &[f64], scale_of: &mut dyn FnMut(f64) -> f64, grad: &mut [f64]) -> f64 {
        let v = self.value(state);
        self.accumulate_value_grad(state, scale_of(v), grad);
        v
    }
}

/// `V(s) = w · s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearCritic {
    pub weights: Vec<f64>,
}

impl Critic for LinearCritic {
    fn num_params(&self) -> usize {
        self.weights.len()
    }

    fn params(&self) -> &[f64] {
        &self.weights
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    fn value(&self, state: &[f64]) -> f64 {
        crate::math::dot(&self.weights, state)
    }

    fn accumulate_value_grad(&self, state: &[f64], scale: f64, grad: &mut [f64]) -> f64 {
        for (g, x) in grad.iter_mut().zip(state) {
            *g += scale * x;
        }
        self.value(state)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpCritic {
    pub net: Mlp,
}

impl Critic for MlpCritic {
    fn num_params(&self) -> usize {
        self.net.num_params()
    }

    fn params(&self) -> &[f64] {
        self.net.params()
    }

    fn params_mut(&mut self) -> &mut [f64] {
        self.net.params_mut()
    }

    fn value(&self, state: &[f64]) -> f64 {
        self.net.forward(state)[0]
    }

    fn accumulate_value_grad(&self, state: &[f64], scale: f64, grad: &mut [f64]) -> f64 {
        self.accumulate_value_grad_by(state, &mut |_| scale, grad)
    }

    fn accumulate_value_grad_by(&self, state: &[f64], scale_of: &mut dyn FnMut(f64) -> f64, grad: &mut [f64]) -> f64 {
        let acts = self.net.forward_cached(state);
        let v = acts.last().expect("output")[0];
        self.net.backward(&acts, &[scale_of(v)], grad);
        v
    }
}
