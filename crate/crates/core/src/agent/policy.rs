//! Squashed-Gaussian policy.
//!
//! The actor outputs `(mu, log_std)`; `log_std` is clamped to
//! `[LOG_STD_MIN, LOG_STD_MAX]`. A pre-squash sample `z ~ N(mu, std)` becomes
//! the action `tanh(z)`, and the log-probability carries the change of
//! variables `-ln(1 - tanh(z)^2 + 1e-6)`.

use std::f64::consts::PI;

use rand::Rng;

use super::AgentParams;
use crate::datagen::BoxMuller;
use crate::env::{EnvState, Observation, Policy};
use crate::error::{Error, Result};

pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 2.0;
pub(crate) const SQUASH_EPS: f64 = 1e-6;

pub(crate) fn gaussian_log_density(z: f64, mu: f64, log_std: f64) -> f64 {
    let u = (z - mu) / log_std.exp();
    -0.5 * u * u - log_std - 0.5 * (2.0 * PI).ln()
}

pub(crate) fn squash_correction(z: f64) -> f64 {
    let t = z.tanh();
    (1.0 - t * t + SQUASH_EPS).ln()
}

/// Log-probability of the squashed action given the pre-squash sample.
pub fn squashed_log_prob(z: f64, mu: f64, log_std: f64) -> f64 {
    gaussian_log_density(z, mu, log_std) - squash_correction(z)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActOutput {
    pub action: f64,
    pub pre_squash: f64,
    pub log_prob: f64,
    pub value: f64,
    pub mean: f64,
    pub log_std: f64,
}

impl AgentParams {
    /// Mean and clamped log-std of the pre-squash Gaussian.
    pub fn policy_head(&self, obs: &[f64]) -> Result<(f64, f64)> {
        let out = self.actor_net().forward(obs);
        if !out.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("actor output"));
        }
        Ok((out[0], out[1].clamp(LOG_STD_MIN, LOG_STD_MAX)))
    }

    pub fn value(&self, obs: &[f64]) -> Result<f64> {
        let v = self.critic_net().forward(obs)[0];
        if !v.is_finite() {
            return Err(Error::NonFinite("critic output"));
        }
        Ok(v)
    }

    /// Samples an action.
    pub fn act<R: Rng>(&self, obs: &[f64], rng: &mut R) -> Result<ActOutput> {
        let (mean, log_std) = self.policy_head(obs)?;
        let z = mean + log_std.exp() * BoxMuller::new(&mut *rng).standard();
        let action = z.tanh();
        let log_prob = squashed_log_prob(z, mean, log_std);
        if !log_prob.is_finite() {
            return Err(Error::NonFinite("log-probability"));
        }
        Ok(ActOutput { action, pre_squash: z, log_prob, value: self.value(obs)?, mean, log_std })
    }

    /// Deterministic evaluation action `tanh(mu)`.
    pub fn mean_action(&self, obs: &[f64]) -> Result<f64> {
        Ok(self.policy_head(obs)?.0.tanh())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajStep {
    pub obs: Observation,
    pub action: f64,
    pub pre_squash: f64,
    pub log_prob: f64,
    pub reward: f64,
    pub value: f64,
}

pub type Trajectory = Vec<TrajStep>;

/// Stochastic policy that records what it sampled. Rewards are filled in by
/// [`SamplingPolicy::attach_rewards`] after the episode.
pub struct SamplingPolicy<'a, R> {
    pub params: &'a AgentParams,
    pub rng: &'a mut R,
    pub steps: Trajectory,
}

impl<'a, R: Rng> SamplingPolicy<'a, R> {
    pub fn new(params: &'a AgentParams, rng: &'a mut R) -> Self {
        Self { params, rng, steps: Vec::new() }
    }

    pub fn attach_rewards(mut self, rewards: impl IntoIterator<Item = f64>) -> Trajectory {
        for (s, r) in self.steps.iter_mut().zip(rewards) {
            s.reward = r;
        }
        self.steps
    }
}

impl<R: Rng> Policy for SamplingPolicy<'_, R> {
    fn act(&mut self, _: &EnvState, obs: &Observation) -> Result<f64> {
        let out = self.params.act(obs, self.rng)?;
        self.steps.push(TrajStep {
            obs: *obs,
            action: out.action,
            pre_squash: out.pre_squash,
            log_prob: out.log_prob,
            reward: 0.0,
            value: out.value,
        });
        Ok(out.action)
    }
}

/// Deterministic mean-action policy used for evaluation.
pub struct MeanAction<'a>(pub &'a AgentParams);

impl Policy for MeanAction<'_> {
    fn act(&mut self, _: &EnvState, obs: &Observation) -> Result<f64> {
        self.0.mean_action(obs)
    }
}
