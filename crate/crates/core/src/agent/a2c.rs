//! Advantage actor-critic update.
//!
//! Returns are reward-to-go (each action is credited only with rewards that
//! follow it). The advantage `R_t - V(s_t)` is treated as a constant in the
//! actor loss. Both losses are differentiated by hand through the networks;
//! log-probabilities are recomputed from the stored pre-squash samples so the
//! gradient is exact for the current parameters.

use super::policy::{gaussian_log_density, squash_correction, MeanAction, Trajectory};
use super::{AgentParams, TrainConfig, LOG_STD_MAX, LOG_STD_MIN};
use crate::datagen::DayData;
use crate::env::{HouseholdEnv, HouseholdScenario, Observation, RewardWeights};
use crate::error::{Error, Result};
use crate::metrics::EpisodeReport;
use crate::par::{self, Exec};

/// `R_t = sum_{k >= t} gamma^(k - t) r_k`.
pub fn reward_to_go(rewards: &[f64], gamma: f64) -> Vec<f64> {
    let mut out = vec![0.0; rewards.len()];
    let mut acc = 0.0;
    for (o, r) in out.iter_mut().zip(rewards).rev() {
        acc = r + gamma * acc;
        *o = acc;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchStep {
    pub obs: Observation,
    pub pre_squash: f64,
    pub ret: f64,
}

/// Flattened training batch with returns already computed.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Batch {
    pub steps: Vec<BatchStep>,
}

impl Batch {
    pub fn from_trajectories(trajectories: &[Trajectory], gamma: f64) -> Self {
        let steps = trajectories
            .iter()
            .flat_map(|traj| {
                let rewards: Vec<f64> = traj.iter().map(|s| s.reward).collect();
                let returns = reward_to_go(&rewards, gamma);
                traj.iter()
                    .zip(returns)
                    .map(|(s, ret)| BatchStep { obs: s.obs, pre_squash: s.pre_squash, ret })
                    .collect::<Vec<_>>()
            })
            .collect();
        Self { steps }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

const HALF_LN_2PI_E: f64 = 1.418_938_533_204_672_7;

/// Actor loss `-mean(log_prob * A) - entropy_coef * mean(H)` and its
/// gradient with respect to the actor parameters.
pub fn actor_loss_and_grad(params: &AgentParams, batch: &Batch, entropy_coef: f64) -> Result<(f64, Vec<f64>)> {
    let actor = params.actor_net();
    let critic = params.critic_net();
    let n = batch.len() as f64;
    let mut grad = vec![0.0; params.actor.len()];
    let mut loss = 0.0;
    for s in &batch.steps {
        let advantage = s.ret - critic.forward(&s.obs)[0];
        let acts = actor.forward_cached(&s.obs);
        let out = acts.last().unwrap();
        let mu = out[0];
        let raw_log_std = out[1];
        let log_std = raw_log_std.clamp(LOG_STD_MIN, LOG_STD_MAX);
        let z = s.pre_squash;
        let log_prob = gaussian_log_density(z, mu, log_std) - squash_correction(z);
        let entropy = HALF_LN_2PI_E + log_std;
        loss += -(log_prob * advantage) / n - entropy_coef * entropy / n;

        let inv_var = (-2.0 * log_std).exp();
        let diff = z - mu;
        let d_mu = -advantage * diff * inv_var / n;
        let inside = raw_log_std > LOG_STD_MIN && raw_log_std < LOG_STD_MAX;
        let d_log_std = if inside { -(advantage * (diff * diff * inv_var - 1.0) + entropy_coef) / n } else { 0.0 };
        actor.backward(&acts, &[d_mu, d_log_std], &mut grad);
    }
    Ok((loss, grad))
}

/// Critic loss `mean((V(s_t) - R_t)^2)` and its gradient.
pub fn critic_loss_and_grad(params: &AgentParams, batch: &Batch) -> Result<(f64, Vec<f64>)> {
    let critic = params.critic_net();
    let n = batch.len() as f64;
    let mut grad = vec![0.0; params.critic.len()];
    let mut loss = 0.0;
    for s in &batch.steps {
        let acts = critic.forward_cached(&s.obs);
        let err = acts.last().unwrap()[0] - s.ret;
        loss += err * err / n;
        critic.backward(&acts, &[2.0 * err / n], &mut grad);
    }
    Ok((loss, grad))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateDiagnostics {
    pub actor_loss: f64,
    pub critic_loss: f64,
    /// Norms before clipping.
    pub actor_grad_norm: f64,
    pub critic_grad_norm: f64,
    pub steps: usize,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn sgd_step(params: &mut [f64], grad: &[f64], lr: f64, clip: f64) {
    let n = norm(grad);
    let scale = if n > clip { clip / n } else { 1.0 };
    for (p, g) in params.iter_mut().zip(grad) {
        *p -= lr * scale * g;
    }
}

/// One plain-SGD step on both networks. A non-finite loss or gradient
/// leaves `params` untouched and returns an error.
pub fn a2c_update(
    params: &AgentParams,
    trajectories: &[Trajectory],
    cfg: &TrainConfig,
) -> Result<(AgentParams, UpdateDiagnostics)> {
    if trajectories.is_empty() || trajectories.iter().any(|t| t.is_empty()) {
        return Err(Error::InvalidArgument("update needs non-empty trajectories".into()));
    }
    let batch = Batch::from_trajectories(trajectories, cfg.gamma);
    let (actor_loss, actor_grad) = actor_loss_and_grad(params, &batch, cfg.entropy_coef)?;
    let (critic_loss, critic_grad) = critic_loss_and_grad(params, &batch)?;
    let diag = UpdateDiagnostics {
        actor_loss,
        critic_loss,
        actor_grad_norm: norm(&actor_grad),
        critic_grad_norm: norm(&critic_grad),
        steps: batch.len(),
    };
    let finite =
        [diag.actor_loss, diag.critic_loss, diag.actor_grad_norm, diag.critic_grad_norm].iter().all(|v| v.is_finite());
    if !finite {
        return Err(Error::NonFinite("a2c loss"));
    }
    let mut next = params.clone();
    sgd_step(&mut next.actor, &actor_grad, cfg.actor_lr, cfg.grad_clip);
    sgd_step(&mut next.critic, &critic_grad, cfg.critic_lr, cfg.grad_clip);
    next.validate()?;
    Ok((next, diag))
}

/// Deterministic mean-action episodes, one per `(scenario, day)` pair.
pub fn evaluate(
    params: &AgentParams,
    scenarios: &[HouseholdScenario],
    days: &[DayData],
    weights: &RewardWeights,
    exec: Exec,
) -> Result<Vec<EpisodeReport>> {
    if scenarios.len() != days.len() {
        return Err(Error::InvalidArgument(format!("{} scenarios but {} days", scenarios.len(), days.len())));
    }
    params.validate()?;
    par::map_range(exec, scenarios.len(), |i| {
        HouseholdEnv::new(&scenarios[i], &days[i])?.run_episode(&mut MeanAction(params), weights)
    })
    .into_iter()
    .collect()
}
