//! Actor-critic agent.
//!
//! Two small feed-forward networks with tanh hidden layers: the actor maps an
//! observation to the mean and log-std of a Gaussian whose samples are
//! squashed through `tanh` into `[-1, 1]`; the critic maps it to a state
//! value. Parameters live in flat vectors so federated averaging is a plain
//! elementwise operation.

mod a2c;
mod io;
mod mlp;
mod policy;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::OBS_DIM;
use crate::error::{Error, Result};
use crate::seed;

pub use a2c::{
    a2c_update, actor_loss_and_grad, critic_loss_and_grad, evaluate, reward_to_go, Batch, BatchStep, UpdateDiagnostics,
};
pub use io::{read_binary, read_text, write_binary, write_text};
pub use mlp::{LayerShape, Mlp};
pub use policy::{ActOutput, MeanAction, SamplingPolicy, TrajStep, Trajectory, LOG_STD_MAX, LOG_STD_MIN};

pub const ACTOR_OUTPUTS: usize = 2;
pub const CRITIC_OUTPUTS: usize = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetLayout {
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
}

impl Default for NetLayout {
    fn default() -> Self {
        Self { input_dim: OBS_DIM, hidden_dims: vec![64, 64] }
    }
}

impl NetLayout {
    pub fn new(input_dim: usize, hidden_dims: Vec<usize>) -> Self {
        Self { input_dim, hidden_dims }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.hidden_dims.contains(&0) {
            return Err(Error::InvalidConfig(format!("layer sizes must be positive: {self:?}")));
        }
        Ok(())
    }

    fn dims(&self, outputs: usize) -> Vec<usize> {
        let mut d = Vec::with_capacity(self.hidden_dims.len() + 2);
        d.push(self.input_dim);
        d.extend_from_slice(&self.hidden_dims);
        d.push(outputs);
        d
    }

    pub fn actor_dims(&self) -> Vec<usize> {
        self.dims(ACTOR_OUTPUTS)
    }

    pub fn critic_dims(&self) -> Vec<usize> {
        self.dims(CRITIC_OUTPUTS)
    }
}

/// Actor and critic parameters. Each network's vector stores, layer by
/// layer, the row-major weight matrix (`out x in`) followed by the bias.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentParams {
    pub layout: NetLayout,
    pub actor: Vec<f64>,
    pub critic: Vec<f64>,
}

impl AgentParams {
    pub fn zeros(layout: NetLayout) -> Self {
        let actor = vec![0.0; Mlp::param_count(&layout.actor_dims())];
        let critic = vec![0.0; Mlp::param_count(&layout.critic_dims())];
        Self { layout, actor, critic }
    }

    pub fn actor_net(&self) -> Mlp<'_> {
        Mlp::new(self.layout.actor_dims(), &self.actor)
    }

    pub fn critic_net(&self) -> Mlp<'_> {
        Mlp::new(self.layout.critic_dims(), &self.critic)
    }

    pub fn actor_shapes(&self) -> Vec<LayerShape> {
        LayerShape::table(&self.layout.actor_dims())
    }

    pub fn critic_shapes(&self) -> Vec<LayerShape> {
        LayerShape::table(&self.layout.critic_dims())
    }

    pub fn validate(&self) -> Result<()> {
        self.layout.validate()?;
        if self.actor.len() != Mlp::param_count(&self.layout.actor_dims())
            || self.critic.len() != Mlp::param_count(&self.layout.critic_dims())
        {
            return Err(Error::LayoutMismatch(format!(
                "vector lengths {} / {} do not match layout {:?}",
                self.actor.len(),
                self.critic.len(),
                self.layout
            )));
        }
        if !self.actor.iter().chain(&self.critic).all(|v| v.is_finite()) {
            return Err(Error::NonFinite("agent parameters"));
        }
        Ok(())
    }

    pub fn same_layout(&self, other: &AgentParams) -> bool {
        self.layout == other.layout && self.actor.len() == other.actor.len() && self.critic.len() == other.critic.len()
    }
}

/// Glorot-uniform weights, zero biases.
pub fn init_params(layout: &NetLayout, seed: u64) -> Result<AgentParams> {
    layout.validate()?;
    let mut rng = seed::rng(seed);
    let mut params = AgentParams::zeros(layout.clone());
    fill_glorot(&layout.actor_dims(), &mut params.actor, &mut rng);
    fill_glorot(&layout.critic_dims(), &mut params.critic, &mut rng);
    Ok(params)
}

fn fill_glorot<R: Rng>(dims: &[usize], params: &mut [f64], rng: &mut R) {
    let mut offset = 0;
    for shape in LayerShape::table(dims) {
        let limit = (6.0 / (shape.inputs + shape.outputs) as f64).sqrt();
        let n_w = shape.inputs * shape.outputs;
        for w in &mut params[offset..offset + n_w] {
            *w = rng.random_range(-limit..limit);
        }
        offset += n_w + shape.outputs;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub gamma: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub entropy_coef: f64,
    pub episodes_per_update: usize,
    /// Global-norm clip applied to each network's gradient.
    pub grad_clip: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            actor_lr: 3e-4,
            critic_lr: 1e-3,
            entropy_coef: 1e-3,
            episodes_per_update: 4,
            grad_clip: 5.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = (0.0..=1.0).contains(&self.gamma)
            && self.actor_lr > 0.0
            && self.critic_lr > 0.0
            && self.entropy_coef >= 0.0
            && self.episodes_per_update >= 1
            && self.grad_clip > 0.0;
        if !ok {
            return Err(Error::InvalidConfig(format!("invalid training config {self:?}")));
        }
        Ok(())
    }
}
