//! Federated averaging across household agents.
//!
//! Training proceeds in synchronous rounds. Within a round each client trains
//! locally on freshly generated days of its own household, drawing all of its
//! randomness from a stream seeded by `(master_seed, household_id, round)`.
//! At the barrier the parameters are replaced by their weighted mean. Only
//! parameters cross the client boundary.

use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{self, a2c_update, init_params, AgentParams, NetLayout, SamplingPolicy, TrainConfig, Trajectory};
use crate::datagen::{generate_day, DayData, GridConfig};
use crate::env::{HouseholdEnv, HouseholdScenario, RewardWeights};
use crate::error::{Error, Result};
use crate::metrics::EpisodeReport;
use crate::par::{self, Exec};
use crate::seed::{self, stream};
use crate::STEPS_PER_DAY;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FederationConfig {
    /// Local episodes per client between synchronizations.
    pub sync_interval: usize,
    pub rounds: usize,
    /// Per-client averaging weights; uniform when absent.
    pub client_weights: Option<Vec<f64>>,
}

impl Default for FederationConfig {
    fn default() -> Self {
        Self { sync_interval: 200, rounds: 5, client_weights: None }
    }
}

impl FederationConfig {
    pub fn validate(&self, clients: usize) -> Result<()> {
        if self.sync_interval == 0 {
            return Err(Error::InvalidConfig("sync_interval must be >= 1".into()));
        }
        if let Some(w) = &self.client_weights {
            check_weights(w, clients)?;
        }
        Ok(())
    }

    pub fn weights(&self, clients: usize) -> Vec<f64> {
        self.client_weights.clone().unwrap_or_else(|| vec![1.0; clients])
    }
}

fn check_weights(weights: &[f64], clients: usize) -> Result<()> {
    if weights.len() != clients {
        return Err(Error::InvalidConfig(format!("{} weights for {clients} clients", weights.len())));
    }
    if weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) || weights.iter().sum::<f64>() <= 0.0 {
        return Err(Error::InvalidConfig("client weights must be >= 0 with a positive sum".into()));
    }
    Ok(())
}

/// `sum_k w_k theta_k / sum_k w_k`, elementwise, on actor and critic alike.
pub fn fed_avg(params: &[AgentParams], weights: &[f64]) -> Result<AgentParams> {
    let first = params.first().ok_or_else(|| Error::InvalidArgument("fed_avg needs a client".into()))?;
    check_weights(weights, params.len())?;
    if let Some(p) = params.iter().find(|p| !p.same_layout(first)) {
        return Err(Error::LayoutMismatch(format!("{:?} vs {:?}", p.layout, first.layout)));
    }
    let total: f64 = weights.iter().sum();
    let shares: Vec<f64> = weights.iter().map(|w| w / total).collect();
    // Written as an offset from the first client and clamped to the input
    // envelope, so identical inputs come back bit-identical.
    let average = |pick: fn(&AgentParams) -> &Vec<f64>| -> Vec<f64> {
        (0..pick(first).len())
            .map(|i| {
                let base = pick(first)[i];
                let (mut lo, mut hi) = (base, base);
                let mut offset = 0.0;
                for (p, s) in params.iter().zip(&shares) {
                    let v = pick(p)[i];
                    lo = lo.min(v);
                    hi = hi.max(v);
                    offset += s * (v - base);
                }
                (base + offset).clamp(lo, hi)
            })
            .collect()
    };
    Ok(AgentParams { layout: first.layout.clone(), actor: average(|p| &p.actor), critic: average(|p| &p.critic) })
}

/// Everything a client needs to train locally, shared by all clients.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSetup {
    pub layout: NetLayout,
    pub train: TrainConfig,
    pub grid: GridConfig,
    pub reward: RewardWeights,
    /// Steps per episode.
    pub horizon: usize,
    /// Fixed episodes evaluated with each client's parameters after every
    /// round.
    pub validation: Vec<(HouseholdScenario, DayData)>,
}

impl Default for TrainingSetup {
    fn default() -> Self {
        Self {
            layout: NetLayout::default(),
            train: TrainConfig::default(),
            grid: GridConfig::default(),
            reward: RewardWeights::default(),
            horizon: STEPS_PER_DAY,
            validation: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Validation,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
        }
    }
}

/// One row of the round log. Scores are per-step means averaged over the
/// episodes of the round (train) or the validation set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundLog {
    pub round: usize,
    pub client_id: u32,
    pub split: Split,
    pub mean_reward: f64,
    pub price_score: f64,
    pub emission_score: f64,
}

pub const ROUND_LOG_HEADER: &str = "round,client_id,split,mean_reward,price_score,emission_score";

pub fn round_log_csv(rows: &[RoundLog]) -> String {
    let mut out = String::from(ROUND_LOG_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{:.6},{:.6},{:.6}",
            r.round,
            r.client_id,
            r.split.name(),
            r.mean_reward,
            r.price_score,
            r.emission_score
        );
    }
    out
}

pub fn read_round_log_csv(text: &str) -> Result<Vec<RoundLog>> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(ROUND_LOG_HEADER) {
        return Err(Error::Parse("round log header".into()));
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 6 {
                return Err(Error::Parse(format!("round log row '{line}'")));
            }
            let bad = |_| Error::Parse(format!("round log row '{line}'"));
            Ok(RoundLog {
                round: f[0].parse().map_err(|_| Error::Parse(line.into()))?,
                client_id: f[1].parse().map_err(|_| Error::Parse(line.into()))?,
                split: match f[2] {
                    "train" => Split::Train,
                    "validation" => Split::Validation,
                    _ => return Err(Error::Parse(format!("unknown split in '{line}'"))),
                },
                mean_reward: f[3].parse().map_err(bad)?,
                price_score: f[4].parse().map_err(bad)?,
                emission_score: f[5].parse().map_err(bad)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClientState {
    pub client_id: u32,
    pub scenario: HouseholdScenario,
    pub params: AgentParams,
    pub episodes_completed: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
struct ScoreAcc {
    reward: f64,
    price: f64,
    emission: f64,
    n: usize,
}

impl ScoreAcc {
    fn add(&mut self, report: &EpisodeReport) {
        self.reward += report.total_reward / report.horizon() as f64;
        self.price += report.price_score;
        self.emission += report.emission_score;
        self.n += 1;
    }

    fn row(&self, round: usize, client_id: u32, split: Split) -> RoundLog {
        let n = self.n.max(1) as f64;
        RoundLog {
            round,
            client_id,
            split,
            mean_reward: self.reward / n,
            price_score: self.price / n,
            emission_score: self.emission / n,
        }
    }
}

/// Trains one client for `episodes` episodes. Every `episodes_per_update`
/// episodes (and once more for any remainder) the collected trajectories
/// drive one A2C update.
pub fn train_local(
    params: &AgentParams,
    scenario: &HouseholdScenario,
    setup: &TrainingSetup,
    episodes: usize,
    stream_seed: u64,
) -> Result<(AgentParams, RoundLog)> {
    let mut rng = seed::rng(stream_seed);
    let mut params = params.clone();
    let mut pending: Vec<Trajectory> = Vec::with_capacity(setup.train.episodes_per_update);
    let mut acc = ScoreAcc::default();
    for episode in 0..episodes {
        let day_seed: u64 = rng.random();
        let day = generate_day(scenario, &setup.grid, setup.horizon, day_seed)?;
        let env = HouseholdEnv::new(scenario, &day)?;
        let mut policy = SamplingPolicy::new(&params, &mut rng);
        let report = env.run_episode(&mut policy, &setup.reward)?;
        pending.push(policy.attach_rewards(report.steps.iter().map(|s| s.reward)));
        acc.add(&report);
        if pending.len() == setup.train.episodes_per_update || episode + 1 == episodes {
            params = a2c_update(&params, &pending, &setup.train)?.0;
            pending.clear();
        }
    }
    Ok((params, acc.row(0, scenario.household_id, Split::Train)))
}

fn validation_row(
    params: &AgentParams,
    setup: &TrainingSetup,
    round: usize,
    client_id: u32,
) -> Result<Option<RoundLog>> {
    if setup.validation.is_empty() {
        return Ok(None);
    }
    let (scenarios, days): (Vec<_>, Vec<_>) = setup.validation.iter().cloned().unzip();
    let reports = agent::evaluate(params, &scenarios, &days, &setup.reward, Exec::Sequential)?;
    let mut acc = ScoreAcc::default();
    reports.iter().for_each(|r| acc.add(r));
    Ok(Some(acc.row(round, client_id, Split::Validation)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingOutcome {
    pub initial: AgentParams,
    /// Last average (federated) or the uniform mean of the client params
    /// (isolated; informational only).
    pub final_params: AgentParams,
    pub clients: Vec<ClientState>,
    pub logs: Vec<RoundLog>,
    /// Averaged parameters after each round; empty for isolated training.
    pub checkpoints: Vec<AgentParams>,
}

#[derive(Debug, Error)]
#[error("round {round} aborted by client {client_id}: {error}")]
pub struct TrainingAborted {
    pub round: usize,
    pub client_id: u32,
    #[source]
    pub error: Error,
    /// Parameters at the last barrier, one per client.
    pub rollback: Vec<AgentParams>,
    pub logs: Vec<RoundLog>,
}

pub type TrainingResult = std::result::Result<TrainingOutcome, Box<TrainingAborted>>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Mode {
    Federated,
    Isolated,
}

fn client_stream(master_seed: u64, household_id: u32, round: usize) -> u64 {
    seed::derive(master_seed, &[stream::TRAIN, u64::from(household_id), round as u64])
}

fn train_loop(
    clients: &[HouseholdScenario],
    setup: &TrainingSetup,
    fed: &FederationConfig,
    master_seed: u64,
    exec: Exec,
    mode: Mode,
) -> TrainingResult {
    let fail = |error: Error| {
        Box::new(TrainingAborted { round: 0, client_id: 0, error, rollback: Vec::new(), logs: Vec::new() })
    };
    if clients.is_empty() {
        return Err(fail(Error::InvalidArgument("training needs at least one client".into())));
    }
    let mut ids: Vec<u32> = clients.iter().map(|c| c.household_id).collect();
    ids.sort_unstable();
    if ids.windows(2).any(|w| w[0] == w[1]) {
        return Err(fail(Error::InvalidConfig("household ids must be unique".into())));
    }
    for c in clients {
        c.validate().map_err(fail)?;
    }
    setup.train.validate().map_err(fail)?;
    fed.validate(clients.len()).map_err(fail)?;

    let initial = init_params(&setup.layout, seed::derive(master_seed, &[stream::INIT])).map_err(fail)?;
    let weights = fed.weights(clients.len());
    let mut states: Vec<ClientState> = clients
        .iter()
        .map(|s| ClientState {
            client_id: s.household_id,
            scenario: s.clone(),
            params: initial.clone(),
            episodes_completed: 0,
        })
        .collect();
    let mut logs = Vec::new();
    let mut checkpoints = Vec::new();

    for round in 1..=fed.rounds {
        let results = par::map(exec, &states, |c| {
            train_local(
                &c.params,
                &c.scenario,
                setup,
                fed.sync_interval,
                client_stream(master_seed, c.client_id, round),
            )
        });
        let mut trained = Vec::with_capacity(states.len());
        for (c, r) in states.iter().zip(results) {
            match r {
                Ok(v) => trained.push(v),
                Err(error) => {
                    return Err(Box::new(TrainingAborted {
                        round,
                        client_id: c.client_id,
                        error,
                        rollback: states.iter().map(|c| c.params.clone()).collect(),
                        logs,
                    }))
                }
            }
        }
        let (new_params, train_rows): (Vec<AgentParams>, Vec<RoundLog>) = trained.into_iter().unzip();

        let synced = match mode {
            Mode::Federated => {
                let avg = fed_avg(&new_params, &weights).map_err(|error| {
                    Box::new(TrainingAborted {
                        round,
                        client_id: 0,
                        error,
                        rollback: states.iter().map(|c| c.params.clone()).collect(),
                        logs: logs.clone(),
                    })
                })?;
                checkpoints.push(avg.clone());
                vec![avg; states.len()]
            }
            Mode::Isolated => new_params,
        };
        for (c, p) in states.iter_mut().zip(synced) {
            c.params = p;
            c.episodes_completed += fed.sync_interval;
        }

        let validation = par::map(exec, &states, |c| validation_row(&c.params, setup, round, c.client_id));
        for (c, (train_row, val)) in states.iter().zip(train_rows.into_iter().zip(validation)) {
            logs.push(RoundLog { round, ..train_row });
            match val {
                Ok(Some(row)) => logs.push(row),
                Ok(None) => {}
                Err(error) => {
                    return Err(Box::new(TrainingAborted {
                        round,
                        client_id: c.client_id,
                        error,
                        rollback: states.iter().map(|c| c.params.clone()).collect(),
                        logs,
                    }))
                }
            }
        }
    }

    let final_params = match mode {
        Mode::Federated => checkpoints.last().cloned().unwrap_or_else(|| initial.clone()),
        Mode::Isolated => {
            let all: Vec<AgentParams> = states.iter().map(|c| c.params.clone()).collect();
            fed_avg(&all, &vec![1.0; all.len()]).map_err(fail)?
        }
    };
    Ok(TrainingOutcome { initial, final_params, clients: states, logs, checkpoints })
}

/// Local training with FedAvg at every barrier.
pub fn run_federated_training(
    clients: &[HouseholdScenario],
    setup: &TrainingSetup,
    fed: &FederationConfig,
    master_seed: u64,
    exec: Exec,
) -> TrainingResult {
    train_loop(clients, setup, fed, master_seed, exec, Mode::Federated)
}

/// The same loop with averaging skipped: each client keeps its own agent.
pub fn run_isolated_training(
    clients: &[HouseholdScenario],
    setup: &TrainingSetup,
    fed: &FederationConfig,
    master_seed: u64,
    exec: Exec,
) -> TrainingResult {
    train_loop(clients, setup, fed, master_seed, exec, Mode::Isolated)
}
