//! Run configuration.
//!
//! A single TOML document. Every section is optional and falls back to the
//! desk-scale experiment built by [`RunConfig::default`]: 22 households
//! (6 train, 6 validation, 10 test) spread over three microgrids, 25 rounds of
//! 20 local episodes each.
//!
//! ```toml
//! seed = 7
//! eval_days = 5
//!
//! [federation]
//! sync_interval = 20
//! rounds = 25
//!
//! [splits]
//! train = [0, 1, 2, 3, 4, 5]
//! validation = [6, 7, 8, 9, 10, 11]
//! test = [12, 13, 14, 15, 16, 17, 18, 19, 20, 21]
//!
//! [[households]]
//! household_id = 0
//! microgrid_id = 0
//! pv = { peak = 0.5 }
//! load = { profile = "family", peak = 0.7 }
//! ```

use std::collections::BTreeSet;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use microgrid_fl::agent::{NetLayout, TrainConfig};
use microgrid_fl::datagen::{GridConfig, LoadConfig, LoadProfile, PvConfig};
use microgrid_fl::env::{BatteryConfig, HouseholdScenario, RewardWeights};
use microgrid_fl::federation::FederationConfig;
use microgrid_fl::metrics::Weighting;
use microgrid_fl::STEPS_PER_DAY;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Splits {
    pub train: Vec<u32>,
    pub validation: Vec<u32>,
    pub test: Vec<u32>,
}

impl Default for Splits {
    fn default() -> Self {
        Self { train: (0..6).collect(), validation: (6..12).collect(), test: (12..22).collect() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Steps per episode; a multiple of 24 for multi-day episodes.
    pub horizon: usize,
    /// Days per household used for validation, evaluation and the oracle.
    pub eval_days: usize,
    pub grid: GridConfig,
    pub reward: RewardWeights,
    pub network: NetLayout,
    pub train: TrainConfig,
    pub federation: FederationConfig,
    pub weighting: Weighting,
    pub splits: Splits,
    pub households: Vec<HouseholdScenario>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            horizon: STEPS_PER_DAY,
            eval_days: 5,
            grid: GridConfig::default(),
            reward: RewardWeights::default(),
            network: NetLayout::default(),
            train: desk_train_config(),
            federation: FederationConfig { sync_interval: 20, rounds: 25, client_weights: None },
            weighting: Weighting::Equal,
            splits: Splits::default(),
            households: default_fleet(22),
        }
    }
}

/// Learning rates large enough for plain SGD to make progress within a few
/// hundred episodes per client.
pub fn desk_train_config() -> TrainConfig {
    TrainConfig { actor_lr: 3e-2, critic_lr: 3e-2, ..TrainConfig::default() }
}

/// Households `0..n`: load profiles cycle family / teenagers / home
/// business, PV and load peaks vary, microgrid is `id % 3`.
pub fn default_fleet(n: u32) -> Vec<HouseholdScenario> {
    (0..n)
        .map(|i| HouseholdScenario {
            household_id: i,
            microgrid_id: i % 3,
            pv: PvConfig { peak: 0.4 + 0.1 * f64::from(i % 3), ..PvConfig::default() },
            load: LoadConfig {
                profile: LoadProfile::ALL[(i % 3) as usize],
                peak: 0.6 + 0.05 * f64::from(i % 7),
                ..LoadConfig::default()
            },
            battery: BatteryConfig::default(),
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Role {
    Train,
    Validation,
    Test,
}

impl Role {
    pub fn name(self) -> &'static str {
        match self {
            Role::Train => "train",
            Role::Validation => "validation",
            Role::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Option<Role> {
        match s {
            "train" => Some(Role::Train),
            "validation" => Some(Role::Validation),
            "test" => Some(Role::Test),
            _ => None,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let cfg: RunConfig = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            bail!("horizon must be >= 1");
        }
        self.grid.validate()?;
        self.reward.validate()?;
        self.network.validate()?;
        self.train.validate()?;
        self.federation.validate(self.splits.train.len())?;
        if self.splits.train.is_empty() {
            bail!("at least one training household is required");
        }
        let mut ids = BTreeSet::new();
        for h in &self.households {
            h.validate().with_context(|| format!("household {}", h.household_id))?;
            if !ids.insert(h.household_id) {
                bail!("duplicate household id {}", h.household_id);
            }
        }
        let mut seen = BTreeSet::new();
        for id in self.splits.train.iter().chain(&self.splits.validation).chain(&self.splits.test) {
            if !seen.insert(*id) {
                bail!("household {id} appears in more than one split");
            }
            if !ids.contains(id) {
                bail!("split references unknown household {id}");
            }
        }
        Ok(())
    }

    fn pick(&self, ids: &[u32]) -> Vec<HouseholdScenario> {
        ids.iter().filter_map(|id| self.households.iter().find(|h| h.household_id == *id).cloned()).collect()
    }

    pub fn households_in(&self, role: Role) -> Vec<HouseholdScenario> {
        match role {
            Role::Train => self.pick(&self.splits.train),
            Role::Validation => self.pick(&self.splits.validation),
            Role::Test => self.pick(&self.splits.test),
        }
    }

    /// Every household with a split, in split order.
    pub fn assigned(&self) -> Vec<(Role, HouseholdScenario)> {
        [Role::Train, Role::Validation, Role::Test]
            .into_iter()
            .flat_map(|r| self.households_in(r).into_iter().map(move |h| (r, h)))
            .collect()
    }
}
