//! Episode scores, base-vs-controlled deltas and their aggregation.
//!
//! Scores are per-step means over the episode: `price_score = mean(price_t * g_t)`
//! and `emission_score = mean(carbon_t * g_t)`, lower is better. A delta is
//! `base - treated`, so a positive value means the controlled household did
//! better than the same household without a battery on the same realized
//! day.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::datagen::DayData;
use crate::env::{HouseholdScenario, RewardWeights};
use crate::error::{Error, Result};

/// One environment step as recorded in an episode trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub t: usize,
    pub action: f64,
    pub realized_action: f64,
    /// State of charge after the step.
    pub soc: f64,
    pub grid_exchange: f64,
    pub price: f64,
    pub carbon: f64,
    pub cost: f64,
    pub emissions: f64,
    pub reward: f64,
    pub stored: f64,
    pub delivered: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scores {
    pub price_score: f64,
    pub emission_score: f64,
    /// Per-step mean reward, `-(w_p * price_score + w_e * emission_score)`.
    pub reward: f64,
}

impl Scores {
    /// Weighted per-step cost; the quantity the oracle minimizes.
    pub fn objective(&self) -> f64 {
        -self.reward
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeReport {
    pub household_id: u32,
    pub microgrid_id: u32,
    pub day_fingerprint: u64,
    /// Sum of step rewards.
    pub total_reward: f64,
    pub price_score: f64,
    pub emission_score: f64,
    pub steps: Vec<StepRecord>,
}

impl EpisodeReport {
    pub fn horizon(&self) -> usize {
        self.steps.len()
    }

    pub fn total_cost(&self) -> f64 {
        self.steps.iter().map(|s| s.cost).sum()
    }

    pub fn total_emissions(&self) -> f64 {
        self.steps.iter().map(|s| s.emissions).sum()
    }

    /// Weighted episode cost, `-total_reward`.
    pub fn objective(&self) -> f64 {
        -self.total_reward
    }

    pub fn imported_energy(&self) -> f64 {
        self.steps.iter().map(|s| s.grid_exchange.max(0.0)).sum()
    }

    pub fn summary(&self, weights: &RewardWeights) -> ScoreSummary {
        ScoreSummary {
            household_id: self.household_id,
            microgrid_id: self.microgrid_id,
            day_fingerprint: self.day_fingerprint,
            price_score: self.price_score,
            emission_score: self.emission_score,
            reward: -(weights.price * self.price_score + weights.emission * self.emission_score),
        }
    }
}

pub(crate) fn build_report(
    scenario: &HouseholdScenario,
    day: &DayData,
    steps: Vec<StepRecord>,
    weights: &RewardWeights,
) -> Result<EpisodeReport> {
    let scores = score_episode(&steps, day.len(), weights)?;
    Ok(EpisodeReport {
        household_id: scenario.household_id,
        microgrid_id: scenario.microgrid_id,
        day_fingerprint: day.fingerprint(),
        total_reward: steps.iter().map(|s| s.reward).sum(),
        price_score: scores.price_score,
        emission_score: scores.emission_score,
        steps,
    })
}

pub fn score_episode(trace: &[StepRecord], horizon: usize, weights: &RewardWeights) -> Result<Scores> {
    if horizon == 0 || trace.len() != horizon {
        return Err(Error::InvalidArgument(format!("incomplete trace: {} of {horizon} steps", trace.len())));
    }
    let n = horizon as f64;
    let price_score = trace.iter().map(|s| s.price * s.grid_exchange).sum::<f64>() / n;
    let emission_score = trace.iter().map(|s| s.carbon * s.grid_exchange).sum::<f64>() / n;
    if !price_score.is_finite() || !emission_score.is_finite() {
        return Err(Error::NonFinite("episode scores"));
    }
    Ok(Scores {
        price_score,
        emission_score,
        reward: -(weights.price * n * price_score + weights.emission * n * emission_score) / n,
    })
}

/// Per-episode scores without the trace, the unit persisted by the pipeline
/// and consumed by the comparison table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreSummary {
    pub household_id: u32,
    pub microgrid_id: u32,
    pub day_fingerprint: u64,
    pub price_score: f64,
    pub emission_score: f64,
    pub reward: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    Household,
    Microgrid,
    Distributor,
}

impl Level {
    pub fn name(self) -> &'static str {
        match self {
            Level::Household => "household",
            Level::Microgrid => "microgrid",
            Level::Distributor => "distributor",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaReport {
    pub level: Level,
    /// Household id, microgrid id, or 0 at distributor level.
    pub id: u32,
    pub microgrid_id: u32,
    pub p_delta: f64,
    pub c_delta: f64,
    /// Aggregation weight (1 per household-day unless energy weighted).
    pub weight: f64,
}

/// `base - treated` for one household on one realized day.
pub fn delta(base: &ScoreSummary, treated: &ScoreSummary) -> Result<DeltaReport> {
    if base.household_id != treated.household_id || base.day_fingerprint != treated.day_fingerprint {
        return Err(Error::InvalidArgument(format!(
            "delta needs the same household and day (household {} vs {}, day {:016x} vs {:016x})",
            base.household_id, treated.household_id, base.day_fingerprint, treated.day_fingerprint
        )));
    }
    Ok(DeltaReport {
        level: Level::Household,
        id: base.household_id,
        microgrid_id: base.microgrid_id,
        p_delta: base.price_score - treated.price_score,
        c_delta: base.emission_score - treated.emission_score,
        weight: 1.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    /// Every household-day counts once.
    #[default]
    Equal,
    /// Use each delta's `weight` field (e.g. imported energy of the base run).
    Energy,
}

/// Weighted mean of `deltas` grouped at `level`. Groups come out sorted by
/// id.
pub fn aggregate(deltas: &[DeltaReport], level: Level, weighting: Weighting) -> Result<Vec<DeltaReport>> {
    if deltas.is_empty() {
        return Err(Error::InvalidArgument("cannot aggregate an empty delta set".into()));
    }
    let mut groups: BTreeMap<(u32, u32), (f64, f64, f64)> = BTreeMap::new();
    for d in deltas {
        let w = match weighting {
            Weighting::Equal => 1.0,
            Weighting::Energy => d.weight,
        };
        if !(w >= 0.0 && w.is_finite()) {
            return Err(Error::InvalidArgument(format!("bad aggregation weight {w}")));
        }
        let key = match level {
            Level::Household => (d.microgrid_id, d.id),
            Level::Microgrid => (d.microgrid_id, d.microgrid_id),
            Level::Distributor => (0, 0),
        };
        let e = groups.entry(key).or_insert((0.0, 0.0, 0.0));
        e.0 += w * d.p_delta;
        e.1 += w * d.c_delta;
        e.2 += w;
    }
    groups
        .into_iter()
        .map(|((mg, id), (p, c, w))| {
            if w <= 0.0 {
                return Err(Error::InvalidArgument(format!("group {id} has zero total weight")));
            }
            Ok(DeltaReport { level, id, microgrid_id: mg, p_delta: p / w, c_delta: c / w, weight: w })
        })
        .collect()
}

/// Household-level deltas for every base/treated pair, matched by
/// (household, day).
pub fn pair_deltas(base: &[ScoreSummary], treated: &[ScoreSummary]) -> Result<Vec<DeltaReport>> {
    let index: BTreeMap<(u32, u64), &ScoreSummary> =
        base.iter().map(|s| ((s.household_id, s.day_fingerprint), s)).collect();
    if index.len() != treated.len() {
        return Err(Error::InvalidArgument(format!(
            "base has {} episodes, treated has {}",
            index.len(),
            treated.len()
        )));
    }
    treated
        .iter()
        .map(|t| {
            let b = index
                .get(&(t.household_id, t.day_fingerprint))
                .ok_or_else(|| Error::InvalidArgument(format!("no base episode for household {}", t.household_id)))?;
            delta(b, t)
        })
        .collect()
}

/// Scores of one arm split into training and test households.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ArmScores {
    pub train: Vec<ScoreSummary>,
    pub test: Vec<ScoreSummary>,
}

pub const ARM_NAMES: [&str; 3] = ["Oracle (LP)", "A2C isolated", "A2C federated"];

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonTable {
    pub rows: Vec<(String, [f64; 3])>,
}

fn mean_of(rows: &[ScoreSummary], f: impl Fn(&ScoreSummary) -> f64) -> f64 {
    rows.iter().map(f).sum::<f64>() / rows.len() as f64
}

fn pairing(rows: &[ScoreSummary]) -> Vec<(u32, u64)> {
    let mut keys: Vec<_> = rows.iter().map(|s| (s.household_id, s.day_fingerprint)).collect();
    keys.sort_unstable();
    keys
}

/// Averages each arm over households in the row order train reward, train
/// price score, train emission score, test price score, test emission
/// score. Test rows are omitted when there are no test episodes.
pub fn comparison_table(oracle: &ArmScores, isolated: &ArmScores, federated: &ArmScores) -> Result<ComparisonTable> {
    let arms = [oracle, isolated, federated];
    for arm in &arms[1..] {
        if pairing(&arm.train) != pairing(&oracle.train) || pairing(&arm.test) != pairing(&oracle.test) {
            return Err(Error::InvalidArgument("arms must cover identical (household, day) pairs".into()));
        }
    }
    if oracle.train.is_empty() {
        return Err(Error::InvalidArgument("comparison needs training episodes".into()));
    }
    let col = |f: &dyn Fn(&ArmScores) -> f64| [f(arms[0]), f(arms[1]), f(arms[2])];
    let mut rows = vec![
        ("Train reward".to_string(), col(&|a| mean_of(&a.train, |s| s.reward))),
        ("Train price score".to_string(), col(&|a| mean_of(&a.train, |s| s.price_score))),
        ("Train emission score".to_string(), col(&|a| mean_of(&a.train, |s| s.emission_score))),
    ];
    if !oracle.test.is_empty() {
        rows.push(("Test price score".to_string(), col(&|a| mean_of(&a.test, |s| s.price_score))));
        rows.push(("Test emission score".to_string(), col(&|a| mean_of(&a.test, |s| s.emission_score))));
    }
    Ok(ComparisonTable { rows })
}

impl ComparisonTable {
    pub fn get(&self, label: &str) -> Option<[f64; 3]> {
        self.rows.iter().find(|(l, _)| l == label).map(|(_, v)| *v)
    }

    /// True when the oracle column has the highest train reward, i.e. the
    /// lowest weighted objective.
    pub fn oracle_best_on_train(&self, tol: f64) -> bool {
        self.get("Train reward").map(|r| r[0] + tol >= r[1] && r[0] + tol >= r[2]).unwrap_or(false)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("row,oracle,isolated,federated\n");
        for (label, v) in &self.rows {
            let _ = writeln!(out, "{label},{:.6},{:.6},{:.6}", v[0], v[1], v[2]);
        }
        out
    }

    pub fn to_text(&self) -> String {
        let label_w = self.rows.iter().map(|(l, _)| l.len()).max().unwrap_or(0).max(4);
        let col_w = ARM_NAMES.iter().map(|n| n.len()).max().unwrap_or(0) + 2;
        let mut out = format!("{:label_w$}", "");
        for name in ARM_NAMES {
            let _ = write!(out, "{name:>col_w$}");
        }
        out.push('\n');
        out.push_str(&"-".repeat(label_w + 3 * col_w));
        out.push('\n');
        for (label, v) in &self.rows {
            let _ = write!(out, "{label:label_w$}");
            for x in v {
                let _ = write!(out, "{x:>col_w$.4}");
            }
            out.push('\n');
        }
        out
    }
}
