//! Episodic household battery environment.
//!
//! The battery sits behind the household meter. A step takes an action in
//! `[-1, 1]` (fraction of `max_power`; negative discharges), clips it to what
//! the battery can physically do, and settles the household's net exchange
//! with the grid. Import and export are priced symmetrically, which keeps the
//! objective linear in the dispatch.

use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::datagen::{DayData, LoadConfig, PvConfig};
use crate::error::{Error, Result};
use crate::metrics::{self, EpisodeReport, StepRecord};
use crate::STEPS_PER_DAY;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BatteryConfig {
    pub capacity: f64,
    /// Grid-side energy per step at full action.
    pub max_power: f64,
    pub charge_efficiency: f64,
    pub discharge_efficiency: f64,
    /// Fraction of capacity at `t = 0`.
    pub initial_soc: f64,
}

impl Default for BatteryConfig {
    fn default() -> Self {
        Self { capacity: 1.0, max_power: 0.25, charge_efficiency: 0.9, discharge_efficiency: 0.9, initial_soc: 0.5 }
    }
}

impl BatteryConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.capacity > 0.0
            && self.capacity.is_finite()
            && self.max_power > 0.0
            && self.max_power.is_finite()
            && self.charge_efficiency > 0.0
            && self.charge_efficiency <= 1.0
            && self.discharge_efficiency > 0.0
            && self.discharge_efficiency <= 1.0
            && (0.0..=1.0).contains(&self.initial_soc);
        if !ok {
            return Err(Error::InvalidConfig(format!("invalid battery {self:?}")));
        }
        Ok(())
    }

    pub fn initial_energy(&self) -> f64 {
        self.initial_soc * self.capacity
    }
}

/// One household: identity, generator, load and battery.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HouseholdScenario {
    pub household_id: u32,
    pub microgrid_id: u32,
    pub pv: PvConfig,
    pub load: LoadConfig,
    pub battery: BatteryConfig,
}

impl HouseholdScenario {
    pub fn validate(&self) -> Result<()> {
        self.pv.validate()?;
        self.load.validate()?;
        self.battery.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardWeights {
    pub price: f64,
    pub emission: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self { price: 1.0, emission: 1.0 }
    }
}

impl RewardWeights {
    pub fn validate(&self) -> Result<()> {
        if !(self.price >= 0.0 && self.emission >= 0.0) || self.price + self.emission <= 0.0 {
            return Err(Error::InvalidConfig(format!("reward weights must be >= 0 and not both zero, got {self:?}")));
        }
        Ok(())
    }

    /// Weighted cost of one unit of grid import at step `t`.
    pub fn unit_cost(&self, day: &DayData, t: usize) -> f64 {
        self.price * day.price[t] + self.emission * day.carbon[t]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvState {
    pub t: usize,
    /// Stored energy, in `[0, capacity]`.
    pub soc: f64,
}

pub const OBS_DIM: usize = 7;

/// `[sin(2πt/24), cos(2πt/24), soc/capacity, pv, load, price, carbon]`.
pub type Observation = [f64; OBS_DIM];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub next_state: EnvState,
    pub reward: f64,
    /// Positive means import.
    pub grid_exchange: f64,
    pub cost: f64,
    pub emissions: f64,
    pub realized_action: f64,
    /// Energy added to the battery.
    pub stored: f64,
    /// Energy delivered to the household by discharging.
    pub delivered: f64,
}

/// A household bound to one realized day.
#[derive(Debug, Clone, Copy)]
pub struct HouseholdEnv<'a> {
    pub scenario: &'a HouseholdScenario,
    pub day: &'a DayData,
}

impl<'a> HouseholdEnv<'a> {
    pub fn new(scenario: &'a HouseholdScenario, day: &'a DayData) -> Result<Self> {
        scenario.battery.validate()?;
        day.validate()?;
        Ok(Self { scenario, day })
    }

    pub fn horizon(&self) -> usize {
        self.day.len()
    }

    pub fn reset(&self) -> EnvState {
        EnvState { t: 0, soc: self.scenario.battery.initial_energy() }
    }

    pub fn observe(&self, state: &EnvState) -> Result<Observation> {
        self.check_running(state)?;
        let t = state.t;
        let angle = 2.0 * PI * (t % STEPS_PER_DAY) as f64 / STEPS_PER_DAY as f64;
        Ok([
            angle.sin(),
            angle.cos(),
            state.soc / self.scenario.battery.capacity,
            self.day.pv[t],
            self.day.load[t],
            self.day.price[t],
            self.day.carbon[t],
        ])
    }

    pub fn step(&self, state: &EnvState, action: f64, weights: &RewardWeights) -> Result<StepOutcome> {
        self.check_running(state)?;
        if !(-1.0..=1.0).contains(&action) {
            return Err(Error::ActionOutOfRange(action));
        }
        let bat = &self.scenario.battery;
        let t = state.t;
        let power = action * bat.max_power;

        let (battery_draw, stored, delivered, soc_next) = if power >= 0.0 {
            let eta = bat.charge_efficiency;
            let stored = (power * eta).min(bat.capacity - state.soc).max(0.0);
            (stored / eta, stored, 0.0, state.soc + stored)
        } else {
            let eta = bat.discharge_efficiency;
            let delivered = (-power * eta).min(state.soc * eta).max(0.0);
            (-delivered, 0.0, delivered, state.soc - delivered / eta)
        };
        // Guard against a few ulps of drift past the bounds.
        let soc_next = soc_next.clamp(0.0, bat.capacity);

        let g = self.day.load[t] - self.day.pv[t] + battery_draw;
        let cost = self.day.price[t] * g;
        let emissions = self.day.carbon[t] * g;
        Ok(StepOutcome {
            next_state: EnvState { t: t + 1, soc: soc_next },
            reward: -(weights.price * cost + weights.emission * emissions),
            grid_exchange: g,
            cost,
            emissions,
            realized_action: (battery_draw / bat.max_power).clamp(-1.0, 1.0),
            stored,
            delivered,
        })
    }

    fn check_running(&self, state: &EnvState) -> Result<()> {
        if state.t >= self.horizon() {
            return Err(Error::EpisodeFinished { t: state.t, horizon: self.horizon() });
        }
        Ok(())
    }

    /// Runs one full episode, querying `policy` once per step.
    pub fn run_episode<P: Policy + ?Sized>(&self, policy: &mut P, weights: &RewardWeights) -> Result<EpisodeReport> {
        let mut state = self.reset();
        let mut steps = Vec::with_capacity(self.horizon());
        while state.t < self.horizon() {
            let obs = self.observe(&state)?;
            let action = policy.act(&state, &obs)?;
            let out = self.step(&state, action, weights)?;
            steps.push(StepRecord {
                t: state.t,
                action,
                realized_action: out.realized_action,
                soc: out.next_state.soc,
                grid_exchange: out.grid_exchange,
                price: self.day.price[state.t],
                carbon: self.day.carbon[state.t],
                cost: out.cost,
                emissions: out.emissions,
                reward: out.reward,
                stored: out.stored,
                delivered: out.delivered,
            });
            state = out.next_state;
        }
        metrics::build_report(self.scenario, self.day, steps, weights)
    }
}

/// Anything that maps the current state to an action in `[-1, 1]`.
pub trait Policy {
    fn act(&mut self, state: &EnvState, obs: &Observation) -> Result<f64>;
}

impl<F> Policy for F
where
    F: FnMut(&EnvState, &Observation) -> f64,
{
    fn act(&mut self, state: &EnvState, obs: &Observation) -> Result<f64> {
        Ok(self(state, obs))
    }
}

/// The no-battery base case: always idle.
pub struct Idle;

impl Policy for Idle {
    fn act(&mut self, _: &EnvState, _: &Observation) -> Result<f64> {
        Ok(0.0)
    }
}

/// Replays a fixed action sequence indexed by step.
pub struct ActionPlan<'a>(pub &'a [f64]);

impl Policy for ActionPlan<'_> {
    fn act(&mut self, state: &EnvState, _: &Observation) -> Result<f64> {
        self.0
            .get(state.t)
            .copied()
            .ok_or_else(|| Error::InvalidArgument(format!("no planned action for step {}", state.t)))
    }
}

pub fn run_episode<P: Policy + ?Sized>(
    scenario: &HouseholdScenario,
    day: &DayData,
    policy: &mut P,
    weights: &RewardWeights,
) -> Result<EpisodeReport> {
    HouseholdEnv::new(scenario, day)?.run_episode(policy, weights)
}

/// Header for [`trace_csv`].
pub const TRACE_CSV_HEADER: &str = "t,action,realized_action,soc,grid_exchange,price,carbon,cost,emissions,reward";

pub fn trace_csv(report: &EpisodeReport) -> String {
    let mut out = String::new();
    out.push_str(TRACE_CSV_HEADER);
    out.push('\n');
    for s in &report.steps {
        let _ = writeln!(
            out,
            "{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
            s.t, s.action, s.realized_action, s.soc, s.grid_exchange, s.price, s.carbon, s.cost, s.emissions, s.reward
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn flat_day(n: usize, pv: f64, load: f64, price: f64, carbon: f64) -> DayData {
        DayData::new(vec![pv; n], vec![load; n], vec![price; n], vec![carbon; n]).unwrap()
    }

    fn scenario(battery: BatteryConfig) -> HouseholdScenario {
        HouseholdScenario { battery, ..Default::default() }
    }

    #[test]
    fn reset_examples() {
        let day = flat_day(24, 0.0, 0.0, 0.5, 0.5);
        let s = scenario(BatteryConfig::default());
        assert_eq!(HouseholdEnv::new(&s, &day).unwrap().reset().soc, 0.5);
        let s = scenario(BatteryConfig { initial_soc: 0.0, ..Default::default() });
        assert_eq!(HouseholdEnv::new(&s, &day).unwrap().reset().soc, 0.0);
        let s = scenario(BatteryConfig { capacity: 2.0, initial_soc: 0.25, ..Default::default() });
        assert_eq!(HouseholdEnv::new(&s, &day).unwrap().reset().soc, 0.5);
    }

    #[test]
    fn observe_examples() {
        let day = flat_day(24, 0.1, 0.2, 0.3, 0.4);
        let s = scenario(BatteryConfig::default());
        let env = HouseholdEnv::new(&s, &day).unwrap();
        let o = env.observe(&EnvState { t: 0, soc: 0.3 }).unwrap();
        assert_eq!((o[0], o[1], o[2]), (0.0, 1.0, 0.3));
        assert_eq!(&o[3..], &[0.1, 0.2, 0.3, 0.4]);
        let o = env.observe(&EnvState { t: 6, soc: 0.3 }).unwrap();
        assert_abs_diff_eq!(o[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(o[1], 0.0, epsilon = 1e-12);
        assert!(env.observe(&EnvState { t: 24, soc: 0.3 }).is_err());
    }

    #[test]
    fn step_balanced_household_idle() {
        let day = flat_day(24, 0.3, 0.3, 0.7, 0.4);
        let s = scenario(BatteryConfig::default());
        let env = HouseholdEnv::new(&s, &day).unwrap();
        let out = env.step(&env.reset(), 0.0, &RewardWeights::default()).unwrap();
        assert_eq!((out.grid_exchange, out.cost, out.reward), (0.0, 0.0, 0.0));
        assert_eq!(out.next_state.soc, 0.5);
    }

    #[test]
    fn step_full_charge() {
        let day = flat_day(24, 0.0, 0.0, 0.5, 0.5);
        let s = scenario(BatteryConfig { max_power: 0.2, ..Default::default() });
        let env = HouseholdEnv::new(&s, &day).unwrap();
        let out = env.step(&env.reset(), 1.0, &RewardWeights::default()).unwrap();
        assert_abs_diff_eq!(out.next_state.soc, 0.68, epsilon = 1e-15);
        assert_abs_diff_eq!(out.grid_exchange, 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(out.realized_action, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn step_empty_battery_discharge_is_clipped() {
        let day = flat_day(24, 0.0, 0.5, 0.5, 0.5);
        let s = scenario(BatteryConfig { initial_soc: 0.0, ..Default::default() });
        let env = HouseholdEnv::new(&s, &day).unwrap();
        let out = env.step(&env.reset(), -1.0, &RewardWeights::default()).unwrap();
        assert_eq!(out.next_state.soc, 0.0);
        assert_eq!(out.grid_exchange, 0.5);
        assert_eq!(out.realized_action, 0.0);
    }

    #[test]
    fn step_errors() {
        let day = flat_day(1, 0.0, 0.5, 0.5, 0.5);
        let s = scenario(BatteryConfig::default());
        let env = HouseholdEnv::new(&s, &day).unwrap();
        let w = RewardWeights::default();
        assert!(matches!(env.step(&env.reset(), 1.5, &w), Err(Error::ActionOutOfRange(_))));
        assert!(env.step(&env.reset(), f64::NAN, &w).is_err());
        let done = env.step(&env.reset(), 0.0, &w).unwrap().next_state;
        assert!(matches!(env.step(&done, 0.0, &w), Err(Error::EpisodeFinished { .. })));
    }

    #[test]
    fn lossless_round_trip_returns_charge() {
        let day = flat_day(24, 0.0, 0.0, 0.5, 0.5);
        let bat =
            BatteryConfig { charge_efficiency: 1.0, discharge_efficiency: 1.0, initial_soc: 0.0, ..Default::default() };
        let s = scenario(bat);
        let env = HouseholdEnv::new(&s, &day).unwrap();
        let w = RewardWeights::default();
        let a = env.step(&env.reset(), 0.6, &w).unwrap();
        let x = a.grid_exchange;
        let b = env.step(&a.next_state, -1.0, &w).unwrap();
        assert_eq!(b.delivered, x);
        assert_eq!(b.next_state.soc, 0.0);
    }

    #[test]
    fn episode_examples() {
        let w = RewardWeights::default();
        let s = scenario(BatteryConfig::default());

        let balanced = flat_day(24, 0.4, 0.4, 0.6, 0.3);
        let r = run_episode(&s, &balanced, &mut Idle, &w).unwrap();
        assert_eq!(r.total_reward, 0.0);

        let s2 = HouseholdScenario::default();
        let day = crate::datagen::generate_day(&s2, &Default::default(), 24, 3).unwrap();
        let r = run_episode(&s2, &day, &mut Idle, &w).unwrap();
        let closed: f64 = (0..24).map(|t| day.price[t] * (day.load[t] - day.pv[t])).sum();
        assert_abs_diff_eq!(r.total_cost(), closed, epsilon = 1e-12);

        let one = DayData::new(vec![0.0], vec![1.0], vec![1.0], vec![0.3]).unwrap();
        let r = run_episode(&s, &one, &mut Idle, &w).unwrap();
        assert_eq!(r.steps[0].cost, 1.0);
        assert_abs_diff_eq!(r.total_reward, -(1.0 + 0.3), epsilon = 1e-15);
    }

    #[test]
    fn trace_csv_has_header_and_rows() {
        let s = scenario(BatteryConfig::default());
        let day = flat_day(3, 0.1, 0.2, 0.3, 0.4);
        let r = run_episode(&s, &day, &mut |_: &EnvState, _: &Observation| 0.5, &RewardWeights::default()).unwrap();
        let csv = trace_csv(&r);
        assert!(csv.starts_with(TRACE_CSV_HEADER));
        assert_eq!(csv.lines().count(), 4);
    }
}
