//! Perfect-foresight battery dispatch.
//!
//! With symmetric import/export pricing the day's weighted cost is linear in
//! the dispatch:
//!
//! ```text
//! min  sum_t k_t (load_t - pv_t + c_t - d_t),   k_t = w_p price_t + w_e carbon_t
//! s.t. soc_{t+1} = soc_t + eta_c c_t - d_t / eta_d,  0 <= soc_t <= capacity,
//!      0 <= c_t <= max_power,  0 <= d_t <= max_power * eta_d
//! ```
//!
//! [`solve_lp`] solves it exactly with the bundled simplex; [`solve_dp`] is
//! an independent grid search used to cross-check it. [`replay`] pushes a
//! dispatch back through the environment to confirm both share the same
//! accounting.

mod dp;
pub mod simplex;

use std::fmt::Write as _;

use crate::datagen::DayData;
use crate::env::{self, ActionPlan, BatteryConfig, HouseholdScenario, RewardWeights};
use crate::error::{Error, Result};
use crate::metrics::EpisodeReport;

pub use dp::solve_dp;
use simplex::LinearProgram;

/// Feasibility / replay tolerance.
pub const TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct DispatchProblem {
    pub day: DayData,
    pub battery: BatteryConfig,
    pub weights: RewardWeights,
}

impl DispatchProblem {
    pub fn new(day: DayData, battery: BatteryConfig, weights: RewardWeights) -> Result<Self> {
        day.validate()?;
        battery.validate()?;
        weights.validate()?;
        Ok(Self { day, battery, weights })
    }

    pub fn horizon(&self) -> usize {
        self.day.len()
    }

    pub fn unit_cost(&self, t: usize) -> f64 {
        self.weights.unit_cost(&self.day, t)
    }

    /// Weighted cost of a dispatch, including the uncontrollable net load.
    pub fn objective_of(&self, charge: &[f64], discharge: &[f64]) -> f64 {
        (0..self.horizon()).map(|t| self.unit_cost(t) * self.grid_exchange(t, charge[t], discharge[t])).sum()
    }

    pub fn grid_exchange(&self, t: usize, charge: f64, discharge: f64) -> f64 {
        self.day.load[t] - self.day.pv[t] + charge - discharge
    }

    /// Objective with the battery idle all day.
    pub fn idle_objective(&self) -> f64 {
        let zeros = vec![0.0; self.horizon()];
        self.objective_of(&zeros, &zeros)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DispatchSolution {
    /// Grid-side energy drawn into the battery.
    pub charge: Vec<f64>,
    /// Household-side energy delivered by the battery.
    pub discharge: Vec<f64>,
    /// `T + 1` states of charge, starting with the initial one.
    pub soc: Vec<f64>,
    pub objective: f64,
    /// Environment actions in `[-1, 1]` that reproduce the dispatch.
    pub equivalent_actions: Vec<f64>,
}

impl DispatchSolution {
    /// Builds a solution from raw charge/discharge series: removes any
    /// same-step charge+discharge pair (replacing it with the net energy
    /// move, which never costs more when unit costs are non-negative),
    /// recomputes the state of charge and the objective.
    pub(crate) fn from_dispatch(problem: &DispatchProblem, charge: &[f64], discharge: &[f64]) -> Result<Self> {
        let bat = &problem.battery;
        let (eta_c, eta_d) = (bat.charge_efficiency, bat.discharge_efficiency);
        let n = problem.horizon();
        let mut c = Vec::with_capacity(n);
        let mut d = Vec::with_capacity(n);
        let mut soc = Vec::with_capacity(n + 1);
        soc.push(bat.initial_energy());
        for t in 0..n {
            let (mut ct, mut dt) = (charge[t].max(0.0), discharge[t].max(0.0));
            if ct > 0.0 && dt > 0.0 {
                let net = eta_c * ct - dt / eta_d;
                if net >= 0.0 {
                    (ct, dt) = (net / eta_c, 0.0);
                } else {
                    (ct, dt) = (0.0, -net * eta_d);
                }
            }
            let next = soc[t] + eta_c * ct - dt / eta_d;
            if next < -TOL || next > bat.capacity + TOL {
                return Err(Error::Solver(format!("state of charge {next} infeasible at step {t}")));
            }
            c.push(ct);
            d.push(dt);
            soc.push(next.clamp(0.0, bat.capacity));
        }
        let equivalent_actions = c
            .iter()
            .zip(&d)
            .map(|(&ct, &dt)| {
                let a = if ct > 0.0 { ct / bat.max_power } else { -dt / (eta_d * bat.max_power) };
                a.clamp(-1.0, 1.0)
            })
            .collect();
        Ok(Self { objective: problem.objective_of(&c, &d), charge: c, discharge: d, soc, equivalent_actions })
    }

    pub fn to_csv(&self, problem: &DispatchProblem) -> String {
        let mut out = String::from(SOLUTION_CSV_HEADER);
        out.push('\n');
        for t in 0..self.charge.len() {
            let g = problem.grid_exchange(t, self.charge[t], self.discharge[t]);
            let _ = writeln!(
                out,
                "{t},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
                self.charge[t],
                self.discharge[t],
                self.soc[t + 1],
                self.equivalent_actions[t],
                problem.day.price[t],
                problem.day.carbon[t],
                problem.unit_cost(t) * g
            );
        }
        out
    }
}

pub const SOLUTION_CSV_HEADER: &str = "t,charge,discharge,soc,action,price,carbon,step_cost";

/// Linear program over `x = [c_0..c_T, d_0..d_T]`, with the state of charge
/// eliminated into cumulative-sum rows.
fn build_lp(problem: &DispatchProblem) -> LinearProgram {
    let n = problem.horizon();
    let bat = &problem.battery;
    let (eta_c, eta_d) = (bat.charge_efficiency, bat.discharge_efficiency);
    let soc0 = bat.initial_energy();

    let mut objective = vec![0.0; 2 * n];
    for t in 0..n {
        let k = problem.unit_cost(t);
        objective[t] = k;
        objective[n + t] = -k;
    }

    let mut rows = Vec::with_capacity(4 * n);
    let mut rhs = Vec::with_capacity(4 * n);
    for t in 1..=n {
        let mut upper = vec![0.0; 2 * n];
        for k in 0..t {
            upper[k] = eta_c;
            upper[n + k] = -1.0 / eta_d;
        }
        let lower: Vec<f64> = upper.iter().map(|v| -v).collect();
        rows.push(upper);
        rhs.push((bat.capacity - soc0).max(0.0));
        rows.push(lower);
        rhs.push(soc0);
    }
    for t in 0..n {
        let mut row = vec![0.0; 2 * n];
        row[t] = 1.0;
        rows.push(row);
        rhs.push(bat.max_power);
        let mut row = vec![0.0; 2 * n];
        row[n + t] = 1.0;
        rows.push(row);
        rhs.push(bat.max_power * eta_d);
    }
    LinearProgram { objective, rows, rhs }
}

pub fn solve_lp(problem: &DispatchProblem) -> Result<DispatchSolution> {
    let n = problem.horizon();
    let opt = simplex::minimize(&build_lp(problem))?;
    let (charge, discharge) = opt.x.split_at(n);
    DispatchSolution::from_dispatch(problem, charge, discharge)
}

/// Runs the dispatch through the environment and checks that every step's
/// grid exchange matches the dispatch accounting within [`TOL`].
pub fn replay(
    solution: &DispatchSolution,
    scenario: &HouseholdScenario,
    day: &DayData,
    weights: &RewardWeights,
) -> Result<EpisodeReport> {
    if solution.equivalent_actions.len() != day.len() {
        return Err(Error::InvalidArgument(format!(
            "solution has {} steps, day has {}",
            solution.equivalent_actions.len(),
            day.len()
        )));
    }
    let report = env::run_episode(scenario, day, &mut ActionPlan(&solution.equivalent_actions), weights)?;
    for (t, step) in report.steps.iter().enumerate() {
        let dispatch = day.load[t] - day.pv[t] + solution.charge[t] - solution.discharge[t];
        if (step.grid_exchange - dispatch).abs() > TOL {
            return Err(Error::ReplayMismatch { t, env: step.grid_exchange, dispatch });
        }
    }
    Ok(report)
}
