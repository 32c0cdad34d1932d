//! Backward dynamic programming over a discretized state of charge.
//!
//! Levels are `k * capacity / (points - 1)`, plus the initial state of charge
//! when it is off-grid. From each level every level reachable within the
//! power limits is a candidate transition, costed with the exact continuous
//! energy it needs. The search is a restriction of the LP's feasible set, so
//! its objective can only be higher, and it tightens as the grid refines.

use super::{DispatchProblem, DispatchSolution};
use crate::error::{Error, Result};

struct Transition {
    to: usize,
    charge: f64,
    discharge: f64,
}

pub fn solve_dp(problem: &DispatchProblem, soc_grid_points: usize) -> Result<DispatchSolution> {
    if soc_grid_points < 2 {
        return Err(Error::InvalidArgument("need at least 2 grid points".into()));
    }
    let bat = &problem.battery;
    let (eta_c, eta_d) = (bat.charge_efficiency, bat.discharge_efficiency);
    let soc0 = bat.initial_energy();

    let step = bat.capacity / (soc_grid_points - 1) as f64;
    let mut levels: Vec<f64> = (0..soc_grid_points).map(|k| k as f64 * step).collect();
    *levels.last_mut().unwrap() = bat.capacity;
    let start = match levels.iter().position(|&s| (s - soc0).abs() <= 1e-12) {
        Some(i) => {
            levels[i] = soc0;
            i
        }
        None => {
            let i = levels.partition_point(|&s| s < soc0);
            levels.insert(i, soc0);
            i
        }
    };

    let slack = 1.0 + 1e-12;
    let transitions: Vec<Vec<Transition>> = levels
        .iter()
        .map(|&from| {
            levels
                .iter()
                .enumerate()
                .filter_map(|(to, &s)| {
                    let delta = s - from;
                    if delta >= 0.0 {
                        let charge = delta / eta_c;
                        (charge <= bat.max_power * slack).then_some(Transition { to, charge, discharge: 0.0 })
                    } else {
                        (-delta <= bat.max_power * slack).then_some(Transition {
                            to,
                            charge: 0.0,
                            discharge: -delta * eta_d,
                        })
                    }
                })
                .collect()
        })
        .collect();

    let n = problem.horizon();
    let l = levels.len();
    // value[i] is the optimal cost-to-go from level i; only the battery part
    // of the cost is tracked, the net load term is constant.
    let mut value = vec![0.0; l];
    let mut choice = vec![vec![0usize; l]; n];
    for t in (0..n).rev() {
        let k = problem.unit_cost(t);
        let mut next = vec![f64::INFINITY; l];
        for (i, options) in transitions.iter().enumerate() {
            for (j, tr) in options.iter().enumerate() {
                let v = k * (tr.charge - tr.discharge) + value[tr.to];
                if v < next[i] {
                    next[i] = v;
                    choice[t][i] = j;
                }
            }
        }
        value = next;
    }

    let mut charge = Vec::with_capacity(n);
    let mut discharge = Vec::with_capacity(n);
    let mut at = start;
    for row in &choice {
        let tr = &transitions[at][row[at]];
        charge.push(tr.charge);
        discharge.push(tr.discharge);
        at = tr.to;
    }
    DispatchSolution::from_dispatch(problem, &charge, &discharge)
}
