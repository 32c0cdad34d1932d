//! Dense tableau simplex for `min c'x  s.t.  Ax <= b, x >= 0` with `b >= 0`.
//!
//! The slack basis is feasible at the origin, so a single phase suffices.
//! Entering variables follow Dantzig's rule; after a run of degenerate
//! pivots the solver switches to Bland's rule, which cannot cycle.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
    pub rhs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpOptimum {
    pub x: Vec<f64>,
    pub objective: f64,
    pub pivots: usize,
}

const PIVOT_TOL: f64 = 1e-12;
const MAX_PIVOTS: usize = 100_000;
const DEGENERATE_RUN: usize = 50;

pub fn minimize(lp: &LinearProgram) -> Result<LpOptimum> {
    let n = lp.objective.len();
    let m = lp.rows.len();
    if lp.rhs.len() != m || lp.rows.iter().any(|r| r.len() != n) {
        return Err(Error::Solver("inconsistent LP dimensions".into()));
    }
    if lp.rhs.iter().any(|&b| b.is_nan() || b < 0.0) {
        return Err(Error::Solver("right-hand side must be non-negative".into()));
    }
    let width = n + m + 1;
    // Rows 0..m are constraints, row m holds reduced costs; last column is the rhs.
    let mut tab = vec![0.0; (m + 1) * width];
    for (i, row) in lp.rows.iter().enumerate() {
        tab[i * width..i * width + n].copy_from_slice(row);
        tab[i * width + n + i] = 1.0;
        tab[i * width + width - 1] = lp.rhs[i];
    }
    tab[m * width..m * width + n].copy_from_slice(&lp.objective);
    let mut basis: Vec<usize> = (n..n + m).collect();

    let mut pivots = 0;
    let mut degenerate = 0;
    loop {
        let cost = &tab[m * width..m * width + n + m];
        let entering = if degenerate < DEGENERATE_RUN {
            cost.iter().enumerate().filter(|(_, &r)| r < -PIVOT_TOL).min_by(|a, b| a.1.total_cmp(b.1)).map(|(j, _)| j)
        } else {
            cost.iter().position(|&r| r < -PIVOT_TOL)
        };
        let Some(e) = entering else { break };

        let mut leave: Option<(usize, f64)> = None;
        for i in 0..m {
            let a = tab[i * width + e];
            if a > PIVOT_TOL {
                let ratio = tab[i * width + width - 1] / a;
                let better = match leave {
                    None => true,
                    Some((r, best)) => ratio < best - 1e-15 || (ratio <= best + 1e-15 && basis[i] < basis[r]),
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
        }
        let Some((r, ratio)) = leave else {
            return Err(Error::Solver("LP is unbounded".into()));
        };
        degenerate = if ratio <= 1e-15 { degenerate + 1 } else { 0 };

        let pivot = tab[r * width + e];
        for v in &mut tab[r * width..(r + 1) * width] {
            *v /= pivot;
        }
        let pivot_row: Vec<f64> = tab[r * width..(r + 1) * width].to_vec();
        for i in 0..=m {
            if i == r {
                continue;
            }
            let f = tab[i * width + e];
            if f != 0.0 {
                for (v, p) in tab[i * width..(i + 1) * width].iter_mut().zip(&pivot_row) {
                    *v -= f * p;
                }
                tab[i * width + e] = 0.0;
            }
        }
        basis[r] = e;
        pivots += 1;
        if pivots > MAX_PIVOTS {
            return Err(Error::Solver("simplex pivot limit reached".into()));
        }
    }

    let mut x = vec![0.0; n];
    for (i, &b) in basis.iter().enumerate() {
        if b < n {
            x[b] = tab[i * width + width - 1].max(0.0);
        }
    }
    let objective = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
    Ok(LpOptimum { x, objective, pivots })
}
