//! Exhaustive grid enumeration, used as an independent oracle on tiny instances.

use crate::error::{Error, Result};
use crate::model::Instance;

/// Largest number of grid points `oracle_grid` will enumerate.
pub const GRID_BUDGET: f64 = 1e7;

/// Best feasible objective with every `v_{i,t}` on `{0, h, 2h, ...} ∪ {delta}`.
pub fn oracle_grid(inst: &Instance, grid_step: f64) -> Result<f64> {
    if !(grid_step > 0.0 && grid_step.is_finite()) {
        return Err(Error::domain("grid_step", grid_step, 0.0, f64::INFINITY));
    }
    let n = inst.inventories();
    let t_len = inst.horizon();
    // Candidate values and their revenues per cell, in (t, i) order.
    let mut cells: Vec<Vec<(f64, f64)>> = Vec::with_capacity(n * t_len);
    let mut points = 1.0_f64;
    for t in 0..t_len {
        for i in 0..n {
            let g = inst.revenue(i, t);
            let d = g.delta();
            let mut vals = Vec::new();
            let mut k = 0usize;
            loop {
                let x = k as f64 * grid_step;
                if x >= d {
                    break;
                }
                vals.push((x, g.value(x)));
                k += 1;
            }
            vals.push((d, g.value(d)));
            points *= vals.len() as f64;
            if points > GRID_BUDGET {
                return Err(Error::BudgetExceeded {
                    points,
                    budget: GRID_BUDGET,
                });
            }
            cells.push(vals);
        }
    }
    let mut search = Search {
        n,
        cells: &cells,
        cap_left: inst.capacities().to_vec(),
        allow_left: inst.allowances().to_vec(),
        best: 0.0,
        slack: 1e-12,
    };
    search.dfs(0, 0.0);
    Ok(search.best)
}

struct Search<'a> {
    n: usize,
    cells: &'a [Vec<(f64, f64)>],
    cap_left: Vec<f64>,
    allow_left: Vec<f64>,
    best: f64,
    slack: f64,
}

impl Search<'_> {
    fn dfs(&mut self, k: usize, acc: f64) {
        if k == self.cells.len() {
            self.best = self.best.max(acc);
            return;
        }
        let (t, i) = (k / self.n, k % self.n);
        for &(x, gx) in &self.cells[k] {
            if x > self.cap_left[i] + self.slack || x > self.allow_left[t] + self.slack {
                break;
            }
            self.cap_left[i] -= x;
            self.allow_left[t] -= x;
            self.dfs(k + 1, acc + gx);
            self.cap_left[i] += x;
            self.allow_left[t] += x;
        }
    }
}
