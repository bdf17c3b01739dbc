//! Exact offline optima used as competitive-ratio denominators.

mod grid;
mod multi;
mod single;

pub use grid::{oracle_grid, GRID_BUDGET};
pub use multi::{
    solve_multi, solve_multi_with, solve_subgradient, DualMethod, SubgradientOptions,
    SubgradientRun,
};
pub use single::{solve_capped, solve_g, solve_single, SingleSolution};

use serde::{Deserialize, Serialize};

use crate::model::Instance;

/// Duality-gap tolerance `1e-6 (1 + |OPT|)`.
pub fn tol_gap(objective: f64) -> f64 {
    1e-6 * (1.0 + objective.abs())
}

/// Multi-inventory optimum over a prefix of the horizon.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OfflineSolution {
    /// Primal objective of `v`.
    pub objective: f64,
    /// Feasible primal allocation `v[t][i]`.
    pub v: Vec<Vec<f64>>,
    /// Capacity multipliers.
    pub alpha: Vec<f64>,
    /// Allowance multipliers.
    pub beta: Vec<f64>,
    pub dual_value: f64,
    /// `dual_value - objective`, an upper bound on the suboptimality of `v`.
    pub gap: f64,
    pub iterations: usize,
}

/// Dual function `sum h_{i,t}(alpha_i + beta_t) + sum C alpha + sum A beta`
/// over slots `0..upto`; an upper bound on `OPT_upto` for any `alpha, beta >= 0`.
pub fn dual_objective(inst: &Instance, upto: usize, alpha: &[f64], beta: &[f64]) -> f64 {
    let mut acc = 0.0;
    for t in 0..upto {
        for (i, g) in inst.slot(t).iter().enumerate() {
            acc += g.conjugate(alpha[i] + beta[t]);
        }
        acc += inst.allowances()[t] * beta[t];
    }
    acc + inst
        .capacities()
        .iter()
        .zip(alpha)
        .map(|(c, a)| c * a)
        .sum::<f64>()
}
