//! Instances, allocations and the revenue-function vocabulary.

mod format;
mod revenue;

pub use format::{InstanceFile, SlotSpec};
pub use revenue::{RevenueClass, RevenueFunction, Shape};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::TOL_FEAS;

/// Number of sample points used by class validation.
pub const CLASS_SAMPLES: usize = 1000;

/// A full online input: horizon, inventories, capacities, allowances and
/// the per-slot revenue functions (`slots[t][i]`).
#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    id: String,
    class: RevenueClass,
    p_min: f64,
    p_max: f64,
    capacities: Vec<f64>,
    allowances: Vec<f64>,
    slots: Vec<Vec<RevenueFunction>>,
}

impl Instance {
    /// Validates shapes, class membership and `delta <= A_t`.
    pub fn new(
        id: impl Into<String>,
        class: RevenueClass,
        p_min: f64,
        p_max: f64,
        capacities: Vec<f64>,
        allowances: Vec<f64>,
        slots: Vec<Vec<RevenueFunction>>,
    ) -> Result<Self> {
        let bad = |m: String| Err(Error::InvalidInstance(m));
        if !(p_min > 0.0 && p_min.is_finite() && p_max.is_finite() && p_max >= p_min) {
            return bad(format!("need 0 < p_min <= p_max, got [{p_min}, {p_max}]"));
        }
        let n = capacities.len();
        if n == 0 {
            return bad("at least one inventory is required".into());
        }
        if slots.is_empty() {
            return bad("horizon must be positive".into());
        }
        if allowances.len() != slots.len() {
            return bad(format!(
                "{} allowances for a horizon of {}",
                allowances.len(),
                slots.len()
            ));
        }
        if capacities.iter().any(|c| !(c.is_finite() && *c > 0.0)) {
            return bad("capacities must be positive and finite".into());
        }
        if allowances.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
            return bad("allowances must be nonnegative and finite".into());
        }
        for (t, row) in slots.iter().enumerate() {
            if row.len() != n {
                return bad(format!(
                    "slot {t} has {} functions, expected {n}",
                    row.len()
                ));
            }
            for (i, g) in row.iter().enumerate() {
                if g.delta() > allowances[t] * (1.0 + 1e-12) {
                    return bad(format!(
                        "rate limit {} of inventory {i} exceeds allowance {} at slot {t}",
                        g.delta(),
                        allowances[t]
                    ));
                }
                if let Err(m) = g.check_class(class, p_min, p_max, CLASS_SAMPLES) {
                    return bad(format!("slot {t}, inventory {i}: {m}"));
                }
            }
        }
        Ok(Instance {
            id: id.into(),
            class,
            p_min,
            p_max,
            capacities,
            allowances,
            slots,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn class(&self) -> RevenueClass {
        self.class
    }

    pub fn p_min(&self) -> f64 {
        self.p_min
    }

    pub fn p_max(&self) -> f64 {
        self.p_max
    }

    /// `theta = p_max / p_min`.
    pub fn theta(&self) -> f64 {
        self.p_max / self.p_min
    }

    /// Horizon `T`.
    pub fn horizon(&self) -> usize {
        self.slots.len()
    }

    /// Number of inventories `N`.
    pub fn inventories(&self) -> usize {
        self.capacities.len()
    }

    pub fn capacities(&self) -> &[f64] {
        &self.capacities
    }

    pub fn allowances(&self) -> &[f64] {
        &self.allowances
    }

    pub fn slots(&self) -> &[Vec<RevenueFunction>] {
        &self.slots
    }

    pub fn slot(&self, t: usize) -> &[RevenueFunction] {
        &self.slots[t]
    }

    pub fn revenue(&self, i: usize, t: usize) -> &RevenueFunction {
        &self.slots[t][i]
    }

    /// The first `t` slots as a standalone instance.
    pub fn prefix(&self, t: usize) -> Instance {
        let t = t.clamp(1, self.horizon());
        Instance {
            id: self.id.clone(),
            class: self.class,
            p_min: self.p_min,
            p_max: self.p_max,
            capacities: self.capacities.clone(),
            allowances: self.allowances[..t].to_vec(),
            slots: self.slots[..t].to_vec(),
        }
    }

    /// Copy with a different identifier.
    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    /// Copy with capacities replaced; used by perturbation tests.
    pub fn with_capacities(&self, capacities: Vec<f64>) -> Result<Self> {
        Instance::new(
            self.id.clone(),
            self.class,
            self.p_min,
            self.p_max,
            capacities,
            self.allowances.clone(),
            self.slots.clone(),
        )
    }

    /// Copy with allowances replaced; rate limits are kept, so the new
    /// allowances must still dominate them.
    pub fn with_allowances(&self, allowances: Vec<f64>) -> Result<Self> {
        Instance::new(
            self.id.clone(),
            self.class,
            self.p_min,
            self.p_max,
            self.capacities.clone(),
            allowances,
            self.slots.clone(),
        )
    }

    /// Objective of an allocation matrix `v[t][i]` (values clamped to each domain).
    pub fn objective(&self, v: &[Vec<f64>]) -> f64 {
        self.slots
            .iter()
            .zip(v)
            .flat_map(|(row, vr)| row.iter().zip(vr).map(|(g, &x)| g.value(x)))
            .sum()
    }
}

/// Worst constraint excess of an allocation.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    /// `max_i (sum_t v - C_i)`, floored at 0.
    pub capacity_excess: f64,
    /// `max_t (sum_i v - A_t)`, floored at 0.
    pub allowance_excess: f64,
    /// `max (v - delta)` and `max (-v)`, floored at 0.
    pub rate_excess: f64,
}

impl FeasibilityReport {
    pub fn max_excess(&self) -> f64 {
        self.capacity_excess
            .max(self.allowance_excess)
            .max(self.rate_excess)
    }

    pub fn is_feasible(&self, tol: f64) -> bool {
        self.max_excess() <= tol
    }
}

/// Decisions `v[t][i]`, allowance splits `a[t][i]` and the resulting objective.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub v: Vec<Vec<f64>>,
    pub a: Vec<Vec<f64>>,
    pub objective: f64,
}

impl Allocation {
    pub fn zeros(horizon: usize, inventories: usize) -> Self {
        Allocation {
            v: vec![vec![0.0; inventories]; horizon],
            a: vec![vec![0.0; inventories]; horizon],
            objective: 0.0,
        }
    }

    pub fn check(&self, inst: &Instance) -> FeasibilityReport {
        let n = inst.inventories();
        let mut rep = FeasibilityReport::default();
        let mut used = vec![0.0; n];
        for (t, row) in self.v.iter().enumerate() {
            let mut slot_sum = 0.0;
            for (i, &x) in row.iter().enumerate() {
                used[i] += x;
                slot_sum += x;
                let delta = inst.revenue(i, t).delta();
                rep.rate_excess = rep.rate_excess.max(x - delta).max(-x);
            }
            rep.allowance_excess = rep.allowance_excess.max(slot_sum - inst.allowances()[t]);
        }
        for (u, c) in used.iter().zip(inst.capacities()) {
            rep.capacity_excess = rep.capacity_excess.max(u - c);
        }
        rep
    }

    pub fn is_feasible(&self, inst: &Instance) -> bool {
        self.check(inst).is_feasible(TOL_FEAS)
    }

    /// Total allocation of inventory `i`.
    pub fn used(&self, i: usize) -> f64 {
        self.v.iter().map(|r| r[i]).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lin(s: f64, d: f64) -> RevenueFunction {
        RevenueFunction::linear(s, d).unwrap()
    }

    fn two_by_two() -> Instance {
        Instance::new(
            "t",
            RevenueClass::GradientBounded,
            1.0,
            2.0,
            vec![1.0, 1.0],
            vec![1.0, 1.0],
            vec![vec![lin(1.0, 1.0), lin(2.0, 1.0)]; 2],
        )
        .unwrap()
    }

    #[test]
    fn accessors() {
        let inst = two_by_two();
        assert_eq!(inst.horizon(), 2);
        assert_eq!(inst.inventories(), 2);
        assert_eq!(inst.theta(), 2.0);
        assert_eq!(inst.prefix(1).horizon(), 1);
        assert_eq!(inst.objective(&[vec![0.0, 1.0], vec![1.0, 0.0]]), 3.0);
    }

    #[test]
    fn rejects_rate_above_allowance() {
        let r = Instance::new(
            "bad",
            RevenueClass::GradientBounded,
            1.0,
            1.0,
            vec![1.0],
            vec![0.5],
            vec![vec![lin(1.0, 1.0)]],
        );
        assert!(matches!(r, Err(Error::InvalidInstance(_))));
    }

    #[test]
    fn rejects_gradient_outside_class() {
        let r = Instance::new(
            "bad",
            RevenueClass::GradientBounded,
            1.0,
            1.5,
            vec![1.0],
            vec![1.0],
            vec![vec![lin(2.0, 1.0)]],
        );
        assert!(r.is_err());
    }

    #[test]
    fn feasibility_report() {
        let inst = two_by_two();
        let mut a = Allocation::zeros(2, 2);
        a.v = vec![vec![0.5, 0.5], vec![0.5, 0.5]];
        assert!(a.is_feasible(&inst));
        a.v = vec![vec![0.7, 0.5], vec![0.5, 0.6]];
        let rep = a.check(&inst);
        assert!((rep.allowance_excess - 0.2).abs() < 1e-12);
        assert!((rep.capacity_excess - 0.2).abs() < 1e-12);
        assert_eq!(rep.rate_excess, 0.0);
        assert!(!a.is_feasible(&inst));
    }
}
