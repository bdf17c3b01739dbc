//! CR-Pursuit(π): single-inventory online allocation that earns, in every
//! slot, a `1/π` share of the increase of the offline optimum.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::model::{Allocation, Instance, RevenueFunction};
use crate::offline::{solve_single, tol_gap};
use crate::report::{Flag, RunReport, BOUND_TOL};
use crate::{TOL_FEAS, TOL_ROOT};

/// `pi_1 = ln(theta) + 1`.
pub fn pi_one(theta: f64) -> Result<f64> {
    if !(theta >= 1.0) || !theta.is_finite() {
        return Err(Error::domain("theta", theta, 1.0, f64::INFINITY));
    }
    Ok(theta.ln() + 1.0)
}

/// Result of pursuing one increment.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pursuit {
    pub v: f64,
    /// Amount by which the target exceeded `g(delta)` (0 when attainable).
    pub breach: f64,
    /// Magnitude of a negative increment that was clamped to zero.
    pub negative: f64,
}

/// Smallest `v` with `g(v) = increment / pi`, clamped to `[0, delta]`.
pub fn pursue(g: &RevenueFunction, increment: f64, pi: f64) -> Result<Pursuit> {
    let negative = (-increment).max(0.0);
    let target = increment.max(0.0) / pi;
    let top = g.value(g.delta());
    if target > top {
        return Ok(Pursuit {
            v: g.delta(),
            breach: target - top,
            negative,
        });
    }
    Ok(Pursuit {
        v: g.inverse_eval(target)?,
        breach: 0.0,
        negative,
    })
}

/// One slot of a pursuit trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct PursuitStep {
    pub v: f64,
    /// `OPT_S(t)`.
    pub opt: f64,
    /// `OPT_S(t) - OPT_S(t-1)`.
    pub increment: f64,
    /// `g_t(v)`.
    pub revenue: f64,
    pub breach: f64,
}

/// Running state of CR-Pursuit on one inventory.
#[derive(Clone, Debug)]
pub struct PursuitState {
    pi: f64,
    capacity: f64,
    history: Vec<RevenueFunction>,
    opt_prev: f64,
    total: f64,
    objective: f64,
    opt_gap: f64,
    steps: Vec<PursuitStep>,
    warnings: Vec<String>,
}

impl PursuitState {
    pub fn new(pi: f64, capacity: f64) -> Result<Self> {
        if !(pi >= 1.0) || !pi.is_finite() {
            return Err(Error::domain("pi", pi, 1.0, f64::INFINITY));
        }
        if !(capacity >= 0.0) || !capacity.is_finite() {
            return Err(Error::domain("capacity", capacity, 0.0, f64::INFINITY));
        }
        Ok(PursuitState {
            pi,
            capacity,
            history: Vec::new(),
            opt_prev: 0.0,
            total: 0.0,
            objective: 0.0,
            opt_gap: 0.0,
            steps: Vec::new(),
            warnings: Vec::new(),
        })
    }

    /// Observes `g_t` and returns the decision `v_t`.
    pub fn step(&mut self, g: &RevenueFunction) -> Result<f64> {
        self.history.push(g.clone());
        let sol = solve_single(&self.history, self.capacity)?;
        let increment = sol.objective - self.opt_prev;
        let p = pursue(g, increment, self.pi)?;
        let t = self.history.len();
        if p.breach > 0.0 {
            self.warnings.push(format!(
                "slot {t}: pursuit target exceeds g(delta) by {:e}; clamped to delta",
                p.breach
            ));
        }
        if p.negative > TOL_ROOT * (1.0 + sol.objective) {
            self.warnings.push(format!(
                "slot {t}: offline optimum decreased by {:e}; increment clamped to 0",
                p.negative
            ));
        }
        let revenue = g.value(p.v);
        self.total += p.v;
        self.objective += revenue;
        self.opt_prev = sol.objective;
        self.opt_gap = sol.gap;
        self.steps.push(PursuitStep {
            v: p.v,
            opt: sol.objective,
            increment,
            revenue,
            breach: p.breach,
        });
        Ok(p.v)
    }

    pub fn pi(&self) -> f64 {
        self.pi
    }

    pub fn capacity(&self) -> f64 {
        self.capacity
    }

    /// `OPT_S` of the slots seen so far.
    pub fn opt(&self) -> f64 {
        self.opt_prev
    }

    pub fn opt_gap(&self) -> f64 {
        self.opt_gap
    }

    /// Cumulative allocation.
    pub fn total(&self) -> f64 {
        self.total
    }

    /// Cumulative online revenue.
    pub fn objective(&self) -> f64 {
        self.objective
    }

    pub fn steps(&self) -> &[PursuitStep] {
        &self.steps
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Largest `|sum_{tau<=t} g(v) - OPT_S(t)/pi|` over prefixes.
    pub fn identity_error(&self) -> f64 {
        let mut acc = 0.0;
        let mut worst: f64 = 0.0;
        for s in &self.steps {
            acc += s.revenue;
            worst = worst.max((acc - s.opt / self.pi).abs());
        }
        worst
    }

    pub fn max_breach(&self) -> f64 {
        self.steps.iter().map(|s| s.breach).fold(0.0, f64::max)
    }
}

/// Runs CR-Pursuit(π) over a single-inventory instance.
///
/// `pi = None` uses `pi_1` of the instance.
pub fn run(inst: &Instance, pi: Option<f64>) -> Result<RunReport> {
    if inst.inventories() != 1 {
        return Err(Error::InvalidInstance(format!(
            "CR-Pursuit needs a single inventory, got {}",
            inst.inventories()
        )));
    }
    let theta = inst.theta();
    let pi = match pi {
        Some(p) => p,
        None => pi_one(theta)?,
    };
    let capacity = inst.capacities()[0];
    let started = Instant::now();
    let mut state = PursuitState::new(pi, capacity)?;
    let mut alloc = Allocation::zeros(inst.horizon(), 1);
    for t in 0..inst.horizon() {
        let g = inst.revenue(0, t);
        let v = state.step(g)?;
        alloc.v[t][0] = v;
        alloc.a[t][0] = g.delta();
    }
    alloc.objective = state.objective();
    let online_ms = started.elapsed().as_secs_f64() * 1e3;

    let opt = state.opt();
    let horizon = inst.horizon() as f64;
    let mut report = RunReport::new(inst, "cr_pursuit", pi, alloc, opt, state.opt_gap(), pi);
    report.timings.online_ms = online_ms;

    let id_tol = horizon * 1e-9 * (1.0 + opt);
    report.flags.push(Flag::at_most(
        "pursuit_identity",
        state.identity_error(),
        id_tol,
    ));
    let share_excess = state
        .steps()
        .iter()
        .enumerate()
        .map(|(t, s)| s.v - inst.revenue(0, t).delta() / pi)
        .fold(f64::NEG_INFINITY, f64::max);
    report
        .flags
        .push(Flag::at_most("rate_share", share_excess, TOL_FEAS));
    let phi_bound = (theta.ln() + 1.0) * capacity / pi;
    report.flags.push(Flag::at_most(
        "total_allocation_bound",
        state.total(),
        phi_bound + TOL_FEAS,
    ));
    report.flags.push(Flag::at_most(
        "capacity",
        state.total(),
        capacity + TOL_FEAS,
    ));
    let feas = report.allocation.check(inst);
    report
        .flags
        .push(Flag::at_most("feasibility", feas.max_excess(), TOL_FEAS));
    report.flags.push(Flag::at_most(
        "pursuit_breach",
        state.max_breach(),
        10.0 * TOL_ROOT * (1.0 + opt),
    ));
    report
        .flags
        .push(Flag::at_most("offline_gap", state.opt_gap(), tol_gap(opt)));
    report.metrics.insert("allocated".into(), state.total());
    report.metrics.insert(
        "allocation_tightness".into(),
        if capacity > 0.0 {
            pi * state.total() / ((theta.ln() + 1.0) * capacity)
        } else {
            0.0
        },
    );
    report.metrics.insert(
        "online_over_opt".into(),
        if opt > 0.0 {
            state.objective() / opt
        } else {
            1.0
        },
    );
    report.warnings.extend(state.warnings().iter().cloned());
    debug_assert!(report.bound + BOUND_TOL > 0.0);
    Ok(report)
}
