//! Primal-dual threshold baseline.
//!
//! Each inventory carries a threshold `phi(w)` on its consumed capacity `w`.
//! Every slot maximizes the pseudo-revenue `sum_i g_i(v_i) - int_w^{w+v_i} phi`
//! under the allowance, which is solved by bisection on the allowance price.

use std::time::Instant;

use crate::cr_pursuit::pi_one;
use crate::error::{Error, Result};
use crate::model::{Allocation, Instance, RevenueClass, RevenueFunction};
use crate::offline::{solve_multi, tol_gap};
use crate::report::{Flag, RunReport};
use crate::TOL_FEAS;

const BISECT_TOL: f64 = 1e-10;

/// Principal branch of the Lambert W function for `x >= 0`.
pub fn lambert_w(x: f64) -> Result<f64> {
    if !(x >= 0.0) || x.is_infinite() {
        return Err(Error::domain("lambert_w", x, 0.0, f64::INFINITY));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    let mut w = x.ln_1p();
    for _ in 0..64 {
        let ew = w.exp();
        let f = w * ew - x;
        let wp1 = w + 1.0;
        let denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1);
        let next = w - f / denom;
        let done = (next - w).abs() <= 1e-15 * (1.0 + next.abs());
        w = next;
        if done {
            break;
        }
    }
    Ok(w)
}

/// `(chi, chi_tilde)` with `chi = W(ln(theta) e^{ln(theta) - 1}) - ln(theta) + 1`
/// and `chi_tilde = 1 / (1 - e^{-chi})`.
pub fn chi(theta: f64) -> Result<(f64, f64)> {
    if !(theta >= 1.0) || !theta.is_finite() {
        return Err(Error::domain("theta", theta, 1.0, f64::INFINITY));
    }
    let l = theta.ln();
    let c = lambert_w(l * (l - 1.0).exp())? - l + 1.0;
    Ok((c, -1.0 / (-c).exp_m1()))
}

/// Threshold function of one inventory.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Threshold {
    pub p_min: f64,
    pub p_max: f64,
    pub capacity: f64,
    pub chi: f64,
    pub chi_tilde: f64,
}

impl Threshold {
    pub fn new(p_min: f64, p_max: f64, capacity: f64) -> Result<Self> {
        if !(p_min > 0.0) || !(capacity > 0.0) {
            return Err(Error::InvalidInstance(format!(
                "threshold needs p_min > 0 and capacity > 0 (got {p_min}, {capacity})"
            )));
        }
        let (chi, chi_tilde) = chi(p_max / p_min)?;
        Ok(Threshold {
            p_min,
            p_max,
            capacity,
            chi,
            chi_tilde,
        })
    }

    pub fn theta(&self) -> f64 {
        self.p_max / self.p_min
    }

    /// Exponential branch `p_min (e^{w/C} - 1) / (e^chi - 1)`, valid on `[0, chi C]`.
    pub fn lower_branch(&self, w: f64) -> f64 {
        self.p_min * (w / self.capacity).exp_m1() / self.chi.exp_m1()
    }

    /// Geometric branch `p_min theta^{(w/C - chi)/(1 - chi)}`, valid on `[chi C, C]`.
    pub fn upper_branch(&self, w: f64) -> f64 {
        let z = w / self.capacity;
        self.p_min * (self.theta().ln() * (z - self.chi) / (1.0 - self.chi)).exp()
    }

    /// `phi(w)` on `[0, C]`; continuous, increasing, `phi(chi C) = p_min`, `phi(C) = p_max`.
    pub fn phi(&self, w: f64) -> Result<f64> {
        if !(w >= 0.0) || w > self.capacity * (1.0 + 1e-12) {
            return Err(Error::domain("phi", w, 0.0, self.capacity));
        }
        Ok(self.phi_unchecked(w.min(self.capacity)))
    }

    fn phi_unchecked(&self, w: f64) -> f64 {
        if self.chi >= 1.0 - 1e-12 || w <= self.chi * self.capacity {
            self.lower_branch(w)
        } else {
            self.upper_branch(w)
        }
    }

    /// Worst residuals of the two dual-fitting conditions on `points` grid points:
    /// `C phi' - phi - p_min (chi_tilde - 1)` on `(0, chi C)` and
    /// `C phi' - chi_tilde phi` on `(chi C, C)`, with `phi'` by central differences.
    pub fn condition_residuals(&self, points: usize) -> (f64, f64) {
        let c = self.capacity;
        let h = c * 1e-6;
        let split = self.chi * c;
        let mut r1 = f64::NEG_INFINITY;
        let mut r2 = f64::NEG_INFINITY;
        for k in 1..points {
            let w = c * k as f64 / points as f64;
            if w - h < 0.0 || w + h > c || (w - split).abs() <= 2.0 * h {
                continue;
            }
            let d = (self.phi_unchecked(w + h) - self.phi_unchecked(w - h)) / (2.0 * h);
            let phi = self.phi_unchecked(w);
            if w < split {
                r1 = r1.max(c * d - phi - self.p_min * (self.chi_tilde - 1.0));
            } else {
                r2 = r2.max(c * d - self.chi_tilde * phi);
            }
        }
        (r1, r2)
    }
}

/// Largest `v <= cap` with `g'_-(v) >= phi(w + v) + beta`.
fn inventory_response(g: &RevenueFunction, th: &Threshold, w: f64, cap: f64, beta: f64) -> f64 {
    let margin = |v: f64| {
        let slope = if v <= 0.0 {
            g.slope_right(0.0)
        } else {
            g.slope_left(v)
        };
        slope - th.phi_unchecked((w + v).min(th.capacity)) - beta
    };
    if cap <= 0.0 || margin(0.0) < 0.0 {
        return 0.0;
    }
    if margin(cap) >= 0.0 {
        return cap;
    }
    let (mut lo, mut hi) = (0.0, cap);
    while hi - lo > BISECT_TOL * (1.0 + cap) {
        let mid = 0.5 * (lo + hi);
        if margin(mid) >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Cumulative allocation per inventory.
#[derive(Clone, Debug)]
pub struct ThresholdState {
    pub thresholds: Vec<Threshold>,
    pub used: Vec<f64>,
}

impl ThresholdState {
    pub fn new(inst: &Instance) -> Result<Self> {
        let thresholds = inst
            .capacities()
            .iter()
            .map(|&c| Threshold::new(inst.p_min(), inst.p_max(), c))
            .collect::<Result<Vec<_>>>()?;
        Ok(ThresholdState {
            used: vec![0.0; thresholds.len()],
            thresholds,
        })
    }

    fn responses(&self, gs: &[RevenueFunction], beta: f64) -> Vec<f64> {
        gs.iter()
            .enumerate()
            .map(|(i, g)| {
                let th = &self.thresholds[i];
                let cap = g.delta().min((th.capacity - self.used[i]).max(0.0));
                inventory_response(g, th, self.used[i], cap, beta)
            })
            .collect()
    }
}

/// One slot: returns the allocation and advances the cumulative usage.
pub fn pd_step(
    state: &mut ThresholdState,
    gs: &[RevenueFunction],
    allowance: f64,
) -> Result<Vec<f64>> {
    if gs.len() != state.used.len() {
        return Err(Error::InvalidInstance(format!(
            "{} revenue functions for {} inventories",
            gs.len(),
            state.used.len()
        )));
    }
    let free = state.responses(gs, 0.0);
    let v = if free.iter().sum::<f64>() <= allowance {
        free
    } else {
        let top = gs.iter().map(|g| g.slope_right(0.0)).fold(0.0, f64::max);
        let (mut lo, mut hi) = (0.0, top);
        let mut v_lo = free;
        let mut v_hi = vec![0.0; gs.len()];
        let mut rounds = 0;
        while hi - lo > BISECT_TOL * (1.0 + top) {
            let mid = 0.5 * (lo + hi);
            let r = state.responses(gs, mid);
            if r.iter().sum::<f64>() > allowance {
                lo = mid;
                v_lo = r;
            } else {
                hi = mid;
                v_hi = r;
            }
            rounds += 1;
            if rounds > 200 {
                return Err(Error::NonConvergence {
                    solver: "pd_step",
                    iterations: rounds,
                    gap: hi - lo,
                });
            }
        }
        let s_lo: f64 = v_lo.iter().sum();
        let s_hi: f64 = v_hi.iter().sum();
        let frac = if s_lo > s_hi {
            ((allowance - s_hi) / (s_lo - s_hi)).clamp(0.0, 1.0)
        } else {
            0.0
        };
        v_hi.iter()
            .zip(&v_lo)
            .map(|(h, l)| h + frac * (l - h))
            .collect()
    };
    for (u, x) in state.used.iter_mut().zip(&v) {
        *u += x;
    }
    Ok(v)
}

/// Full-horizon run of the threshold baseline on a gradient-bounded instance.
pub fn pd_run(inst: &Instance) -> Result<RunReport> {
    if inst.class() != RevenueClass::GradientBounded {
        return Err(Error::InvalidInstance(
            "the threshold baseline needs a gradient-bounded instance".into(),
        ));
    }
    let started = Instant::now();
    let mut state = ThresholdState::new(inst)?;
    let mut alloc = Allocation::zeros(inst.horizon(), inst.inventories());
    for t in 0..inst.horizon() {
        let v = pd_step(&mut state, inst.slot(t), inst.allowances()[t])?;
        alloc.a[t] = inst.slot(t).iter().map(|g| g.delta()).collect();
        alloc.v[t] = v;
    }
    alloc.objective = inst.objective(&alloc.v);
    let online_ms = started.elapsed().as_secs_f64() * 1e3;

    let started = Instant::now();
    let off = solve_multi(inst, inst.horizon())?;
    let offline_ms = started.elapsed().as_secs_f64() * 1e3;
    let chi_tilde = state.thresholds[0].chi_tilde;
    let mut report = RunReport::new(
        inst,
        "pd_threshold",
        chi_tilde,
        alloc,
        off.objective,
        off.gap,
        chi_tilde,
    );
    report.timings.online_ms = online_ms;
    report.timings.offline_ms = offline_ms;

    let cap_excess = state
        .used
        .iter()
        .zip(inst.capacities())
        .map(|(u, c)| u - c)
        .fold(f64::NEG_INFINITY, f64::max);
    report
        .flags
        .push(Flag::at_most("capacity", cap_excess, TOL_FEAS));
    let feas = report.allocation.check(inst);
    report
        .flags
        .push(Flag::at_most("feasibility", feas.max_excess(), TOL_FEAS));
    report.flags.push(Flag::at_most(
        "offline_gap",
        off.gap,
        tol_gap(off.objective),
    ));
    report.metrics.insert("chi".into(), state.thresholds[0].chi);
    report.metrics.insert("pi1".into(), pi_one(inst.theta())?);
    Ok(report)
}
