//! Allowance-and-pursuit: divide the per-slot allowance among inventories,
//! then run a pursuit rule on each inventory separately.
//!
//! With `N <= pi` every inventory pursues its own single-inventory optimum
//! with the real rate limits ([`Mode::Small`]). Otherwise a concave
//! allowance program with `pi`-fold augmented budget decides a split `a_hat`
//! each slot, and each inventory pursues the optimum of the scaled
//! revenues `g~ = pi g(. / pi)` under the splits received so far
//! ([`Mode::Large`]).

pub mod aat;
pub mod psi;

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::cr_pursuit::{pi_one, pursue, PursuitState};
use crate::error::{Error, Result};
use crate::model::{Allocation, Instance, RevenueClass, RevenueFunction};
use crate::offline::{solve_capped, solve_multi, tol_gap};
use crate::report::{Flag, RunReport};
use crate::{TOL_FEAS, TOL_ROOT};

pub use aat::{
    aat_objective, kkt_residual, project_capped_simplex, solve_aat, AatMethod, AatSolution,
};
pub use psi::{tol_quad, weight_cdf, weight_density, PsiEvaluator};

/// Number of points of the `a`-grid used for the monotonicity check of `Psi`.
pub const PSI_GRID: usize = 9;

/// `g~(v) = pi g(v / pi)` with rate limit `pi delta`.
pub fn scaled_revenue(g: &RevenueFunction, pi: f64) -> Result<RevenueFunction> {
    if !(pi >= 1.0) || !pi.is_finite() {
        return Err(Error::domain("pi", pi, 1.0, f64::INFINITY));
    }
    Ok(g.scaled(pi))
}

/// `alpha(pi) = pi (1 - e^{-1/pi})`.
pub fn alpha(pi: f64) -> f64 {
    -pi * (-1.0 / pi).exp_m1()
}

/// `pi_2 = 2 (ln(theta) + 1)`, used for price-elastic revenues.
pub fn pi_two(theta: f64) -> Result<f64> {
    Ok(2.0 * pi_one(theta)?)
}

/// `e^{1/pi} / (e^{1/pi} - 1)`, the guarantee when `N > pi`.
pub fn large_n_bound(pi: f64) -> f64 {
    -1.0 / (-1.0 / pi).exp_m1()
}

/// Default `pi` for a revenue class.
pub fn default_pi(class: RevenueClass, theta: f64) -> Result<f64> {
    match class {
        RevenueClass::GradientBounded => pi_one(theta),
        RevenueClass::PriceElastic => pi_two(theta),
    }
}

/// Guarantee of the algorithm in `mode` with parameter `pi`.
pub fn bound(mode: Mode, pi: f64) -> f64 {
    match mode {
        Mode::Small => pi,
        Mode::Large => large_n_bound(pi),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// `N <= pi`: independent pursuit with the real rate limits.
    Small,
    /// `N > pi`: allowance program followed by scaled pursuit.
    Large,
}

impl Mode {
    /// `Small` iff `n <= pi`.
    pub fn select(n: usize, pi: f64) -> Mode {
        if n as f64 <= pi {
            Mode::Small
        } else {
            Mode::Large
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Mode::Small => "anp_small",
            Mode::Large => "anp_large",
        }
    }
}

/// Run parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AnpOptions {
    /// Overrides the class default `pi`.
    pub pi: Option<f64>,
    /// Overrides the `N <= pi` dispatch.
    pub mode: Option<Mode>,
    pub method: AatMethod,
    /// Solves the offline problem on every prefix to check the allowance program's approximation.
    pub prefix_check: bool,
}

impl Default for AnpOptions {
    fn default() -> Self {
        AnpOptions {
            pi: None,
            mode: None,
            method: AatMethod::WaterFilling,
            prefix_check: true,
        }
    }
}

/// Per-slot trace of one inventory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlotRecord {
    pub a_hat: f64,
    pub v: f64,
    /// Pursued optimum after this slot.
    pub opt: f64,
    pub revenue: f64,
    pub breach: f64,
}

/// Scaled single-inventory subproblem of the large mode.
#[derive(Clone, Debug)]
struct Track {
    capacity: f64,
    history: Vec<RevenueFunction>,
    caps: Vec<f64>,
    opt_prev: f64,
    opt_gap: f64,
    eta: f64,
    used: f64,
}

impl Track {
    fn new(capacity: f64) -> Self {
        Track {
            capacity,
            history: Vec::new(),
            caps: Vec::new(),
            opt_prev: 0.0,
            opt_gap: 0.0,
            eta: 0.0,
            used: 0.0,
        }
    }
}

/// Running state of the algorithm.
#[derive(Clone, Debug)]
pub struct AnpState {
    pi: f64,
    mode: Mode,
    method: AatMethod,
    pursuers: Vec<PursuitState>,
    tracks: Vec<Track>,
    records: Vec<Vec<SlotRecord>>,
    kkt: Vec<f64>,
    psi_drop: f64,
    warnings: Vec<String>,
}

impl AnpState {
    pub fn new(pi: f64, mode: Mode, capacities: &[f64], method: AatMethod) -> Result<Self> {
        if !(pi >= 1.0) || !pi.is_finite() {
            return Err(Error::domain("pi", pi, 1.0, f64::INFINITY));
        }
        let pursuers = match mode {
            Mode::Small => capacities
                .iter()
                .map(|&c| PursuitState::new(pi, c))
                .collect::<Result<_>>()?,
            Mode::Large => Vec::new(),
        };
        let tracks = match mode {
            Mode::Small => Vec::new(),
            Mode::Large => capacities.iter().map(|&c| Track::new(c)).collect(),
        };
        Ok(AnpState {
            pi,
            mode,
            method,
            pursuers,
            tracks,
            records: Vec::new(),
            kkt: Vec::new(),
            psi_drop: 0.0,
            warnings: Vec::new(),
        })
    }

    pub fn pi(&self) -> f64 {
        self.pi
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// Trace indexed `[t][i]`.
    pub fn records(&self) -> &[Vec<SlotRecord>] {
        &self.records
    }

    /// KKT residual of the allowance program per slot (large mode).
    pub fn kkt_residuals(&self) -> &[f64] {
        &self.kkt
    }

    /// Largest decrease of `Psi` seen along the sampled `a`-grids.
    pub fn psi_drop(&self) -> f64 {
        self.psi_drop
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Sum over inventories of the pursued optima.
    pub fn opt_sum(&self) -> f64 {
        match self.mode {
            Mode::Small => self.pursuers.iter().map(|p| p.opt()).sum(),
            Mode::Large => self.tracks.iter().map(|t| t.opt_prev).sum(),
        }
    }

    /// Sum of the certified gaps of the current pursued optima.
    pub fn opt_gap_sum(&self) -> f64 {
        match self.mode {
            Mode::Small => self.pursuers.iter().map(|p| p.opt_gap()).sum(),
            Mode::Large => self.tracks.iter().map(|t| t.opt_gap).sum(),
        }
    }

    /// Largest `|eta_i - OPT~_i / pi|` over inventories and prefixes, relative to `t (1 + OPT~)`.
    pub fn eta_error(&self) -> f64 {
        let n = self.records.first().map_or(0, Vec::len);
        let mut worst: f64 = 0.0;
        for i in 0..n {
            let mut eta = 0.0;
            for (t, row) in self.records.iter().enumerate() {
                eta += row[i].revenue;
                let err = (eta - row[i].opt / self.pi).abs();
                worst = worst.max(err / ((t + 1) as f64 * (1.0 + row[i].opt)));
            }
        }
        worst
    }

    /// Observes slot revenues `gs` with allowance `allowance` and returns the decisions.
    pub fn step(&mut self, gs: &[RevenueFunction], allowance: f64) -> Result<Vec<f64>> {
        match self.mode {
            Mode::Small => self.step_small(gs),
            Mode::Large => self.step_large(gs, allowance),
        }
    }

    /// Independent pursuit per inventory with `a_hat = delta`.
    pub fn step_small(&mut self, gs: &[RevenueFunction]) -> Result<Vec<f64>> {
        if gs.len() != self.pursuers.len() {
            return Err(Error::InvalidInstance(format!(
                "slot has {} revenues for {} inventories",
                gs.len(),
                self.pursuers.len()
            )));
        }
        let t = self.records.len() + 1;
        let mut v = Vec::with_capacity(gs.len());
        let mut row = Vec::with_capacity(gs.len());
        for (i, (p, g)) in self.pursuers.iter_mut().zip(gs).enumerate() {
            let x = p.step(g)?;
            let s = p.steps().last().expect("step recorded");
            for w in p
                .warnings()
                .iter()
                .skip(p.warnings().len().saturating_sub(2))
            {
                if w.starts_with(&format!("slot {t}:")) {
                    self.warnings.push(format!("inventory {i}, {w}"));
                }
            }
            row.push(SlotRecord {
                a_hat: g.delta(),
                v: x,
                opt: s.opt,
                revenue: s.revenue,
                breach: s.breach,
            });
            v.push(x);
        }
        self.records.push(row);
        Ok(v)
    }

    /// `Psi` evaluators of the next slot with revenues `gs`, tagged by
    /// inventory; inventories without capacity are skipped. Empty in small mode.
    pub fn evaluators(&self, gs: &[RevenueFunction]) -> Result<Vec<(usize, PsiEvaluator)>> {
        self.tracks
            .iter()
            .zip(gs)
            .enumerate()
            .filter(|(_, (tr, _))| tr.capacity > 0.0)
            .map(|(i, (tr, g))| {
                let ev = PsiEvaluator::new(
                    self.pi,
                    tr.capacity,
                    tr.history.clone(),
                    tr.caps.clone(),
                    g.scaled(self.pi),
                )?;
                Ok((i, ev))
            })
            .collect()
    }

    /// Allowance program, then pursuit of the scaled optima.
    pub fn step_large(&mut self, gs: &[RevenueFunction], allowance: f64) -> Result<Vec<f64>> {
        let n = self.tracks.len();
        if gs.len() != n {
            return Err(Error::InvalidInstance(format!(
                "slot has {} revenues for {} inventories",
                gs.len(),
                n
            )));
        }
        let pi = self.pi;
        let t = self.records.len() + 1;
        let scaled: Vec<RevenueFunction> = gs.iter().map(|g| g.scaled(pi)).collect();
        let (active, evs): (Vec<usize>, Vec<PsiEvaluator>) =
            self.evaluators(gs)?.into_iter().unzip();
        let mut a_hat = vec![0.0; n];
        if !evs.is_empty() {
            let sol = solve_aat(&evs, pi * allowance, self.method)?;
            for (k, &i) in active.iter().enumerate() {
                a_hat[i] = sol.a[k];
            }
            self.kkt.push(sol.kkt_residual);
            for ev in &evs {
                self.psi_drop = self.psi_drop.max(psi_drop(ev, PSI_GRID));
            }
        } else {
            self.kkt.push(0.0);
        }

        let mut v = Vec::with_capacity(n);
        let mut row = Vec::with_capacity(n);
        for i in 0..n {
            let tr = &mut self.tracks[i];
            tr.history.push(scaled[i].clone());
            tr.caps.push(a_hat[i]);
            let items: Vec<(&RevenueFunction, f64)> = tr
                .history
                .iter()
                .zip(&tr.caps)
                .map(|(g, &c)| (g, c))
                .collect();
            let sol = solve_capped(&items, tr.capacity)?;
            let increment = sol.objective - tr.opt_prev;
            let p = pursue(&gs[i], increment, pi)?;
            if p.breach > 0.0 {
                self.warnings.push(format!(
                    "inventory {i}, slot {t}: pursuit target exceeds g(delta) by {:e}; clamped to delta",
                    p.breach
                ));
            }
            if p.negative > TOL_ROOT * (1.0 + sol.objective) {
                self.warnings.push(format!(
                    "inventory {i}, slot {t}: pursued optimum decreased by {:e}; increment clamped to 0",
                    p.negative
                ));
            }
            let revenue = gs[i].value(p.v);
            tr.opt_prev = sol.objective;
            tr.opt_gap = sol.gap;
            tr.eta += revenue;
            tr.used += p.v;
            row.push(SlotRecord {
                a_hat: a_hat[i],
                v: p.v,
                opt: sol.objective,
                revenue,
                breach: p.breach,
            });
            v.push(p.v);
        }
        self.records.push(row);
        Ok(v)
    }
}

/// Largest decrease of `Psi` between consecutive points of a uniform grid on `[0, pi delta]`.
pub fn psi_drop(ev: &PsiEvaluator, points: usize) -> f64 {
    let u = ev.upper();
    if u <= 0.0 || points < 2 {
        return 0.0;
    }
    let mut prev = ev.eval_psi_layered(0.0);
    let mut worst: f64 = 0.0;
    for k in 1..points {
        let x = u * k as f64 / (points - 1) as f64;
        let y = ev.eval_psi_layered(x);
        worst = worst.max(prev - y);
        prev = y;
    }
    worst
}

/// Runs the algorithm with the class default `pi` (or `pi` when given).
pub fn run(inst: &Instance, pi: Option<f64>) -> Result<RunReport> {
    run_with(
        inst,
        &AnpOptions {
            pi,
            ..AnpOptions::default()
        },
    )
}

pub fn run_with(inst: &Instance, opts: &AnpOptions) -> Result<RunReport> {
    let theta = inst.theta();
    let pi = match opts.pi {
        Some(p) => p,
        None => default_pi(inst.class(), theta)?,
    };
    let n = inst.inventories();
    let mode = opts.mode.unwrap_or_else(|| Mode::select(n, pi));

    let started = Instant::now();
    let mut state = AnpState::new(pi, mode, inst.capacities(), opts.method)?;
    let mut alloc = Allocation::zeros(inst.horizon(), n);
    let mut opt_sums = Vec::with_capacity(inst.horizon());
    let mut single_gaps = Vec::with_capacity(inst.horizon());
    for t in 0..inst.horizon() {
        let v = state.step(inst.slot(t), inst.allowances()[t])?;
        alloc.a[t] = state.records()[t].iter().map(|r| r.a_hat).collect();
        alloc.v[t] = v;
        opt_sums.push(state.opt_sum());
        single_gaps.push(state.opt_gap_sum());
    }
    alloc.objective = inst.objective(&alloc.v);
    let online_ms = started.elapsed().as_secs_f64() * 1e3;

    let started = Instant::now();
    let off = solve_multi(inst, inst.horizon())?;
    let mut offline_ms = started.elapsed().as_secs_f64() * 1e3;

    let mut report = RunReport::new(
        inst,
        mode.label(),
        pi,
        alloc,
        off.objective,
        off.gap,
        bound(mode, pi),
    );
    report.timings.online_ms = online_ms;

    let records = state.records();
    let horizon = inst.horizon();
    let mut split_excess = f64::NEG_INFINITY;
    let mut share_excess = f64::NEG_INFINITY;
    let mut breach: f64 = 0.0;
    for (t, row) in records.iter().enumerate() {
        let total: f64 = row.iter().map(|r| r.a_hat).sum();
        split_excess = split_excess.max(total - pi * inst.allowances()[t]);
        for (i, r) in row.iter().enumerate() {
            let delta = inst.revenue(i, t).delta();
            let limit = match mode {
                Mode::Small => delta,
                Mode::Large => pi * delta,
            };
            split_excess = split_excess.max(r.a_hat - limit);
            share_excess = share_excess.max(r.v - r.a_hat / pi);
            breach = breach.max(r.breach);
        }
    }
    if horizon == 0 || n == 0 {
        split_excess = 0.0;
        share_excess = 0.0;
    }
    report
        .flags
        .push(Flag::at_most("allowance_split", split_excess, TOL_FEAS));
    report
        .flags
        .push(Flag::at_most("rate_share", share_excess, TOL_FEAS));
    let cap_excess = (0..n)
        .map(|i| report.allocation.used(i) - inst.capacities()[i])
        .fold(f64::NEG_INFINITY, f64::max);
    report.flags.push(Flag::at_most(
        "capacity",
        if n == 0 { 0.0 } else { cap_excess },
        TOL_FEAS,
    ));
    let feas = report.allocation.check(inst);
    report
        .flags
        .push(Flag::at_most("feasibility", feas.max_excess(), TOL_FEAS));
    report
        .flags
        .push(Flag::at_most("eta_identity", state.eta_error(), TOL_ROOT));
    let opt_scale = opt_sums.last().copied().unwrap_or(0.0);
    report.flags.push(Flag::at_most(
        "pursuit_breach",
        breach,
        10.0 * TOL_ROOT * (1.0 + opt_scale),
    ));
    report.flags.push(Flag::at_most(
        "offline_gap",
        off.gap,
        tol_gap(off.objective),
    ));

    if mode == Mode::Large {
        let p_max = inst.p_max();
        let kkt = state.kkt_residuals().iter().copied().fold(0.0, f64::max);
        report
            .flags
            .push(Flag::at_most("kkt_residual", kkt, 1e-6 * p_max));
        report.flags.push(Flag::at_most(
            "psi_monotone",
            state.psi_drop(),
            tol_quad(p_max),
        ));
        report.metrics.insert("alpha".into(), alpha(pi));
        if opts.prefix_check {
            let started = Instant::now();
            let a = alpha(pi);
            // Price-scaled objective loss of the allowance program when stationarity holds to `kkt`.
            let mut kkt_loss = 0.0;
            let mut worst = (f64::NEG_INFINITY, 0.0);
            let mut worst_ratio: f64 = 0.0;
            for t in 0..horizon {
                let rates: f64 = inst.slot(t).iter().map(|g| pi * g.delta()).sum();
                kkt_loss += state.kkt_residuals()[t] * rates;
                let prefix = if t + 1 == horizon {
                    off.clone()
                } else {
                    solve_multi(inst, t + 1)?
                };
                let tol_total =
                    prefix.gap + single_gaps[t] + kkt_loss + 1e-6 * (1.0 + prefix.objective);
                let excess = a * prefix.objective - opt_sums[t];
                if excess - tol_total > worst.0 - worst.1 {
                    worst = (excess, tol_total);
                }
                if prefix.objective > 0.0 {
                    worst_ratio =
                        worst_ratio.max(a * prefix.objective / opt_sums[t].max(f64::MIN_POSITIVE));
                }
            }
            if horizon == 0 {
                worst = (0.0, 1e-6);
            }
            report
                .flags
                .push(Flag::at_most("step_one_approximation", worst.0, worst.1));
            report
                .metrics
                .insert("step_one_worst_ratio".into(), worst_ratio);
            offline_ms += started.elapsed().as_secs_f64() * 1e3;
        }
    }
    report.timings.offline_ms = offline_ms;
    report.metrics.insert("opt_sum".into(), opt_scale);
    report.metrics.insert("inventories".into(), n as f64);
    report.warnings.extend(state.warnings().iter().cloned());
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cr_pursuit;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::E;

    fn lin(s: f64, d: f64) -> RevenueFunction {
        RevenueFunction::linear(s, d).unwrap()
    }

    fn inst(
        p_max: f64,
        caps: Vec<f64>,
        allow: Vec<f64>,
        slots: Vec<Vec<RevenueFunction>>,
    ) -> Instance {
        Instance::new(
            "a",
            RevenueClass::GradientBounded,
            1.0,
            p_max,
            caps,
            allow,
            slots,
        )
        .unwrap()
    }

    #[test]
    fn alpha_anchors() {
        assert_abs_diff_eq!(alpha(1.0), (E - 1.0) / E, epsilon = 1e-12);
        assert!(alpha(1e6) > 1.0 - 1e-6);
        let half = 0.5f64.exp();
        assert_abs_diff_eq!(alpha(2.0), 2.0 * (half - 1.0) / half, epsilon = 1e-12);
        for pi in [1.0, 1.5, 2.0, 3.0, 10.0] {
            let e = (1.0_f64 / pi).exp();
            assert_abs_diff_eq!(alpha(pi) * e / (e - 1.0), pi, epsilon = 1e-12);
            assert_abs_diff_eq!(large_n_bound(pi), e / (e - 1.0), epsilon = 1e-12);
        }
    }

    #[test]
    fn scaling_examples() {
        let g = lin(3.0, 1.0);
        let s = scaled_revenue(&g, 2.5).unwrap();
        assert_eq!(s.delta(), 2.5);
        assert_abs_diff_eq!(s.value(1.0), 3.0, epsilon = 1e-15);
        assert_eq!(scaled_revenue(&g, 1.0).unwrap(), g);
        assert!(scaled_revenue(&g, 0.5).is_err());
        // 1 - e^{-v} as a saturating shape with floor 0, peak 1, width 1.
        let sat = RevenueFunction::saturating(0.0, 1.0, 1.0, 4.0).unwrap();
        let s = scaled_revenue(&sat, 2.0).unwrap();
        assert_abs_diff_eq!(s.value(2.0), 2.0 * (1.0 - (-1.0f64).exp()), epsilon = 1e-12);
    }

    #[test]
    fn dispatch() {
        assert_eq!(Mode::select(3, 3.0), Mode::Small);
        assert_eq!(Mode::select(4, 3.0), Mode::Large);
        assert_abs_diff_eq!(pi_two(E).unwrap(), 4.0, epsilon = 1e-15);
    }

    #[test]
    fn small_mode_reduces_to_pursuit() {
        let gs = [lin(1.0, 0.5), lin(2.0, 0.7), lin(1.5, 0.2), lin(E, 0.9)];
        let one = inst(
            E,
            vec![1.0],
            vec![1.0; 4],
            gs.iter().map(|g| vec![g.clone()]).collect(),
        );
        let a = run(&one, None).unwrap();
        let c = cr_pursuit::run(&one, None).unwrap();
        assert_eq!(a.algorithm, "anp_small");
        for t in 0..4 {
            assert_abs_diff_eq!(a.allocation.v[t][0], c.allocation.v[t][0], epsilon = 0.0);
        }
        assert_abs_diff_eq!(a.online, c.online, epsilon = 1e-15);
    }

    #[test]
    fn two_inventories_small_mode() {
        let th = E * E;
        let slots: Vec<Vec<RevenueFunction>> = (0..4)
            .map(|t| {
                let s = th.powf(t as f64 / 3.0);
                vec![lin(s, 0.5), lin(th / s, 0.5)]
            })
            .collect();
        let i = inst(th, vec![1.0, 1.0], vec![1.0; 4], slots);
        let r = run(&i, None).unwrap();
        assert_eq!(r.algorithm, "anp_small");
        assert_abs_diff_eq!(r.pi, 3.0, epsilon = 1e-12);
        assert!(r.ratio - r.uncertainty <= 3.0 + 1e-9, "{}", r.ratio);
        assert!(r.all_flags_pass(), "{:?}", r.flags);
    }

    #[test]
    fn one_by_one_large_is_greedy() {
        // pi = 1: a_hat = delta, OPT~ = g(delta), so v = delta.
        let i = inst(1.0, vec![2.0], vec![1.0], vec![vec![lin(1.0, 0.8)]]);
        let r = run_with(
            &i,
            &AnpOptions {
                pi: Some(1.0),
                mode: Some(Mode::Large),
                ..AnpOptions::default()
            },
        )
        .unwrap();
        assert_abs_diff_eq!(r.allocation.v[0][0], 0.8, epsilon = 1e-9);
        assert!(r.all_flags_pass(), "{:?}", r.flags);
    }

    #[test]
    fn zero_split_gives_zero() {
        // The whole allowance goes to the steeper inventory.
        let i = inst(
            2.0,
            vec![5.0, 5.0],
            vec![1.0],
            vec![vec![lin(2.0, 1.0), lin(1.0, 1.0)]],
        );
        let r = run_with(
            &i,
            &AnpOptions {
                pi: Some(1.0),
                mode: Some(Mode::Large),
                ..AnpOptions::default()
            },
        )
        .unwrap();
        assert_abs_diff_eq!(r.allocation.a[0][1], 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(r.allocation.v[0][1], 0.0, epsilon = 1e-9);
    }

    #[test]
    fn theta_one_many_inventories() {
        let slots: Vec<Vec<RevenueFunction>> = (0..3).map(|_| vec![lin(1.0, 0.4); 4]).collect();
        let i = inst(1.0, vec![0.5, 0.3, 0.8, 0.2], vec![0.9, 0.6, 1.1], slots);
        let r = run(&i, None).unwrap();
        assert_eq!(r.algorithm, "anp_large");
        assert!(
            r.ratio - r.uncertainty <= E / (E - 1.0) + 1e-9,
            "{}",
            r.ratio
        );
        assert!(r.all_flags_pass(), "{:?}", r.flags);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn large_mode_invariants(
            n in 2usize..5,
            t in 1usize..5,
            theta in 1.0f64..8.0,
            seed in proptest::collection::vec(0.0f64..1.0, 60),
        ) {
            let mut k = 0;
            let mut next = || { k += 1; seed[k % seed.len()] };
            let slots: Vec<Vec<RevenueFunction>> = (0..t)
                .map(|_| (0..n).map(|_| lin(theta.powf(next()), 0.1 + 0.9 * next())).collect())
                .collect();
            let caps = (0..n).map(|_| 0.2 + 2.0 * next()).collect();
            let allow = (0..t)
                .map(|s| {
                    let widest = slots[s].iter().map(|g| g.delta()).fold(0.0, f64::max);
                    widest + 1.5 * next()
                })
                .collect();
            let i = inst(theta, caps, allow, slots);
            let r = run_with(&i, &AnpOptions { mode: Some(Mode::Large), ..AnpOptions::default() }).unwrap();
            prop_assert!(r.all_flags_pass(), "{:?}", r.flags);
            prop_assert!(r.ratio - r.uncertainty <= r.bound + 1e-9);
        }
    }
}
