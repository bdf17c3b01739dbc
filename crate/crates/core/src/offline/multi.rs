//! Multi-inventory offline problem.
//!
//! The default solver is a primal log-barrier interior-point method.
//! Piecewise-linear revenues are split into one bounded variable per linear
//! piece, smooth revenues keep a single variable. The Newton system is
//! `diag(d) + U W U^T` with `U` the inventory/slot incidence, factored
//! densely by Cholesky.
//! Optimality is certified by evaluating the exact dual function at the
//! barrier multipliers.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{Instance, RevenueFunction};

use super::{dual_objective, tol_gap, OfflineSolution};

/// Algorithm used by [`solve_multi_with`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum DualMethod {
    /// Log-barrier interior point with a dual certificate.
    #[default]
    Barrier,
    /// Projected subgradient descent on the dual with averaged multipliers.
    Subgradient,
}

/// Subgradient tuning.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SubgradientOptions {
    /// Initial step `s0`; `None` means `p_max`.
    pub s0: Option<f64>,
    pub max_iters: usize,
    /// Primal recovery period, in iterations.
    pub recover_every: usize,
}

impl Default for SubgradientOptions {
    fn default() -> Self {
        SubgradientOptions {
            s0: None,
            max_iters: 20_000,
            recover_every: 50,
        }
    }
}

/// Full subgradient trajectory summary.
#[derive(Clone, Debug)]
pub struct SubgradientRun {
    pub solution: OfflineSolution,
    /// `(dual value at iterate, best primal value so far)` per iteration.
    pub trace: Vec<(f64, f64)>,
    pub converged: bool,
}

/// `OPT_t`: optimum over the first `upto` slots.
pub fn solve_multi(inst: &Instance, upto: usize) -> Result<OfflineSolution> {
    solve_multi_with(inst, upto, DualMethod::Barrier)
}

pub fn solve_multi_with(
    inst: &Instance,
    upto: usize,
    method: DualMethod,
) -> Result<OfflineSolution> {
    check_upto(inst, upto)?;
    match method {
        DualMethod::Barrier => barrier(inst, upto),
        DualMethod::Subgradient => {
            let run = solve_subgradient(inst, upto, SubgradientOptions::default())?;
            if run.converged {
                Ok(run.solution)
            } else {
                Err(Error::NonConvergence {
                    solver: "dual subgradient",
                    iterations: run.solution.iterations,
                    gap: run.solution.gap,
                })
            }
        }
    }
}

fn check_upto(inst: &Instance, upto: usize) -> Result<()> {
    if upto == 0 || upto > inst.horizon() {
        return Err(Error::domain(
            "upto",
            upto as f64,
            1.0,
            inst.horizon() as f64,
        ));
    }
    Ok(())
}

enum Objective<'a> {
    Linear(f64),
    Smooth(&'a RevenueFunction),
}

struct Var<'a> {
    cell: usize,
    upper: f64,
    obj: Objective<'a>,
    row: Option<usize>,
    col: Option<usize>,
}

impl Var<'_> {
    fn value(&self, y: f64) -> f64 {
        match self.obj {
            Objective::Linear(s) => s * y,
            Objective::Smooth(g) => g.value(y),
        }
    }

    fn slope(&self, y: f64) -> f64 {
        match self.obj {
            Objective::Linear(s) => s,
            Objective::Smooth(g) => g.slope_right(y),
        }
    }

    fn curvature(&self, y: f64) -> f64 {
        match self.obj {
            Objective::Linear(_) => 0.0,
            Objective::Smooth(g) => g.curvature(y),
        }
    }
}

struct Barrier<'a> {
    vars: Vec<Var<'a>>,
    /// Right-hand sides of the coupling constraints (rows first, then columns).
    rhs: Vec<f64>,
    members: Vec<Vec<usize>>,
}

impl Barrier<'_> {
    fn slacks(&self, y: &[f64]) -> Vec<f64> {
        self.members
            .iter()
            .zip(&self.rhs)
            .map(|(m, r)| r - m.iter().map(|&j| y[j]).sum::<f64>())
            .collect()
    }

    fn objective(&self, y: &[f64]) -> f64 {
        self.vars.iter().zip(y).map(|(v, &x)| v.value(x)).sum()
    }

    fn merit(&self, y: &[f64], mu: f64) -> f64 {
        let mut acc = self.objective(y);
        for (v, &x) in self.vars.iter().zip(y) {
            if x <= 0.0 || x >= v.upper {
                return f64::NEG_INFINITY;
            }
            acc += mu * (x.ln() + (v.upper - x).ln());
        }
        for s in self.slacks(y) {
            if s <= 0.0 {
                return f64::NEG_INFINITY;
            }
            acc += mu * s.ln();
        }
        acc
    }

    fn constraint_count(&self) -> usize {
        2 * self.vars.len() + self.rhs.len()
    }

    /// Newton direction and decrement for the barrier problem at `y`.
    fn newton(&self, y: &[f64], mu: f64) -> (Vec<f64>, f64) {
        let n = self.vars.len();
        let s = self.slacks(y);
        let mut grad = vec![0.0; n];
        let mut d = vec![0.0; n];
        for (j, v) in self.vars.iter().enumerate() {
            let x = y[j];
            let r = v.upper - x;
            let mut gj = v.slope(x) + mu / x - mu / r;
            if let Some(c) = v.row {
                gj -= mu / s[c];
            }
            if let Some(c) = v.col {
                gj -= mu / s[c];
            }
            grad[j] = gj;
            d[j] = -v.curvature(x) + mu / (x * x) + mu / (r * r);
        }
        let mut h = DMatrix::<f64>::from_diagonal(&DVector::from_vec(d));
        for (c, m) in self.members.iter().enumerate() {
            let w = mu / (s[c] * s[c]);
            for &a in m {
                for &b in m {
                    h[(a, b)] += w;
                }
            }
        }
        let rhs = DVector::from_vec(grad.clone());
        let sol = match h.clone().cholesky() {
            Some(ch) => ch.solve(&rhs),
            None => match h.lu().solve(&rhs) {
                Some(x) => x,
                None => return (vec![0.0; n], 0.0),
            },
        };
        let step: Vec<f64> = sol.iter().copied().collect();
        let dec = grad.iter().zip(&step).map(|(g, st)| g * st).sum::<f64>();
        (step, dec)
    }

    fn max_step(&self, y: &[f64], dy: &[f64]) -> f64 {
        let mut t = f64::INFINITY;
        for (j, v) in self.vars.iter().enumerate() {
            if dy[j] < 0.0 {
                t = t.min(-y[j] / dy[j]);
            } else if dy[j] > 0.0 {
                t = t.min((v.upper - y[j]) / dy[j]);
            }
        }
        let s = self.slacks(y);
        for (c, m) in self.members.iter().enumerate() {
            let ds: f64 = -m.iter().map(|&j| dy[j]).sum::<f64>();
            if ds < 0.0 {
                t = t.min(-s[c] / ds);
            }
        }
        t
    }
}

fn barrier(inst: &Instance, upto: usize) -> Result<OfflineSolution> {
    let n = inst.inventories();
    let mut row_sum = vec![0.0; n];
    let mut col_sum = vec![0.0; upto];
    for t in 0..upto {
        for i in 0..n {
            let d = inst.revenue(i, t).delta();
            row_sum[i] += d;
            col_sum[t] += d;
        }
    }
    let mut rhs = Vec::new();
    let mut row_idx = vec![None; n];
    for i in 0..n {
        if row_sum[i] > inst.capacities()[i] {
            row_idx[i] = Some(rhs.len());
            rhs.push(inst.capacities()[i]);
        }
    }
    let mut col_idx = vec![None; upto];
    for t in 0..upto {
        if col_sum[t] > inst.allowances()[t] {
            col_idx[t] = Some(rhs.len());
            rhs.push(inst.allowances()[t]);
        }
    }

    let mut vars = Vec::new();
    for t in 0..upto {
        for i in 0..n {
            let g = inst.revenue(i, t);
            if g.delta() <= 0.0 {
                continue;
            }
            let cell = t * n + i;
            let (row, col) = (row_idx[i], col_idx[t]);
            match g.linear_pieces() {
                Some(pieces) => {
                    for (slope, len) in pieces {
                        if len > 0.0 {
                            vars.push(Var {
                                cell,
                                upper: len,
                                obj: Objective::Linear(slope),
                                row,
                                col,
                            });
                        }
                    }
                }
                None => vars.push(Var {
                    cell,
                    upper: g.delta(),
                    obj: Objective::Smooth(g),
                    row,
                    col,
                }),
            }
        }
    }
    let mut members = vec![Vec::new(); rhs.len()];
    for (j, v) in vars.iter().enumerate() {
        if let Some(c) = v.row {
            members[c].push(j);
        }
        if let Some(c) = v.col {
            members[c].push(j);
        }
    }
    let prob = Barrier { vars, rhs, members };

    // Strictly feasible start: a common fraction of every upper bound.
    let mut rho: f64 = 0.5;
    for (c, m) in prob.members.iter().enumerate() {
        let full: f64 = m.iter().map(|&j| prob.vars[j].upper).sum();
        if full > 0.0 {
            rho = rho.min(0.5 * prob.rhs[c] / full);
        }
    }
    let mut y: Vec<f64> = prob.vars.iter().map(|v| rho * v.upper).collect();
    if prob.rhs.iter().any(|&r| r <= 0.0) {
        // A zero capacity or allowance pins its members to zero.
        return pinned_solution(inst, upto);
    }

    let m = prob.constraint_count().max(1) as f64;
    let scale = 1.0
        + prob
            .vars
            .iter()
            .map(|v| v.slope(0.0).abs() * v.upper)
            .sum::<f64>();
    let mut mu = scale / m;
    let mut iterations = 0;
    let mut best: Option<OfflineSolution> = None;
    let mut stalled = 0;
    loop {
        for _ in 0..200 {
            if prob.vars.is_empty() {
                break;
            }
            let (dy, dec) = prob.newton(&y, mu);
            iterations += 1;
            if !(dec > 1e-12 * mu) {
                break;
            }
            let tmax = prob.max_step(&y, &dy);
            let mut step = (0.99 * tmax).min(1.0);
            let base = prob.merit(&y, mu);
            let mut moved = false;
            for _ in 0..60 {
                let cand: Vec<f64> = y.iter().zip(&dy).map(|(a, b)| a + step * b).collect();
                if prob.merit(&cand, mu) >= base + 0.25 * step * dec {
                    y = cand;
                    moved = true;
                    break;
                }
                step *= 0.5;
            }
            if !moved {
                break;
            }
        }
        let cand = certificate(inst, upto, &prob, &y, mu, &row_idx, &col_idx, iterations);
        let done = cand.gap <= 1e-9 * (1.0 + cand.objective.abs());
        if best.as_ref().is_none_or(|b| cand.gap < b.gap) {
            best = Some(cand);
            stalled = 0;
        } else {
            stalled += 1;
        }
        // Past the point where the Newton matrix is numerically singular the
        // certificate only gets worse.
        if done || stalled >= 2 || m * mu <= 1e-13 * scale || prob.vars.is_empty() {
            break;
        }
        mu *= 0.1;
    }
    let best = best.expect("at least one centering stage");
    if best.gap > tol_gap(best.objective) {
        return Err(Error::NonConvergence {
            solver: "barrier",
            iterations,
            gap: best.gap,
        });
    }
    Ok(best)
}

#[allow(clippy::too_many_arguments)]
fn certificate(
    inst: &Instance,
    upto: usize,
    prob: &Barrier<'_>,
    y: &[f64],
    mu: f64,
    row_idx: &[Option<usize>],
    col_idx: &[Option<usize>],
    iterations: usize,
) -> OfflineSolution {
    let n = inst.inventories();
    let slacks = prob.slacks(y);
    let mut alpha: Vec<f64> = row_idx
        .iter()
        .map(|c| c.map_or(0.0, |c| mu / slacks[c]))
        .collect();
    let mut beta: Vec<f64> = col_idx
        .iter()
        .map(|c| c.map_or(0.0, |c| mu / slacks[c]))
        .collect();
    polish_dual(inst, upto, &mut alpha, &mut beta, POLISH_SWEEPS);
    let mut flat = vec![0.0; upto * n];
    for (j, v) in prob.vars.iter().enumerate() {
        flat[v.cell] += y[j];
    }
    let mut v: Vec<Vec<f64>> = (0..upto)
        .map(|t| {
            (0..n)
                .map(|i| flat[t * n + i].min(inst.revenue(i, t).delta()))
                .collect()
        })
        .collect();
    repair(inst, upto, &mut v);
    let objective = inst.prefix(upto).objective(&v);
    let dual_value = dual_objective(inst, upto, &alpha, &beta);
    OfflineSolution {
        objective,
        v,
        alpha,
        beta,
        dual_value,
        gap: (dual_value - objective).max(0.0),
        iterations,
    }
}

const POLISH_SWEEPS: usize = 30;

/// Smallest `x >= 0` with `rhs >= sum_k lo_k(x + shift_k)`, the exact
/// minimizer of one coordinate of the dual.
fn coordinate_min(cells: &[(&RevenueFunction, f64)], rhs: f64, top: f64) -> f64 {
    let low = |x: f64| -> f64 { cells.iter().map(|(g, s)| g.best_response(x + s).0).sum() };
    if rhs >= low(0.0) {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0, top.max(f64::MIN_POSITIVE));
    while rhs < low(hi) {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if rhs >= low(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Block-coordinate descent on the dual; every step lowers (or keeps) the dual value.
fn polish_dual(inst: &Instance, upto: usize, alpha: &mut [f64], beta: &mut [f64], sweeps: usize) {
    let n = inst.inventories();
    let top = inst.p_max();
    let mut best = dual_objective(inst, upto, alpha, beta);
    for _ in 0..sweeps {
        for i in 0..n {
            let cells: Vec<(&RevenueFunction, f64)> =
                (0..upto).map(|t| (inst.revenue(i, t), beta[t])).collect();
            alpha[i] = coordinate_min(&cells, inst.capacities()[i], top);
        }
        for t in 0..upto {
            let cells: Vec<(&RevenueFunction, f64)> =
                (0..n).map(|i| (inst.revenue(i, t), alpha[i])).collect();
            beta[t] = coordinate_min(&cells, inst.allowances()[t], top);
        }
        let d = dual_objective(inst, upto, alpha, beta);
        if d >= best * (1.0 - 1e-15) - 1e-300 {
            break;
        }
        best = d;
    }
}

fn pinned_solution(inst: &Instance, upto: usize) -> Result<OfflineSolution> {
    // Remove inventories with zero capacity and slots with zero allowance, then solve the rest.
    let n = inst.inventories();
    let keep_i: Vec<bool> = inst.capacities().iter().map(|&c| c > 0.0).collect();
    let keep_t: Vec<bool> = inst.allowances()[..upto].iter().map(|&a| a > 0.0).collect();
    let slots: Vec<Vec<RevenueFunction>> = (0..upto)
        .map(|t| {
            (0..n)
                .map(|i| {
                    let g = inst.revenue(i, t);
                    if keep_i[i] && keep_t[t] {
                        g.clone()
                    } else {
                        g.capped(0.0)
                    }
                })
                .collect()
        })
        .collect();
    let caps: Vec<f64> = inst
        .capacities()
        .iter()
        .map(|&c| if c > 0.0 { c } else { 1.0 })
        .collect();
    let allow: Vec<f64> = inst.allowances()[..upto]
        .iter()
        .map(|&a| if a > 0.0 { a } else { 1.0 })
        .collect();
    let relaxed = Instance::new(
        inst.id(),
        inst.class(),
        inst.p_min(),
        inst.p_max(),
        caps,
        allow,
        slots,
    )?;
    let mut sol = barrier(&relaxed, upto)?;
    for i in 0..n {
        if !keep_i[i] {
            sol.alpha[i] = inst.p_max();
        }
    }
    for t in 0..upto {
        if !keep_t[t] {
            sol.beta[t] = inst.p_max();
        }
    }
    let v = sol.v.clone();
    finish(
        inst,
        upto,
        v,
        sol.alpha,
        sol.beta,
        sol.iterations,
        DualMethod::Barrier,
    )
}

/// Scales down rows and columns that exceed their limits.
pub(crate) fn repair(inst: &Instance, upto: usize, v: &mut [Vec<f64>]) {
    let n = inst.inventories();
    for t in 0..upto {
        let s: f64 = v[t].iter().sum();
        let a = inst.allowances()[t];
        if s > a {
            let f = if s > 0.0 { a / s } else { 0.0 };
            v[t].iter_mut().for_each(|x| *x *= f);
        }
    }
    for i in 0..n {
        let s: f64 = (0..upto).map(|t| v[t][i]).sum();
        let c = inst.capacities()[i];
        if s > c {
            let f = if s > 0.0 { c / s } else { 0.0 };
            (0..upto).for_each(|t| v[t][i] *= f);
        }
    }
}

fn finish(
    inst: &Instance,
    upto: usize,
    mut v: Vec<Vec<f64>>,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    iterations: usize,
    method: DualMethod,
) -> Result<OfflineSolution> {
    repair(inst, upto, &mut v);
    let objective = inst.prefix(upto).objective(&v);
    let dual_value = dual_objective(inst, upto, &alpha, &beta);
    let gap = (dual_value - objective).max(0.0);
    if gap > tol_gap(objective) {
        return Err(Error::NonConvergence {
            solver: match method {
                DualMethod::Barrier => "barrier",
                DualMethod::Subgradient => "dual subgradient",
            },
            iterations,
            gap,
        });
    }
    Ok(OfflineSolution {
        objective,
        v,
        alpha,
        beta,
        dual_value,
        gap,
        iterations,
    })
}

/// Recovers a feasible primal point from multipliers: lower best responses,
/// then remaining allowance of priced slots filled in index order from the
/// tie slack, then proportional repair.
fn recover(inst: &Instance, upto: usize, alpha: &[f64], beta: &[f64]) -> Vec<Vec<f64>> {
    let n = inst.inventories();
    let mut v = vec![vec![0.0; n]; upto];
    for t in 0..upto {
        let mut room = inst.allowances()[t];
        let mut spare = vec![0.0; n];
        for i in 0..n {
            let (lo, hi) = inst.revenue(i, t).best_response(alpha[i] + beta[t]);
            v[t][i] = lo;
            spare[i] = hi - lo;
            room -= lo;
        }
        for i in 0..n {
            if room <= 0.0 {
                break;
            }
            let add = spare[i].min(room);
            v[t][i] += add;
            room -= add;
        }
    }
    repair(inst, upto, &mut v);
    v
}

/// Projected subgradient descent on the dual with `s0 / sqrt(k)` steps and
/// Polyak averaging.
pub fn solve_subgradient(
    inst: &Instance,
    upto: usize,
    opts: SubgradientOptions,
) -> Result<SubgradientRun> {
    check_upto(inst, upto)?;
    let n = inst.inventories();
    let s0 = opts.s0.unwrap_or(inst.p_max());
    let mut alpha = vec![0.0; n];
    let mut beta = vec![0.0; upto];
    let mut avg_a = vec![0.0; n];
    let mut avg_b = vec![0.0; upto];
    let mut best_dual = f64::INFINITY;
    let mut best_dual_at = (alpha.clone(), beta.clone());
    let mut best_primal = f64::NEG_INFINITY;
    let mut best_v = vec![vec![0.0; n]; upto];
    let mut trace = Vec::with_capacity(opts.max_iters);
    let mut converged = false;
    let mut iterations = 0;
    let every = opts.recover_every.max(1);

    for k in 1..=opts.max_iters {
        iterations = k;
        let mut ga: Vec<f64> = inst.capacities().to_vec();
        let mut gb: Vec<f64> = inst.allowances()[..upto].to_vec();
        let mut dual = 0.0;
        for t in 0..upto {
            for i in 0..n {
                let g = inst.revenue(i, t);
                let price = alpha[i] + beta[t];
                let (_, hi) = g.best_response(price);
                dual += g.value(hi) - price * hi;
                ga[i] -= hi;
                gb[t] -= hi;
            }
        }
        dual += alpha
            .iter()
            .zip(inst.capacities())
            .map(|(a, c)| a * c)
            .sum::<f64>();
        dual += beta
            .iter()
            .zip(inst.allowances())
            .map(|(b, a)| b * a)
            .sum::<f64>();
        if dual < best_dual {
            best_dual = dual;
            best_dual_at = (alpha.clone(), beta.clone());
        }

        let w = 1.0 / k as f64;
        avg_a
            .iter_mut()
            .zip(&alpha)
            .for_each(|(m, a)| *m += w * (a - *m));
        avg_b
            .iter_mut()
            .zip(&beta)
            .for_each(|(m, b)| *m += w * (b - *m));

        if k % every == 0 || k == 1 || k == opts.max_iters {
            for (a, b) in [(&avg_a, &avg_b), (&alpha, &beta)] {
                let cand = recover(inst, upto, a, b);
                let val = inst.prefix(upto).objective(&cand);
                if val > best_primal {
                    best_primal = val;
                    best_v = cand;
                }
            }
            if best_dual - best_primal <= tol_gap(best_primal) {
                trace.push((dual, best_primal));
                converged = true;
                break;
            }
        }
        trace.push((dual, best_primal));

        let step = s0 / (k as f64).sqrt();
        alpha
            .iter_mut()
            .zip(&ga)
            .for_each(|(a, g)| *a = (*a - step * g).max(0.0));
        beta.iter_mut()
            .zip(&gb)
            .for_each(|(b, g)| *b = (*b - step * g).max(0.0));
    }

    let (alpha, beta) = best_dual_at;
    let objective = best_primal;
    let dual_value = best_dual;
    Ok(SubgradientRun {
        solution: OfflineSolution {
            objective,
            v: best_v,
            alpha,
            beta,
            dual_value,
            gap: (dual_value - objective).max(0.0),
            iterations,
        },
        trace,
        converged,
    })
}
