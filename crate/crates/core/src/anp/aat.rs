//! Per-slot allowance allocation
//! `max sum_i (g~_i(a_i) - int_0^{a_i} Psi_i)` s.t. `sum a_i <= R`, `0 <= a_i <= U_i`.
//!
//! The objective is separable and concave (`Psi_i` is nondecreasing), so the
//! optimum is a water level: `a_i(beta)` is the largest `a` whose marginal
//! `g~'_i(a) - Psi_i(a)` still reaches the allowance price `beta`.

use crate::error::{Error, Result};

use super::psi::PsiEvaluator;

const BISECT_REL: f64 = 1e-12;

/// Solver for the allowance program.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum AatMethod {
    /// Bisection on the allowance price with exact per-inventory water levels.
    #[default]
    WaterFilling,
    /// Projected gradient ascent with step `1/L` onto the capped simplex.
    ProjectedGradient,
}

/// Allowance split with its optimality evidence.
#[derive(Clone, Debug, PartialEq)]
pub struct AatSolution {
    pub a: Vec<f64>,
    /// Allowance price.
    pub beta: f64,
    /// Worst violation of the KKT conditions, in price units.
    pub kkt_residual: f64,
    pub objective: f64,
    pub iterations: usize,
}

/// Worst-case marginal values just right and left of `a`.
fn marginals(ev: &PsiEvaluator, a: f64) -> (f64, f64) {
    let g = ev.current();
    let psi = ev.eval_psi_layered(a);
    let right = g.slope_right(a) - psi;
    let left = if a <= 0.0 {
        right
    } else {
        g.slope_left(a) - psi
    };
    (right, left)
}

fn water_level(ev: &PsiEvaluator, beta: f64, lo: f64, hi: f64) -> f64 {
    let u = ev.upper();
    if u <= 0.0 {
        return 0.0;
    }
    let ok = |a: f64| marginals(ev, a).1 >= beta;
    if !ok(lo.max(0.0)) {
        return lo.max(0.0);
    }
    if ok(hi) {
        return hi;
    }
    let (mut l, mut h) = (lo.max(0.0), hi);
    while h - l > BISECT_REL * u {
        let mid = 0.5 * (l + h);
        if ok(mid) {
            l = mid;
        } else {
            h = mid;
        }
    }
    l
}

/// Objective `sum g~(a) - int_0^a Psi` of a split.
pub fn aat_objective(evs: &[PsiEvaluator], a: &[f64]) -> f64 {
    evs.iter()
        .zip(a)
        .map(|(ev, &x)| ev.current().value(x) - ev.psi_integral(x))
        .sum()
}

/// Relative width of the neighbourhood in which one-sided marginals are taken.
pub const KKT_SPREAD: f64 = 1e-9;

/// KKT residual of `(a, beta)`: stationarity and complementary slackness.
///
/// One-sided marginals are read at `a_i +- KKT_SPREAD * U_i`, so a split that
/// lands within rounding of a kink of `g~` is judged by the kink's subgradient.
pub fn kkt_residual(evs: &[PsiEvaluator], a: &[f64], beta: f64, budget: f64) -> f64 {
    let mut worst: f64 = 0.0;
    for (ev, &x) in evs.iter().zip(a) {
        let u = ev.upper();
        if u <= 0.0 {
            continue;
        }
        let eps = KKT_SPREAD * u;
        if x < u - eps {
            worst = worst.max(marginals(ev, x + eps).0 - beta);
        }
        if x > eps {
            worst = worst.max(beta - marginals(ev, x - eps).1);
        }
    }
    let total: f64 = a.iter().sum();
    if beta > 0.0 {
        let top = evs
            .iter()
            .map(|e| e.current().slope_right(0.0))
            .fold(0.0, f64::max);
        worst = worst.max(top * (budget - total).abs() / budget.max(f64::MIN_POSITIVE));
    }
    worst
}

/// Solves the allowance program for total budget `budget = pi * A_t`.
pub fn solve_aat(evs: &[PsiEvaluator], budget: f64, method: AatMethod) -> Result<AatSolution> {
    match method {
        AatMethod::WaterFilling => water_filling(evs, budget),
        AatMethod::ProjectedGradient => projected_gradient(evs, budget, 5000),
    }
}

fn water_filling(evs: &[PsiEvaluator], budget: f64) -> Result<AatSolution> {
    let n = evs.len();
    let uppers: Vec<f64> = evs.iter().map(|e| e.upper()).collect();
    let free: Vec<f64> = evs
        .iter()
        .zip(&uppers)
        .map(|(e, &u)| water_level(e, 0.0, 0.0, u))
        .collect();
    let mut iterations = 1;
    let (a, beta) = if free.iter().sum::<f64>() <= budget {
        (free, 0.0)
    } else {
        let top = evs
            .iter()
            .map(|e| e.current().slope_right(0.0))
            .fold(0.0, f64::max);
        // a(lo) sums above the budget, a(hi) at or below.
        let (mut lo, mut hi) = (0.0, top);
        let mut a_lo = free;
        let mut a_hi = vec![0.0; n];
        while hi - lo > BISECT_REL * (1.0 + top) {
            let mid = 0.5 * (lo + hi);
            let a_mid: Vec<f64> = (0..n)
                .map(|i| water_level(&evs[i], mid, a_hi[i], a_lo[i]))
                .collect();
            iterations += 1;
            if a_mid.iter().sum::<f64>() > budget {
                lo = mid;
                a_lo = a_mid;
            } else {
                hi = mid;
                a_hi = a_mid;
            }
        }
        let s_lo: f64 = a_lo.iter().sum();
        let s_hi: f64 = a_hi.iter().sum();
        let frac = if s_lo > s_hi {
            ((budget - s_hi) / (s_lo - s_hi)).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let a: Vec<f64> = a_hi
            .iter()
            .zip(&a_lo)
            .map(|(h, l)| h + frac * (l - h))
            .collect();
        (a, 0.5 * (lo + hi))
    };
    let a: Vec<f64> = a
        .iter()
        .zip(&uppers)
        .map(|(x, u)| x.clamp(0.0, *u))
        .collect();
    Ok(AatSolution {
        kkt_residual: kkt_residual(evs, &a, beta, budget),
        objective: aat_objective(evs, &a),
        a,
        beta,
        iterations,
    })
}

/// Euclidean projection onto `{sum a <= budget, 0 <= a <= upper}` by bisection on the shift.
pub fn project_capped_simplex(y: &[f64], upper: &[f64], budget: f64) -> Vec<f64> {
    let clip = |shift: f64| -> Vec<f64> {
        y.iter()
            .zip(upper)
            .map(|(v, u)| (v - shift).clamp(0.0, *u))
            .collect()
    };
    let base = clip(0.0);
    if base.iter().sum::<f64>() <= budget {
        return base;
    }
    let mut lo = 0.0;
    let mut hi = y.iter().fold(0.0_f64, |m, v| m.max(*v));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if clip(mid).iter().sum::<f64>() > budget {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    clip(hi)
}

fn gradient(evs: &[PsiEvaluator], a: &[f64]) -> Vec<f64> {
    evs.iter()
        .zip(a)
        .map(|(ev, &x)| {
            let (right, left) = marginals(ev, x);
            if x >= ev.upper() {
                left
            } else {
                right
            }
        })
        .collect()
}

fn projected_gradient(evs: &[PsiEvaluator], budget: f64, max_iters: usize) -> Result<AatSolution> {
    let n = evs.len();
    let p_max = evs
        .iter()
        .map(|e| e.current().slope_right(0.0))
        .fold(0.0, f64::max);
    let tol = 1e-6 * p_max.max(f64::MIN_POSITIVE);
    let uppers: Vec<f64> = evs.iter().map(|e| e.upper()).collect();

    // L: largest sampled curvature of g~ plus the finite-difference slope of Psi.
    let mut lip: f64 = 0.0;
    for ev in evs {
        let u = ev.upper();
        if u <= 0.0 {
            continue;
        }
        let h = u / 64.0;
        let mut prev = ev.eval_psi_layered(0.0);
        for k in 1..=64 {
            let x = k as f64 * h;
            let psi = ev.eval_psi_layered(x);
            lip = lip.max((psi - prev) / h + ev.current().curvature(x).abs());
            prev = psi;
        }
    }
    let step = 1.0 / lip.max(1e-12);

    let mut a = project_capped_simplex(&vec![0.0; n], &uppers, budget);
    let mut best = (f64::INFINITY, a.clone());
    for k in 1..=max_iters {
        let g = gradient(evs, &a);
        let trial: Vec<f64> = a.iter().zip(&g).map(|(x, gi)| x + step * gi).collect();
        let next = project_capped_simplex(&trial, &uppers, budget);
        let residual = next
            .iter()
            .zip(&a)
            .map(|(p, x)| (p - x).abs())
            .fold(0.0, f64::max)
            / step;
        if residual < best.0 {
            best = (residual, a.clone());
        }
        if residual <= tol {
            let beta = allowance_price(evs, &next, budget);
            return Ok(AatSolution {
                kkt_residual: kkt_residual(evs, &next, beta, budget),
                objective: aat_objective(evs, &next),
                a: next,
                beta,
                iterations: k,
            });
        }
        a = next;
    }
    Err(Error::NonConvergence {
        solver: "allowance projected gradient",
        iterations: max_iters,
        gap: best.0,
    })
}

/// Price implied by interior components of a split (0 when the budget is slack).
fn allowance_price(evs: &[PsiEvaluator], a: &[f64], budget: f64) -> f64 {
    let total: f64 = a.iter().sum();
    if total < budget * (1.0 - 1e-9) {
        return 0.0;
    }
    let interior: Vec<f64> = evs
        .iter()
        .zip(a)
        .filter(|(e, &x)| x > 0.0 && x < e.upper())
        .map(|(e, &x)| marginals(e, x).0)
        .collect();
    if interior.is_empty() {
        0.0
    } else {
        (interior.iter().sum::<f64>() / interior.len() as f64).max(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::RevenueFunction;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn ev(pi: f64, c: f64, g: RevenueFunction) -> PsiEvaluator {
        PsiEvaluator::new(pi, c, vec![], vec![], g.scaled(pi)).unwrap()
    }

    #[test]
    fn single_inventory_saturates() {
        // g~' = 2 > Psi everywhere on [0, pi delta] when C is large.
        let e = ev(1.0, 100.0, RevenueFunction::linear(2.0, 1.0).unwrap());
        let s = solve_aat(std::slice::from_ref(&e), 0.6, AatMethod::WaterFilling).unwrap();
        assert_abs_diff_eq!(s.a[0], 0.6, epsilon = 1e-12);
        let s = solve_aat(&[e], 5.0, AatMethod::WaterFilling).unwrap();
        assert_abs_diff_eq!(s.a[0], 1.0, epsilon = 1e-12);
        assert!(s.kkt_residual <= 1e-6 * 2.0);
    }

    #[test]
    fn identical_inventories_split_evenly() {
        let g = RevenueFunction::linear(1.0, 1.0).unwrap();
        let evs = vec![ev(2.0, 1.0, g.clone()), ev(2.0, 1.0, g)];
        let s = solve_aat(&evs, 2.0 * 0.8, AatMethod::WaterFilling).unwrap();
        assert_abs_diff_eq!(s.a[0], s.a[1], epsilon = 1e-12);
        assert_abs_diff_eq!(s.a[0] + s.a[1], 1.6, epsilon = 1e-12);
    }

    #[test]
    fn concentrates_on_higher_slope() {
        let evs = vec![
            ev(1.0, 50.0, RevenueFunction::linear(2.0, 1.0).unwrap()),
            ev(1.0, 50.0, RevenueFunction::linear(1.0, 1.0).unwrap()),
        ];
        let s = solve_aat(&evs, 1.0, AatMethod::WaterFilling).unwrap();
        // 1-D grid over a1 with a2 = 1 - a1.
        let mut best = (f64::NEG_INFINITY, 0.0);
        for k in 0..=1000 {
            let a1 = k as f64 / 1000.0;
            let v = aat_objective(&evs, &[a1, 1.0 - a1]);
            if v > best.0 {
                best = (v, a1);
            }
        }
        assert_abs_diff_eq!(s.a[0], 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(best.1, 1.0, epsilon = 1e-12);
        assert!(s.objective >= best.0 - 1e-9);
    }

    #[test]
    fn projection_is_exact() {
        let p = project_capped_simplex(&[0.5, 1.0, -1.0], &[1.0, 1.0, 1.0], 1.0);
        assert_abs_diff_eq!(p[0], 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(p[1], 0.75, epsilon = 1e-12);
        assert_eq!(p[2], 0.0);
        // The cap binds before the budget.
        let p = project_capped_simplex(&[0.5, 2.0, -1.0], &[1.0, 1.0, 1.0], 1.0);
        assert_abs_diff_eq!(p[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p[1], 1.0, epsilon = 1e-12);
        assert_eq!(
            project_capped_simplex(&[0.2, 0.3], &[1.0, 1.0], 1.0),
            vec![0.2, 0.3]
        );
    }

    #[test]
    fn gradient_matches_water_filling_on_smooth() {
        let hist = vec![RevenueFunction::saturating(1.0, 3.0, 0.5, 1.0)
            .unwrap()
            .scaled(1.5)];
        let evs = vec![
            PsiEvaluator::new(
                1.5,
                1.0,
                hist.clone(),
                vec![1.2],
                RevenueFunction::saturating(1.0, 2.5, 0.4, 1.0)
                    .unwrap()
                    .scaled(1.5),
            )
            .unwrap(),
            PsiEvaluator::new(
                1.5,
                0.7,
                hist,
                vec![0.3],
                RevenueFunction::saturating(1.0, 2.0, 0.6, 1.0)
                    .unwrap()
                    .scaled(1.5),
            )
            .unwrap(),
        ];
        let w = solve_aat(&evs, 1.5, AatMethod::WaterFilling).unwrap();
        let g = solve_aat(&evs, 1.5, AatMethod::ProjectedGradient).unwrap();
        assert!(w.kkt_residual <= 1e-6 * 3.0, "{}", w.kkt_residual);
        assert!(
            (w.objective - g.objective).abs() <= 1e-6,
            "{} vs {}",
            w.objective,
            g.objective
        );
    }

    proptest! {
        #[test]
        fn feasible_and_stationary(
            cells in proptest::collection::vec((1.0f64..3.0, 0.0f64..1.0, 0.1f64..1.0, 0.2f64..2.0), 1..5),
            budget in 0.05f64..2.0,
            pi in 1.0f64..3.0,
        ) {
            let evs: Vec<PsiEvaluator> = cells.iter().map(|&(s, r, d, c)| {
                let g = RevenueFunction::piecewise_linear(vec![s, 1.0 + r * (s - 1.0)], vec![0.5 * d], d).unwrap();
                let h = RevenueFunction::linear(s, d).unwrap().scaled(pi);
                PsiEvaluator::new(pi, c, vec![h], vec![0.5 * d * pi], g.scaled(pi)).unwrap()
            }).collect();
            let s = solve_aat(&evs, pi * budget, AatMethod::WaterFilling).unwrap();
            prop_assert!(s.a.iter().sum::<f64>() <= pi * budget * (1.0 + 1e-12) + 1e-12);
            for (e, x) in evs.iter().zip(&s.a) {
                prop_assert!(*x >= 0.0 && *x <= e.upper());
            }
            prop_assert!(s.kkt_residual <= 1e-6 * 3.0, "residual {}", s.kkt_residual);
        }
    }
}
