//! Single-inventory offline problem: `max sum g_k(v_k)` s.t. `sum v_k <= C`, `0 <= v_k <= cap_k`.

use crate::error::{Error, Result};
use crate::model::RevenueFunction;

use super::tol_gap;

/// Optimal single-inventory allocation with its price certificate.
#[derive(Clone, Debug, PartialEq)]
pub struct SingleSolution {
    pub objective: f64,
    pub v: Vec<f64>,
    /// Capacity multiplier `lambda >= 0`.
    pub lambda: f64,
    /// `sum_k h_k(lambda) + C * lambda`.
    pub dual_value: f64,
    pub gap: f64,
}

const MAX_BISECTIONS: usize = 256;

fn responses(items: &[(&RevenueFunction, f64)], price: f64) -> (f64, f64) {
    items.iter().fold((0.0, 0.0), |(lo, hi), (g, cap)| {
        let (l, h) = g.best_response_capped(price, *cap);
        (lo + l, hi + h)
    })
}

fn dual_value(items: &[(&RevenueFunction, f64)], capacity: f64, price: f64) -> f64 {
    items
        .iter()
        .map(|(g, cap)| {
            let (lo, hi) = g.best_response_capped(price, *cap);
            (g.value(lo) - price * lo).max(g.value(hi) - price * hi)
        })
        .sum::<f64>()
        + capacity * price
}

/// Solves the problem where item `k` has revenue `items[k].0` and rate limit
/// `min(items[k].1, delta_k)`.
///
/// Bisection on the capacity price `lambda`, followed by interpolation
/// between the lower and upper best responses so that the capacity is met
/// with equality whenever it binds.
pub fn solve_capped(items: &[(&RevenueFunction, f64)], capacity: f64) -> Result<SingleSolution> {
    if !(capacity >= 0.0) || !capacity.is_finite() {
        return Err(Error::domain("capacity", capacity, 0.0, f64::INFINITY));
    }
    let caps: Vec<f64> = items.iter().map(|(g, c)| c.clamp(0.0, g.delta())).collect();
    let items: Vec<(&RevenueFunction, f64)> = items
        .iter()
        .zip(&caps)
        .map(|((g, _), &c)| (*g, c))
        .collect();

    let total: f64 = caps.iter().sum();
    if total <= capacity {
        let objective = items.iter().map(|(g, c)| g.value(*c)).sum::<f64>();
        let dual = dual_value(&items, capacity, 0.0);
        return Ok(SingleSolution {
            objective,
            v: caps,
            lambda: 0.0,
            dual_value: dual,
            gap: (dual - objective).max(0.0),
        });
    }

    let top = items
        .iter()
        .filter(|(_, c)| *c > 0.0)
        .map(|(g, _)| g.slope_right(0.0))
        .fold(0.0_f64, f64::max);
    // Invariants: responses(lo).hi >= C and responses(hi).lo <= C.
    let mut lo = 0.0;
    let mut hi = top * (1.0 + 1e-12) + f64::MIN_POSITIVE;
    let mut exact = None;
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let (s_lo, s_hi) = responses(&items, mid);
        if s_lo > capacity {
            lo = mid;
        } else if s_hi < capacity {
            hi = mid;
        } else {
            exact = Some(mid);
            break;
        }
    }

    let (lower, upper, lambda): (Vec<f64>, Vec<f64>, f64) = match exact {
        Some(p) => {
            let pairs: Vec<(f64, f64)> = items
                .iter()
                .map(|(g, c)| g.best_response_capped(p, *c))
                .collect();
            (
                pairs.iter().map(|p| p.0).collect(),
                pairs.iter().map(|p| p.1).collect(),
                p,
            )
        }
        None => (
            items
                .iter()
                .map(|(g, c)| g.best_response_capped(hi, *c).0)
                .collect(),
            items
                .iter()
                .map(|(g, c)| g.best_response_capped(lo, *c).1)
                .collect(),
            0.5 * (lo + hi),
        ),
    };
    let s_lower: f64 = lower.iter().sum();
    let s_upper: f64 = upper.iter().sum();
    let frac = if s_upper > s_lower {
        ((capacity - s_lower) / (s_upper - s_lower)).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let v: Vec<f64> = lower
        .iter()
        .zip(&upper)
        .map(|(l, u)| l + frac * (u - l))
        .collect();
    let objective: f64 = items.iter().zip(&v).map(|((g, _), x)| g.value(*x)).sum();

    let dual = if exact.is_some() {
        dual_value(&items, capacity, lambda)
    } else {
        dual_value(&items, capacity, lo)
            .min(dual_value(&items, capacity, hi))
            .min(dual_value(&items, capacity, lambda))
    };
    let gap = (dual - objective).max(0.0);
    if gap > tol_gap(objective) {
        return Err(Error::NonConvergence {
            solver: "solve_single",
            iterations: MAX_BISECTIONS,
            gap,
        });
    }
    Ok(SingleSolution {
        objective,
        v,
        lambda,
        dual_value: dual,
        gap,
    })
}

/// Single-inventory optimum over revenues `gs` (each with its own rate limit).
pub fn solve_single(gs: &[RevenueFunction], capacity: f64) -> Result<SingleSolution> {
    let items: Vec<(&RevenueFunction, f64)> = gs.iter().map(|g| (g, g.delta())).collect();
    solve_capped(&items, capacity)
}

/// Value `G(x, a)` of the single-inventory problem over scaled revenues
/// `history` with historical rate limits `caps`, plus the current slot
/// revenue `current` with rate limit `a`, under capacity `x`.
pub fn solve_g(
    history: &[RevenueFunction],
    caps: &[f64],
    current: &RevenueFunction,
    x: f64,
    a: f64,
) -> Result<f64> {
    if history.len() != caps.len() {
        return Err(Error::InvalidInstance(format!(
            "{} historical functions but {} rate limits",
            history.len(),
            caps.len()
        )));
    }
    if x <= 0.0 {
        return Ok(0.0);
    }
    let mut items: Vec<(&RevenueFunction, f64)> =
        history.iter().zip(caps).map(|(g, c)| (g, *c)).collect();
    items.push((current, a));
    Ok(solve_capped(&items, x)?.objective)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn lin(s: f64, d: f64) -> RevenueFunction {
        RevenueFunction::linear(s, d).unwrap()
    }

    /// Brute force over a fine grid of the first coordinate (two items).
    fn grid_two(g1: &RevenueFunction, g2: &RevenueFunction, cap: f64, steps: usize) -> f64 {
        let mut best = 0.0_f64;
        for k in 0..=steps {
            let v1 = g1.delta() * k as f64 / steps as f64;
            if v1 > cap {
                break;
            }
            let v2 = (cap - v1).min(g2.delta());
            best = best.max(g1.value(v1) + g2.value(v2));
        }
        best
    }

    #[test]
    fn examples() {
        let s = solve_single(&[lin(1.0, 1.0), lin(2.0, 1.0)], 1.0).unwrap();
        assert_abs_diff_eq!(s.objective, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.v[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.v[1], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(
            grid_two(&lin(1.0, 1.0), &lin(2.0, 1.0), 1.0, 10),
            2.0,
            epsilon = 1e-12
        );

        let s = solve_single(&[lin(1.0, 1.0)], 5.0).unwrap();
        assert_eq!(s.objective, 1.0);
        assert_eq!(s.v, vec![1.0]);

        let s = solve_single(&[lin(1.0, 1.0), lin(1.0, 1.0)], 1.0).unwrap();
        assert_abs_diff_eq!(s.objective, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.v[0] + s.v[1], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.v[0], s.v[1], epsilon = 1e-12);
    }

    #[test]
    fn zero_capacity() {
        let s = solve_single(&[lin(1.0, 1.0), lin(2.0, 1.0)], 0.0).unwrap();
        assert_eq!(s.objective, 0.0);
        assert!(solve_single(&[lin(1.0, 1.0)], -1.0).is_err());
    }

    #[test]
    fn solve_g_examples() {
        let g = lin(2.0, 1.0);
        assert_eq!(solve_g(&[], &[], &g, 0.0, 0.5).unwrap(), 0.0);
        assert_eq!(solve_g(&[], &[], &g, 1.0, 0.0).unwrap(), 0.0);
        assert_abs_diff_eq!(
            solve_g(&[], &[], &g, 1.0, 0.5).unwrap(),
            1.0,
            epsilon = 1e-12
        );
        let h = lin(3.0, 1.0);
        assert_abs_diff_eq!(
            solve_g(&[h], &[0.25], &g, 1.0, 1.0).unwrap(),
            0.75 + 1.5,
            epsilon = 1e-12
        );
    }

    #[test]
    fn smooth_matches_grid() {
        let g1 = RevenueFunction::saturating(1.0, 3.0, 0.4, 1.0).unwrap();
        let g2 = RevenueFunction::saturating(1.0, 2.0, 0.8, 1.0).unwrap();
        let s = solve_single(&[g1.clone(), g2.clone()], 1.2).unwrap();
        let oracle = grid_two(&g1, &g2, 1.2, 200_000);
        assert!(s.objective >= oracle - 1e-9);
        assert!(s.objective <= oracle + 3.0 * 1e-5);
        assert!(s.gap <= 1e-9);
    }

    proptest! {
        #[test]
        fn feasible_and_certified(
            slopes in proptest::collection::vec((1.0f64..5.0, 0.0f64..1.0, 0.05f64..1.0), 1..6),
            cap in 0.0f64..3.0,
        ) {
            let gs: Vec<RevenueFunction> = slopes
                .iter()
                .map(|&(p, r, d)| RevenueFunction::piecewise_linear(vec![p, p * r], vec![d * 0.5], d).unwrap())
                .collect();
            let s = solve_single(&gs, cap).unwrap();
            let used: f64 = s.v.iter().sum();
            prop_assert!(used <= cap + 1e-9);
            for (g, v) in gs.iter().zip(&s.v) {
                prop_assert!(*v >= 0.0 && *v <= g.delta() + 1e-12);
            }
            prop_assert!(s.dual_value >= s.objective - 1e-9);
            prop_assert!(s.gap <= 1e-6 * (1.0 + s.objective));
        }

        #[test]
        fn g_is_monotone_and_concave_in_x(
            p in 1.0f64..4.0, q in 1.0f64..4.0, a in 0.0f64..2.0, c in 0.1f64..1.0,
        ) {
            let hist = [RevenueFunction::saturating(1.0, p, 0.3, 2.0).unwrap()];
            let cur = RevenueFunction::linear(q, 2.0).unwrap();
            let xs: Vec<f64> = (0..=8).map(|k| 3.0 * k as f64 / 8.0).collect();
            let gv: Vec<f64> = xs.iter().map(|&x| solve_g(&hist, &[c], &cur, x, a).unwrap()).collect();
            for w in gv.windows(2) {
                prop_assert!(w[1] >= w[0] - 1e-9);
            }
            for w in gv.windows(3) {
                prop_assert!(w[1] - w[0] >= w[2] - w[1] - 1e-8);
            }
            let more = solve_g(&hist, &[c], &cur, 1.0, a + 0.1).unwrap();
            prop_assert!(more >= solve_g(&hist, &[c], &cur, 1.0, a).unwrap() - 1e-9);
        }
    }
}
