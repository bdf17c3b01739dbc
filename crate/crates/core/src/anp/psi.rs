//! The pseudo-cost `Psi(a)` of extra current-slot allowance for one inventory.
//!
//! `Psi(a) = f(C) G(C, a) - 1/(pi C) int_0^C G(x, a) f(x) dx` with
//! `f(x) = e^{x/(pi C)} / (pi C (e^{1/pi} - 1))` and `G(x, a)` the
//! single-inventory optimum over the scaled history with capacity `x` and
//! current rate limit `a`.
//!
//! Two independent evaluations are provided. [`PsiEvaluator::eval_psi`]
//! applies composite Simpson to the formula above with every node solved
//! by [`solve_g`]. [`PsiEvaluator::eval_psi_layered`] integrates by parts to
//! `int_0^C f(x) dG/dx dx` and writes `dG/dx` as the marginal price, which
//! gives `int_0^inf F(min(S_a(p), C)) dp` with `F` the distribution function
//! of `f` and `S_a(p)` the total supply priced above `p`; this is exact for
//! piecewise-linear revenues.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::model::RevenueFunction;
use crate::offline::solve_g;
use crate::quad::{adaptive_simpson, simpson_samples};

/// Initial node count of the composite Simpson rule.
pub const PSI_NODES: usize = 33;
/// Largest node count tried before giving up.
pub const PSI_MAX_NODES: usize = 33 * 1024 + 1;

/// Weight density `f` on `[0, C]`.
pub fn weight_density(x: f64, pi: f64, capacity: f64) -> f64 {
    let pc = pi * capacity;
    (x / pc).exp() / (pc * (1.0 / pi).exp_m1())
}

/// Distribution function of [`weight_density`]; `F(C) = 1`.
pub fn weight_cdf(y: f64, pi: f64, capacity: f64) -> f64 {
    (y / (pi * capacity)).exp_m1() / (1.0 / pi).exp_m1()
}

/// `Psi` for inventory `i` at slot `t`.
#[derive(Clone, Debug)]
pub struct PsiEvaluator {
    pi: f64,
    capacity: f64,
    history: Vec<RevenueFunction>,
    caps: Vec<f64>,
    current: RevenueFunction,
    nodes: usize,
    cache: HashMap<(u64, u64), f64>,
    /// History pieces `(slope, length)` sorted by decreasing slope, when all are linear.
    hist_pieces: Option<Vec<(f64, f64)>>,
}

impl PsiEvaluator {
    /// `history` and `current` are scaled revenues; `caps` are the past allowance splits.
    pub fn new(
        pi: f64,
        capacity: f64,
        history: Vec<RevenueFunction>,
        caps: Vec<f64>,
        current: RevenueFunction,
    ) -> Result<Self> {
        if history.len() != caps.len() {
            return Err(Error::InvalidInstance(format!(
                "{} historical functions but {} allowance splits",
                history.len(),
                caps.len()
            )));
        }
        if !(capacity > 0.0) {
            return Err(Error::domain("capacity", capacity, 0.0, f64::INFINITY));
        }
        let hist_pieces = history
            .iter()
            .zip(&caps)
            .map(|(g, &c)| g.capped(c).linear_pieces())
            .collect::<Option<Vec<_>>>()
            .map(|v| {
                let mut all: Vec<(f64, f64)> =
                    v.into_iter().flatten().filter(|p| p.1 > 0.0).collect();
                all.sort_by(|a, b| b.0.total_cmp(&a.0));
                all
            });
        Ok(PsiEvaluator {
            pi,
            capacity,
            history,
            caps,
            current,
            nodes: PSI_NODES,
            cache: HashMap::new(),
            hist_pieces,
        })
    }

    pub fn pi(&self) -> f64 {
        self.pi
    }

    pub fn capacity(&self) -> f64 {
        self.capacity
    }

    /// Scaled revenue of the current slot.
    pub fn current(&self) -> &RevenueFunction {
        &self.current
    }

    /// Upper bound `pi * delta` of the allowance split.
    pub fn upper(&self) -> f64 {
        self.current.delta()
    }

    /// Node count used by the last successful [`PsiEvaluator::eval_psi`].
    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn is_piecewise_linear(&self) -> bool {
        self.hist_pieces.is_some() && self.current.is_piecewise_linear()
    }

    /// `G(x, a)` with memoization.
    pub fn g_value(&mut self, x: f64, a: f64) -> Result<f64> {
        let key = (x.to_bits(), a.to_bits());
        if let Some(&v) = self.cache.get(&key) {
            return Ok(v);
        }
        let v = solve_g(&self.history, &self.caps, &self.current, x, a)?;
        self.cache.insert(key, v);
        Ok(v)
    }

    fn simpson_psi(&mut self, a: f64, intervals: usize) -> Result<f64> {
        let c = self.capacity;
        let h = c / intervals as f64;
        let mut ys = Vec::with_capacity(intervals + 1);
        for k in 0..=intervals {
            let x = if k == intervals { c } else { k as f64 * h };
            ys.push(self.g_value(x, a)? * weight_density(x, self.pi, c));
        }
        let integral = simpson_samples(&ys, h);
        let g_c = self.g_value(c, a)?;
        Ok(weight_density(c, self.pi, c) * g_c - integral / (self.pi * c))
    }

    /// Composite Simpson evaluation, doubling the node count until two
    /// successive values differ by less than `1e-6 (1 + |Psi|)`.
    pub fn eval_psi(&mut self, a: f64) -> Result<f64> {
        if !(a >= 0.0) {
            return Err(Error::domain("eval_psi", a, 0.0, f64::INFINITY));
        }
        let mut intervals = PSI_NODES - 1;
        let mut prev = self.simpson_psi(a, intervals)?;
        loop {
            intervals *= 2;
            let next = self.simpson_psi(a, intervals)?;
            let change = (next - prev).abs();
            if change < tol_quad(next) {
                self.nodes = intervals + 1;
                return Ok(next);
            }
            if intervals + 1 >= PSI_MAX_NODES {
                return Err(Error::Quadrature {
                    nodes: intervals + 1,
                    change,
                });
            }
            prev = next;
        }
    }

    /// Total best response of the history and the current slot (rate `a`) at `price`.
    pub fn supply(&self, price: f64, a: f64) -> f64 {
        let hist: f64 = self
            .history
            .iter()
            .zip(&self.caps)
            .map(|(g, &c)| g.best_response_capped(price, c).1)
            .sum();
        hist + self.current.best_response_capped(price, a).1
    }

    /// Exact price-layer evaluation.
    pub fn eval_psi_layered(&self, a: f64) -> f64 {
        let a = a.clamp(0.0, self.upper());
        let (pi, c) = (self.pi, self.capacity);
        if let (Some(hist), Some(cur)) = (&self.hist_pieces, self.current.capped(a).linear_pieces())
        {
            let mut pieces: Vec<(f64, f64)> = hist.clone();
            pieces.extend(cur.into_iter().filter(|p| p.1 > 0.0));
            pieces.sort_by(|x, y| y.0.total_cmp(&x.0));
            let mut acc = 0.0;
            let mut filled = 0.0;
            for (k, &(s, len)) in pieces.iter().enumerate() {
                filled += len;
                let next = pieces.get(k + 1).map_or(0.0, |p| p.0);
                if s > next {
                    acc += (s - next) * weight_cdf(filled.min(c), pi, c);
                }
            }
            return acc;
        }
        let mut prices = vec![0.0];
        for (g, &cap) in self.history.iter().zip(&self.caps) {
            g.critical_prices(cap, &mut prices);
        }
        self.current.critical_prices(a, &mut prices);
        prices.retain(|p| p.is_finite() && *p >= 0.0);
        prices.sort_by(f64::total_cmp);
        prices.dedup();
        let top = *prices.last().unwrap_or(&0.0);
        let tol = 1e-12 * (1.0 + top);
        let mut acc = 0.0;
        for w in prices.windows(2) {
            let piece_tol = tol * (w[1] - w[0]) / top.max(f64::MIN_POSITIVE);
            acc += adaptive_simpson(
                |p| weight_cdf(self.supply(p, a).min(c), pi, c),
                w[0],
                w[1],
                piece_tol.max(1e-15),
            );
        }
        acc
    }

    /// `int_0^a Psi(s) ds` by adaptive Simpson on the layered form.
    pub fn psi_integral(&self, a: f64) -> f64 {
        if a <= 0.0 {
            return 0.0;
        }
        let scale = 1.0 + self.current.slope_right(0.0) * a;
        adaptive_simpson(|s| self.eval_psi_layered(s), 0.0, a, 1e-10 * scale)
    }
}

/// Quadrature tolerance `1e-6 (1 + |Psi|)`.
pub fn tol_quad(psi: f64) -> f64 {
    1e-6 * (1.0 + psi.abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn lin(s: f64, d: f64) -> RevenueFunction {
        RevenueFunction::linear(s, d).unwrap()
    }

    #[test]
    fn density_normalized() {
        for pi in [1.0, 1.7, 3.0] {
            let total = crate::quad::simpson(|x| weight_density(x, pi, 2.0), 0.0, 2.0, 200);
            assert_abs_diff_eq!(total, 1.0, epsilon = 1e-10);
            assert_abs_diff_eq!(weight_cdf(2.0, pi, 2.0), 1.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn zero_revenue_and_zero_allowance() {
        let mut ev = PsiEvaluator::new(2.0, 1.0, vec![], vec![], lin(0.0, 2.0)).unwrap();
        for a in [0.0, 0.5, 2.0] {
            assert_abs_diff_eq!(ev.eval_psi(a).unwrap(), 0.0, epsilon = 1e-12);
            assert_abs_diff_eq!(ev.eval_psi_layered(a), 0.0, epsilon = 1e-15);
        }
        let mut ev = PsiEvaluator::new(2.0, 1.0, vec![], vec![], lin(1.0, 2.0)).unwrap();
        assert_abs_diff_eq!(ev.eval_psi(0.0).unwrap(), 0.0, epsilon = 1e-12);
        assert_eq!(ev.eval_psi_layered(0.0), 0.0);
    }

    /// With one linear slot of slope 1 and `a <= C`, `G(x, a) = min(x, a)`
    /// and `Psi(a) = int_0^a f = (e^{a/(pi C)} - 1) / (e^{1/pi} - 1)`.
    #[test]
    fn single_linear_closed_form() {
        let (pi, c) = (2.0, 5.0);
        let mut ev = PsiEvaluator::new(pi, c, vec![], vec![], lin(1.0, 4.0)).unwrap();
        for a in [0.3, 1.0, 2.5, 4.0] {
            let exact = (a / (pi * c)).exp_m1() / (1.0 / pi).exp_m1();
            assert_abs_diff_eq!(ev.eval_psi_layered(a), exact, epsilon = 1e-14);
            let quad = ev.eval_psi(a).unwrap();
            assert!(
                (quad - exact).abs() <= 10.0 * tol_quad(exact),
                "a={a}: {quad} vs {exact}"
            );
        }
    }

    #[test]
    fn routes_agree_with_history() {
        let hist = vec![
            RevenueFunction::piecewise_linear(vec![3.0, 1.5], vec![0.4], 1.0)
                .unwrap()
                .scaled(2.0),
            lin(2.0, 0.7).scaled(2.0),
        ];
        let cur = RevenueFunction::piecewise_linear(vec![2.5, 1.0], vec![0.3], 0.9)
            .unwrap()
            .scaled(2.0);
        let mut ev = PsiEvaluator::new(2.0, 1.2, hist, vec![1.1, 0.6], cur).unwrap();
        assert!(ev.is_piecewise_linear());
        for a in [0.0, 0.2, 0.6, 1.0, 1.8] {
            let l = ev.eval_psi_layered(a);
            let q = ev.eval_psi(a).unwrap();
            assert!((l - q).abs() <= 10.0 * tol_quad(l), "a={a}: {l} vs {q}");
        }
    }

    #[test]
    fn smooth_routes_agree() {
        let hist = vec![RevenueFunction::saturating(1.0, 3.0, 0.4, 1.0)
            .unwrap()
            .scaled(1.5)];
        let cur = RevenueFunction::saturating(1.0, 2.0, 0.3, 0.8)
            .unwrap()
            .scaled(1.5);
        let mut ev = PsiEvaluator::new(1.5, 0.9, hist, vec![0.8], cur).unwrap();
        assert!(!ev.is_piecewise_linear());
        for a in [0.1, 0.5, 1.2] {
            let l = ev.eval_psi_layered(a);
            let q = ev.eval_psi(a).unwrap();
            assert!((l - q).abs() <= 10.0 * tol_quad(l), "a={a}: {l} vs {q}");
        }
    }

    #[test]
    fn integral_of_linear_case() {
        let (pi, c) = (1.0, 3.0);
        let ev = PsiEvaluator::new(pi, c, vec![], vec![], lin(1.0, 2.0)).unwrap();
        // int_0^a (e^{s/3} - 1)/(e - 1) ds = (3 (e^{a/3} - 1) - a)/(e - 1)
        let a: f64 = 1.5;
        let exact = (3.0 * (a / 3.0).exp_m1() - a) / 1f64.exp_m1();
        assert_abs_diff_eq!(ev.psi_integral(a), exact, epsilon = 1e-9);
    }

    proptest! {
        #[test]
        fn nondecreasing_in_a(
            slopes in proptest::collection::vec((1.0f64..4.0, 0.1f64..1.0, 0.1f64..1.0), 0..4),
            cur in (1.0f64..4.0, 0.1f64..1.0),
            pi in 1.0f64..3.0,
            c in 0.2f64..2.0,
        ) {
            let hist: Vec<RevenueFunction> = slopes.iter().map(|&(s, d, _)| lin(s, d).scaled(pi)).collect();
            let caps: Vec<f64> = slopes.iter().map(|&(_, d, f)| f * d * pi).collect();
            let ev = PsiEvaluator::new(pi, c, hist, caps, lin(cur.0, cur.1).scaled(pi)).unwrap();
            let u = ev.upper();
            let mut prev = ev.eval_psi_layered(0.0);
            prop_assert!(prev >= 0.0);
            for k in 1..=20 {
                let v = ev.eval_psi_layered(u * k as f64 / 20.0);
                prop_assert!(v >= prev - 1e-12);
                prev = v;
            }
        }
    }
}
