//! One-slot concave revenue functions.
//!
//! Every function is a closed-form [`Shape`] evaluated on `[0, delta]`,
//! optionally rescaled as `scale * shape(v / scale)`. Derivatives, best
//! responses to a price and inverses are exact for the piecewise-linear
//! shapes and closed-form or bisection-based for the smooth ones.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::TOL_ROOT;

/// Relative slack accepted on the right end of the domain.
const DOMAIN_SLACK: f64 = 1e-9;

/// Closed-form concave shape with `g(0) = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum Shape {
    /// `g(v) = slope * v`.
    Linear { slope: f64 },
    /// Concave piecewise-linear: `slopes[k]` applies between
    /// `breakpoints[k-1]` and `breakpoints[k]`; the last slope extends to infinity.
    PiecewiseLinear {
        slopes: Vec<f64>,
        breakpoints: Vec<f64>,
    },
    /// `g(v) = floor*v + (peak - floor)*width*(1 - exp(-v/width))`, so
    /// `g'(0) = peak` and `g'` decays towards `floor`.
    Saturating { floor: f64, peak: f64, width: f64 },
    /// Price-elastic revenue `(price - elasticity * v^exponent) * v`.
    PriceElastic {
        price: f64,
        elasticity: f64,
        exponent: f64,
    },
}

/// Class a function (or instance) belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RevenueClass {
    /// Concave with gradients in `[p_min, p_max]`.
    GradientBounded,
    /// `(p - q(v)) v` with convex increasing `q`, `p` in `[p_min, p_max]`.
    PriceElastic,
}

impl RevenueClass {
    pub fn label(self) -> &'static str {
        match self {
            RevenueClass::GradientBounded => "gradient_bounded",
            RevenueClass::PriceElastic => "price_elastic",
        }
    }
}

fn finite(x: f64) -> bool {
    x.is_finite()
}

impl Shape {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidFunction(msg));
        match self {
            Shape::Linear { slope } => {
                if !finite(*slope) || *slope < 0.0 {
                    return bad(format!("linear slope must be finite and >= 0, got {slope}"));
                }
            }
            Shape::PiecewiseLinear {
                slopes,
                breakpoints,
            } => {
                if slopes.is_empty() {
                    return bad("piecewise-linear needs at least one slope".into());
                }
                if breakpoints.len() + 1 != slopes.len() {
                    return bad(format!(
                        "{} slopes need {} breakpoints, got {}",
                        slopes.len(),
                        slopes.len() - 1,
                        breakpoints.len()
                    ));
                }
                if slopes.iter().any(|s| !finite(*s) || *s < 0.0) {
                    return bad("piecewise-linear slopes must be finite and >= 0".into());
                }
                if slopes.windows(2).any(|w| w[1] > w[0]) {
                    return bad("piecewise-linear slopes must be nonincreasing (concavity)".into());
                }
                let mut prev = 0.0;
                for &b in breakpoints {
                    if !finite(b) || b <= prev {
                        return bad("breakpoints must be positive and strictly increasing".into());
                    }
                    prev = b;
                }
            }
            Shape::Saturating { floor, peak, width } => {
                if !(finite(*floor) && finite(*peak) && finite(*width)) {
                    return bad("saturating parameters must be finite".into());
                }
                if *floor < 0.0 || *peak < *floor || *width <= 0.0 {
                    return bad(format!(
                        "saturating needs 0 <= floor <= peak and width > 0 (floor {floor}, peak {peak}, width {width})"
                    ));
                }
            }
            Shape::PriceElastic {
                price,
                elasticity,
                exponent,
            } => {
                if !(finite(*price) && finite(*elasticity) && finite(*exponent)) {
                    return bad("price-elastic parameters must be finite".into());
                }
                if *price <= 0.0 || *elasticity < 0.0 || *exponent < 1.0 {
                    return bad(format!(
                        "price-elastic needs price > 0, elasticity >= 0, exponent >= 1 (got {price}, {elasticity}, {exponent})"
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn class(&self) -> RevenueClass {
        match self {
            Shape::PriceElastic { .. } => RevenueClass::PriceElastic,
            _ => RevenueClass::GradientBounded,
        }
    }

    pub fn is_piecewise_linear(&self) -> bool {
        matches!(self, Shape::Linear { .. } | Shape::PiecewiseLinear { .. })
    }

    /// Largest point where the shape is still nondecreasing (infinite unless price-elastic).
    pub fn increasing_until(&self) -> f64 {
        match *self {
            Shape::PriceElastic {
                price,
                elasticity,
                exponent,
            } if elasticity > 0.0 => (price / (elasticity * (exponent + 1.0))).powf(1.0 / exponent),
            _ => f64::INFINITY,
        }
    }

    fn value(&self, z: f64) -> f64 {
        match self {
            Shape::Linear { slope } => slope * z,
            Shape::PiecewiseLinear {
                slopes,
                breakpoints,
            } => {
                let mut acc = 0.0;
                let mut start = 0.0;
                for (k, &s) in slopes.iter().enumerate() {
                    let end = breakpoints.get(k).copied().unwrap_or(f64::INFINITY);
                    if z <= end {
                        return acc + s * (z - start);
                    }
                    acc += s * (end - start);
                    start = end;
                }
                acc
            }
            Shape::Saturating { floor, peak, width } => {
                floor * z + (peak - floor) * width * -(-z / width).exp_m1()
            }
            Shape::PriceElastic {
                price,
                elasticity,
                exponent,
            } => (price - elasticity * z.powf(*exponent)) * z,
        }
    }

    fn segment_index(breakpoints: &[f64], z: f64, right: bool) -> usize {
        if right {
            breakpoints.partition_point(|&b| b <= z)
        } else {
            breakpoints.partition_point(|&b| b < z)
        }
    }

    fn slope(&self, z: f64, right: bool) -> f64 {
        match self {
            Shape::Linear { slope } => *slope,
            Shape::PiecewiseLinear {
                slopes,
                breakpoints,
            } => slopes[Self::segment_index(breakpoints, z, right)],
            Shape::Saturating { floor, peak, width } => floor + (peak - floor) * (-z / width).exp(),
            Shape::PriceElastic {
                price,
                elasticity,
                exponent,
            } => price - elasticity * (exponent + 1.0) * z.powf(*exponent),
        }
    }

    fn curvature(&self, z: f64) -> f64 {
        match self {
            Shape::Linear { .. } | Shape::PiecewiseLinear { .. } => 0.0,
            Shape::Saturating { floor, peak, width } => {
                -(peak - floor) / width * (-z / width).exp()
            }
            Shape::PriceElastic {
                elasticity,
                exponent,
                ..
            } => {
                if *exponent == 1.0 {
                    -2.0 * elasticity
                } else {
                    -elasticity * exponent * (exponent + 1.0) * z.powf(exponent - 1.0)
                }
            }
        }
    }

    /// Maximizers `[lo, hi]` of `value(z) - price*z` over `[0, cap]`.
    fn best_response(&self, price: f64, cap: f64) -> (f64, f64) {
        let linear = |s: f64| {
            if s > price {
                (cap, cap)
            } else if s < price {
                (0.0, 0.0)
            } else {
                (0.0, cap)
            }
        };
        match self {
            Shape::Linear { slope } => linear(*slope),
            Shape::PiecewiseLinear {
                slopes,
                breakpoints,
            } => {
                let end_after = |count: usize| -> f64 {
                    if count == 0 {
                        0.0
                    } else if count >= slopes.len() {
                        cap
                    } else {
                        breakpoints[count - 1].min(cap)
                    }
                };
                let above = slopes.iter().take_while(|&&s| s > price).count();
                let at_least = slopes.iter().take_while(|&&s| s >= price).count();
                (end_after(above), end_after(at_least))
            }
            Shape::Saturating { floor, peak, width } => {
                if peak == floor {
                    return linear(*peak);
                }
                if price >= *peak {
                    (0.0, 0.0)
                } else if price <= *floor {
                    (cap, cap)
                } else {
                    let z = -width * ((price - floor) / (peak - floor)).ln();
                    let z = z.clamp(0.0, cap);
                    (z, z)
                }
            }
            Shape::PriceElastic {
                price: p,
                elasticity,
                exponent,
            } => {
                if *elasticity == 0.0 {
                    return linear(*p);
                }
                if price >= *p {
                    (0.0, 0.0)
                } else {
                    let z = ((p - price) / (elasticity * (exponent + 1.0))).powf(1.0 / exponent);
                    let z = z.min(cap);
                    (z, z)
                }
            }
        }
    }

    /// Prices at which the best response is not smooth in the price.
    fn critical_prices(&self, cap: f64, out: &mut Vec<f64>) {
        match self {
            Shape::Linear { slope } => out.push(*slope),
            Shape::PiecewiseLinear {
                slopes,
                breakpoints,
            } => {
                out.push(slopes[0]);
                for (k, &b) in breakpoints.iter().enumerate() {
                    if b >= cap {
                        break;
                    }
                    out.push(slopes[k + 1]);
                }
            }
            Shape::Saturating { peak, .. } => {
                out.push(*peak);
                out.push(self.slope(cap, false));
            }
            Shape::PriceElastic { price, .. } => {
                out.push(*price);
                out.push(self.slope(cap, false));
            }
        }
    }

    /// Smallest `z` in `[0, cap]` with `value(z) >= target`; caller guarantees
    /// `0 <= target <= value(cap)`.
    fn inverse(&self, target: f64, cap: f64) -> f64 {
        if target <= 0.0 {
            return 0.0;
        }
        match self {
            Shape::Linear { slope } => (target / slope).min(cap),
            Shape::PiecewiseLinear {
                slopes,
                breakpoints,
            } => {
                let mut acc = 0.0;
                let mut start = 0.0;
                for (k, &s) in slopes.iter().enumerate() {
                    let end = breakpoints
                        .get(k)
                        .copied()
                        .unwrap_or(f64::INFINITY)
                        .min(cap);
                    let gain = s * (end - start);
                    if acc + gain >= target {
                        return if s > 0.0 {
                            (start + (target - acc) / s).min(end)
                        } else {
                            start
                        };
                    }
                    acc += gain;
                    start = end;
                    if start >= cap {
                        break;
                    }
                }
                cap
            }
            _ => {
                let (mut lo, mut hi) = (0.0_f64, cap);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    if self.value(mid) >= target {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                hi
            }
        }
    }

    /// Linear pieces `(slope, length)` on `[0, cap]` for piecewise-linear shapes.
    fn linear_pieces(&self, cap: f64) -> Option<Vec<(f64, f64)>> {
        match self {
            Shape::Linear { slope } => Some(vec![(*slope, cap)]),
            Shape::PiecewiseLinear {
                slopes,
                breakpoints,
            } => {
                let mut pieces = Vec::with_capacity(slopes.len());
                let mut start = 0.0;
                for (k, &s) in slopes.iter().enumerate() {
                    let end = breakpoints
                        .get(k)
                        .copied()
                        .unwrap_or(f64::INFINITY)
                        .min(cap);
                    if end > start {
                        pieces.push((s, end - start));
                    }
                    start = end;
                    if start >= cap {
                        break;
                    }
                }
                Some(pieces)
            }
            _ => None,
        }
    }
}

/// A revenue function `g` restricted to `[0, delta]`.
#[derive(Clone, Debug, PartialEq)]
pub struct RevenueFunction {
    shape: Shape,
    delta: f64,
    scale: f64,
    clipped_from: Option<f64>,
}

impl RevenueFunction {
    /// Builds `shape` on `[0, delta]`. Price-elastic functions have `delta`
    /// clipped to the revenue-maximizing point; the original value is kept
    /// in [`RevenueFunction::clipped_from`].
    pub fn new(shape: Shape, delta: f64) -> Result<Self> {
        shape.validate()?;
        if !delta.is_finite() || delta < 0.0 {
            return Err(Error::InvalidFunction(format!(
                "rate limit must be finite and >= 0, got {delta}"
            )));
        }
        let top = shape.increasing_until();
        let (delta, clipped_from) = if delta > top {
            (top, Some(delta))
        } else {
            (delta, None)
        };
        Ok(RevenueFunction {
            shape,
            delta,
            scale: 1.0,
            clipped_from,
        })
    }

    pub fn linear(slope: f64, delta: f64) -> Result<Self> {
        Self::new(Shape::Linear { slope }, delta)
    }

    pub fn piecewise_linear(slopes: Vec<f64>, breakpoints: Vec<f64>, delta: f64) -> Result<Self> {
        Self::new(
            Shape::PiecewiseLinear {
                slopes,
                breakpoints,
            },
            delta,
        )
    }

    pub fn saturating(floor: f64, peak: f64, width: f64, delta: f64) -> Result<Self> {
        Self::new(Shape::Saturating { floor, peak, width }, delta)
    }

    pub fn price_elastic(price: f64, elasticity: f64, exponent: f64, delta: f64) -> Result<Self> {
        Self::new(
            Shape::PriceElastic {
                price,
                elasticity,
                exponent,
            },
            delta,
        )
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    /// Rate limit `delta`.
    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn clipped_from(&self) -> Option<f64> {
        self.clipped_from
    }

    pub fn class(&self) -> RevenueClass {
        self.shape.class()
    }

    pub fn is_piecewise_linear(&self) -> bool {
        self.shape.is_piecewise_linear()
    }

    /// `scale * g(v / scale)` with the rate limit multiplied by `scale`.
    pub fn scaled(&self, factor: f64) -> Self {
        RevenueFunction {
            shape: self.shape.clone(),
            delta: self.delta * factor,
            scale: self.scale * factor,
            clipped_from: self.clipped_from.map(|d| d * factor),
        }
    }

    /// Same function with the rate limit lowered to `min(delta, limit)`.
    pub fn capped(&self, limit: f64) -> Self {
        RevenueFunction {
            delta: self.delta.min(limit.max(0.0)),
            ..self.clone()
        }
    }

    fn check_domain(&self, what: &'static str, v: f64) -> Result<f64> {
        if v.is_nan() || v < 0.0 || v > self.delta * (1.0 + DOMAIN_SLACK) + f64::MIN_POSITIVE {
            return Err(Error::domain(what, v, 0.0, self.delta));
        }
        Ok(v.min(self.delta))
    }

    /// `g(v)`; errors outside `[0, delta]`.
    pub fn eval(&self, v: f64) -> Result<f64> {
        let v = self.check_domain("eval", v)?;
        Ok(self.value(v))
    }

    /// `g(v)` with `v` clamped to the domain.
    pub fn value(&self, v: f64) -> f64 {
        let v = v.clamp(0.0, self.delta);
        self.scale * self.shape.value(v / self.scale)
    }

    /// One-sided derivative: right derivative below `delta`, left derivative at `delta`.
    pub fn derivative(&self, v: f64) -> Result<f64> {
        let v = self.check_domain("derivative", v)?;
        if v >= self.delta && self.delta > 0.0 {
            Ok(self.slope_left(v))
        } else {
            Ok(self.slope_right(v))
        }
    }

    /// Supergradient interval `[g'_+(v), g'_-(v)]`; collapses to one side at the domain ends.
    pub fn supergradient(&self, v: f64) -> Result<(f64, f64)> {
        let v = self.check_domain("supergradient", v)?;
        if v <= 0.0 {
            let s = self.slope_right(0.0);
            Ok((s, s))
        } else if v >= self.delta {
            let s = self.slope_left(v);
            Ok((s, s))
        } else {
            Ok((self.slope_right(v), self.slope_left(v)))
        }
    }

    pub fn slope_right(&self, v: f64) -> f64 {
        self.shape.slope(v.max(0.0) / self.scale, true)
    }

    pub fn slope_left(&self, v: f64) -> f64 {
        if v <= 0.0 {
            return self.slope_right(0.0);
        }
        self.shape.slope(v / self.scale, false)
    }

    /// Second derivative of the smooth shapes (zero for piecewise-linear).
    pub fn curvature(&self, v: f64) -> f64 {
        self.shape.curvature(v.clamp(0.0, self.delta) / self.scale) / self.scale
    }

    /// Unique `v` in `[0, delta]` with `|g(v) - y| <= tol_root` (smallest one on flat parts).
    pub fn inverse_eval(&self, y: f64) -> Result<f64> {
        let top = self.value(self.delta);
        if y.is_nan() || y < -TOL_ROOT {
            return Err(Error::domain("inverse_eval", y, 0.0, top));
        }
        if y > top * (1.0 + TOL_ROOT) + TOL_ROOT {
            return Err(Error::InfeasibleTarget {
                target: y,
                max: top,
            });
        }
        let y = y.clamp(0.0, top);
        if y >= top {
            return Ok(self.shape.inverse(y / self.scale, self.delta / self.scale) * self.scale)
                .map(|v: f64| v.min(self.delta));
        }
        Ok(
            (self.shape.inverse(y / self.scale, self.delta / self.scale) * self.scale)
                .min(self.delta),
        )
    }

    /// Maximizers `[lo, hi]` of `g(v) - price*v` over `[0, cap]`, `cap <= delta`.
    pub fn best_response_capped(&self, price: f64, cap: f64) -> (f64, f64) {
        let cap = cap.clamp(0.0, self.delta);
        if cap == 0.0 {
            return (0.0, 0.0);
        }
        let (lo, hi) = self.shape.best_response(price, cap / self.scale);
        ((lo * self.scale).min(cap), (hi * self.scale).min(cap))
    }

    pub fn best_response(&self, price: f64) -> (f64, f64) {
        self.best_response_capped(price, self.delta)
    }

    /// Concave conjugate `h(price) = max_{0<=v<=delta} g(v) - price*v`.
    pub fn conjugate(&self, price: f64) -> f64 {
        let (_, hi) = self.best_response(price);
        let (lo, _) = self.best_response(price);
        (self.value(hi) - price * hi).max(self.value(lo) - price * lo)
    }

    /// Prices where the capped best response has a kink or jump.
    pub fn critical_prices(&self, cap: f64, out: &mut Vec<f64>) {
        let cap = cap.clamp(0.0, self.delta);
        if cap == 0.0 {
            return;
        }
        self.shape.critical_prices(cap / self.scale, out);
    }

    /// Linear pieces `(slope, length)` of a piecewise-linear function on `[0, delta]`.
    pub fn linear_pieces(&self) -> Option<Vec<(f64, f64)>> {
        self.shape.linear_pieces(self.delta / self.scale).map(|p| {
            p.into_iter()
                .map(|(s, len)| (s, len * self.scale))
                .collect()
        })
    }

    /// Sampled class check on `samples + 1` evenly spaced points.
    ///
    /// Verifies `g(0) = 0`, nondecreasing first differences, nonpositive second
    /// differences, and for the gradient-bounded class `g' in [p_min, p_max]`.
    /// For the price-elastic class the shape must be price-elastic (or linear)
    /// with its price in `[p_min, p_max]`.
    pub fn check_class(
        &self,
        class: RevenueClass,
        p_min: f64,
        p_max: f64,
        samples: usize,
    ) -> std::result::Result<(), String> {
        let tol = 1e-9 * (1.0 + p_max);
        if self.value(0.0).abs() > tol {
            return Err(format!("g(0) = {} != 0", self.value(0.0)));
        }
        let n = samples.max(2);
        let h = self.delta / n as f64;
        if h > 0.0 {
            let pts: Vec<f64> = (0..=n).map(|k| self.value(k as f64 * h)).collect();
            for k in 0..n {
                if pts[k + 1] - pts[k] < -tol * h {
                    return Err(format!("g decreasing near v = {}", k as f64 * h));
                }
            }
            for k in 1..n {
                let d1 = pts[k] - pts[k - 1];
                let d2 = pts[k + 1] - pts[k];
                if d2 - d1 > tol * h.max(1e-12) + 1e-12 * pts[k].abs() {
                    return Err(format!("g not concave near v = {}", k as f64 * h));
                }
            }
        }
        match class {
            RevenueClass::GradientBounded => {
                if self.class() != RevenueClass::GradientBounded {
                    return Err("price-elastic shape in gradient-bounded class".into());
                }
                for k in 0..=n {
                    let v = k as f64 * h;
                    let s = if k == n {
                        self.slope_left(v)
                    } else {
                        self.slope_right(v)
                    };
                    if s < p_min - tol || s > p_max + tol {
                        return Err(format!("g'({v}) = {s} outside [{p_min}, {p_max}]"));
                    }
                }
            }
            RevenueClass::PriceElastic => {
                let price = match self.shape {
                    Shape::PriceElastic { price, .. } => price,
                    Shape::Linear { slope } => slope,
                    _ => return Err("shape is not of the form (p - q(v)) v".into()),
                };
                if price < p_min - tol || price > p_max + tol {
                    return Err(format!("price {price} outside [{p_min}, {p_max}]"));
                }
                if self.slope_left(self.delta) < -tol {
                    return Err("g decreasing before delta".into());
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn pl_3_1() -> RevenueFunction {
        RevenueFunction::piecewise_linear(vec![3.0, 1.0], vec![1.0], 2.0).unwrap()
    }

    #[test]
    fn eval_examples() {
        let g = RevenueFunction::linear(2.0, 1.0).unwrap();
        assert_eq!(g.eval(0.5).unwrap(), 1.0);
        assert_eq!(g.eval(0.0).unwrap(), 0.0);
        let pe = RevenueFunction::price_elastic(2.0, 1.0, 1.0, 1.0).unwrap();
        assert_abs_diff_eq!(pe.eval(0.5).unwrap(), 0.75, epsilon = 1e-15);
        assert_eq!(pe.eval(0.0).unwrap(), 0.0);
        assert_eq!(pl_3_1().eval(0.0).unwrap(), 0.0);
    }

    #[test]
    fn eval_rejects_out_of_domain() {
        let g = RevenueFunction::linear(2.0, 1.0).unwrap();
        assert!(matches!(g.eval(-0.1), Err(Error::Domain { .. })));
        assert!(matches!(g.eval(1.1), Err(Error::Domain { .. })));
        assert!(g.eval(1.0 + 1e-12).is_ok());
        assert!(g.derivative(2.0).is_err());
    }

    #[test]
    fn inverse_examples() {
        let g = RevenueFunction::linear(2.0, 1.0).unwrap();
        assert_eq!(g.inverse_eval(1.0).unwrap(), 0.5);
        assert_eq!(g.inverse_eval(0.0).unwrap(), 0.0);
        // 3*1 + 1*0.5 = 3.5
        assert_abs_diff_eq!(pl_3_1().inverse_eval(3.5).unwrap(), 1.5, epsilon = 1e-15);
        assert!(matches!(
            g.inverse_eval(2.5),
            Err(Error::InfeasibleTarget { .. })
        ));
        let s = RevenueFunction::saturating(1.0, 3.0, 0.7, 2.0).unwrap();
        let v = s.inverse_eval(2.0).unwrap();
        assert!((s.value(v) - 2.0).abs() <= TOL_ROOT);
    }

    #[test]
    fn derivative_examples() {
        let g = RevenueFunction::linear(2.0, 1.0).unwrap();
        for v in [0.0, 0.3, 1.0] {
            assert_eq!(g.derivative(v).unwrap(), 2.0);
        }
        let (p_min, p_max) = (1.0, 4.0);
        let s = RevenueFunction::saturating(p_min, p_max, 1.0, 3.0).unwrap();
        assert_eq!(s.derivative(0.0).unwrap(), p_max);
        let pe = RevenueFunction::price_elastic(2.0, 1.0, 1.0, 1.0).unwrap();
        assert_abs_diff_eq!(pe.derivative(0.5).unwrap(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn supergradient_at_kink() {
        let g = pl_3_1();
        assert_eq!(g.supergradient(1.0).unwrap(), (1.0, 3.0));
        assert_eq!(g.supergradient(0.0).unwrap(), (3.0, 3.0));
        assert_eq!(g.supergradient(2.0).unwrap(), (1.0, 1.0));
        assert_eq!(g.derivative(1.0).unwrap(), 1.0);
    }

    #[test]
    fn price_elastic_clips_delta() {
        // argmax of (2 - v) v is v = 1
        let pe = RevenueFunction::price_elastic(2.0, 1.0, 1.0, 3.0).unwrap();
        assert_abs_diff_eq!(pe.delta(), 1.0, epsilon = 1e-15);
        assert_eq!(pe.clipped_from(), Some(3.0));
        let ok = RevenueFunction::price_elastic(2.0, 1.0, 1.0, 0.5).unwrap();
        assert_eq!(ok.clipped_from(), None);
    }

    #[test]
    fn scaled_closed_form() {
        let g = RevenueFunction::saturating(0.0, 1.0, 1.0, 1.0).unwrap();
        let gt = g.scaled(2.0);
        assert_eq!(gt.delta(), 2.0);
        assert_abs_diff_eq!(
            gt.value(2.0),
            2.0 * (1.0 - (-1.0f64).exp()),
            epsilon = 1e-15
        );
        let l = RevenueFunction::linear(3.0, 0.5).unwrap().scaled(4.0);
        assert_eq!(l.delta(), 2.0);
        assert_eq!(l.value(1.0), 3.0);
        assert_eq!(
            RevenueFunction::linear(3.0, 0.5).unwrap().scaled(1.0),
            RevenueFunction::linear(3.0, 0.5).unwrap()
        );
    }

    #[test]
    fn best_response_piecewise() {
        let g = pl_3_1();
        assert_eq!(g.best_response(4.0), (0.0, 0.0));
        assert_eq!(g.best_response(3.0), (0.0, 1.0));
        assert_eq!(g.best_response(2.0), (1.0, 1.0));
        assert_eq!(g.best_response(1.0), (1.0, 2.0));
        assert_eq!(g.best_response(0.5), (2.0, 2.0));
        assert_eq!(g.best_response_capped(0.5, 0.25), (0.25, 0.25));
        assert_eq!(g.conjugate(2.0), 1.0);
    }

    #[test]
    fn best_response_smooth_matches_derivative() {
        let s = RevenueFunction::saturating(1.0, 3.0, 0.5, 2.0).unwrap();
        let (lo, hi) = s.best_response(2.0);
        assert_eq!(lo, hi);
        assert_abs_diff_eq!(s.slope_right(lo), 2.0, epsilon = 1e-12);
        let pe = RevenueFunction::price_elastic(3.0, 0.5, 1.5, 10.0).unwrap();
        let (v, _) = pe.best_response(1.0);
        assert_abs_diff_eq!(pe.slope_right(v), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn invalid_shapes() {
        assert!(RevenueFunction::linear(-1.0, 1.0).is_err());
        assert!(RevenueFunction::piecewise_linear(vec![1.0, 2.0], vec![1.0], 2.0).is_err());
        assert!(RevenueFunction::piecewise_linear(vec![2.0, 1.0], vec![], 2.0).is_err());
        assert!(RevenueFunction::saturating(2.0, 1.0, 1.0, 1.0).is_err());
        assert!(RevenueFunction::price_elastic(1.0, 1.0, 0.5, 1.0).is_err());
        assert!(RevenueFunction::linear(1.0, f64::NAN).is_err());
    }

    #[test]
    fn class_checks() {
        let s = RevenueFunction::saturating(1.0, 3.0, 0.5, 2.0).unwrap();
        assert!(s
            .check_class(RevenueClass::GradientBounded, 1.0, 3.0, 1000)
            .is_ok());
        assert!(s
            .check_class(RevenueClass::GradientBounded, 1.5, 3.0, 1000)
            .is_err());
        let pe = RevenueFunction::price_elastic(2.0, 1.0, 2.0, 5.0).unwrap();
        assert!(pe
            .check_class(RevenueClass::PriceElastic, 1.0, 2.0, 1000)
            .is_ok());
        assert!(pe
            .check_class(RevenueClass::GradientBounded, 1.0, 2.0, 1000)
            .is_err());
    }

    #[test]
    fn linear_pieces_respect_cap() {
        let g = pl_3_1().capped(1.5);
        assert_eq!(g.linear_pieces().unwrap(), vec![(3.0, 1.0), (1.0, 0.5)]);
        let g = pl_3_1().capped(0.5).scaled(2.0);
        assert_eq!(g.linear_pieces().unwrap(), vec![(3.0, 1.0)]);
    }
}
