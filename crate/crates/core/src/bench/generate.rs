//! Deterministic instance generators.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Instance, RevenueClass, RevenueFunction};

/// Inventory layout of a staircase instance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "layout", rename_all = "snake_case")]
pub enum StairMode {
    /// One inventory.
    Single,
    /// `n` identical inventories sharing the allowance.
    Uniform { n: usize },
    /// `n` inventories; inventory `i` stops receiving demand after phase `i`.
    Triangular { n: usize },
}

impl StairMode {
    pub fn inventories(self) -> usize {
        match self {
            StairMode::Single => 1,
            StairMode::Uniform { n } | StairMode::Triangular { n } => n,
        }
    }

    fn tag(self) -> String {
        match self {
            StairMode::Single => "single".into(),
            StairMode::Uniform { n } => format!("uniform{n}"),
            StairMode::Triangular { n } => format!("tri{n}"),
        }
    }
}

/// Linear revenues with slopes `theta^{t/T}`, `t = 1..T`, and `p_min = 1`.
///
/// Every active rate limit equals the capacity `c`, so a greedy rule can
/// exhaust an inventory in the first slot while the price keeps rising.
pub fn gen_staircase(theta: f64, horizon: usize, c: f64, mode: StairMode) -> Result<Instance> {
    if !(theta >= 1.0) || !theta.is_finite() {
        return Err(Error::domain("theta", theta, 1.0, f64::INFINITY));
    }
    if horizon == 0 {
        return Err(Error::Config("staircase horizon must be positive".into()));
    }
    let n = mode.inventories();
    if n == 0 {
        return Err(Error::Config(
            "staircase needs at least one inventory".into(),
        ));
    }
    let mut slots = Vec::with_capacity(horizon);
    for t in 1..=horizon {
        let slope = theta.powf(t as f64 / horizon as f64);
        let row = (0..n)
            .map(|i| {
                let active = match mode {
                    StairMode::Triangular { n } => i >= (t - 1) * n / horizon,
                    _ => true,
                };
                RevenueFunction::linear(slope, if active { c } else { 0.0 })
            })
            .collect::<Result<Vec<_>>>()?;
        slots.push(row);
    }
    let id = format!(
        "stair-{}-th{}-T{}-C{}",
        mode.tag(),
        fmt_param(theta),
        horizon,
        fmt_param(c)
    );
    Instance::new(
        id,
        RevenueClass::GradientBounded,
        1.0,
        theta,
        vec![c; n],
        vec![c; horizon],
        slots,
    )
}

fn fmt_param(x: f64) -> String {
    let s = format!("{x:.4}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

/// Reproducible random instance with `p_min = 1` and `p_max = theta`.
///
/// Gradient-bounded revenues mix linear, piecewise-linear and saturating
/// shapes with gradients in `[1, theta]`. Price-elastic revenues are
/// `(p - e v^k) v` with `p in [1, theta]`. Rate limits never exceed the
/// slot allowance.
pub fn gen_random(
    seed: u64,
    n: usize,
    horizon: usize,
    theta: f64,
    class: RevenueClass,
) -> Result<Instance> {
    if !(theta >= 1.0) || !theta.is_finite() {
        return Err(Error::domain("theta", theta, 1.0, f64::INFINITY));
    }
    if n == 0 || horizon == 0 {
        return Err(Error::Config(
            "random instances need N >= 1 and T >= 1".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let capacities: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..2.0)).collect();
    let allowances: Vec<f64> = (0..horizon).map(|_| rng.gen_range(0.4..1.6)).collect();
    let price = |rng: &mut ChaCha8Rng| theta.powf(rng.gen::<f64>());
    let mut slots = Vec::with_capacity(horizon);
    for &allow in &allowances {
        let mut row = Vec::with_capacity(n);
        for _ in 0..n {
            let delta = allow * rng.gen_range(0.2..1.0);
            let g = match class {
                RevenueClass::GradientBounded => match rng.gen_range(0..3) {
                    0 => RevenueFunction::linear(price(&mut rng), delta)?,
                    1 => {
                        let a = price(&mut rng);
                        let b = price(&mut rng);
                        let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
                        RevenueFunction::piecewise_linear(
                            vec![hi, lo],
                            vec![delta * rng.gen_range(0.2..0.8)],
                            delta,
                        )?
                    }
                    _ => {
                        let a = price(&mut rng);
                        let b = price(&mut rng);
                        let (peak, floor) = if a >= b { (a, b) } else { (b, a) };
                        RevenueFunction::saturating(
                            floor,
                            peak,
                            delta * rng.gen_range(0.2..1.0),
                            delta,
                        )?
                    }
                },
                RevenueClass::PriceElastic => {
                    let p = price(&mut rng);
                    let exponent = if rng.gen_bool(0.5) { 1.0 } else { 2.0 };
                    // Keep g increasing on most of [0, delta].
                    let peak_at = delta * rng.gen_range(0.6..1.5);
                    let elasticity = p / ((exponent + 1.0) * peak_at.powf(exponent));
                    RevenueFunction::price_elastic(p, elasticity, exponent, delta)?
                }
            };
            row.push(g);
        }
        slots.push(row);
    }
    let id = format!(
        "rand-{}-s{seed}-N{n}-T{horizon}-th{}",
        match class {
            RevenueClass::GradientBounded => "g",
            RevenueClass::PriceElastic => "pe",
        },
        fmt_param(theta)
    );
    Instance::new(id, class, 1.0, theta, capacities, allowances, slots)
}
