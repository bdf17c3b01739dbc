//! Guaranteed competitive ratios across `theta`.

use serde::{Deserialize, Serialize};

use crate::anp::large_n_bound;
use crate::baseline_pd::chi;
use crate::cr_pursuit::pi_one;
use crate::error::{Error, Result};

/// Relative slack of the sandwich check.
const SANDWICH_TOL: f64 = 1e-12;

pub const TABLE_HEADER: &str = "theta,pi1,ours,chi_tilde,sun_et_al";

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub theta: f64,
    pub pi1: f64,
    /// `pi_1` when `pi_1 >= N`, else `e^{1/pi_1} / (e^{1/pi_1} - 1)`.
    pub ours: f64,
    pub chi_tilde: f64,
}

/// Guarantee of allowance-and-pursuit with `pi = pi_1` and `n` inventories.
pub fn ours(pi1: f64, n: usize) -> f64 {
    if pi1 >= n as f64 {
        pi1
    } else {
        large_n_bound(pi1)
    }
}

/// One row per `theta`; fails if `pi_1 <= chi~ <= e^{1/pi_1} / (e^{1/pi_1} - 1)` is violated.
pub fn cr_table(thetas: &[f64], n: usize) -> Result<Vec<TableRow>> {
    if n == 0 {
        return Err(Error::Config("table needs N >= 1".into()));
    }
    thetas
        .iter()
        .map(|&theta| {
            let pi1 = pi_one(theta)?;
            let (_, chi_tilde) = chi(theta)?;
            let upper = large_n_bound(pi1);
            let slack = SANDWICH_TOL * upper;
            if !(pi1 <= chi_tilde + slack && chi_tilde <= upper + slack) {
                return Err(Error::Invariant(format!(
                    "theta {theta}: expected {pi1} <= {chi_tilde} <= {upper}"
                )));
            }
            Ok(TableRow {
                theta,
                pi1,
                ours: ours(pi1, n),
                chi_tilde,
            })
        })
        .collect()
}

/// Parses `a..b` (unit step, inclusive), `a..b:step`, or a comma list.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let bad = || Error::Config(format!("cannot parse theta grid {spec:?}"));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
    let spec = spec.trim();
    if let Some((lo, rest)) = spec.split_once("..") {
        let (hi, step) = match rest.split_once(':') {
            Some((h, s)) => (num(h)?, num(s)?),
            None => (num(rest)?, 1.0),
        };
        let lo = num(lo)?;
        if !(step > 0.0) || !(hi >= lo) || !lo.is_finite() || !hi.is_finite() {
            return Err(bad());
        }
        let count = ((hi - lo) / step + 1e-9).floor() as usize;
        if count > 1_000_000 {
            return Err(Error::Config(format!(
                "theta grid {spec:?} has too many points"
            )));
        }
        return Ok((0..=count).map(|k| lo + k as f64 * step).collect());
    }
    let values = spec.split(',').map(num).collect::<Result<Vec<_>>>()?;
    if values.is_empty() {
        return Err(bad());
    }
    Ok(values)
}

/// `x` with 12 significant digits, trailing zeros removed.
pub fn sig12(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        let s = format!("{x:.decimals$}");
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        let s = format!("{x:.11e}");
        let (m, e) = s.split_once('e').expect("exponent");
        let m = if m.contains('.') {
            m.trim_end_matches('0').trim_end_matches('.')
        } else {
            m
        };
        format!("{m}e{e}")
    }
}

/// CSV with a fixed column order and LF line endings; `sun_et_al` is left empty.
pub fn to_csv(rows: &[TableRow]) -> String {
    let mut out = String::from(TABLE_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},\n",
            sig12(r.theta),
            sig12(r.pi1),
            sig12(r.ours),
            sig12(r.chi_tilde)
        ));
    }
    out
}

/// First `theta` of the grid at which the rule switches to `pi_1`.
pub fn crossover(rows: &[TableRow]) -> Option<f64> {
    rows.iter().find(|r| r.ours == r.pi1).map(|r| r.theta)
}
