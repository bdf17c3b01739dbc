//! Per-run results shared by every online algorithm.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::model::{Allocation, Instance, InstanceFile};
use crate::TOL_ROOT;

/// Slack added to a bound before declaring it violated.
pub const BOUND_TOL: f64 = 1e-9;

/// Outcome of one invariant check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Flag {
    pub name: String,
    pub pass: bool,
    /// Worst observed value of the checked quantity.
    pub value: f64,
    /// Limit it was compared against.
    pub limit: f64,
}

impl Flag {
    /// Passes when `value <= limit`.
    pub fn at_most(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Flag {
            name: name.into(),
            pass: value <= limit,
            value,
            limit,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub online_ms: f64,
    pub offline_ms: f64,
}

/// Online run measured against the offline optimum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub instance: String,
    pub hash: String,
    pub algorithm: String,
    pub pi: f64,
    pub online: f64,
    /// Primal value of the offline solution.
    pub offline: f64,
    /// Certified gap of the offline solution.
    pub offline_gap: f64,
    /// `(offline + offline_gap) / online`.
    pub ratio: f64,
    pub uncertainty: f64,
    pub bound: f64,
    /// `ratio - uncertainty <= bound + BOUND_TOL`.
    pub holds: bool,
    pub flags: Vec<Flag>,
    /// Algorithm-specific measurements.
    pub metrics: BTreeMap<String, f64>,
    pub allocation: Allocation,
    pub warnings: Vec<String>,
    pub timings: Timings,
}

impl RunReport {
    /// Fills ratio, uncertainty and `holds` from the measured objectives.
    ///
    /// `online_tol` is the absolute error budget of the online objective.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        inst: &Instance,
        algorithm: impl Into<String>,
        pi: f64,
        allocation: Allocation,
        offline: f64,
        offline_gap: f64,
        bound: f64,
    ) -> Self {
        let online = allocation.objective;
        let online_tol = (inst.horizon() * inst.inventories()) as f64 * TOL_ROOT;
        let (ratio, uncertainty) = fold_ratio(online, offline, offline_gap, online_tol);
        RunReport {
            instance: inst.id().to_string(),
            hash: instance_hash(inst),
            algorithm: algorithm.into(),
            pi,
            online,
            offline,
            offline_gap,
            ratio,
            uncertainty,
            bound,
            holds: ratio - uncertainty <= bound + BOUND_TOL,
            flags: Vec::new(),
            metrics: BTreeMap::new(),
            allocation,
            warnings: Vec::new(),
            timings: Timings::default(),
        }
    }

    pub fn all_flags_pass(&self) -> bool {
        self.flags.iter().all(|f| f.pass)
    }

    pub fn flag(&self, name: &str) -> Option<&Flag> {
        self.flags.iter().find(|f| f.name == name)
    }

    /// `ratio / bound`, the fraction of the worst case this run attained.
    pub fn tightness(&self) -> f64 {
        if self.bound > 0.0 {
            self.ratio / self.bound
        } else {
            f64::NAN
        }
    }
}

/// Ratio with the offline gap and online error folded into an uncertainty.
///
/// Returns `(ratio, uncertainty)` where `ratio = (offline + gap) / online`
/// and `uncertainty = gap / online + online_tol * ratio / online`.
pub fn fold_ratio(online: f64, offline: f64, gap: f64, online_tol: f64) -> (f64, f64) {
    let upper = offline + gap;
    if online <= online_tol {
        return if upper <= online_tol {
            (1.0, 0.0)
        } else {
            (f64::INFINITY, 0.0)
        };
    }
    let ratio = upper / online;
    (ratio, gap / online + online_tol * ratio / online)
}

/// First 16 hex digits of the SHA-256 of the canonical instance JSON.
pub fn instance_hash(inst: &Instance) -> String {
    let text = serde_json::to_string(&InstanceFile::from(inst)).unwrap_or_default();
    let digest = Sha256::digest(text.as_bytes());
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn folding() {
        let (r, u) = fold_ratio(2.0, 3.0, 0.0, 0.0);
        assert_eq!((r, u), (1.5, 0.0));
        let (r, u) = fold_ratio(2.0, 3.0, 0.2, 1e-10);
        assert!((r - 1.6).abs() < 1e-15);
        assert!((u - (0.1 + 1e-10 * 0.8)).abs() < 1e-15);
        assert_eq!(fold_ratio(0.0, 0.0, 0.0, 1e-10), (1.0, 0.0));
        assert!(fold_ratio(0.0, 1.0, 0.0, 1e-10).0.is_infinite());
    }

    #[test]
    fn flags() {
        assert!(Flag::at_most("x", 1.0, 1.0).pass);
        assert!(!Flag::at_most("x", 1.0 + 1e-12, 1.0).pass);
    }
}
