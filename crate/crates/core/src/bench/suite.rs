//! Runs every (instance, algorithm) pair of a configuration and aggregates the results.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::anp;
use crate::baseline_pd::pd_run;
use crate::cr_pursuit;
use crate::error::{Error, Result};
use crate::model::{Instance, RevenueClass};
use crate::offline::{oracle_grid, solve_multi, GRID_BUDGET};
use crate::report::{RunReport, BOUND_TOL};

use super::generate::{gen_random, gen_staircase, StairMode};
use super::par;
use super::table::sig12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    CrPursuit,
    Anp,
    PdThreshold,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::CrPursuit, Algorithm::Anp, Algorithm::PdThreshold];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::CrPursuit => "cr_pursuit",
            Algorithm::Anp => "anp",
            Algorithm::PdThreshold => "pd_threshold",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown algorithm {s:?}")))
    }

    /// Whether the algorithm accepts `inst`.
    pub fn applies(self, inst: &Instance) -> bool {
        match self {
            Algorithm::CrPursuit => {
                inst.inventories() == 1 && inst.class() == RevenueClass::GradientBounded
            }
            Algorithm::Anp => true,
            Algorithm::PdThreshold => inst.class() == RevenueClass::GradientBounded,
        }
    }

    /// Runs the algorithm with its default parameter, or `pi` when given.
    pub fn run(self, inst: &Instance, pi: Option<f64>) -> Result<RunReport> {
        match self {
            Algorithm::CrPursuit => cr_pursuit::run(inst, pi),
            Algorithm::Anp => anp::run(inst, pi),
            Algorithm::PdThreshold => pd_run(inst),
        }
    }
}

/// Instance source of a suite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeneratorSpec {
    /// Every combination of `thetas`, `horizons` and `layouts`.
    Staircase {
        thetas: Vec<f64>,
        horizons: Vec<usize>,
        #[serde(default = "one")]
        capacity: f64,
        layouts: Vec<StairMode>,
    },
    /// `count` instances cycling through `inventories`, then `horizons`, then `thetas`.
    Random {
        count: usize,
        inventories: Vec<usize>,
        horizons: Vec<usize>,
        thetas: Vec<f64>,
        class: RevenueClass,
    },
    /// An instance file, relative to the configuration file.
    File { path: PathBuf },
}

fn one() -> f64 {
    1.0
}

/// Cross-check of the offline solver against grid enumeration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleSpec {
    pub grid_step: f64,
    /// Only instances with `N * T` at most this are enumerated.
    #[serde(default = "six")]
    pub max_cells: usize,
}

fn six() -> usize {
    6
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "all_algorithms")]
    pub algorithms: Vec<Algorithm>,
    #[serde(default)]
    pub generators: Vec<GeneratorSpec>,
    #[serde(default)]
    pub oracle: Option<OracleSpec>,
    /// Slack added to every bound before it counts as violated.
    #[serde(default = "bound_tol")]
    pub tol: f64,
}

fn all_algorithms() -> Vec<Algorithm> {
    Algorithm::ALL.to_vec()
}

fn bound_tol() -> f64 {
    BOUND_TOL
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            seed: 0,
            algorithms: all_algorithms(),
            generators: Vec::new(),
            oracle: None,
            tol: BOUND_TOL,
        }
    }
}

impl SuiteConfig {
    /// Desk-scale configuration: staircases, random gradient-bounded and
    /// random price-elastic instances, at most 200 runs.
    pub fn desk() -> Self {
        let e = std::f64::consts::E;
        SuiteConfig {
            seed: 2024,
            algorithms: all_algorithms(),
            generators: vec![
                GeneratorSpec::Staircase {
                    thetas: vec![1.0, e, e * e, 10.0, 30.0, 60.0],
                    horizons: vec![6],
                    capacity: 1.0,
                    layouts: vec![
                        StairMode::Single,
                        StairMode::Uniform { n: 2 },
                        StairMode::Uniform { n: 4 },
                        StairMode::Triangular { n: 4 },
                    ],
                },
                GeneratorSpec::Random {
                    count: 40,
                    inventories: vec![1, 2, 3, 4, 6],
                    horizons: vec![4, 8, 12],
                    thetas: vec![1.0, 2.0, 5.0, 10.0, 20.0, 40.0, 60.0],
                    class: RevenueClass::GradientBounded,
                },
                GeneratorSpec::Random {
                    count: 20,
                    inventories: vec![1, 2, 4, 6],
                    horizons: vec![4, 8],
                    thetas: vec![1.0, 3.0, 10.0],
                    class: RevenueClass::PriceElastic,
                },
            ],
            oracle: Some(OracleSpec {
                grid_step: 0.05,
                max_cells: 6,
            }),
            tol: BOUND_TOL,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: SuiteConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Reads a configuration; `file` generators resolve relative to its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg = Self::from_json(&std::fs::read_to_string(path)?)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for g in &mut cfg.generators {
            if let GeneratorSpec::File { path } = g {
                if path.is_relative() {
                    *path = base.join(&*path);
                }
            }
        }
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        if !(self.tol >= 0.0) {
            return Err(Error::Config(format!("tol must be >= 0, got {}", self.tol)));
        }
        for g in &self.generators {
            if let GeneratorSpec::Random {
                count,
                inventories,
                horizons,
                thetas,
                ..
            } = g
            {
                if *count > 0
                    && (inventories.is_empty() || horizons.is_empty() || thetas.is_empty())
                {
                    return Err(Error::Config(
                        "random generator needs inventories, horizons and thetas".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Materializes every instance in configuration order.
    pub fn instances(&self) -> Result<Vec<Instance>> {
        let mut out = Vec::new();
        for (gi, g) in self.generators.iter().enumerate() {
            match g {
                GeneratorSpec::Staircase {
                    thetas,
                    horizons,
                    capacity,
                    layouts,
                } => {
                    for &layout in layouts {
                        for &theta in thetas {
                            for &h in horizons {
                                out.push(gen_staircase(theta, h, *capacity, layout)?);
                            }
                        }
                    }
                }
                GeneratorSpec::Random {
                    count,
                    inventories,
                    horizons,
                    thetas,
                    class,
                } => {
                    let (a, b, c) = (inventories.len(), horizons.len(), thetas.len());
                    for k in 0..*count {
                        let seed = self
                            .seed
                            .wrapping_mul(1_000_003)
                            .wrapping_add((gi as u64) << 32)
                            .wrapping_add(k as u64);
                        let n = inventories[k % a];
                        let h = horizons[(k / a) % b];
                        let theta = thetas[(k / (a * b)) % c];
                        out.push(gen_random(seed, n, h, theta, *class)?);
                    }
                }
                GeneratorSpec::File { path } => out.push(Instance::load(path)?),
            }
        }
        Ok(out)
    }
}

/// Execution options that do not affect results.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SuiteOptions {
    /// Worker threads; `Some(1)` runs sequentially, `None` uses all cores.
    pub jobs: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunError {
    pub instance: String,
    pub algorithm: String,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleCheck {
    pub instance: String,
    pub grid_step: f64,
    pub solver: f64,
    pub grid: f64,
    pub limit: f64,
    pub pass: bool,
}

/// Run with the largest `ratio / bound` of its algorithm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorstRun {
    pub instance: String,
    pub ratio: f64,
    pub uncertainty: f64,
    pub bound: f64,
    pub tightness: f64,
    pub runs: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    /// Sorted by instance id, then algorithm.
    pub runs: Vec<RunReport>,
    pub errors: Vec<RunError>,
    pub oracle: Vec<OracleCheck>,
    /// Keyed by algorithm label.
    pub worst: BTreeMap<String, WorstRun>,
    /// One line per broken bound, failed flag or failed oracle check.
    pub violations: Vec<String>,
    pub elapsed_ms: f64,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty() && self.errors.is_empty()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// One row per run.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(RUN_CSV_HEADER);
        out.push('\n');
        for r in &self.runs {
            out.push_str(&run_csv_row(r));
        }
        out
    }
}

pub const RUN_CSV_HEADER: &str =
    "instance,hash,algorithm,pi,online,offline,offline_gap,ratio,uncertainty,bound,holds,failed_flags,tightness";

/// CSV row (with trailing LF) of a run.
pub fn run_csv_row(r: &RunReport) -> String {
    let failed: Vec<&str> = r
        .flags
        .iter()
        .filter(|f| !f.pass)
        .map(|f| f.name.as_str())
        .collect();
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
        r.instance,
        r.hash,
        r.algorithm,
        sig12(r.pi),
        sig12(r.online),
        sig12(r.offline),
        sig12(r.offline_gap),
        sig12(r.ratio),
        sig12(r.uncertainty),
        sig12(r.bound),
        r.holds,
        failed.join(";"),
        sig12(r.tightness())
    )
}

/// Coarsens `step` until grid enumeration of `inst` fits the budget.
pub fn oracle_step(inst: &Instance, step: f64) -> f64 {
    let mut h = step;
    loop {
        let mut points = 1.0_f64;
        for t in 0..inst.horizon() {
            for g in inst.slot(t) {
                points *= (g.delta() / h).floor() + 2.0;
            }
        }
        if points <= GRID_BUDGET {
            return h;
        }
        h *= 2.0;
    }
}

fn oracle_check(inst: &Instance, step: f64) -> Result<OracleCheck> {
    let h = oracle_step(inst, step);
    let solver = solve_multi(inst, inst.horizon())?.objective;
    let grid = oracle_grid(inst, h)?;
    let limit = inst.p_max() * h * (inst.horizon() * inst.inventories()) as f64 + 1e-6;
    Ok(OracleCheck {
        instance: inst.id().to_string(),
        grid_step: h,
        solver,
        grid,
        limit,
        pass: (solver - grid).abs() <= limit && grid <= solver + 1e-6,
    })
}

pub fn run_suite(cfg: &SuiteConfig, opts: SuiteOptions) -> Result<SuiteReport> {
    let started = Instant::now();
    let instances = cfg.instances()?;
    let mut algorithms = cfg.algorithms.clone();
    algorithms.sort();
    algorithms.dedup();
    let pairs: Vec<(usize, Algorithm)> = instances
        .iter()
        .enumerate()
        .flat_map(|(k, inst)| {
            algorithms
                .iter()
                .filter(|a| a.applies(inst))
                .map(move |&a| (k, a))
        })
        .collect();
    let outcomes = par::map(&pairs, opts.jobs, |&(k, a)| {
        (k, a, a.run(&instances[k], None))
    })?;

    let oracle_targets: Vec<usize> = match cfg.oracle {
        Some(spec) => (0..instances.len())
            .filter(|&k| instances[k].horizon() * instances[k].inventories() <= spec.max_cells)
            .collect(),
        None => Vec::new(),
    };
    let checks = match cfg.oracle {
        Some(spec) => par::map(&oracle_targets, opts.jobs, |&k| {
            oracle_check(&instances[k], spec.grid_step)
        })?,
        None => Vec::new(),
    };

    let mut report = SuiteReport::default();
    for (k, a, res) in outcomes {
        match res {
            Ok(r) => report.runs.push(r),
            Err(e) => report.errors.push(RunError {
                instance: instances[k].id().to_string(),
                algorithm: a.name().to_string(),
                message: e.to_string(),
            }),
        }
    }
    for (&k, res) in oracle_targets.iter().zip(checks) {
        match res {
            Ok(c) => report.oracle.push(c),
            Err(e) => report.errors.push(RunError {
                instance: instances[k].id().to_string(),
                algorithm: "oracle_grid".into(),
                message: e.to_string(),
            }),
        }
    }
    report.runs.sort_by(|x, y| {
        x.instance
            .cmp(&y.instance)
            .then_with(|| x.algorithm.cmp(&y.algorithm))
    });
    report.errors.sort_by(|x, y| {
        x.instance
            .cmp(&y.instance)
            .then_with(|| x.algorithm.cmp(&y.algorithm))
    });
    report.oracle.sort_by(|x, y| x.instance.cmp(&y.instance));

    for r in &report.runs {
        if r.ratio - r.uncertainty > r.bound + cfg.tol {
            report.violations.push(format!(
                "{} / {}: ratio {} - uncertainty {} exceeds bound {}",
                r.instance, r.algorithm, r.ratio, r.uncertainty, r.bound
            ));
        }
        for f in r.flags.iter().filter(|f| !f.pass) {
            report.violations.push(format!(
                "{} / {}: flag {} = {:e} exceeds {:e}",
                r.instance, r.algorithm, f.name, f.value, f.limit
            ));
        }
        let w = report.worst.entry(r.algorithm.clone()).or_insert(WorstRun {
            instance: r.instance.clone(),
            ratio: r.ratio,
            uncertainty: r.uncertainty,
            bound: r.bound,
            tightness: r.tightness(),
            runs: 0,
        });
        w.runs += 1;
        if r.tightness() > w.tightness {
            *w = WorstRun {
                instance: r.instance.clone(),
                ratio: r.ratio,
                uncertainty: r.uncertainty,
                bound: r.bound,
                tightness: r.tightness(),
                runs: w.runs,
            };
        }
    }
    for c in report.oracle.iter().filter(|c| !c.pass) {
        report.violations.push(format!(
            "{}: solver {} vs grid {} (step {}) differ by more than {}",
            c.instance, c.solver, c.grid, c.grid_step, c.limit
        ));
    }
    report.elapsed_ms = started.elapsed().as_secs_f64() * 1e3;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::RevenueFunction;

    #[test]
    fn empty_config() {
        let r = run_suite(&SuiteConfig::default(), SuiteOptions::default()).unwrap();
        assert!(r.runs.is_empty() && r.passed());
        let cfg = SuiteConfig::from_json("{}").unwrap();
        assert_eq!(cfg, SuiteConfig::default());
        assert!(SuiteConfig::from_json(r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn trivial_instance_has_ratio_one() {
        let dir = std::env::temp_dir().join(format!("invalloc-suite-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let inst = Instance::new(
            "trivial",
            RevenueClass::GradientBounded,
            1.0,
            1.0,
            vec![10.0],
            vec![1.0],
            vec![vec![RevenueFunction::linear(1.0, 1.0).unwrap()]],
        )
        .unwrap();
        inst.save(dir.join("trivial.json")).unwrap();
        let cfg = SuiteConfig {
            generators: vec![GeneratorSpec::File {
                path: "trivial.json".into(),
            }],
            ..SuiteConfig::default()
        };
        std::fs::write(dir.join("cfg.json"), cfg.to_json().unwrap()).unwrap();
        let cfg = SuiteConfig::load(&dir.join("cfg.json")).unwrap();
        let r = run_suite(&cfg, SuiteOptions::default()).unwrap();
        assert_eq!(r.runs.len(), 3);
        let names: Vec<&str> = r.runs.iter().map(|r| r.algorithm.as_str()).collect();
        assert_eq!(names, ["anp_small", "cr_pursuit", "pd_threshold"]);
        for run in &r.runs {
            if run.algorithm != "pd_threshold" {
                assert!(
                    (run.ratio - 1.0).abs() <= 1e-9,
                    "{}: {}",
                    run.algorithm,
                    run.ratio
                );
            }
        }
        assert!(r.passed(), "{:?}", r.violations);
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn desk_config_is_small() {
        let cfg = SuiteConfig::desk();
        let inst = cfg.instances().unwrap();
        let runs: usize = inst
            .iter()
            .map(|i| cfg.algorithms.iter().filter(|a| a.applies(i)).count())
            .sum();
        assert!(runs <= 200, "{runs} runs");
        let back = SuiteConfig::from_json(&cfg.to_json().unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn deterministic_modulo_timings() {
        let cfg = SuiteConfig {
            seed: 5,
            generators: vec![GeneratorSpec::Random {
                count: 4,
                inventories: vec![1, 3],
                horizons: vec![3],
                thetas: vec![4.0],
                class: RevenueClass::GradientBounded,
            }],
            ..SuiteConfig::default()
        };
        let strip = |mut r: SuiteReport| {
            r.elapsed_ms = 0.0;
            for run in &mut r.runs {
                run.timings = Default::default();
            }
            r
        };
        let a = strip(run_suite(&cfg, SuiteOptions { jobs: Some(1) }).unwrap());
        let b = strip(run_suite(&cfg, SuiteOptions { jobs: Some(3) }).unwrap());
        assert_eq!(a, b);
        assert_eq!(a.to_csv(), b.to_csv());
    }
}
