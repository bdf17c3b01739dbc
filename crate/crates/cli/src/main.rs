use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use invalloc::bench::{
    cr_table, crossover, gen_random, gen_staircase, parse_grid, run_csv_row, run_suite, to_csv,
    Algorithm, OracleSpec, StairMode, SuiteConfig, SuiteOptions, RUN_CSV_HEADER,
};
use invalloc::model::{Instance, RevenueClass};

#[derive(Parser)]
#[command(
    name = "invalloc",
    version,
    about = "Competitive online allocation of capacity-limited inventories"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum ClassArg {
    GradientBounded,
    PriceElastic,
}

impl From<ClassArg> for RevenueClass {
    fn from(c: ClassArg) -> Self {
        match c {
            ClassArg::GradientBounded => RevenueClass::GradientBounded,
            ClassArg::PriceElastic => RevenueClass::PriceElastic,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run one algorithm on an instance file and compare with the offline optimum.
    Run {
        instance: PathBuf,
        /// cr_pursuit, anp or pd_threshold.
        #[arg(long, short, default_value = "anp")]
        algorithm: String,
        /// Override the algorithm's parameter.
        #[arg(long)]
        pi: Option<f64>,
        /// Slack added to the bound before it counts as violated.
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a verification suite (the built-in desk configuration by default).
    Suite {
        config: Option<PathBuf>,
        /// Override the configuration seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        tol: Option<f64>,
        /// Enable the grid-oracle cross-check with this step.
        #[arg(long)]
        grid_step: Option<f64>,
        /// Worker threads (1 runs sequentially).
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tabulate guaranteed ratios over a theta grid.
    Table {
        /// Number of inventories.
        #[arg(long = "N", default_value_t = 3)]
        n: usize,
        /// `a..b`, `a..b:step` or a comma list.
        #[arg(long, default_value = "1..60")]
        theta: String,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Emit instance or configuration files.
    Gen {
        #[command(subcommand)]
        what: Gen,
    },
}

#[derive(Subcommand)]
enum Gen {
    /// Linear revenues with geometrically rising slopes.
    Staircase {
        #[arg(long)]
        theta: f64,
        #[arg(long = "T", default_value_t = 6)]
        horizon: usize,
        #[arg(long = "C", default_value_t = 1.0)]
        capacity: f64,
        /// single, uniform:<n> or triangular:<n>.
        #[arg(long, default_value = "single")]
        layout: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Reproducible random instance.
    Random {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long = "N", default_value_t = 3)]
        n: usize,
        #[arg(long = "T", default_value_t = 6)]
        horizon: usize,
        #[arg(long, default_value_t = 10.0)]
        theta: f64,
        #[arg(long, value_enum, default_value = "gradient-bounded")]
        class: ClassArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// The built-in desk-scale suite configuration.
    Config {
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_layout(s: &str) -> Result<StairMode> {
    let count = |v: &str| {
        v.parse::<usize>()
            .with_context(|| format!("bad inventory count in {s:?}"))
    };
    Ok(match s.split_once(':') {
        None if s == "single" => StairMode::Single,
        Some(("uniform", n)) => StairMode::Uniform { n: count(n)? },
        Some(("triangular", n)) => StairMode::Triangular { n: count(n)? },
        _ => bail!("unknown layout {s:?}; expected single, uniform:<n> or triangular:<n>"),
    })
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            if !text.ends_with('\n') {
                stdout.write_all(b"\n")?;
            }
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run {
            instance,
            algorithm,
            pi,
            tol,
            format,
            out,
        } => {
            let inst = Instance::load(&instance)
                .with_context(|| format!("loading {}", instance.display()))?;
            let alg = Algorithm::parse(&algorithm)?;
            if !alg.applies(&inst) {
                bail!("{} does not apply to instance {}", alg.name(), inst.id());
            }
            let report = alg.run(&inst, pi)?;
            let tol = tol.unwrap_or(invalloc::report::BOUND_TOL);
            let ok =
                report.ratio - report.uncertainty <= report.bound + tol && report.all_flags_pass();
            let text = match format {
                Format::Json => serde_json::to_string_pretty(&report)?,
                Format::Csv => format!("{RUN_CSV_HEADER}\n{}", run_csv_row(&report)),
            };
            emit(&out, &text)?;
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            Ok(ok)
        }
        Command::Suite {
            config,
            seed,
            tol,
            grid_step,
            jobs,
            format,
            out,
        } => {
            let mut cfg = match &config {
                Some(p) => {
                    SuiteConfig::load(p).with_context(|| format!("loading {}", p.display()))?
                }
                None => SuiteConfig::desk(),
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(t) = tol {
                cfg.tol = t;
            }
            if let Some(h) = grid_step {
                let max_cells = cfg.oracle.map_or(6, |o| o.max_cells);
                cfg.oracle = Some(OracleSpec {
                    grid_step: h,
                    max_cells,
                });
            }
            let report = run_suite(&cfg, SuiteOptions { jobs })?;
            let text = match format {
                Format::Json => report.to_json()?,
                Format::Csv => report.to_csv(),
            };
            emit(&out, &text)?;
            eprintln!(
                "{} runs, {} errors, {} oracle checks, {} violations in {:.1} s",
                report.runs.len(),
                report.errors.len(),
                report.oracle.len(),
                report.violations.len(),
                report.elapsed_ms / 1e3
            );
            for (alg, w) in &report.worst {
                eprintln!(
                    "  {alg:<13} worst ratio {:.6} / bound {:.6} (tightness {:.4}) on {}",
                    w.ratio, w.bound, w.tightness, w.instance
                );
            }
            for e in &report.errors {
                eprintln!("error: {} / {}: {}", e.instance, e.algorithm, e.message);
            }
            for v in &report.violations {
                eprintln!("violation: {v}");
            }
            Ok(report.passed())
        }
        Command::Table {
            n,
            theta,
            format,
            out,
        } => {
            let rows = cr_table(&parse_grid(&theta)?, n)?;
            let text = match format {
                Format::Csv => to_csv(&rows),
                Format::Json => serde_json::to_string_pretty(&rows)?,
            };
            emit(&out, &text)?;
            if let Some(x) = crossover(&rows) {
                eprintln!(
                    "pi_1 >= N from theta = {x} (exact crossover e^(N-1) = {:.6})",
                    ((n - 1) as f64).exp()
                );
            }
            Ok(true)
        }
        Command::Gen { what } => {
            match what {
                Gen::Staircase {
                    theta,
                    horizon,
                    capacity,
                    layout,
                    out,
                } => emit(
                    &out,
                    &gen_staircase(theta, horizon, capacity, parse_layout(&layout)?)?.to_json()?,
                )?,
                Gen::Random {
                    seed,
                    n,
                    horizon,
                    theta,
                    class,
                    out,
                } => emit(
                    &out,
                    &gen_random(seed, n, horizon, theta, class.into())?.to_json()?,
                )?,
                Gen::Config { out } => emit(&out, &SuiteConfig::desk().to_json()?)?,
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
