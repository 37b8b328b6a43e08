//! Command-line front end: closed forms for conditioned Wiener measure,
//! optionally checked against the Monte Carlo oracle.
//!
//! Exit status is 0 on success, 1 when a verification fails, and 2 on any
//! input error.

pub mod emit;

use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use wiener_radon::input::{self, ItoSpec, SubspaceSpec, VectorSpec};
use wiener_radon::mc_oracle::{DEFAULT_GRID, DEFAULT_SAMPLES};
use wiener_radon::report::tally;
use wiener_radon::suites::{fock_checks, run_custom, run_suite, CustomSuite, Suite, SuiteConfig};
use wiener_radon::{
    conditioned_law, grt_symmetric_ito, multi_bridge_mean, AffineSubspace, CmVector, Comparison,
    ConditionedLaw, Execution, Functional, Grid, MonteCarlo,
};

pub use emit::{Cell, Format, Row};

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "WIENER_RADON_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "wiener-radon",
    version,
    about = "Gaussian Radon transform on classical Wiener space"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Number of grid steps on [0, 1] (default 256, or the grid of the input file)
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    pub grid: Option<u64>,

    /// Monte Carlo sample count
    #[arg(long, global = true, default_value_t = DEFAULT_SAMPLES as u64, value_parser = clap::value_parser!(u64).range(1..))]
    pub samples: u64,

    /// Seed for every random draw
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Write the report here instead of standard output
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,

    /// Process Monte Carlo chunks on the calling thread (same results)
    #[arg(long, global = true)]
    pub serial: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Mean and variance of <h, ·> under the conditioned law, for each functional of an input file
    GrtLinear {
        #[arg(long)]
        input: PathBuf,
        /// Also estimate the means by Monte Carlo
        #[arg(long)]
        mc: bool,
    },
    /// Mean and variance of B(t) for the bridge pinned at B(T) = c
    BridgeStats {
        #[arg(long = "T")]
        big_t: f64,
        #[arg(long, allow_negative_numbers = true)]
        c: f64,
        /// Evaluation time (repeatable)
        #[arg(long = "t", required = true)]
        t: Vec<f64>,
        #[arg(long)]
        mc: bool,
    },
    /// Mean and variance of B(t) for the path pinned at several points
    MultiBridge {
        /// Increasing pin times, comma-separated
        #[arg(long, value_delimiter = ',', required = true)]
        times: Vec<f64>,
        /// Pin levels, comma-separated
        #[arg(
            long,
            value_delimiter = ',',
            required = true,
            allow_negative_numbers = true
        )]
        levels: Vec<f64>,
        #[arg(long = "t", required = true)]
        t: Vec<f64>,
        #[arg(long)]
        mc: bool,
    },
    /// Transform of a multiple Itô integral on the hyperplane B(T) = c
    ItoGrt {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        mc: bool,
    },
    /// Fock-space isometry certificate for vectors in L0
    FockCheck {
        #[arg(long)]
        input: PathBuf,
    },
    /// Run a built-in verification suite or the checks of an input file
    Verify {
        #[arg(long, value_parser = Suite::NAMES, required_unless_present = "input", conflicts_with = "input")]
        suite: Option<String>,
        #[arg(long)]
        input: Option<PathBuf>,
    },
}

#[derive(Debug)]
pub enum CliError {
    Io(PathBuf, std::io::Error),
    Model(wiener_radon::Error),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Io(path, err) => write!(f, "{}: {err}", path.display()),
            CliError::Model(err) => write!(f, "{err}"),
        }
    }
}

impl From<wiener_radon::Error> for CliError {
    fn from(err: wiener_radon::Error) -> Self {
        CliError::Model(err)
    }
}

/// Rows to emit and whether every check in them passed.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub rows: Vec<Row>,
    pub pass: bool,
    pub summary: Option<String>,
}

impl Outcome {
    fn exact(rows: Vec<Row>) -> Self {
        Self {
            rows,
            pass: true,
            summary: None,
        }
    }
}

#[derive(serde::Deserialize)]
struct GrtLinearInput {
    #[serde(flatten)]
    subspace: SubspaceSpec,
    functionals: Vec<VectorSpec>,
}

#[derive(serde::Deserialize)]
struct FockInput {
    #[serde(flatten)]
    subspace: SubspaceSpec,
    vectors: Vec<VectorSpec>,
    #[serde(default = "default_order")]
    max_order: usize,
    /// Project the vectors onto L0 first instead of requiring them to lie in it.
    #[serde(default)]
    project: bool,
}

fn default_order() -> usize {
    30
}

impl Cli {
    fn execution(&self) -> Execution {
        if self.serial {
            Execution::Serial
        } else {
            Execution::Parallel
        }
    }

    fn samples(&self) -> usize {
        self.samples as usize
    }

    fn grid_or(&self, fallback: usize) -> Result<Grid, CliError> {
        Ok(Grid::new(self.grid.map_or(fallback, |g| g as usize))?)
    }

    fn oracle(&self, law: &ConditionedLaw) -> Result<MonteCarlo, CliError> {
        Ok(MonteCarlo::new(law)?.with_execution(self.execution()))
    }

    fn suite_config(&self, grid: usize) -> SuiteConfig {
        SuiteConfig {
            grid,
            samples: self.samples(),
            seed: self.seed,
            execution: self.execution(),
        }
    }

    fn law(&self, spec: &SubspaceSpec) -> Result<ConditionedLaw, CliError> {
        let mut spec = spec.clone();
        if let Some(grid) = self.grid {
            spec.grid = grid as usize;
        }
        Ok(spec.law()?)
    }
}

fn read_input<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(path.to_path_buf(), e))?;
    input::parse(&text).map_err(|e| match e {
        wiener_radon::Error::Schema(msg) => {
            wiener_radon::Error::Schema(format!("{}: {msg}", path.display())).into()
        }
        other => other.into(),
    })
}

/// Adds Monte Carlo columns `(estimate, z)` for each `(closed form, functional)`
/// and returns whether all comparisons passed.
fn with_mc(
    cli: &Cli,
    law: &ConditionedLaw,
    rows: Vec<Row>,
    checks: Vec<Vec<(&'static str, f64, Functional)>>,
) -> Result<Outcome, CliError> {
    let functionals: Vec<Functional> = checks.iter().flatten().map(|(_, _, f)| f.clone()).collect();
    let estimates = cli
        .oracle(law)?
        .estimate_many(&functionals, cli.samples(), cli.seed)?;
    let mut estimates = estimates.into_iter();
    let mut all_pass = true;
    let mut out = Vec::with_capacity(rows.len());
    for (mut row, row_checks) in rows.into_iter().zip(checks) {
        let mut pass = true;
        for (name, closed, _) in row_checks {
            let cmp = Comparison::new(
                closed,
                estimates.next().expect("one estimate per functional"),
            );
            row = row.with(name, cmp.mc_mean).with(z_key(name), cmp.z_score);
            pass &= cmp.pass;
        }
        all_pass &= pass;
        out.push(row.with("pass", pass));
    }
    Ok(Outcome {
        rows: out,
        pass: all_pass,
        summary: None,
    })
}

fn z_key(name: &'static str) -> &'static str {
    match name {
        "mc_mean" => "mean_z",
        "mc_variance" => "variance_z",
        _ => "z",
    }
}

/// Mean and variance of `B(t)` at each time, plus the Monte Carlo columns.
fn path_stats(
    cli: &Cli,
    law: &ConditionedLaw,
    times: &[f64],
    mean_of: impl Fn(f64) -> Result<f64, CliError>,
    mc: bool,
) -> Result<Outcome, CliError> {
    let grid = law.grid();
    let mut rows = Vec::new();
    let mut checks = Vec::new();
    for &t in times {
        let stats = conditioned_law(law, &CmVector::kernel(t, grid)?)?;
        let mean = mean_of(t)?;
        rows.push(
            Row::new()
                .with("t", t)
                .with("mean", mean)
                .with("variance", stats.variance),
        );
        let centre = stats.mean;
        checks.push(vec![
            ("mc_mean", mean, Functional::PathEval(t)),
            (
                "mc_variance",
                stats.variance,
                Functional::composite(vec![Functional::PathEval(t)], move |x| {
                    (x[0] - centre) * (x[0] - centre)
                }),
            ),
        ]);
    }
    if mc {
        with_mc(cli, law, rows, checks)
    } else {
        Ok(Outcome::exact(rows))
    }
}

pub fn execute(cli: &Cli) -> Result<Outcome, CliError> {
    match &cli.command {
        Command::GrtLinear { input, mc } => {
            let doc: GrtLinearInput = read_input(input)?;
            let law = cli.law(&doc.subspace)?;
            let mut rows = Vec::new();
            let mut checks = Vec::new();
            for (i, spec) in doc.functionals.iter().enumerate() {
                let h = spec.resolve(law.grid())?;
                let stats = conditioned_law(&law, &h)?;
                rows.push(
                    Row::new()
                        .with("functional", i)
                        .with("mean", stats.mean)
                        .with("variance", stats.variance),
                );
                checks.push(vec![("mc_mean", stats.mean, Functional::WienerIntegral(h))]);
            }
            if *mc {
                with_mc(cli, &law, rows, checks)
            } else {
                Ok(Outcome::exact(rows))
            }
        }
        Command::BridgeStats { big_t, c, t, mc } => {
            let grid = cli.grid_or(DEFAULT_GRID)?;
            let law = AffineSubspace::bridge(&[*big_t], &[*c], grid)?.closest_point()?;
            path_stats(
                cli,
                &law,
                t,
                |s| Ok(conditioned_law(&law, &CmVector::kernel(s, grid)?)?.mean),
                *mc,
            )
        }
        Command::MultiBridge {
            times,
            levels,
            t,
            mc,
        } => {
            let grid = cli.grid_or(DEFAULT_GRID)?;
            let law = AffineSubspace::bridge(times, levels, grid)?.closest_point()?;
            let mean_of = |s: f64| {
                Ok(multi_bridge_mean(
                    times,
                    levels,
                    &CmVector::indicator(0.0, s, grid)?,
                )?)
            };
            path_stats(cli, &law, t, mean_of, *mc)
        }
        Command::ItoGrt { input, mc } => {
            let mut spec: ItoSpec = read_input(input)?;
            if let Some(grid) = cli.grid {
                spec.grid = Some(grid as usize);
            }
            let grid = spec.grid(DEFAULT_GRID)?;
            let kernel = spec.kernel(grid)?;
            let value = grt_symmetric_ito(&kernel, spec.big_t, spec.c)?;
            let row = Row::new()
                .with("n", kernel.degree())
                .with("T", spec.big_t)
                .with("c", spec.c)
                .with("value", value);
            if !*mc {
                return Ok(Outcome::exact(vec![row]));
            }
            let law = AffineSubspace::bridge(&[spec.big_t], &[spec.c], grid)?.closest_point()?;
            let factors = kernel.factors();
            let functional = if factors.iter().all(|f| f == &factors[0]) {
                let f = factors[0].clone();
                Functional::HermiteOfWiener {
                    n: kernel.degree(),
                    u2: f.norm_sq(),
                    f,
                }
            } else {
                Functional::MultipleIto(kernel)
            };
            with_mc(
                cli,
                &law,
                vec![row],
                vec![vec![("mc_mean", value, functional)]],
            )
        }
        Command::FockCheck { input } => {
            let doc: FockInput = read_input(input)?;
            let law = cli.law(&doc.subspace)?;
            let mut vectors = doc
                .vectors
                .iter()
                .map(|v| v.resolve(law.grid()))
                .collect::<Result<Vec<_>, _>>()?;
            if doc.project {
                vectors = vectors
                    .iter()
                    .map(|v| law.project(v))
                    .collect::<Result<Vec<_>, _>>()?;
            }
            let reports = fock_checks(
                &law,
                &vectors,
                doc.max_order,
                &cli.suite_config(law.grid().n_steps()),
            )?;
            Ok(check_outcome("fock-check", &reports))
        }
        Command::Verify { suite, input } => {
            let reports = match (suite, input) {
                (_, Some(path)) => {
                    let doc: CustomSuite = read_input(path)?;
                    let mut doc = doc;
                    if let Some(grid) = cli.grid {
                        doc.subspace.grid = grid as usize;
                    }
                    run_custom(&doc, &cli.suite_config(doc.subspace.grid))?
                }
                (Some(name), None) => {
                    let grid = cli.grid.map_or(DEFAULT_GRID, |g| g as usize);
                    run_suite(Suite::parse(name)?, &cli.suite_config(grid))?
                }
                (None, None) => unreachable!("clap requires --suite or --input"),
            };
            Ok(check_outcome("verify", &reports))
        }
    }
}

fn check_outcome(label: &str, reports: &[wiener_radon::CheckReport]) -> Outcome {
    let (passed, failed) = tally(reports);
    let mut summary = format!("{label}: {passed} passed, {failed} failed");
    for r in reports.iter().filter(|r| !r.pass) {
        summary.push_str(&format!("\n  FAIL {}", r.check));
    }
    Outcome {
        rows: reports.iter().map(Row::from).collect(),
        pass: failed == 0,
        summary: Some(summary),
    }
}

/// Runs the command and returns the process exit status.
pub fn run(cli: &Cli) -> i32 {
    let outcome = match execute(cli) {
        Ok(outcome) => outcome,
        Err(err) => {
            eprintln!("error: {err}");
            return 2;
        }
    };
    if let Err(err) = emit::emit(&outcome.rows, cli.format, cli.output.as_deref()) {
        eprintln!("error: cannot write report: {err}");
        return 2;
    }
    if let Some(summary) = &outcome.summary {
        eprintln!("{summary}");
    }
    if outcome.pass {
        0
    } else {
        1
    }
}

/// Applies `WIENER_RADON_THREADS` to the global worker pool.
pub fn configure_threads(value: Option<&str>) -> Result<(), String> {
    let Some(value) = value else { return Ok(()) };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .ok_or_else(|| format!("{THREADS_ENV} must be a positive integer, got `{value}`"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| e.to_string())
}
