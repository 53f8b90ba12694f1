//! Command-line frontend.
//!
//! Exit codes: 0 success, 1 usage or I/O error, 2 infeasible problem,
//! 3 certificate failure in `solve`, 4 failed check in `verify`.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::cost_model::{CostFunction, RateLimits};
use crate::dataio::{self, PriceSeries, Summary, SyntheticSpec};
use crate::error::Error;
use crate::oracle::{dp_solve, GridSpec};
use crate::solver::{objective, solve_with, verify_certificate, MuCertificate, Problem, Solution};
use crate::tolerance::{Tolerances, DEFAULT_TOL_COST, DEFAULT_TOL_X};

pub const EXIT_OK: u8 = 0;
pub const EXIT_ERROR: u8 = 1;
pub const EXIT_INFEASIBLE: u8 = 2;
pub const EXIT_CERTIFICATE: u8 = 3;
pub const EXIT_VERIFY_FAILED: u8 = 4;

/// Largest gap between a verified objective and the grid oracle that still
/// passes `verify`.
pub const ORACLE_GAP_TOL: f64 = 1e-6;

pub const SCHEDULE_FILE: &str = "schedule.csv";
pub const SUMMARY_FILE: &str = "summary.json";

#[derive(Debug, Parser)]
#[command(
    name = "storarb",
    version,
    about = "Optimal arbitrage schedules for a finite store"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic price series as CSV.
    Gen(GenArgs),
    /// Solve, self-verify, and write schedule.csv and summary.json.
    Solve(SolveArgs),
    /// Check a schedule file against the optimality conditions and the grid oracle.
    Verify(VerifyArgs),
    /// Solve once per parameter value on the same prices.
    Sweep(SweepArgs),
    /// Time the solver on synthetic series of several lengths.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SourceArgs {
    /// Price CSV (`timestamp,buy,sell` or `timestamp,price`).
    #[arg(long, conflicts_with = "synthetic")]
    pub prices: Option<PathBuf>,
    /// Synthetic series, e.g. `days=7,base=50,daily=20,weekly=5,noise=3`.
    #[arg(long)]
    pub synthetic: Option<SyntheticSpec>,
    /// Overrides the seed of a synthetic series.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct StoreArgs {
    #[arg(long, default_value_t = 10.0)]
    pub capacity: f64,
    #[arg(long, default_value_t = 1.0)]
    pub rate_in: f64,
    /// Defaults to `--rate-in`.
    #[arg(long)]
    pub rate_out: Option<f64>,
    /// Round-trip efficiency, applied to sell prices.
    #[arg(long, default_value_t = 1.0)]
    pub eta: f64,
    #[arg(long, default_value_t = 0.0)]
    pub start_level: f64,
    #[arg(long, default_value_t = 0.0)]
    pub end_level: f64,
    /// Multiplier tolerance; defaults to 1e-7 times the slope range.
    #[arg(long)]
    pub tol_mu: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_TOL_X)]
    pub tol_x: f64,
    #[arg(long, default_value_t = DEFAULT_TOL_COST)]
    pub tol_cost: f64,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, default_value = "")]
    pub synthetic: SyntheticSpec,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Directory for prices.csv; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub store: StoreArgs,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Schedule CSV written by `solve`. Its price columns define the problem.
    #[arg(long)]
    pub schedule: PathBuf,
    #[command(flatten)]
    pub store: StoreArgs,
    /// Run the grid oracle only up to this many periods.
    #[arg(long, default_value_t = 48)]
    pub oracle_cap: usize,
    /// Oracle grid points per unit of energy.
    #[arg(long, default_value_t = 100)]
    pub grid: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepParam {
    Eta,
    #[value(name = "E", alias = "capacity")]
    Capacity,
    /// Sets both rates.
    #[value(name = "P", alias = "rate")]
    Rate,
}

impl SweepParam {
    fn name(self) -> &'static str {
        match self {
            Self::Eta => "eta",
            Self::Capacity => "E",
            Self::Rate => "P",
        }
    }
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub store: StoreArgs,
    #[arg(long, value_enum)]
    pub param: SweepParam,
    #[arg(long, value_delimiter = ',', required = true)]
    pub values: Vec<f64>,
    /// Directory for sweep.csv; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, default_value = "")]
    pub synthetic: SyntheticSpec,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub store: StoreArgs,
    #[arg(long, value_delimiter = ',', default_value = "4800,9600")]
    pub horizons: Vec<usize>,
    /// Timings are the minimum over this many runs.
    #[arg(long, default_value_t = 3)]
    pub repeats: usize,
    /// Directory for bench.csv; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Store parameters and tolerances for one run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunConfig {
    pub capacity: f64,
    pub rates: RateLimits,
    pub eta: f64,
    pub start_level: f64,
    pub end_level: f64,
    pub tolerances: Tolerances,
}

impl RunConfig {
    pub fn from_args(a: &StoreArgs) -> crate::Result<Self> {
        let rates = RateLimits::new(a.rate_in, a.rate_out.unwrap_or(a.rate_in))?;
        if !(a.eta > 0.0 && a.eta <= 1.0) {
            return Err(Error::InvalidEfficiency(a.eta));
        }
        Ok(Self {
            capacity: a.capacity,
            rates,
            eta: a.eta,
            start_level: a.start_level,
            end_level: a.end_level,
            tolerances: Tolerances {
                x: a.tol_x,
                cost: a.tol_cost,
                mu: a.tol_mu,
            },
        })
    }

    /// Builds the problem for market prices, applying `eta` to the sell side.
    pub fn problem(&self, prices: &PriceSeries) -> crate::Result<Problem> {
        let costs = prices
            .records()
            .iter()
            .map(|r| CostFunction::two_price(r.buy, r.sell, self.rates)?.apply_efficiency(self.eta))
            .collect::<crate::Result<Vec<_>>>()?;
        Problem::new(self.capacity, self.start_level, self.end_level, costs)
    }
}

/// Results of one solve, in the form reported by `solve` and `sweep`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub solution: Solution,
    pub objective: f64,
    pub active_periods: usize,
}

/// Solves and self-verifies. A certificate that fails verification is
/// reported as [`Error::InternalInvariantViolation`].
pub fn run_once(config: &RunConfig, prices: &PriceSeries) -> crate::Result<RunSummary> {
    let problem = config.problem(prices)?;
    let tol = &config.tolerances;
    let solution = solve_with(&problem, tol)?;
    let report = verify_certificate(&problem, &solution.schedule, &solution.certificate, tol);
    if !report.is_certified() {
        return Err(Error::InternalInvariantViolation(format!(
            "certificate fails {}: {}",
            report.failed_conditions().join(", "),
            report.details.join("; ")
        )));
    }
    let objective = objective(&problem, &solution.schedule, tol)?;
    let active_periods = solution
        .schedule
        .flows
        .iter()
        .filter(|x| x.abs() > tol.x)
        .count();
    Ok(RunSummary {
        solution,
        objective,
        active_periods,
    })
}

pub fn load_prices(source: &SourceArgs) -> anyhow::Result<PriceSeries> {
    match (&source.prices, &source.synthetic) {
        (Some(path), _) => {
            let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
            dataio::read_prices(BufReader::new(f), 1.0)
                .with_context(|| format!("reading {}", path.display()))
        }
        (None, Some(spec)) => Ok(dataio::generate_prices(&seeded(*spec, source.seed))?),
        (None, None) => bail!("one of --prices or --synthetic is required"),
    }
}

fn seeded(spec: SyntheticSpec, seed: Option<u64>) -> SyntheticSpec {
    SyntheticSpec {
        seed: seed.unwrap_or(spec.seed),
        ..spec
    }
}

fn create(dir: &Path, name: &str) -> anyhow::Result<BufWriter<File>> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn sink(out: &Option<PathBuf>, name: &str) -> anyhow::Result<Box<dyn Write>> {
    Ok(match out {
        Some(dir) => Box::new(create(dir, name)?),
        None => Box::new(io::stdout().lock()),
    })
}

/// Parses arguments from the process and runs the chosen command.
pub fn main_entry() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}

pub fn run(cli: &Cli) -> anyhow::Result<u8> {
    match &cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Solve(a) => cmd_solve(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Bench(a) => cmd_bench(a),
    }
}

pub fn cmd_gen(a: &GenArgs) -> anyhow::Result<u8> {
    let prices = dataio::generate_prices(&seeded(a.synthetic, a.seed))?;
    let mut w = sink(&a.out, "prices.csv")?;
    dataio::write_prices(&mut w, &prices)?;
    w.flush()?;
    Ok(EXIT_OK)
}

pub fn cmd_solve(a: &SolveArgs) -> anyhow::Result<u8> {
    let config = RunConfig::from_args(&a.store)?;
    let prices = load_prices(&a.source)?;
    let run = match run_once(&config, &prices) {
        Ok(r) => r,
        Err(e @ Error::InfeasibleProblem(_)) => {
            eprintln!("infeasible: {e}");
            return Ok(EXIT_INFEASIBLE);
        }
        Err(e @ Error::InternalInvariantViolation(_)) => {
            eprintln!("certificate failure: {e}");
            return Ok(EXIT_CERTIFICATE);
        }
        Err(e) => return Err(e.into()),
    };
    let effective = prices.with_sell_scaled(config.eta);
    let mut w = create(&a.out, SCHEDULE_FILE)?;
    dataio::write_schedule(
        &mut w,
        &run.solution.schedule,
        &run.solution.certificate,
        &effective,
        config.tolerances.x,
    )?;
    w.flush()?;
    let summary = Summary::new(run.objective, &run.solution.certificate);
    let mut w = create(&a.out, SUMMARY_FILE)?;
    dataio::write_summary(&mut w, &summary)?;
    w.flush()?;
    println!(
        "objective {} profit {} segments {} active periods {}",
        run.objective,
        summary.profit,
        summary.segments.len(),
        run.active_periods
    );
    Ok(EXIT_OK)
}

pub fn cmd_verify(a: &VerifyArgs) -> anyhow::Result<u8> {
    let mut config = RunConfig::from_args(&a.store)?;
    // the schedule's price columns already include efficiency
    config.eta = 1.0;
    let f = File::open(&a.schedule).with_context(|| format!("opening {}", a.schedule.display()))?;
    let file = dataio::read_schedule(BufReader::new(f), config.start_level)
        .with_context(|| format!("reading {}", a.schedule.display()))?;
    let problem = config.problem(&file.prices)?;
    let tol = &config.tolerances;
    let certificate = MuCertificate {
        mu: file.mu.clone(),
        boundaries: vec![0, problem.horizon()],
        pin_kinds: Vec::new(),
    };
    let report = verify_certificate(&problem, &file.schedule, &certificate, tol);
    let mut failed: Vec<&str> = report.failed_conditions();
    for d in &report.details {
        eprintln!("{d}");
    }
    println!(
        "(i) feasibility: {}\n(ii) pointwise minimality: {}\n(iii) complementary slackness: {}",
        verdict(report.feasible),
        verdict(report.pointwise_min),
        verdict(report.comp_slack)
    );

    let value = objective(&problem, &file.schedule, tol);
    match &value {
        Ok(v) => println!("objective: {v}"),
        Err(e) => println!("objective: unavailable ({e})"),
    }
    if problem.horizon() <= a.oracle_cap {
        let grid = GridSpec::new(a.grid)?;
        match (dp_solve(&problem, grid), &value) {
            (Ok(dp), Ok(v)) => {
                let gap = v - dp.cost;
                println!(
                    "oracle: grid step {} cost {} gap {gap:e} (snap {:e})",
                    grid.step(),
                    dp.cost,
                    dp.snap.max()
                );
                if gap > ORACLE_GAP_TOL {
                    failed.push("oracle-gap");
                }
            }
            (Err(e), _) => {
                println!("oracle: failed ({e})");
                failed.push("oracle-gap");
            }
            (Ok(_), Err(_)) => failed.push("oracle-gap"),
        }
    } else {
        println!(
            "oracle: skipped ({} periods > cap {})",
            problem.horizon(),
            a.oracle_cap
        );
    }

    if failed.is_empty() {
        println!("verified");
        Ok(EXIT_OK)
    } else {
        println!("FAILED: {}", failed.join(", "));
        Ok(EXIT_VERIFY_FAILED)
    }
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "ok"
    } else {
        "FAILED"
    }
}

pub const SWEEP_COLUMNS: [&str; 7] = [
    "param",
    "value",
    "objective",
    "active_periods",
    "num_segments",
    "max_horizon",
    "status",
];

/// One row of a sweep table.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub param: SweepParam,
    pub value: f64,
    pub result: Result<(f64, usize, usize, usize), String>,
}

impl SweepRow {
    pub fn status(&self) -> &str {
        match &self.result {
            Ok(_) => "ok",
            Err(s) => s,
        }
    }
}

pub fn sweep(
    base: &RunConfig,
    prices: &PriceSeries,
    param: SweepParam,
    values: &[f64],
) -> Vec<SweepRow> {
    values
        .iter()
        .map(|&value| {
            let result = sweep_config(base, param, value).and_then(|c| run_once(&c, prices));
            SweepRow {
                param,
                value,
                result: result
                    .map(|r| {
                        let (max, _) = r.solution.certificate.horizon_stats();
                        (
                            r.objective,
                            r.active_periods,
                            r.solution.certificate.num_segments(),
                            max,
                        )
                    })
                    .map_err(|e| match e {
                        Error::InfeasibleProblem(_) => "infeasible".to_string(),
                        Error::InternalInvariantViolation(_) => "certificate_failure".to_string(),
                        _ => "invalid".to_string(),
                    }),
            }
        })
        .collect()
}

fn sweep_config(base: &RunConfig, param: SweepParam, value: f64) -> crate::Result<RunConfig> {
    let mut c = *base;
    match param {
        SweepParam::Eta => {
            if !(value > 0.0 && value <= 1.0) {
                return Err(Error::InvalidEfficiency(value));
            }
            c.eta = value;
        }
        SweepParam::Capacity => c.capacity = value,
        SweepParam::Rate => c.rates = RateLimits::symmetric(value)?,
    }
    Ok(c)
}

pub fn cmd_sweep(a: &SweepArgs) -> anyhow::Result<u8> {
    let config = RunConfig::from_args(&a.store)?;
    let prices = load_prices(&a.source)?;
    let rows = sweep(&config, &prices, a.param, &a.values);
    let mut w = csv::Writer::from_writer(sink(&a.out, "sweep.csv")?);
    w.write_record(SWEEP_COLUMNS)?;
    for row in &rows {
        let mut rec = vec![row.param.name().to_string(), row.value.to_string()];
        match &row.result {
            Ok((obj, active, segs, max)) => rec.extend([
                obj.to_string(),
                active.to_string(),
                segs.to_string(),
                max.to_string(),
            ]),
            Err(_) => rec.extend(std::iter::repeat_n(String::new(), 4)),
        }
        rec.push(row.status().to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(EXIT_OK)
}

/// Timing and segment statistics for one horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub horizon: usize,
    pub wall_ms: f64,
    pub num_segments: usize,
    pub max_segment: usize,
    pub mean_segment: f64,
}

/// Solves the first `horizon` periods of the synthetic series `repeats`
/// times and keeps the fastest run.
pub fn bench_horizon(
    config: &RunConfig,
    spec: &SyntheticSpec,
    horizon: usize,
    repeats: usize,
) -> crate::Result<BenchRow> {
    let days = horizon.div_ceil(dataio::PERIODS_PER_DAY).max(1);
    let spec = SyntheticSpec {
        days: u32::try_from(days).map_err(|_| Error::InvalidProblem("horizon too long".into()))?,
        ..*spec
    };
    let prices = dataio::generate_prices(&spec)?.truncated(horizon);
    let problem = config.problem(&prices)?;
    let mut best = f64::INFINITY;
    let mut last = None;
    for _ in 0..repeats.max(1) {
        let start = Instant::now();
        let sol = solve_with(&problem, &config.tolerances)?;
        best = best.min(start.elapsed().as_secs_f64() * 1e3);
        last = Some(sol);
    }
    let cert = last.expect("at least one run").certificate;
    let (max_segment, mean_segment) = cert.horizon_stats();
    Ok(BenchRow {
        horizon,
        wall_ms: best,
        num_segments: cert.num_segments(),
        max_segment,
        mean_segment,
    })
}

pub fn cmd_bench(a: &BenchArgs) -> anyhow::Result<u8> {
    let config = RunConfig::from_args(&a.store)?;
    let spec = seeded(a.synthetic, a.seed);
    let mut w = csv::Writer::from_writer(sink(&a.out, "bench.csv")?);
    w.write_record([
        "horizon",
        "wall_ms",
        "num_segments",
        "max_segment",
        "mean_segment",
    ])?;
    for &h in &a.horizons {
        let row =
            bench_horizon(&config, &spec, h, a.repeats).with_context(|| format!("horizon {h}"))?;
        w.write_record([
            row.horizon.to_string(),
            format!("{:.3}", row.wall_ms),
            row.num_segments.to_string(),
            row.max_segment.to_string(),
            format!("{:.3}", row.mean_segment),
        ])?;
    }
    w.flush()?;
    Ok(EXIT_OK)
}
