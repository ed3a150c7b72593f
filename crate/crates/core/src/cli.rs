//! Command-line front end.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::abstraction::{reward_vectors, Abstractor};
use crate::config::Config;
use crate::error::{Error, Result};
use crate::imc::{default_iterations, interval_value_iteration, results_json, IntervalMarkovChain, ValueBounds};
use crate::sim::{mc_expectation, McResult, TRUNCATION_TARGET};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_ASSUMPTION: i32 = 2;
pub const EXIT_ABSTRACTION: i32 = 3;
pub const EXIT_SANDWICH: i32 = 4;

/// Environment variable consulted when `--threads` is absent.
pub const THREADS_ENV: &str = "PETC_IMC_THREADS";

#[derive(Debug, Parser)]
#[command(name = "petc-imc", version, about = "Interval Markov chain abstractions of stochastic PETC loops")]
struct Cli {
    /// Worker threads (defaults to PETC_IMC_THREADS, then all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check the configuration and the system assumptions.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Build the interval Markov chain and write it as JSON.
    Abstract {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Bound the expected discounted reward on a stored chain.
    Evaluate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        imc: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo estimate of the expected discounted reward.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides solver.seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Abstract, evaluate and simulate, then test the Monte Carlo estimate against the bounds.
    Check {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides solver.seed.
        #[arg(long)]
        seed: Option<u64>,
    },
}

/// Process exit code for an error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config { .. } | Error::Dimension(_) | Error::Io(_) | Error::Json(_) | Error::Empty(_) => EXIT_INPUT,
        Error::Assumption(_) | Error::Degenerate { .. } => EXIT_ASSUMPTION,
        Error::InfeasibleRow { .. } | Error::Underflow(_) => EXIT_ABSTRACTION,
    }
}

/// Parses `args` (including the program name), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    if let Err(e) = init_threads(cli.threads) {
        eprintln!("error: {e}");
        return exit_code(&e);
    }
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn init_threads(flag: Option<usize>) -> Result<()> {
    let threads = match flag {
        Some(t) => Some(t),
        None => match std::env::var(THREADS_ENV) {
            Ok(v) if !v.trim().is_empty() => Some(
                v.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::config(THREADS_ENV, format!("expected a thread count, got `{v}`")))?,
            ),
            _ => None,
        },
    };
    if let Some(t) = threads {
        if t == 0 {
            return Err(Error::config("--threads", "must be at least 1"));
        }
        // A second call in the same process keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    Ok(())
}

fn dispatch(cmd: Command) -> Result<i32> {
    match cmd {
        Command::Validate { config } => {
            let cfg = Config::load(&config)?;
            let report = crate::model::validate_system(&cfg.system)?;
            for c in &report.checks {
                println!("{:<16} {}  {}", c.name, if c.passed { "ok  " } else { "FAIL" }, c.message);
            }
            println!(
                "region: {} cells over {:?} .. {:?}",
                cfg.partition.len(),
                cfg.partition.domain.lower,
                cfg.partition.domain.upper
            );
            println!("gamma: {}, R_max: {}", cfg.reward.gamma, cfg.reward.r_max(cfg.system.k_max));
            if report.passed() {
                Ok(EXIT_OK)
            } else {
                Ok(EXIT_ASSUMPTION)
            }
        }
        Command::Abstract { config, out } => {
            let cfg = Config::load(&config)?;
            let imc = build(&cfg)?;
            imc.write(&out)?;
            println!(
                "states: {}, edges: {}, repairs: {}",
                imc.len(),
                imc.edge_count(),
                imc.meta.repairs.len()
            );
            for r in &imc.meta.repairs {
                println!("  repair row {} {} {:.3e}", r.row, r.kind, r.amount);
            }
            println!("wrote {}", out.display());
            Ok(EXIT_OK)
        }
        Command::Evaluate { config, imc, out } => {
            let cfg = Config::load(&config)?;
            cfg.check_assumptions()?;
            let chain = IntervalMarkovChain::read(&imc)?;
            let vb = evaluate(&cfg, &chain)?;
            println!("E in [{}, {}] ({} iterations)", vb.expectation.0, vb.expectation.1, vb.iterations);
            emit(out.as_deref(), &results_json(&chain, &vb, cfg.reward.gamma)?)?;
            Ok(EXIT_OK)
        }
        Command::Simulate { config, out, seed } => {
            let cfg = Config::load(&config)?;
            cfg.check_assumptions()?;
            let mc = simulate(&cfg, seed)?;
            println!(
                "estimate: {} (std error {}, truncation {}, {} paths x {} steps)",
                mc.estimate, mc.std_error, mc.truncation, mc.paths, mc.steps
            );
            emit(out.as_deref(), &serde_json::to_string_pretty(&mc)?)?;
            Ok(EXIT_OK)
        }
        Command::Check { config, out, seed } => {
            let cfg = Config::load(&config)?;
            let imc = build(&cfg)?;
            let vb = evaluate(&cfg, &imc)?;
            let mc = simulate(&cfg, seed)?;
            let report = CheckReport::new(&vb, &mc, cfg.reward.r_max(cfg.system.k_max), cfg.reward.gamma);
            println!("E_lo: {}", report.e_lo);
            println!("MC estimate: {} (margin {})", report.estimate, report.margin);
            println!("E_hi: {}", report.e_hi);
            println!(
                "sandwich: {}, non-trivial: {}",
                if report.sandwich { "ok" } else { "VIOLATED" },
                if report.non_trivial { "ok" } else { "VIOLATED" }
            );
            if let Some(path) = out {
                std::fs::write(path, serde_json::to_string_pretty(&report)?)?;
            }
            Ok(if report.passed() { EXIT_OK } else { EXIT_SANDWICH })
        }
    }
}

fn emit(out: Option<&Path>, json: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, json)?,
        None => println!("{json}"),
    }
    Ok(())
}

/// Builds the chain for a configuration after checking its assumptions.
pub fn build(cfg: &Config) -> Result<IntervalMarkovChain> {
    cfg.check_assumptions()?;
    let abstractor = Abstractor::new(&cfg.system, cfg.solver.abstraction_settings())?;
    abstractor.build_imc(&cfg.partition, &cfg.initial_distribution)
}

/// Value bounds of the configured reward on `imc`.
pub fn evaluate(cfg: &Config, imc: &IntervalMarkovChain) -> Result<ValueBounds> {
    let k_max = cfg.system.k_max;
    if imc.meta.k_max != k_max || imc.meta.cells != cfg.partition.len() {
        return Err(Error::config(
            "--imc",
            format!(
                "chain was built for k_max {} over {} cells, configuration has k_max {k_max} over {} cells",
                imc.meta.k_max,
                imc.meta.cells,
                cfg.partition.len()
            ),
        ));
    }
    let (r_lo, r_hi) = reward_vectors(&cfg.reward, imc, &cfg.partition, k_max)?;
    let gamma = cfg.reward.gamma;
    let iterations = cfg
        .solver
        .iterations
        .unwrap_or_else(|| default_iterations(gamma, cfg.reward.r_max(k_max), TRUNCATION_TARGET));
    interval_value_iteration(imc, &r_lo, &r_hi, gamma, iterations)
}

pub fn simulate(cfg: &Config, seed: Option<u64>) -> Result<McResult> {
    mc_expectation(
        &cfg.system,
        &cfg.reward,
        &cfg.initial_distribution,
        &cfg.partition,
        cfg.solver.steps,
        cfg.solver.paths,
        seed.unwrap_or(cfg.solver.seed),
    )
}

/// Outcome of the Monte Carlo cross-check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub e_lo: f64,
    pub e_hi: f64,
    pub estimate: f64,
    pub std_error: f64,
    pub truncation: f64,
    /// `3·SE + truncation`.
    pub margin: f64,
    pub sandwich: bool,
    /// Width below the trivial bound `R_max / (1 − γ)`.
    pub non_trivial: bool,
}

impl CheckReport {
    pub fn new(vb: &ValueBounds, mc: &McResult, r_max: f64, gamma: f64) -> Self {
        let (e_lo, e_hi) = vb.expectation;
        let margin = 3.0 * mc.std_error + mc.truncation;
        CheckReport {
            e_lo,
            e_hi,
            estimate: mc.estimate,
            std_error: mc.std_error,
            truncation: mc.truncation,
            margin,
            sandwich: e_lo - margin <= mc.estimate && mc.estimate <= e_hi + margin,
            non_trivial: e_hi - e_lo < r_max / (1.0 - gamma),
        }
    }

    pub fn passed(&self) -> bool {
        self.sandwich && self.non_trivial
    }
}
