//! `qnd` command-line front end: parameter files in, deterministic CSV/JSON
//! tables out.
//!
//! Exit codes: 0 success (and every check passed), 2 a check failed,
//! 1 invalid input or a runtime error.

// `!(x > 0.0)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod output;
pub mod parse;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use output::{render, sibling, write_atomic, Format, RunManifest};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] qnd_core::Error),
    #[error("config: {0}")]
    Config(String),
    #[error("input: {0}")]
    Input(String),
    #[error("io: {0}")]
    Io(String),
}

#[derive(Debug, Parser)]
#[command(name = "qnd", version, about = "Phonon-number QND measurement toolkit")]
pub struct Cli {
    /// TOML parameter file (frequencies in Hz).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Factor that "A ≫ B" must clear.
    #[arg(long, global = true, default_value_t = qnd_core::rates::DEFAULT_DOMINANCE)]
    pub dominance: f64,
    /// Phonon Fock-space truncation; derived from n̄_th when absent.
    #[arg(long, global = true)]
    pub dim: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    /// Transition, thermal and measurement rates over n.
    Rates(RatesArgs),
    /// Feasibility checks; exit 2 when any fails.
    Feasibility(FeasibilityArgs),
    /// Integrate the reduced (or bipartite) master equation.
    Evolve(EvolveArgs),
    /// Gillespie or quantum-jump trajectory ensemble.
    Traject(TrajectArgs),
    /// Rates and feasibility over a parameter grid.
    Sweep(SweepArgs),
    /// Two-mode (supermode) relations.
    Twomode(TwomodeArgs),
    /// Perturbative couplings from sampled mode fields.
    Coupling(CouplingArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct RatesArgs {
    /// Largest n in the table.
    #[arg(long, default_value_t = 10)]
    pub n_max: usize,
    /// Rates in Hz instead of units of Γ_th⁰.
    #[arg(long)]
    pub absolute: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FeasibilityArgs {
    /// Fock state the rate conditions are evaluated at.
    #[arg(long, default_value_t = 0, value_parser = parse::parse_n, allow_negative_numbers = true)]
    pub n: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EvolveArgs {
    /// fock:k | thermal:nbar | diag:p0,p1,...
    #[arg(long, default_value = "fock:0")]
    pub initial: String,
    /// Seconds.
    #[arg(long)]
    pub t_final: f64,
    /// Output grid points including t = 0.
    #[arg(long, default_value_t = 101)]
    pub grid: usize,
    /// Include the cavity with this many Fock levels (bipartite model).
    #[arg(long)]
    pub cavity_dim: Option<usize>,
    #[arg(long, default_value_t = 1e-8)]
    pub rtol: f64,
    #[arg(long, default_value_t = 1e-12)]
    pub atol: f64,
    /// Check positivity at every grid point.
    #[arg(long)]
    pub certify: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Gillespie,
    QuantumJump,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TrajectArgs {
    #[arg(long, default_value_t = 0, value_parser = parse::parse_n, allow_negative_numbers = true)]
    pub n0: usize,
    /// Seconds per trajectory.
    #[arg(long)]
    pub t_final: f64,
    #[arg(long, default_value_t = 1)]
    pub count: usize,
    #[arg(long, value_enum, default_value_t = Method::Gillespie)]
    pub method: Method,
    /// Staircase sample spacing, seconds; t_final/1000 when absent.
    #[arg(long)]
    pub dt: Option<f64>,
    /// Moving-average window for the staircase, seconds; 0 = raw.
    #[arg(long, default_value_t = 0.0)]
    pub window: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SweepArgs {
    /// key=log:a:b:n | key=lin:a:b:n | key=list:v1,v2,...; repeat for a grid.
    #[arg(long = "axis", required = true)]
    pub axes: Vec<String>,
    /// Fock state for the rate columns.
    #[arg(long, default_value_t = 0, value_parser = parse::parse_n, allow_negative_numbers = true)]
    pub n: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TwomodeArgs {
    /// Largest |x| in the branch table, meters.
    #[arg(long)]
    pub x_max: Option<f64>,
    #[arg(long, default_value_t = 101)]
    pub points: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CouplingArgs {
    /// PATH@FREQ_HZ for a mode CSV (x_m,re_e,im_e,epsilon,depsilon_dx); the
    /// first is the mode of interest, the rest enter the cross terms.
    #[arg(long = "field", required = true)]
    pub fields: Vec<String>,
    /// CSV with position_m,normal_sign,eps_d,eps_s,qu.
    #[arg(long)]
    pub interfaces: Option<PathBuf>,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Rates(_) => "rates",
            Self::Feasibility(_) => "feasibility",
            Self::Evolve(_) => "evolve",
            Self::Traject(_) => "traject",
            Self::Sweep(_) => "sweep",
            Self::Twomode(_) => "twomode",
            Self::Coupling(_) => "coupling",
        }
    }
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: &Cli) -> Result<u8, CliError> {
    if let Ok(v) = std::env::var("QND_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| CliError::Input(format!("QND_THREADS must be a non-negative integer, got '{v}'")))?;
        if n > 0 {
            // a pool may already exist when called twice in one process
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    if !(cli.dominance > 1.0) {
        return Err(CliError::Input(format!("--dominance must exceed 1, got {}", cli.dominance)));
    }
    let (report, parameters) = commands::dispatch(cli)?;
    let manifest = RunManifest {
        artifact: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        subcommand: cli.command.name().to_string(),
        arguments: serde_json::json!({
            "command": output::to_value(&cli.command),
            "dominance": output::num(cli.dominance),
            "dim": cli.dim,
        }),
        parameters,
        seed: cli.seed,
        format: cli.format,
    };
    let hash = manifest.hash();
    let text = render(&report, cli.format, &hash);
    match &cli.out {
        Some(path) => {
            let mut outputs = vec![path.clone()];
            if let Some(side) = &report.sidecar {
                let p = sibling(path, ".stats.json");
                let mut body = serde_json::to_string_pretty(side).expect("json renders");
                body.push('\n');
                write_atomic(&p, &body)?;
                outputs.push(p);
            }
            write_atomic(path, &text)?;
            let mut m = serde_json::to_string_pretty(&manifest.record(&outputs)).expect("json renders");
            m.push('\n');
            write_atomic(&sibling(path, ".manifest.json"), &m)?;
        }
        None => print!("{text}"),
    }
    Ok(if report.passed { 0 } else { 2 })
}
