//! Command-line front end for the repeater-chain simulator.
//!
//! Subcommands: `rate` (one simulated point), `sweep` (a parameter grid to
//! CSV), `mu` (Monte-Carlo max-of-N attempt-factor table), `analytic`
//! (closed-form models without simulating) and `trace` (the event log of
//! one run).  Configuration errors exit with code 2, runtime failures with
//! code 1.

mod config;
mod exec;
mod output;

use std::cell::RefCell;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::rc::Rc;

use clap::{Args, Parser, Subcommand, ValueEnum};

use repchain_core::analytics::{self, estimate_mu, MuSource};
use repchain_core::engine::Event;
use repchain_core::simulation::{
    measure_rate_observed, run_point, PointSpec, ProtocolKind, StopCondition,
};
use repchain_core::SimTime;

use crate::config::RunConfig;

#[derive(Parser)]
#[command(
    name = "repchain",
    version,
    about = "Simulate and model entanglement distribution over a chain of \
             quantum repeaters with finite memory lifetimes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one operating point and print it as a CSV row.
    Rate(RateArgs),
    /// Simulate every point of a configured grid and emit CSV.
    Sweep(SweepArgs),
    /// Print the Monte-Carlo estimate of the max-of-N attempt factor.
    Mu(MuArgs),
    /// Evaluate a closed-form model without simulating.
    Analytic(AnalyticArgs),
    /// Emit the tab-separated event trace of one simulated point.
    Trace(TraceArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ProtocolArg {
    Synchronous,
    Independent,
}

impl From<ProtocolArg> for ProtocolKind {
    fn from(p: ProtocolArg) -> ProtocolKind {
        match p {
            ProtocolArg::Synchronous => ProtocolKind::Synchronous,
            ProtocolArg::Independent => ProtocolKind::Independent,
        }
    }
}

#[derive(Args)]
struct PointArgs {
    /// End-to-end chain length in km.
    #[arg(long)]
    l_km: f64,
    /// Repeater nodes between the end nodes.
    #[arg(long, default_value_t = 0)]
    repeaters: u32,
    #[arg(long, value_enum, default_value_t = ProtocolArg::Synchronous)]
    protocol: ProtocolArg,
    /// Memory lifetime in ms (`inf` disables expiry); overrides the config.
    #[arg(long)]
    tau_mem_ms: Option<f64>,
    /// Independent scheme: keep surviving segments after a failed swap.
    #[arg(long)]
    partial_discard: bool,
}

#[derive(Args)]
struct StopArgs {
    /// Stop after this many end-to-end successes.
    #[arg(long)]
    max_successes: Option<u64>,
    /// Stop after this much simulated time, in seconds.
    #[arg(long)]
    max_sim_time_s: Option<f64>,
}

impl StopArgs {
    /// Flags win over the config; setting either flag replaces both bounds.
    fn resolve(&self, cfg: &RunConfig) -> StopCondition {
        if self.max_successes.is_some() || self.max_sim_time_s.is_some() {
            StopCondition {
                max_successes: self.max_successes,
                max_sim_time: self.max_sim_time_s.map(SimTime::from_secs),
            }
        } else {
            cfg.stop_condition()
        }
    }
}

#[derive(Args)]
struct RateArgs {
    #[command(flatten)]
    point: PointArgs,
    /// Hardware parameters and defaults; reference values when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// RNG seed; the config's master seed when omitted.
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    stop: StopArgs,
    /// Write the CSV to a file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// Grid definition (params and sweep sections).
    #[arg(long)]
    config: PathBuf,
    /// Override the config's master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the config's CSV destination.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; the output is identical for any value.
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

#[derive(Args)]
struct MuArgs {
    /// Link counts to estimate, either one value or an inclusive `a..b`.
    #[arg(long, default_value = "1..8", value_parser = parse_n_range)]
    n: (u32, u32),
    /// Single-attempt success probability used for the draws.
    #[arg(long, default_value_t = 1e-3)]
    p1: f64,
    /// Repetitions per link count (integer; `1e6` style accepted).
    #[arg(long, default_value = "1000000", value_parser = parse_u64_loose)]
    reps: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    /// Direct transmission rate, including the memory-lifetime cutoff.
    NoRepeater,
    /// Synchronous-rounds chain rate (unbounded memory).
    Synchronous,
    /// Independent-links chain rate (unbounded memory).
    Independent,
    /// Single-attempt success probability of one elementary link.
    PSingle,
    /// Expected age of the oldest memory at establishment, independent
    /// scheme, in seconds.
    DeltaT,
}

#[derive(Args)]
struct AnalyticArgs {
    #[arg(long, value_enum)]
    model: ModelArg,
    /// End-to-end chain length in km.
    #[arg(long)]
    l_km: f64,
    #[arg(long, default_value_t = 0)]
    repeaters: u32,
    #[arg(long)]
    e_b: Option<f64>,
    #[arg(long)]
    e_s: Option<f64>,
    #[arg(long)]
    e_m: Option<f64>,
    #[arg(long)]
    e_d: Option<f64>,
    #[arg(long)]
    alpha_db_per_km: Option<f64>,
    #[arg(long)]
    v_km_per_s: Option<f64>,
    /// Memory lifetime in ms (`inf` disables expiry).
    #[arg(long)]
    tau_mem_ms: Option<f64>,
    /// Max-of-N correction source for the independent model.
    #[arg(long, value_enum, default_value_t = MuModeArg::Mc)]
    mu_mode: MuModeArg,
    #[arg(long, default_value_t = 1e-3)]
    mu_p1: f64,
    #[arg(long, default_value = "1000000", value_parser = parse_u64_loose)]
    mu_reps: u64,
    #[arg(long, default_value_t = 0)]
    mu_seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum MuModeArg {
    /// Monte-Carlo estimate.
    Mc,
    /// `sqrt(N)` shorthand.
    Sqrt,
}

#[derive(Args)]
struct TraceArgs {
    #[command(flatten)]
    point: PointArgs,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Stop bounds; defaults to one success or one simulated second,
    /// whichever comes first.
    #[command(flatten)]
    stop: StopArgs,
    /// Write the trace to a file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

enum CliError {
    Config(String),
    Runtime(String),
}

fn config_err<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Config(e.to_string())
}

fn runtime_err<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Runtime(e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Rate(args) => cmd_rate(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Mu(args) => cmd_mu(args),
        Command::Analytic(args) => cmd_analytic(args),
        Command::Trace(args) => cmd_trace(args),
    }
}

fn load_config(path: Option<&Path>) -> Result<RunConfig, CliError> {
    let Some(path) = path else {
        return Ok(RunConfig::default());
    };
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    config::parse(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn write_out(path: Option<&Path>, content: &str) -> Result<(), CliError> {
    match path {
        Some(path) => fs::write(path, content)
            .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display()))),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

/// Build the point spec shared by `rate` and `trace`.
fn point_spec(
    cfg: &RunConfig,
    point: &PointArgs,
    stop: StopCondition,
    seed: Option<u64>,
) -> PointSpec {
    let mut params = cfg.hardware_params();
    if let Some(ms) = point.tau_mem_ms {
        params.tau_mem_s = ms * 1e-3;
    }
    PointSpec {
        params,
        length_km: point.l_km,
        repeaters: point.repeaters,
        protocol: point.protocol.into(),
        partial_discard: point.partial_discard,
        stop,
        seed: seed.unwrap_or(cfg.sweep.master_seed),
    }
}

fn cmd_rate(args: RateArgs) -> Result<(), CliError> {
    let cfg = load_config(args.config.as_deref())?;
    let spec = point_spec(&cfg, &args.point, args.stop.resolve(&cfg), args.seed);
    let mu = match spec.protocol {
        ProtocolKind::Independent => cfg.mu_source().mu(spec.repeaters + 1).map_err(config_err)?,
        ProtocolKind::Synchronous => 1.0,
    };
    let row = run_point(&spec, mu).map_err(config_err)?;
    let mut text = String::new();
    let _ = writeln!(text, "{}", output::CSV_HEADER);
    let _ = writeln!(text, "{}", output::csv_row(&row));
    write_out(args.out.as_deref(), &text)
}

fn cmd_sweep(args: SweepArgs) -> Result<(), CliError> {
    let cfg = load_config(Some(&args.config))?;
    let mut spec = cfg.sweep_spec();
    if let Some(seed) = args.seed {
        spec.master_seed = seed;
    }
    let rows = exec::run_sweep_threaded(&spec, args.threads).map_err(config_err)?;
    let mut buf = Vec::new();
    output::write_csv(&mut buf, &rows).map_err(runtime_err)?;
    let text = String::from_utf8(buf).expect("CSV is ASCII");
    let path = args.out.or(cfg.output.csv);
    write_out(path.as_deref(), &text)
}

fn cmd_mu(args: MuArgs) -> Result<(), CliError> {
    let (lo, hi) = args.n;
    let mut text = String::from("n\tmu\tmu_over_sqrt_n\tstddev_norm\n");
    for n in lo..=hi {
        let est = estimate_mu(n, args.p1, args.reps, args.seed).map_err(config_err)?;
        let _ = writeln!(
            text,
            "{n}\t{}\t{}\t{}",
            est.mean_normalized,
            est.mean_normalized / analytics::mu_sqrt_approx(n),
            est.stddev_normalized,
        );
    }
    print!("{text}");
    Ok(())
}

fn cmd_analytic(args: AnalyticArgs) -> Result<(), CliError> {
    let mut params = repchain_core::HardwareParams::default();
    if let Some(v) = args.e_b {
        params.e_b = v;
    }
    if let Some(v) = args.e_s {
        params.e_s = v;
    }
    if let Some(v) = args.e_m {
        params.e_m = v;
    }
    if let Some(v) = args.e_d {
        params.e_d = v;
    }
    if let Some(v) = args.alpha_db_per_km {
        params.alpha_db_per_km = v;
    }
    if let Some(v) = args.v_km_per_s {
        params.v_km_per_s = v;
    }
    if let Some(ms) = args.tau_mem_ms {
        params.tau_mem_s = ms * 1e-3;
    }
    params.validate().map_err(config_err)?;
    if !(args.l_km.is_finite() && args.l_km > 0.0) {
        return Err(CliError::Config(format!(
            "l_km must be finite and > 0, got {}",
            args.l_km
        )));
    }

    let mu = || -> Result<f64, CliError> {
        let source = match args.mu_mode {
            MuModeArg::Mc => MuSource::MonteCarlo {
                p1: args.mu_p1,
                repetitions: args.mu_reps,
                seed: args.mu_seed,
            },
            MuModeArg::Sqrt => MuSource::SqrtApprox,
        };
        source.mu(args.repeaters + 1).map_err(config_err)
    };

    let value = match args.model {
        ModelArg::NoRepeater => analytics::rate_no_repeater(&params, args.l_km),
        ModelArg::Synchronous => analytics::rate_synchronous(&params, args.l_km, args.repeaters),
        ModelArg::Independent => {
            analytics::rate_independent_with_mu(&params, args.l_km, args.repeaters, mu()?)
        }
        ModelArg::PSingle => analytics::p_single(&params, args.l_km),
        ModelArg::DeltaT => {
            analytics::oldest_memory_age_s(&params, args.l_km, args.repeaters, mu()?)
        }
    };
    println!("{value}");
    Ok(())
}

fn cmd_trace(args: TraceArgs) -> Result<(), CliError> {
    let cfg = load_config(args.config.as_deref())?;
    let stop = if args.stop.max_successes.is_some() || args.stop.max_sim_time_s.is_some() {
        args.stop.resolve(&cfg)
    } else {
        StopCondition::either(1, SimTime::from_secs(1.0))
    };
    let spec = point_spec(&cfg, &args.point, stop, args.seed);

    let buffer = Rc::new(RefCell::new(String::new()));
    let sink = Rc::clone(&buffer);
    let observer = Box::new(move |event: &Event| {
        let mut text = sink.borrow_mut();
        text.push_str(&output::trace_line(event));
        text.push('\n');
    });
    let measurement = measure_rate_observed(&spec, observer).map_err(config_err)?;
    eprintln!(
        "{} successes in {} simulated seconds",
        measurement.stats.successes,
        measurement.stats.elapsed.as_secs()
    );
    let text = buffer.borrow().clone();
    write_out(args.out.as_deref(), &text)
}

fn parse_n_range(s: &str) -> Result<(u32, u32), String> {
    let parse_one = |part: &str| -> Result<u32, String> {
        part.trim()
            .parse::<u32>()
            .map_err(|_| format!("expected an integer, got `{part}`"))
    };
    let (lo, hi) = match s.split_once("..") {
        Some((a, b)) => (parse_one(a)?, parse_one(b)?),
        None => {
            let n = parse_one(s)?;
            (n, n)
        }
    };
    if lo == 0 || hi < lo {
        return Err("range must be 1-based and non-empty".to_string());
    }
    Ok((lo, hi))
}

fn parse_u64_loose(s: &str) -> Result<u64, String> {
    if let Ok(v) = s.parse::<u64>() {
        return Ok(v);
    }
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() && v >= 0.0 && v.fract() == 0.0 && v <= (1u64 << 53) as f64 => {
            Ok(v as u64)
        }
        _ => Err(format!("expected a non-negative integer, got `{s}`")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn n_range_accepts_single_values_and_inclusive_ranges() {
        assert_eq!(parse_n_range("4").unwrap(), (4, 4));
        assert_eq!(parse_n_range("1..8").unwrap(), (1, 8));
        assert_eq!(parse_n_range(" 2 .. 3 ").unwrap(), (2, 3));
        assert!(parse_n_range("0..4").is_err());
        assert!(parse_n_range("5..2").is_err());
        assert!(parse_n_range("x").is_err());
    }

    #[test]
    fn loose_integer_parser_accepts_exponent_notation() {
        assert_eq!(parse_u64_loose("1000000").unwrap(), 1_000_000);
        assert_eq!(parse_u64_loose("1e6").unwrap(), 1_000_000);
        assert!(parse_u64_loose("1.5e1").is_ok());
        assert!(parse_u64_loose("1.23").is_err());
        assert!(parse_u64_loose("-4").is_err());
        assert!(parse_u64_loose("inf").is_err());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
