//! Command-line front end: `check`, `solve`, `simulate`, `mismatch`, `compare`.
//!
//! Exit codes: 0 on success, 1 on usage, configuration or I/O errors, 2 when
//! `check` finds a structural violation.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::config::{self, RunConfig};
use crate::error::{EccmError, Result};
use crate::model::{CovarianceSummary, PapInstance};
use crate::pap::{check_structure, sweep_levels, LevelOutcome, PapSolution, SolveMode};
use crate::riccati::monte_carlo_covariance;
use crate::sim::{compare_jamming, run_mismatch, run_simulation, SimulationRecord};

pub const TRACE_HEADER: [&str; 8] = [
    "t",
    "n",
    "lambda_max",
    "snr_bar",
    "j_star",
    "radar_utility",
    "jammer_utility",
    "kkt_residual",
];

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_STRUCTURE: i32 = 2;

/// Trajectories and horizon of the Monte-Carlo cross-check behind `simulate --seed`.
const CROSS_CHECK_TRAJECTORIES: usize = 2000;
const CROSS_CHECK_HORIZON: usize = 200;

#[derive(Debug, Parser)]
#[command(
    name = "eccm",
    version,
    about = "Radar pulse-power contracts against jamming"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the channel for TP2 and convex tail probabilities.
    Check(ConfigArgs),
    /// Solve the contract problem at one covariance summary.
    Solve(SolveArgs),
    /// Run the closed-loop simulation and write a CSV trace.
    Simulate(SimulateArgs),
    /// Run the closed loop under channel mismatch (needs channel.P_hat).
    Mismatch(OutputArgs),
    /// Run two configurations and report the radar-utility gap.
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    #[arg(long)]
    pub config: PathBuf,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Output file; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Full,
    Relaxed,
    Affine,
}

impl From<ModeArg> for SolveMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Full => SolveMode::Full,
            ModeArg::Relaxed => SolveMode::Relaxed,
            ModeArg::Affine => SolveMode::Affine,
        }
    }
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Covariance summary; defaults to the configured initial value.
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long, value_enum, default_value = "full")]
    pub mode: ModeArg,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Cross-check the final covariance by Monte-Carlo simulation with this seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Exactly two configurations: the baseline, then the alternative.
    #[arg(long, num_args = 1, required = true)]
    pub config: Vec<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses `args` (including the program name), runs the command, and
/// returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
        }
    };
    match execute(&cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

fn execute(command: &Command) -> Result<i32> {
    match command {
        Command::Check(a) => cmd_check(&config::load(&a.config)?),
        Command::Solve(a) => {
            let config = config::load(&a.config)?;
            let sigma = a.sigma.unwrap_or(config.simulation.initial_sigma);
            let output = cmd_solve(&config, sigma, a.mode.into())?;
            write_json(a.out.as_deref(), &output)?;
            Ok(EXIT_OK)
        }
        Command::Simulate(a) => {
            let config = config::load(&a.config)?;
            let mut out = open_output(a.out.as_deref())?;
            cmd_simulate(&config, &mut out, a.seed)?;
            out.flush()?;
            Ok(EXIT_OK)
        }
        Command::Mismatch(a) => {
            let config = config::load(&a.config)?;
            let mut out = open_output(a.out.as_deref())?;
            cmd_mismatch(&config, &mut out)?;
            out.flush()?;
            Ok(EXIT_OK)
        }
        Command::Compare(a) => {
            if a.config.len() != 2 {
                return Err(EccmError::Config(format!(
                    "compare takes exactly two --config files, got {}",
                    a.config.len()
                )));
            }
            let first = config::load(&a.config[0])?;
            let second = config::load(&a.config[1])?;
            let mut out = open_output(a.out.as_deref())?;
            cmd_compare(&first, &second, &mut out)?;
            out.flush()?;
            Ok(EXIT_OK)
        }
    }
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| EccmError::Io(format!("{}: {e}", p.display())))?,
        )),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

fn write_json<T: Serialize>(path: Option<&Path>, value: &T) -> Result<()> {
    let mut out = open_output(path)?;
    serde_json::to_writer_pretty(&mut out, value).map_err(|e| EccmError::Io(e.to_string()))?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

/// Prints the structure report; exit code 2 if either check fails.
pub fn cmd_check(config: &RunConfig) -> Result<i32> {
    let report = check_structure(&config.channel);
    write_json(None, &report)?;
    Ok(if report.passes() {
        EXIT_OK
    } else {
        EXIT_STRUCTURE
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "status")]
pub enum LevelReport {
    Optimal {
        level: usize,
        j: f64,
        solution: PapSolution,
    },
    Infeasible {
        level: usize,
        j: f64,
    },
    Failed {
        level: usize,
        j: f64,
        error: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveOutput {
    pub sigma: f64,
    pub mode: SolveMode,
    pub levels: Vec<LevelReport>,
    pub winner_index: usize,
    pub winner: PapSolution,
}

pub fn cmd_solve(config: &RunConfig, sigma: f64, mode: SolveMode) -> Result<SolveOutput> {
    let summary = CovarianceSummary::new(sigma)?;
    let base = PapInstance::new(&config.channel, config.params, summary, 0)?;
    let sweep = sweep_levels(&base, mode)?;
    let grid = config.channel.grid();
    let levels = sweep
        .levels
        .iter()
        .enumerate()
        .map(|(level, outcome)| {
            let j = grid.level(level);
            match outcome {
                LevelOutcome::Solved(s) => LevelReport::Optimal {
                    level,
                    j,
                    solution: s.clone(),
                },
                LevelOutcome::Infeasible => LevelReport::Infeasible { level, j },
                LevelOutcome::Failed(e) => LevelReport::Failed {
                    level,
                    j,
                    error: e.to_string(),
                },
            }
        })
        .collect();
    Ok(SolveOutput {
        sigma,
        mode,
        levels,
        winner_index: sweep.winner,
        winner: sweep.best().clone(),
    })
}

/// `{:.16e}`: 17 significant digits, enough to round-trip any `f64`.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn trace_fields(r: &SimulationRecord) -> Vec<String> {
    vec![
        r.t.to_string(),
        r.n.to_string(),
        format_float(r.lambda_max),
        format_float(r.snr_bar),
        format_float(r.j_star),
        format_float(r.radar_utility),
        format_float(r.jammer_utility),
        format_float(r.kkt_residual),
    ]
}

fn csv_error(e: csv::Error) -> EccmError {
    EccmError::Io(e.to_string())
}

pub fn cmd_simulate(config: &RunConfig, out: &mut dyn Write, seed: Option<u64>) -> Result<()> {
    let sim = config.simulation_config()?;
    let trace = run_simulation(&sim)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_HEADER).map_err(csv_error)?;
    for r in &trace.records {
        w.write_record(trace_fields(r)).map_err(csv_error)?;
    }
    w.flush()?;
    if let (Some(seed), Some(last)) = (seed, trace.records.last()) {
        let target = &sim.targets[0].model;
        let model = target.with_process_noise(target.process_noise() * last.t as f64)?;
        let est = monte_carlo_covariance(
            &model,
            last.snr_bar,
            CROSS_CHECK_TRAJECTORIES,
            CROSS_CHECK_HORIZON,
            seed,
        )?;
        let are = model.solve_are(last.snr_bar)?.lambda_max.value();
        let gap = (est.empirical_lambda_max - are).abs() / are;
        log::info!(
            "Monte-Carlo check (seed {seed}): empirical λmax {:.6}, Riccati λmax {are:.6}, relative gap {gap:.4}",
            est.empirical_lambda_max
        );
        if gap > 0.05 {
            log::warn!(
                "Monte-Carlo covariance differs from the Riccati solution by {:.1}%",
                gap * 100.0
            );
        }
    }
    Ok(())
}

pub fn cmd_mismatch(config: &RunConfig, out: &mut dyn Write) -> Result<()> {
    let sim = config.simulation_config()?;
    if sim.mismatch.is_none() {
        return Err(EccmError::Config("mismatch needs channel.P_hat".into()));
    }
    let trace = run_mismatch(&sim)?;
    let mut w = csv::Writer::from_writer(out);
    let mut header = TRACE_HEADER.to_vec();
    header.extend(["radar_degradation", "jammer_degradation"]);
    w.write_record(&header).map_err(csv_error)?;
    for r in &trace.records {
        let mut fields = trace_fields(&r.nominal);
        fields.push(format_float(r.radar_degradation));
        fields.push(format_float(r.jammer_degradation));
        w.write_record(fields).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

/// Rows describe the second configuration; `utility_gap` is its radar
/// utility minus the first configuration's.
pub fn cmd_compare(first: &RunConfig, second: &RunConfig, out: &mut dyn Write) -> Result<()> {
    let cmp = compare_jamming(&first.simulation_config()?, &second.simulation_config()?)?;
    let mut w = csv::Writer::from_writer(out);
    let mut header = TRACE_HEADER.to_vec();
    header.push("utility_gap");
    w.write_record(&header).map_err(csv_error)?;
    for (r, gap) in cmp.second.records.iter().zip(&cmp.utility_gap) {
        let mut fields = trace_fields(r);
        fields.push(format_float(*gap));
        w.write_record(fields).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}
