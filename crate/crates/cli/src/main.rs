use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use jumpcode::experiment::{self, ExperimentConfig, Report, VerifyKind, OUT_DIR_ENV};

#[derive(Parser)]
#[command(name = "jumpcode", version, about = "Jump codes: construction, verification, simulation and gate synthesis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Number of physical qubits (even)
    #[arg(long, global = true, default_value_t = 4)]
    n: usize,
    /// Relative phase between paired codeword components
    #[arg(long, global = true, default_value_t = 0.0, allow_negative_numbers = true)]
    phase: f64,
    /// Decay rate, one value or one per qubit
    #[arg(long, global = true, value_delimiter = ',', default_value = "1.0")]
    kappa: Vec<f64>,
    #[arg(long, global = true, default_value_t = 3.0)]
    t_final: f64,
    #[arg(long, global = true, default_value_t = 1000)]
    trajectories: usize,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Delay between a detected jump and its recovery
    #[arg(long, global = true, default_value_t = 0.0)]
    delay: f64,
    /// Factors applied to the true decay rates, one value or one per qubit
    #[arg(long, global = true, value_delimiter = ',')]
    mismatch: Vec<f64>,
    /// Probability that a jump goes undetected
    #[arg(long, global = true, default_value_t = 0.0)]
    p_miss: f64,
    /// Tolerance (default 1e-9; 1e-2 for synthesis)
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Output directory
    #[arg(long, global = true, env = OUT_DIR_ENV)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate or inspect a jump code description
    #[command(subcommand)]
    Code(CodeCommand),
    /// Run a verification suite; exit status 0 only if every check passes
    #[command(subcommand)]
    Verify(VerifyCommand),
    /// Trajectory simulation with recoveries
    #[command(subcommand)]
    Sim(SimCommand),
    /// One-qutrit gate synthesis
    #[command(subcommand)]
    Gates(GatesCommand),
}

#[derive(Subcommand)]
enum CodeCommand {
    Generate,
    /// Read a code description from FILE, or stdin when omitted
    Inspect { file: Option<PathBuf> },
}

#[derive(Subcommand)]
enum VerifyCommand {
    /// Knill-Laflamme condition for the code against its decay operators
    Kl {
        /// Check each decay channel separately, as when the jump position is observed
        #[arg(long)]
        known_position: bool,
    },
    /// No-jump evolution is a scalar on the decoherence-free subspace
    Dfs,
    /// Logical matrices of the six exchange Hamiltonians on 1-JC(4,2,3)
    Table1,
    /// Lie closure of the eight qutrit generators
    Closure,
    /// Two-register entangling gate: action, leakage and primitivity
    Entangle,
}

#[derive(Subcommand)]
enum SimCommand {
    /// Simulate encoded decay with recoveries; writes jumps.csv and summary.json
    Run,
}

#[derive(Subcommand)]
enum GatesCommand {
    Synthesize {
        /// 3×3 target as nested rows of [re, im] pairs
        #[arg(long, conflicts_with = "random")]
        target: Option<PathBuf>,
        /// Use a Haar-random SU(3) target drawn from this seed
        #[arg(long)]
        random: Option<u64>,
    },
}

impl Common {
    fn config(&self, default_tol: f64) -> ExperimentConfig {
        ExperimentConfig {
            n: self.n,
            phase: self.phase,
            kappa: self.kappa.clone(),
            t_final: self.t_final,
            trajectories: self.trajectories,
            seed: self.seed,
            delay: self.delay,
            mismatch: self.mismatch.clone(),
            p_miss: self.p_miss,
            tol: self.tol.unwrap_or(default_tol),
            out: self.out.clone(),
        }
    }
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<()> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
}

fn emit(report: &Report, cfg: &ExperimentConfig, name: &str) -> Result<bool> {
    let text = report.to_json()?;
    println!("{text}");
    if let Some(dir) = cfg.out_dir() {
        write_file(&dir, name, &text)?;
    }
    Ok(report.pass)
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Code(CodeCommand::Generate) => {
            let cfg = cli.common.config(1e-9);
            let json = experiment::code_generate(&cfg)?.to_json()?;
            println!("{json}");
            if let Some(dir) = cfg.out_dir() {
                write_file(&dir, "code.json", &json)?;
            }
            Ok(true)
        }
        Command::Code(CodeCommand::Inspect { file }) => {
            let text = match file {
                Some(path) => fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?,
                None => {
                    let mut s = String::new();
                    std::io::stdin().read_to_string(&mut s)?;
                    s
                }
            };
            let cfg = cli.common.config(1e-9);
            emit(&experiment::code_inspect(&text)?, &cfg, "inspect.json")
        }
        Command::Verify(v) => {
            let cfg = cli.common.config(1e-9);
            let (kind, name) = match v {
                VerifyCommand::Kl { known_position } => (VerifyKind::Kl { known_position }, "verify_kl.json"),
                VerifyCommand::Dfs => (VerifyKind::Dfs, "verify_dfs.json"),
                VerifyCommand::Table1 => (VerifyKind::Table1, "verify_table1.json"),
                VerifyCommand::Closure => (VerifyKind::Closure, "verify_closure.json"),
                VerifyCommand::Entangle => (VerifyKind::Entangle, "verify_entangle.json"),
            };
            emit(&experiment::verify(kind, &cfg)?, &cfg, name)
        }
        Command::Sim(SimCommand::Run) => {
            let cfg = cli.common.config(1e-9);
            let outcome = experiment::sim_run(&cfg)?;
            let dir = cfg.out_dir().unwrap_or_else(|| PathBuf::from("."));
            experiment::write_sim_outputs(&outcome, &dir)?;
            println!("{}", serde_json::to_string_pretty(&outcome.summary)?);
            Ok(true)
        }
        Command::Gates(GatesCommand::Synthesize { target, random }) => {
            let cfg = cli.common.config(1e-2);
            let u = match (target, random) {
                (Some(path), _) => experiment::parse_target(
                    &fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?,
                )?,
                (None, Some(seed)) => experiment::random_target(seed),
                (None, None) => anyhow::bail!("either --target or --random is required"),
            };
            let (report, program) = experiment::gates_synthesize(&u, &cfg)?;
            if let (Some(program), Some(dir)) = (&program, cfg.out_dir()) {
                write_file(&dir, "program.json", &program.to_json()?)?;
            }
            emit(&report, &cfg, "synthesis.json")
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
