//! Command-line front end. Exit codes: 0 success, 1 usage, 2 data error,
//! 3 numerical failure.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::detequiv;
use crate::error::{Error, Result};
use crate::io::{self, CaseFile};
use crate::risk::RiskMeasure;
use crate::scenario::{IterationSampler, SamplerMode};
use crate::sddp::{self, EngineConfig, Model};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

pub const CONVERGENCE_CSV: &str = "convergence.csv";
pub const BOUNDS_JSON: &str = "bounds.json";
pub const POLICY_JSON: &str = "policy.json";
pub const CONVERGENCE_SVG: &str = "convergence.svg";

#[derive(Parser, Debug)]
#[command(name = "sddp", version, about = "Risk-averse multicut SDDP for hydrothermal dispatch")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct RiskArgs {
    /// Weight of CVaR in the risk measure, in [0, 1]
    #[arg(long)]
    lambda: Option<f64>,
    /// CVaR level, in [0, 1)
    #[arg(long)]
    alpha: Option<f64>,
}

impl RiskArgs {
    fn resolve(&self, base: RiskMeasure) -> Result<RiskMeasure> {
        RiskMeasure::new(self.lambda.unwrap_or(base.lambda()), self.alpha.unwrap_or(base.alpha()))
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a policy and write convergence.csv, bounds.json and policy.json
    Solve {
        case: PathBuf,
        #[arg(long)]
        iters: Option<usize>,
        #[arg(long)]
        min_iters: Option<usize>,
        #[arg(long)]
        paths: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        risk: RiskArgs,
        #[arg(long)]
        sampling: Option<SamplerMode>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Print the exact optimal cost from the full-tree program
    Detequiv {
        case: PathBuf,
        #[command(flatten)]
        risk: RiskArgs,
        #[arg(long, default_value_t = 4)]
        precision: usize,
    },
    /// Exact tree evaluation of a trained policy
    Evaluate {
        case: PathBuf,
        #[arg(long)]
        policy: PathBuf,
        #[command(flatten)]
        risk: RiskArgs,
        #[arg(long, default_value_t = 4)]
        precision: usize,
    },
    /// Monte Carlo simulation of a trained policy
    Simulate {
        case: PathBuf,
        #[arg(long)]
        policy: PathBuf,
        #[arg(long, default_value_t = 1000)]
        paths: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// uniform or risk
        #[arg(long, default_value = "uniform")]
        sampling: SamplerMode,
        #[command(flatten)]
        risk: RiskArgs,
    },
    /// Draw convergence.svg from a run directory
    Plot {
        run_dir: PathBuf,
        #[arg(long, default_value_t = 1.96)]
        confidence: f64,
    },
}

fn exit_code(err: &Error) -> i32 {
    if err.is_numerical() {
        EXIT_NUMERICAL
    } else {
        EXIT_DATA
    }
}

/// Parses `argv` (program name first), runs the command and returns the exit
/// code. Output goes to stdout, diagnostics to stderr.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let mut out = String::new();
    match execute(cli.command, &mut out) {
        Ok(()) => {
            print!("{out}");
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn load(path: &Path) -> Result<CaseFile> {
    io::parse_case(path).map_err(|e| match e {
        Error::Io(io) => Error::Io(std::io::Error::new(io.kind(), format!("{}: {io}", path.display()))),
        other => other,
    })
}

fn execute(command: Command, out: &mut String) -> Result<()> {
    match command {
        Command::Solve { case, iters, min_iters, paths, seed, risk, sampling, out: dir } => {
            let file = load(&case)?;
            let d = file.defaults;
            let max_iterations = iters.unwrap_or(d.max_iterations);
            let config = EngineConfig {
                max_iterations,
                min_iterations: min_iters.unwrap_or(d.min_iterations.min(max_iterations)),
                batch_size: paths.unwrap_or(d.batch_size),
                seed: seed.unwrap_or(d.seed),
                sampler_mode: sampling.unwrap_or(d.sampler_mode),
                measure: risk.resolve(d.measure)?,
                ..d
            };
            let (policy, log) = sddp::train(&file.system, &file.lattice, config)?;

            let csv = io::bounds_to_csv(&log)?;
            let summary = serde_json::json!({
                "iterations": policy.iterations,
                "lower_bound": policy.lower_bound,
                "upper_bound": policy.upper_bound,
                "fingerprint": policy.fingerprint,
            });
            let summary = serde_json::to_string_pretty(&summary).map_err(|e| Error::CorruptFile(e.to_string()))?;
            fs::create_dir_all(&dir)?;
            io::write_atomic(&dir.join(CONVERGENCE_CSV), csv.as_bytes())?;
            io::write_atomic(&dir.join(BOUNDS_JSON), summary.as_bytes())?;
            io::write_policy(&policy, &dir.join(POLICY_JSON))?;
            out.push_str(&format!("iterations {}\nlower_bound {}\n", policy.iterations, policy.lower_bound));
            if let Some(ub) = policy.upper_bound {
                out.push_str(&format!("ub_mean {}\nub_stderr {}\n", ub.mean, ub.stderr));
            }
        }
        Command::Detequiv { case, risk, precision } => {
            let file = load(&case)?;
            let measure = risk.resolve(file.defaults.measure)?;
            let value = detequiv::solve_tree(&file.system, &file.lattice, &measure)?;
            out.push_str(&format!("{value:.precision$}\n"));
        }
        Command::Evaluate { case, policy, risk, precision } => {
            let file = load(&case)?;
            let policy = io::read_policy(&policy, &file)?;
            let model = Model::new(&file.system, &file.lattice, risk.resolve(policy.config.measure)?)?;
            let value = model.evaluate_policy_exact(&policy.pool)?;
            out.push_str(&format!("{value:.precision$}\n"));
        }
        Command::Simulate { case, policy, paths, seed, sampling, risk } => {
            let file = load(&case)?;
            let policy = io::read_policy(&policy, &file)?;
            let sampler = match sampling {
                SamplerMode::Uniform => IterationSampler::Uniform,
                SamplerMode::RiskAdjusted => IterationSampler::RiskAdjusted,
                SamplerMode::Alternating => {
                    return Err(Error::InvalidConfig("simulate takes `uniform` or `risk` sampling".into()))
                }
            };
            if paths == 0 {
                return Err(Error::EmptyBatch);
            }
            let model = Model::new(&file.system, &file.lattice, risk.resolve(policy.config.measure)?)?;
            let records = model.simulate(&policy.pool, sampler, paths, seed)?;
            let ub = sddp::upper_bound_estimate(&records)?;
            out.push_str(&format!("mean {}\nstderr {}\nsamples {}\n", ub.mean, ub.stderr, ub.samples));
        }
        Command::Plot { run_dir, confidence } => {
            let log = io::bounds_from_csv(&fs::read_to_string(run_dir.join(CONVERGENCE_CSV))?)?;
            let target = run_dir.join(CONVERGENCE_SVG);
            io::write_atomic(&target, io::convergence_svg(&log, confidence).as_bytes())?;
            out.push_str(&format!("{}\n", target.display()));
        }
    }
    Ok(())
}
