//! `tslab`: command-line face of the laboratory.
//!
//! Exit codes: 0 ok, 1 configuration error, 2 invariant or audit failure,
//! 3 I/O error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;

use tslab::config::{ExperimentConfig, OutputFormat};
use tslab::diagnostics::{check_invariants, event_probability_audit, AuditReport};
use tslab::harness::{audit_plan, audit_results, replicate, run_experiment, scaling_study};
use tslab::output::{emit_audit, emit_output, emit_scaling, read_summary, read_trace_csv};
use tslab::LabError;

#[derive(Parser)]
#[command(name = "tslab", version, about = "Thompson Sampling laboratory for linear contextual bandits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment manifest (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the manifest's master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the replication count.
    #[arg(long)]
    reps: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<OutputFormat>,
    /// Keep per-arm vectors only every N rounds.
    #[arg(long)]
    thin: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single replication.
    Run(Common),
    /// Run all replications; audits them when there are enough.
    Replicate(Common),
    /// Regret growth over the manifest's `[scaling]` grid.
    Scaling(Common),
    /// Re-check invariants and event frequencies over stored traces.
    Audit {
        /// Directory holding `summary.json` and `run_*.csv`.
        dir: PathBuf,
    },
}

enum Failure {
    Lab(LabError),
    Invariant(String),
}

impl From<LabError> for Failure {
    fn from(e: LabError) -> Self {
        Failure::Lab(e)
    }
}

fn load(common: &Common) -> Result<ExperimentConfig, LabError> {
    let mut cfg = ExperimentConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(reps) = common.reps {
        cfg.replications = reps;
    }
    if let Some(out) = &common.out {
        cfg.output.dir = out.to_string_lossy().into_owned();
    }
    if let Some(format) = common.format {
        cfg.output.format = format;
    }
    if let Some(thin) = common.thin {
        cfg.output.thin = thin;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn print_audit(report: &AuditReport) {
    for c in &report.checks {
        let round = c.round.map(|t| format!(" t={t}")).unwrap_or_default();
        println!(
            "[{}] {}{}: observed {:.6} vs bound {:.6} (se {:.6}, n={})",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            round,
            c.observed,
            c.bound,
            c.std_error,
            c.samples
        );
    }
}

fn execute(command: Command) -> Result<(), Failure> {
    match command {
        Command::Run(common) => {
            let cfg = load(&common)?;
            let result = run_experiment(&cfg)?;
            let dir = PathBuf::from(&cfg.output.dir);
            emit_output(&cfg, std::slice::from_ref(&result), None, &dir, cfg.output.format)?;
            println!(
                "R(T) = {:.6}, Σs = {:.4} (cap {:.4}), envelope {:.4e}",
                result.bounds.cumulative_regret,
                result.bounds.s_sum,
                result.bounds.s_sum_cap,
                result.bounds.theorem_envelope
            );
            info!("run finished in {:?}", result.wall_clock);
            fail_on_violations(&[result.invariant_violations])
        }
        Command::Replicate(common) => {
            let cfg = load(&common)?;
            let results = replicate(&cfg, cfg.replications)?;
            let audit = if results.len() >= tslab::diagnostics::MIN_AUDIT_REPLICATIONS {
                Some(audit_results(&cfg, &results)?)
            } else {
                None
            };
            let dir = PathBuf::from(&cfg.output.dir);
            emit_output(&cfg, &results, audit.clone(), &dir, cfg.output.format)?;
            let mean = results.iter().map(|r| r.bounds.cumulative_regret).sum::<f64>()
                / results.len() as f64;
            println!("{} replications, mean R(T) = {mean:.6}", results.len());
            if let Some(a) = &audit {
                print_audit(a);
            }
            let violations: Vec<Vec<String>> =
                results.iter().map(|r| r.invariant_violations.clone()).collect();
            fail_on_violations(&violations)?;
            match audit {
                Some(a) if !a.passed() => Err(Failure::Invariant("audit check failed".into())),
                _ => Ok(()),
            }
        }
        Command::Scaling(common) => {
            let cfg = load(&common)?;
            let grid = cfg.scaling.clone().ok_or_else(|| {
                LabError::Config("manifest has no [scaling] table".into())
            })?;
            let report = scaling_study(&cfg, &grid.dims, &grid.horizons, cfg.replications)?;
            let path = emit_scaling(&report, Path::new(&cfg.output.dir))?;
            for c in &report.cells {
                println!(
                    "d={} T={}: mean R(T) = {:.4} ± {:.4}",
                    c.dim, c.horizon, c.mean_regret, c.std_error
                );
            }
            for f in &report.fits {
                println!("d={}: beta = {:.4} [{:.4}, {:.4}]", f.dim, f.beta, f.ci_low, f.ci_high);
            }
            println!("wrote {}", path.display());
            fail_on_violations(&[report.invariant_violations])
        }
        Command::Audit { dir } => {
            let summary = read_summary(&dir.join("summary.json"))?;
            let cfg = summary.config;
            let mut traces = Vec::new();
            let mut violations = Vec::new();
            for rep in &summary.replications {
                let Some(file) = &rep.trace_file else {
                    return Err(LabError::Config(format!(
                        "replication {} has no stored trace",
                        rep.replication
                    ))
                    .into());
                };
                let trace = read_trace_csv(&dir.join(file))?;
                violations.push(
                    check_invariants(&trace, cfg.dim, 1e-10)
                        .into_iter()
                        .map(|v| format!("{file}: {v}"))
                        .collect::<Vec<_>>(),
                );
                traces.push(trace);
            }
            let report = event_probability_audit(&traces, &audit_plan(&cfg)?)?;
            print_audit(&report);
            emit_audit(&report, &dir)?;
            fail_on_violations(&violations)?;
            if report.passed() {
                Ok(())
            } else {
                Err(Failure::Invariant("audit check failed".into()))
            }
        }
    }
}

fn fail_on_violations(per_run: &[Vec<String>]) -> Result<(), Failure> {
    let all: Vec<&String> = per_run.iter().flatten().collect();
    if all.is_empty() {
        return Ok(());
    }
    for v in all.iter().take(20) {
        eprintln!("invariant violation: {v}");
    }
    Err(Failure::Invariant(format!("{} invariant violations", all.len())))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Lab(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
        Err(Failure::Invariant(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
