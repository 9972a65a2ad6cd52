//! `appa`: run, validate and certify saddle-point solves from JSON configs.

mod bench;
mod config;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use appa_core::certificates::certify_record;
use appa_core::oracle::saddle_reference;
use appa_core::schedule::default_geometric_sigma;
use appa_core::{run, Error, StopReason};
use clap::{Parser, Subcommand};

use crate::config::{Prepared, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "appa", version, about = "Saddle-point solver with convergence certificates")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Run configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Write outputs into this directory instead of the configured paths.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Override the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Override the iteration budget.
    #[arg(long, global = true)]
    iters: Option<usize>,

    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve and write the trace and summary.
    Run,
    /// Check step-size feasibility without solving.
    Validate,
    /// Solve against a reference saddle point and check every bound.
    Certify,
    /// Run the built-in benchmark corpus.
    Bench,
}

/// Exit status plus a one-line diagnostic.
#[derive(Debug)]
struct Failure {
    code: u8,
    msg: String,
}

impl Failure {
    fn config(e: impl std::fmt::Display) -> Self {
        Self {
            code: 2,
            msg: e.to_string(),
        }
    }

    fn io(e: impl std::fmt::Display) -> Self {
        Self {
            code: 1,
            msg: e.to_string(),
        }
    }
}

fn classify(e: Error) -> Failure {
    match e {
        Error::Io(_) => Failure::io(e),
        _ => Failure::config(e),
    }
}

struct Loaded {
    cfg: RunConfig,
    base: PathBuf,
    prepared: Prepared,
}

fn load(cli: &Cli) -> Result<Loaded, Failure> {
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| Failure::config("--config PATH is required"))?;
    let (mut cfg, base) = RunConfig::load(path).map_err(Failure::config)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(iters) = cli.iters {
        cfg.stop.max_iters = iters;
    }
    let prepared = cfg.prepare(&base).map_err(Failure::config)?;
    Ok(Loaded { cfg, base, prepared })
}

/// Output path: `--out DIR/name` wins over the configured path.
fn target(cli: &Cli, base: &Path, configured: Option<&PathBuf>, name: &str) -> Result<Option<PathBuf>, Failure> {
    if let Some(dir) = &cli.out {
        std::fs::create_dir_all(dir).map_err(|e| Failure::io(format!("{}: {e}", dir.display())))?;
        return Ok(Some(dir.join(name)));
    }
    Ok(configured.map(|p| base.join(p)))
}

fn cmd_run(cli: &Cli) -> Result<(), Failure> {
    let Loaded { cfg, base, prepared } = load(cli)?;
    let Prepared {
        problem,
        schedule,
        init,
        stop,
    } = prepared;
    let record = run(&problem, &schedule, init, &stop).map_err(classify)?;
    let summary = output::Summary::new(&problem, &record);

    if let Some(p) = target(cli, &base, cfg.outputs.trace_csv.as_ref(), "trace.csv")? {
        output::write_trace_csv(&p, &record).map_err(Failure::io)?;
    }
    match target(cli, &base, cfg.outputs.summary_json.as_ref(), "summary.json")? {
        Some(p) => output::write_json(&p, &summary).map_err(Failure::io)?,
        None if !cli.quiet => println!("{}", serde_json::to_string_pretty(&summary).map_err(Failure::io)?),
        None => {}
    }
    if cfg.outputs.certify_json.is_some() && record.reference.is_some() {
        let report = certify_record(&problem, &record).map_err(classify)?;
        if let Some(p) = target(cli, &base, cfg.outputs.certify_json.as_ref(), "certify.json")? {
            output::write_json(&p, &report).map_err(Failure::io)?;
        }
    }
    if record.stop_reason == StopReason::Diverged {
        return Err(Failure {
            code: 3,
            msg: format!("iterates diverged after {} iterations", record.iters),
        });
    }
    Ok(())
}

fn cmd_validate(cli: &Cli) -> Result<u8, Failure> {
    let Loaded { cfg, prepared, .. } = load(cli)?;
    let l = prepared.problem.lipschitz();
    let rep = prepared.schedule.validate(&l);
    let ok = |b: bool| if b { "ok" } else { "FAIL" };
    let base = prepared.schedule.base();
    println!("schedule: {:?} tau0={} sigma0={}", prepared.schedule.kind(), base.tau, base.sigma);
    println!("eta_x: {}", rep.eta_x);
    println!("eta_y: {}", rep.eta_y);
    println!("recursion_tau: {}", ok(rep.recursion_tau_ok));
    println!("recursion_sigma: {}", ok(rep.recursion_sigma_ok));
    println!("theta_le_one: {}", ok(rep.theta_le_one_ok));
    println!("t_consistent: {}", ok(rep.t_consistent_ok));
    println!("feasible: {}", if rep.feasible { "yes" } else { "no" });
    let safety = cfg.schedule.safety();
    let suggested = default_geometric_sigma(&l, &cfg.schedule.splitting(), safety);
    println!("suggested_tau_sigma: {suggested} (safety {safety})");
    Ok(if rep.feasible { 0 } else { 1 })
}

fn cmd_certify(cli: &Cli) -> Result<u8, Failure> {
    let Loaded { cfg, base, prepared } = load(cli)?;
    let Prepared {
        problem,
        schedule,
        init,
        mut stop,
    } = prepared;
    if stop.reference.is_none() {
        let r = saddle_reference(&problem).map_err(Failure::config)?;
        stop.reference = Some(r);
    }
    let record = run(&problem, &schedule, init, &stop).map_err(classify)?;
    let report = certify_record(&problem, &record).map_err(classify)?;
    match target(cli, &base, cfg.outputs.certify_json.as_ref(), "certify.json")? {
        Some(p) => output::write_json(&p, &report).map_err(Failure::io)?,
        None if !cli.quiet => println!("{}", serde_json::to_string_pretty(&report).map_err(Failure::io)?),
        None => {}
    }
    if !cli.quiet {
        eprintln!(
            "{}: {} checks, {} failures, certified={}",
            if report.pass { "PASS" } else { "FAIL" },
            report.checks.len(),
            report.per_k_failures.len(),
            report.certified
        );
    }
    Ok(if report.pass { 0 } else { 1 })
}

fn dispatch(cli: &Cli) -> Result<u8, Failure> {
    match cli.command {
        Command::Run => cmd_run(cli).map(|()| 0),
        Command::Validate => cmd_validate(cli),
        Command::Certify => cmd_certify(cli),
        Command::Bench => {
            let rows = bench::run_corpus(cli.seed.unwrap_or(0), cli.iters);
            if !cli.quiet {
                print!("{}", bench::format_table(&rows));
            }
            if let Some(dir) = &cli.out {
                std::fs::create_dir_all(dir).map_err(Failure::io)?;
                output::write_json(&dir.join("bench.json"), &rows).map_err(Failure::io)?;
            }
            Ok(if rows.iter().all(|r| r.ok) { 0 } else { 1 })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("appa: {}", f.msg.replace('\n', " "));
            ExitCode::from(f.code)
        }
    }
}
