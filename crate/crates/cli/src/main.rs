//! `platenet` command-line driver.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use platenet::config::RunConfig;
use platenet::losses::Problem;
use platenet::network::load_checkpoint;
use platenet::optimizer::Termination;
use platenet::parallel::Execution;
use platenet::runner::{self, RunOutcome};
use platenet::{autodiff, oracles, validate, Error};

/// Environment variable capping the number of worker threads.
const WORKERS_ENV: &str = "PLATENET_WORKERS";

const EXIT_FAILED: u8 = 1;
const EXIT_INVALID_CONFIG: u8 = 2;
const EXIT_NON_FINITE: u8 = 3;
const EXIT_IO: u8 = 4;

#[derive(Parser)]
#[command(name = "platenet", version, about = "Deep energy method for Kirchhoff plates")]
struct Cli {
    /// Run every loop on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Static deflection under transverse load.
    Bend(RunArgs),
    /// Fundamental free-vibration frequency and mode shape.
    Vibrate(RunArgs),
    /// Critical in-plane buckling load and mode shape.
    Buckle(RunArgs),
    /// Property checks of the numerical core (no training).
    Validate(ValidateArgs),
    /// Write CSV files from checkpoints and built-in tables.
    #[command(subcommand)]
    Export(ExportCommand),
}

#[derive(Args)]
struct RunArgs {
    /// Run configuration (TOML).
    config: PathBuf,
    /// Output directory; overrides `output_dir` from the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    /// Perturbs the activation slope before checking.
    #[arg(long, hide = true, default_value_t = 0.0)]
    inject_activation_fault: f64,
}

#[derive(Subcommand)]
enum ExportCommand {
    /// Field on the evaluation grid from a saved checkpoint.
    Field {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Quadrature points generated by a config.
    Samples {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Built-in reference values with their data-quality status.
    Reference {
        #[arg(long)]
        out: PathBuf,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidConfig(_) | Error::Parse(_) | Error::HeaderMismatch(_) => EXIT_INVALID_CONFIG,
        Error::NonFinite(_) => EXIT_NON_FINITE,
        Error::Io(_) | Error::Checkpoint(_) => EXIT_IO,
        _ => EXIT_FAILED,
    }
}

fn configure_workers() -> Result<(), Error> {
    let Ok(raw) = std::env::var(WORKERS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::InvalidConfig(format!("{WORKERS_ENV} must be a positive integer, got {raw:?}")))?;
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::InvalidConfig(format!("{WORKERS_ENV}: {e}")))?;
    #[cfg(not(feature = "parallel"))]
    let _ = n;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let execution = if cli.sequential { Execution::Sequential } else { Execution::Parallel };
    let result = configure_workers().and_then(|()| match cli.command {
        Command::Bend(a) => solve(Problem::Bending, &a, execution),
        Command::Vibrate(a) => solve(Problem::Vibration, &a, execution),
        Command::Buckle(a) => solve(Problem::Buckling, &a, execution),
        Command::Validate(a) => run_validate(&a),
        Command::Export(e) => export(e),
    });
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn problem_name(p: Problem) -> &'static str {
    match p {
        Problem::Bending => "bending",
        Problem::Vibration => "vibration",
        Problem::Buckling => "buckling",
    }
}

fn solve(expected: Problem, args: &RunArgs, execution: Execution) -> Result<u8, Error> {
    let cfg = RunConfig::load(&args.config)?;
    if cfg.problem != expected {
        return Err(Error::InvalidConfig(format!(
            "config describes a {} problem, command expects {}",
            problem_name(cfg.problem),
            problem_name(expected)
        )));
    }
    for w in cfg.warnings() {
        eprintln!("warning: {w}");
    }
    let out_dir = args.out.clone().or_else(|| cfg.output_dir.clone()).unwrap_or_else(|| PathBuf::from("platenet_out"));
    let outcome = runner::run(&cfg, execution)?;
    let artifacts = runner::write_artifacts(&outcome, &out_dir)?;
    print_summary(&outcome, &mut io::stdout().lock())?;
    println!("report: {}", artifacts.report.display());
    println!("field: {}", artifacts.field.display());
    println!("checkpoint: {}", artifacts.checkpoint.display());
    Ok(if outcome.is_non_finite() { EXIT_NON_FINITE } else { 0 })
}

fn print_summary(o: &RunOutcome, w: &mut impl Write) -> io::Result<()> {
    let s = &o.summary;
    for r in &s.runs {
        writeln!(
            w,
            "seed {}: {} after {} iterations, loss {:.8e}",
            r.seed,
            r.termination.as_str(),
            r.iterations,
            r.final_loss
        )?;
    }
    writeln!(w, "best seed: {}", s.best_seed)?;
    writeln!(w, "termination: {}", s.termination.as_str())?;
    if let Some(d) = &s.derived {
        writeln!(w, "{}: {:.6}", d.name, d.value)?;
    }
    if let Some(f) = s.derived_fresh {
        writeln!(w, "fresh-sample estimate: {f:.6}")?;
    }
    if let Some(r) = &s.reference {
        writeln!(
            w,
            "reference {} [{}]: {} (relative deviation {:.3e})",
            r.table, r.column, r.raw, r.relative_deviation
        )?;
    }
    if let Some(c) = &s.oracle {
        writeln!(w, "relative error vs {}: {:.4e}", c.name, c.relative_error)?;
    }
    if s.termination == Termination::NonFinite {
        writeln!(w, "training produced non-finite values")?;
    }
    Ok(())
}

fn run_validate(args: &ValidateArgs) -> Result<u8, Error> {
    if args.inject_activation_fault != 0.0 {
        autodiff::inject_activation_fault(args.inject_activation_fault);
    }
    let checks = validate::run_all()?;
    let mut failed = 0;
    for c in &checks {
        let tag = if c.passed { "PASS" } else { "FAIL" };
        println!("{tag} {:<44} measured {:.3e} tolerance {:.3e}  {}", c.name, c.measured, c.tolerance, c.detail);
        failed += usize::from(!c.passed);
    }
    println!("{} of {} checks passed", checks.len() - failed, checks.len());
    Ok(if failed == 0 { 0 } else { EXIT_FAILED })
}

fn create(path: &Path) -> Result<BufWriter<File>, Error> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn export(cmd: ExportCommand) -> Result<u8, Error> {
    match cmd {
        ExportCommand::Field { config, checkpoint, out } => {
            let cfg = RunConfig::load(&config)?;
            let ck = load_checkpoint(&checkpoint)?;
            let mut net = cfg.network_config();
            net.scaling = ck.scaling;
            let params = ck.params_for(&net)?;
            let mut w = create(&out)?;
            runner::write_field_csv(&mut w, &cfg, &net, &params)?;
            w.flush()?;
        }
        ExportCommand::Samples { config, out } => {
            let cfg = RunConfig::load(&config)?;
            let s = platenet::geometry::SampleSet::generate(
                &cfg.domain,
                &cfg.segments()?,
                cfg.n_interior,
                cfg.n_boundary,
                cfg.sample_seed,
            )?;
            let mut w = create(&out)?;
            s.write_csv(&mut w)?;
            w.flush()?;
        }
        ExportCommand::Reference { out } => {
            let mut w = create(&out)?;
            oracles::write_reference_csv(&mut w)?;
            w.flush()?;
        }
    }
    Ok(0)
}
