//! `fejerkit`: run, verify and generate problem specs.
//!
//! Exit status is 0 when every run converged (or every suite passed), 2
//! when a budget ran out or a suite failed, and 1 on any error. Set
//! `FEJERKIT_LOG` (e.g. `info`, `debug`) for progress logs on stderr.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fejerkit::instances::{gen_instance, InstanceKind};
use fejerkit::runner::{run_solve, run_verify, run_vi, RunError, EXIT_BUDGET, EXIT_ERROR, EXIT_OK};
use fejerkit::ProblemSpec;
use rayon::prelude::*;

#[derive(Parser)]
#[command(name = "fejerkit", version, about = "Fixed-point methods for convex feasibility and variational inequalities")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the feasibility iteration of each spec.
    Solve(RunArgs),
    /// Run the hybrid steepest-descent method of each spec.
    Vi(RunArgs),
    /// Run the verification suites of each spec.
    Verify(RunArgs),
    /// Write a generated spec.
    Gen(GenArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(required = true)]
    specs: Vec<PathBuf>,
    /// Output directory; with several specs each gets a subdirectory named
    /// after its file stem.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Replace every seed in the specs.
    #[arg(long)]
    seed_override: Option<u64>,
    /// Number of specs processed in parallel.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args)]
struct GenArgs {
    #[command(subcommand)]
    kind: GenKind,
    #[arg(long, default_value_t = 0, global = true)]
    seed: u64,
    /// Destination file; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum GenKind {
    /// Two half-planes meeting at the origin with the given angle.
    Wedge {
        #[arg(long)]
        angle: f64,
    },
    /// Nonpositive orthant.
    Orthant {
        #[arg(long)]
        dim: usize,
    },
    /// Random half-spaces around an interior point.
    Polyhedron {
        #[arg(long)]
        dim: usize,
        #[arg(long)]
        m: usize,
    },
    /// Affine-max function with a strictly feasible point.
    Slater {
        #[arg(long)]
        dim: usize,
        #[arg(long)]
        m: usize,
    },
}

#[derive(Clone, Copy)]
enum Action {
    Solve,
    Vi,
    Verify,
}

fn run_one(action: Action, path: &Path, out: &Path, seed: Option<u64>) -> Result<i32, RunError> {
    let mut spec = ProblemSpec::load(path)?;
    if let Some(seed) = seed {
        spec.override_seeds(seed);
    }
    Ok(match action {
        Action::Solve => run_solve(&spec, out)?.exit_code(),
        Action::Vi => run_vi(&spec, out)?.exit_code(),
        Action::Verify => {
            let outcome = run_verify(&spec, out)?;
            for s in &outcome.suites {
                println!(
                    "{}: {} {} (worst violation {:e})",
                    path.display(),
                    s.suite,
                    if s.report.pass { "pass" } else { "FAIL" },
                    s.report.worst_violation
                );
            }
            outcome.exit_code()
        }
    })
}

fn run_many(action: Action, args: &RunArgs) -> i32 {
    let dirs: Vec<PathBuf> = if args.specs.len() == 1 {
        vec![args.out.clone()]
    } else {
        args.specs
            .iter()
            .map(|p| args.out.join(p.file_stem().unwrap_or(p.as_os_str())))
            .collect()
    };
    let job = |(spec, dir): (&PathBuf, &PathBuf)| match run_one(action, spec, dir, args.seed_override) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}: {e}", spec.display());
            EXIT_ERROR
        }
    };
    let codes: Vec<i32> = match rayon::ThreadPoolBuilder::new().num_threads(args.jobs.max(1)).build() {
        Ok(pool) => pool.install(|| args.specs.par_iter().zip(dirs.par_iter()).map(job).collect()),
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return EXIT_ERROR;
        }
    };
    if codes.contains(&EXIT_ERROR) {
        EXIT_ERROR
    } else if codes.contains(&EXIT_BUDGET) {
        EXIT_BUDGET
    } else {
        EXIT_OK
    }
}

fn generate(args: &GenArgs) -> i32 {
    let kind = match args.kind {
        GenKind::Wedge { angle } => InstanceKind::Wedge { angle },
        GenKind::Orthant { dim } => InstanceKind::Orthant { dim },
        GenKind::Polyhedron { dim, m } => InstanceKind::RandomPolyhedron { dim, m },
        GenKind::Slater { dim, m } => InstanceKind::SlaterPolyhedral { dim, m },
    };
    let spec = match gen_instance(kind, args.seed) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_ERROR;
        }
    };
    let json = spec.to_json() + "\n";
    match &args.out {
        None => print!("{json}"),
        Some(path) => {
            if let Err(e) = std::fs::write(path, json) {
                eprintln!("error: cannot write {}: {e}", path.display());
                return EXIT_ERROR;
            }
        }
    }
    EXIT_OK
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("FEJERKIT_LOG", "warn")).init();
    let cli = Cli::parse();
    let code = match &cli.command {
        Command::Solve(a) => run_many(Action::Solve, a),
        Command::Vi(a) => run_many(Action::Vi, a),
        Command::Verify(a) => run_many(Action::Verify, a),
        Command::Gen(a) => generate(a),
    };
    ExitCode::from(code as u8)
}
