use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use cpboot::config::{PrecisionMode, RunConfig, Task};
use cpboot::error::{CliError, ErrorReport};
use cpboot::run::{run, write_json};

const SWEEP_COLUMNS: &str = "\
CSV columns (sweep.csv):
  coupling         value of the swept parameter
  lower            certified lower bound on the ground energy
  upper            upper bound, empty when there is none
  upper_kind       bounded | trivial (at or above the continuum) | unbounded | not_available
  oracle           reference energy from Laguerre-basis diagonalization
  compared         true when the oracle lies below the comparison cut
  lower_le_oracle  lower <= oracle within 1e-6 relative
  status           ok | no_bound_state | error: <message>";

const SCAN_COLUMNS: &str = "\
CSV columns (scan.csv):
  energy   grid energy E
  rinv     grid value of <1/r>
  order    moment matrix order, 2 or 3
  feasible true | false | skipped (E = 0)";

const EXIT_CODES: &str = "\
Exit codes: 0 ok, 1 configuration, 2 solver, 3 oracle cross-check.
Set BOOTSTRAP_LOG (error, warn, info, debug, trace) for log output on stderr.";

#[derive(Parser)]
#[command(name = "cpboot", version, about = "Moment bootstrap bounds for central potentials", after_help = EXIT_CODES)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration
    config: PathBuf,
    /// Output directory, overriding output.dir
    #[arg(long)]
    out: Option<PathBuf>,
    /// Solver tolerance, overriding solver.tol
    #[arg(long)]
    tol: Option<f64>,
    /// Iteration limit, overriding solver.max_iter
    #[arg(long)]
    max_iter: Option<usize>,
    /// Arithmetic, overriding solver.precision_mode
    #[arg(long, value_enum)]
    precision: Option<PrecisionMode>,
}

#[derive(Subcommand)]
enum Command {
    /// Lower (and upper) bounds on the ground energy
    Bound(Common),
    /// Bounds across a range of one coupling
    #[command(after_help = SWEEP_COLUMNS)]
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Worker threads; defaults to the available cores
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Bisection for the coupling where the Cornell ground energy crosses zero
    Critical(Common),
    /// Feasible (E, <1/r>) regions of the inverse-square potential
    #[command(after_help = SCAN_COLUMNS)]
    Scan(Common),
    /// Reference ground state by Laguerre-basis diagonalization
    Diagonalize(Common),
    /// Write the semidefinite program in SDPA sparse format
    ExportSdp(Common),
}

fn load(common: &Common) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::load(&common.config)?;
    if let Some(dir) = &common.out {
        cfg.output.dir = dir.clone();
    }
    if let Some(t) = common.tol {
        cfg.solver.tol = Some(t);
    }
    if let Some(m) = common.max_iter {
        cfg.solver.max_iter = Some(m);
    }
    if let Some(p) = common.precision {
        cfg.solver.precision_mode = p;
    }
    Ok(cfg)
}

fn fail(e: &CliError, out_dir: Option<&PathBuf>) -> ExitCode {
    let report = ErrorReport::from(e);
    log::error!("{e}");
    if let Some(dir) = out_dir {
        // best effort; the report also goes to stdout
        let _ = write_json(&dir.join("error.json"), &report);
    }
    println!("{}", serde_json::to_string(&report).unwrap_or_default());
    ExitCode::from(report.exit_code as u8)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("BOOTSTRAP_LOG", "warn")).init();
    let cli = Cli::parse();
    let (task, common, jobs) = match &cli.command {
        Command::Bound(c) => (Task::Bound, c, None),
        Command::Sweep { common, jobs } => (Task::Sweep, common, *jobs),
        Command::Critical(c) => (Task::Critical, c, None),
        Command::Scan(c) => (Task::Scan, c, None),
        Command::Diagonalize(c) => (Task::Diagonalize, c, None),
        Command::ExportSdp(c) => (Task::ExportSdp, c, None),
    };
    let cfg = match load(common) {
        Ok(c) => c,
        Err(e) => return fail(&e, None),
    };
    if let Some(t) = cfg.task {
        if t != task {
            log::info!("config names task {t:?}; running {task:?} as requested on the command line");
        }
    }
    match run(task, &cfg, jobs) {
        Ok(out) => {
            print!("{}", out.json);
            match out.failure {
                None => ExitCode::SUCCESS,
                Some(e) => fail(&e, Some(&cfg.output.dir)),
            }
        }
        Err(e) => fail(&e, Some(&cfg.output.dir)),
    }
}
