//! Task dispatch: each task reads the config, writes its artifacts into the
//! output directory and returns the JSON it wrote.

use std::fs;
use std::path::{Path, PathBuf};

use cpboot_core::constraints::ConstraintSystem;
use cpboot_core::drivers::{
    bound_system, conformal_feasibility_scan, conformal_instance, critical_coupling, moment_report, Cell,
    FeasibilityGrid,
};
use cpboot_core::potentials::{Family, PotentialSpec};
use cpboot_core::refdiag::{self, DiagResult};
use cpboot_core::sdp::{assemble, Direction};
use serde::Serialize;

use crate::config::{precision_name, RunConfig, Task};
use crate::error::CliError;
use crate::report::*;
use crate::sdpa::export_sdpa;
use crate::sweep::run_sweep;

/// Relative slack allowed when checking a lower bound against the reference
/// energy; the reference itself is converged to roughly this level.
pub const ORACLE_SLACK: f64 = 1e-6;

/// What a successful run produced.
#[derive(Debug)]
pub struct RunOutput {
    pub json_path: PathBuf,
    pub json: String,
    /// Set when the run finished but a cross-check failed; artifacts are
    /// still written.
    pub failure: Option<CliError>,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<String, CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Format(e.to_string()))? + "\n";
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, &text)?;
    Ok(text)
}

/// Reference ground state, or `None` where no bound state is expected to
/// be resolvable by the diagonalizer.
pub fn oracle(spec: &PotentialSpec) -> Option<DiagResult> {
    if matches!(spec.family, Family::Conformal { .. }) {
        return None;
    }
    match refdiag::ground_state_refined(spec) {
        Ok(d) => Some(d),
        Err(e) => {
            log::warn!("reference diagonalization failed for {}: {e}", spec.describe());
            None
        }
    }
}

pub fn lower_within_oracle(lower: f64, e0: f64) -> bool {
    lower <= e0 + ORACLE_SLACK * e0.abs().max(1.0)
}

/// Runs one task. `jobs` limits sweep parallelism.
pub fn run(task: Task, cfg: &RunConfig, jobs: Option<usize>) -> Result<RunOutput, CliError> {
    cfg.validate(task)?;
    match task {
        Task::Bound => bound(cfg),
        Task::Sweep => run_sweep(cfg, jobs),
        Task::Critical => critical(cfg),
        Task::Scan => scan(cfg),
        Task::Diagonalize => diagonalize(cfg),
        Task::ExportSdp => export(cfg),
    }
}

fn bound(cfg: &RunConfig) -> Result<RunOutput, CliError> {
    let spec = cfg.spec()?;
    let bases = cfg.bases()?;
    let opts = cfg.bound_options();
    let system = ConstraintSystem::build(&bases, &spec, &opts.system)?;
    let res = bound_system(&spec, &bases, &system, cfg.bound.both, &opts)?;
    let inst = assemble(&system, Direction::Minimize, opts.impose_a_nonneg)?;
    let report = moment_report(&system, &inst, &res.lower_solve);
    let oracle = if cfg.bound.oracle { oracle(&spec) } else { None };
    let oracle_json = oracle.as_ref().map(|d| OracleJson {
        energy: d.ground_energy,
        kappa: d.kappa,
        basis_size: d.basis_size,
        lower_le_oracle: lower_within_oracle(res.lower, d.ground_energy),
    });
    let failure = match &oracle_json {
        Some(o) if !o.lower_le_oracle => {
            Some(CliError::Oracle(format!("lower bound {} exceeds reference energy {}", res.lower, o.energy)))
        }
        _ => None,
    };
    let json = BoundJson {
        task: "bound",
        potential: res.potential.clone(),
        bases: res.basis_id.clone(),
        precision: precision_name(opts.solver.precision),
        lower: res.lower,
        upper: (&res.upper).into(),
        oracle: oracle_json,
        counts: (&res.counts).into(),
        anomalies: system
            .anomalies
            .iter()
            .map(|a| AnomalyJson {
                name: a.name.clone(),
                definition: a.definition.clone(),
                nonnegative_imposed: opts.impose_a_nonneg && a.index == 0,
                value: report.get(&a.name),
            })
            .collect(),
        dropped_rows: system
            .dropped
            .iter()
            .map(|d| DroppedJson { block: d.block.clone(), element: d.element.clone(), reason: d.reason.clone() })
            .collect(),
        moments: report.entries.iter().map(|(n, v)| MomentJson { name: n.clone(), value: *v }).collect(),
        lower_solve: (&res.lower_solve).into(),
        upper_solve: res.upper_solve.as_ref().map(Into::into),
    };
    let path = cfg.output.path(&cfg.output.json, "bound.json");
    let text = write_json(&path, &json)?;
    Ok(RunOutput { json_path: path, json: text, failure })
}

fn critical(cfg: &RunConfig) -> Result<RunOutput, CliError> {
    let c = cfg.critical.as_ref().expect("validated");
    let bases = cfg.bases()?;
    let r = critical_coupling(c.sigma, &bases, (c.bracket[0], c.bracket[1]), c.tol, &cfg.bound_options())?;
    let (lo, hi) = r.scaled();
    let json = CriticalJson {
        task: "critical",
        sigma: c.sigma,
        bases: bases.name.clone(),
        positive_side: r.positive_side,
        negative_side: r.negative_side,
        width: r.width(),
        scaled_interval: [lo, hi],
        lower_at_positive: r.lower_at_positive,
        upper_at_negative: r.upper_at_negative,
        evaluations: r.evaluations,
        resolved: r.resolved,
    };
    let path = cfg.output.path(&cfg.output.json, "critical.json");
    let text = write_json(&path, &json)?;
    let failure = (!r.resolved).then(|| {
        CliError::Core(cpboot_core::Error::Solver(format!(
            "bisection stopped at width {:.3e} without a certified sign",
            r.width()
        )))
    });
    Ok(RunOutput { json_path: path, json: text, failure })
}

fn cell_name(c: Cell) -> &'static str {
    match c {
        Cell::Feasible => "true",
        Cell::Infeasible => "false",
        Cell::Skipped => "skipped",
    }
}

#[derive(Serialize)]
struct ScanRow {
    energy: f64,
    rinv: f64,
    order: usize,
    feasible: &'static str,
}

fn scan(cfg: &RunConfig) -> Result<RunOutput, CliError> {
    let s = cfg.scan.as_ref().expect("validated");
    let grids: Vec<FeasibilityGrid> = s
        .orders
        .iter()
        .map(|&o| conformal_feasibility_scan(s.lambda, (s.e_range[0], s.e_range[1]), (s.rinv_range[0], s.rinv_range[1]), s.n_grid, o))
        .collect::<Result<_, _>>()?;
    let csv_path = cfg.output.path(&cfg.output.csv, "scan.csv");
    fs::create_dir_all(&cfg.output.dir)?;
    let mut w = csv::Writer::from_path(&csv_path)?;
    for g in &grids {
        for (i, &e) in g.e_axis.iter().enumerate() {
            for (j, &x) in g.rinv_axis.iter().enumerate() {
                w.serialize(ScanRow { energy: e, rinv: x, order: g.order, feasible: cell_name(g.cells[i][j]) })?;
            }
        }
    }
    w.flush()?;
    let orders = grids
        .iter()
        .map(|g| ScanOrderJson {
            order: g.order,
            feasible: g.count(Cell::Feasible),
            infeasible: g.count(Cell::Infeasible),
            skipped: g.count(Cell::Skipped),
            feasible_with_negative_rinv: g
                .cells
                .iter()
                .flat_map(|row| row.iter().zip(&g.rinv_axis))
                .filter(|(c, &x)| **c == Cell::Feasible && x < 0.0)
                .count(),
        })
        .collect();
    let two = grids.iter().find(|g| g.order == 2);
    let three = grids.iter().find(|g| g.order == 3);
    let nesting_violations = match (two, three) {
        (Some(a), Some(b)) => Some(nesting_violations(a, b)),
        _ => None,
    };
    let json = ScanJson {
        task: "scan",
        lambda: s.lambda,
        n_grid: s.n_grid,
        e_range: s.e_range,
        rinv_range: s.rinv_range,
        orders,
        nesting_violations,
        csv: csv_path.display().to_string(),
    };
    let path = cfg.output.path(&cfg.output.json, "scan.json");
    let text = write_json(&path, &json)?;
    Ok(RunOutput { json_path: path, json: text, failure: None })
}

/// Cells feasible in `larger` but not in `smaller`.
pub fn nesting_violations(smaller: &FeasibilityGrid, larger: &FeasibilityGrid) -> usize {
    smaller
        .cells
        .iter()
        .zip(&larger.cells)
        .flat_map(|(a, b)| a.iter().zip(b))
        .filter(|(a, b)| **b == Cell::Feasible && **a != Cell::Feasible)
        .count()
}

fn diagonalize(cfg: &RunConfig) -> Result<RunOutput, CliError> {
    let spec = cfg.spec()?;
    let as_oracle = |e: cpboot_core::Error| CliError::Oracle(e.to_string());
    let d = refdiag::ground_energy(&spec, cfg.diagonalize.basis_size).map_err(as_oracle)?;
    let refined = if cfg.diagonalize.refined { Some(refdiag::ground_state_refined(&spec).map_err(as_oracle)?) } else { None };
    let json = DiagonalizeJson {
        task: "diagonalize",
        potential: spec.describe(),
        result: (&d).into(),
        refined: refined.as_ref().map(Into::into),
    };
    let path = cfg.output.path(&cfg.output.json, "diagonalize.json");
    let text = write_json(&path, &json)?;
    Ok(RunOutput { json_path: path, json: text, failure: None })
}

fn export(cfg: &RunConfig) -> Result<RunOutput, CliError> {
    let spec = cfg.spec()?;
    let direction: Direction = cfg.export.direction.into();
    let inst = match spec.family {
        Family::Conformal { lambda } => {
            let order = cfg.export.order.unwrap_or(2);
            conformal_instance(lambda, cfg.export.energy.expect("validated"), order, direction)?.1
        }
        _ => {
            let opts = cfg.bound_options();
            let system = ConstraintSystem::build(&cfg.bases()?, &spec, &opts.system)?;
            assemble(&system, direction, opts.impose_a_nonneg)?
        }
    };
    let sdpa_path = cfg.output.path(&cfg.output.sdpa, "instance.dat-s");
    fs::create_dir_all(&cfg.output.dir)?;
    fs::write(&sdpa_path, export_sdpa(&inst))?;
    let json = ExportJson {
        task: "export-sdp",
        potential: spec.describe(),
        sdpa: sdpa_path.display().to_string(),
        variables: inst.num_vars(),
        blocks: inst.blocks.iter().map(|b| (b.label.clone(), b.size)).collect(),
        direction: match direction {
            Direction::Minimize => "minimize",
            Direction::Maximize => "maximize",
        },
    };
    let path = cfg.output.path(&cfg.output.json, "export.json");
    let text = write_json(&path, &json)?;
    Ok(RunOutput { json_path: path, json: text, failure: None })
}
