//! Coupling sweeps, solved in parallel and written row by row so that an
//! interrupted run picks up where it stopped.

use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::path::Path;
use std::sync::Mutex;

use cpboot_core::drivers::bound_ground_energy;
use cpboot_core::potentials::Family;
use cpboot_core::Error as CoreError;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::report::{upper_kind, SweepJson};
use crate::run::{lower_within_oracle, oracle, write_json, RunOutput};

/// Oracle cut applied to Yukawa sweeps unless the config sets one.
pub const YUKAWA_ORACLE_CUT: f64 = -2e-2;

/// One CSV row. Columns:
/// `coupling` value of the swept parameter; `lower` certified lower bound;
/// `upper` upper bound (empty when there is none); `upper_kind` bounded,
/// trivial, unbounded or not_available; `oracle` reference energy from
/// diagonalization; `compared` whether the row lies in the compared regime
/// (oracle below the cut); `lower_le_oracle` the bound check; `status` ok,
/// no_bound_state or an error message.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub coupling: f64,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub upper_kind: String,
    pub oracle: Option<f64>,
    pub compared: bool,
    pub lower_le_oracle: Option<bool>,
    pub status: String,
}

impl SweepRow {
    pub fn is_final(&self) -> bool {
        !self.status.starts_with("error")
    }
}

/// Rows already present in a sweep file, last entry per coupling.
pub fn read_rows(path: &Path) -> Result<Vec<SweepRow>, CliError> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let mut rd = csv::Reader::from_path(path)?;
    let mut by_key: BTreeMap<u64, SweepRow> = BTreeMap::new();
    for row in rd.deserialize::<SweepRow>() {
        // a row cut short by an interrupt is just redone
        let Ok(row) = row else { continue };
        by_key.insert(row.coupling.to_bits(), row);
    }
    Ok(by_key.into_values().collect())
}

fn write_rows(path: &Path, rows: &[SweepRow]) -> Result<(), CliError> {
    let tmp = path.with_extension("csv.tmp");
    let mut w = csv::Writer::from_path(&tmp)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    drop(w);
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn run_sweep(cfg: &RunConfig, jobs: Option<usize>) -> Result<RunOutput, CliError> {
    let s = cfg.sweep.as_ref().expect("validated");
    let pot = cfg.potential()?;
    let bases = cfg.bases()?;
    let opts = cfg.bound_options();
    let values = s.values()?;
    let first = pot.with_param(&s.param, values[0])?;
    let cut = s.oracle_cut.or(matches!(first.family, Family::Yukawa { .. }).then_some(YUKAWA_ORACLE_CUT));

    fs::create_dir_all(&cfg.output.dir)?;
    let csv_path = cfg.output.path(&cfg.output.csv, "sweep.csv");
    let done: Vec<SweepRow> = read_rows(&csv_path)?.into_iter().filter(SweepRow::is_final).collect();
    let pending: Vec<f64> =
        values.iter().copied().filter(|v| !done.iter().any(|r| r.coupling.to_bits() == v.to_bits())).collect();
    log::info!("sweep over {}: {} of {} points already done", s.param, values.len() - pending.len(), values.len());

    let fresh = !csv_path.exists() || fs::metadata(&csv_path)?.len() == 0;
    let file = OpenOptions::new().create(true).append(true).open(&csv_path)?;
    let writer = Mutex::new(csv::WriterBuilder::new().has_headers(fresh).from_writer(file));

    let solve_one = |x: f64| -> SweepRow {
        let mut row = SweepRow {
            coupling: x,
            lower: None,
            upper: None,
            upper_kind: String::from("not_available"),
            oracle: None,
            compared: false,
            lower_le_oracle: None,
            status: String::from("ok"),
        };
        let spec = match pot.with_param(&s.param, x) {
            Ok(spec) => spec,
            Err(e) => {
                row.status = format!("error: {e}");
                return row;
            }
        };
        let e0 = if cfg.bound.oracle { oracle(&spec).map(|d| d.ground_energy) } else { None };
        row.oracle = e0;
        row.compared = e0.is_some_and(|e| cut.map_or(true, |c| e < c));
        match bound_ground_energy(&spec, &bases, cfg.bound.both, &opts) {
            Ok(r) => {
                row.lower = Some(r.lower);
                row.upper = r.upper.value().is_finite().then(|| r.upper.value());
                row.upper_kind = upper_kind(&r.upper).to_owned();
                row.lower_le_oracle = e0.map(|e| lower_within_oracle(r.lower, e));
            }
            Err(CoreError::NoBoundState(_)) => row.status = String::from("no_bound_state"),
            Err(e) => row.status = format!("error: {e}"),
        }
        row
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Config(e.to_string()))?;
    let fresh_rows: Vec<SweepRow> = pool.install(|| {
        pending
            .par_iter()
            .map(|&x| {
                let row = solve_one(x);
                let mut w = writer.lock().expect("sweep writer poisoned");
                if let Err(e) = w.serialize(&row).and_then(|_| w.flush().map_err(Into::into)) {
                    log::warn!("could not append sweep row: {e}");
                }
                row
            })
            .collect()
    });
    drop(writer);

    let mut rows = done;
    rows.extend(fresh_rows);
    rows.retain(|r| values.iter().any(|v| v.to_bits() == r.coupling.to_bits()));
    rows.sort_by(|a, b| a.coupling.total_cmp(&b.coupling));
    write_rows(&csv_path, &rows)?;

    let failed = rows.iter().filter(|r| !r.is_final()).count();
    let violations = rows.iter().filter(|r| r.compared && r.lower_le_oracle == Some(false)).count();
    let json = SweepJson {
        task: "sweep",
        param: s.param.clone(),
        rows: rows.len(),
        failed,
        compared: rows.iter().filter(|r| r.compared).count(),
        oracle_violations: violations,
        csv: csv_path.display().to_string(),
    };
    let path = cfg.output.path(&cfg.output.json, "sweep.json");
    let text = write_json(&path, &json)?;
    let failure = if failed > 0 {
        Some(CliError::Core(CoreError::Solver(format!("{failed} sweep point(s) failed; rerun to retry them"))))
    } else if violations > 0 {
        Some(CliError::Oracle(format!("{violations} lower bound(s) above the reference energy")))
    } else {
        None
    };
    Ok(RunOutput { json_path: path, json: text, failure })
}
