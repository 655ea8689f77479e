//! JSON shapes of run results.

use cpboot_core::constraints::VariableCounts;
use cpboot_core::drivers::UpperBound;
use cpboot_core::refdiag::DiagResult;
use cpboot_core::sdp::{SolveResult, SolveStatus};
use serde::Serialize;

#[derive(Debug, Serialize)]
pub struct SolveJson {
    pub status: &'static str,
    pub value: f64,
    pub primal_value: f64,
    pub duality_gap: f64,
    pub primal_infeasibility: f64,
    pub dual_infeasibility: f64,
    pub iterations: usize,
}

pub fn status_name(s: SolveStatus) -> &'static str {
    match s {
        SolveStatus::Optimal => "optimal",
        SolveStatus::Infeasible => "infeasible",
        SolveStatus::Unbounded => "unbounded",
        SolveStatus::MaxIter => "max_iter",
    }
}

impl From<&SolveResult> for SolveJson {
    fn from(r: &SolveResult) -> Self {
        SolveJson {
            status: status_name(r.status),
            value: r.value,
            primal_value: r.primal_value,
            duality_gap: r.duality_gap,
            primal_infeasibility: r.primal_infeasibility,
            dual_infeasibility: r.dual_infeasibility,
            iterations: r.iterations,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct UpperJson {
    /// bounded, trivial (at or above the continuum), unbounded or not_available
    pub kind: &'static str,
    pub value: Option<f64>,
}

impl From<&UpperBound> for UpperJson {
    fn from(u: &UpperBound) -> Self {
        match u {
            UpperBound::Bounded(v) => UpperJson { kind: "bounded", value: Some(*v) },
            UpperBound::Trivial(v) => UpperJson { kind: "trivial", value: Some(*v) },
            UpperBound::Unbounded => UpperJson { kind: "unbounded", value: None },
            UpperBound::NotAvailable => UpperJson { kind: "not_available", value: None },
        }
    }
}

pub fn upper_kind(u: &UpperBound) -> &'static str {
    UpperJson::from(u).kind
}

#[derive(Debug, Serialize)]
pub struct CountsJson {
    pub variables_before: usize,
    pub block_moments: usize,
    pub all_moments: usize,
    pub anomalies: usize,
    pub relations: usize,
    pub free: usize,
}

impl From<&VariableCounts> for CountsJson {
    fn from(c: &VariableCounts) -> Self {
        CountsJson {
            variables_before: c.variables_before,
            block_moments: c.block_moments,
            all_moments: c.all_moments,
            anomalies: c.anomalies,
            relations: c.relations,
            free: c.free,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct AnomalyJson {
    pub name: String,
    pub definition: String,
    pub nonnegative_imposed: bool,
    pub value: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct OracleJson {
    pub energy: f64,
    pub kappa: f64,
    pub basis_size: usize,
    pub lower_le_oracle: bool,
}

#[derive(Debug, Serialize)]
pub struct MomentJson {
    pub name: String,
    pub value: f64,
}

#[derive(Debug, Serialize)]
pub struct DroppedJson {
    pub block: String,
    pub element: String,
    pub reason: String,
}

#[derive(Debug, Serialize)]
pub struct BoundJson {
    pub task: &'static str,
    pub potential: String,
    pub bases: String,
    pub precision: &'static str,
    pub lower: f64,
    pub upper: UpperJson,
    pub oracle: Option<OracleJson>,
    pub counts: CountsJson,
    pub anomalies: Vec<AnomalyJson>,
    pub dropped_rows: Vec<DroppedJson>,
    pub moments: Vec<MomentJson>,
    pub lower_solve: SolveJson,
    pub upper_solve: Option<SolveJson>,
}

#[derive(Debug, Serialize)]
pub struct CriticalJson {
    pub task: &'static str,
    pub sigma: f64,
    pub bases: String,
    /// Coupling where the lower bound is still positive.
    pub positive_side: f64,
    /// Coupling where the upper bound is already negative.
    pub negative_side: f64,
    pub width: f64,
    /// `4 alpha_s / 3` at both sides, ordered.
    pub scaled_interval: [f64; 2],
    pub lower_at_positive: f64,
    pub upper_at_negative: f64,
    pub evaluations: usize,
    pub resolved: bool,
}

#[derive(Debug, Serialize)]
pub struct ScanOrderJson {
    pub order: usize,
    pub feasible: usize,
    pub infeasible: usize,
    pub skipped: usize,
    pub feasible_with_negative_rinv: usize,
}

#[derive(Debug, Serialize)]
pub struct ScanJson {
    pub task: &'static str,
    pub lambda: f64,
    pub n_grid: usize,
    pub e_range: [f64; 2],
    pub rinv_range: [f64; 2],
    pub orders: Vec<ScanOrderJson>,
    /// Cells feasible at order 3 but not at order 2; `None` unless both ran.
    pub nesting_violations: Option<usize>,
    pub csv: String,
}

#[derive(Debug, Serialize)]
pub struct DiagJson {
    pub ground_energy: f64,
    pub kappa: f64,
    pub basis_size: usize,
    pub orthogonality_error: f64,
    pub u_prime_0: f64,
    pub u_triple_prime_0: f64,
}

impl From<&DiagResult> for DiagJson {
    fn from(d: &DiagResult) -> Self {
        let (u1, u3) = d.boundary_derivatives();
        DiagJson {
            ground_energy: d.ground_energy,
            kappa: d.kappa,
            basis_size: d.basis_size,
            orthogonality_error: d.orthogonality_error,
            u_prime_0: u1,
            u_triple_prime_0: u3,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct DiagonalizeJson {
    pub task: &'static str,
    pub potential: String,
    pub result: DiagJson,
    pub refined: Option<DiagJson>,
}

#[derive(Debug, Serialize)]
pub struct ExportJson {
    pub task: &'static str,
    pub potential: String,
    pub sdpa: String,
    pub variables: usize,
    pub blocks: Vec<(String, usize)>,
    pub direction: &'static str,
}

#[derive(Debug, Serialize)]
pub struct SweepJson {
    pub task: &'static str,
    pub param: String,
    pub rows: usize,
    pub failed: usize,
    pub compared: usize,
    pub oracle_violations: usize,
    pub csv: String,
}
