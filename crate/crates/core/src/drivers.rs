//! High-level procedures: energy bounds, critical couplings of the Cornell
//! family, and feasibility scans for the inverse-square potential.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::basis::{preset, BasisSet, BlockKind};
use crate::constraints::{ConstraintSystem, MomentKey, SystemOptions, Var, VariableCounts};
use crate::error::{Error, Result};
use crate::linalg::{min_eigenvalue, Mat};
use crate::opalg::FuncKey;
use crate::potentials::{Family, PotentialSpec};
use crate::rational::rational_from_f64;
use crate::sdp::{assemble, solve, Direction, SdpInstance, SolveResult, SolveStatus, SolverOptions};

/// Eigenvalue floor for feasibility of a numeric moment matrix.
pub const PSD_FLOOR: f64 = -1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct BoundOptions {
    pub solver: SolverOptions,
    pub system: SystemOptions,
    /// Adds `A >= 0` for the leading anomaly when it is a free variable.
    pub impose_a_nonneg: bool,
}

impl Default for BoundOptions {
    fn default() -> Self {
        BoundOptions { solver: SolverOptions::auto(), system: SystemOptions::new(), impose_a_nonneg: false }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum UpperBound {
    Bounded(f64),
    /// At or above the continuum threshold, so it says nothing about a
    /// bound state.
    Trivial(f64),
    Unbounded,
    /// No ground-state block in the basis set; maximization was not run.
    NotAvailable,
}

impl UpperBound {
    /// The bound as a number, `+inf` when there is none.
    pub fn value(&self) -> f64 {
        match self {
            UpperBound::Bounded(v) | UpperBound::Trivial(v) => *v,
            UpperBound::Unbounded | UpperBound::NotAvailable => f64::INFINITY,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundsResult {
    pub potential: String,
    pub basis_id: String,
    pub lower: f64,
    pub upper: UpperBound,
    pub lower_solve: SolveResult,
    pub upper_solve: Option<SolveResult>,
    pub counts: VariableCounts,
}

/// Energy where the continuum starts, if the potential vanishes at infinity.
fn continuum_threshold(spec: &PotentialSpec) -> Option<f64> {
    match spec.family {
        Family::Coulomb { .. } | Family::Yukawa { .. } | Family::Gaussian { .. } => Some(0.0),
        Family::Cornell { .. } | Family::Conformal { .. } => None,
    }
}

fn describe_failure(what: &str, r: &SolveResult) -> String {
    format!(
        "{what}: {:?} after {} iterations (gap {:.2e}, primal infeasibility {:.2e}, dual infeasibility {:.2e})",
        r.status, r.iterations, r.duality_gap, r.primal_infeasibility, r.dual_infeasibility
    )
}

/// Lower bound by minimizing `<H>`, and with `both` an upper bound by
/// maximizing it over the same constraints.
pub fn bound_ground_energy(
    spec: &PotentialSpec,
    bases: &BasisSet,
    both: bool,
    opts: &BoundOptions,
) -> Result<BoundsResult> {
    let system = ConstraintSystem::build(bases, spec, &opts.system)?;
    bound_system(spec, bases, &system, both, opts)
}

/// As [`bound_ground_energy`] for an already built system.
pub fn bound_system(
    spec: &PotentialSpec,
    bases: &BasisSet,
    system: &ConstraintSystem,
    both: bool,
    opts: &BoundOptions,
) -> Result<BoundsResult> {
    let inst = assemble(system, Direction::Minimize, opts.impose_a_nonneg)?;
    let lower_solve = solve(&inst, &opts.solver)?;
    let lower = match lower_solve.status {
        SolveStatus::Optimal => lower_solve.value,
        SolveStatus::Infeasible => return Err(Error::NoBoundState(format!("{}: constraints infeasible", spec.describe()))),
        _ => return Err(Error::Solver(describe_failure("minimization", &lower_solve))),
    };
    let has_ground = bases.blocks.iter().any(|b| b.kind == BlockKind::Ground);
    let (upper, upper_solve) = if !both || !has_ground {
        (UpperBound::NotAvailable, None)
    } else {
        let r = solve(&inst.with_direction(Direction::Maximize), &opts.solver)?;
        let up = match r.status {
            SolveStatus::Optimal => match continuum_threshold(spec) {
                Some(t) if r.value >= t => UpperBound::Trivial(r.value),
                _ => UpperBound::Bounded(r.value),
            },
            SolveStatus::Unbounded => UpperBound::Unbounded,
            _ => return Err(Error::Solver(describe_failure("maximization", &r))),
        };
        (up, Some(r))
    };
    Ok(BoundsResult {
        potential: spec.describe(),
        basis_id: bases.name.clone(),
        lower,
        upper,
        lower_solve,
        upper_solve,
        counts: system.counts.clone(),
    })
}

/// Values of every determined moment at a solver point.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentReport {
    pub entries: Vec<(String, f64)>,
}

impl MomentReport {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }
}

/// Free-variable values keyed by variable, from an instance's point.
pub fn point_values(system: &ConstraintSystem, inst: &SdpInstance, point: &[f64]) -> BTreeMap<Var, f64> {
    let by_name: BTreeMap<&str, f64> = inst.var_names.iter().map(String::as_str).zip(point.iter().copied()).collect();
    system
        .free_map
        .free_vars
        .iter()
        .filter_map(|v| by_name.get(v.to_string().as_str()).map(|x| (v.clone(), *x)))
        .collect()
}

/// Reconstructs all moments and anomalies fixed by the free variables in
/// the instance. Variables left free but absent from every block are omitted.
pub fn moment_report(system: &ConstraintSystem, inst: &SdpInstance, result: &SolveResult) -> MomentReport {
    let free = point_values(system, inst, &result.point);
    let mut entries = Vec::new();
    for (v, x) in &free {
        entries.push((v.to_string(), *x));
    }
    for (v, e) in &system.free_map.expressions {
        if e.vars().all(|u| free.contains_key(u)) {
            entries.push((v.to_string(), system.value_of(v, &free)));
        }
    }
    entries.sort_by(|a, b| a.0.cmp(&b.0));
    MomentReport { entries }
}

/// Certified bracket of the Cornell critical coupling.
#[derive(Clone, Debug, PartialEq)]
pub struct CriticalInterval {
    /// Coupling `alpha_s` with a certified positive ground energy.
    pub positive_side: f64,
    /// Coupling `alpha_s` with a certified negative ground energy.
    pub negative_side: f64,
    /// Lower bound on the energy at `positive_side`.
    pub lower_at_positive: f64,
    /// Upper bound on the energy at `negative_side`.
    pub upper_at_negative: f64,
    pub evaluations: usize,
    /// False if bisection stopped because neither sign could be certified.
    pub resolved: bool,
}

impl CriticalInterval {
    pub fn width(&self) -> f64 {
        (self.positive_side - self.negative_side).abs()
    }

    /// The bracket in `4 alpha_s / 3`, ordered.
    pub fn scaled(&self) -> (f64, f64) {
        let a = 4.0 * self.positive_side / 3.0;
        let b = 4.0 * self.negative_side / 3.0;
        (a.min(b), a.max(b))
    }
}

enum Sign {
    Positive(f64),
    Negative(f64),
    Unknown,
}

fn certified_sign(alpha_s: f64, sigma: f64, bases: &BasisSet, opts: &BoundOptions) -> Result<Sign> {
    let spec = PotentialSpec::cornell(alpha_s, sigma)?;
    let r = bound_ground_energy(&spec, bases, true, opts)?;
    if r.lower > 0.0 {
        return Ok(Sign::Positive(r.lower));
    }
    match r.upper {
        UpperBound::Bounded(u) if u < 0.0 => Ok(Sign::Negative(u)),
        _ => Ok(Sign::Unknown),
    }
}

/// Bisection in `alpha_s` for the Cornell coupling where the ground energy
/// crosses zero. A positive lower bound puts the crossing on one side and a
/// negative upper bound on the other; the endpoints of `bracket` must be
/// certified with opposite signs.
pub fn critical_coupling(
    sigma: f64,
    bases: &BasisSet,
    bracket: (f64, f64),
    tol: f64,
    opts: &BoundOptions,
) -> Result<CriticalInterval> {
    let (a, b) = bracket;
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter("tolerance must be positive".into()));
    }
    let sa = certified_sign(a, sigma, bases, opts)?;
    let sb = certified_sign(b, sigma, bases, opts)?;
    let (mut pos, mut lower, mut neg, mut upper) = match (sa, sb) {
        (Sign::Positive(l), Sign::Negative(u)) => (a, l, b, u),
        (Sign::Negative(u), Sign::Positive(l)) => (b, l, a, u),
        _ => return Err(Error::Bracket { lo: a, hi: b }),
    };
    let mut evaluations = 2;
    let mut resolved = true;
    while (pos - neg).abs() > tol {
        let mid = 0.5 * (pos + neg);
        evaluations += 1;
        match certified_sign(mid, sigma, bases, opts)? {
            Sign::Positive(l) => {
                pos = mid;
                lower = l;
            }
            Sign::Negative(u) => {
                neg = mid;
                upper = u;
            }
            Sign::Unknown => {
                log::warn!("energy sign undecided at alpha_s = {mid}; stopping bisection");
                resolved = false;
                break;
            }
        }
        log::debug!("critical coupling bracket [{pos}, {neg}]");
    }
    Ok(CriticalInterval {
        positive_side: pos,
        negative_side: neg,
        lower_at_positive: lower,
        upper_at_negative: upper,
        evaluations,
        resolved,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Cell {
    Feasible,
    Infeasible,
    /// `E = 0`, where the recursion does not fix the moments.
    Skipped,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeasibilityGrid {
    pub lambda: f64,
    pub order: usize,
    pub e_axis: Vec<f64>,
    pub rinv_axis: Vec<f64>,
    /// `cells[i][j]` at `(e_axis[i], rinv_axis[j])`.
    pub cells: Vec<Vec<Cell>>,
}

impl FeasibilityGrid {
    pub fn count(&self, cell: Cell) -> usize {
        self.cells.iter().flatten().filter(|c| **c == cell).count()
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => alloc::vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

fn conformal_bases(order: usize) -> Result<BasisSet> {
    match order {
        2 => preset("conformal-2"),
        3 => preset("conformal-3"),
        _ => Err(Error::InvalidParameter(format!("matrix order must be 2 or 3, got {order}"))),
    }
}

/// SDP in `<1/r>` for the inverse-square potential at a fixed energy, with
/// the other moments fixed by the recursion. Minimizing gives the smallest
/// `<1/r>` compatible with the moment matrices of the given order.
pub fn conformal_instance(lambda: f64, energy: f64, order: usize, direction: Direction) -> Result<(ConstraintSystem, SdpInstance)> {
    let spec = PotentialSpec::conformal(lambda)?;
    let system = ConstraintSystem::conformal(&conformal_bases(order)?, &spec, &rational_from_f64(energy)?)?;
    let inst = assemble(&system, direction, false)?;
    Ok((system, inst))
}

/// Marks `(E, <1/r>)` cells of the inverse-square potential as feasible when
/// both moment matrices of the given order are positive semidefinite, with
/// all other moments fixed by the recursion.
pub fn conformal_feasibility_scan(
    lambda: f64,
    e_range: (f64, f64),
    rinv_range: (f64, f64),
    n_grid: usize,
    order: usize,
) -> Result<FeasibilityGrid> {
    let bases = conformal_bases(order)?;
    let spec = PotentialSpec::conformal(lambda)?;
    let e_axis = linspace(e_range.0, e_range.1, n_grid);
    let rinv_axis = linspace(rinv_range.0, rinv_range.1, n_grid);
    let rinv = Var::Moment(MomentKey::new(FuncKey::r(-2), 0));
    let mut cells = Vec::with_capacity(n_grid);
    for &e in &e_axis {
        if e == 0.0 {
            cells.push(alloc::vec![Cell::Skipped; rinv_axis.len()]);
            continue;
        }
        let system = ConstraintSystem::conformal(&bases, &spec, &rational_from_f64(e)?)?;
        let stray = system.blocks.iter().flat_map(|b| b.entries.iter().flatten()).any(|c| {
            system.free_map.substitute(&c.re).vars().any(|v| *v != rinv)
        });
        if stray {
            return Err(Error::Unsupported(format!("recursion leaves moments other than <1/r> free at E = {e}")));
        }
        let mut row = Vec::with_capacity(rinv_axis.len());
        for &x in &rinv_axis {
            let mut free = BTreeMap::new();
            free.insert(rinv.clone(), x);
            let feasible = system.blocks.iter().all(|b| {
                let n = b.entries.len();
                let m: Mat<f64> = Mat::from_fn(n, n, |i, j| {
                    b.entries[i][j].re.eval(|v| system.value_of(v, &free))
                });
                min_eigenvalue(&m) >= PSD_FLOOR
            });
            row.push(if feasible { Cell::Feasible } else { Cell::Infeasible });
        }
        cells.push(row);
    }
    Ok(FeasibilityGrid { lambda, order, e_axis, rinv_axis, cells })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coulomb_bounds_meet() {
        let spec = PotentialSpec::coulomb(1.0).unwrap();
        let bases = preset("coulomb-s2").unwrap();
        let r = bound_ground_energy(&spec, &bases, true, &BoundOptions::default()).unwrap();
        assert!((r.lower + 0.5).abs() < 1e-8, "{}", r.lower);
        match r.upper {
            UpperBound::Bounded(u) => assert!((u + 0.5).abs() < 1e-8, "{u}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn no_upper_bound_without_ground_blocks() {
        let spec = PotentialSpec::coulomb(1.0).unwrap();
        let mut bases = preset("coulomb-s2").unwrap();
        bases.blocks.retain(|b| b.kind == BlockKind::Gram);
        let r = bound_ground_energy(&spec, &bases, true, &BoundOptions::default()).unwrap();
        assert_eq!(r.upper, UpperBound::NotAvailable);
        assert!(r.lower <= -0.5 + 1e-8);
    }

    #[test]
    fn coulomb_report_has_inverse_radius() {
        let spec = PotentialSpec::coulomb(1.0).unwrap();
        let bases = preset("coulomb-s2").unwrap();
        let system = ConstraintSystem::build(&bases, &spec, &SystemOptions::new()).unwrap();
        let inst = assemble(&system, Direction::Minimize, false).unwrap();
        let r = solve(&inst, &SolverOptions::default()).unwrap();
        let report = moment_report(&system, &inst, &r);
        assert!((report.get("x[r^-1]").unwrap() - 1.0).abs() < 1e-8);
        assert_eq!(report.get("x[1]"), Some(1.0));
    }

    #[test]
    fn conformal_minimum_matches_scan_edge() {
        let (_, inst) = conformal_instance(-0.5, -1.0, 2, Direction::Minimize).unwrap();
        let r = solve(&inst, &SolverOptions::default()).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        let g = conformal_feasibility_scan(-0.5, (-1.0, -1.0), (r.value - 1e-4, r.value + 1e-4), 2, 2).unwrap();
        assert_eq!(g.cells[0], alloc::vec![Cell::Infeasible, Cell::Feasible]);
    }

    #[test]
    fn degenerate_bracket_is_rejected() {
        let bases = preset("cornell-s5").unwrap();
        let r = critical_coupling(1.0, &bases, (0.0, 0.1), 1e-3, &BoundOptions::default());
        assert!(matches!(r, Err(Error::Bracket { .. })), "{r:?}");
    }

    #[test]
    fn negative_inverse_radius_is_infeasible() {
        let g = conformal_feasibility_scan(-0.5, (-2.0, -0.1), (-1.0, 3.0), 9, 2).unwrap();
        for row in &g.cells {
            for (j, c) in row.iter().enumerate() {
                if g.rinv_axis[j] < 0.0 {
                    assert_eq!(*c, Cell::Infeasible);
                }
            }
        }
        assert!(g.count(Cell::Feasible) > 0);
    }
}
