//! Semidefinite programs over the free moment variables.
//!
//! An instance is `min/max c0 + c^T y` subject to `F0 + sum_i y_i F_i >= 0`
//! blockwise. Pencils are kept as exact rationals and converted to floating
//! point only inside [`solve`]. Complex Hermitian blocks are embedded as real
//! symmetric blocks `[[Re, -Im], [Im, Re]]` of twice the size.
//!
//! The solver is a dense infeasible-start primal-dual interior-point method
//! with Nesterov-Todd scaling and a Mehrotra predictor-corrector, generic over
//! [`Real`] so that it can run in double-double precision.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use num_traits::{Signed, Zero};

use crate::basis::BlockKind;
use crate::constraints::{ConstraintSystem, LinExpr, Var};
use crate::error::{Error, Result};
use crate::linalg::{min_eigenvalue, sym_eigen, Lu, Mat};
use crate::rational::{q, to_f64, Q};
use crate::real::{Dd, Real};

/// Sparse symmetric matrix; keys `(i, j)` with `i <= j`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Pencil {
    pub entries: BTreeMap<(usize, usize), Q>,
}

impl Pencil {
    pub fn add(&mut self, i: usize, j: usize, v: &Q) {
        if v.is_zero() {
            return;
        }
        let key = if i <= j { (i, j) } else { (j, i) };
        let slot = self.entries.entry(key).or_insert_with(Q::zero);
        *slot += v;
        if slot.is_zero() {
            self.entries.remove(&key);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn to_dense<T: Real>(&self, n: usize) -> Mat<T> {
        let mut m = Mat::zeros(n, n);
        for (&(i, j), v) in &self.entries {
            let x = T::from_rational(v);
            m[(i, j)] = x;
            m[(j, i)] = x;
        }
        m
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PsdBlock {
    pub label: String,
    pub ground_only: bool,
    pub size: usize,
    pub constant: Pencil,
    /// One pencil per instance variable, possibly empty.
    pub coeffs: Vec<Pencil>,
}

impl PsdBlock {
    pub fn eval(&self, point: &[f64]) -> Mat<f64> {
        let mut m = self.constant.to_dense::<f64>(self.size);
        for (c, &y) in self.coeffs.iter().zip(point) {
            if !c.is_zero() {
                m.axpy(y, &c.to_dense(self.size));
            }
        }
        m
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Minimize,
    Maximize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SdpInstance {
    pub var_names: Vec<String>,
    pub blocks: Vec<PsdBlock>,
    pub objective: Vec<Q>,
    pub objective_constant: Q,
    pub direction: Direction,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Precision {
    Double,
    DoubleDouble,
    /// Double precision, repeated in double-double unless it ends optimal.
    Auto,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverOptions {
    /// Relative duality gap and feasibility target.
    pub tol: f64,
    pub max_iter: usize,
    pub precision: Precision,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { tol: 1e-9, max_iter: 200, precision: Precision::Double }
    }
}

impl SolverOptions {
    pub fn double_double() -> Self {
        SolverOptions { tol: 1e-13, max_iter: 300, precision: Precision::DoubleDouble }
    }

    pub fn auto() -> Self {
        SolverOptions { precision: Precision::Auto, ..Self::default() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    MaxIter,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveResult {
    pub status: SolveStatus,
    /// Certified side of the optimum: the dual objective, a lower bound for
    /// minimization and an upper bound for maximization.
    pub value: f64,
    /// Objective at the returned point.
    pub primal_value: f64,
    pub point: Vec<f64>,
    pub duality_gap: f64,
    pub primal_infeasibility: f64,
    pub dual_infeasibility: f64,
    pub iterations: usize,
}

/// Builds the real SDP for a constraint system.
///
/// Blocks whose entries are all real stay at their size; any other block is
/// embedded at twice its size. With `impose_a_nonneg` a `1x1` block `[A]`
/// is appended when the anomaly `A` is a free variable.
pub fn assemble(system: &ConstraintSystem, direction: Direction, impose_a_nonneg: bool) -> Result<SdpInstance> {
    let map = &system.free_map;
    let objective = map.substitute(&system.objective);
    let mut vars: BTreeSet<Var> = objective.vars().cloned().collect();
    let mut subst_blocks = Vec::new();
    for b in &system.blocks {
        let n = b.entries.len();
        let mut re = vec![vec![LinExpr::zero(); n]; n];
        let mut im = vec![vec![LinExpr::zero(); n]; n];
        for i in 0..n {
            for j in 0..n {
                re[i][j] = map.substitute(&b.entries[i][j].re);
                im[i][j] = map.substitute(&b.entries[i][j].im);
                vars.extend(re[i][j].vars().cloned());
                vars.extend(im[i][j].vars().cloned());
            }
        }
        subst_blocks.push((re, im));
    }
    let a_var = Var::Anomaly(0);
    let add_a = impose_a_nonneg && map.is_free(&a_var) && system.anomalies.iter().any(|a| a.index == 0);
    if add_a {
        vars.insert(a_var.clone());
    }
    // Keep the elimination order of the free variables.
    let order: Vec<Var> = map.free_vars.iter().filter(|v| vars.contains(v)).cloned().collect();
    if order.len() != vars.len() {
        return Err(Error::Solver("block references an eliminated variable".into()));
    }
    let index: BTreeMap<&Var, usize> = order.iter().enumerate().map(|(i, v)| (v, i)).collect();
    let m = order.len();

    let mut blocks = Vec::new();
    for (b, (re, im)) in system.blocks.iter().zip(&subst_blocks) {
        let n = re.len();
        let complex = im.iter().flatten().any(|e| !e.is_zero());
        let size = if complex { 2 * n } else { n };
        let mut constant = Pencil::default();
        let mut coeffs = vec![Pencil::default(); m];
        let mut put = |i: usize, j: usize, e: &LinExpr, s: &Q| {
            if i > j {
                return;
            }
            constant.add(i, j, &(&e.constant * s));
            for (v, c) in &e.terms {
                coeffs[index[v]].add(i, j, &(c * s));
            }
        };
        for i in 0..n {
            for j in 0..n {
                put(i, j, &re[i][j], &q(1));
                if complex {
                    put(n + i, n + j, &re[i][j], &q(1));
                    put(n + i, j, &im[i][j], &q(1));
                    put(i, n + j, &im[i][j], &q(-1));
                }
            }
        }
        let block = PsdBlock { label: b.label.clone(), ground_only: b.kind == BlockKind::Ground, size, constant, coeffs };
        let (block, removed) = restrict_to_range(&block);
        if !removed.is_empty() {
            log::info!("{}: {} row(s) in the common kernel of the pencil removed", block.label, removed.len());
        }
        if block.size > 0 {
            blocks.push(block);
        }
    }
    if add_a {
        let mut coeffs = vec![Pencil::default(); m];
        coeffs[index[&a_var]].add(0, 0, &q(1));
        blocks.push(PsdBlock { label: "A>=0".to_string(), ground_only: false, size: 1, constant: Pencil::default(), coeffs });
    }
    let mut obj = vec![Q::zero(); m];
    for (v, c) in &objective.terms {
        obj[index[v]] = c.clone();
    }
    let mut inst = SdpInstance {
        var_names: order.iter().map(|v| v.to_string()).collect(),
        blocks,
        objective: obj,
        objective_constant: objective.constant.clone(),
        direction,
    };
    for name in drop_unbounded_diagonals(&mut inst) {
        log::info!("{name} has a semidefinite pencil and no cost; blocks compressed onto its kernel");
    }
    Ok(inst)
}

/// Restricts a block to the range of its pencil.
///
/// A vector `v` with `F_k v = 0` for every pencil matrix lies in the kernel
/// of `F(y)` for all `y`, so no point is strictly feasible. Exact row
/// reduction of the stacked pencil finds such vectors; keeping the
/// principal submatrix on the pivot columns is an equivalent constraint.
/// Returns the reduced block and the removed indices.
pub fn restrict_to_range(block: &PsdBlock) -> (PsdBlock, Vec<usize>) {
    let n = block.size;
    let mut rows: Vec<Vec<Q>> = Vec::new();
    for p in core::iter::once(&block.constant).chain(block.coeffs.iter()) {
        if p.is_zero() {
            continue;
        }
        let mut dense = vec![vec![Q::zero(); n]; n];
        for (&(i, j), v) in &p.entries {
            dense[i][j] = v.clone();
            dense[j][i] = v.clone();
        }
        rows.extend(dense.into_iter().filter(|r| r.iter().any(|v| !v.is_zero())));
    }
    let mut pivots = Vec::new();
    let mut next = 0;
    for col in 0..n {
        let Some(p) = (next..rows.len()).find(|&r| !rows[r][col].is_zero()) else {
            continue;
        };
        rows.swap(next, p);
        let inv = Q::from_integer(1.into()) / &rows[next][col];
        let pivot_row: Vec<Q> = rows[next].iter().map(|v| v * &inv).collect();
        for r in (next + 1)..rows.len() {
            if rows[r][col].is_zero() {
                continue;
            }
            let f = rows[r][col].clone();
            for c in col..n {
                let d = &pivot_row[c] * &f;
                rows[r][c] -= d;
            }
        }
        rows[next] = pivot_row;
        pivots.push(col);
        next += 1;
    }
    let removed: Vec<usize> = (0..n).filter(|c| !pivots.contains(c)).collect();
    if removed.is_empty() {
        return (block.clone(), removed);
    }
    let pos: BTreeMap<usize, usize> = pivots.iter().enumerate().map(|(k, &c)| (c, k)).collect();
    let restrict = |p: &Pencil| {
        let mut out = Pencil::default();
        for (&(i, j), v) in &p.entries {
            if let (Some(&a), Some(&b)) = (pos.get(&i), pos.get(&j)) {
                out.add(a, b, v);
            }
        }
        out
    };
    let reduced = PsdBlock {
        label: block.label.clone(),
        ground_only: block.ground_only,
        size: pivots.len(),
        constant: restrict(&block.constant),
        coeffs: block.coeffs.iter().map(restrict).collect(),
    };
    (reduced, removed)
}

/// Dense rational copy of a pencil.
fn dense_q(p: &Pencil, n: usize) -> Vec<Vec<Q>> {
    let mut m = vec![vec![Q::zero(); n]; n];
    for (&(i, j), v) in &p.entries {
        m[i][j] = v.clone();
        m[j][i] = v.clone();
    }
    m
}

/// Exact test for positive semidefiniteness by symmetric elimination.
fn is_psd_exact(mut a: Vec<Vec<Q>>) -> bool {
    let mut alive: Vec<usize> = (0..a.len()).collect();
    while let Some(pos) = alive.iter().position(|&k| !a[k][k].is_zero()) {
        let k = alive.remove(pos);
        if a[k][k].is_negative() {
            return false;
        }
        let piv = a[k][k].clone();
        for &i in &alive {
            if a[i][k].is_zero() {
                continue;
            }
            let f = &a[i][k] / &piv;
            for &j in &alive {
                let d = &f * &a[k][j];
                a[i][j] -= d;
            }
        }
    }
    // zero diagonal left: PSD only if the rest vanishes too
    alive.iter().all(|&i| alive.iter().all(|&j| a[i][j].is_zero()))
}

/// Basis of the kernel of a rational matrix, one column per vector.
fn kernel_basis(m: &[Vec<Q>]) -> Vec<Vec<Q>> {
    let n = m.len();
    let mut rows: Vec<Vec<Q>> = m.iter().filter(|r| r.iter().any(|v| !v.is_zero())).cloned().collect();
    let mut pivots: Vec<usize> = Vec::new();
    let mut next = 0;
    for col in 0..n {
        let Some(p) = (next..rows.len()).find(|&r| !rows[r][col].is_zero()) else {
            continue;
        };
        rows.swap(next, p);
        let inv = Q::from_integer(1.into()) / &rows[next][col];
        rows[next] = rows[next].iter().map(|v| v * &inv).collect();
        for r in 0..rows.len() {
            if r == next || rows[r][col].is_zero() {
                continue;
            }
            let f = rows[r][col].clone();
            for c in 0..n {
                let d = &rows[next][c] * &f;
                rows[r][c] -= d;
            }
        }
        pivots.push(col);
        next += 1;
    }
    (0..n)
        .filter(|c| !pivots.contains(c))
        .map(|free| {
            let mut v = vec![Q::zero(); n];
            v[free] = Q::from_integer(1.into());
            for (r, &pc) in pivots.iter().enumerate() {
                v[pc] = -rows[r][free].clone();
            }
            v
        })
        .collect()
}

/// `W^T P W` for a pencil and the columns `w`.
fn congruence(p: &Pencil, w: &[Vec<Q>], n: usize) -> Pencil {
    let d = dense_q(p, n);
    let mut out = Pencil::default();
    if p.is_zero() {
        return out;
    }
    let dw: Vec<Vec<Q>> = w
        .iter()
        .map(|col| (0..n).map(|i| (0..n).filter(|&k| !col[k].is_zero()).fold(Q::zero(), |acc, k| acc + &d[i][k] * &col[k])).collect())
        .collect();
    for (a, wa) in w.iter().enumerate() {
        for (b, dwb) in dw.iter().enumerate().skip(a) {
            let v = (0..n).filter(|&i| !wa[i].is_zero()).fold(Q::zero(), |acc, i| acc + &wa[i] * &dwb[i]);
            out.add(a, b, &v);
        }
    }
    out
}

/// Removes directions along which the variables can run off at no cost.
///
/// If a variable has zero objective coefficient and its pencil `F_i` is
/// semidefinite in every block, moving along `sign * e_i` never leaves the
/// feasible set, every dual solution vanishes on the range of `F_i`, and the
/// interior-point method loses its dual interior. Compressing each affected
/// block onto `ker F_i` keeps the dual feasible set and only relaxes the
/// primal, so bounds in either direction stay valid. Repeats until no such
/// variable remains; variables with no entries and no cost are removed as
/// well. Returns the names removed.
pub fn drop_unbounded_diagonals(inst: &mut SdpInstance) -> Vec<String> {
    let mut removed = Vec::new();
    loop {
        let m = inst.num_vars();
        let mut target = None;
        for i in 0..m {
            if !inst.objective[i].is_zero() {
                continue;
            }
            let pencils: Vec<(usize, Vec<Vec<Q>>)> = inst
                .blocks
                .iter()
                .enumerate()
                .filter(|(_, b)| !b.coeffs[i].is_zero())
                .map(|(k, b)| (k, dense_q(&b.coeffs[i], b.size)))
                .collect();
            let semidefinite = pencils.iter().all(|(_, d)| is_psd_exact(d.clone()))
                || pencils.iter().all(|(_, d)| is_psd_exact(d.iter().map(|r| r.iter().map(|v| -v.clone()).collect()).collect()));
            if semidefinite {
                target = Some((i, pencils));
                break;
            }
        }
        let Some((i, pencils)) = target else { break };
        for (k, d) in pencils {
            let blk = &mut inst.blocks[k];
            let w = kernel_basis(&d);
            let n = blk.size;
            blk.constant = congruence(&blk.constant, &w, n);
            for c in blk.coeffs.iter_mut() {
                *c = congruence(c, &w, n);
            }
            blk.size = w.len();
        }
        removed.push(inst.var_names.remove(i));
        inst.objective.remove(i);
        for blk in inst.blocks.iter_mut() {
            blk.coeffs.remove(i);
        }
        inst.blocks.retain(|b| b.size > 0);
        for blk in inst.blocks.iter_mut() {
            *blk = restrict_to_range(blk).0;
        }
        inst.blocks.retain(|b| b.size > 0);
    }
    removed
}

impl SdpInstance {
    pub fn num_vars(&self) -> usize {
        self.var_names.len()
    }

    pub fn objective_at(&self, point: &[f64]) -> f64 {
        self.objective.iter().zip(point).fold(to_f64(&self.objective_constant), |acc, (c, y)| acc + to_f64(c) * y)
    }

    pub fn with_direction(&self, direction: Direction) -> SdpInstance {
        SdpInstance { direction, ..self.clone() }
    }
}

/// Minimum eigenvalue of every block at a point.
pub fn check_psd_at(instance: &SdpInstance, point: &[f64]) -> Vec<f64> {
    instance.blocks.iter().map(|b| min_eigenvalue(&b.eval(point))).collect()
}

/// Solves the instance with the precision requested in `opts`.
pub fn solve(instance: &SdpInstance, opts: &SolverOptions) -> Result<SolveResult> {
    match opts.precision {
        Precision::Double => solve_in::<f64>(instance, opts),
        Precision::DoubleDouble => solve_in::<Dd>(instance, opts),
        Precision::Auto => {
            let first = solve_in::<f64>(instance, opts)?;
            if first.status == SolveStatus::Optimal {
                return Ok(first);
            }
            log::debug!("double precision ended {:?}; retrying in double-double", first.status);
            solve_in::<Dd>(instance, &SolverOptions { max_iter: opts.max_iter.max(300), ..opts.clone() })
        }
    }
}

struct DenseBlock<T> {
    f0: Mat<T>,
    f: Vec<Option<Mat<T>>>,
}

struct Scaling<T> {
    g: Mat<T>,
    g_inv: Mat<T>,
    d: Vec<T>,
}

fn scaling<T: Real>(x: &Mat<T>, z: &Mat<T>) -> Option<Scaling<T>> {
    let l = x.cholesky()?;
    let lzl = l.tmatmul(&z.matmul(&l));
    let (lam, q) = sym_eigen(&lzl);
    if lam.iter().any(|&v| !(v > T::zero())) {
        return None;
    }
    let n = x.rows;
    let quarter: Vec<T> = lam.iter().map(|&v| v.sqrt().sqrt()).collect();
    let lq = l.matmul(&q);
    let g = Mat::from_fn(n, n, |i, j| lq[(i, j)] / quarter[j]);
    let l_inv = l.lower_inverse();
    let qt_linv = q.tmatmul(&l_inv);
    let g_inv = Mat::from_fn(n, n, |i, j| quarter[i] * qt_linv[(i, j)]);
    Some(Scaling { g, g_inv, d: lam.iter().map(|&v| v.sqrt()).collect() })
}

/// Largest step in `(0, 1]` scaled by `gamma` keeping `D + a dS` positive.
fn step_length<T: Real>(d: &[T], ds: &Mat<T>, gamma: T) -> T {
    let n = d.len();
    let inv_sqrt: Vec<T> = d.iter().map(|&v| T::one() / v.sqrt()).collect();
    let m = Mat::from_fn(n, n, |i, j| inv_sqrt[i] * ds[(i, j)] * inv_sqrt[j]);
    let lmin = min_eigenvalue(&m);
    if lmin >= T::zero() {
        return T::one();
    }
    (gamma / -lmin).min(T::one())
}

/// Ruiz-style balancing: each variable column is scaled to unit size, then
/// each block row by a diagonal congruence. Returns the column scales `s`
/// with `y = y_scaled / s`.
fn equilibrate<T: Real>(mut blocks: Vec<DenseBlock<T>>, mut c: Vec<T>) -> (Vec<DenseBlock<T>>, Vec<T>, Vec<T>) {
    let m = c.len();
    let mut colscale = vec![T::one(); m];
    for _ in 0..4 {
        for i in 0..m {
            let s = blocks.iter().fold(T::zero(), |a, b| b.f[i].as_ref().map_or(a, |f| a.max(f.max_abs())));
            if s > T::zero() {
                let inv = T::one() / s;
                for b in blocks.iter_mut() {
                    if let Some(f) = b.f[i].as_mut() {
                        *f = f.scale(inv);
                    }
                }
                c[i] *= inv;
                colscale[i] *= s;
            }
        }
        for b in blocks.iter_mut() {
            let n = b.f0.rows;
            let mut rows = vec![T::zero(); n];
            for f in core::iter::once(&b.f0).chain(b.f.iter().flatten()) {
                for a in 0..n {
                    for k in 0..n {
                        rows[a] = rows[a].max(f[(a, k)].abs());
                    }
                }
            }
            let d: Vec<T> = rows.iter().map(|&r| if r > T::zero() { T::one() / r.sqrt() } else { T::one() }).collect();
            let cong = |f: &Mat<T>| Mat::from_fn(n, n, |a, k| d[a] * f[(a, k)] * d[k]);
            b.f0 = cong(&b.f0);
            for f in b.f.iter_mut().flatten() {
                *f = cong(f);
            }
        }
    }
    (blocks, c, colscale)
}

fn solve_in<T: Real>(inst: &SdpInstance, opts: &SolverOptions) -> Result<SolveResult> {
    let m = inst.num_vars();
    let sign = if inst.direction == Direction::Maximize { -T::one() } else { T::one() };
    let c: Vec<T> = inst.objective.iter().map(|v| sign * T::from_rational(v)).collect();
    let c0 = T::from_rational(&inst.objective_constant);
    for (i, ci) in c.iter().enumerate() {
        if *ci != T::zero() && inst.blocks.iter().all(|b| b.coeffs[i].is_zero()) {
            return Ok(SolveResult {
                status: SolveStatus::Unbounded,
                value: if inst.direction == Direction::Minimize { f64::NEG_INFINITY } else { f64::INFINITY },
                primal_value: f64::NAN,
                point: vec![0.0; m],
                duality_gap: f64::INFINITY,
                primal_infeasibility: 0.0,
                dual_infeasibility: 0.0,
                iterations: 0,
            });
        }
    }
    let blocks: Vec<DenseBlock<T>> = inst
        .blocks
        .iter()
        .map(|b| DenseBlock {
            f0: b.constant.to_dense(b.size),
            f: b.coeffs.iter().map(|p| if p.is_zero() { None } else { Some(p.to_dense(b.size)) }).collect(),
        })
        .collect();
    let (blocks, c, colscale) = equilibrate(blocks, c);
    let ntot: usize = blocks.iter().map(|b| b.f0.rows).sum();
    let mut scale = T::one();
    for b in &blocks {
        scale = scale.max(b.f0.max_abs());
        for f in b.f.iter().flatten() {
            scale = scale.max(f.max_abs());
        }
    }
    let cnorm = c.iter().fold(T::zero(), |a, &v| a.max(v.abs()));
    let f0norm = blocks.iter().fold(T::zero(), |a, b| a.max(b.f0.max_abs()));
    let xi = T::from_f64(10.0) * scale.max(cnorm);
    let mut y = vec![T::zero(); m];
    let mut xs: Vec<Mat<T>> = blocks.iter().map(|b| Mat::identity(b.f0.rows).scale(xi)).collect();
    let mut zs: Vec<Mat<T>> = xs.clone();
    let tol = T::from_f64(opts.tol);
    let gamma = T::from_f64(0.95);
    let half = T::from_f64(0.5);
    let two = T::from_f64(2.0);

    let mut status = SolveStatus::MaxIter;
    let mut iterations = 0;
    let (mut pobj, mut dobj, mut pinf, mut dinf) = (T::zero(), T::zero(), T::zero(), T::zero());
    for it in 0..=opts.max_iter {
        iterations = it;
        // residuals
        let mut p_res = Vec::with_capacity(blocks.len());
        for (k, b) in blocks.iter().enumerate() {
            let mut p = b.f0.clone();
            for (i, f) in b.f.iter().enumerate() {
                if let Some(f) = f {
                    p.axpy(y[i], f);
                }
            }
            p_res.push(p.sub(&zs[k]));
        }
        let mut d_res = c.clone();
        for (k, b) in blocks.iter().enumerate() {
            for (i, f) in b.f.iter().enumerate() {
                if let Some(f) = f {
                    d_res[i] -= f.dot(&xs[k]);
                }
            }
        }
        pobj = c.iter().zip(&y).fold(T::zero(), |a, (&ci, &yi)| a + ci * yi);
        dobj = blocks.iter().zip(&xs).fold(T::zero(), |a, (b, x)| a - b.f0.dot(x));
        pinf = p_res.iter().fold(T::zero(), |a, p| a.max(p.max_abs())) / (T::one() + f0norm);
        dinf = d_res.iter().fold(T::zero(), |a, d| a.max(d.abs())) / (T::one() + cnorm);
        let mu = xs.iter().zip(&zs).fold(T::zero(), |a, (x, z)| a + x.dot(z)) / T::from_usize(ntot.max(1));
        let gap = (pobj - dobj).abs() / (T::one() + pobj.abs() + dobj.abs());
        log::trace!(
            "it {it}: pobj {:.12e} dobj {:.12e} pinf {:.2e} dinf {:.2e} mu {:.2e}",
            pobj.to_f64(),
            dobj.to_f64(),
            pinf.to_f64(),
            dinf.to_f64(),
            mu.to_f64()
        );
        if gap < tol && pinf < tol && dinf < tol {
            status = SolveStatus::Optimal;
            break;
        }
        // Diverging iterates along a ray certify infeasibility or
        // unboundedness of the other side.
        let xtr = xs.iter().fold(T::zero(), |a, x| a + x.trace());
        let big = T::from_f64(1e8) * xi * T::from_usize(ntot.max(1));
        if xtr > big && dobj > T::from_f64(1e-8) * xtr {
            status = SolveStatus::Infeasible;
            break;
        }
        let ynorm = y.iter().fold(T::zero(), |a, &v| a.max(v.abs()));
        if ynorm > big && -pobj > T::from_f64(1e-8) * ynorm * (T::one() + cnorm) {
            status = SolveStatus::Unbounded;
            break;
        }
        if it == opts.max_iter {
            break;
        }

        let mut sc = Vec::with_capacity(blocks.len());
        for (x, z) in xs.iter().zip(&zs) {
            match scaling(x, z) {
                Some(s) => sc.push(s),
                None => break,
            }
        }
        if sc.len() != xs.len() {
            log::warn!("interior-point iterates lost positivity at iteration {it}");
            break;
        }
        let fh: Vec<Vec<Option<Mat<T>>>> = blocks
            .iter()
            .zip(&sc)
            .map(|(b, s)| b.f.iter().map(|f| f.as_ref().map(|f| s.g.tmatmul(&f.matmul(&s.g)))).collect())
            .collect();
        let ph: Vec<Mat<T>> = p_res.iter().zip(&sc).map(|(p, s)| s.g.tmatmul(&p.matmul(&s.g))).collect();
        let mut schur: Mat<T> = Mat::zeros(m, m);
        for fb in &fh {
            for i in 0..m {
                let Some(fi) = &fb[i] else { continue };
                for j in i..m {
                    if let Some(fj) = &fb[j] {
                        let v = fi.dot(fj);
                        schur[(i, j)] += v;
                        if i != j {
                            schur[(j, i)] += v;
                        }
                    }
                }
            }
        }
        let diag_max = (0..m).fold(T::zero(), |a, i| a.max(schur[(i, i)].abs()));
        let lu = Lu::new(&schur, (diag_max * T::epsilon() * T::from_f64(1e-2)).max(T::from_f64(1e-300)));

        let direction = |ts: &[Mat<T>]| -> (Vec<T>, Vec<Mat<T>>, Vec<Mat<T>>) {
            let mut rhs: Vec<T> = d_res.iter().map(|&d| -d).collect();
            for ((fb, t), p) in fh.iter().zip(ts).zip(&ph) {
                let tp = t.sub(p);
                for i in 0..m {
                    if let Some(fi) = &fb[i] {
                        rhs[i] += fi.dot(&tp);
                    }
                }
            }
            let dy = lu.solve(&rhs);
            let mut dxs = Vec::with_capacity(ts.len());
            let mut dzs = Vec::with_capacity(ts.len());
            for ((fb, t), p) in fh.iter().zip(ts).zip(&ph) {
                let mut dz = p.clone();
                for i in 0..m {
                    if let Some(fi) = &fb[i] {
                        dz.axpy(dy[i], fi);
                    }
                }
                dxs.push(t.sub(&dz));
                dzs.push(dz);
            }
            (dy, dxs, dzs)
        };

        // predictor
        let t_aff: Vec<Mat<T>> = sc.iter().map(|s| Mat::diag(&s.d.iter().map(|&v| -v).collect::<Vec<_>>())).collect();
        let (_, dxa, dza) = direction(&t_aff);
        let mut ap = T::one();
        let mut ad = T::one();
        for ((s, dx), dz) in sc.iter().zip(&dxa).zip(&dza) {
            ap = ap.min(step_length(&s.d, dx, T::one()));
            ad = ad.min(step_length(&s.d, dz, T::one()));
        }
        let mut mu_aff = T::zero();
        for ((s, dx), dz) in sc.iter().zip(&dxa).zip(&dza) {
            let dm = Mat::diag(&s.d);
            let mut xa = dm.clone();
            xa.axpy(ap, dx);
            let mut za = dm;
            za.axpy(ad, dz);
            mu_aff += xa.dot(&za);
        }
        mu_aff /= T::from_usize(ntot.max(1));
        let ratio = (mu_aff / mu).max(T::zero()).min(T::one());
        let sigma = ratio * ratio * ratio;

        // corrector
        let t_cor: Vec<Mat<T>> = sc
            .iter()
            .zip(&dxa)
            .zip(&dza)
            .map(|((s, dx), dz)| {
                let n = s.d.len();
                let prod = dx.matmul(dz);
                Mat::from_fn(n, n, |i, j| {
                    let mut r = -half * (prod[(i, j)] + prod[(j, i)]);
                    if i == j {
                        r += sigma * mu - s.d[i] * s.d[i];
                    }
                    two * r / (s.d[i] + s.d[j])
                })
            })
            .collect();
        let (dy, dx, dz) = direction(&t_cor);
        let mut ap = T::one();
        let mut ad = T::one();
        for ((s, dxk), dzk) in sc.iter().zip(&dx).zip(&dz) {
            ap = ap.min(step_length(&s.d, dxk, gamma));
            ad = ad.min(step_length(&s.d, dzk, gamma));
        }
        let dxs: Vec<Mat<T>> = sc.iter().zip(&dx).map(|(s, d)| s.g.matmul(&d.matmul_t(&s.g)).symmetrize()).collect();
        let dzs: Vec<Mat<T>> = sc.iter().zip(&dz).map(|(s, d)| s.g_inv.tmatmul(&d.matmul(&s.g_inv)).symmetrize()).collect();
        // The scaled step length can be optimistic after rounding; back off
        // until both iterates factor.
        let advance = |base: &[Mat<T>], d: &[Mat<T>], mut a: T| -> Option<(Vec<Mat<T>>, T)> {
            for _ in 0..30 {
                let next: Vec<Mat<T>> = base
                    .iter()
                    .zip(d)
                    .map(|(b, dk)| {
                        let mut n = b.clone();
                        n.axpy(a, dk);
                        n
                    })
                    .collect();
                if next.iter().all(|n| n.cholesky().is_some()) {
                    return Some((next, a));
                }
                a *= half;
            }
            None
        };
        let (Some((nx, _)), Some((nz, ad))) = (advance(&xs, &dxs, ap), advance(&zs, &dzs, ad)) else {
            log::warn!("interior-point step collapsed at iteration {it}");
            break;
        };
        xs = nx;
        zs = nz;
        for (yi, di) in y.iter_mut().zip(&dy) {
            *yi += ad * *di;
        }
    }

    let unsign = |v: T| (sign * v + c0).to_f64();
    Ok(SolveResult {
        status,
        value: unsign(dobj),
        primal_value: unsign(pobj),
        point: y.iter().zip(&colscale).map(|(v, s)| (*v / *s).to_f64()).collect(),
        duality_gap: (pobj - dobj).abs().to_f64(),
        primal_infeasibility: pinf.to_f64(),
        dual_infeasibility: dinf.to_f64(),
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_var(constant: &[(usize, usize, i64)], coeff: &[(usize, usize, i64)], size: usize) -> SdpInstance {
        let mut c = Pencil::default();
        for &(i, j, v) in constant {
            c.add(i, j, &q(v));
        }
        let mut f = Pencil::default();
        for &(i, j, v) in coeff {
            f.add(i, j, &q(v));
        }
        SdpInstance {
            var_names: vec!["x".into()],
            blocks: vec![PsdBlock { label: "B".into(), ground_only: false, size, constant: c, coeffs: vec![f] }],
            objective: vec![q(1)],
            objective_constant: q(0),
            direction: Direction::Minimize,
        }
    }

    #[test]
    fn two_by_two_feasibility() {
        // (x, 1; 1, x) >= 0 has minimal x = 1
        let inst = one_var(&[(0, 1, 1)], &[(0, 0, 1), (1, 1, 1)], 2);
        let r = solve(&inst, &SolverOptions::default()).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!((r.value - 1.0).abs() < 1e-8, "{}", r.value);
        assert!(r.value <= r.primal_value + 1e-12);
    }

    #[test]
    fn scalar_bound_and_maximize() {
        // x - 2 >= 0 and 5 - x >= 0
        let mut inst = one_var(&[(0, 0, -2), (1, 1, 5)], &[(0, 0, 1), (1, 1, -1)], 2);
        let lo = solve(&inst, &SolverOptions::default()).unwrap();
        assert!((lo.value - 2.0).abs() < 1e-8);
        inst.direction = Direction::Maximize;
        let hi = solve(&inst, &SolverOptions::default()).unwrap();
        assert!((hi.value - 5.0).abs() < 1e-8, "{}", hi.value);
    }

    #[test]
    fn double_double_tightens_the_gap() {
        let inst = one_var(&[(0, 1, 1)], &[(0, 0, 1), (1, 1, 1)], 2);
        let r = solve(&inst, &SolverOptions::double_double()).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!((r.value - 1.0).abs() < 1e-12, "{}", r.value);
    }

    #[test]
    fn detects_unbounded_and_infeasible() {
        // objective variable absent from every block
        let mut inst = one_var(&[(0, 0, 1)], &[], 1);
        assert_eq!(solve(&inst, &SolverOptions::default()).unwrap().status, SolveStatus::Unbounded);
        // x >= 1 and -x >= 0
        inst = one_var(&[(0, 0, -1)], &[(0, 0, 1), (1, 1, -1)], 2);
        assert_eq!(solve(&inst, &SolverOptions::default()).unwrap().status, SolveStatus::Infeasible);
    }

    #[test]
    fn kernel_rows_are_removed() {
        // [[y, y, 0], [y, y, 0], [0, 0, 1 - y]] has the common kernel (1, -1, 0)
        let mut c = Pencil::default();
        c.add(2, 2, &q(1));
        let mut f = Pencil::default();
        for (i, j) in [(0, 0), (0, 1), (1, 1)] {
            f.add(i, j, &q(1));
        }
        f.add(2, 2, &q(-1));
        let b = PsdBlock { label: "B".into(), ground_only: false, size: 3, constant: c, coeffs: vec![f] };
        let (r, removed) = restrict_to_range(&b);
        assert_eq!(removed, vec![1]);
        assert_eq!(r.size, 2);
        assert_eq!(r.eval(&[0.25]).max_abs(), 0.75);
    }

    #[test]
    fn psd_check_at_point() {
        let inst = one_var(&[(0, 1, 1)], &[(0, 0, 1), (1, 1, 1)], 2);
        let e = check_psd_at(&inst, &[0.0]);
        assert!((e[0] + 1.0).abs() < 1e-12);
    }
}
