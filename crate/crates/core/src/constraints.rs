//! Affine relations among moments and their exact elimination.
//!
//! For a real ground state `u` the natural variables are the real integrals
//! `x(f, k) = int_0^inf u f u^(k) dr`, in terms of which a canonical moment is
//! `<f p^k> = (-i)^k x(f, k)`. Gram entries `int (X u)^* (Y u)` are reduced
//! to these variables by integrating by parts; every surface term at the
//! origin is evaluated through [`FrobeniusExpansion`] and becomes a
//! combination of anomaly variables.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use num_traits::{One, Zero};

use crate::anomaly::{AnomalyVariable, BoundaryResult, BoundaryTerm, FrobeniusExpansion};
use crate::basis::{BasisSet, BlockKind};
use crate::error::{Error, Result};
use crate::opalg::{Algebra, FuncKey, Mono, OperatorPoly};
use crate::potentials::PotentialSpec;
use crate::rational::{binom, conj, creal, i_pow, q, qf, to_f64, Q, CQ};

/// `x(f, k) = int u f u^(k) dr` with `f` reduced.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MomentKey {
    pub f: FuncKey,
    pub k: u32,
}

impl MomentKey {
    pub fn new(f: FuncKey, k: u32) -> Self {
        MomentKey { f, k }
    }

    pub fn one() -> Self {
        MomentKey { f: FuncKey::one(), k: 0 }
    }
}

impl fmt::Display for MomentKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "x[{}]", Mono { f: self.f.clone(), p: self.k })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Var {
    Moment(MomentKey),
    Anomaly(usize),
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::Moment(k) => write!(f, "{k}"),
            Var::Anomaly(j) => write!(f, "{}", crate::anomaly::AnomalyVariable::new(*j).name),
        }
    }
}

/// Real affine expression `constant + sum c_v v`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LinExpr {
    pub terms: BTreeMap<Var, Q>,
    pub constant: Q,
}

impl LinExpr {
    pub fn zero() -> Self {
        LinExpr::default()
    }

    pub fn constant(c: Q) -> Self {
        LinExpr { terms: BTreeMap::new(), constant: c }
    }

    pub fn var(v: Var) -> Self {
        let mut e = LinExpr::zero();
        e.add_var(v, q(1));
        e
    }

    pub fn add_var(&mut self, v: Var, c: Q) {
        if c.is_zero() {
            return;
        }
        let slot = self.terms.entry(v.clone()).or_insert_with(Q::zero);
        *slot += c;
        if slot.is_zero() {
            self.terms.remove(&v);
        }
    }

    pub fn add_scaled(&mut self, other: &LinExpr, s: &Q) {
        if s.is_zero() {
            return;
        }
        for (v, c) in &other.terms {
            self.add_var(v.clone(), c * s);
        }
        self.constant += &other.constant * s;
    }

    pub fn scaled(&self, s: &Q) -> LinExpr {
        let mut out = LinExpr::zero();
        out.add_scaled(self, s);
        out
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty() && self.constant.is_zero()
    }

    pub fn vars(&self) -> impl Iterator<Item = &Var> {
        self.terms.keys()
    }

    pub fn eval(&self, mut value: impl FnMut(&Var) -> f64) -> f64 {
        self.terms.iter().fold(to_f64(&self.constant), |acc, (v, c)| acc + to_f64(c) * value(v))
    }

    /// Largest absolute coefficient, constant included.
    pub fn scale_norm(&self) -> f64 {
        self.terms.values().chain(core::iter::once(&self.constant)).map(|c| to_f64(c).abs()).fold(0.0, f64::max)
    }
}

/// Complex affine expression over real variables.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CLinExpr {
    pub re: LinExpr,
    pub im: LinExpr,
}

impl CLinExpr {
    pub fn zero() -> Self {
        CLinExpr::default()
    }

    pub fn add_scaled(&mut self, e: &LinExpr, c: &CQ) {
        self.re.add_scaled(e, &c.re);
        self.im.add_scaled(e, &c.im);
    }

    pub fn add_c(&mut self, other: &CLinExpr, c: &CQ) {
        // (a + ib)(re + i im)
        self.re.add_scaled(&other.re, &c.re);
        self.re.add_scaled(&other.im, &-c.im.clone());
        self.im.add_scaled(&other.im, &c.re);
        self.im.add_scaled(&other.re, &c.im);
    }

    pub fn conj(&self) -> CLinExpr {
        CLinExpr { re: self.re.clone(), im: self.im.scaled(&q(-1)) }
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }
}

/// Relation `expr = 0` together with where it came from.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineRelation {
    pub expr: LinExpr,
    pub origin: String,
}

/// Which relation a surface term belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SurfaceKind {
    Reversal,
    Eom,
}

/// Builds moment expressions and relations for one potential.
pub struct Builder {
    pub spec: PotentialSpec,
    pub alg: Algebra,
    pub frob: FrobeniusExpansion,
    admissible: BTreeMap<MomentKey, bool>,
}

impl Builder {
    pub fn new(spec: &PotentialSpec, frobenius_order: usize) -> Result<Self> {
        Ok(Builder {
            alg: spec.algebra(),
            frob: FrobeniusExpansion::new(spec, frobenius_order)?,
            spec: spec.clone(),
            admissible: BTreeMap::new(),
        })
    }

    pub fn admissible(&mut self, key: &MomentKey) -> Result<bool> {
        if let Some(&a) = self.admissible.get(key) {
            return Ok(a);
        }
        let a = self.frob.moment_admissible(&key.f, key.k)?;
        self.admissible.insert(key.clone(), a);
        Ok(a)
    }

    fn all_admissible(&mut self, e: &CLinExpr) -> Result<bool> {
        let keys: Vec<MomentKey> = e
            .re
            .vars()
            .chain(e.im.vars())
            .filter_map(|v| match v {
                Var::Moment(k) => Some(k.clone()),
                Var::Anomaly(_) => None,
            })
            .collect();
        for k in keys {
            if !self.admissible(&k)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// `<op>` for a reduced canonical operator; `None` if a moment diverges.
    pub fn moment(&mut self, op: &OperatorPoly) -> Result<Option<CLinExpr>> {
        let mut out = CLinExpr::zero();
        for (m, c) in op.terms() {
            if !m.f.is_reduced() {
                return Err(Error::UnreducedDerivative(m.f.derivs[0]));
            }
            let x = LinExpr::var(Var::Moment(MomentKey::new(m.f.clone(), m.p)));
            out.add_scaled(&x, &(c * i_pow(-(m.p as i64))));
        }
        if !self.all_admissible(&out)? {
            return Ok(None);
        }
        Ok(Some(out))
    }

    /// `int g u^(a) u^(b)` as moments plus surface terms.
    fn integral(&self, g: &FuncKey, a: u32, b: u32, coef: &Q, lin: &mut LinExpr, bts: &mut Vec<BoundaryTerm>) {
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        if a == 0 {
            lin.add_var(Var::Moment(MomentKey::new(g.clone(), b)), coef.clone());
            return;
        }
        // int g u^(a) u^(b) = -lim g u^(a-1) u^(b) - int g' u^(a-1) u^(b) - int g u^(a-1) u^(b+1)
        bts.push(BoundaryTerm { coeff: -coef.clone(), f: g.clone(), i: a - 1, j: b });
        for (g2, c2) in self.alg.calculus.deriv(g) {
            self.integral(&g2, a - 1, b, &-(coef * c2), lin, bts);
        }
        self.integral(g, a - 1, b + 1, &-coef.clone(), lin, bts);
    }

    /// Converts complex-weighted surface terms to anomaly expressions;
    /// `None` when they diverge.
    fn surface(&self, re: &[BoundaryTerm], im: &[BoundaryTerm]) -> Result<Option<CLinExpr>> {
        let mut out = CLinExpr::zero();
        for (terms, part) in [(re, 0), (im, 1)] {
            match self.frob.boundary(terms)? {
                BoundaryResult::Zero => {}
                BoundaryResult::Divergent => return Ok(None),
                BoundaryResult::Finite(form) => {
                    let e = if part == 0 { &mut out.re } else { &mut out.im };
                    for (j, c) in form {
                        e.add_var(Var::Anomaly(j), c);
                    }
                }
            }
        }
        Ok(Some(out))
    }

    /// `int (X u)^* (Y u) dr`, exact including anomalies.
    pub fn bilinear(&mut self, x: &OperatorPoly, y: &OperatorPoly) -> Result<Option<CLinExpr>> {
        let mut out = CLinExpr::zero();
        let mut bre = Vec::new();
        let mut bim = Vec::new();
        for (mx, cx) in x.terms() {
            for (my, cy) in y.terms() {
                if !mx.f.is_reduced() || !my.f.is_reduced() {
                    return Err(Error::UnreducedDerivative(1));
                }
                let w = conj(cx) * cy * i_pow(mx.p as i64) * i_pow(-(my.p as i64));
                let mut lin = LinExpr::zero();
                let mut bts = Vec::new();
                self.integral(&mx.f.mul(&my.f), mx.p, my.p, &q(1), &mut lin, &mut bts);
                out.add_scaled(&lin, &w);
                for t in bts {
                    if !w.re.is_zero() {
                        bre.push(BoundaryTerm { coeff: &t.coeff * &w.re, ..t.clone() });
                    }
                    if !w.im.is_zero() {
                        bim.push(BoundaryTerm { coeff: &t.coeff * &w.im, ..t });
                    }
                }
            }
        }
        if !self.all_admissible(&out)? {
            return Ok(None);
        }
        let Some(s) = self.surface(&bre, &bim)? else { return Ok(None) };
        out.add_c(&s, &creal(q(1)));
        Ok(Some(out))
    }

    /// Reversal relation for `x(f, k)`:
    /// `sum_j C(k,j) x(f^(j), k-j) - (-1)^k x(f,k) + sum_j (-1)^j lim u^(j) (f u)^(k-1-j) = 0`.
    pub fn reversal(&mut self, key: &MomentKey) -> Result<Option<LinExpr>> {
        let k = key.k;
        if k == 0 {
            return Ok(None);
        }
        let ders = self.alg.calculus.derivs_upto(&key.f, k);
        let mut e = LinExpr::zero();
        for (j, dj) in ders.iter().enumerate() {
            let c = binom(k, j as u32);
            for (g, cg) in dj {
                e.add_var(Var::Moment(MomentKey::new(g.clone(), k - j as u32)), &c * cg);
            }
        }
        let sign = if k % 2 == 0 { q(-1) } else { q(1) };
        e.add_var(Var::Moment(key.clone()), sign);
        let bts = self.reversal_terms(key);
        let ce = CLinExpr { re: e, im: LinExpr::zero() };
        if !self.all_admissible(&ce)? {
            return Ok(None);
        }
        let Some(s) = self.surface(&bts, &[])? else { return Ok(None) };
        let mut e = ce.re;
        e.add_scaled(&s.re, &q(1));
        Ok(Some(e))
    }

    fn reversal_terms(&self, key: &MomentKey) -> Vec<BoundaryTerm> {
        let k = key.k;
        let ders = self.alg.calculus.derivs_upto(&key.f, k);
        let mut bts = Vec::new();
        for j in 0..k {
            let n = k - 1 - j;
            let sj = if j % 2 == 0 { q(1) } else { q(-1) };
            for l in 0..=n {
                for (g, cg) in &ders[(n - l) as usize] {
                    bts.push(BoundaryTerm { coeff: &sj * binom(n, l) * cg, f: g.clone(), i: j, j: l });
                }
            }
        }
        bts
    }

    /// `lim (u (f u^(k))' - u' f u^(k))` at the origin, without the phase
    /// and `1/2M` that the equation of motion attaches.
    fn eom_terms(&self, m: &Mono) -> Vec<BoundaryTerm> {
        let mut bts: Vec<BoundaryTerm> = self
            .alg
            .calculus
            .deriv(&m.f)
            .into_iter()
            .map(|(g, cg)| BoundaryTerm { coeff: cg, f: g, i: 0, j: m.p })
            .collect();
        bts.push(BoundaryTerm { coeff: q(1), f: m.f.clone(), i: 0, j: m.p + 1 });
        bts.push(BoundaryTerm { coeff: q(-1), f: m.f.clone(), i: 1, j: m.p });
        bts
    }

    /// Surface contribution at the origin for one monomial `f p^k`, as it
    /// enters its reversal relation or its equation of motion.
    pub fn boundary_terms(&self, m: &Mono, kind: SurfaceKind) -> Result<BoundaryResult> {
        let terms = match kind {
            SurfaceKind::Reversal => self.reversal_terms(&MomentKey::new(m.f.clone(), m.p)),
            SurfaceKind::Eom => self.eom_terms(m),
        };
        self.frob.boundary(&terms)
    }

    /// `<[H, O]> - surface = 0` for a reduced canonical `O`.
    pub fn eom(&mut self, op: &OperatorPoly) -> Result<Option<CLinExpr>> {
        let h = self.spec.hamiltonian();
        let comm = self.alg.commutator(&h, op);
        let Some(mut e) = self.moment(&comm)? else { return Ok(None) };
        // <[H,O]> = (1/2M) lim (u (Ou)' - u' (Ou)), with Ou = sum c f (-i)^k u^(k)
        let inv2m = (&self.spec.mass * q(2)).recip();
        let mut bre = Vec::new();
        let mut bim = Vec::new();
        for (m, c) in op.terms() {
            let w = c * i_pow(-(m.p as i64)) * creal(inv2m.clone());
            for t in self.eom_terms(m) {
                if !w.re.is_zero() {
                    bre.push(BoundaryTerm { coeff: -(&t.coeff * &w.re), ..t.clone() });
                }
                if !w.im.is_zero() {
                    bim.push(BoundaryTerm { coeff: -(&t.coeff * &w.im), ..t });
                }
            }
        }
        let Some(s) = self.surface(&bre, &bim)? else { return Ok(None) };
        e.add_c(&s, &creal(q(1)));
        Ok(Some(e))
    }
}

/// Keys referenced by an expression.
pub fn moment_keys<'a>(exprs: impl IntoIterator<Item = &'a LinExpr>) -> BTreeSet<MomentKey> {
    exprs
        .into_iter()
        .flat_map(|e| e.vars())
        .filter_map(|v| match v {
            Var::Moment(k) => Some(k.clone()),
            Var::Anomaly(_) => None,
        })
        .collect()
}

/// Result of eliminating a relation system.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FreeVariableMap {
    pub free_vars: Vec<Var>,
    /// Every eliminated variable as an affine combination of free ones.
    pub expressions: BTreeMap<Var, LinExpr>,
    pub variables_before: usize,
}

impl FreeVariableMap {
    /// Rewrites `e` in terms of free variables.
    pub fn substitute(&self, e: &LinExpr) -> LinExpr {
        let mut out = LinExpr::constant(e.constant.clone());
        for (v, c) in &e.terms {
            match self.expressions.get(v) {
                Some(sub) => out.add_scaled(sub, c),
                None => out.add_var(v.clone(), c.clone()),
            }
        }
        out
    }

    pub fn is_free(&self, v: &Var) -> bool {
        !self.expressions.contains_key(v)
    }
}

/// Exact sparse Gauss-Jordan elimination.
///
/// `priority` ranks variables: the lowest-ranked variable of a relation
/// becomes its pivot, so variables listed first are eliminated first.
/// Variables absent from `priority` rank after all listed ones, in key
/// order.
pub fn eliminate(relations: &[AffineRelation], priority: &[Var]) -> Result<FreeVariableMap> {
    let mut rank: BTreeMap<Var, usize> = priority.iter().enumerate().map(|(i, v)| (v.clone(), i)).collect();
    let mut all: BTreeSet<Var> = BTreeSet::new();
    for r in relations {
        all.extend(r.expr.vars().cloned());
    }
    all.extend(priority.iter().cloned());
    for v in &all {
        let n = rank.len();
        rank.entry(v.clone()).or_insert(n);
    }
    let unrank: BTreeMap<usize, Var> = rank.iter().map(|(v, &i)| (i, v.clone())).collect();

    type Row = (BTreeMap<usize, Q>, Q);
    let to_row = |e: &LinExpr| -> Row { (e.terms.iter().map(|(v, c)| (rank[v], c.clone())).collect(), e.constant.clone()) };
    // pivot -> row with pivot coefficient one; pivot = -(rest + constant)
    let mut pivots: BTreeMap<usize, Row> = BTreeMap::new();

    fn axpy(dst: &mut Row, src: &Row, s: &Q) {
        for (i, c) in &src.0 {
            let slot = dst.0.entry(*i).or_insert_with(Q::zero);
            *slot += c * s;
            if slot.is_zero() {
                dst.0.remove(i);
            }
        }
        dst.1 += &src.1 * s;
    }

    for rel in relations {
        let mut row = to_row(&rel.expr);
        loop {
            let hit = row.0.keys().find(|i| pivots.contains_key(i)).copied();
            let Some(i) = hit else { break };
            let c = row.0[&i].clone();
            let prow = pivots[&i].clone();
            axpy(&mut row, &prow, &-c);
        }
        let Some((&p, pc)) = row.0.iter().next() else {
            if !row.1.is_zero() {
                return Err(Error::Contradictory(format!("{} reduces to {} = 0", rel.origin, row.1)));
            }
            continue;
        };
        let inv = pc.recip();
        let mut row = row;
        for c in row.0.values_mut() {
            *c *= &inv;
        }
        row.1 *= &inv;
        for prow in pivots.values_mut() {
            if let Some(c) = prow.0.get(&p).cloned() {
                axpy(prow, &row, &-c);
            }
        }
        pivots.insert(p, row);
    }

    let mut expressions = BTreeMap::new();
    for (p, (row, c)) in &pivots {
        let mut e = LinExpr::constant(-c.clone());
        for (i, coef) in row {
            if i != p {
                e.add_var(unrank[i].clone(), -coef.clone());
            }
        }
        expressions.insert(unrank[p].clone(), e);
    }
    let free_vars = (0..rank.len()).filter(|i| !pivots.contains_key(i)).map(|i| unrank[&i].clone()).collect();
    Ok(FreeVariableMap { free_vars, expressions, variables_before: all.len() })
}

/// Recursion `8(n+1) M E <r^n> + ((n+1)n(n-1) - 8 n M lambda) <r^(n-2)> = 0`
/// for `n = 1..=max_t`, valid in eigenstates of `p^2/2M + lambda/r^2`.
pub fn conformal_recursion(lambda: &Q, energy: &Q, mass: &Q, max_t: u32) -> Vec<AffineRelation> {
    let mut out = Vec::new();
    for n in 1..=max_t as i64 {
        let mut e = LinExpr::zero();
        e.add_var(Var::Moment(MomentKey::new(FuncKey::r(2 * n as i32), 0)), q(8 * (n + 1)) * mass * energy);
        let c = q((n + 1) * n * (n - 1)) - q(8 * n) * mass * lambda;
        e.add_var(Var::Moment(MomentKey::new(FuncKey::r(2 * (n as i32 - 2)), 0)), c);
        out.push(AffineRelation { expr: e, origin: format!("conformal recursion n={n}") });
    }
    out
}

/// Normalization `<1> = 1`.
pub fn normalization() -> AffineRelation {
    let mut e = LinExpr::var(Var::Moment(MomentKey::one()));
    e.constant = q(-1);
    AffineRelation { expr: e, origin: String::from("normalization") }
}

/// Whether `e` holds at a numeric point to the given tolerance, relative to
/// its largest coefficient.
pub fn residual(e: &LinExpr, value: impl FnMut(&Var) -> f64) -> f64 {
    let scale = e.scale_norm().max(1e-300);
    e.eval(value).abs() / scale
}

pub fn is_one(q: &Q) -> bool {
    q.is_one()
}

/// One PSD block before substitution of the free-variable map.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockEntries {
    pub label: String,
    pub kind: BlockKind,
    /// Labels of the kept basis elements.
    pub rows: Vec<String>,
    /// Kept operators, reduced and phase-rotated where possible.
    pub ops: Vec<OperatorPoly>,
    /// Full Hermitian matrix of entry expressions.
    pub entries: Vec<Vec<CLinExpr>>,
    /// Whether every entry is real after phase rotation.
    pub real: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DroppedRow {
    pub block: String,
    pub element: String,
    pub reason: String,
}

/// Variable and relation counts of a constraint system.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct VariableCounts {
    /// Real unknowns before any relation is imposed: real and imaginary
    /// parts of every distinct moment in the generated block entries,
    /// counted before divergent rows are dropped.
    pub variables_before: usize,
    /// Distinct moment variables in the blocks and the objective.
    pub block_moments: usize,
    /// Moment variables after closing under reversal relations.
    pub all_moments: usize,
    pub anomalies: usize,
    pub relations: usize,
    /// Free variables referenced by the blocks or the objective.
    pub free: usize,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SystemOptions {
    pub frobenius_order: usize,
}

impl SystemOptions {
    pub fn new() -> Self {
        SystemOptions { frobenius_order: 6 }
    }
}

/// Everything needed to assemble an SDP: block expressions, the objective,
/// the relations and their elimination.
#[derive(Clone, Debug, PartialEq)]
pub struct ConstraintSystem {
    pub potential: String,
    pub blocks: Vec<BlockEntries>,
    pub dropped: Vec<DroppedRow>,
    pub objective: LinExpr,
    pub objective_label: String,
    pub relations: Vec<AffineRelation>,
    pub skipped: Vec<String>,
    pub free_map: FreeVariableMap,
    pub anomalies: Vec<AnomalyVariable>,
    pub counts: VariableCounts,
}

/// Phase `w` in `{1, -i}` making `w * op` a real operator, if any.
fn real_phase(op: &OperatorPoly) -> Option<CQ> {
    let mut phase: Option<CQ> = None;
    for (m, c) in op.terms() {
        let z = c * i_pow(-(m.p as i64));
        let w = if z.im.is_zero() {
            creal(q(1))
        } else if z.re.is_zero() {
            i_pow(1)
        } else {
            return None;
        };
        match &phase {
            None => phase = Some(w),
            Some(p) if *p == w => {}
            Some(_) => return None,
        }
    }
    Some(phase.unwrap_or_else(|| creal(q(1))))
}

/// Greedy choice of rows to drop so that no divergent entry remains.
fn rows_to_drop(bad: &[Vec<bool>]) -> Vec<usize> {
    let n = bad.len();
    let mut dropped = vec![false; n];
    for i in 0..n {
        if bad[i][i] {
            dropped[i] = true;
        }
    }
    loop {
        let counts: Vec<usize> =
            (0..n).map(|i| if dropped[i] { 0 } else { (0..n).filter(|&j| !dropped[j] && bad[i][j]).count() }).collect();
        let Some((worst, &c)) = counts.iter().enumerate().max_by_key(|(i, &c)| (c, core::cmp::Reverse(*i))) else {
            break;
        };
        if c == 0 {
            break;
        }
        dropped[worst] = true;
    }
    (0..n).filter(|&i| dropped[i]).collect()
}

fn complexity(k: &MomentKey) -> (u32, i32, i32, i32) {
    (k.k, k.f.w2, k.f.r2.abs(), k.f.r2)
}

/// Relations produced for a set of moments, with the moments they reach.
#[derive(Clone, Debug, Default)]
pub struct RelationSet {
    pub relations: Vec<AffineRelation>,
    /// Every moment referenced, including the starting set.
    pub keys: BTreeSet<MomentKey>,
    /// Relations left out because a surface term diverges.
    pub skipped: Vec<String>,
}

/// Reversal relations (from `<O>` being real for self-adjoint `O`) for the
/// given moments, closed under the new moments they introduce.
pub fn reality_constraints(b: &mut Builder, keys: &BTreeSet<MomentKey>) -> Result<RelationSet> {
    let mut out = RelationSet { keys: keys.clone(), ..RelationSet::default() };
    let mut work: Vec<MomentKey> = keys.iter().cloned().collect();
    let mut seen: BTreeSet<MomentKey> = BTreeSet::new();
    while let Some(key) = work.pop() {
        if !seen.insert(key.clone()) || key.k == 0 {
            continue;
        }
        match b.reversal(&key)? {
            Some(e) => {
                for k in moment_keys([&e]) {
                    if out.keys.insert(k.clone()) {
                        work.push(k);
                    }
                }
                if !e.is_zero() {
                    out.relations.push(AffineRelation { expr: e, origin: format!("reversal {key}") });
                }
            }
            None => out.skipped.push(format!("reversal {key}: divergent")),
        }
    }
    Ok(out)
}

/// `<[H, O]> = surface` for every monomial `O` whose commutator with `H`
/// stays inside `keys`.
pub fn eom_constraints(b: &mut Builder, keys: &BTreeSet<MomentKey>) -> Result<RelationSet> {
    let h = b.spec.hamiltonian();
    let mut out = RelationSet { keys: keys.clone(), ..RelationSet::default() };
    let mut candidates: BTreeSet<Mono> = BTreeSet::new();
    for key in keys {
        for k in [key.k.checked_sub(1), Some(key.k)].into_iter().flatten() {
            for d in -4..=4 {
                let f = key.f.mul(&FuncKey::r(d));
                candidates.insert(Mono { f, p: k });
            }
        }
    }
    let kmax = keys.iter().map(|k| k.k).max().unwrap_or(0);
    for k in 0..=kmax {
        candidates.insert(Mono { f: FuncKey::one(), p: k });
    }
    for m in candidates {
        let op = OperatorPoly::term(creal(q(1)), m.f.clone(), m.p);
        let comm = b.alg.commutator(&h, &op);
        if comm.is_zero() {
            continue;
        }
        let within = comm.terms().all(|(t, _)| keys.contains(&MomentKey::new(t.f.clone(), t.p)));
        if !within {
            continue;
        }
        match b.eom(&op)? {
            Some(e) => {
                for (part, name) in [(e.re, "re"), (e.im, "im")] {
                    if !part.is_zero() {
                        out.relations.push(AffineRelation { expr: part, origin: format!("eom {m} ({name})") });
                    }
                }
            }
            None => out.skipped.push(format!("eom {m}: divergent")),
        }
    }
    Ok(out)
}

impl ConstraintSystem {
    /// Builds blocks, relations and the elimination for a set of bases.
    pub fn build(bases: &BasisSet, spec: &PotentialSpec, opts: &SystemOptions) -> Result<Self> {
        let mut b = Builder::new(spec, opts.frobenius_order)?;
        let h = spec.hamiltonian();
        let mut raw_keys: BTreeSet<MomentKey> = BTreeSet::new();
        let mut blocks = Vec::new();
        let mut dropped = Vec::new();

        for basis in &bases.blocks {
            let n = basis.elements.len();
            let mut ops = Vec::with_capacity(n);
            let mut images = Vec::with_capacity(n);
            for e in &basis.elements {
                let red = spec.reduce_derivatives(&e.op)?;
                let w = real_phase(&red).unwrap_or_else(|| creal(q(1)));
                let red = red.scale(&w);
                let img = match basis.kind {
                    BlockKind::Gram => red.clone(),
                    BlockKind::Ground => b.alg.commutator(&h, &red),
                };
                ops.push(red);
                images.push(img);
            }
            let mut raw: Vec<Vec<Option<CLinExpr>>> = vec![vec![None; n]; n];
            for i in 0..n {
                for j in 0..n {
                    raw[i][j] = b.bilinear(&ops[i], &images[j])?;
                    if let Some(e) = &raw[i][j] {
                        raw_keys.extend(moment_keys([&e.re, &e.im]));
                    }
                }
            }
            // Hermitian part; G-blocks are only Hermitian on the ground state.
            let mut bad = vec![vec![false; n]; n];
            let mut herm: Vec<Vec<CLinExpr>> = vec![vec![CLinExpr::zero(); n]; n];
            for i in 0..n {
                for j in 0..n {
                    match (&raw[i][j], &raw[j][i]) {
                        (Some(a), Some(c)) => {
                            let mut e = CLinExpr::zero();
                            e.add_c(a, &creal(qf(1, 2)));
                            e.add_c(&c.conj(), &creal(qf(1, 2)));
                            herm[i][j] = e;
                        }
                        _ => bad[i][j] = true,
                    }
                }
            }
            let drop = rows_to_drop(&bad);
            for &i in &drop {
                let reason = if bad[i][i] { "divergent diagonal entry" } else { "divergent off-diagonal entry" };
                log::info!("{}: dropping {} ({reason})", basis.label, basis.elements[i].label);
                dropped.push(DroppedRow {
                    block: basis.label.clone(),
                    element: basis.elements[i].label.clone(),
                    reason: String::from(reason),
                });
            }
            let keep: Vec<usize> = (0..n).filter(|i| !drop.contains(i)).collect();
            if keep.is_empty() {
                return Err(Error::EmptyBlock(basis.label.clone()));
            }
            let entries: Vec<Vec<CLinExpr>> =
                keep.iter().map(|&i| keep.iter().map(|&j| herm[i][j].clone()).collect()).collect();
            let real = entries.iter().flatten().all(|e| e.im.is_zero());
            blocks.push(BlockEntries {
                label: basis.label.clone(),
                kind: basis.kind,
                rows: keep.iter().map(|&i| basis.elements[i].label.clone()).collect(),
                ops: keep.iter().map(|&i| ops[i].clone()).collect(),
                entries,
                real,
            });
        }

        let objective = match b.moment(&h)? {
            Some(e) if e.im.is_zero() => e.re,
            Some(_) => return Err(Error::Solver("energy expectation is not real".into())),
            None => return Err(Error::TooSingular("energy expectation diverges".into())),
        };
        let block_keys = moment_keys(
            blocks.iter().flat_map(|bl| bl.entries.iter().flatten()).flat_map(|e| [&e.re, &e.im]).chain([&objective]),
        );

        let mut relations = vec![normalization()];
        let reality = reality_constraints(&mut b, &block_keys)?;
        relations.extend(reality.relations);
        let mut skipped = reality.skipped;
        let all_keys = reality.keys;
        let eom = eom_constraints(&mut b, &all_keys)?;
        relations.extend(eom.relations);
        skipped.extend(eom.skipped);

        // Eliminate auxiliary keys first, then block keys from the most
        // complex down; anomalies stay free whenever possible.
        let mut aux: Vec<&MomentKey> = all_keys.iter().filter(|k| !block_keys.contains(*k)).collect();
        aux.sort_by_key(|k| core::cmp::Reverse(complexity(k)));
        let mut main: Vec<&MomentKey> = block_keys.iter().collect();
        main.sort_by_key(|k| core::cmp::Reverse(complexity(k)));
        let mut priority: Vec<Var> = aux.into_iter().chain(main).map(|k| Var::Moment(k.clone())).collect();
        let mut anomaly_idx: BTreeSet<usize> = BTreeSet::new();
        for r in &relations {
            for v in r.expr.vars() {
                if let Var::Anomaly(j) = v {
                    anomaly_idx.insert(*j);
                }
            }
        }
        for bl in &blocks {
            for e in bl.entries.iter().flatten() {
                for v in e.re.vars().chain(e.im.vars()) {
                    if let Var::Anomaly(j) = v {
                        anomaly_idx.insert(*j);
                    }
                }
            }
        }
        priority.extend(anomaly_idx.iter().rev().map(|&j| Var::Anomaly(j)));
        let free_map = eliminate(&relations, &priority)?;

        let mut used: BTreeSet<Var> = BTreeSet::new();
        for bl in &blocks {
            for e in bl.entries.iter().flatten() {
                used.extend(free_map.substitute(&e.re).vars().cloned());
                used.extend(free_map.substitute(&e.im).vars().cloned());
            }
        }
        used.extend(free_map.substitute(&objective).vars().cloned());

        let counts = VariableCounts {
            variables_before: 2 * raw_keys.len(),
            block_moments: block_keys.len(),
            all_moments: all_keys.len(),
            anomalies: anomaly_idx.len(),
            relations: relations.len(),
            free: used.len(),
        };
        log::debug!("{}: {:?}", bases.name, counts);
        Ok(ConstraintSystem {
            potential: spec.describe(),
            blocks,
            dropped,
            objective,
            objective_label: String::from("<H>"),
            relations,
            skipped,
            free_map,
            anomalies: anomaly_idx.into_iter().map(AnomalyVariable::new).collect(),
            counts,
        })
    }

    /// The scale-invariant system of `p^2/2M + lambda/r^2` at fixed energy:
    /// Gram blocks of powers of `r`, the recursion, and `<1/r>` as objective.
    pub fn conformal(bases: &BasisSet, spec: &PotentialSpec, energy: &Q) -> Result<Self> {
        let lambda = spec.param("lambda").ok_or_else(|| Error::InvalidParameter("conformal needs lambda".into()))?.clone();
        if energy.is_zero() {
            return Err(Error::InvalidParameter("conformal recursion needs E != 0".into()));
        }
        let mut b = Builder::new(spec, 6)?;
        let mut blocks = Vec::new();
        let mut max_t = 0;
        for basis in &bases.blocks {
            if basis.kind != BlockKind::Gram {
                return Err(Error::Unsupported("conformal bases are Gram blocks of powers of r".into()));
            }
            let ops: Vec<OperatorPoly> =
                basis.elements.iter().map(|e| spec.reduce_derivatives(&e.op)).collect::<Result<_>>()?;
            if ops.iter().any(|o| o.max_p() > 0) {
                return Err(Error::Unsupported("conformal bases may not contain p".into()));
            }
            let n = ops.len();
            let mut entries = vec![vec![CLinExpr::zero(); n]; n];
            for i in 0..n {
                for j in 0..n {
                    entries[i][j] = b
                        .bilinear(&ops[i], &ops[j])?
                        .ok_or_else(|| Error::TooSingular(format!("{}: divergent entry", basis.label)))?;
                }
            }
            for k in moment_keys(entries.iter().flatten().map(|e| &e.re)) {
                max_t = max_t.max(k.f.r2 / 2);
            }
            blocks.push(BlockEntries {
                label: basis.label.clone(),
                kind: basis.kind,
                rows: basis.elements.iter().map(|e| e.label.clone()).collect(),
                ops,
                entries,
                real: true,
            });
        }
        let objective = LinExpr::var(Var::Moment(MomentKey::new(FuncKey::r(-2), 0)));
        let mut relations = vec![normalization()];
        relations.extend(conformal_recursion(&lambda, energy, &spec.mass, max_t.max(1) as u32));
        let block_keys = moment_keys(blocks.iter().flat_map(|bl| bl.entries.iter().flatten()).map(|e| &e.re));
        let mut priority: Vec<Var> = block_keys.iter().rev().map(|k| Var::Moment(k.clone())).collect();
        priority.retain(|v| *v != Var::Moment(MomentKey::new(FuncKey::r(-2), 0)));
        priority.push(Var::Moment(MomentKey::new(FuncKey::r(-2), 0)));
        let free_map = eliminate(&relations, &priority)?;
        let counts = VariableCounts {
            block_moments: block_keys.len(),
            all_moments: block_keys.len(),
            relations: relations.len(),
            free: free_map.free_vars.iter().filter(|v| block_keys.iter().any(|k| **v == Var::Moment(k.clone()))).count(),
            ..VariableCounts::default()
        };
        Ok(ConstraintSystem {
            potential: spec.describe(),
            blocks,
            dropped: Vec::new(),
            objective,
            objective_label: String::from("<1/r>"),
            relations,
            skipped: Vec::new(),
            free_map,
            anomalies: Vec::new(),
            counts,
        })
    }

    /// Value of any variable at a point given in free variables.
    pub fn value_of(&self, v: &Var, free: &BTreeMap<Var, f64>) -> f64 {
        match self.free_map.expressions.get(v) {
            Some(e) => e.eval(|u| free.get(u).copied().unwrap_or(0.0)),
            None => free.get(v).copied().unwrap_or(0.0),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::parse_operator;

    fn var(r2: i32, w2: i32, k: u32) -> Var {
        Var::Moment(MomentKey::new(FuncKey::rw(r2, w2), k))
    }

    #[test]
    fn p_expectation_vanishes() {
        // <p> = -i x(1,1); reversal: x(1,1) + x(1,1) + lim u u = 0
        let g = PotentialSpec::gaussian(5.0, 1.0).unwrap();
        let mut b = Builder::new(&g, 6).unwrap();
        let rel = b.reversal(&MomentKey::new(FuncKey::one(), 1)).unwrap().unwrap();
        let mut want = LinExpr::zero();
        want.add_var(var(0, 0, 1), q(2));
        assert_eq!(rel, want);
    }

    #[test]
    fn p_cubed_carries_anomaly() {
        let g = PotentialSpec::gaussian(5.0, 1.0).unwrap();
        let mut b = Builder::new(&g, 6).unwrap();
        let rel = b.reversal(&MomentKey::new(FuncKey::one(), 3)).unwrap().unwrap();
        // 2 x(1,3) - 2A = 0, so <p^3> = i A
        let mut want = LinExpr::zero();
        want.add_var(var(0, 0, 3), q(2));
        want.add_var(Var::Anomaly(0), q(-2));
        assert_eq!(rel, want);
    }

    #[test]
    fn surface_terms_of_low_momenta() {
        let y = PotentialSpec::yukawa(1.0, 10.0).unwrap();
        let b = Builder::new(&y, 6).unwrap();
        let p = |k| Mono { f: FuncKey::one(), p: k };
        assert_eq!(b.boundary_terms(&p(1), SurfaceKind::Reversal).unwrap(), BoundaryResult::Zero);
        assert!(matches!(b.boundary_terms(&p(3), SurfaceKind::Reversal).unwrap(), BoundaryResult::Finite(_)));
        // lim (u u' - u' u) = 0 for O = 1
        assert_eq!(b.boundary_terms(&p(0), SurfaceKind::Eom).unwrap(), BoundaryResult::Zero);
    }

    #[test]
    fn yukawa_eom_for_p() {
        // <[H,p]> = i<V'>; the surface term makes it i A
        let y = PotentialSpec::yukawa(1.0, 10.0).unwrap();
        let mut b = Builder::new(&y, 6).unwrap();
        let e = b.eom(&OperatorPoly::p(1)).unwrap().unwrap();
        assert!(e.re.is_zero());
        let vprime = y.reduce_derivatives(&parse_operator("V'").unwrap()).unwrap();
        let m = b.moment(&vprime).unwrap().unwrap();
        let mut want = m.re.clone();
        want.add_var(Var::Anomaly(0), q(-1));
        assert_eq!(e.im, want);
    }

    #[test]
    fn gram_of_p_is_kinetic() {
        let c = PotentialSpec::coulomb(1.0).unwrap();
        let mut b = Builder::new(&c, 6).unwrap();
        let p = OperatorPoly::p(1);
        let e = b.bilinear(&p, &p).unwrap().unwrap();
        let mut want = LinExpr::zero();
        want.add_var(var(0, 0, 2), q(-1));
        assert_eq!(e.re, want);
        assert!(e.im.is_zero());
    }

    #[test]
    fn elimination_basics() {
        let a = var(2, 0, 0);
        let bvar = var(4, 0, 0);
        let mut e1 = LinExpr::var(a.clone());
        e1.add_var(bvar.clone(), q(-2));
        let mut e2 = LinExpr::var(bvar.clone());
        e2.constant = q(-3);
        let rels = [
            AffineRelation { expr: e1, origin: "one".into() },
            AffineRelation { expr: e2, origin: "two".into() },
        ];
        let map = eliminate(&rels, &[a.clone(), bvar.clone()]).unwrap();
        assert!(map.free_vars.is_empty());
        assert_eq!(map.expressions[&a], LinExpr::constant(q(6)));
        let empty = eliminate(&[], &[a.clone()]).unwrap();
        assert_eq!(empty.free_vars, [a]);
    }

    #[test]
    fn elimination_detects_contradiction() {
        let a = var(2, 0, 0);
        let mut e1 = LinExpr::var(a.clone());
        e1.constant = q(-1);
        let mut e2 = LinExpr::var(a.clone());
        e2.constant = q(-2);
        let rels = [
            AffineRelation { expr: e1, origin: "one".into() },
            AffineRelation { expr: e2, origin: "two".into() },
        ];
        assert!(matches!(eliminate(&rels, &[a]), Err(Error::Contradictory(_))));
    }

    #[test]
    fn conformal_recursion_first_terms() {
        let lam = qf(-1, 2);
        let en = q(-1);
        let rels = conformal_recursion(&lam, &en, &q(1), 2);
        // n=1: 16E<r> - 8 lambda <1/r>
        assert_eq!(rels[0].expr.terms[&var(2, 0, 0)], q(-16));
        assert_eq!(rels[0].expr.terms[&var(-2, 0, 0)], q(4));
        // n=2: 24E<r^2> + (6 - 16 lambda)<1>
        assert_eq!(rels[1].expr.terms[&var(4, 0, 0)], q(-24));
        assert_eq!(rels[1].expr.terms[&var(0, 0, 0)], q(14));
    }
}
