//! Noncommutative algebra of the radial position `r`, momentum `p = -i d/dr`
//! and functions of `r` built from the potential.
//!
//! A monomial is stored in canonical order `c * f(r) * p^k` where the function
//! part `f` is `r^s (-V)^m V^(k1) V^(k2) ...` with half-integer `s` and `m`.
//! Moving `p` to the right uses `p f = f p - i f'`, so every product reduces to
//! a canonical sum once we know how to differentiate function parts; that is
//! the job of [`Calculus`].

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::fmt;

use num_traits::{One, Zero};

use crate::poly::Laurent;
use crate::rational::{binom, conj, cq, creal, is_czero, q, qf, Q, CQ};

/// Function part `r^(r2/2) (-V)^(w2/2) prod V^(d)` of a monomial.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct FuncKey {
    pub r2: i32,
    pub w2: i32,
    /// Orders of symbolic derivative factors, sorted, each at least 1.
    pub derivs: Vec<u8>,
}

impl FuncKey {
    pub fn one() -> Self {
        FuncKey::default()
    }

    pub fn r(r2: i32) -> Self {
        FuncKey { r2, ..Default::default() }
    }

    pub fn rw(r2: i32, w2: i32) -> Self {
        FuncKey { r2, w2, derivs: Vec::new() }
    }

    pub fn mul(&self, other: &FuncKey) -> FuncKey {
        let mut derivs = self.derivs.clone();
        derivs.extend_from_slice(&other.derivs);
        derivs.sort_unstable();
        FuncKey { r2: self.r2 + other.r2, w2: self.w2 + other.w2, derivs }
    }

    pub fn is_reduced(&self) -> bool {
        self.derivs.is_empty()
    }
}

pub type FuncPoly = BTreeMap<FuncKey, Q>;

fn fp_add(p: &mut FuncPoly, k: FuncKey, c: Q) {
    if c.is_zero() {
        return;
    }
    let slot = p.entry(k.clone()).or_insert_with(Q::zero);
    *slot += c;
    if slot.is_zero() {
        p.remove(&k);
    }
}

/// How function parts are differentiated.
///
/// Without a logarithmic derivative the rules are purely symbolic:
/// `d(-V)^m = -m (-V)^(m-1) V'` and `d V^(k) = V^(k+1)`. With one, the
/// potential obeys `V' = R(r) V` and `d(-V)^m = m R (-V)^m`.
#[derive(Clone, Debug, PartialEq)]
pub struct Calculus {
    pub log_deriv: Option<Laurent>,
}

impl Calculus {
    pub fn symbolic() -> Self {
        Calculus { log_deriv: None }
    }

    pub fn ode(r: Laurent) -> Self {
        Calculus { log_deriv: Some(r) }
    }

    pub fn deriv(&self, f: &FuncKey) -> FuncPoly {
        let mut out = FuncPoly::new();
        if f.r2 != 0 {
            fp_add(&mut out, FuncKey { r2: f.r2 - 2, ..f.clone() }, qf(f.r2 as i64, 2));
        }
        if f.w2 != 0 {
            let m = qf(f.w2 as i64, 2);
            match &self.log_deriv {
                None => {
                    let mut derivs = f.derivs.clone();
                    derivs.push(1);
                    derivs.sort_unstable();
                    fp_add(&mut out, FuncKey { r2: f.r2, w2: f.w2 - 2, derivs }, -m);
                }
                Some(rl) => {
                    for (&e, c) in &rl.terms {
                        fp_add(&mut out, FuncKey { r2: f.r2 + e, ..f.clone() }, &m * c);
                    }
                }
            }
        }
        for (idx, &d) in f.derivs.iter().enumerate() {
            if idx > 0 && f.derivs[idx - 1] == d {
                continue;
            }
            let mult = f.derivs.iter().filter(|&&x| x == d).count() as i64;
            let mut derivs = f.derivs.clone();
            derivs[idx] = d + 1;
            derivs.sort_unstable();
            fp_add(&mut out, FuncKey { derivs, ..f.clone() }, q(mult));
        }
        out
    }

    pub fn deriv_poly(&self, p: &FuncPoly) -> FuncPoly {
        let mut out = FuncPoly::new();
        for (k, c) in p {
            for (k2, c2) in self.deriv(k) {
                fp_add(&mut out, k2, c * c2);
            }
        }
        out
    }

    /// `f, f', ..., f^(n)`
    pub fn derivs_upto(&self, f: &FuncKey, n: u32) -> Vec<FuncPoly> {
        let mut v = Vec::with_capacity(n as usize + 1);
        let mut cur = FuncPoly::new();
        cur.insert(f.clone(), q(1));
        v.push(cur);
        for i in 0..n as usize {
            let next = self.deriv_poly(&v[i]);
            v.push(next);
        }
        v
    }
}

/// Canonical monomial without its coefficient.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Mono {
    pub f: FuncKey,
    pub p: u32,
}

/// Canonical monomial with coefficient; a view into an [`OperatorPoly`].
#[derive(Clone, Debug, PartialEq)]
pub struct Monomial {
    pub coeff: CQ,
    pub r_pow2: i32,
    pub neg_v_pow2: i32,
    pub p_pow: u32,
}

/// Primitive factor of an operator word.
#[derive(Clone, Debug, PartialEq)]
pub enum Factor {
    /// `r^(s/2)`
    R(i32),
    /// `(-V)^(m/2)`
    W(i32),
    /// `V^(k)`, with `k = 0` the potential itself.
    V(u8),
    P,
    Scalar(CQ),
}

/// Finite sum of canonical monomials with exact complex-rational coefficients.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct OperatorPoly {
    terms: BTreeMap<Mono, CQ>,
}

impl OperatorPoly {
    pub fn zero() -> Self {
        OperatorPoly::default()
    }

    pub fn one() -> Self {
        Self::scalar(creal(q(1)))
    }

    pub fn scalar(c: CQ) -> Self {
        Self::term(c, FuncKey::one(), 0)
    }

    pub fn term(c: CQ, f: FuncKey, p: u32) -> Self {
        let mut out = Self::zero();
        out.add_term(Mono { f, p }, c);
        out
    }

    pub fn r(r2: i32) -> Self {
        Self::term(creal(q(1)), FuncKey::r(r2), 0)
    }

    pub fn p(k: u32) -> Self {
        Self::term(creal(q(1)), FuncKey::one(), k)
    }

    pub fn from_factor(f: &Factor) -> Self {
        match f {
            Factor::R(s) => Self::term(creal(q(1)), FuncKey::r(*s), 0),
            Factor::W(m) => Self::term(creal(q(1)), FuncKey::rw(0, *m), 0),
            Factor::V(0) => Self::term(creal(q(-1)), FuncKey::rw(0, 2), 0),
            Factor::V(k) => Self::term(creal(q(1)), FuncKey { r2: 0, w2: 0, derivs: alloc::vec![*k] }, 0),
            Factor::P => Self::p(1),
            Factor::Scalar(c) => Self::scalar(c.clone()),
        }
    }

    pub fn add_term(&mut self, m: Mono, c: CQ) {
        if is_czero(&c) {
            return;
        }
        let slot = self.terms.entry(m.clone()).or_insert_with(|| creal(Q::zero()));
        *slot = &*slot + &c;
        if is_czero(slot) {
            self.terms.remove(&m);
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Mono, &CQ)> {
        self.terms.iter()
    }

    pub fn monomials(&self) -> impl Iterator<Item = Monomial> + '_ {
        self.terms.iter().map(|(m, c)| Monomial {
            coeff: c.clone(),
            r_pow2: m.f.r2,
            neg_v_pow2: m.f.w2,
            p_pow: m.p,
        })
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(&creal(q(-1))))
    }

    pub fn scale(&self, s: &CQ) -> Self {
        let mut out = Self::zero();
        for (m, c) in &self.terms {
            out.add_term(m.clone(), c * s);
        }
        out
    }

    pub fn max_p(&self) -> u32 {
        self.terms.keys().map(|m| m.p).max().unwrap_or(0)
    }

    pub fn is_reduced(&self) -> bool {
        self.terms.keys().all(|m| m.f.is_reduced())
    }

    /// Replaces every function part through `map`, keeping `p` powers.
    pub fn map_functions(&self, mut map: impl FnMut(&FuncKey) -> FuncPoly) -> Self {
        let mut out = Self::zero();
        for (m, c) in &self.terms {
            for (f, c2) in map(&m.f) {
                out.add_term(Mono { f, p: m.p }, c * creal(c2));
            }
        }
        out
    }
}

/// Operations of the algebra for a fixed differentiation rule.
#[derive(Clone, Debug, PartialEq)]
pub struct Algebra {
    pub calculus: Calculus,
}

impl Algebra {
    pub fn new(calculus: Calculus) -> Self {
        Algebra { calculus }
    }

    pub fn symbolic() -> Self {
        Algebra::new(Calculus::symbolic())
    }

    /// Canonical expansion of a product of primitive factors.
    pub fn canonicalize(&self, word: &[Factor]) -> OperatorPoly {
        word.iter().fold(OperatorPoly::one(), |acc, f| self.multiply(&acc, &OperatorPoly::from_factor(f)))
    }

    pub fn multiply(&self, a: &OperatorPoly, b: &OperatorPoly) -> OperatorPoly {
        let mut out = OperatorPoly::zero();
        let kmax = a.max_p();
        let mi = cq(q(0), q(-1));
        for (mb, cb) in &b.terms {
            let ders = self.calculus.derivs_upto(&mb.f, kmax);
            for (ma, ca) in &a.terms {
                let cab = ca * cb;
                // (f p^k)(g p^l) = sum_j C(k,j) (-i)^j f g^(j) p^(k-j+l)
                for j in 0..=ma.p {
                    let phase = &cab * creal(binom(ma.p, j)) * num_traits::pow(mi.clone(), j as usize);
                    for (g, cg) in &ders[j as usize] {
                        out.add_term(Mono { f: ma.f.mul(g), p: ma.p - j + mb.p }, &phase * creal(cg.clone()));
                    }
                }
            }
        }
        out
    }

    /// Hermitian conjugate; `r`, `p` and functions of `r` are self-adjoint.
    pub fn adjoint(&self, a: &OperatorPoly) -> OperatorPoly {
        let mut out = OperatorPoly::zero();
        for (m, c) in &a.terms {
            let t = self.multiply(&OperatorPoly::p(m.p), &OperatorPoly::term(conj(c), m.f.clone(), 0));
            out = out.add(&t);
        }
        out
    }

    pub fn commutator(&self, a: &OperatorPoly, b: &OperatorPoly) -> OperatorPoly {
        self.multiply(a, b).sub(&self.multiply(b, a))
    }

    pub fn pow(&self, a: &OperatorPoly, n: u32) -> OperatorPoly {
        (0..n).fold(OperatorPoly::one(), |acc, _| self.multiply(&acc, a))
    }
}

fn write_half(f: &mut fmt::Formatter<'_>, base: &str, e2: i32) -> fmt::Result {
    if e2 == 2 {
        write!(f, "{base}")
    } else if e2 % 2 == 0 {
        write!(f, "{base}^{}", e2 / 2)
    } else {
        write!(f, "{base}^({}/2)", e2)
    }
}

impl fmt::Display for Mono {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut any = false;
        let mut sep = |f: &mut fmt::Formatter<'_>| -> fmt::Result {
            if any {
                write!(f, " ")?;
            }
            any = true;
            Ok(())
        };
        if self.f.r2 != 0 {
            sep(f)?;
            write_half(f, "r", self.f.r2)?;
        }
        if self.f.w2 != 0 {
            sep(f)?;
            write_half(f, "(-V)", self.f.w2)?;
        }
        for d in &self.f.derivs {
            sep(f)?;
            write!(f, "V^({d})")?;
        }
        if self.p != 0 {
            sep(f)?;
            write_half(f, "p", 2 * self.p as i32)?;
        }
        if !any {
            write!(f, "1")?;
        }
        Ok(())
    }
}

fn fmt_q(x: &Q) -> alloc::string::String {
    if x.denom().is_one() {
        alloc::format!("{}", x.numer())
    } else {
        alloc::format!("{}/{}", x.numer(), x.denom())
    }
}

impl fmt::Display for OperatorPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (idx, (m, c)) in self.terms.iter().enumerate() {
            if idx > 0 {
                write!(f, " + ")?;
            }
            let coef = match (c.re.is_zero(), c.im.is_zero()) {
                (false, true) => fmt_q(&c.re),
                (true, false) => alloc::format!("{}i", fmt_q(&c.im)),
                _ => alloc::format!("({} + {}i)", fmt_q(&c.re), fmt_q(&c.im)),
            };
            write!(f, "{coef}*{m}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn i() -> CQ {
        cq(q(0), q(1))
    }

    fn w(f: &[Factor]) -> OperatorPoly {
        Algebra::symbolic().canonicalize(f)
    }

    #[test]
    fn p_times_r() {
        let got = w(&[Factor::P, Factor::R(2)]);
        let want = w(&[Factor::R(2), Factor::P]).add(&OperatorPoly::scalar(-i()));
        assert_eq!(got, want);
    }

    #[test]
    fn p_times_r_squared() {
        let got = w(&[Factor::P, Factor::R(4)]);
        let want = w(&[Factor::R(4), Factor::P]).add(&OperatorPoly::r(2).scale(&cq(q(0), q(-2))));
        assert_eq!(got, want);
    }

    #[test]
    fn p_times_rp() {
        let got = w(&[Factor::P, Factor::R(2), Factor::P]);
        let want = w(&[Factor::R(2), Factor::P, Factor::P]).add(&OperatorPoly::p(1).scale(&-i()));
        assert_eq!(got, want);
    }

    #[test]
    fn adjoint_examples() {
        let alg = Algebra::symbolic();
        let rp = w(&[Factor::R(2), Factor::P]);
        assert_eq!(alg.adjoint(&rp), rp.add(&OperatorPoly::scalar(-i())));
        assert_eq!(alg.adjoint(&OperatorPoly::scalar(i())), OperatorPoly::scalar(-i()));
        let rpp = w(&[Factor::R(2), Factor::P, Factor::P]);
        assert_eq!(alg.adjoint(&rpp), rpp.add(&OperatorPoly::p(1).scale(&cq(q(0), q(-2)))));
    }

    #[test]
    fn commutator_examples() {
        let alg = Algebra::symbolic();
        assert_eq!(alg.commutator(&OperatorPoly::r(2), &OperatorPoly::p(1)), OperatorPoly::scalar(i()));
        assert_eq!(
            alg.commutator(&OperatorPoly::p(2), &OperatorPoly::r(2)),
            OperatorPoly::p(1).scale(&cq(q(0), q(-2)))
        );
    }

    #[test]
    fn symbolic_w_derivative() {
        // p (-V) = (-V) p + i V'
        let got = w(&[Factor::P, Factor::W(2)]);
        let vprime = OperatorPoly::from_factor(&Factor::V(1));
        let want = w(&[Factor::W(2), Factor::P]).add(&vprime.scale(&i()));
        assert_eq!(got, want);
    }

    #[test]
    fn derivative_multiplicity() {
        let calc = Calculus::symbolic();
        let f = FuncKey { r2: 0, w2: 0, derivs: alloc::vec![1, 1] };
        let d = calc.deriv(&f);
        assert_eq!(d.len(), 1);
        assert_eq!(d.get(&FuncKey { r2: 0, w2: 0, derivs: alloc::vec![1, 2] }), Some(&q(2)));
    }
}
