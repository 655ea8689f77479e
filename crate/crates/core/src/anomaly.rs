//! Boundary terms at the origin.
//!
//! Integrating by parts on `[0, inf)` leaves surface terms
//! `lim_{r->0} g(r) u^(i)(r) u^(j)(r)`. They are evaluated from the
//! small-`r` expansion `u = c1 sum_n a_n(E) r^n` of the reduced radial
//! wavefunction, where each `a_n` is a polynomial in the energy fixed by
//! `u'' = 2M (V - E) u` and `u(0) = 0`. A finite surface term is then
//! `c1^2 T(E)` for a polynomial `T`, and is rewritten exactly in terms of the
//! anomaly variables `a_j = 1/2 u'(0) u^(2j+1)(0)` (`A = a_0`, `B = a_1`),
//! which keeps every constraint linear.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use num_traits::Zero;

use crate::error::{Error, Result};
use crate::opalg::FuncKey;
use crate::poly::{Laurent, PolyE};
use crate::potentials::{Kind, PotentialSpec};
use crate::rational::{factorial, q, qf, to_f64, Q};

/// Exponent (doubled) used as "known to all orders".
const EXACT: i32 = i32::MAX / 4;

/// Truncated series `sum_i c_i r^((lo2 + i)/2)`, exact for exponents below
/// `valid2 / 2`.
#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub lo2: i32,
    pub coeffs: Vec<PolyE>,
    pub valid2: i32,
}

impl Series {
    pub fn zero() -> Self {
        Series { lo2: 0, coeffs: Vec::new(), valid2: EXACT }
    }

    pub fn from_laurent(l: &Laurent) -> Self {
        let Some(lo) = l.min_exponent() else { return Series::zero() };
        let hi = l.max_exponent().unwrap();
        let mut coeffs = vec![PolyE::zero(); (hi - lo + 1) as usize];
        for (&e, c) in &l.terms {
            coeffs[(e - lo) as usize] = PolyE::constant(c.clone());
        }
        Series { lo2: lo, coeffs, valid2: EXACT }
    }

    /// `sum_n vals[n] r^(lo + n)`, exact below `r^(lo + vals.len())`.
    pub fn integer_powers(lo: i32, vals: Vec<PolyE>) -> Series {
        let n = vals.len();
        let mut coeffs = Vec::with_capacity(2 * n);
        for (i, c) in vals.into_iter().enumerate() {
            coeffs.push(c);
            if i + 1 < n {
                coeffs.push(PolyE::zero());
            }
        }
        Series { lo2: 2 * lo, coeffs, valid2: 2 * (lo + n as i32) }.normalize()
    }

    fn hi2(&self) -> i32 {
        self.lo2 + self.coeffs.len() as i32
    }

    pub fn coeff(&self, e2: i32) -> PolyE {
        if e2 < self.lo2 || e2 >= self.hi2() {
            return PolyE::zero();
        }
        self.coeffs[(e2 - self.lo2) as usize].clone()
    }

    fn normalize(mut self) -> Self {
        let lead = self.coeffs.iter().take_while(|c| c.is_zero()).count();
        let keep_lead = lead.min(((self.valid2 - self.lo2).max(0)) as usize);
        self.coeffs.drain(..keep_lead);
        self.lo2 += keep_lead as i32;
        let max_len = (self.valid2 - self.lo2).max(0) as usize;
        if self.coeffs.len() > max_len {
            self.coeffs.truncate(max_len);
        }
        while self.coeffs.last().is_some_and(|c| c.is_zero()) {
            self.coeffs.pop();
        }
        if self.coeffs.is_empty() && self.valid2 >= EXACT {
            self.lo2 = 0;
        }
        self
    }

    pub fn add(&self, other: &Series) -> Series {
        if self.coeffs.is_empty() && self.valid2 >= EXACT {
            return other.clone();
        }
        if other.coeffs.is_empty() && other.valid2 >= EXACT {
            return self.clone();
        }
        let lo = self.lo2.min(other.lo2);
        let valid = self.valid2.min(other.valid2);
        let hi = self.hi2().max(other.hi2()).min(valid.max(lo));
        let coeffs = (lo..hi).map(|e| self.coeff(e).add(&other.coeff(e))).collect();
        Series { lo2: lo, coeffs, valid2: valid }.normalize()
    }

    pub fn scale(&self, s: &Q) -> Series {
        Series { lo2: self.lo2, coeffs: self.coeffs.iter().map(|c| c.scale(s)).collect(), valid2: self.valid2 }
            .normalize()
    }

    pub fn mul(&self, other: &Series) -> Series {
        let lo = self.lo2 + other.lo2;
        let valid = sat_add(self.lo2, other.valid2).min(sat_add(other.lo2, self.valid2));
        let hi = (self.hi2() + other.hi2() - 1).min(valid).max(lo);
        let mut coeffs = vec![PolyE::zero(); (hi - lo) as usize];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.coeffs.iter().enumerate() {
                let k = i + j;
                if k >= coeffs.len() {
                    break;
                }
                if !b.is_zero() {
                    coeffs[k] = coeffs[k].add(&a.mul(b));
                }
            }
        }
        Series { lo2: lo, coeffs, valid2: valid }.normalize()
    }

    pub fn deriv(&self) -> Series {
        let coeffs = self.coeffs.iter().enumerate().map(|(i, c)| c.scale(&qf((self.lo2 + i as i32) as i64, 2))).collect();
        Series { lo2: self.lo2 - 2, coeffs, valid2: sat_add(self.valid2, -2) }.normalize()
    }

    /// Lowest exponent (doubled) carrying a nonzero coefficient, if it is
    /// known.
    pub fn leading(&self) -> Option<i32> {
        self.coeffs.iter().position(|c| !c.is_zero()).map(|i| self.lo2 + i as i32)
    }
}

fn sat_add(a: i32, b: i32) -> i32 {
    if a >= EXACT || b >= EXACT {
        EXACT
    } else {
        a + b
    }
}

/// Small-`r` expansion of the reduced radial wavefunction.
#[derive(Clone, Debug)]
pub struct FrobeniusExpansion {
    pub order: usize,
    /// `u / c1` as a series in `r`; empty when the indicial exponent is
    /// irrational.
    pub u: Series,
    /// Leading exponent of `u` when `V ~ r^-2`; otherwise `1`.
    pub leading_power: f64,
    pub exact: bool,
    /// Potential as a series (exact Laurent part for algebraic kinds).
    pub potential: Series,
    spec: PotentialSpec,
}

/// A surface term `coeff * lim_{r->0} f(r) u^(i) u^(j)` with `f` reduced.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryTerm {
    pub coeff: Q,
    pub f: FuncKey,
    pub i: u32,
    pub j: u32,
}

/// Linear combination of anomaly variables, indexed by `j` in `a_j`.
pub type AnomalyForm = BTreeMap<usize, Q>;

#[derive(Clone, Debug, PartialEq)]
pub enum BoundaryResult {
    Zero,
    Finite(AnomalyForm),
    Divergent,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnomalyVariable {
    pub index: usize,
    pub name: String,
    pub definition: String,
    pub nonnegative: bool,
}

impl AnomalyVariable {
    pub fn new(index: usize) -> Self {
        let name = match index {
            0 => String::from("A"),
            1 => String::from("B"),
            j => format!("a{j}"),
        };
        let definition = match index {
            0 => String::from("1/2 u'(0)^2"),
            j => format!("1/2 u'(0) u^({})(0)", 2 * j + 1),
        };
        AnomalyVariable { index, name, definition, nonnegative: index == 0 }
    }
}

/// `-V / C` series for exponential potentials: `r^l sum_n w_n r^n` raised to
/// the power `m = m2/2`, with `nterms` terms.
fn w_power_series(log_deriv: &Laurent, leading: i32, m2: i32, nterms: usize) -> Result<Vec<Q>> {
    // R = l/r + sum_j rt_j r^j
    if log_deriv.coeff(-2) != q(leading as i64) {
        return Err(Error::Unsupported("log-derivative inconsistent with leading power".into()));
    }
    let mut rt: Vec<Q> = Vec::new();
    for (&e, c) in &log_deriv.terms {
        if e == -2 {
            continue;
        }
        if e < 0 || e % 2 != 0 {
            return Err(Error::Unsupported(format!("log-derivative term r^({e}/2)")));
        }
        let j = (e / 2) as usize;
        if rt.len() <= j {
            rt.resize(j + 1, Q::zero());
        }
        rt[j] = c.clone();
    }
    let m = qf(m2 as i64, 2);
    let mut w = vec![q(1)];
    for n in 1..nterms {
        let mut acc = Q::zero();
        for (j, r) in rt.iter().enumerate() {
            if j + 1 > n {
                break;
            }
            acc += r * &w[n - 1 - j];
        }
        w.push(acc * &m / q(n as i64));
    }
    Ok(w)
}

/// Series solution at the origin to the given order; see [`FrobeniusExpansion::new`].
pub fn frobenius_expansion(spec: &PotentialSpec, order: usize) -> Result<FrobeniusExpansion> {
    FrobeniusExpansion::new(spec, order)
}

impl FrobeniusExpansion {
    pub fn new(spec: &PotentialSpec, order: usize) -> Result<Self> {
        let lead2 = spec.small_r().leading_power2;
        if lead2 < -4 {
            return Err(Error::TooSingular(format!("V ~ r^({lead2}/2)")));
        }
        let m2 = &spec.mass * q(2);
        let potential = match &spec.kind {
            Kind::Algebraic { v } => Series::from_laurent(v),
            Kind::ExponentialOde { log_deriv, scale, leading, .. } => {
                let w = w_power_series(log_deriv, *leading, 2, order + 4)?;
                let vals: Vec<PolyE> = w.iter().map(|c| PolyE::constant(-(c * scale))).collect();
                Series::integer_powers(*leading, vals)
            }
        };
        if lead2 == -4 {
            let lambda = potential.coeff(-4).coeff(0);
            if potential.coeffs.len() > 1 || potential.valid2 < EXACT {
                return Err(Error::Unsupported("inverse-square potential with extra terms".into()));
            }
            // a (a - 1) = 2 M lambda; the larger root, real part if complex.
            let disc = 1.0 + 8.0 * to_f64(&spec.mass) * to_f64(&lambda);
            let a = if disc >= 0.0 { 0.5 + 0.5 * libm::sqrt(disc) } else { 0.5 };
            return Ok(FrobeniusExpansion {
                order,
                u: Series::zero(),
                leading_power: a,
                exact: false,
                potential,
                spec: spec.clone(),
            });
        }
        if lead2 % 2 != 0 {
            return Err(Error::Unsupported("half-integer power in the potential".into()));
        }
        let v = |j: i64| -> PolyE {
            // coefficient of r^j
            potential.coeff(2 * j as i32)
        };
        let mut a: Vec<PolyE> = vec![PolyE::zero(), PolyE::one()];
        for n in 2..=order {
            let nn = n as i64 - 2;
            let mut acc = a[n - 2].mul_e().scale(&q(-1));
            for j in -1..=nn {
                let idx = nn - j;
                if idx < 0 {
                    continue;
                }
                let vj = v(j);
                if !vj.is_zero() {
                    acc = acc.add(&vj.mul(&a[idx as usize]));
                }
            }
            a.push(acc.scale(&(&m2 / q((nn + 2) * (nn + 1)))));
        }
        // a_n needs v_j for j <= n - 2
        if potential.valid2 <= 2 * (order as i32 - 2) {
            return Err(Error::Undecidable(order));
        }
        let u = Series::integer_powers(0, a);
        Ok(FrobeniusExpansion { order, u, leading_power: 1.0, exact: true, potential, spec: spec.clone() })
    }

    pub fn u_deriv(&self, k: u32) -> Series {
        (0..k).fold(self.u.clone(), |s, _| s.deriv())
    }

    /// Series of a reduced function part.
    pub fn function_series(&self, f: &FuncKey) -> Result<Series> {
        if !f.is_reduced() {
            return Err(Error::UnreducedDerivative(f.derivs[0]));
        }
        if f.w2 == 0 {
            return Ok(Series::from_laurent(&Laurent::monomial(f.r2, q(1))));
        }
        match &self.spec.kind {
            Kind::Algebraic { .. } => Err(Error::Unsupported("(-V) factor left in an algebraic potential".into())),
            Kind::ExponentialOde { log_deriv, scale, scale_sqrt, leading } => {
                let nterms = self.order + 4;
                let w = w_power_series(log_deriv, *leading, f.w2, nterms)?;
                let pre = if f.w2 % 2 == 0 {
                    pow_signed(scale, f.w2 / 2)
                } else {
                    pow_signed(scale_sqrt, f.w2)
                };
                let lo2 = f.r2 + f.w2 * leading;
                let mut coeffs = Vec::with_capacity(2 * nterms);
                for (n, c) in w.iter().enumerate() {
                    coeffs.push(PolyE::constant(c * &pre));
                    if n + 1 < w.len() {
                        coeffs.push(PolyE::zero());
                    }
                }
                Ok(Series { lo2, valid2: lo2 + 2 * nterms as i32, coeffs }.normalize())
            }
        }
    }

    /// Whether `int_0 u f u^(k) dr` converges at the origin.
    pub fn moment_admissible(&self, f: &FuncKey, k: u32) -> Result<bool> {
        if !self.exact {
            let w_lead = if f.w2 == 0 { 0.0 } else { -2.0 * f.w2 as f64 / 2.0 };
            let e = 2.0 * self.leading_power - k as f64 + f.r2 as f64 / 2.0 + w_lead;
            if k > 0 && (e + 1.0).abs() < 1e-12 {
                return Err(Error::Undecidable(self.order));
            }
            return Ok(e > -1.0);
        }
        let s = self.function_series(f)?.mul(&self.u).mul(&self.u_deriv(k));
        match s.leading() {
            Some(e) if e < s.valid2 => Ok(e > -2),
            _ if s.valid2 > -2 => Ok(true),
            _ => Err(Error::Undecidable(self.order)),
        }
    }

    /// Total series `sum coeff f u^(i) u^(j)` in units of `c1^2`.
    fn boundary_series(&self, terms: &[BoundaryTerm]) -> Result<Series> {
        let mut acc = Series::zero();
        let mut cache: BTreeMap<u32, Series> = BTreeMap::new();
        for t in terms {
            if t.coeff.is_zero() {
                continue;
            }
            for k in [t.i, t.j] {
                if !cache.contains_key(&k) {
                    cache.insert(k, self.u_deriv(k));
                }
            }
            let s = self.function_series(&t.f)?.mul(&cache[&t.i]).mul(&cache[&t.j]).scale(&t.coeff);
            acc = acc.add(&s);
        }
        Ok(acc)
    }

    /// Evaluates the sum of surface terms at the origin.
    pub fn boundary(&self, terms: &[BoundaryTerm]) -> Result<BoundaryResult> {
        if terms.iter().all(|t| t.coeff.is_zero()) {
            return Ok(BoundaryResult::Zero);
        }
        if !self.exact {
            return Err(Error::Unsupported("surface terms for an irrational indicial exponent".into()));
        }
        let s = self.boundary_series(terms)?;
        if let Some(e) = s.leading() {
            if e < 0 && e < s.valid2 {
                return Ok(BoundaryResult::Divergent);
            }
        }
        if s.valid2 <= 0 {
            return Err(Error::Undecidable(self.order));
        }
        let value = s.coeff(0);
        if value.is_zero() {
            return Ok(BoundaryResult::Zero);
        }
        Ok(BoundaryResult::Finite(self.to_anomalies(&value)?))
    }

    /// `P_j(E)` with `a_j = c1^2 P_j(E)`.
    pub fn anomaly_poly(&self, j: usize) -> Result<PolyE> {
        let n = 2 * j + 1;
        if 2 * n as i32 >= self.u.valid2 {
            return Err(Error::Undecidable(self.order));
        }
        let half_fact = qf(1, 2) * Q::from_integer(factorial(n as u32));
        Ok(self.u.coeff(2 * n as i32).scale(&half_fact))
    }

    /// Rewrites `c1^2 T(E)` in the anomaly basis.
    pub fn to_anomalies(&self, t: &PolyE) -> Result<AnomalyForm> {
        let mut rest = t.clone();
        let mut out = AnomalyForm::new();
        while let Some(d) = rest.degree() {
            let pj = self.anomaly_poly(d)?;
            let lead = pj.coeff(d);
            if lead.is_zero() {
                return Err(Error::Unsupported(format!("anomaly a_{d} has no E^{d} term")));
            }
            let c = rest.coeff(d) / lead;
            rest = rest.add(&pj.scale(&-c.clone()));
            out.insert(d, c);
        }
        Ok(out)
    }
}

fn pow_signed(x: &Q, n: i32) -> Q {
    if n >= 0 {
        num_traits::pow(x.clone(), n as usize)
    } else {
        num_traits::pow(x.recip(), (-n) as usize)
    }
}

/// Anomaly variables that occur in a collection of forms, in index order.
pub fn anomaly_variables<'a>(forms: impl IntoIterator<Item = &'a AnomalyForm>) -> Vec<AnomalyVariable> {
    let mut idx: Vec<usize> = forms.into_iter().flat_map(|f| f.keys().copied()).collect();
    idx.sort_unstable();
    idx.dedup();
    idx.into_iter().map(AnomalyVariable::new).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coulomb_expansion() {
        let c = PotentialSpec::coulomb(1.0).unwrap();
        let f = FrobeniusExpansion::new(&c, 6).unwrap();
        assert_eq!(f.u.coeff(2), PolyE::one());
        // a_2 = -M alpha
        assert_eq!(f.u.coeff(4), PolyE::constant(q(-1)));
    }

    #[test]
    fn gaussian_expansion_has_no_r2_term() {
        let g = PotentialSpec::gaussian(5.0, 1.0).unwrap();
        let f = FrobeniusExpansion::new(&g, 6).unwrap();
        assert!(f.u.coeff(4).is_zero());
        assert!(!f.u.coeff(6).is_zero());
    }

    #[test]
    fn conformal_indicial_root() {
        let c = PotentialSpec::conformal(1.0).unwrap();
        let f = FrobeniusExpansion::new(&c, 6).unwrap();
        let a = f.leading_power;
        assert!((a * (a - 1.0) - 2.0).abs() < 1e-12);
        assert!(!f.exact);
    }

    #[test]
    fn p_cubed_surface_term_is_minus_a() {
        // int u u''' = -u(0) u''(0) + 1/2 u'(0)^2 ... evaluated as lim(u'u') / 2
        let g = PotentialSpec::gaussian(5.0, 1.0).unwrap();
        let f = FrobeniusExpansion::new(&g, 6).unwrap();
        let t = [BoundaryTerm { coeff: qf(1, 2), f: FuncKey::one(), i: 1, j: 1 }];
        let mut want = AnomalyForm::new();
        want.insert(0, q(1));
        assert_eq!(f.boundary(&t).unwrap(), BoundaryResult::Finite(want));
    }

    #[test]
    fn divergent_and_zero_terms() {
        let y = PotentialSpec::yukawa(1.0, 10.0).unwrap();
        let f = FrobeniusExpansion::new(&y, 6).unwrap();
        let div = [BoundaryTerm { coeff: q(1), f: FuncKey::r(-4), i: 0, j: 1 }];
        assert_eq!(f.boundary(&div).unwrap(), BoundaryResult::Divergent);
        let zero = [BoundaryTerm { coeff: q(1), f: FuncKey::r(4), i: 1, j: 2 }];
        assert_eq!(f.boundary(&zero).unwrap(), BoundaryResult::Zero);
    }

    #[test]
    fn b_anomaly_depends_on_energy() {
        let g = PotentialSpec::gaussian(5.0, 1.0).unwrap();
        let f = FrobeniusExpansion::new(&g, 6).unwrap();
        let p1 = f.anomaly_poly(1).unwrap();
        // 1/2 u'(0) u'''(0) = c1^2 M (V(0) - E)
        assert_eq!(p1.degree(), Some(1));
        assert_eq!(p1.coeff(1), q(-1));
    }

    #[test]
    fn yukawa_moment_admissibility() {
        let y = PotentialSpec::yukawa(1.0, 10.0).unwrap();
        let f = FrobeniusExpansion::new(&y, 6).unwrap();
        assert!(f.moment_admissible(&FuncKey::r(-2), 0).unwrap());
        assert!(f.moment_admissible(&FuncKey::r(-2), 2).unwrap());
        assert!(!f.moment_admissible(&FuncKey::r(-6), 0).unwrap());
        assert!(!f.moment_admissible(&FuncKey::rw(-4, 2), 0).unwrap());
    }
}
