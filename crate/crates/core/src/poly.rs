//! Laurent polynomials in `r` with half-integer exponents, and polynomials
//! in the energy `E`.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use num_traits::{One, Zero};

use crate::rational::{q, to_f64, Q};

/// `sum_e c_e r^(e/2)`; exponents are stored doubled.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Laurent {
    pub terms: BTreeMap<i32, Q>,
}

impl Laurent {
    pub fn zero() -> Self {
        Laurent::default()
    }

    /// `c r^(e2/2)`
    pub fn monomial(e2: i32, c: Q) -> Self {
        let mut l = Laurent::zero();
        l.add_term(e2, c);
        l
    }

    pub fn constant(c: Q) -> Self {
        Self::monomial(0, c)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add_term(&mut self, e2: i32, c: Q) {
        if c.is_zero() {
            return;
        }
        let slot = self.terms.entry(e2).or_insert_with(Q::zero);
        *slot += c;
        if slot.is_zero() {
            self.terms.remove(&e2);
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (&e, c) in &other.terms {
            out.add_term(e, c.clone());
        }
        out
    }

    pub fn scale(&self, s: &Q) -> Self {
        let mut out = Laurent::zero();
        for (&e, c) in &self.terms {
            out.add_term(e, c * s);
        }
        out
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Laurent::zero();
        for (&a, x) in &self.terms {
            for (&b, y) in &other.terms {
                out.add_term(a + b, x * y);
            }
        }
        out
    }

    /// Multiplies by `r^(e2/2)`.
    pub fn shift(&self, e2: i32) -> Self {
        Laurent { terms: self.terms.iter().map(|(&e, c)| (e + e2, c.clone())).collect() }
    }

    pub fn deriv(&self) -> Self {
        let mut out = Laurent::zero();
        for (&e, c) in &self.terms {
            out.add_term(e - 2, c * crate::rational::qf(e as i64, 2));
        }
        out
    }

    pub fn eval(&self, r: f64) -> f64 {
        self.terms.iter().map(|(&e, c)| to_f64(c) * libm::pow(r, e as f64 / 2.0)).sum()
    }

    /// Lowest exponent (doubled) with a nonzero coefficient.
    pub fn min_exponent(&self) -> Option<i32> {
        self.terms.keys().next().copied()
    }

    pub fn max_exponent(&self) -> Option<i32> {
        self.terms.keys().next_back().copied()
    }

    /// Coefficient of `r^(e2/2)`.
    pub fn coeff(&self, e2: i32) -> Q {
        self.terms.get(&e2).cloned().unwrap_or_else(Q::zero)
    }
}

/// Polynomial in `E` with rational coefficients, lowest degree first.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PolyE(pub Vec<Q>);

impl PolyE {
    pub fn zero() -> Self {
        PolyE(Vec::new())
    }

    pub fn constant(c: Q) -> Self {
        let mut p = PolyE(vec![c]);
        p.trim();
        p
    }

    pub fn one() -> Self {
        PolyE(vec![q(1)])
    }

    fn trim(&mut self) {
        while self.0.last().is_some_and(|c| c.is_zero()) {
            self.0.pop();
        }
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    pub fn degree(&self) -> Option<usize> {
        if self.0.is_empty() {
            None
        } else {
            Some(self.0.len() - 1)
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let n = self.0.len().max(other.0.len());
        let mut v = Vec::with_capacity(n);
        for i in 0..n {
            let a = self.0.get(i).cloned().unwrap_or_else(Q::zero);
            let b = other.0.get(i).cloned().unwrap_or_else(Q::zero);
            v.push(a + b);
        }
        let mut p = PolyE(v);
        p.trim();
        p
    }

    pub fn scale(&self, s: &Q) -> Self {
        let mut p = PolyE(self.0.iter().map(|c| c * s).collect());
        p.trim();
        p
    }

    pub fn mul(&self, other: &Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return PolyE::zero();
        }
        let mut v = vec![Q::zero(); self.0.len() + other.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            for (j, b) in other.0.iter().enumerate() {
                v[i + j] += a * b;
            }
        }
        let mut p = PolyE(v);
        p.trim();
        p
    }

    /// Multiplies by `E`.
    pub fn mul_e(&self) -> Self {
        if self.is_zero() {
            return PolyE::zero();
        }
        let mut v = Vec::with_capacity(self.0.len() + 1);
        v.push(Q::zero());
        v.extend(self.0.iter().cloned());
        PolyE(v)
    }

    pub fn coeff(&self, d: usize) -> Q {
        self.0.get(d).cloned().unwrap_or_else(Q::zero)
    }

    pub fn eval(&self, e: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, c| acc * e + to_f64(c))
    }

    pub fn is_one(&self) -> bool {
        self.0.len() == 1 && self.0[0].is_one()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::qf;

    #[test]
    fn laurent_derivative_half_powers() {
        // d/dr r^(1/2) = 1/2 r^(-1/2)
        let l = Laurent::monomial(1, q(1));
        assert_eq!(l.deriv(), Laurent::monomial(-1, qf(1, 2)));
        let c = Laurent::constant(q(3));
        assert!(c.deriv().is_zero());
    }

    #[test]
    fn laurent_product_cancels() {
        let a = Laurent::monomial(2, q(1)).add(&Laurent::constant(q(1)));
        let b = Laurent::monomial(2, q(1)).add(&Laurent::constant(q(-1)));
        let p = a.mul(&b);
        assert_eq!(p, Laurent::monomial(4, q(1)).add(&Laurent::constant(q(-1))));
    }

    #[test]
    fn poly_e_arithmetic() {
        let p = PolyE(vec![q(1), q(2)]);
        let sq = p.mul(&p);
        assert_eq!(sq, PolyE(vec![q(1), q(4), q(4)]));
        assert_eq!(p.mul_e().degree(), Some(2));
        assert!(p.add(&p.scale(&q(-1))).is_zero());
        assert_eq!(sq.eval(0.5), 4.0);
    }
}
