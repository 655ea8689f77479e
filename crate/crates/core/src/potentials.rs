//! Central potentials and the rules that eliminate derivatives of `V`.
//!
//! Two kinds are supported. Algebraic potentials are finite Laurent sums in
//! `r`, and `V` is substituted outright. Exponential potentials satisfy a
//! first-order equation `V' = R(r) V` with Laurent `R`, so every derivative
//! `V^(k)` becomes `-P_k(r) (-V)` with `P_0 = 1`, `P_{k+1} = P_k' + P_k R`.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_traits::Signed;

use crate::error::{Error, Result};
use crate::opalg::{Algebra, Calculus, FuncKey, FuncPoly, OperatorPoly};
use crate::poly::Laurent;
use crate::rational::{creal, q, qf, rational_from_f64, sqrt_rational, to_f64, Q};

#[derive(Clone, Debug, PartialEq)]
pub enum Family {
    Coulomb { alpha: f64 },
    Yukawa { g: f64, rho: f64 },
    Gaussian { b: f64, range: f64 },
    /// `V = -(4/3) alpha_s / r + sigma r`
    Cornell { alpha_s: f64, sigma: f64 },
    Conformal { lambda: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub enum Kind {
    /// `V(r)` itself as a Laurent sum.
    Algebraic { v: Laurent },
    /// `-V = C r^l w(r)` with `w(0) = 1` and `V' = R(r) V`.
    ExponentialOde { log_deriv: Laurent, scale: Q, scale_sqrt: Q, leading: i32 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct SmallRBehavior {
    /// Leading exponent of `V` at the origin (doubled).
    pub leading_power2: i32,
    pub regular: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PotentialSpec {
    pub family: Family,
    pub kind: Kind,
    pub params: Vec<(String, Q)>,
    pub mass: Q,
}

fn positive(name: &str, x: f64) -> Result<Q> {
    if !(x.is_finite() && x > 0.0) {
        return Err(Error::InvalidParameter(format!("{name} must be positive and finite, got {x}")));
    }
    rational_from_f64(x)
}

fn finite(name: &str, x: f64) -> Result<Q> {
    if !x.is_finite() {
        return Err(Error::InvalidParameter(format!("{name} must be finite, got {x}")));
    }
    rational_from_f64(x)
}

pub fn make_coulomb(alpha: f64) -> Result<PotentialSpec> {
    PotentialSpec::coulomb(alpha)
}

pub fn make_yukawa(g: f64, rho: f64) -> Result<PotentialSpec> {
    PotentialSpec::yukawa(g, rho)
}

pub fn make_gaussian(b: f64, range: f64) -> Result<PotentialSpec> {
    PotentialSpec::gaussian(b, range)
}

pub fn make_cornell(alpha_s: f64, sigma: f64) -> Result<PotentialSpec> {
    PotentialSpec::cornell(alpha_s, sigma)
}

pub fn make_conformal(lambda: f64) -> Result<PotentialSpec> {
    PotentialSpec::conformal(lambda)
}

impl PotentialSpec {
    pub fn coulomb(alpha: f64) -> Result<Self> {
        let a = finite("alpha", alpha)?;
        Ok(PotentialSpec {
            family: Family::Coulomb { alpha },
            kind: Kind::Algebraic { v: Laurent::monomial(-2, -a.clone()) },
            params: alloc::vec![("alpha".into(), a)],
            mass: q(1),
        })
    }

    pub fn yukawa(g: f64, rho: f64) -> Result<Self> {
        let gq = positive("g", g)?;
        let rq = positive("rho", rho)?;
        let log_deriv = Laurent::constant(-rq.recip()).add(&Laurent::monomial(-2, q(-1)));
        Ok(PotentialSpec {
            family: Family::Yukawa { g, rho },
            kind: Kind::ExponentialOde { log_deriv, scale_sqrt: sqrt_rational(&gq)?, scale: gq.clone(), leading: -1 },
            params: alloc::vec![("g".into(), gq), ("rho".into(), rq)],
            mass: q(1),
        })
    }

    /// Depth `b / (sqrt(2 pi) R)^3`, rationalized through its square root so
    /// that `(-V)^(1/2)` stays exact.
    pub fn gaussian(b: f64, range: f64) -> Result<Self> {
        let bq = positive("b", b)?;
        let rq = positive("R", range)?;
        let depth = b / libm::pow(libm::sqrt(2.0 * PI) * range, 3.0);
        let scale_sqrt = Q::from_float(libm::sqrt(depth))
            .ok_or_else(|| Error::InvalidParameter(format!("gaussian depth {depth}")))?;
        let scale = &scale_sqrt * &scale_sqrt;
        let log_deriv = Laurent::monomial(2, -(&rq * &rq).recip());
        Ok(PotentialSpec {
            family: Family::Gaussian { b, range },
            kind: Kind::ExponentialOde { log_deriv, scale, scale_sqrt, leading: 0 },
            params: alloc::vec![("b".into(), bq), ("R".into(), rq)],
            mass: q(1),
        })
    }

    pub fn cornell(alpha_s: f64, sigma: f64) -> Result<Self> {
        let aq = finite("alpha_s", alpha_s)?;
        let sq = positive("sigma", sigma)?;
        let kappa = &aq * qf(4, 3);
        let v = Laurent::monomial(-2, -kappa).add(&Laurent::monomial(2, sq.clone()));
        Ok(PotentialSpec {
            family: Family::Cornell { alpha_s, sigma },
            kind: Kind::Algebraic { v },
            params: alloc::vec![("alpha_s".into(), aq), ("sigma".into(), sq)],
            mass: q(1),
        })
    }

    pub fn conformal(lambda: f64) -> Result<Self> {
        let l = finite("lambda", lambda)?;
        Ok(PotentialSpec {
            family: Family::Conformal { lambda },
            kind: Kind::Algebraic { v: Laurent::monomial(-4, l.clone()) },
            params: alloc::vec![("lambda".into(), l)],
            mass: q(1),
        })
    }

    pub fn with_mass(mut self, mass: f64) -> Result<Self> {
        self.mass = positive("M", mass)?;
        Ok(self)
    }

    pub fn name(&self) -> &'static str {
        match self.family {
            Family::Coulomb { .. } => "coulomb",
            Family::Yukawa { .. } => "yukawa",
            Family::Gaussian { .. } => "gaussian",
            Family::Cornell { .. } => "cornell",
            Family::Conformal { .. } => "conformal",
        }
    }

    pub fn mass_f64(&self) -> f64 {
        to_f64(&self.mass)
    }

    pub fn param(&self, name: &str) -> Option<&Q> {
        self.params.iter().find(|(n, _)| n == name).map(|(_, v)| v)
    }

    pub fn is_algebraic(&self) -> bool {
        matches!(self.kind, Kind::Algebraic { .. })
    }

    pub fn value(&self, r: f64) -> f64 {
        match self.family {
            Family::Coulomb { alpha } => -alpha / r,
            Family::Yukawa { g, rho } => -g * libm::exp(-r / rho) / r,
            Family::Gaussian { .. } => {
                let Kind::ExponentialOde { scale, log_deriv, .. } = &self.kind else { unreachable!() };
                // log_deriv = -r / R^2
                let inv_r2 = -to_f64(&log_deriv.coeff(2));
                -to_f64(scale) * libm::exp(-0.5 * r * r * inv_r2)
            }
            Family::Cornell { alpha_s, sigma } => -4.0 / 3.0 * alpha_s / r + sigma * r,
            Family::Conformal { lambda } => lambda / (r * r),
        }
    }

    pub fn small_r(&self) -> SmallRBehavior {
        let lead = match &self.kind {
            Kind::Algebraic { v } => v.min_exponent().unwrap_or(0),
            Kind::ExponentialOde { leading, .. } => 2 * leading,
        };
        SmallRBehavior { leading_power2: lead, regular: lead >= 0 }
    }

    /// Logarithmic derivative `R` for exponential potentials.
    pub fn log_deriv(&self) -> Option<&Laurent> {
        match &self.kind {
            Kind::ExponentialOde { log_deriv, .. } => Some(log_deriv),
            Kind::Algebraic { .. } => None,
        }
    }

    /// Algebra in which function parts are already reduced.
    pub fn algebra(&self) -> Algebra {
        Algebra::new(Calculus::ode(self.log_deriv().cloned().unwrap_or_default()))
    }

    /// `P_k` with `V^(k) = -P_k (-V)`, for exponential potentials.
    pub fn derivative_factor(&self, k: u8) -> Option<Laurent> {
        let r = self.log_deriv()?;
        let mut p = Laurent::constant(q(1));
        for _ in 0..k {
            p = p.deriv().add(&p.mul(r));
        }
        Some(p)
    }

    /// `(-V)^(m2/2)` as a Laurent sum for algebraic potentials.
    fn algebraic_w_power(&self, v: &Laurent, m2: i32) -> Result<Laurent> {
        let w = v.scale(&q(-1));
        if m2 >= 0 && m2 % 2 == 0 {
            let mut acc = Laurent::constant(q(1));
            for _ in 0..m2 / 2 {
                acc = acc.mul(&w);
            }
            return Ok(acc);
        }
        if w.terms.len() != 1 {
            return Err(Error::Unsupported(format!(
                "(-V)^({m2}/2) of a multi-term algebraic potential; use integer powers of V"
            )));
        }
        let (&e, c) = w.terms.iter().next().unwrap();
        if e * m2 % 2 != 0 {
            return Err(Error::Unsupported("quarter-integer power of r".into()));
        }
        let (base, n) = if m2 % 2 == 0 {
            (c.clone(), m2 / 2)
        } else {
            if c.is_negative() {
                return Err(Error::Unsupported("square root of a negative potential".into()));
            }
            (sqrt_rational(c)?, m2)
        };
        let coeff = if n >= 0 { num_traits::pow(base, n as usize) } else { num_traits::pow(base.recip(), (-n) as usize) };
        Ok(Laurent::monomial(e * m2 / 2, coeff))
    }

    /// Rewrites one function part without derivative symbols.
    pub fn reduce_function(&self, f: &FuncKey) -> Result<FuncPoly> {
        let mut out = FuncPoly::new();
        match &self.kind {
            Kind::ExponentialOde { .. } => {
                let mut poly = Laurent::constant(if f.derivs.len() % 2 == 0 { q(1) } else { q(-1) });
                for &k in &f.derivs {
                    poly = poly.mul(&self.derivative_factor(k).unwrap());
                }
                let w2 = f.w2 + 2 * f.derivs.len() as i32;
                for (&e, c) in &poly.terms {
                    out.insert(FuncKey::rw(f.r2 + e, w2), c.clone());
                }
            }
            Kind::Algebraic { v } => {
                let mut poly = self.algebraic_w_power(v, f.w2)?;
                for &k in &f.derivs {
                    let mut d = v.clone();
                    for _ in 0..k {
                        d = d.deriv();
                    }
                    poly = poly.mul(&d);
                }
                for (&e, c) in &poly.terms {
                    out.insert(FuncKey::r(f.r2 + e), c.clone());
                }
            }
        }
        Ok(out)
    }

    /// Eliminates every `V^(k)` and, for algebraic potentials, `V` itself.
    pub fn reduce_derivatives(&self, p: &OperatorPoly) -> Result<OperatorPoly> {
        let mut err = None;
        let out = p.map_functions(|f| match self.reduce_function(f) {
            Ok(x) => x,
            Err(e) => {
                err.get_or_insert(e);
                FuncPoly::new()
            }
        });
        match err {
            Some(e) => Err(e),
            None => Ok(out),
        }
    }

    /// Hamiltonian `p^2 / 2M + V` in reduced form.
    pub fn hamiltonian(&self) -> OperatorPoly {
        let kin = OperatorPoly::p(2).scale(&creal((&self.mass * q(2)).recip()));
        let pot = match &self.kind {
            Kind::Algebraic { v } => {
                let mut acc = OperatorPoly::zero();
                for (&e, c) in &v.terms {
                    acc = acc.add(&OperatorPoly::term(creal(c.clone()), FuncKey::r(e), 0));
                }
                acc
            }
            Kind::ExponentialOde { .. } => OperatorPoly::term(creal(q(-1)), FuncKey::rw(0, 2), 0),
        };
        kin.add(&pot)
    }

    /// Numerical value of a reduced function part at `r`.
    pub fn eval_function(&self, f: &FuncKey, r: f64) -> f64 {
        let w = -self.value(r);
        libm::pow(r, f.r2 as f64 / 2.0) * if f.w2 == 0 { 1.0 } else { libm::pow(w, f.w2 as f64 / 2.0) }
    }

    /// Largest relative mismatch of `V' = R V` against central differences.
    pub fn ode_residual(&self, points: &[f64]) -> f64 {
        let Some(rl) = self.log_deriv() else { return 0.0 };
        points
            .iter()
            .map(|&r| {
                let h = 1e-5 * r.max(1e-3);
                let fd = (self.value(r + h) - self.value(r - h)) / (2.0 * h);
                let exact = rl.eval(r) * self.value(r);
                (fd - exact).abs() / exact.abs().max(1e-300)
            })
            .fold(0.0, f64::max)
    }

    /// Summary string for reports.
    pub fn describe(&self) -> String {
        let ps: Vec<String> = self.params.iter().map(|(n, v)| format!("{n}={}", to_f64(v))).collect();
        format!("{}({}, M={})", self.name(), ps.join(", "), to_f64(&self.mass))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::parse_operator;

    #[test]
    fn yukawa_log_derivative() {
        let y = PotentialSpec::yukawa(1.0, 2.0).unwrap();
        let r = y.log_deriv().unwrap();
        assert_eq!(r.coeff(0), qf(-1, 2));
        assert_eq!(r.coeff(-2), q(-1));
        assert!(y.ode_residual(&[0.5, 1.0, 2.0]) < 1e-8);
    }

    #[test]
    fn gaussian_log_derivative() {
        let g = PotentialSpec::gaussian(3.0, 1.0).unwrap();
        assert_eq!(g.log_deriv().unwrap(), &Laurent::monomial(2, q(-1)));
        assert!(g.ode_residual(&[0.5, 1.0, 2.0]) < 1e-8);
    }

    #[test]
    fn coulomb_is_laurent() {
        let c = PotentialSpec::coulomb(1.0).unwrap();
        assert_eq!(c.kind, Kind::Algebraic { v: Laurent::monomial(-2, q(-1)) });
        assert_eq!(c.small_r().leading_power2, -2);
    }

    #[test]
    fn rejects_bad_scales() {
        assert!(PotentialSpec::yukawa(1.0, 0.0).is_err());
        assert!(PotentialSpec::gaussian(1.0, -1.0).is_err());
        assert!(PotentialSpec::cornell(0.1, f64::NAN).is_err());
        assert!(PotentialSpec::coulomb(1.0).unwrap().with_mass(0.0).is_err());
    }

    #[test]
    fn yukawa_second_derivative() {
        // V'' = (2/r^2 + 2/(rho r) + 1/rho^2) V
        let y = PotentialSpec::yukawa(1.0, 4.0).unwrap();
        let got = y.reduce_derivatives(&parse_operator("V''").unwrap()).unwrap();
        let v = y.reduce_derivatives(&parse_operator("V").unwrap()).unwrap();
        let alg = y.algebra();
        let factor = OperatorPoly::r(-4)
            .scale(&creal(q(2)))
            .add(&OperatorPoly::r(-2).scale(&creal(qf(1, 2))))
            .add(&OperatorPoly::scalar(creal(qf(1, 16))));
        assert_eq!(got, alg.multiply(&factor, &v));
    }

    #[test]
    fn coulomb_r_times_vprime() {
        let c = PotentialSpec::coulomb(1.5).unwrap();
        let got = c.reduce_derivatives(&parse_operator("rV'").unwrap()).unwrap();
        let want = c.reduce_derivatives(&parse_operator("-V").unwrap()).unwrap();
        assert_eq!(got, want);
    }

    #[test]
    fn gaussian_first_derivative() {
        let g = PotentialSpec::gaussian(2.0, 1.0).unwrap();
        let got = g.reduce_derivatives(&parse_operator("V'").unwrap()).unwrap();
        let want = g.reduce_derivatives(&parse_operator("-rV").unwrap()).unwrap();
        assert_eq!(got, want);
    }
}
