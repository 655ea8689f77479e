//! Reference ground states by direct diagonalization.
//!
//! A crude finite-difference estimate fixes the decay rate `kappa`; the
//! Hamiltonian is then diagonalized in the basis
//! `L_n^(2)(2 kappa r) r e^(-kappa r)`, `n < N`, with matrix elements from
//! Gauss-Laguerre quadrature.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{sym_eigen, Mat};
use crate::opalg::FuncKey;
use crate::potentials::{Family, PotentialSpec};
use crate::quadrature::GaussLaguerre;
use crate::rational::to_f64;

pub const DEFAULT_BASIS_SIZE: usize = 16;
pub const QUADRATURE_NODES: usize = 200;

/// Coefficients of `L_n^(2)(x)` in powers of `x`:
/// `sum_{i=0}^n (-1)^i (n+2)! / ((n-i)! (2+i)! i!) x^i`.
pub fn laguerre2_coefficients(n: usize) -> Vec<f64> {
    let fact = |k: usize| (1..=k).fold(1.0f64, |a, j| a * j as f64);
    (0..=n)
        .map(|i| {
            let s = if i % 2 == 0 { 1.0 } else { -1.0 };
            s * fact(n + 2) / (fact(n - i) * fact(2 + i) * fact(i))
        })
        .collect()
}

/// `L_k^(alpha)(x)` for `k = 0..=n` by recurrence.
fn laguerre_values(n: usize, alpha: f64, x: f64) -> Vec<f64> {
    let mut out = vec![1.0; n + 1];
    if n >= 1 {
        out[1] = 1.0 + alpha - x;
    }
    for k in 1..n {
        out[k + 1] = ((2 * k) as f64 + 1.0 + alpha - x) * out[k] / (k + 1) as f64 - (k as f64 + alpha) * out[k - 1] / (k + 1) as f64;
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct CrudeEstimate {
    pub energy: f64,
    pub mean_r: f64,
    pub box_size: f64,
}

/// Lowest eigenvalue of the symmetric tridiagonal matrix `(d, e)` by Sturm
/// bisection.
fn tridiagonal_lowest(d: &[f64], e: f64) -> f64 {
    let n = d.len();
    let bound = d.iter().fold(0.0f64, |a, &v| a.max(v.abs())) + 2.0 * e.abs();
    let (mut lo, mut hi) = (-bound, bound);
    let count_below = |x: f64| {
        let mut c = 0;
        let mut q = d[0] - x;
        if q < 0.0 {
            c += 1;
        }
        for &di in &d[1..n] {
            let qq = if q == 0.0 { 1e-300 } else { q };
            q = di - x - e * e / qq;
            if q < 0.0 {
                c += 1;
            }
        }
        c
    };
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if count_below(mid) >= 1 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-15 * (1.0 + lo.abs()) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Eigenvector of a tridiagonal matrix near `shift` by inverse iteration.
fn tridiagonal_vector(d: &[f64], e: f64, shift: f64) -> Vec<f64> {
    let n = d.len();
    let mut v = vec![1.0; n];
    for _ in 0..3 {
        // Thomas algorithm on (T - shift) x = v
        let mut c = vec![0.0; n];
        let mut r = vec![0.0; n];
        let mut den = d[0] - shift;
        if den == 0.0 {
            den = 1e-300;
        }
        c[0] = e / den;
        r[0] = v[0] / den;
        for i in 1..n {
            let mut den = d[i] - shift - e * c[i - 1];
            if den == 0.0 {
                den = 1e-300;
            }
            c[i] = e / den;
            r[i] = (v[i] - e * r[i - 1]) / den;
        }
        let mut x = vec![0.0; n];
        x[n - 1] = r[n - 1];
        for i in (0..n - 1).rev() {
            x[i] = r[i] - c[i] * x[i + 1];
        }
        let norm = libm::sqrt(x.iter().map(|a| a * a).sum::<f64>());
        v = x.into_iter().map(|a| a / norm).collect();
    }
    v
}

/// Finite-difference ground state on `[0, box_size]` with `points` interior
/// nodes and `u(0) = u(L) = 0`.
pub fn finite_difference(spec: &PotentialSpec, points: usize, box_size: f64) -> CrudeEstimate {
    let h = box_size / (points + 1) as f64;
    let m = spec.mass_f64();
    let t = 1.0 / (2.0 * m * h * h);
    let d: Vec<f64> = (1..=points).map(|i| 2.0 * t + spec.value(i as f64 * h)).collect();
    let energy = tridiagonal_lowest(&d, -t);
    let v = tridiagonal_vector(&d, -t, energy - 1e-10 * (1.0 + energy.abs()));
    let mean_r = v.iter().enumerate().map(|(i, a)| a * a * (i + 1) as f64 * h).sum();
    CrudeEstimate { energy, mean_r, box_size }
}

fn confining(spec: &PotentialSpec) -> bool {
    matches!(spec.family, Family::Cornell { sigma, .. } if sigma > 0.0)
}

/// Rough ground-state energy, with the box size adapted to the state.
pub fn crude_estimate(spec: &PotentialSpec) -> Result<CrudeEstimate> {
    if matches!(spec.family, Family::Conformal { .. }) {
        return Err(Error::Unsupported("no reference diagonalization for inverse-square potentials".into()));
    }
    let mut box_size = 40.0;
    let mut est = finite_difference(spec, 3000, box_size);
    for _ in 0..6 {
        if est.energy >= 0.0 && !confining(spec) {
            break;
        }
        let want = (20.0 * est.mean_r).clamp(5.0, 2e4);
        if (want - box_size).abs() < 0.1 * box_size {
            break;
        }
        box_size = want;
        est = finite_difference(spec, 3000, box_size);
    }
    if est.energy >= 0.0 && !confining(spec) {
        return Err(Error::NoBoundState(spec.describe()));
    }
    Ok(est)
}

/// Ground state expanded as `u(r) = e^(-kappa r) Q(r)` with `Q` a
/// polynomial, normalized so that `int u^2 = 1` and `u'(0) > 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagResult {
    pub ground_energy: f64,
    pub kappa: f64,
    pub basis_size: usize,
    /// Coefficients of the normalized basis functions.
    pub coefficients: Vec<f64>,
    /// Coefficients of `Q` in powers of `r`.
    pub poly: Vec<f64>,
    /// Largest deviation of the quadrature overlap matrix from identity.
    pub orthogonality_error: f64,
}

/// Decay rate used for the basis: `sqrt(-2 M E)` for bound states below
/// threshold, otherwise from the mean radius.
pub fn basis_kappa(spec: &PotentialSpec, est: &CrudeEstimate) -> f64 {
    if est.energy < 0.0 {
        libm::sqrt(-2.0 * spec.mass_f64() * est.energy)
    } else {
        1.5 / est.mean_r
    }
}

pub fn ground_energy(spec: &PotentialSpec, basis_size: usize) -> Result<DiagResult> {
    let est = crude_estimate(spec)?;
    diagonalize(spec, basis_size, basis_kappa(spec, &est))
}

/// Basis size used by [`ground_state_refined`].
pub const REFINED_BASIS_SIZE: usize = 64;

/// Like [`ground_energy`] but also scans `kappa` upward from the asymptotic
/// rate and keeps the lowest (variationally best) energy. Short-range wells
/// need the more compact basis before high moments converge.
pub fn ground_state_refined(spec: &PotentialSpec) -> Result<DiagResult> {
    let est = crude_estimate(spec)?;
    let k0 = basis_kappa(spec, &est);
    let mut best: Option<DiagResult> = None;
    for scale in [1.0, 1.5, 2.0, 3.0, 4.0] {
        let d = diagonalize(spec, REFINED_BASIS_SIZE, k0 * scale)?;
        if best.as_ref().map_or(true, |b| d.ground_energy < b.ground_energy) {
            best = Some(d);
        }
    }
    best.ok_or_else(|| Error::Quadrature("no basis converged".into()))
}

/// Diagonalizes in the Laguerre basis at a given `kappa`.
pub fn diagonalize(spec: &PotentialSpec, basis_size: usize, kappa: f64) -> Result<DiagResult> {
    let n = basis_size;
    if n == 0 || !(kappa > 0.0) {
        return Err(Error::InvalidParameter("basis size and kappa must be positive".into()));
    }
    let quad = GaussLaguerre::new(QUADRATURE_NODES)?;
    let m = spec.mass_f64();
    let two_k = 2.0 * kappa;
    let norms: Vec<f64> = (0..n).map(|k| libm::sqrt(((k + 1) * (k + 2)) as f64 / (two_k * two_k * two_k))).collect();
    let mut h: Mat<f64> = Mat::zeros(n, n);
    let mut s: Mat<f64> = Mat::zeros(n, n);
    for (&x, &w) in quad.nodes.iter().zip(&quad.weights) {
        if w == 0.0 {
            continue;
        }
        let r = x / two_k;
        let l2 = laguerre_values(n, 2.0, x);
        let l3 = laguerre_values(n, 3.0, x);
        // psi_k = r L_k, psi'_k = e^(kappa r) d/dr (r L_k e^(-kappa r))
        let psi: Vec<f64> = (0..n).map(|k| r * l2[k] / norms[k]).collect();
        let dpsi: Vec<f64> = (0..n)
            .map(|k| {
                let dl = if k == 0 { 0.0 } else { -l3[k - 1] };
                (l2[k] + r * two_k * dl - kappa * r * l2[k]) / norms[k]
            })
            .collect();
        let v = spec.value(r);
        let wr = w / two_k;
        for i in 0..n {
            for j in i..n {
                h[(i, j)] += wr * (dpsi[i] * dpsi[j] / (2.0 * m) + v * psi[i] * psi[j]);
                s[(i, j)] += wr * psi[i] * psi[j];
            }
        }
    }
    for i in 0..n {
        for j in 0..i {
            h[(i, j)] = h[(j, i)];
            s[(i, j)] = s[(j, i)];
        }
    }
    let mut orth = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let want = if i == j { 1.0 } else { 0.0 };
            orth = orth.max((s[(i, j)] - want).abs());
        }
    }
    if orth > 1e-8 {
        return Err(Error::Quadrature(alloc::format!("basis overlap deviates from identity by {orth:e}")));
    }
    let (vals, vecs) = sym_eigen(&h);
    let mut coefficients: Vec<f64> = (0..n).map(|k| vecs[(k, 0)]).collect();
    // Q(r) = sum_k c_k r L_k(2 kappa r) / norm_k
    let mut poly = vec![0.0; n + 1];
    for (k, c) in coefficients.iter().enumerate() {
        for (i, a) in laguerre2_coefficients(k).iter().enumerate() {
            poly[i + 1] += c / norms[k] * a * libm::pow(two_k, i as f64);
        }
    }
    if poly[1] < 0.0 {
        for c in coefficients.iter_mut() {
            *c = -*c;
        }
        for c in poly.iter_mut() {
            *c = -*c;
        }
    }
    Ok(DiagResult { ground_energy: vals[0], kappa, basis_size: n, coefficients, poly, orthogonality_error: orth })
}

impl DiagResult {
    /// Polynomial factor of `u^(k) = e^(-kappa r) Q_k(r)`.
    fn deriv_poly(&self, k: u32) -> Vec<f64> {
        let mut q = self.poly.clone();
        for _ in 0..k {
            let mut next: Vec<f64> = q.iter().map(|c| -self.kappa * c).collect();
            for (i, c) in q.iter().enumerate().skip(1) {
                next[i - 1] += i as f64 * c;
            }
            q = next;
        }
        q
    }

    pub fn u(&self, r: f64) -> f64 {
        self.u_deriv(0, r)
    }

    /// `e^(kappa r) u^(k)(r)`, summed over the Laguerre basis. Expanding `Q`
    /// in monomials loses everything to cancellation at large `r`.
    fn scaled_deriv(&self, k: u32, r: f64) -> f64 {
        let two_k = 2.0 * self.kappa;
        let x = two_k * r;
        let n = self.coefficients.len();
        let k = k as usize;
        // lag[b][m] = L_m^(2+b)(x)
        let lag: Vec<Vec<f64>> = (0..=k).map(|b| laguerre_values(n, 2.0 + b as f64, x)).collect();
        // e^(x/2) d^j/dx^j [L_m^(2)(x) e^(-x/2)]
        let h = |j: usize, m: usize| -> f64 {
            let mut acc = 0.0;
            let mut binom = 1.0;
            for b in 0..=j.min(m) {
                let sign = if b % 2 == 0 { 1.0 } else { -1.0 };
                acc += binom * sign * lag[b][m - b] * libm::pow(-0.5, (j - b) as f64);
                binom = binom * (j - b) as f64 / (b + 1) as f64;
            }
            acc
        };
        let mut sum = 0.0;
        for (m, c) in self.coefficients.iter().enumerate() {
            let norm = libm::sqrt(((m + 1) * (m + 2)) as f64 / (two_k * two_k * two_k));
            let mut d = x * h(k, m);
            if k > 0 {
                d += k as f64 * h(k - 1, m);
            }
            sum += c / norm * d;
        }
        sum * libm::pow(two_k, k as f64 - 1.0)
    }

    pub fn u_deriv(&self, k: u32, r: f64) -> f64 {
        libm::exp(-self.kappa * r) * self.scaled_deriv(k, r)
    }

    /// `(u'(0), u'''(0))`.
    pub fn boundary_derivatives(&self) -> (f64, f64) {
        (self.deriv_poly(1)[0], self.deriv_poly(3)[0])
    }

    /// `int_0^inf u^(i) f(r) u^(j) dr` by quadrature.
    pub fn integral(&self, spec: &PotentialSpec, f: &FuncKey, i: u32, j: u32) -> Result<f64> {
        let quad = GaussLaguerre::new(QUADRATURE_NODES)?;
        Ok(self.integral_with(&quad, spec, f, i, j))
    }

    fn integral_with(&self, quad: &GaussLaguerre, spec: &PotentialSpec, f: &FuncKey, i: u32, j: u32) -> f64 {
        let two_k = 2.0 * self.kappa;
        quad.integrate(|x| {
            let r = x / two_k;
            self.scaled_deriv(i, r) * self.scaled_deriv(j, r) * spec.eval_function(f, r)
        }) / two_k
    }

    /// Moment variable `x(f, k) = int u f u^(k) dr`.
    pub fn moment(&self, spec: &PotentialSpec, f: &FuncKey, k: u32) -> Result<f64> {
        self.integral(spec, f, 0, k)
    }

    /// Moment variables for many keys with one quadrature rule.
    pub fn moments(&self, spec: &PotentialSpec, keys: &[(FuncKey, u32)]) -> Result<Vec<f64>> {
        let quad = GaussLaguerre::new(QUADRATURE_NODES)?;
        Ok(keys.iter().map(|(f, k)| self.integral_with(&quad, spec, f, 0, *k)).collect())
    }

    /// Anomaly `a_j = 1/2 u'(0) u^(2j+1)(0)`.
    pub fn anomaly(&self, j: usize) -> f64 {
        0.5 * self.deriv_poly(1)[0] * self.deriv_poly(2 * j as u32 + 1)[0]
    }

    /// `<H>` recomputed from the state, for consistency checks.
    pub fn energy_expectation(&self, spec: &PotentialSpec) -> Result<f64> {
        let quad = GaussLaguerre::new(QUADRATURE_NODES)?;
        let m = to_f64(&spec.mass);
        let two_k = 2.0 * self.kappa;
        Ok(quad.integrate(|x| {
            let r = x / two_k;
            let a = self.scaled_deriv(1, r);
            let b = self.scaled_deriv(0, r);
            a * a / (2.0 * m) + spec.value(r) * b * b
        }) / two_k)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn explicit_coefficients_match_recurrence() {
        for n in 0..8 {
            let c = laguerre2_coefficients(n);
            for &x in &[0.3f64, 1.7, 4.0] {
                let direct: f64 = c.iter().enumerate().map(|(i, a)| a * x.powi(i as i32)).sum();
                let rec = laguerre_values(n, 2.0, x)[n];
                assert!((direct - rec).abs() < 1e-10 * (1.0 + rec.abs()), "n={n} x={x}");
            }
        }
        assert_eq!(laguerre2_coefficients(0), vec![1.0]);
    }

    #[test]
    fn coulomb_is_exact_at_kappa_one() {
        let c = PotentialSpec::coulomb(1.0).unwrap();
        let d = diagonalize(&c, 16, 1.0).unwrap();
        assert!((d.ground_energy + 0.5).abs() < 1e-12);
        let (u1, _) = d.boundary_derivatives();
        assert!((u1 - 2.0).abs() < 1e-10);
        assert_eq!(d.u(0.0), 0.0);
        // <r> = 3/2, <1/r> = 1
        assert!((d.moment(&c, &FuncKey::r(2), 0).unwrap() - 1.5).abs() < 1e-10);
        assert!((d.moment(&c, &FuncKey::r(-2), 0).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn crude_estimates() {
        let c = PotentialSpec::coulomb(1.0).unwrap();
        let e = crude_estimate(&c).unwrap().energy;
        assert!((e + 0.5).abs() < 5e-3, "{e}");
        // the well binds only above b ~ 10.6
        let g = PotentialSpec::gaussian(12.0, 1.0).unwrap();
        assert!(crude_estimate(&g).unwrap().energy < 0.0);
        let g = PotentialSpec::gaussian(10.0, 1.0).unwrap();
        assert!(matches!(crude_estimate(&g), Err(Error::NoBoundState(_))));
        let y = PotentialSpec::yukawa(1.0, 0.05).unwrap();
        assert!(matches!(crude_estimate(&y), Err(Error::NoBoundState(_))));
    }
}
