//! Gauss-Laguerre quadrature, `int_0^inf g(x) e^-x dx ~ sum w_i g(x_i)`.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::real::{Dd, Real};

#[derive(Clone, Debug, PartialEq)]
pub struct GaussLaguerre {
    pub nodes: Vec<f64>,
    /// Weights including the factor `e^-x`.
    pub weights: Vec<f64>,
}

/// `(L_n(x), L_{n-1}(x))` by the three-term recurrence.
fn laguerre_pair(n: usize, x: Dd) -> (Dd, Dd) {
    let mut p0 = Dd::one();
    let mut p1 = Dd::zero();
    for j in 0..n {
        let p2 = p1;
        p1 = p0;
        let jf = Dd::from_usize(j);
        let j1 = Dd::from_usize(j + 1);
        p0 = ((Dd::from_usize(2 * j + 1) - x) * p1 - jf * p2) / j1;
    }
    (p0, p1)
}

impl GaussLaguerre {
    /// Nodes by Newton iteration from asymptotic initial guesses.
    pub fn new(n: usize) -> Result<Self> {
        let mut nodes = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        let nf = n as f64;
        let mut z = 0.0;
        for i in 0..n {
            z = match i {
                0 => 3.0 / (1.0 + 2.4 * nf),
                1 => z + 15.0 / (1.0 + 2.5 * nf),
                _ => {
                    let ai = (i - 1) as f64;
                    z + (1.0 + 2.55 * ai) / (1.9 * ai) * (z - nodes[i - 2])
                }
            };
            let mut converged = false;
            let mut zd = Dd::from_f64(z);
            let ndd = Dd::from_usize(n);
            for _ in 0..100 {
                let (p, pm1) = laguerre_pair(n, zd);
                let deriv = ndd * (p - pm1) / zd;
                let z1 = z;
                zd = zd - p / deriv;
                z = zd.to_f64();
                if converged {
                    break;
                }
                // one more step once close, since convergence is quadratic
                converged = (z - z1).abs() <= 1e-9 * z.abs();
            }
            if !converged {
                return Err(Error::Quadrature(alloc::format!("Laguerre node {i} of {n} did not converge")));
            }
            let (_, pm1) = laguerre_pair(n, zd);
            // w_i = 1 / (x_i L_n'(x_i)^2) with x L_n' = -n L_{n-1} at a root
            let w = if pm1.to_f64().abs() < 1e100 {
                (zd / (ndd * ndd * pm1 * pm1)).to_f64()
            } else {
                let p = pm1.to_f64();
                z / nf / p / (nf * p)
            };
            nodes.push(z);
            weights.push(w);
        }
        for w in 1..n {
            if nodes[w] <= nodes[w - 1] {
                return Err(Error::Quadrature("Laguerre nodes out of order".into()));
            }
        }
        Ok(GaussLaguerre { nodes, weights })
    }

    pub fn integrate(&self, mut g: impl FnMut(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| if w == 0.0 { 0.0 } else { w * g(x) }).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_polynomials_and_exponentials() {
        let q = GaussLaguerre::new(40).unwrap();
        // int x^5 e^-x = 120
        assert!((q.integrate(|x| x.powi(5)) - 120.0).abs() < 1e-10);
        let q = GaussLaguerre::new(200).unwrap();
        assert!((q.integrate(|_| 1.0) - 1.0).abs() < 1e-13);
        // int e^-2x = 1/2 under weight e^-x
        assert!((q.integrate(|x| (-x).exp()) - 0.5).abs() < 1e-13);
        assert!((q.integrate(|x| x.powi(10)) - 3628800.0).abs() / 3628800.0 < 1e-12);
    }
}
