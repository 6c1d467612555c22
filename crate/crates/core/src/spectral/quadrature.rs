//! Gauss–Laguerre quadrature in the variable `u = r²`.
//!
//! For radial `f` on ℝ², `∫ f dx = π ∫₀^∞ f(√u) du`. The rule stores the
//! weights with the Laguerre weight `e^{-u}` folded back in, so that
//! `Σ ω_j f(r_j)` approximates the planar integral directly. Large nodes carry
//! weights `w_j e^{u_j}` that would overflow if formed naively; they are built
//! from the scaled Laguerre functions `L_n(u) e^{-u/2}` in log space instead.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Nodes and planar weights for radial integrals on ℝ².
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    /// Radii `r_j > 0`, ascending.
    pub nodes: Vec<f64>,
    /// Positive weights with `Σ_j ω_j f(r_j) ≈ ∫_{ℝ²} f`.
    pub weights: Vec<f64>,
    /// `u_j = r_j²`.
    pub u: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Planar integral of grid samples.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        self.weights.iter().zip(values).map(|(w, f)| w * f).sum()
    }

    /// Planar integral of a radial function given as a closure of `r`.
    pub fn integrate_fn(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.weights.iter().zip(&self.nodes).map(|(w, &r)| w * f(r)).sum()
    }
}

/// Scaled three-term recurrence for generalized Laguerre polynomials.
///
/// Returns `(p_n, p_{n-1}, log_scale)` with `L^{(a)}_k(u) = p_k · e^{log_scale}`.
/// Renormalizes whenever the iterates leave a safe magnitude band.
pub(crate) fn laguerre_scaled(n: usize, alpha: f64, u: f64) -> (f64, f64, f64) {
    const BIG: f64 = 1e150;
    let mut log_scale = 0.0;
    let mut prev = 0.0;
    let mut cur = 1.0;
    for k in 0..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0 + alpha - u) * cur - (kf + alpha) * prev) / (kf + 1.0);
        prev = cur;
        cur = next;
        let m = cur.abs().max(prev.abs());
        if m > BIG {
            prev /= BIG;
            cur /= BIG;
            log_scale += BIG.ln();
        }
    }
    (cur, prev, log_scale)
}

/// Gauss–Laguerre nodes `u_j` and scaled weights `w_j e^{u_j}` of the given order.
///
/// Nodes come from the Golub–Welsch eigenvalue problem and are polished by
/// Newton's method on the three-term recurrence.
pub fn gauss_laguerre(order: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if order == 0 {
        return Err(Error::Config("quadrature order must be positive".into()));
    }
    let mut jacobi = DMatrix::<f64>::zeros(order, order);
    for k in 0..order {
        jacobi[(k, k)] = 2.0 * k as f64 + 1.0;
        if k + 1 < order {
            let off = -(k as f64 + 1.0);
            jacobi[(k, k + 1)] = off;
            jacobi[(k + 1, k)] = off;
        }
    }
    let mut nodes: Vec<f64> = jacobi.symmetric_eigenvalues().iter().copied().collect();
    nodes.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"));

    let n = order as f64;
    let mut weights = Vec::with_capacity(order);
    for u in nodes.iter_mut() {
        for _ in 0..4 {
            let (p, q, _) = laguerre_scaled(order, 0.0, *u);
            // u L_n' = n (L_n − L_{n−1})
            let dp = n * (p - q) / *u;
            if dp == 0.0 {
                break;
            }
            let step = p / dp;
            *u -= step;
            if step.abs() <= 1e-16 * u.abs() {
                break;
            }
        }
        let (p, q, log_scale) = laguerre_scaled(order, 0.0, *u);
        let next = ((2.0 * n + 1.0 - *u) * p - n * q) / (n + 1.0);
        let log_scaled_fn = next.abs().ln() + log_scale - 0.5 * *u;
        weights.push(*u / ((n + 1.0) * (n + 1.0)) * (-2.0 * log_scaled_fn).exp());
    }
    Ok((nodes, weights))
}

/// Planar rule of the given order.
pub fn planar_rule(order: usize) -> Result<QuadratureRule> {
    let (u, scaled) = gauss_laguerre(order)?;
    let nodes = u.iter().map(|x| x.sqrt()).collect();
    let weights = scaled.iter().map(|w| PI * w).collect();
    Ok(QuadratureRule { nodes, weights, u })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn low_order_matches_closed_form() {
        // Two-point rule: nodes 2 ∓ √2.
        let (u, w) = gauss_laguerre(2).unwrap();
        let s2 = 2f64.sqrt();
        assert!((u[0] - (2.0 - s2)).abs() < 1e-14);
        assert!((u[1] - (2.0 + s2)).abs() < 1e-14);
        let w0 = (2.0 + s2) / 4.0 * u[0].exp();
        assert!((w[0] - w0).abs() < 1e-13 * w0);
    }

    #[test]
    fn integrates_moments_exactly() {
        let (u, w) = gauss_laguerre(20).unwrap();
        // ∫ u^k e^{-u} = k!
        let mut fact = 1.0;
        for k in 0..20 {
            if k > 0 {
                fact *= k as f64;
            }
            let q: f64 = u.iter().zip(&w).map(|(x, wx)| wx * (-x).exp() * x.powi(k)).sum();
            assert!((q - fact).abs() < 1e-11 * fact, "k={k}: {q} vs {fact}");
        }
    }

    #[test]
    fn large_order_weights_are_finite() {
        let (u, w) = gauss_laguerre(512).unwrap();
        assert!(w.iter().all(|x| x.is_finite() && *x > 0.0));
        let total: f64 = u.iter().zip(&w).map(|(x, wx)| wx * (-x).exp()).sum();
        assert!((total - 1.0).abs() < 1e-10);
    }

    #[test]
    fn gaussian_planar_integral() {
        let rule = planar_rule(16).unwrap();
        let v = rule.integrate_fn(|r| (-r * r).exp());
        assert!((v - PI).abs() < 1e-12, "{}", v - PI);
    }

    #[test]
    fn zero_order_rejected() {
        assert!(gauss_laguerre(0).is_err());
    }
}
