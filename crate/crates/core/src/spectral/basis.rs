//! Radial eigenfunctions `h_n(r) = π^{-1/2} L_n(r²) e^{-r²/2}` of `H = −Δ + |x|²`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::quadrature::{planar_rule, QuadratureRule};
use crate::error::{Error, Result};

/// Truncation and quadrature size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasisSpec {
    pub n_modes: usize,
    pub quad_order: usize,
}

impl BasisSpec {
    /// `n_modes` modes with the default `4·n_modes` nodes.
    pub fn new(n_modes: usize) -> Self {
        Self { n_modes, quad_order: 4 * n_modes }
    }

    pub fn with_quad_order(n_modes: usize, quad_order: usize) -> Self {
        Self { n_modes, quad_order }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_modes == 0 {
            return Err(Error::Config("n_modes must be at least 1".into()));
        }
        if self.quad_order < 2 * self.n_modes {
            return Err(Error::Config(format!(
                "quad_order = {} is below 2 * n_modes = {}",
                self.quad_order,
                2 * self.n_modes
            )));
        }
        Ok(())
    }
}

/// `values[(n, j)] = h_n(r_j)` and `eigenvalues[n] = 4n + 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisTable {
    pub values: DMatrix<f64>,
    pub eigenvalues: Vec<f64>,
}

/// `L^{(alpha)}_k(u) e^{-u/2}` for `k = 0..count`, without overflow at large `u`.
pub fn scaled_laguerre_row(count: usize, alpha: f64, u: f64) -> Vec<f64> {
    const BIG: f64 = 1e150;
    let mut out = Vec::with_capacity(count);
    let mut log_scale = -0.5 * u;
    let mut prev = 0.0;
    let mut cur = 1.0;
    for k in 0..count {
        out.push(cur * log_scale.exp());
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0 + alpha - u) * cur - (kf + alpha) * prev) / (kf + 1.0);
        prev = cur;
        cur = next;
        if cur.abs().max(prev.abs()) > BIG {
            cur /= BIG;
            prev /= BIG;
            log_scale += BIG.ln();
        }
    }
    out
}

/// `h_n(r)` for `n < count`.
pub fn basis_row(count: usize, r: f64) -> Vec<f64> {
    let c = PI.sqrt().recip();
    scaled_laguerre_row(count, 0.0, r * r).into_iter().map(|v| c * v).collect()
}

/// Values and first two radial derivatives of `h_n` at `r`, plus `Δh_n`.
///
/// Uses `d/du L_n = −L^{(1)}_{n−1}` and `d²/du² L_n = L^{(2)}_{n−2}`.
pub fn basis_derivative_rows(count: usize, r: f64) -> DerivativeRows {
    let u = r * r;
    let c = PI.sqrt().recip();
    let l0 = scaled_laguerre_row(count, 0.0, u);
    let l1 = scaled_laguerre_row(count.saturating_sub(1), 1.0, u);
    let l2 = scaled_laguerre_row(count.saturating_sub(2), 2.0, u);
    let mut rows = DerivativeRows {
        value: Vec::with_capacity(count),
        d1: Vec::with_capacity(count),
        d2: Vec::with_capacity(count),
        laplacian: Vec::with_capacity(count),
    };
    for n in 0..count {
        let lp = if n >= 1 { -l1[n - 1] } else { 0.0 };
        let lpp = if n >= 2 { l2[n - 2] } else { 0.0 };
        let g = l0[n];
        let g1 = lp - 0.5 * g;
        let g2 = lpp - lp + 0.25 * g;
        rows.value.push(c * g);
        rows.d1.push(c * 2.0 * r * g1);
        rows.d2.push(c * (2.0 * g1 + 4.0 * u * g2));
        rows.laplacian.push(c * 4.0 * (u * g2 + g1));
    }
    rows
}

/// Per-mode samples returned by [`basis_derivative_rows`].
#[derive(Debug, Clone)]
pub struct DerivativeRows {
    pub value: Vec<f64>,
    pub d1: Vec<f64>,
    pub d2: Vec<f64>,
    pub laplacian: Vec<f64>,
}

/// Table and rule for the given truncation.
pub fn build_basis(spec: BasisSpec) -> Result<(BasisTable, QuadratureRule)> {
    spec.validate()?;
    let rule = planar_rule(spec.quad_order)?;
    let n = spec.n_modes;
    let mut values = DMatrix::<f64>::zeros(n, rule.len());
    for (j, &r) in rule.nodes.iter().enumerate() {
        for (k, v) in basis_row(n, r).into_iter().enumerate() {
            values[(k, j)] = v;
        }
    }
    let eigenvalues = (0..n).map(|k| 4.0 * k as f64 + 2.0).collect();
    Ok((BasisTable { values, eigenvalues }, rule))
}

/// Table, rule and the weighted analysis matrix, bundled for reuse.
#[derive(Debug, Clone)]
pub struct Basis {
    pub spec: BasisSpec,
    pub table: BasisTable,
    pub rule: QuadratureRule,
    /// `analysis[(n, j)] = ω_j h_n(r_j)`.
    pub analysis: DMatrix<f64>,
}

impl Basis {
    pub fn new(spec: BasisSpec) -> Result<Self> {
        let (table, rule) = build_basis(spec)?;
        let mut analysis = table.values.clone();
        for (j, w) in rule.weights.iter().enumerate() {
            analysis.column_mut(j).scale_mut(*w);
        }
        Ok(Self { spec, table, rule, analysis })
    }

    pub fn n_modes(&self) -> usize {
        self.spec.n_modes
    }

    pub fn n_nodes(&self) -> usize {
        self.rule.len()
    }

    /// Real coefficients from real grid samples.
    pub fn analyze_real(&self, grid: &DVector<f64>) -> Result<DVector<f64>> {
        if grid.len() != self.n_nodes() {
            return Err(Error::Shape { expected: self.n_nodes(), got: grid.len() });
        }
        Ok(&self.analysis * grid)
    }

    /// Real grid samples from real coefficients.
    pub fn synthesize_real(&self, coeffs: &DVector<f64>) -> Result<DVector<f64>> {
        if coeffs.len() != self.n_modes() {
            return Err(Error::Shape { expected: self.n_modes(), got: coeffs.len() });
        }
        Ok(self.table.values.tr_mul(coeffs))
    }

    /// Galerkin matrix `G[m, n] = ∫ f h_m h_n` of multiplication by grid samples `f`.
    pub fn galerkin(&self, grid: &DVector<f64>) -> DMatrix<f64> {
        let mut weighted = self.analysis.clone();
        for (j, f) in grid.iter().enumerate() {
            weighted.column_mut(j).scale_mut(*f);
        }
        &weighted * self.table.values.transpose()
    }

    /// Point evaluation of a real expansion.
    pub fn eval_real(&self, coeffs: &DVector<f64>, r: f64) -> f64 {
        basis_row(coeffs.len(), r).iter().zip(coeffs.iter()).map(|(h, c)| h * c).sum()
    }

    /// `(f, f_r, f_rr)` of a real expansion at `r`.
    pub fn eval_derivatives_real(&self, coeffs: &DVector<f64>, r: f64) -> [f64; 3] {
        let rows = basis_derivative_rows(coeffs.len(), r);
        let dot = |row: &[f64]| row.iter().zip(coeffs.iter()).map(|(h, c)| h * c).sum::<f64>();
        [dot(&rows.value), dot(&rows.d1), dot(&rows.d2)]
    }
}
