//! Ground states `Q_λ > 0` of `HQ + Q³ = λQ` and the small-amplitude branch near `λ = 2`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{norm_hxr_real, Basis, SpectralField};

/// Newton budget.
pub const MAX_NEWTON: usize = 200;
const FLOW_STEPS: usize = 400;
const FLOW_TAU: f64 = 0.05;
const FLOW_EXIT: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolitonProfile {
    pub lambda: f64,
    pub field: SpectralField,
    /// Grid values at the rule nodes.
    pub grid_values: Vec<f64>,
    /// `‖HQ + Q³ − λQ‖_{L²}` on the truncated span.
    pub residual: f64,
}

impl SolitonProfile {
    pub fn coeffs(&self) -> DVector<f64> {
        self.field.re()
    }

    pub fn l2_norm(&self) -> f64 {
        self.field.norm_hxr(0.0)
    }

    pub fn epsilon(&self) -> f64 {
        self.lambda - 2.0
    }

    pub fn min_grid_value(&self) -> f64 {
        self.grid_values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// `F(c) = Hc + P(q³) − λc`, returned with the grid values of `q`.
fn residual_vector(c: &DVector<f64>, lambda: f64, basis: &Basis) -> (DVector<f64>, DVector<f64>) {
    let q = basis.table.values.tr_mul(c);
    let q3 = q.map(|x| x * x * x);
    let mut f = &basis.analysis * q3;
    for n in 0..c.len() {
        f[n] += (4.0 * n as f64 + 2.0 - lambda) * c[n];
    }
    (f, q)
}

/// `J(u) = ½‖u‖²_{H¹} − (λ/2)‖u‖²_{L²} + ¼‖u‖⁴_{L⁴}` for real coefficients.
pub fn functional_j(c: &DVector<f64>, lambda: f64, basis: &Basis) -> f64 {
    let q = basis.table.values.tr_mul(c);
    let l4 = basis.rule.integrate(q.map(|x| x.powi(4)).as_slice());
    0.5 * norm_hxr_real(c, 1.0).powi(2) - 0.5 * lambda * c.norm_squared() + 0.25 * l4
}

/// `diag(4n+2−λ) + k·G[q²]`.
pub fn shifted_operator(q_grid: &DVector<f64>, lambda: f64, k: f64, basis: &Basis) -> DMatrix<f64> {
    let mut m = basis.galerkin(&q_grid.map(|x| k * x * x));
    for n in 0..m.nrows() {
        m[(n, n)] += 4.0 * n as f64 + 2.0 - lambda;
    }
    m
}

/// Solve for `Q_λ` by a semi-implicit gradient flow on `J` followed by Newton.
pub fn solve_soliton(lambda: f64, tol: f64, basis: &Basis) -> Result<SolitonProfile> {
    if !(lambda > 2.0) {
        return Err(Error::NoSoliton { lambda });
    }
    if !(tol > 0.0) {
        return Err(Error::Config(format!("soliton tolerance must be positive, got {tol}")));
    }
    let n = basis.n_modes();
    let eps = lambda - 2.0;
    let mut c = DVector::<f64>::zeros(n);
    c[0] = (2.0 * PI * eps).sqrt();

    // Stage 1: descend J, projecting onto |Q| to stay in the positive basin.
    for _ in 0..FLOW_STEPS {
        let (f, q) = residual_vector(&c, lambda, basis);
        if f.norm() <= FLOW_EXIT * c.norm().max(1e-300) {
            break;
        }
        let q3 = q.map(|x| x * x * x);
        let explicit = &c * (1.0 + FLOW_TAU * lambda) - (&basis.analysis * q3) * FLOW_TAU;
        c = DVector::from_fn(n, |k, _| explicit[k] / (1.0 + FLOW_TAU * (4.0 * k as f64 + 2.0)));
        let abs_q = basis.table.values.tr_mul(&c).map(f64::abs);
        c = &basis.analysis * abs_q;
    }

    // Stage 2: damped Newton with Jacobian H + 3Q² − λ.
    let (mut f, mut q) = residual_vector(&c, lambda, basis);
    let mut res = f.norm();
    let mut iterations = 0;
    while res > tol {
        if iterations >= MAX_NEWTON {
            return Err(Error::SolverFailure { iterations, residual: res });
        }
        iterations += 1;
        let jac = shifted_operator(&q, lambda, 3.0, basis);
        let step = jac.lu().solve(&f).ok_or(Error::SolverFailure { iterations, residual: res })?;
        let mut damping = 1.0;
        loop {
            let trial = &c - &step * damping;
            let (ft, qt) = residual_vector(&trial, lambda, basis);
            let rt = ft.norm();
            if rt < res {
                c = trial;
                f = ft;
                q = qt;
                res = rt;
                break;
            }
            damping *= 0.5;
            if damping < 1e-4 {
                // No descent direction left: the roundoff floor sits above `tol`.
                return Err(Error::SolverFailure { iterations, residual: res });
            }
        }
    }

    let profile = SolitonProfile {
        lambda,
        field: SpectralField::from_real(&c),
        grid_values: q.iter().copied().collect(),
        residual: res,
    };
    if c[0] <= 0.0 || functional_j(&c, lambda, basis) >= 0.0 {
        return Err(Error::SolverFailure { iterations, residual: res });
    }
    Ok(profile)
}

/// `∂_λ Q = H₊^{−1} Q`.
pub fn soliton_derivative(q: &SolitonProfile, hp: &DMatrix<f64>) -> Result<SpectralField> {
    let eig_min = hp.clone().symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min);
    if !(eig_min > 1e-10) {
        return Err(Error::Degeneracy { eigenvalue: eig_min });
    }
    let chol = hp.clone().cholesky().ok_or(Error::Degeneracy { eigenvalue: eig_min })?;
    Ok(SpectralField::from_real(&chol.solve(&q.coeffs())))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BifurcationSample {
    pub epsilon: f64,
    pub l2_norm: f64,
    /// `ε^{−1/2} Q_{2+ε}`.
    pub rescaled_profile: SpectralField,
    /// `‖ε^{−1/2}Q − √(2π)h_0‖_{H¹} / √(2π)`.
    pub h1_deviation: f64,
}

/// Solve along `λ = 2 + ε` and compare with the linear limit `√(2πε) h_0`.
pub fn bifurcation_scan(eps_list: &[f64], tol: f64, basis: &Basis) -> Result<Vec<BifurcationSample>> {
    if let Some(&bad) = eps_list.iter().find(|e| !(**e > 0.0)) {
        return Err(Error::NoSoliton { lambda: 2.0 + bad });
    }
    let mut eps: Vec<f64> = eps_list.to_vec();
    eps.sort_by(f64::total_cmp);
    let limit = (2.0 * PI).sqrt();
    eps.iter()
        .map(|&e| {
            let q = solve_soliton(2.0 + e, tol, basis)?;
            let rescaled = q.coeffs() / e.sqrt();
            let mut diff = rescaled.clone();
            diff[0] -= limit;
            Ok(BifurcationSample {
                epsilon: e,
                l2_norm: q.l2_norm(),
                rescaled_profile: SpectralField::from_real(&rescaled),
                h1_deviation: norm_hxr_real(&diff, 1.0) / limit,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupNormRow {
    pub k: usize,
    pub sup: f64,
    /// `sup / √ε`.
    pub ratio: f64,
}

/// Radius beyond which sup-norm sampling stops.
pub const SUP_RADIUS: f64 = 10.0;
const SUP_SAMPLES: usize = 2001;

/// `sup_r |∂_r^k Q|` for `k ≤ k_max ≤ 2`, sampled on a uniform radial grid.
pub fn sup_norm_report(q: &SolitonProfile, k_max: usize, basis: &Basis) -> Result<Vec<SupNormRow>> {
    if k_max > 2 {
        return Err(Error::Config(format!("k_max = {k_max} exceeds 2")));
    }
    let c = q.coeffs();
    let mut sup = [0.0f64; 3];
    for i in 0..SUP_SAMPLES {
        let r = SUP_RADIUS * i as f64 / (SUP_SAMPLES - 1) as f64;
        let d = basis.eval_derivatives_real(&c, r);
        for k in 0..=k_max {
            sup[k] = sup[k].max(d[k].abs());
        }
    }
    let root_eps = q.epsilon().max(0.0).sqrt();
    Ok((0..=k_max).map(|k| SupNormRow { k, sup: sup[k], ratio: sup[k] / root_eps }).collect())
}
