//! Linearization about the soliton: `H₊ = H + 3Q² − λ`, `H₋ = H + Q² − λ` and
//! `A = (H₊^{1/2} H₋ H₊^{1/2})^{1/2}`.

pub mod flow;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::soliton::{shifted_operator, SolitonProfile};
use crate::spectral::{apply_y2_real, Basis, SpectralField};

pub use flow::{energy_e, energy_e3, generator, linear_flow, norm_equivalence_constants, FlowState, LinearFlow};

/// Tolerance on `‖G − Gᵀ‖_max` of the assembled Galerkin matrices.
pub const ASYMMETRY_TOL: f64 = 1e-10;
/// `H₋` eigenvalues in `[−CLIP_TOL, 0)` are treated as discretization noise.
pub const CLIP_TOL: f64 = 1e-9;
/// `H₋` eigenvalues below `−CONSISTENCY_TOL` reject the system.
pub const CONSISTENCY_TOL: f64 = 1e-6;
/// Smallest admissible `|⟨Q², H₊^{−1/2}ψ_1⟩|`.
pub const RESONANCE_TOL: f64 = 1e-10;

/// Galerkin blocks of the linearized operator and functions of `H₊`.
#[derive(Debug, Clone)]
pub struct LinearizedSystem {
    pub lambda: f64,
    pub hp: DMatrix<f64>,
    pub hm: DMatrix<f64>,
    pub hp_eigs: Vec<f64>,
    pub hm_eigs: Vec<f64>,
    pub hp_half: DMatrix<f64>,
    pub hp_inv_half: DMatrix<f64>,
    pub hp_inv: DMatrix<f64>,
    hm_eigen: SymmetricEigen<f64, nalgebra::Dyn>,
}

fn sorted_eigen(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = m.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..m.nrows()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = DMatrix::from_fn(m.nrows(), m.ncols(), |r, c| eig.eigenvectors[(r, order[c])]);
    (vals, vecs)
}

/// `V f(Λ) Vᵀ`.
fn matrix_function(vals: &[f64], vecs: &DMatrix<f64>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let mut scaled = vecs.clone();
    for (j, &v) in vals.iter().enumerate() {
        scaled.column_mut(j).scale_mut(f(v));
    }
    scaled * vecs.transpose()
}

fn symmetrize(m: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let asym = (&m - m.transpose()).amax();
    if asym > ASYMMETRY_TOL {
        return Err(Error::Assembly { asymmetry: asym });
    }
    Ok((&m + m.transpose()) * 0.5)
}

/// Assemble `H₊`, `H₋` for the soliton `q`.
///
/// `H₊` inverse powers treat eigenvalues at roundoff level as zero (pseudo-inverse),
/// so the unperturbed `Q = 0, λ = 2` system can still be formed.
pub fn assemble_linearized(q: &SolitonProfile, basis: &Basis) -> Result<LinearizedSystem> {
    let grid = DVector::from_column_slice(&q.grid_values);
    if grid.len() != basis.n_nodes() {
        return Err(Error::Shape { expected: basis.n_nodes(), got: grid.len() });
    }
    let hp = symmetrize(shifted_operator(&grid, q.lambda, 3.0, basis))?;
    let hm = symmetrize(shifted_operator(&grid, q.lambda, 1.0, basis))?;
    let (hp_eigs, hp_vecs) = sorted_eigen(&hp);
    let hm_eigen = hm.clone().symmetric_eigen();
    let mut hm_eigs: Vec<f64> = hm_eigen.eigenvalues.iter().copied().collect();
    hm_eigs.sort_by(f64::total_cmp);
    let floor = 1e-12 * hp_eigs.last().copied().unwrap_or(1.0).abs().max(1.0);
    let inv = |p: f64, v: f64| if v > floor { v.powf(p) } else { 0.0 };
    Ok(LinearizedSystem {
        lambda: q.lambda,
        hp_half: matrix_function(&hp_eigs, &hp_vecs, |v| v.max(0.0).sqrt()),
        hp_inv_half: matrix_function(&hp_eigs, &hp_vecs, |v| inv(-0.5, v)),
        hp_inv: matrix_function(&hp_eigs, &hp_vecs, |v| inv(-1.0, v)),
        hp,
        hm,
        hp_eigs,
        hm_eigs,
        hm_eigen,
    })
}

impl LinearizedSystem {
    pub fn n_modes(&self) -> usize {
        self.hp.nrows()
    }

    /// `‖H₋ q‖_{L²}`.
    pub fn hm_residual(&self, q: &DVector<f64>) -> f64 {
        (&self.hm * q).norm()
    }

    /// `H₋^{1/2}` after clipping roundoff-negative eigenvalues.
    pub fn hm_half(&self) -> Result<DMatrix<f64>> {
        let e = &self.hm_eigen;
        let min = e.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        if min < -CONSISTENCY_TOL {
            return Err(Error::SpectralConsistency { eigenvalue: min });
        }
        let vals: Vec<f64> = e.eigenvalues.iter().copied().collect();
        Ok(matrix_function(&vals, &e.eigenvectors, |v| v.max(0.0).sqrt()))
    }
}

/// `A` with ascending eigenvalues `μ_n` and eigenvectors `ψ_n` (columns).
#[derive(Debug, Clone)]
pub struct AOperator {
    pub matrix: DMatrix<f64>,
    pub mu: Vec<f64>,
    pub psi: DMatrix<f64>,
}

impl AOperator {
    pub fn psi_n(&self, n: usize) -> DVector<f64> {
        self.psi.column(n).into_owned()
    }
}

/// Build `A` from the singular value decomposition of `H₋^{1/2} H₊^{1/2}`.
///
/// `A² = H₊^{1/2} H₋ H₊^{1/2} = (H₋^{1/2}H₊^{1/2})ᵀ(H₋^{1/2}H₊^{1/2})`, so the singular
/// values are `μ_n` and the right singular vectors are `ψ_n`. This keeps `μ_0`
/// accurate to roundoff relative to `μ_max`, instead of its square root.
pub fn build_a_operator(sys: &LinearizedSystem) -> Result<AOperator> {
    let n = sys.n_modes();
    let product = sys.hm_half()? * &sys.hp_half;
    let svd = product.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]));
    let mu: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let mut psi = DMatrix::from_fn(n, n, |r, c| v_t[(order[c], r)]);
    for c in 0..n {
        let mut pivot = psi[(c, c)];
        if pivot == 0.0 {
            pivot = psi.column(c).iter().copied().find(|x| *x != 0.0).unwrap_or(1.0);
        }
        if pivot < 0.0 {
            psi.column_mut(c).neg_mut();
        }
    }
    let matrix = matrix_function(&mu, &psi, |v| v);
    Ok(AOperator { matrix: (&matrix + matrix.transpose()) * 0.5, mu, psi })
}

/// `ρ = H₊^{−1}Q` and the resonance coefficient `α`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResonanceData {
    pub rho: SpectralField,
    pub alpha: f64,
    pub rho_q_inner: f64,
    /// `⟨Q², H₊^{−1/2}ψ_1⟩`.
    pub denominator: f64,
    /// `⟨H₊^{−1/2}(|y|²Q − αQ²), ψ_1⟩`.
    pub orthogonality_residual: f64,
}

/// Coefficients of `Q²` on the truncated span.
pub fn q_squared(q: &SolitonProfile, basis: &Basis) -> DVector<f64> {
    let grid = DVector::from_iterator(q.grid_values.len(), q.grid_values.iter().map(|x| x * x));
    &basis.analysis * grid
}

/// `α = ⟨|y|²Q, H₊^{−1/2}ψ_1⟩ / ⟨Q², H₊^{−1/2}ψ_1⟩`.
pub fn compute_resonance(
    sys: &LinearizedSystem,
    a_op: &AOperator,
    q: &SolitonProfile,
    basis: &Basis,
) -> Result<ResonanceData> {
    let qc = q.coeffs();
    let yq = apply_y2_real(&qc);
    let q2 = q_squared(q, basis);
    let g = &sys.hp_inv_half * a_op.psi_n(1);
    let denominator = q2.dot(&g);
    if !(denominator.abs() >= RESONANCE_TOL) {
        return Err(Error::ResonanceDegeneracy { denominator });
    }
    let alpha = yq.dot(&g) / denominator;
    let source = &yq - &q2 * alpha;
    let orthogonality_residual = (&sys.hp_inv_half * source).dot(&a_op.psi_n(1));
    let rho = &sys.hp_inv * &qc;
    Ok(ResonanceData {
        rho_q_inner: rho.dot(&qc),
        rho: SpectralField::from_real(&rho),
        alpha,
        denominator,
        orthogonality_residual,
    })
}

/// One row of the spectrum report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumRow {
    pub n: usize,
    pub lambda_p: f64,
    pub lambda_m: f64,
    pub mu: f64,
    pub gap_to_4n: f64,
}

pub fn spectrum_rows(sys: &LinearizedSystem, a_op: &AOperator) -> Vec<SpectrumRow> {
    (0..sys.n_modes())
        .map(|n| SpectrumRow {
            n,
            lambda_p: sys.hp_eigs[n],
            lambda_m: sys.hm_eigs[n],
            mu: a_op.mu[n],
            gap_to_4n: a_op.mu[n] - 4.0 * n as f64,
        })
        .collect()
}

/// Largest `|μ_n − 4n|` over `n ≤ n_max`.
pub fn max_gap(a_op: &AOperator, n_max: usize) -> f64 {
    a_op.mu.iter().take(n_max + 1).enumerate().map(|(n, m)| (m - 4.0 * n as f64).abs()).fold(0.0, f64::max)
}

/// The zero-soliton system at `λ = 2`, where every block equals `diag(4n)`.
pub fn unperturbed_profile(basis: &Basis) -> SolitonProfile {
    SolitonProfile {
        lambda: 2.0,
        field: SpectralField::zeros(basis.n_modes()),
        grid_values: vec![0.0; basis.n_nodes()],
        residual: 0.0,
    }
}
