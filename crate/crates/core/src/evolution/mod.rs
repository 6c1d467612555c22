//! Remainder equation for `w = v − Q` and its backward integration from `w(M) = 0`.
//!
//! In real form with `I(a, b) = (b, −a)`:
//!
//! `∂_s w = ℒw + I K(s) w + I R(s) + I N(w)`, where `K = β(|y|² − αQ)`,
//! `R = (β(|y|²Q − αQ²), 0)` and `N = 2Q|w|² + Qw² + w|w|²`.

mod backward;
mod limit;
mod remainder;

use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::linearized::{
    assemble_linearized, build_a_operator, compute_resonance, generator, q_squared, AOperator, FlowState, LinearFlow,
    LinearizedSystem, ResonanceData,
};
use crate::soliton::{solve_soliton, SolitonProfile};
use crate::spectral::{apply_y2_real, Basis, BasisSpec};
use crate::trajectory::Forcing;

pub use backward::{
    backward_integrate, forward_integrate, BackwardRun, PerturbationState, RunLedger, SampleRow, StepOptions,
};
pub use limit::{cauchy_gap, interpolate_run, limit_perturbation, LimitPerturbation};
pub use remainder::{compute_remainder, energy_growth, remainder_series, EnergyGrowth, RemainderTerm};

/// Everything the vector field needs, fixed for a given soliton.
#[derive(Debug, Clone)]
pub struct EvolutionContext {
    pub basis: Basis,
    pub soliton: SolitonProfile,
    pub sys: LinearizedSystem,
    pub a_op: AOperator,
    pub resonance: ResonanceData,
    pub forcing: Forcing,
    pub flow: LinearFlow,
    q: DVector<f64>,
    q_grid: DVector<f64>,
    /// Galerkin matrix of multiplication by `Q`.
    gq: DMatrix<f64>,
    /// `|y|²Q − αQ²`.
    phi0: DVector<f64>,
}

impl EvolutionContext {
    pub fn new(
        basis: Basis,
        soliton: SolitonProfile,
        sys: LinearizedSystem,
        a_op: AOperator,
        resonance: ResonanceData,
        forcing: Forcing,
    ) -> Self {
        let q = soliton.coeffs();
        let q_grid = DVector::from_column_slice(&soliton.grid_values);
        let gq = basis.galerkin(&q_grid);
        let phi0 = apply_y2_real(&q) - q_squared(&soliton, &basis) * resonance.alpha;
        let flow = LinearFlow::new(&sys, &a_op);
        Self { basis, soliton, sys, a_op, resonance, forcing, flow, q, q_grid, gq, phi0 }
    }

    /// Solve for `Q_{2+ε}` and build the full context at `n_modes`.
    pub fn build(epsilon: f64, n_modes: usize, tol: f64, forcing: Forcing) -> Result<Self> {
        Self::on_basis(Basis::new(BasisSpec::new(n_modes))?, epsilon, tol, forcing)
    }

    pub fn on_basis(basis: Basis, epsilon: f64, tol: f64, forcing: Forcing) -> Result<Self> {
        let soliton = solve_soliton(2.0 + epsilon, tol, &basis)?;
        let sys = assemble_linearized(&soliton, &basis)?;
        let a_op = build_a_operator(&sys)?;
        let resonance = compute_resonance(&sys, &a_op, &soliton, &basis)?;
        Ok(Self::new(basis, soliton, sys, a_op, resonance, forcing))
    }

    /// Same operators, different forcing.
    pub fn with_forcing(&self, forcing: Forcing) -> Self {
        Self { forcing, ..self.clone() }
    }

    pub fn n_modes(&self) -> usize {
        self.q.len()
    }

    pub fn alpha(&self) -> f64 {
        self.resonance.alpha
    }

    pub fn q(&self) -> &DVector<f64> {
        &self.q
    }

    /// `|y|²Q − αQ²`.
    pub fn source_profile(&self) -> &DVector<f64> {
        &self.phi0
    }

    pub fn beta(&self, s: f64) -> f64 {
        self.forcing.at(s)
    }

    /// `K w = β(|y|²w − αQw)` on one real component.
    fn apply_k(&self, beta: f64, c: &DVector<f64>) -> DVector<f64> {
        if beta == 0.0 {
            return DVector::zeros(c.len());
        }
        (apply_y2_real(c) - &self.gq * c * self.alpha()) * beta
    }

    /// Real and imaginary parts of `N(w)`.
    pub fn nonlinearity(&self, w: &FlowState) -> (DVector<f64>, DVector<f64>) {
        let n = w.len();
        // Both components go through each transform together.
        let pair = DMatrix::from_fn(n, 2, |i, c| if c == 0 { w.w1[i] } else { w.w2[i] });
        let mut grid = self.basis.table.values.tr_mul(&pair);
        for j in 0..grid.nrows() {
            let (q, x, y) = (self.q_grid[j], grid[(j, 0)], grid[(j, 1)]);
            let m = x * x + y * y;
            grid[(j, 0)] = 2.0 * q * m + q * (x * x - y * y) + x * m;
            grid[(j, 1)] = 2.0 * q * x * y + y * m;
        }
        let out = &self.basis.analysis * grid;
        (out.column(0).into_owned(), out.column(1).into_owned())
    }

    /// Non-`ℒ` part of the vector field: `I(Kw + R + N)`.
    pub fn forcing_part(&self, s: f64, w: &FlowState) -> FlowState {
        let beta = self.beta(s);
        let (n1, n2) = self.nonlinearity(w);
        let k1 = self.apply_k(beta, &w.w1);
        let k2 = self.apply_k(beta, &w.w2);
        FlowState { w1: k2 + n2, w2: -(k1 + n1 + &self.phi0 * beta) }
    }

    /// Linear-in-`w` part `ℒw + IKw + IR` of the vector field.
    pub fn linear_part(&self, s: f64, w: &FlowState) -> FlowState {
        let beta = self.beta(s);
        let g = generator(w, &self.sys);
        let k1 = self.apply_k(beta, &w.w1);
        let k2 = self.apply_k(beta, &w.w2);
        FlowState { w1: g.w1 + k2, w2: g.w2 - k1 - &self.phi0 * beta }
    }

    /// `⟨w₁, Q⟩ + ½‖w‖²_{L²}`, which vanishes when `‖Q + w‖ = ‖Q‖`.
    pub fn quadratic_identity(&self, w: &FlowState) -> f64 {
        w.w1.dot(&self.q) + 0.5 * (w.w1.norm_squared() + w.w2.norm_squared())
    }

    /// `(‖Q + w‖² − ‖Q‖²)/‖Q‖²`.
    pub fn l2_drift(&self, w: &FlowState) -> f64 {
        2.0 * self.quadratic_identity(w) / self.q.norm_squared()
    }
}

/// Full vector field of the remainder equation.
pub fn rhs_w(s: f64, state: &FlowState, ctx: &EvolutionContext) -> FlowState {
    let g = generator(state, &ctx.sys);
    let f = ctx.forcing_part(s, state);
    FlowState { w1: g.w1 + f.w1, w2: g.w2 + f.w2 }
}
