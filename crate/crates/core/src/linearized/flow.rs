//! Exact linear flow `exp(sℒ)` for `ℒ(u₁, u₂) = (H₋u₂, −H₊u₁)` and its preserved energies.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{AOperator, LinearizedSystem};
use crate::spectral::norm_hxr_pair;

/// Real and imaginary parts of a perturbation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowState {
    pub w1: DVector<f64>,
    pub w2: DVector<f64>,
}

impl FlowState {
    pub fn zeros(n: usize) -> Self {
        Self { w1: DVector::zeros(n), w2: DVector::zeros(n) }
    }

    pub fn new(w1: DVector<f64>, w2: DVector<f64>) -> Self {
        assert_eq!(w1.len(), w2.len());
        Self { w1, w2 }
    }

    pub fn len(&self) -> usize {
        self.w1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w1.is_empty()
    }

    pub fn norm_hxr(&self, r: f64) -> f64 {
        norm_hxr_pair(&self.w1, &self.w2, r)
    }

    pub fn is_finite(&self) -> bool {
        self.w1.iter().chain(self.w2.iter()).all(|x| x.is_finite())
    }

    /// `self + k·other`.
    pub fn axpy(&self, k: f64, other: &Self) -> Self {
        Self { w1: &self.w1 + &other.w1 * k, w2: &self.w2 + &other.w2 * k }
    }

    pub fn scale(&self, k: f64) -> Self {
        Self { w1: &self.w1 * k, w2: &self.w2 * k }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.axpy(-1.0, other)
    }

    /// Stacked `(w₁, w₂)` of length `2N`.
    pub fn stacked(&self) -> DVector<f64> {
        let n = self.len();
        DVector::from_fn(2 * n, |i, _| if i < n { self.w1[i] } else { self.w2[i - n] })
    }

    pub fn from_stacked(v: &DVector<f64>) -> Self {
        let n = v.len() / 2;
        Self { w1: v.rows(0, n).into_owned(), w2: v.rows(n, n).into_owned() }
    }
}

pub(crate) fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// Precomputed factors of `exp(sℒ)` in the eigenbasis of `A`.
#[derive(Debug, Clone)]
pub struct LinearFlow {
    mu: Vec<f64>,
    /// `ψᵀ H₊^{1/2}`.
    to_a: DMatrix<f64>,
    /// `ψᵀ H₊^{−1/2}`.
    to_c: DMatrix<f64>,
    /// `H₊^{−1/2} ψ`.
    from_1: DMatrix<f64>,
    /// `H₊^{1/2} ψ`.
    from_2: DMatrix<f64>,
}

impl LinearFlow {
    pub fn new(sys: &LinearizedSystem, a_op: &AOperator) -> Self {
        let psi_t = a_op.psi.transpose();
        Self {
            mu: a_op.mu.clone(),
            to_a: &psi_t * &sys.hp_half,
            to_c: &psi_t * &sys.hp_inv_half,
            from_1: &sys.hp_inv_half * &a_op.psi,
            from_2: &sys.hp_half * &a_op.psi,
        }
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    /// `exp(sℒ)` applied to `state`.
    pub fn apply(&self, state: &FlowState, s: f64) -> FlowState {
        let a = &self.to_a * &state.w1;
        let c = &self.to_c * &state.w2;
        let n = self.mu.len();
        let mut x1 = DVector::zeros(n);
        let mut x2 = DVector::zeros(n);
        for k in 0..n {
            let m = self.mu[k];
            let (sin, cos) = (s * m).sin_cos();
            x1[k] = cos * a[k] + m * sin * c[k];
            x2[k] = -s * sinc(s * m) * a[k] + cos * c[k];
        }
        FlowState { w1: &self.from_1 * x1, w2: &self.from_2 * x2 }
    }

    /// Dense `2N × 2N` matrix of `exp(sℒ)` acting on stacked states.
    pub fn step_matrix(&self, s: f64) -> DMatrix<f64> {
        let n = self.mu.len();
        let diag = |f: &dyn Fn(f64) -> f64| DMatrix::from_diagonal(&DVector::from_fn(n, |k, _| f(self.mu[k])));
        let cos = diag(&|m| (s * m).cos());
        let msin = diag(&|m| m * (s * m).sin());
        let ssinc = diag(&|m| -s * sinc(s * m));
        let b11 = &self.from_1 * &cos * &self.to_a;
        let b12 = &self.from_1 * &msin * &self.to_c;
        let b21 = &self.from_2 * &ssinc * &self.to_a;
        let b22 = &self.from_2 * &cos * &self.to_c;
        let mut out = DMatrix::zeros(2 * n, 2 * n);
        out.view_mut((0, 0), (n, n)).copy_from(&b11);
        out.view_mut((0, n), (n, n)).copy_from(&b12);
        out.view_mut((n, 0), (n, n)).copy_from(&b21);
        out.view_mut((n, n), (n, n)).copy_from(&b22);
        out
    }
}

/// `exp(sℒ) state`, building the factorization on the fly.
pub fn linear_flow(state: &FlowState, s: f64, sys: &LinearizedSystem, a_op: &AOperator) -> FlowState {
    LinearFlow::new(sys, a_op).apply(state, s)
}

/// `ℒ state = (H₋w₂, −H₊w₁)`.
pub fn generator(state: &FlowState, sys: &LinearizedSystem) -> FlowState {
    FlowState { w1: &sys.hm * &state.w2, w2: -(&sys.hp * &state.w1) }
}

/// `E = ½⟨H₊u₁,u₁⟩ + ½⟨H₋u₂,u₂⟩`.
pub fn energy_e(state: &FlowState, sys: &LinearizedSystem) -> f64 {
    0.5 * state.w1.dot(&(&sys.hp * &state.w1)) + 0.5 * state.w2.dot(&(&sys.hm * &state.w2))
}

/// `𝓔 = ½⟨H₊H₋H₊u₁,u₁⟩ + ½⟨H₋H₊H₋u₂,u₂⟩`.
pub fn energy_e3(state: &FlowState, sys: &LinearizedSystem) -> f64 {
    let p1 = &sys.hp * &state.w1;
    let m2 = &sys.hm * &state.w2;
    0.5 * p1.dot(&(&sys.hm * &p1)) + 0.5 * m2.dot(&(&sys.hp * &m2))
}

/// Extreme ratios of `𝓔(u) + E(u) + ⟨u₂,ρ⟩²` to `‖u‖²_{H³}` over the truncated span.
pub fn norm_equivalence_constants(sys: &LinearizedSystem, rho: &DVector<f64>) -> (f64, f64) {
    let n = sys.n_modes();
    let d = DVector::from_fn(n, |k, _| (4.0 * k as f64 + 2.0).powf(-1.5));
    let scale = |m: DMatrix<f64>| {
        let mut m = m;
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] *= d[i] * d[j];
            }
        }
        (&m + m.transpose()) * 0.5
    };
    let b1 = (&sys.hp * &sys.hm * &sys.hp + &sys.hp) * 0.5;
    let b2 = (&sys.hm * &sys.hp * &sys.hm + &sys.hm) * 0.5 + rho * rho.transpose();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for b in [b1, b2] {
        for v in scale(b).symmetric_eigenvalues().iter() {
            lo = lo.min(*v);
            hi = hi.max(*v);
        }
    }
    (lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linearized::{assemble_linearized, build_a_operator, compute_resonance};
    use crate::soliton::solve_soliton;
    use crate::spectral::{Basis, BasisSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup(n: usize) -> (LinearizedSystem, AOperator, DVector<f64>, DVector<f64>) {
        let basis = Basis::new(BasisSpec::new(n)).unwrap();
        let q = solve_soliton(2.05, 1e-12, &basis).unwrap();
        let sys = assemble_linearized(&q, &basis).unwrap();
        let a = build_a_operator(&sys).unwrap();
        let res = compute_resonance(&sys, &a, &q, &basis).unwrap();
        (sys, a, q.coeffs(), res.rho.re())
    }

    fn random_state(n: usize, rng: &mut ChaCha8Rng) -> FlowState {
        // Decaying coefficients keep H³ norms moderate.
        let mut v = || DVector::from_fn(n, |k, _| rng.random_range(-1.0..1.0) / (1.0 + k as f64).powi(3));
        FlowState::new(v(), v())
    }

    #[test]
    fn identity_at_zero() {
        let (sys, a, _, _) = setup(24);
        let flow = LinearFlow::new(&sys, &a);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u = random_state(24, &mut rng);
        assert!(flow.apply(&u, 0.0).sub(&u).norm_hxr(0.0) < 1e-12);
    }

    #[test]
    fn kernel_direction_is_fixed() {
        let (sys, a, q, _) = setup(32);
        let u = FlowState::new(DVector::zeros(32), q.clone());
        for s in [0.5, 3.0, 17.0] {
            let v = linear_flow(&u, s, &sys, &a);
            assert!(v.sub(&u).norm_hxr(0.0) < 1e-9 * q.norm());
        }
    }

    #[test]
    fn group_property_and_generator() {
        let (sys, a, _, _) = setup(32);
        let flow = LinearFlow::new(&sys, &a);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let u = random_state(32, &mut rng);
        let lhs = flow.apply(&u, 1.7);
        let rhs = flow.apply(&flow.apply(&u, 0.4), 1.3);
        assert!(lhs.sub(&rhs).norm_hxr(0.0) < 1e-8 * u.norm_hxr(0.0));
        let d = 1e-6;
        let fd = flow.apply(&u, d).sub(&flow.apply(&u, -d)).scale(0.5 / d);
        let g = generator(&u, &sys);
        assert!(fd.sub(&g).norm_hxr(0.0) <= 1e-5 * g.norm_hxr(0.0).max(1.0));
    }

    #[test]
    fn step_matrix_matches_apply() {
        let (sys, a, _, _) = setup(16);
        let flow = LinearFlow::new(&sys, &a);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = random_state(16, &mut rng);
        let m = flow.step_matrix(0.37);
        let v = FlowState::from_stacked(&(m * u.stacked()));
        assert!(v.sub(&flow.apply(&u, 0.37)).norm_hxr(0.0) < 1e-12);
    }

    #[test]
    fn energies_conserved() {
        let (sys, a, _, _) = setup(32);
        let flow = LinearFlow::new(&sys, &a);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        assert_eq!(energy_e(&FlowState::zeros(32), &sys), 0.0);
        for _ in 0..5 {
            let u = random_state(32, &mut rng);
            let (e, e3) = (energy_e(&u, &sys), energy_e3(&u, &sys));
            for s in [0.1, 1.0, 10.0] {
                let v = flow.apply(&u, s);
                assert!((energy_e(&v, &sys) - e).abs() <= 1e-8 * e);
                assert!((energy_e3(&v, &sys) - e3).abs() <= 1e-8 * e3);
            }
        }
    }

    #[test]
    fn norm_equivalence_is_two_sided() {
        let (sys, _, _, rho) = setup(32);
        let (c, cc) = norm_equivalence_constants(&sys, &rho);
        assert!(c > 0.0 && cc.is_finite() && cc >= c);
    }
}
