use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::basis::Basis;
use crate::error::{Error, Result};

/// Complex coefficients against `h_0..h_{N−1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralField {
    pub coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn zeros(n: usize) -> Self {
        Self { coeffs: vec![Complex64::new(0.0, 0.0); n] }
    }

    /// `e_k` in an `n`-mode basis.
    pub fn unit(n: usize, k: usize) -> Self {
        let mut f = Self::zeros(n);
        f.coeffs[k] = Complex64::new(1.0, 0.0);
        f
    }

    pub fn from_real(re: &DVector<f64>) -> Self {
        Self { coeffs: re.iter().map(|&x| Complex64::new(x, 0.0)).collect() }
    }

    pub fn from_parts(re: &DVector<f64>, im: &DVector<f64>) -> Self {
        Self { coeffs: re.iter().zip(im.iter()).map(|(&a, &b)| Complex64::new(a, b)).collect() }
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn re(&self) -> DVector<f64> {
        DVector::from_iterator(self.len(), self.coeffs.iter().map(|c| c.re))
    }

    pub fn im(&self) -> DVector<f64> {
        DVector::from_iterator(self.len(), self.coeffs.iter().map(|c| c.im))
    }

    /// `(Σ (4n+2)^r |α_n|²)^{1/2}`.
    pub fn norm_hxr(&self, r: f64) -> f64 {
        norm_hxr_parts(self.coeffs.iter().map(|c| c.norm_sqr()), r)
    }

    /// `α_n ↦ (4n+2) α_n`.
    pub fn apply_h(&self) -> Self {
        let coeffs = self.coeffs.iter().enumerate().map(|(n, c)| c * (4.0 * n as f64 + 2.0)).collect();
        Self { coeffs }
    }

    /// Multiplication by `|y|²`, truncated to the input length.
    pub fn apply_y2(&self) -> Self {
        self.apply_y2_with_overflow().0
    }

    /// Multiplication by `|y|²` together with the dropped `h_N` coefficient.
    pub fn apply_y2_with_overflow(&self) -> (Self, Complex64) {
        let n = self.len();
        let mut out = vec![Complex64::new(0.0, 0.0); n + 1];
        for (k, c) in self.coeffs.iter().enumerate() {
            let kf = k as f64;
            out[k] += c * (2.0 * kf + 1.0);
            out[k + 1] -= c * (kf + 1.0);
            if k > 0 {
                out[k - 1] -= c * kf;
            }
        }
        let overflow = out.pop().unwrap_or_default();
        (Self { coeffs: out }, overflow)
    }

    /// `Σ conj(f_n) g_n`.
    pub fn inner(&self, other: &Self) -> Complex64 {
        self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a.conj() * b).sum()
    }
}

pub(crate) fn norm_hxr_parts(sq: impl Iterator<Item = f64>, r: f64) -> f64 {
    sq.enumerate().map(|(n, a)| (4.0 * n as f64 + 2.0).powf(r) * a).sum::<f64>().sqrt()
}

/// `H_x^r` norm of a real coefficient vector.
pub fn norm_hxr_real(c: &DVector<f64>, r: f64) -> f64 {
    norm_hxr_parts(c.iter().map(|x| x * x), r)
}

/// `H_x^r` norm of the complex field `a + i b`.
pub fn norm_hxr_pair(a: &DVector<f64>, b: &DVector<f64>, r: f64) -> f64 {
    norm_hxr_parts(a.iter().zip(b.iter()).map(|(x, y)| x * x + y * y), r)
}

/// Truncated `|y|²` action on a real vector.
pub fn apply_y2_real(c: &DVector<f64>) -> DVector<f64> {
    let n = c.len();
    DVector::from_fn(n, |m, _| {
        let mf = m as f64;
        let mut v = (2.0 * mf + 1.0) * c[m];
        if m > 0 {
            v -= mf * c[m - 1];
        }
        if m + 1 < n {
            v -= (mf + 1.0) * c[m + 1];
        }
        v
    })
}

/// Truncated action of the dilation generator `r ∂_r` on a real vector.
///
/// `r ∂_r h_n = (n+1) h_{n+1} − h_n − n h_{n−1}`.
pub fn apply_dilation_real(c: &DVector<f64>) -> DVector<f64> {
    let n = c.len();
    DVector::from_fn(n, |m, _| {
        let mf = m as f64;
        let mut v = -c[m];
        if m > 0 {
            v += mf * c[m - 1];
        }
        if m + 1 < n {
            v -= (mf + 1.0) * c[m + 1];
        }
        v
    })
}

/// Coefficients `α_n = Σ_j ω_j f(r_j) h_n(r_j)`.
pub fn analyze(grid: &[Complex64], basis: &Basis) -> Result<SpectralField> {
    if grid.len() != basis.n_nodes() {
        return Err(Error::Shape { expected: basis.n_nodes(), got: grid.len() });
    }
    let re = DVector::from_iterator(grid.len(), grid.iter().map(|z| z.re));
    let im = DVector::from_iterator(grid.len(), grid.iter().map(|z| z.im));
    Ok(SpectralField::from_parts(&basis.analyze_real(&re)?, &basis.analyze_real(&im)?))
}

/// Samples `Σ α_n h_n(r_j)` at the rule nodes.
pub fn synthesize(field: &SpectralField, basis: &Basis) -> Result<Vec<Complex64>> {
    let re = basis.synthesize_real(&field.re())?;
    let im = basis.synthesize_real(&field.im())?;
    Ok(re.iter().zip(im.iter()).map(|(&a, &b)| Complex64::new(a, b)).collect())
}

/// `analyze(a · b · conj(c))`.
pub fn cubic(a: &SpectralField, b: &SpectralField, c: &SpectralField, basis: &Basis) -> Result<SpectralField> {
    let ga = synthesize(a, basis)?;
    let gb = synthesize(b, basis)?;
    let gc = synthesize(c, basis)?;
    let prod: Vec<Complex64> = ga.iter().zip(&gb).zip(&gc).map(|((x, y), z)| x * y * z.conj()).collect();
    analyze(&prod, basis)
}

/// Constructive split used in the interpolation estimate
/// `‖u‖²_{H^s} ≤ ε‖u‖²_{H^r} + (4N_ε+2)^s ‖u‖²_{L²}` for `0 ≤ s < r`.
///
/// Returns the smallest `N_ε` with `(4n+2)^{s−r} ≤ ε` for every `n > N_ε`.
pub fn interpolation_cutoff(eps: f64, r: f64, s: f64) -> usize {
    assert!(eps > 0.0 && r > s && s >= 0.0);
    // (4n+2)^{s−r} ≤ ε  ⇔  4n+2 ≥ ε^{−1/(r−s)}
    let threshold = eps.powf(-1.0 / (r - s));
    let n = ((threshold - 2.0) / 4.0).ceil().max(0.0) as usize;
    n.saturating_sub(1)
}
