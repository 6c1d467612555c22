//! The physical solution `u = e^{−iλs} S_L(e^{−ib|y|²/4} v)` and the potential
//! `V = −α L^{−2} β(s) Q(x/L)`, with all norms evaluated by scaling identities in the `v` frame.

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::LimitPerturbation;
use crate::linearized::FlowState;
use crate::spectral::{apply_dilation_real, apply_y2_real, basis_row, norm_hxr_pair, Basis};
use crate::trajectory::{beta, invert_time, TrajectorySeries, TrajectoryState};

/// Pieces of `‖u‖²_{H¹} = ‖xu‖² + ‖∇u‖²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModulatedNorm {
    pub total: f64,
    pub x_part: f64,
    pub grad_part: f64,
}

/// `‖y v‖²` on the truncated span.
fn y_norm2(c: &DVector<f64>) -> f64 {
    c.dot(&apply_y2_real(c))
}

/// Exact `H¹` norm of `S_L(e^{−ib|y|²/4} v)` for `v = v₁ + i v₂`.
///
/// With `D = 1 + y·∇` (antisymmetric), `‖∇(e^{−ib|y|²/4}v)‖² = ‖∇v‖² + (b²/4)‖yv‖² − 2b⟨v₁, D v₂⟩`.
pub fn modulated_h1_norm(v: &FlowState, l: f64, b: f64) -> ModulatedNorm {
    let y2 = y_norm2(&v.w1) + y_norm2(&v.w2);
    let grad = norm_hxr_pair(&v.w1, &v.w2, 1.0).powi(2) - y2;
    let d = apply_dilation_real(&v.w2) + &v.w2;
    let cross = v.w1.dot(&d);
    let x_part = l * l * y2;
    let grad_part = (grad + 0.25 * b * b * y2 - 2.0 * b * cross) / (l * l);
    ModulatedNorm { total: (x_part + grad_part).max(0.0).sqrt(), x_part, grad_part }
}

/// Point value of `u(t, x)` at radius `r` for phase offset `λs`.
pub fn reconstruct_u(v: &FlowState, state: &TrajectoryState, lambda: f64, r: f64) -> Complex64 {
    let y = r / state.l;
    let row = basis_row(v.len(), y);
    let re: f64 = row.iter().zip(v.w1.iter()).map(|(h, c)| h * c).sum();
    let im: f64 = row.iter().zip(v.w2.iter()).map(|(h, c)| h * c).sum();
    let phase = Complex64::from_polar(1.0, -lambda * state.s - 0.25 * state.b * y * y);
    phase * Complex64::new(re, im) / state.l
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthSample {
    pub t: f64,
    pub s: f64,
    pub l: f64,
    pub b: f64,
    pub e_lb: f64,
    pub norm_u_hx1: f64,
    pub norm_u0_hx1: f64,
    /// Exact when `resolved`; otherwise the bound `√(2E)·B/(s log s)`.
    pub norm_u1_hx1: f64,
    pub ratio: f64,
    /// Whether `s` lies inside the computed perturbation.
    pub resolved: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PotentialSample {
    pub t: f64,
    pub v_l2: f64,
    pub v_hx1: f64,
    pub dv_dt_l2: f64,
}

/// `40` points per decade from `t_lo` to `t_hi`, both ends included.
pub fn log_grid(t_lo: f64, t_hi: f64, per_decade: usize) -> Result<Vec<f64>> {
    if !(t_lo > 0.0 && t_hi > t_lo) {
        return Err(Error::Domain(format!("log grid needs 0 < {t_lo} < {t_hi}")));
    }
    let (a, b) = (t_lo.log10(), t_hi.log10());
    let n = ((b - a) * per_decade as f64).ceil() as usize;
    Ok((0..=n).map(|k| if k == n { t_hi } else { 10f64.powf(a + (b - a) * k as f64 / n as f64) }).collect())
}

/// Bubble-frame data shared by the reports.
#[derive(Debug, Clone)]
pub struct BubbleData {
    pub q: DVector<f64>,
    pub lambda: f64,
    pub alpha: f64,
    /// `‖yQ‖²`, `‖∇Q‖²`, `‖Q‖²`.
    pub y2: f64,
    pub grad2: f64,
    pub mass: f64,
}

impl BubbleData {
    pub fn new(q: DVector<f64>, lambda: f64, alpha: f64) -> Self {
        let y2 = y_norm2(&q);
        let grad2 = crate::spectral::norm_hxr_real(&q, 1.0).powi(2) - y2;
        let mass = q.norm_squared();
        Self { q, lambda, alpha, y2, grad2, mass }
    }
}

fn check_t(series: &TrajectorySeries, t: f64) -> Result<()> {
    let (lo, hi) = series.t_range();
    if !(t >= lo && t <= hi) {
        return Err(Error::Range { value: t, lo, hi });
    }
    Ok(())
}

/// `‖u(t)‖_{H¹}` along the trajectory.
///
/// Beyond the computed range of `w` the remainder is replaced by the bootstrap bound and
/// `u` by the bubble.
pub fn growth_report(
    series: &TrajectorySeries,
    w_limit: &LimitPerturbation,
    bubble: &BubbleData,
    b_bound: f64,
    t_grid: &[f64],
) -> Result<Vec<GrowthSample>> {
    let (w_lo, w_hi) = w_limit.s_range();
    let n = bubble.q.len();
    let q_state = FlowState::new(bubble.q.clone(), DVector::zeros(n));
    t_grid
        .iter()
        .map(|&t| {
            check_t(series, t)?;
            let s = invert_time(series, t)?;
            let st = series.state_at(s)?;
            let u0 = modulated_h1_norm(&q_state, st.l, st.b).total;
            let resolved = s >= w_lo && s <= w_hi;
            let (u, u1) = if resolved {
                let w = w_limit.at(s)?.w;
                let v = w.axpy(1.0, &q_state);
                (modulated_h1_norm(&v, st.l, st.b).total, modulated_h1_norm(&w, st.l, st.b).total)
            } else {
                (u0, (2.0 * st.e).sqrt() * b_bound / (s * s.ln()))
            };
            Ok(GrowthSample {
                t,
                s,
                l: st.l,
                b: st.b,
                e_lb: st.e,
                norm_u_hx1: u,
                norm_u0_hx1: u0,
                norm_u1_hx1: u1,
                ratio: u * u / t.ln(),
                resolved,
            })
        })
        .collect()
}

/// `⟨S_{L₁}Q, S_{L₂}Q⟩ = (L₁/L₂) ∫ Q(y) Q(L₁y/L₂) dy` on the basis rule.
fn scaled_overlap(q: &DVector<f64>, l1: f64, l2: f64, basis: &Basis) -> f64 {
    let k = l1 / l2;
    let q_grid = basis.table.values.tr_mul(q);
    let mut acc = 0.0;
    for (j, &r) in basis.rule.nodes.iter().enumerate() {
        let qs: f64 = basis_row(q.len(), k * r).iter().zip(q.iter()).map(|(h, c)| h * c).sum();
        acc += basis.rule.weights[j] * q_grid[j] * qs;
    }
    k * acc
}

/// `(c, L)` with `V(t) = c · S_L Q`, i.e. `c = −αβ(s)/L`.
fn potential_factor(series: &TrajectorySeries, alpha: f64, t: f64) -> Result<(f64, f64)> {
    let s = invert_time(series, t)?;
    let st = series.state_at(s)?;
    Ok((-alpha * beta(s)? / st.l, st.l))
}

/// `‖V‖_{L²}`, `‖V‖_{H¹}` and a central-difference `‖∂_t V‖_{L²}` with `δt = 1e-3`.
pub fn potential_report(
    series: &TrajectorySeries,
    bubble: &BubbleData,
    basis: &Basis,
    t_grid: &[f64],
) -> Result<Vec<PotentialSample>> {
    const DT: f64 = 1e-3;
    let (lo, hi) = series.t_range();
    t_grid
        .iter()
        .map(|&t| {
            check_t(series, t)?;
            let (c, l) = potential_factor(series, bubble.alpha, t)?;
            let v_l2 = c.abs() * bubble.mass.sqrt();
            let v_hx1 = c.abs() * (l * l * bubble.y2 + bubble.grad2 / (l * l)).sqrt();
            let (ta, tb) = ((t - DT).max(lo), (t + DT).min(hi));
            let (ca, la) = potential_factor(series, bubble.alpha, ta)?;
            let (cb, lb) = potential_factor(series, bubble.alpha, tb)?;
            let cross = scaled_overlap(&bubble.q, la, lb, basis);
            let diff2 = (ca * ca + cb * cb) * bubble.mass - 2.0 * ca * cb * cross;
            Ok(PotentialSample { t, v_l2, v_hx1, dv_dt_l2: diff2.max(0.0).sqrt() / (tb - ta) })
        })
        .collect()
}

/// Largest `(v_l2, dv_dt_l2)` over one period of `|sin 4s|` centred at `s(t)`.
pub fn potential_envelope(series: &TrajectorySeries, bubble: &BubbleData, basis: &Basis, t: f64) -> Result<(f64, f64)> {
    let s_c = invert_time(series, t)?;
    let (s_lo, s_hi) = series.s_range();
    let quarter = std::f64::consts::FRAC_PI_8;
    let ts: Vec<f64> = (0..=64)
        .map(|k| (s_c - quarter + 2.0 * quarter * k as f64 / 64.0).clamp(s_lo, s_hi))
        .map(|s| series.state_at(s).map(|st| st.t))
        .collect::<Result<_>>()?;
    let rows = potential_report(series, bubble, basis, &ts)?;
    Ok(rows.iter().fold((0.0f64, 0.0f64), |acc, r| (acc.0.max(r.v_l2), acc.1.max(r.dv_dt_l2))))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthSummary {
    /// `max/min` of `‖u‖²/log t` over the final decade of `t`.
    pub ratio_band: f64,
    pub ratio_min: f64,
    pub ratio_max: f64,
    /// Last-decade minimum of `‖u‖` exceeds its first-decade maximum.
    pub growth_certified: bool,
    /// Largest `‖u₁‖/‖u₀‖` beyond the first decade.
    pub remainder_fraction: f64,
    /// Envelope decay factors of `‖V‖` and `‖∂_t V‖` from `t = 10²` to `10³`.
    pub v_decay: f64,
    pub dv_decay: f64,
    pub v_decay_certified: bool,
}

/// Summary over a growth report; `v_decay` fields are filled by the caller.
pub fn summarize_growth(rows: &[GrowthSample]) -> GrowthSummary {
    let t0 = rows.first().map(|r| r.t).unwrap_or(1.0);
    let t1 = rows.last().map(|r| r.t).unwrap_or(1.0);
    let first: Vec<&GrowthSample> = rows.iter().filter(|r| r.t <= 10.0 * t0).collect();
    let last: Vec<&GrowthSample> = rows.iter().filter(|r| r.t >= t1 / 10.0).collect();
    let ratio_min = last.iter().map(|r| r.ratio).fold(f64::INFINITY, f64::min);
    let ratio_max = last.iter().map(|r| r.ratio).fold(0.0, f64::max);
    let first_max = first.iter().map(|r| r.norm_u_hx1).fold(0.0, f64::max);
    let last_min = last.iter().map(|r| r.norm_u_hx1).fold(f64::INFINITY, f64::min);
    let remainder_fraction =
        rows.iter().filter(|r| r.t > 10.0 * t0).map(|r| r.norm_u1_hx1 / r.norm_u0_hx1).fold(0.0, f64::max);
    GrowthSummary {
        ratio_band: ratio_max / ratio_min,
        ratio_min,
        ratio_max,
        growth_certified: last_min > first_max,
        remainder_fraction,
        v_decay: f64::NAN,
        dv_decay: f64::NAN,
        v_decay_certified: false,
    }
}
