//! Modulation parameters `(L, b)` under the resonant forcing `β(s) = −sin(4s)/(s log s)`.
//!
//! The implicit system
//!
//! ```text
//! L⁴ − b_s/4 + b²/4 + (L_s/L)(b/2) = 1 + β,    L_s/L + b = 0
//! ```
//!
//! is integrated in the explicit form `L_s = −bL`, `b_s = 4(L⁴ − b²/4 − 1 − β)`,
//! with `t_s = L²` carried as a third component.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::{find_step, integrate, DenseStep, StepControl};

type Step = DenseStep<3>;

/// Bounds on `L` outside of which a run is declared a blow-up.
pub const L_BOUNDS: (f64, f64) = (1e-4, 1e4);

/// `β(s) = −sin(4s)/(s log s)` for `s > 1`.
pub fn beta(s: f64) -> Result<f64> {
    if !(s > 1.0) {
        return Err(Error::Domain(format!("beta(s) requires s > 1, got {s}")));
    }
    Ok(beta_unchecked(s))
}

#[inline]
pub(crate) fn beta_unchecked(s: f64) -> f64 {
    -(4.0 * s).sin() / (s * s.ln())
}

/// `E(L, b) = (b²/4 + 1)/L² + L²`.
pub fn energy_e_lb(l: f64, b: f64) -> f64 {
    (0.25 * b * b + 1.0) / (l * l) + l * l
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Forcing {
    Resonant,
    Unforced,
}

impl Forcing {
    pub fn at(self, s: f64) -> f64 {
        match self {
            Forcing::Resonant => beta_unchecked(s),
            Forcing::Unforced => 0.0,
        }
    }
}

fn vector_field(forcing: Forcing) -> impl Fn(f64, &[f64; 3]) -> [f64; 3] {
    move |s, y| {
        let (l, b) = (y[0], y[1]);
        let l2 = l * l;
        [-b * l, 4.0 * (l2 * l2 - 0.25 * b * b - 1.0 - forcing.at(s)), l2]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryState {
    pub s: f64,
    pub l: f64,
    pub b: f64,
    pub t: f64,
    pub e: f64,
}

impl TrajectoryState {
    fn from_vec(s: f64, y: &[f64]) -> Self {
        Self { s, l: y[0], b: y[1], t: y[2], e: energy_e_lb(y[0], y[1]) }
    }
}

/// Accepted steps with continuous output for `s ↦ (L, b, t)` and its inverse in `t`.
#[derive(Debug, Clone)]
pub struct TrajectorySeries {
    pub forcing: Forcing,
    steps: Vec<Step>,
    end: TrajectoryState,
}

impl TrajectorySeries {
    /// States at every accepted step boundary, from `s0` to `s_end`.
    pub fn samples(&self) -> impl Iterator<Item = TrajectoryState> + '_ {
        self.steps.iter().map(|st| TrajectoryState::from_vec(st.s, st.start())).chain(std::iter::once(self.end))
    }

    pub fn n_steps(&self) -> usize {
        self.steps.len()
    }

    pub fn first(&self) -> TrajectoryState {
        TrajectoryState::from_vec(self.steps[0].s, self.steps[0].start())
    }

    pub fn last(&self) -> TrajectoryState {
        self.end
    }

    pub fn s_range(&self) -> (f64, f64) {
        (self.steps[0].s, self.end.s)
    }

    pub fn t_range(&self) -> (f64, f64) {
        (self.steps[0].start()[2], self.end.t)
    }

    fn step_at(&self, s: f64) -> Result<&Step> {
        let (lo, hi) = self.s_range();
        find_step(&self.steps, s).ok_or(Error::Range { value: s, lo, hi })
    }

    /// Continuous state at `s`.
    pub fn state_at(&self, s: f64) -> Result<TrajectoryState> {
        Ok(TrajectoryState::from_vec(s, &self.step_at(s)?.eval(s)))
    }

    /// `(L_s, b_s, t_s)` of the continuous output.
    pub fn derivative_at(&self, s: f64) -> Result<[f64; 3]> {
        Ok(self.step_at(s)?.eval_derivative(s))
    }

    /// Sub-sampled states with spacing at least `ds`, both endpoints included.
    pub fn thinned(&self, ds: f64) -> Vec<TrajectoryState> {
        let mut out = Vec::new();
        let mut next = f64::NEG_INFINITY;
        for st in self.samples() {
            if st.s >= next {
                out.push(st);
                next = st.s + ds;
            }
        }
        if out.last().map(|x| x.s) != Some(self.end.s) {
            out.push(self.end);
        }
        out
    }
}

fn check_inputs(s0: f64, init: (f64, f64), forcing: Forcing) -> Result<()> {
    if forcing == Forcing::Resonant && !(s0 > 1.0) {
        return Err(Error::Domain(format!("trajectory requires s0 > 1, got {s0}")));
    }
    if !(init.0 > 0.0) {
        return Err(Error::Domain(format!("L0 must be positive, got {}", init.0)));
    }
    Ok(())
}

fn guard(s: f64, y: &[f64; 3]) -> Result<()> {
    if !(y[0] > L_BOUNDS.0 && y[0] < L_BOUNDS.1) || !y.iter().all(|v| v.is_finite()) {
        return Err(Error::BlowUp { s, l: y[0] });
    }
    Ok(())
}

/// Integrate from `s0` to `s_end` starting at `(L0, b0)` with `t(s0) = s0`.
pub fn integrate_trajectory(
    s0: f64,
    s_end: f64,
    init: (f64, f64),
    forcing: Forcing,
    control: &StepControl,
) -> Result<TrajectorySeries> {
    check_inputs(s0, init, forcing)?;
    let mut steps = Vec::new();
    let mut end = [init.0, init.1, s0];
    integrate(vector_field(forcing), s0, [init.0, init.1, s0], s_end, control, |st, y| {
        guard(st.s_end(), y)?;
        steps.push(st);
        end = *y;
        Ok(())
    })?;
    Ok(TrajectorySeries { forcing, steps, end: TrajectoryState::from_vec(s_end, &end) })
}

/// Final state only, without storing the continuous output.
pub fn integrate_endpoint(
    s0: f64,
    s_end: f64,
    init: (f64, f64),
    forcing: Forcing,
    control: &StepControl,
) -> Result<TrajectoryState> {
    check_inputs(s0, init, forcing)?;
    let mut end = [init.0, init.1, s0];
    integrate(vector_field(forcing), s0, end, s_end, control, |st, y| {
        guard(st.s_end(), y)?;
        end = *y;
        Ok(())
    })?;
    Ok(TrajectoryState::from_vec(s_end, &end))
}

/// `s` with `t(s) = t`.
pub fn invert_time(series: &TrajectorySeries, t: f64) -> Result<f64> {
    let (lo, hi) = series.t_range();
    if !(t >= lo && t <= hi) {
        return Err(Error::Range { value: t, lo, hi });
    }
    if t == lo {
        return Ok(series.steps[0].s);
    }
    let steps = &series.steps;
    let idx = steps.partition_point(|st| st.start()[2] < t).max(1);
    let step = &steps[idx - 1];
    let (mut a, mut b) = (step.s, step.s_end());
    let ta = step.start()[2];
    let tb = if idx < steps.len() { steps[idx].start()[2] } else { series.end.t };
    // Secant start, then safeguarded Newton on the continuous output (t_s = L² > 0).
    let mut s = a + (b - a) * (t - ta) / (tb - ta);
    for _ in 0..60 {
        let y = step.eval(s);
        let f = y[2] - t;
        if f.abs() <= 1e-15 * t.abs().max(1.0) {
            break;
        }
        if f > 0.0 {
            b = s;
        } else {
            a = s;
        }
        let next = s - f / (y[0] * y[0]);
        s = if next > a && next < b { next } else { 0.5 * (a + b) };
        if b - a <= 1e-15 * s.abs() {
            break;
        }
    }
    Ok(s)
}

/// Residuals of the two implicit equations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImplicitResiduals {
    /// Largest absolute residuals at accepted samples.
    pub sample: [f64; 2],
    /// Largest residuals at step midpoints, relative to the summed magnitude of the
    /// terms. Measures the accuracy of the continuous output.
    pub midpoint: [f64; 2],
}

fn implicit_terms(forcing: Forcing, s: f64, y: &[f64; 3], d: &[f64; 3]) -> ([f64; 6], [f64; 2]) {
    let (l, b) = (y[0], y[1]);
    let (ls, bs) = (d[0], d[1]);
    ([l.powi(4), -bs / 4.0, b * b / 4.0, (ls / l) * (b / 2.0), -1.0, -forcing.at(s)], [ls / l, b])
}

pub fn implicit_residuals(series: &TrajectorySeries) -> ImplicitResiduals {
    let mut out = ImplicitResiduals { sample: [0.0; 2], midpoint: [0.0; 2] };
    let sum = |t: &[f64]| t.iter().sum::<f64>().abs();
    let rel = |t: &[f64]| sum(t) / t.iter().map(|x| x.abs()).sum::<f64>().max(1.0);
    for step in &series.steps {
        let (t1, t2) = implicit_terms(series.forcing, step.s, step.start(), &step.eval_derivative(step.s));
        out.sample[0] = out.sample[0].max(sum(&t1));
        out.sample[1] = out.sample[1].max(sum(&t2));
        let s = step.s + 0.5 * step.h;
        let (t1, t2) = implicit_terms(series.forcing, s, &step.eval(s), &step.eval_derivative(s));
        out.midpoint[0] = out.midpoint[0].max(rel(&t1));
        out.midpoint[1] = out.midpoint[1].max(rel(&t2));
    }
    out
}

/// Point on the unforced orbit of energy `max(log s0, 2)` reached after
/// flowing `(L0, 0)` for `θ = k · (π/2) / n_phases`.
///
/// Unforced orbits are isochronous with period `π/2`, so `k < n_phases` sweeps one orbit.
pub fn locked_initial_state(s0: f64, k: usize, n_phases: usize) -> Result<(f64, f64)> {
    let e0 = s0.ln().max(2.0);
    let l0 = (0.5 * (e0 + (e0 * e0 - 4.0).max(0.0).sqrt())).sqrt();
    if k == 0 {
        return Ok((l0, 0.0));
    }
    let theta = k as f64 * (PI / 2.0) / n_phases as f64;
    let control = StepControl { rtol: 1e-12, atol: 1e-14, ..StepControl::default() };
    let end = integrate_endpoint(0.0, theta, (l0, 0.0), Forcing::Unforced, &control)?;
    Ok((end.l, end.b))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseCandidate {
    pub k: usize,
    pub theta: f64,
    pub l0: f64,
    pub b0: f64,
    pub e_end: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseScan {
    pub best: usize,
    pub candidates: Vec<PhaseCandidate>,
}

/// Try every phase on the locked orbit and keep the one maximizing `E(s_end)`.
pub fn phase_scan(s0: f64, s_end: f64, n_phases: usize, control: &StepControl) -> Result<PhaseScan> {
    let candidates: Vec<PhaseCandidate> = (0..n_phases)
        .into_par_iter()
        .map(|k| {
            let (l0, b0) = locked_initial_state(s0, k, n_phases)?;
            let end = integrate_endpoint(s0, s_end, (l0, b0), Forcing::Resonant, control)?;
            Ok(PhaseCandidate { k, theta: k as f64 * (PI / 2.0) / n_phases as f64, l0, b0, e_end: end.e })
        })
        .collect::<Result<_>>()?;
    let best = candidates.iter().max_by(|a, b| a.e_end.total_cmp(&b.e_end)).map(|c| c.k).unwrap_or(0);
    Ok(PhaseScan { best, candidates })
}

/// Diagnostics of a forced run used by the acceptance gate and the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthDiagnostics {
    pub first_decade_max_e: f64,
    pub last_decade_min_e: f64,
    pub final_ratio_min: f64,
    pub final_ratio_max: f64,
    /// `max |t − s| / (log s)²`.
    pub b0_empirical: f64,
    /// Largest drop of windowed means of `E`, relative to `E`.
    pub windowed_drop: f64,
    pub implicit: ImplicitResiduals,
}

/// Summaries over the decades `[s0, 10 s0]` and `[s_end/10, s_end]`.
pub fn growth_diagnostics(series: &TrajectorySeries) -> GrowthDiagnostics {
    let (s0, s_end) = series.s_range();
    let mut d = GrowthDiagnostics {
        first_decade_max_e: f64::NEG_INFINITY,
        last_decade_min_e: f64::INFINITY,
        final_ratio_min: f64::INFINITY,
        final_ratio_max: f64::NEG_INFINITY,
        b0_empirical: 0.0,
        windowed_drop: 0.0,
        implicit: ImplicitResiduals { sample: [0.0; 2], midpoint: [0.0; 2] },
    };
    for st in series.samples() {
        if st.s <= 10.0 * s0 {
            d.first_decade_max_e = d.first_decade_max_e.max(st.e);
        }
        if st.s >= s_end / 10.0 {
            d.last_decade_min_e = d.last_decade_min_e.min(st.e);
            let r = st.e / st.s.ln();
            d.final_ratio_min = d.final_ratio_min.min(r);
            d.final_ratio_max = d.final_ratio_max.max(r);
        }
        d.b0_empirical = d.b0_empirical.max((st.t - st.s).abs() / st.s.ln().powi(2));
    }
    d.windowed_drop = windowed_mean_drop(series, PI / 2.0);
    d.implicit = implicit_residuals(series);
    d
}

/// Largest relative decrease between consecutive window means of `E` (windows of length `w`).
pub fn windowed_mean_drop(series: &TrajectorySeries, w: f64) -> f64 {
    let (s0, s_end) = series.s_range();
    let n_windows = ((s_end - s0) / w).floor() as usize;
    let per_window = 64;
    let mut prev: Option<f64> = None;
    let mut drop = 0.0f64;
    for k in 0..n_windows {
        let a = s0 + k as f64 * w;
        let mean = (0..per_window)
            .map(|i| {
                let s = a + (i as f64 + 0.5) * w / per_window as f64;
                series.state_at(s).map(|x| x.e).unwrap_or(f64::NAN)
            })
            .sum::<f64>()
            / per_window as f64;
        if let Some(p) = prev {
            drop = drop.max((p - mean) / mean);
        }
        prev = Some(mean);
    }
    drop
}
