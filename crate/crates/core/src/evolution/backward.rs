//! Strang-split constant-step integration of the remainder equation.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::EvolutionContext;
use crate::error::{Error, Result};
use crate::linearized::FlowState;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepOptions {
    /// Nominal step; the actual step divides `M − s0` evenly.
    pub ds: f64,
    /// Store every `sample_every`-th state.
    pub sample_every: usize,
    /// Halved-step comparison every `richardson_every` steps (0 disables).
    pub richardson_every: usize,
    /// Bootstrap constant `B`; runs abort once `‖w‖_{H³} > abort_factor·B/(s log s)`.
    pub bootstrap: Option<f64>,
    pub abort_factor: f64,
}

impl Default for StepOptions {
    fn default() -> Self {
        Self {
            ds: 1e-2_f64.min(std::f64::consts::PI / 32.0),
            sample_every: 10,
            richardson_every: 1000,
            bootstrap: None,
            abort_factor: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationState {
    pub s: f64,
    pub w: FlowState,
}

/// One row of the per-sample CSV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleRow {
    pub s: f64,
    pub norm_l2: f64,
    pub norm_hx1: f64,
    pub norm_hx3: f64,
    pub s_logs_scaled_hx3: f64,
}

/// JSON summary of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunLedger {
    #[serde(rename = "M")]
    pub m: f64,
    pub s0: f64,
    #[serde(rename = "B")]
    pub b: Option<f64>,
    pub bound_stat: f64,
    pub l2_drift: f64,
    pub l2_drift_per_100: f64,
    pub quad_identity_max: f64,
    pub richardson_max: f64,
    pub n_steps: usize,
    pub samples_path: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackwardRun {
    pub m: f64,
    pub s0: f64,
    pub ds: f64,
    pub n_steps: usize,
    /// Ordered by decreasing `s`, starting with `w(M) = 0`.
    pub samples: Vec<PerturbationState>,
    /// `sup s log s ‖w(s)‖_{H³}` over the samples.
    pub bound_stat: f64,
    /// `max |‖Q + w‖² − ‖Q‖²| / ‖Q‖²`.
    pub l2_drift: f64,
    /// Largest change of the relative mass over any 100-unit window.
    pub l2_drift_per_100: f64,
    /// `max |⟨w₁, Q⟩ + ½‖w‖²|`.
    pub quad_identity_max: f64,
    /// Largest Richardson error estimate in `H³` from the halved-step checks.
    pub richardson_max: f64,
    pub bootstrap: Option<f64>,
}

impl BackwardRun {
    pub fn sample_rows(&self) -> Vec<SampleRow> {
        self.samples
            .iter()
            .map(|p| {
                let h3 = p.w.norm_hxr(3.0);
                SampleRow {
                    s: p.s,
                    norm_l2: p.w.norm_hxr(0.0),
                    norm_hx1: p.w.norm_hxr(1.0),
                    norm_hx3: h3,
                    s_logs_scaled_hx3: p.s * p.s.ln() * h3,
                }
            })
            .collect()
    }

    pub fn ledger(&self, samples_path: Option<String>) -> RunLedger {
        RunLedger {
            m: self.m,
            s0: self.s0,
            b: self.bootstrap,
            bound_stat: self.bound_stat,
            l2_drift: self.l2_drift,
            l2_drift_per_100: self.l2_drift_per_100,
            quad_identity_max: self.quad_identity_max,
            richardson_max: self.richardson_max,
            n_steps: self.n_steps,
            samples_path,
        }
    }

    pub fn last(&self) -> &PerturbationState {
        self.samples.last().expect("runs hold at least the terminal sample")
    }
}

/// `exp(h/2 ℒ) ∘ Φ_B(h) ∘ exp(h/2 ℒ)` with RK4 for the non-`ℒ` part.
struct Strang<'a> {
    ctx: &'a EvolutionContext,
    h: f64,
    half: DMatrix<f64>,
}

impl<'a> Strang<'a> {
    fn new(ctx: &'a EvolutionContext, h: f64) -> Self {
        Self { ctx, h, half: ctx.flow.step_matrix(0.5 * h) }
    }

    fn half_flow(&self, w: &FlowState) -> FlowState {
        FlowState::from_stacked(&(&self.half * w.stacked()))
    }

    fn step(&self, s: f64, w: &FlowState) -> FlowState {
        let h = self.h;
        let c = self.ctx;
        let u = self.half_flow(w);
        let k1 = c.forcing_part(s, &u);
        let k2 = c.forcing_part(s + 0.5 * h, &u.axpy(0.5 * h, &k1));
        let k3 = c.forcing_part(s + 0.5 * h, &u.axpy(0.5 * h, &k2));
        let k4 = c.forcing_part(s + h, &u.axpy(h, &k3));
        let incr = FlowState {
            w1: (&k1.w1 + (&k2.w1 + &k3.w1) * 2.0 + &k4.w1) * (h / 6.0),
            w2: (&k1.w2 + (&k2.w2 + &k3.w2) * 2.0 + &k4.w2) * (h / 6.0),
        };
        self.half_flow(&u.axpy(1.0, &incr))
    }
}

fn step_count(span: f64, ds: f64) -> Result<usize> {
    if !(span > 0.0) || !(ds > 0.0) {
        return Err(Error::Config(format!("need a positive span and step, got {span} and {ds}")));
    }
    Ok(((span / ds).round() as usize).max(1))
}

/// Integrate from `w(M) = 0` down to `s0`.
pub fn backward_integrate(m: f64, s0: f64, ctx: &EvolutionContext, opts: &StepOptions) -> Result<BackwardRun> {
    if !(s0 > 1.0) {
        return Err(Error::Domain(format!("s0 must exceed 1, got {s0}")));
    }
    if !(m > s0) {
        return Err(Error::Config(format!("terminal time {m} must exceed s0 = {s0}")));
    }
    let n_steps = step_count(m - s0, opts.ds)?;
    let h = (m - s0) / n_steps as f64;
    let fine = Strang::new(ctx, -h);
    let half = (opts.richardson_every > 0).then(|| Strang::new(ctx, -0.5 * h));
    let every = opts.sample_every.max(1);
    let grid = |j: usize| if j == n_steps { m } else { s0 + j as f64 * h };

    let n = ctx.n_modes();
    let mut w = FlowState::zeros(n);
    let mut samples = vec![PerturbationState { s: m, w: w.clone() }];
    let mut richardson_max: f64 = 0.0;
    let mut bound_stat: f64 = 0.0;
    let mut quad_max: f64 = 0.0;
    let mut drift_max: f64 = 0.0;
    for (done, j) in (0..n_steps).rev().enumerate() {
        let s = grid(j + 1);
        let next = fine.step(s, &w);
        if let Some(hs) = &half {
            if (done + 1) % opts.richardson_every == 0 {
                let two = hs.step(s - 0.5 * h, &hs.step(s, &w));
                richardson_max = richardson_max.max(next.sub(&two).norm_hxr(3.0) / 3.0);
            }
        }
        w = next;
        if !w.is_finite() {
            return Err(Error::NotConverged(format!("non-finite perturbation at s = {}", grid(j))));
        }
        if j % every == 0 {
            let s_new = grid(j);
            let h3 = w.norm_hxr(3.0);
            let scaled = s_new * s_new.ln() * h3;
            if let Some(b) = opts.bootstrap {
                let limit = opts.abort_factor * b / (s_new * s_new.ln());
                if h3 > limit {
                    return Err(Error::BootstrapViolation { s: s_new, norm: h3, limit });
                }
            }
            bound_stat = bound_stat.max(scaled);
            quad_max = quad_max.max(ctx.quadratic_identity(&w).abs());
            drift_max = drift_max.max(ctx.l2_drift(&w).abs());
            samples.push(PerturbationState { s: s_new, w: w.clone() });
        }
    }
    let l2_drift_per_100 = windowed_change(&samples, ctx, 100.0);
    Ok(BackwardRun {
        m,
        s0,
        ds: h,
        n_steps,
        samples,
        bound_stat,
        l2_drift: drift_max,
        l2_drift_per_100,
        quad_identity_max: quad_max,
        richardson_max,
        bootstrap: opts.bootstrap,
    })
}

/// Largest `|D(s_a) − D(s_b)|` with `|s_a − s_b| ≤ width`, `D` the relative mass drift.
fn windowed_change(samples: &[PerturbationState], ctx: &EvolutionContext, width: f64) -> f64 {
    let d: Vec<(f64, f64)> = samples.iter().map(|p| (p.s, ctx.l2_drift(&p.w))).collect();
    let mut worst: f64 = 0.0;
    let mut lo = 0;
    for i in 0..d.len() {
        while d[lo].0 - d[i].0 > width {
            lo += 1;
        }
        for item in &d[lo..i] {
            worst = worst.max((item.1 - d[i].1).abs());
        }
    }
    worst
}

/// Integrate `w` forward from `s_start` to `s_end` with the same scheme.
pub fn forward_integrate(
    w0: &FlowState,
    s_start: f64,
    s_end: f64,
    ctx: &EvolutionContext,
    opts: &StepOptions,
) -> Result<FlowState> {
    let n_steps = step_count(s_end - s_start, opts.ds)?;
    let h = (s_end - s_start) / n_steps as f64;
    let st = Strang::new(ctx, h);
    let mut w = w0.clone();
    for j in 0..n_steps {
        w = st.step(s_start + j as f64 * h, &w);
    }
    Ok(w)
}

impl PerturbationState {
    pub fn coeffs(&self) -> (&DVector<f64>, &DVector<f64>) {
        (&self.w.w1, &self.w.w2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajectory::Forcing;

    fn ctx(forcing: Forcing) -> EvolutionContext {
        EvolutionContext::build(0.05, 24, 1e-12, forcing).unwrap()
    }

    #[test]
    fn unforced_run_stays_zero() {
        let c = ctx(Forcing::Unforced);
        let run = backward_integrate(60.0, 20.0, &c, &StepOptions::default()).unwrap();
        assert!(run.samples.iter().all(|p| p.w.w1.amax() == 0.0 && p.w.w2.amax() == 0.0));
        assert_eq!(run.bound_stat, 0.0);
    }

    #[test]
    fn terminal_sample_and_ordering() {
        let c = ctx(Forcing::Resonant);
        let run = backward_integrate(40.0, 20.0, &c, &StepOptions::default()).unwrap();
        assert_eq!(run.samples[0].s, 40.0);
        assert_eq!(run.samples[0].w.norm_hxr(3.0), 0.0);
        assert!(run.samples.windows(2).all(|p| p[0].s > p[1].s));
        assert_eq!(run.last().s, 20.0);
        assert_eq!(run.n_steps, 2000);
        assert!(run.bound_stat.is_finite() && run.bound_stat > 0.0);
    }

    #[test]
    fn reversal_returns_to_zero() {
        let c = ctx(Forcing::Resonant);
        let opts = StepOptions::default();
        let run = backward_integrate(50.0, 20.0, &c, &opts).unwrap();
        let back = forward_integrate(&run.last().w, 20.0, 50.0, &c, &opts).unwrap();
        assert!(back.norm_hxr(3.0) < 1e-5, "{}", back.norm_hxr(3.0));
    }

    #[test]
    fn tight_bootstrap_is_violated() {
        let c = ctx(Forcing::Resonant);
        let opts = StepOptions { bootstrap: Some(1e-9), ..Default::default() };
        let err = backward_integrate(40.0, 20.0, &c, &opts).unwrap_err();
        assert!(matches!(err, Error::BootstrapViolation { .. }));
    }

    #[test]
    fn rejects_bad_interval() {
        let c = ctx(Forcing::Resonant);
        assert!(backward_integrate(20.0, 20.0, &c, &StepOptions::default()).is_err());
        assert!(backward_integrate(30.0, 1.0, &c, &StepOptions::default()).is_err());
    }
}
