//! Cauchy gaps between runs with different terminal times, and the limiting perturbation.

use serde::{Deserialize, Serialize};

use super::{BackwardRun, PerturbationState};
use crate::error::{Error, Result};
use crate::linearized::FlowState;

/// Cubic Lagrange interpolation of a run's samples at `s`.
pub fn interpolate_run(run: &BackwardRun, s: f64) -> Result<FlowState> {
    let smp = &run.samples;
    let (hi, lo) = (smp[0].s, smp[smp.len() - 1].s);
    if !(s >= lo && s <= hi) {
        return Err(Error::Range { value: s, lo, hi });
    }
    // Samples decrease in s; find i with smp[i].s ≥ s ≥ smp[i+1].s.
    let i = smp.partition_point(|p| p.s > s);
    if i < smp.len() && smp[i].s == s {
        return Ok(smp[i].w.clone());
    }
    if smp.len() < 4 {
        let (a, b) = (&smp[i - 1], &smp[i]);
        let t = (s - b.s) / (a.s - b.s);
        return Ok(b.w.scale(1.0 - t).axpy(t, &a.w));
    }
    let start = i.saturating_sub(2).min(smp.len() - 4);
    let pts: Vec<&PerturbationState> = smp[start..start + 4].iter().collect();
    let mut out = FlowState::zeros(pts[0].w.len());
    for (a, pa) in pts.iter().enumerate() {
        let mut l = 1.0;
        for (b, pb) in pts.iter().enumerate() {
            if a != b {
                l *= (s - pb.s) / (pa.s - pb.s);
            }
        }
        out = out.axpy(l, &pa.w);
    }
    Ok(out)
}

/// `sup ‖w^M(s) − w^N(s)‖²_{H³}` over the samples of the shorter run.
pub fn cauchy_gap(run_m: &BackwardRun, run_n: &BackwardRun) -> Result<f64> {
    let (long, short) = if run_m.m >= run_n.m { (run_m, run_n) } else { (run_n, run_m) };
    let mut gap: f64 = 0.0;
    for p in &short.samples {
        let other = interpolate_run(long, p.s)?;
        gap = gap.max(other.sub(&p.w).norm_hxr(3.0).powi(2));
    }
    Ok(gap)
}

/// The largest-`M` run, certified by consecutive Cauchy gaps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitPerturbation {
    pub run: BackwardRun,
    /// `(M, N, gap)` for consecutive runs.
    pub gaps: Vec<(f64, f64, f64)>,
    /// `sqrt(gap)` of the last pair, as an `H³` error bound.
    pub error_bound: f64,
}

impl LimitPerturbation {
    pub fn at(&self, s: f64) -> Result<PerturbationState> {
        Ok(PerturbationState { s, w: interpolate_run(&self.run, s)? })
    }

    pub fn s_range(&self) -> (f64, f64) {
        (self.run.s0, self.run.m)
    }
}

/// Certify `gap(M_{k+1}, M_k) ≤ C′/M_k` for consecutive runs and return the last one.
pub fn limit_perturbation(runs: &[BackwardRun], c_prime: f64) -> Result<LimitPerturbation> {
    if runs.len() < 2 {
        return Err(Error::NotConverged("Cauchy needs ≥ 2 runs".into()));
    }
    let mut sorted: Vec<&BackwardRun> = runs.iter().collect();
    sorted.sort_by(|a, b| a.m.total_cmp(&b.m));
    let mut gaps = Vec::new();
    for pair in sorted.windows(2) {
        let gap = cauchy_gap(pair[1], pair[0])?;
        if !(gap <= c_prime / pair[0].m) {
            return Err(Error::NotConverged(format!(
                "gap({}, {}) = {gap:e} exceeds C'/N = {:e}",
                pair[1].m,
                pair[0].m,
                c_prime / pair[0].m
            )));
        }
        gaps.push((pair[1].m, pair[0].m, gap));
    }
    let error_bound = gaps.last().map(|g| g.2.sqrt()).unwrap_or(0.0);
    Ok(LimitPerturbation { run: (*sorted[sorted.len() - 1]).clone(), gaps, error_bound })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolution::{backward_integrate, EvolutionContext, StepOptions};
    use crate::trajectory::Forcing;

    #[test]
    fn gap_with_itself_is_zero_and_single_run_rejected() {
        let c = EvolutionContext::build(0.05, 16, 1e-12, Forcing::Resonant).unwrap();
        let run = backward_integrate(40.0, 20.0, &c, &StepOptions::default()).unwrap();
        assert_eq!(cauchy_gap(&run, &run).unwrap(), 0.0);
        let err = limit_perturbation(std::slice::from_ref(&run), 1.0).unwrap_err();
        assert!(err.to_string().contains("Cauchy needs ≥ 2 runs"));
    }

    #[test]
    fn interpolation_reproduces_nodes_and_smooth_data() {
        let c = EvolutionContext::build(0.05, 16, 1e-12, Forcing::Resonant).unwrap();
        let mut run = backward_integrate(30.0, 20.0, &c, &StepOptions::default()).unwrap();
        // Replace samples with a cubic in s.
        for p in run.samples.iter_mut() {
            let v = p.s.powi(3) - 2.0 * p.s;
            p.w = FlowState::new(nalgebra::DVector::from_element(16, v), nalgebra::DVector::from_element(16, -v));
        }
        let w = interpolate_run(&run, 23.456).unwrap();
        let v = 23.456f64.powi(3) - 2.0 * 23.456;
        assert!((w.w1[3] - v).abs() < 1e-9 * v);
        assert!(interpolate_run(&run, 31.0).is_err());
        let node = &run.samples[7];
        assert_eq!(interpolate_run(&run, node.s).unwrap(), node.w);
    }

    #[test]
    fn selects_largest_run() {
        let c = EvolutionContext::build(0.05, 16, 1e-12, Forcing::Resonant).unwrap();
        let o = StepOptions::default();
        let runs: Vec<_> = [60.0, 30.0, 120.0].iter().map(|&m| backward_integrate(m, 20.0, &c, &o).unwrap()).collect();
        let lim = limit_perturbation(&runs, 1e6).unwrap();
        assert_eq!(lim.run.m, 120.0);
        assert_eq!(lim.gaps.len(), 2);
        assert!(limit_perturbation(&runs, 0.0).is_err());
    }
}
