//! One function per subcommand. Each writes its artifacts before evaluating invariants,
//! so a failing run still leaves its data behind.

use std::path::Path;

use nalgebra::DVector;
use nlho_core::assembly::{
    growth_report, log_grid, potential_envelope, potential_report, summarize_growth, BubbleData,
};
use nlho_core::config::{ExperimentConfig, LockedConstants};
use nlho_core::evolution::{
    backward_integrate, cauchy_gap, limit_perturbation, BackwardRun, EvolutionContext, LimitPerturbation, StepOptions,
};
use nlho_core::linearized::{
    assemble_linearized, build_a_operator, compute_resonance, energy_e, energy_e3, generator, max_gap, spectrum_rows,
    unperturbed_profile, FlowState, LinearFlow,
};
use nlho_core::ode::StepControl;
use nlho_core::soliton::{bifurcation_scan, solve_soliton, sup_norm_report};
use nlho_core::trajectory::{
    beta, growth_diagnostics, integrate_trajectory, locked_initial_state, phase_scan, Forcing, GrowthDiagnostics,
    TrajectorySeries,
};
use nlho_core::{Basis, BasisSpec, Error};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::artifacts::{
    num, read_json, read_w_limit, write_csv, write_json, write_w_limit, Checks, CmdResult, Failure, WLimitHeader,
    W_LIMIT_LAYOUT,
};

pub const LOCKED_FILE: &str = "config.locked.toml";

/// Parsed configuration together with run-mode flags.
pub struct Session {
    pub cfg: ExperimentConfig,
    pub calibrate: bool,
}

impl Session {
    fn out(&self) -> CmdResult<&Path> {
        Ok(self.cfg.output_dir_checked()?)
    }

    fn basis(&self) -> CmdResult<Basis> {
        Ok(Basis::new(BasisSpec::with_quad_order(self.cfg.n_modes, self.cfg.quad_order))?)
    }

    fn locked(&self) -> LockedConstants {
        if self.calibrate {
            LockedConstants::default()
        } else {
            self.cfg.locked_constants
        }
    }

    /// Merge into `output_dir/config.locked.toml`, keeping constants locked by other commands.
    fn persist(&self, update: impl FnOnce(&mut LockedConstants)) -> CmdResult {
        let path = self.out()?.join(LOCKED_FILE);
        let mut cfg = self.cfg.clone();
        if path.exists() {
            let prev = ExperimentConfig::load(&path)?.locked_constants;
            let l = &mut cfg.locked_constants;
            l.b = l.b.or(prev.b);
            l.c_prime = l.c_prime.or(prev.c_prime);
            l.ratio_band = l.ratio_band.or(prev.ratio_band);
            l.phase = l.phase.or(prev.phase);
            l.b0 = l.b0.or(prev.b0);
        }
        update(&mut cfg.locked_constants);
        cfg.save(&path)?;
        eprintln!("locked constants written to {}", path.display());
        Ok(())
    }

    fn tol(&self, name: &str) -> f64 {
        self.cfg.tol(name)
    }
}

fn control() -> StepControl {
    StepControl::default()
}

// ---------------------------------------------------------------- soliton

#[derive(Serialize)]
struct SolitonSummary {
    lambda: f64,
    n_modes: usize,
    residual: f64,
    l2_norm: f64,
    min_resolved_value: f64,
    sup_norms: Vec<(usize, f64, f64)>,
    checks: Checks,
}

/// Radius up to which the profile is checked for positivity.
const POSITIVITY_RADIUS: f64 = 5.0;

pub fn soliton(sess: &Session) -> CmdResult {
    let out = sess.out()?;
    let cfg = &sess.cfg;
    let basis = sess.basis()?;
    let q = solve_soliton(cfg.lambda(), sess.tol("soliton_residual"), &basis)?;
    let c = q.coeffs();

    let profile: Vec<(f64, [f64; 3])> = (0..=1000)
        .map(|i| {
            let r = 0.01 * i as f64;
            (r, basis.eval_derivatives_real(&c, r))
        })
        .collect();
    write_csv(
        &out.join("soliton_profile.csv"),
        &["r", "Q", "dQ_dr"],
        profile.iter().map(|(r, d)| vec![num(*r), num(d[0]), num(d[1])]),
    )?;
    write_csv(
        &out.join("soliton_coeffs.csv"),
        &["n", "coeff"],
        c.iter().enumerate().map(|(n, x)| vec![n.to_string(), num(*x)]),
    )?;

    let mut eps = vec![1e-3, 2e-3, 5e-3, 1e-2, 2e-2, 5e-2, 0.1, 0.2, 0.5, cfg.epsilon];
    eps.sort_by(f64::total_cmp);
    eps.dedup();
    let scan = bifurcation_scan(&eps, sess.tol("soliton_residual"), &basis)?;
    let root = (2.0 * std::f64::consts::PI).sqrt();
    write_csv(
        &out.join("bifurcation.csv"),
        &["epsilon", "l2_norm", "l2_norm_over_sqrt_eps", "h1_deviation"],
        scan.iter()
            .map(|s| vec![num(s.epsilon), num(s.l2_norm), num(s.l2_norm / s.epsilon.sqrt()), num(s.h1_deviation)]),
    )?;

    let min_resolved =
        profile.iter().filter(|(r, _)| *r <= POSITIVITY_RADIUS).map(|(_, d)| d[0]).fold(f64::INFINITY, f64::min);
    let small = scan.iter().find(|s| s.epsilon == 1e-2).expect("1e-2 is in the scan");
    let mut checks = Checks::default();
    checks.at_most("residual", q.residual, sess.tol("soliton_residual"));
    checks.holds("positive_on_resolved_region", min_resolved > 0.0);
    checks.holds("l2_norm_increasing", scan.windows(2).all(|p| p[1].l2_norm > p[0].l2_norm));
    checks.at_most("bifurcation_deviation_eps_1e-2", (small.l2_norm / 0.1 - root).abs() / root, 0.1);

    let sup = sup_norm_report(&q, 2, &basis)?;
    write_json(
        &out.join("soliton.json"),
        &SolitonSummary {
            lambda: q.lambda,
            n_modes: cfg.n_modes,
            residual: q.residual,
            l2_norm: q.l2_norm(),
            min_resolved_value: min_resolved,
            sup_norms: sup.iter().map(|r| (r.k, r.sup, r.ratio)).collect(),
            checks: checks.clone(),
        },
    )?;
    eprintln!("soliton: lambda {} residual {:.3e} |Q| {:.6}", q.lambda, q.residual, q.l2_norm());
    checks.finish()
}

// ---------------------------------------------------------------- spectrum

#[derive(Serialize)]
struct SpectrumSummary {
    lambda: f64,
    n_modes: usize,
    mu0: f64,
    mu1_minus_4: f64,
    max_gap_n10: f64,
    hm_residual: Option<f64>,
    alpha: Option<f64>,
    rho_q_inner: Option<f64>,
    half_mass_derivative_fd: Option<f64>,
    energy_drift: f64,
    energy3_drift: f64,
    generator_error: f64,
    checks: Checks,
}

/// Worst relative drifts of `E`, `𝓔` and the generator finite-difference error.
fn flow_checks(flow: &LinearFlow, sys: &nlho_core::linearized::LinearizedSystem) -> (f64, f64, f64) {
    let n = sys.n_modes();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut de, mut de3, mut dg): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for _ in 0..20 {
        let mut v = || DVector::from_fn(n, |k, _| rng.random_range(-1.0..1.0) / (1.0 + k as f64).powi(4));
        let u = FlowState::new(v(), v());
        let (e, e3) = (energy_e(&u, sys), energy_e3(&u, sys));
        for s in [0.1, 1.0, 10.0] {
            let w = flow.apply(&u, s);
            de = de.max((energy_e(&w, sys) - e).abs() / e.abs().max(f64::MIN_POSITIVE));
            de3 = de3.max((energy_e3(&w, sys) - e3).abs() / e3.abs().max(f64::MIN_POSITIVE));
        }
        let d = 1e-5;
        let fd = flow.apply(&u, d).sub(&flow.apply(&u, -d)).scale(0.5 / d);
        let g = generator(&u, sys);
        dg = dg.max(fd.sub(&g).norm_hxr(0.0) / g.norm_hxr(0.0).max(f64::MIN_POSITIVE));
    }
    (de, de3, dg)
}

pub fn spectrum(sess: &Session, zero_soliton: bool) -> CmdResult {
    let out = sess.out()?;
    let cfg = &sess.cfg;
    let basis = sess.basis()?;
    let q = if zero_soliton {
        unperturbed_profile(&basis)
    } else {
        solve_soliton(cfg.lambda(), sess.tol("soliton_residual"), &basis)?
    };
    let sys = assemble_linearized(&q, &basis)?;
    let a_op = build_a_operator(&sys)?;
    let rows = spectrum_rows(&sys, &a_op);
    write_csv(
        &out.join("spectrum.csv"),
        &["n", "lambda_p", "lambda_m", "mu", "gap_to_4n"],
        rows.iter().map(|r| vec![r.n.to_string(), num(r.lambda_p), num(r.lambda_m), num(r.mu), num(r.gap_to_4n)]),
    )?;
    let flow = LinearFlow::new(&sys, &a_op);
    let (de, de3, dg) = flow_checks(&flow, &sys);
    let mut checks = Checks::default();
    let mut summary = SpectrumSummary {
        lambda: q.lambda,
        n_modes: cfg.n_modes,
        mu0: a_op.mu[0],
        mu1_minus_4: a_op.mu.get(1).map_or(f64::NAN, |m| (m - 4.0).abs()),
        max_gap_n10: max_gap(&a_op, 10),
        hm_residual: None,
        alpha: None,
        rho_q_inner: None,
        half_mass_derivative_fd: None,
        energy_drift: de,
        energy3_drift: de3,
        generator_error: dg,
        checks: Checks::default(),
    };
    if zero_soliton {
        checks.at_most("exact_4n_spectrum", max_gap(&a_op, cfg.n_modes), 1e-10);
    } else {
        let res = compute_resonance(&sys, &a_op, &q, &basis)?;
        let hm = sys.hm_residual(&q.coeffs());
        let d = 1e-4;
        let mass = |l: f64| solve_soliton(l, sess.tol("soliton_residual"), &basis).map(|p| p.l2_norm().powi(2));
        let fd = (mass(cfg.lambda() + d)? - mass(cfg.lambda() - d)?) / (4.0 * d);
        checks.at_most("mu0", a_op.mu[0], sess.tol("mu0"));
        checks.at_most("mu_gap_n10", summary.max_gap_n10, sess.tol("mu_gap"));
        checks.at_most("hm_kernel", hm, sess.tol("hm_kernel"));
        checks.holds("rho_q_positive", res.rho_q_inner > 0.0);
        checks.at_most("rho_q_vs_fd", (res.rho_q_inner - fd).abs() / fd.abs(), sess.tol("fd_relative"));
        summary.hm_residual = Some(hm);
        summary.alpha = Some(res.alpha);
        summary.rho_q_inner = Some(res.rho_q_inner);
        summary.half_mass_derivative_fd = Some(fd);
    }
    checks.at_most("energy_conservation", de, sess.tol("energy_relative"));
    checks.at_most("energy3_conservation", de3, sess.tol("energy_relative"));
    checks.at_most("generator_fd", dg, sess.tol("generator"));
    summary.checks = checks.clone();
    write_json(&out.join("spectrum.json"), &summary)?;
    eprintln!(
        "spectrum: mu0 {:.3e} max|mu_n-4n| {:.4} |mu1-4| {:.3e}",
        summary.mu0, summary.max_gap_n10, summary.mu1_minus_4
    );
    checks.finish()
}

// ---------------------------------------------------------------- trajectory

#[derive(Debug, Serialize, Deserialize)]
pub struct TrajectoryHeader {
    pub s0: f64,
    pub s_end: f64,
    pub n_phases: usize,
    pub phase: usize,
    pub l0: f64,
    pub b0: f64,
}

#[derive(Serialize)]
struct TrajectorySummary {
    #[serde(flatten)]
    header: TrajectoryHeader,
    diagnostics: GrowthDiagnostics,
    unforced_drift: f64,
    checks: Checks,
}

/// The locked trajectory described by a header.
pub fn rebuild_trajectory(h: &TrajectoryHeader) -> CmdResult<TrajectorySeries> {
    Ok(integrate_trajectory(h.s0, h.s_end, (h.l0, h.b0), Forcing::Resonant, &control())?)
}

pub fn trajectory(sess: &Session) -> CmdResult {
    let out = sess.out()?;
    let cfg = &sess.cfg;
    let locked = sess.locked();
    let phase = match locked.phase {
        Some(k) if k < cfg.n_phases => k,
        Some(k) => return Err(Error::Config(format!("locked phase {k} ≥ n_phases {}", cfg.n_phases)).into()),
        None => {
            let scan = phase_scan(cfg.s0, cfg.s_end, cfg.n_phases, &control())?;
            write_csv(
                &out.join("phase_scan.csv"),
                &["k", "theta", "L0", "b0", "E_end"],
                scan.candidates.iter().map(|c| vec![c.k.to_string(), num(c.theta), num(c.l0), num(c.b0), num(c.e_end)]),
            )?;
            scan.best
        }
    };
    let (l0, b0) = locked_initial_state(cfg.s0, phase, cfg.n_phases)?;
    let header = TrajectoryHeader { s0: cfg.s0, s_end: cfg.s_end, n_phases: cfg.n_phases, phase, l0, b0 };
    let series = rebuild_trajectory(&header)?;
    write_csv(
        &out.join("trajectory.csv"),
        &["s", "L", "b", "t", "E", "beta"],
        series
            .thinned(0.1)
            .iter()
            .map(|st| vec![num(st.s), num(st.l), num(st.b), num(st.t), num(st.e), num(beta(st.s).unwrap_or(0.0))]),
    )?;
    let diag = growth_diagnostics(&series);
    let tight = StepControl { rtol: 1e-13, atol: 1e-15, ..StepControl::default() };
    let unforced = integrate_trajectory(cfg.s0, cfg.s_end, (l0, b0), Forcing::Unforced, &tight)?;
    let e0 = series.first().e;
    let drift = unforced.samples().map(|st| (st.e - e0).abs() / e0).fold(0.0, f64::max);

    let mut checks = Checks::default();
    checks.holds("energy_unbounded", diag.last_decade_min_e > diag.first_decade_max_e);
    checks.at_least("e_over_log_min", diag.final_ratio_min, sess.tol("e_over_log_lo"));
    checks.at_most("e_over_log_max", diag.final_ratio_max, sess.tol("e_over_log_hi"));
    checks.at_most("windowed_mean_drop", diag.windowed_drop, 1e-3);
    checks.at_most("unforced_energy_drift", drift, sess.tol("energy_relative"));
    if let Some(b0) = locked.b0 {
        checks.at_most("b0_bound", diag.b0_empirical, b0 * (1.0 + sess.tol("regression_relative")));
    }
    write_json(
        &out.join("trajectory.json"),
        &TrajectorySummary { header, diagnostics: diag, unforced_drift: drift, checks: checks.clone() },
    )?;
    eprintln!(
        "trajectory: phase {phase} E/log s in [{:.3}, {:.3}] on the final decade",
        diag.final_ratio_min, diag.final_ratio_max
    );
    if sess.calibrate {
        sess.persist(|l| {
            l.phase = Some(phase);
            l.b0 = Some(diag.b0_empirical);
        })?;
    }
    checks.finish()
}

// ---------------------------------------------------------------- evolve

#[derive(Serialize)]
struct CauchyPair {
    #[serde(rename = "M")]
    m: f64,
    #[serde(rename = "N")]
    n: f64,
    gap: f64,
    n_times_gap: f64,
}

#[derive(Serialize)]
struct CauchySummary {
    pairs: Vec<CauchyPair>,
    c_prime: f64,
    decreasing: bool,
    error_bound: Option<f64>,
    checks: Checks,
}

pub fn evolve(sess: &Session) -> CmdResult {
    let out = sess.out()?;
    let cfg = &sess.cfg;
    if cfg.m_list.len() < 2 {
        return Err(Error::Config("Cauchy needs ≥ 2 runs".into()).into());
    }
    let locked = sess.locked();
    let ctx = EvolutionContext::on_basis(sess.basis()?, cfg.epsilon, sess.tol("soliton_residual"), Forcing::Resonant)?;
    let opts = StepOptions {
        ds: cfg.ds,
        bootstrap: locked.b,
        abort_factor: sess.tol("bootstrap_abort"),
        ..StepOptions::default()
    };
    let runs: Vec<BackwardRun> =
        cfg.m_list.par_iter().map(|&m| backward_integrate(m, cfg.s0, &ctx, &opts)).collect::<nlho_core::Result<_>>()?;
    let max_stat = runs.iter().map(|r| r.bound_stat).fold(0.0, f64::max);
    let min_stat = runs.iter().map(|r| r.bound_stat).fold(f64::INFINITY, f64::min);
    let b = locked.b.unwrap_or(sess.tol("bootstrap_factor") * max_stat);

    let mut checks = Checks::default();
    for run in &runs {
        let name = format!("samples_M{}.csv", run.m);
        write_csv(
            &out.join(&name),
            &["s", "norm_L2", "norm_Hx1", "norm_Hx3", "s_logs_scaled_Hx3"],
            run.sample_rows()
                .iter()
                .map(|r| vec![num(r.s), num(r.norm_l2), num(r.norm_hx1), num(r.norm_hx3), num(r.s_logs_scaled_hx3)]),
        )?;
        let mut ledger = run.ledger(Some(name));
        ledger.b = Some(b);
        write_json(&out.join(format!("ledger_M{}.json", run.m)), &ledger)?;
        checks.at_most(&format!("bound_M{}", run.m), run.bound_stat, b);
        checks.at_most(&format!("l2_drift_per_100_M{}", run.m), run.l2_drift_per_100, sess.tol("l2_drift_per_100"));
        checks.at_most(&format!("quad_identity_M{}", run.m), run.quad_identity_max, sess.tol("quad_identity"));
    }
    checks.at_most("bound_uniformity", max_stat / min_stat, sess.tol("bound_uniformity"));

    let gaps: Vec<f64> = runs.windows(2).map(|p| cauchy_gap(&p[1], &p[0])).collect::<nlho_core::Result<_>>()?;
    let c_prime = locked.c_prime.unwrap_or(sess.tol("cauchy_factor") * runs[0].m * gaps[0]);
    let pairs: Vec<CauchyPair> = runs
        .windows(2)
        .zip(&gaps)
        .map(|(p, &gap)| CauchyPair { m: p[1].m, n: p[0].m, gap, n_times_gap: p[0].m * gap })
        .collect();
    for p in &pairs {
        checks.at_most(&format!("cauchy_M{}_N{}", p.m, p.n), p.n_times_gap, c_prime);
    }
    let decreasing = gaps.windows(2).all(|g| g[1] < g[0]);
    checks.holds("cauchy_gap_decreasing", decreasing);
    checks.holds("cauchy_pairs_doubling", runs.windows(2).all(|p| p[1].m == 2.0 * p[0].m));

    let limit: Option<LimitPerturbation> = limit_perturbation(&runs, c_prime).ok();
    if let Some(lim) = &limit {
        write_w_limit(&out.join("w_limit.bin"), &lim.run)?;
        let header = WLimitHeader {
            m: lim.run.m,
            s0: lim.run.s0,
            ds: lim.run.ds,
            n_steps: lim.run.n_steps,
            n_modes: ctx.n_modes(),
            n_samples: lim.run.samples.len(),
            epsilon: cfg.epsilon,
            b,
            bound_stat: lim.run.bound_stat,
            error_bound: lim.error_bound,
            layout: W_LIMIT_LAYOUT.into(),
        };
        write_json(&out.join("w_limit.json"), &header)?;
    }
    write_json(
        &out.join("cauchy.json"),
        &CauchySummary {
            pairs,
            c_prime,
            decreasing,
            error_bound: limit.as_ref().map(|l| l.error_bound),
            checks: checks.clone(),
        },
    )?;
    eprintln!("evolve: B {b:.4} C' {c_prime:.4e} gaps {gaps:?}");
    if sess.calibrate {
        sess.persist(|l| {
            l.b = Some(b);
            l.c_prime = Some(c_prime);
        })?;
    }
    checks.finish()
}

// ---------------------------------------------------------------- growth

#[derive(Serialize)]
struct GrowthJson {
    ratio_band: f64,
    growth_certified: bool,
    v_decay_certified: bool,
    ratio_min: f64,
    ratio_max: f64,
    remainder_fraction: f64,
    v_decay: f64,
    dv_decay: f64,
    t_range: (f64, f64),
    checks: Checks,
}

pub fn growth(sess: &Session) -> CmdResult {
    let out = sess.out()?;
    let cfg = &sess.cfg;
    let traj: TrajectoryHeader = read_json(&out.join("trajectory.json"), "trajectory")?;
    let header: WLimitHeader = read_json(&out.join("w_limit.json"), "evolve")?;
    if header.n_modes != cfg.n_modes || header.epsilon != cfg.epsilon {
        return Err(Error::Config(format!(
            "w_limit.json was computed at n_modes = {}, epsilon = {}; rerun `nlho evolve`",
            header.n_modes, header.epsilon
        ))
        .into());
    }
    let run = read_w_limit(&out.join("w_limit.bin"), &header)?;
    let lim = LimitPerturbation { run, gaps: Vec::new(), error_bound: header.error_bound };
    let series = rebuild_trajectory(&traj)?;
    let ctx = EvolutionContext::on_basis(sess.basis()?, cfg.epsilon, sess.tol("soliton_residual"), Forcing::Resonant)?;
    let bubble = BubbleData::new(ctx.q().clone(), cfg.lambda(), ctx.alpha());

    let (t0, t1) = series.t_range();
    let t_hi = match cfg.t_max {
        Some(t) if t > t1 => return Err(Error::Range { value: t, lo: t0, hi: t1 }.into()),
        Some(t) => t,
        None => t1,
    };
    let grid = log_grid(t0, t_hi, 40)?;
    let rows = growth_report(&series, &lim, &bubble, header.b, &grid)?;
    let pot = potential_report(&series, &bubble, &ctx.basis, &grid)?;
    write_csv(
        &out.join("growth.csv"),
        &["t", "s", "L", "b", "E", "norm_u_hx1", "norm_u0_hx1", "norm_u1_hx1", "ratio"],
        rows.iter().map(|r| {
            vec![
                num(r.t),
                num(r.s),
                num(r.l),
                num(r.b),
                num(r.e_lb),
                num(r.norm_u_hx1),
                num(r.norm_u0_hx1),
                num(r.norm_u1_hx1),
                num(r.ratio),
            ]
        }),
    )?;
    write_csv(
        &out.join("potential.csv"),
        &["t", "v_l2", "v_hx1", "dv_dt_l2"],
        pot.iter().map(|p| vec![num(p.t), num(p.v_l2), num(p.v_hx1), num(p.dv_dt_l2)]),
    )?;

    let mut sm = summarize_growth(&rows);
    if t0 <= 1e2 && t_hi >= 1e3 {
        let (a, b) = (
            potential_envelope(&series, &bubble, &ctx.basis, 1e2)?,
            potential_envelope(&series, &bubble, &ctx.basis, 1e3)?,
        );
        sm.v_decay = a.0 / b.0;
        sm.dv_decay = a.1 / b.1;
    }
    let need = sess.tol("v_decay");
    sm.v_decay_certified = sm.v_decay >= need && sm.dv_decay >= need;

    let mut checks = Checks::default();
    checks.holds("growth_certified", sm.growth_certified);
    checks.at_most("ratio_band", sm.ratio_band, sess.tol("ratio_band"));
    checks.locked("ratio_band", sm.ratio_band, sess.locked().ratio_band, sess.tol("regression_relative"));
    checks.at_most("remainder_fraction", sm.remainder_fraction, sess.tol("remainder_fraction"));
    checks.holds("v_decay_certified", sm.v_decay_certified);
    let (lo, hi) = (bubble.y2.min(bubble.grad2), bubble.y2.max(bubble.grad2));
    let slack = 1.0 + 1e-12;
    checks.holds(
        "bubble_two_sided",
        rows.iter().all(|r| {
            let u0 = r.norm_u0_hx1.powi(2);
            u0 >= r.e_lb * lo / slack && u0 <= r.e_lb * hi * slack
        }),
    );
    checks.holds(
        "triangle_consistency",
        rows.iter().all(|r| (r.norm_u_hx1 - r.norm_u0_hx1).abs() <= r.norm_u1_hx1 * slack + 1e-14),
    );
    write_json(
        &out.join("growth.json"),
        &GrowthJson {
            ratio_band: sm.ratio_band,
            growth_certified: sm.growth_certified,
            v_decay_certified: sm.v_decay_certified,
            ratio_min: sm.ratio_min,
            ratio_max: sm.ratio_max,
            remainder_fraction: sm.remainder_fraction,
            v_decay: sm.v_decay,
            dv_decay: sm.dv_decay,
            t_range: (t0, t_hi),
            checks: checks.clone(),
        },
    )?;
    eprintln!(
        "growth: ratio band {:.4}, remainder fraction {:.3e}, V decay {:.2}x / {:.2}x",
        sm.ratio_band, sm.remainder_fraction, sm.v_decay, sm.dv_decay
    );
    if sess.calibrate {
        sess.persist(|l| l.ratio_band = Some(sm.ratio_band))?;
    }
    checks.finish()
}

/// Effective configuration as TOML.
pub fn print_config(sess: &Session) -> CmdResult {
    print!("{}", sess.cfg.to_toml()?);
    Ok(())
}

/// Diagnostic JSON for numerical failures, written when the output directory exists.
pub fn write_failure(cfg: &ExperimentConfig, command: &str, f: &Failure) {
    #[derive(Serialize)]
    struct Diag<'a> {
        command: &'a str,
        exit_code: u8,
        error: String,
    }
    if cfg.output_dir.is_dir() {
        let path = cfg.output_dir.join(format!("{command}_error.json"));
        let _ = write_json(&path, &Diag { command, exit_code: f.exit_code(), error: f.to_string() });
    }
}
