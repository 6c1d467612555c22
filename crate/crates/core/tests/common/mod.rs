//! Independent oracles shared by the integration suites.
#![allow(dead_code)]

/// Radial shooting solution of `f″ + f′/r = (r² + f² − λ)f`, `f′(0) = 0`.
///
/// Returns samples `(r, f)` up to the radius where the two bisection brackets separate
/// by more than `1e-10`.
pub fn shooting_profile(lambda: f64) -> Vec<(f64, f64)> {
    const H: f64 = 1e-3;
    const R_MAX: f64 = 8.0;
    let rhs = |r: f64, y: [f64; 2]| [y[1], (r * r + y[0] * y[0] - lambda) * y[0] - y[1] / r];
    // Returns the trajectory and whether it crossed zero (shot too low).
    let shoot = |a: f64| -> (Vec<(f64, f64)>, bool) {
        let c = a * (a * a - lambda) / 4.0;
        let mut r = H;
        let mut y = [a + c * r * r, 2.0 * c * r];
        let mut out = vec![(0.0, a), (r, y[0])];
        while r < R_MAX {
            let k1 = rhs(r, y);
            let k2 = rhs(r + H / 2.0, [y[0] + H / 2.0 * k1[0], y[1] + H / 2.0 * k1[1]]);
            let k3 = rhs(r + H / 2.0, [y[0] + H / 2.0 * k2[0], y[1] + H / 2.0 * k2[1]]);
            let k4 = rhs(r + H, [y[0] + H * k3[0], y[1] + H * k3[1]]);
            for i in 0..2 {
                y[i] += H / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            r += H;
            out.push((r, y[0]));
            if y[0] < 0.0 {
                return (out, true);
            }
            if y[1] > 0.0 {
                return (out, false);
            }
        }
        (out, false)
    };
    let (mut lo, mut hi) = (1e-8, 1.001 * lambda.sqrt());
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if shoot(mid).1 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (a, b) = (shoot(lo).0, shoot(hi).0);
    a.iter().zip(&b).take_while(|(p, q)| (p.1 - q.1).abs() < 1e-10).map(|(p, q)| (p.0, 0.5 * (p.1 + q.1))).collect()
}

/// `‖x u‖² + ‖∇u‖²` for `u = S_L(e^{−ib|y|²/4} v)` by Simpson's rule in `r`, with the radial
/// derivative taken by central differences on the point values.
pub fn modulated_h1_oracle(v: &nlho_core::linearized::FlowState, l: f64, b: f64) -> f64 {
    use nlho_core::assembly::reconstruct_u;
    use nlho_core::trajectory::TrajectoryState;
    let st = TrajectoryState { s: 0.0, l, b, t: 0.0, e: 0.0 };
    let (panels, h) = (20_000, 1e-5);
    let r_max = 12.0 * l;
    let dr = r_max / panels as f64;
    let u = |r: f64| reconstruct_u(v, &st, 0.0, r);
    let f = |r: f64| {
        let du = (u(r + h) - u((r - h).abs())) / (2.0 * h);
        2.0 * std::f64::consts::PI * r * (r * r * u(r).norm_sqr() + du.norm_sqr())
    };
    let mut acc = f(0.0) + f(r_max);
    for k in 1..panels {
        acc += if k % 2 == 1 { 4.0 } else { 2.0 } * f(k as f64 * dr);
    }
    acc * dr / 3.0
}
