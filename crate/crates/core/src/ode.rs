//! Dormand–Prince 5(4) with step-size control and continuous output.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepControl {
    pub rtol: f64,
    pub atol: f64,
    pub h_max: f64,
    pub h_init: f64,
    /// Step sizes below `h_min_rel · max(1, |s|)` abort with a stiffness error.
    pub h_min_rel: f64,
    pub max_steps: usize,
}

impl Default for StepControl {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-12,
            h_max: std::f64::consts::PI / 40.0,
            h_init: 1e-3,
            h_min_rel: 1e-13,
            max_steps: 50_000_000,
        }
    }
}

/// Continuous extension over one accepted step `[s, s + h]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseStep<const D: usize> {
    pub s: f64,
    pub h: f64,
    rcont: [[f64; D]; 5],
}

impl<const D: usize> DenseStep<D> {
    pub fn s_end(&self) -> f64 {
        self.s + self.h
    }

    pub fn start(&self) -> &[f64; D] {
        &self.rcont[0]
    }

    /// State at `s ∈ [self.s, self.s_end()]`.
    pub fn eval(&self, s: f64) -> [f64; D] {
        let th = (s - self.s) / self.h;
        let th1 = 1.0 - th;
        let [r1, r2, r3, r4, r5] = &self.rcont;
        std::array::from_fn(|i| r1[i] + th * (r2[i] + th1 * (r3[i] + th * (r4[i] + th1 * r5[i]))))
    }

    /// `dy/ds` of the continuous extension.
    pub fn eval_derivative(&self, s: f64) -> [f64; D] {
        let th = (s - self.s) / self.h;
        let th1 = 1.0 - th;
        let [_, r2, r3, r4, r5] = &self.rcont;
        std::array::from_fn(|i| {
            let inner = r4[i] + th1 * r5[i];
            let p = r2[i] + th1 * (r3[i] + th * inner);
            let dp = -(r3[i] + th * inner) + th1 * (inner - th * r5[i]);
            (p + th * dp) / self.h
        })
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

#[inline]
fn lin<const D: usize>(y: &[f64; D], h: f64, terms: &[(f64, &[f64; D])]) -> [f64; D] {
    std::array::from_fn(|i| y[i] + h * terms.iter().map(|(c, k)| c * k[i]).sum::<f64>())
}

/// Integrate `y' = f(s, y)` from `s0` to `s_end > s0`.
///
/// `accept` sees every accepted step and the new state; it may abort the run by
/// returning an error. Steps are handed to the caller instead of stored.
pub fn integrate<const D: usize, F, G>(
    f: F,
    s0: f64,
    y0: [f64; D],
    s_end: f64,
    control: &StepControl,
    mut accept: G,
) -> Result<usize>
where
    F: Fn(f64, &[f64; D]) -> [f64; D],
    G: FnMut(DenseStep<D>, &[f64; D]) -> Result<()>,
{
    if !(s_end > s0) {
        return Err(Error::Domain(format!("integration interval [{s0}, {s_end}] is empty")));
    }
    let mut s = s0;
    let mut y = y0;
    let mut k1 = f(s, &y);
    let mut h = control.h_init.min(control.h_max).min(s_end - s0);
    let mut n_steps = 0usize;
    let mut last_err: f64 = 1e-4;
    while s < s_end {
        if n_steps >= control.max_steps {
            return Err(Error::Stiffness { s, h });
        }
        let last = s + h >= s_end;
        if last {
            h = s_end - s;
        }
        let k2 = f(s + C2 * h, &lin(&y, h, &[(A21, &k1)]));
        let k3 = f(s + C3 * h, &lin(&y, h, &[(A31, &k1), (A32, &k2)]));
        let k4 = f(s + C4 * h, &lin(&y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
        let k5 = f(s + C5 * h, &lin(&y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]));
        let k6 = f(s + h, &lin(&y, h, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]));
        let y_new = lin(&y, h, &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
        let k7 = f(s + h, &y_new);
        let mut err2 = 0.0;
        for i in 0..D {
            let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = control.atol + control.rtol * y[i].abs().max(y_new[i].abs());
            err2 += (e / sc).powi(2);
        }
        let err = (err2 / D as f64).sqrt();
        if !err.is_finite() {
            h *= 0.2;
            if h < control.h_min_rel * s.abs().max(1.0) {
                return Err(Error::Stiffness { s, h });
            }
            continue;
        }
        if err <= 1.0 {
            let ydiff: [f64; D] = std::array::from_fn(|i| y_new[i] - y[i]);
            let bspl: [f64; D] = std::array::from_fn(|i| h * k1[i] - ydiff[i]);
            let r4: [f64; D] = std::array::from_fn(|i| ydiff[i] - h * k7[i] - bspl[i]);
            let r5: [f64; D] = std::array::from_fn(|i| {
                h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i])
            });
            accept(DenseStep { s, h, rcont: [y, ydiff, bspl, r4, r5] }, &y_new)?;
            n_steps += 1;
            s = if last { s_end } else { s + h };
            y = y_new;
            k1 = k7;
            // PI controller (Gustafsson), exponents 0.7/5 and 0.4/5.
            let fac = 0.9 * err.max(1e-10).powf(-0.14) * last_err.powf(0.08);
            last_err = err.max(1e-4);
            h = (h * fac.clamp(0.2, 5.0)).min(control.h_max);
        } else {
            h *= (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
        }
        if h < control.h_min_rel * s.abs().max(1.0) {
            return Err(Error::Stiffness { s, h });
        }
    }
    Ok(n_steps)
}

/// Integrate and keep every dense step.
pub fn integrate_dense<const D: usize, F>(
    f: F,
    s0: f64,
    y0: [f64; D],
    s_end: f64,
    control: &StepControl,
) -> Result<Vec<DenseStep<D>>>
where
    F: Fn(f64, &[f64; D]) -> [f64; D],
{
    let mut steps = Vec::new();
    integrate(f, s0, y0, s_end, control, |st, _| {
        steps.push(st);
        Ok(())
    })?;
    Ok(steps)
}

/// Locate the step containing `s` in an ordered list of dense steps.
pub fn find_step<const D: usize>(steps: &[DenseStep<D>], s: f64) -> Option<&DenseStep<D>> {
    if steps.is_empty() || s < steps[0].s || s > steps[steps.len() - 1].s_end() {
        return None;
    }
    let idx = steps.partition_point(|st| st.s_end() < s);
    steps.get(idx.min(steps.len() - 1))
}
