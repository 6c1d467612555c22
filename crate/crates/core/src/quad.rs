//! Adaptive Gauss–Kronrod (7, 15) for vector-valued integrands.

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] =
    [0.129_484_966_168_869_7, 0.279_705_391_489_276_7, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];

/// One (7, 15) panel: Kronrod estimate and a componentwise error bound.
fn panel<F>(f: &F, a: f64, b: f64, dim: usize) -> (Vec<f64>, f64)
where
    F: Fn(f64, &mut [f64]),
{
    let c = 0.5 * (a + b);
    let hl = 0.5 * (b - a);
    let mut k = vec![0.0; dim];
    let mut g = vec![0.0; dim];
    let mut buf = vec![0.0; dim];
    let mut buf2 = vec![0.0; dim];
    f(c, &mut buf);
    for i in 0..dim {
        k[i] = WGK[7] * buf[i];
        g[i] = WG[3] * buf[i];
    }
    for j in 0..7 {
        let x = hl * XGK[j];
        f(c - x, &mut buf);
        f(c + x, &mut buf2);
        for i in 0..dim {
            let s = buf[i] + buf2[i];
            k[i] += WGK[j] * s;
            if j % 2 == 1 {
                g[i] += WG[j / 2] * s;
            }
        }
    }
    let mut err = 0.0f64;
    for i in 0..dim {
        k[i] *= hl;
        g[i] *= hl;
        err = err.max((k[i] - g[i]).abs());
    }
    (k, err)
}

/// `∫_a^b f`, bisecting panels until each panel's error is below its share of `tol`.
///
/// `f(x, out)` writes the `dim` integrand components at `x`.
pub fn integrate_vec<F>(f: &F, a: f64, b: f64, dim: usize, tol: f64, max_depth: usize) -> Vec<f64>
where
    F: Fn(f64, &mut [f64]),
{
    let mut total = vec![0.0; dim];
    let mut stack = vec![(a, b, 0usize)];
    let width = (b - a).abs().max(f64::MIN_POSITIVE);
    while let Some((lo, hi, depth)) = stack.pop() {
        let (v, err) = panel(f, lo, hi, dim);
        let share = tol * (hi - lo).abs() / width;
        if err <= share || depth >= max_depth {
            for i in 0..dim {
                total[i] += v[i];
            }
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((mid, hi, depth + 1));
            stack.push((lo, mid, depth + 1));
        }
    }
    total
}
