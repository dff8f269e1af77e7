//! Adaptive Gauss–Kronrod quadrature and the scaled Bessel function `e^{-x} I₀(x)`.

use crate::error::{Error, Result};

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
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
// Gauss weights for the nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const MAX_INTERVALS: usize = 500;

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Segment {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    Segment {
        a,
        b,
        value: kronrod * half,
        error: ((kronrod - gauss) * half).abs(),
    }
}

/// Integrates `f` over `[a, b]` to absolute tolerance `tol` by bisecting the
/// segment with the largest error estimate.
pub(crate) fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    let mut segments = vec![gk15(&f, a, b)];
    loop {
        let total_err: f64 = segments.iter().map(|s| s.error).sum();
        if total_err <= tol {
            return Ok(segments.iter().map(|s| s.value).sum());
        }
        if segments.len() >= MAX_INTERVALS {
            return Err(Error::Quadrature {
                achieved: total_err,
                tolerance: tol,
            });
        }
        let worst = segments
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .map(|(i, _)| i)
            .unwrap_or(0);
        let s = segments.swap_remove(worst);
        let mid = 0.5 * (s.a + s.b);
        segments.push(gk15(&f, s.a, mid));
        segments.push(gk15(&f, mid, s.b));
    }
}

/// `e^{-x} I₀(x)` for `x ≥ 0`: power series up to 30, asymptotic expansion beyond.
pub(crate) fn bessel_i0_scaled(x: f64) -> f64 {
    let x = x.abs();
    if x <= 30.0 {
        let q = 0.25 * x * x;
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut k = 1.0;
        while term > 1e-17 * sum {
            term *= q / (k * k);
            sum += term;
            k += 1.0;
        }
        sum * (-x).exp()
    } else {
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..40 {
            let kf = k as f64;
            let next = term * (2.0 * kf - 1.0) * (2.0 * kf - 1.0) / (8.0 * kf * x);
            if next.abs() < 1e-17 * sum || next.abs() > term.abs() {
                break;
            }
            term = next;
            sum += term;
        }
        sum / (2.0 * std::f64::consts::PI * x).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn integrates_smooth_functions() {
        let v = integrate(|x: f64| x.sin(), 0.0, std::f64::consts::PI, 1e-12).unwrap();
        assert_relative_eq!(v, 2.0, epsilon = 1e-12);
        let v = integrate(|x: f64| (-x * x).exp(), -6.0, 6.0, 1e-12).unwrap();
        assert_relative_eq!(v, std::f64::consts::PI.sqrt(), epsilon = 1e-11);
    }

    #[test]
    fn reports_non_convergence() {
        let err = integrate(|x: f64| 1.0 / x.abs().max(1e-300).sqrt(), -1.0, 1.0, 1e-300).unwrap_err();
        assert!(matches!(err, Error::Quadrature { .. }));
    }

    #[test]
    fn bessel_reference_values() {
        assert_eq!(bessel_i0_scaled(0.0), 1.0);
        // I0(1) = 1.2660658777520082, I0(10) = 2815.716628466254
        assert_relative_eq!(bessel_i0_scaled(1.0), 1.266_065_877_752_008_2 * (-1f64).exp(), epsilon = 1e-14);
        assert_relative_eq!(bessel_i0_scaled(10.0), 2_815.716_628_466_254 * (-10f64).exp(), epsilon = 1e-13);
    }

    #[test]
    fn bessel_branches_agree() {
        let below = bessel_i0_scaled(30.0);
        let q = 30.0;
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..40 {
            let kf = k as f64;
            term *= (2.0 * kf - 1.0) * (2.0 * kf - 1.0) / (8.0 * kf * q);
            sum += term;
            if term < 1e-18 {
                break;
            }
        }
        let above = sum / (2.0 * std::f64::consts::PI * q).sqrt();
        assert_relative_eq!(below, above, epsilon = 1e-12);
    }
}
