//! Adaptive Gauss-Kronrod quadrature and a few closed-form constants of the
//! fractional calculus.

use std::collections::BinaryHeap;

use statrs::function::gamma::gamma;

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
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// One 15-point Kronrod panel; returns (estimate, error estimate).
fn gk15(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let sum = f(c - dx) + f(c + dx);
        kron += WGK[j] * sum;
        if j % 2 == 1 {
            gauss += WG[j / 2] * sum;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Panel {
    fn eq(&self, o: &Self) -> bool {
        self.err == o.err
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Panel {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        self.err.total_cmp(&o.err)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_panels: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions {
            abs_tol: 1e-13,
            rel_tol: 1e-10,
            max_panels: 4000,
        }
    }
}

/// Globally adaptive integration of `f` over `[a, b]` with optional interior
/// breakpoints where the integrand has kinks.
pub fn integrate(
    mut f: impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    breaks: &[f64],
    opts: QuadOptions,
) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let mut knots = vec![lo];
    let mut inner: Vec<f64> = breaks.iter().copied().filter(|x| *x > lo && *x < hi).collect();
    inner.sort_by(f64::total_cmp);
    knots.extend(inner);
    knots.push(hi);

    let mut heap = BinaryHeap::new();
    let mut total = 0.0;
    let mut total_err = 0.0;
    for w in knots.windows(2) {
        if w[1] > w[0] {
            let (v, e) = gk15(&mut f, w[0], w[1]);
            total += v;
            total_err += e;
            heap.push(Panel { a: w[0], b: w[1], value: v, err: e });
        }
    }
    while total_err > opts.abs_tol.max(opts.rel_tol * total.abs()) {
        if heap.len() >= opts.max_panels {
            return Err(Error::Integration(format!(
                "{} panels on [{lo}, {hi}], value {total:e}, error estimate {total_err:e}",
                heap.len()
            )));
        }
        let worst = heap.pop().expect("non-empty heap");
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) {
            // panel cannot be split further in floating point
            heap.push(worst);
            break;
        }
        let (v1, e1) = gk15(&mut f, worst.a, mid);
        let (v2, e2) = gk15(&mut f, mid, worst.b);
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.err;
        heap.push(Panel { a: worst.a, b: mid, value: v1, err: e1 });
        heap.push(Panel { a: mid, b: worst.b, value: v2, err: e2 });
    }
    if !total.is_finite() {
        return Err(Error::Integration(format!("non-finite value on [{lo}, {hi}]")));
    }
    // recompute the sum to shed drift from the incremental updates
    let exact_sum: f64 = heap.iter().map(|p| p.value).sum();
    Ok(sign * exact_sum)
}

/// `∫_a^∞ f`, mapped onto `(0, 1]` through `r = a u^{-q}`.
///
/// Pick `q = 1/γ` when `f(r) ~ r^{-1-γ}` so the mapped integrand tends to a
/// constant at `u = 0`.
pub fn integrate_to_infinity(
    mut f: impl FnMut(f64) -> f64,
    a: f64,
    q: f64,
    opts: QuadOptions,
) -> Result<f64> {
    assert!(a > 0.0 && q > 0.0);
    integrate(
        |u: f64| {
            if u <= 0.0 {
                return 0.0;
            }
            let r = a * u.powf(-q);
            f(r) * q * a * u.powf(-q - 1.0)
        },
        0.0,
        1.0,
        &[],
        opts,
    )
}

/// `C(N,s) = 4^s Γ(N/2+s) / (π^{N/2} |Γ(-s)|)`, the constant for which
/// `C(N,s) P.V.∫ (u(x)-u(y))/|x-y|^{N+2s} dy` has Fourier symbol `|ξ|^{2s}`.
pub fn frac_normalization(n: usize, s: f64) -> f64 {
    let nf = n as f64;
    4f64.powf(s) * gamma(0.5 * nf + s)
        / (std::f64::consts::PI.powf(0.5 * nf) * gamma(-s).abs())
}

/// Surface measure of the unit sphere in `R^N`.
pub fn sphere_area(n: usize) -> f64 {
    let nf = n as f64;
    2.0 * std::f64::consts::PI.powf(0.5 * nf) / gamma(0.5 * nf)
}

/// `(-Δ)^s |x|^{-α} = c |x|^{-α-2s}` for `0 < α < N`; returns `c`
/// (zero at `α = N - 2s`, the fundamental solution).
pub fn riesz_power_constant(n: usize, s: f64, alpha: f64) -> f64 {
    let nf = n as f64;
    let z = 0.5 * (nf - alpha - 2.0 * s);
    if z.abs() < 1e-14 {
        return 0.0;
    }
    4f64.powf(s) * gamma(0.5 * (nf - alpha)) * gamma(0.5 * (alpha + 2.0 * s))
        / (gamma(z) * gamma(0.5 * alpha))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_polynomial_and_singular() {
        let v = integrate(|x| x * x, 0.0, 3.0, &[], QuadOptions::default()).unwrap();
        assert!((v - 9.0).abs() < 1e-12);
        let v = integrate(|x| x.powf(-0.5), 0.0, 1.0, &[], QuadOptions::default()).unwrap();
        assert!((v - 2.0).abs() < 1e-8);
        let v = integrate(|x| x.abs(), -1.0, 2.0, &[0.0], QuadOptions::default()).unwrap();
        assert!((v - 2.5).abs() < 1e-13);
    }

    #[test]
    fn semi_infinite_tail() {
        // ∫_2^∞ r^{-1.5} dr = 2 / sqrt(2)
        let v = integrate_to_infinity(|r| r.powf(-1.5), 2.0, 2.0, QuadOptions::default())
            .unwrap();
        assert!((v - 2f64.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn normalization_half_laplacian_1d() {
        assert!((frac_normalization(1, 0.5) - 1.0 / std::f64::consts::PI).abs() < 1e-13);
        // C(N,s) for N=3, s=1/2 is 1/π²
        let c = frac_normalization(3, 0.5);
        assert!((c - 1.0 / std::f64::consts::PI.powi(2)).abs() < 1e-13);
    }

    #[test]
    fn riesz_constant_vanishes_at_fundamental_exponent() {
        assert_eq!(riesz_power_constant(1, 0.25, 0.5), 0.0);
        assert!(riesz_power_constant(1, 0.25, 0.45) > 0.0);
    }
}
