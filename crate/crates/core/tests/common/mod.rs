#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use fracpen::{Field, Grid};

/// Composite Simpson on `[a, b]` with `n` (even) panels.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// Whole-line `(-Δ)^s e^{-x²}` from its Fourier integral
/// `(1/π) ∫₀^∞ k^{2s} √π e^{-k²/4} cos(kx) dk`, with `k = t²` to smooth the
/// origin.
pub fn gaussian_fraclap(x: f64, s: f64) -> f64 {
    let pi = std::f64::consts::PI;
    let f = |t: f64| {
        let k = t * t;
        2.0 * t * k.powf(2.0 * s) * pi.sqrt() * (-k * k / 4.0).exp() * (k * x).cos()
    };
    simpson(f, 0.0, 20f64.sqrt(), 40_000) / pi
}

/// Smooth random field: a few Gaussians with random centres, widths and
/// signed amplitudes.
pub fn random_bumps(grid: Grid, rng: &mut ChaCha8Rng, count: usize, positive: bool) -> Field {
    let l = grid.half_extent();
    let d = grid.dim();
    let bumps: Vec<(Vec<f64>, f64, f64)> = (0..count)
        .map(|_| {
            let c: Vec<f64> = (0..d).map(|_| rng.gen_range(-0.3 * l..0.3 * l)).collect();
            let w = rng.gen_range(0.05 * l..0.2 * l);
            let a = if positive { rng.gen_range(0.2..1.5) } else { rng.gen_range(-1.0..1.0) };
            (c, w, a)
        })
        .collect();
    Field::from_fn(grid, |x| {
        bumps
            .iter()
            .map(|(c, w, a)| {
                let r2: f64 = x.iter().zip(c).map(|(p, q)| (p - q) * (p - q)).sum();
                a * (-r2 / (w * w)).exp()
            })
            .sum()
    })
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}
