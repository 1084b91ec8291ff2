//! FFT plumbing for periodic fields: forward/inverse transforms in one or two
//! dimensions, radial Fourier multipliers, sub-cell shifts and band-limited
//! interpolation.
//!
//! Discrete frequencies are `ξ = π k / L` for `k = -M/2 .. M/2-1`. The Nyquist
//! mode is treated as the real cosine `cos(ξ_N x)` so that every operation on
//! a real field returns a real field.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::grid::Grid;

/// Cached transform plans and frequency magnitudes for one grid.
///
/// Not shared between threads by design of the callers; clone per worker.
#[derive(Clone)]
pub struct Spectral {
    grid: Grid,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    wavenumbers: Vec<f64>,
    xi_abs: Vec<f64>,
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral").field("grid", &self.grid).finish()
    }
}

/// Angular wavenumbers in FFT order for `m` points on a box of length `2L`.
pub fn wavenumbers(m: usize, half_extent: f64) -> Vec<f64> {
    let base = std::f64::consts::PI / half_extent;
    (0..m)
        .map(|j| {
            let k = if j < m / 2 { j as f64 } else { j as f64 - m as f64 };
            base * k
        })
        .collect()
}

impl Spectral {
    pub fn new(grid: &Grid) -> Self {
        let m = grid.points_per_axis();
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(m);
        let inv = planner.plan_fft_inverse(m);
        let k = wavenumbers(m, grid.half_extent());
        let xi_abs = match grid.dim() {
            1 => k.iter().map(|v| v.abs()).collect(),
            _ => {
                let mut out = Vec::with_capacity(m * m);
                for a in &k {
                    for b in &k {
                        out.push((a * a + b * b).sqrt());
                    }
                }
                out
            }
        };
        Spectral {
            grid: *grid,
            fwd,
            inv,
            wavenumbers: k,
            xi_abs,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// `|ξ|` for every coefficient, in the same flat layout as the field.
    pub fn xi_abs(&self) -> &[f64] {
        &self.xi_abs
    }

    fn transform(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let m = self.grid.points_per_axis();
        match self.grid.dim() {
            1 => plan.process(data),
            _ => {
                for row in data.chunks_mut(m) {
                    plan.process(row);
                }
                let mut col = vec![Complex64::new(0.0, 0.0); m];
                for j in 0..m {
                    for i in 0..m {
                        col[i] = data[i * m + j];
                    }
                    plan.process(&mut col);
                    for i in 0..m {
                        data[i * m + j] = col[i];
                    }
                }
            }
        }
    }

    /// Unnormalized forward DFT of real samples. Samples are taken to start at
    /// `-L`; the constant phase this implies cancels in every use below.
    pub fn forward(&self, values: &[f64]) -> Vec<Complex64> {
        let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        let fwd = self.fwd.clone();
        self.transform(&mut data, &fwd);
        data
    }

    /// Inverse DFT including the `1/M^N` factor; returns the real part.
    pub fn inverse_real(&self, mut coeffs: Vec<Complex64>) -> Vec<f64> {
        let inv = self.inv.clone();
        self.transform(&mut coeffs, &inv);
        let scale = 1.0 / self.grid.len() as f64;
        coeffs.iter().map(|c| c.re * scale).collect()
    }

    /// Applies a radial multiplier `m(|ξ|)`.
    pub fn apply_radial(&self, values: &[f64], m: impl Fn(f64) -> f64) -> Vec<f64> {
        let mut c = self.forward(values);
        for (ck, xi) in c.iter_mut().zip(&self.xi_abs) {
            *ck *= m(*xi);
        }
        self.inverse_real(c)
    }

    /// `|ξ|^{2s}` multiplier; the zero mode maps to zero.
    pub fn frac_power(&self, values: &[f64], s: f64) -> Vec<f64> {
        self.apply_radial(values, |xi| if xi == 0.0 { 0.0 } else { xi.powf(2.0 * s) })
    }

    /// `h^N Σ_j u_j ((-Δ)^s u)_j` evaluated through Parseval.
    pub fn frac_quadratic_form(&self, values: &[f64], s: f64) -> f64 {
        let c = self.forward(values);
        let sum: f64 = c
            .iter()
            .zip(&self.xi_abs)
            .map(|(ck, &xi)| if xi == 0.0 { 0.0 } else { xi.powf(2.0 * s) * ck.norm_sqr() })
            .sum();
        sum * self.grid.cell_volume() / self.grid.len() as f64
    }

    fn axis_phase(&self, j: usize, delta: f64) -> Complex64 {
        let m = self.grid.points_per_axis();
        let xi = self.wavenumbers[j];
        if j == m / 2 {
            Complex64::new((xi * delta).cos(), 0.0)
        } else {
            Complex64::from_polar(1.0, xi * delta)
        }
    }

    /// Samples of the band-limited interpolant at `x_j + delta`.
    pub fn shift(&self, values: &[f64], delta: &[f64]) -> Vec<f64> {
        let m = self.grid.points_per_axis();
        let mut c = self.forward(values);
        match self.grid.dim() {
            1 => {
                for (j, ck) in c.iter_mut().enumerate() {
                    *ck *= self.axis_phase(j, delta[0]);
                }
            }
            _ => {
                let p0: Vec<Complex64> = (0..m).map(|j| self.axis_phase(j, delta[0])).collect();
                let p1: Vec<Complex64> = (0..m).map(|j| self.axis_phase(j, delta[1])).collect();
                for i in 0..m {
                    for j in 0..m {
                        c[i * m + j] *= p0[i] * p1[j];
                    }
                }
            }
        }
        self.inverse_real(c)
    }

    /// Zero-padded spectral refinement by an integer factor; the refined field
    /// lives on the same box with `factor * M` points per axis.
    pub fn refine(&self, values: &[f64], factor: usize) -> (Grid, Vec<f64>) {
        let m = self.grid.points_per_axis();
        let mf = m * factor;
        let fine = Grid::new(self.grid.dim(), self.grid.half_extent(), mf)
            .expect("refined grid inherits validity");
        let c = self.forward(values);
        let map = |j: usize| -> (usize, bool) {
            // position in the fine spectrum, and whether j is the Nyquist index
            if j < m / 2 {
                (j, false)
            } else if j == m / 2 {
                (mf - m / 2, true)
            } else {
                (mf - (m - j), false)
            }
        };
        let mut out = vec![Complex64::new(0.0, 0.0); fine.len()];
        match self.grid.dim() {
            1 => {
                for (j, ck) in c.iter().enumerate() {
                    let (jj, nyq) = map(j);
                    if nyq {
                        out[jj] += 0.5 * ck;
                        out[m / 2] += 0.5 * ck;
                    } else {
                        out[jj] += *ck;
                    }
                }
            }
            _ => {
                for i in 0..m {
                    let (ii, ni) = map(i);
                    let irows: Vec<(usize, f64)> = if ni {
                        vec![(ii, 0.5), (m / 2, 0.5)]
                    } else {
                        vec![(ii, 1.0)]
                    };
                    for j in 0..m {
                        let (jj, nj) = map(j);
                        let jcols: Vec<(usize, f64)> = if nj {
                            vec![(jj, 0.5), (m / 2, 0.5)]
                        } else {
                            vec![(jj, 1.0)]
                        };
                        let ck = c[i * m + j];
                        for &(r, wr) in &irows {
                            for &(q, wq) in &jcols {
                                out[r * mf + q] += ck * (wr * wq);
                            }
                        }
                    }
                }
            }
        }
        let scale = fine.len() as f64 / self.grid.len() as f64;
        for v in out.iter_mut() {
            *v *= scale;
        }
        let spec_fine = Spectral::new(&fine);
        (fine, spec_fine.inverse_real(out))
    }
}

/// Evaluates a field at arbitrary points of its box: spectral refinement
/// followed by local Lagrange interpolation on the refined lattice.
pub struct BandLimited {
    grid: Grid,
    values: Vec<f64>,
}

const LAGRANGE_POINTS: usize = 6;

impl BandLimited {
    pub fn new(spectral: &Spectral, values: &[f64], factor: usize) -> Self {
        let (grid, values) = spectral.refine(values, factor);
        BandLimited { grid, values }
    }

    fn weights(t: f64) -> [f64; LAGRANGE_POINTS] {
        // nodes at -2..=3 relative to floor(t)
        let mut w = [1.0; LAGRANGE_POINTS];
        for (a, wa) in w.iter_mut().enumerate() {
            let xa = a as f64 - 2.0;
            for b in 0..LAGRANGE_POINTS {
                if a != b {
                    let xb = b as f64 - 2.0;
                    *wa *= (t - xb) / (xa - xb);
                }
            }
        }
        w
    }

    /// Value at `x` (periodic wrap outside the box).
    pub fn eval(&self, x: &[f64]) -> f64 {
        let m = self.grid.points_per_axis() as isize;
        let h = self.grid.spacing();
        let l = self.grid.half_extent();
        let mut base = [0isize; 2];
        let mut w = [[0.0; LAGRANGE_POINTS]; 2];
        for a in 0..self.grid.dim() {
            let pos = (x[a] + l) / h;
            let fl = pos.floor();
            base[a] = fl as isize;
            w[a] = Self::weights(pos - fl);
        }
        let wrap = |j: isize| -> usize { j.rem_euclid(m) as usize };
        match self.grid.dim() {
            1 => (0..LAGRANGE_POINTS)
                .map(|a| w[0][a] * self.values[wrap(base[0] + a as isize - 2)])
                .sum(),
            _ => {
                let mut acc = 0.0;
                for a in 0..LAGRANGE_POINTS {
                    let i = wrap(base[0] + a as isize - 2);
                    for b in 0..LAGRANGE_POINTS {
                        let j = wrap(base[1] + b as isize - 2);
                        acc += w[0][a] * w[1][b] * self.values[i * m as usize + j];
                    }
                }
                acc
            }
        }
    }
}
