//! Discrete fractional Laplacians and the quotients built on them.
//!
//! Two independent realizations of `(-Δ)^s` are provided:
//!
//! * [`apply_fraclap_spectral`]: the periodic Fourier multiplier `|ξ|^{2s}`.
//! * [`apply_fraclap_direct`]: quadrature of the singular integral
//!   `∫ (u(x) - u(y)) / |x - y|^{N+2s} dy` over the grid, with the field
//!   continued outside the box by its mean over the outermost ring of nodes
//!   (zero for decaying fields) and the far field added in closed form.
//!
//! # Normalization
//!
//! The raw kernel integral above differs from the multiplier by the constant
//! `C(N,s) = 4^s Γ(N/2 + s) / (π^{N/2} |Γ(-s)|)` (see
//! [`kernel_normalization`]): `|ξ|^{2s} û = C(N,s) · (kernel integral)^`.
//! Both public operators return the multiplier-normalized value, i.e. the
//! direct routine scales its raw integral by `C(N,s)`; the raw value is
//! available through [`DirectResult::raw_integral`]. In 1-D, `C(1, 1/4) ≈
//! 0.1996`, `C(1, 1/2) = 1/π`, `C(1, 3/4) ≈ 0.2992`.

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::quad::{self, QuadOptions};
use crate::spectral::Spectral;

pub use crate::quad::frac_normalization as kernel_normalization;

pub(crate) fn check_order(s: f64) -> Result<()> {
    if s.is_finite() && s > 0.0 && s < 1.0 {
        Ok(())
    } else {
        Err(Error::ParameterDomain(format!(
            "fractional order s must lie in (0, 1), got {s}"
        )))
    }
}

/// `(-Δ)^s u` through the periodic multiplier `|ξ|^{2s}`, `ξ = π k / L`.
pub fn apply_fraclap_spectral(u: &Field, s: f64) -> Result<Field> {
    apply_fraclap_spectral_with(&Spectral::new(u.grid()), u, s)
}

/// Same as [`apply_fraclap_spectral`] with caller-owned transform plans.
pub fn apply_fraclap_spectral_with(sp: &Spectral, u: &Field, s: f64) -> Result<Field> {
    check_order(s)?;
    u.ensure_finite("input field")?;
    Field::new(*u.grid(), sp.frac_power(u.values(), s))
}

#[derive(Debug, Clone, Copy)]
pub struct DirectOptions {
    /// Relative bound on `max |u|` over the outer ring of nodes below which
    /// the constant continuation outside the box is considered sound.
    pub boundary_threshold: f64,
}

impl Default for DirectOptions {
    fn default() -> Self {
        DirectOptions {
            boundary_threshold: 1e-6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DirectResult {
    /// `(-Δ)^s u` at each evaluation point (multiplier normalization).
    pub values: Vec<f64>,
    /// Unnormalized kernel integrals, `values[i] / C(N,s)`.
    pub raw_integral: Vec<f64>,
    /// Precondition violations that did not prevent evaluation.
    pub warnings: Vec<String>,
}

/// `(-Δ)^s u` at arbitrary points of the box by singular-integral quadrature.
///
/// In 1-D the symmetrized integrand `(2u(x) - u(x+z) - u(x-z)) / z^{1+2s}` is
/// written as `q(z) z^{1-2s}` with `q` smooth and even; `q` is interpolated
/// piecewise linearly between nodes and integrated against `z^{1-2s}`
/// exactly. Inside the first cell `q(0)` comes from the symmetric second
/// difference (Richardson-extrapolated). Beyond the box the integrand is
/// `2(u(x) - u_far) / z^{1+2s}` and the tail is closed form.
///
/// In 2-D the outer region uses the midpoint rule, the central cell the
/// second-difference Laplacian, and the exterior of the box a polar
/// integral of the kernel.
///
/// Points that are not nodes are handled by shifting the field spectrally so
/// that the point becomes a node.
pub fn apply_fraclap_direct(
    u: &Field,
    s: f64,
    eval_points: &[Vec<f64>],
    opts: DirectOptions,
) -> Result<DirectResult> {
    check_order(s)?;
    u.ensure_finite("input field")?;
    let grid = *u.grid();
    let mut warnings = Vec::new();
    let scale = u.max_abs();
    let boundary = u.boundary_max_abs(1);
    if scale > 0.0 && boundary > opts.boundary_threshold * scale {
        warnings.push(format!(
            "field does not decay at the box boundary: max boundary |u| = {boundary:e} (relative {:e})",
            boundary / scale
        ));
    }
    let sp = Spectral::new(&grid);
    let c_ns = kernel_normalization(grid.dim(), s);
    let h = grid.spacing();
    let weights_1d = if grid.dim() == 1 {
        Some(ProductWeights::new(s, grid.points_per_axis() + 2))
    } else {
        None
    };

    let mut raw = Vec::with_capacity(eval_points.len());
    for x in eval_points {
        if x.len() != grid.dim() || !grid.contains(x) {
            return Err(Error::Domain {
                point: x.clone(),
                half_extent: grid.half_extent(),
            });
        }
        let idx = grid.nearest_node(x)?;
        let node = grid.point(idx);
        let delta: Vec<f64> = (0..grid.dim()).map(|a| x[a] - node[a]).collect();
        let shifted;
        let vals: &[f64] = if delta.iter().all(|d| d.abs() <= 1e-12 * h) {
            u.values()
        } else {
            shifted = sp.shift(u.values(), &delta);
            &shifted
        };
        let far = far_value(&grid, vals);
        let v = match grid.dim() {
            1 => direct_1d(vals, far, idx, h, s, weights_1d.as_ref().expect("1-d weights")),
            _ => direct_2d(&grid, vals, far, grid.unravel(idx), s)?,
        };
        raw.push(v);
    }
    Ok(DirectResult {
        values: raw.iter().map(|v| c_ns * v).collect(),
        raw_integral: raw,
        warnings,
    })
}

/// Exact moments of `t^{1-2s}` against the two linear hat pieces on `[j, j+1]`.
struct ProductWeights {
    s: f64,
    left: Vec<f64>,
    right: Vec<f64>,
}

impl ProductWeights {
    fn new(s: f64, n: usize) -> Self {
        let p0 = 2.0 - 2.0 * s;
        let p1 = 3.0 - 2.0 * s;
        let mut left = Vec::with_capacity(n);
        let mut right = Vec::with_capacity(n);
        for j in 0..n {
            let a = j as f64;
            let b = a + 1.0;
            let m0 = (b.powf(p0) - a.powf(p0)) / p0;
            // ∫ t^{1-2s} (t - a) dt
            let m1 = (b.powf(p1) - a.powf(p1)) / p1 - a * m0;
            right.push(m1);
            left.push(m0 - m1);
        }
        ProductWeights { s, left, right }
    }
}

/// Mean over the outermost ring of nodes; the value the field is continued
/// with outside the box.
fn far_value(grid: &Grid, vals: &[f64]) -> f64 {
    let (sum, count) = vals
        .iter()
        .enumerate()
        .filter(|(i, _)| grid.is_boundary_node(*i, 1))
        .fold((0.0, 0usize), |(s, c), (_, v)| (s + v, c + 1));
    sum / count as f64
}

fn direct_1d(vals: &[f64], far: f64, i0: usize, h: f64, s: f64, w: &ProductWeights) -> f64 {
    let m = vals.len() as isize;
    let at = |j: isize| -> f64 {
        if j < 0 || j >= m {
            far
        } else {
            vals[j as usize]
        }
    };
    let i0 = i0 as isize;
    let u0 = vals[i0 as usize];
    let reach = (i0).max(m - 1 - i0) + 1;
    let q = |j: isize| -> f64 {
        let z = j as f64 * h;
        (2.0 * u0 - at(i0 + j) - at(i0 - j)) / (z * z)
    };
    let q1 = q(1);
    let q2 = q(2);
    let mut q_prev = (4.0 * q1 - q2) / 3.0;
    let mut acc = 0.0;
    for j in 0..reach {
        let q_next = q(j + 1);
        acc += w.left[j as usize] * q_prev + w.right[j as usize] * q_next;
        q_prev = q_next;
    }
    acc *= h.powf(2.0 - 2.0 * w.s);
    let z_end = reach as f64 * h;
    acc + 2.0 * (u0 - far) * z_end.powf(-2.0 * s) / (2.0 * s)
}

/// `∫_{[0,1]^2} |z|^{-2s} dz`.
fn unit_square_corner_integral(s: f64) -> Result<f64> {
    let p = 2.0 - 2.0 * s;
    let ang = quad::integrate(
        |t: f64| t.cos().powf(-p),
        0.0,
        std::f64::consts::FRAC_PI_4,
        &[],
        QuadOptions::default(),
    )?;
    Ok(2.0 * ang / p)
}

fn direct_2d(grid: &Grid, vals: &[f64], far: f64, ij: [usize; 2], s: f64) -> Result<f64> {
    let m = grid.points_per_axis();
    let h = grid.spacing();
    let (i0, j0) = (ij[0] as isize, ij[1] as isize);
    let at = |i: isize, j: isize| -> f64 {
        if i < 0 || j < 0 || i >= m as isize || j >= m as isize {
            far
        } else {
            vals[i as usize * m + j as usize]
        }
    };
    let u0 = at(i0, j0);
    let expo = -(2.0 + 2.0 * s) / 2.0;
    let mut acc = 0.0;
    for i in 0..m as isize {
        for j in 0..m as isize {
            let (di, dj) = ((i - i0) as f64, (j - j0) as f64);
            let r2 = di * di + dj * dj;
            if r2 == 0.0 {
                continue;
            }
            acc += (u0 - at(i, j)) * r2.powf(expo);
        }
    }
    acc *= h.powf(-2.0 * s);

    let lap = (at(i0 + 1, j0) + at(i0 - 1, j0) + at(i0, j0 + 1) + at(i0, j0 - 1) - 4.0 * u0)
        / (h * h);
    let cell = 4.0 * (0.5 * h).powf(2.0 - 2.0 * s) * unit_square_corner_integral(s)?;
    acc += -0.25 * lap * cell;

    // exterior of the node-cell union [-L - h/2, L - h/2]^2
    let l = grid.half_extent();
    let x = [grid.axis_coord(ij[0]), grid.axis_coord(ij[1])];
    let lo = -l - 0.5 * h;
    let hi = l - 0.5 * h;
    let dist = |theta: f64| -> f64 {
        let (c, sn) = (theta.cos(), theta.sin());
        let tx = if c > 0.0 {
            (hi - x[0]) / c
        } else if c < 0.0 {
            (lo - x[0]) / c
        } else {
            f64::INFINITY
        };
        let ty = if sn > 0.0 {
            (hi - x[1]) / sn
        } else if sn < 0.0 {
            (lo - x[1]) / sn
        } else {
            f64::INFINITY
        };
        tx.min(ty)
    };
    let corners: Vec<f64> = [[hi, hi], [lo, hi], [lo, lo], [hi, lo]]
        .iter()
        .map(|c| (c[1] - x[1]).atan2(c[0] - x[0]).rem_euclid(2.0 * std::f64::consts::PI))
        .collect();
    let tail = quad::integrate(
        |t| dist(t).powf(-2.0 * s) / (2.0 * s),
        0.0,
        2.0 * std::f64::consts::PI,
        &corners,
        QuadOptions::default(),
    )?;
    Ok(acc + (u0 - far) * tail)
}

/// Discrete `[u]²_{H^s} = Σ |ξ|^{2s} |û(ξ)|²` with Parseval weights; equals
/// `∫ u (-Δ)^s u` on the grid.
pub fn gagliardo_seminorm_sq(u: &Field, s: f64) -> Result<f64> {
    gagliardo_seminorm_sq_with(&Spectral::new(u.grid()), u, s)
}

pub fn gagliardo_seminorm_sq_with(sp: &Spectral, u: &Field, s: f64) -> Result<f64> {
    check_order(s)?;
    u.ensure_finite("input field")?;
    Ok(sp.frac_quadratic_form(u.values(), s).max(0.0))
}

/// Cell integrals of `|x|^{-2s}` over the half-cell-offset lattice, whose
/// cell edges pass through the origin.
fn hardy_weights(grid: &Grid, s: f64) -> Result<Vec<f64>> {
    let m = grid.points_per_axis();
    let h = grid.spacing();
    let l = grid.half_extent();
    let p = 1.0 - 2.0 * s;
    match grid.dim() {
        1 => {
            let anti = |x: f64| x.signum() * x.abs().powf(p) / p;
            Ok((0..m)
                .map(|j| {
                    let a = -l + j as f64 * h;
                    anti(a + h) - anti(a)
                })
                .collect())
        }
        _ => {
            let corner = h.powf(2.0 - 2.0 * s) * unit_square_corner_integral(s)?;
            let near = 3isize;
            let mut w = vec![0.0; m * m];
            for i in 0..m {
                for j in 0..m {
                    // cell [a0, a0+h] x [b0, b0+h]; index of lower corner relative to origin
                    let ci = i as isize - (m / 2) as isize;
                    let cj = j as isize - (m / 2) as isize;
                    let a0 = ci as f64 * h;
                    let b0 = cj as f64 * h;
                    let val = if (ci == 0 || ci == -1) && (cj == 0 || cj == -1) {
                        corner
                    } else if ci.abs() <= near && cj.abs() <= near {
                        quad::integrate(
                            |xa| {
                                quad::integrate(
                                    |xb| (xa * xa + xb * xb).powf(-s),
                                    b0,
                                    b0 + h,
                                    &[],
                                    QuadOptions::default(),
                                )
                                .unwrap_or(f64::NAN)
                            },
                            a0,
                            a0 + h,
                            &[],
                            QuadOptions::default(),
                        )?
                    } else {
                        let (xa, xb) = (a0 + 0.5 * h, b0 + 0.5 * h);
                        h * h * (xa * xa + xb * xb).powf(-s)
                    };
                    if !val.is_finite() {
                        return Err(Error::Integration("Hardy cell weight".into()));
                    }
                    w[i * m + j] = val;
                }
            }
            Ok(w)
        }
    }
}

/// `(∫ u²/|x|^{2s}) / [u]²_{H^s}`.
///
/// The field is resampled half a cell off the nodes (spectral shift) so no
/// sample sits at the origin; the weight `|x|^{-2s}` is then integrated
/// exactly over each offset cell.
pub fn hardy_quotient(u: &Field, s: f64) -> Result<f64> {
    check_order(s)?;
    u.ensure_finite("input field")?;
    let grid = *u.grid();
    if (grid.dim() as f64) <= 2.0 * s {
        return Err(Error::ParameterDomain(format!(
            "Hardy weight |x|^(-2s) needs N > 2s (N = {}, s = {s})",
            grid.dim()
        )));
    }
    if u.max_abs() == 0.0 {
        return Err(Error::UndefinedQuotient("field is identically zero".into()));
    }
    let sp = Spectral::new(&grid);
    let half = vec![0.5 * grid.spacing(); grid.dim()];
    let shifted = sp.shift(u.values(), &half);
    let weights = hardy_weights(&grid, s)?;
    let num: f64 = shifted.iter().zip(&weights).map(|(v, w)| v * v * w).sum();
    let den = sp.frac_quadratic_form(u.values(), s);
    if den <= 0.0 {
        return Err(Error::UndefinedQuotient(
            "seminorm vanishes (constant field)".into(),
        ));
    }
    Ok(num / den)
}

/// Critical Sobolev exponent `2N/(N - 2s)`.
pub fn critical_exponent(n: usize, s: f64) -> f64 {
    let nf = n as f64;
    2.0 * nf / (nf - 2.0 * s)
}

/// `‖u‖_q / (‖(-Δ)^{s/2}u‖₂^θ ‖u‖₂^{1-θ})` with `θ/2*_s + (1-θ)/2 = 1/q`.
pub fn gagliardo_nirenberg_quotient(u: &Field, s: f64, q: f64) -> Result<f64> {
    check_order(s)?;
    let n = u.grid().dim();
    if (n as f64) <= 2.0 * s {
        return Err(Error::ParameterDomain("N > 2s required".into()));
    }
    let crit = critical_exponent(n, s);
    if !(2.0..=crit).contains(&q) {
        return Err(Error::ParameterDomain(format!(
            "q = {q} outside [2, {crit}]"
        )));
    }
    let theta = (0.5 - 1.0 / q) / (0.5 - 1.0 / crit);
    let semi = gagliardo_seminorm_sq(u, s)?.sqrt();
    let l2 = u.norm_l2();
    if l2 == 0.0 || semi == 0.0 {
        return Err(Error::UndefinedQuotient("zero or constant field".into()));
    }
    Ok(u.norm_lq(q) / (semi.powf(theta) * l2.powf(1.0 - theta)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid1(l: f64, m: usize) -> Grid {
        Grid::new(1, l, m).unwrap()
    }

    #[test]
    fn cosine_mode_eigenvalue() {
        let g = grid1(PI, 64);
        let u = Field::from_fn(g, |x| (2.0 * x[0]).cos());
        let lu = apply_fraclap_spectral(&u, 0.5).unwrap();
        let err = lu
            .values()
            .iter()
            .zip(u.values())
            .map(|(a, b)| (a - 2.0 * b).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-12, "{err}");
    }

    #[test]
    fn constants_in_kernel() {
        let g = grid1(5.0, 32);
        let u = Field::constant(g, 3.0);
        assert!(apply_fraclap_spectral(&u, 0.3).unwrap().max_abs() < 1e-12);
        assert!(gagliardo_seminorm_sq(&u, 0.3).unwrap() < 1e-20);
        let direct = apply_fraclap_direct(&u, 0.3, &[vec![0.0], vec![1.3]], Default::default())
            .unwrap();
        assert!(direct.values.iter().all(|v| v.abs() < 1e-12));
        // a constant does not decay, which is recorded
        assert!(!direct.warnings.is_empty());
        let g2 = Grid::new(2, 2.0, 16).unwrap();
        let u2 = Field::constant(g2, -1.5);
        let d2 = apply_fraclap_direct(&u2, 0.6, &[vec![0.0, 0.5]], Default::default()).unwrap();
        assert!(d2.values[0].abs() < 1e-12);
    }

    #[test]
    fn order_domain_errors() {
        let g = grid1(1.0, 16);
        let u = Field::zeros(g);
        assert!(matches!(
            apply_fraclap_spectral(&u, 1.0),
            Err(Error::ParameterDomain(_))
        ));
        let mut bad = u.clone();
        bad.values_mut()[3] = f64::NAN;
        assert!(matches!(apply_fraclap_spectral(&bad, 0.5), Err(Error::Input(_))));
    }

    #[test]
    fn direct_rejects_points_outside() {
        let g = grid1(4.0, 64);
        let u = Field::from_fn(g, |x| (-x[0] * x[0]).exp());
        assert!(matches!(
            apply_fraclap_direct(&u, 0.5, &[vec![4.5]], Default::default()),
            Err(Error::Domain { .. })
        ));
    }

    #[test]
    fn seminorm_single_mode() {
        let g = grid1(PI, 64);
        let u = Field::from_fn(g, |x| (2.0 * x[0]).cos());
        let v = gagliardo_seminorm_sq(&u, 0.5).unwrap();
        assert!((v - 2.0 * PI).abs() < 1e-12);
        // direct inner product ∫ u (-Δ)^s u
        let lu = apply_fraclap_spectral(&u, 0.5).unwrap();
        assert!((u.dot(&lu) - v).abs() < 1e-12);
        assert_eq!(gagliardo_seminorm_sq(&Field::zeros(g), 0.5).unwrap(), 0.0);
    }

    #[test]
    fn hardy_zero_field_is_error() {
        let g = grid1(10.0, 256);
        assert!(matches!(
            hardy_quotient(&Field::zeros(g), 0.25),
            Err(Error::UndefinedQuotient(_))
        ));
    }

    #[test]
    fn hardy_requires_n_above_2s() {
        let g = grid1(10.0, 256);
        let u = Field::from_fn(g, |x| (-x[0] * x[0]).exp());
        assert!(hardy_quotient(&u, 0.5).is_err());
    }

    #[test]
    fn hardy_weights_integrate_singular_weight() {
        // Σ weights over the box equals ∫_{-L}^{L} |x|^{-2s} dx
        let g = grid1(4.0, 64);
        let w = hardy_weights(&g, 0.25).unwrap();
        let total: f64 = w.iter().sum();
        assert!((total - 2.0 * 4f64.powf(0.5) / 0.5).abs() < 1e-12);
    }

    #[test]
    fn hardy_2d_weights_sum() {
        let g = Grid::new(2, 2.0, 32).unwrap();
        let w = hardy_weights(&g, 0.5).unwrap();
        // ∫_{[-2,2]^2} |x|^{-1} = 8 ∫_0^{π/4} ∫_0^{2/cosθ} dr dθ = 16 asinh(1)
        let total: f64 = w.iter().sum();
        let exact = 16.0 * 1f64.asinh();
        assert!((total - exact).abs() / exact < 2e-3, "{total} vs {exact}");
    }
}
