//! Post-hoc checks on computed solutions: peak location, decay envelope,
//! inactivity of the penalization, the barrier supersolution, the scaling
//! law of the limiting energy, the energy upper bound and concentration.
//!
//! Every check is a pure function of its inputs and returns a serializable
//! report with explicit pass flags.

use serde::{Deserialize, Serialize};

use crate::energy::EnergyContext;
use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::model::{self, ModelParams, NonlinearitySpec, PotentialSpec, Region};
use crate::quad::{self, QuadOptions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakReport {
    pub location: Vec<f64>,
    pub value: f64,
    pub node: Vec<f64>,
    /// Maximum sits within one cell of the region boundary.
    pub boundary_warning: bool,
}

/// Grid argmax over the closure of `region`, refined per axis by the
/// parabola through the three neighbouring nodes.
pub fn locate_peak(u: &Field, region: &Region) -> Result<PeakReport> {
    let g = u.grid();
    let d = g.dim();
    let mut best: Option<(usize, f64)> = None;
    for (i, pt) in g.points().enumerate() {
        if region.contains_closed(&pt[..d]) {
            let v = u.values()[i];
            if best.map_or(true, |b| v > b.1) {
                best = Some((i, v));
            }
        }
    }
    let (idx, v0) = best.ok_or_else(|| Error::Input("no grid node in the peak search region".into()))?;
    let node = g.point(idx)[..d].to_vec();
    let h = g.spacing();
    let m = g.points_per_axis();
    let ij = g.unravel(idx);
    let mut location = node.clone();
    let mut value = v0;
    for a in 0..d {
        let mut lo = ij;
        let mut hi = ij;
        lo[a] = (ij[a] + m - 1) % m;
        hi[a] = (ij[a] + 1) % m;
        let (fm, fp) = (u.values()[g.ravel(lo)], u.values()[g.ravel(hi)]);
        let curv = fm - 2.0 * v0 + fp;
        if curv < 0.0 {
            let shift = (0.5 * (fm - fp) / curv).clamp(-0.5, 0.5);
            location[a] += shift * h;
            value -= 0.125 * (fp - fm).powi(2) / curv;
        }
    }
    let boundary_warning = match region {
        Region::Box { lo, hi } => {
            let l = g.half_extent();
            // the whole box has no boundary to speak of
            let whole = lo.iter().all(|v| *v <= -l) && hi.iter().all(|v| *v >= l);
            !whole && region.boundary_distance(&node) <= h
        }
        _ => region.boundary_distance(&node) <= h,
    };
    Ok(PeakReport { location, value, node, boundary_warning })
}

fn dist(x: &[f64], c: &[f64]) -> f64 {
    x.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecayOptions {
    /// Edge values above this fraction of the maximum count as contamination.
    pub boundary_tol: f64,
    /// Contamination is an error when set, a flag otherwise.
    pub strict: bool,
    /// Inner radius of the fit annulus in units of `ε`.
    pub inner_radius: f64,
}

impl Default for DecayOptions {
    fn default() -> Self {
        DecayOptions { boundary_tol: 1e-8, strict: true, inner_radius: 5.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub c_fit: f64,
    pub alpha_fit: f64,
    pub alpha_window: (f64, f64),
    pub alpha_in_window: bool,
    /// Fitted exponent hit the search ceiling or exceeds the window with
    /// steepening local slopes.
    pub super_algebraic: bool,
    /// Negated log-log slopes over the inner and outer halves of the annulus.
    pub inner_slope: f64,
    pub outer_slope: f64,
    pub fit_radii: (f64, f64),
    pub fit_points: usize,
    pub boundary_relative: f64,
    pub boundary_contaminated: bool,
}

const ALPHA_SEARCH: (f64, f64) = (1e-3, 40.0);

/// Envelope constant and fitted exponent of `u` about `x_eps`.
///
/// `c_fit` is `max u (ε^α + |x-x_ε|^α)/ε^α` with the model `α`. `alpha_fit`
/// is the least-squares exponent of the envelope shape
/// `C ε^a/(ε^a + r^a)` in log space over `inner_radius·ε ≤ r ≤ L/2`.
pub fn decay_envelope_check(
    u: &Field,
    x_eps: &[f64],
    eps: f64,
    alpha: f64,
    alpha_window: (f64, f64),
    opts: DecayOptions,
) -> Result<DecayReport> {
    let g = u.grid();
    let d = g.dim();
    let umax = u.max_abs();
    if !(umax > 0.0) {
        return Err(Error::Input("decay check on a zero field".into()));
    }
    let boundary_relative = u.boundary_max_abs(1) / umax;
    let contaminated = boundary_relative > opts.boundary_tol;
    if contaminated && opts.strict {
        return Err(Error::Truncation(format!(
            "edge value is {boundary_relative:e} of the maximum (limit {:e})",
            opts.boundary_tol
        )));
    }
    let ea = eps.powf(alpha);
    let mut c_fit: f64 = 0.0;
    let (r_lo, r_hi) = (opts.inner_radius * eps, 0.5 * g.half_extent());
    let mut samples = Vec::new();
    for (i, pt) in g.points().enumerate() {
        let r = dist(&pt[..d], x_eps);
        let v = u.values()[i];
        c_fit = c_fit.max(v * (ea + r.powf(alpha)) / ea);
        if r >= r_lo && r <= r_hi && v > 0.0 {
            samples.push((r, v.ln()));
        }
    }
    if samples.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "{} nodes in the fit annulus [{r_lo}, {r_hi}]",
            samples.len()
        )));
    }
    let sse = |a: f64| -> f64 {
        let resid: Vec<f64> = samples
            .iter()
            .map(|(r, lv)| lv - (a * eps.ln() - (eps.powf(a) + r.powf(a)).ln()))
            .collect();
        let mean = resid.iter().sum::<f64>() / resid.len() as f64;
        resid.iter().map(|e| (e - mean).powi(2)).sum()
    };
    let alpha_fit = minimize_log_scan(sse, ALPHA_SEARCH.0, ALPHA_SEARCH.1);
    // local slopes on the inner and outer halves of the annulus (log r)
    let mid = (r_lo.ln() + r_hi.ln()) / 2.0;
    let slope = |pred: &dyn Fn(f64) -> bool| {
        let pts: Vec<(f64, f64)> = samples
            .iter()
            .filter(|(r, _)| pred(r.ln()))
            .map(|(r, lv)| (r.ln(), *lv))
            .collect();
        least_squares_slope(&pts)
    };
    let inner = -slope(&|lr| lr <= mid);
    let outer = -slope(&|lr| lr > mid);
    let at_ceiling = alpha_fit > 0.99 * ALPHA_SEARCH.1;
    let super_algebraic =
        at_ceiling || (alpha_fit > alpha_window.1 && outer.is_finite() && outer > 2.0 * inner.max(0.0) && outer > alpha_window.1);
    Ok(DecayReport {
        c_fit,
        alpha_fit,
        alpha_window,
        alpha_in_window: alpha_fit > alpha_window.0 && alpha_fit < alpha_window.1,
        super_algebraic,
        inner_slope: inner,
        outer_slope: outer,
        fit_radii: (r_lo, r_hi),
        fit_points: samples.len(),
        boundary_relative,
        boundary_contaminated: contaminated,
    })
}

pub(crate) fn least_squares_slope(pts: &[(f64, f64)]) -> f64 {
    if pts.len() < 2 {
        return f64::NAN;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Minimizer of `f` on `[lo, hi]`: log-spaced scan, then golden section
/// around the best scan point.
fn minimize_log_scan(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    let n = 400;
    let at = |k: usize| lo * (hi / lo).powf(k as f64 / n as f64);
    let mut best = 0;
    let mut best_v = f64::INFINITY;
    for k in 0..=n {
        let v = f(at(k));
        if v < best_v {
            best_v = v;
            best = k;
        }
    }
    let (mut a, mut b) = (at(best.saturating_sub(1)), at((best + 1).min(n)));
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a) <= 1e-13 * b.abs() {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenalizationOffender {
    pub x: Vec<f64>,
    pub u_pow: f64,
    pub penalization: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenalizationReport {
    pub pass: bool,
    pub checked_nodes: usize,
    pub violations: usize,
    /// Largest `u^{p-2}/P_ε` off `Λ`.
    pub worst_ratio: f64,
    pub worst_x: Vec<f64>,
    pub offenders: Vec<PenalizationOffender>,
}

/// Pointwise `u₊^{p-2} ≤ P_ε (1 + 1e-6)` at every node off `Λ`.
pub fn penalization_consistency_check(u: &Field, params: &ModelParams, spec: &PotentialSpec) -> Result<PenalizationReport> {
    u.ensure_finite("solution")?;
    let g = u.grid();
    let d = g.dim();
    let p = params.p();
    let mut rep = PenalizationReport {
        pass: true,
        checked_nodes: 0,
        violations: 0,
        worst_ratio: 0.0,
        worst_x: vec![],
        offenders: vec![],
    };
    for (i, pt) in g.points().enumerate() {
        let x = &pt[..d];
        if spec.lambda_region.contains(x) {
            continue;
        }
        rep.checked_nodes += 1;
        let up = u.values()[i].max(0.0).powf(p - 2.0);
        let pen = model::penalization_potential(params, spec, x);
        let ratio = if up == 0.0 { 0.0 } else { up / pen };
        if ratio > rep.worst_ratio || rep.worst_x.is_empty() {
            rep.worst_ratio = ratio;
            rep.worst_x = x.to_vec();
        }
        if up > pen * (1.0 + 1e-6) {
            rep.violations += 1;
            if rep.offenders.len() < 32 {
                rep.offenders.push(PenalizationOffender { x: x.to_vec(), u_pow: up, penalization: pen });
            }
        }
    }
    rep.pass = rep.violations == 0;
    Ok(rep)
}

/// `‖ε^{2s}(-Δ)^s u + V u - f(u₊)‖₂` without the penalization cap.
pub fn unpenalized_residual_norm(
    u: &Field,
    params: &ModelParams,
    spec: &PotentialSpec,
    nl: &NonlinearitySpec,
) -> Result<f64> {
    let ctx = EnergyContext::penalized(params, spec, nl, u.grid())?;
    let au = ctx.frac(u);
    let values: Vec<f64> = u
        .values()
        .iter()
        .enumerate()
        .map(|(j, &v)| {
            let f = if v > 0.0 { nl.f(params.p(), v) } else { 0.0 };
            ctx.kinetic_coeff() * au[j] + ctx.potential()[j] * v - f
        })
        .collect();
    Ok(Field::new(*u.grid(), values)?.norm_l2())
}

/// Radial barrier `f(x) = η(|x|/R) R^{-α} + (1 - η(|x|/R)) |x|^{-α}` with a
/// quintic cutoff `η` that drops from 1 at `t = 1` to 0 at `t = 1 + β`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BarrierSpec {
    pub alpha: f64,
    pub beta: f64,
    pub radius: f64,
}

impl BarrierSpec {
    pub fn from_params(params: &ModelParams) -> Self {
        BarrierSpec { alpha: params.alpha(), beta: params.beta(), radius: params.barrier_radius() }
    }

    /// Cutoff profile in `t = |x|/R`; `C²` with vanishing first and second
    /// derivatives at both knots.
    pub fn eta(&self, t: f64) -> f64 {
        if t <= 1.0 {
            1.0
        } else if t >= 1.0 + self.beta {
            0.0
        } else {
            let z = (t - 1.0) / self.beta;
            1.0 - z * z * z * (10.0 - 15.0 * z + 6.0 * z * z)
        }
    }

    /// Barrier value at radius `r`.
    pub fn value(&self, r: f64) -> f64 {
        let e = self.eta(r / self.radius);
        let inner = self.radius.powf(-self.alpha);
        if e == 1.0 {
            inner
        } else {
            e * inner + (1.0 - e) * r.powf(-self.alpha)
        }
    }
}

/// `(-Δ)^s` of a radial profile at `x`, by adaptive quadrature of the
/// symmetrized difference in polar form with an analytic-rate tail map.
/// `knots` are radii where the profile has reduced smoothness.
pub fn frac_lap_radial(
    profile: &dyn Fn(f64) -> f64,
    x: &[f64],
    s: f64,
    knots: &[f64],
    far_decay: f64,
) -> Result<f64> {
    let n = x.len();
    let c = quad::frac_normalization(n, s);
    let rx = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let f0 = profile(rx);
    let opts = QuadOptions { abs_tol: 1e-15, rel_tol: 1e-11, max_panels: 20000 };
    // angular mean of f(x) - f(x + r θ) over the unit sphere
    let diff = |r: f64| -> Result<f64> {
        match n {
            1 => Ok(f0 - 0.5 * (profile((rx + r).abs()) + profile((rx - r).abs()))),
            _ => {
                let inner = quad::integrate(
                    |phi: f64| f0 - profile((rx * rx + r * r + 2.0 * rx * r * phi.cos()).max(0.0).sqrt()),
                    0.0,
                    std::f64::consts::PI,
                    &[],
                    QuadOptions { abs_tol: 1e-16, rel_tol: 1e-12, max_panels: 2000 },
                )?;
                Ok(inner / std::f64::consts::PI)
            }
        }
    };
    // (-Δ)^s f(x) = C |S^{N-1}| ∫_0^∞ r^{-1-2s} mean_θ (f(x) - f(x+rθ)) dr
    let area = quad::sphere_area(n);
    let mut breaks: Vec<f64> = vec![];
    for &k in knots {
        for b in [(rx - k).abs(), rx + k] {
            if b > 0.0 {
                breaks.push(b);
            }
        }
    }
    breaks.push(rx);
    let cut = 2.0 * (rx + knots.iter().fold(0.0f64, |m, v| m.max(*v))) + 1.0;
    let mut err: Option<Error> = None;
    let mut body = |r: f64| -> f64 {
        if r == 0.0 {
            return 0.0;
        }
        match diff(r) {
            Ok(v) => v * r.powf(-1.0 - 2.0 * s),
            Err(e) => {
                err.get_or_insert(e);
                0.0
            }
        }
    };
    let near = quad::integrate(&mut body, 0.0, cut, &breaks, opts)?;
    let far = quad::integrate_to_infinity(&mut body, cut, 1.0 / (2.0 * s).min(far_decay), opts)?;
    if let Some(e) = err {
        return Err(e);
    }
    Ok(c * area * (near + far))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarrierSample {
    pub point: Vec<f64>,
    pub radius: f64,
    pub barrier: f64,
    pub kernel_term: f64,
    pub potential_term: f64,
    pub penalization_term: f64,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarrierReport {
    pub spec: BarrierSpec,
    pub eps: f64,
    pub center: Vec<f64>,
    pub samples: Vec<BarrierSample>,
    pub pass: bool,
}

/// Default sample radii `{1.1, 2, 4, 10}·R`.
pub fn default_barrier_radii(radius: f64) -> Vec<f64> {
    [1.1, 2.0, 4.0, 10.0].iter().map(|k| k * radius).collect()
}

/// Evaluates `(-Δ)^s f + V(εx + x_ε) f - P_ε(εx + x_ε) f` at `±r e₁` for
/// each sample radius; passes when every value is `≥ -1e-6 f(x)`.
/// `include_penalization = false` drops the last term.
pub fn barrier_supersolution_check(
    bspec: &BarrierSpec,
    params: &ModelParams,
    spec: &PotentialSpec,
    center: &[f64],
    radii: &[f64],
    include_penalization: bool,
) -> Result<BarrierReport> {
    let n = params.dim();
    let s = params.s();
    if !(bspec.alpha > 0.0 && bspec.alpha <= n as f64 - 2.0 * s + 1e-12) {
        return Err(Error::ParameterDomain(format!(
            "barrier exponent {} outside (0, N - 2s]",
            bspec.alpha
        )));
    }
    if !(bspec.beta > 0.0 && bspec.radius > 0.0) {
        return Err(Error::ParameterDomain("barrier needs beta > 0 and R > 0".into()));
    }
    if radii.iter().any(|r| *r <= bspec.radius) {
        return Err(Error::ParameterDomain("barrier samples must lie outside B_R".into()));
    }
    let eps = params.eps();
    let profile = |r: f64| bspec.value(r);
    let knots = [bspec.radius, bspec.radius * (1.0 + bspec.beta)];
    let mut samples = Vec::new();
    for &r in radii {
        for sign in [1.0, -1.0] {
            let mut x = vec![0.0; n];
            x[0] = sign * r;
            let kernel = frac_lap_radial(&profile, &x, s, &knots, bspec.alpha + 2.0 * s)?;
            let f = profile(r);
            let y: Vec<f64> = (0..n).map(|k| eps * x[k] + center[k]).collect();
            let v = model::evaluate_potential(spec, &y) * f;
            let pen = if include_penalization {
                model::penalization_potential(params, spec, &y) * f
            } else {
                0.0
            };
            let value = kernel + v - pen;
            let tol = 1e-6 * f;
            samples.push(BarrierSample {
                point: x,
                radius: r,
                barrier: f,
                kernel_term: kernel,
                potential_term: v,
                penalization_term: pen,
                value,
                tolerance: tol,
                pass: value >= -tol,
            });
        }
    }
    Ok(BarrierReport {
        spec: *bspec,
        eps,
        center: center.to_vec(),
        pass: samples.iter().all(|s| s.pass),
        samples,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingEntry {
    pub a: f64,
    pub energy: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub expected_slope: f64,
    pub fitted_slope: f64,
    pub relative_error: f64,
    pub monotone: bool,
    pub used: Vec<ScalingEntry>,
    pub excluded: Vec<ScalingEntry>,
    pub pass: bool,
}

/// `p/(p-2) - N/(2s)`.
pub fn scaling_exponent(n: usize, s: f64, p: f64) -> f64 {
    p / (p - 2.0) - n as f64 / (2.0 * s)
}

/// Log-log fit of `C(a)` against the predicted exponent, to 1% relative.
pub fn scaling_law_check(entries: &[ScalingEntry], n: usize, s: f64, p: f64) -> Result<ScalingReport> {
    scaling_law_check_tol(entries, n, s, p, 0.01)
}

pub fn scaling_law_check_tol(entries: &[ScalingEntry], n: usize, s: f64, p: f64, rel_tol: f64) -> Result<ScalingReport> {
    let (used, excluded): (Vec<_>, Vec<_>) = entries
        .iter()
        .cloned()
        .partition(|e| e.converged && e.energy > 0.0 && e.a > 0.0);
    if used.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "scaling fit needs at least 3 converged values of a, got {}",
            used.len()
        )));
    }
    let expected = scaling_exponent(n, s, p);
    let pts: Vec<(f64, f64)> = used.iter().map(|e| (e.a.ln(), e.energy.ln())).collect();
    let fitted = least_squares_slope(&pts);
    let relative_error = ((fitted - expected) / expected).abs();
    let mut sorted = used.clone();
    sorted.sort_by(|a, b| a.a.total_cmp(&b.a));
    let monotone = expected <= 0.0 || sorted.windows(2).all(|w| w[1].energy > w[0].energy);
    Ok(ScalingReport {
        expected_slope: expected,
        fitted_slope: fitted,
        relative_error,
        monotone,
        pass: relative_error <= rel_tol && monotone,
        used,
        excluded,
    })
}

/// Per-`ε` data extracted from a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationEntry {
    pub eps: f64,
    pub x_eps: Vec<f64>,
    pub peak_value: f64,
    pub v_at_peak: f64,
    pub normalized_energy: f64,
    /// `sup |u|` over `U` minus `B_{10ε}(x_ε)`; `None` when no node lies there.
    pub outside_sup: Option<f64>,
    /// `sup |u|` over `B_ε(x_ε)`.
    pub inner_sup: f64,
    pub peak_in_lambda: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationReport {
    pub entries: Vec<ConcentrationEntry>,
    pub min_lambda_v: f64,
    pub final_gap_relative: f64,
    pub gap_nonincreasing: bool,
    pub final_gap_ok: bool,
    /// Ratios of consecutive outside sups, over entries where both exist.
    pub outside_ratios: Vec<f64>,
    pub outside_decreasing: bool,
    /// Required ratio per halving of `ε`.
    pub outside_ratio_limit: f64,
    pub nondegenerate_floor: f64,
    pub nondegenerate: bool,
    pub peaks_in_lambda: bool,
    pub pass: bool,
}

/// Solution data needed by [`concentration_check`].
#[derive(Debug, Clone)]
pub struct SweepSample<'a> {
    pub eps: f64,
    pub solution: &'a Field,
    pub peak_location: Vec<f64>,
    pub peak_value: f64,
    pub energy: f64,
}

/// Smallest `V` over `Λ` nodes.
pub fn min_lambda_potential(spec: &PotentialSpec, grid: &Grid) -> Result<f64> {
    crate::solver::potential_minimizer(spec, grid).map(|(_, v)| v)
}

pub const OUTSIDE_RADIUS: f64 = 10.0;
pub const OUTSIDE_DECAY_PER_HALVING: f64 = 0.7;
pub const FINAL_GAP_TOL: f64 = 0.05;

/// Concentration diagnostics across a sweep. `limiting_peak` is the peak of
/// the limiting ground state at `a = min_Λ V`; half of it is the
/// nondegeneracy floor for `sup_{B_ε(x_ε)} u`.
pub fn concentration_check(samples: &[SweepSample], spec: &PotentialSpec, limiting_peak: f64) -> Result<ConcentrationReport> {
    if samples.len() < 2 {
        return Err(Error::InsufficientData("concentration check needs at least 2 sweep entries".into()));
    }
    let mut samples: Vec<&SweepSample> = samples.iter().collect();
    samples.sort_by(|a, b| b.eps.total_cmp(&a.eps));
    let grid = *samples[0].solution.grid();
    let d = grid.dim();
    let min_v = min_lambda_potential(spec, &grid)?;
    let mut entries = Vec::new();
    for smp in &samples {
        let x = &smp.peak_location;
        let mut outside: Option<f64> = None;
        let mut inner: f64 = 0.0;
        for (i, pt) in smp.solution.grid().points().enumerate() {
            let y = &pt[..d];
            let r = dist(y, x);
            let v = smp.solution.values()[i].abs();
            if spec.u_region.contains(y) && r >= OUTSIDE_RADIUS * smp.eps {
                outside = Some(outside.map_or(v, |o| o.max(v)));
            }
            if r <= smp.eps {
                inner = inner.max(v);
            }
        }
        entries.push(ConcentrationEntry {
            eps: smp.eps,
            x_eps: x.clone(),
            peak_value: smp.peak_value,
            v_at_peak: model::evaluate_potential(spec, x),
            normalized_energy: smp.energy / smp.eps.powi(d as i32),
            outside_sup: outside,
            inner_sup: inner,
            peak_in_lambda: spec.lambda_region.contains_closed(x),
        });
    }
    let gaps: Vec<f64> = entries.iter().map(|e| (e.v_at_peak - min_v).abs()).collect();
    let gap_nonincreasing = gaps.windows(2).all(|w| w[1] <= w[0] + 1e-12 * min_v);
    let final_gap_relative = gaps[gaps.len() - 1] / min_v;
    let defined: Vec<(f64, f64)> = entries.iter().filter_map(|e| e.outside_sup.map(|o| (e.eps, o))).collect();
    let outside_ratios: Vec<f64> = defined.windows(2).map(|w| w[1].1 / w[0].1).collect();
    let outside_decreasing = !outside_ratios.is_empty()
        && defined.windows(2).zip(&outside_ratios).all(|(w, r)| {
            let halvings = (w[0].0 / w[1].0).log2();
            *r <= OUTSIDE_DECAY_PER_HALVING.powf(halvings)
        });
    let floor = 0.5 * limiting_peak;
    let nondegenerate = entries.iter().all(|e| e.inner_sup >= floor);
    let peaks_in_lambda = entries.iter().all(|e| e.peak_in_lambda);
    let final_gap_ok = final_gap_relative <= FINAL_GAP_TOL;
    Ok(ConcentrationReport {
        pass: gap_nonincreasing && final_gap_ok && outside_decreasing && nondegenerate && peaks_in_lambda,
        entries,
        min_lambda_v: min_v,
        final_gap_relative,
        gap_nonincreasing,
        final_gap_ok,
        outside_ratios,
        outside_decreasing,
        outside_ratio_limit: OUTSIDE_DECAY_PER_HALVING,
        nondegenerate_floor: floor,
        nondegenerate,
        peaks_in_lambda,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpperBoundEntry {
    pub eps: f64,
    pub normalized_energy: f64,
    pub bound: f64,
    pub slack: f64,
    pub below_bound: bool,
    pub within_band: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpperBoundReport {
    pub limiting_energy: f64,
    pub entries: Vec<UpperBoundEntry>,
    pub pass: bool,
}

/// Default slack per `ε`: 15%, 10%, 5% at 0.2, 0.1, 0.05.
pub const DEFAULT_SLACK: [(f64, f64); 3] = [(0.2, 0.15), (0.1, 0.10), (0.05, 0.05)];

/// Slack of the schedule entry nearest to `eps` in log scale.
pub fn slack_for(eps: f64, schedule: &[(f64, f64)]) -> f64 {
    schedule
        .iter()
        .min_by(|a, b| (a.0.ln() - eps.ln()).abs().total_cmp(&(b.0.ln() - eps.ln()).abs()))
        .map(|e| e.1)
        .unwrap_or(0.05)
}

/// `c_ε/ε^N ≤ C(min_Λ V)(1 + slack(ε))`, and `|c_ε/ε^N / C - 1| ≤ slack`.
pub fn energy_upper_bound_check(report: &ConcentrationReport, limiting: f64, schedule: &[(f64, f64)]) -> UpperBoundReport {
    let entries: Vec<UpperBoundEntry> = report
        .entries
        .iter()
        .map(|e| {
            let slack = slack_for(e.eps, schedule);
            UpperBoundEntry {
                eps: e.eps,
                normalized_energy: e.normalized_energy,
                bound: limiting * (1.0 + slack),
                slack,
                below_bound: e.normalized_energy <= limiting * (1.0 + slack),
                within_band: (e.normalized_energy / limiting - 1.0).abs() <= slack,
            }
        })
        .collect();
    UpperBoundReport {
        limiting_energy: limiting,
        pass: entries.iter().all(|e| e.below_bound && e.within_band),
        entries,
    }
}

/// One row of the per-`ε` table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTableRow {
    pub eps: f64,
    pub x_eps_0: f64,
    pub x_eps_1: Option<f64>,
    pub v_at_peak: f64,
    pub normalized_energy: f64,
    pub c_fit: Option<f64>,
    pub alpha_fit: Option<f64>,
    pub outside_sup: Option<f64>,
    pub pass_upper_bound: Option<bool>,
    pub pass_penalization: Option<bool>,
    pub pass_decay: Option<bool>,
}

pub fn table_to_csv(rows: &[SweepTableRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| Error::Input(format!("csv buffer: {e}")))
}

pub fn table_from_csv(bytes: &[u8]) -> Result<Vec<SweepTableRow>> {
    let mut rdr = csv::Reader::from_reader(bytes);
    let mut out = Vec::new();
    for r in rdr.deserialize() {
        out.push(r?);
    }
    Ok(out)
}

/// `⟨J'(t u), u⟩` sign changes and the location of the fiber maximum of
/// `t ↦ J(t u)` on `[0.5, 1.5]`; used to confirm `t = 1` for solutions.
pub fn fiber_maximum(ctx: &EnergyContext, u: &Field) -> Result<f64> {
    let (t, _) = ctx.nehari_project(u)?;
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn peak_of_shifted_gaussian() {
        let g = Grid::new(1, 4.0, 512).unwrap();
        let u = Field::from_fn(g, |x| (-(x[0] - 0.3).powi(2) / 0.01).exp());
        let rep = locate_peak(&u, &Region::ball(vec![0.0], 1.0)).unwrap();
        assert!((rep.location[0] - 0.3).abs() < g.spacing());
        assert!(!rep.boundary_warning);
        let c = Field::constant(g, 1.0);
        assert!(locate_peak(&c, &Region::ball(vec![0.0], 1.0)).unwrap().boundary_warning);
    }

    #[test]
    fn envelope_self_test() {
        let g = Grid::new(1, 10.0, 4096).unwrap();
        let (eps, alpha) = (0.05f64, 0.45f64);
        let u = Field::from_fn(g, |x| eps.powf(alpha) / (eps.powf(alpha) + x[0].abs().powf(alpha)));
        let opts = DecayOptions { strict: false, ..DecayOptions::default() };
        let rep = decay_envelope_check(&u, &[0.0], eps, alpha, (1.0 / 3.0, 0.5), opts).unwrap();
        assert!((rep.c_fit - 1.0).abs() < 1e-6, "{}", rep.c_fit);
        assert!((rep.alpha_fit - alpha).abs() < 0.01 * alpha, "{}", rep.alpha_fit);
        assert!(rep.alpha_in_window && !rep.super_algebraic);
        // strict mode refuses the algebraic edge value
        assert!(matches!(
            decay_envelope_check(&u, &[0.0], eps, alpha, (1.0 / 3.0, 0.5), DecayOptions::default()),
            Err(Error::Truncation(_))
        ));
    }

    #[test]
    fn gaussian_is_super_algebraic() {
        let g = Grid::new(1, 10.0, 4096).unwrap();
        let u = Field::from_fn(g, |x| (-x[0] * x[0]).exp());
        let opts = DecayOptions { strict: false, ..DecayOptions::default() };
        let rep = decay_envelope_check(&u, &[0.0], 0.05, 0.45, (1.0 / 3.0, 0.5), opts).unwrap();
        assert!(rep.alpha_fit > 0.5 && rep.super_algebraic, "{rep:?}");
    }

    #[test]
    fn penalization_examples() {
        let params = ModelParams::default_1d().with_eps(0.05).unwrap();
        let spec = PotentialSpec::default_bump(1);
        let g = Grid::new(1, 4.0, 256).unwrap();
        let inside = Field::from_fn(g, |x| if x[0].abs() < 1.0 { 1.0 } else { 0.0 });
        assert!(penalization_consistency_check(&inside, &params, &spec).unwrap().pass);
        let ones = Field::constant(g, 1.0);
        let rep = penalization_consistency_check(&ones, &params, &spec).unwrap();
        assert!(!rep.pass && !rep.offenders.is_empty() && rep.offenders.len() <= 32);
    }

    #[test]
    fn eta_is_monotone_c2() {
        let b = BarrierSpec { alpha: 0.45, beta: 0.25, radius: 2.0 };
        let mut prev = 1.0;
        for k in 0..=1000 {
            let t = 0.9 + 0.5 * k as f64 / 1000.0;
            let e = b.eta(t);
            assert!(e <= prev + 1e-15 && (0.0..=1.0).contains(&e));
            prev = e;
        }
        // one-sided second differences vanish at the knots
        let h = 1e-5;
        for t0 in [1.0, 1.25 - 2.0 * h] {
            let d2 = (b.eta(t0 + 2.0 * h) - 2.0 * b.eta(t0 + h) + b.eta(t0)) / (h * h);
            assert!(d2.abs() < 0.1, "{t0}: {d2}");
        }
        assert_eq!(b.value(1.0), 2f64.powf(-0.45));
        assert!((b.value(3.0) - 3f64.powf(-0.45)).abs() < 1e-15);
    }

    #[test]
    fn radial_fraclap_matches_riesz_power_far_out() {
        // (-Δ)^s |x|^{-α} = c_α |x|^{-α-2s}; a capped core adds a positive term
        // that decays like |x|^{-N-2s}, so compare the difference to that rate
        let (s, alpha) = (0.25, 0.45);
        let b = BarrierSpec { alpha, beta: 0.25, radius: 1.0 };
        let profile = |r: f64| b.value(r);
        let c_alpha = quad::riesz_power_constant(1, s, alpha);
        let mut prev = f64::INFINITY;
        for r in [20.0, 40.0, 80.0] {
            let got = frac_lap_radial(&profile, &[r], s, &[1.0, 1.25], alpha + 2.0 * s).unwrap();
            let core = got - c_alpha * r.powf(-alpha - 2.0 * s);
            assert!(core > 0.0);
            let scaled = core * r.powf(1.0 + 2.0 * s);
            if prev.is_finite() {
                assert!((scaled / prev - 1.0).abs() < 0.1, "{r}: {scaled} vs {prev}");
            }
            prev = scaled;
        }
    }

    #[test]
    fn scaling_needs_three_points() {
        let one = [ScalingEntry { a: 1.0, energy: 1.0, converged: true }];
        assert!(matches!(scaling_law_check(&one, 1, 0.25, 3.5), Err(Error::InsufficientData(_))));
        let e = scaling_exponent(1, 0.25, 3.5);
        assert!((e - 1.0 / 3.0).abs() < 1e-15);
        let exact: Vec<ScalingEntry> = [1.0, 2.0, 4.0]
            .iter()
            .map(|&a: &f64| ScalingEntry { a, energy: 0.7 * a.powf(e), converged: true })
            .collect();
        let rep = scaling_law_check(&exact, 1, 0.25, 3.5).unwrap();
        assert!(rep.pass && rep.relative_error < 1e-12);
    }

    #[test]
    fn upper_bound_synthetic_failure() {
        let entry = |eps: f64, e: f64| ConcentrationEntry {
            eps,
            x_eps: vec![0.0],
            peak_value: 1.0,
            v_at_peak: 1.0,
            normalized_energy: e,
            outside_sup: None,
            inner_sup: 1.0,
            peak_in_lambda: true,
        };
        let rep = ConcentrationReport {
            entries: vec![entry(0.2, 1.0), entry(0.1, 2.0)],
            min_lambda_v: 1.0,
            final_gap_relative: 0.0,
            gap_nonincreasing: true,
            final_gap_ok: true,
            outside_ratios: vec![],
            outside_decreasing: true,
            outside_ratio_limit: 0.7,
            nondegenerate_floor: 0.0,
            nondegenerate: true,
            peaks_in_lambda: true,
            pass: true,
        };
        let ub = energy_upper_bound_check(&rep, 1.0, &DEFAULT_SLACK);
        assert!(ub.entries[0].below_bound && !ub.entries[1].below_bound && !ub.pass);
    }

    #[test]
    fn table_round_trip() {
        let rows = vec![SweepTableRow {
            eps: 0.1,
            x_eps_0: 1.0 / 3.0,
            x_eps_1: None,
            v_at_peak: std::f64::consts::PI,
            normalized_energy: 0.123456789012345678,
            c_fit: Some(1.5),
            alpha_fit: None,
            outside_sup: Some(1e-300),
            pass_upper_bound: Some(true),
            pass_penalization: None,
            pass_decay: Some(false),
        }];
        assert_eq!(table_from_csv(&table_to_csv(&rows).unwrap()).unwrap(), rows);
    }
}
