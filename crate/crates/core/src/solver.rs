//! Critical points of the limiting and penalized functionals by
//! Nehari-projected, Sobolev-preconditioned descent, plus ε-sweeps.
//!
//! Each step moves along `-K r`, where `r` is the residual and `K` is the
//! multiplier `(ε^{2s}|ξ|^{2s} + c)^{-1}`. It then clips to the nonnegative
//! cone, rescales onto the Nehari manifold, and backtracks on the projected
//! energy.

use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::energy::{EnergyBreakdown, EnergyContext};
use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::model::{self, ModelParams, NonlinearitySpec, PotentialSpec, Region};
use crate::spectral::{BandLimited, Spectral};
use crate::verify;

/// Starting field for a solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialGuess {
    Gaussian { center: Vec<f64>, width: f64, amplitude: f64 },
    /// Field dump written by a previous run (CSV or binary with header).
    FieldFile { path: PathBuf },
    /// Rescaled limiting ground state at the potential minimum (penalized
    /// problems) or a unit Gaussian (limiting problems).
    Rescaled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub max_iters: usize,
    /// Stop when `‖r‖₂ ≤ gradient_tol ‖u‖₂`.
    pub gradient_tol: f64,
    pub armijo: f64,
    pub initial_step: f64,
    pub max_halvings: usize,
    /// Shift `c` of the preconditioner; defaults to `a`, or to `inf_Λ V`.
    pub preconditioner_shift: Option<f64>,
    pub initial_guess: InitialGuess,
    /// Relative amplitude of a seeded smooth perturbation of the initial guess.
    pub perturbation: f64,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iters: 3000,
            gradient_tol: 1e-8,
            armijo: 1e-4,
            initial_step: 1.0,
            max_halvings: 40,
            preconditioner_shift: None,
            initial_guess: InitialGuess::Rescaled,
            perturbation: 0.0,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gradient_tol > 0.0 && self.gradient_tol <= 1e-2) {
            return Err(Error::Config(format!(
                "solver.gradient_tol must lie in (0, 1e-2], got {}",
                self.gradient_tol
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::Config("solver.max_iters must be at least 1".into()));
        }
        if !(self.armijo > 0.0 && self.armijo < 0.5) {
            return Err(Error::Config("solver.armijo must lie in (0, 1/2)".into()));
        }
        if !(self.initial_step > 0.0) {
            return Err(Error::Config("solver.initial_step must be positive".into()));
        }
        if let Some(c) = self.preconditioner_shift {
            if !(c > 0.0) {
                return Err(Error::Config("solver.preconditioner_shift must be positive".into()));
            }
        }
        if !(self.perturbation >= 0.0 && self.perturbation.is_finite()) {
            return Err(Error::Config("solver.perturbation must be >= 0".into()));
        }
        if let InitialGuess::Gaussian { width, amplitude, .. } = &self.initial_guess {
            if !(*width > 0.0 && *amplitude > 0.0) {
                return Err(Error::Config("gaussian initial guess needs positive width and amplitude".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SolverResult {
    pub solution: Field,
    pub energy: EnergyBreakdown,
    pub residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub peak_location: Vec<f64>,
    pub peak_value: f64,
    pub restarts: usize,
    pub problem: Problem,
}

/// What was solved; echoed into summaries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Problem {
    Limiting { a: f64, s: f64, p: f64 },
    Penalized { params: ModelParams, nonlinearity: NonlinearitySpec },
}

impl SolverResult {
    /// Mountain-pass level `c_ε` (or `C(a)`), the energy of the critical point.
    pub fn mountain_pass_value(&self) -> f64 {
        self.energy.total
    }

    pub fn relative_residual(&self) -> f64 {
        self.residual_norm / self.solution.norm_l2()
    }

    pub fn summary(&self) -> SolverSummary {
        SolverSummary {
            problem: self.problem.clone(),
            grid: *self.solution.grid(),
            energy: self.energy,
            mountain_pass_value: self.mountain_pass_value(),
            residual_norm: self.residual_norm,
            relative_residual: self.relative_residual(),
            iterations: self.iterations,
            converged: self.converged,
            peak_location: self.peak_location.clone(),
            peak_value: self.peak_value,
            min_value: self.solution.min(),
            restarts: self.restarts,
        }
    }
}

/// Serializable part of a [`SolverResult`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverSummary {
    pub problem: Problem,
    pub grid: Grid,
    pub energy: EnergyBreakdown,
    pub mountain_pass_value: f64,
    pub residual_norm: f64,
    pub relative_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub peak_location: Vec<f64>,
    pub peak_value: f64,
    pub min_value: f64,
    pub restarts: usize,
}

struct Descent {
    solution: Field,
    energy: EnergyBreakdown,
    residual_norm: f64,
    iterations: usize,
    converged: bool,
}

/// Runs the projected descent from `u0` on an arbitrary context.
fn descend(ctx: &EnergyContext, u0: &Field, shift: f64, cfg: &SolverConfig) -> Result<Descent> {
    let spectral = ctx.spectral();
    let (eps2s, s) = (ctx.kinetic_coeff(), ctx.s());
    let (_, mut u) = ctx.nehari_project(&u0.map(|v| v.max(0.0)))?;
    let mut energy = ctx.energy(&u)?;
    let mut residual = ctx.gradient(&u)?;
    let mut rnorm = residual.norm_l2();
    let mut it = 0;
    // roundoff floor for energy comparisons near convergence
    let noise = |e: f64| 64.0 * f64::EPSILON * e.abs().max(1e-300);
    while it < cfg.max_iters {
        if rnorm <= cfg.gradient_tol * u.norm_l2() {
            return Ok(Descent { solution: u, energy, residual_norm: rnorm, iterations: it, converged: true });
        }
        it += 1;
        let dir = spectral.apply_radial(residual.values(), |xi| {
            let k = if xi == 0.0 { 0.0 } else { xi.powf(2.0 * s) };
            -1.0 / (eps2s * k + shift)
        });
        let dir = Field::new(*u.grid(), dir)?;
        let slope = residual.dot(&dir);
        let mut tau = cfg.initial_step;
        let mut accepted = None;
        for _ in 0..=cfg.max_halvings {
            let trial = u.axpy(tau, &dir).map(|v| v.max(0.0));
            if let Ok((_, w)) = ctx.nehari_project(&trial) {
                let e = ctx.energy(&w)?;
                if e.total <= energy.total + cfg.armijo * tau * slope + noise(energy.total) {
                    let r = ctx.gradient(&w)?;
                    let rn = r.norm_l2();
                    // inside the roundoff band only residual decrease counts
                    if e.total <= energy.total + cfg.armijo * tau * slope || rn < rnorm {
                        accepted = Some((w, e, r, rn));
                        break;
                    }
                }
            }
            tau *= 0.5;
        }
        match accepted {
            Some((w, e, r, rn)) => {
                u = w;
                energy = e;
                residual = r;
                rnorm = rn;
            }
            None => break,
        }
    }
    let converged = rnorm <= cfg.gradient_tol * u.norm_l2();
    Ok(Descent { solution: u, energy, residual_norm: rnorm, iterations: it, converged })
}

fn gaussian(grid: &Grid, center: &[f64], width: f64, amplitude: f64) -> Result<Field> {
    if center.len() != grid.dim() {
        return Err(Error::Config("initial guess center has wrong dimension".into()));
    }
    Ok(Field::from_fn(*grid, |x| {
        let r2: f64 = x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
        amplitude * (-r2 / (width * width)).exp()
    }))
}

/// Smooth multiplicative noise `1 + amp·η` with `η` a seeded low-pass field.
fn perturb(u: &Field, amp: f64, seed: u64) -> Field {
    if amp == 0.0 {
        return u.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw: Vec<f64> = (0..u.grid().len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let sp = Spectral::new(u.grid());
    let kmax = 8.0 * std::f64::consts::PI / u.grid().half_extent();
    let smooth = sp.apply_radial(&raw, |xi| (-(xi / kmax).powi(2)).exp());
    let peak = smooth.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    let values = u
        .values()
        .iter()
        .zip(&smooth)
        .map(|(v, e)| v * (1.0 + amp * e / peak))
        .collect();
    Field::new(*u.grid(), values).expect("same grid")
}

fn load_guess(path: &PathBuf, grid: &Grid) -> Result<Field> {
    let u = crate::io::read_field(path)?;
    if u.grid() != grid {
        return Err(Error::Config(format!(
            "initial field {} has grid {:?}, expected {:?}",
            path.display(),
            u.grid(),
            grid
        )));
    }
    Ok(u)
}

fn solve_with_restart(
    ctx: &EnergyContext,
    u0: Field,
    shift: f64,
    cfg: &SolverConfig,
) -> Result<(Descent, usize)> {
    let trivial = |d: &Descent| d.solution.max_abs() < 1e-8;
    match descend(ctx, &u0, shift, cfg) {
        Ok(d) if !trivial(&d) => Ok((d, 0)),
        Ok(_) | Err(Error::Projection(_)) => {
            let retry = descend(ctx, &u0.scaled(4.0), shift, cfg);
            match retry {
                Ok(d) if !trivial(&d) => Ok((d, 1)),
                Ok(d) => Err(Error::TrivialSolution(d.solution.max_abs())),
                Err(Error::Projection(_)) => Err(Error::TrivialSolution(0.0)),
                Err(e) => Err(e),
            }
        }
        Err(e) => Err(e),
    }
}

/// Ground state of `(-Δ)^s v + a v = v^{p-1}` on `grid`.
pub fn limiting_ground_state(a: f64, s: f64, p: f64, grid: &Grid, cfg: &SolverConfig) -> Result<SolverResult> {
    cfg.validate()?;
    let ctx = EnergyContext::limiting(a, s, p, grid)?;
    let d = grid.dim();
    let u0 = match &cfg.initial_guess {
        InitialGuess::Gaussian { center, width, amplitude } => gaussian(grid, center, *width, *amplitude)?,
        InitialGuess::FieldFile { path } => load_guess(path, grid)?,
        InitialGuess::Rescaled => gaussian(
            grid,
            &vec![0.0; d],
            a.powf(-0.5 / s),
            a.powf(1.0 / (p - 2.0)),
        )?,
    };
    let u0 = perturb(&u0, cfg.perturbation, cfg.seed);
    let shift = cfg.preconditioner_shift.unwrap_or(a);
    let (run, restarts) = solve_with_restart(&ctx, u0, shift, cfg)?;
    let whole = Region::Box {
        lo: vec![-grid.half_extent(); d],
        hi: vec![grid.half_extent(); d],
    };
    let peak = verify::locate_peak(&run.solution, &whole)?;
    Ok(SolverResult {
        solution: run.solution,
        energy: run.energy,
        residual_norm: run.residual_norm,
        iterations: run.iterations,
        converged: run.converged,
        peak_location: peak.location,
        peak_value: peak.value,
        restarts,
        problem: Problem::Limiting { a, s, p },
    })
}

/// Relative size below which values at the box edge count as negligible
/// when a dilation reads outside the box.
pub const RESCALE_TAIL_TOL: f64 = 1e-3;

/// `a^{1/(p-2)} v(a^{1/(2s)} y)` on the grid of `v`, by band-limited
/// interpolation; reads beyond the box are zero when the edge values of `v`
/// are below [`RESCALE_TAIL_TOL`] of its maximum, otherwise an extent error.
pub fn rescale_ground_state(v: &Field, a: f64, s: f64, p: f64) -> Result<Field> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::ParameterDomain(format!("a must be positive, got {a}")));
    }
    if a == 1.0 {
        return Ok(v.clone());
    }
    let dil = a.powf(0.5 / s);
    let amp = a.powf(1.0 / (p - 2.0));
    dilate(v, dil, amp, &vec![0.0; v.grid().dim()], &vec![0.0; v.grid().dim()])
}

/// `w(x) = amp · v(c_src + dil (x - c_dst))`, zero beyond the box of `v`.
pub(crate) fn dilate(v: &Field, dil: f64, amp: f64, c_src: &[f64], c_dst: &[f64]) -> Result<Field> {
    let grid = *v.grid();
    let d = grid.dim();
    let l = grid.half_extent();
    let needs_outside = grid.points().any(|pt| {
        (0..d).any(|k| (c_src[k] + dil * (pt[k] - c_dst[k])).abs() > l)
    });
    if needs_outside {
        let edge = v.boundary_max_abs(1);
        if edge > RESCALE_TAIL_TOL * v.max_abs() {
            return Err(Error::Extent(format!(
                "dilation by {dil} reads beyond the box and the edge value {edge:e} is not negligible"
            )));
        }
    }
    let bl = BandLimited::new(&Spectral::new(&grid), v.values(), 8);
    let mut y = [0.0; 2];
    let values = grid
        .points()
        .map(|pt| {
            for k in 0..d {
                y[k] = c_src[k] + dil * (pt[k] - c_dst[k]);
            }
            if y[..d].iter().any(|c| c.abs() > l) {
                0.0
            } else {
                amp * bl.eval(&y[..d])
            }
        })
        .collect();
    Field::new(grid, values)
}

/// Node of `Λ` where `V` is smallest.
pub fn potential_minimizer(spec: &PotentialSpec, grid: &Grid) -> Result<(Vec<f64>, f64)> {
    let d = grid.dim();
    let mut best: Option<(Vec<f64>, f64)> = None;
    for pt in grid.points() {
        let x = &pt[..d];
        if spec.lambda_region.contains(x) {
            let v = model::evaluate_potential(spec, x);
            if best.as_ref().map_or(true, |b| v < b.1) {
                best = Some((x.to_vec(), v));
            }
        }
    }
    best.ok_or_else(|| Error::Config("no grid node lies in Lambda".into()))
}

/// Rescaled limiting profile `v_{V(x₀)}((x - x₀)/ε)` centred at the
/// minimizer of `V` on `Λ`, solved on the box dilated by `1/ε`.
pub fn default_penalized_guess(params: &ModelParams, spec: &PotentialSpec, grid: &Grid) -> Result<Field> {
    let (x0, v0) = potential_minimizer(spec, grid)?;
    if !(v0 > 0.0) {
        return Err(Error::Config("potential vanishes at its minimizer on Lambda".into()));
    }
    let eps = params.eps();
    let big = Grid::new(grid.dim(), grid.half_extent() / eps, grid.points_per_axis())?;
    let cfg = SolverConfig { gradient_tol: 1e-6, max_iters: 500, ..SolverConfig::default() };
    let lim = limiting_ground_state(v0, params.s(), params.p(), &big, &cfg)?;
    // x on the fine grid maps to (x - x0)/eps on the dilated grid
    let mut out = Vec::with_capacity(grid.len());
    let bl = BandLimited::new(&Spectral::new(&big), lim.solution.values(), 2);
    let d = grid.dim();
    let lb = big.half_extent();
    for pt in grid.points() {
        let y: Vec<f64> = (0..d).map(|k| (pt[k] - x0[k]) / eps).collect();
        out.push(if y.iter().any(|c| c.abs() > lb) { 0.0 } else { bl.eval(&y).max(0.0) });
    }
    Field::new(*grid, out)
}

/// Checks the resolution requirement `h ≤ ε/10`.
pub fn check_resolution(params: &ModelParams, grid: &Grid) -> Result<()> {
    let h = grid.spacing();
    if h > params.eps() / 10.0 * (1.0 + 1e-12) {
        return Err(Error::Config(format!(
            "grid spacing {h} exceeds eps/10 = {}",
            params.eps() / 10.0
        )));
    }
    Ok(())
}

/// Nonnegative critical point of the penalized functional (pure power).
pub fn penalized_solve(params: &ModelParams, spec: &PotentialSpec, grid: &Grid, cfg: &SolverConfig) -> Result<SolverResult> {
    penalized_solve_with(params, spec, &NonlinearitySpec::PurePower, grid, cfg, None)
}

/// Penalized solve with an arbitrary nonlinearity and an optional explicit
/// starting field that overrides `cfg.initial_guess`.
pub fn penalized_solve_with(
    params: &ModelParams,
    spec: &PotentialSpec,
    nl: &NonlinearitySpec,
    grid: &Grid,
    cfg: &SolverConfig,
    start: Option<&Field>,
) -> Result<SolverResult> {
    cfg.validate()?;
    check_resolution(params, grid)?;
    let report = model::check_assumption_a(spec, grid)?;
    if !report.pass {
        return Err(Error::Config(format!(
            "potential violates 0 < inf_Lambda V < inf_(U minus Lambda) V: {} vs {}",
            report.inf_lambda, report.inf_u_minus_lambda
        )));
    }
    let ctx = EnergyContext::penalized(params, spec, nl, grid)?;
    let u0 = match (start, &cfg.initial_guess) {
        (Some(u), _) => u.clone(),
        (None, InitialGuess::Gaussian { center, width, amplitude }) => gaussian(grid, center, *width, *amplitude)?,
        (None, InitialGuess::FieldFile { path }) => load_guess(path, grid)?,
        (None, InitialGuess::Rescaled) => default_penalized_guess(params, spec, grid)?,
    };
    let u0 = perturb(&u0, cfg.perturbation, cfg.seed);
    let shift = cfg.preconditioner_shift.unwrap_or(report.inf_lambda);
    let (run, restarts) = solve_with_restart(&ctx, u0, shift, cfg)?;
    let peak = verify::locate_peak(&run.solution, &spec.lambda_region)?;
    Ok(SolverResult {
        solution: run.solution,
        energy: run.energy,
        residual_norm: run.residual_norm,
        iterations: run.iterations,
        converged: run.converged,
        peak_location: peak.location,
        peak_value: peak.value,
        restarts,
        problem: Problem::Penalized { params: *params, nonlinearity: nl.clone() },
    })
}

#[derive(Debug, Clone)]
pub struct SweepEntry {
    pub eps: f64,
    pub outcome: std::result::Result<SolverResult, String>,
}

/// Solves for each `ε` in decreasing order. With `warm_start`, each solve
/// starts from the previous solution contracted about its peak by
/// `ε_new/ε_old`; failures are recorded and the sweep continues.
pub fn epsilon_sweep(
    template: &ModelParams,
    spec: &PotentialSpec,
    nl: &NonlinearitySpec,
    grid: &Grid,
    eps_list: &[f64],
    cfg: &SolverConfig,
    warm_start: bool,
) -> Result<Vec<SweepEntry>> {
    if eps_list.is_empty() || eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Config("sweep.eps_list must be non-empty and strictly decreasing".into()));
    }
    for &e in eps_list {
        check_resolution(&template.with_eps(e)?, grid)?;
    }
    let mut out = Vec::with_capacity(eps_list.len());
    let mut prev: Option<(f64, SolverResult)> = None;
    for &eps in eps_list {
        let params = template.with_eps(eps)?;
        let start = match (&prev, warm_start) {
            (Some((e_old, r)), true) => {
                let c = &r.peak_location;
                dilate(&r.solution, eps / e_old, 1.0, c, c).ok()
            }
            _ => None,
        };
        let outcome = penalized_solve_with(&params, spec, nl, grid, cfg, start.as_ref());
        match outcome {
            Ok(r) => {
                prev = Some((eps, r.clone()));
                out.push(SweepEntry { eps, outcome: Ok(r) });
            }
            Err(e) => out.push(SweepEntry { eps, outcome: Err(e.to_string()) }),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        let mut c = SolverConfig::default();
        assert!(c.validate().is_ok());
        c.gradient_tol = 0.1;
        assert!(c.validate().is_err());
        let c = SolverConfig { max_iters: 0, ..SolverConfig::default() };
        assert!(c.validate().is_err());
    }

    #[test]
    fn rescale_identity_and_group() {
        let g = Grid::new(1, 20.0, 1024).unwrap();
        let v = Field::from_fn(g, |x| 1.0 / (x[0] * 0.5).cosh().powi(2));
        assert_eq!(rescale_ground_state(&v, 1.0, 0.25, 3.5).unwrap(), v);
        let w = rescale_ground_state(&v, 2.0, 0.25, 3.5).unwrap();
        let back = rescale_ground_state(&w, 0.5, 0.25, 3.5).unwrap();
        let err = back.axpy(-1.0, &v).max_abs();
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn rescale_with_heavy_edge_is_extent_error() {
        let g = Grid::new(1, 5.0, 128).unwrap();
        let v = Field::from_fn(g, |x| 1.0 / (1.0 + x[0] * x[0]));
        assert!(matches!(rescale_ground_state(&v, 2.0, 0.25, 3.5), Err(Error::Extent(_))));
    }

    #[test]
    fn small_limiting_solve_converges() {
        let g = Grid::new(1, 20.0, 512).unwrap();
        let cfg = SolverConfig { gradient_tol: 1e-8, ..SolverConfig::default() };
        let r = limiting_ground_state(1.0, 0.5, 3.0, &g, &cfg).unwrap();
        assert!(r.converged, "{} {}", r.iterations, r.relative_residual());
        assert!(r.solution.min() >= -1e-10);
        assert!(r.peak_location[0].abs() < g.spacing());
    }
}
