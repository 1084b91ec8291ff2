//! Penalized nonlinearity, the penalized and limiting functionals with their
//! gradients, and projection onto the Nehari manifold.
//!
//! All integrals use the node weight `h^N`, and the kinetic term is
//! `h^N Σ u (-Δ)^s u` with the spectral operator, so the gradient of the
//! discrete functional under the weighted pairing is exactly the residual
//! `ε^{2s}(-Δ)^s u + V u - g(x, u)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::model::{self, ModelParams, NonlinearitySpec, PotentialSpec};
use crate::quad::{self, QuadOptions};
use crate::spectral::Spectral;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub kinetic: f64,
    pub potential: f64,
    pub nonlinear: f64,
    pub total: f64,
}

impl EnergyBreakdown {
    fn new(kinetic: f64, potential: f64, nonlinear: f64) -> Self {
        EnergyBreakdown {
            kinetic,
            potential,
            nonlinear,
            total: kinetic + potential - nonlinear,
        }
    }
}

/// Pure-power penalized nonlinearity `g_ε(x, t)` given `x ∈ Λ` and `P_ε(x)`.
pub fn g_pure(p: f64, in_lambda: bool, pen: f64, t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let power = t.powf(p - 1.0);
    if in_lambda {
        power
    } else {
        power.min(pen * t)
    }
}

/// Closed-form primitive of [`g_pure`] in `t`.
pub fn big_g_pure(p: f64, in_lambda: bool, pen: f64, t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    if in_lambda || t.powf(p - 2.0) <= pen {
        return t.powf(p) / p;
    }
    let cross = pen.powf(1.0 / (p - 2.0));
    0.5 * pen * t * t + cross.powf(p) * (1.0 / p - 0.5)
}

/// `g_ε(x, t)` for the pure power with the model's `p`.
pub fn g_eps(params: &ModelParams, spec: &PotentialSpec, x: &[f64], t: f64) -> f64 {
    let in_lambda = spec.lambda_region.contains(x);
    g_pure(params.p(), in_lambda, model::penalization_potential(params, spec, x), t)
}

/// `G_ε(x, t)`, the exact primitive of [`g_eps`].
pub fn big_g_eps(params: &ModelParams, spec: &PotentialSpec, x: &[f64], t: f64) -> f64 {
    let in_lambda = spec.lambda_region.contains(x);
    big_g_pure(params.p(), in_lambda, model::penalization_potential(params, spec, x), t)
}

/// `min{f(t₊), P t₊}` off `Λ`, `f(t₊)` on `Λ`.
pub fn general_g_eps(
    params: &ModelParams,
    spec: &PotentialSpec,
    nl: &NonlinearitySpec,
    x: &[f64],
    t: f64,
) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let f = nl.f(params.p(), t);
    if spec.lambda_region.contains(x) {
        f
    } else {
        f.min(model::penalization_potential(params, spec, x) * t)
    }
}

/// Primitive of [`general_g_eps`] in `t`.
pub fn general_big_g_eps(
    params: &ModelParams,
    spec: &PotentialSpec,
    nl: &NonlinearitySpec,
    x: &[f64],
    t: f64,
) -> Result<f64> {
    let in_lambda = spec.lambda_region.contains(x);
    let node = if in_lambda {
        NodeCap::uncapped()
    } else {
        NodeCap::new(nl, params.p(), model::penalization_potential(params, spec, x))?
    };
    node.primitive(nl, params.p(), t)
}

/// Crossover data of the min-branch at one node.
#[derive(Debug, Clone, Copy)]
struct NodeCap {
    pen: f64,
    /// `f(t)/t = P` here; infinite inside `Λ`.
    cross: f64,
    big_f_cross: f64,
}

impl NodeCap {
    fn uncapped() -> Self {
        NodeCap { pen: f64::INFINITY, cross: f64::INFINITY, big_f_cross: 0.0 }
    }

    fn new(nl: &NonlinearitySpec, p: f64, pen: f64) -> Result<Self> {
        if pen <= 0.0 {
            return Ok(NodeCap { pen: 0.0, cross: 0.0, big_f_cross: 0.0 });
        }
        let cross = match nl {
            NonlinearitySpec::PurePower => pen.powf(1.0 / (p - 2.0)),
            _ => {
                // f(t)/t is increasing; bracket and bisect in log scale
                let ratio = |t: f64| nl.f(p, t) / t;
                let (mut lo, mut hi) = (1.0f64, 1.0f64);
                while ratio(lo) > pen && lo > 1e-300 {
                    lo *= 0.5;
                }
                while ratio(hi) < pen && hi < 1e300 {
                    hi *= 2.0;
                }
                for _ in 0..200 {
                    let mid = (lo * hi).sqrt();
                    if ratio(mid) < pen {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                    if hi / lo - 1.0 < 1e-15 {
                        break;
                    }
                }
                0.5 * (lo + hi)
            }
        };
        Ok(NodeCap { pen, cross, big_f_cross: nl.primitive(p, cross)? })
    }

    fn g(&self, nl: &NonlinearitySpec, p: f64, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        if t <= self.cross {
            nl.f(p, t)
        } else {
            self.pen * t
        }
    }

    fn primitive(&self, nl: &NonlinearitySpec, p: f64, t: f64) -> Result<f64> {
        if t <= 0.0 {
            return Ok(0.0);
        }
        if t <= self.cross {
            nl.primitive(p, t)
        } else {
            Ok(self.big_f_cross + 0.5 * self.pen * (t * t - self.cross * self.cross))
        }
    }
}

/// Everything needed to evaluate one discrete functional on one grid.
#[derive(Debug, Clone)]
pub struct EnergyContext {
    grid: Grid,
    spectral: Spectral,
    s: f64,
    p: f64,
    kinetic_coeff: f64,
    potential: Vec<f64>,
    in_lambda: Vec<bool>,
    caps: Vec<NodeCap>,
    nl: NonlinearitySpec,
}

impl EnergyContext {
    /// Penalized functional `J_ε` for the given nonlinearity.
    pub fn penalized(
        params: &ModelParams,
        spec: &PotentialSpec,
        nl: &NonlinearitySpec,
        grid: &Grid,
    ) -> Result<Self> {
        spec.validate()?;
        nl.validate()?;
        if params.dim() != grid.dim() || spec.dim() != grid.dim() {
            return Err(Error::Config("model, potential and grid dimensions differ".into()));
        }
        let d = grid.dim();
        let mut potential = Vec::with_capacity(grid.len());
        let mut in_lambda = Vec::with_capacity(grid.len());
        let mut caps = Vec::with_capacity(grid.len());
        for pt in grid.points() {
            let x = &pt[..d];
            potential.push(model::evaluate_potential(spec, x));
            let inside = spec.lambda_region.contains(x);
            in_lambda.push(inside);
            caps.push(if inside {
                NodeCap::uncapped()
            } else {
                NodeCap::new(nl, params.p(), model::penalization_potential(params, spec, x))?
            });
        }
        Ok(EnergyContext {
            grid: *grid,
            spectral: Spectral::new(grid),
            s: params.s(),
            p: params.p(),
            kinetic_coeff: params.eps().powf(2.0 * params.s()),
            potential,
            in_lambda,
            caps,
            nl: nl.clone(),
        })
    }

    /// Limiting functional `J_a`: `ε = 1`, `V ≡ a`, no penalization, pure power.
    pub fn limiting(a: f64, s: f64, p: f64, grid: &Grid) -> Result<Self> {
        if !(a.is_finite() && a > 0.0) {
            return Err(Error::ParameterDomain(format!("a must be positive, got {a}")));
        }
        if !(s > 0.0 && s < 1.0 && p > 2.0) {
            return Err(Error::ParameterDomain(format!("need 0 < s < 1 and p > 2, got s = {s}, p = {p}")));
        }
        Ok(EnergyContext {
            grid: *grid,
            spectral: Spectral::new(grid),
            s,
            p,
            kinetic_coeff: 1.0,
            potential: vec![a; grid.len()],
            in_lambda: vec![true; grid.len()],
            caps: vec![NodeCap::uncapped(); grid.len()],
            nl: NonlinearitySpec::PurePower,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn spectral(&self) -> &Spectral {
        &self.spectral
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// `ε^{2s}`.
    pub fn kinetic_coeff(&self) -> f64 {
        self.kinetic_coeff
    }

    pub fn potential(&self) -> &[f64] {
        &self.potential
    }

    pub fn in_lambda(&self) -> &[bool] {
        &self.in_lambda
    }

    /// Smallest potential value over `Λ` nodes.
    pub fn lambda_floor(&self) -> f64 {
        self.potential
            .iter()
            .zip(&self.in_lambda)
            .filter(|(_, i)| **i)
            .fold(f64::INFINITY, |m, (v, _)| m.min(*v))
    }

    /// `g(x_j, t)` at node `j`.
    pub fn g(&self, j: usize, t: f64) -> f64 {
        if self.nl.is_pure_power() {
            g_pure(self.p, self.in_lambda[j], self.caps[j].pen, t)
        } else {
            self.caps[j].g(&self.nl, self.p, t)
        }
    }

    fn big_g(&self, j: usize, t: f64) -> Result<f64> {
        if self.nl.is_pure_power() {
            Ok(big_g_pure(self.p, self.in_lambda[j], self.caps[j].pen, t))
        } else {
            self.caps[j].primitive(&self.nl, self.p, t)
        }
    }

    fn check(&self, u: &Field) -> Result<()> {
        if *u.grid() != self.grid {
            return Err(Error::Input("field grid does not match the energy context".into()));
        }
        u.ensure_finite("field")
    }

    /// `(-Δ)^s u` by the spectral multiplier.
    pub fn frac(&self, u: &Field) -> Vec<f64> {
        self.spectral.frac_power(u.values(), self.s)
    }

    /// `ε^{2s}⟨(-Δ)^s u, u⟩ + ⟨V u, u⟩`.
    pub fn quadratic_form(&self, u: &Field) -> f64 {
        let au = self.frac(u);
        self.quadratic_form_with(u, &au)
    }

    fn quadratic_form_with(&self, u: &Field, au: &[f64]) -> f64 {
        let w = self.grid.cell_volume();
        let sum: f64 = u
            .values()
            .iter()
            .zip(au)
            .zip(&self.potential)
            .map(|((v, a), pot)| v * (self.kinetic_coeff * a + pot * v))
            .sum();
        w * sum
    }

    pub fn energy(&self, u: &Field) -> Result<EnergyBreakdown> {
        self.check(u)?;
        let au = self.frac(u);
        let w = self.grid.cell_volume();
        let mut kin = 0.0;
        let mut pot = 0.0;
        let mut non = 0.0;
        for (j, &v) in u.values().iter().enumerate() {
            kin += v * au[j];
            pot += self.potential[j] * v * v;
            non += self.big_g(j, v)?;
        }
        Ok(EnergyBreakdown::new(
            0.5 * self.kinetic_coeff * w * kin,
            0.5 * w * pot,
            w * non,
        ))
    }

    /// Residual `ε^{2s}(-Δ)^s u + V u - g(x, u)`, the gradient of
    /// [`EnergyContext::energy`] under the weighted pairing.
    pub fn gradient(&self, u: &Field) -> Result<Field> {
        self.check(u)?;
        let au = self.frac(u);
        let values = u
            .values()
            .iter()
            .enumerate()
            .map(|(j, &v)| self.kinetic_coeff * au[j] + self.potential[j] * v - self.g(j, v))
            .collect();
        Field::new(self.grid, values)
    }

    /// `h^N Σ g(x, t u) u`.
    fn nonlinear_pairing(&self, u: &Field, t: f64) -> f64 {
        self.grid.cell_volume()
            * u.values()
                .iter()
                .enumerate()
                .map(|(j, &v)| self.g(j, t * v) * v)
                .sum::<f64>()
    }

    /// Fibering derivative `⟨J'(t u), u⟩`.
    pub fn fiber_derivative(&self, u: &Field, t: f64) -> f64 {
        t * self.quadratic_form(u) - self.nonlinear_pairing(u, t)
    }

    /// Scales `u` onto the Nehari manifold: the unique zero of
    /// `t ↦ ⟨J'(t u), u⟩`, bracketed from `[1e-6, 1e6]` and bisected in
    /// log scale to relative width `1e-12`.
    pub fn nehari_project(&self, u: &Field) -> Result<(f64, Field)> {
        self.check(u)?;
        if u.max() <= 0.0 {
            return Err(Error::Projection("field has no positive part".into()));
        }
        let q = self.quadratic_form(u);
        if !(q > 0.0) {
            return Err(Error::Projection(format!("quadratic form is not positive ({q:e})")));
        }
        let fast = self.nl.is_pure_power().then(|| PowerPairing::new(self, u));
        let phi = |t: f64| {
            t * q
                - match &fast {
                    Some(f) => f.eval(t),
                    None => self.nonlinear_pairing(u, t),
                }
        };
        let (mut lo, mut hi) = (1e-6, 1e6);
        let mut expansions = 0;
        while !(phi(lo) > 0.0 && phi(hi) < 0.0) {
            if expansions == 3 {
                return Err(Error::Projection(format!(
                    "fibering derivative has no sign change on [{lo:e}, {hi:e}]"
                )));
            }
            if phi(lo) <= 0.0 {
                lo /= 10.0;
            }
            if phi(hi) >= 0.0 {
                hi *= 10.0;
            }
            expansions += 1;
        }
        while hi / lo - 1.0 > 1e-12 {
            let mid = (lo * hi).sqrt();
            if phi(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let t = (lo * hi).sqrt();
        Ok((t, u.scaled(t)))
    }
}

/// `h^N Σ g(x, t u) u` for the pure power, reduced to sorted prefix sums
/// over the per-node crossover scales so each evaluation is a binary search.
struct PowerPairing {
    p: f64,
    weight: f64,
    uncapped: f64,
    /// Sorted scales `t_j` past which node `j` switches to the linear branch.
    cross: Vec<f64>,
    /// Suffix sums of `u_j^p`: power-branch mass of nodes with `t_j >= t`.
    power_suffix: Vec<f64>,
    /// Prefix sums of `P_j u_j^2`: linear-branch mass of nodes with `t_j < t`.
    linear_prefix: Vec<f64>,
}

impl PowerPairing {
    fn new(ctx: &EnergyContext, u: &Field) -> Self {
        let p = ctx.p;
        let mut uncapped = 0.0;
        let mut nodes = Vec::new();
        for (j, &v) in u.values().iter().enumerate() {
            if v <= 0.0 {
                continue;
            }
            let pen = ctx.caps[j].pen;
            if ctx.in_lambda[j] || pen.is_infinite() {
                uncapped += v.powf(p);
            } else {
                // t^{p-2} v^{p-2} = P  <=>  t = P^{1/(p-2)} / v
                let t = pen.powf(1.0 / (p - 2.0)) / v;
                nodes.push((t, v.powf(p), pen * v * v));
            }
        }
        nodes.sort_by(|a, b| a.0.total_cmp(&b.0));
        let n = nodes.len();
        let mut power_suffix = vec![0.0; n + 1];
        for k in (0..n).rev() {
            power_suffix[k] = power_suffix[k + 1] + nodes[k].1;
        }
        let mut linear_prefix = vec![0.0; n + 1];
        for k in 0..n {
            linear_prefix[k + 1] = linear_prefix[k] + nodes[k].2;
        }
        PowerPairing {
            p,
            weight: ctx.grid.cell_volume(),
            uncapped,
            cross: nodes.into_iter().map(|n| n.0).collect(),
            power_suffix,
            linear_prefix,
        }
    }

    fn eval(&self, t: f64) -> f64 {
        let k = self.cross.partition_point(|&c| c < t);
        let power = t.powf(self.p - 1.0) * (self.uncapped + self.power_suffix[k]);
        self.weight * (power + t * self.linear_prefix[k])
    }
}

/// `J_ε(u)` for the pure-power nonlinearity.
pub fn penalized_energy(params: &ModelParams, spec: &PotentialSpec, u: &Field) -> Result<EnergyBreakdown> {
    EnergyContext::penalized(params, spec, &NonlinearitySpec::PurePower, u.grid())?.energy(u)
}

/// Residual field of the penalized equation for the pure power.
pub fn penalized_gradient(params: &ModelParams, spec: &PotentialSpec, u: &Field) -> Result<Field> {
    EnergyContext::penalized(params, spec, &NonlinearitySpec::PurePower, u.grid())?.gradient(u)
}

/// `J_a(v)`.
pub fn limiting_energy(a: f64, s: f64, p: f64, v: &Field) -> Result<EnergyBreakdown> {
    EnergyContext::limiting(a, s, p, v.grid())?.energy(v)
}

/// Residual `(-Δ)^s v + a v - v₊^{p-1}` of the limiting equation.
pub fn limiting_gradient(a: f64, s: f64, p: f64, v: &Field) -> Result<Field> {
    EnergyContext::limiting(a, s, p, v.grid())?.gradient(v)
}

/// Primitive of a general `f` by adaptive quadrature; exposed for tests.
pub fn primitive_by_quadrature(f: impl Fn(f64) -> f64, t: f64) -> Result<f64> {
    quad::integrate(f, 0.0, t, &[], QuadOptions { abs_tol: 1e-300, rel_tol: 1e-12, max_panels: 400 })
}
