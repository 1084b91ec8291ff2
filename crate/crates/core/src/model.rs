//! Model parameters, potentials with their admissibility check, the explicit
//! penalization potential, and the nonlinearity abstraction.
//!
//! Everything here is an immutable value object once validated and
//! serializes to the JSON configuration documents described in the README.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::quad::{self, QuadOptions};

/// Scalar model and penalization parameters.
///
/// `kappa` is derived as `(α(p-2) - 2s)/4`; when a document supplies it, it
/// must agree with the formula.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelParamsRaw", into = "ModelParamsRaw")]
pub struct ModelParams {
    dim: usize,
    s: f64,
    p: f64,
    eps: f64,
    alpha: f64,
    kappa: f64,
    beta: f64,
    delta: f64,
    barrier_radius: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelParamsRaw {
    dim: usize,
    s: f64,
    p: f64,
    eps: f64,
    alpha: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    kappa: Option<f64>,
    beta: f64,
    delta: f64,
    barrier_radius: f64,
}

impl TryFrom<ModelParamsRaw> for ModelParams {
    type Error = Error;
    fn try_from(r: ModelParamsRaw) -> Result<Self> {
        let m = ModelParams::new(r.dim, r.s, r.p, r.eps, r.alpha, r.beta, r.delta, r.barrier_radius)?;
        if let Some(k) = r.kappa {
            if (k - m.kappa).abs() > 1e-12 * m.kappa.abs().max(1.0) {
                return Err(Error::Config(format!(
                    "model.kappa = {k} disagrees with (alpha(p-2) - 2s)/4 = {}",
                    m.kappa
                )));
            }
        }
        Ok(m)
    }
}

impl From<ModelParams> for ModelParamsRaw {
    fn from(m: ModelParams) -> Self {
        ModelParamsRaw {
            dim: m.dim,
            s: m.s,
            p: m.p,
            eps: m.eps,
            alpha: m.alpha,
            kappa: Some(m.kappa),
            beta: m.beta,
            delta: m.delta,
            barrier_radius: m.barrier_radius,
        }
    }
}

/// Penalization exponent tied to the decay exponent.
pub fn kappa_for(s: f64, p: f64, alpha: f64) -> f64 {
    (alpha * (p - 2.0) - 2.0 * s) / 4.0
}

impl ModelParams {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        dim: usize,
        s: f64,
        p: f64,
        eps: f64,
        alpha: f64,
        beta: f64,
        delta: f64,
        barrier_radius: f64,
    ) -> Result<Self> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(dim == 1 || dim == 2) {
            return bad(format!("model.dim must be 1 or 2, got {dim}"));
        }
        if !(s > 0.0 && s < 1.0) {
            return bad(format!("model.s must lie in (0,1), got {s}"));
        }
        let n = dim as f64;
        if n <= 2.0 * s {
            return bad(format!("model requires N > 2s (N = {dim}, s = {s})"));
        }
        let crit = 2.0 * n / (n - 2.0 * s);
        let p_lo = 2.0 + 2.0 * s / (n - 2.0 * s);
        if !(p > p_lo && p < crit) {
            return bad(format!("model.p = {p} outside ({p_lo}, {crit})"));
        }
        let a_lo = 2.0 * s / (p - 2.0);
        let a_hi = n - 2.0 * s;
        if !(alpha > a_lo && alpha < a_hi) {
            return bad(format!("model.alpha = {alpha} outside ({a_lo}, {a_hi})"));
        }
        let kappa = kappa_for(s, p, alpha);
        if kappa <= 0.0 {
            return bad(format!("derived kappa = {kappa} is not positive"));
        }
        if !(eps.is_finite() && eps > 0.0) {
            return bad(format!("model.eps must be positive, got {eps}"));
        }
        if !(beta > 0.0 && beta < 0.5) {
            return bad(format!("model.beta must lie in (0, 1/2), got {beta}"));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return bad(format!("model.delta must lie in (0,1), got {delta}"));
        }
        if !(barrier_radius.is_finite() && barrier_radius > 0.0) {
            return bad(format!("model.barrier_radius must be positive, got {barrier_radius}"));
        }
        Ok(ModelParams {
            dim,
            s,
            p,
            eps,
            alpha,
            kappa,
            beta,
            delta,
            barrier_radius,
        })
    }

    /// `(N=1, s=1/4, p=7/2, α=0.45)`, hence `κ = 0.04375`.
    pub fn default_1d() -> Self {
        ModelParams::new(1, 0.25, 3.5, 0.1, 0.45, 0.25, 0.5, 2.0).expect("valid defaults")
    }

    /// `(N=2, s=1/2, p=7/2, α=0.8)`, hence `κ = 0.05`.
    pub fn default_2d() -> Self {
        ModelParams::new(2, 0.5, 3.5, 0.1, 0.8, 0.25, 0.5, 2.0).expect("valid defaults")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn s(&self) -> f64 {
        self.s
    }
    pub fn p(&self) -> f64 {
        self.p
    }
    pub fn eps(&self) -> f64 {
        self.eps
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn kappa(&self) -> f64 {
        self.kappa
    }
    pub fn beta(&self) -> f64 {
        self.beta
    }
    pub fn delta(&self) -> f64 {
        self.delta
    }
    pub fn barrier_radius(&self) -> f64 {
        self.barrier_radius
    }

    /// `2*_s = 2N/(N-2s)`.
    pub fn critical_exponent(&self) -> f64 {
        let n = self.dim as f64;
        2.0 * n / (n - 2.0 * self.s)
    }

    /// Admissible window `(2s/(p-2), N-2s)` for the decay exponent.
    pub fn alpha_window(&self) -> (f64, f64) {
        (2.0 * self.s / (self.p - 2.0), self.dim as f64 - 2.0 * self.s)
    }

    pub fn with_eps(&self, eps: f64) -> Result<Self> {
        ModelParams::new(
            self.dim,
            self.s,
            self.p,
            eps,
            self.alpha,
            self.beta,
            self.delta,
            self.barrier_radius,
        )
    }

    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        ModelParams::new(
            self.dim,
            self.s,
            self.p,
            self.eps,
            alpha,
            self.beta,
            self.delta,
            self.barrier_radius,
        )
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn dist(x: &[f64], c: &[f64]) -> f64 {
    x.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

/// Open ball or open axis-aligned box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Region {
    Ball { center: Vec<f64>, radius: f64 },
    Box { lo: Vec<f64>, hi: Vec<f64> },
}

impl Region {
    pub fn ball(center: Vec<f64>, radius: f64) -> Self {
        Region::Ball { center, radius }
    }

    pub fn dim(&self) -> usize {
        match self {
            Region::Ball { center, .. } => center.len(),
            Region::Box { lo, .. } => lo.len(),
        }
    }

    fn validate(&self, dim: usize, what: &str) -> Result<()> {
        let ok = match self {
            Region::Ball { center, radius } => {
                center.len() == dim && *radius > 0.0 && center.iter().all(|c| c.is_finite())
            }
            Region::Box { lo, hi } => {
                lo.len() == dim && hi.len() == dim && lo.iter().zip(hi).all(|(a, b)| a < b)
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("{what}: malformed region {self:?} for dimension {dim}")))
        }
    }

    /// Membership in the open set.
    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Region::Ball { center, radius } => dist(x, center) < *radius,
            Region::Box { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi))
                .all(|(v, (a, b))| *v > *a && *v < *b),
        }
    }

    /// Membership in the closure.
    pub fn contains_closed(&self, x: &[f64]) -> bool {
        match self {
            Region::Ball { center, radius } => dist(x, center) <= *radius,
            Region::Box { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi))
                .all(|(v, (a, b))| *v >= *a && *v <= *b),
        }
    }

    /// Distance from `x` to the boundary of the region.
    pub fn boundary_distance(&self, x: &[f64]) -> f64 {
        match self {
            Region::Ball { center, radius } => (dist(x, center) - radius).abs(),
            Region::Box { lo, hi } => {
                if self.contains_closed(x) {
                    x.iter()
                        .zip(lo.iter().zip(hi))
                        .map(|(v, (a, b))| (v - a).min(b - v))
                        .fold(f64::INFINITY, f64::min)
                } else {
                    x.iter()
                        .zip(lo.iter().zip(hi))
                        .map(|(v, (a, b))| (a - v).max(v - b).max(0.0).powi(2))
                        .sum::<f64>()
                        .sqrt()
                }
            }
        }
    }

    /// `closure(self) ⊂ other`.
    pub fn compactly_inside(&self, other: &Region) -> bool {
        match (self, other) {
            (Region::Ball { center: c1, radius: r1 }, Region::Ball { center: c2, radius: r2 }) => {
                dist(c1, c2) + r1 < *r2
            }
            (Region::Box { lo: l1, hi: h1 }, Region::Box { lo: l2, hi: h2 }) => l1
                .iter()
                .zip(h1)
                .zip(l2.iter().zip(h2))
                .all(|((a1, b1), (a2, b2))| a1 > a2 && b1 < b2),
            (Region::Ball { center, radius }, Region::Box { lo, hi }) => center
                .iter()
                .zip(lo.iter().zip(hi))
                .all(|(c, (a, b))| c - radius > *a && c + radius < *b),
            (Region::Box { lo, hi }, Region::Ball { .. }) => {
                let d = lo.len();
                (0..(1usize << d)).all(|mask| {
                    let corner: Vec<f64> = (0..d)
                        .map(|k| if mask & (1 << k) != 0 { hi[k] } else { lo[k] })
                        .collect();
                    other.contains(&corner)
                })
            }
        }
    }

    /// Largest radius `r` with `B_r(0) ⊂ closure(self)`; used to place
    /// sample points.
    pub fn inner_radius_about_origin(&self) -> f64 {
        let o = vec![0.0; self.dim()];
        if self.contains_closed(&o) {
            self.boundary_distance(&o)
        } else {
            0.0
        }
    }
}

/// Shape families for `V`; `r = |x - center|` throughout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialKind {
    /// `(floor + growth r²) · max(0, 1 - (r/support)²)²`; zero for `r ≥ support`.
    CompactBump {
        center: Vec<f64>,
        floor: f64,
        growth: f64,
        support: f64,
    },
    /// `(floor + growth r²) / (1 + r²)^{1 + decay/2}`, decaying like `r^{-decay}`.
    AlgebraicDecay {
        center: Vec<f64>,
        floor: f64,
        growth: f64,
        decay: f64,
    },
    /// `floor + growth r² / (1 + r²)`.
    PositiveFloor {
        center: Vec<f64>,
        floor: f64,
        growth: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSpec {
    pub kind: PotentialKind,
    pub lambda_region: Region,
    pub u_region: Region,
}

impl PotentialSpec {
    /// Compact bump `(1+4|x|²)·max(0,1-(|x|/3)²)²`, `Λ = B_1(0)`, `U = B_2(0)`.
    pub fn default_bump(dim: usize) -> Self {
        PotentialSpec {
            kind: PotentialKind::CompactBump {
                center: vec![0.0; dim],
                floor: 1.0,
                growth: 4.0,
                support: 3.0,
            },
            lambda_region: Region::ball(vec![0.0; dim], 1.0),
            u_region: Region::ball(vec![0.0; dim], 2.0),
        }
    }

    pub fn dim(&self) -> usize {
        self.lambda_region.dim()
    }

    pub fn center(&self) -> &[f64] {
        match &self.kind {
            PotentialKind::CompactBump { center, .. }
            | PotentialKind::AlgebraicDecay { center, .. }
            | PotentialKind::PositiveFloor { center, .. } => center,
        }
    }

    /// Structural validation: shapes, nonnegativity of the family,
    /// `0 ∈ Λ` and `Λ ⊂⊂ U`.
    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        if !(d == 1 || d == 2) {
            return Err(Error::Config(format!("potential dimension {d} not supported")));
        }
        self.lambda_region.validate(d, "potential.lambda_region")?;
        self.u_region.validate(d, "potential.u_region")?;
        if self.center().len() != d {
            return Err(Error::Config("potential center has wrong dimension".into()));
        }
        let nonneg = |v: f64, name: &str| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(Error::Config(format!("potential.{name} must be >= 0, got {v}")))
            }
        };
        match &self.kind {
            PotentialKind::CompactBump { floor, growth, support, .. } => {
                nonneg(*floor, "floor")?;
                nonneg(*growth, "growth")?;
                if !(*support > 0.0) {
                    return Err(Error::Config("potential.support must be positive".into()));
                }
            }
            PotentialKind::AlgebraicDecay { floor, growth, decay, .. } => {
                nonneg(*floor, "floor")?;
                nonneg(*growth, "growth")?;
                nonneg(*decay, "decay")?;
            }
            PotentialKind::PositiveFloor { floor, growth, .. } => {
                nonneg(*floor, "floor")?;
                nonneg(*growth, "growth")?;
            }
        }
        if !self.lambda_region.contains(&vec![0.0; d]) {
            return Err(Error::Config("the origin must lie in Lambda".into()));
        }
        if !self.lambda_region.compactly_inside(&self.u_region) {
            return Err(Error::Config("Lambda is not compactly contained in U".into()));
        }
        Ok(())
    }
}

/// `V(x)`; continuous and nonnegative for every family.
pub fn evaluate_potential(spec: &PotentialSpec, x: &[f64]) -> f64 {
    match &spec.kind {
        PotentialKind::CompactBump { center, floor, growth, support } => {
            let r = dist(x, center);
            let cut = (1.0 - (r / support).powi(2)).max(0.0);
            (floor + growth * r * r) * cut * cut
        }
        PotentialKind::AlgebraicDecay { center, floor, growth, decay } => {
            let r2 = dist(x, center).powi(2);
            (floor + growth * r2) / (1.0 + r2).powf(1.0 + 0.5 * decay)
        }
        PotentialKind::PositiveFloor { center, floor, growth } => {
            let r2 = dist(x, center).powi(2);
            floor + growth * r2 / (1.0 + r2)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub inf_lambda: f64,
    pub argmin_lambda: Vec<f64>,
    pub inf_u_minus_lambda: f64,
    pub argmin_u_minus_lambda: Vec<f64>,
    pub pass: bool,
}

/// Grid check of `0 < inf_Λ V < inf_{U\Λ} V`, classifying nodes by
/// membership of the node itself.
pub fn check_assumption_a(spec: &PotentialSpec, grid: &Grid) -> Result<AssumptionReport> {
    spec.validate()?;
    if spec.dim() != grid.dim() {
        return Err(Error::Config("potential and grid dimensions differ".into()));
    }
    let l = grid.half_extent();
    let inside_box = |r: &Region| match r {
        Region::Ball { center, radius } => center.iter().all(|c| c.abs() + radius <= l),
        Region::Box { lo, hi } => lo.iter().chain(hi).all(|c| c.abs() <= l),
    };
    if !inside_box(&spec.u_region) {
        return Err(Error::Config("U extends beyond the grid".into()));
    }
    let d = grid.dim();
    let mut best_in = (f64::INFINITY, vec![0.0; d]);
    let mut best_ring = (f64::INFINITY, vec![0.0; d]);
    for p in grid.points() {
        let x = &p[..d];
        let v = evaluate_potential(spec, x);
        if spec.lambda_region.contains(x) {
            if v < best_in.0 {
                best_in = (v, x.to_vec());
            }
        } else if spec.u_region.contains(x) && v < best_ring.0 {
            best_ring = (v, x.to_vec());
        }
    }
    if !best_in.0.is_finite() || !best_ring.0.is_finite() {
        return Err(Error::Config(
            "grid too coarse: Lambda or U\\Lambda contains no node".into(),
        ));
    }
    Ok(AssumptionReport {
        pass: best_in.0 > 0.0 && best_in.0 < best_ring.0,
        inf_lambda: best_in.0,
        argmin_lambda: best_in.1,
        inf_u_minus_lambda: best_ring.0,
        argmin_u_minus_lambda: best_ring.1,
    })
}

/// `P_ε(x) = ε^{2s+2κ} |x|^{-(2s+κ)}` off `Λ`, zero on `Λ`.
pub fn penalization_potential(params: &ModelParams, spec: &PotentialSpec, x: &[f64]) -> f64 {
    if spec.lambda_region.contains(x) {
        return 0.0;
    }
    let (s, k, e) = (params.s(), params.kappa(), params.eps());
    e.powf(2.0 * s + 2.0 * k) * norm(x).powf(-(2.0 * s + k))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityEntry {
    pub eps: f64,
    pub sup_scaled: f64,
    pub expected: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    pub entries: Vec<AdmissibilityEntry>,
    pub pass: bool,
}

/// `sup_{x∉Λ} P_ε(x) ε^{-(2s+3κ/2)} |x|^{2s+κ}` over grid nodes for each `ε`;
/// the value is `ε^{κ/2}` identically, so the sequence must match it and
/// decrease to zero.
pub fn check_penalization_admissible(
    params: &ModelParams,
    spec: &PotentialSpec,
    grid: &Grid,
    eps_list: &[f64],
) -> Result<AdmissibilityReport> {
    if eps_list.is_empty() || eps_list.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::Config("eps_list must be non-empty and positive".into()));
    }
    if eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Config("eps_list must be strictly decreasing".into()));
    }
    let d = grid.dim();
    let mut entries = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let pe = params.with_eps(eps)?;
        let (s, k) = (pe.s(), pe.kappa());
        let mut sup: f64 = 0.0;
        for p in grid.points() {
            let x = &p[..d];
            if spec.lambda_region.contains(x) {
                continue;
            }
            let v = penalization_potential(&pe, spec, x)
                * eps.powf(-(2.0 * s + 1.5 * k))
                * norm(x).powf(2.0 * s + k);
            sup = sup.max(v);
        }
        entries.push(AdmissibilityEntry {
            eps,
            sup_scaled: sup,
            expected: eps.powf(0.5 * k),
        });
    }
    let matches = entries
        .iter()
        .all(|e| (e.sup_scaled - e.expected).abs() <= 1e-12 * e.expected.max(1.0));
    let decreasing = entries.windows(2).all(|w| w[1].sup_scaled < w[0].sup_scaled);
    Ok(AdmissibilityReport {
        entries,
        pass: matches && decreasing,
    })
}

/// Nonlinearity `f` with primitive `F`, extended oddly to `t < 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum NonlinearitySpec {
    /// `f(t) = t₊^{p-1}` with the model's `p`; superquadraticity exponent `θ = p`.
    PurePower,
    /// `f(t) = t^a / (1 + t^b)` for `t > 0`.
    Rational { a: f64, b: f64, theta: f64 },
}

impl Default for NonlinearitySpec {
    fn default() -> Self {
        NonlinearitySpec::PurePower
    }
}

impl NonlinearitySpec {
    /// `f(t) = t³/(1 + t^{1.2})` with `θ = 2.5`.
    pub fn default_rational() -> Self {
        NonlinearitySpec::Rational { a: 3.0, b: 1.2, theta: 2.5 }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            NonlinearitySpec::PurePower => Ok(()),
            NonlinearitySpec::Rational { a, b, theta } => {
                if a.is_finite() && b.is_finite() && theta.is_finite() && *a > 1.0 && *b >= 0.0 {
                    Ok(())
                } else {
                    Err(Error::Config(format!(
                        "rational nonlinearity needs a > 1, b >= 0, got a = {a}, b = {b}"
                    )))
                }
            }
        }
    }

    pub fn is_pure_power(&self) -> bool {
        matches!(self, NonlinearitySpec::PurePower)
    }

    pub fn theta(&self, p: f64) -> f64 {
        match self {
            NonlinearitySpec::PurePower => p,
            NonlinearitySpec::Rational { theta, .. } => *theta,
        }
    }

    /// `f(t)`, odd in `t`.
    pub fn f(&self, p: f64, t: f64) -> f64 {
        let a = t.abs();
        let v = match self {
            NonlinearitySpec::PurePower => a.powf(p - 1.0),
            NonlinearitySpec::Rational { a: ea, b: eb, .. } => a.powf(*ea) / (1.0 + a.powf(*eb)),
        };
        v.copysign(t) * if t == 0.0 { 0.0 } else { 1.0 }
    }

    /// `F(t) = ∫_0^t f`; closed form for the pure power, adaptive quadrature
    /// otherwise.
    pub fn primitive(&self, p: f64, t: f64) -> Result<f64> {
        let a = t.abs();
        if a == 0.0 {
            return Ok(0.0);
        }
        match self {
            NonlinearitySpec::PurePower => Ok(a.powf(p) / p),
            NonlinearitySpec::Rational { .. } => quad::integrate(
                |x| self.f(p, x),
                0.0,
                a,
                &[],
                QuadOptions { abs_tol: 1e-300, rel_tol: 1e-12, max_panels: 200 },
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionOutcome {
    pub name: String,
    pub pass: bool,
    /// Sample points where the condition failed (truncated).
    pub violations: Vec<f64>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonlinearityReport {
    pub kappa_tilde: f64,
    pub nu: f64,
    pub outcomes: Vec<ConditionOutcome>,
}

impl NonlinearityReport {
    pub fn pass(&self) -> bool {
        self.outcomes.iter().all(|o| o.pass)
    }

    pub fn outcome(&self, name: &str) -> Option<&ConditionOutcome> {
        self.outcomes.iter().find(|o| o.name == name)
    }

    /// Converts the first failing condition into an error.
    pub fn ensure(&self) -> Result<()> {
        match self.outcomes.iter().find(|o| !o.pass) {
            None => Ok(()),
            Some(o) => Err(Error::ConditionFailed {
                condition: o.name.clone(),
                at: o.violations.clone(),
            }),
        }
    }
}

/// `log10`-uniform samples on `[1e-6, 1e3]`.
pub fn default_condition_samples(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 10f64.powf(-6.0 + 9.0 * i as f64 / (n - 1) as f64))
        .collect()
}

/// Numerical checks of the structural conditions on `f`:
///
/// * `f1_odd`: `f(-t) = -f(t)`.
/// * `f1_small`: log-log slope of `f` over samples below `1e-4` is at least
///   `(1 + κ̃)(1 - 0.05)` with `κ̃ = (2s + 2κ)/(α - ν)`.
/// * `f2`: `f(t)/t^p` decreases strictly over the last tenth of the samples.
/// * `f3`: `0 ≤ θF(t) ≤ f(t) t` (non-strict up to `1e-12` relative, so the
///   pure power with `θ = p` passes), with `2 < θ ≤ p + 1`.
/// * `f4`: `f(t)/t` strictly increasing between consecutive samples.
pub fn check_nonlinearity_conditions(
    nl: &NonlinearitySpec,
    params: &ModelParams,
    nu: Option<f64>,
    sample_ts: &[f64],
) -> Result<NonlinearityReport> {
    nl.validate()?;
    if sample_ts.len() < 20
        || sample_ts[0] <= 0.0
        || sample_ts.windows(2).any(|w| w[1] <= w[0])
    {
        return Err(Error::Config(
            "sample_ts must be at least 20 positive increasing values".into(),
        ));
    }
    let p = params.p();
    let nu = nu.unwrap_or(params.alpha() / 10.0);
    let kappa_tilde = (2.0 * params.s() + 2.0 * params.kappa()) / (params.alpha() - nu);
    let cap = |v: Vec<f64>| v.into_iter().take(16).collect::<Vec<_>>();
    let mut outcomes = Vec::new();

    let odd_bad: Vec<f64> = sample_ts
        .iter()
        .copied()
        .filter(|&t| {
            let (a, b) = (nl.f(p, t), nl.f(p, -t));
            (a + b).abs() > 1e-14 * a.abs().max(f64::MIN_POSITIVE)
        })
        .collect();
    outcomes.push(ConditionOutcome {
        name: "f1_odd".into(),
        pass: odd_bad.is_empty(),
        violations: cap(odd_bad),
        detail: "f(-t) = -f(t)".into(),
    });

    let small: Vec<(f64, f64)> = sample_ts
        .iter()
        .copied()
        .filter(|&t| t <= 1e-4)
        .map(|t| (t.ln(), nl.f(p, t).ln()))
        .collect();
    let (slope, slope_ok) = if small.len() >= 2 {
        let n = small.len() as f64;
        let mx = small.iter().map(|v| v.0).sum::<f64>() / n;
        let my = small.iter().map(|v| v.1).sum::<f64>() / n;
        let sxy: f64 = small.iter().map(|v| (v.0 - mx) * (v.1 - my)).sum();
        let sxx: f64 = small.iter().map(|v| (v.0 - mx).powi(2)).sum();
        let slope = sxy / sxx;
        (slope, slope.is_finite() && slope >= (1.0 + kappa_tilde) * 0.95)
    } else {
        (f64::NAN, false)
    };
    outcomes.push(ConditionOutcome {
        name: "f1_small".into(),
        pass: slope_ok,
        violations: if slope_ok { vec![] } else { cap(small.iter().map(|v| v.0.exp()).collect()) },
        detail: format!("small-t slope {slope:.6} vs required 1 + kappa_tilde = {:.6}", 1.0 + kappa_tilde),
    });

    let tail_start = sample_ts.len() - (sample_ts.len() / 10).max(2);
    let tail = &sample_ts[tail_start..];
    let ratios: Vec<f64> = tail.iter().map(|&t| nl.f(p, t) / t.powf(p)).collect();
    let f2_bad: Vec<f64> = tail
        .windows(2)
        .zip(ratios.windows(2))
        .filter(|(_, r)| !(r[1] < r[0]))
        .map(|(t, _)| t[1])
        .collect();
    outcomes.push(ConditionOutcome {
        name: "f2".into(),
        pass: f2_bad.is_empty(),
        violations: cap(f2_bad),
        detail: format!("f(t)/t^p on tail: first {:e}, last {:e}", ratios[0], ratios[ratios.len() - 1]),
    });

    let theta = nl.theta(p);
    let theta_ok = theta > 2.0 && theta <= p + 1.0;
    let mut f3_bad = Vec::new();
    for &t in sample_ts {
        let big_f = nl.primitive(p, t)?;
        let ft = nl.f(p, t) * t;
        if big_f < 0.0 || theta * big_f > ft * (1.0 + 1e-12) {
            f3_bad.push(t);
        }
    }
    outcomes.push(ConditionOutcome {
        name: "f3".into(),
        pass: theta_ok && f3_bad.is_empty(),
        violations: cap(f3_bad),
        detail: format!("theta = {theta} (window (2, {}])", p + 1.0),
    });

    let q: Vec<f64> = sample_ts.iter().map(|&t| nl.f(p, t) / t).collect();
    let f4_bad: Vec<f64> = sample_ts
        .windows(2)
        .zip(q.windows(2))
        .filter(|(_, r)| !(r[1] > r[0]))
        .map(|(t, _)| t[1])
        .collect();
    outcomes.push(ConditionOutcome {
        name: "f4".into(),
        pass: f4_bad.is_empty(),
        violations: cap(f4_bad),
        detail: "f(t)/t increasing".into(),
    });

    Ok(NonlinearityReport { kappa_tilde, nu, outcomes })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_kappas() {
        assert!((ModelParams::default_1d().kappa() - 0.04375).abs() < 1e-15);
        assert!((ModelParams::default_2d().kappa() - 0.05).abs() < 1e-15);
    }

    #[test]
    fn rejects_windows() {
        // N <= 2s
        assert!(ModelParams::new(1, 0.5, 3.5, 0.1, 0.45, 0.25, 0.5, 2.0).is_err());
        // p outside (3, 4)
        assert!(ModelParams::new(1, 0.25, 4.0, 0.1, 0.45, 0.25, 0.5, 2.0).is_err());
        assert!(ModelParams::new(1, 0.25, 2.9, 0.1, 0.45, 0.25, 0.5, 2.0).is_err());
        // alpha outside (1/3, 1/2)
        assert!(ModelParams::new(1, 0.25, 3.5, 0.1, 0.3, 0.25, 0.5, 2.0).is_err());
        assert!(ModelParams::new(1, 0.25, 3.5, 0.1, 0.5, 0.25, 0.5, 2.0).is_err());
        // beta, delta, eps
        assert!(ModelParams::new(1, 0.25, 3.5, 0.1, 0.45, 0.5, 0.5, 2.0).is_err());
        assert!(ModelParams::new(1, 0.25, 3.5, 0.1, 0.45, 0.25, 1.0, 2.0).is_err());
        assert!(ModelParams::new(1, 0.25, 3.5, 0.0, 0.45, 0.25, 0.5, 2.0).is_err());
    }

    #[test]
    fn kappa_mismatch_in_document_is_config_error() {
        let doc = r#"{"dim":1,"s":0.25,"p":3.5,"eps":0.1,"alpha":0.45,"kappa":-0.01,
                      "beta":0.25,"delta":0.5,"barrier_radius":2.0}"#;
        let err = serde_json::from_str::<ModelParams>(doc).unwrap_err();
        assert!(err.to_string().contains("kappa"), "{err}");
    }

    #[test]
    fn default_bump_values() {
        let spec = PotentialSpec::default_bump(1);
        assert_eq!(evaluate_potential(&spec, &[0.0]), 1.0);
        assert_eq!(evaluate_potential(&spec, &[3.0]), 0.0);
        assert_eq!(evaluate_potential(&spec, &[-3.0]), 0.0);
        assert_eq!(evaluate_potential(&spec, &[4.0]), 0.0);
        let v1 = evaluate_potential(&spec, &[1.0]);
        assert!((v1 - 5.0 * (8.0f64 / 9.0).powi(2)).abs() < 1e-14);
    }

    #[test]
    fn assumption_a_default_and_failures() {
        let g = Grid::new(1, 4.0, 256).unwrap();
        let spec = PotentialSpec::default_bump(1);
        let rep = check_assumption_a(&spec, &g).unwrap();
        assert!(rep.pass);
        assert_eq!(rep.inf_lambda, 1.0);
        assert_eq!(rep.argmin_lambda, vec![0.0]);
        assert!((rep.inf_u_minus_lambda - 3.950617283950617).abs() < 1e-12);

        let mut zero = spec.clone();
        zero.kind = PotentialKind::CompactBump {
            center: vec![0.0],
            floor: 0.0,
            growth: 0.0,
            support: 3.0,
        };
        assert!(!check_assumption_a(&zero, &g).unwrap().pass);

        let mut quad = spec.clone();
        quad.kind = PotentialKind::PositiveFloor { center: vec![0.0], floor: 0.0, growth: 1.0 };
        let rep = check_assumption_a(&quad, &g).unwrap();
        assert!(!rep.pass);
        assert_eq!(rep.inf_lambda, 0.0);
    }

    #[test]
    fn lambda_not_inside_u_is_config_error() {
        let g = Grid::new(1, 4.0, 256).unwrap();
        let mut spec = PotentialSpec::default_bump(1);
        spec.u_region = Region::ball(vec![0.0], 1.0);
        assert!(matches!(check_assumption_a(&spec, &g), Err(Error::Config(_))));
    }

    #[test]
    fn penalization_values() {
        let params = ModelParams::default_1d();
        let spec = PotentialSpec::default_bump(1);
        assert_eq!(penalization_potential(&params, &spec, &[0.0]), 0.0);
        let v = penalization_potential(&params, &spec, &[2.0]);
        let expected = 0.1f64.powf(0.5875) / 2f64.powf(0.54375);
        assert!((v - expected).abs() < 1e-15);
        assert!((v - 0.1773).abs() < 5e-5);
    }

    #[test]
    fn admissibility_report() {
        let params = ModelParams::default_1d();
        let spec = PotentialSpec::default_bump(1);
        let g = Grid::new(1, 4.0, 128).unwrap();
        let rep = check_penalization_admissible(&params, &spec, &g, &[0.2, 0.1, 0.05]).unwrap();
        assert!(rep.pass);
        assert!((rep.entries[0].sup_scaled - 0.2f64.powf(0.021875)).abs() < 1e-12);
        let one = check_penalization_admissible(&params, &spec, &g, &[0.1]).unwrap();
        assert!(one.pass && one.entries.len() == 1);
        assert!(check_penalization_admissible(&params, &spec, &g, &[0.1, 0.2]).is_err());
    }

    #[test]
    fn nonlinearity_conditions() {
        let params = ModelParams::default_1d();
        let ts = default_condition_samples(200);
        let pure = check_nonlinearity_conditions(&NonlinearitySpec::PurePower, &params, None, &ts)
            .unwrap();
        assert!(pure.pass(), "{pure:?}");
        let rat = check_nonlinearity_conditions(&NonlinearitySpec::default_rational(), &params, None, &ts)
            .unwrap();
        assert!(rat.pass(), "{rat:?}");
        assert_eq!(rat.outcomes.len(), 5);
        // linear f violates the superquadratic condition
        let lin = NonlinearitySpec::Rational { a: 1.0 + 1e-12, b: 0.0, theta: 2.5 };
        let rep = check_nonlinearity_conditions(&lin, &params, None, &ts).unwrap();
        assert!(!rep.outcome("f3").unwrap().pass);
        assert!(matches!(rep.ensure(), Err(Error::ConditionFailed { .. })));
    }

    #[test]
    fn region_containment() {
        let ball = Region::ball(vec![0.0, 0.0], 1.0);
        let bx = Region::Box { lo: vec![-2.0, -2.0], hi: vec![2.0, 2.0] };
        assert!(ball.compactly_inside(&bx));
        assert!(!bx.compactly_inside(&ball));
        let small_box = Region::Box { lo: vec![-0.5, -0.5], hi: vec![0.5, 0.5] };
        assert!(small_box.compactly_inside(&ball));
        assert!(!Region::ball(vec![0.5, 0.0], 0.6).compactly_inside(&ball));
    }
}
