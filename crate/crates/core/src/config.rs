//! Experiment configuration: a single JSON document, optionally patched by
//! dotted-path overrides such as `model.eps=0.05` before it is typed.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::model::{ModelParams, NonlinearitySpec, PotentialSpec};
use crate::solver::SolverConfig;
use crate::verify::{DecayOptions, DEFAULT_SLACK};

/// Checks the `verify` command can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    Assumption,
    Admissibility,
    Nonlinearity,
    Scaling,
    UpperBound,
    Concentration,
    Decay,
    Penalization,
    Barrier,
}

impl Check {
    pub const ALL: [Check; 9] = [
        Check::Assumption,
        Check::Admissibility,
        Check::Nonlinearity,
        Check::Scaling,
        Check::UpperBound,
        Check::Concentration,
        Check::Decay,
        Check::Penalization,
        Check::Barrier,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Check::Assumption => "assumption",
            Check::Admissibility => "admissibility",
            Check::Nonlinearity => "nonlinearity",
            Check::Scaling => "scaling",
            Check::UpperBound => "upper_bound",
            Check::Concentration => "concentration",
            Check::Decay => "decay",
            Check::Penalization => "penalization",
            Check::Barrier => "barrier",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LimitingConfig {
    pub a_list: Vec<f64>,
    /// Grid for limiting solves; the main grid when absent.
    pub grid: Option<Grid>,
}

impl Default for LimitingConfig {
    fn default() -> Self {
        LimitingConfig { a_list: vec![1.0, 2.0, 4.0], grid: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub eps_list: Vec<f64>,
    pub warm_start: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig { eps_list: vec![0.2, 0.1, 0.05], warm_start: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    pub checks: Vec<Check>,
    pub decay: DecayOptions,
    /// Upper bound on the spread `max C_fit / min C_fit` across the sweep.
    pub c_fit_spread: f64,
    /// Relative tolerance on the fitted scaling slope.
    pub scaling_tol: f64,
    /// `(ε, slack)` pairs for the energy upper bound.
    pub slack: Vec<(f64, f64)>,
    /// Barrier sample radii; `{1.1, 2, 4, 10}·R` when absent.
    pub barrier_radii: Option<Vec<f64>>,
    /// Barrier exponents; the model `α` and `N - 2s` when absent.
    pub barrier_alphas: Option<Vec<f64>>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            checks: Check::ALL.to_vec(),
            decay: DecayOptions { strict: false, ..DecayOptions::default() },
            c_fit_spread: 2.0,
            scaling_tol: 0.01,
            slack: DEFAULT_SLACK.to_vec(),
            barrier_radii: None,
            barrier_alphas: None,
        }
    }
}

impl VerifyConfig {
    pub fn wants(&self, c: Check) -> bool {
        self.checks.contains(&c)
    }
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelParams,
    pub potential: PotentialSpec,
    #[serde(default)]
    pub nonlinearity: NonlinearitySpec,
    pub grid: Grid,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub limiting: LimitingConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub verify: VerifyConfig,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Seeds the initial-guess perturbation of every solve.
    #[serde(default)]
    pub seed: u64,
}

impl ExperimentConfig {
    /// One-dimensional defaults: compact bump, `ε ∈ {0.2, 0.1, 0.05}`.
    pub fn default_1d() -> Self {
        ExperimentConfig {
            model: ModelParams::default_1d(),
            potential: PotentialSpec::default_bump(1),
            nonlinearity: NonlinearitySpec::PurePower,
            grid: Grid::new(1, 10.24, 1 << 15).expect("valid grid"),
            solver: SolverConfig::default(),
            limiting: LimitingConfig {
                grid: Some(Grid::new(1, 10.0, 1 << 18).expect("valid grid")),
                ..LimitingConfig::default()
            },
            sweep: SweepConfig::default(),
            verify: VerifyConfig::default(),
            output_dir: default_output_dir(),
            seed: 0,
        }
    }

    /// Two-dimensional defaults on a `256²` grid.
    pub fn default_2d() -> Self {
        ExperimentConfig {
            model: ModelParams::default_2d(),
            potential: PotentialSpec::default_bump(2),
            grid: Grid::new(2, 5.12, 256).expect("valid grid"),
            limiting: LimitingConfig { grid: Some(Grid::new(2, 10.0, 256).expect("valid grid")), ..LimitingConfig::default() },
            sweep: SweepConfig { eps_list: vec![0.4, 0.2], warm_start: true },
            ..ExperimentConfig::default_1d()
        }
    }

    /// Parses JSON text, applies `overrides` (`path=value`), and validates.
    pub fn load(text: &str, overrides: &[String]) -> Result<Self> {
        let mut value: Value = serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("config is not valid JSON: {e}")))?;
        for o in overrides {
            apply_override(&mut value, o)?;
        }
        Self::from_value(value)
    }

    /// Types a JSON value, reporting the path of the offending field.
    pub fn from_value(value: Value) -> Result<Self> {
        let cfg: ExperimentConfig = serde_path_to_error::deserialize(value).map_err(|e| {
            let path = e.path().to_string();
            Error::Config(format!("at `{path}`: {}", e.into_inner()))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.model.dim();
        if self.grid.dim() != d || self.potential.dim() != d {
            return Err(Error::Config(format!(
                "grid.dim = {}, potential dimension {} and model.dim = {d} must agree",
                self.grid.dim(),
                self.potential.dim()
            )));
        }
        self.potential.validate()?;
        self.nonlinearity.validate()?;
        self.solver.validate()?;
        if self.solver.seed != 0 {
            return Err(Error::Config("solver.seed: use the top-level seed".into()));
        }
        let lim = &self.limiting;
        if lim.a_list.is_empty() || lim.a_list.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
            return Err(Error::Config("limiting.a_list must be non-empty and positive".into()));
        }
        if let Some(g) = &lim.grid {
            if g.dim() != d {
                return Err(Error::Config("limiting.grid.dim must equal model.dim".into()));
            }
        }
        let eps = &self.sweep.eps_list;
        if eps.is_empty()
            || eps.iter().any(|e| !(e.is_finite() && *e > 0.0))
            || eps.windows(2).any(|w| w[1] >= w[0])
        {
            return Err(Error::Config(
                "sweep.eps_list must be non-empty, positive and strictly decreasing".into(),
            ));
        }
        let v = &self.verify;
        if !(v.decay.boundary_tol > 0.0 && v.decay.inner_radius > 0.0) {
            return Err(Error::Config("verify.decay needs positive boundary_tol and inner_radius".into()));
        }
        if !(v.c_fit_spread >= 1.0) {
            return Err(Error::Config("verify.c_fit_spread must be at least 1".into()));
        }
        if !(v.scaling_tol > 0.0) {
            return Err(Error::Config("verify.scaling_tol must be positive".into()));
        }
        if v.slack.is_empty() || v.slack.iter().any(|(e, s)| !(*e > 0.0 && *s >= 0.0)) {
            return Err(Error::Config("verify.slack needs (eps > 0, slack >= 0) pairs".into()));
        }
        if let Some(r) = &v.barrier_radii {
            if r.is_empty() || r.iter().any(|r| !(*r > self.model.barrier_radius())) {
                return Err(Error::Config("verify.barrier_radii must exceed model.barrier_radius".into()));
            }
        }
        if let Some(a) = &v.barrier_alphas {
            let top = d as f64 - 2.0 * self.model.s();
            if a.is_empty() || a.iter().any(|a| !(*a > 0.0 && *a <= top + 1e-12)) {
                return Err(Error::Config(format!("verify.barrier_alphas must lie in (0, {top}]")));
            }
        }
        if self.output_dir.as_os_str().is_empty() {
            return Err(Error::Config("output_dir must not be empty".into()));
        }
        Ok(())
    }

    /// Solver settings with the top-level seed applied.
    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig { seed: self.seed, ..self.solver.clone() }
    }

    pub fn limiting_grid(&self) -> Grid {
        self.limiting.grid.unwrap_or(self.grid)
    }
}

/// Applies one `a.b.c=value` override in place. The value is read as JSON
/// when it parses, as a bare string otherwise. Numeric segments index arrays;
/// missing object keys are created so the typed pass can reject them by name.
pub fn apply_override(root: &mut Value, spec: &str) -> Result<()> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override {spec:?} is not of the form path=value")))?;
    let path = path.trim();
    if path.is_empty() || path.split('.').any(str::is_empty) {
        return Err(Error::Config(format!("override {spec:?} has an empty path segment")));
    }
    let new: Value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut cur = root;
    let mut walked = String::new();
    for seg in path.split('.') {
        if !walked.is_empty() {
            walked.push('.');
        }
        walked.push_str(seg);
        if cur.is_null() {
            *cur = Value::Object(Default::default());
        }
        cur = match cur {
            Value::Object(map) => map.entry(seg.to_string()).or_insert(Value::Null),
            Value::Array(items) => {
                let len = items.len();
                let idx: usize = seg
                    .parse()
                    .map_err(|_| Error::Config(format!("at `{walked}`: expected an array index")))?;
                items
                    .get_mut(idx)
                    .ok_or_else(|| Error::Config(format!("at `{walked}`: index out of range (length {len})")))?
            }
            _ => return Err(Error::Config(format!("at `{walked}`: parent is not an object or array"))),
        };
    }
    *cur = new;
    Ok(())
}
