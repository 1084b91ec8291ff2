//! Command surface: `fracpen <command> --config <path> [--set k=v]...`.
//!
//! Each command writes into its own subdirectory of the output root
//! (`limiting/`, `penalized/`, `sweep/`, `verify/`, `selftest/`) together
//! with a `manifest.json` listing every artifact and its SHA-256. The output
//! root is `output_dir` from the config unless `FRACPEN_OUTPUT_ROOT` is set.
//!
//! Exit status: 0 when every requested check passes, 1 when a check fails,
//! 2 for configuration or missing-input errors, 3 for numerical failures.

use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{Check, ExperimentConfig};
use crate::energy::EnergyContext;
use crate::error::Error;
use crate::fracops::{self, DirectOptions};
use crate::grid::{Field, Grid};
use crate::io::{self, FieldFormat};
use crate::model::{self, NonlinearitySpec, PotentialSpec};
use crate::solver::{self, SolverResult, SolverSummary};
use crate::verify::{self, BarrierSpec, ConcentrationReport, DecayReport, PenalizationReport, SweepSample, SweepTableRow};

pub const OUTPUT_ROOT_ENV: &str = "FRACPEN_OUTPUT_ROOT";
pub const MANIFEST: &str = "manifest.json";

pub const EXIT_PASS: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    SolveLimiting,
    SolvePenalized,
    Sweep,
    Verify,
    Selftest,
}

impl Command {
    fn subdir(self) -> &'static str {
        match self {
            Command::SolveLimiting => "limiting",
            Command::SolvePenalized => "penalized",
            Command::Sweep => "sweep",
            Command::Verify => "verify",
            Command::Selftest => "selftest",
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "fracpen", version, about = "Penalized fractional Schrodinger solver and verification harness")]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Command,
    /// Experiment configuration (JSON). Optional for `selftest`.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Dotted-path override, e.g. `model.eps=0.05`; repeatable.
    #[arg(long = "set", value_name = "PATH=VALUE")]
    pub set: Vec<String>,
}

/// Named pass/fail outcome recorded in the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl CheckOutcome {
    fn new(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        CheckOutcome { name: name.into(), pass, detail: detail.into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArtifactKind {
    Field,
    Summary,
    Report,
    Table,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Relative to the manifest's directory, `/`-separated.
    pub path: String,
    pub kind: ArtifactKind,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: Command,
    pub config: Option<ExperimentConfig>,
    pub checks: Vec<CheckOutcome>,
    pub pass: bool,
    pub artifacts: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn artifacts_of(&self, kind: ArtifactKind) -> impl Iterator<Item = &ManifestEntry> {
        self.artifacts.iter().filter(move |a| a.kind == kind)
    }
}

/// Collects artifacts under one directory and records their hashes.
#[derive(Debug)]
pub struct ArtifactWriter {
    dir: PathBuf,
    entries: Vec<ManifestEntry>,
}

impl ArtifactWriter {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        ArtifactWriter { dir: dir.into(), entries: Vec::new() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, rel: &str, kind: ArtifactKind, bytes: &[u8]) -> crate::Result<()> {
        io::write_bytes(&self.dir.join(rel), bytes)?;
        self.entries.push(ManifestEntry {
            path: rel.to_string(),
            kind,
            sha256: io::sha256_hex(bytes),
            bytes: bytes.len() as u64,
        });
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, rel: &str, kind: ArtifactKind, value: &T) -> crate::Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.write(rel, kind, &bytes)
    }

    /// Writes a field dump; a binary dump adds its header sidecar as well.
    pub fn write_field(&mut self, stem: &str, u: &Field) -> crate::Result<()> {
        match FieldFormat::default_for(u.grid().dim()) {
            FieldFormat::Csv => self.write(&format!("{stem}.csv"), ArtifactKind::Field, &io::encode_field_csv(u)),
            FieldFormat::Binary => {
                let (header, data) = io::encode_field_binary(u);
                self.write(&format!("{stem}.bin"), ArtifactKind::Field, &data)?;
                self.write(&format!("{stem}.json"), ArtifactKind::Field, &header)
            }
        }
    }

    /// Writes `manifest.json` and returns it.
    pub fn finish(
        self,
        command: Command,
        config: Option<&ExperimentConfig>,
        checks: Vec<CheckOutcome>,
    ) -> crate::Result<Manifest> {
        let manifest = Manifest {
            tool: "fracpen".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command,
            config: config.cloned(),
            pass: checks.iter().all(|c| c.pass),
            checks,
            artifacts: self.entries,
        };
        let mut bytes = serde_json::to_vec_pretty(&manifest)?;
        bytes.push(b'\n');
        io::write_bytes(&self.dir.join(MANIFEST), &bytes)?;
        Ok(manifest)
    }
}

/// Reads a manifest and confirms every listed artifact still hashes the same.
pub fn read_manifest(dir: &Path) -> crate::Result<Manifest> {
    let path = dir.join(MANIFEST);
    if !path.is_file() {
        return Err(Error::Input(format!("missing inputs: {} not found", path.display())));
    }
    let bytes = std::fs::read(&path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    let m: Manifest = serde_json::from_slice(&bytes)?;
    for a in &m.artifacts {
        let got = io::sha256_file(&dir.join(&a.path))?;
        if got != a.sha256 {
            return Err(Error::Input(format!("{}: content hash differs from the manifest", a.path)));
        }
    }
    Ok(m)
}

/// Why a command stopped early.
#[derive(Debug)]
pub enum Failure {
    Config(String),
    Numerical { stage: String, message: String },
}

impl Failure {
    fn at(stage: &str) -> impl FnOnce(Error) -> Failure + '_ {
        move |e| {
            if e.is_config() {
                Failure::Config(format!("{stage}: {e}"))
            } else {
                Failure::Numerical { stage: stage.to_string(), message: e.to_string() }
            }
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(_) => EXIT_CONFIG,
            Failure::Numerical { .. } => EXIT_NUMERICAL,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "configuration error: {m}"),
            Failure::Numerical { stage, message } => write!(f, "numerical failure in {stage}: {message}"),
        }
    }
}

type Step<T> = std::result::Result<T, Failure>;

/// Output root: `$FRACPEN_OUTPUT_ROOT` when set, else the config's `output_dir`.
pub fn output_root(cfg: Option<&ExperimentConfig>) -> PathBuf {
    match std::env::var_os(OUTPUT_ROOT_ENV) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => cfg.map(|c| c.output_dir.clone()).unwrap_or_else(|| PathBuf::from("out")),
    }
}

/// Parses arguments and runs; returns the process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_PASS };
        }
    };
    run(&cli)
}

pub fn run(cli: &Cli) -> i32 {
    match execute(cli) {
        Ok(manifest) => {
            for c in &manifest.checks {
                println!("{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            if manifest.pass {
                EXIT_PASS
            } else {
                let failed: Vec<&str> = manifest.checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
                eprintln!("check failed: {}", failed.join(", "));
                EXIT_CHECK_FAILED
            }
        }
        Err(f) => {
            eprintln!("{f}");
            f.exit_code()
        }
    }
}

fn load_config(cli: &Cli) -> Step<Option<ExperimentConfig>> {
    let Some(path) = &cli.config else {
        if cli.command == Command::Selftest {
            return Ok(None);
        }
        return Err(Failure::Config("--config is required".into()));
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Config(format!("reading {}: {e}", path.display())))?;
    ExperimentConfig::load(&text, &cli.set)
        .map(Some)
        .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

/// Runs one command and returns its manifest.
pub fn execute(cli: &Cli) -> Step<Manifest> {
    let cfg = load_config(cli)?;
    let root = output_root(cfg.as_ref());
    let mut out = ArtifactWriter::new(root.join(cli.command.subdir()));
    let checks = match (cli.command, &cfg) {
        (Command::Selftest, _) => selftest(&mut out)?,
        (Command::SolveLimiting, Some(c)) => solve_limiting(c, &mut out)?,
        (Command::SolvePenalized, Some(c)) => solve_penalized(c, &mut out)?,
        (Command::Sweep, Some(c)) => sweep(c, &mut out)?,
        (Command::Verify, Some(c)) => verify_all(c, &root, &mut out)?,
        (_, None) => return Err(Failure::Config("--config is required".into())),
    };
    out.finish(cli.command, cfg.as_ref(), checks)
        .map_err(Failure::at("writing manifest"))
}

fn tag(x: f64) -> String {
    format!("{x}")
}

fn converged_check(name: &str, r: &SolverResult) -> CheckOutcome {
    CheckOutcome::new(
        format!("converged {name}"),
        r.converged,
        format!("{} iterations, relative residual {:.3e}", r.iterations, r.relative_residual()),
    )
}

/// Energy of a rescaled ground state against the scaling law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RescaleEntry {
    pub a: f64,
    pub energy: f64,
    pub predicted: f64,
    pub relative_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingArtifact {
    pub fit: verify::ScalingReport,
    pub reference_a: f64,
    pub rescaled: Vec<RescaleEntry>,
    pub rescale_tol: f64,
    pub rescale_pass: bool,
}

pub const RESCALE_TOL: f64 = 1e-4;

/// Rescales the ground state at `a_ref` to every other `a` and compares
/// `J_a` of the result with `C(a_ref)(a/a_ref)^exponent`.
pub fn rescale_entries(
    v: &Field,
    a_ref: f64,
    c_ref: f64,
    a_list: &[f64],
    s: f64,
    p: f64,
) -> crate::Result<Vec<RescaleEntry>> {
    let n = v.grid().dim();
    let exponent = verify::scaling_exponent(n, s, p);
    let mut out = Vec::new();
    for &a in a_list {
        let w = solver::rescale_ground_state(v, a / a_ref, s, p)?;
        let energy = crate::energy::limiting_energy(a, s, p, &w)?.total;
        let predicted = c_ref * (a / a_ref).powf(exponent);
        out.push(RescaleEntry { a, energy, predicted, relative_error: (energy / predicted - 1.0).abs() });
    }
    Ok(out)
}

fn solve_limiting(cfg: &ExperimentConfig, out: &mut ArtifactWriter) -> Step<Vec<CheckOutcome>> {
    let grid = cfg.limiting_grid();
    let (s, p) = (cfg.model.s(), cfg.model.p());
    let scfg = cfg.solver_config();
    let mut checks = Vec::new();
    let mut results = Vec::new();
    for &a in &cfg.limiting.a_list {
        let stage = format!("limiting solve a={a}");
        let r = solver::limiting_ground_state(a, s, p, &grid, &scfg).map_err(Failure::at(&stage))?;
        let name = format!("a_{}", tag(a));
        out.write_json(&format!("{name}.json"), ArtifactKind::Summary, &r.summary())
            .map_err(Failure::at(&stage))?;
        out.write_field(&name, &r.solution).map_err(Failure::at(&stage))?;
        checks.push(converged_check(&format!("a={a}"), &r));
        results.push(r);
    }
    if results.len() >= 3 && cfg.verify.wants(Check::Scaling) {
        let (art, outcomes) = scaling_artifact(cfg, &results).map_err(Failure::at("scaling report"))?;
        out.write_json("scaling_report.json", ArtifactKind::Report, &art)
            .map_err(Failure::at("scaling report"))?;
        checks.extend(outcomes);
    }
    Ok(checks)
}

fn scaling_artifact(cfg: &ExperimentConfig, results: &[SolverResult]) -> crate::Result<(ScalingArtifact, Vec<CheckOutcome>)> {
    let (s, p) = (cfg.model.s(), cfg.model.p());
    let entries: Vec<verify::ScalingEntry> = results
        .iter()
        .map(|r| match r.problem {
            solver::Problem::Limiting { a, .. } => verify::ScalingEntry { a, energy: r.energy.total, converged: r.converged },
            _ => unreachable!("limiting results only"),
        })
        .collect();
    let fit = verify::scaling_law_check_tol(&entries, cfg.model.dim(), s, p, cfg.verify.scaling_tol)?;
    // the most concentrated solution has the smallest edge values, and
    // expanding it only reads inside the box
    let k = (0..entries.len()).max_by(|&i, &j| entries[i].a.total_cmp(&entries[j].a)).expect("non-empty");
    let a_ref = entries[k].a;
    let a_list: Vec<f64> = entries.iter().map(|e| e.a).collect();
    let (rescaled, rescale_note) = match rescale_entries(&results[k].solution, a_ref, results[k].energy.total, &a_list, s, p) {
        Ok(r) => (r, String::new()),
        Err(e) => (Vec::new(), format!("; rescale failed: {e}")),
    };
    let rescale_pass = !rescaled.is_empty() && rescaled.iter().all(|e| e.relative_error <= RESCALE_TOL);
    let checks = vec![
        CheckOutcome::new(
            "scaling slope",
            fit.pass,
            format!("fitted {:.6}, expected {:.6}, relative error {:.3e}", fit.fitted_slope, fit.expected_slope, fit.relative_error),
        ),
        CheckOutcome::new(
            "scaling rescale",
            rescale_pass,
            format!(
                "reference a={a_ref}, max relative error {:.3e} (tolerance {RESCALE_TOL:e}){rescale_note}",
                rescaled.iter().fold(0.0f64, |m, e| m.max(e.relative_error))
            ),
        ),
    ];
    Ok((ScalingArtifact { fit, reference_a: a_ref, rescaled, rescale_tol: RESCALE_TOL, rescale_pass }, checks))
}

fn solve_penalized(cfg: &ExperimentConfig, out: &mut ArtifactWriter) -> Step<Vec<CheckOutcome>> {
    let stage = "penalized solve";
    let r = solver::penalized_solve_with(&cfg.model, &cfg.potential, &cfg.nonlinearity, &cfg.grid, &cfg.solver_config(), None)
        .map_err(Failure::at(stage))?;
    let name = format!("eps_{}", tag(cfg.model.eps()));
    out.write_json(&format!("{name}.json"), ArtifactKind::Summary, &r.summary())
        .map_err(Failure::at(stage))?;
    out.write_field(&name, &r.solution).map_err(Failure::at(stage))?;
    Ok(vec![converged_check(&format!("eps={}", cfg.model.eps()), &r)])
}

/// Limiting ground state at `a = min_Λ V`, the reference for the sweep checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSummary {
    pub a: f64,
    pub summary: SolverSummary,
}

/// Everything the sweep-level checks produce.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepChecks {
    pub concentration: ConcentrationReport,
    pub upper_bound: verify::UpperBoundReport,
    pub decay: Vec<DecayReport>,
    pub c_fit_spread: f64,
    pub penalization: Vec<PenalizationReport>,
    pub unpenalized_relative_residual: Vec<f64>,
}

/// One solved `ε` as read back from disk or fresh from the solver.
pub struct SweepPoint {
    pub eps: f64,
    pub solution: Field,
    pub summary: SolverSummary,
}

fn reference_solve(cfg: &ExperimentConfig) -> crate::Result<(f64, SolverResult)> {
    let a = verify::min_lambda_potential(&cfg.potential, &cfg.grid)?;
    let r = solver::limiting_ground_state(a, cfg.model.s(), cfg.model.p(), &cfg.limiting_grid(), &cfg.solver_config())?;
    Ok((a, r))
}

/// Concentration, upper bound, decay and penalization checks over a sweep.
pub fn sweep_checks(
    cfg: &ExperimentConfig,
    points: &[SweepPoint],
    reference: &ReferenceSummary,
) -> crate::Result<(SweepChecks, Vec<SweepTableRow>, Vec<CheckOutcome>)> {
    let samples: Vec<SweepSample> = points
        .iter()
        .map(|pt| SweepSample {
            eps: pt.eps,
            solution: &pt.solution,
            peak_location: pt.summary.peak_location.clone(),
            peak_value: pt.summary.peak_value,
            energy: pt.summary.energy.total,
        })
        .collect();
    let concentration = verify::concentration_check(&samples, &cfg.potential, reference.summary.peak_value)?;
    let limiting = reference.summary.energy.total;
    let upper_bound = verify::energy_upper_bound_check(&concentration, limiting, &cfg.verify.slack);
    let mut decay = Vec::new();
    let mut penalization = Vec::new();
    let mut residuals = Vec::new();
    for pt in points {
        let params = cfg.model.with_eps(pt.eps)?;
        decay.push(verify::decay_envelope_check(
            &pt.solution,
            &pt.summary.peak_location,
            pt.eps,
            params.alpha(),
            params.alpha_window(),
            cfg.verify.decay,
        )?);
        penalization.push(verify::penalization_consistency_check(&pt.solution, &params, &cfg.potential)?);
        let rn = verify::unpenalized_residual_norm(&pt.solution, &params, &cfg.potential, &cfg.nonlinearity)?;
        residuals.push(rn / pt.solution.norm_l2());
    }
    let fits: Vec<f64> = decay.iter().map(|d| d.c_fit).collect();
    let spread = fits.iter().cloned().fold(0.0f64, f64::max) / fits.iter().cloned().fold(f64::INFINITY, f64::min);
    let rows: Vec<SweepTableRow> = concentration
        .entries
        .iter()
        .map(|e| {
            let k = points.iter().position(|pt| pt.eps == e.eps).expect("entry per point");
            let ub = upper_bound.entries.iter().find(|u| u.eps == e.eps);
            SweepTableRow {
                eps: e.eps,
                x_eps_0: e.x_eps[0],
                x_eps_1: e.x_eps.get(1).copied(),
                v_at_peak: e.v_at_peak,
                normalized_energy: e.normalized_energy,
                c_fit: Some(decay[k].c_fit),
                alpha_fit: Some(decay[k].alpha_fit),
                outside_sup: e.outside_sup,
                pass_upper_bound: ub.map(|u| u.below_bound && u.within_band),
                pass_penalization: Some(penalization[k].pass),
                pass_decay: Some(decay[k].alpha_in_window),
            }
        })
        .collect();

    let v = &cfg.verify;
    let mut checks = Vec::new();
    if v.wants(Check::UpperBound) {
        let worst = upper_bound
            .entries
            .iter()
            .map(|e| format!("eps={}: {:.5} vs bound {:.5}", e.eps, e.normalized_energy, e.bound))
            .collect::<Vec<_>>()
            .join("; ");
        checks.push(CheckOutcome::new("upper_bound", upper_bound.pass, format!("C(min V) = {limiting:.7}; {worst}")));
    }
    if v.wants(Check::Concentration) {
        let c = &concentration;
        checks.push(CheckOutcome::new(
            "concentration",
            c.pass,
            format!(
                "gap nonincreasing {}, final gap {:.3e} ({}), outside ratios {:?} (limit {} per halving: {}), nondegenerate {}, peaks in Lambda {}",
                c.gap_nonincreasing,
                c.final_gap_relative,
                c.final_gap_ok,
                c.outside_ratios,
                c.outside_ratio_limit,
                c.outside_decreasing,
                c.nondegenerate,
                c.peaks_in_lambda
            ),
        ));
    }
    if v.wants(Check::Decay) {
        let in_window = decay.iter().all(|d| d.alpha_in_window);
        let clean = !v.decay.strict || decay.iter().all(|d| !d.boundary_contaminated);
        let pass = in_window && clean && spread < v.c_fit_spread;
        checks.push(CheckOutcome::new(
            "decay",
            pass,
            format!(
                "alpha_fit {:?} in {:?}: {in_window}; C_fit spread {spread:.3} (< {}); boundary contaminated {:?}",
                decay.iter().map(|d| d.alpha_fit).collect::<Vec<_>>(),
                decay[0].alpha_window,
                v.c_fit_spread,
                decay.iter().map(|d| d.boundary_contaminated).collect::<Vec<_>>()
            ),
        ));
    }
    if v.wants(Check::Penalization) {
        // the claim is about small ε; the smallest swept value decides
        let k = points
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.eps.total_cmp(&b.1.eps))
            .map(|(k, _)| k)
            .expect("non-empty sweep");
        let r = &penalization[k];
        checks.push(CheckOutcome::new(
            "penalization",
            r.pass,
            format!(
                "eps={}: {} violations of {} nodes, worst u^(p-2)/P = {:.3e}; unpenalized relative residual {:.3e}",
                points[k].eps, r.violations, r.checked_nodes, r.worst_ratio, residuals[k]
            ),
        ));
    }
    Ok((
        SweepChecks {
            concentration,
            upper_bound,
            decay,
            c_fit_spread: spread,
            penalization,
            unpenalized_relative_residual: residuals,
        },
        rows,
        checks,
    ))
}

fn write_sweep_reports(
    out: &mut ArtifactWriter,
    reports: &SweepChecks,
    rows: &[SweepTableRow],
) -> crate::Result<()> {
    out.write_json("concentration_report.json", ArtifactKind::Report, reports)?;
    out.write("sweep_table.csv", ArtifactKind::Table, &verify::table_to_csv(rows)?)
}

fn sweep(cfg: &ExperimentConfig, out: &mut ArtifactWriter) -> Step<Vec<CheckOutcome>> {
    let entries = solver::epsilon_sweep(
        &cfg.model,
        &cfg.potential,
        &cfg.nonlinearity,
        &cfg.grid,
        &cfg.sweep.eps_list,
        &cfg.solver_config(),
        cfg.sweep.warm_start,
    )
    .map_err(Failure::at("sweep setup"))?;
    let mut checks = Vec::new();
    let mut points = Vec::new();
    let mut failed = None;
    for e in entries {
        let stage = format!("sweep eps={}", e.eps);
        match e.outcome {
            Ok(r) => {
                let name = format!("eps_{}", tag(e.eps));
                out.write_json(&format!("{name}.json"), ArtifactKind::Summary, &r.summary())
                    .map_err(Failure::at(&stage))?;
                out.write_field(&name, &r.solution).map_err(Failure::at(&stage))?;
                checks.push(converged_check(&format!("eps={}", e.eps), &r));
                points.push(SweepPoint { eps: e.eps, summary: r.summary(), solution: r.solution });
            }
            Err(msg) => {
                failed.get_or_insert(Failure::Numerical { stage, message: msg });
            }
        }
    }
    if let Some(f) = failed {
        return Err(f);
    }
    let (a, r) = reference_solve(cfg).map_err(Failure::at("reference limiting solve"))?;
    let reference = ReferenceSummary { a, summary: r.summary() };
    out.write_json("reference_limiting.json", ArtifactKind::Summary, &reference)
        .map_err(Failure::at("reference limiting solve"))?;
    checks.push(converged_check(&format!("reference a={a}"), &r));
    if points.len() >= 2 {
        let (reports, rows, c) = sweep_checks(cfg, &points, &reference).map_err(Failure::at("sweep checks"))?;
        write_sweep_reports(out, &reports, &rows).map_err(Failure::at("sweep checks"))?;
        checks.extend(c);
    }
    Ok(checks)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> crate::Result<T> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    Ok(serde_json::from_slice(&bytes)?)
}

/// Loads the solved points and the reference from a sweep directory.
pub fn load_sweep(dir: &Path) -> crate::Result<(Vec<SweepPoint>, ReferenceSummary)> {
    let m = read_manifest(dir)?;
    if m.command != Command::Sweep {
        return Err(Error::Input(format!("{} is not a sweep manifest", dir.display())));
    }
    let mut points = Vec::new();
    let mut reference = None;
    for a in m.artifacts_of(ArtifactKind::Summary) {
        if a.path == "reference_limiting.json" {
            reference = Some(read_json::<ReferenceSummary>(&dir.join(&a.path))?);
            continue;
        }
        let summary: SolverSummary = read_json(&dir.join(&a.path))?;
        let eps = match &summary.problem {
            solver::Problem::Penalized { params, .. } => params.eps(),
            _ => return Err(Error::Input(format!("{}: not a penalized result", a.path))),
        };
        let stem = a.path.trim_end_matches(".json");
        let field_path = ["csv", "bin"]
            .iter()
            .map(|ext| dir.join(format!("{stem}.{ext}")))
            .find(|p| p.is_file())
            .ok_or_else(|| Error::Input(format!("missing inputs: no field dump for {}", a.path)))?;
        let solution = io::read_field(&field_path)?;
        points.push(SweepPoint { eps, solution, summary });
    }
    let reference = reference.ok_or_else(|| Error::Input("missing inputs: reference_limiting.json".into()))?;
    if points.is_empty() {
        return Err(Error::Input(format!("missing inputs: no results in {}", dir.display())));
    }
    points.sort_by(|a, b| b.eps.total_cmp(&a.eps));
    Ok((points, reference))
}

fn verify_all(cfg: &ExperimentConfig, root: &Path, out: &mut ArtifactWriter) -> Step<Vec<CheckOutcome>> {
    let v = &cfg.verify;
    let mut checks = Vec::new();
    let sweep_dir = root.join(Command::Sweep.subdir());
    let (points, reference) = load_sweep(&sweep_dir).map_err(|e| Failure::Config(format!("reading sweep results: {e}")))?;

    if v.wants(Check::Assumption) {
        let r = model::check_assumption_a(&cfg.potential, &cfg.grid).map_err(Failure::at("assumption check"))?;
        out.write_json("assumption.json", ArtifactKind::Report, &r).map_err(Failure::at("assumption check"))?;
        checks.push(CheckOutcome::new(
            "assumption",
            r.pass,
            format!("inf_Lambda V = {} < inf_(U minus Lambda) V = {}", r.inf_lambda, r.inf_u_minus_lambda),
        ));
    }
    if v.wants(Check::Admissibility) {
        let r = model::check_penalization_admissible(&cfg.model, &cfg.potential, &cfg.grid, &cfg.sweep.eps_list)
            .map_err(Failure::at("admissibility check"))?;
        out.write_json("admissibility.json", ArtifactKind::Report, &r).map_err(Failure::at("admissibility check"))?;
        checks.push(CheckOutcome::new("admissibility", r.pass, format!("{} values of eps", r.entries.len())));
    }
    if v.wants(Check::Nonlinearity) {
        let r = model::check_nonlinearity_conditions(&cfg.nonlinearity, &cfg.model, None, &model::default_condition_samples(400))
            .map_err(Failure::at("nonlinearity check"))?;
        out.write_json("nonlinearity.json", ArtifactKind::Report, &r).map_err(Failure::at("nonlinearity check"))?;
        let failed: Vec<&str> = r.outcomes.iter().filter(|o| !o.pass).map(|o| o.name.as_str()).collect();
        checks.push(CheckOutcome::new("nonlinearity", r.pass(), format!("failing conditions: {failed:?}")));
    }
    if v.wants(Check::Barrier) {
        let (reports, c) = barrier_checks(cfg, &points).map_err(Failure::at("barrier check"))?;
        out.write_json("barrier.json", ArtifactKind::Report, &reports).map_err(Failure::at("barrier check"))?;
        checks.extend(c);
    }
    if v.wants(Check::Scaling) {
        checks.push(match load_scaling(root) {
            Ok(art) => {
                out.write_json("scaling_report.json", ArtifactKind::Report, &art).map_err(Failure::at("scaling check"))?;
                CheckOutcome::new(
                    "scaling",
                    art.fit.pass && art.rescale_pass,
                    format!(
                        "slope {:.6} vs {:.6} (relative error {:.3e}); rescale pass {}",
                        art.fit.fitted_slope, art.fit.expected_slope, art.fit.relative_error, art.rescale_pass
                    ),
                )
            }
            Err(e) => CheckOutcome::new("scaling", false, format!("no usable limiting results: {e}")),
        });
    }
    let (reports, rows, c) = sweep_checks(cfg, &points, &reference).map_err(Failure::at("sweep checks"))?;
    write_sweep_reports(out, &reports, &rows).map_err(Failure::at("sweep checks"))?;
    checks.extend(c);
    Ok(checks)
}

fn load_scaling(root: &Path) -> crate::Result<ScalingArtifact> {
    let dir = root.join(Command::SolveLimiting.subdir());
    let m = read_manifest(&dir)?;
    let rep = m
        .artifacts_of(ArtifactKind::Report)
        .find(|a| a.path == "scaling_report.json")
        .ok_or_else(|| Error::Input("no scaling report among the limiting results".into()))?;
    read_json(&dir.join(&rep.path))
}

/// Barrier exponents to test: configured, or the model `α` and `N - 2s`.
pub fn barrier_alphas(cfg: &ExperimentConfig) -> Vec<f64> {
    cfg.verify.barrier_alphas.clone().unwrap_or_else(|| {
        let top = cfg.model.dim() as f64 - 2.0 * cfg.model.s();
        let mut a = vec![cfg.model.alpha()];
        if (top - cfg.model.alpha()).abs() > 1e-12 {
            a.push(top);
        }
        a
    })
}

fn barrier_checks(cfg: &ExperimentConfig, points: &[SweepPoint]) -> crate::Result<(Vec<verify::BarrierReport>, Vec<CheckOutcome>)> {
    let radii = cfg
        .verify
        .barrier_radii
        .clone()
        .unwrap_or_else(|| verify::default_barrier_radii(cfg.model.barrier_radius()));
    // the inequality is claimed for small eps only, so the smallest eps of
    // the sweep decides and larger ones are reported alongside
    let decisive = points.iter().map(|p| p.eps).fold(f64::INFINITY, f64::min);
    let mut reports = Vec::new();
    let mut checks = Vec::new();
    for alpha in barrier_alphas(cfg) {
        let mut others = Vec::new();
        let mut outcome = None;
        for pt in points {
            let params = cfg.model.with_eps(pt.eps)?;
            let spec = BarrierSpec { alpha, ..BarrierSpec::from_params(&params) };
            let r = verify::barrier_supersolution_check(&spec, &params, &cfg.potential, &pt.summary.peak_location, &radii, true)?;
            let worst = r.samples.iter().map(|s| s.value / s.barrier).fold(f64::INFINITY, f64::min);
            if pt.eps == decisive {
                outcome = Some((r.pass, format!("eps={}: {} samples, min value/barrier {worst:.4e}", pt.eps, r.samples.len())));
            } else {
                let failing: Vec<String> = r.samples.iter().filter(|s| !s.pass).map(|s| format!("{}", s.point[0])).collect();
                others.push(if failing.is_empty() {
                    format!("eps={} holds", pt.eps)
                } else {
                    format!("eps={} fails at x1 in [{}]", pt.eps, failing.join(", "))
                });
            }
            reports.push(r);
        }
        if let Some((pass, mut detail)) = outcome {
            if !others.is_empty() {
                detail.push_str(&format!("; larger eps: {}", others.join("; ")));
            }
            checks.push(CheckOutcome::new(format!("barrier alpha={alpha}"), pass, detail));
        }
    }
    Ok((reports, checks))
}

/// Operator and energy invariants on small grids.
pub fn selftest_checks() -> crate::Result<Vec<CheckOutcome>> {
    let mut checks = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(7);

    let g = Grid::new(1, std::f64::consts::PI, 64)?;
    let mut worst: f64 = 0.0;
    for s in [0.25, 0.5, 0.75] {
        for k in [1.0f64, 3.0, 17.0] {
            let u = Field::from_fn(g, |x| (k * x[0]).cos());
            let au = fracops::apply_fraclap_spectral(&u, s)?;
            let want = k.powf(2.0 * s);
            for (a, b) in au.values().iter().zip(u.values()) {
                worst = worst.max((a - want * b).abs());
            }
        }
    }
    checks.push(CheckOutcome::new("fourier modes", worst < 1e-12, format!("max error {worst:.2e}")));

    let c = fracops::apply_fraclap_spectral(&Field::constant(g, 2.5), 0.4)?.max_abs();
    checks.push(CheckOutcome::new("constants", c < 1e-12, format!("max |(-Δ)^s 2.5| = {c:.2e}")));

    let g2 = Grid::new(2, 3.0, 32)?;
    let u = Field::new(g2, (0..g2.len()).map(|_| rng.gen_range(-1.0..1.0)).collect())?;
    let w = Field::new(g2, (0..g2.len()).map(|_| rng.gen_range(-1.0..1.0)).collect())?;
    let lhs = fracops::apply_fraclap_spectral(&u, 0.3)?.dot(&w);
    let rhs = u.dot(&fracops::apply_fraclap_spectral(&w, 0.3)?);
    let rel = (lhs - rhs).abs() / lhs.abs().max(rhs.abs());
    checks.push(CheckOutcome::new("self-adjoint", rel < 1e-10, format!("relative asymmetry {rel:.2e}")));

    let g = Grid::new(1, 80.0, 4096)?;
    let u = Field::from_fn(g, |x| (-x[0] * x[0]).exp());
    let spec = fracops::apply_fraclap_spectral(&u, 0.5)?;
    let nodes: Vec<usize> = [0.0, 0.5, 1.0].iter().map(|x| g.nearest_node(&[*x])).collect::<crate::Result<_>>()?;
    let pts: Vec<Vec<f64>> = nodes.iter().map(|&j| vec![g.axis_coord(j)]).collect();
    let direct = fracops::apply_fraclap_direct(&u, 0.5, &pts, DirectOptions::default())?;
    let mut worst: f64 = 0.0;
    for (&j, d) in nodes.iter().zip(&direct.values) {
        worst = worst.max((spec.values()[j] - d).abs());
    }
    checks.push(CheckOutcome::new("spectral vs direct", worst < 1e-3, format!("max difference {worst:.2e}")));

    let params = model::ModelParams::default_1d().with_eps(0.2)?;
    let pspec = PotentialSpec::default_bump(1);
    let g = Grid::new(1, 10.24, 1024)?;
    let ctx = EnergyContext::penalized(&params, &pspec, &NonlinearitySpec::PurePower, &g)?;
    let u = Field::from_fn(g, |x| 1.5 * (-(x[0] * x[0]) * 4.0).exp() + 0.1 / (1.0 + x[0] * x[0]));
    let phi = Field::from_fn(g, |x| (-(x[0] - 0.3).powi(2)).exp() * (2.0 * x[0]).cos());
    let grad = ctx.gradient(&u)?.dot(&phi);
    let t = 1e-5;
    let fd = (ctx.energy(&u.axpy(t, &phi))?.total - ctx.energy(&u.axpy(-t, &phi))?.total) / (2.0 * t);
    let rel = (fd - grad).abs() / grad.abs();
    checks.push(CheckOutcome::new("energy gradient", rel < 1e-5, format!("relative difference {rel:.2e}")));

    let lim = EnergyContext::limiting(1.3, 0.25, 3.5, &g)?;
    let v = Field::from_fn(g, |x| 0.7 / (1.0 + x[0] * x[0]));
    let (tn, _) = lim.nehari_project(&v)?;
    let lp = v.norm_lq(3.5).powf(3.5);
    let want = (lim.quadratic_form(&v) / lp).powf(1.0 / 1.5);
    let rel = (tn - want).abs() / want;
    checks.push(CheckOutcome::new("nehari closed form", rel < 1e-10, format!("relative difference {rel:.2e}")));

    let back = io::decode_field_csv(&io::encode_field_csv(&u))?;
    let (h, d) = io::encode_field_binary(&u2d(&mut rng)?);
    let ok = back == u && io::decode_field_binary(&h, &d).is_ok();
    checks.push(CheckOutcome::new("field round trip", ok, "csv and binary"));
    Ok(checks)
}

fn u2d(rng: &mut ChaCha8Rng) -> crate::Result<Field> {
    let g = Grid::new(2, 1.0, 16)?;
    Field::new(g, (0..g.len()).map(|_| rng.gen_range(-1.0..1.0)).collect())
}

fn selftest(out: &mut ArtifactWriter) -> Step<Vec<CheckOutcome>> {
    let checks = selftest_checks().map_err(Failure::at("selftest"))?;
    out.write_json("selftest.json", ArtifactKind::Report, &checks)
        .map_err(Failure::at("selftest"))?;
    Ok(checks)
}
