use std::path::Path;
use std::process::Command;

use fracpen::cli::{self, ArtifactKind, Manifest};
use fracpen::config::ExperimentConfig;
use fracpen::grid::Grid;
use fracpen::io;
use fracpen::verify;

fn small_config(dir: &Path) -> std::path::PathBuf {
    let mut c = ExperimentConfig::default_1d();
    c.grid = Grid::new(1, 10.24, 2048).unwrap();
    c.limiting.grid = Some(Grid::new(1, 10.0, 2048).unwrap());
    c.sweep.eps_list = vec![0.4, 0.2, 0.1];
    c.solver.gradient_tol = 1e-6;
    let path = dir.join("small.json");
    std::fs::write(&path, serde_json::to_string_pretty(&c).unwrap()).unwrap();
    path
}

fn run(root: &Path, args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_fracpen"))
        .args(args)
        .env(cli::OUTPUT_ROOT_ENV, root)
        .output()
        .unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn manifest(dir: &Path) -> Manifest {
    cli::read_manifest(dir).unwrap()
}

#[test]
fn selftest_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let (code, out, err) = run(tmp.path(), &["selftest"]);
    assert_eq!(code, 0, "{out}{err}");
    assert!(out.lines().all(|l| l.starts_with("PASS")), "{out}");
    assert!(manifest(&tmp.path().join("selftest")).pass);
}

#[test]
fn verify_on_empty_directory_is_missing_input() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let (code, _, err) = run(&tmp.path().join("empty"), &["verify", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code, 2, "{err}");
    assert!(err.contains("missing inputs"), "{err}");
}

#[test]
fn config_errors_exit_2_with_field_path() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let c = cfg.to_str().unwrap();
    let (code, _, err) = run(tmp.path(), &["solve-penalized", "--config", c, "--set", "solver.max_iters=-3"]);
    assert_eq!(code, 2);
    assert!(err.contains("solver.max_iters"), "{err}");
    let (code, _, err) = run(tmp.path(), &["sweep", "--config", c, "--set", "sweep.unknown=1"]);
    assert_eq!(code, 2);
    assert!(err.contains("unknown"), "{err}");
    let (code, _, _) = run(tmp.path(), &["sweep", "--config", "/nonexistent/config.json"]);
    assert_eq!(code, 2);
    let (code, _, _) = run(tmp.path(), &["sweep"]);
    assert_eq!(code, 2);
    let (code, _, _) = run(tmp.path(), &["frobnicate", "--config", c]);
    assert_eq!(code, 2);
    // h = 0.01 violates h <= eps/10 at eps = 0.05
    let (code, _, err) = run(tmp.path(), &["sweep", "--config", c, "--set", "sweep.eps_list=[0.1,0.05]"]);
    assert_eq!(code, 2, "{err}");
}

#[test]
fn numerical_failure_exits_3_with_stage() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let c = cfg.to_str().unwrap();
    // a guess far outside U carries no mass in Lambda, so projection fails
    let (code, _, err) = run(
        tmp.path(),
        &[
            "solve-penalized",
            "--config",
            c,
            "--set",
            "model.eps=0.05",
            "--set",
            r#"solver.initial_guess={"gaussian":{"center":[8.0],"width":0.05,"amplitude":1e-6}}"#,
            "--set",
            "grid.points_per_axis=4096",
        ],
    );
    assert_eq!(code, 3, "{err}");
    assert!(err.contains("penalized solve"), "{err}");
}

#[test]
fn sweep_artifacts_hashes_and_table() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let c = cfg.to_str().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let (code_a, out_a, err_a) = run(&a, &["sweep", "--config", c, "--set", "model.eps=0.2"]);
    assert!(code_a == 0 || code_a == 1, "{out_a}{err_a}");
    let (code_b, _, _) = run(&b, &["sweep", "--config", c, "--set", "model.eps=0.2"]);
    assert_eq!(code_a, code_b);
    // exit status agrees with the printed checks
    assert_eq!(code_a == 0, !out_a.contains("FAIL"));

    let ma = manifest(&a.join("sweep"));
    let mb = manifest(&b.join("sweep"));
    assert_eq!(ma.artifacts, mb.artifacts, "hashes must be reproducible");
    assert_eq!(ma.config.as_ref().unwrap().model.eps(), 0.2, "resolved config is embedded");
    assert!(ma.artifacts.len() >= 7);
    assert_eq!(ma.artifacts_of(ArtifactKind::Field).count(), 3);
    assert_eq!(ma.artifacts_of(ArtifactKind::Summary).count(), 4);
    assert!(ma.artifacts_of(ArtifactKind::Report).count() >= 1);
    for e in &ma.artifacts {
        assert_eq!(io::sha256_file(&a.join("sweep").join(&e.path)).unwrap(), e.sha256);
    }

    // the emitted table reproduces the report to full precision
    let dir = a.join("sweep");
    let rows = verify::table_from_csv(&std::fs::read(dir.join("sweep_table.csv")).unwrap()).unwrap();
    let rep: cli::SweepChecks = serde_json::from_slice(&std::fs::read(dir.join("concentration_report.json")).unwrap()).unwrap();
    assert_eq!(rows.len(), rep.concentration.entries.len());
    for (row, e) in rows.iter().zip(&rep.concentration.entries) {
        assert_eq!(row.eps, e.eps);
        assert_eq!(row.normalized_energy, e.normalized_energy);
        assert_eq!(row.v_at_peak, e.v_at_peak);
        assert_eq!(row.outside_sup, e.outside_sup);
        assert_eq!(row.x_eps_0, e.x_eps[0]);
    }
    for (row, d) in rows.iter().zip(&rep.decay) {
        assert_eq!(row.alpha_fit, Some(d.alpha_fit));
        assert_eq!(row.c_fit, Some(d.c_fit));
    }

    // verify reads the sweep back; the limiting results are absent, so the
    // scaling check cannot pass
    let (code, out, err) = run(&a, &["verify", "--config", c]);
    assert_eq!(code, 1, "{out}{err}");
    assert!(out.contains("FAIL scaling"), "{out}");
    assert!(manifest(&a.join("verify")).artifacts.len() >= 5);

    // a tampered artifact is rejected
    std::fs::write(dir.join("eps_0.4.csv"), b"x,u\n").unwrap();
    let (code, _, err) = run(&a, &["verify", "--config", c]);
    assert_eq!(code, 2, "{err}");
}

#[test]
fn limiting_with_scaling_report() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let (code, out, err) = run(tmp.path(), &["solve-limiting", "--config", cfg.to_str().unwrap()]);
    assert!(code == 0 || code == 1, "{out}{err}");
    let m = manifest(&tmp.path().join("limiting"));
    assert_eq!(m.artifacts_of(ArtifactKind::Field).count(), 3);
    assert_eq!(m.artifacts_of(ArtifactKind::Summary).count(), 3);
    let art: cli::ScalingArtifact =
        serde_json::from_slice(&std::fs::read(tmp.path().join("limiting/scaling_report.json")).unwrap()).unwrap();
    assert_eq!(art.rescaled.len(), 3);
    assert_eq!(art.reference_a, 4.0);
    let own = art.rescaled.iter().find(|e| e.a == art.reference_a).unwrap();
    assert!(own.relative_error < 1e-14);
    assert!(out.contains("scaling slope"), "{out}");
}
