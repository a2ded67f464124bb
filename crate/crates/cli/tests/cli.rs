use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn duomech(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_duomech"))
        .args(args)
        .current_dir(dir)
        .env("DUOMECH_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn text(b: &[u8]) -> String {
    String::from_utf8_lossy(b).into_owned()
}

fn config(dir: &Path, body: &str) -> String {
    let path = dir.join("run.json");
    fs::write(&path, body).unwrap();
    path.display().to_string()
}

#[test]
fn lists_presets_with_captions() {
    let dir = tempfile::tempdir().unwrap();
    let out = duomech(&["--list-presets"], dir.path());
    assert!(out.status.success());
    let s = text(&out.stdout);
    for name in ["fig2a", "fig8c", "fig9a", "fig10c"] {
        assert!(s.contains(name), "{name} missing");
    }
    assert!(s.contains("δ₁/ω₋=4.00"));
}

#[test]
fn params_preset_prints_frequency_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = duomech(&["params", "--preset", "fig2a", "--points", "5"], dir.path());
    assert!(out.status.success(), "{}", text(&out.stderr));
    let s = text(&out.stdout);
    assert!(s.contains("Δ₁ = δ₁ − 2g₁β"));
    assert!(s.contains("omega_minus"));
    // Five table rows, Δ₁ from 1.1 to 1.5.
    let rows: Vec<_> = s.lines().filter(|l| l.trim_start().starts_with("1.")).collect();
    assert_eq!(rows.len(), 5, "{s}");
}

#[test]
fn zero_beta_warns_about_validity() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), r#"{"beta": 0}"#);
    let out = duomech(&["params", "--config", &cfg], dir.path());
    assert!(out.status.success(), "{}", text(&out.stderr));
    let s = text(&out.stdout);
    let g2_line = s.lines().find(|l| l.contains("G₂ = 4g₂β")).unwrap();
    assert!(g2_line.trim_end().ends_with("= 0.0000000000"), "{g2_line}");
    assert!(text(&out.stderr).contains("warning"));
}

#[test]
fn above_critical_coupling_is_a_validation_failure() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), r#"{"G1": 0.8}"#);
    let out = duomech(&["params", "--config", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out.stderr).contains("critical point of ω₋²=0"));
}

#[test]
fn unknown_preset_and_bad_flags_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(duomech(&["params", "--preset", "fig11"], dir.path()).status.code(), Some(1));
    assert_eq!(duomech(&["sweep", "--cutoffs", "4,4"], dir.path()).status.code(), Some(1));
    assert_eq!(duomech(&["sweep"], dir.path()).status.code(), Some(1));
}

#[test]
fn unwritable_output_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let out = duomech(
        &["sweep", "--preset", "fig5a", "--points", "3", "--out", blocker.join("sub").to_str().unwrap()],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(3), "{}", text(&out.stderr));
}

#[test]
fn single_point_grid_gives_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), r#"{"axis": "G1", "grid": [0.25]}"#);
    let out = duomech(&["sweep", "--config", &cfg, "--out", "res"], dir.path());
    assert!(out.status.success(), "{}", text(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("res/sweep_omega_minus.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
    assert!(csv.starts_with("x,y\n2.5000000000000000e-1,"));
    assert!(dir.path().join("res/sweep_omega_minus.meta.json").exists());
}

#[test]
fn closed_form_preset_sweep_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["sweep", "--preset", "fig4b", "--points", "40"];
    assert!(duomech(&args, dir.path()).status.success());
    let first = fs::read(dir.path().join("fig4b_g_minus.csv")).unwrap();
    let meta = fs::read(dir.path().join("fig4b_g_minus.meta.json")).unwrap();
    assert!(duomech(&args, dir.path()).status.success());
    assert_eq!(first, fs::read(dir.path().join("fig4b_g_minus.csv")).unwrap());
    assert_eq!(meta, fs::read(dir.path().join("fig4b_g_minus.meta.json")).unwrap());
    assert!(dir.path().join("fig4b_g_plus.csv").exists());
}

#[test]
fn g2_subcommand_writes_probe_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let out = duomech(&["g2", "--preset", "fig10a", "--points", "3", "--cutoffs", "3,4,4"], dir.path());
    assert!(out.status.success(), "{}", text(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("fig10a.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("fig10a.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["quantity"], "g2");
    assert_eq!(meta["cutoffs"]["n_cav"], 3);
}

#[test]
fn wrong_branch_fails_verification() {
    let dir = tempfile::tempdir().unwrap();
    let out = duomech(&["verify", "--theta-branch", "printed", "--points", "5"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let s = text(&out.stdout);
    let line = s.lines().find(|l| l.contains("diagonalization residual")).unwrap();
    assert!(line.starts_with("FAIL"), "{line}");
}

#[test]
fn tiny_cutoffs_fail_convergence() {
    let dir = tempfile::tempdir().unwrap();
    let out = duomech(&["verify", "--cutoffs", "2,2,2", "--points", "13"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let s = text(&out.stdout);
    let line = s.lines().find(|l| l.contains("truncation convergence")).unwrap();
    assert!(line.starts_with("FAIL"), "{line}");
    assert!(s.lines().find(|l| l.contains("diagonalization residual")).unwrap().starts_with("PASS"));
}
