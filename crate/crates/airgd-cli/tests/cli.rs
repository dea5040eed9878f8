//! End-to-end checks of the CLI surface: config loading, artifact schema,
//! reproducibility, and the binary's exit codes.

use std::path::{Path, PathBuf};
use std::process::Command;

use airgd_cli::config::ExperimentConfig;
use airgd_cli::experiment::{run_experiment, sweep, SweepAxis};
use airgd_cli::report::CSV_HEADER;

fn workspace_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").canonicalize().unwrap()
}

fn temp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("airgd-cli-test-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn smoke_config() -> ExperimentConfig {
    ExperimentConfig::load(&workspace_root().join("configs/smoke.cfg")).unwrap()
}

#[test]
fn shipped_default_config_matches_reference_parameters() {
    let cfg = ExperimentConfig::load(&workspace_root().join("configs/default.cfg")).unwrap();
    assert_eq!(cfg.channel.alpha, 1.5);
    assert_eq!(cfg.problem.num_agents(), 100);
    assert_eq!(cfg.channel.mu, 1.0);
    assert!(matches!(cfg.train.schedule, airgd::trainer::Schedule::ThetaOverK { theta } if theta == 1.0));
    cfg.build_channel().unwrap();
    cfg.build_train().unwrap();
}

#[test]
fn smoke_run_emits_csv_with_expected_rows() {
    let dir = temp_dir("smoke");
    let cfg = smoke_config();
    let (summary, artifacts, _stats) = run_experiment(&cfg, &dir, "smoke").unwrap();
    let csv = std::fs::read_to_string(&artifacts.csv_path).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), CSV_HEADER);
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 11, "K=10 emits rounds 0..=10");
    // Round-trip the schema: every row parses into the five columns.
    for (i, row) in rows.iter().enumerate() {
        let cols: Vec<&str> = row.split(',').collect();
        assert_eq!(cols.len(), 5, "row {i}: {row}");
        assert_eq!(cols[0].parse::<usize>().unwrap(), i);
        for c in &cols[1..4] {
            assert!(c.parse::<f64>().unwrap().is_finite());
        }
        assert_eq!(cols[4].parse::<usize>().unwrap(), 1);
    }
    assert!(summary.truncated_trials.is_empty());
    let json = std::fs::read_to_string(&artifacts.summary_path).unwrap();
    let parsed: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(parsed["config"]["channel.alpha"], "1.5");
    assert!(parsed["wall_time_seconds"].as_f64().unwrap() >= 0.0);
    assert_eq!(parsed["bounds"]["c_hat"]["quantile"].as_f64().unwrap(), 0.999);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn reruns_are_byte_identical() {
    let cfg = smoke_config();
    let dir_a = temp_dir("repro-a");
    let dir_b = temp_dir("repro-b");
    let (_, a, _) = run_experiment(&cfg, &dir_a, "x").unwrap();
    let (_, b, _) = run_experiment(&cfg, &dir_b, "x").unwrap();
    let csv_a = std::fs::read(&a.csv_path).unwrap();
    let csv_b = std::fs::read(&b.csv_path).unwrap();
    assert_eq!(csv_a, csv_b);
    std::fs::remove_dir_all(&dir_a).unwrap();
    std::fs::remove_dir_all(&dir_b).unwrap();
}

#[test]
fn momentum_zero_and_gd_emit_identical_artifacts() {
    let dir = temp_dir("beta0");
    let gd_cfg = smoke_config();
    let mut mm_cfg = gd_cfg.clone();
    mm_cfg.train.momentum = Some(0.0);
    let (_, gd, _) = run_experiment(&gd_cfg, &dir, "gd").unwrap();
    let (_, mm, _) = run_experiment(&mm_cfg, &dir, "mm").unwrap();
    assert_eq!(
        std::fs::read(&gd.csv_path).unwrap(),
        std::fs::read(&mm.csv_path).unwrap(),
        "beta = 0 must reproduce the plain-descent trajectory"
    );
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn sweep_writes_comparison_summary() {
    let dir = temp_dir("sweep");
    let mut cfg = smoke_config();
    cfg.train.rounds = 60;
    cfg.train.trials = 4;
    let (summary, runs) = sweep(&cfg, SweepAxis::Beta, &[0.0, 0.2], &dir, "smoke").unwrap();
    assert_eq!(summary.entries.len(), 2);
    assert_eq!(runs.len(), 2);
    assert!(summary.verdicts.iter().all(|(_, ok)| *ok));
    assert!(dir.join("smoke_sweep_beta.json").exists());
    assert!(dir.join("smoke_beta0.csv").exists());
    assert!(dir.join("smoke_beta0p2.csv").exists());
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn alpha_sweep_orders_fitted_slopes() {
    // Heavier interference tails converge slower: the four-point tail-index
    // sweep produces one CSV per value plus a comparison summary whose
    // slope-ordering verdict holds.
    let dir = temp_dir("sweep-alpha");
    let text = "\
problem.type = quadratic
problem.num_agents = 50
problem.dim = 10
problem.seed = 424242
channel.mu = 1.0
channel.fading = rayleigh
channel.alpha = 1.5
channel.interference = on
channel.delta = 1.0
channel.mode = direct
train.schedule = theta_over_k
train.theta = 4.0
train.rounds = 2000
train.trials = 50
train.seed = 5
analysis.c_hat_draws = 1000
";
    let cfg = ExperimentConfig::parse_str(text).unwrap();
    let (summary, _) = sweep(&cfg, SweepAxis::Alpha, &[1.3, 1.5, 1.7, 1.9], &dir, "fig").unwrap();
    assert_eq!(summary.entries.len(), 4);
    for label in ["fig_alpha1p3", "fig_alpha1p5", "fig_alpha1p7", "fig_alpha1p9"] {
        assert!(dir.join(format!("{label}.csv")).exists(), "missing {label}.csv");
    }
    assert!(dir.join("fig_sweep_alpha.json").exists());
    let slopes: Vec<f64> = summary.entries.iter().map(|e| e.slope.unwrap()).collect();
    assert!(
        slopes.windows(2).all(|w| w[1] < w[0]),
        "slopes not ordered by tail index: {slopes:?}"
    );
    assert!(summary.verdicts.iter().all(|(_, ok)| *ok), "{:?}", summary.verdicts);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn rho_sweep_orders_fitted_slopes() {
    // Slower learning-rate decay (smaller rho) slows convergence.
    let dir = temp_dir("sweep-rho");
    let text = "\
problem.type = quadratic
problem.num_agents = 50
problem.dim = 10
problem.seed = 424242
channel.mu = 1.0
channel.fading = rayleigh
channel.alpha = 1.5
channel.interference = on
channel.delta = 1.0
channel.mode = direct
train.schedule = power
train.rho = 0.5
train.rounds = 2000
train.trials = 50
train.seed = 6
analysis.c_hat_draws = 1000
";
    let cfg = ExperimentConfig::parse_str(text).unwrap();
    let (summary, _) = sweep(&cfg, SweepAxis::Rho, &[0.3, 0.7], &dir, "rho").unwrap();
    let slopes: Vec<f64> = summary.entries.iter().map(|e| e.slope.unwrap()).collect();
    assert!(slopes[1] < slopes[0], "rho = 0.7 should fit steeper than 0.3: {slopes:?}");
    assert!(summary.verdicts.iter().all(|(_, ok)| *ok), "{:?}", summary.verdicts);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn sweep_rejects_out_of_range_values() {
    let dir = temp_dir("sweep-bad");
    let cfg = smoke_config();
    assert!(sweep(&cfg, SweepAxis::Alpha, &[0.5, 1.5], &dir, "bad").is_err());
    assert!(sweep(&cfg, SweepAxis::Alpha, &[1.5], &dir, "bad").is_err());
    std::fs::remove_dir_all(&dir).unwrap();
}

// --- binary-level checks -------------------------------------------------

fn airgd_bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_airgd"))
}

#[test]
fn validate_accepts_shipped_configs() {
    for name in ["configs/default.cfg", "configs/smoke.cfg"] {
        let out = airgd_bin()
            .arg("validate")
            .arg(workspace_root().join(name))
            .output()
            .unwrap();
        assert!(out.status.success(), "{name}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn validate_rejects_bad_alpha_with_exit_code_1() {
    let dir = temp_dir("badalpha");
    let text = std::fs::read_to_string(workspace_root().join("configs/smoke.cfg"))
        .unwrap()
        .replace("channel.alpha = 1.5", "channel.alpha = 0.8");
    let path = dir.join("bad.cfg");
    std::fs::write(&path, text).unwrap();
    let out = airgd_bin().arg("validate").arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("1 < alpha <= 2"), "stderr: {stderr}");
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn validate_rejects_unknown_key_with_exit_code_1() {
    let dir = temp_dir("unknownkey");
    let mut text =
        std::fs::read_to_string(workspace_root().join("configs/smoke.cfg")).unwrap();
    text.push_str("mystery.knob = 3\n");
    let path = dir.join("bad.cfg");
    std::fs::write(&path, text).unwrap();
    let out = airgd_bin().arg("validate").arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("mystery.knob"), "stderr: {stderr}");
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn run_respects_output_dir_override() {
    let dir = temp_dir("envdir");
    let out = airgd_bin()
        .arg("run")
        .arg(workspace_root().join("configs/smoke.cfg"))
        .env("AIRGD_OUT_DIR", &dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.join("smoke.csv").exists());
    assert!(dir.join("smoke.summary.json").exists());
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn run_check_maps_verdicts_to_exit_code_3() {
    let dir = temp_dir("check");
    let base = std::fs::read_to_string(workspace_root().join("configs/smoke.cfg")).unwrap();
    let base = base.replace("train.rounds = 10", "train.rounds = 200");

    // A window no decaying run can satisfy.
    let failing = format!("{base}analysis.check_slope_min = 0.5\nanalysis.check_slope_max = 1.0\n");
    let path = dir.join("failing.cfg");
    std::fs::write(&path, failing).unwrap();
    let out = airgd_bin().arg("run").arg(&path).arg("--check").env("AIRGD_OUT_DIR", &dir).output().unwrap();
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stdout));

    let passing = format!("{base}analysis.check_slope_min = -5\nanalysis.check_slope_max = 5\n");
    let path = dir.join("passing.cfg");
    std::fs::write(&path, passing).unwrap();
    let out = airgd_bin().arg("run").arg(&path).arg("--check").env("AIRGD_OUT_DIR", &dir).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    // --check without a configured window is a config-usage error.
    let path = dir.join("nowindow.cfg");
    std::fs::write(&path, base).unwrap();
    let out = airgd_bin().arg("run").arg(&path).arg("--check").env("AIRGD_OUT_DIR", &dir).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn unwritable_output_dir_is_a_runtime_error() {
    let dir = temp_dir("unwritable");
    let blocker = dir.join("blocker");
    std::fs::write(&blocker, "not a directory").unwrap();
    let out = airgd_bin()
        .arg("run")
        .arg(workspace_root().join("configs/smoke.cfg"))
        .env("AIRGD_OUT_DIR", blocker.join("sub"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn bounds_verb_prints_evaluations() {
    let out = airgd_bin()
        .arg("bounds")
        .arg(workspace_root().join("configs/smoke.cfg"))
        .arg("--k")
        .arg("100,1000")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("plain-descent bound"), "stdout: {stdout}");
    assert!(stdout.contains("k=100"), "stdout: {stdout}");
    assert!(stdout.contains("truncated"), "stdout: {stdout}");
}
