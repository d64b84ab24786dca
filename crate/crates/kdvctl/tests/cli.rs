use std::fs;
use std::path::Path;
use std::process::Command;

use kdvctl::formats::{ExactPolyJson, ProgramFile, RationalJson, StateFile, WordFile};
use kdvctl_core::spectral::{ControlProgram, SpectralState};
use kdvctl_core::trig::ExactPoly;
use kdvctl_core::Complex64;
use num_bigint::BigInt;
use serde_json::Value;

fn run_in(dir: &Path, args: &[&str]) -> i32 {
    let out = dir.to_str().unwrap();
    let mut full = vec!["kdvctl", "--out", out];
    full.extend_from_slice(args);
    kdvctl::run(full)
}

fn json(path: impl AsRef<Path>) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn sample_state() -> SpectralState {
    let coeffs: Vec<Complex64> = (0..17)
        .map(|j| Complex64::new((j as f64 * 0.37).sin(), (j as f64 * 1.3).cos()) / (1.0 + j as f64))
        .collect();
    SpectralState::new(8, -1.25, coeffs).unwrap().normalized()
}

#[test]
fn empty_program_returns_input_state() {
    let dir = tempfile::tempdir().unwrap();
    let state = dir.path().join("in.json");
    fs::write(&state, serde_json::to_string(&StateFile::from(&sample_state())).unwrap()).unwrap();
    let out = dir.path().join("o");
    assert_eq!(run_in(&out, &["simulate", "--state", state.to_str().unwrap()]), 0);
    assert_eq!(json(&state), json(out.join("state.json")));
    assert_eq!(json(out.join("summary.json"))["l2_drift"], 0.0);
}

#[test]
fn random_simulation_conserves_norm_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        assert_eq!(run_in(d, &["--seed", "11", "--k", "32", "simulate", "--random", "6"]), 0);
    }
    for f in ["state.json", "trace.csv", "program.json", "summary.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f} differs");
    }
    assert!(json(a.join("summary.json"))["l2_drift"].as_f64().unwrap() < 1e-10);

    let c = dir.path().join("c");
    assert_eq!(run_in(&c, &["--seed", "12", "--k", "32", "simulate", "--random", "6"]), 0);
    assert_ne!(fs::read(a.join("program.json")).unwrap(), fs::read(c.join("program.json")).unwrap());
}

#[test]
fn state_and_program_files_round_trip_exactly() {
    let s = sample_state();
    let text = serde_json::to_string(&StateFile::from(&s)).unwrap();
    let back = serde_json::from_str::<StateFile>(&text).unwrap().to_state(4, 1e-10).unwrap();
    assert_eq!(back.coeffs(), s.coeffs());
    assert_eq!(back.alpha(), s.alpha());

    let mut p = ControlProgram::new(3);
    p.push(0.1 + 0.2, vec![1.0 / 3.0, -2.5e-300, 7e19], "a");
    p.push(1e-17, vec![0.0, f64::MIN_POSITIVE, -0.0], "b");
    let text = serde_json::to_string(&ProgramFile::from(&p)).unwrap();
    let back = ControlProgram::from(&serde_json::from_str::<ProgramFile>(&text).unwrap());
    assert_eq!(back, p);
}

#[test]
fn rationals_keep_arbitrary_precision() {
    let big = BigInt::from(3).pow(90u32);
    let json = format!(r#"{{"a0": {{"num": "{big}", "den": 7}}, "cos": [{{"num": -1, "den": "{big}"}}], "sin": []}}"#);
    let p: ExactPolyJson = serde_json::from_str(&json).unwrap();
    let exact = ExactPoly::try_from(&p).unwrap();
    let again: ExactPolyJson = serde_json::from_str(&serde_json::to_string(&ExactPolyJson::from(&exact)).unwrap()).unwrap();
    assert_eq!(ExactPoly::try_from(&again).unwrap(), exact);

    let zero: RationalJson = serde_json::from_str(r#"{"num": 1, "den": 0}"#).unwrap();
    assert!(kdvctl_core::trig::Rational::try_from(&zero).is_err());
}

#[test]
fn word_atoms_with_float_fields_parse() {
    let text = r#"{"atoms": [
        {"kind": "phase", "theta": {"a0": 0.5, "cos": [0.0, 0.25], "sin": []}},
        {"kind": "transport", "field": [{"sign": "-", "lambda": 0.5, "phi": {"a0": 0.0, "cos": [], "sin": [1.0]}}], "time": 0.1},
        {"kind": "translate", "delta": -0.3},
        {"kind": "global_phase", "c": 1.5}
    ]}"#;
    let w: WordFile = serde_json::from_str(text).unwrap();
    assert_eq!(w.atoms.len(), 4);
    let back: WordFile = serde_json::from_str(&serde_json::to_string(&w).unwrap()).unwrap();
    assert_eq!(back, w);
}

#[test]
fn saturation_report_verifies() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run_in(dir.path(), &["saturate", "--n", "3", "--nmax", "16"]), 0);
    let rep = json(dir.path().join("saturation.json"));
    assert_eq!(rep["all_verified"], true);
    assert_eq!(rep["certificates"].as_array().unwrap().len(), 33);
    let csv = fs::read_to_string(dir.path().join("saturation.csv")).unwrap();
    assert_eq!(csv.lines().count(), 34);
}

#[test]
fn strang_study_reports_second_order() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run_in(dir.path(), &["convergence", "strang"]), 0);
    let rep = json(dir.path().join("strang.json"));
    let slope = rep["curves"][0]["slope"].as_f64().unwrap();
    assert!((slope - 2.0).abs() < 0.1, "slope {slope}");
    assert!(rep["checks"].as_array().unwrap().iter().all(|c| c["passed"] == true));
}

#[test]
fn flow_and_period_commands() {
    let dir = tempfile::tempdir().unwrap();
    let field = r#"{"a0": 1.5, "cos": [0.0, -0.5], "sin": []}"#;
    assert_eq!(run_in(dir.path(), &["period", "--field", field]), 0);
    let p = json(dir.path().join("period.json"))["period"].as_f64().unwrap();
    assert!((p - std::f64::consts::TAU / 2f64.sqrt()).abs() < 1e-9, "period {p}");

    assert_eq!(run_in(dir.path(), &["flow", "--field", field, "--time", "-0.25"]), 0);
    let f = json(dir.path().join("flowmap.json"));
    assert_eq!(f["M"], 256);
}

#[test]
fn phase_synthesis_meets_tolerance() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("t.json");
    fs::write(&target, r#"{"theta": {"a0": 0.0, "cos": [0.0, 0.0, 0.3], "sin": []}, "epsilon": 1e-3, "time_budget": 0.1}"#)
        .unwrap();
    let out = dir.path().join("o");
    assert_eq!(run_in(&out, &["synth-phase", "--target", target.to_str().unwrap()]), 0);
    let s = json(out.join("summary.json"));
    assert!(s["achieved_error"].as_f64().unwrap() < 1e-3);
    assert!(s["total_time"].as_f64().unwrap() <= 0.1);
    let program: ProgramFile = serde_json::from_str(&fs::read_to_string(out.join("program.json")).unwrap()).unwrap();
    assert!(!ControlProgram::from(&program).is_empty());
}

#[test]
fn invalid_configuration_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run_in(dir.path(), &["--k", "3", "simulate"]), 2);

    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "profiles = [{ a0 = 0.0, cos = [1.0], sin = [] }, { a0 = 0.0, cos = [], sin = [1.0] }]\n").unwrap();
    assert_eq!(run_in(dir.path(), &["--config", cfg.to_str().unwrap(), "simulate"]), 2);

    fs::write(&cfg, "bogus_key = 1\n").unwrap();
    assert_eq!(run_in(dir.path(), &["--config", cfg.to_str().unwrap(), "simulate"]), 2);

    assert_eq!(run_in(dir.path(), &["no-such-command"]), 2);
}

#[test]
fn missing_input_is_a_runtime_failure() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run_in(dir.path(), &["simulate", "--program", "/nonexistent/program.json"]), 1);
}

#[test]
fn binary_honours_output_environment_variable() {
    let dir = tempfile::tempdir().unwrap();
    let env_out = dir.path().join("from_env");
    let status = Command::new(env!("CARGO_BIN_EXE_kdvctl"))
        .args(["saturate", "--nmax", "8"])
        .env(kdvctl::OUT_ENV, &env_out)
        .current_dir(dir.path())
        .status()
        .unwrap();
    assert!(status.success());
    assert!(env_out.join("saturation.json").exists());

    let flag_out = dir.path().join("from_flag");
    let out = Command::new(env!("CARGO_BIN_EXE_kdvctl"))
        .args(["--out", flag_out.to_str().unwrap(), "--k", "2", "simulate"])
        .env(kdvctl::OUT_ENV, &env_out)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let diag: Value = serde_json::from_slice(out.stderr.trim_ascii()).unwrap();
    assert_eq!(diag["kind"], "config");
    assert_eq!(diag["exit_code"], 2);
}
