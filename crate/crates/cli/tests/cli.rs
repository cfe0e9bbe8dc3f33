use std::fs;
use std::path::Path;
use std::process::Command;

use nsp_cli::commands::{cmd_simulate, cmd_sweep};
use nsp_cli::{exit, parse_config, parse_config_with};
use serde_json::Value;

const SMALL: &str = "\
[fluid]
gamma = 2.0
[domain]
r_inner = 1
r_outer = 16
n_cells = 200
[steady]
profile = admissible_bump
amplitude = 0.5
[evolve]
delta = 1e-3
t_end = 1.0
output_stride = 5
";

fn nsp(dir: &Path, config: &str, args: &[&str]) -> (i32, String) {
    let path = dir.join("run.cfg");
    fs::write(&path, config).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_nsp"))
        .args(args)
        .arg("--config")
        .arg(&path)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn gamma_below_one_names_key_and_line() {
    let e = parse_config(&SMALL.replace("gamma = 2.0", "gamma = 0.5")).unwrap_err();
    assert_eq!(e.key.as_deref(), Some("fluid.gamma"));
    assert_eq!(e.line, Some(2));
    assert!(e.to_string().contains("line 2"));
}

#[test]
fn missing_domain_lists_required_keys() {
    let e = parse_config("[fluid]\ngamma = 2\n").unwrap_err();
    for k in ["r_inner", "r_outer", "n_cells"] {
        assert!(e.message.contains(k), "{e}");
    }
}

#[test]
fn type_mismatch_and_unknown_section() {
    let e = parse_config(&SMALL.replace("n_cells = 200", "n_cells = many")).unwrap_err();
    assert_eq!(e.key.as_deref(), Some("domain.n_cells"));
    assert!(parse_config(&format!("{SMALL}[plot]\n")).is_err());
    assert!(parse_config_with(SMALL, &["nosuch.key=1".into()]).is_err());
}

#[test]
fn unknown_key_fails_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let (code, err) = nsp(dir.path(), &format!("{SMALL}colour = red\n"), &["simulate"]);
    assert_eq!(code, exit::PARSE);
    assert!(err.contains("evolve.colour"), "{err}");
}

#[test]
fn constant_background_steady_state() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = SMALL.replace("profile = admissible_bump", "profile = constant");
    let (code, _) = nsp(dir.path(), &cfg, &["steady"]);
    assert_eq!(code, exit::OK);
    let text = fs::read_to_string(dir.path().join("out/rho_tilde.txt")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("r rho_tilde"));
    for l in lines {
        let v: f64 = l.split_whitespace().nth(1).unwrap().parse().unwrap();
        assert!((v - 1.0).abs() < 1e-9);
    }
}

#[test]
fn bump_steady_state_certificates() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _) = nsp(dir.path(), SMALL, &["steady"]);
    assert_eq!(code, exit::OK);
    let c = json(&dir.path().join("out/certificate.json"));
    assert_eq!(c["bounds"]["verdict"], "PASS");
    assert_eq!(c["supersolution"]["verdict"], "PASS");
    assert_eq!(c["subsolution"]["verdict"], "PASS");
    assert!(c["regularity"]["stable_under_refinement"]
        .as_bool()
        .unwrap());
}

#[test]
fn inadmissible_amplitude_is_a_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    let (code, err) = nsp(
        dir.path(),
        &SMALL.replace("amplitude = 0.5", "amplitude = 1.5"),
        &["steady"],
    );
    assert_eq!(code, exit::PARSE);
    assert!(err.contains("steady.amplitude"), "{err}");
}

#[test]
fn zero_amplitude_run() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _) = nsp(
        dir.path(),
        &SMALL.replace("delta = 1e-3", "delta = 0"),
        &["simulate"],
    );
    assert_eq!(code, exit::OK);
    let csv = fs::read_to_string(dir.path().join("out/timeseries.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("t,E,D,D_no_qtt,mass,E_basic,identity_residual,min_density")
    );
    for l in lines {
        let e: f64 = l.split(',').nth(1).unwrap().parse().unwrap();
        assert!(e <= 1e-12);
    }
    assert_eq!(
        json(&dir.path().join("out/summary.json"))["verdict"],
        "NONE"
    );
}

#[test]
fn overload_is_a_runtime_abort() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = SMALL
        .replace("delta = 1e-3", "delta = 1e4")
        .replace("init = mixed", "");
    let (code, _) = nsp(dir.path(), &format!("{cfg}init = density\n"), &["simulate"]);
    assert_eq!(code, exit::ABORT);
    let s = json(&dir.path().join("out/summary.json"));
    assert!(s["failure"]["t"].is_number());
    assert!(s["failure"]["runtime_abort"].as_bool().unwrap());
}

#[test]
fn simulation_is_byte_reproducible_and_checkpoints() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = format!("{SMALL}[output]\ncheckpoint_stride = 10\n");
    let (code, _) = nsp(dir.path(), &cfg, &["simulate", "--seed", "7"]);
    assert_eq!(code, exit::OK);
    let first = fs::read(dir.path().join("out/timeseries.csv")).unwrap();
    let summary = json(&dir.path().join("out/summary.json"));
    assert_eq!(summary["verdict"], "PASS");
    assert_eq!(summary["seed"], 7);
    let ck = fs::read_to_string(dir.path().join("out/state_10.txt")).unwrap();
    assert!(ck.starts_with("r q u phi\n"));
    assert!(dir.path().join("out/state_0.txt").exists());
    let (code, _) = nsp(dir.path(), &cfg, &["simulate", "--seed", "7"]);
    assert_eq!(code, exit::OK);
    assert_eq!(
        first,
        fs::read(dir.path().join("out/timeseries.csv")).unwrap()
    );
}

#[test]
fn set_overrides_reach_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _) = nsp(
        dir.path(),
        SMALL,
        &[
            "simulate",
            "--set",
            "evolve.t_end=0.2",
            "--set",
            "domain.n_cells=100",
        ],
    );
    assert_eq!(code, exit::OK);
    let s = json(&dir.path().join("out/summary.json"));
    assert_eq!(s["n_cells"], 100);
    assert_ne!(s["config_digest"], parse_config(SMALL).unwrap().digest);
}

#[test]
fn inequality_report_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = format!(
        "{SMALL}[ineqlab]\nvector_fields = 6\nscalar_fields = 3\nradial_sources = 6\nnr = 16\nntheta = 8\nnphi = 16\n"
    );
    let (code, _) = nsp(dir.path(), &cfg, &["verify-inequalities", "--seed", "3"]);
    assert!(code == exit::OK || code == exit::VERDICT);
    let mut a = json(&dir.path().join("out/inequalities.json"));
    for block in [
        "div_curl",
        "trace_scaling",
        "boundary_pairing",
        "sobolev_l6",
        "elliptic_regularity",
    ] {
        assert!(a["report"][block].is_object(), "{block}");
    }
    assert_eq!(a["seed"], 3);
    nsp(dir.path(), &cfg, &["verify-inequalities", "--seed", "3"]);
    let mut b = json(&dir.path().join("out/inequalities.json"));
    a["timestamp"] = Value::Null;
    b["timestamp"] = Value::Null;
    assert_eq!(a, b);

    let (code, _) = nsp(
        dir.path(),
        &format!("{cfg}ntheta = 4\n").replace("ntheta = 8\n", ""),
        &["verify-inequalities"],
    );
    assert_eq!(code, exit::PARSE);
}

#[test]
fn single_point_sweep_matches_simulate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = parse_config(SMALL).unwrap();
    assert_eq!(
        cmd_simulate(&cfg, &dir.path().join("sim")).unwrap(),
        exit::OK
    );
    assert_eq!(
        cmd_sweep(&cfg, &dir.path().join("sweep")).unwrap(),
        exit::OK
    );
    let mut a = json(&dir.path().join("sim/summary.json"));
    let mut b = json(&dir.path().join("sweep/job_0/summary.json"));
    a["timings"] = Value::Null;
    b["timings"] = Value::Null;
    assert_eq!(a, b);
    assert_eq!(
        fs::read(dir.path().join("sim/timeseries.csv")).unwrap(),
        fs::read(dir.path().join("sweep/job_0/timeseries.csv")).unwrap()
    );
}

fn sweep_rows(dir: &Path) -> Vec<Vec<String>> {
    let text = fs::read_to_string(dir.join("sweep.csv")).unwrap();
    text.lines()
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

#[test]
fn sweep_over_amplitude_is_robust() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = format!("{SMALL}[sweep]\ndelta = 1e-4, 1e-3\n");
    let (code, _) = nsp(dir.path(), &cfg, &["sweep"]);
    assert_eq!(code, exit::OK);
    let rows = sweep_rows(&dir.path().join("out"));
    assert_eq!(rows.len(), 2);
    let r: Vec<f64> = rows.iter().map(|r| r[7].parse().unwrap()).collect();
    assert!((r[0] - r[1]).abs() <= 0.3 * r[0].max(r[1]), "{r:?}");
}

#[test]
fn sweep_over_grids_shows_second_order_residual() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = format!(
        "{}[sweep]\nn_cells = 200, 400\n",
        SMALL.replace("t_end = 1.0", "t_end = 0.1")
    );
    let (code, _) = nsp(dir.path(), &cfg, &["sweep"]);
    assert_eq!(code, exit::OK);
    let rows = sweep_rows(&dir.path().join("out"));
    let res: Vec<f64> = rows.iter().map(|r| r[12].parse().unwrap()).collect();
    let ratio = res[0] / res[1];
    assert!((3.0..=5.0).contains(&ratio), "{ratio}");
}

#[test]
fn invalid_thread_cap_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.cfg");
    fs::write(&path, SMALL).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_nsp"))
        .args(["sweep", "--config"])
        .arg(&path)
        .arg("--out")
        .arg(dir.path().join("out"))
        .env("NSP_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(exit::PARSE));
}
