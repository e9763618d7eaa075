use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;
use tempfile::TempDir;

const HARMONIC: &str = r#"
model.name = "harmonic"
model.omega = 1.0
initial.p = 0.0
initial.q = 1.0
shape.re = 0.0
shape.im = 1.0
run.hbar = 0.1
run.t_end = 6.0
run.dt_out = 0.1
"#;

const FREE: &str = r#"
model.name = "free"
initial.p = 0.5
initial.q = 0.0
shape.re = 0.0
shape.im = 1.0
run.hbar = 0.1
run.t_end = 4.0
run.dt_out = 0.1
"#;

struct Run {
    code: i32,
    dir: PathBuf,
    stderr: String,
    _tmp: TempDir,
}

fn run(subcommand: &str, config: &str, extra: &[&str]) -> Run {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("scenario.toml");
    fs::write(&cfg, config).unwrap();
    let dir = tmp.path().join("out");
    let out = Command::new(env!("CARGO_BIN_EXE_wavepacket"))
        .arg(subcommand)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&dir)
        .args(extra)
        .output()
        .unwrap();
    Run {
        code: out.status.code().expect("exited normally"),
        dir,
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
        _tmp: tmp,
    }
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

/// Column by header name, parsed as floats.
fn column(path: &Path, name: &str) -> Vec<f64> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let idx = header.iter().position(|h| *h == name).unwrap_or_else(|| panic!("no column {name} in {header:?}"));
    lines.map(|l| l.split(',').nth(idx).unwrap().parse().unwrap()).collect()
}

fn listing(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> =
        fs::read_dir(dir).unwrap().map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect();
    names.sort();
    names
}

#[test]
fn harmonic_ground_state_width_is_constant() {
    let r = run("propagate", HARMONIC, &["--quiet"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let sigma = column(&r.dir.join("width.csv"), "sigma");
    assert_eq!(sigma.len(), 61);
    for s in &sigma {
        assert!((s - sigma[0]).abs() <= 1e-12 * sigma[0], "{s} vs {}", sigma[0]);
    }
    let summary = read_json(&r.dir.join("summary.json"));
    assert_eq!(summary["status"], "ok");
    assert_eq!(summary["exit_code"], 0);
}

#[test]
fn free_width_follows_closed_form() {
    let r = run("propagate", FREE, &["--quiet"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let path = r.dir.join("width.csv");
    let t = column(&path, "t");
    let sigma = column(&path, "sigma");
    for (t, s) in t.iter().zip(&sigma) {
        let expected = (2.0 + t * t) / 2.0 * 0.1;
        assert!((s - expected).abs() <= 1e-8, "t={t}: {s} vs {expected}");
    }
}

#[test]
fn non_siegel_shape_is_rejected() {
    let config = HARMONIC.replace("shape.im = 1.0", "shape.im = -1.0");
    let r = run("propagate", &config, &[]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("Siegel"), "{}", r.stderr);
    let failure = read_json(&r.dir.join("failure.json"));
    assert_eq!(failure["module"], "symplectic-core");
    assert_eq!(failure["guard"], "siegel");
    assert!(failure["message"].as_str().unwrap().contains("Siegel"));
    assert!(!r.dir.join("trajectory.csv").exists());
}

#[test]
fn inverted_floquet_needs_a_period() {
    let config = r#"
model.name = "inverted"
model.lambda = 1.0
initial.p = 0.0
initial.q = 0.0
shape.re = 0.0
shape.im = 1.0
run.hbar = 0.1
run.t_end = 2.0
run.dt_out = 0.1
"#;
    let r = run("floquet", config, &["--quiet"]);
    assert_eq!(r.code, 2);
    let failure = read_json(&r.dir.join("failure.json"));
    assert_eq!(failure["module"], "floquet-analyzer");
    assert_eq!(failure["guard"], "period-required");
    assert!(r.dir.join("trajectory.csv").exists());
    assert!(!r.dir.join("floquet.json").exists());
}

#[test]
fn harmonic_floquet_report() {
    let config = format!("{}run.period = 6.283185307179586\n", HARMONIC.replace("run.t_end = 6.0", "run.t_end = 7.0"));
    let r = run("floquet", &config, &["--quiet"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let report = read_json(&r.dir.join("floquet.json"));
    assert_eq!(report["stability"], "elliptic");
    assert_eq!(report["period_source"], "supplied");
    assert_eq!(report["revival_predicted"], true);
    assert_eq!(report["n_R"], 1);
    assert_eq!(report["recurrence_found"], true);
    let m = report["monodromy"].as_array().unwrap();
    let entry = |i: usize, j: usize| m[i].as_array().unwrap()[j].as_f64().unwrap();
    for (i, j, v) in [(0, 0, 1.0), (0, 1, 0.0), (1, 0, 0.0), (1, 1, 1.0)] {
        assert!((entry(i, j) - v).abs() < 1e-9);
    }
}

#[test]
fn harmonic_compare_fidelity() {
    let r = run("compare", HARMONIC, &["--quiet"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let fid = column(&r.dir.join("compare.csv"), "fidelity");
    assert_eq!(fid.len(), 61);
    for f in fid {
        assert!(f >= 1.0 - 1e-7 && f <= 1.0 + 1e-8, "{f}");
    }
}

#[test]
fn empty_analysis_list_writes_only_the_trajectory() {
    let config = format!("analyses = []\n{HARMONIC}");
    let r = run("propagate", &config, &["--quiet"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(listing(&r.dir), ["summary.json", "trajectory.csv"]);
    let summary = read_json(&r.dir.join("summary.json"));
    assert_eq!(summary["files"], serde_json::json!(["trajectory.csv", "summary.json"]));
}

#[test]
fn outputs_are_deterministic_and_full_precision() {
    let config = format!("analyses = [\"propagate\", \"compare\"]\n{FREE}");
    let a = run("propagate", &config, &["--quiet"]);
    let b = run("propagate", &config, &["--quiet"]);
    assert_eq!(a.code, 0, "{}", a.stderr);
    for name in ["trajectory.csv", "width.csv", "compare.csv"] {
        let x = fs::read(a.dir.join(name)).unwrap();
        let y = fs::read(b.dir.join(name)).unwrap();
        assert!(x == y, "{name} differs between runs");
    }
    let text = fs::read_to_string(a.dir.join("trajectory.csv")).unwrap();
    let row = text.lines().nth(5).unwrap();
    for field in row.split(',') {
        let mantissa = field.split('e').next().unwrap().trim_start_matches('-').replace('.', "");
        assert_eq!(mantissa.len(), 17, "{field}");
    }
}

#[test]
fn rerun_clears_stale_failure() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("out");
    let bad = tmp.path().join("bad.toml");
    let good = tmp.path().join("good.toml");
    fs::write(&bad, HARMONIC.replace("shape.im = 1.0", "shape.im = 0.0")).unwrap();
    fs::write(&good, HARMONIC).unwrap();
    let exe = env!("CARGO_BIN_EXE_wavepacket");
    let status = |cfg: &Path| {
        Command::new(exe).args(["propagate", "--quiet", "--config"]).arg(cfg).arg("--out").arg(&dir).status().unwrap()
    };
    assert_eq!(status(&bad).code(), Some(2));
    assert!(dir.join("failure.json").exists());
    assert_eq!(status(&good).code(), Some(0));
    assert!(!dir.join("failure.json").exists());
}

#[test]
fn numerical_guard_exits_with_three() {
    // Output spacing too coarse to follow the phase branch at ω = 4.
    let config = HARMONIC.replace("model.omega = 1.0", "model.omega = 4.0").replace("run.dt_out = 0.1", "run.dt_out = 0.6");
    let r = run("propagate", &config, &["--quiet"]);
    assert_eq!(r.code, 3, "{}", r.stderr);
    let failure = read_json(&r.dir.join("failure.json"));
    assert_eq!(failure["module"], "gaussian-evolution");
    assert_eq!(failure["guard"], "resolution");
    assert!(r.dir.join("trajectory.csv").exists());
}

#[test]
fn config_errors_exit_with_two() {
    let unknown_model = HARMONIC.replace("\"harmonic\"", "\"morse\"");
    let r = run("propagate", &unknown_model, &["--quiet"]);
    assert_eq!(r.code, 2);
    assert_eq!(read_json(&r.dir.join("failure.json"))["module"], "hamiltonian-models");

    let unknown_key = format!("{HARMONIC}run.steps = 3\n");
    let r = run("propagate", &unknown_key, &["--quiet"]);
    assert_eq!(r.code, 2);
    assert_eq!(read_json(&r.dir.join("failure.json"))["guard"], "config");

    let wrong_dim = HARMONIC.replace("initial.q = 1.0", "initial.q = [1.0, 2.0]");
    let r = run("propagate", &wrong_dim, &["--quiet"]);
    assert_eq!(r.code, 2);
    assert_eq!(read_json(&r.dir.join("failure.json"))["guard"], "dimension");
}

#[test]
fn unwritable_output_exits_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("scenario.toml");
    fs::write(&cfg, HARMONIC).unwrap();
    let blocker = tmp.path().join("file");
    fs::write(&blocker, "").unwrap();
    let status = Command::new(env!("CARGO_BIN_EXE_wavepacket"))
        .args(["propagate", "--quiet", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(blocker.join("out"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn sweep_runs_each_value() {
    let config = format!("{HARMONIC}sweep.parameter = \"run.hbar\"\nsweep.values = [0.1, 0.05, -1.0]\nsweep.workers = 2\n");
    let r = run("sweep", &config, &["--quiet"]);
    assert_eq!(r.code, 2, "{}", r.stderr);
    let summary = read_json(&r.dir.join("sweep.json"));
    let runs = summary["runs"].as_array().unwrap();
    assert_eq!(runs.len(), 3);
    let codes: Vec<i64> = runs.iter().map(|r| r["exit_code"].as_i64().unwrap()).collect();
    assert_eq!(codes, [0, 0, 2]);
    for (i, hbar) in [(0, 0.1), (1, 0.05)] {
        let s = read_json(&r.dir.join(format!("run-{i:03}")).join("summary.json"));
        assert_eq!(s["hbar"].as_f64().unwrap(), hbar);
        let sigma = column(&r.dir.join(format!("run-{i:03}")).join("width.csv"), "sigma");
        assert!((sigma[0] - hbar).abs() < 1e-12);
    }
    assert!(r.dir.join("run-002").join("failure.json").exists());
}

#[test]
fn harmonic_scaling_is_in_the_exact_regime() {
    let config = format!("{HARMONIC}scaling.hbars = [0.1, 0.05, 0.025]\nscaling.t_probe = 1.0\n");
    let r = run("scaling", &config, &["--quiet"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let errors = column(&r.dir.join("scaling.csv"), "norm_error");
    assert_eq!(errors.len(), 3);
    assert!(errors.iter().all(|e| *e < 1e-6), "{errors:?}");
    let summary = read_json(&r.dir.join("summary.json"));
    assert_eq!(summary["scaling"]["exact_regime"], true);
}

#[test]
fn two_dimensional_compare_is_unsupported() {
    let config = r#"
model.name = "aniso_harmonic_2d"
model.omega1 = 1.0
model.omega2 = 1.5
initial.p = [0.0, 0.1]
initial.q = [1.0, 0.0]
shape.re = [[0.0, 0.0], [0.0, 0.0]]
shape.im = [[1.0, 0.0], [0.0, 2.0]]
run.hbar = 0.1
run.t_end = 1.0
run.dt_out = 0.1
"#;
    let r = run("propagate", config, &["--quiet"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let header = fs::read_to_string(r.dir.join("trajectory.csv")).unwrap();
    assert!(header.starts_with("t,p1,p2,q1,q2,W,"));

    let r = run("compare", config, &["--quiet"]);
    assert_eq!(r.code, 2);
    let failure = read_json(&r.dir.join("failure.json"));
    assert_eq!(failure["module"], "quantum-oracle");
    assert_eq!(failure["guard"], "unsupported-model");
    assert!(r.dir.join("width.csv").exists());
}
