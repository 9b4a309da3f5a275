use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_lamelab");

const SMALL: &str = r#"
[domain]
lengths = [1.0, 1.0, 1.0]
n = [3, 3, 3]

[params]
mu = 1.0
eps = 1.0
alpha = 2.0
"#;

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path
}

fn run(config: &Path, out: &Path, extra: &[&str]) -> Output {
    Command::new(BIN)
        .arg("run")
        .arg("--config")
        .arg(config)
        .arg("--output")
        .arg(out)
        .args(extra)
        .output()
        .unwrap()
}

fn manifest(out: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap()
}

fn check_ids(m: &Value) -> Vec<String> {
    m["checks"].as_array().unwrap().iter().map(|c| c["id"].as_str().unwrap().to_string()).collect()
}

fn assert_margin_convention(m: &Value) {
    for c in m["checks"].as_array().unwrap() {
        let pass = c["pass"].as_bool().unwrap();
        if let Some(margin) = c["margin"].as_f64() {
            assert_eq!(pass, margin >= 0.0, "check {c}");
        }
    }
}

#[test]
fn validate_cubic_passes() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "v.toml",
        &format!("experiment = \"validate\"\n{SMALL}\n[forcing]\nname = \"cubic\"\n\n[validate]\nsamples = 2000\n"),
    );
    let out = tmp.path().join("out");
    let o = run(&cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let m = manifest(&out);
    assert_eq!(m["status"], "pass");
    assert!(m["checks"].as_array().unwrap().iter().all(|c| c["pass"] == true));
    assert!(out.join("validation.json").exists());
    assert_margin_convention(&m);
}

#[test]
fn validate_rejects_oversized_linear_constant() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "v.toml",
        &format!(
            "experiment = \"validate\"\n{SMALL}\n[forcing]\nname = \"cubic\"\n\n[forcing.constants]\nm = 1000.0\n\n[validate]\nsamples = 500\n"
        ),
    );
    let out = tmp.path().join("out");
    let o = run(&cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(1));
    let m = manifest(&out);
    assert_eq!(m["status"], "fail");
    let failing: Vec<_> =
        m["checks"].as_array().unwrap().iter().filter(|c| c["pass"] == false).map(|c| c["id"].clone()).collect();
    assert!(failing.contains(&Value::from("nonlinearity:linear_coercivity")), "{failing:?}");
    assert_margin_convention(&m);
}

#[test]
fn unforced_simulation_dissipates_energy() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "s.toml",
        &format!(
            "experiment = \"simulate\"\n{SMALL}\n[forcing]\nname = \"zero\"\n\n[initial]\nkind = \"mode\"\nm = [1, 2, 1]\namp = 1.0\n\n[time]\nt_end = 2.0\ndt = 0.01\n"
        ),
    );
    let out = tmp.path().join("out");
    let o = run(&cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));

    let mut rdr = csv::Reader::from_path(out.join("energy.csv")).unwrap();
    let col = rdr.headers().unwrap().iter().position(|h| h == "total").expect("total energy column");
    let energies: Vec<f64> = rdr.records().map(|r| r.unwrap()[col].parse().unwrap()).collect();
    assert!(energies.len() > 100);
    for w in energies.windows(2) {
        assert!(w[1] <= w[0] * (1.0 + 1e-12), "energy rose: {} -> {}", w[0], w[1]);
    }
    assert!(energies.last().unwrap() < &energies[0]);
    for name in ["summary.json", "final_u.csv", "final_v.csv"] {
        assert!(out.join(name).exists(), "{name}");
    }
}

#[test]
fn sweep_writes_table() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "w.toml",
        &format!(
            "experiment = \"sweep\"\n{SMALL}\n[forcing]\nname = \"cubic\"\n\n[load]\nkind = \"mode\"\nm = [1, 1, 1]\namp = 5.0\n\n[time]\nt_end = 1.0\ndt = 0.05\n\n[stationary]\nn_starts = 4\n\n[attractor]\nensemble_size = 4\namplitude = 1.0\nt_transient = 2.0\nt_sample = 0.5\nstride = 5\neps_list = [1.0, 0.5, 0.25, 0.0]\nprobe_t = 1.0\n"
        ),
    );
    let out = tmp.path().join("out");
    let o = run(&cfg, &out, &[]);
    let code = o.status.code();
    assert!(matches!(code, Some(0) | Some(1)), "{code:?}: {}", String::from_utf8_lossy(&o.stderr));

    let report: Value = serde_json::from_str(&fs::read_to_string(out.join("sweep.json")).unwrap()).unwrap();
    let rows = report["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[3]["eps"].as_f64(), Some(0.0));
    assert_eq!(rows[3]["d_h0"].as_f64(), Some(0.0));

    let table = fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(table.lines().count(), 5);
    assert_margin_convention(&manifest(&out));
}

#[test]
fn config_errors_name_line_and_field() {
    let tmp = TempDir::new().unwrap();
    let body = format!("experiment = \"simulate\"\n{SMALL}\n[forcing]\nname = \"cubic\"\n\n[time]\nt_end = 1.0\ndt = -0.1\n");
    let cfg = write_config(tmp.path(), "bad.toml", &body);
    let o = run(&cfg, &tmp.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    let line = body.lines().position(|l| l.starts_with("dt")).unwrap() + 1;
    assert!(err.contains("time.dt"), "{err}");
    assert!(err.contains(&format!("line {line}")), "{err}");

    let cfg = write_config(tmp.path(), "typo.toml", &format!("experiment = \"simulate\"\n{SMALL}\nmuu = 1.0\n"));
    let o = run(&cfg, &tmp.path().join("out2"), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("muu"));
}

#[test]
fn numerical_failure_is_recorded() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "blow.toml",
        &format!(
            "experiment = \"simulate\"\n{SMALL}\n[forcing]\nname = \"cubic\"\n\n[initial]\nkind = \"mode\"\nm = [1, 1, 1]\namp = 1000.0\n\n[time]\nt_end = 5.0\ndt = 0.5\n"
        ),
    );
    let out = tmp.path().join("out");
    let o = run(&cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(3));
    let m = manifest(&out);
    assert_eq!(m["status"], "error");
    assert_eq!(m["failure"]["kind"], "integration_failure");
    assert!(m["failure"]["message"].as_str().unwrap().contains("t = "));
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn single_thread_runs_are_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "a.toml",
        &format!(
            "experiment = \"attractor\"\nseed = 7\n{SMALL}\n[forcing]\nname = \"cubic\"\n\n[load]\nkind = \"mode\"\nm = [1, 1, 1]\namp = 5.0\n\n[time]\nt_end = 1.0\ndt = 0.05\n\n[stationary]\nn_starts = 4\n\n[attractor]\nensemble_size = 3\namplitude = 1.0\nt_transient = 1.0\nt_sample = 0.5\nstride = 5\n"
        ),
    );
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    run(&cfg, &a, &["--threads", "1"]);
    run(&cfg, &b, &["--threads", "1"]);

    let fa = read_dir_sorted(&a);
    let fb = read_dir_sorted(&b);
    assert_eq!(fa.len(), fb.len());
    for ((na, ba), (nb, bb)) in fa.iter().zip(&fb) {
        assert_eq!(na, nb);
        if na == "manifest.json" {
            let mut ma: Value = serde_json::from_slice(ba).unwrap();
            let mut mb: Value = serde_json::from_slice(bb).unwrap();
            ma["wall_time_s"] = Value::Null;
            mb["wall_time_s"] = Value::Null;
            assert_eq!(ma, mb);
        } else {
            assert!(ba == bb, "{na} differs");
        }
    }
}

#[test]
fn every_check_appears_once_and_no_check_disables_them() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "st.toml",
        &format!(
            "experiment = \"stationary\"\n{SMALL}\n[forcing]\nname = \"cubic\"\n\n[load]\nkind = \"mode\"\nm = [1, 1, 1]\namp = 5.0\n\n[stationary]\nn_starts = 4\n"
        ),
    );
    let out = tmp.path().join("on");
    assert_eq!(run(&cfg, &out, &[]).status.code(), Some(0));
    let ids = check_ids(&manifest(&out));
    let unique: HashSet<_> = ids.iter().collect();
    assert_eq!(unique.len(), ids.len(), "{ids:?}");
    for id in ["stationary_found", "stationary_bound", "stationary_residual"] {
        assert!(ids.iter().any(|i| i == id), "{id} missing from {ids:?}");
    }

    let off = tmp.path().join("off");
    assert_eq!(run(&cfg, &off, &["--no-check"]).status.code(), Some(0));
    let m = manifest(&off);
    assert_eq!(m["checks_enabled"], false);
    assert!(m["checks"].as_array().unwrap().is_empty());
}

#[test]
fn describe_reports_derived_constants() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "d.toml",
        "experiment = \"dispersion\"\n\n[domain]\nlengths = [1.0, 1.0, 1.0]\nn = [3, 3, 3]\n\n[params]\nmu = 1.0\nlambda = 1.0\nalpha = 1.0\n\n[forcing]\nname = \"zero\"\n",
    );
    let o = Command::new(BIN).args(["describe", "--config"]).arg(&cfg).output().unwrap();
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let value = |key: &str| -> f64 {
        let line = text.lines().find(|l| l.split_whitespace().next() == Some(key)).unwrap();
        line.split_whitespace().nth(1).unwrap().parse().unwrap()
    };
    // 3 (2 sin(π/8) / h)² with h = 1/4
    let lambda1 = 3.0 * (8.0 * (std::f64::consts::PI / 8.0).sin()).powi(2);
    assert!((value("lambda1_h") - lambda1).abs() < 1e-5);
    assert!((value("c_P") - 3f64.sqrt()).abs() < 1e-6);
    assert!((value("c_S") - 1.0).abs() < 1e-6);

    // the printed configuration parses back to the same resolved values
    let toml_part: String = text.lines().take_while(|l| !l.starts_with("# derived")).collect::<Vec<_>>().join("\n");
    let again = write_config(tmp.path(), "again.toml", &toml_part);
    let o2 = Command::new(BIN).args(["describe", "--config"]).arg(&again).output().unwrap();
    assert_eq!(String::from_utf8(o2.stdout).unwrap(), text);

    let degenerate = write_config(
        tmp.path(),
        "deg.toml",
        "experiment = \"dispersion\"\n\n[domain]\nlengths = [1.0, 1.0, 1.0]\nn = [3, 3, 3]\n\n[params]\nmu = 1.0\nlambda = -1.0\nalpha = 1.0\n\n[forcing]\nname = \"zero\"\n",
    );
    let o3 = Command::new(BIN).args(["describe", "--config"]).arg(&degenerate).output().unwrap();
    assert!(String::from_utf8(o3.stdout).unwrap().contains("c_P == c_S"));
}
