//! End-to-end tests of the `glp` binary: flag handling, exit codes, file
//! formats, and byte-level reproducibility.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn glp() -> Command {
    Command::new(env!("CARGO_BIN_EXE_glp"))
}

fn tmpdir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("glp_cli_{tag}_{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn stdout_str(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn json_value(json: &str, key: &str) -> f64 {
    let needle = format!("\"{key}\": ");
    let start = json.find(&needle).unwrap_or_else(|| panic!("missing {key}")) + needle.len();
    let rest = &json[start..];
    let end = rest.find([',', '\n', '}']).unwrap();
    rest[..end].trim().parse().unwrap()
}

#[test]
fn constants_reports_critical_values() {
    let out = glp()
        .args(["constants", "--beta", "2", "--d", "2", "--l", "40"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let json = stdout_str(&out);
    assert!((json_value(&json, "eta_star") - 2.0 / 3.0).abs() < 1e-12);
    assert!((json_value(&json, "c_star") - 0.918_558_653_543_691_8).abs() < 1e-10);
    assert!(json_value(&json, "k_star") > 0.0);
    assert!(json_value(&json, "n_c") > -json_value(&json, "m_beta"));

    let out3 = glp()
        .args(["constants", "--beta", "2", "--d", "3"])
        .output()
        .unwrap();
    assert!((json_value(&stdout_str(&out3), "eta_star") - 0.5).abs() < 1e-12);
}

#[test]
fn invalid_arguments_exit_2() {
    let out = glp()
        .args(["constants", "--beta", "0.9", "--d", "2"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no double well"));

    let out = glp()
        .args(["constants", "--beta", "2", "--d", "2", "--kernel", "gauss"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    // clap's own parse failures are exit 2 as well
    let out = glp().args(["constants", "--nonsense"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn numeric_failures_exit_1() {
    let out = glp()
        .args(["analyze", "--field", "/nonexistent/f.glpf", "--k", "0.5"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn instanton_csv_matches_constants_surface_tension() {
    let dir = tmpdir("inst");
    let csv_path = dir.join("front.csv");
    let out = glp()
        .args([
            "instanton",
            "--beta",
            "2",
            "--z",
            "12",
            "--front-resolution",
            "32",
            "--out",
        ])
        .arg(&csv_path)
        .output()
        .unwrap();
    assert!(out.status.success());
    let csv = std::fs::read_to_string(&csv_path).unwrap();
    let s_line = csv
        .lines()
        .find(|l| l.starts_with("# S="))
        .expect("trailing # S= comment");
    let s_csv: f64 = s_line.trim_start_matches("# S=").parse().unwrap();

    let out = glp()
        .args([
            "constants",
            "--beta",
            "2",
            "--d",
            "2",
            "--z",
            "12",
            "--front-resolution",
            "32",
        ])
        .output()
        .unwrap();
    let s_const = json_value(&stdout_str(&out), "surface_tension");
    assert!(
        (s_csv - s_const).abs() < 1e-12,
        "S mismatch: {s_csv} vs {s_const}"
    );
    assert!(csv.lines().any(|l| l.starts_with("# manifest=")));
    assert!(csv.starts_with("z,m\n"));
    assert!(dir.join("front.csv.manifest.json").exists());
}

fn run_trial(dir: &Path) -> PathBuf {
    let field = dir.join("trial.glpf");
    let out = glp()
        .args([
            "trial", "--beta", "2", "--d", "2", "--l", "16", "--n", "64", "--k", "0.7",
            "--eta", "0.8", "--out-field",
        ])
        .arg(&field)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    field
}

#[test]
fn analyze_is_bit_reproducible_across_runs_and_commands() {
    let dir = tmpdir("repro");
    let field = run_trial(&dir);

    let d1 = dir.join("a");
    let d2 = dir.join("b");
    std::fs::create_dir_all(&d1).unwrap();
    std::fs::create_dir_all(&d2).unwrap();
    for d in [&d1, &d2] {
        let out = glp()
            .args(["analyze", "--k", "0.7", "--field"])
            .arg(&field)
            .arg("--out")
            .arg(d.join("report.json"))
            .output()
            .unwrap();
        assert!(out.status.success());
    }
    let r1 = std::fs::read(d1.join("report.json")).unwrap();
    let r2 = std::fs::read(d2.join("report.json")).unwrap();
    assert_eq!(r1, r2, "same field, same K: reports must be byte-identical");

    // the report of a minimize run is reproduced by analyze on its field
    let min_field = dir.join("min.glpf");
    let out = glp()
        .args([
            "minimize", "--beta", "2", "--d", "2", "--l", "16", "--n", "64", "--k", "0.7",
            "--max-iters", "400", "--out-field",
        ])
        .arg(&min_field)
        .arg("--out-report")
        .arg(d1.join("minreport.json"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = glp()
        .args(["analyze", "--k", "0.7", "--field"])
        .arg(&min_field)
        .arg("--out")
        .arg(d2.join("minreport.json"))
        .output()
        .unwrap();
    assert!(out.status.success());
    let r1 = std::fs::read(d1.join("minreport.json")).unwrap();
    let r2 = std::fs::read(d2.join("minreport.json")).unwrap();
    assert_eq!(r1, r2, "analyze must reproduce the minimize report bit for bit");
}

#[test]
fn minimize_writes_start_table() {
    let dir = tmpdir("table");
    let out = glp()
        .args([
            "minimize", "--beta", "2", "--d", "2", "--l", "16", "--n", "64", "--k", "0.3",
            "--max-iters", "400", "--out-field",
        ])
        .arg(dir.join("m.glpf"))
        .arg("--out-table")
        .arg(dir.join("starts.csv"))
        .output()
        .unwrap();
    assert!(out.status.success());
    let table = std::fs::read_to_string(dir.join("starts.csv")).unwrap();
    let mut lines = table.lines();
    assert_eq!(lines.next().unwrap(), "start_label,energy,iterations,converged");
    assert!(table.contains("uniform,"));
    // subcritical K: the uniform profile wins
    assert!(stdout_str(&out).contains("best start uniform"));
}

#[test]
fn scan_csv_format_and_determinism() {
    let dir = tmpdir("scan");
    let svg = dir.join("scan.svg");
    let run = |name: &str| {
        let path = dir.join(name);
        let out = glp()
            .args([
                "scan", "--beta", "2", "--d", "2", "--l", "16", "--n", "64", "--kmin", "0.5",
                "--kmax", "2.0", "--steps", "4", "--kstar-units", "--max-iters", "400",
                "--deterministic", "--out",
            ])
            .arg(&path)
            .arg("--svg")
            .arg(&svg)
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        std::fs::read(&path).unwrap()
    };
    let a = run("scan.csv");
    std::fs::rename(dir.join("scan.csv"), dir.join("scan_first.csv")).unwrap();
    let b = run("scan.csv");
    assert_eq!(a, b, "identical invocations must be byte-identical");

    let text = String::from_utf8(a).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "K,eta_measured,eta_predicted,energy,energy_predicted"
    );
    let rows: Vec<&str> = text
        .lines()
        .skip(1)
        .filter(|l| !l.starts_with('#'))
        .collect();
    assert_eq!(rows.len(), 4);
    let ks: Vec<f64> = rows
        .iter()
        .map(|r| r.split(',').next().unwrap().parse().unwrap())
        .collect();
    assert!(ks.windows(2).all(|w| w[1] > w[0]), "rows sorted by K");
    // eta monotone within tolerance
    let etas: Vec<f64> = rows
        .iter()
        .map(|r| r.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert!(etas.windows(2).all(|w| w[1] >= w[0] - 0.05));
    // manifest written and referenced
    assert!(text.contains("# manifest=scan.csv.manifest.json"));
    let manifest = std::fs::read_to_string(dir.join("scan.csv.manifest.json")).unwrap();
    assert!(manifest.contains("\"created_unix\": 0"));
    assert!(manifest.contains("\"command\": \"scan\""));
    // static SVG with the two eta curves
    let svg_text = std::fs::read_to_string(&svg).unwrap();
    assert!(svg_text.starts_with("<svg"));
    assert_eq!(svg_text.matches("<polyline").count(), 2);
    assert!(svg_text.contains("manifest=scan.svg.manifest.json"));
}

#[test]
fn analyze_mask_and_field_csv() {
    let dir = tmpdir("mask");
    let field = run_trial(&dir);
    let out = glp()
        .args(["analyze", "--k", "0.7", "--field"])
        .arg(&field)
        .arg("--mask-out")
        .arg(dir.join("mask.csv"))
        .arg("--field-csv")
        .arg(dir.join("field.csv"))
        .output()
        .unwrap();
    assert!(out.status.success());
    let mask = std::fs::read_to_string(dir.join("mask.csv")).unwrap();
    assert!(mask.starts_with("i0,i1,in_set\n"));
    assert!(mask.lines().filter(|l| l.ends_with(",1")).count() > 0);
    let csv = std::fs::read_to_string(dir.join("field.csv")).unwrap();
    assert!(csv.starts_with("i0,i1,m\n"));
    assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), 1 + 64 * 64);
}
