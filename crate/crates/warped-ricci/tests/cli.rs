//! End-to-end tests of the command-line binary: simulate/verify round
//! trips, deterministic output, plot emission, and exit-code contracts.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_warped-ricci")
}

fn run(args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .output()
        .expect("binary should execute")
}

fn tmp(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("warped-ricci-test-{name}-{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

const SMALL_CFG: &str = "\
[pinch]
name = ak-neckpinch

[grid]
nodes = 520

[time]
t1 = 1e-4
t_end = 2e-3
output_count = 5
output_start = 2.5e-4

[mollify]
m = 5e-3
";

#[test]
fn bryant_command_and_usage_errors() {
    let dir = tmp("bryant");
    let out = run(&[
        "bryant",
        "--q",
        "2",
        "--sigma-max",
        "300",
        "--tol",
        "1e-8",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(dir.join("bryant.csv").exists());
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("bryant_report.json")).unwrap()).unwrap();
    assert!(report["summary"]["r0"].as_f64().unwrap() > 0.0);

    // q = 1 is a usage error.
    let out = run(&["bryant", "--q", "1", "--out", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));

    // Coarse and tight tolerances agree to well under 1e-2.
    let dir2 = tmp("bryant-tol");
    let out = run(&[
        "bryant",
        "--q",
        "2",
        "--sigma-max",
        "300",
        "--tol",
        "1e-3",
        "--out",
        dir2.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let read_col = |p: &Path| -> Vec<f64> {
        fs::read_to_string(p.join("bryant.csv"))
            .unwrap()
            .lines()
            .skip(1)
            .map(|l| l.split(',').nth(1).unwrap().parse::<f64>().unwrap())
            .collect()
    };
    let (a, b) = (read_col(&dir), read_col(&dir2));
    let sup = a
        .iter()
        .zip(&b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    assert!(sup <= 1e-2, "tolerance sweep changed tables by {sup}");
}

#[test]
fn simulate_verify_round_trip() {
    let dir = tmp("sim");
    let cfg = dir.join("run.cfg");
    fs::write(&cfg, SMALL_CFG).unwrap();
    let run_a = dir.join("a");

    let out = Command::new(bin())
        .env("WARPED_RICCI_THREADS", "2")
        .args([
            "simulate",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            run_a.to_str().unwrap(),
        ])
        .output()
        .expect("binary should execute");
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    // Deterministic: a second identical run produces byte-identical CSVs.
    let run_b = dir.join("b");
    let out = run(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        run_b.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    for j in 0..5 {
        let name = format!("run_00/snap_{j:03}.csv");
        let a = fs::read(run_a.join(&name)).unwrap();
        let b = fs::read(run_b.join(&name)).unwrap();
        assert_eq!(a, b, "snapshot {name} differs between identical runs");
    }

    // Verification passes on the quantitative checks and writes
    // schema-stable reports. (The soliton-convergence trend needs the
    // full-resolution reference sweep to be meaningful; here only its
    // round-trip wiring is exercised.)
    let out = run(&[
        "verify",
        "--run",
        run_a.to_str().unwrap(),
        "--checks",
        "barricade,curvature_bound",
    ]);
    assert!(
        out.status.success(),
        "verify failed: {}\n{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    let out = run(&[
        "verify",
        "--run",
        run_a.to_str().unwrap(),
        "--checks",
        "bryant_convergence,initial_rate",
    ]);
    assert!(out.status.code().is_some());
    for check in [
        "barricade",
        "curvature_bound",
        "bryant_convergence",
        "initial_rate",
    ] {
        let report: serde_json::Value = serde_json::from_str(
            &fs::read_to_string(run_a.join(format!("reports/{check}.json"))).unwrap(),
        )
        .unwrap();
        for key in ["check", "status", "margins", "fit_constants"] {
            assert!(report.get(key).is_some(), "{check} report missing {key}");
        }
        if check == "barricade" || check == "curvature_bound" {
            assert_eq!(report["status"], "pass");
        }
    }

    // Unknown check names are usage errors.
    let out = run(&[
        "verify",
        "--run",
        run_a.to_str().unwrap(),
        "--checks",
        "nonsense",
    ]);
    assert_eq!(out.status.code(), Some(2));

    // Fault injection: push the stored curvature field far outside the
    // barriers and the barricade check must fail with exit 1.
    let snap_path = run_a.join("run_00/snap_002.csv");
    let text = fs::read_to_string(&snap_path).unwrap();
    let mut lines: Vec<String> = text.lines().map(|s| s.to_string()).collect();
    for line in lines.iter_mut().skip(60).take(80) {
        let mut cols: Vec<String> = line.split(',').map(|s| s.to_string()).collect();
        // Column 5 is L; forcing it negative drives v above every barrier.
        cols[5] = format!("{:.16e}", -5.0e3);
        *line = cols.join(",");
    }
    fs::write(&snap_path, lines.join("\n") + "\n").unwrap();
    let out = run(&[
        "verify",
        "--run",
        run_a.to_str().unwrap(),
        "--checks",
        "barricade",
    ]);
    assert_eq!(
        out.status.code(),
        Some(1),
        "tampered run must fail barricade"
    );

    // Plot emission on the untouched copy.
    let out = run(&["plot", "--run", run_b.to_str().unwrap()]);
    assert!(out.status.success());
    let mut scripts = 0;
    for entry in fs::read_dir(&run_b).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().map(|e| e == "gp").unwrap_or(false) {
            scripts += 1;
            let text = fs::read_to_string(&path).unwrap();
            for token in text.split_whitespace() {
                if token.contains(".dat") {
                    assert!(
                        !token.contains(run_b.to_str().unwrap()),
                        "plot script must use run-relative paths: {token}"
                    );
                }
            }
            assert!(text.contains("plots/"), "script references its data files");
        }
    }
    assert_eq!(scripts, 3, "expected 3 plot scripts");

    // Plot on an empty directory is an error.
    let empty = dir.join("empty");
    fs::create_dir_all(&empty).unwrap();
    let out = run(&["plot", "--run", empty.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn malformed_config_is_diagnosed() {
    let dir = tmp("badcfg");
    let cfg = dir.join("bad.cfg");
    fs::write(&cfg, "[pinch]\nname = ak-neckpinch\nthis line is wrong\n").unwrap();
    let out = run(&["simulate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(
        err.contains("line 3"),
        "diagnostic should carry the line: {err}"
    );
}

#[test]
fn validate_pinch_exit_codes() {
    let out = run(&["validate-pinch", "--name", "ak-neckpinch"]);
    assert!(out.status.success());
    let report: serde_json::Value =
        serde_json::from_str(&String::from_utf8_lossy(&out.stdout)).unwrap();
    assert_eq!(report["neck_decays"], true);

    // The degenerate profile blows up at the pinched end; the validator
    // must flag it and exit 1.
    let out = run(&["validate-pinch", "--name", "degenerate-1"]);
    assert_eq!(out.status.code(), Some(1));

    let out = run(&["validate-pinch", "--name", "no-such-pinch"]);
    assert_eq!(out.status.code(), Some(2));
}
