use std::path::Path;
use std::process::{Command, Output};

use dualfas::experiment::{ExperimentConfig, ExperimentKind};

fn dualfas(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dualfas"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn validate_passes_and_fault_injection_fails() {
    let ok = dualfas(&["validate", "--trials", "20000"]);
    assert_eq!(ok.status.code(), Some(0), "{}", stdout(&ok));
    assert!(stdout(&ok).contains("PASS permanent-equivalence"));

    let bad = dualfas(&["validate", "--trials", "20000", "--inject-ryser-fault"]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(stdout(&bad).contains("FAIL permanent-equivalence"));
}

#[test]
fn sweep_csv_is_reproducible_and_self_describing() {
    let args = ["snr-sweep", "--n", "4", "--trials", "3000", "--snr-grid", "-5:5:5", "--seed", "9"];
    let a = dualfas(&args);
    let b = dualfas(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    let mut lines = text.lines();
    let echo = lines.next().unwrap().strip_prefix("# config: ").unwrap();
    let cfg = ExperimentConfig::from_json(echo).unwrap();
    assert_eq!((cfg.seed, cfg.n_trials, cfg.geometry.nt), (9, 3000, 4));
    assert!(lines.next().unwrap().starts_with("snr_db,c_full_equal,"));
    assert_eq!(lines.count(), 3);
}

#[test]
fn smallest_port_sweep_runs() {
    let out = dualfas(&["port-sweep", "--trials", "2000"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let first = text.lines().nth(2).unwrap();
    assert!(first.starts_with("2,"));
}

#[test]
fn config_file_matches_flags() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::default_for(ExperimentKind::Allocate);
    cfg.snr_grid_db = vec![0.0, 10.0];
    cfg.geometry.nt = 4;
    cfg.geometry.nr = 4;
    let path = dir.path().join("allocate.json");
    std::fs::write(&path, cfg.to_json().unwrap()).unwrap();
    let from_file = dualfas(&["allocate", "--config", path.to_str().unwrap()]);
    let from_flags = dualfas(&["allocate", "--n", "4", "--snr-grid", "0,10"]);
    assert_eq!(from_file.status.code(), Some(0));
    assert_eq!(from_file.stdout, from_flags.stdout);

    let wrong_kind = dualfas(&["snr-sweep", "--config", path.to_str().unwrap()]);
    assert_eq!(wrong_kind.status.code(), Some(2));
}

#[test]
fn out_flag_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("los.csv");
    let out = dualfas(&[
        "los-compare", "--n", "4", "--trials", "2000", "--snr-grid", "10", "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("# config: "));
    assert!(!text.lines().next().unwrap().contains("output_path"));
}

#[test]
fn errors_exit_with_code_two() {
    let missing = Path::new("/nonexistent/dir/out.csv");
    let cases: Vec<Vec<&str>> = vec![
        vec!["snr-sweep", "--trials", "100", "--snr-grid", "0", "--out", missing.to_str().unwrap()],
        vec!["snr-sweep", "--snr-grid", "a,b"],
        vec!["snr-sweep", "--trials", "0"],
        vec!["snr-sweep", "--w", "-1"],
        vec!["port-sweep", "--snr-grid", "0,10"],
        vec!["allocate", "--config", "/nonexistent.json"],
    ];
    for args in cases {
        let out = dualfas(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(String::from_utf8_lossy(&out.stderr).starts_with("error: "));
    }
}
