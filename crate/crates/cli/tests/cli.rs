use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use rcmlab_cli::{parse_config, run, CliError};

fn rcmlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rcmlab")).args(args).output().expect("spawn rcmlab")
}

fn body(path: &Path) -> String {
    let text = fs::read_to_string(path).unwrap();
    assert!(text.starts_with("# rcmlab-csv v1 "), "{}: missing schema line", path.display());
    text.lines().skip(1).collect::<Vec<_>>().join("\n")
}

#[test]
fn zero_functional_decay_passes_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# constant field: the drift vanishes identically\nlaw=constant:1\nd=1\nn=64\nseed=7\nfunctional=drift\n").unwrap();
    let mut bodies = Vec::new();
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        let o = rcmlab(&["decay", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--workers", "2"]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        let summary = fs::read_to_string(out.join("summary.txt")).unwrap();
        assert!(summary.contains("zero"), "{summary}");
        assert!(out.join("config.txt").exists());
        bodies.push(body(&out.join("decay.csv")));
    }
    assert_eq!(bodies[0], bodies[1]);
}

#[test]
fn rerun_into_same_directory_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let args = ["spectrum", "--d", "2", "--n", "6", "--functional", "edge", "--seed", "3", "--out", out.to_str().unwrap()];
    assert_eq!(rcmlab(&args).status.code(), Some(0));
    let first = fs::read(out.join("measure.csv")).unwrap();
    assert_eq!(rcmlab(&args).status.code(), Some(0));
    assert_eq!(first, fs::read(out.join("measure.csv")).unwrap());
    let leftovers: Vec<_> = fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(leftovers, vec![std::ffi::OsString::from("o")]);
}

#[test]
fn invalid_mu_exits_2_without_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let o = rcmlab(&["diffusivity", "--mu", "0.1,-1", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--mu"));
    assert!(!out.exists());
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn config_errors_carry_line_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "d=1\nn=2\nwalks=many\n").unwrap();
    let o = rcmlab(&["msd", "--config", cfg.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 2: n must be ≥ 3"), "{err}");
    assert!(err.contains("line 3: walks"), "{err}");
}

#[test]
fn failed_target_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("t.cfg");
    // the edge functional decays like t^{-1/2} on a ring, nowhere near 3
    fs::write(&cfg, "functional=edge\nwalker=simple\nn=256\nrealizations=4\ntimes=geom:1,100,9\ntarget_alpha=3\ntarget_tol=0.1\n")
        .unwrap();
    let out = dir.path().join("o");
    let o = rcmlab(&["decay", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1), "{}", String::from_utf8_lossy(&o.stdout));
    assert!(fs::read_to_string(out.join("summary.txt")).unwrap().contains("overall: FAIL"));
}

#[test]
fn every_subcommand_writes_an_echo() {
    let dir = tempfile::tempdir().unwrap();
    let runs: [(&str, &[&str], &[&str]); 8] = [
        ("simulate", &["--n", "16", "--realizations", "2", "--times", "0.5,1,2"], &["msd.csv", "trajectory.csv"]),
        ("decay", &["--n", "16", "--realizations", "2", "--functional", "edge"], &["decay.csv"]),
        ("diffusivity", &["--n", "32", "--realizations", "4"], &["diffusivity.csv"]),
        ("msd", &["--d", "2", "--n", "8", "--realizations", "2", "--times", "1,2"], &["msd.csv"]),
        ("spectrum", &["--n", "16"], &["spectrum.csv", "measure.csv"]),
        ("contract", &["--seed", "1"], &["contract.csv"]),
        ("nash-check", &["--n", "32", "--realizations", "2"], &["nash.csv"]),
        ("field-dump", &["--d", "2", "--n", "5"], &["field.txt", "edges.csv"]),
    ];
    for (cmd, extra, files) in runs {
        let out = dir.path().join(cmd);
        let mut args = vec![cmd, "--out", out.to_str().unwrap()];
        args.extend_from_slice(extra);
        let o = rcmlab(&args);
        assert!(matches!(o.status.code(), Some(0 | 1)), "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
        let echo = fs::read_to_string(out.join("config.txt")).unwrap();
        assert!(echo.starts_with(&format!("experiment={cmd}\n")), "{cmd}");
        assert!(out.join("summary.txt").exists());
        for f in files {
            assert!(out.join(f).exists(), "{cmd}: {f}");
        }
    }
}

#[test]
fn echo_reruns_bit_for_bit() {
    let dir = tempfile::tempdir().unwrap();
    let first = parse_config(&format!("experiment=msd\nd=2\nn=8\nrealizations=2\nwalks=200\ntimes=1,2\nout={}", dir.path().join("a").display()))
        .unwrap();
    run(&first).unwrap();
    let echo = fs::read_to_string(dir.path().join("a/config.txt")).unwrap();
    let mut second = parse_config(&echo).unwrap();
    assert_eq!(second, first);
    second.out = dir.path().join("b");
    run(&second).unwrap();
    assert_eq!(body(&dir.path().join("a/msd.csv")), body(&dir.path().join("b/msd.csv")));
}

#[test]
fn numerical_failures_exit_3() {
    let e = CliError::Compute {
        experiment: rcmlab_cli::Experiment::Diffusivity,
        source: rcmlab::Error::Solver { iterations: 10, residual: 1.0 },
    };
    assert_eq!(e.exit_code(), 3);
    let e = CliError::Compute { experiment: rcmlab_cli::Experiment::Decay, source: rcmlab::Error::Config("x".into()) };
    assert_eq!(e.exit_code(), 2);
}
