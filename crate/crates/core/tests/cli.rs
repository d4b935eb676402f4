use std::fs;
use std::process::{Command, Output};

fn graphlimit(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_graphlimit"));
    cmd.args(args)
        .env_remove("GRAPHLIMIT_OUT")
        .env_remove("GRAPHLIMIT_THREADS");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

#[test]
fn bad_config_exits_with_two_and_a_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[run]\nbase = \"canonical-1d\"\nlevels = [8, 12]\n").unwrap();
    let out = graphlimit(
        &[
            "simulate",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            dir.path().to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3"), "{err}");

    fs::write(&cfg, "[run]\nbase = \"canonical-1d\"\nhorizon = \n").unwrap();
    let out = graphlimit(&["simulate", "--config", cfg.to_str().unwrap()], &[]);
    assert_eq!(out.status.code(), Some(2));

    let missing = dir.path().join("missing.toml");
    let out = graphlimit(&["simulate", "--config", missing.to_str().unwrap()], &[]);
    assert_eq!(out.status.code(), Some(2));

    let out = graphlimit(&["simulate", "--scenario", "no-such-scenario"], &[]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn fixed_family_has_no_continuum_study() {
    let dir = tempfile::tempdir().unwrap();
    let out = graphlimit(
        &[
            "converge",
            "--scenario",
            "pair-symmetric",
            "--out",
            dir.path().to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn environment_selects_output_and_threads() {
    let dir = tempfile::tempdir().unwrap();
    let out = graphlimit(
        &["simulate", "--scenario", "pair-symmetric", "--seed", "11"],
        &[
            ("GRAPHLIMIT_OUT", dir.path().to_str().unwrap()),
            ("GRAPHLIMIT_THREADS", "2"),
        ],
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let inv = fs::read_to_string(dir.path().join("pair-symmetric/invariants_N2.csv")).unwrap();
    for line in inv.lines().skip(1) {
        let sep: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
        assert!(sep >= 1.0 - 1e-6, "{line}");
    }
    let summary: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(dir.path().join("pair-symmetric/simulate_summary.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(summary["seed"], 11);
    let singleton = graphlimit(
        &[
            "simulate",
            "--scenario",
            "singleton",
            "--out",
            dir.path().to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(singleton.status.code(), Some(0));
    let traj = fs::read_to_string(dir.path().join("singleton/trajectory_N1.csv")).unwrap();
    let rows: Vec<&str> = traj
        .lines()
        .skip(1)
        .map(|l| l.split_once(',').unwrap().1)
        .collect();
    assert!(
        rows.len() > 1 && rows.iter().all(|r| *r == rows[0]),
        "{traj}"
    );
}

#[test]
fn invariant_failure_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("close.toml");
    fs::write(
        &cfg,
        "[close]\nbase = \"pair-asymmetric\"\npair_positions = [0.0, 1e-10]\n",
    )
    .unwrap();
    let out = graphlimit(
        &[
            "simulate",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            dir.path().to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(
        out.status.code(),
        Some(1),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(String::from_utf8_lossy(&out.stderr).contains("halted"));
}
