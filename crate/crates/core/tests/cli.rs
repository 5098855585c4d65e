//! End-to-end tests of the command line binary: exit codes, CSV pipelines,
//! config handling, and byte determinism of the preset bundles.

use frustrated_diffusions::MeanTrajectory;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_frustrated-diffusions"))
}

fn run_ok(args: &[&str], dir: &Path) -> Output {
    let out = bin()
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary should launch");
    assert!(
        out.status.success(),
        "command {args:?} failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn exit_code(args: &[&str], dir: &Path) -> i32 {
    let out = bin()
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary should launch");
    out.status.code().unwrap_or(-1)
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn simulate_then_period_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(
        &[
            "--threads",
            "1",
            "simulate",
            "--A",
            "2",
            "--B",
            "2.5",
            "--sigma",
            "0.5",
            "--n",
            "200",
            "--steps",
            "30000",
            "--seed",
            "5",
            "--stride",
            "10",
            "--out",
            "traj.csv",
        ],
        dir.path(),
    );
    let traj = MeanTrajectory::read_csv(&dir.path().join("traj.csv")).unwrap();
    assert_eq!(traj.len(), 3001);
    assert!((traj.dt_sample - 0.05).abs() < 1e-12);

    let out = run_ok(
        &["period", "--in", "traj.csv", "--burn-in", "0.2", "--json"],
        dir.path(),
    );
    let est: serde_json::Value = serde_json::from_str(&stdout_of(&out)).unwrap();
    let period = est["mean_period"].as_f64().unwrap();
    assert!(
        (5.0..60.0).contains(&period),
        "implausible period {period} from a small oscillating run"
    );

    let out = run_ok(
        &["period", "--in", "traj.csv", "--method", "dft"],
        dir.path(),
    );
    assert!(stdout_of(&out).contains("method = dft"));
}

#[test]
fn spectrum_aggregates_replicas_and_plots() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::create_dir(dir.path().join("runs")).unwrap();
    for seed in ["11", "12"] {
        run_ok(
            &[
                "simulate",
                "--A",
                "2",
                "--B",
                "2.5",
                "--sigma",
                "0.5",
                "--n",
                "200",
                "--steps",
                "30000",
                "--seed",
                seed,
                "--stride",
                "10",
                "--out",
                &format!("runs/rep-{seed}.csv"),
            ],
            dir.path(),
        );
    }
    let out = run_ok(
        &[
            "spectrum",
            "--glob",
            "runs/*.csv",
            "--burn-in",
            "0.2",
            "--out",
            "spectrum.csv",
            "--json",
        ],
        dir.path(),
    );
    let summary: serde_json::Value = serde_json::from_str(&stdout_of(&out)).unwrap();
    assert_eq!(summary["replicas"], 2);
    assert!(summary["peak_frequency"].as_f64().unwrap() > 0.0);

    let text = std::fs::read_to_string(dir.path().join("spectrum.csv")).unwrap();
    assert!(text.starts_with("freq,power\n"));

    run_ok(
        &[
            "plot",
            "--kind",
            "spectrum",
            "--in",
            "spectrum.csv",
            "--out",
            "s.svg",
        ],
        dir.path(),
    );
    let svg = std::fs::read_to_string(dir.path().join("s.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
}

#[test]
fn plots_render_series_and_phase_figures() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(
        &[
            "moments", "--A", "2", "--B", "2.5", "--sigma", "0.5", "--T", "120", "--out", "mom.csv",
        ],
        dir.path(),
    );
    run_ok(
        &[
            "plot", "--kind", "series", "--in", "mom.csv", "--out", "mom.svg",
        ],
        dir.path(),
    );
    run_ok(
        &[
            "plot",
            "--kind",
            "phase",
            "--in",
            "mom.csv",
            "--A",
            "2",
            "--B",
            "2.5",
            "--out",
            "orbit.svg",
            "--title",
            "closure orbit",
        ],
        dir.path(),
    );
    for name in ["mom.svg", "orbit.svg"] {
        let svg = std::fs::read_to_string(dir.path().join(name)).unwrap();
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    }
    // The phase figure with both couplings marks the five equilibria.
    let svg = std::fs::read_to_string(dir.path().join("orbit.svg")).unwrap();
    assert_eq!(svg.matches("class=\"eq\"").count(), 5);
}

#[test]
fn validation_problems_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("junk.csv"), "x,y\n1,2\n").unwrap();
    let cases: [&[&str]; 6] = [
        &["simulate", "--sigma", "-1", "--out", "x.csv"],
        &["preset", "--name", "no-such-preset"],
        &["period", "--in", "junk.csv"],
        &[
            "phase-portrait",
            "--A",
            "2",
            "--B",
            "7",
            "--window",
            "2,-2",
            "--res",
            "5",
            "--out",
            "w.csv",
        ],
        &["fp", "--snapshots", "every=x", "--out", "f.csv"],
        &["simulate", "--no-such-flag"],
    ];
    for args in cases {
        assert_eq!(
            exit_code(args, dir.path()),
            2,
            "expected exit 2 for {args:?}"
        );
    }
}

#[test]
fn divergence_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "simulate", "--A", "2", "--B", "2.5", "--dt", "0.5", "--steps", "200", "--n", "20",
        "--out", "div.csv",
    ];
    assert_eq!(exit_code(&args, dir.path()), 3);
}

#[test]
fn missing_rhythm_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    // B > A + 2 without noise relaxes to a fixed point: no crossings.
    run_ok(
        &[
            "moments", "--A", "2", "--B", "7", "--sigma", "0", "--T", "50", "--out", "flat.csv",
        ],
        dir.path(),
    );
    let args = ["period", "--in", "flat.csv"];
    assert_eq!(exit_code(&args, dir.path()), 4);
}

#[test]
fn config_file_applies_before_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.cfg"), "# base run\nsigma = 0.1\n").unwrap();
    let tail = [
        "--n", "200", "--steps", "2000", "--seed", "9", "--stride", "10", "--out",
    ];
    let mut with_config = vec!["simulate", "--config", "run.cfg", "--sigma", "0.4"];
    with_config.extend_from_slice(&tail);
    with_config.push("a.csv");
    run_ok(&with_config, dir.path());

    let mut flags_only = vec!["simulate", "--sigma", "0.4"];
    flags_only.extend_from_slice(&tail);
    flags_only.push("b.csv");
    run_ok(&flags_only, dir.path());

    let mut config_wins = vec!["simulate", "--config", "run.cfg"];
    config_wins.extend_from_slice(&tail);
    config_wins.push("c.csv");
    run_ok(&config_wins, dir.path());

    let a = std::fs::read(dir.path().join("a.csv")).unwrap();
    let b = std::fs::read(dir.path().join("b.csv")).unwrap();
    let c = std::fs::read(dir.path().join("c.csv")).unwrap();
    assert_eq!(a, b, "the flag override should fully mask the config value");
    assert_ne!(a, c, "without the override the config sigma should apply");

    std::fs::write(dir.path().join("bad.cfg"), "sigma = 0.1\nwhatever = 3\n").unwrap();
    let args = ["simulate", "--config", "bad.cfg", "--out", "d.csv"];
    assert_eq!(exit_code(&args, dir.path()), 2);
}

#[test]
fn preset_bundles_are_byte_identical_across_reruns() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(
        &["preset", "--name", "fig3", "--seed", "3", "--out", "a"],
        dir.path(),
    );
    let out = bin()
        .args(["preset", "--name", "fig3", "--seed", "3"])
        .env("FRUSTRATED_DIFFUSIONS_OUT", dir.path().join("b"))
        .current_dir(dir.path())
        .output()
        .expect("binary should launch");
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let list = |root: &Path| -> Vec<String> {
        let mut names: Vec<String> = std::fs::read_dir(root)
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .collect();
        names.sort();
        names
    };
    let dir_a = dir.path().join("a/fig3");
    let dir_b = dir.path().join("b/fig3");
    let names = list(&dir_a);
    assert_eq!(names, list(&dir_b));
    assert!(names.contains(&"manifest.json".to_string()));

    for name in &names {
        let a = std::fs::read(dir_a.join(name)).unwrap();
        let b = std::fs::read(dir_b.join(name)).unwrap();
        if name == "manifest.json" {
            let strip = |bytes: &[u8]| -> serde_json::Value {
                let mut v: serde_json::Value = serde_json::from_slice(bytes).unwrap();
                v["wall_time_s"] = serde_json::Value::Null;
                v
            };
            let a = strip(&a);
            assert_eq!(a, strip(&b), "manifests differ beyond wall time");
            assert_eq!(a["seed"], 3);
            assert_eq!(
                a["versions"]["frustrated-diffusions"],
                env!("CARGO_PKG_VERSION")
            );
        } else {
            assert_eq!(a, b, "{name} differs between identical reruns");
        }
    }
}

#[test]
fn help_covers_every_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_ok(&["--help"], dir.path());
    let text = stdout_of(&out);
    for name in [
        "simulate",
        "fixed-points",
        "phase-portrait",
        "fp",
        "moments",
        "hopf",
        "tilde-error",
        "chaos",
        "period",
        "spectrum",
        "preset",
        "plot",
    ] {
        assert!(text.contains(name), "--help does not mention {name}");
    }
}
