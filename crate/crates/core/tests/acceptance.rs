//! Acceptance gate for the toolkit: ten criteria, one printed line each,
//! nonzero exit when any of them fails.
//!
//! The heavy criteria run through the preset bundles so that the gate and
//! the shipped experiments are literally the same code paths. Pass
//! `--scale full` for the long reference workloads (hours); the default
//! desk scale finishes on one machine in minutes and uses the same
//! tolerances.

#![allow(clippy::needless_range_loop)]

use frustrated_diffusions::phase::{find_equilibria, Equilibrium, EquilibriumKind};
use frustrated_diffusions::presets::{regime_cell, run_preset, Scale, REGIMES};
use frustrated_diffusions::rhythm::{poincare_periods, section_crossings};
use frustrated_diffusions::MeanTrajectory;
use serde_json::Value;
use std::path::PathBuf;
use std::time::Instant;

type Outcome = Result<String, String>;

struct Gate {
    failures: usize,
}

impl Gate {
    fn report(&mut self, num: usize, name: &str, outcome: Outcome) {
        match outcome {
            Ok(detail) => println!("acceptance criterion {num:02} {name}: PASS ({detail})"),
            Err(detail) => {
                self.failures += 1;
                println!("acceptance criterion {num:02} {name}: FAIL ({detail})");
            }
        }
    }
}

fn main() {
    let mut scale = Scale::Desk;
    let mut keep: Option<PathBuf> = None;
    let mut args = std::env::args().skip(1);
    while let Some(arg) = args.next() {
        match arg.as_str() {
            "--scale" => {
                let v = args.next().unwrap_or_default();
                scale = match Scale::parse(&v) {
                    Ok(s) => s,
                    Err(e) => {
                        eprintln!("error: {e}");
                        std::process::exit(2);
                    }
                };
            }
            "--out" => keep = Some(PathBuf::from(args.next().unwrap_or_default())),
            // Tolerate libtest-style flags so `cargo test -- <flags>` does
            // not abort the gate.
            other => eprintln!("[acceptance] ignoring unknown argument {other:?}"),
        }
    }

    let tmp = tempfile::tempdir().expect("temp dir");
    let root = match &keep {
        Some(dir) => {
            std::fs::create_dir_all(dir).expect("output root");
            dir.clone()
        }
        None => tmp.path().to_path_buf(),
    };
    let burn = match scale {
        Scale::Desk => 100.0,
        Scale::Full => 500.0,
    };
    eprintln!(
        "[acceptance] scale {}, output root {}",
        scale.label(),
        root.display()
    );

    let preset = |name: &str| -> Result<Value, String> {
        let start = Instant::now();
        eprintln!("[acceptance] running preset {name} ...");
        let out = run_preset(name, 1, scale, &root).map_err(|e| format!("preset {name}: {e}"));
        eprintln!(
            "[acceptance] preset {name} finished in {:.1} s",
            start.elapsed().as_secs_f64()
        );
        out.map(|o| o.report)
    };

    let table1: Vec<Result<Value, String>> =
        (1..=3).map(|k| preset(&format!("table1-row{k}"))).collect();
    let fig8 = preset("fig8");
    let fig5 = preset("fig5");
    let chaos = preset("chaos");
    let tilde = preset("tilde-order");
    let fig4 = preset("fig4");
    let checks = preset("closure-checks");

    let mut gate = Gate { failures: 0 };
    gate.report(
        1,
        "ensemble periods, poincare",
        poincare_periods_criterion(&table1),
    );
    gate.report(2, "ensemble periods, dft", dft_periods_criterion(&table1));
    gate.report(
        3,
        "noise regimes",
        noise_regime_criterion(&table1, &root, scale, burn),
    );
    gate.report(4, "planar equilibria", equilibria_criterion());
    gate.report(5, "critical noise", critical_noise_criterion(&fig8));
    gate.report(6, "closure oscillations", closure_cycle_criterion(&fig5));
    gate.report(
        7,
        "finite-size convergence rate",
        slope_criterion(&chaos, -0.5, 0.15, 200),
    );
    gate.report(
        8,
        "small-noise reconstruction order",
        slope_criterion(&tilde, 2.0, 0.3, 1000),
    );
    gate.report(9, "density evolution", density_criterion(&fig4));
    gate.report(10, "closure identities", identity_criterion(&checks));

    if gate.failures > 0 {
        println!("{} of 10 criteria failed", gate.failures);
        std::process::exit(1);
    }
    println!("all 10 criteria passed");
}

const POINCARE_TARGETS: [f64; 3] = [19.35, 29.34, 6.45];
const DFT_TARGETS: [f64; 3] = [19.31, 28.90, 6.45];

fn get_f64(v: &Value, keys: &[&str]) -> Result<f64, String> {
    let mut cur = v;
    for k in keys {
        cur = &cur[*k];
    }
    cur.as_f64()
        .ok_or_else(|| format!("report field {} missing", keys.join(".")))
}

fn poincare_periods_criterion(table1: &[Result<Value, String>]) -> Outcome {
    let mut details = Vec::new();
    for (row, rep) in table1.iter().enumerate() {
        let rep = rep.as_ref().map_err(|e| e.clone())?;
        let runs = rep["poincare"]["run_means"]
            .as_array()
            .map(Vec::len)
            .ok_or("run_means missing")?;
        if runs < 5 {
            return Err(format!("row {}: only {runs} replica runs", row + 1));
        }
        let mean = get_f64(rep, &["poincare", "mean_period"])?;
        let target = POINCARE_TARGETS[row];
        let dev = (mean - target) / target;
        if dev.abs() > 0.05 {
            return Err(format!(
                "row {}: period {mean:.3} vs target {target} ({:+.1}%)",
                row + 1,
                100.0 * dev
            ));
        }
        details.push(format!("{mean:.2} vs {target}"));
    }
    Ok(details.join(", "))
}

fn dft_periods_criterion(table1: &[Result<Value, String>]) -> Outcome {
    let mut details = Vec::new();
    for (row, rep) in table1.iter().enumerate() {
        let rep = rep.as_ref().map_err(|e| e.clone())?;
        let dft = get_f64(rep, &["dft", "mean_period"])?;
        let poincare = get_f64(rep, &["poincare", "mean_period"])?;
        let bin = get_f64(rep, &["dft_bin_width_period"])?;
        let target = DFT_TARGETS[row];
        let dev = (dft - target) / target;
        if dev.abs() > 0.05 {
            return Err(format!(
                "row {}: dft period {dft:.3} vs target {target} ({:+.1}%)",
                row + 1,
                100.0 * dev
            ));
        }
        let gap = (dft - poincare).abs();
        let allowed = bin.max(0.5);
        if gap > allowed {
            return Err(format!(
                "row {}: |dft - poincare| = {gap:.3} exceeds max(0.5, bin {bin:.3})",
                row + 1
            ));
        }
        details.push(format!("{dft:.2} vs {target}"));
    }
    Ok(details.join(", "))
}

fn noise_regime_criterion(
    table1: &[Result<Value, String>],
    root: &std::path::Path,
    scale: Scale,
    burn: f64,
) -> Outcome {
    let mut details = Vec::new();
    for row in 0..3 {
        let (_, b, sigma_mid) = REGIMES[row];

        let quiet = regime_cell(row, 0.0, 1, scale).map_err(|e| e.to_string())?;
        let quiet_returns = section_crossings(&quiet, burn).len().saturating_sub(1);
        if quiet_returns >= 2 {
            return Err(format!("B = {b}: {quiet_returns} returns without noise"));
        }

        // The intermediate cell is the table1 bundle of the same regime; read
        // one replica back rather than simulating it again.
        let replica = root
            .join(format!("table1-row{}", row + 1))
            .join("replica-00.csv");
        let mid = match MeanTrajectory::read_csv(&replica) {
            Ok(t) => t,
            Err(_) => {
                let _ = table1; // bundle missing: the failure surfaced in criterion 1
                regime_cell(row, sigma_mid, 1, scale).map_err(|e| e.to_string())?
            }
        };
        let mid_returns = section_crossings(&mid, burn).len().saturating_sub(1);
        if mid_returns < 10 {
            return Err(format!(
                "B = {b}: only {mid_returns} returns at sigma = {sigma_mid}"
            ));
        }

        let loud = regime_cell(row, 5.0, 1, scale).map_err(|e| e.to_string())?;
        match poincare_periods(&loud, burn) {
            Err(_) => {}
            Ok(est) => {
                let returns = est.n_events.saturating_sub(1);
                if returns >= 2 && est.std_period <= 0.5 * est.mean_period {
                    return Err(format!(
                        "B = {b}: sigma = 5 still rhythmic ({returns} returns, \
                         std {:.2} vs mean {:.2})",
                        est.std_period, est.mean_period
                    ));
                }
            }
        }
        details.push(format!("B = {b}: 0/{mid_returns} returns quiet/mid"));
    }
    Ok(details.join("; "))
}

fn equilibria_criterion() -> Outcome {
    let find = |eqs: &[Equilibrium], kind: EquilibriumKind, x: f64, y: f64, tol: f64| {
        eqs.iter()
            .any(|e| e.kind == kind && (e.point.0 - x).abs() <= tol && (e.point.1 - y).abs() <= tol)
    };

    let rep = find_equilibria(2.0, 2.5).map_err(|e| e.to_string())?;
    for sign in [1.0, -1.0] {
        if !find(
            &rep.equilibria,
            EquilibriumKind::Saddle,
            sign * 0.78,
            sign * 0.63,
            0.01,
        ) {
            return Err(format!("B = 2.5: no saddle near {sign}*(0.78, 0.63)"));
        }
        if !find(
            &rep.equilibria,
            EquilibriumKind::StableNode,
            sign,
            sign,
            1e-9,
        ) {
            return Err(format!("B = 2.5: no stable node at {sign}*(1, 1)"));
        }
    }

    let rep = find_equilibria(2.0, 4.0).map_err(|e| e.to_string())?;
    for sign in [1.0, -1.0] {
        let eq = rep
            .equilibria
            .iter()
            .find(|e| (e.point.0 - sign).abs() <= 1e-9 && (e.point.1 - sign).abs() <= 1e-9)
            .ok_or(format!("B = 4: equilibrium {sign}*(1, 1) missing"))?;
        let mut res: Vec<f64> = eq.eigenvalues.iter().map(|&(re, _)| re).collect();
        res.sort_by(|a, b| a.partial_cmp(b).unwrap());
        if eq.eigenvalues.iter().any(|&(_, im)| im.abs() > 1e-9) {
            return Err(format!("B = 4: complex eigenvalues at {sign}*(1, 1)"));
        }
        if (res[0] + 2.0).abs() > 1e-9 || res[1].abs() > 1e-9 {
            return Err(format!(
                "B = 4: eigenvalues ({:.3e}, {:.3e}) at {sign}*(1, 1), expected (-2, 0)",
                res[0], res[1]
            ));
        }
    }

    let rep = find_equilibria(2.0, 7.0).map_err(|e| e.to_string())?;
    for sign in [1.0, -1.0] {
        if !find(
            &rep.equilibria,
            EquilibriumKind::StableSpiral,
            sign * 1.24,
            sign * 1.58,
            0.01,
        ) {
            return Err(format!("B = 7: no stable spiral near {sign}*(1.24, 1.58)"));
        }
    }
    Ok("saddles, degenerate pair, and spirals all at the pinned points".into())
}

fn critical_noise_criterion(fig8: &Result<Value, String>) -> Outcome {
    let targets = [1.65, 2.00, 2.45];
    let rep = fig8.as_ref().map_err(|e| e.clone())?;
    let rows = rep["rows"].as_array().ok_or("rows missing")?;
    if rows.len() != 3 {
        return Err(format!("{} rows in the scan report", rows.len()));
    }
    let mut details = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        let sigma_c = get_f64(row, &["sigma_c"])?;
        if (sigma_c - targets[i]).abs() > 0.05 {
            return Err(format!(
                "regime {}: sigma_c {sigma_c:.3} vs {}",
                i + 1,
                targets[i]
            ));
        }
        let l34 = get_f64(row, &["lambda34_max"])?;
        if l34 >= 0.0 {
            return Err(format!("regime {}: lambda 3/4 reaches {l34:.3e}", i + 1));
        }
        details.push(format!("{sigma_c:.3}"));
    }
    Ok(format!("sigma_c = {} vs 1.65/2.00/2.45", details.join("/")))
}

fn closure_cycle_criterion(fig5: &Result<Value, String>) -> Outcome {
    let rep = fig5.as_ref().map_err(|e| e.clone())?;
    let cells = rep["cells"].as_array().ok_or("cells missing")?;
    let mut seen = 0;
    for cell in cells {
        let sigma = get_f64(cell, &["sigma"])?;
        let b = get_f64(cell, &["b"])?;
        let label = cell["verdict"]["label"].as_str().ok_or("verdict missing")?;
        if sigma == 0.0 {
            if label != "no-rhythm" {
                return Err(format!("B = {b}: verdict {label:?} without noise"));
            }
            let rhs = get_f64(cell, &["final_rhs_norm"])?;
            if rhs > 1e-6 {
                return Err(format!("B = {b}: rhs norm {rhs:.2e}, not at a fixed point"));
            }
        } else if sigma == 5.0 {
            if label == "cycle" {
                return Err(format!("B = {b}: stable cycle at sigma = 5"));
            }
        } else {
            if label != "cycle" {
                return Err(format!("B = {b}: verdict {label:?} at sigma = {sigma}"));
            }
            let returns = cell["verdict"]["returns"].as_u64().unwrap_or(0);
            if returns < 10 {
                return Err(format!(
                    "B = {b}: only {returns} returns at sigma = {sigma}"
                ));
            }
        }
        seen += 1;
    }
    if seen != 9 {
        return Err(format!("{seen} cells in the closure grid"));
    }
    Ok("cycles only at the intermediate noise levels".into())
}

fn slope_criterion(
    report: &Result<Value, String>,
    target: f64,
    tol: f64,
    min_replicas: u64,
) -> Outcome {
    let rep = report.as_ref().map_err(|e| e.clone())?;
    let replicas = rep["replicas"].as_u64().ok_or("replicas missing")?;
    if replicas < min_replicas {
        return Err(format!("{replicas} replicas, need at least {min_replicas}"));
    }
    let slope = get_f64(rep, &["fitted_slope"])?;
    if (slope - target).abs() > tol {
        return Err(format!("slope {slope:.3} outside {target} +- {tol}"));
    }
    Ok(format!(
        "slope {slope:.3} vs {target} +- {tol}, {replicas} replicas"
    ))
}

fn density_criterion(fig4: &Result<Value, String>) -> Outcome {
    let rep = fig4.as_ref().map_err(|e| e.clone())?;
    let drift = get_f64(rep, &["mass_drift_per_unit_time"])?;
    if drift > 1e-8 {
        return Err(format!("mass drift {drift:.2e} per unit time"));
    }
    let returns = rep["returns"].as_u64().unwrap_or(0);
    if returns < 3 {
        return Err(format!("only {returns} returns of the deterministic means"));
    }
    let gibbs = get_f64(rep, &["gibbs_l1"])?;
    if gibbs > 1e-3 {
        return Err(format!(
            "stationary density misses the Gibbs law by {gibbs:.2e} in L1"
        ));
    }
    Ok(format!(
        "mass drift {drift:.1e}, {returns} returns, gibbs L1 {gibbs:.1e}"
    ))
}

fn identity_criterion(checks: &Result<Value, String>) -> Outcome {
    let rep = checks.as_ref().map_err(|e| e.clone())?;
    let identity = get_f64(rep, &["closure_identity_max"])?;
    if identity > 1e-12 {
        return Err(format!("closure identity deviates by {identity:.2e}"));
    }
    let eigen = get_f64(rep, &["eigen_agreement_max"])?;
    if eigen > 1e-8 {
        return Err(format!("eigenvalue agreement off by {eigen:.2e}"));
    }
    let planar = get_f64(rep, &["planar_reduction_sup"])?;
    if planar > 1e-9 {
        return Err(format!("zero-noise reduction off by {planar:.2e}"));
    }
    Ok(format!(
        "identity {identity:.1e}, eigen {eigen:.1e}, reduction {planar:.1e}"
    ))
}
