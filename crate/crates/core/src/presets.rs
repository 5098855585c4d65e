//! Canned experiments: each preset runs one complete pipeline and writes its
//! data files, figures, a `report.json` with the headline numbers, and a
//! `manifest.json` that pins everything needed to reproduce the outputs
//! bit-for-bit (name, scale, seed, resolved parameters, file list).
//!
//! A preset is fully determined by its name and the seed. Rerunning one with
//! the same pair produces byte-identical files; only the wall-time entry of
//! the manifest may differ.

use crate::fokker_planck::{self, FpInit, FpOptions};
use crate::limiting;
use crate::moments::{self, EigenQuad, MomentState};
use crate::phase;
use crate::plot::{self, PlotSpec, Series};
use crate::rhythm;
use crate::sim::{self, InitialCondition};
use crate::tilde;
use crate::trajectory::MeanTrajectory;
use crate::{Error, ModelParams, Result, RngStream};
use serde_json::{json, Value};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

/// The three reference regimes as (A, B, intermediate σ).
pub const REGIMES: [(f64, f64, f64); 3] = [(2.0, 2.5, 0.5), (2.0, 4.0, 0.1), (2.0, 7.0, 0.6)];

/// Preset names with one-line descriptions, in catalog order.
pub const PRESETS: [(&str, &str); 12] = [
    (
        "table1-row1",
        "replica particle runs and period estimates at (A, B, sigma) = (2, 2.5, 0.5)",
    ),
    (
        "table1-row2",
        "replica particle runs and period estimates at (A, B, sigma) = (2, 4, 0.1)",
    ),
    (
        "table1-row3",
        "replica particle runs and period estimates at (A, B, sigma) = (2, 7, 0.6)",
    ),
    (
        "fig2",
        "mean trajectories across the noise regimes (sigma = 0, intermediate, 5)",
    ),
    (
        "fig3",
        "equilibria and phase portraits of the noiseless planar system",
    ),
    (
        "fig4",
        "Fokker-Planck mean evolution plus the decoupled Gibbs check",
    ),
    (
        "fig5",
        "moment-closure time evolution across the noise regimes",
    ),
    (
        "fig6",
        "moment-closure orbits projected on the (m1, m2) plane",
    ),
    (
        "fig8",
        "eigenvalue scans in sigma with the critical noise per regime",
    ),
    (
        "chaos",
        "finite-size coupling error against the limiting pair",
    ),
    (
        "tilde-order",
        "small-noise reconstruction error across sigma",
    ),
    (
        "closure-checks",
        "closure identity, eigenvalue agreement, and zero-noise reduction",
    ),
];

/// Workload size: `Desk` finishes on one machine in minutes, `Full` matches
/// the long reference runs and only tightens the statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Desk,
    Full,
}

impl Scale {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Scale::Desk),
            "full" => Ok(Scale::Full),
            other => Err(Error::InvalidParams(format!(
                "unknown scale {other:?} (expected desk or full)"
            ))),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Scale::Desk => "desk",
            Scale::Full => "full",
        }
    }
}

/// Where a preset run ended up on disk, with its headline numbers.
#[derive(Debug)]
pub struct PresetOutput {
    pub dir: PathBuf,
    /// File names inside `dir`, in write order (manifest.json last).
    pub files: Vec<String>,
    /// Contents of report.json.
    pub report: Value,
}

/// Run the named preset under `out_root/<name>/`.
pub fn run_preset(name: &str, seed: u64, scale: Scale, out_root: &Path) -> Result<PresetOutput> {
    match name {
        "table1-row1" => run_table1(0, name, seed, scale, out_root),
        "table1-row2" => run_table1(1, name, seed, scale, out_root),
        "table1-row3" => run_table1(2, name, seed, scale, out_root),
        "fig2" => run_fig2(name, seed, scale, out_root),
        "fig3" => run_fig3(name, seed, scale, out_root),
        "fig4" => run_fig4(name, seed, scale, out_root),
        "fig5" => run_fig5(name, seed, scale, out_root),
        "fig6" => run_fig6(name, seed, scale, out_root),
        "fig8" => run_fig8(name, seed, scale, out_root),
        "chaos" => run_chaos(name, seed, scale, out_root),
        "tilde-order" => run_tilde_order(name, seed, scale, out_root),
        "closure-checks" => run_closure_checks(name, seed, scale, out_root),
        other => {
            let known: Vec<&str> = PRESETS.iter().map(|(n, _)| *n).collect();
            Err(Error::UnknownPreset(format!(
                "{other} (known: {})",
                known.join(", ")
            )))
        }
    }
}

/// Collects written files and stamps the manifest at the end.
struct Bundle {
    dir: PathBuf,
    files: Vec<String>,
    started: Instant,
}

impl Bundle {
    fn create(root: &Path, name: &str) -> Result<Self> {
        let dir = root.join(name);
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(Bundle {
            dir,
            files: Vec::new(),
            started: Instant::now(),
        })
    }

    fn write_text(&mut self, rel: &str, text: &str) -> Result<()> {
        let path = self.dir.join(rel);
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        self.files.push(rel.to_string());
        Ok(())
    }

    fn write_json(&mut self, rel: &str, value: &Value) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)
            .map_err(|e| Error::InvalidParams(format!("unserializable report: {e}")))?;
        text.push('\n');
        self.write_text(rel, &text)
    }

    fn write_traj(&mut self, rel: &str, traj: &MeanTrajectory) -> Result<()> {
        traj.validate()?;
        self.write_text(rel, &traj.to_csv_string())
    }

    fn finish(
        mut self,
        name: &str,
        seed: u64,
        scale: Scale,
        parameters: Value,
        report: Value,
    ) -> Result<PresetOutput> {
        self.write_json("report.json", &report)?;
        let manifest = json!({
            "preset": name,
            "scale": scale.label(),
            "seed": seed,
            "parameters": parameters,
            "outputs": self.files,
            "versions": { "frustrated-diffusions": env!("CARGO_PKG_VERSION"), "data-format": 1 },
            "wall_time_s": self.started.elapsed().as_secs_f64(),
        });
        let mut text = serde_json::to_string_pretty(&manifest)
            .map_err(|e| Error::InvalidParams(format!("unserializable manifest: {e}")))?;
        text.push('\n');
        let path = self.dir.join("manifest.json");
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        let mut files = self.files;
        files.push("manifest.json".into());
        Ok(PresetOutput {
            dir: self.dir,
            files,
            report,
        })
    }
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report types serialize")
}

/// Windowed view (t, m1, m2) of a trajectory, for plotting.
fn window(traj: &MeanTrajectory, from: f64, span: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let i0 = ((from - traj.t0) / traj.dt_sample).ceil().max(0.0) as usize;
    let i1 = (i0 + (span / traj.dt_sample).round() as usize + 1).min(traj.len());
    let idx = i0.min(traj.len())..i1;
    (
        idx.clone().map(|i| traj.time(i)).collect(),
        traj.m1[idx.clone()].to_vec(),
        traj.m2[idx].to_vec(),
    )
}

/// Every `keep`-th sample of a trajectory (used to thin stored CSVs).
fn thin(traj: &MeanTrajectory, keep: usize) -> MeanTrajectory {
    let pick = |v: &Vec<f64>| v.iter().step_by(keep).copied().collect::<Vec<f64>>();
    MeanTrajectory {
        t0: traj.t0,
        dt_sample: traj.dt_sample * keep as f64,
        m1: pick(&traj.m1),
        m2: pick(&traj.m2),
        v1: traj.v1.as_ref().map(pick),
        v2: traj.v2.as_ref().map(pick),
    }
}

/// Verdict on the rhythmicity of one trajectory.
#[derive(Debug, Clone, serde::Serialize)]
pub struct CellVerdict {
    /// "cycle", "irregular", or "no-rhythm".
    pub label: &'static str,
    /// Completed returns to the section (crossings minus one).
    pub returns: usize,
    pub mean_period: Option<f64>,
    pub std_period: Option<f64>,
}

/// Classify a trajectory: `cycle` needs at least 10 returns with a return-
/// interval spread at most `cycle_std_frac` of the mean; fewer than 2
/// crossings is `no-rhythm`; anything else is `irregular`.
pub fn classify_cell(traj: &MeanTrajectory, burn_in: f64, cycle_std_frac: f64) -> CellVerdict {
    let times = rhythm::section_crossings(traj, burn_in);
    if times.len() < 2 {
        return CellVerdict {
            label: "no-rhythm",
            returns: times.len().saturating_sub(1),
            mean_period: None,
            std_period: None,
        };
    }
    let gaps: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
    let (mean, std) = crate::stats::mean_std(&gaps);
    let label = if gaps.len() >= 10 && std <= cycle_std_frac * mean {
        "cycle"
    } else {
        "irregular"
    };
    CellVerdict {
        label,
        returns: gaps.len(),
        mean_period: Some(mean),
        std_period: Some(std),
    }
}

fn fmt_cols(out: &mut String, cols: &[f64]) {
    for (i, v) in cols.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        let _ = write!(out, "{v:.16e}");
    }
    out.push('\n');
}

// ---------------------------------------------------------------------------
// table1-row*

fn run_table1(
    row: usize,
    name: &str,
    seed: u64,
    scale: Scale,
    root: &Path,
) -> Result<PresetOutput> {
    let (a, b, sigma) = REGIMES[row];
    let (replicas, total_steps, burn_steps) = match scale {
        Scale::Desk => (10usize, 220_000usize, 20_000usize),
        Scale::Full => (50, 1_100_000, 100_000),
    };
    let stride = 10usize;
    let base = ModelParams {
        steps: total_steps,
        ..ModelParams::from_ab(a, b, sigma)
    };
    let burn_t = burn_steps as f64 * base.dt;
    let ic = InitialCondition::Uniform { x0: 0.8, y0: 0.8 };

    let mut bundle = Bundle::create(root, name)?;
    let mut trajs = Vec::with_capacity(replicas);
    for r in 0..replicas {
        let p = ModelParams {
            seed: seed.wrapping_add(r as u64),
            ..base
        };
        let run = sim::simulate_particles(&p, &ic, stride)?;
        bundle.write_traj(&format!("replica-{r:02}.csv"), &run.trajectory)?;
        trajs.push(run.trajectory);
    }

    let ensemble = rhythm::poincare_ensemble(&trajs, burn_t)?;
    let (spectrum, dft) = rhythm::dft_period(&trajs, burn_t)?;
    let bin_hz = if spectrum.frequencies.len() > 1 {
        spectrum.frequencies[1] - spectrum.frequencies[0]
    } else {
        0.0
    };
    let bin_period = dft.mean_period * dft.mean_period * bin_hz;

    let mut spec_csv = String::from("freq,power\n");
    for (f, p) in spectrum.frequencies.iter().zip(&spectrum.power) {
        fmt_cols(&mut spec_csv, &[*f, *p]);
    }
    bundle.write_text("spectrum.csv", &spec_csv)?;

    let (t, m1, m2) = window(&trajs[0], burn_t, 100.0);
    let svg = plot::line_chart(
        &PlotSpec::titled(format!("means, A={a} B={b} sigma={sigma}"), "t", "m"),
        &[Series::new("m1", t.clone(), m1), Series::new("m2", t, m2)],
    )?;
    bundle.write_text("means.svg", &svg)?;

    let band: Vec<usize> = spectrum
        .frequencies
        .iter()
        .take_while(|&&f| f <= 1.0)
        .enumerate()
        .map(|(i, _)| i)
        .collect();
    let svg = plot::line_chart(
        &PlotSpec::titled(
            format!("averaged spectrum, A={a} B={b} sigma={sigma}"),
            "frequency",
            "power",
        ),
        &[Series::new(
            "",
            band.iter().map(|&i| spectrum.frequencies[i]).collect(),
            band.iter().map(|&i| spectrum.power[i]).collect(),
        )],
    )?;
    bundle.write_text("spectrum.svg", &svg)?;

    let report = json!({
        "a": a, "b": b, "sigma": sigma,
        "replicas": replicas,
        "poincare": to_value(&ensemble),
        "dft": to_value(&dft),
        "peak_frequency": spectrum.peak_frequency,
        "dft_bin_width_period": bin_period,
    });
    let parameters = json!({
        "model": to_value(&base),
        "seed_per_replica": "seed + replica index",
        "replicas": replicas,
        "burn_in_steps": burn_steps,
        "sample_stride": stride,
        "initial_condition": {"uniform": [0.8, 0.8]},
    });
    bundle.finish(name, seed, scale, parameters, report)
}

// ---------------------------------------------------------------------------
// fig2

/// The σ values of one noise-regime row: none, intermediate, destructive.
pub fn regime_sigmas(row: usize) -> [f64; 3] {
    [0.0, REGIMES[row].2, 5.0]
}

/// One particle run of the noise-regime grid, shared with the acceptance
/// checks so the grid cell and the criterion see identical trajectories.
pub fn regime_cell(row: usize, sigma: f64, seed: u64, scale: Scale) -> Result<MeanTrajectory> {
    let (a, b, _) = REGIMES[row];
    let steps = match scale {
        Scale::Desk => 220_000,
        Scale::Full => 1_100_000,
    };
    let p = ModelParams {
        steps,
        seed,
        ..ModelParams::from_ab(a, b, sigma)
    };
    let run = sim::simulate_particles(&p, &InitialCondition::Uniform { x0: 0.8, y0: 0.8 }, 10)?;
    Ok(run.trajectory)
}

fn run_fig2(name: &str, seed: u64, scale: Scale, root: &Path) -> Result<PresetOutput> {
    let burn_t = match scale {
        Scale::Desk => 100.0,
        Scale::Full => 500.0,
    };
    let mut bundle = Bundle::create(root, name)?;
    let mut cells = Vec::new();
    for row in 0..REGIMES.len() {
        let (a, b, _) = REGIMES[row];
        for sigma in regime_sigmas(row) {
            let traj = regime_cell(row, sigma, seed, scale)?;
            let tag = format!("b{b}-sigma{sigma}");
            bundle.write_traj(&format!("traj-{tag}.csv"), &traj)?;
            let (t, m1, m2) = window(&traj, burn_t, 100.0);
            let svg = plot::line_chart(
                &PlotSpec::titled(format!("A={a} B={b} sigma={sigma}"), "t", "m"),
                &[Series::new("m1", t.clone(), m1), Series::new("m2", t, m2)],
            )?;
            bundle.write_text(&format!("traj-{tag}.svg"), &svg)?;
            let verdict = classify_cell(&traj, burn_t, 0.5);
            cells.push(json!({ "a": a, "b": b, "sigma": sigma, "verdict": to_value(&verdict) }));
        }
    }
    let report = json!({ "burn_in": burn_t, "cells": cells });
    let parameters = json!({
        "regimes": REGIMES.iter().map(|&(a, b, s)| json!([a, b, s])).collect::<Vec<_>>(),
        "sigmas": ["0", "intermediate", "5"],
        "steps": match scale { Scale::Desk => 220_000usize, Scale::Full => 1_100_000 },
        "dt": 0.005,
        "n": 1000,
        "sample_stride": 10,
        "initial_condition": {"uniform": [0.8, 0.8]},
    });
    bundle.finish(name, seed, scale, parameters, report)
}

// ---------------------------------------------------------------------------
// fig3

fn run_fig3(name: &str, seed: u64, scale: Scale, root: &Path) -> Result<PresetOutput> {
    let res = match scale {
        Scale::Desk => 40usize,
        Scale::Full => 80,
    };
    let window = (-2.0, 2.0, -2.0, 2.0);
    let starts = [
        (-1.8, -1.2),
        (1.8, 1.2),
        (0.4, -0.3),
        (-0.4, 0.3),
        (1.5, -1.5),
        (-1.5, 1.5),
    ];
    let mut bundle = Bundle::create(root, name)?;
    let mut regimes = Vec::new();
    for &(a, b, _) in &REGIMES {
        let report = phase::find_equilibria(a, b)?;
        bundle.write_json(&format!("equilibria-b{b}.json"), &to_value(&report))?;
        let field = phase::sample_field(a, b, window, res)?;
        let mut csv = String::from("x,y,dx,dy,magnitude\n");
        for (iy, &y) in field.ys.iter().enumerate() {
            for (ix, &x) in field.xs.iter().enumerate() {
                let k = iy * field.xs.len() + ix;
                fmt_cols(
                    &mut csv,
                    &[x, y, field.dx[k], field.dy[k], field.magnitude[k]],
                );
            }
        }
        bundle.write_text(&format!("field-b{b}.csv"), &csv)?;
        let paths: Vec<Series> = starts
            .iter()
            .map(|&(x0, y0)| {
                let path = phase::planar_rk4(x0, y0, a, b, 0.01, 1500);
                Series::new(
                    "",
                    path.iter().map(|p| p.0).collect(),
                    path.iter().map(|p| p.1).collect(),
                )
            })
            .collect();
        let svg = plot::phase_plane(
            &PlotSpec::titled(format!("phase portrait, A={a} B={b}"), "x", "y"),
            Some(&field),
            &paths,
            Some(&report),
        )?;
        bundle.write_text(&format!("portrait-b{b}.svg"), &svg)?;
        regimes.push(to_value(&report));
    }
    let report = json!({ "regimes": regimes });
    let parameters = json!({
        "regimes": REGIMES.iter().map(|&(a, b, _)| json!([a, b])).collect::<Vec<_>>(),
        "field_resolution": res,
        "window": [-2.0, 2.0, -2.0, 2.0],
        "orbit_starts": starts.iter().map(|&(x, y)| json!([x, y])).collect::<Vec<_>>(),
        "orbit_dt": 0.01,
        "orbit_steps": 1500,
    });
    bundle.finish(name, seed, scale, parameters, report)
}

// ---------------------------------------------------------------------------
// fig4

fn write_density_csv(bundle: &mut Bundle, rel: &str, d: &fokker_planck::DensityPair) -> Result<()> {
    // Clamp the harmless negative round-off (bounded by the validator) so
    // published densities are nonnegative.
    let mut csv = String::from("x,q1,q2\n");
    for i in 0..d.cells() {
        fmt_cols(&mut csv, &[d.center(i), d.q1[i].max(0.0), d.q2[i].max(0.0)]);
    }
    bundle.write_text(rel, &csv)
}

fn run_fig4(name: &str, seed: u64, scale: Scale, root: &Path) -> Result<PresetOutput> {
    let (a, b, sigma) = REGIMES[0];
    let p = ModelParams {
        seed,
        ..ModelParams::from_ab(a, b, sigma)
    };
    let (t_end, snapshot_every) = match scale {
        Scale::Desk => (150.0, 100usize),
        Scale::Full => (200.0, 40),
    };
    let opts = FpOptions {
        t_end,
        snapshot_every,
        ..FpOptions::default()
    };
    let init = FpInit::Gaussian {
        center: 0.8,
        sd: 0.05,
    };

    let mut bundle = Bundle::create(root, name)?;
    let sol = fokker_planck::solve_fp(&p, &init, &opts)?;
    bundle.write_traj("fpmeans.csv", &sol.means)?;
    let mut snapshot_times = Vec::new();
    for (k, snap) in sol.snapshots.iter().enumerate() {
        write_density_csv(&mut bundle, &format!("snapshot-{k:04}.csv"), snap)?;
        snapshot_times.push(snap.t);
    }

    let t: Vec<f64> = (0..sol.means.len()).map(|i| sol.means.time(i)).collect();
    let svg = plot::line_chart(
        &PlotSpec::titled(
            format!("density means, A={a} B={b} sigma={sigma}"),
            "t",
            "mean",
        ),
        &[
            Series::new("m1", t.clone(), sol.means.m1.clone()),
            Series::new("m2", t, sol.means.m2.clone()),
        ],
    )?;
    bundle.write_text("means.svg", &svg)?;
    let last = sol.snapshots.last().expect("snapshots enabled");
    let xs: Vec<f64> = (0..last.cells()).map(|i| last.center(i)).collect();
    let svg = plot::line_chart(
        &PlotSpec::titled(format!("densities at t={}", last.t), "x", "q"),
        &[
            Series::new(
                "q1",
                xs.clone(),
                last.q1.iter().map(|v| v.max(0.0)).collect(),
            ),
            Series::new("q2", xs, last.q2.iter().map(|v| v.max(0.0)).collect()),
        ],
    )?;
    bundle.write_text("final-density.svg", &svg)?;

    let crossings = rhythm::section_crossings(&sol.means, 0.0);
    let returns = crossings.len().saturating_sub(1);
    let mass1 = fokker_planck::density_moment(&last.q1, last.l, 0);
    let mass2 = fokker_planck::density_moment(&last.q2, last.l, 0);
    let mass_drift = ((mass1 - 1.0).abs().max((mass2 - 1.0).abs())) / last.t;

    // Decoupled stationary check: with every coupling off the density must
    // relax to the analytic double-well Gibbs profile.
    let pg = ModelParams {
        theta11: 0.0,
        theta12: 0.0,
        theta21: 0.0,
        theta22: 0.0,
        sigma: 1.0,
        ..p
    };
    let gibbs_opts = FpOptions {
        t_end: 30.0,
        dt_out: 0.1,
        snapshot_every: 300,
        ..FpOptions::default()
    };
    let gsol = fokker_planck::solve_fp(&pg, &init, &gibbs_opts)?;
    let gfinal = gsol.snapshots.last().expect("snapshots enabled");
    let reference = fokker_planck::gibbs_density(gibbs_opts.l, gibbs_opts.cells, pg.sigma)?;
    let h = gfinal.h();
    let l1 = |q: &[f64]| -> f64 {
        q.iter()
            .zip(&reference)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            * h
    };
    let gibbs_l1 = l1(&gfinal.q1).max(l1(&gfinal.q2));
    write_density_csv(&mut bundle, "gibbs-final.csv", gfinal)?;

    let period = if returns >= 2 {
        let gaps: Vec<f64> = crossings.windows(2).map(|w| w[1] - w[0]).collect();
        let (mean, std) = crate::stats::mean_std(&gaps);
        json!({ "mean": mean, "std": std })
    } else {
        Value::Null
    };
    let report = json!({
        "a": a, "b": b, "sigma": sigma,
        "t_end": t_end,
        "mass_drift_per_unit_time": mass_drift,
        "crossings": crossings.len(),
        "returns": returns,
        "period": period,
        "gibbs_l1": gibbs_l1,
        "snapshot_times": snapshot_times,
    });
    let parameters = json!({
        "model": to_value(&p),
        "grid": { "l": opts.l, "cells": opts.cells, "dt_out": opts.dt_out },
        "t_end": t_end,
        "snapshot_every": snapshot_every,
        "initial_condition": {"gaussian": [0.8, 0.05]},
        "gibbs_check": { "sigma": 1.0, "t_end": 30.0 },
    });
    bundle.finish(name, seed, scale, parameters, report)
}

// ---------------------------------------------------------------------------
// fig5 / fig6

fn closure_run(row: usize, sigma: f64, t_end: f64) -> Result<MeanTrajectory> {
    let (a, b, _) = REGIMES[row];
    let p = ModelParams::from_ab(a, b, sigma);
    moments::integrate_moments(&MomentState::new(0.8, 0.8, 0.0, 0.0), &p, t_end, 0.01)
}

fn run_fig5(name: &str, seed: u64, scale: Scale, root: &Path) -> Result<PresetOutput> {
    let t_end = match scale {
        Scale::Desk => 500.0,
        Scale::Full => 1000.0,
    };
    let burn_t = 50.0;
    let mut bundle = Bundle::create(root, name)?;
    let mut cells = Vec::new();
    for row in 0..REGIMES.len() {
        let (a, b, _) = REGIMES[row];
        for sigma in regime_sigmas(row) {
            let traj = closure_run(row, sigma, t_end)?;
            let tag = format!("b{b}-sigma{sigma}");
            bundle.write_traj(&format!("mom-{tag}.csv"), &thin(&traj, 5))?;
            let verdict = classify_cell(&traj, burn_t, 0.05);
            let (t, _, m2) = window(&traj, t_end - 100.0, 100.0);
            let v2 = &traj.v2.as_ref().unwrap()[traj.len() - t.len()..];
            let svg = plot::line_chart(
                &PlotSpec::titled(format!("closure, A={a} B={b} sigma={sigma}"), "t", "m2, v2"),
                &[
                    Series::new("m2", t.clone(), m2),
                    Series::new("v2", t, v2.to_vec()),
                ],
            )?;
            bundle.write_text(&format!("mom-{tag}.svg"), &svg)?;
            let last = traj.len() - 1;
            let s_end = MomentState::new(
                traj.m1[last],
                traj.m2[last],
                traj.v1.as_ref().unwrap()[last],
                traj.v2.as_ref().unwrap()[last],
            );
            let d = moments::moment_rhs(&s_end, &ModelParams::from_ab(a, b, sigma));
            let rhs_norm = d.m1.abs().max(d.m2.abs()).max(d.v1.abs()).max(d.v2.abs());
            cells.push(json!({
                "a": a, "b": b, "sigma": sigma,
                "verdict": to_value(&verdict),
                "final_rhs_norm": rhs_norm,
            }));
        }
    }
    let report = json!({ "t_end": t_end, "burn_in": burn_t, "cells": cells });
    let parameters = json!({
        "regimes": REGIMES.iter().map(|&(a, b, s)| json!([a, b, s])).collect::<Vec<_>>(),
        "initial_state": [0.8, 0.8, 0.0, 0.0],
        "dt_ode": 0.01,
        "t_end": t_end,
        "stored_stride": 5,
    });
    bundle.finish(name, seed, scale, parameters, report)
}

fn run_fig6(name: &str, seed: u64, scale: Scale, root: &Path) -> Result<PresetOutput> {
    let t_end = match scale {
        Scale::Desk => 500.0,
        Scale::Full => 1000.0,
    };
    let span = 60.0;
    let mut bundle = Bundle::create(root, name)?;
    let mut orbits = Vec::new();
    for row in 0..REGIMES.len() {
        let (a, b, sigma) = REGIMES[row];
        let traj = closure_run(row, sigma, t_end)?;
        let i0 = (((t_end - span) / traj.dt_sample).ceil()) as usize;
        let tail = MeanTrajectory {
            t0: traj.time(i0),
            dt_sample: traj.dt_sample,
            m1: traj.m1[i0..].to_vec(),
            m2: traj.m2[i0..].to_vec(),
            v1: traj.v1.as_ref().map(|v| v[i0..].to_vec()),
            v2: traj.v2.as_ref().map(|v| v[i0..].to_vec()),
        };
        bundle.write_traj(&format!("orbit-b{b}.csv"), &tail)?;
        let svg = plot::phase_plane(
            &PlotSpec::titled(
                format!("closure orbit, A={a} B={b} sigma={sigma}"),
                "m1",
                "m2",
            ),
            None,
            &[Series::new("", tail.m1.clone(), tail.m2.clone())],
            None,
        )?;
        bundle.write_text(&format!("orbit-b{b}.svg"), &svg)?;
        orbits.push(json!({
            "a": a, "b": b, "sigma": sigma,
            "window": [tail.t0, t_end],
            "samples": tail.len(),
        }));
    }
    let report = json!({ "orbits": orbits });
    let parameters = json!({
        "regimes": REGIMES.iter().map(|&(a, b, s)| json!([a, b, s])).collect::<Vec<_>>(),
        "initial_state": [0.8, 0.8, 0.0, 0.0],
        "dt_ode": 0.01,
        "t_end": t_end,
        "window_span": span,
    });
    bundle.finish(name, seed, scale, parameters, report)
}

// ---------------------------------------------------------------------------
// fig8

fn run_fig8(name: &str, seed: u64, scale: Scale, root: &Path) -> Result<PresetOutput> {
    let points = match scale {
        Scale::Desk => 300usize,
        Scale::Full => 1200,
    };
    let (lo, hi) = (0.02, 3.0);
    let mut bundle = Bundle::create(root, name)?;
    let mut rows = Vec::new();
    for &(a, b, _) in &REGIMES {
        let p = ModelParams::from_ab(a, b, 1.0);
        let scan = moments::hopf_scan(&p, lo, hi, points)?;
        let mut csv = String::from("sigma,re_l1,im_l1,re_l2,im_l2,l3,l4\n");
        let mut l34_max = f64::NEG_INFINITY;
        for (i, eig) in scan.eigen_table.iter().enumerate() {
            fmt_cols(
                &mut csv,
                &[
                    scan.sigma_grid[i],
                    eig[0].0,
                    eig[0].1,
                    eig[1].0,
                    eig[1].1,
                    eig[2].0,
                    eig[3].0,
                ],
            );
            l34_max = l34_max.max(eig[2].0).max(eig[3].0);
        }
        bundle.write_text(&format!("hopf-b{b}.csv"), &csv)?;
        let series = |f: &dyn Fn(&EigenQuad) -> f64, label: &str| {
            Series::new(
                label,
                scan.sigma_grid.clone(),
                scan.eigen_table.iter().map(f).collect(),
            )
        };
        let svg = plot::line_chart(
            &PlotSpec::titled(format!("eigenvalues, A={a} B={b}"), "sigma", "eigenvalue"),
            &[
                series(&|e| e[0].0, "re l1"),
                series(&|e| e[0].1.abs(), "|im l1|"),
                series(&|e| e[2].0, "l3"),
                series(&|e| e[3].0, "l4"),
            ],
        )?;
        bundle.write_text(&format!("hopf-b{b}.svg"), &svg)?;
        rows.push(json!({
            "a": a, "b": b,
            "sigma_c": scan.sigma_c,
            "lambda34_max": l34_max,
        }));
    }
    let report = json!({ "rows": rows });
    let parameters = json!({
        "regimes": REGIMES.iter().map(|&(a, b, _)| json!([a, b])).collect::<Vec<_>>(),
        "sigma_lo": lo,
        "sigma_hi": hi,
        "points": points,
    });
    bundle.finish(name, seed, scale, parameters, report)
}

// ---------------------------------------------------------------------------
// chaos / tilde-order

fn loglog_series(xs: &[f64], ys: &[f64], label: &str) -> Series {
    Series::new(
        label,
        xs.iter().map(|x| x.log10()).collect(),
        ys.iter().map(|y| y.log10()).collect(),
    )
}

fn run_chaos(name: &str, seed: u64, scale: Scale, root: &Path) -> Result<PresetOutput> {
    let (n_values, replicas, copies): (Vec<usize>, usize, usize) = match scale {
        Scale::Desk => (vec![10, 40, 160, 640], 200, limiting::DEFAULT_PICARD_COPIES),
        Scale::Full => (vec![10, 40, 160, 640, 2560], 1000, 400_000),
    };
    let t_end = 1.0;
    let p = ModelParams {
        seed,
        ..ModelParams::from_ab(2.0, 2.5, 0.5)
    };
    let mut bundle = Bundle::create(root, name)?;
    let report = limiting::chaos_error_with(
        &p,
        &n_values,
        replicas,
        t_end,
        copies,
        limiting::DEFAULT_PICARD_TOL,
    )?;

    let mut csv = String::from("N,mean_error,stderr\n");
    for (i, &n) in report.n_values.iter().enumerate() {
        let _ = write!(csv, "{n},");
        fmt_cols(&mut csv, &[report.errors[i], report.stderrs[i]]);
    }
    bundle.write_text("chaos.csv", &csv)?;

    let nf: Vec<f64> = report.n_values.iter().map(|&n| n as f64).collect();
    let data = loglog_series(&nf, &report.errors, "measured");
    let slope = crate::stats::linear_slope(&data.xs, &data.ys);
    let (x0, x1) = (data.xs[0], *data.xs.last().unwrap());
    let y_mean = data.ys.iter().sum::<f64>() / data.ys.len() as f64;
    let x_mean = data.xs.iter().sum::<f64>() / data.xs.len() as f64;
    let fit = Series::new(
        "fit",
        vec![x0, x1],
        vec![
            y_mean + slope * (x0 - x_mean),
            y_mean + slope * (x1 - x_mean),
        ],
    );
    let svg = plot::line_chart(
        &PlotSpec::titled("coupling error vs system size", "log10 N", "log10 error"),
        &[data, fit],
    )?;
    bundle.write_text("chaos.svg", &svg)?;

    let report_json = json!({
        "n_values": report.n_values,
        "errors": report.errors,
        "stderrs": report.stderrs,
        "fitted_slope": report.fitted_slope,
        "replicas": report.replicas,
    });
    let parameters = json!({
        "model": to_value(&p),
        "n_values": n_values,
        "replicas": replicas,
        "t_end": t_end,
        "picard_copies": copies,
        "picard_tol": limiting::DEFAULT_PICARD_TOL,
    });
    bundle.finish(name, seed, scale, parameters, report_json)
}

fn run_tilde_order(name: &str, seed: u64, scale: Scale, root: &Path) -> Result<PresetOutput> {
    let (replicas, copies): (usize, usize) = match scale {
        Scale::Desk => (1000, tilde::TILDE_PICARD_COPIES),
        Scale::Full => (10_000, 100_000),
    };
    let sigmas = tilde::DEFAULT_TILDE_SIGMAS.to_vec();
    let t_end = 1.0;
    let p = ModelParams {
        seed,
        ..ModelParams::from_ab(2.0, 2.5, 0.5)
    };
    let mut bundle = Bundle::create(root, name)?;
    let report = tilde::tilde_error_with(
        &p,
        &sigmas,
        replicas,
        t_end,
        copies,
        tilde::TILDE_PICARD_TOL,
    )?;

    let mut csv = String::from("sigma,mean_error,stderr\n");
    for (i, &s) in report.sigmas.iter().enumerate() {
        fmt_cols(&mut csv, &[s, report.errors[i], report.stderrs[i]]);
    }
    bundle.write_text("tilde.csv", &csv)?;

    let data = loglog_series(&report.sigmas, &report.errors, "measured");
    let svg = plot::line_chart(
        &PlotSpec::titled(
            "reconstruction error vs sigma",
            "log10 sigma",
            "log10 error",
        ),
        &[data],
    )?;
    bundle.write_text("tilde.svg", &svg)?;

    let report_json = json!({
        "sigmas": report.sigmas,
        "errors": report.errors,
        "stderrs": report.stderrs,
        "fitted_slope": report.fitted_slope,
        "replicas": report.replicas,
    });
    let parameters = json!({
        "model": to_value(&p),
        "sigmas": sigmas,
        "replicas": replicas,
        "t_end": t_end,
        "picard_copies": copies,
        "picard_tol": tilde::TILDE_PICARD_TOL,
    });
    bundle.finish(name, seed, scale, parameters, report_json)
}

// ---------------------------------------------------------------------------
// closure-checks

/// The closure right-hand side derived the long way around: write the raw
/// first/second-moment hierarchy of each population and substitute Gaussian
/// expressions for the third and fourth moments. Used as an independent
/// check against `moment_rhs`.
fn gaussian_substituted_rhs(s: &MomentState, p: &ModelParams) -> MomentState {
    let (c11, c12) = (p.alpha * p.theta11, (1.0 - p.alpha) * p.theta12);
    let (c21, c22) = (p.alpha * p.theta21, (1.0 - p.alpha) * p.theta22);
    let s2 = p.sigma * p.sigma;
    let ex3 = |m: f64, v: f64| m * m * m + 3.0 * m * v;
    let ex4 = |m: f64, v: f64| m * m * m * m + 6.0 * m * m * v + 3.0 * v * v;
    let e2_1 = s.v1 + s.m1 * s.m1;
    let e2_2 = s.v2 + s.m2 * s.m2;

    let dm1 = -ex3(s.m1, s.v1) + s.m1 - c12 * (s.m1 - s.m2);
    let de2_1 = 2.0
        * (-ex4(s.m1, s.v1) + e2_1 - c11 * (e2_1 - s.m1 * s.m1) - c12 * (e2_1 - s.m1 * s.m2))
        + s2;
    let dm2 = -ex3(s.m2, s.v2) + s.m2 - c21 * (s.m2 - s.m1);
    let de2_2 = 2.0
        * (-ex4(s.m2, s.v2) + e2_2 - c21 * (e2_2 - s.m2 * s.m1) - c22 * (e2_2 - s.m2 * s.m2))
        + s2;
    MomentState {
        m1: dm1,
        m2: dm2,
        v1: de2_1 - 2.0 * s.m1 * dm1,
        v2: de2_2 - 2.0 * s.m2 * dm2,
    }
}

fn run_closure_checks(name: &str, seed: u64, _scale: Scale, root: &Path) -> Result<PresetOutput> {
    let bundle = Bundle::create(root, name)?;

    // 1. moment_rhs against the Gaussian-substituted hierarchy on random
    //    states across the three regimes.
    let stream = RngStream::new(seed, 0);
    let un = |k: u64, lo: f64, hi: f64| lo + (hi - lo) * stream.uniform(k);
    let mut identity_max = 0.0f64;
    for i in 0..100u64 {
        let (a, b, _) = REGIMES[(i % 3) as usize];
        let sigma = un(5 * i + 4, 0.0, 3.0);
        let p = ModelParams::from_ab(a, b, sigma);
        let s = MomentState::new(
            un(5 * i, -2.0, 2.0),
            un(5 * i + 1, -2.0, 2.0),
            un(5 * i + 2, 0.0, 2.0),
            un(5 * i + 3, 0.0, 2.0),
        );
        let lhs = moments::moment_rhs(&s, &p);
        let rhs = gaussian_substituted_rhs(&s, &p);
        identity_max = identity_max
            .max((lhs.m1 - rhs.m1).abs())
            .max((lhs.m2 - rhs.m2).abs())
            .max((lhs.v1 - rhs.v1).abs())
            .max((lhs.v2 - rhs.v2).abs());
    }

    // 2. Closed-form vs numeric eigenvalues on a σ grid, matched after
    //    sorting by (re, im).
    let mut eigen_max = 0.0f64;
    for &(a, b, _) in &REGIMES {
        let p = ModelParams::from_ab(a, b, 1.0);
        for i in 0..50 {
            let sigma = 0.06 * (i + 1) as f64;
            let mut closed = moments::hopf_closed_eigenvalues(a, b, sigma).to_vec();
            let mut numeric = moments::hopf_eigenvalues(&p, sigma)?.to_vec();
            let key = |e: &(f64, f64)| (e.0, e.1);
            closed.sort_by(|x, y| key(x).partial_cmp(&key(y)).unwrap());
            numeric.sort_by(|x, y| key(x).partial_cmp(&key(y)).unwrap());
            for (c, n) in closed.iter().zip(&numeric) {
                eigen_max = eigen_max.max((c.0 - n.0).abs()).max((c.1 - n.1).abs());
            }
        }
    }

    // 3. At σ = 0 with zero starting variance the mean equations must follow
    //    the planar flow.
    let p0 = ModelParams::from_ab(2.0, 2.5, 0.0);
    let traj = moments::integrate_moments(&MomentState::new(0.8, 0.3, 0.0, 0.0), &p0, 10.0, 1e-3)?;
    let path = phase::planar_rk4(0.8, 0.3, 2.0, 2.5, 1e-3, 10_000);
    let mut planar_sup = 0.0f64;
    for (i, (x, y)) in path.iter().enumerate() {
        planar_sup = planar_sup
            .max((traj.m1[i] - x).abs())
            .max((traj.m2[i] - y).abs());
    }

    let report = json!({
        "closure_identity_max": identity_max,
        "eigen_agreement_max": eigen_max,
        "planar_reduction_sup": planar_sup,
        "states": 100,
        "eigen_grid_points": 50,
    });
    let parameters = json!({
        "regimes": REGIMES.iter().map(|&(a, b, _)| json!([a, b])).collect::<Vec<_>>(),
        "state_box": { "m": [-2.0, 2.0], "v": [0.0, 2.0], "sigma": [0.0, 3.0] },
        "eigen_sigma_grid": "0.06 .. 3.0, 50 points",
        "reduction": { "start": [0.8, 0.3], "t_end": 10.0, "dt": 1e-3 },
    });
    bundle.finish(name, seed, Scale::Desk, parameters, report)
}
