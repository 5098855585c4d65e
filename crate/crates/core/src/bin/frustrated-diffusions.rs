//! Command line front end for the frustrated-diffusions toolkit.
//!
//! Every subcommand wraps one library entry point, and all numeric output
//! goes through the canonical CSV formats so the commands compose:
//! `simulate` feeds `period`, `spectrum`, and `plot`; `preset` runs the
//! canned experiment bundles. Validation problems exit with code 2,
//! numerical divergence with 3, analysis failures with 4.

use clap::{Args, Parser, Subcommand, ValueEnum};
use frustrated_diffusions::fokker_planck::{solve_fp, DensityPair, FpInit, FpOptions};
use frustrated_diffusions::limiting::{
    chaos_error_with, DEFAULT_PICARD_COPIES, DEFAULT_PICARD_TOL,
};
use frustrated_diffusions::moments::{hopf_scan, integrate_moments, MomentState};
use frustrated_diffusions::plot::{line_chart, phase_plane, PlotSpec, Series};
use frustrated_diffusions::presets::{run_preset, Scale, PRESETS};
use frustrated_diffusions::rhythm::{dft_period, poincare_periods, section_crossings};
use frustrated_diffusions::sim::{simulate_particles, InitialCondition};
use frustrated_diffusions::tilde::{tilde_error_with, TILDE_PICARD_TOL};
use frustrated_diffusions::{phase, tilde, Error, MeanTrajectory, ModelParams, Result};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "frustrated-diffusions",
    version,
    about = "Simulation and bifurcation analysis of two frustratedly coupled diffusion populations"
)]
struct Cli {
    /// Cap the worker thread count (default: one per core).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the N-particle system and write the empirical means as CSV.
    Simulate(SimulateArgs),
    /// List and classify the equilibria of the noiseless planar system.
    FixedPoints(FixedPointsArgs),
    /// Sample the planar vector field on a lattice.
    PhasePortrait(PhasePortraitArgs),
    /// Solve the coupled Fokker-Planck equations on [-L, L].
    Fp(FpArgs),
    /// Integrate the Gaussian moment closure ODE.
    Moments(MomentsArgs),
    /// Scan the closure spectrum in sigma and locate the critical noise.
    Hopf(HopfArgs),
    /// Measure the small-noise reconstruction error as sigma varies.
    TildeError(TildeErrorArgs),
    /// Measure the finite-size coupling error as N varies.
    Chaos(ChaosArgs),
    /// Estimate the oscillation period of a stored trajectory.
    Period(PeriodArgs),
    /// Average the spectra of replica trajectories into one CSV.
    Spectrum(SpectrumArgs),
    /// Run a canned experiment bundle with a manifest.
    Preset(PresetArgs),
    /// Render stored CSV results as an SVG figure.
    Plot(PlotArgs),
}

/// Model parameters shared by the simulation-style subcommands. A config
/// file is applied first, individual flags override it, and the aggregated
/// couplings are translated back to the raw matrix entries through alpha.
#[derive(Args)]
struct ParamArgs {
    /// Flat key=value parameter file applied before the other flags.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Aggregated coupling A = (1 - alpha) theta12.
    #[arg(long = "A", value_name = "A", allow_negative_numbers = true)]
    a: Option<f64>,

    /// Aggregated coupling B = -alpha theta21.
    #[arg(long = "B", value_name = "B", allow_negative_numbers = true)]
    b: Option<f64>,

    /// Noise intensity.
    #[arg(long, allow_negative_numbers = true)]
    sigma: Option<f64>,

    /// Total particle count; population one gets round(alpha * n) slots.
    #[arg(long)]
    n: Option<usize>,

    /// Euler-Maruyama step.
    #[arg(long)]
    dt: Option<f64>,

    /// Number of integration steps.
    #[arg(long)]
    steps: Option<usize>,

    /// Base seed of the counter random streams.
    #[arg(long)]
    seed: Option<u64>,
}

impl ParamArgs {
    fn resolve(&self) -> Result<ModelParams> {
        let mut p = match &self.config {
            Some(path) => ModelParams::from_config_file(path)?,
            None => ModelParams::default(),
        };
        if self.a.is_some() || self.b.is_some() {
            if !(p.alpha > 0.0 && p.alpha < 1.0) {
                return Err(Error::InvalidParams(format!(
                    "--A/--B need alpha strictly inside (0, 1), got {}",
                    p.alpha
                )));
            }
            if let Some(a) = self.a {
                p.theta12 = a / (1.0 - p.alpha);
            }
            if let Some(b) = self.b {
                p.theta21 = -b / p.alpha;
            }
        }
        if let Some(sigma) = self.sigma {
            p.sigma = sigma;
        }
        if let Some(n) = self.n {
            let n1 = (p.alpha * n as f64).round() as usize;
            if n1 == 0 || n1 >= n {
                return Err(Error::InvalidParams(format!(
                    "--n {n} leaves an empty population at alpha = {}",
                    p.alpha
                )));
            }
            p.n1 = n1;
            p.n2 = n - n1;
        }
        if let Some(dt) = self.dt {
            p.dt = dt;
        }
        if let Some(steps) = self.steps {
            p.steps = steps;
        }
        if let Some(seed) = self.seed {
            p.seed = seed;
        }
        p.validate()?;
        Ok(p)
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    params: ParamArgs,

    /// Start every particle of both populations at this value.
    #[arg(long, default_value_t = 0.8, allow_negative_numbers = true)]
    ic_value: f64,

    /// Record the empirical means every this many steps.
    #[arg(long, default_value_t = 1)]
    stride: usize,

    /// Output trajectory CSV (t,m1,m2).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FixedPointsArgs {
    /// Coupling of population one to population two.
    #[arg(long = "A", value_name = "A", allow_negative_numbers = true)]
    a: f64,

    /// Repulsion of population two from population one.
    #[arg(long = "B", value_name = "B", allow_negative_numbers = true)]
    b: f64,

    /// Print the full report as JSON.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct PhasePortraitArgs {
    #[arg(long = "A", value_name = "A", allow_negative_numbers = true)]
    a: f64,

    #[arg(long = "B", value_name = "B", allow_negative_numbers = true)]
    b: f64,

    /// Square window "lo,hi" used for both coordinates.
    #[arg(long, default_value = "-2,2", allow_hyphen_values = true)]
    window: String,

    /// Lattice resolution per axis.
    #[arg(long, default_value_t = 40)]
    res: usize,

    /// Output field CSV (x,y,dx,dy,magnitude).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FpArgs {
    #[command(flatten)]
    params: ParamArgs,

    /// Domain half-width.
    #[arg(long = "L", value_name = "L", default_value_t = 4.0)]
    l: f64,

    /// Number of mesh cells.
    #[arg(long, default_value_t = 800)]
    cells: usize,

    /// Integration horizon.
    #[arg(long = "T", value_name = "T", default_value_t = 200.0)]
    t_end: f64,

    /// Output sampling interval for the mean curves.
    #[arg(long, default_value_t = 0.05)]
    dt_out: f64,

    /// Keep a density snapshot "every=K" output samples.
    #[arg(long)]
    snapshots: Option<String>,

    /// Gaussian initial profile "center,sd" shared by both densities.
    #[arg(long, default_value = "0.8,0.05", allow_hyphen_values = true)]
    ic: String,

    /// Output CSV for the mean curves; snapshots land next to it.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct MomentsArgs {
    #[command(flatten)]
    params: ParamArgs,

    /// Integration horizon.
    #[arg(long = "T", value_name = "T", default_value_t = 500.0)]
    t_end: f64,

    /// Runge-Kutta step.
    #[arg(long, default_value_t = 0.01)]
    dt_ode: f64,

    /// Initial state "m1,m2,v1,v2".
    #[arg(long, default_value = "0.8,0.8,0,0", allow_hyphen_values = true)]
    init: String,

    /// Output trajectory CSV (t,m1,m2,v1,v2).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct HopfArgs {
    #[command(flatten)]
    params: ParamArgs,

    /// Lower end of the sigma grid.
    #[arg(long, default_value_t = 0.02)]
    sigma_lo: f64,

    /// Upper end of the sigma grid.
    #[arg(long, default_value_t = 3.0)]
    sigma_hi: f64,

    /// Grid size.
    #[arg(long, default_value_t = 300)]
    points: usize,

    /// Output CSV (sigma,re_l1,im_l1,re_l2,im_l2,l3,l4).
    #[arg(long)]
    out: Option<PathBuf>,

    /// Print the summary as JSON.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct TildeErrorArgs {
    #[command(flatten)]
    params: ParamArgs,

    /// Comma-separated noise levels.
    #[arg(long, default_value = "0.025,0.05,0.1,0.2")]
    sigma_list: String,

    /// Replica pairs per noise level.
    #[arg(long, default_value_t = 200)]
    replicas: usize,

    /// Horizon of each replica path.
    #[arg(long = "T", value_name = "T", default_value_t = 1.0)]
    t_end: f64,

    /// Monte Carlo copies behind the self-consistent means.
    #[arg(long, default_value_t = tilde::TILDE_PICARD_COPIES)]
    picard_copies: usize,

    /// Output CSV (sigma,mean_error,stderr).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ChaosArgs {
    #[command(flatten)]
    params: ParamArgs,

    /// Horizon of each replica path.
    #[arg(long = "T", value_name = "T", default_value_t = 1.0)]
    t_end: f64,

    /// Comma-separated system sizes (even, at least 2).
    #[arg(long, default_value = "10,40,160,640")]
    n_list: String,

    /// Replicas per system size.
    #[arg(long, default_value_t = 200)]
    replicas: usize,

    /// Monte Carlo copies behind the limiting means.
    #[arg(long, default_value_t = DEFAULT_PICARD_COPIES)]
    picard_copies: usize,

    /// Output CSV (N,mean_error,stderr).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Poincare,
    Dft,
}

#[derive(Args)]
struct PeriodArgs {
    /// Input trajectory CSV.
    #[arg(long = "in")]
    input: PathBuf,

    /// Period estimator.
    #[arg(long, value_enum, default_value_t = MethodArg::Poincare)]
    method: MethodArg,

    /// Initial stretch to discard: a fraction of the horizon when below 1,
    /// absolute time units otherwise.
    #[arg(long, default_value_t = 0.1)]
    burn_in: f64,

    /// Print the estimate as JSON.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct SpectrumArgs {
    /// Glob pattern selecting the replica trajectory CSVs.
    #[arg(long = "glob")]
    pattern: String,

    /// Initial stretch to discard: a fraction of the horizon when below 1,
    /// absolute time units otherwise.
    #[arg(long, default_value_t = 0.1)]
    burn_in: f64,

    /// Output spectrum CSV (freq,power).
    #[arg(long)]
    out: PathBuf,

    /// Print the period summary as JSON.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct PresetArgs {
    /// Preset to run (see --list).
    #[arg(long)]
    name: Option<String>,

    /// Print the preset catalog and exit.
    #[arg(long)]
    list: bool,

    /// Seed recorded in the manifest and used by every run.
    #[arg(long, default_value_t = 1)]
    seed: u64,

    /// Workload size: "desk" or "full".
    #[arg(long, default_value = "desk")]
    scale: String,

    /// Output root; defaults to $FRUSTRATED_DIFFUSIONS_OUT, then ".".
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    /// Every column of each trajectory against time.
    Series,
    /// (m1, m2) orbits, optionally with the planar equilibria.
    Phase,
    /// freq,power curves.
    Spectrum,
}

#[derive(Args)]
struct PlotArgs {
    /// Figure type.
    #[arg(long, value_enum, default_value_t = KindArg::Series)]
    kind: KindArg,

    /// Input CSV (repeat for several curves).
    #[arg(long = "in", required = true)]
    inputs: Vec<PathBuf>,

    /// Output SVG path.
    #[arg(long)]
    out: PathBuf,

    /// Figure title.
    #[arg(long)]
    title: Option<String>,

    /// Overlay the equilibria of this planar system (phase figures).
    #[arg(long = "A", value_name = "A", allow_negative_numbers = true)]
    a: Option<f64>,

    /// Overlay the equilibria of this planar system (phase figures).
    #[arg(long = "B", value_name = "B", allow_negative_numbers = true)]
    b: Option<f64>,
}

fn main() {
    // Die quietly when the consumer of a pipe goes away (| head, | less).
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    if let Err(e) = run(cli.command) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Simulate(a) => run_simulate(a),
        Command::FixedPoints(a) => run_fixed_points(a),
        Command::PhasePortrait(a) => run_phase_portrait(a),
        Command::Fp(a) => run_fp(a),
        Command::Moments(a) => run_moments(a),
        Command::Hopf(a) => run_hopf(a),
        Command::TildeError(a) => run_tilde_error(a),
        Command::Chaos(a) => run_chaos(a),
        Command::Period(a) => run_period(a),
        Command::Spectrum(a) => run_spectrum(a),
        Command::Preset(a) => run_preset_cmd(a),
        Command::Plot(a) => run_plot(a),
    }
}

fn run_simulate(args: SimulateArgs) -> Result<()> {
    let p = args.params.resolve()?;
    if args.stride == 0 {
        return Err(Error::InvalidParams("--stride must be at least 1".into()));
    }
    let ic = InitialCondition::Uniform {
        x0: args.ic_value,
        y0: args.ic_value,
    };
    let run = simulate_particles(&p, &ic, args.stride)?;
    run.trajectory.write_csv(&args.out)?;
    let last = run.trajectory.time(run.trajectory.len().saturating_sub(1));
    println!(
        "wrote {} ({} samples, t in [0, {last}], N = {})",
        args.out.display(),
        run.trajectory.len(),
        p.n()
    );
    Ok(())
}

fn run_fixed_points(args: FixedPointsArgs) -> Result<()> {
    let report = phase::find_equilibria(args.a, args.b)?;
    if args.json {
        println!("{}", to_pretty(&report)?);
        return Ok(());
    }
    println!(
        "A = {}, B = {}: gamma = {:.6}, regime {}, within scope: {}",
        report.a,
        report.b,
        report.gamma,
        kebab(&report.regime),
        report.within_hypothesis
    );
    for eq in &report.equilibria {
        println!(
            "  ({:>9.6}, {:>9.6})  {:<16} lambda = {}, {}",
            eq.point.0,
            eq.point.1,
            kebab(&eq.kind),
            fmt_eig(eq.eigenvalues[0]),
            fmt_eig(eq.eigenvalues[1])
        );
    }
    Ok(())
}

fn run_phase_portrait(args: PhasePortraitArgs) -> Result<()> {
    let (lo, hi) = parse_pair(&args.window, "--window")?;
    let field = phase::sample_field(args.a, args.b, (lo, hi, lo, hi), args.res)?;
    let mut csv = String::from("x,y,dx,dy,magnitude\n");
    for (iy, &y) in field.ys.iter().enumerate() {
        for (ix, &x) in field.xs.iter().enumerate() {
            let k = iy * field.xs.len() + ix;
            push_row(
                &mut csv,
                &[x, y, field.dx[k], field.dy[k], field.magnitude[k]],
            );
        }
    }
    write_text(&args.out, &csv)?;
    println!(
        "wrote {} ({} lattice points on [{lo}, {hi}]^2)",
        args.out.display(),
        field.xs.len() * field.ys.len()
    );
    Ok(())
}

fn run_fp(args: FpArgs) -> Result<()> {
    let p = args.params.resolve()?;
    let every = match &args.snapshots {
        Some(s) => parse_every(s)?,
        None => 0,
    };
    let (center, sd) = parse_pair(&args.ic, "--ic")?;
    let opts = FpOptions {
        l: args.l,
        cells: args.cells,
        t_end: args.t_end,
        dt_out: args.dt_out,
        snapshot_every: every,
    };
    let sol = solve_fp(&p, &FpInit::Gaussian { center, sd }, &opts)?;
    sol.means.write_csv(&args.out)?;
    for (k, d) in sol.snapshots.iter().enumerate() {
        write_density(&sibling(&args.out, &format!("snap-{k:04}.csv")), d)?;
    }
    let crossings = section_crossings(&sol.means, 0.0);
    let returns = crossings.len().saturating_sub(1);
    print!(
        "wrote {} ({} samples, {} snapshots, {returns} section returns",
        args.out.display(),
        sol.means.len(),
        sol.snapshots.len()
    );
    if let Some(d) = sol.snapshots.last() {
        let h = d.h();
        let mass = |q: &[f64]| (q.iter().sum::<f64>() * h - 1.0).abs();
        print!(", mass error {:.3e}", mass(&d.q1).max(mass(&d.q2)));
    }
    println!(")");
    Ok(())
}

fn run_moments(args: MomentsArgs) -> Result<()> {
    let p = args.params.resolve()?;
    let vals = parse_list_f64(&args.init, "--init")?;
    if vals.len() != 4 {
        return Err(Error::InvalidParams(format!(
            "--init expects m1,m2,v1,v2, got {} values",
            vals.len()
        )));
    }
    let s0 = MomentState {
        m1: vals[0],
        m2: vals[1],
        v1: vals[2],
        v2: vals[3],
    };
    let traj = integrate_moments(&s0, &p, args.t_end, args.dt_ode)?;
    traj.write_csv(&args.out)?;
    let i = traj.len() - 1;
    println!(
        "wrote {} ({} samples, final state ({:.6}, {:.6}, {:.6}, {:.6}))",
        args.out.display(),
        traj.len(),
        traj.m1[i],
        traj.m2[i],
        traj.v1.as_ref().unwrap()[i],
        traj.v2.as_ref().unwrap()[i]
    );
    Ok(())
}

fn run_hopf(args: HopfArgs) -> Result<()> {
    let p = args.params.resolve()?;
    let scan = hopf_scan(&p, args.sigma_lo, args.sigma_hi, args.points)?;
    if let Some(out) = &args.out {
        let mut csv = String::from("sigma,re_l1,im_l1,re_l2,im_l2,l3,l4\n");
        for (i, &sigma) in scan.sigma_grid.iter().enumerate() {
            let e = &scan.eigen_table[i];
            push_row(
                &mut csv,
                &[sigma, e[0].0, e[0].1, e[1].0, e[1].1, e[2].0, e[3].0],
            );
        }
        write_text(out, &csv)?;
        println!(
            "wrote {} ({} grid points)",
            out.display(),
            scan.sigma_grid.len()
        );
    }
    let lambda34_max = scan
        .eigen_table
        .iter()
        .map(|e| e[2].0.max(e[3].0))
        .fold(f64::NEG_INFINITY, f64::max);
    if args.json {
        let summary = serde_json::json!({
            "a": p.a(),
            "b": p.b(),
            "sigma_lo": args.sigma_lo,
            "sigma_hi": args.sigma_hi,
            "sigma_c": scan.sigma_c,
            "lambda34_max": lambda34_max,
        });
        println!("{}", to_pretty(&summary)?);
    } else {
        match scan.sigma_c {
            Some(sc) => println!(
                "A = {}, B = {}: sigma_c = {sc:.6}, max Re lambda3/4 = {lambda34_max:.6}",
                p.a(),
                p.b()
            ),
            None => println!(
                "A = {}, B = {}: no critical noise bracketed in [{}, {}], max Re lambda3/4 = {lambda34_max:.6}",
                p.a(),
                p.b(),
                args.sigma_lo,
                args.sigma_hi
            ),
        }
    }
    Ok(())
}

fn run_tilde_error(args: TildeErrorArgs) -> Result<()> {
    let p = args.params.resolve()?;
    let sigmas = parse_list_f64(&args.sigma_list, "--sigma-list")?;
    let report = tilde_error_with(
        &p,
        &sigmas,
        args.replicas,
        args.t_end,
        args.picard_copies,
        TILDE_PICARD_TOL,
    )?;
    if let Some(out) = &args.out {
        let mut csv = String::from("sigma,mean_error,stderr\n");
        for i in 0..report.sigmas.len() {
            push_row(
                &mut csv,
                &[report.sigmas[i], report.errors[i], report.stderrs[i]],
            );
        }
        write_text(out, &csv)?;
        println!("wrote {}", out.display());
    }
    for i in 0..report.sigmas.len() {
        println!(
            "sigma = {:<8} mean error = {:.6e}  stderr = {:.6e}",
            report.sigmas[i], report.errors[i], report.stderrs[i]
        );
    }
    println!(
        "fitted log-log slope = {:.4} ({} replicas)",
        report.fitted_slope, report.replicas
    );
    Ok(())
}

fn run_chaos(args: ChaosArgs) -> Result<()> {
    let p = args.params.resolve()?;
    let n_values = parse_list_usize(&args.n_list, "--n-list")?;
    let report = chaos_error_with(
        &p,
        &n_values,
        args.replicas,
        args.t_end,
        args.picard_copies,
        DEFAULT_PICARD_TOL,
    )?;
    if let Some(out) = &args.out {
        let mut csv = String::from("N,mean_error,stderr\n");
        for i in 0..report.n_values.len() {
            let mut line = format!("{}", report.n_values[i]);
            write!(
                line,
                ",{:.16e},{:.16e}",
                report.errors[i], report.stderrs[i]
            )
            .unwrap();
            csv.push_str(&line);
            csv.push('\n');
        }
        write_text(out, &csv)?;
        println!("wrote {}", out.display());
    }
    for i in 0..report.n_values.len() {
        println!(
            "N = {:<6} mean error = {:.6e}  stderr = {:.6e}",
            report.n_values[i], report.errors[i], report.stderrs[i]
        );
    }
    println!(
        "fitted log-log slope = {:.4} ({} replicas)",
        report.fitted_slope, report.replicas
    );
    Ok(())
}

fn run_period(args: PeriodArgs) -> Result<()> {
    let traj = MeanTrajectory::read_csv(&args.input)?;
    let burn = resolve_burn_in(&traj, args.burn_in)?;
    let est = match args.method {
        MethodArg::Poincare => poincare_periods(&traj, burn)?,
        MethodArg::Dft => dft_period(std::slice::from_ref(&traj), burn)?.1,
    };
    if args.json {
        println!("{}", to_pretty(&est)?);
    } else {
        println!(
            "method = {}, mean period = {:.6}, std = {:.6}, events = {}",
            est.method, est.mean_period, est.std_period, est.n_events
        );
    }
    Ok(())
}

fn run_spectrum(args: SpectrumArgs) -> Result<()> {
    let entries = glob::glob(&args.pattern)
        .map_err(|e| Error::InvalidParams(format!("bad glob pattern {:?}: {e}", args.pattern)))?;
    let mut paths: Vec<PathBuf> = Vec::new();
    for entry in entries {
        paths.push(entry.map_err(|e| Error::Io {
            path: args.pattern.clone(),
            reason: e.to_string(),
        })?);
    }
    paths.sort();
    if paths.is_empty() {
        return Err(Error::InvalidParams(format!(
            "no files match {:?}",
            args.pattern
        )));
    }
    let mut trajs = Vec::with_capacity(paths.len());
    for path in &paths {
        trajs.push(MeanTrajectory::read_csv(path)?);
    }
    let burn = resolve_burn_in(&trajs[0], args.burn_in)?;
    let (spec, est) = dft_period(&trajs, burn)?;
    let mut csv = String::from("freq,power\n");
    for (i, &f) in spec.frequencies.iter().enumerate() {
        push_row(&mut csv, &[f, spec.power[i]]);
    }
    write_text(&args.out, &csv)?;
    if args.json {
        let summary = serde_json::json!({
            "replicas": paths.len(),
            "peak_frequency": spec.peak_frequency,
            "mean_period": est.mean_period,
            "std_period": est.std_period,
        });
        println!("{}", to_pretty(&summary)?);
    } else {
        println!(
            "wrote {} ({} replicas, peak frequency {:.6}, period {:.6} +- {:.6})",
            args.out.display(),
            paths.len(),
            spec.peak_frequency,
            est.mean_period,
            est.std_period
        );
    }
    Ok(())
}

fn run_preset_cmd(args: PresetArgs) -> Result<()> {
    if args.list {
        for (name, blurb) in PRESETS {
            println!("{name:<15} {blurb}");
        }
        return Ok(());
    }
    let name = args.name.as_deref().ok_or_else(|| {
        Error::InvalidParams("pass --name <preset> or --list to see the catalog".into())
    })?;
    let scale = Scale::parse(&args.scale)?;
    let out_root = match args.out {
        Some(dir) => dir,
        None => std::env::var_os("FRUSTRATED_DIFFUSIONS_OUT")
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from(".")),
    };
    let output = run_preset(name, args.seed, scale, &out_root)?;
    println!(
        "preset {name} ({}, seed {}) -> {} ({} files)",
        scale.label(),
        args.seed,
        output.dir.display(),
        output.files.len()
    );
    println!("{}", to_pretty(&output.report)?);
    Ok(())
}

fn run_plot(args: PlotArgs) -> Result<()> {
    let svg = match args.kind {
        KindArg::Series => {
            let title = args.title.as_deref().unwrap_or("mean trajectories");
            let spec = PlotSpec::titled(title, "t", "value");
            let single = args.inputs.len() == 1;
            let mut series = Vec::new();
            for path in &args.inputs {
                let traj = MeanTrajectory::read_csv(path)?;
                let t: Vec<f64> = (0..traj.len()).map(|i| traj.time(i)).collect();
                let label = |col: &str| {
                    if single {
                        col.to_string()
                    } else {
                        format!("{} {col}", stem(path))
                    }
                };
                series.push(Series::new(label("m1"), t.clone(), traj.m1.clone()));
                series.push(Series::new(label("m2"), t.clone(), traj.m2.clone()));
                if single {
                    if let (Some(v1), Some(v2)) = (&traj.v1, &traj.v2) {
                        series.push(Series::new(label("v1"), t.clone(), v1.clone()));
                        series.push(Series::new(label("v2"), t, v2.clone()));
                    }
                }
            }
            line_chart(&spec, &series)?
        }
        KindArg::Phase => {
            let title = args.title.as_deref().unwrap_or("phase plane");
            let spec = PlotSpec::titled(title, "m1", "m2");
            let mut orbits = Vec::new();
            for path in &args.inputs {
                let traj = MeanTrajectory::read_csv(path)?;
                orbits.push(Series::new(stem(path), traj.m1, traj.m2));
            }
            let report = match (args.a, args.b) {
                (Some(a), Some(b)) => Some(phase::find_equilibria(a, b)?),
                (None, None) => None,
                _ => {
                    return Err(Error::InvalidParams(
                        "equilibrium overlay needs both --A and --B".into(),
                    ))
                }
            };
            phase_plane(&spec, None, &orbits, report.as_ref())?
        }
        KindArg::Spectrum => {
            let title = args.title.as_deref().unwrap_or("averaged spectrum");
            let spec = PlotSpec::titled(title, "frequency", "power");
            let mut series = Vec::new();
            for path in &args.inputs {
                let (f, pw) = read_spectrum_csv(path)?;
                series.push(Series::new(stem(path), f, pw));
            }
            line_chart(&spec, &series)?
        }
    };
    write_text(&args.out, &svg)?;
    println!("wrote {}", args.out.display());
    Ok(())
}

/// Burn-in below 1 is a fraction of the recorded horizon, otherwise it is
/// absolute time units past the first sample.
fn resolve_burn_in(traj: &MeanTrajectory, burn_in: f64) -> Result<f64> {
    if !burn_in.is_finite() || burn_in < 0.0 {
        return Err(Error::InvalidParams(format!(
            "--burn-in must be nonnegative, got {burn_in}"
        )));
    }
    if burn_in < 1.0 {
        let horizon = traj.dt_sample * traj.len().saturating_sub(1) as f64;
        Ok(burn_in * horizon)
    } else {
        Ok(burn_in)
    }
}

fn parse_f64(s: &str, flag: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::InvalidParams(format!("{flag}: invalid real {s:?}")))
}

fn parse_pair(s: &str, flag: &str) -> Result<(f64, f64)> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        return Err(Error::InvalidParams(format!(
            "{flag} expects \"a,b\", got {s:?}"
        )));
    }
    Ok((parse_f64(parts[0], flag)?, parse_f64(parts[1], flag)?))
}

fn parse_list_f64(s: &str, flag: &str) -> Result<Vec<f64>> {
    let vals: Result<Vec<f64>> = s.split(',').map(|p| parse_f64(p, flag)).collect();
    let vals = vals?;
    if vals.is_empty() {
        return Err(Error::InvalidParams(format!("{flag} must not be empty")));
    }
    Ok(vals)
}

fn parse_list_usize(s: &str, flag: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(|p| {
            p.trim()
                .parse::<usize>()
                .map_err(|_| Error::InvalidParams(format!("{flag}: invalid count {p:?}")))
        })
        .collect()
}

fn parse_every(s: &str) -> Result<usize> {
    let k = s
        .strip_prefix("every=")
        .and_then(|v| v.trim().parse::<usize>().ok())
        .ok_or_else(|| Error::InvalidParams(format!("--snapshots expects every=K, got {s:?}")))?;
    if k == 0 {
        return Err(Error::InvalidParams(
            "--snapshots every=K needs K >= 1".into(),
        ));
    }
    Ok(k)
}

/// "freq,power" two-column CSV, as written by the spectrum subcommand.
fn read_spectrum_csv(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let parse_err = |reason: String| Error::Parse {
        path: path.display().to_string(),
        reason,
    };
    let mut lines = text.lines();
    match lines.next().map(str::trim) {
        Some("freq,power") => {}
        other => return Err(parse_err(format!("malformed header {other:?}"))),
    }
    let mut fs = Vec::new();
    let mut ps = Vec::new();
    for (lineno, raw) in lines.enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let mut cols = line.split(',');
        let mut cell = |name: &str| {
            cols.next()
                .and_then(|c| c.trim().parse::<f64>().ok())
                .filter(|v| v.is_finite())
                .ok_or_else(|| parse_err(format!("row {}: bad {name}", lineno + 2)))
        };
        fs.push(cell("frequency")?);
        ps.push(cell("power")?);
        if cols.next().is_some() {
            return Err(parse_err(format!("row {}: expected 2 columns", lineno + 2)));
        }
    }
    Ok((fs, ps))
}

fn write_density(path: &Path, d: &DensityPair) -> Result<()> {
    let mut csv = String::from("x,q1,q2\n");
    for i in 0..d.cells() {
        // Clamp the tiny negative cell averages the scheme can leave behind.
        push_row(&mut csv, &[d.center(i), d.q1[i].max(0.0), d.q2[i].max(0.0)]);
    }
    write_text(path, &csv)
}

/// Place `suffix` next to `base`, keeping its file stem: means.csv ->
/// means-snap-0000.csv.
fn sibling(base: &Path, suffix: &str) -> PathBuf {
    let stem = base.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    base.with_file_name(format!("{stem}-{suffix}"))
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("data")
        .to_string()
}

fn push_row(csv: &mut String, cols: &[f64]) {
    for (i, v) in cols.iter().enumerate() {
        if i > 0 {
            csv.push(',');
        }
        write!(csv, "{v:.16e}").unwrap();
    }
    csv.push('\n');
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    }
}

fn fmt_eig((re, im): (f64, f64)) -> String {
    if im.abs() < 1e-12 {
        format!("{re:.6}")
    } else {
        format!("{re:.6}{im:+.6}i")
    }
}

fn kebab<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_value(v)
        .ok()
        .and_then(|x| x.as_str().map(str::to_string))
        .unwrap_or_default()
}

fn to_pretty<T: serde::Serialize>(v: &T) -> Result<String> {
    serde_json::to_string_pretty(v)
        .map_err(|e| Error::InvalidParams(format!("serialization failure: {e}")))
}
