//! The limiting pair process and its self-consistent mean functions.
//!
//! In the many-particle limit each tagged particle solves a McKean–Vlasov
//! equation in which the empirical means m₁(t), m₂(t) are replaced by
//! deterministic functions (m_x(t), m_y(t)) that must agree with the
//! expectations of the solution itself.  `picard_means` resolves that
//! self-consistency by iterating the map "freeze the means, integrate,
//! re-read the means" until it stops moving.  `simulate_limiting_pair`
//! integrates one copy of the pair against a frozen pair of mean functions,
//! optionally with externally supplied Brownian increments so it can be
//! coupled path-by-path to a finite system.  `chaos_error` measures how fast
//! the tagged particle of the finite system approaches its limiting copy as
//! N grows.

use rayon::prelude::*;

use crate::params::ModelParams;
use crate::rng::{RngStream, IC_DRAW};
use crate::sim::{self, InitialCondition};
use crate::stats::{loglog_slope, mean_std};
use crate::summation::ExactSum;
use crate::{Error, Result};

/// Iteration cap for the self-consistency loop.
const PICARD_MAX_ITER: usize = 200;

/// Stream-id blocks for the Monte Carlo copies used inside `picard_means`.
/// They sit far above any particle id so that a chaos experiment can reuse
/// the same seed for the finite system without sharing draws with the
/// mean-function estimate.
const PICARD_X_STREAMS: u64 = 1 << 40;
const PICARD_Y_STREAMS: u64 = (1 << 40) + (1 << 39);

/// Initial law shared by every particle in the chaos experiment.
pub const CHAOS_IC_LO: f64 = 0.7;
pub const CHAOS_IC_HI: f64 = 0.9;

/// Monte Carlo settings `chaos_error` passes to `picard_means`.
pub const DEFAULT_PICARD_COPIES: usize = 100_000;
pub const DEFAULT_PICARD_TOL: f64 = 1e-4;

/// Deterministic mean functions t ↦ (m_x(t), m_y(t)) tabulated on the
/// uniform grid t_k = k·dt.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanFunctions {
    pub dt: f64,
    pub mx: Vec<f64>,
    pub my: Vec<f64>,
}

impl MeanFunctions {
    pub fn len(&self) -> usize {
        self.mx.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mx.is_empty()
    }

    pub fn horizon(&self) -> f64 {
        (self.len().saturating_sub(1)) as f64 * self.dt
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidParams(
                "mean-function grid spacing must be positive".into(),
            ));
        }
        if self.mx.is_empty() || self.mx.len() != self.my.len() {
            return Err(Error::GridMismatch(format!(
                "mean functions need equal nonzero lengths, got {} and {}",
                self.mx.len(),
                self.my.len()
            )));
        }
        if self.mx.iter().chain(self.my.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams(
                "mean functions contain non-finite values".into(),
            ));
        }
        Ok(())
    }

    /// Values at grid index `k`.
    pub fn at_step(&self, k: usize) -> (f64, f64) {
        (self.mx[k], self.my[k])
    }

    /// Piecewise-linear interpolation, clamped to the tabulated range.
    pub fn at(&self, t: f64) -> (f64, f64) {
        let last = self.len() - 1;
        if t <= 0.0 {
            return (self.mx[0], self.my[0]);
        }
        let s = t / self.dt;
        let i = (s.floor() as usize).min(last);
        if i == last {
            return (self.mx[last], self.my[last]);
        }
        let w = s - i as f64;
        (
            self.mx[i] + w * (self.mx[i + 1] - self.mx[i]),
            self.my[i] + w * (self.my[i + 1] - self.my[i]),
        )
    }
}

/// Result of the self-consistency iteration.  `residuals[i]` is the sup-norm
/// change produced by iteration i+1; the last entry is below the requested
/// tolerance.
#[derive(Debug, Clone)]
pub struct PicardOutcome {
    pub means: MeanFunctions,
    pub residuals: Vec<f64>,
    pub iterations: usize,
}

/// Initial value rule for one population of Monte Carlo copies.
#[derive(Clone, Copy)]
enum CopyIc {
    Fixed(f64),
    Iid { lo: f64, hi: f64 },
}

/// Computes the self-consistent mean functions on the grid of `p` by Picard
/// iteration.
///
/// Each iteration freezes the current guess (m_x, m_y), integrates
/// `mc_copies` Euler–Maruyama copies of each population against it, and
/// replaces the guess by the sample means.  The copies keep the same streams
/// and counters across iterations (common random numbers), so the iteration
/// is a deterministic map on mean-function space and the residual
/// sup_t max(|Δm_x|, |Δm_y|) genuinely contracts to zero rather than
/// plateauing at Monte Carlo noise.  Copies come in antithetic pairs that
/// share a stream and an initial value but flip the sign of every Gaussian
/// increment.
///
/// With `sigma == 0` all copies coincide, so `mc_copies = 1` gives the exact
/// deterministic limit flow.
pub fn picard_means(
    p: &ModelParams,
    ic: &InitialCondition,
    tol: f64,
    mc_copies: usize,
) -> Result<PicardOutcome> {
    p.validate()?;
    ic.validate()?;
    if !(tol > 0.0) || !tol.is_finite() {
        return Err(Error::InvalidParams(
            "picard tolerance must be positive".into(),
        ));
    }
    if mc_copies == 0 {
        return Err(Error::InvalidParams(
            "picard needs at least one copy".into(),
        ));
    }
    let steps = p.steps;
    let (ic_x, ic_y, guess) = match *ic {
        InitialCondition::Uniform { x0, y0 } => (CopyIc::Fixed(x0), CopyIc::Fixed(y0), (x0, y0)),
        InitialCondition::IidUniform { lo, hi } => {
            let mid = 0.5 * (lo + hi);
            (CopyIc::Iid { lo, hi }, CopyIc::Iid { lo, hi }, (mid, mid))
        }
    };
    let mut means = MeanFunctions {
        dt: p.dt,
        mx: vec![guess.0; steps + 1],
        my: vec![guess.1; steps + 1],
    };
    let (c11, c12) = (p.alpha * p.theta11, (1.0 - p.alpha) * p.theta12);
    let (c21, c22) = (p.alpha * p.theta21, (1.0 - p.alpha) * p.theta22);
    let mut residuals = Vec::new();
    for iter in 1..=PICARD_MAX_ITER {
        let mx = population_mean_path(p, &means, mc_copies, PICARD_X_STREAMS, ic_x, c11, c12)?;
        let my = population_mean_path(p, &means, mc_copies, PICARD_Y_STREAMS, ic_y, c21, c22)?;
        let res_x = sup_abs_diff(&mx, &means.mx);
        let res_y = sup_abs_diff(&my, &means.my);
        let residual = res_x.max(res_y);
        residuals.push(residual);
        means.mx = mx;
        means.my = my;
        if residual < tol {
            return Ok(PicardOutcome {
                means,
                residuals,
                iterations: iter,
            });
        }
    }
    Err(Error::NoConvergence {
        iterations: PICARD_MAX_ITER,
        residual: *residuals.last().unwrap(),
    })
}

fn sup_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Monte Carlo mean path of one population of copies driven by frozen means.
/// The copy average at every grid point is an exact sum, so the result is
/// independent of chunking and worker count.
fn population_mean_path(
    p: &ModelParams,
    means: &MeanFunctions,
    copies: usize,
    stream_base: u64,
    ic: CopyIc,
    c1: f64,
    c2: f64,
) -> Result<Vec<f64>> {
    let steps = p.steps;
    let sd = p.sigma * p.dt.sqrt();
    let chunk = copies.div_ceil(32).max(1024).min(copies);
    let n_chunks = copies.div_ceil(chunk);
    let partials: Vec<Vec<ExactSum>> = (0..n_chunks)
        .into_par_iter()
        .map(|ci| {
            let lo = ci * chunk;
            let hi = ((ci + 1) * chunk).min(copies);
            let mut sums = vec![ExactSum::new(); steps + 1];
            for c in lo..hi {
                let stream = RngStream::new(p.seed, stream_base + (c as u64 >> 1));
                let sign = if c & 1 == 1 { -1.0 } else { 1.0 };
                let mut z = match ic {
                    CopyIc::Fixed(v) => v,
                    CopyIc::Iid { lo, hi } => lo + (hi - lo) * stream.uniform(IC_DRAW),
                };
                sums[0].add(z);
                for k in 0..steps {
                    let noise = if sd != 0.0 {
                        sign * (sd * stream.normal(k as u64))
                    } else {
                        0.0
                    };
                    z = z + p.dt * sim::drift(z, means.mx[k], means.my[k], c1, c2) + noise;
                    if !z.is_finite() || z.abs() > 1e6 {
                        return Err(Error::Divergence {
                            t: (k + 1) as f64 * p.dt,
                            step: k + 1,
                            detail: format!("picard copy {c} left the stable region"),
                        });
                    }
                    sums[k + 1].add(z);
                }
            }
            Ok(sums)
        })
        .collect::<Result<_>>()?;
    let mut total = vec![ExactSum::new(); steps + 1];
    for part in &partials {
        for (acc, s) in total.iter_mut().zip(part) {
            acc.merge(s);
        }
    }
    Ok(total.iter().map(|s| s.value() / copies as f64).collect())
}

/// Where the Brownian increments of a limiting pair come from.
///
/// `Streams` draws them counter-style exactly as the particle simulation
/// does, so a pair given the streams of a tagged particle consumes
/// bit-identical noise.  `Injected` supplies raw increments Δw_k (the solver
/// multiplies by σ itself); an all-zero slice yields the deterministic flow.
pub enum BrownianSource<'a> {
    Streams { x: RngStream, y: RngStream },
    Injected { dwx: &'a [f64], dwy: &'a [f64] },
}

/// Integrates one copy of the limiting pair (x̄, ȳ) from (x0, y0) against
/// frozen mean functions, over the grid of `p`.  Returns the two paths with
/// `p.steps + 1` entries each.
///
/// When the mean-function grid coincides with the solver grid the tabulated
/// values are used directly (no interpolation), which keeps the coupling to
/// the particle system exact in floating point.
pub fn simulate_limiting_pair(
    p: &ModelParams,
    means: &MeanFunctions,
    x0: f64,
    y0: f64,
    source: BrownianSource,
) -> Result<(Vec<f64>, Vec<f64>)> {
    p.validate()?;
    means.validate()?;
    if !x0.is_finite() || !y0.is_finite() {
        return Err(Error::InvalidParams(
            "limiting pair needs finite initial values".into(),
        ));
    }
    let steps = p.steps;
    let same_grid =
        (means.dt - p.dt).abs() <= 4.0 * f64::EPSILON * p.dt.max(means.dt) && means.len() > steps;
    if !same_grid {
        let slack = 1e-9 * p.horizon().max(1.0);
        if means.horizon() + slack < p.horizon() {
            return Err(Error::GridMismatch(format!(
                "mean functions cover [0, {:.6}] but the solver needs [0, {:.6}]",
                means.horizon(),
                p.horizon()
            )));
        }
    }
    if let BrownianSource::Injected { dwx, dwy } = &source {
        if dwx.len() < steps || dwy.len() < steps {
            return Err(Error::GridMismatch(format!(
                "injected increments cover {} and {} steps, need {}",
                dwx.len(),
                dwy.len(),
                steps
            )));
        }
    }
    let sd = p.sigma * p.dt.sqrt();
    let (c11, c12) = (p.alpha * p.theta11, (1.0 - p.alpha) * p.theta12);
    let (c21, c22) = (p.alpha * p.theta21, (1.0 - p.alpha) * p.theta22);
    let mut xs = Vec::with_capacity(steps + 1);
    let mut ys = Vec::with_capacity(steps + 1);
    let (mut x, mut y) = (x0, y0);
    xs.push(x);
    ys.push(y);
    for k in 0..steps {
        let (mxk, myk) = if same_grid {
            means.at_step(k)
        } else {
            means.at(k as f64 * p.dt)
        };
        let (nx, ny) = match &source {
            BrownianSource::Streams { x: sx, y: sy } => {
                if sd != 0.0 {
                    (sd * sx.normal(k as u64), sd * sy.normal(k as u64))
                } else {
                    (0.0, 0.0)
                }
            }
            BrownianSource::Injected { dwx, dwy } => (p.sigma * dwx[k], p.sigma * dwy[k]),
        };
        x = x + p.dt * sim::drift(x, mxk, myk, c11, c12) + nx;
        y = y + p.dt * sim::drift(y, mxk, myk, c21, c22) + ny;
        let worst = x.abs().max(y.abs());
        if !x.is_finite() || !y.is_finite() || worst > 1e6 {
            return Err(Error::Divergence {
                t: (k + 1) as f64 * p.dt,
                step: k + 1,
                detail: "limiting pair left the stable region".into(),
            });
        }
        xs.push(x);
        ys.push(y);
    }
    Ok((xs, ys))
}

/// Outcome of the propagation-of-chaos experiment: the mean coupling error
/// for each system size, its standard error over replicas, and the fitted
/// log-log slope (N^{-1/2} convergence shows up as a slope near -1/2).
#[derive(Debug, Clone)]
pub struct ChaosReport {
    pub n_values: Vec<usize>,
    pub errors: Vec<f64>,
    pub stderrs: Vec<f64>,
    pub fitted_slope: f64,
    pub replicas: usize,
}

/// `chaos_error` with the default Monte Carlo budget for the mean functions.
pub fn chaos_error(
    p: &ModelParams,
    n_values: &[usize],
    replicas: usize,
    t_end: f64,
) -> Result<ChaosReport> {
    chaos_error_with(
        p,
        n_values,
        replicas,
        t_end,
        DEFAULT_PICARD_COPIES,
        DEFAULT_PICARD_TOL,
    )
}

/// Measures the pathwise distance between a tagged particle pair and its
/// limiting copy as the system size varies.
///
/// For every N (split evenly between the populations) and every replica the
/// particle system and one limiting pair are driven by the same streams: the
/// first particle of population one shares stream 0 with x̄, the first
/// particle of population two shares stream n₁ with ȳ, and both sides start
/// from the same iid U[`CHAOS_IC_LO`, `CHAOS_IC_HI`] draws.  The error of a
/// replica is sup over grid times of |x₁ - x̄| + |y₁ - ȳ|.  Replica r uses
/// seed `p.seed + r`; the mean functions are computed once from `p.seed`.
pub fn chaos_error_with(
    p: &ModelParams,
    n_values: &[usize],
    replicas: usize,
    t_end: f64,
    picard_copies: usize,
    picard_tol: f64,
) -> Result<ChaosReport> {
    p.validate()?;
    if n_values.is_empty() {
        return Err(Error::InvalidParams(
            "chaos experiment needs at least one system size".into(),
        ));
    }
    if n_values.iter().any(|&n| n < 2 || n % 2 != 0) {
        return Err(Error::InvalidParams(
            "system sizes must be even and at least 2 so both populations are filled".into(),
        ));
    }
    if replicas < 2 {
        return Err(Error::InvalidParams(
            "chaos experiment needs at least two replicas".into(),
        ));
    }
    if !(t_end > 0.0) || !t_end.is_finite() {
        return Err(Error::InvalidParams(
            "chaos horizon must be positive".into(),
        ));
    }
    let steps = (t_end / p.dt).round() as usize;
    if steps == 0 {
        return Err(Error::InvalidParams(
            "chaos horizon shorter than one step".into(),
        ));
    }
    let p_lim = ModelParams { steps, ..*p };
    let ic = InitialCondition::IidUniform {
        lo: CHAOS_IC_LO,
        hi: CHAOS_IC_HI,
    };
    let means = picard_means(&p_lim, &ic, picard_tol, picard_copies)?.means;
    let mut errors = Vec::with_capacity(n_values.len());
    let mut stderrs = Vec::with_capacity(n_values.len());
    for &n in n_values {
        let half = n / 2;
        let replica_errors: Vec<f64> = (0..replicas)
            .into_par_iter()
            .map(|r| {
                let p_n = ModelParams {
                    n1: half,
                    n2: half,
                    steps,
                    seed: p.seed.wrapping_add(r as u64),
                    ..*p
                };
                let run = sim::simulate_particles(&p_n, &ic, 1)?;
                let x0 = sim::iid_draw(p_n.seed, 0, CHAOS_IC_LO, CHAOS_IC_HI);
                let y0 = sim::iid_draw(p_n.seed, half as u64, CHAOS_IC_LO, CHAOS_IC_HI);
                let source = BrownianSource::Streams {
                    x: RngStream::new(p_n.seed, 0),
                    y: RngStream::new(p_n.seed, half as u64),
                };
                let (lx, ly) = simulate_limiting_pair(&p_n, &means, x0, y0, source)?;
                let err = run
                    .tagged_x
                    .iter()
                    .zip(&run.tagged_y)
                    .zip(lx.iter().zip(&ly))
                    .map(|((tx, ty), (bx, by))| (tx - bx).abs() + (ty - by).abs())
                    .fold(0.0, f64::max);
                Ok(err)
            })
            .collect::<Result<_>>()?;
        let (mean, std) = mean_std(&replica_errors);
        errors.push(mean);
        stderrs.push(std / (replicas as f64).sqrt());
    }
    let xs: Vec<f64> = n_values.iter().map(|&n| n as f64).collect();
    let fitted_slope = loglog_slope(&xs, &errors);
    Ok(ChaosReport {
        n_values: n_values.to_vec(),
        errors,
        stderrs,
        fitted_slope,
        replicas,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase::planar_rk4;

    fn quiet_params(sigma: f64, dt: f64, steps: usize) -> ModelParams {
        let mut p = ModelParams::from_ab(2.0, 2.5, sigma);
        p.dt = dt;
        p.steps = steps;
        p
    }

    #[test]
    fn zero_noise_fixed_point_matches_planar_integration() {
        let p = quiet_params(0.0, 0.001, 5000);
        let ic = InitialCondition::Uniform { x0: 0.8, y0: 0.8 };
        let out = picard_means(&p, &ic, 1e-10, 1).unwrap();
        let oracle = planar_rk4(0.8, 0.8, p.a(), p.b(), p.dt, p.steps);
        let mut sup = 0.0f64;
        for (k, &(ox, oy)) in oracle.iter().enumerate() {
            sup = sup
                .max((out.means.mx[k] - ox).abs())
                .max((out.means.my[k] - oy).abs());
        }
        assert!(sup <= 1e-4, "Euler limit flow vs RK4 deviates by {sup:.3e}");
    }

    #[test]
    fn zero_coupling_decouples_the_populations() {
        let mut p = quiet_params(0.0, 0.005, 1000);
        p.theta11 = 0.0;
        p.theta12 = 0.0;
        p.theta21 = 0.0;
        p.theta22 = 0.0;
        let first = picard_means(
            &p,
            &InitialCondition::Uniform { x0: 0.9, y0: 0.6 },
            1e-12,
            1,
        )
        .unwrap();
        let second = picard_means(
            &p,
            &InitialCondition::Uniform { x0: 0.9, y0: -0.4 },
            1e-12,
            1,
        )
        .unwrap();
        assert_eq!(
            first.means.mx, second.means.mx,
            "m_x must not see the other population"
        );
        // With the interaction off, the very first pass already integrates the
        // closed single-well flow, so the second pass reproduces it exactly.
        assert_eq!(first.iterations, 2);
        let tail = *first.means.mx.last().unwrap();
        assert!(
            (tail - 1.0).abs() < 1e-3,
            "decoupled mean should settle near 1, got {tail}"
        );
    }

    #[test]
    fn residuals_shrink_monotonically_after_the_first_pass() {
        let mut p = quiet_params(0.5, 0.005, 200);
        p.seed = 11;
        let ic = InitialCondition::IidUniform { lo: 0.7, hi: 0.9 };
        let out = picard_means(&p, &ic, 1e-4, 20_000).unwrap();
        assert!(
            out.residuals.len() >= 3,
            "expected several iterations, got {:?}",
            out.residuals
        );
        for w in out.residuals[1..].windows(2) {
            assert!(
                w[1] <= w[0],
                "residual rose from {:.3e} to {:.3e}",
                w[0],
                w[1]
            );
        }
        assert!(*out.residuals.last().unwrap() < 1e-4);
    }

    #[test]
    fn converged_means_are_a_fixed_point_of_the_pair_solver() {
        let p = quiet_params(0.0, 0.005, 1000);
        let ic = InitialCondition::Uniform { x0: 0.8, y0: 0.8 };
        let out = picard_means(&p, &ic, 1e-12, 1).unwrap();
        let src = BrownianSource::Streams {
            x: RngStream::new(p.seed, 0),
            y: RngStream::new(p.seed, 1),
        };
        let (xs, ys) = simulate_limiting_pair(&p, &out.means, 0.8, 0.8, src).unwrap();
        let sup = xs
            .iter()
            .zip(&out.means.mx)
            .chain(ys.iter().zip(&out.means.my))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(sup < 1e-9, "pair driven by its own means drifted {sup:.3e}");
    }

    #[test]
    fn injected_zero_increments_give_the_deterministic_flow() {
        let p = quiet_params(1.0, 0.01, 40);
        let means = MeanFunctions {
            dt: p.dt,
            mx: (0..=40).map(|k| 0.8 - 0.002 * k as f64).collect(),
            my: (0..=40).map(|k| 0.6 + 0.001 * k as f64).collect(),
        };
        let zeros = vec![0.0; 40];
        let (xs, ys) = simulate_limiting_pair(
            &p,
            &means,
            0.3,
            -0.2,
            BrownianSource::Injected {
                dwx: &zeros,
                dwy: &zeros,
            },
        )
        .unwrap();
        let (c11, c12) = (p.alpha * p.theta11, (1.0 - p.alpha) * p.theta12);
        let (c21, c22) = (p.alpha * p.theta21, (1.0 - p.alpha) * p.theta22);
        let (mut x, mut y) = (0.3f64, -0.2f64);
        for k in 0..40usize {
            x = x + p.dt * sim::drift(x, means.mx[k], means.my[k], c11, c12);
            y = y + p.dt * sim::drift(y, means.mx[k], means.my[k], c21, c22);
            assert_eq!(xs[k + 1], x);
            assert_eq!(ys[k + 1], y);
        }
    }

    // One particle per population makes the empirical means equal to the
    // tagged paths, so a limiting pair fed those means and the same streams
    // must reproduce the particle paths bit for bit.  This pins the stream,
    // counter, and time-index conventions shared by the two solvers.
    #[test]
    fn pair_reproduces_a_two_particle_system_exactly() {
        let mut p = quiet_params(0.4, 0.01, 50);
        p.n1 = 1;
        p.n2 = 1;
        p.seed = 5;
        let run = sim::simulate_particles(&p, &InitialCondition::Uniform { x0: 0.3, y0: -0.2 }, 1)
            .unwrap();
        let means = MeanFunctions {
            dt: p.dt,
            mx: run.trajectory.m1.clone(),
            my: run.trajectory.m2.clone(),
        };
        let src = BrownianSource::Streams {
            x: RngStream::new(p.seed, 0),
            y: RngStream::new(p.seed, 1),
        };
        let (xs, ys) = simulate_limiting_pair(&p, &means, 0.3, -0.2, src).unwrap();
        assert_eq!(xs, run.tagged_x);
        assert_eq!(ys, run.tagged_y);
    }

    #[test]
    fn short_mean_functions_are_rejected() {
        let p = quiet_params(0.5, 0.01, 100);
        let means = MeanFunctions {
            dt: 0.01,
            mx: vec![0.0; 50],
            my: vec![0.0; 50],
        };
        let src = BrownianSource::Streams {
            x: RngStream::new(1, 0),
            y: RngStream::new(1, 1),
        };
        let err = simulate_limiting_pair(&p, &means, 0.0, 0.0, src).unwrap_err();
        assert!(matches!(err, Error::GridMismatch(_)), "got {err:?}");
        let means = MeanFunctions {
            dt: 0.01,
            mx: vec![0.0; 101],
            my: vec![0.0; 101],
        };
        let err = simulate_limiting_pair(
            &p,
            &means,
            0.0,
            0.0,
            BrownianSource::Injected {
                dwx: &[0.0; 10],
                dwy: &[0.0; 10],
            },
        )
        .unwrap_err();
        assert!(matches!(err, Error::GridMismatch(_)), "got {err:?}");
    }

    #[test]
    fn interpolation_matches_tabulated_points_and_midpoints() {
        let means = MeanFunctions {
            dt: 0.5,
            mx: vec![0.0, 1.0, 3.0],
            my: vec![2.0, 2.0, -2.0],
        };
        assert_eq!(means.at(0.0), (0.0, 2.0));
        assert_eq!(means.at(0.5), (1.0, 2.0));
        let (mx, my) = means.at(0.75);
        assert!((mx - 2.0).abs() < 1e-12);
        assert!((my - 0.0).abs() < 1e-12);
        assert_eq!(means.at(5.0), (3.0, -2.0));
        assert!((means.horizon() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn independent_copies_agree_with_the_mean_functions() {
        let mut p = quiet_params(0.5, 0.005, 200);
        p.seed = 4;
        let ic = InitialCondition::Uniform { x0: 0.8, y0: 0.8 };
        let means = picard_means(&p, &ic, 1e-5, 40_000).unwrap().means;
        let copies = 10_000usize;
        let finals: Vec<(f64, f64)> = (0..copies)
            .into_par_iter()
            .map(|c| {
                let src = BrownianSource::Streams {
                    x: RngStream::new(777, c as u64),
                    y: RngStream::new(777, (copies + c) as u64),
                };
                let (xs, ys) = simulate_limiting_pair(&p, &means, 0.8, 0.8, src).unwrap();
                (*xs.last().unwrap(), *ys.last().unwrap())
            })
            .collect();
        let xf: Vec<f64> = finals.iter().map(|f| f.0).collect();
        let yf: Vec<f64> = finals.iter().map(|f| f.1).collect();
        let (mx, sx) = mean_std(&xf);
        let (my, sy) = mean_std(&yf);
        let se_x = sx / (copies as f64).sqrt();
        let se_y = sy / (copies as f64).sqrt();
        let dx = (mx - means.mx.last().unwrap()).abs();
        let dy = (my - means.my.last().unwrap()).abs();
        assert!(
            dx <= 3.0 * se_x,
            "x mean off by {dx:.4e} vs 3se {:.4e}",
            3.0 * se_x
        );
        assert!(
            dy <= 3.0 * se_y,
            "y mean off by {dy:.4e} vs 3se {:.4e}",
            3.0 * se_y
        );
    }

    #[test]
    fn chaos_report_is_deterministic_and_positive() {
        let mut p = quiet_params(0.5, 0.01, 1);
        p.seed = 9;
        let first = chaos_error_with(&p, &[4, 16], 3, 0.5, 2000, 1e-3).unwrap();
        let second = chaos_error_with(&p, &[4, 16], 3, 0.5, 2000, 1e-3).unwrap();
        assert_eq!(first.errors, second.errors);
        assert_eq!(first.stderrs, second.stderrs);
        assert_eq!(first.fitted_slope, second.fitted_slope);
        assert!(
            first.errors.iter().all(|&e| e > 0.0),
            "coupling errors must be positive"
        );
        assert_eq!(first.replicas, 3);
    }

    #[test]
    fn chaos_rejects_odd_sizes_and_single_replicas() {
        let p = quiet_params(0.5, 0.01, 1);
        assert!(matches!(
            chaos_error_with(&p, &[5, 16], 4, 0.5, 1000, 1e-3),
            Err(Error::InvalidParams(_))
        ));
        assert!(matches!(
            chaos_error_with(&p, &[4, 16], 1, 0.5, 1000, 1e-3),
            Err(Error::InvalidParams(_))
        ));
        assert!(matches!(
            chaos_error_with(&p, &[], 4, 0.5, 1000, 1e-3),
            Err(Error::InvalidParams(_))
        ));
    }

    #[test]
    fn coupling_error_shrinks_at_the_square_root_rate() {
        let mut p = quiet_params(0.5, 0.005, 1);
        p.seed = 21;
        let report = chaos_error_with(&p, &[8, 32, 128], 80, 1.0, 20_000, 1e-4).unwrap();
        assert!(
            (report.fitted_slope + 0.5).abs() < 0.2,
            "slope {:.3} strays from -1/2; errors {:?}",
            report.fitted_slope,
            report.errors
        );
        let mut inversions = 0;
        for i in 0..report.errors.len() - 1 {
            let slack = 2.0 * (report.stderrs[i] + report.stderrs[i + 1]);
            if report.errors[i + 1] > report.errors[i] + slack {
                inversions += 1;
            }
        }
        assert!(inversions <= 1, "errors {:?} rise too often", report.errors);
    }
}
