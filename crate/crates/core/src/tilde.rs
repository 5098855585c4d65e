//! Gaussian fluctuation processes around the moment system.
//!
//! The small-noise picture writes the limiting pair as x̄ ≈ m₁ + σz₁,
//! ȳ ≈ m₂ + σz₂ where (m, v) solve the moment closure and the centered
//! processes z₁, z₂ solve linear SDEs with unit diffusion whose damping
//! tracks the closure state:
//!
//! dz₁ = (1 − αθ₁₁ − (1−α)θ₁₂ − 3(v₁ + m₁²)) z₁ dt + dw₁,
//! dz₂ = (1 − αθ₂₁ − (1−α)θ₂₂ − 3(v₂ + m₂²)) z₂ dt + dw₂.
//!
//! `simulate_tilde` integrates these against a tabulated moment trajectory;
//! `tilde_error` drives a reconstructed path and a limiting pair with the
//! same Brownian increments and measures their distance as σ shrinks, which
//! should fall off like σ².

use rayon::prelude::*;

use crate::limiting::{picard_means, simulate_limiting_pair, BrownianSource};
use crate::moments::{moment_rhs, MomentState};
use crate::params::ModelParams;
use crate::rng::RngStream;
use crate::sim::InitialCondition;
use crate::stats::{loglog_slope, mean_std};
use crate::trajectory::MeanTrajectory;
use crate::{Error, Result};

/// Common starting point for the σ²-scaling experiment: both populations at
/// the right well mouth with zero variance.
pub const TILDE_IC: f64 = 0.8;

/// σ grid on which the scaling experiment is usually run.
pub const DEFAULT_TILDE_SIGMAS: [f64; 4] = [0.025, 0.05, 0.1, 0.2];

/// Monte Carlo settings `tilde_error` passes to `picard_means`.  The
/// tolerance is far below the smallest error being measured so the mean
/// functions never become the bottleneck of the scaling fit.
pub const TILDE_PICARD_COPIES: usize = 20_000;
pub const TILDE_PICARD_TOL: f64 = 1e-8;

/// Sample paths of the centered processes and the reconstructed pair
/// x̃ = m₁ + σz₁, ỹ = m₂ + σz₂ on the grid t_k = k·dt.
#[derive(Debug, Clone)]
pub struct TildePath {
    pub t0: f64,
    pub dt: f64,
    pub z1: Vec<f64>,
    pub z2: Vec<f64>,
    pub xt: Vec<f64>,
    pub yt: Vec<f64>,
}

/// Euler–Maruyama integration of the centered processes from z₁(0)=z₂(0)=0
/// against a tabulated moment trajectory, over the grid of `p`.
///
/// The moment trajectory must carry variance columns, start at t = 0, and
/// cover the horizon of `p`; when its grid coincides with the solver grid
/// the samples are used directly, otherwise they are interpolated linearly.
/// `Injected` increments are consumed unscaled because the z processes have
/// unit diffusion; `Streams` draws √dt·ξ exactly as the other solvers do,
/// so a tilde path given the streams of a limiting pair rides the same
/// noise.
pub fn simulate_tilde(
    p: &ModelParams,
    moments: &MeanTrajectory,
    source: BrownianSource,
) -> Result<TildePath> {
    p.validate()?;
    moments.validate()?;
    if !moments.has_variances() {
        return Err(Error::InvalidParams(
            "tilde process needs a moment trajectory with variance columns".into(),
        ));
    }
    if moments.t0 != 0.0 {
        return Err(Error::GridMismatch(format!(
            "moment trajectory starts at t = {}, the tilde process starts at t = 0",
            moments.t0
        )));
    }
    let steps = p.steps;
    let last = moments.len() - 1;
    let same_grid = (moments.dt_sample - p.dt).abs()
        <= 4.0 * f64::EPSILON * p.dt.max(moments.dt_sample)
        && moments.len() > steps;
    if !same_grid {
        let slack = 1e-9 * p.horizon().max(1.0);
        if moments.time(last) + slack < p.horizon() || last == 0 {
            return Err(Error::GridMismatch(format!(
                "moment trajectory covers [0, {:.6}] but the solver needs [0, {:.6}]",
                moments.time(last),
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
    let v1s = moments.v1.as_ref().unwrap();
    let v2s = moments.v2.as_ref().unwrap();
    let sample = |k: usize| -> (f64, f64, f64, f64) {
        if same_grid {
            return (moments.m1[k], moments.m2[k], v1s[k], v2s[k]);
        }
        let s = k as f64 * p.dt / moments.dt_sample;
        let i = (s.floor() as usize).min(last - 1);
        let w = (s - i as f64).clamp(0.0, 1.0);
        (
            moments.m1[i] + w * (moments.m1[i + 1] - moments.m1[i]),
            moments.m2[i] + w * (moments.m2[i + 1] - moments.m2[i]),
            v1s[i] + w * (v1s[i + 1] - v1s[i]),
            v2s[i] + w * (v2s[i + 1] - v2s[i]),
        )
    };
    let g1 = 1.0 - p.alpha * p.theta11 - (1.0 - p.alpha) * p.theta12;
    let g2 = 1.0 - p.alpha * p.theta21 - (1.0 - p.alpha) * p.theta22;
    let sqrt_dt = p.dt.sqrt();
    let (mut z1, mut z2) = (0.0f64, 0.0f64);
    let mut z1s = Vec::with_capacity(steps + 1);
    let mut z2s = Vec::with_capacity(steps + 1);
    z1s.push(z1);
    z2s.push(z2);
    for k in 0..steps {
        let (m1k, m2k, v1k, v2k) = sample(k);
        let (dw1, dw2) = match &source {
            BrownianSource::Streams { x, y } => {
                (sqrt_dt * x.normal(k as u64), sqrt_dt * y.normal(k as u64))
            }
            BrownianSource::Injected { dwx, dwy } => (dwx[k], dwy[k]),
        };
        z1 = z1 + p.dt * ((g1 - 3.0 * (v1k + m1k * m1k)) * z1) + dw1;
        z2 = z2 + p.dt * ((g2 - 3.0 * (v2k + m2k * m2k)) * z2) + dw2;
        if !z1.is_finite() || !z2.is_finite() || z1.abs().max(z2.abs()) > 1e6 {
            return Err(Error::Divergence {
                t: (k + 1) as f64 * p.dt,
                step: k + 1,
                detail: "centered process left the stable region".into(),
            });
        }
        z1s.push(z1);
        z2s.push(z2);
    }
    let mut xt = Vec::with_capacity(steps + 1);
    let mut yt = Vec::with_capacity(steps + 1);
    for k in 0..=steps {
        let (m1k, m2k, _, _) = sample(k);
        xt.push(m1k + p.sigma * z1s[k]);
        yt.push(m2k + p.sigma * z2s[k]);
    }
    Ok(TildePath {
        t0: 0.0,
        dt: p.dt,
        z1: z1s,
        z2: z2s,
        xt,
        yt,
    })
}

/// Forward-Euler integration of the moment closure on the grid of `p`.
/// The σ²-scaling experiment uses this instead of the Runge–Kutta driver so
/// that the reconstruction and the Euler–Maruyama reference pair share one
/// discretization and their deterministic parts cancel exactly as σ → 0.
fn euler_moments(s0: &MomentState, p: &ModelParams, steps: usize) -> Result<MeanTrajectory> {
    let mut traj = MeanTrajectory::with_variances(0.0, p.dt);
    let mut s = *s0;
    traj.push_with_v(s.m1, s.m2, s.v1, s.v2);
    for k in 0..steps {
        let d = moment_rhs(&s, p);
        s = MomentState {
            m1: s.m1 + p.dt * d.m1,
            m2: s.m2 + p.dt * d.m2,
            v1: s.v1 + p.dt * d.v1,
            v2: s.v2 + p.dt * d.v2,
        };
        let worst = s.m1.abs().max(s.m2.abs()).max(s.v1.abs()).max(s.v2.abs());
        if !worst.is_finite() || worst > 1e6 {
            return Err(Error::Divergence {
                t: (k + 1) as f64 * p.dt,
                step: k + 1,
                detail: "moment closure left the stable region".into(),
            });
        }
        traj.push_with_v(s.m1, s.m2, s.v1, s.v2);
    }
    Ok(traj)
}

/// Result of the σ²-scaling experiment.
#[derive(Debug, Clone)]
pub struct TildeErrorReport {
    pub sigmas: Vec<f64>,
    pub errors: Vec<f64>,
    pub stderrs: Vec<f64>,
    pub fitted_slope: f64,
    pub replicas: usize,
}

/// `tilde_error` with the default Monte Carlo budget for the mean functions.
pub fn tilde_error(
    p: &ModelParams,
    sigmas: &[f64],
    replicas: usize,
    t_end: f64,
) -> Result<TildeErrorReport> {
    tilde_error_with(
        p,
        sigmas,
        replicas,
        t_end,
        TILDE_PICARD_COPIES,
        TILDE_PICARD_TOL,
    )
}

/// Measures E[sup_{t≤T}(|x̄−x̃| + |ȳ−ỹ|)] as a function of σ and fits its
/// log-log slope, which sits near 2 when the reconstruction is accurate to
/// O(σ²).
///
/// For each σ the moment closure is integrated by forward Euler on the
/// solver grid, the limiting pair gets its self-consistent means from
/// `picard_means`, and replica r drives both solvers with streams 2r and
/// 2r+1 of `p.seed` so they consume identical Brownian increments.  Both
/// sides start deterministically at (`TILDE_IC`, `TILDE_IC`) with zero
/// variance.
pub fn tilde_error_with(
    p: &ModelParams,
    sigmas: &[f64],
    replicas: usize,
    t_end: f64,
    picard_copies: usize,
    picard_tol: f64,
) -> Result<TildeErrorReport> {
    p.validate()?;
    if sigmas.is_empty() {
        return Err(Error::InvalidParams(
            "scaling experiment needs at least one σ".into(),
        ));
    }
    if sigmas.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
        return Err(Error::InvalidParams(
            "scaling experiment needs positive σ values".into(),
        ));
    }
    if replicas < 2 {
        return Err(Error::InvalidParams(
            "scaling experiment needs at least two replicas".into(),
        ));
    }
    if !(t_end > 0.0) || !t_end.is_finite() {
        return Err(Error::InvalidParams(
            "scaling horizon must be positive".into(),
        ));
    }
    let steps = (t_end / p.dt).round() as usize;
    if steps == 0 {
        return Err(Error::InvalidParams(
            "scaling horizon shorter than one step".into(),
        ));
    }
    let mut errors = Vec::with_capacity(sigmas.len());
    let mut stderrs = Vec::with_capacity(sigmas.len());
    for &sigma in sigmas {
        let p_s = ModelParams { sigma, steps, ..*p };
        let s0 = MomentState {
            m1: TILDE_IC,
            m2: TILDE_IC,
            v1: 0.0,
            v2: 0.0,
        };
        let moments = euler_moments(&s0, &p_s, steps)?;
        let ic = InitialCondition::Uniform {
            x0: TILDE_IC,
            y0: TILDE_IC,
        };
        let means = picard_means(&p_s, &ic, picard_tol, picard_copies)?.means;
        let reps: Vec<f64> = (0..replicas)
            .into_par_iter()
            .map(|r| {
                let sx = RngStream::new(p.seed, 2 * r as u64);
                let sy = RngStream::new(p.seed, 2 * r as u64 + 1);
                let (bx, by) = simulate_limiting_pair(
                    &p_s,
                    &means,
                    TILDE_IC,
                    TILDE_IC,
                    BrownianSource::Streams { x: sx, y: sy },
                )?;
                let tp = simulate_tilde(&p_s, &moments, BrownianSource::Streams { x: sx, y: sy })?;
                let err = tp
                    .xt
                    .iter()
                    .zip(&tp.yt)
                    .zip(bx.iter().zip(&by))
                    .map(|((xt, yt), (bx, by))| (xt - bx).abs() + (yt - by).abs())
                    .fold(0.0, f64::max);
                Ok(err)
            })
            .collect::<Result<_>>()?;
        let (mean, std) = mean_std(&reps);
        errors.push(mean);
        stderrs.push(std / (replicas as f64).sqrt());
    }
    let fitted_slope = loglog_slope(sigmas, &errors);
    Ok(TildeErrorReport {
        sigmas: sigmas.to_vec(),
        errors,
        stderrs,
        fitted_slope,
        replicas,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_params(sigma: f64, dt: f64, steps: usize) -> ModelParams {
        let mut p = ModelParams::from_ab(2.0, 2.5, sigma);
        p.dt = dt;
        p.steps = steps;
        p
    }

    #[test]
    fn zero_brownian_path_collapses_to_the_means() {
        let p = base_params(0.5, 0.005, 50);
        let s0 = MomentState {
            m1: 0.8,
            m2: 0.8,
            v1: 0.0,
            v2: 0.0,
        };
        let moments = euler_moments(&s0, &p, 50).unwrap();
        let zeros = vec![0.0; 50];
        let tp = simulate_tilde(
            &p,
            &moments,
            BrownianSource::Injected {
                dwx: &zeros,
                dwy: &zeros,
            },
        )
        .unwrap();
        assert!(tp.z1.iter().chain(&tp.z2).all(|&z| z == 0.0));
        assert_eq!(tp.xt, moments.m1);
        assert_eq!(tp.yt, moments.m2);
    }

    #[test]
    fn linear_moment_interpolation_is_exact() {
        let p = base_params(0.3, 0.01, 20);
        // Tabulate affine moment curves on a finer grid; linear interpolation
        // reproduces them exactly at the solver times.
        let mut fine = MeanTrajectory::with_variances(0.0, 0.004);
        for i in 0..=55 {
            let t = 0.004 * i as f64;
            fine.push_with_v(0.3 + 0.1 * t, -0.2 + 0.05 * t, 0.2, 0.1 + 0.02 * t);
        }
        let zeros = vec![0.0; 20];
        let tp = simulate_tilde(
            &p,
            &fine,
            BrownianSource::Injected {
                dwx: &zeros,
                dwy: &zeros,
            },
        )
        .unwrap();
        for k in 0..=20usize {
            let t = 0.01 * k as f64;
            assert!((tp.xt[k] - (0.3 + 0.1 * t)).abs() < 1e-12);
            assert!((tp.yt[k] - (-0.2 + 0.05 * t)).abs() < 1e-12);
        }
    }

    #[test]
    fn replica_variance_tracks_the_moment_system() {
        let p = base_params(0.5, 0.001, 1000);
        let s0 = MomentState {
            m1: 0.8,
            m2: 0.8,
            v1: 0.0,
            v2: 0.0,
        };
        let moments = euler_moments(&s0, &p, 1000).unwrap();
        let replicas = 10_000usize;
        let finals: Vec<(f64, f64)> = (0..replicas)
            .into_par_iter()
            .map(|r| {
                let src = BrownianSource::Streams {
                    x: RngStream::new(33, 2 * r as u64),
                    y: RngStream::new(33, 2 * r as u64 + 1),
                };
                let tp = simulate_tilde(&p, &moments, src).unwrap();
                (*tp.z1.last().unwrap(), *tp.z2.last().unwrap())
            })
            .collect();
        let z1f: Vec<f64> = finals.iter().map(|f| f.0).collect();
        let z2f: Vec<f64> = finals.iter().map(|f| f.1).collect();
        let sig2 = p.sigma * p.sigma;
        let want_v1 = moments.v1.as_ref().unwrap().last().unwrap() / sig2;
        let want_v2 = moments.v2.as_ref().unwrap().last().unwrap() / sig2;
        let (_, s1) = mean_std(&z1f);
        let (_, s2) = mean_std(&z2f);
        let (var1, var2) = (s1 * s1, s2 * s2);
        // Standard error of a Gaussian sample variance: V·sqrt(2/(R-1)).
        let se1 = want_v1 * (2.0 / (replicas as f64 - 1.0)).sqrt();
        let se2 = want_v2 * (2.0 / (replicas as f64 - 1.0)).sqrt();
        assert!(
            (var1 - want_v1).abs() <= 3.0 * se1,
            "z1 variance {var1:.5} vs rescaled moment {want_v1:.5}"
        );
        assert!(
            (var2 - want_v2).abs() <= 3.0 * se2,
            "z2 variance {var2:.5} vs rescaled moment {want_v2:.5}"
        );
    }

    #[test]
    fn reconstruction_error_scales_like_sigma_squared() {
        let mut p = base_params(0.5, 0.005, 1);
        p.seed = 17;
        let report = tilde_error_with(&p, &DEFAULT_TILDE_SIGMAS, 64, 1.0, 20_000, 1e-8).unwrap();
        assert!(
            (report.fitted_slope - 2.0).abs() < 0.3,
            "slope {:.3} strays from 2; errors {:?}",
            report.fitted_slope,
            report.errors
        );
        for w in report.errors.windows(2) {
            assert!(w[0] < w[1], "error should grow with σ: {:?}", report.errors);
        }
    }

    #[test]
    fn experiment_is_deterministic() {
        let p = base_params(0.5, 0.01, 1);
        let first = tilde_error_with(&p, &[0.1, 0.2], 4, 0.5, 2000, 1e-6).unwrap();
        let second = tilde_error_with(&p, &[0.1, 0.2], 4, 0.5, 2000, 1e-6).unwrap();
        assert_eq!(first.errors, second.errors);
        assert_eq!(first.stderrs, second.stderrs);
        assert_eq!(first.fitted_slope, second.fitted_slope);
    }

    #[test]
    fn mismatched_moment_grids_are_rejected() {
        let p = base_params(0.5, 0.01, 100);
        let mut no_var = MeanTrajectory::new(0.0, 0.01);
        for _ in 0..=100 {
            no_var.push(0.1, 0.2);
        }
        let src = BrownianSource::Streams {
            x: RngStream::new(1, 0),
            y: RngStream::new(1, 1),
        };
        assert!(matches!(
            simulate_tilde(&p, &no_var, src),
            Err(Error::InvalidParams(_))
        ));
        let mut short = MeanTrajectory::with_variances(0.0, 0.01);
        for _ in 0..50 {
            short.push_with_v(0.1, 0.2, 0.0, 0.0);
        }
        let src = BrownianSource::Streams {
            x: RngStream::new(1, 0),
            y: RngStream::new(1, 1),
        };
        assert!(matches!(
            simulate_tilde(&p, &short, src),
            Err(Error::GridMismatch(_))
        ));
        let mut shifted = MeanTrajectory::with_variances(2.0, 0.01);
        for _ in 0..=100 {
            shifted.push_with_v(0.1, 0.2, 0.0, 0.0);
        }
        let src = BrownianSource::Streams {
            x: RngStream::new(1, 0),
            y: RngStream::new(1, 1),
        };
        assert!(matches!(
            simulate_tilde(&p, &shifted, src),
            Err(Error::GridMismatch(_))
        ));
        let mut fine = MeanTrajectory::with_variances(0.0, 0.01);
        for _ in 0..=100 {
            fine.push_with_v(0.1, 0.2, 0.0, 0.0);
        }
        let err = simulate_tilde(
            &p,
            &fine,
            BrownianSource::Injected {
                dwx: &[0.0; 10],
                dwy: &[0.0; 10],
            },
        )
        .unwrap_err();
        assert!(matches!(err, Error::GridMismatch(_)), "got {err:?}");
    }
}
