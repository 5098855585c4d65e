//! Period estimation for oscillating mean trajectories.
//!
//! Two estimators. The Poincaré estimator detects oriented crossings of the
//! half-line {m₂ = 0, m₁ > 0} and averages the gaps between consecutive
//! crossing times. The spectral estimator averages DFT moduli of the m₂
//! channel across replica runs and inverts the dominant frequency.

use crate::trajectory::MeanTrajectory;
use crate::{stats, Error, Result};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::Serialize;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PeriodMethod {
    Poincare,
    Dft,
}

impl fmt::Display for PeriodMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PeriodMethod::Poincare => "poincare",
            PeriodMethod::Dft => "dft",
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PeriodEstimate {
    pub method: PeriodMethod,
    pub mean_period: f64,
    pub std_period: f64,
    /// Crossing count for the Poincaré method, replica count for the DFT.
    pub n_events: usize,
}

/// Times of positive-to-negative m₂ crossings with m₁ > 0, linearly
/// interpolated between samples, starting `burn_in` time units after the
/// first sample.
///
/// Crossings are debounced with a hysteresis of a quarter of the signal's
/// standard deviation: after a counted crossing, m₂ must climb back above
/// that level before the next one counts. Without this, sampling a noisy
/// empirical mean finely registers each section passage several times and
/// the return-time statistics depend on the sample stride.
pub fn section_crossings(traj: &MeanTrajectory, burn_in: f64) -> Vec<f64> {
    let first = traj
        .m2
        .iter()
        .enumerate()
        .position(|(i, _)| traj.time(i) - traj.t0 >= burn_in)
        .unwrap_or(traj.len());
    let m2 = &traj.m2[first..];
    if m2.len() < 2 {
        return Vec::new();
    }
    let mean = m2.iter().sum::<f64>() / m2.len() as f64;
    let var = m2.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / m2.len() as f64;
    let rearm = 0.25 * var.sqrt();

    let mut times = Vec::new();
    let mut armed = false;
    for i in first..traj.len() {
        if i > first && armed && traj.m2[i - 1] > 0.0 && traj.m2[i] < 0.0 {
            let (a, b) = (traj.m2[i - 1], traj.m2[i]);
            let w = a / (a - b);
            let m1 = traj.m1[i - 1] + w * (traj.m1[i] - traj.m1[i - 1]);
            if m1 > 0.0 {
                times.push(traj.time(i - 1) + w * traj.dt_sample);
                armed = false;
            }
        }
        if traj.m2[i] >= rearm {
            armed = true;
        }
    }
    times
}

/// Mean and spread of the return time to the section {m₂ = 0, m₁ > 0}.
///
/// `burn_in` is a duration measured from the first sample; crossings before
/// it are discarded. Fewer than two crossings is reported as
/// [`Error::NoRhythm`].
pub fn poincare_periods(traj: &MeanTrajectory, burn_in: f64) -> Result<PeriodEstimate> {
    if !(burn_in >= 0.0) {
        return Err(Error::InvalidParams(format!(
            "burn_in must be >= 0, got {burn_in}"
        )));
    }
    let horizon = traj.dt_sample * traj.len().saturating_sub(1) as f64;
    if burn_in >= horizon {
        return Err(Error::InvalidParams(format!(
            "burn_in {burn_in} consumes the whole trajectory (horizon {horizon})"
        )));
    }
    let times = section_crossings(traj, burn_in);
    if times.len() < 2 {
        return Err(Error::NoRhythm(format!(
            "{} section crossing(s) after burn-in",
            times.len()
        )));
    }
    let gaps: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
    let (mean, std) = if gaps.len() == 1 {
        (gaps[0], 0.0)
    } else {
        stats::mean_std(&gaps)
    };
    Ok(PeriodEstimate {
        method: PeriodMethod::Poincare,
        mean_period: mean,
        std_period: std,
        n_events: times.len(),
    })
}

/// Poincaré statistics over replica runs.
#[derive(Debug, Clone, Serialize)]
pub struct PoincareEnsemble {
    /// Per-run mean periods, in input order.
    pub run_means: Vec<f64>,
    /// Mean of the per-run means.
    pub mean_period: f64,
    /// Spread of the per-run means.
    pub std_across_runs: f64,
    /// All return intervals pooled into one sample.
    pub pooled: PeriodEstimate,
}

pub fn poincare_ensemble(trajs: &[MeanTrajectory], burn_in: f64) -> Result<PoincareEnsemble> {
    if trajs.is_empty() {
        return Err(Error::InvalidParams(
            "ensemble needs at least one run".into(),
        ));
    }
    let mut run_means = Vec::with_capacity(trajs.len());
    let mut pooled_gaps = Vec::new();
    for traj in trajs {
        let times = section_crossings(traj, burn_in);
        if times.len() < 2 {
            return Err(Error::NoRhythm(format!(
                "one replica produced {} section crossing(s)",
                times.len()
            )));
        }
        let gaps: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
        run_means.push(gaps.iter().sum::<f64>() / gaps.len() as f64);
        pooled_gaps.extend_from_slice(&gaps);
    }
    let (mean_period, std_across_runs) = if run_means.len() == 1 {
        (run_means[0], 0.0)
    } else {
        stats::mean_std(&run_means)
    };
    let (pooled_mean, pooled_std) = if pooled_gaps.len() == 1 {
        (pooled_gaps[0], 0.0)
    } else {
        stats::mean_std(&pooled_gaps)
    };
    Ok(PoincareEnsemble {
        run_means,
        mean_period,
        std_across_runs,
        pooled: PeriodEstimate {
            method: PeriodMethod::Poincare,
            mean_period: pooled_mean,
            std_period: pooled_std,
            n_events: pooled_gaps.len() + trajs.len(),
        },
    })
}

/// One-sided averaged spectrum of the m₂ channel.
#[derive(Debug, Clone, Serialize)]
pub struct SpectrumReport {
    pub frequencies: Vec<f64>,
    pub power: Vec<f64>,
    pub peak_frequency: f64,
}

/// Averaged-modulus DFT estimate of the oscillation period.
///
/// Every trajectory is mean-subtracted (which removes the zero-frequency
/// bin), transformed with no window, and the moduli are averaged across
/// replicas in input order. The period is the reciprocal of the peak
/// frequency; the spread comes from the per-replica peak locations.
pub fn dft_period(
    trajs: &[MeanTrajectory],
    burn_in: f64,
) -> Result<(SpectrumReport, PeriodEstimate)> {
    if trajs.is_empty() {
        return Err(Error::InvalidParams(
            "dft needs at least one trajectory".into(),
        ));
    }
    let dt = trajs[0].dt_sample;
    let skip = if burn_in > 0.0 {
        (burn_in / dt).ceil() as usize
    } else {
        0
    };
    let n = trajs[0].len().saturating_sub(skip);
    if n < 4 {
        return Err(Error::InvalidParams(format!(
            "{n} samples after burn-in is too short for a spectrum"
        )));
    }
    for traj in trajs {
        if traj.len() != trajs[0].len() || (traj.dt_sample - dt).abs() > 1e-12 * dt {
            return Err(Error::GridMismatch(
                "all replicas must share length and sampling period".into(),
            ));
        }
    }
    let fft = FftPlanner::new().plan_fft_forward(n);
    let half = n / 2;
    let mut avg = vec![0.0f64; half + 1];
    let mut peak_periods = Vec::with_capacity(trajs.len());
    for traj in trajs {
        let signal = &traj.m2[skip..];
        let mean = signal.iter().sum::<f64>() / n as f64;
        let flat = signal
            .iter()
            .all(|&v| (v - mean).abs() <= 1e-12 * mean.abs().max(1.0));
        if flat {
            return Err(Error::AnalysisFailure(
                "degenerate flat signal: spectrum has no nonzero peak".into(),
            ));
        }
        let mut buf: Vec<Complex<f64>> = signal
            .iter()
            .map(|&v| Complex::new(v - mean, 0.0))
            .collect();
        fft.process(&mut buf);
        let mut best = (1usize, 0.0f64);
        for k in 1..=half {
            let m = buf[k].norm();
            avg[k] += m;
            if m > best.1 {
                best = (k, m);
            }
        }
        peak_periods.push(n as f64 * dt / best.0 as f64);
    }
    for v in avg.iter_mut() {
        *v /= trajs.len() as f64;
    }
    let peak_bin = (1..=half)
        .max_by(|&i, &j| avg[i].total_cmp(&avg[j]))
        .expect("half >= 2 because n >= 4");
    let peak_frequency = peak_bin as f64 / (n as f64 * dt);
    let frequencies: Vec<f64> = (0..=half).map(|k| k as f64 / (n as f64 * dt)).collect();
    // Reported period comes from the averaged spectrum; the spread from the
    // per-replica peak locations.
    let std_period = if peak_periods.len() == 1 {
        0.0
    } else {
        stats::mean_std(&peak_periods).1
    };
    Ok((
        SpectrumReport {
            frequencies,
            power: avg,
            peak_frequency,
        },
        PeriodEstimate {
            method: PeriodMethod::Dft,
            mean_period: 1.0 / peak_frequency,
            std_period,
            n_events: trajs.len(),
        },
    ))
}
