//! Euler–Maruyama integration of the interacting particle system.
//!
//! Population I₁ holds n₁ particles x_j, population I₂ holds n₂ particles
//! y_j; each couples to the empirical means m₁ = avg(x), m₂ = avg(y):
//!
//! ```text
//! dx_j = [−x_j³ + x_j − αθ₁₁(x_j − m₁) − (1−α)θ₁₂(x_j − m₂)] dt + σ dw_j
//! dy_j = [−y_j³ + y_j − αθ₂₁(y_j − m₁) − (1−α)θ₂₂(y_j − m₂)] dt + σ dw′_j
//! ```
//!
//! The explicit scheme evaluates both means from the pre-step state. Means
//! are reduced through [`ExactSum`], so trajectories are bit-identical
//! regardless of worker count and of how particles are laid out in memory.
//!
//! Randomness is counter-based: the particle in slot j of population I₁
//! owns stream j, slot j of population I₂ owns stream n₁ + j, and step k
//! consumes the normal draw with counter k. Any other component that wants
//! to couple to a particle's Brownian path (see `limiting`) rebuilds the
//! same stream from (seed, id) and reads the same draws.

use crate::rng::{RngStream, IC_DRAW};
use crate::summation::ExactSum;
use crate::trajectory::MeanTrajectory;
use crate::{Error, ModelParams, Result};
use rayon::prelude::*;

/// Below this population size the sweeps stay on one thread; results do not
/// depend on the choice because the mean reduction is exact.
const PAR_THRESHOLD: usize = 512;

/// Positions of every particle at a moment in time.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleState {
    pub t: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl ParticleState {
    /// Checks finiteness and that the population sizes match `p`.
    pub fn validate(&self, p: &ModelParams) -> Result<()> {
        if self.x.len() != p.n1 || self.y.len() != p.n2 {
            return Err(Error::InvalidParams(format!(
                "state holds ({}, {}) particles but params declare ({}, {})",
                self.x.len(),
                self.y.len(),
                p.n1,
                p.n2
            )));
        }
        if self.x.iter().chain(self.y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams("non-finite particle position".into()));
        }
        Ok(())
    }
}

/// How the populations start.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialCondition {
    /// Every particle of population I₁ at `x0`, of I₂ at `y0`.
    Uniform { x0: f64, y0: f64 },
    /// Independent uniform draws on [lo, hi] for every particle, taken from
    /// the particle's own stream at the reserved counter, so the values
    /// survive any consistent relabeling.
    IidUniform { lo: f64, hi: f64 },
}

impl InitialCondition {
    pub(crate) fn validate(&self) -> Result<()> {
        match *self {
            InitialCondition::Uniform { x0, y0 } => {
                if !x0.is_finite() || !y0.is_finite() {
                    return Err(Error::InvalidParams(format!(
                        "initial values must be finite, got ({x0}, {y0})"
                    )));
                }
            }
            InitialCondition::IidUniform { lo, hi } => {
                if !lo.is_finite() || !hi.is_finite() || lo > hi {
                    return Err(Error::InvalidParams(format!(
                        "initial law needs finite lo <= hi, got [{lo}, {hi}]"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Output of a full simulation.
#[derive(Debug, Clone)]
pub struct ParticleRun {
    /// Empirical means at every sample time.
    pub trajectory: MeanTrajectory,
    /// State after the final step.
    pub final_state: ParticleState,
    /// Path of the first particle of each population at the sample times,
    /// used by the propagation-of-chaos experiment.
    pub tagged_x: Vec<f64>,
    pub tagged_y: Vec<f64>,
}

/// Arithmetic means of the two populations.
pub fn empirical_means(s: &ParticleState) -> Result<(f64, f64)> {
    if s.x.is_empty() || s.y.is_empty() {
        return Err(Error::InvalidParams(
            "empirical mean of an empty population".into(),
        ));
    }
    let (m1, _, ok1) = population_stats(&s.x);
    let (m2, _, ok2) = population_stats(&s.y);
    if !ok1 || !ok2 {
        return Err(Error::InvalidParams("non-finite particle position".into()));
    }
    Ok((m1, m2))
}

/// Largest drift magnitude over all particles of both populations; a state
/// is numerically at rest when this is small.
pub fn empirical_drift_sup(s: &ParticleState, p: &ModelParams) -> Result<f64> {
    let (m1, m2) = empirical_means(s)?;
    let sup1 =
        s.x.iter()
            .map(|&z| drift(z, m1, m2, p.alpha * p.theta11, (1.0 - p.alpha) * p.theta12).abs())
            .fold(0.0f64, f64::max);
    let sup2 =
        s.y.iter()
            .map(|&z| drift(z, m1, m2, p.alpha * p.theta21, (1.0 - p.alpha) * p.theta22).abs())
            .fold(0.0f64, f64::max);
    Ok(sup1.max(sup2))
}

#[inline(always)]
pub(crate) fn drift(z: f64, m1: f64, m2: f64, c1: f64, c2: f64) -> f64 {
    -z * z * z + z - c1 * (z - m1) - c2 * (z - m2)
}

/// One explicit step from `s`, drawing the normals with counter `step`.
pub fn em_step(s: &ParticleState, p: &ModelParams, step: u64) -> Result<ParticleState> {
    p.validate()?;
    s.validate(p)?;
    let ids1: Vec<u64> = (0..p.n1 as u64).collect();
    let ids2: Vec<u64> = (p.n1 as u64..(p.n1 + p.n2) as u64).collect();
    let (m1, _, _) = population_stats(&s.x);
    let (m2, _, _) = population_stats(&s.y);
    let mut next = s.clone();
    sweep(
        &mut next.x,
        &ids1,
        p.seed,
        step,
        p.dt,
        p.sigma * p.dt.sqrt(),
        p.alpha * p.theta11,
        (1.0 - p.alpha) * p.theta12,
        m1,
        m2,
    );
    sweep(
        &mut next.y,
        &ids2,
        p.seed,
        step,
        p.dt,
        p.sigma * p.dt.sqrt(),
        p.alpha * p.theta21,
        (1.0 - p.alpha) * p.theta22,
        m1,
        m2,
    );
    next.t = s.t + p.dt;
    let bad = next
        .x
        .iter()
        .chain(next.y.iter())
        .any(|v| !v.is_finite() || v.abs() > 1e6);
    if bad {
        return Err(Error::Divergence {
            t: next.t,
            step: step as usize,
            detail: "particle position left |z| <= 1e6".into(),
        });
    }
    Ok(next)
}

/// Builds the initial state for `ic`.
pub fn initial_state(p: &ModelParams, ic: &InitialCondition) -> Result<ParticleState> {
    p.validate()?;
    ic.validate()?;
    let ids1: Vec<u64> = (0..p.n1 as u64).collect();
    let ids2: Vec<u64> = (p.n1 as u64..(p.n1 + p.n2) as u64).collect();
    let (x, y) = match *ic {
        InitialCondition::Uniform { x0, y0 } => (vec![x0; p.n1], vec![y0; p.n2]),
        InitialCondition::IidUniform { lo, hi } => (
            iid_draws(p.seed, &ids1, lo, hi),
            iid_draws(p.seed, &ids2, lo, hi),
        ),
    };
    Ok(ParticleState { t: 0.0, x, y })
}

/// Initial draw of the particle owning stream `id`; other components that
/// couple to a particle reproduce its start value through this.
pub(crate) fn iid_draw(seed: u64, id: u64, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * RngStream::new(seed, id).uniform(IC_DRAW)
}

fn iid_draws(seed: u64, ids: &[u64], lo: f64, hi: f64) -> Vec<f64> {
    ids.iter().map(|&id| iid_draw(seed, id, lo, hi)).collect()
}

/// Runs `p.steps` explicit steps from `ic`, recording the empirical means
/// (and the first particle of each population) every `sample_stride` steps.
pub fn simulate_particles(
    p: &ModelParams,
    ic: &InitialCondition,
    sample_stride: usize,
) -> Result<ParticleRun> {
    p.validate()?;
    ic.validate()?;
    let ids1: Vec<u64> = (0..p.n1 as u64).collect();
    let ids2: Vec<u64> = (p.n1 as u64..(p.n1 + p.n2) as u64).collect();
    let start = initial_state(p, ic)?;
    simulate_assigned(p, &ids1, &ids2, &start.x, &start.y, sample_stride)
}

/// Core loop with explicit slot-to-stream assignment and initial values.
/// `simulate_particles` uses the identity assignment; tests permute it to
/// exercise exchangeability, and the chaos experiment reuses the stream
/// bookkeeping.
pub(crate) fn simulate_assigned(
    p: &ModelParams,
    ids1: &[u64],
    ids2: &[u64],
    x0: &[f64],
    y0: &[f64],
    sample_stride: usize,
) -> Result<ParticleRun> {
    if sample_stride == 0 {
        return Err(Error::InvalidParams(
            "sample_stride must be at least 1".into(),
        ));
    }
    if ids1.len() != p.n1 || ids2.len() != p.n2 || x0.len() != p.n1 || y0.len() != p.n2 {
        return Err(Error::InvalidParams(
            "assignment lengths must match (n1, n2)".into(),
        ));
    }
    if p.n1 == 0 || p.n2 == 0 {
        return Err(Error::InvalidParams(
            "both populations must be non-empty".into(),
        ));
    }
    let sd = p.sigma * p.dt.sqrt();
    let (c11, c12) = (p.alpha * p.theta11, (1.0 - p.alpha) * p.theta12);
    let (c21, c22) = (p.alpha * p.theta21, (1.0 - p.alpha) * p.theta22);
    let mut xs = x0.to_vec();
    let mut ys = y0.to_vec();
    let mut traj = MeanTrajectory::new(0.0, sample_stride as f64 * p.dt);
    let mut tagged_x = Vec::new();
    let mut tagged_y = Vec::new();
    let mut step: u64 = 0;
    loop {
        let (m1, max1, ok1) = population_stats(&xs);
        let (m2, max2, ok2) = population_stats(&ys);
        if !ok1 || !ok2 || max1.max(max2) > 1e6 {
            return Err(Error::Divergence {
                t: step as f64 * p.dt,
                step: step as usize,
                detail: format!("max |position| reached {:.3e}", max1.max(max2)),
            });
        }
        if step.is_multiple_of(sample_stride as u64) {
            traj.push(m1, m2);
            tagged_x.push(xs[0]);
            tagged_y.push(ys[0]);
        }
        if step == p.steps as u64 {
            return Ok(ParticleRun {
                trajectory: traj,
                final_state: ParticleState {
                    t: step as f64 * p.dt,
                    x: xs,
                    y: ys,
                },
                tagged_x,
                tagged_y,
            });
        }
        sweep(&mut xs, ids1, p.seed, step, p.dt, sd, c11, c12, m1, m2);
        sweep(&mut ys, ids2, p.seed, step, p.dt, sd, c21, c22, m1, m2);
        step += 1;
    }
}

/// Updates one population in place.
#[allow(clippy::too_many_arguments)]
fn sweep(
    zs: &mut [f64],
    ids: &[u64],
    seed: u64,
    step: u64,
    dt: f64,
    sd: f64,
    c1: f64,
    c2: f64,
    m1: f64,
    m2: f64,
) {
    let update = |(z, &id): (&mut f64, &u64)| {
        let noise = if sd != 0.0 {
            sd * RngStream::new(seed, id).normal(step)
        } else {
            0.0
        };
        *z = *z + dt * drift(*z, m1, m2, c1, c2) + noise;
    };
    if zs.len() < PAR_THRESHOLD {
        zs.iter_mut().zip(ids.iter()).for_each(update);
    } else {
        zs.par_iter_mut().zip(ids.par_iter()).for_each(update);
    }
}

/// Exact mean, max |value|, and an all-finite flag in one pass.
fn population_stats(zs: &[f64]) -> (f64, f64, bool) {
    let fold = |acc: (ExactSum, f64, bool), &z: &f64| {
        let (mut sum, max, ok) = acc;
        if z.is_finite() {
            sum.add(z);
            (sum, max.max(z.abs()), ok)
        } else {
            (sum, max, false)
        }
    };
    let (sum, max, ok) = if zs.len() < PAR_THRESHOLD {
        zs.iter().fold((ExactSum::new(), 0.0, true), fold)
    } else {
        zs.par_iter()
            .fold(|| (ExactSum::new(), 0.0, true), fold)
            .reduce(
                || (ExactSum::new(), 0.0, true),
                |(mut sa, xa, oa), (sb, xb, ob)| {
                    sa.merge(&sb);
                    (sa, xa.max(xb), oa && ob)
                },
            )
    };
    (sum.value() / zs.len() as f64, max, ok)
}
