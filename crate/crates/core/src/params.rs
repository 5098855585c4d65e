//! Model parameterization and validation.
//!
//! All constants of the model and its discretization live in [`ModelParams`]:
//! the coupling matrix θ, the population split α = N₁/N, the noise
//! intensity σ, and the Euler–Maruyama grid (dt, steps, seed).
//!
//! The planar reduction uses the aggregated couplings
//!
//! ```text
//! A = (1 − α) θ₁₂        B = −α θ₂₁
//! ```
//!
//! which are always *derived* from the θ-parameterization, never stored, so
//! the two views cannot drift apart. In the reference regime θ₁₁ = θ₂₂ = 8,
//! α = 1/2 and both A and B are positive (θ₂₁ < 0: frustration).

use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Complete parameter set for every solver in the crate.
///
/// Fields are public; call [`ModelParams::validate`] after manual edits.
/// `n1`/`n2` may both be zero for analyses that involve no particles
/// (moment closure, Fokker–Planck, phase portraits).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Particle count of population one.
    pub n1: usize,
    /// Particle count of population two.
    pub n2: usize,
    /// Fraction N₁/N of particles in population one, in [0, 1].
    pub alpha: f64,
    /// Intra-population coupling of population one (θ₁₁).
    pub theta11: f64,
    /// Coupling of population one toward population two (θ₁₂).
    pub theta12: f64,
    /// Coupling of population two toward population one (θ₂₁, negative in
    /// the frustrated regime).
    pub theta21: f64,
    /// Intra-population coupling of population two (θ₂₂).
    pub theta22: f64,
    /// Noise intensity σ ≥ 0.
    pub sigma: f64,
    /// Euler–Maruyama time step.
    pub dt: f64,
    /// Number of Euler–Maruyama iterations.
    pub steps: usize,
    /// Seed for all counter-based random streams.
    pub seed: u64,
}

impl ModelParams {
    /// Reference-regime parameters for given (A, B, σ): θ₁₁ = θ₂₂ = 8,
    /// α = 1/2 (so θ₁₂ = 2A, θ₂₁ = −2B), N₁ = N₂ = 500, dt = 0.005,
    /// 2·10⁵ steps, seed 1.
    pub fn from_ab(a: f64, b: f64, sigma: f64) -> Self {
        ModelParams {
            n1: 500,
            n2: 500,
            alpha: 0.5,
            theta11: 8.0,
            theta12: 2.0 * a,
            theta21: -2.0 * b,
            theta22: 8.0,
            sigma,
            dt: 0.005,
            steps: 200_000,
            seed: 1,
        }
    }

    /// Aggregated coupling A = (1 − α) θ₁₂.
    #[inline]
    pub fn a(&self) -> f64 {
        (1.0 - self.alpha) * self.theta12
    }

    /// Aggregated coupling B = −α θ₂₁.
    #[inline]
    pub fn b(&self) -> f64 {
        -self.alpha * self.theta21
    }

    /// Total particle count.
    #[inline]
    pub fn n(&self) -> usize {
        self.n1 + self.n2
    }

    /// Simulated horizon T = steps · dt.
    #[inline]
    pub fn horizon(&self) -> f64 {
        self.steps as f64 * self.dt
    }

    /// Check all invariants and return the parameters unchanged.
    ///
    /// Rejected inputs: non-positive or non-finite dt, zero steps, negative
    /// or non-finite σ, α outside [0, 1], non-finite couplings, and α
    /// inconsistent with the particle counts when those are set.
    pub fn validate(self) -> Result<Self> {
        if !self.dt.is_finite() || self.dt <= 0.0 {
            return Err(Error::InvalidParams(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if self.steps == 0 {
            return Err(Error::InvalidParams("steps must be at least 1".into()));
        }
        if !self.sigma.is_finite() || self.sigma < 0.0 {
            return Err(Error::InvalidParams(format!(
                "sigma must be nonnegative, got {}",
                self.sigma
            )));
        }
        if !self.alpha.is_finite() || !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidParams(format!(
                "alpha must lie in [0, 1], got {}",
                self.alpha
            )));
        }
        for (name, v) in [
            ("theta11", self.theta11),
            ("theta12", self.theta12),
            ("theta21", self.theta21),
            ("theta22", self.theta22),
        ] {
            if !v.is_finite() {
                return Err(Error::InvalidParams(format!(
                    "{name} must be finite, got {v}"
                )));
            }
        }
        if self.n() > 0 {
            let ratio = self.n1 as f64 / self.n() as f64;
            if (self.alpha - ratio).abs() > 1e-12 {
                return Err(Error::InvalidParams(format!(
                    "alpha = {} inconsistent with particle counts {}/{} (ratio {})",
                    self.alpha,
                    self.n1,
                    self.n(),
                    ratio
                )));
            }
        }
        Ok(self)
    }

    /// Parse a flat `key = value` configuration, starting from
    /// [`ModelParams::default`] and overriding the listed fields.
    ///
    /// Blank lines and lines starting with `#` are ignored. Unknown keys are
    /// an error. The result is validated.
    pub fn from_config_str(text: &str, origin: &str) -> Result<Self> {
        let mut p = ModelParams::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Parse {
                    path: origin.into(),
                    reason: format!("line {}: expected key=value, got {raw:?}", lineno + 1),
                });
            };
            let key = key.trim();
            let value = value.trim();
            let bad = |what: &str| Error::Parse {
                path: origin.into(),
                reason: format!("line {}: invalid {what} value {value:?}", lineno + 1),
            };
            match key {
                "n1" => p.n1 = value.parse().map_err(|_| bad("integer"))?,
                "n2" => p.n2 = value.parse().map_err(|_| bad("integer"))?,
                "steps" => p.steps = value.parse().map_err(|_| bad("integer"))?,
                "seed" => p.seed = value.parse().map_err(|_| bad("integer"))?,
                "alpha" => p.alpha = value.parse().map_err(|_| bad("real"))?,
                "theta11" => p.theta11 = value.parse().map_err(|_| bad("real"))?,
                "theta12" => p.theta12 = value.parse().map_err(|_| bad("real"))?,
                "theta21" => p.theta21 = value.parse().map_err(|_| bad("real"))?,
                "theta22" => p.theta22 = value.parse().map_err(|_| bad("real"))?,
                "sigma" => p.sigma = value.parse().map_err(|_| bad("real"))?,
                "dt" => p.dt = value.parse().map_err(|_| bad("real"))?,
                _ => {
                    return Err(Error::Parse {
                        path: origin.into(),
                        reason: format!("line {}: unknown key {key:?}", lineno + 1),
                    })
                }
            }
        }
        p.validate()
    }

    /// Read a `key = value` configuration file.
    pub fn from_config_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_config_str(&text, &path.display().to_string())
    }
}

impl Default for ModelParams {
    /// The first reference regime: A = 2, B = 2.5, σ = 0.5.
    fn default() -> Self {
        ModelParams::from_ab(2.0, 2.5, 0.5)
    }
}
