//! Simulation and bifurcation analysis of a two-population network of
//! frustratedly coupled diffusions.
//!
//! Population one (size N₁) and population two (size N₂) interact only through
//! their empirical means m₁, m₂. Each particle moves in the double-well
//! potential V(x) = x⁴/4 − x²/2 and feels linear mean-field forces:
//!
//! ```text
//! dx_j = (−x_j³ + x_j) dt − α θ₁₁ (x_j − m₁) dt − (1−α) θ₁₂ (x_j − m₂) dt + σ dw_j
//! dy_j = (−y_j³ + y_j) dt − α θ₂₁ (y_j − m₁) dt − (1−α) θ₂₂ (y_j − m₂) dt + σ dw'_j
//! ```
//!
//! with α = N₁/N. The couplings are frustrated: θ₁₂ > 0 pulls population one
//! toward population two while θ₂₁ < 0 pushes population two away from
//! population one, so no joint rest state satisfies both groups. For
//! intermediate noise σ the empirical means settle into a stable rhythm that
//! is absent both at σ = 0 and at large σ (noise-induced periodicity).
//!
//! The crate covers the full analysis pipeline around that phenomenon:
//!
//! - [`sim`]: Euler–Maruyama integration of the N-particle system.
//! - [`limiting`]: the mean-field limit: Picard iteration for the limiting
//!   mean functions, coupled-path simulation, and the finite-size
//!   (propagation-of-chaos) convergence experiment.
//! - [`phase`]: the noiseless planar system ẋ = −x³+x−A(x−y),
//!   ẏ = −y³+y−B(x−y) with A = (1−α)θ₁₂, B = −αθ₂₁: equilibrium enumeration
//!   and classification, phase-portrait sampling.
//! - [`fokker_planck`]: finite-volume solution of the coupled nonlinear
//!   Fokker–Planck equations for the limiting laws.
//! - [`moments`]: the Gaussian moment closure ODE for (m₁, m₂, v₁, v₂) and
//!   its Hopf-bifurcation analysis in σ.
//! - [`tilde`]: the small-noise Gaussian process approximation
//!   x̃ = m₁ + σz₁, ỹ = m₂ + σz₂ and its order-σ² error experiment.
//! - [`rhythm`]: period estimation via Poincaré return times and DFT spectra.
//! - [`presets`], [`plot`]: canned experiments with manifests, SVG rendering.
//!
//! Everything is deterministic: randomness comes from counter-based streams
//! ([`rng::RngStream`]) indexed by (seed, stream, step), and empirical means
//! are reduced with an exact accumulator ([`summation::ExactSum`]) so results
//! are bit-identical regardless of particle order or worker count.

// Validation guards are written `!(x > 0.0)` so that NaN is rejected along
// with out-of-range values; `x <= 0.0` would let NaN through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Index loops over small fixed-size arrays and over parallel row tables stay
// as plain `for i in 0..n`.
#![allow(clippy::needless_range_loop)]

pub mod fokker_planck;
pub mod limiting;
pub mod moments;
pub mod params;
pub mod phase;
pub mod plot;
pub mod presets;
pub mod rhythm;
pub mod rng;
pub mod sim;
pub mod stats;
pub mod summation;
pub mod tilde;
pub mod trajectory;

pub use params::ModelParams;
pub use rng::RngStream;
pub use trajectory::MeanTrajectory;

/// Unified error type for the whole toolkit.
///
/// The variants map onto the CLI exit codes: invalid input (2), numerical
/// divergence (3), and analysis failures such as "no rhythm detected" (4).
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Parameter or input validation failed.
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    /// A file could not be read, written, or parsed.
    #[error("i/o failure for {path}: {reason}")]
    Io { path: String, reason: String },

    /// Malformed trajectory, config, or CSV content.
    #[error("parse error in {path}: {reason}")]
    Parse { path: String, reason: String },

    /// A simulated coordinate left the trust region (|x| > 10⁶).
    #[error("numerical divergence at t = {t} (step {step}): {detail}")]
    Divergence { t: f64, step: usize, detail: String },

    /// Fewer than two oriented Poincaré crossings were found.
    #[error("no rhythm detected: {0}")]
    NoRhythm(String),

    /// An iterative scheme did not reach its tolerance.
    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    /// A root or sign change was not found in the supplied bracket.
    #[error("no sign change in bracket: {0}")]
    NoSignChange(String),

    /// Input outside the mathematical domain of an operation.
    #[error("domain violation: {0}")]
    DomainViolation(String),

    /// Incompatible grids, lengths, or horizons.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// An analysis step failed for a scientific (not programming) reason.
    #[error("analysis failure: {0}")]
    AnalysisFailure(String),

    /// Unknown experiment preset name.
    #[error("unknown preset {0:?}")]
    UnknownPreset(String),
}

impl Error {
    /// Process exit code for the CLI: 2 validation, 3 divergence, 4 analysis.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidParams(_)
            | Error::Io { .. }
            | Error::Parse { .. }
            | Error::UnknownPreset(_) => 2,
            Error::Divergence { .. } => 3,
            Error::NoRhythm(_)
            | Error::NoConvergence { .. }
            | Error::NoSignChange(_)
            | Error::DomainViolation(_)
            | Error::GridMismatch(_)
            | Error::AnalysisFailure(_) => 4,
        }
    }

    pub(crate) fn io(path: &std::path::Path, err: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            reason: err.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
