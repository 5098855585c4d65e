//! The noiseless planar system and its phase portrait.
//!
//! With A = (1−α)θ₁₂ and B = −αθ₂₁, the zero-noise mean dynamics reduce to
//!
//! ```text
//! ẋ = −x³ + x − A (x − y)
//! ẏ = −y³ + y − B (x − y)
//! ```
//!
//! Besides the universal equilibria (0,0) and ±(1,1), further fixed points
//! lie on rays y = βx where β solves β = f(β) with
//!
//! ```text
//! f(β) = sqrt[ (1 − B(1−β)/β) / (1 − A(1−β)) ],    β > max{(A−1)/A, B/(1+B)}
//! ```
//!
//! and then x̄ = sqrt(1 − A(1−β)). The count and nature of the extra points
//! is governed by where B sits relative to A−1 and A+2.

use crate::{Error, Result};
use serde::Serialize;

/// Right-hand side of the planar system.
#[inline]
pub fn vector_field(x: f64, y: f64, a: f64, b: f64) -> (f64, f64) {
    (-x * x * x + x - a * (x - y), -y * y * y + y - b * (x - y))
}

/// Analytic Jacobian of the planar system, row-major.
#[inline]
pub fn jacobian(x: f64, y: f64, a: f64, b: f64) -> [[f64; 2]; 2] {
    [[-3.0 * x * x + 1.0 - a, a], [-b, -3.0 * y * y + 1.0 + b]]
}

/// Eigenvalues of a 2×2 matrix as (re, im) pairs (quadratic formula).
pub fn eigenvalues_2x2(m: [[f64; 2]; 2]) -> [(f64, f64); 2] {
    let tr = m[0][0] + m[1][1];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let disc = tr * tr - 4.0 * det;
    if disc >= 0.0 {
        let s = disc.sqrt();
        [((tr - s) / 2.0, 0.0), ((tr + s) / 2.0, 0.0)]
    } else {
        let s = (-disc).sqrt() / 2.0;
        [(tr / 2.0, -s), (tr / 2.0, s)]
    }
}

/// Lower edge of the admissible β domain, max{(A−1)/A, B/(1+B)}.
#[inline]
pub fn beta_domain_min(a: f64, b: f64) -> f64 {
    ((a - 1.0) / a).max(b / (1.0 + b))
}

/// The fixed-point map f(β). Errors outside the admissible domain
/// (nonpositive radicand or denominator).
pub fn beta_map(beta: f64, a: f64, b: f64) -> Result<f64> {
    if beta <= 0.0 {
        return Err(Error::DomainViolation(format!(
            "beta must be positive, got {beta}"
        )));
    }
    let denom = 1.0 - a * (1.0 - beta);
    if denom <= 0.0 {
        return Err(Error::DomainViolation(format!(
            "beta = {beta} at or below (A-1)/A = {}",
            (a - 1.0) / a
        )));
    }
    let num = 1.0 - b * (1.0 - beta) / beta;
    if num < 0.0 {
        return Err(Error::DomainViolation(format!(
            "beta = {beta} below B/(1+B) = {}",
            b / (1.0 + b)
        )));
    }
    Ok((num / denom).sqrt())
}

/// Roots β± = (AB ± sqrt(AB(B−A+1))) / (A(1+B)) of ∂f/∂β, or `None` when
/// they are complex (B < A−1). Only β₊ falls inside the domain of f; it is
/// the unique maximum. β₋ sits below B/(1+B).
pub fn beta_critical_points(a: f64, b: f64) -> Option<(f64, f64)> {
    let rad = a * b * (b - a + 1.0);
    if rad < 0.0 {
        return None;
    }
    let s = rad.sqrt();
    let d = a * (1.0 + b);
    Some(((a * b - s) / d, (a * b + s) / d))
}

/// Stability classification of a planar equilibrium.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EquilibriumKind {
    UnstableNode,
    StableNode,
    Saddle,
    StableSpiral,
    UnstableSpiral,
    /// At least one eigenvalue is zero to tolerance.
    Degenerate,
    /// Purely imaginary pair to tolerance.
    CenterCandidate,
}

/// Position of B relative to the structural thresholds A−1 and A+2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    BBelowAMinus1,
    BEqualsAMinus1,
    BBetween,
    BEqualsAPlus2,
    BAboveAPlus2,
}

/// A located fixed point of the planar system.
#[derive(Debug, Clone, Serialize)]
pub struct Equilibrium {
    /// Coordinates (x, y).
    pub point: (f64, f64),
    /// Ray slope y/x; absent for the origin.
    pub beta: Option<f64>,
    /// Jacobian eigenvalues as (re, im) pairs.
    pub eigenvalues: [(f64, f64); 2],
    pub kind: EquilibriumKind,
}

/// Full equilibrium enumeration for one (A, B) pair.
#[derive(Debug, Clone, Serialize)]
pub struct EquilibriumReport {
    pub a: f64,
    pub b: f64,
    /// γ = A − B.
    pub gamma: f64,
    pub regime: Regime,
    /// Whether A > 1 and B > A−1 hold, the range in which the analysis is
    /// exhaustive. Outside it the report is best effort.
    pub within_hypothesis: bool,
    pub equilibria: Vec<Equilibrium>,
}

/// Tolerance under which an eigenvalue (or regime gap) counts as zero.
#[inline]
fn zero_tol(a: f64, b: f64) -> f64 {
    1e-9 * (1.0 + a.abs() + b.abs())
}

/// Classify from eigenvalues with the scale-aware zero tolerance.
pub fn classify(eigenvalues: [(f64, f64); 2], tol: f64) -> EquilibriumKind {
    let (re1, im1) = eigenvalues[0];
    let (re2, _) = eigenvalues[1];
    if im1.abs() > tol {
        if re1 < -tol {
            EquilibriumKind::StableSpiral
        } else if re1 > tol {
            EquilibriumKind::UnstableSpiral
        } else {
            EquilibriumKind::CenterCandidate
        }
    } else if re1.abs() < tol || re2.abs() < tol {
        EquilibriumKind::Degenerate
    } else if re1 > 0.0 && re2 > 0.0 {
        EquilibriumKind::UnstableNode
    } else if re1 < 0.0 && re2 < 0.0 {
        EquilibriumKind::StableNode
    } else {
        EquilibriumKind::Saddle
    }
}

/// Enumerate and classify all fixed points for A > 0, B > 0.
///
/// The universal points (0,0) and ±(1,1) use the closed-form eigenvalues
/// {1, 1−A+B} and {−2, −2−A+B}; ray points ±(x̄, βx̄) found from β = f(β) are
/// classified through the numeric Jacobian. In the degenerate band
/// |B−(A+2)| < tolerance the ray search is skipped and the zero eigenvalue
/// at ±(1,1) reported from the analytic branch.
pub fn find_equilibria(a: f64, b: f64) -> Result<EquilibriumReport> {
    if !(a > 0.0) || !(b > 0.0) {
        return Err(Error::InvalidParams(format!(
            "equilibrium analysis requires A > 0 and B > 0, got A = {a}, B = {b}"
        )));
    }
    let tol = zero_tol(a, b);
    let gamma = a - b;
    let regime = if (b - (a - 1.0)).abs() < tol {
        Regime::BEqualsAMinus1
    } else if (b - (a + 2.0)).abs() < tol {
        Regime::BEqualsAPlus2
    } else if b < a - 1.0 {
        Regime::BBelowAMinus1
    } else if b > a + 2.0 {
        Regime::BAboveAPlus2
    } else {
        Regime::BBetween
    };

    let mut equilibria = Vec::new();
    equilibria.push(Equilibrium {
        point: (0.0, 0.0),
        beta: None,
        eigenvalues: order_real_pair(1.0, 1.0 - a + b),
        kind: classify(order_real_pair(1.0, 1.0 - a + b), tol),
    });
    let diag_eigs = order_real_pair(-2.0, -2.0 - a + b);
    for sign in [1.0f64, -1.0] {
        equilibria.push(Equilibrium {
            point: (sign, sign),
            beta: Some(1.0),
            eigenvalues: diag_eigs,
            kind: classify(diag_eigs, tol),
        });
    }

    if regime != Regime::BEqualsAPlus2 {
        for beta in scan_beta_roots(a, b) {
            let xbar = (1.0 - a * (1.0 - beta)).sqrt();
            for sign in [1.0f64, -1.0] {
                let (x, y) = (sign * xbar, sign * beta * xbar);
                let eigs = eigenvalues_2x2(jacobian(x, y, a, b));
                equilibria.push(Equilibrium {
                    point: (x, y),
                    beta: Some(beta),
                    eigenvalues: eigs,
                    kind: classify(eigs, tol),
                });
            }
        }
    }

    for eq in &equilibria {
        let (dx, dy) = vector_field(eq.point.0, eq.point.1, a, b);
        if dx.abs() >= 1e-10 || dy.abs() >= 1e-10 {
            return Err(Error::AnalysisFailure(format!(
                "residual ({dx:.2e}, {dy:.2e}) at reported equilibrium {:?}",
                eq.point
            )));
        }
    }

    Ok(EquilibriumReport {
        a,
        b,
        gamma,
        regime,
        within_hypothesis: a > 1.0 && b > a - 1.0,
        equilibria,
    })
}

fn order_real_pair(l1: f64, l2: f64) -> [(f64, f64); 2] {
    if l1 <= l2 {
        [(l1, 0.0), (l2, 0.0)]
    } else {
        [(l2, 0.0), (l1, 0.0)]
    }
}

/// Roots of g(β) = f(β) − β in the admissible domain, excluding the known
/// root β = 1. Sign-change scanning over 10⁴ panels on (β_min, 10] followed
/// by bisection; f has at most one in-domain critical point, so the scan is
/// exhaustive at this resolution.
fn scan_beta_roots(a: f64, b: f64) -> Vec<f64> {
    const PANELS: usize = 10_000;
    const BETA_HI: f64 = 10.0;
    const EXCLUDE: f64 = 1e-6;
    let lo = beta_domain_min(a, b) + 1e-9;
    if lo >= BETA_HI {
        return Vec::new();
    }
    let g = |beta: f64| beta_map(beta, a, b).map(|f| f - beta);
    let width = (BETA_HI - lo) / PANELS as f64;
    let mut roots: Vec<f64> = Vec::new();
    let mut prev: Option<(f64, f64)> = None;
    for i in 0..=PANELS {
        let beta = lo + i as f64 * width;
        if (beta - 1.0).abs() <= EXCLUDE {
            prev = None;
            continue;
        }
        let Ok(gv) = g(beta) else {
            prev = None;
            continue;
        };
        if let Some((pb, pg)) = prev {
            if pg == 0.0 {
                roots.push(pb);
            } else if pg * gv < 0.0 {
                // Bisect [pb, beta].
                let (mut l, mut r, mut gl) = (pb, beta, pg);
                for _ in 0..200 {
                    let mid = 0.5 * (l + r);
                    let gm = g(mid).expect("interior of a bracketed panel stays in-domain");
                    if gl * gm <= 0.0 {
                        r = mid;
                    } else {
                        l = mid;
                        gl = gm;
                    }
                    if r - l < 1e-15 * r.abs().max(1.0) {
                        break;
                    }
                }
                roots.push(0.5 * (l + r));
            }
        }
        prev = Some((beta, gv));
    }
    roots.retain(|r| (r - 1.0).abs() > EXCLUDE);
    roots.dedup_by(|x, y| (*x - *y).abs() < 1e-8);
    roots
}

/// A sampled vector-field lattice with magnitudes rescaled to [0, 1].
#[derive(Debug, Clone, Serialize)]
pub struct FieldGrid {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    /// Row-major over (y, x): index = iy * xs.len() + ix.
    pub dx: Vec<f64>,
    pub dy: Vec<f64>,
    pub magnitude: Vec<f64>,
}

/// Evaluate the field on a `resolution`×`resolution` lattice over the window
/// [x0, x1]×[y0, y1] and normalize magnitudes by their maximum.
pub fn sample_field(
    a: f64,
    b: f64,
    window: (f64, f64, f64, f64),
    resolution: usize,
) -> Result<FieldGrid> {
    let (x0, x1, y0, y1) = window;
    if resolution == 0 {
        return Err(Error::InvalidParams("resolution must be positive".into()));
    }
    if !(x1 > x0) || !(y1 > y0) {
        return Err(Error::InvalidParams(format!(
            "degenerate window ({x0}, {x1}) x ({y0}, {y1})"
        )));
    }
    // Center + signed offset: the offsets are exactly antisymmetric in the
    // index, so a window with lo = -hi yields a lattice that mirrors to its
    // own negation and odd symmetry of the field survives rounding.
    let coord = |lo: f64, hi: f64, i: usize| {
        let c = 0.5 * (lo + hi);
        if resolution == 1 {
            c
        } else {
            let s = (2.0 * i as f64 - (resolution - 1) as f64) / (resolution - 1) as f64;
            c + 0.5 * (hi - lo) * s
        }
    };
    let xs: Vec<f64> = (0..resolution).map(|i| coord(x0, x1, i)).collect();
    let ys: Vec<f64> = (0..resolution).map(|i| coord(y0, y1, i)).collect();
    let mut dx = Vec::with_capacity(resolution * resolution);
    let mut dy = Vec::with_capacity(resolution * resolution);
    let mut magnitude = Vec::with_capacity(resolution * resolution);
    let mut max_mag = 0.0f64;
    for &y in &ys {
        for &x in &xs {
            let (fx, fy) = vector_field(x, y, a, b);
            let m = fx.hypot(fy);
            max_mag = max_mag.max(m);
            dx.push(fx);
            dy.push(fy);
            magnitude.push(m);
        }
    }
    if max_mag > 0.0 {
        for m in &mut magnitude {
            *m /= max_mag;
        }
    }
    Ok(FieldGrid {
        xs,
        ys,
        dx,
        dy,
        magnitude,
    })
}

/// Classical RK4 integration of the planar system; returns the path sampled
/// at every step (including the initial point).
pub fn planar_rk4(x0: f64, y0: f64, a: f64, b: f64, dt: f64, steps: usize) -> Vec<(f64, f64)> {
    let mut path = Vec::with_capacity(steps + 1);
    let (mut x, mut y) = (x0, y0);
    path.push((x, y));
    for _ in 0..steps {
        let (k1x, k1y) = vector_field(x, y, a, b);
        let (k2x, k2y) = vector_field(x + 0.5 * dt * k1x, y + 0.5 * dt * k1y, a, b);
        let (k3x, k3y) = vector_field(x + 0.5 * dt * k2x, y + 0.5 * dt * k2y, a, b);
        let (k4x, k4y) = vector_field(x + dt * k3x, y + dt * k3y, a, b);
        x += dt / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
        y += dt / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y);
        path.push((x, y));
    }
    path
}
