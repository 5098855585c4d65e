//! Gaussian moment closure and Hopf-bifurcation analysis.
//!
//! Closing the moment hierarchy of the limiting dynamics at second order
//! (every law treated as Gaussian, so E[Z³] = μ³+3μv and
//! E[Z⁴] = μ⁴+6μ²v+3v²) leaves a four-dimensional ODE for the means and
//! variances of the two populations:
//!
//! ```text
//! ṁ₁ = −m₁³ + m₁(1 − 3v₁) − A(m₁ − m₂)
//! ṁ₂ = −m₂³ + m₂(1 − 3v₂) − B(m₁ − m₂)
//! v̇₁ = −6v₁² − 6m₁²v₁ + 2v₁ − 2αθ₁₁v₁ − 2Av₁ + σ²
//! v̇₂ = −6v₂² − 6m₂²v₂ + 2v₂ + 2Bv₂ − 2(1−α)θ₂₂v₂ + σ²
//! ```
//!
//! The symmetric point (0, 0, ṽ₁, ṽ₂) is an equilibrium for every σ, with
//! the variance components solving decoupled quadratics. Scanning the
//! Jacobian spectrum there in σ locates the Hopf bifurcation that creates
//! the noise-induced limit cycle; in the reference regime
//! αθ₁₁ = (1−α)θ₂₂ = 4 all four eigenvalues have closed forms that double
//! as oracles for the numeric eigendecomposition.

use crate::trajectory::MeanTrajectory;
use crate::{Error, ModelParams, Result};
use nalgebra::Matrix4;
use serde::Serialize;

/// First and second moments of the two populations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentState {
    pub m1: f64,
    pub m2: f64,
    pub v1: f64,
    pub v2: f64,
}

impl MomentState {
    pub fn new(m1: f64, m2: f64, v1: f64, v2: f64) -> Self {
        MomentState { m1, m2, v1, v2 }
    }
}

/// Right-hand side of the closed moment system.
pub fn moment_rhs(s: &MomentState, p: &ModelParams) -> MomentState {
    let (a, b) = (p.a(), p.b());
    let sig2 = p.sigma * p.sigma;
    let MomentState { m1, m2, v1, v2 } = *s;
    MomentState {
        m1: -m1 * m1 * m1 + m1 * (1.0 - 3.0 * v1) - a * (m1 - m2),
        m2: -m2 * m2 * m2 + m2 * (1.0 - 3.0 * v2) - b * (m1 - m2),
        v1: -6.0 * v1 * v1 - 6.0 * m1 * m1 * v1 + 2.0 * v1
            - 2.0 * p.alpha * p.theta11 * v1
            - 2.0 * a * v1
            + sig2,
        v2: -6.0 * v2 * v2 - 6.0 * m2 * m2 * v2 + 2.0 * v2 + 2.0 * b * v2
            - 2.0 * (1.0 - p.alpha) * p.theta22 * v2
            + sig2,
    }
}

/// Analytic Jacobian of [`moment_rhs`] at `s`, row-major in the order
/// (m₁, m₂, v₁, v₂).
pub fn closure_jacobian(s: &MomentState, p: &ModelParams) -> [[f64; 4]; 4] {
    let (a, b) = (p.a(), p.b());
    let MomentState { m1, m2, v1, v2 } = *s;
    [
        [-3.0 * m1 * m1 + 1.0 - 3.0 * v1 - a, a, -3.0 * m1, 0.0],
        [-b, -3.0 * m2 * m2 + 1.0 - 3.0 * v2 + b, 0.0, -3.0 * m2],
        [
            -12.0 * m1 * v1,
            0.0,
            -12.0 * v1 - 6.0 * m1 * m1 + 2.0 - 2.0 * p.alpha * p.theta11 - 2.0 * a,
            0.0,
        ],
        [
            0.0,
            -12.0 * m2 * v2,
            0.0,
            -12.0 * v2 - 6.0 * m2 * m2 + 2.0 + 2.0 * b - 2.0 * (1.0 - p.alpha) * p.theta22,
        ],
    ]
}

/// Classical RK4 integration of the moment system.
///
/// Samples every step into a trajectory with variance columns. Errors with
/// [`Error::Divergence`] if any component leaves |·| ≤ 10⁶.
pub fn integrate_moments(
    s0: &MomentState,
    p: &ModelParams,
    t_end: f64,
    dt_ode: f64,
) -> Result<MeanTrajectory> {
    if !(dt_ode > 0.0) || !dt_ode.is_finite() {
        return Err(Error::InvalidParams(format!(
            "dt_ode must be positive, got {dt_ode}"
        )));
    }
    if !(t_end > 0.0) {
        return Err(Error::InvalidParams(format!(
            "horizon must be positive, got {t_end}"
        )));
    }
    let steps = (t_end / dt_ode).round() as usize;
    let mut traj = MeanTrajectory::with_variances(0.0, dt_ode);
    let mut s = *s0;
    traj.push_with_v(s.m1, s.m2, s.v1, s.v2);
    for step in 0..steps {
        s = rk4_step(&s, p, dt_ode);
        let worst = s.m1.abs().max(s.m2.abs()).max(s.v1.abs()).max(s.v2.abs());
        if !worst.is_finite() || worst > 1e6 {
            return Err(Error::Divergence {
                t: (step + 1) as f64 * dt_ode,
                step: step + 1,
                detail: format!("moment state ({}, {}, {}, {})", s.m1, s.m2, s.v1, s.v2),
            });
        }
        traj.push_with_v(s.m1, s.m2, s.v1, s.v2);
    }
    Ok(traj)
}

pub(crate) fn rk4_step(s: &MomentState, p: &ModelParams, dt: f64) -> MomentState {
    let add = |s: &MomentState, k: &MomentState, h: f64| MomentState {
        m1: s.m1 + h * k.m1,
        m2: s.m2 + h * k.m2,
        v1: s.v1 + h * k.v1,
        v2: s.v2 + h * k.v2,
    };
    let k1 = moment_rhs(s, p);
    let k2 = moment_rhs(&add(s, &k1, 0.5 * dt), p);
    let k3 = moment_rhs(&add(s, &k2, 0.5 * dt), p);
    let k4 = moment_rhs(&add(s, &k3, dt), p);
    MomentState {
        m1: s.m1 + dt / 6.0 * (k1.m1 + 2.0 * k2.m1 + 2.0 * k3.m1 + k4.m1),
        m2: s.m2 + dt / 6.0 * (k1.m2 + 2.0 * k2.m2 + 2.0 * k3.m2 + k4.m2),
        v1: s.v1 + dt / 6.0 * (k1.v1 + 2.0 * k2.v1 + 2.0 * k3.v1 + k4.v1),
        v2: s.v2 + dt / 6.0 * (k1.v2 + 2.0 * k2.v2 + 2.0 * k3.v2 + k4.v2),
    }
}

/// Variance components (ṽ₁, ṽ₂) of the symmetric equilibrium
/// (0, 0, ṽ₁, ṽ₂): the nonnegative roots of
///
/// ```text
/// −6v² + (2 − 2αθ₁₁ − 2A) v + σ² = 0
/// −6v² + (2 + 2B − 2(1−α)θ₂₂) v + σ² = 0
/// ```
pub fn hopf_equilibrium(p: &ModelParams, sigma: f64) -> (f64, f64) {
    let c1 = 2.0 - 2.0 * p.alpha * p.theta11 - 2.0 * p.a();
    let c2 = 2.0 + 2.0 * p.b() - 2.0 * (1.0 - p.alpha) * p.theta22;
    let sig2 = sigma * sigma;
    let root = |c: f64| (c + (c * c + 24.0 * sig2).sqrt()) / 12.0;
    (root(c1), root(c2))
}

/// Whether the closed-form eigenvalue formulas apply
/// (αθ₁₁ = (1−α)θ₂₂ = 4).
pub fn closed_forms_apply(p: &ModelParams) -> bool {
    (p.alpha * p.theta11 - 4.0).abs() < 1e-12 && ((1.0 - p.alpha) * p.theta22 - 4.0).abs() < 1e-12
}

/// Closed-form equilibrium variances in the reference regime:
/// ṽ₁ = (−3−A+√((3+A)²+6σ²))/6, ṽ₂ = (−3+B+√((B−3)²+6σ²))/6.
pub fn hopf_equilibrium_closed(p: &ModelParams, sigma: f64) -> Option<(f64, f64)> {
    if !closed_forms_apply(p) {
        return None;
    }
    let (a, b) = (p.a(), p.b());
    let sig2 = sigma * sigma;
    Some((
        (-3.0 - a + ((3.0 + a) * (3.0 + a) + 6.0 * sig2).sqrt()) / 6.0,
        (-3.0 + b + ((b - 3.0) * (b - 3.0) + 6.0 * sig2).sqrt()) / 6.0,
    ))
}

/// Four (re, im) eigenvalue pairs ordered (λ₁, λ₂, λ₃, λ₄).
pub type EigenQuad = [(f64, f64); 4];

/// Closed-form spectrum of the Jacobian at (0, 0, ṽ₁, ṽ₂) in the reference
/// regime, as (re, im) pairs ordered λ₁, λ₂, λ₃, λ₄. λ₁ carries the
/// negative inner square root.
pub fn hopf_closed_eigenvalues(a: f64, b: f64, sigma: f64) -> EigenQuad {
    let sig2 = sigma * sigma;
    let ra = ((a + 3.0) * (a + 3.0) + 6.0 * sig2).sqrt();
    let rb = ((b - 3.0) * (b - 3.0) + 6.0 * sig2).sqrt();
    let s = 10.0 - a + b - ra - rb;
    let e =
        a * a + a * (ra - rb - 7.0 * b + 3.0) - (rb - b) * (ra + b) - 3.0 * b + 6.0 * sig2 + 9.0;
    let v1 = (-3.0 - a + ra) / 6.0;
    let v2 = (-3.0 + b + rb) / 6.0;
    let l3 = -6.0 - 2.0 * a - 12.0 * v1;
    let l4 = -6.0 + 2.0 * b - 12.0 * v2;
    if e < 0.0 {
        let im = (-2.0 * e).sqrt() / 4.0;
        [(s / 4.0, -im), (s / 4.0, im), (l3, 0.0), (l4, 0.0)]
    } else {
        let r = (2.0 * e).sqrt() / 4.0;
        [(s / 4.0 - r, 0.0), (s / 4.0 + r, 0.0), (l3, 0.0), (l4, 0.0)]
    }
}

/// Eigenvalues of the Jacobian at the symmetric equilibrium for noise level
/// `sigma`, ordered (λ₁, λ₂, λ₃, λ₄): the mean-block pair first (negative
/// inner branch first), then the two variance-block eigenvalues.
///
/// Computed from the numeric eigendecomposition of the 4×4 Jacobian; in the
/// reference regime the closed forms are evaluated too and any disagreement
/// beyond 10⁻⁸ is surfaced as an error rather than hidden.
pub fn hopf_eigenvalues(p: &ModelParams, sigma: f64) -> Result<EigenQuad> {
    let (v1, v2) = hopf_equilibrium(p, sigma);
    let eq = MomentState::new(0.0, 0.0, v1, v2);
    let j = closure_jacobian(&eq, p);
    let m = Matrix4::from_fn(|r, c| j[r][c]);
    let mut numeric: Vec<(f64, f64)> = m
        .complex_eigenvalues()
        .iter()
        .map(|z| (z.re, z.im))
        .collect();
    // The variance block is diagonal: its eigenvalues are exactly j[2][2]
    // and j[3][3]. Split them off to recover the (λ₁, λ₂, λ₃, λ₄) order.
    let mut rest = numeric.clone();
    let mut pick = |target: f64| -> (f64, f64) {
        let (idx, _) = rest
            .iter()
            .enumerate()
            .min_by(|(_, x), (_, y)| dist(**x, (target, 0.0)).total_cmp(&dist(**y, (target, 0.0))))
            .expect("spectrum has four entries");
        rest.remove(idx)
    };
    let l3 = pick(j[2][2]);
    let l4 = pick(j[3][3]);
    rest.sort_by(|x, y| x.1.total_cmp(&y.1).then(x.0.total_cmp(&y.0)));
    numeric = vec![rest[0], rest[1], l3, l4];
    let ordered: EigenQuad = [numeric[0], numeric[1], numeric[2], numeric[3]];

    if closed_forms_apply(p) {
        let closed = hopf_closed_eigenvalues(p.a(), p.b(), sigma);
        for (n, c) in ordered.iter().zip(closed.iter()) {
            if dist(*n, *c) > 1e-8 {
                return Err(Error::AnalysisFailure(format!(
                    "numeric spectrum {ordered:?} disagrees with closed forms {closed:?} \
                     at sigma = {sigma}"
                )));
            }
        }
    }
    Ok(ordered)
}

fn dist(x: (f64, f64), y: (f64, f64)) -> f64 {
    (x.0 - y.0).hypot(x.1 - y.1)
}

/// Real part of λ₁ (negative inner branch of the mean block), the quantity
/// whose sign change in σ marks the Hopf bifurcation. Valid for any
/// parameter regime: works from the analytic 2×2 mean block.
pub fn re_lambda1(p: &ModelParams, sigma: f64) -> f64 {
    let (tr, _, disc) = mean_block(p, sigma);
    if disc < 0.0 {
        tr / 2.0
    } else {
        (tr - disc.sqrt()) / 2.0
    }
}

/// Trace, determinant, and discriminant of the mean block at the symmetric
/// equilibrium.
fn mean_block(p: &ModelParams, sigma: f64) -> (f64, f64, f64) {
    let (a, b) = (p.a(), p.b());
    let (v1, v2) = hopf_equilibrium(p, sigma);
    let j11 = 1.0 - a - 3.0 * v1;
    let j22 = 1.0 + b - 3.0 * v2;
    let tr = j11 + j22;
    let det = j11 * j22 + a * b;
    (tr, det, tr * tr - 4.0 * det)
}

/// Bisection for the critical noise σ_c where Re λ₁ changes sign.
///
/// Errors when the bracket shows no sign change, or when the located
/// crossing is not a complex pair (a Hopf point must be).
pub fn find_sigma_c(p: &ModelParams, sigma_lo: f64, sigma_hi: f64, tol: f64) -> Result<f64> {
    if !(sigma_lo >= 0.0 && sigma_hi > sigma_lo && tol > 0.0) {
        return Err(Error::InvalidParams(format!(
            "need 0 <= sigma_lo < sigma_hi and tol > 0, got [{sigma_lo}, {sigma_hi}], {tol}"
        )));
    }
    let f_lo = re_lambda1(p, sigma_lo);
    let f_hi = re_lambda1(p, sigma_hi);
    if f_lo * f_hi > 0.0 {
        return Err(Error::NoSignChange(format!(
            "Re lambda1 = {f_lo:.4} at sigma = {sigma_lo} and {f_hi:.4} at sigma = {sigma_hi}"
        )));
    }
    let (mut lo, mut hi, mut sign_lo) = (sigma_lo, sigma_hi, f_lo.signum());
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let f_mid = re_lambda1(p, mid);
        if f_mid == 0.0 {
            lo = mid;
            hi = mid;
            break;
        }
        if f_mid.signum() == sign_lo {
            lo = mid;
        } else {
            hi = mid;
        }
        sign_lo = re_lambda1(p, lo).signum();
    }
    let sigma_c = 0.5 * (lo + hi);
    let (_, _, disc) = mean_block(p, sigma_c);
    if disc >= 0.0 {
        return Err(Error::AnalysisFailure(format!(
            "eigenvalues are real at the crossing sigma = {sigma_c}; not a Hopf point"
        )));
    }
    Ok(sigma_c)
}

/// Eigenvalue scan over a σ grid.
#[derive(Debug, Clone, Serialize)]
pub struct HopfReport {
    pub sigma_grid: Vec<f64>,
    /// Four (re, im) pairs per grid point, ordered (λ₁, λ₂, λ₃, λ₄).
    pub eigen_table: Vec<EigenQuad>,
    /// Equilibrium variances (ṽ₁, ṽ₂) per grid point.
    pub v_tilde: Vec<(f64, f64)>,
    /// Critical noise, when the grid end points bracket a sign change.
    pub sigma_c: Option<f64>,
}

/// Evaluate the spectrum on a uniform σ grid and locate σ_c if bracketed.
pub fn hopf_scan(
    p: &ModelParams,
    sigma_lo: f64,
    sigma_hi: f64,
    points: usize,
) -> Result<HopfReport> {
    if points < 2 || !(sigma_hi > sigma_lo) {
        return Err(Error::InvalidParams(
            "hopf scan needs at least 2 grid points and sigma_hi > sigma_lo".into(),
        ));
    }
    let mut sigma_grid = Vec::with_capacity(points);
    let mut eigen_table = Vec::with_capacity(points);
    let mut v_tilde = Vec::with_capacity(points);
    for i in 0..points {
        let sigma = sigma_lo + (sigma_hi - sigma_lo) * i as f64 / (points - 1) as f64;
        sigma_grid.push(sigma);
        eigen_table.push(hopf_eigenvalues(p, sigma)?);
        v_tilde.push(hopf_equilibrium(p, sigma));
    }
    let sigma_c = find_sigma_c(p, sigma_lo, sigma_hi, 1e-6).ok();
    Ok(HopfReport {
        sigma_grid,
        eigen_table,
        v_tilde,
        sigma_c,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase::planar_rk4;
    use crate::rng::RngStream;
    use proptest::prelude::*;

    fn params(a: f64, b: f64, sigma: f64) -> ModelParams {
        ModelParams::from_ab(a, b, sigma)
    }

    #[test]
    fn origin_is_equilibrium_without_noise() {
        let p = params(2.0, 2.5, 0.0);
        let d = moment_rhs(&MomentState::new(0.0, 0.0, 0.0, 0.0), &p);
        assert_eq!((d.m1, d.m2, d.v1, d.v2), (0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn diagonal_point_reduces_to_planar_equilibrium() {
        let p = params(2.0, 2.5, 0.0);
        let d = moment_rhs(&MomentState::new(1.0, 1.0, 0.0, 0.0), &p);
        assert_eq!((d.m1, d.m2, d.v1, d.v2), (0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn symmetric_equilibrium_annihilates_rhs() {
        for sigma in [0.3, 1.0, 2.0, 2.9] {
            for b in [2.5, 4.0, 7.0] {
                let p = params(2.0, b, sigma);
                let (v1, v2) = hopf_equilibrium(&p, sigma);
                let d = moment_rhs(&MomentState::new(0.0, 0.0, v1, v2), &p);
                assert_eq!(d.m1, 0.0);
                assert_eq!(d.m2, 0.0);
                assert!(d.v1.abs() < 1e-12, "residual v1 rate {}", d.v1);
                assert!(d.v2.abs() < 1e-12, "residual v2 rate {}", d.v2);
            }
        }
    }

    #[test]
    fn zero_noise_equilibrium_variances() {
        let p = params(2.0, 2.5, 0.0);
        assert_eq!(hopf_equilibrium(&p, 0.0), (0.0, 0.0));
        // B = 7 > 3: the v2 quadratic has the positive root (B-3)/3... scaled:
        // c2 = 2B - 6 = 8, root 8/6 = 4/3.
        let p = params(2.0, 7.0, 0.0);
        let (v1, v2) = hopf_equilibrium(&p, 0.0);
        assert_eq!(v1, 0.0);
        assert!((v2 - 4.0 / 3.0).abs() < 1e-15, "v2 = {v2}");
    }

    #[test]
    fn closed_form_variances_match_quadratic_roots() {
        let stream = RngStream::new(0x40f, 0);
        for b in [2.5, 4.0, 7.0] {
            let p = params(2.0, b, 0.0);
            for k in 0..20 {
                let sigma = 3.0 * stream.uniform(k).max(1e-3);
                let (q1, q2) = hopf_equilibrium(&p, sigma);
                let (c1, c2) = hopf_equilibrium_closed(&p, sigma).unwrap();
                assert!((q1 - c1).abs() < 1e-12, "v1 {q1} vs {c1} at sigma {sigma}");
                assert!((q2 - c2).abs() < 1e-12, "v2 {q2} vs {c2} at sigma {sigma}");
            }
        }
    }

    #[test]
    fn jacobian_matches_finite_differences_and_block_structure() {
        let p = params(2.0, 2.5, 0.8);
        let (v1, v2) = hopf_equilibrium(&p, 0.8);
        let at = MomentState::new(0.0, 0.0, v1, v2);
        let j = closure_jacobian(&at, &p);
        let h = 1e-6;
        let get = |s: &MomentState, i: usize| [s.m1, s.m2, s.v1, s.v2][i];
        let bump = |s: &MomentState, i: usize, d: f64| {
            let mut c = [s.m1, s.m2, s.v1, s.v2];
            c[i] += d;
            MomentState::new(c[0], c[1], c[2], c[3])
        };
        for r in 0..4 {
            for c in 0..4 {
                let fp = moment_rhs(&bump(&at, c, h), &p);
                let fm = moment_rhs(&bump(&at, c, -h), &p);
                let fd = (get(&fp, r) - get(&fm, r)) / (2.0 * h);
                assert!(
                    (fd - j[r][c]).abs() < 1e-6 * (1.0 + j[r][c].abs()),
                    "J[{r}][{c}] analytic {} vs finite difference {fd}",
                    j[r][c]
                );
            }
        }
        // Mixed mean/variance couplings vanish at the symmetric point.
        for (r, c) in [
            (0, 2),
            (0, 3),
            (1, 2),
            (1, 3),
            (2, 0),
            (2, 1),
            (3, 0),
            (3, 1),
        ] {
            assert_eq!(j[r][c], 0.0, "J[{r}][{c}] must vanish at m = 0");
        }
    }

    #[test]
    fn variance_block_eigenvalues_stay_negative() {
        for b in [2.5, 4.0, 7.0] {
            let p = params(2.0, b, 0.0);
            for i in 1..=60 {
                let sigma = 3.0 * i as f64 / 60.0;
                let eig = hopf_eigenvalues(&p, sigma).unwrap();
                let (v1, v2) = hopf_equilibrium(&p, sigma);
                let l3_formula = -6.0 - 2.0 * p.a() - 12.0 * v1;
                let l4_formula = -6.0 + 2.0 * b - 12.0 * v2;
                assert!(
                    eig[2].0 < 0.0 && eig[3].0 < 0.0,
                    "B={b}, sigma={sigma}: {eig:?}"
                );
                assert!((eig[2].0 - l3_formula).abs() < 1e-8);
                assert!((eig[3].0 - l4_formula).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn closed_and_numeric_spectra_agree_on_grid() {
        for b in [2.5, 4.0, 7.0] {
            let p = params(2.0, b, 0.0);
            for i in 1..=50 {
                let sigma = 3.0 * i as f64 / 50.0;
                // hopf_eigenvalues internally cross-checks numeric vs closed
                // forms at 1e-8 and errors on disagreement.
                let eig = hopf_eigenvalues(&p, sigma);
                assert!(eig.is_ok(), "B={b}, sigma={sigma}: {eig:?}");
            }
        }
    }

    #[test]
    fn critical_noise_values() {
        for (b, expect) in [(2.5, 1.65), (4.0, 2.0), (7.0, 2.45)] {
            let p = params(2.0, b, 0.0);
            let sc = find_sigma_c(&p, 0.5, 4.0, 1e-5).unwrap();
            assert!(
                (sc - expect).abs() < 0.05,
                "sigma_c for B={b}: got {sc}, expected about {expect}"
            );
        }
    }

    #[test]
    fn sigma_c_without_sign_change_is_an_error() {
        let p = params(2.0, 2.5, 0.0);
        assert!(matches!(
            find_sigma_c(&p, 3.0, 4.0, 1e-5),
            Err(Error::NoSignChange(_))
        ));
    }

    #[test]
    fn hopf_condition_closed_form() {
        // At sigma_c the mean-block trace vanishes:
        // 10 - A + B = sqrt((A+3)^2+6s^2) + sqrt((B-3)^2+6s^2).
        // For A=2, B=4 this solves exactly at s = 2.
        let p = params(2.0, 4.0, 0.0);
        let sc = find_sigma_c(&p, 1.5, 2.5, 1e-9).unwrap();
        assert!((sc - 2.0).abs() < 1e-6, "exact crossing at 2, got {sc}");
    }

    #[test]
    fn zero_noise_moments_reduce_to_planar_flow() {
        let p = params(2.0, 2.5, 0.0);
        let traj = integrate_moments(&MomentState::new(0.8, 0.7, 0.0, 0.0), &p, 5.0, 1e-3).unwrap();
        let planar = planar_rk4(0.8, 0.7, 2.0, 2.5, 1e-3, 5000);
        for (i, (x, y)) in planar.iter().enumerate() {
            assert_eq!(traj.m1[i].to_bits(), x.to_bits(), "m1 at step {i}");
            assert_eq!(traj.m2[i].to_bits(), y.to_bits(), "m2 at step {i}");
            assert_eq!(traj.v1.as_ref().unwrap()[i], 0.0);
        }
    }

    #[test]
    fn moment_divergence_is_reported() {
        // An enormous time step blows the cubic up immediately.
        let p = params(2.0, 2.5, 0.5);
        let r = integrate_moments(&MomentState::new(3.0, -3.0, 1.0, 1.0), &p, 10.0, 1.0);
        assert!(matches!(r, Err(Error::Divergence { .. })));
    }

    #[test]
    fn hopf_scan_reports_grid_and_sigma_c() {
        let p = params(2.0, 2.5, 0.0);
        let rep = hopf_scan(&p, 1.4, 1.9, 11).unwrap();
        assert_eq!(rep.sigma_grid.len(), 11);
        assert_eq!(rep.eigen_table.len(), 11);
        let sc = rep.sigma_c.expect("bracket contains the crossing");
        assert!((sc - 1.65).abs() < 0.05);
        for eigs in &rep.eigen_table {
            assert!(eigs[2].0 < 0.0 && eigs[3].0 < 0.0);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn variances_stay_positive_along_integrations(
            b in 1.5f64..8.0,
            sigma in 0.05f64..3.0,
            m0 in -1.5f64..1.5,
        ) {
            let p = params(2.0, b, sigma);
            let traj = integrate_moments(
                &MomentState::new(m0, -0.3 * m0, 0.0, 0.0),
                &p,
                20.0,
                1e-3,
            )
            .unwrap();
            let v1 = traj.v1.as_ref().unwrap();
            let v2 = traj.v2.as_ref().unwrap();
            for i in 1..traj.len() {
                prop_assert!(v1[i] > 0.0, "v1 dipped to {} at sample {}", v1[i], i);
                prop_assert!(v2[i] > 0.0, "v2 dipped to {} at sample {}", v2[i], i);
            }
        }
    }
}
