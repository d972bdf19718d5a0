//! The lorentzian symmetric space `Symm₊(2) = GL(2)/SO(2)`: the quotient
//! metric, its conformal rescalings `b_α`, the explicit geodesics of `b_{1/2}`,
//! the exponential map and the Beltrami-coefficient chart `(P, Q)`.

use nalgebra::{Matrix3, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::j_calculus::{b_form, JCalcError, Mat2, SpdMat2};

#[derive(Debug, Error, PartialEq)]
pub enum SymmetricSpaceError {
    #[error(transparent)]
    JCalc(#[from] JCalcError),
    #[error("matrix is not symmetric (asymmetry {0:.3e})")]
    NotSymmetric(f64),
    #[error("arguments do not commute (‖[A, B]‖ = {0:.3e})")]
    NonCommuting(f64),
    #[error("Id + tA is degenerate at t = {t} (det {det:.3e})")]
    Degenerate { t: f64, det: f64 },
    #[error("Id + A is not positive semi-definite (min eigenvalue {0:.3e})")]
    OutsideDomain(f64),
    #[error("(P, Q) = ({p}, {q}) lies outside Ũ")]
    OutsideUTilde { p: f64, q: Complex64 },
    #[error("base metric must be conformal to the standard one")]
    NotConformal,
}

const SYM_TOL: f64 = 1e-12;
const COMMUTE_TOL: f64 = 1e-10;

fn require_symmetric(b: Mat2) -> Result<(), SymmetricSpaceError> {
    if b.asymmetry() > SYM_TOL * (1.0 + b.max_abs()) {
        return Err(SymmetricSpaceError::NotSymmetric(b.asymmetry()));
    }
    Ok(())
}

/// `b_α(A)(B, B) = Det(A)^α · (−¼ Det(A)⁻¹ Det(B))`.
pub fn quotient_metric(a: SpdMat2, b: Mat2, alpha: f64) -> Result<f64, SymmetricSpaceError> {
    require_symmetric(b)?;
    let d = a.mat().det();
    Ok(d.powf(alpha) * (-0.25 * b.det() / d))
}

/// Polarisation of [`quotient_metric`].
pub fn quotient_bilinear(a: SpdMat2, b: Mat2, c: Mat2, alpha: f64) -> Result<f64, SymmetricSpaceError> {
    let plus = quotient_metric(a, b + c, alpha)?;
    let minus = quotient_metric(a, b - c, alpha)?;
    Ok(0.25 * (plus - minus))
}

/// Gram matrix of `b_α(A)` on the basis `{Id, diag(1, −1), [[0,1],[1,0]]}`
/// of symmetric matrices.
pub fn gram(a: SpdMat2, alpha: f64) -> Matrix3<f64> {
    let basis = [Mat2::id(), Mat2::diag(1.0, -1.0), Mat2::sym(0.0, 1.0, 0.0)];
    Matrix3::from_fn(|i, j| quotient_bilinear(a, basis[i], basis[j], alpha).expect("symmetric basis"))
}

/// Numbers of positive and negative eigenvalues of [`gram`].
pub fn signature(a: SpdMat2, alpha: f64) -> (usize, usize) {
    let e = SymmetricEigen::new(gram(a, alpha)).eigenvalues;
    let scale = e.abs().max();
    let pos = e.iter().filter(|&&v| v > 1e-12 * scale).count();
    let neg = e.iter().filter(|&&v| v < -1e-12 * scale).count();
    (pos, neg)
}

/// `|b(gBg⁻¹) − b(B)|` for an invertible `g`.
pub fn conjugation_residual(g: Mat2, b: Mat2) -> Result<f64, SymmetricSpaceError> {
    let inv = g.inverse().ok_or(JCalcError::Singular)?;
    Ok((b_form(g * b * inv) - b_form(b)).abs())
}

/// `Ω_α(A)(B, B) = (α − 1)·A⁻¹B²` for commuting `A` and `B`.
pub fn christoffel_difference(a: SpdMat2, b: Mat2, alpha: f64) -> Result<Mat2, SymmetricSpaceError> {
    let c = a.mat().commutator(b).max_abs();
    if c > COMMUTE_TOL * (1.0 + a.mat().max_abs()) * (1.0 + b.max_abs()) {
        return Err(SymmetricSpaceError::NonCommuting(c));
    }
    Ok(a.inverse().mat() * b * b * (alpha - 1.0))
}

/// The `b_{1/2}` geodesic `γ(t) = (Id + tA)²` through the identity.
pub fn geodesic(a: Mat2, t: f64) -> Result<SpdMat2, SymmetricSpaceError> {
    require_symmetric(a)?;
    let m = Mat2::id() + a * t;
    let (lo, _) = m.sym_eigenvalues();
    if !(lo > 0.0) {
        return Err(SymmetricSpaceError::Degenerate { t, det: m.det() });
    }
    Ok(SpdMat2::new((m * m).symmetrized())?)
}

/// `‖γ̈ + Ω_{1/2}(γ)(γ̇, γ̇)‖` at `t`, with both derivatives by central
/// differences of step `step`.
pub fn geodesic_residual(a: Mat2, t: f64, step: f64) -> Result<f64, SymmetricSpaceError> {
    let g = |s: f64| geodesic(a, s).map(SpdMat2::mat);
    let (gm, g0, gp) = (g(t - step)?, g(t)?, g(t + step)?);
    let vel = (gp - gm) * (0.5 / step);
    let acc = (gp - g0 * 2.0 + gm) * (1.0 / (step * step));
    let omega = christoffel_difference(SpdMat2::new(g0)?, vel, 0.5)?;
    Ok((acc + omega).max_abs())
}

/// Sampled geodesic, in the shape of the CLI demo output.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeodesicSamples {
    pub t: Vec<f64>,
    pub gamma: Vec<[f64; 4]>,
}

pub fn sample_geodesic(a: Mat2, ts: &[f64]) -> Result<GeodesicSamples, SymmetricSpaceError> {
    let gamma = ts.iter().map(|&t| geodesic(a, t).map(|m| m.mat().to_array())).collect::<Result<_, _>>()?;
    Ok(GeodesicSamples { t: ts.to_vec(), gamma })
}

/// `Ψ(A) = g₀((Id + A)·, (Id + A)·)` for `A` symmetric with respect to `g₀`
/// and `Id + A` positive definite.
pub fn exp_map(a: Mat2, g0: SpdMat2) -> Result<SpdMat2, SymmetricSpaceError> {
    require_symmetric(g0.mat() * a)?;
    let m = Mat2::id() + a;
    // Eigenvalues of the g₀-self-adjoint Id + A, from its trace and determinant.
    let (tr, det) = (m.trace(), m.det());
    let disc = (0.25 * tr * tr - det).max(0.0).sqrt();
    let lo = 0.5 * tr - disc;
    if lo < -SYM_TOL {
        return Err(SymmetricSpaceError::OutsideDomain(lo));
    }
    if lo <= SYM_TOL {
        return Err(SymmetricSpaceError::Degenerate { t: 1.0, det });
    }
    Ok(SpdMat2::new((m.transpose() * g0.mat() * m).symmetrized())?)
}

/// A real number `P` and a Beltrami coefficient `Q = a + bi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeltramiPoint {
    pub p: f64,
    pub q: Complex64,
}

impl BeltramiPoint {
    pub fn new(p: f64, q: Complex64) -> Self {
        Self { p, q }
    }

    /// `P + 1 > 0` and `(P + 1)² − |Q|² > 0`.
    pub fn in_u_tilde(&self) -> bool {
        let s = self.p + 1.0;
        s > 0.0 && s * s - self.q.norm_sqr() > 0.0
    }
}

/// `Ã(P, Q) = [[a + P, b], [b, −a + P]]`.
pub fn beltrami_matrix(p: BeltramiPoint) -> Mat2 {
    Mat2::sym(p.q.re + p.p, p.q.im, -p.q.re + p.p)
}

/// `Ψ̃(P, Q) = ((P+1)Q + ((P+1)² + |Q|²) + (P+1)Q̄)·g₀`, the matrix of
/// `Q + Q̄` being `[[a, b], [b, −a]]`.
pub fn psi_tilde(p: BeltramiPoint, g0: SpdMat2) -> Result<SpdMat2, SymmetricSpaceError> {
    if !p.in_u_tilde() {
        return Err(SymmetricSpaceError::OutsideUTilde { p: p.p, q: p.q });
    }
    let g = g0.mat();
    if g.a12 != 0.0 || g.a21 != 0.0 || g.a11 != g.a22 {
        return Err(SymmetricSpaceError::NotConformal);
    }
    let s = p.p + 1.0;
    let qq = Mat2::sym(p.q.re, p.q.im, -p.q.re);
    let m = qq * (2.0 * s) + Mat2::scalar(s * s + p.q.norm_sqr());
    Ok(SpdMat2::new((m * g.a11).symmetrized())?)
}
