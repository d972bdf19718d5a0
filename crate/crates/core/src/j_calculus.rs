//! 2×2 matrix calculus with the standard complex structure `J = [[0,-1],[1,0]]`.
//!
//! Matrices act on column vectors. The inner product on matrices is
//! `⟨A, B⟩ = Tr(A Bᵀ)`, so the Frobenius norm is `√⟨A, A⟩`.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum JCalcError {
    #[error("matrix is not symmetric (asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("matrix is not positive-definite (det {det:e}, a11 {a11:e})")]
    NotPositive { det: f64, a11: f64 },
    #[error("matrix has non-positive determinant {0:e}")]
    NonPositiveDet(f64),
    #[error("matrix is singular")]
    Singular,
}

/// A real 2×2 matrix `[[a11, a12], [a21, a22]]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Mat2 {
    pub a11: f64,
    pub a12: f64,
    pub a21: f64,
    pub a22: f64,
}

impl Mat2 {
    pub const fn new(a11: f64, a12: f64, a21: f64, a22: f64) -> Self {
        Self { a11, a12, a21, a22 }
    }

    pub const fn zero() -> Self {
        Self::new(0.0, 0.0, 0.0, 0.0)
    }

    pub const fn id() -> Self {
        Self::new(1.0, 0.0, 0.0, 1.0)
    }

    /// The standard complex structure.
    pub const fn j() -> Self {
        Self::new(0.0, -1.0, 1.0, 0.0)
    }

    pub const fn diag(a: f64, b: f64) -> Self {
        Self::new(a, 0.0, 0.0, b)
    }

    pub const fn scalar(c: f64) -> Self {
        Self::diag(c, c)
    }

    pub const fn sym(a11: f64, a12: f64, a22: f64) -> Self {
        Self::new(a11, a12, a12, a22)
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.a11, self.a12, self.a21, self.a22]
    }

    pub fn rotation(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Self::new(c, -s, s, c)
    }

    pub fn trace(self) -> f64 {
        self.a11 + self.a22
    }

    pub fn det(self) -> f64 {
        self.a11 * self.a22 - self.a12 * self.a21
    }

    pub fn transpose(self) -> Self {
        Self::new(self.a11, self.a21, self.a12, self.a22)
    }

    /// Adjugate, so that `A · adj(A) = Det(A) · Id`.
    pub fn adjugate(self) -> Self {
        Self::new(self.a22, -self.a12, -self.a21, self.a11)
    }

    pub fn inverse(self) -> Option<Self> {
        let d = self.det();
        if d == 0.0 || !d.is_finite() {
            return None;
        }
        Some(self.adjugate() * (1.0 / d))
    }

    pub fn apply(self, v: [f64; 2]) -> [f64; 2] {
        [
            self.a11 * v[0] + self.a12 * v[1],
            self.a21 * v[0] + self.a22 * v[1],
        ]
    }

    /// `Tr(A Bᵀ)`.
    pub fn inner(self, b: Self) -> f64 {
        self.a11 * b.a11 + self.a12 * b.a12 + self.a21 * b.a21 + self.a22 * b.a22
    }

    pub fn frobenius(self) -> f64 {
        self.inner(self).sqrt()
    }

    pub fn max_abs(self) -> f64 {
        self.a11
            .abs()
            .max(self.a12.abs())
            .max(self.a21.abs())
            .max(self.a22.abs())
    }

    pub fn asymmetry(self) -> f64 {
        (self.a12 - self.a21).abs()
    }

    pub fn symmetrized(self) -> Self {
        let m = 0.5 * (self.a12 + self.a21);
        Self::new(self.a11, m, m, self.a22)
    }

    /// Trace-free part `A − ½Tr(A)·Id`.
    pub fn trace_free(self) -> Self {
        self - Self::scalar(0.5 * self.trace())
    }

    /// Commutator `AB − BA`.
    pub fn commutator(self, b: Self) -> Self {
        self * b - b * self
    }

    pub fn is_finite(self) -> bool {
        self.a11.is_finite() && self.a12.is_finite() && self.a21.is_finite() && self.a22.is_finite()
    }

    /// Eigenvalues of a symmetric matrix, ascending.
    pub fn sym_eigenvalues(self) -> (f64, f64) {
        let m = 0.5 * self.trace();
        let d = 0.5 * (self.a11 - self.a22);
        let off = 0.5 * (self.a12 + self.a21);
        let r = d.hypot(off);
        (m - r, m + r)
    }
}

impl Add for Mat2 {
    type Output = Mat2;
    fn add(self, b: Mat2) -> Mat2 {
        Mat2::new(self.a11 + b.a11, self.a12 + b.a12, self.a21 + b.a21, self.a22 + b.a22)
    }
}

impl Sub for Mat2 {
    type Output = Mat2;
    fn sub(self, b: Mat2) -> Mat2 {
        Mat2::new(self.a11 - b.a11, self.a12 - b.a12, self.a21 - b.a21, self.a22 - b.a22)
    }
}

impl Neg for Mat2 {
    type Output = Mat2;
    fn neg(self) -> Mat2 {
        self * -1.0
    }
}

impl Mul for Mat2 {
    type Output = Mat2;
    fn mul(self, b: Mat2) -> Mat2 {
        Mat2::new(
            self.a11 * b.a11 + self.a12 * b.a21,
            self.a11 * b.a12 + self.a12 * b.a22,
            self.a21 * b.a11 + self.a22 * b.a21,
            self.a21 * b.a12 + self.a22 * b.a22,
        )
    }
}

impl Mul<f64> for Mat2 {
    type Output = Mat2;
    fn mul(self, c: f64) -> Mat2 {
        Mat2::new(self.a11 * c, self.a12 * c, self.a21 * c, self.a22 * c)
    }
}

impl Mul<Mat2> for f64 {
    type Output = Mat2;
    fn mul(self, m: Mat2) -> Mat2 {
        m * self
    }
}

/// A symmetric positive-definite 2×2 matrix, used both as a bilinear form
/// and as a point of `Symm₊(2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Mat2", into = "Mat2")]
pub struct SpdMat2(Mat2);

/// Relative asymmetry accepted (and then removed) when certifying a matrix.
const SYM_RTOL: f64 = 1e-12;

impl SpdMat2 {
    pub fn new(m: Mat2) -> Result<Self, JCalcError> {
        let scale = 1.0 + m.max_abs();
        if m.asymmetry() > SYM_RTOL * scale || !m.is_finite() {
            return Err(JCalcError::NotSymmetric(m.asymmetry()));
        }
        let s = m.symmetrized();
        if !(s.a11 > 0.0 && s.det() > 0.0) {
            return Err(JCalcError::NotPositive { det: s.det(), a11: s.a11 });
        }
        Ok(Self(s))
    }

    /// Form with entries `[[h11, h12], [h12, h22]]`.
    pub fn from_sym(h11: f64, h12: f64, h22: f64) -> Result<Self, JCalcError> {
        Self::new(Mat2::sym(h11, h12, h22))
    }

    pub fn identity() -> Self {
        Self(Mat2::id())
    }

    pub fn scalar(c: f64) -> Result<Self, JCalcError> {
        Self::new(Mat2::scalar(c))
    }

    pub fn mat(self) -> Mat2 {
        self.0
    }

    /// Lower-triangular Cholesky factor `L` with `L Lᵀ = self`.
    pub fn cholesky(self) -> Mat2 {
        let m = self.0;
        let l11 = m.a11.sqrt();
        let l21 = m.a21 / l11;
        let l22 = (m.a22 - l21 * l21).sqrt();
        Mat2::new(l11, 0.0, l21, l22)
    }

    /// Principal square root, by the closed form
    /// `(M + √Det M · Id) / √(Tr M + 2√Det M)`.
    pub fn sqrt(self) -> SpdMat2 {
        let m = self.0;
        let s = m.det().sqrt();
        let t = (m.trace() + 2.0 * s).sqrt();
        SpdMat2(((m + Mat2::scalar(s)) * (1.0 / t)).symmetrized())
    }

    pub fn inverse(self) -> SpdMat2 {
        SpdMat2(self.0.adjugate() * (1.0 / self.0.det()))
    }

    /// Evaluates the bilinear form on `(u, v)`.
    pub fn form(self, u: [f64; 2], v: [f64; 2]) -> f64 {
        let hv = self.0.apply(v);
        u[0] * hv[0] + u[1] * hv[1]
    }
}

impl TryFrom<Mat2> for SpdMat2 {
    type Error = JCalcError;
    fn try_from(m: Mat2) -> Result<Self, JCalcError> {
        SpdMat2::new(m)
    }
}

impl From<SpdMat2> for Mat2 {
    fn from(s: SpdMat2) -> Mat2 {
        s.0
    }
}

/// J-linear component `(A − JAJ)/2`.
pub fn jlin_part(a: Mat2) -> Mat2 {
    let j = Mat2::j();
    (a - j * a * j) * 0.5
}

/// J-antilinear component `(A + JAJ)/2`.
pub fn jantilin_part(a: Mat2) -> Mat2 {
    let j = Mat2::j();
    (a + j * a * j) * 0.5
}

/// The (1,0)-seminorm `√(½Tr(A)² + ½Tr(JA)²)`.
///
/// This is the Frobenius norm of [`jlin_part`], which differs from the
/// operator norm by a factor √2 on conformal matrices.
pub fn sigma(a: Mat2) -> f64 {
    let t = a.trace();
    let tj = (Mat2::j() * a).trace();
    (0.5 * (t * t + tj * tj)).sqrt()
}

/// Derivative of σ at a symmetric positive-definite `A` in the direction `B`,
/// which is `Tr(B)`.
///
/// Only the symmetric branch is available; at non-symmetric `A` the derivative
/// contains terms that are not determined here.
pub fn dsigma(a: Mat2, b: Mat2) -> Result<f64, JCalcError> {
    SpdMat2::new(a)?;
    Ok(b.trace())
}

/// The action `(A·h)(u, v) = h(Au, Av)`, i.e. `Aᵀ h A`.
pub fn metric_action(a: Mat2, h: SpdMat2) -> Result<SpdMat2, JCalcError> {
    let d = a.det();
    if !(d > 0.0) {
        return Err(JCalcError::NonPositiveDet(d));
    }
    SpdMat2::new((a.transpose() * h.mat() * a).symmetrized())
}

/// The g-self-adjoint positive-definite `A` with `h = g(A·, A·)`.
///
/// Works in a g-orthonormal frame given by the Cholesky factor `L` of `g`,
/// where `A` becomes the principal square root of `L⁻¹ h L⁻ᵀ`. The result is
/// a symmetric matrix only when `g` is conformal, so a plain [`Mat2`] is
/// returned.
pub fn metric_to_a(g: SpdMat2, h: SpdMat2) -> Result<Mat2, JCalcError> {
    let l = g.cholesky();
    let linv = l.inverse().ok_or(JCalcError::Singular)?;
    let m = SpdMat2::new((linv * h.mat() * linv.transpose()).symmetrized())?;
    let root = m.sqrt().mat();
    let a = linv.transpose() * root * l.transpose();
    if g.mat().a12 == 0.0 && g.mat().a11 == g.mat().a22 {
        Ok(a.symmetrized())
    } else {
        Ok(a)
    }
}

/// The indefinite form `b(B) = ½Tr(B J Bᵀ J) = −Det(B)`.
pub fn b_form(b: Mat2) -> f64 {
    let j = Mat2::j();
    0.5 * (b * j * b.transpose() * j).trace()
}

/// Polarization of [`b_form`]: `½Tr(B J Cᵀ J)`.
pub fn b_bilinear(b: Mat2, c: Mat2) -> f64 {
    let j = Mat2::j();
    0.25 * ((b * j * c.transpose() * j).trace() + (c * j * b.transpose() * j).trace())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: Mat2, b: Mat2, tol: f64) -> bool {
        (a - b).max_abs() <= tol
    }

    #[test]
    fn test_jlin_examples() {
        assert!(close(jlin_part(Mat2::id()), Mat2::id(), 0.0));
        assert!(close(jlin_part(Mat2::diag(1.0, -1.0)), Mat2::zero(), 0.0));
        assert!(close(jlin_part(Mat2::diag(2.0, 1.0)), Mat2::diag(1.5, 1.5), 1e-15));
    }

    #[test]
    fn test_sigma_examples() {
        assert!((sigma(Mat2::id()) - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(sigma(Mat2::diag(1.0, -1.0)), 0.0);
        assert!((sigma(Mat2::diag(2.0, 1.0)) - 3.0 / 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn test_dsigma_examples() {
        assert_eq!(dsigma(Mat2::id(), Mat2::id()).unwrap(), 2.0);
        assert_eq!(dsigma(Mat2::diag(2.0, 1.0), Mat2::diag(1.0, -1.0)).unwrap(), 0.0);
        let b = Mat2::sym(0.0, 1.0, 0.0);
        let a = Mat2::diag(2.0, 1.0);
        assert_eq!(dsigma(a, b).unwrap(), 0.0);
        let eps = 1e-4;
        let fd = (sigma(a + b * eps) - sigma(a - b * eps)) / (2.0 * eps);
        assert!(fd.abs() < 1e-6, "fd {fd}");
        assert!(dsigma(Mat2::new(1.0, 1.0, 0.0, 1.0), b).is_err());
        assert!(dsigma(Mat2::diag(-1.0, 1.0), b).is_err());
    }

    #[test]
    fn test_metric_action_examples() {
        let id = SpdMat2::identity();
        let h = SpdMat2::from_sym(3.0, 0.5, 2.0).unwrap();
        assert_eq!(metric_action(Mat2::id(), h).unwrap(), h);
        assert_eq!(metric_action(Mat2::scalar(2.0), id).unwrap().mat(), Mat2::scalar(4.0));
        let a = Mat2::sym(2.0, 1.0, 2.0);
        assert_eq!(metric_action(a, id).unwrap().mat(), Mat2::sym(5.0, 4.0, 5.0));
        assert!(metric_action(Mat2::diag(1.0, -1.0), id).is_err());
    }

    #[test]
    fn test_metric_to_a_examples() {
        let id = SpdMat2::identity();
        let a = metric_to_a(id, SpdMat2::scalar(4.0).unwrap()).unwrap();
        assert!(close(a, Mat2::scalar(2.0), 1e-15));
        let a = metric_to_a(id, SpdMat2::from_sym(4.0, 0.0, 9.0).unwrap()).unwrap();
        assert!(close(a, Mat2::diag(2.0, 3.0), 1e-15));
        let a = metric_to_a(id, SpdMat2::from_sym(5.0, 4.0, 5.0).unwrap()).unwrap();
        assert!(close(a, Mat2::sym(2.0, 1.0, 2.0), 1e-14));
    }

    #[test]
    fn test_metric_to_a_general_g_roundtrip() {
        let g = SpdMat2::from_sym(2.0, 0.3, 1.5).unwrap();
        let h = SpdMat2::from_sym(1.0, -0.2, 3.0).unwrap();
        let a = metric_to_a(g, h).unwrap();
        let back = a.transpose() * g.mat() * a;
        assert!(close(back, h.mat(), 1e-13));
        // g-self-adjoint: g·A symmetric.
        assert!((g.mat() * a).asymmetry() < 1e-13);
    }

    #[test]
    fn test_b_form_examples() {
        assert_eq!(b_form(Mat2::id()), -1.0);
        assert_eq!(b_form(Mat2::diag(1.0, -1.0)), 1.0);
        assert_eq!(b_form(Mat2::new(1.0, 2.0, 3.0, 4.0)), 2.0);
    }

    #[test]
    fn test_spd_rejects() {
        assert!(SpdMat2::new(Mat2::new(1.0, 0.5, 0.0, 1.0)).is_err());
        assert!(SpdMat2::new(Mat2::diag(1.0, -1.0)).is_err());
        assert!(SpdMat2::new(Mat2::diag(-1.0, -1.0)).is_err());
    }

    #[test]
    fn test_sqrt_closed_form_squares_back() {
        let m = SpdMat2::from_sym(9.0, 2.0, 3.0).unwrap();
        let r = m.sqrt().mat();
        assert!(close(r * r, m.mat(), 1e-13));
    }
}
