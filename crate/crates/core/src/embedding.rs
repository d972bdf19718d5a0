//! Equivariant spacelike immersions of the hyperbolic plane into Minkowski
//! space `ℝ^{2,1}`, integrated from Codazzi fields on a Poincaré-disk chart.
//!
//! The hyperbolic plane is the future sheet `⟨x, x⟩ = −1`, reached from the
//! chart through `ι(z) = (2x, 2y, 1 + |z|²)/(1 − |z|²)`. A Codazzi field `A`
//! integrates to `X = U ± ∫ A·dι`, path independent because
//! `d(A·dι) = 0` is exactly the Codazzi equation.

use std::io::Write;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::energy_variation::CodazziField;
pub use crate::fields::interpolate;
use crate::fields::{ConformalMetric, FieldError, Grid, Linear, NodeField, ScalarField, Topology};
use crate::j_calculus::Mat2;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("patch half-width {0} must lie in (0, 1/√2)")]
    BadPatch(f64),
    #[error("endomorphism field is not symmetric (residual {0:.3e})")]
    NotSymmetric(f64),
    #[error("Codazzi residual {residual:.3e} exceeds tolerance {tol:.3e}; integration would be path dependent")]
    NotCodazzi { residual: f64, tol: f64 },
    #[error("field lives on a different grid than the patch")]
    GridMismatch,
    #[error("linear part is not in SO₀(2,1) (residual {0:.3e})")]
    NotIsometry(f64),
    #[error("only {0} sample nodes have their image inside the patch")]
    InsufficientOverlap(usize),
    #[error("field is not invariant under the isometry (pullback residual {residual:.3e} > {tol:.3e})")]
    NotInvariant { residual: f64, tol: f64 },
    #[error("mesh export failed: {0}")]
    Export(String),
}

/// A vector of `ℝ^{2,1}`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MinkVec {
    pub x1: f64,
    pub x2: f64,
    pub x3: f64,
}

impl MinkVec {
    pub const fn new(x1: f64, x2: f64, x3: f64) -> Self {
        Self { x1, x2, x3 }
    }

    /// `⟨x, y⟩ = x₁y₁ + x₂y₂ − x₃y₃`.
    pub fn dot(self, o: Self) -> f64 {
        self.x1 * o.x1 + self.x2 * o.x2 - self.x3 * o.x3
    }

    /// Lorentz cross product, orthogonal to both factors for `⟨·,·⟩`.
    pub fn cross(self, o: Self) -> Self {
        let c = self.vector().cross(&o.vector());
        Self::new(c[0], c[1], -c[2])
    }

    pub fn norm_inf(self) -> f64 {
        self.x1.abs().max(self.x2.abs()).max(self.x3.abs())
    }

    pub fn vector(self) -> Vector3<f64> {
        Vector3::new(self.x1, self.x2, self.x3)
    }

    pub fn from_vector(v: Vector3<f64>) -> Self {
        Self::new(v[0], v[1], v[2])
    }
}

impl Add for MinkVec {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.x1 + o.x1, self.x2 + o.x2, self.x3 + o.x3)
    }
}

impl Sub for MinkVec {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.x1 - o.x1, self.x2 - o.x2, self.x3 - o.x3)
    }
}

impl Neg for MinkVec {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x1, -self.x2, -self.x3)
    }
}

impl Mul<f64> for MinkVec {
    type Output = Self;
    fn mul(self, c: f64) -> Self {
        Self::new(c * self.x1, c * self.x2, c * self.x3)
    }
}

impl Linear for MinkVec {
    fn zero() -> Self {
        Self::default()
    }
    fn lin(a: f64, x: Self, b: f64, y: Self) -> Self {
        x * a + y * b
    }
    fn max_abs(self) -> f64 {
        self.norm_inf()
    }
}

pub type MinkField = NodeField<MinkVec>;

fn eta() -> Matrix3<f64> {
    Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -1.0))
}

/// An element `(ρ, τ)` of `SO₀(2,1) ⋉ ℝ^{2,1}` acting by `x ↦ ρx + τ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Isometry21 {
    linear: Matrix3<f64>,
    translation: MinkVec,
}

impl Isometry21 {
    pub const ISOMETRY_TOL: f64 = 1e-12;

    pub fn new(linear: Matrix3<f64>, translation: MinkVec) -> Result<Self, EmbeddingError> {
        let r = Self::isometry_residual(&linear);
        if r > Self::ISOMETRY_TOL * (1.0 + linear.abs().max()) || linear.determinant() <= 0.0 || linear[(2, 2)] <= 0.0 {
            return Err(EmbeddingError::NotIsometry(r));
        }
        Ok(Self { linear, translation })
    }

    /// `max |gᵀηg − η|`.
    pub fn isometry_residual(g: &Matrix3<f64>) -> f64 {
        (g.transpose() * eta() * g - eta()).abs().max()
    }

    pub fn identity() -> Self {
        Self { linear: Matrix3::identity(), translation: MinkVec::default() }
    }

    /// Rotation by `theta` about the `x₃`-axis; fixes the chart origin.
    pub fn rotation(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Self { linear: Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0), translation: MinkVec::default() }
    }

    /// Boost of rapidity `s` in the `(x₁, x₃)` plane.
    pub fn boost_x(s: f64) -> Self {
        let (ch, sh) = (s.cosh(), s.sinh());
        Self { linear: Matrix3::new(ch, 0.0, sh, 0.0, 1.0, 0.0, sh, 0.0, ch), translation: MinkVec::default() }
    }

    /// Boost of rapidity `s` in the `(x₂, x₃)` plane.
    pub fn boost_y(s: f64) -> Self {
        let (ch, sh) = (s.cosh(), s.sinh());
        Self { linear: Matrix3::new(1.0, 0.0, 0.0, 0.0, ch, sh, 0.0, sh, ch), translation: MinkVec::default() }
    }

    pub fn with_translation(self, translation: MinkVec) -> Self {
        Self { translation, ..self }
    }

    pub fn linear(&self) -> &Matrix3<f64> {
        &self.linear
    }

    pub fn translation(&self) -> MinkVec {
        self.translation
    }

    /// `(g, x)(h, y) = (gh, x + g·y)`.
    pub fn compose(&self, o: &Self) -> Self {
        Self { linear: self.linear * o.linear, translation: self.translation + self.rotate(o.translation) }
    }

    pub fn inverse(&self) -> Self {
        let inv = eta() * self.linear.transpose() * eta();
        Self { linear: inv, translation: -MinkVec::from_vector(inv * self.translation.vector()) }
    }

    /// Linear part applied to a vector.
    pub fn rotate(&self, v: MinkVec) -> MinkVec {
        MinkVec::from_vector(self.linear * v.vector())
    }

    /// Affine action `ρx + τ`.
    pub fn apply(&self, v: MinkVec) -> MinkVec {
        self.rotate(v) + self.translation
    }

    /// Hyperbolic action on the disk chart, `z ↦ ι⁻¹(ρ·ι(z))`.
    pub fn act_chart(&self, z: [f64; 2]) -> [f64; 2] {
        iota_inverse(self.rotate(iota(z[0], z[1])))
    }

    /// Chart differential of [`act_chart`](Self::act_chart), `d(ι⁻¹)∘ρ∘dι`.
    pub fn act_chart_differential(&self, z: [f64; 2]) -> Mat2 {
        let p = self.rotate(iota(z[0], z[1]));
        let [ex, ey] = d_iota(z[0], z[1]);
        let inv = d_iota_inverse(p);
        let (cx, cy) = (inv(self.rotate(ex)), inv(self.rotate(ey)));
        Mat2::new(cx[0], cy[0], cx[1], cy[1])
    }
}

/// `ι(z) = (2x, 2y, 1 + |z|²)/(1 − |z|²)`.
pub fn iota(x: f64, y: f64) -> MinkVec {
    let d = 1.0 - x * x - y * y;
    MinkVec::new(2.0 * x / d, 2.0 * y / d, (1.0 + x * x + y * y) / d)
}

/// `(∂ₓι, ∂ᵧι)`.
pub fn d_iota(x: f64, y: f64) -> [MinkVec; 2] {
    let d = 1.0 - x * x - y * y;
    let (a, b) = (2.0 / d, 4.0 / (d * d));
    [
        MinkVec::new(a + b * x * x, b * x * y, b * x),
        MinkVec::new(b * x * y, a + b * y * y, b * y),
    ]
}

/// Stereographic projection of the future sheet back to the disk.
pub fn iota_inverse(p: MinkVec) -> [f64; 2] {
    [p.x1 / (1.0 + p.x3), p.x2 / (1.0 + p.x3)]
}

/// Differential of [`iota_inverse`] at `p`, as a map on ambient vectors.
fn d_iota_inverse(p: MinkVec) -> impl Fn(MinkVec) -> [f64; 2] {
    let s = 1.0 / (1.0 + p.x3);
    move |v| [s * v.x1 - s * s * p.x1 * v.x3, s * v.x2 - s * s * p.x2 * v.x3]
}

/// A square grid `[−a, a]²` of the Poincaré disk with the hyperboloid
/// embedding tabulated at its nodes. The node count is odd so that the chart
/// origin, the base point of all path integrals, is a node.
#[derive(Debug, Clone)]
pub struct HyperboloidPatch {
    grid: Grid,
    metric: ConformalMetric,
    a: f64,
    iota: Vec<MinkVec>,
    d_iota: Vec<[MinkVec; 2]>,
}

impl HyperboloidPatch {
    /// `cells` subdivisions per side of `[−a, a]²` (rounded up to even).
    pub fn new(cells: usize, a: f64) -> Result<Self, EmbeddingError> {
        if !(a > 0.0 && a * std::f64::consts::SQRT_2 < 1.0) {
            return Err(EmbeddingError::BadPatch(a));
        }
        let n = cells + cells % 2 + 1;
        let grid = Grid::new(n, n, 2.0 * a, 2.0 * a, Topology::Dirichlet)?;
        let metric = ConformalMetric::poincare(grid)?;
        let iota = (0..grid.len()).map(|k| {
            let [x, y] = grid.point(k);
            iota(x, y)
        });
        let d_iota = (0..grid.len()).map(|k| {
            let [x, y] = grid.point(k);
            d_iota(x, y)
        });
        Ok(Self { grid, metric, a, iota: iota.collect(), d_iota: d_iota.collect() })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// The hyperbolic metric `e^{2φ}δ` with `φ = log(2/(1 − |z|²))`.
    pub fn metric(&self) -> &ConformalMetric {
        &self.metric
    }

    pub fn half_width(&self) -> f64 {
        self.a
    }

    /// Node index of the chart origin.
    pub fn base(&self) -> usize {
        let c = self.grid.nx() / 2;
        self.grid.idx(c, c)
    }

    pub fn iota(&self, k: usize) -> MinkVec {
        self.iota[k]
    }

    pub fn d_iota(&self, k: usize) -> [MinkVec; 2] {
        self.d_iota[k]
    }

    pub fn iota_field(&self) -> MinkField {
        MinkField::new(self.grid, self.iota.clone()).expect("same grid")
    }

    /// Nodes of the sub-disk `|z| ≤ a` at least `margin` steps from the boundary.
    pub fn disk_nodes(&self, margin: usize) -> Vec<usize> {
        let r2 = self.a * self.a * (1.0 + 1e-12);
        self.grid
            .interior_margin(margin)
            .into_iter()
            .filter(|&k| {
                let [x, y] = self.grid.point(k);
                x * x + y * y <= r2
            })
            .collect()
    }

    /// Ambient extension of `A` at node `k`: identity on the normal line
    /// `ι`, and `dι∘A∘dι⁻¹` on the tangent plane.
    fn lift(&self, k: usize, a: Mat2, v: MinkVec) -> MinkVec {
        let [ex, ey] = self.d_iota[k];
        let s = 1.0 / self.metric.e2phi().data()[k];
        let w = [s * v.dot(ex), s * v.dot(ey)];
        let m = (a - Mat2::id()).apply(w);
        v + ex * m[0] + ey * m[1]
    }
}

/// Order in which the canonical staircase path visits the axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathOrder {
    /// Along the row of the base point, then up the column.
    XThenY,
    /// Along the column of the base point, then across the row.
    YThenX,
}

fn check_field(a: &CodazziField, patch: &HyperboloidPatch, codazzi_tol: f64) -> Result<(), EmbeddingError> {
    if a.base().grid() != patch.grid() {
        return Err(EmbeddingError::GridMismatch);
    }
    if a.symmetry_residual() > 1e-10 {
        return Err(EmbeddingError::NotSymmetric(a.symmetry_residual()));
    }
    if a.codazzi_residual() > codazzi_tol {
        return Err(EmbeddingError::NotCodazzi { residual: a.codazzi_residual(), tol: codazzi_tol });
    }
    Ok(())
}

/// `∫ A·dι` along the edge from node `p` to node `q`, by the trapezoidal rule
/// on chords.
fn edge(a: &[Mat2], patch: &HyperboloidPatch, p: usize, q: usize) -> MinkVec {
    let chord = patch.iota[q] - patch.iota[p];
    (patch.lift(p, a[p], chord) + patch.lift(q, a[q], chord)) * 0.5
}

/// `X(x) = U ± ∫_{x₀}^{x} A·dι` along the canonical staircase from the chart
/// origin.
pub fn integrate_immersion(
    a: &CodazziField,
    patch: &HyperboloidPatch,
    u: MinkVec,
    sign: f64,
    codazzi_tol: f64,
) -> Result<MinkField, EmbeddingError> {
    integrate_along(a, patch, u, sign, codazzi_tol, PathOrder::XThenY)
}

/// [`integrate_immersion`] with a chosen staircase order.
pub fn integrate_along(
    a: &CodazziField,
    patch: &HyperboloidPatch,
    u: MinkVec,
    sign: f64,
    codazzi_tol: f64,
    order: PathOrder,
) -> Result<MinkField, EmbeddingError> {
    check_field(a, patch, codazzi_tol)?;
    let g = patch.grid;
    let ad = a.base().data();
    let n = g.nx();
    let c = n / 2;
    let mut x = vec![MinkVec::default(); g.len()];
    // (i, j) ↦ node index with the first coordinate along the leading axis.
    let at = |s: usize, t: usize| match order {
        PathOrder::XThenY => g.idx(s, t),
        PathOrder::YThenX => g.idx(t, s),
    };
    x[at(c, c)] = u;
    let step = |x: &mut Vec<MinkVec>, p: usize, q: usize| {
        x[q] = x[p] + edge(ad, patch, p, q) * sign;
    };
    for s in c + 1..n {
        step(&mut x, at(s - 1, c), at(s, c));
    }
    for s in (0..c).rev() {
        step(&mut x, at(s + 1, c), at(s, c));
    }
    for s in 0..n {
        for t in c + 1..n {
            step(&mut x, at(s, t - 1), at(s, t));
        }
        for t in (0..c).rev() {
            step(&mut x, at(s, t + 1), at(s, t));
        }
    }
    Ok(MinkField::new(g, x)?)
}

/// Largest closure defect `‖Σ_edges ∫A·dι‖∞` over the grid cells.
pub fn plaquette_defect(a: &CodazziField, patch: &HyperboloidPatch) -> f64 {
    let g = patch.grid;
    let ad = a.base().data();
    let mut worst = 0.0f64;
    for j in 0..g.ny() - 1 {
        for i in 0..g.nx() - 1 {
            let (p00, p10, p11, p01) = (g.idx(i, j), g.idx(i + 1, j), g.idx(i + 1, j + 1), g.idx(i, j + 1));
            let s = edge(ad, patch, p00, p10) + edge(ad, patch, p10, p11) + edge(ad, patch, p11, p01)
                + edge(ad, patch, p01, p00);
            worst = worst.max(s.norm_inf());
        }
    }
    worst
}

/// Largest difference between the two staircase orders over the sub-disk.
pub fn path_dependence(a: &CodazziField, patch: &HyperboloidPatch, codazzi_tol: f64) -> Result<f64, EmbeddingError> {
    let u = patch.iota(patch.base());
    let xy = integrate_along(a, patch, u, 1.0, codazzi_tol, PathOrder::XThenY)?;
    let yx = integrate_along(a, patch, u, 1.0, codazzi_tol, PathOrder::YThenX)?;
    Ok(xy.sub(&yx).linf_on(&patch.disk_nodes(0)))
}

/// Fourth-order central first derivatives at a node at least two steps from
/// the boundary.
fn d4(x: &MinkField, k: usize) -> [MinkVec; 2] {
    let g = x.grid();
    let (i, j) = g.ij(k);
    let d = x.data();
    let one = |f: &dyn Fn(isize) -> MinkVec, h: f64| (f(-2) - f(-1) * 8.0 + f(1) * 8.0 - f(2)) * (1.0 / (12.0 * h));
    let fx = |s: isize| d[g.idx((i as isize + s) as usize, j)];
    let fy = |s: isize| d[g.idx(i, (j as isize + s) as usize)];
    [one(&fx, g.dx()), one(&fy, g.dy())]
}

/// `max ‖(dX)ᵀη(dX) − h₀(A·, A·)‖` over the sub-disk.
pub fn induced_metric_error(x: &MinkField, a: &CodazziField, patch: &HyperboloidPatch) -> f64 {
    let ad = a.base().data();
    patch
        .disk_nodes(2)
        .into_iter()
        .map(|k| {
            let [xx, xy] = d4(x, k);
            let first = Mat2::sym(xx.dot(xx), xx.dot(xy), xy.dot(xy));
            let target = ad[k].transpose() * ad[k] * patch.metric.e2phi().data()[k];
            (first - target).max_abs()
        })
        .fold(0.0, f64::max)
}

/// `max ‖dX(eᵢ) ∓ dι(A eᵢ)‖∞` over the sub-disk.
pub fn differential_error(x: &MinkField, a: &CodazziField, patch: &HyperboloidPatch, sign: f64) -> f64 {
    let ad = a.base().data();
    patch
        .disk_nodes(2)
        .into_iter()
        .map(|k| {
            let dx = d4(x, k);
            let [ex, ey] = patch.d_iota(k);
            let m = ad[k];
            let ax = (ex * m.a11 + ey * m.a21) * sign;
            let ay = (ex * m.a12 + ey * m.a22) * sign;
            (dx[0] - ax).norm_inf().max((dx[1] - ay).norm_inf())
        })
        .fold(0.0, f64::max)
}

/// `max |⟨dX(eᵢ), ι⟩|` over the sub-disk: the image differential never leaves
/// the tangent plane of the hyperboloid.
pub fn normal_component_error(x: &MinkField, patch: &HyperboloidPatch) -> f64 {
    patch
        .disk_nodes(2)
        .into_iter()
        .map(|k| {
            let [xx, xy] = d4(x, k);
            let n = patch.iota(k);
            xx.dot(n).abs().max(xy.dot(n).abs())
        })
        .fold(0.0, f64::max)
}

/// `φ_±(x) = ±⟨X(x), ι(x)⟩`.
pub fn support_function(x: &MinkField, patch: &HyperboloidPatch, sign: f64) -> ScalarField {
    let data = x.data().iter().zip(&patch.iota).map(|(p, i)| sign * p.dot(*i)).collect();
    ScalarField::new(patch.grid, data).expect("same grid")
}

/// Ambient gradient at `ι(z)` of the degree-one homogeneous extension of `f`:
/// `dι(∇f) − f·ι`, with `∇f` the hyperbolic gradient.
pub fn homogeneous_gradient(z: [f64; 2], f: f64, df: [f64; 2]) -> MinkVec {
    let d = 1.0 - z[0] * z[0] - z[1] * z[1];
    let s = 0.25 * d * d;
    let [ex, ey] = d_iota(z[0], z[1]);
    ex * (s * df[0]) + ey * (s * df[1]) - iota(z[0], z[1]) * f
}

/// Result of an equivariance check.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Equivariance {
    pub tau: MinkVec,
    pub residual: f64,
    pub sample_nodes: usize,
}

/// Sample nodes `x` with `|x| ≤ r` and `|γx| ≤ r` where `r` is `inner` times
/// the patch half-width.
fn overlap(patch: &HyperboloidPatch, gamma: &Isometry21, inner: f64) -> Vec<usize> {
    let r = inner * patch.a;
    patch
        .disk_nodes(2)
        .into_iter()
        .filter(|&k| {
            let p = patch.grid.point(k);
            let q = gamma.act_chart(p);
            p[0].hypot(p[1]) <= r && q[0].hypot(q[1]) <= r
        })
        .collect()
}

/// `max ‖(γ*A)(x) − A(x)‖` over the overlap, with `γ*A = dγ⁻¹·A(γx)·dγ`.
pub fn invariance_residual(a: &CodazziField, gamma: &Isometry21, patch: &HyperboloidPatch) -> f64 {
    overlap(patch, gamma, 1.0)
        .into_iter()
        .map(|k| {
            let p = patch.grid.point(k);
            let dg = gamma.act_chart_differential(p);
            let pulled = dg.inverse().expect("conformal differential") * interpolate(a.base(), gamma.act_chart(p)) * dg;
            (pulled - a.base().data()[k]).max_abs()
        })
        .fold(0.0, f64::max)
}

/// Translation part `τ` making `X` equivariant for the linear part of `gamma`,
/// `τ = X(γx₀) − ρ(γ)X(x₀)`, and the residual `max ‖X(γx) − ρX(x) − τ‖∞`
/// over the nodes of the inner half of the patch whose images stay there.
pub fn equivariance_residual(
    x: &MinkField,
    gamma: &Isometry21,
    a: &CodazziField,
    patch: &HyperboloidPatch,
    invariance_tol: f64,
) -> Result<Equivariance, EmbeddingError> {
    if x.grid() != patch.grid() || a.base().grid() != patch.grid() {
        return Err(EmbeddingError::GridMismatch);
    }
    let inv = invariance_residual(a, gamma, patch);
    if inv > invariance_tol {
        return Err(EmbeddingError::NotInvariant { residual: inv, tol: invariance_tol });
    }
    let nodes = overlap(patch, gamma, 0.5);
    if nodes.len() < 8 {
        return Err(EmbeddingError::InsufficientOverlap(nodes.len()));
    }
    let x0 = x.data()[patch.base()];
    let tau = interpolate(x, gamma.act_chart([0.0, 0.0])) - gamma.rotate(x0);
    let residual = nodes
        .iter()
        .map(|&k| {
            let p = patch.grid.point(k);
            (interpolate(x, gamma.act_chart(p)) - gamma.rotate(x.data()[k]) - tau).norm_inf()
        })
        .fold(0.0, f64::max);
    Ok(Equivariance { tau, residual, sample_nodes: nodes.len() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    Future,
    Past,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Convexity {
    pub spacelike: bool,
    pub definite: bool,
    pub orientation: Option<Orientation>,
}

/// First fundamental form definiteness and the sign of the second fundamental
/// form `II = −⟨∂ᵢ∂ⱼX, N⟩` with respect to the future unit normal `N`, at the
/// interior nodes of the sub-disk.
pub fn convexity_check(x: &MinkField, patch: &HyperboloidPatch) -> Convexity {
    let (xx, xy) = (x.dx(), x.dy());
    let (xxx, xyy, xxy) = (x.dxx(), x.dyy(), xx.dy());
    let mut spacelike = true;
    let (mut pos, mut neg) = (true, true);
    for k in patch.disk_nodes(1) {
        let (u, v) = (xx.data()[k], xy.data()[k]);
        let first = Mat2::sym(u.dot(u), u.dot(v), v.dot(v));
        if !(first.a11 > 0.0 && first.det() > 0.0) {
            spacelike = false;
            pos = false;
            neg = false;
            continue;
        }
        let c = u.cross(v);
        let mut n = c * (1.0 / (-c.dot(c)).sqrt());
        if n.x3 < 0.0 {
            n = -n;
        }
        let ii = Mat2::sym(-xxx.data()[k].dot(n), -xxy.data()[k].dot(n), -xyy.data()[k].dot(n));
        let det_pos = ii.det() > 0.0;
        pos &= det_pos && ii.a11 > 0.0;
        neg &= det_pos && ii.a11 < 0.0;
    }
    let orientation = if pos {
        Some(Orientation::Future)
    } else if neg {
        Some(Orientation::Past)
    } else {
        None
    };
    Convexity { spacelike, definite: orientation.is_some(), orientation }
}

/// Writes the mesh as CSV with header `u,v,x1,x2,x3,phi_support`, one row per
/// node in row-major order.
pub fn write_mesh<W: Write>(out: W, x: &MinkField, support: &ScalarField) -> Result<(), EmbeddingError> {
    let err = |e: csv::Error| EmbeddingError::Export(e.to_string());
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["u", "v", "x1", "x2", "x3", "phi_support"]).map_err(err)?;
    let g = x.grid();
    for k in 0..g.len() {
        let [u, v] = g.point(k);
        let p = x.data()[k];
        let row = [u, v, p.x1, p.x2, p.x3, support.data()[k]].map(|f| format!("{f:.17e}"));
        w.write_record(&row).map_err(err)?;
    }
    w.flush().map_err(|e| EmbeddingError::Export(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::EndoField;

    fn codazzi(a: EndoField, p: &HyperboloidPatch) -> CodazziField {
        CodazziField::measure(a, p.metric()).unwrap()
    }

    #[test]
    fn test_identity_reproduces_hyperboloid() {
        let p = HyperboloidPatch::new(32, 0.5).unwrap();
        for k in 0..p.grid().len() {
            assert!((p.iota(k).dot(p.iota(k)) + 1.0).abs() < 1e-12);
        }
        let a = codazzi(EndoField::constant(*p.grid(), Mat2::id()), &p);
        let x = integrate_immersion(&a, &p, p.iota(p.base()), 1.0, 1e-6).unwrap();
        assert!(x.sub(&p.iota_field()).linf() < 1e-10);
        assert!(induced_metric_error(&x, &a, &p) < 1e-3);
        let s = support_function(&x, &p, 1.0);
        assert!(s.data().iter().all(|v| (v + 1.0).abs() < 1e-10));
        let c = convexity_check(&x, &p);
        assert_eq!(c, Convexity { spacelike: true, definite: true, orientation: Some(Orientation::Future) });
    }

    #[test]
    fn test_minus_branch_is_past() {
        let p = HyperboloidPatch::new(16, 0.5).unwrap();
        let a = codazzi(EndoField::constant(*p.grid(), Mat2::id()), &p);
        let x = integrate_immersion(&a, &p, MinkVec::default(), -1.0, 1e-6).unwrap();
        let c = convexity_check(&x, &p);
        assert!(c.spacelike && c.definite);
        assert_eq!(c.orientation, Some(Orientation::Past));
    }

    #[test]
    fn test_support_of_translate() {
        let p = HyperboloidPatch::new(16, 0.5).unwrap();
        let v = MinkVec::new(0.3, -0.2, 0.7);
        let x = p.iota_field().map(|i| i + v);
        let s = support_function(&x, &p, 1.0);
        for k in 0..p.grid().len() {
            assert!((s.data()[k] - (-1.0 + v.dot(p.iota(k)))).abs() < 1e-12);
        }
    }

    #[test]
    fn test_non_codazzi_rejected() {
        let p = HyperboloidPatch::new(16, 0.5).unwrap();
        let a = codazzi(EndoField::from_fn(*p.grid(), |x, _| Mat2::diag(1.0 + x, 1.0)), &p);
        assert!(matches!(
            integrate_immersion(&a, &p, MinkVec::default(), 1.0, 1e-3),
            Err(EmbeddingError::NotCodazzi { .. })
        ));
        let skew = codazzi(EndoField::constant(*p.grid(), Mat2::new(1.0, 0.1, 0.0, 1.0)), &p);
        assert!(matches!(
            integrate_immersion(&skew, &p, MinkVec::default(), 1.0, 1e-3),
            Err(EmbeddingError::NotSymmetric(_))
        ));
    }

    #[test]
    fn test_isometry_group_law() {
        let g = Isometry21::boost_x(0.3).compose(&Isometry21::rotation(0.4)).with_translation(MinkVec::new(1.0, 2.0, 3.0));
        let h = Isometry21::boost_y(-0.2).with_translation(MinkVec::new(-0.5, 0.1, 0.2));
        let v = MinkVec::new(0.2, 0.3, -0.4);
        assert!((g.compose(&h).apply(v) - g.apply(h.apply(v))).norm_inf() < 1e-12);
        assert!((g.compose(&g.inverse()).apply(v) - v).norm_inf() < 1e-12);
        assert!(Isometry21::isometry_residual(g.linear()) < 1e-12);
        let flip = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -1.0));
        assert!(Isometry21::new(flip, MinkVec::default()).is_err());
        assert!(Isometry21::new(Matrix3::identity() * 2.0, MinkVec::default()).is_err());
    }

    #[test]
    fn test_chart_action() {
        let g = Isometry21::boost_x(0.2);
        let z = [0.1, -0.15];
        let w = g.act_chart(z);
        assert!((iota(w[0], w[1]) - g.rotate(iota(z[0], z[1]))).norm_inf() < 1e-12);
        let dg = g.act_chart_differential(z);
        let e = 1e-6;
        let fd = |i: usize| {
            let mut zp = z;
            let mut zm = z;
            zp[i] += e;
            zm[i] -= e;
            let (a, b) = (g.act_chart(zp), g.act_chart(zm));
            [(a[0] - b[0]) / (2.0 * e), (a[1] - b[1]) / (2.0 * e)]
        };
        let (c0, c1) = (fd(0), fd(1));
        assert!((dg - Mat2::new(c0[0], c1[0], c0[1], c1[1])).max_abs() < 1e-8);
    }

    #[test]
    fn test_interpolation_order() {
        let p = HyperboloidPatch::new(32, 0.5).unwrap();
        let f = ScalarField::from_fn(*p.grid(), |x, y| (x * 2.0).sin() * (1.0 + y * y));
        let z: [f64; 2] = [0.123, -0.321];
        let exact = (z[0] * 2.0).sin() * (1.0 + z[1] * z[1]);
        assert!((interpolate(&f, z) - exact).abs() < 1e-9);
    }
}
