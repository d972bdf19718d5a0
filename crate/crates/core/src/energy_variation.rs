//! The (1,0)-energy of a metric over a conformal background, its L² gradient
//! along the diffeomorphism orbit, the second variation, and the curvature
//! correction `G` that makes the linearised operator elliptic.
//!
//! Everything is expressed through `A = A[h]`, the positive symmetric square
//! root with `h = g(A·, A·)`.
//!
//! Normalisation: the gradient and second-variation formulas below are the
//! derivatives of `√2·E_g[h] = ∫ Tr(A) dArea_g` (for symmetric `A`,
//! `σ(A) = Tr(A)/√2`). [`TRACE_NORMALISATION`] is that factor.

use std::f64::consts::SQRT_2;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fields::{self, ConformalMetric, EndoField, FieldError, Grid, NodeField, ScalarField, VectorField};
use crate::j_calculus::{self, JCalcError, Mat2, SpdMat2};

/// Ratio between the derivative of `E_g` and the gradient formulas.
pub const TRACE_NORMALISATION: f64 = SQRT_2;

#[derive(Debug, Error)]
pub enum EnergyError {
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("node {node}: {source}")]
    Matrix { node: usize, source: JCalcError },
    #[error("endomorphism field is not symmetric (max |Tr(AJ)| = {0:.3e})")]
    NotSymmetric(f64),
    #[error("Tr(A) is not positive at node {0}")]
    TraceNonPositive(usize),
    #[error("fold-over: det(Id + ∇X) = {det:.3e} at node {node}")]
    FoldOver { node: usize, det: f64 },
    #[error("not a Codazzi field: symmetry residual {symmetry:.3e}, Codazzi residual {codazzi:.3e}")]
    NotCodazzi { symmetry: f64, codazzi: f64 },
    #[error("A is singular at node {0}")]
    Singular(usize),
}

/// A metric `h` in chart coordinates, one SPD matrix per node.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricField {
    grid: Grid,
    data: Vec<SpdMat2>,
}

impl MetricField {
    pub fn new(grid: Grid, data: Vec<SpdMat2>) -> Result<Self, EnergyError> {
        if data.len() != grid.len() {
            return Err(FieldError::Length {
                file: "<memory>".into(),
                key: "h".into(),
                expected: grid.len(),
                got: data.len(),
            }
            .into());
        }
        Ok(Self { grid, data })
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64) -> Mat2) -> Result<Self, EnergyError> {
        let data = (0..grid.len())
            .map(|k| {
                let [x, y] = grid.point(k);
                SpdMat2::new(f(x, y)).map_err(|source| EnergyError::Matrix { node: k, source })
            })
            .collect::<Result<_, _>>()?;
        Ok(Self { grid, data })
    }

    /// `h = g(A·, A·)`.
    pub fn from_endo(a: &EndoField, g: &ConformalMetric) -> Result<Self, EnergyError> {
        g.check(a.grid())?;
        let data = (0..a.grid().len())
            .map(|k| {
                j_calculus::metric_action(a.data()[k], g.tensor(k))
                    .map_err(|source| EnergyError::Matrix { node: k, source })
            })
            .collect::<Result<_, _>>()?;
        Ok(Self { grid: *a.grid(), data })
    }

    /// `c²·g`.
    pub fn conformal_multiple(g: &ConformalMetric, c: f64) -> Result<Self, EnergyError> {
        Self::from_endo(&EndoField::constant(*g.grid(), Mat2::scalar(c)), g)
    }

    /// From `[h11, h12, h22]` triples.
    pub fn from_entries(grid: Grid, entries: &[[f64; 3]]) -> Result<Self, EnergyError> {
        if entries.len() != grid.len() {
            return Self::new(grid, Vec::new());
        }
        let data = entries
            .iter()
            .enumerate()
            .map(|(k, e)| SpdMat2::from_sym(e[0], e[1], e[2]).map_err(|source| EnergyError::Matrix { node: k, source }))
            .collect::<Result<_, _>>()?;
        Ok(Self { grid, data })
    }

    pub fn entries(&self) -> Vec<[f64; 3]> {
        self.data.iter().map(|h| [h.mat().a11, h.mat().a12, h.mat().a22]).collect()
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn data(&self) -> &[SpdMat2] {
        &self.data
    }

    pub fn as_endo(&self) -> EndoField {
        NodeField::new(self.grid, self.data.iter().map(|h| h.mat()).collect()).expect("same grid")
    }

    /// Smallest eigenvalue over all nodes.
    pub fn min_eigenvalue(&self) -> f64 {
        self.data.iter().map(|h| h.mat().sym_eigenvalues().0).fold(f64::INFINITY, f64::min)
    }
}

/// `A[h]` at every node.
pub fn a_field(h: &MetricField, g: &ConformalMetric) -> Result<EndoField, EnergyError> {
    g.check(h.grid())?;
    let data = (0..h.grid().len())
        .map(|k| j_calculus::metric_to_a(g.tensor(k), h.data()[k]).map_err(|source| EnergyError::Matrix { node: k, source }))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(NodeField::new(*h.grid(), data)?)
}

/// An endomorphism field with its measured symmetry and Codazzi residuals.
#[derive(Debug, Clone)]
pub struct CodazziField {
    base: EndoField,
    symmetry_residual: f64,
    codazzi_residual: f64,
}

impl CodazziField {
    /// Measures both residuals (interior L∞; Codazzi residual in g-norm).
    pub fn measure(a: EndoField, g: &ConformalMetric) -> Result<Self, EnergyError> {
        let symmetry_residual = a.symmetry_residual();
        let codazzi_residual = g.vec_linf_interior(&fields::dnabla_endo(&a, g)?);
        Ok(Self { base: a, symmetry_residual, codazzi_residual })
    }

    /// As [`measure`](Self::measure), but fails unless both residuals are within tolerance.
    pub fn certify(a: EndoField, g: &ConformalMetric, sym_tol: f64, codazzi_tol: f64) -> Result<Self, EnergyError> {
        let c = Self::measure(a, g)?;
        if c.symmetry_residual > sym_tol || c.codazzi_residual > codazzi_tol {
            return Err(EnergyError::NotCodazzi { symmetry: c.symmetry_residual, codazzi: c.codazzi_residual });
        }
        Ok(c)
    }

    pub fn base(&self) -> &EndoField {
        &self.base
    }

    pub fn symmetry_residual(&self) -> f64 {
        self.symmetry_residual
    }

    pub fn codazzi_residual(&self) -> f64 {
        self.codazzi_residual
    }

    pub fn is_positive(&self) -> bool {
        self.base.data().iter().all(|a| a.trace() > 0.0 && a.det() > 0.0)
    }
}

/// `(Φ*h)(p) = dΦᵀ h(Φ(p)) dΦ` for `Φ = id + X`, with `h` evaluated by `h_at`
/// and `dΦ = Id + jac`.
pub fn pullback_with(
    grid: Grid,
    h_at: impl Fn(f64, f64) -> Mat2,
    x: &VectorField,
    jac: &EndoField,
) -> Result<MetricField, EnergyError> {
    let data = (0..grid.len())
        .map(|k| {
            let [px, py] = grid.point(k);
            let v = x.data()[k];
            let d = Mat2::id() + jac.data()[k];
            let det = d.det();
            if !(det > 0.0) {
                return Err(EnergyError::FoldOver { node: k, det });
            }
            let hq = h_at(px + v[0], py + v[1]);
            SpdMat2::new(d.transpose() * hq * d).map_err(|source| EnergyError::Matrix { node: k, source })
        })
        .collect::<Result<_, _>>()?;
    Ok(MetricField { grid, data })
}

/// Pullback of a nodal metric, with `h∘Φ` by bilinear interpolation and `dΦ`
/// by finite differences of `X`.
pub fn pullback(h: &MetricField, x: &VectorField) -> Result<MetricField, EnergyError> {
    if h.grid() != x.grid() {
        return Err(FieldError::GridMismatch.into());
    }
    let he = h.as_endo();
    pullback_with(*h.grid(), |a, b| he.sample(a, b), x, &x.jacobian0())
}

/// `E_g[h] = ∫ σ(A[h]) dArea_g`.
pub fn energy(h: &MetricField, g: &ConformalMetric) -> Result<f64, EnergyError> {
    let a = a_field(h, g)?;
    Ok(g.integrate(&a.map(j_calculus::sigma)))
}

/// `−J ∇·(AJ)` for a symmetric `A`.
pub fn energy_gradient_of_a(a: &EndoField, g: &ConformalMetric) -> Result<VectorField, EnergyError> {
    Ok(fields::rot_j(&fields::div_endo(&a.times_j(), g)?).scaled(-1.0))
}

/// L² gradient of `h ↦ √2·E_g` along the diffeomorphism orbit, `−J ∇·(AJ)`.
pub fn energy_gradient(h: &MetricField, g: &ConformalMetric) -> Result<VectorField, EnergyError> {
    energy_gradient_of_a(&a_field(h, g)?, g)
}

/// `∫ Tr(A(∇X)J)²/Tr(A) − κ_g⟨X, AX⟩ dArea_g`.
pub fn second_variation(h: &MetricField, g: &ConformalMetric, x: &VectorField) -> Result<f64, EnergyError> {
    let a = a_field(h, g)?;
    second_variation_of_a(&a, g, x)
}

pub fn second_variation_of_a(a: &EndoField, g: &ConformalMetric, x: &VectorField) -> Result<f64, EnergyError> {
    g.check(x.grid())?;
    if let Some(k) = a.data().iter().position(|m| !(m.trace() > 0.0)) {
        return Err(EnergyError::TraceNonPositive(k));
    }
    let nx = g.nabla_vec(x);
    let kappa = g.curvature();
    let data: Vec<f64> = (0..g.grid().len())
        .map(|k| {
            let m = a.data()[k];
            let t = (m * nx.data()[k] * Mat2::j()).trace();
            let v = x.data()[k];
            t * t / m.trace() - kappa.data()[k] * g.dot(k, v, m.apply(v))
        })
        .collect();
    let integrand = NodeField::new(*g.grid(), data)?;
    Ok(g.integrate(&integrand))
}

/// Gaussian curvature of a general chart metric by Brioschi's formula.
pub fn metric_curvature(h: &MetricField) -> ScalarField {
    endo_curvature(&h.as_endo())
}

/// Brioschi curvature of a metric stored as a matrix field (entries read
/// without checking positivity).
pub fn endo_curvature(he: &EndoField) -> ScalarField {
    let e = he.map(|m| m.a11);
    let f = he.map(|m| m.a12);
    let gg = he.map(|m| m.a22);
    let (eu, ev) = (e.dx(), e.dy());
    let (fu, fv) = (f.dx(), f.dy());
    let (gu, gv) = (gg.dx(), gg.dy());
    let evv = e.dyy();
    let guu = gg.dxx();
    let fuv = fu.dy();
    let data = (0..he.grid().len())
        .map(|k| {
            brioschi(
                [e.data()[k], f.data()[k], gg.data()[k]],
                [[eu.data()[k], ev.data()[k]], [fu.data()[k], fv.data()[k]], [gu.data()[k], gv.data()[k]]],
                [evv.data()[k], fuv.data()[k], guu.data()[k]],
            )
        })
        .collect();
    NodeField::new(*he.grid(), data).expect("same grid")
}

/// Brioschi's formula from the entries `[E, F, G]`, their first derivatives
/// `[[E_u, E_v], [F_u, F_v], [G_u, G_v]]` and `[E_vv, F_uv, G_uu]`.
pub fn brioschi(m: [f64; 3], d: [[f64; 2]; 3], d2: [f64; 3]) -> f64 {
    let [e, f, g] = m;
    let [[eu, ev], [fu, fv], [gu, gv]] = d;
    let m1 = det3([
        [-0.5 * d2[0] + d2[1] - 0.5 * d2[2], 0.5 * eu, fu - 0.5 * ev],
        [fv - 0.5 * gu, e, f],
        [0.5 * gv, f, g],
    ]);
    let m2 = det3([[0.0, 0.5 * ev, 0.5 * gu], [0.5 * ev, e, f], [0.5 * gu, f, g]]);
    let w = e * g - f * f;
    (m1 - m2) / (w * w)
}

fn det3(m: [[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

fn require_symmetric(a: &EndoField) -> Result<(), EnergyError> {
    let r = a.symmetry_residual();
    if r > 1e-8 * (1.0 + a.linf()) {
        return Err(EnergyError::NotSymmetric(r));
    }
    Ok(())
}

fn inverse_field(a: &EndoField) -> Result<EndoField, EnergyError> {
    let data = a
        .data()
        .iter()
        .enumerate()
        .map(|(k, m)| m.inverse().ok_or(EnergyError::Singular(k)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(NodeField::new(*a.grid(), data)?)
}

/// `∇·(A⁻¹ J ∇·(AJ))`.
pub fn curvature_divergence_term(a: &EndoField, g: &ConformalMetric) -> Result<ScalarField, EnergyError> {
    let w = fields::div_endo(&a.times_j(), g)?;
    let ainv = inverse_field(a)?;
    let v = ainv.apply(&fields::rot_j(&w));
    Ok(fields::div_vec(&v, g)?)
}

/// `Det(A)·κ[h(A)] − κ[g] − ∇·(A⁻¹J∇·(AJ))`, with both curvatures from Brioschi's formula.
pub fn curvature_identity_field(a: &EndoField, g: &ConformalMetric) -> Result<ScalarField, EnergyError> {
    require_symmetric(a)?;
    let h = MetricField::from_endo(a, g)?;
    let kh = metric_curvature(&h);
    // Both curvatures through the same oracle, so that constant multiples cancel exactly.
    let kg = metric_curvature(&MetricField::conformal_multiple(g, 1.0)?);
    let div = curvature_divergence_term(a, g)?;
    let det = a.map(|m| m.det());
    Ok(det.zip(&kh, |d, k| d * k).sub(&kg).sub(&div))
}

/// Interior L∞ of [`curvature_identity_field`].
pub fn curvature_identity_residual(a: &EndoField, g: &ConformalMetric) -> Result<f64, EnergyError> {
    Ok(curvature_identity_field(a, g)?.linf_interior())
}

/// `F_g[h] = −κ[h]·dArea[h]/dArea_g + κ_g`, with `κ[h]` from Brioschi's formula.
pub fn f_curvature(h: &MetricField, g: &ConformalMetric) -> Result<ScalarField, EnergyError> {
    g.check(h.grid())?;
    let kh = metric_curvature(h);
    let kg = metric_curvature(&MetricField::conformal_multiple(g, 1.0)?);
    let data = (0..h.grid().len())
        .map(|k| {
            let ratio = (h.data()[k].mat().det() / g.tensor(k).mat().det()).sqrt();
            -kh.data()[k] * ratio + kg.data()[k]
        })
        .collect();
    Ok(NodeField::new(*h.grid(), data)?)
}

/// `F_g[h] = −∇·(A⁻¹J∇·(AJ))` computed from `A = A[h]`.
pub fn f_explicit(h: &MetricField, g: &ConformalMetric) -> Result<ScalarField, EnergyError> {
    let a = a_field(h, g)?;
    Ok(curvature_divergence_term(&a, g)?.scaled(-1.0))
}

/// `G_g[h] = ∇F_g[h] = −∇∇·(A⁻¹J∇·(AJ))`.
pub fn correction_g(h: &MetricField, g: &ConformalMetric) -> Result<VectorField, EnergyError> {
    Ok(fields::grad(&f_explicit(h, g)?, g)?)
}

/// `G_g[h]` as the gradient of the curvature form of `F_g[h]`.
pub fn correction_g_curvature(h: &MetricField, g: &ConformalMetric) -> Result<VectorField, EnergyError> {
    Ok(fields::grad(&f_curvature(h, g)?, g)?)
}

/// The variant `−∇(Det(A)⁻¹∇·(A⁻¹J∇·(AJ)))`, which carries an extra `Det(A)⁻¹`
/// and is not the gradient of `F_g`; kept to measure the difference.
pub fn correction_g_with_det(h: &MetricField, g: &ConformalMetric) -> Result<VectorField, EnergyError> {
    let a = a_field(h, g)?;
    let div = curvature_divergence_term(&a, g)?;
    let f = div.zip(&a.map(|m| m.det()), |d, det| -d / det);
    Ok(fields::grad(&f, g)?)
}

/// `∇E − G`, the operator whose zeros are the one-harmonic metrics.
pub fn modified_gradient(h: &MetricField, g: &ConformalMetric) -> Result<VectorField, EnergyError> {
    let a = a_field(h, g)?;
    let ge = energy_gradient_of_a(&a, g)?;
    let f = curvature_divergence_term(&a, g)?.scaled(-1.0);
    let gg = fields::grad(&f, g)?;
    Ok(ge.sub(&gg))
}

/// Both sides of the modified-functional inequality
/// `∫⟨∇E − G, A⁻¹∇E⟩ ≥ ∫⟨∇E, A⁻¹∇E⟩`.
pub fn modified_inequality_check(h: &MetricField, g: &ConformalMetric) -> Result<(f64, f64), EnergyError> {
    let a = a_field(h, g)?;
    let ge = energy_gradient_of_a(&a, g)?;
    let gg = correction_g(h, g)?;
    let ainv_ge = inverse_field(&a)?.apply(&ge);
    let lhs = g.inner(&ge.sub(&gg), &ainv_ge);
    let rhs = g.inner(&ge, &ainv_ge);
    Ok((lhs, rhs))
}

/// Tolerance for the modified inequality.
pub fn modified_inequality_slack(rhs: f64) -> f64 {
    1e-8 + 1e-2 * rhs.abs()
}

/// The endomorphism `g⁻¹·Hess_g f` of a conformal metric at a point, from the
/// flat derivatives of `f` and `φ`.
pub fn hessian_endo(e2phi: f64, dphi: [f64; 2], df: [f64; 2], d2f: [f64; 3]) -> Mat2 {
    let pf = dphi[0] * df[0] + dphi[1] * df[1];
    // Hess_ij = f_ij − (φ_i f_j + φ_j f_i − δ_ij ∇φ·∇f)
    let h11 = d2f[0] - 2.0 * dphi[0] * df[0] + pf;
    let h12 = d2f[1] - dphi[0] * df[1] - dphi[1] * df[0];
    let h22 = d2f[2] - 2.0 * dphi[1] * df[1] + pf;
    Mat2::sym(h11, h12, h22) * (1.0 / e2phi)
}

/// Summary of the energy quantities at one metric.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnergyReport {
    pub energy: f64,
    pub gradient_linf: f64,
    pub correction_linf: f64,
    pub codazzi_residual: f64,
    pub symmetry_residual: f64,
}

pub fn report(h: &MetricField, g: &ConformalMetric) -> Result<EnergyReport, EnergyError> {
    let a = a_field(h, g)?;
    let c = CodazziField::measure(a.clone(), g)?;
    Ok(EnergyReport {
        energy: energy(h, g)?,
        gradient_linf: g.vec_linf_interior(&energy_gradient_of_a(&a, g)?),
        correction_linf: g.vec_linf_interior(&correction_g(h, g)?),
        codazzi_residual: c.codazzi_residual(),
        symmetry_residual: c.symmetry_residual(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::Topology;

    fn dgrid(n: usize) -> Grid {
        Grid::new(n, n, 1.0, 1.0, Topology::Dirichlet).unwrap()
    }

    #[test]
    fn test_energy_examples() {
        let g = ConformalMetric::from_fn(dgrid(16), |x, y| 0.1 * x - 0.2 * y * y);
        let area = g.area();
        let e = energy(&MetricField::conformal_multiple(&g, 1.0).unwrap(), &g).unwrap();
        assert!((e - SQRT_2 * area).abs() < 1e-12);
        let e = energy(&MetricField::conformal_multiple(&g, 3.0).unwrap(), &g).unwrap();
        assert!((e - 3.0 * SQRT_2 * area).abs() < 1e-11);
        let p = Grid::new(8, 8, 1.0, 1.0, Topology::Periodic).unwrap();
        let flat = ConformalMetric::flat(p);
        let h = MetricField::from_fn(p, |_, _| Mat2::diag(4.0, 9.0)).unwrap();
        assert!((energy(&h, &flat).unwrap() - SQRT_2 * 2.5).abs() < 1e-12);
    }

    #[test]
    fn test_gradient_vanishes_for_constant_multiple() {
        let g = ConformalMetric::from_fn(dgrid(24), |x, y| (x * y).sin());
        let h = MetricField::conformal_multiple(&g, 1.7).unwrap();
        assert!(energy_gradient(&h, &g).unwrap().linf() < 1e-10);
        assert!(correction_g(&h, &g).unwrap().linf() < 1e-9);
        let (l, r) = modified_inequality_check(&h, &g).unwrap();
        assert!(l.abs() < 1e-15 && r.abs() < 1e-15);
    }

    #[test]
    fn test_brioschi_matches_conformal_curvature() {
        let g = ConformalMetric::from_fn(dgrid(32), |x, y| 0.3 * (x + 2.0 * y).sin());
        let h = MetricField::conformal_multiple(&g, 1.0).unwrap();
        let d = metric_curvature(&h).sub(&g.curvature()).linf_interior();
        assert!(d < 1e-2, "{d}");
    }

    #[test]
    fn test_curvature_identity_constant_a() {
        let g = ConformalMetric::from_fn(dgrid(32), |x, y| 0.3 * x * y);
        let a = EndoField::constant(*g.grid(), Mat2::scalar(1.5));
        assert!(curvature_identity_residual(&a, &g).unwrap() < 1e-6);
        let bad = EndoField::constant(*g.grid(), Mat2::new(1.0, 0.5, 0.0, 1.0));
        assert!(matches!(curvature_identity_residual(&bad, &g), Err(EnergyError::NotSymmetric(_))));
    }

    #[test]
    fn test_second_variation_trivial() {
        let g = ConformalMetric::flat(dgrid(16));
        let h = MetricField::conformal_multiple(&g, 1.0).unwrap();
        assert_eq!(second_variation(&h, &g, &VectorField::zeros(*g.grid())).unwrap(), 0.0);
        // Conformal (scalar ∇X) field: Tr(∇X J) = 0.
        let x = VectorField::from_fn(*g.grid(), |x, y| [x, y]);
        assert!(second_variation(&h, &g, &x).unwrap().abs() < 1e-12);
    }

    #[test]
    fn test_pullback_fold_over() {
        let g = ConformalMetric::flat(dgrid(16));
        let h = MetricField::conformal_multiple(&g, 1.0).unwrap();
        let x = VectorField::from_fn(*g.grid(), |x, _| [-2.0 * x, 0.0]);
        assert!(matches!(pullback(&h, &x), Err(EnergyError::FoldOver { .. })));
    }

    #[test]
    fn test_codazzi_certify() {
        let g = ConformalMetric::flat(dgrid(16));
        let a = EndoField::from_fn(*g.grid(), |x, _| Mat2::diag(1.0, 1.0 + x));
        assert!(CodazziField::certify(a.clone(), &g, 1e-10, 1e-6).is_err());
        let c = CodazziField::measure(a, &g).unwrap();
        assert!((c.codazzi_residual() - 1.0).abs() < 1e-10);
    }
}
