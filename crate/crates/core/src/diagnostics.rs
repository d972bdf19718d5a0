//! Monitors for the compactness arguments: the intermediate complex
//! structure `Ĵ = Det(A)^{−1/2}·J·A`, α-harmonicity of the identity map,
//! map energies and the scalar collar/modulus bounds.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::energy_variation::{CodazziField, EnergyError, MetricField};
use crate::fields::{ConformalMetric, EndoField, FieldError, ScalarField, VectorField};
use crate::j_calculus::Mat2;
use crate::one_harmonic::Displacement;

#[derive(Debug, Error)]
pub enum DiagnosticsError {
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Energy(#[from] EnergyError),
    #[error("A is not positive definite at node {node} (det {det:.3e}, trace {trace:.3e})")]
    NotPositive { node: usize, det: f64, trace: f64 },
    #[error("Codazzi residual {residual:.3e} exceeds tolerance {tol:.3e}")]
    NotCodazzi { residual: f64, tol: f64 },
    #[error("map folds over at node {node} (Jacobian determinant {det:.3e})")]
    FoldOver { node: usize, det: f64 },
    #[error("{name} = {value} is outside its domain ({requirement})")]
    Domain { name: &'static str, value: f64, requirement: &'static str },
}

/// One line of a diagnostics report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub check: String,
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
    pub order: Option<f64>,
}

fn require_positive(a: &EndoField) -> Result<(), DiagnosticsError> {
    for (node, m) in a.data().iter().enumerate() {
        if !(m.det() > 0.0 && m.trace() > 0.0) {
            return Err(DiagnosticsError::NotPositive { node, det: m.det(), trace: m.trace() });
        }
    }
    Ok(())
}

/// `Ĵ = Det(A)^{−1/2}·J·A`, with `J` the complex structure of the conformal `g`.
pub fn intermediate_j(a: &EndoField, g: &ConformalMetric) -> Result<EndoField, DiagnosticsError> {
    g.check(a.grid())?;
    require_positive(a)?;
    Ok(a.map(|m| Mat2::j() * m * (1.0 / m.det().sqrt())))
}

/// `max ‖Ĵ² + Id‖` and `max ‖h(Ĵ·, Ĵ·) − h‖` with `h = g(A·, ·)`, relative to `h`.
pub fn intermediate_j_residuals(a: &EndoField, g: &ConformalMetric) -> Result<(f64, f64), DiagnosticsError> {
    let jh = intermediate_j(a, g)?;
    let mut square = 0.0f64;
    let mut compat = 0.0f64;
    for k in 0..a.grid().len() {
        let j = jh.data()[k];
        square = square.max((j * j + Mat2::id()).max_abs());
        let h = a.data()[k] * g.e2phi().data()[k];
        compat = compat.max((j.transpose() * h * j - h).max_abs() / h.max_abs());
    }
    Ok((square, compat))
}

/// The form `α = −½ d log Det(A)` with its exactness certificate.
#[derive(Debug, Clone)]
pub struct AlphaForm {
    alpha: VectorField,
}

impl AlphaForm {
    pub fn new(a: &EndoField) -> Result<Self, DiagnosticsError> {
        require_positive(a)?;
        let phi = a.map(|m| m.det().ln());
        Ok(Self { alpha: phi.gradient0().scaled(-0.5) })
    }

    pub fn field(&self) -> &VectorField {
        &self.alpha
    }

    /// Interior L∞ of the discrete curl `∂ₓα_y − ∂ᵧα_x`.
    pub fn curl(&self) -> f64 {
        let ay = self.alpha.component(1).dx();
        let ax = self.alpha.component(0).dy();
        ay.sub(&ax).linf_interior()
    }
}

/// Weighted α-harmonicity defect of the identity from `(chart, h)` to
/// `(chart, g)`, `h = g(A·, ·)`:
///
/// `Vᵏ = ∂ₘWᵐᵏ + Wᵐⁿ Γᵏₘₙ[g] − Wᵏⁿ αₙ`, `W = √Det h · h⁻¹`,
///
/// which is `√Det h` times `Δ id − D id·α^♯`. `h^{mn}γᵏₘₙ[h]` is taken in its
/// divergence form `−∂ₘ(√h hᵐᵏ)/√h`; in two dimensions `W` depends only on the
/// conformal class of `h`, so `V` does as well.
pub fn alpha_harmonic_field(a: &EndoField, g: &ConformalMetric) -> Result<VectorField, DiagnosticsError> {
    g.check(a.grid())?;
    require_positive(a)?;
    let grid = *a.grid();
    let h = a.zip(g.e2phi(), |m, e| m.symmetrized() * e);
    alpha_harmonic_weighted(&h, &AlphaForm::new(a)?, g, grid)
}

fn alpha_harmonic_weighted(
    h: &EndoField,
    alpha: &AlphaForm,
    g: &ConformalMetric,
    grid: crate::fields::Grid,
) -> Result<VectorField, DiagnosticsError> {
    let w = h.map(|m| m.adjugate() * (1.0 / m.det().sqrt()));
    // ∂ₘWᵐᵏ: divergence of the rows.
    let (wx, wy) = (w.dx(), w.dy());
    let data = (0..grid.len())
        .map(|k| {
            let (dx, dy) = (wx.data()[k], wy.data()[k]);
            let wk = w.data()[k];
            let p = g.dphi().data()[k];
            let al = alpha.alpha.data()[k];
            let div = [dx.a11 + dy.a21, dx.a12 + dy.a22];
            // Wᵐⁿ Γᵏₘₙ = 2Wᵏᵐφₘ − Tr(W)φₖ for a conformal g.
            let wp = wk.apply(p);
            let wa = wk.apply(al);
            let tr = wk.trace();
            [div[0] + 2.0 * wp[0] - tr * p[0] - wa[0], div[1] + 2.0 * wp[1] - tr * p[1] - wa[1]]
        })
        .collect();
    Ok(VectorField::new(grid, data)?)
}

/// Interior L∞ of `|V|_g·e^{−2φ}` from [`alpha_harmonic_field`], after
/// certifying the Codazzi residual.
pub fn alpha_harmonic_residual(a: &CodazziField, g: &ConformalMetric, codazzi_tol: f64) -> Result<f64, DiagnosticsError> {
    if a.codazzi_residual() > codazzi_tol {
        return Err(DiagnosticsError::NotCodazzi { residual: a.codazzi_residual(), tol: codazzi_tol });
    }
    alpha_harmonic_defect(a.base(), g)
}

/// [`alpha_harmonic_residual`] without the Codazzi precondition, for controls.
pub fn alpha_harmonic_defect(a: &EndoField, g: &ConformalMetric) -> Result<f64, DiagnosticsError> {
    let v = alpha_harmonic_field(a, g)?;
    let scaled = v.zip(g.phi(), |v, phi| {
        let s = (-phi).exp();
        [v[0] * s, v[1] * s]
    });
    Ok(g.vec_linf_interior(&scaled))
}

/// [`alpha_harmonic_defect`] with the source metric `h` replaced by `e^{2u}h`.
pub fn alpha_harmonic_defect_rescaled(a: &EndoField, g: &ConformalMetric, u: &ScalarField) -> Result<f64, DiagnosticsError> {
    g.check(a.grid())?;
    let grid = *a.grid();
    let h = a.zip(g.e2phi(), |m, e| m.symmetrized() * e).zip(u, |m, u| m * (2.0 * u).exp());
    let v = alpha_harmonic_weighted(&h, &AlphaForm::new(a)?, g, grid)?;
    let scaled = v.zip(g.phi(), |v, phi| {
        let s = (-phi).exp();
        [v[0] * s, v[1] * s]
    });
    Ok(g.vec_linf_interior(&scaled))
}

/// Smallest value over the interior of `Δ_h F − dF(α^♯)` for the convex
/// `F(y) = |y − y₀|²` on a flat target, `h = g(A·, ·)` on the source.
pub fn max_principle_premise(a: &EndoField, g: &ConformalMetric, y0: [f64; 2]) -> Result<f64, DiagnosticsError> {
    require_positive(a)?;
    let grid = *a.grid();
    let h = a.zip(g.e2phi(), |m, e| m.symmetrized() * e);
    let alpha = AlphaForm::new(a)?;
    let f = ScalarField::from_fn(grid, |x, y| (x - y0[0]).powi(2) + (y - y0[1]).powi(2));
    let df = f.gradient0();
    // Δ_h F = ∂ₘ(√h hᵐⁿ ∂ₙF)/√h.
    let flux = h.zip(&df, |m, d| (m.adjugate() * (1.0 / m.det().sqrt())).apply(d));
    let div = flux.component(0).dx().add(&flux.component(1).dy());
    let out = (0..grid.len()).map(|k| {
        let m = h.data()[k];
        let hinv = m.adjugate() * (1.0 / m.det());
        let sharp = hinv.apply(alpha.alpha.data()[k]);
        let d = df.data()[k];
        div.data()[k] / m.det().sqrt() - (d[0] * sharp[0] + d[1] * sharp[1])
    });
    let out = ScalarField::new(grid, out.collect())?;
    Ok(grid.interior().into_iter().map(|k| out.data()[k]).fold(f64::INFINITY, f64::min))
}

/// `∫ gᵐⁿ h_pq Φᵖₘ Φ^q_n dVol_g` for `Φ = id + X` (or the identity), with the
/// target metric sampled at `Φ(x)`.
pub fn map_energy(phi: Option<&Displacement>, gs: &ConformalMetric, gn: &MetricField) -> Result<f64, DiagnosticsError> {
    let grid = *gs.grid();
    gs.check(gn.grid())?;
    let jac = phi.map(|d| d.field().jacobian0());
    let hn = gn.as_endo();
    let mut sum = 0.0;
    for k in 0..grid.len() {
        let (dphi, h) = match (&jac, phi) {
            (Some(jac), Some(d)) => {
                let m = Mat2::id() + jac.data()[k];
                if m.det() <= 0.0 {
                    return Err(DiagnosticsError::FoldOver { node: k, det: m.det() });
                }
                let [x, y] = d.map_node(k);
                (m, hn.sample(x, y))
            }
            _ => (Mat2::id(), hn.data()[k]),
        };
        let e = gs.e2phi().data()[k];
        let density = (dphi.transpose() * h * dphi).trace() / e;
        sum += density * e * grid.weight(k);
    }
    Ok(sum)
}

/// `∫ Tr(S⁻¹T) dVol_S`, the energy of the identity from `(chart, S)` to `(chart, T)`.
fn identity_energy(s: &EndoField, t: &EndoField) -> f64 {
    let grid = *s.grid();
    (0..grid.len())
        .map(|k| {
            let sk = s.data()[k];
            let inv = sk.adjugate() * (1.0 / sk.det());
            (inv * t.data()[k]).trace() * sk.det().sqrt() * grid.weight(k)
        })
        .sum()
}

/// `(E(Ψ₁) + E(Ψ₂), ∫ 2Tr(A)·Cosh(φ/2) dVol)` with `φ = log Det(A)`.
///
/// The left side integrates the identity from the `Ĵ`-compatible metric
/// `ω(·, Ĵ·) = −JĴ` into `g` and into `g(A·, A·)`.
pub fn energy_identity_check(a: &CodazziField, g: &ConformalMetric) -> Result<(f64, f64), DiagnosticsError> {
    let am = a.base();
    let jh = intermediate_j(am, g)?;
    let source = jh.map(|j| (-(Mat2::j() * j)).symmetrized());
    let tg = EndoField::from_fn(*g.grid(), |_, _| Mat2::id()).zip(g.e2phi(), |m, e| m * e);
    let ta = am.zip(g.e2phi(), |m, e| m.transpose() * m * e);
    let lhs = identity_energy(&source, &tg) + identity_energy(&source, &ta);
    let integrand = am.map(|m| 2.0 * m.trace() * (0.5 * m.det().ln()).cosh());
    Ok((lhs, g.integrate(&integrand)))
}

/// Collar and modulus quantities for a hyperbolic surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollarReport {
    /// `arcsinh(1/sinh(sys/2))`, the separation forced between lifts.
    pub l2max: f64,
    /// Half-modulus `(2π/sys)·arctan(tanh R)` of the collar of half-width `R`.
    #[serde(rename = "L")]
    pub l: f64,
    /// Whether `sinh(sys/2)·sinh(2R) < 1`, so that the collar embeds.
    pub collar_valid: bool,
    /// `4π²|χ|/sys²`.
    pub mod_upper: f64,
}

pub fn collar_and_modulus(sys: f64, r: f64, genus: u32) -> Result<CollarReport, DiagnosticsError> {
    if !(sys > 0.0 && sys.is_finite()) {
        return Err(DiagnosticsError::Domain { name: "sys", value: sys, requirement: "sys > 0" });
    }
    if !(r > 0.0) {
        return Err(DiagnosticsError::Domain { name: "R", value: r, requirement: "R > 0" });
    }
    if genus < 2 {
        return Err(DiagnosticsError::Domain { name: "genus", value: genus as f64, requirement: "genus >= 2" });
    }
    let half = (0.5 * sys).sinh();
    Ok(CollarReport {
        l2max: (1.0 / half).asinh(),
        l: 2.0 * PI / sys * r.tanh().atan(),
        collar_valid: half * (2.0 * r).sinh() < 1.0,
        mod_upper: 4.0 * PI * PI * (2.0 * genus as f64 - 2.0) / (sys * sys),
    })
}

/// `2π·area/sys²`, the bound on the modulus of an annulus carrying a metric
/// with systole `sys` and area `area`. Infinite for a degenerate systole.
pub fn modulus_lower_via_flat(sys_flat: f64, area_flat: f64) -> f64 {
    if sys_flat == 0.0 {
        return f64::INFINITY;
    }
    2.0 * PI * area_flat / (sys_flat * sys_flat)
}

/// The modulus bound for `ĥ` from `Sys(ĥ) ≥ B^{−5/4}` and `Area(ĥ) ≤ B`, next
/// to the constant `2πB⁴` quoted for it: `(2πB^{7/2}, 2πB⁴)`.
pub fn intermediate_modulus_bounds(b: f64) -> (f64, f64) {
    (modulus_lower_via_flat(b.powf(-1.25), b), 2.0 * PI * b.powi(4))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{Grid, Topology};

    fn flat(n: usize) -> ConformalMetric {
        ConformalMetric::flat(Grid::new(n, n, 1.0, 1.0, Topology::Dirichlet).unwrap())
    }

    #[test]
    fn test_intermediate_j_examples() {
        let g = flat(8);
        let grid = *g.grid();
        for c in [1.0, 3.5] {
            let jh = intermediate_j(&EndoField::constant(grid, Mat2::scalar(c)), &g).unwrap();
            assert!(jh.data().iter().all(|m| (*m - Mat2::j()).max_abs() < 1e-15));
        }
        let jh = intermediate_j(&EndoField::constant(grid, Mat2::diag(4.0, 1.0)), &g).unwrap();
        assert_eq!(jh.data()[0], Mat2::new(0.0, -0.5, 2.0, 0.0));
        assert_eq!(jh.data()[0] * jh.data()[0], -Mat2::id());
        assert!(intermediate_j(&EndoField::constant(grid, Mat2::diag(-1.0, 1.0)), &g).is_err());
    }

    #[test]
    fn test_alpha_harmonic_constant() {
        let g = flat(16);
        let a = CodazziField::measure(EndoField::constant(*g.grid(), Mat2::scalar(2.5)), &g).unwrap();
        assert!(alpha_harmonic_residual(&a, &g, 1e-8).unwrap() < 1e-10);
        let bad = CodazziField::measure(EndoField::from_fn(*g.grid(), |x, _| Mat2::diag(1.0, 1.0 + x)), &g).unwrap();
        assert!(matches!(alpha_harmonic_residual(&bad, &g, 1e-3), Err(DiagnosticsError::NotCodazzi { .. })));
    }

    #[test]
    fn test_map_energy_examples() {
        let g = flat(16);
        let grid = *g.grid();
        let area = g.area();
        let id = MetricField::conformal_multiple(&g, 1.0).unwrap();
        assert!((map_energy(None, &g, &id).unwrap() - 2.0 * area).abs() < 1e-12);
        let c = MetricField::conformal_multiple(&g, 3.0).unwrap();
        assert!((map_energy(None, &g, &c).unwrap() - 18.0 * area).abs() < 1e-12);
        let zero = Displacement::zero(grid).unwrap();
        assert!((map_energy(Some(&zero), &g, &c).unwrap() - 18.0 * area).abs() < 1e-12);
    }

    #[test]
    fn test_energy_identity_examples() {
        let g = flat(16);
        let area = g.area();
        for c in [1.0, 2.0, 0.5] {
            let a = CodazziField::measure(EndoField::constant(*g.grid(), Mat2::scalar(c)), &g).unwrap();
            let (lhs, rhs) = energy_identity_check(&a, &g).unwrap();
            assert!((rhs - 2.0 * (c * c + 1.0) * area).abs() < 1e-12, "{c}");
            assert!((lhs - rhs).abs() < 1e-12);
        }
    }

    #[test]
    fn test_collar_examples() {
        let r = collar_and_modulus(2.0 * 1f64.asinh(), 0.1, 2).unwrap();
        assert!((r.l2max - 1f64.asinh()).abs() < 1e-12);
        assert!(r.collar_valid);
        let r = collar_and_modulus(2.0 * PI, 0.1, 2).unwrap();
        assert!((r.mod_upper - 2.0).abs() < 1e-12);
        assert!(!collar_and_modulus(2.0 * PI, 5.0, 2).unwrap().collar_valid);
        let sys = 1e-3;
        let ls: Vec<f64> = [0.5, 1.0, 2.0, 4.0].iter().map(|&r| collar_and_modulus(sys, r, 3).unwrap().l).collect();
        assert!(ls.windows(2).all(|w| w[1] > w[0]));
        let far = collar_and_modulus(sys, 30.0, 3).unwrap().l;
        assert!((far - 2.0 * PI / sys * PI / 4.0).abs() < 1e-9 * far);
        assert!(collar_and_modulus(0.0, 1.0, 2).is_err());
        assert!(collar_and_modulus(1.0, 1.0, 1).is_err());
    }

    #[test]
    fn test_modulus_bounds() {
        assert!((modulus_lower_via_flat(1.0, 3.0) - 2.0 * PI * 3.0).abs() < 1e-12);
        assert!((modulus_lower_via_flat(2.0 * PI, 2.0 * PI * 3.0) - 3.0).abs() < 1e-12);
        assert!(modulus_lower_via_flat(0.0, 1.0).is_infinite());
        let (derived, stated) = intermediate_modulus_bounds(2.0);
        assert!((derived - 2.0 * PI * 2f64.powf(3.5)).abs() < 1e-9);
        assert!((stated - 2.0 * PI * 16.0).abs() < 1e-12);
    }
}
