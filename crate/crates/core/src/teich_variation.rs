//! The trace functional `Ê[g, h] = ∫ Tr(A) dArea_g` and its derivatives along
//! the quadratic families `h_t = h₀(B_t·, B_t·)`, `B_t = (1 + t²φ₀)Id + tB`.
//!
//! On a chart `Ê` is evaluated with the pointwise `A` of the pair; whether that
//! `A` is Codazzi (so that `Ê` is the functional itself rather than an upper
//! bound) is reported alongside.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::energy_variation::{self, CodazziField, EnergyError, MetricField};
use crate::fields::{ConformalMetric, EndoField, FieldError, ScalarField, Topology};
use crate::j_calculus::Mat2;
use crate::linalg::{BandMatrix, LinalgError};

/// Largest admissible `|Tr B|` for a trace-free field.
pub const TRACE_TOL: f64 = 1e-10;

/// Step of the central differences in `t`.
pub const FD_DT: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum TeichError {
    #[error(transparent)]
    Energy(#[from] EnergyError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("linear solve failed: {0}")]
    Linear(#[from] LinalgError),
    #[error("field is not trace-free (max |Tr| = {0:.3e})")]
    NotTraceFree(f64),
    #[error("field is not symmetric (residual {0:.3e})")]
    NotSymmetric(f64),
    #[error("field is not Codazzi (residual {residual:.3e} > {tol:.3e})")]
    NotCodazzi { residual: f64, tol: f64 },
    #[error("B_t is degenerate at t = {t} (smallest eigenvalue {min:.3e})")]
    Degenerate { t: f64, min: f64 },
    #[error("φ₀ needs a Dirichlet grid")]
    NotDirichlet,
}

fn max_trace(b: &EndoField) -> f64 {
    b.data().iter().fold(0.0, |m, v| f64::max(m, v.trace().abs()))
}

fn require_trace_free(b: &EndoField) -> Result<(), TeichError> {
    let t = max_trace(b);
    if t > TRACE_TOL {
        return Err(TeichError::NotTraceFree(t));
    }
    Ok(())
}

/// `Ê[g, h]` with `A = A[h]` relative to the conformal background `g`.
pub fn e_hat(g: &ConformalMetric, h: &MetricField) -> Result<f64, EnergyError> {
    let a = energy_variation::a_field(h, g)?;
    Ok(g.integrate(&a.trace()))
}

/// `Ê` for two general chart metrics: `∫ Tr√(G⁻¹H) √det G dx dy`, using
/// `Tr√M = √(Tr M + 2√det M)` for `M` with positive eigenvalues.
pub fn e_hat_general(g: &MetricField, h: &MetricField) -> Result<f64, EnergyError> {
    if g.grid() != h.grid() {
        return Err(FieldError::GridMismatch.into());
    }
    let grid = *g.grid();
    let mut s = 0.0;
    for k in 0..grid.len() {
        let (gm, hm) = (g.data()[k].mat(), h.data()[k].mat());
        let m = gm.inverse().expect("positive-definite") * hm;
        let tr = (m.trace() + 2.0 * m.det().max(0.0).sqrt()).sqrt();
        s += grid.weight(k) * tr * gm.det().sqrt();
    }
    Ok(s)
}

/// The pointwise `A` with `h(A·, A·) = g` and `A` self-adjoint for `h`:
/// the principal square root `√(H⁻¹G) = (M + √det M·Id)/√(Tr M + 2√det M)`.
pub fn a_general(h: &MetricField, g: &MetricField) -> Result<EndoField, EnergyError> {
    if g.grid() != h.grid() {
        return Err(FieldError::GridMismatch.into());
    }
    let data = h
        .data()
        .iter()
        .zip(g.data())
        .map(|(hm, gm)| {
            let m = hm.mat().inverse().expect("positive-definite") * gm.mat();
            let s = m.det().max(0.0).sqrt();
            (m + Mat2::scalar(s)) * (1.0 / (m.trace() + 2.0 * s).sqrt())
        })
        .collect();
    Ok(EndoField::new(*h.grid(), data)?)
}

/// `Ê` together with the Codazzi residual of the `A` used.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EHatReport {
    pub value: f64,
    pub codazzi_residual: f64,
}

pub fn e_hat_report(g: &ConformalMetric, h: &MetricField) -> Result<EHatReport, EnergyError> {
    let a = energy_variation::a_field(h, g)?;
    let value = g.integrate(&a.trace());
    let codazzi_residual = CodazziField::measure(a, g)?.codazzi_residual();
    Ok(EHatReport { value, codazzi_residual })
}

/// Solves `(Δ_h − 2)φ₀ = Det(B)` with `φ₀ = 0` on the boundary, using the
/// five-point Laplacian, so that the discrete maximum principle holds.
pub fn phi0_solve(b: &EndoField, h: &ConformalMetric) -> Result<ScalarField, TeichError> {
    h.check(b.grid())?;
    let grid = *h.grid();
    if grid.topology() != Topology::Dirichlet {
        return Err(TeichError::NotDirichlet);
    }
    require_trace_free(b)?;
    let sym = b.symmetry_residual();
    if sym > TRACE_TOL {
        return Err(TeichError::NotSymmetric(sym));
    }
    let (nx, ny) = (grid.nx(), grid.ny());
    let (mx, my) = (nx - 2, ny - 2);
    let (cx, cy) = (1.0 / (grid.dx() * grid.dx()), 1.0 / (grid.dy() * grid.dy()));
    let n = mx * my;
    let mut m = BandMatrix::zeros(n, mx, mx);
    let mut rhs = vec![0.0; n];
    for j in 0..my {
        for i in 0..mx {
            let row = j * mx + i;
            let k = grid.idx(i + 1, j + 1);
            let e = h.e2phi().data()[k];
            // Multiplied through by e^{2φ}: Δ₀φ₀ − 2e^{2φ}φ₀ = e^{2φ}·Det B.
            m.set(row, row, -2.0 * cx - 2.0 * cy - 2.0 * e);
            if i > 0 {
                m.set(row, row - 1, cx);
            }
            if i + 1 < mx {
                m.set(row, row + 1, cx);
            }
            if j > 0 {
                m.set(row, row - mx, cy);
            }
            if j + 1 < my {
                m.set(row, row + mx, cy);
            }
            rhs[row] = e * b.data()[k].det();
        }
    }
    let sol = m.factor()?.solve(&rhs)?;
    let mut phi = ScalarField::zeros(grid);
    for j in 0..my {
        for i in 0..mx {
            phi.data_mut()[grid.idx(i + 1, j + 1)] = sol[j * mx + i];
        }
    }
    Ok(phi)
}

/// The family `B_t = (1 + t²φ₀)Id + tB` over a conformal `h₀`.
#[derive(Debug, Clone)]
pub struct DeformationFamily {
    b: EndoField,
    phi0: ScalarField,
    range: (f64, f64),
}

impl DeformationFamily {
    /// Certifies `B` (trace-free, symmetric, Codazzi within `codazzi_tol` for
    /// `h₀`), solves for `φ₀` and checks `B_t > 0` on `t_range`.
    pub fn new(b: EndoField, h0: &ConformalMetric, codazzi_tol: f64, t_range: (f64, f64)) -> Result<Self, TeichError> {
        let phi0 = phi0_solve(&b, h0)?;
        let residual = CodazziField::measure(b.clone(), h0)?.codazzi_residual();
        if residual > codazzi_tol {
            return Err(TeichError::NotCodazzi { residual, tol: codazzi_tol });
        }
        let fam = Self { b, phi0, range: t_range };
        fam.check_positive()?;
        Ok(fam)
    }

    /// Smallest eigenvalue of `B_t` over the nodes: `1 + t²φ₀ − |t|·√(−Det B)`.
    pub fn min_eigenvalue(&self, t: f64) -> f64 {
        self.b
            .data()
            .iter()
            .zip(self.phi0.data())
            .map(|(b, p)| 1.0 + t * t * p - t.abs() * (-b.det()).max(0.0).sqrt())
            .fold(f64::INFINITY, f64::min)
    }

    fn check_positive(&self) -> Result<(), TeichError> {
        let (t0, t1) = self.range;
        let mut ts = vec![t0, t1, 0.5 * (t0 + t1)];
        // The minimum over t of the eigenvalue bound sits at |t| = ρ/(2φ₀) per node.
        for (b, p) in self.b.data().iter().zip(self.phi0.data()) {
            if *p > 0.0 {
                let t = (-b.det()).max(0.0).sqrt() / (2.0 * p);
                for c in [t, -t] {
                    if c > t0 && c < t1 {
                        ts.push(c);
                    }
                }
            }
        }
        for t in ts {
            let min = self.min_eigenvalue(t);
            if !(min > 0.0) {
                return Err(TeichError::Degenerate { t, min });
            }
        }
        Ok(())
    }

    pub fn b(&self) -> &EndoField {
        &self.b
    }

    pub fn phi0(&self) -> &ScalarField {
        &self.phi0
    }

    pub fn t_range(&self) -> (f64, f64) {
        self.range
    }

    pub fn b_t(&self, t: f64) -> EndoField {
        self.b.zip(&self.phi0, |b, p| Mat2::scalar(1.0 + t * t * p) + b * t)
    }

    pub fn b_dot(&self, t: f64) -> EndoField {
        self.b.zip(&self.phi0, |b, p| Mat2::scalar(2.0 * t * p) + b)
    }

    pub fn b_ddot(&self) -> EndoField {
        self.phi0.map(|p| Mat2::scalar(2.0 * p))
    }

    /// `h_t = h₀(B_t·, B_t·)`.
    pub fn metric(&self, h0: &ConformalMetric, t: f64) -> Result<MetricField, EnergyError> {
        MetricField::from_endo(&self.b_t(t), h0)
    }
}

/// `−∫ Tr(A₀Ḃ₀) dArea[h₀]`.
pub fn e_hat_first_derivative(a0: &CodazziField, bdot0: &EndoField, h0: &ConformalMetric) -> Result<f64, TeichError> {
    h0.check(a0.base().grid())?;
    h0.check(bdot0.grid())?;
    require_trace_free(bdot0)?;
    Ok(-h0.integrate(&a0.base().mul(bdot0).trace()))
}

/// `∫ Tr(A_t)Tr(B_t⁻¹Ḃ_t) − Tr(A_tB_t⁻¹Ḃ_t) dArea[h_t]` with
/// `dArea[h_t] = Det(B_t) dArea[h₀]`.
pub fn e_hat_first_derivative_general(
    a_t: &EndoField,
    b_t: &EndoField,
    bdot_t: &EndoField,
    h0: &ConformalMetric,
) -> Result<f64, TeichError> {
    h0.check(a_t.grid())?;
    h0.check(b_t.grid())?;
    h0.check(bdot_t.grid())?;
    let grid = *h0.grid();
    let data = (0..grid.len())
        .map(|k| {
            let (a, b, bd) = (a_t.data()[k], b_t.data()[k], bdot_t.data()[k]);
            let m = b.inverse().expect("B_t invertible") * bd;
            (a.trace() * m.trace() - (a * m).trace()) * b.det()
        })
        .collect();
    Ok(h0.integrate(&ScalarField::new(grid, data)?))
}

/// `Ê(t)` along a family with the pointwise `A_t` of `(h_t, h₀(A₀·, A₀·))`.
pub fn e_hat_along(a0: &CodazziField, family: &DeformationFamily, h0: &ConformalMetric, t: f64) -> Result<f64, TeichError> {
    let g = MetricField::from_endo(a0.base(), h0)?;
    Ok(e_hat_general(&family.metric(h0, t)?, &g)?)
}

/// Second central difference of `Ê` along the family and the lower bound
/// `−∫ Tr(J A₀ J B̈₀) dArea[h₀] = ∫ 2φ₀ Tr(A₀) dArea[h₀]`.
pub fn second_derivative_lower_bound(
    a0: &CodazziField,
    family: &DeformationFamily,
    h0: &ConformalMetric,
) -> Result<(f64, f64), TeichError> {
    h0.check(a0.base().grid())?;
    let e = |t| e_hat_along(a0, family, h0, t);
    let lhs = (e(FD_DT)? - 2.0 * e(0.0)? + e(-FD_DT)?) / (FD_DT * FD_DT);
    let j = Mat2::j();
    let integrand = a0.base().zip(&family.b_ddot(), |a, bdd| -(j * a * j * bdd).trace());
    Ok((lhs, h0.integrate(&integrand)))
}

/// Slack for the second-derivative bound.
pub fn second_derivative_slack(rhs: f64) -> f64 {
    1e-8 + 5e-2 * rhs.abs()
}

/// `∫ Tr((A₊ + A₋)B) dArea[h₀]`.
pub fn critical_sum_check(
    aplus: &CodazziField,
    aminus: &CodazziField,
    b: &EndoField,
    h0: &ConformalMetric,
) -> Result<f64, TeichError> {
    h0.check(aplus.base().grid())?;
    h0.check(aminus.base().grid())?;
    h0.check(b.grid())?;
    require_trace_free(b)?;
    let s = aplus.base().add(aminus.base());
    Ok(h0.integrate(&s.mul(b).trace()))
}

/// [`critical_sum_check`] divided by `‖A₊ + A₋‖·‖B‖` in `L²(dArea[h₀])`.
pub fn critical_sum_relative(
    aplus: &CodazziField,
    aminus: &CodazziField,
    b: &EndoField,
    h0: &ConformalMetric,
) -> Result<f64, TeichError> {
    let v = critical_sum_check(aplus, aminus, b, h0)?;
    let s = aplus.base().add(aminus.base());
    let ns = h0.integrate(&s.map(|m| m.inner(m))).sqrt();
    let nb = h0.integrate(&b.map(|m| m.inner(m))).sqrt();
    Ok(v / (ns * nb).max(f64::MIN_POSITIVE))
}

/// Threshold on [`critical_sum_relative`] above which a pair is reported
/// as not critical.
pub const NON_CRITICAL_THRESHOLD: f64 = 1e-2;

/// `Hess_{h₀} f − f·Id` on the nodes from closed-form derivatives of `f`;
/// Codazzi for the hyperbolic metric.
pub fn hessian_type_field(
    h0: &ConformalMetric,
    f: impl Fn(f64, f64) -> (f64, [f64; 2], [f64; 3]),
) -> EndoField {
    let grid = *h0.grid();
    let data = (0..grid.len())
        .map(|k| {
            let [x, y] = grid.point(k);
            let (v, df, d2f) = f(x, y);
            energy_variation::hessian_endo(h0.e2phi().data()[k], h0.dphi().data()[k], df, d2f) - Mat2::scalar(v)
        })
        .collect();
    EndoField::new(grid, data).expect("same grid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::Grid;
    use crate::fixtures::{self, HarmonicQuadratic, HyperbolicCodazzi};
    use crate::rng::{bump, bump_gradient, stream, TrigSum};

    fn dirichlet(n: usize, l: f64) -> Grid {
        Grid::new(n, n, l, l, Topology::Dirichlet).unwrap()
    }

    fn codazzi(a: EndoField, g: &ConformalMetric) -> CodazziField {
        CodazziField::measure(a, g).unwrap()
    }

    #[test]
    fn test_e_hat_constant_multiples() {
        let g = fixtures::poincare(dirichlet(24, 1.0));
        let area = g.area();
        let h = MetricField::conformal_multiple(&g, 1.0).unwrap();
        assert!((e_hat(&g, &h).unwrap() - 2.0 * area).abs() < 1e-10 * area);
        let c = 1.7;
        let h = MetricField::conformal_multiple(&g, c).unwrap();
        assert!((e_hat(&g, &h).unwrap() - 2.0 * c * area).abs() < 1e-10 * area);
        // Swap the roles: c²g as the conformal background, g as the metric.
        let gc = ConformalMetric::new(g.phi().map(|p| p + c.ln()));
        let g_as_metric = MetricField::conformal_multiple(&g, 1.0).unwrap();
        let swapped = e_hat(&gc, &g_as_metric).unwrap();
        assert!((swapped - e_hat(&g, &h).unwrap()).abs() < 1e-10 * area, "{swapped}");
    }

    #[test]
    fn test_e_hat_routes_agree() {
        let grid = dirichlet(20, 1.0);
        let g = fixtures::poincare(grid);
        let mut r = stream(4, 0);
        let a = fixtures::SmoothSym::random(&mut r, &grid, 1.3, 0.3, None, 2);
        let h = MetricField::from_endo(&a.nodal(grid), &g).unwrap();
        let gm = MetricField::conformal_multiple(&g, 1.0).unwrap();
        let e1 = e_hat(&g, &h).unwrap();
        let e2 = e_hat_general(&gm, &h).unwrap();
        assert!((e1 - e2).abs() < 1e-12 * e1.abs(), "{e1} {e2}");
    }

    #[test]
    fn test_a_general_square_root() {
        let grid = dirichlet(12, 1.0);
        let mut r = stream(4, 1);
        let a = fixtures::SmoothSym::random(&mut r, &grid, 1.0, 0.4, None, 1);
        let b = fixtures::SmoothSym::random(&mut r, &grid, 1.5, 0.4, None, 1);
        let h = MetricField::from_fn(grid, |x, y| a.value(x, y) * a.value(x, y)).unwrap();
        let g = MetricField::from_fn(grid, |x, y| b.value(x, y) * b.value(x, y)).unwrap();
        let s = a_general(&h, &g).unwrap();
        for k in 0..grid.len() {
            let (hm, gm, m) = (h.data()[k].mat(), g.data()[k].mat(), s.data()[k]);
            let back = m.transpose() * hm * m;
            assert!((back - gm).max_abs() < 1e-12);
            assert!((hm * m).asymmetry() < 1e-12);
        }
    }

    #[test]
    fn test_phi0_zero_and_plateau() {
        let g = ConformalMetric::flat(dirichlet(24, 1.0));
        let phi = phi0_solve(&EndoField::zeros(*g.grid()), &g).unwrap();
        assert_eq!(phi.linf(), 0.0);
        // Large flat domain: (Δ − 2)φ = −1 has the plateau 1/2 far from the boundary.
        let g = ConformalMetric::flat(dirichlet(81, 20.0));
        let b = EndoField::constant(*g.grid(), Mat2::diag(1.0, -1.0));
        let phi = phi0_solve(&b, &g).unwrap();
        let c = phi.at(40, 40);
        assert!((c - 0.5).abs() < 1e-4, "{c}");
        assert!(phi.min() >= -1e-10);
    }

    #[test]
    fn test_phi0_rejects_traceful() {
        let g = ConformalMetric::flat(dirichlet(12, 1.0));
        let b = EndoField::constant(*g.grid(), Mat2::diag(1.0, -0.5));
        assert!(matches!(phi0_solve(&b, &g), Err(TeichError::NotTraceFree(_))));
        let p = ConformalMetric::flat(Grid::new(12, 12, 1.0, 1.0, Topology::Periodic).unwrap());
        let b = EndoField::zeros(*p.grid());
        assert!(matches!(phi0_solve(&b, &p), Err(TeichError::NotDirichlet)));
    }

    #[test]
    fn test_first_derivative_examples() {
        let g = ConformalMetric::flat(dirichlet(16, 1.0));
        let grid = *g.grid();
        let a0 = codazzi(EndoField::constant(grid, Mat2::diag(2.0, 1.0)), &g);
        let zero = e_hat_first_derivative(&a0, &EndoField::zeros(grid), &g).unwrap();
        assert_eq!(zero, 0.0);
        let b = EndoField::constant(grid, Mat2::diag(1.0, -1.0));
        let v = e_hat_first_derivative(&a0, &b, &g).unwrap();
        assert!((v + 1.0).abs() < 1e-12, "{v}");
        let ac = codazzi(EndoField::constant(grid, Mat2::scalar(3.0)), &g);
        let q = HarmonicQuadratic::random(&mut stream(4, 2), 3, 1.0).field(&g);
        assert!(e_hat_first_derivative(&ac, &q, &g).unwrap().abs() < 1e-12);
    }

    fn hyperbolic_setup(n: usize, seed: u64) -> (ConformalMetric, CodazziField, DeformationFamily) {
        let grid = dirichlet(n, 1.0);
        let h0 = fixtures::poincare(grid);
        let mut r = stream(seed, 3);
        let hc = HyperbolicCodazzi::random(&mut r, 1.5, 0.05);
        let a0 = codazzi(hc.nodal(grid), &h0);
        let q = HarmonicQuadratic::random(&mut r, 4, 0.3);
        let fam = DeformationFamily::new(q.field(&h0), &h0, 1.0, (-0.1, 0.1)).unwrap();
        (h0, a0, fam)
    }

    #[test]
    fn test_first_derivative_matches_fd() {
        let (h0, a0, fam) = hyperbolic_setup(24, 0);
        let formula = e_hat_first_derivative(&a0, fam.b(), &h0).unwrap();
        let dt = 1e-4;
        let fd = (e_hat_along(&a0, &fam, &h0, dt).unwrap() - e_hat_along(&a0, &fam, &h0, -dt).unwrap()) / (2.0 * dt);
        assert!((fd - formula).abs() < 1e-6 * formula.abs().max(1e-3), "{fd} {formula}");
        // The general formula at t ≠ 0, with the pointwise A_t.
        let t = 0.05;
        let g = MetricField::from_endo(a0.base(), &h0).unwrap();
        let a_t = a_general(&fam.metric(&h0, t).unwrap(), &g).unwrap();
        let general = e_hat_first_derivative_general(&a_t, &fam.b_t(t), &fam.b_dot(t), &h0).unwrap();
        let fd_t = (e_hat_along(&a0, &fam, &h0, t + dt).unwrap() - e_hat_along(&a0, &fam, &h0, t - dt).unwrap())
            / (2.0 * dt);
        assert!((fd_t - general).abs() < 1e-6 * general.abs().max(1e-3), "{fd_t} {general}");
    }

    #[test]
    fn test_second_derivative_flat_diag() {
        let g = ConformalMetric::flat(dirichlet(33, 4.0));
        let grid = *g.grid();
        let a0 = codazzi(EndoField::constant(grid, Mat2::id()), &g);
        let zero = DeformationFamily::new(EndoField::zeros(grid), &g, 1e-12, (-0.1, 0.1)).unwrap();
        let (l, r) = second_derivative_lower_bound(&a0, &zero, &g).unwrap();
        assert!(r == 0.0 && l.abs() < 1e-6, "{l} {r}");
        let fam = DeformationFamily::new(EndoField::constant(grid, Mat2::diag(1.0, -1.0)), &g, 1e-12, (-0.1, 0.1))
            .unwrap();
        let (l, r) = second_derivative_lower_bound(&a0, &fam, &g).unwrap();
        let four_int = 4.0 * g.integrate(fam.phi0());
        assert!((r - four_int).abs() < 1e-12 * four_int, "{r} {four_int}");
        assert!(l >= r - second_derivative_slack(r), "{l} {r}");
        assert!(l > 0.0);
    }

    #[test]
    fn test_second_derivative_seeded() {
        for seed in 0..4 {
            let (h0, a0, fam) = hyperbolic_setup(24, seed);
            assert!(fam.phi0().min() >= -1e-10);
            let (l, r) = second_derivative_lower_bound(&a0, &fam, &h0).unwrap();
            assert!(r > 0.0 && l > 0.0, "seed {seed}: {l} {r}");
            assert!(l >= r - second_derivative_slack(r), "seed {seed}: {l} {r}");
        }
    }

    #[test]
    fn test_degenerate_family_rejected() {
        let g = ConformalMetric::flat(dirichlet(16, 1.0));
        let b = EndoField::constant(*g.grid(), Mat2::diag(1.0, -1.0));
        assert!(matches!(DeformationFamily::new(b, &g, 1e-12, (-2.0, 2.0)), Err(TeichError::Degenerate { .. })));
    }

    /// `f = bump·(1 + s)` with closed-form derivatives.
    fn compact_f(s: &TrigSum, a: f64) -> impl Fn(f64, f64) -> (f64, [f64; 2], [f64; 3]) + '_ {
        move |x, y| {
            let eps = 1e-4;
            let val = |x: f64, y: f64| bump(x, y, a, a) * (1.0 + s.value(x, y));
            let grad = |x: f64, y: f64| {
                let b = bump(x, y, a, a);
                let db = bump_gradient(x, y, a, a);
                let (v, dv) = (1.0 + s.value(x, y), s.gradient(x, y));
                [db[0] * v + b * dv[0], db[1] * v + b * dv[1]]
            };
            let (gxp, gxm) = (grad(x + eps, y), grad(x - eps, y));
            let (gyp, gym) = (grad(x, y + eps), grad(x, y - eps));
            let hxx = (gxp[0] - gxm[0]) / (2.0 * eps);
            let hxy = 0.5 * ((gxp[1] - gxm[1]) + (gyp[0] - gym[0])) / (2.0 * eps);
            let hyy = (gyp[1] - gym[1]) / (2.0 * eps);
            (val(x, y), grad(x, y), [hxx, hxy, hyy])
        }
    }

    #[test]
    fn test_critical_sum() {
        let mut errs = Vec::new();
        for n in [32usize, 64] {
            let grid = dirichlet(n, 1.0);
            let h0 = fixtures::poincare(grid);
            let mut r = stream(9, 0);
            let b = HarmonicQuadratic::random(&mut r, 3, 0.5).field(&h0);
            let c = codazzi(EndoField::constant(grid, Mat2::scalar(1.0)), &h0);
            assert!(critical_sum_check(&c, &c, &b, &h0).unwrap().abs() < 1e-10);
            let s = TrigSum::random(&mut r, 1.0, 1.0, 1, 4, 0.3);
            let hess = hessian_type_field(&h0, compact_f(&s, 0.4)).scaled(-0.05);
            let half = hess.map(|m| m + Mat2::scalar(1.0));
            let ap = codazzi(half.clone(), &h0);
            let am = codazzi(hess.sub(&half).add(&hess), &h0);
            errs.push(critical_sum_check(&ap, &am, &b, &h0).unwrap().abs());
            let bc = codazzi(b.clone(), &h0);
            let zero = codazzi(EndoField::zeros(grid), &h0);
            assert!(critical_sum_relative(&bc, &zero, &b, &h0).unwrap() > NON_CRITICAL_THRESHOLD);
        }
        assert!(errs[0] / errs[1] >= 3.5 || errs[1] < 1e-12, "{errs:?}");
    }
}
