//! Newton solver, with continuation, for one-harmonic diffeomorphisms of a
//! Dirichlet chart.
//!
//! The unknown is a displacement `X` vanishing on the boundary; the map is
//! `Φ_X = id + X` and the equation is `∇E_g[Φ_X*h] − G_g[Φ_X*h] = 0` at the
//! interior nodes. The Jacobian is assembled from finite-difference columns;
//! unknowns further apart than the stencil reach share a perturbation, so a
//! whole Jacobian costs a fixed number of residual evaluations independent of
//! the grid size.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::energy_variation::{self, pullback_with, CodazziField, EnergyError, MetricField};
use crate::fields::{ConformalMetric, EndoField, FieldError, Grid, ScalarField, Topology, VectorField};
use crate::j_calculus::Mat2;
use crate::linalg::{BandMatrix, LinalgError};

/// Distance from the boundary of the first row of unknowns. Residual rows at
/// this distance or more from the boundary only involve central stencils.
pub const BOUNDARY_RING: usize = 2;

/// Index reach of the residual stencil: the residual at a node depends on
/// `X` only at nodes within this Chebyshev distance.
pub const STENCIL_REACH: usize = 2;

const MAX_ITERATIONS: usize = 20;
const MAX_HALVINGS: usize = 8;
const FD_STEP: f64 = 1e-7;
const MIN_STEP: f64 = 1.0 / 1024.0;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error(transparent)]
    Energy(#[from] EnergyError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("the one-harmonic solver needs a Dirichlet grid")]
    NotDirichlet,
    #[error("displacement is not zero on the boundary (max {0:.3e})")]
    BoundaryValues(f64),
    #[error("fold-over: det(Id + ∇X) = {det:.3e} at node {node} ({x:.4}, {y:.4})")]
    FoldOver { node: usize, x: f64, y: f64, det: f64 },
    #[error("Newton did not converge in {iterations} iterations (residual {residual:.3e})")]
    MaxIterations { iterations: usize, residual: f64 },
    #[error("Newton step could not reduce the residual after {0} halvings (residual {1:.3e})")]
    LineSearch(usize, f64),
    #[error("linear solve failed: {0}")]
    Linear(#[from] LinalgError),
    #[error("background metric is not negatively curved at t = {t} (max κ = {kappa:.3e}); the solver needs κ_g < 0")]
    Curvature { t: f64, kappa: f64 },
    #[error("continuation step fell below {min} at t = {t}: {last}")]
    StepUnderflow { t: f64, min: f64, last: String },
}

/// A displacement field `X` with `X = 0` on the boundary and `Φ_X = id + X`
/// locally invertible.
#[derive(Debug, Clone, PartialEq)]
pub struct Displacement {
    x: VectorField,
}

impl Displacement {
    pub fn new(x: VectorField) -> Result<Self, SolveError> {
        let g = *x.grid();
        if g.topology() != Topology::Dirichlet {
            return Err(SolveError::NotDirichlet);
        }
        let b = (0..g.len())
            .filter(|&k| {
                let (i, j) = g.ij(k);
                g.is_boundary(i, j)
            })
            .fold(0.0, |m, k| f64::max(m, x.data()[k][0].abs().max(x.data()[k][1].abs())));
        if b > 1e-12 {
            return Err(SolveError::BoundaryValues(b));
        }
        let d = Self { x };
        d.check_fold()?;
        Ok(d)
    }

    pub fn zero(grid: Grid) -> Result<Self, SolveError> {
        Self::new(VectorField::zeros(grid))
    }

    pub fn field(&self) -> &VectorField {
        &self.x
    }

    pub fn grid(&self) -> &Grid {
        self.x.grid()
    }

    /// `Φ_X(p)` at node `k`.
    pub fn map_node(&self, k: usize) -> [f64; 2] {
        let p = self.grid().point(k);
        let v = self.x.data()[k];
        [p[0] + v[0], p[1] + v[1]]
    }

    /// `Φ_X` at an arbitrary chart point, interpolating `X` bilinearly.
    pub fn map_point(&self, x: f64, y: f64) -> [f64; 2] {
        let v = self.x.sample(x, y);
        [x + v[0], y + v[1]]
    }

    /// `det(Id + ∇₀X)` per node.
    pub fn jacobian_det(&self) -> ScalarField {
        self.x.jacobian0().map(|m| (Mat2::id() + m).det())
    }

    fn check_fold(&self) -> Result<(), SolveError> {
        let d = self.jacobian_det();
        if let Some(k) = d.data().iter().position(|&v| !(v > 0.0)) {
            let [x, y] = self.grid().point(k);
            return Err(SolveError::FoldOver { node: k, x, y, det: d.data()[k] });
        }
        Ok(())
    }
}

/// The metric being pulled back: nodal values (Lagrange-interpolated) or a
/// closed-form function of the chart point. Carries the curvature density
/// `κ[h]·√det h` used by the covariant form of `F`.
#[derive(Clone)]
pub struct Target {
    kind: TargetKind,
}

#[derive(Clone)]
enum TargetKind {
    Nodal { h: EndoField, omega: ScalarField },
    Analytic(Arc<dyn Fn(f64, f64) -> Mat2 + Send + Sync>),
}

impl std::fmt::Debug for Target {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.kind {
            TargetKind::Nodal { .. } => write!(f, "Target::Nodal"),
            TargetKind::Analytic(_) => write!(f, "Target::Analytic"),
        }
    }
}

/// Step of the fourth-order differences used for the curvature of analytic targets.
const ANALYTIC_FD_STEP: f64 = 2e-3;

fn entries(m: Mat2) -> [f64; 3] {
    [m.a11, m.a12, m.a22]
}

/// Curvature density of a closed-form metric by Brioschi's formula, with
/// fourth-order central differences.
fn analytic_density(f: &(dyn Fn(f64, f64) -> Mat2 + Send + Sync), x: f64, y: f64) -> f64 {
    const D1: [f64; 5] = [1.0, -8.0, 0.0, 8.0, -1.0];
    const D2: [f64; 5] = [-1.0, 16.0, -30.0, 16.0, -1.0];
    let e = ANALYTIC_FD_STEP;
    let at = |i: i32, j: i32| entries(f(x + i as f64 * e, y + j as f64 * e));
    let xs: Vec<[f64; 3]> = (-2..=2).map(|i| at(i, 0)).collect();
    let ys: Vec<[f64; 3]> = (-2..=2).map(|j| at(0, j)).collect();
    let stencil = |v: &[[f64; 3]], w: &[f64; 5], c: usize| (0..5).map(|k| w[k] * v[k][c]).sum::<f64>();
    let dx = |c| stencil(&xs, &D1, c) / (12.0 * e);
    let dy = |c| stencil(&ys, &D1, c) / (12.0 * e);
    let evv = stencil(&ys, &D2, 0) / (12.0 * e * e);
    let guu = stencil(&xs, &D2, 2) / (12.0 * e * e);
    let mut fuv = 0.0;
    for i in 0..5 {
        for j in 0..5 {
            if D1[i] != 0.0 && D1[j] != 0.0 {
                fuv += D1[i] * D1[j] * at(i as i32 - 2, j as i32 - 2)[1];
            }
        }
    }
    fuv /= 144.0 * e * e;
    let c = xs[2];
    let k = energy_variation::brioschi(c, [[dx(0), dy(0)], [dx(1), dy(1)], [dx(2), dy(2)]], [evv, fuv, guu]);
    k * (c[0] * c[2] - c[1] * c[1]).max(0.0).sqrt()
}

/// Curvature density of a nodal metric with fourth-order stencils, falling
/// back to the second-order field within two nodes of a Dirichlet boundary.
fn nodal_density(h: &EndoField) -> ScalarField {
    const D1: [f64; 5] = [1.0, -8.0, 0.0, 8.0, -1.0];
    const D2: [f64; 5] = [-1.0, 16.0, -30.0, 16.0, -1.0];
    let grid = *h.grid();
    let low = energy_variation::endo_curvature(h);
    let (nx, ny) = (grid.nx() as isize, grid.ny() as isize);
    let (ex, ey) = (grid.dx(), grid.dy());
    let data = (0..grid.len())
        .map(|k| {
            let (i, j) = grid.ij(k);
            let (i, j) = (i as isize, j as isize);
            let c = entries(h.data()[k]);
            let inside = grid.periodic() || (i >= 2 && j >= 2 && i < nx - 2 && j < ny - 2);
            if !inside {
                return low.data()[k] * (c[0] * c[2] - c[1] * c[1]).max(0.0).sqrt();
            }
            let at = |a: isize, b: isize| {
                let (ia, jb) = ((i + a).rem_euclid(nx) as usize, (j + b).rem_euclid(ny) as usize);
                entries(h.data()[grid.idx(ia, jb)])
            };
            let sx = |w: &[f64; 5], c: usize| (0..5).map(|m| w[m] * at(m as isize - 2, 0)[c]).sum::<f64>();
            let sy = |w: &[f64; 5], c: usize| (0..5).map(|m| w[m] * at(0, m as isize - 2)[c]).sum::<f64>();
            let d = [0, 1, 2].map(|c| [sx(&D1, c) / (12.0 * ex), sy(&D1, c) / (12.0 * ey)]);
            let evv = sy(&D2, 0) / (12.0 * ey * ey);
            let guu = sx(&D2, 2) / (12.0 * ex * ex);
            let mut fuv = 0.0;
            for a in 0..5 {
                for b in 0..5 {
                    fuv += D1[a] * D1[b] * at(a as isize - 2, b as isize - 2)[1];
                }
            }
            fuv /= 144.0 * ex * ey;
            let kappa = energy_variation::brioschi(c, d, [evv, fuv, guu]);
            kappa * (c[0] * c[2] - c[1] * c[1]).max(0.0).sqrt()
        })
        .collect();
    ScalarField::new(grid, data).expect("same grid")
}

impl Target {
    pub fn nodal(h: &MetricField) -> Self {
        Self::from_endo(h.as_endo())
    }

    /// Nodal target from raw matrix entries.
    pub fn from_endo(h: EndoField) -> Self {
        let omega = nodal_density(&h);
        Target { kind: TargetKind::Nodal { h, omega } }
    }

    pub fn analytic(f: impl Fn(f64, f64) -> Mat2 + Send + Sync + 'static) -> Self {
        Target { kind: TargetKind::Analytic(Arc::new(f)) }
    }

    pub fn eval(&self, x: f64, y: f64) -> Mat2 {
        match &self.kind {
            TargetKind::Nodal { h, .. } => crate::fields::interpolate(h, [x, y]),
            TargetKind::Analytic(f) => f(x, y),
        }
    }

    /// `κ[h]·√det h` at a chart point.
    pub fn curvature_density(&self, x: f64, y: f64) -> f64 {
        match &self.kind {
            TargetKind::Nodal { omega, .. } => crate::fields::interpolate(omega, [x, y]),
            TargetKind::Analytic(f) => analytic_density(f.as_ref(), x, y),
        }
    }

    /// `Φ_X*h`.
    pub fn pullback(&self, x: &VectorField) -> Result<MetricField, EnergyError> {
        pullback_with(*x.grid(), |a, b| self.eval(a, b), x, &x.jacobian0())
    }

    /// `F_g[Φ_X*h]` from diffeomorphism covariance: the curvature form of
    /// `Φ_X*h` is the pullback of the curvature form of `h`, so
    /// `F(p) = −ω(Φ_X(p))·det dΦ_X(p)/e^{2φ(p)} + κ_g(p)` with `ω` the
    /// curvature density of `h`.
    pub fn covariant_f(&self, x: &VectorField, g: &ConformalMetric, kappa_g: &ScalarField) -> ScalarField {
        let grid = *x.grid();
        let jac = x.jacobian0();
        let data = (0..grid.len())
            .map(|k| {
                let p = grid.point(k);
                let v = x.data()[k];
                let w = self.curvature_density(p[0] + v[0], p[1] + v[1]);
                let det = (Mat2::id() + jac.data()[k]).det();
                -w * det / g.e2phi().data()[k] + kappa_g.data()[k]
            })
            .collect();
        ScalarField::new(grid, data).expect("same grid")
    }
}

/// `κ_g` through the same Brioschi oracle as the target curvature.
pub fn background_curvature(g: &ConformalMetric) -> Result<ScalarField, EnergyError> {
    let h = MetricField::conformal_multiple(g, 1.0)?.as_endo();
    Ok(nodal_density(&h).zip(g.e2phi(), |w, e| w / e))
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepCounts {
    pub accepted: usize,
    pub halved: usize,
}

/// Convergence record of a solve.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    /// L∞ residual before the first and after every Newton iteration.
    pub residuals: Vec<f64>,
    pub steps: StepCounts,
    pub codazzi_residual: f64,
}

/// `∇E_g[Φ_X*h] − G_g[Φ_X*h]` at every node, with `G = ∇F` and `F` in its
/// covariant form ([`Target::covariant_f`]).
pub fn residual(x: &Displacement, g: &ConformalMetric, h: &MetricField) -> Result<VectorField, SolveError> {
    residual_target(x, g, &Target::nodal(h))
}

pub fn residual_target(x: &Displacement, g: &ConformalMetric, target: &Target) -> Result<VectorField, SolveError> {
    g.check(x.grid())?;
    covariant_residual(x.field(), g, target, &background_curvature(g)?)
}

/// The same operator with `G_g` evaluated directly on the pulled-back metric.
pub fn residual_direct(x: &Displacement, g: &ConformalMetric, target: &Target) -> Result<VectorField, SolveError> {
    g.check(x.grid())?;
    let ph = target.pullback(x.field()).map_err(|e| fold_context(e, x.grid()))?;
    Ok(energy_variation::modified_gradient(&ph, g)?)
}

fn covariant_residual(
    x: &VectorField,
    g: &ConformalMetric,
    target: &Target,
    kappa_g: &ScalarField,
) -> Result<VectorField, SolveError> {
    let ph = target.pullback(x).map_err(|e| fold_context(e, x.grid()))?;
    let a = energy_variation::a_field(&ph, g)?;
    let ge = energy_variation::energy_gradient_of_a(&a, g)?;
    let gg = crate::fields::grad(&target.covariant_f(x, g, kappa_g), g)?;
    Ok(ge.sub(&gg))
}

fn fold_context(e: EnergyError, grid: &Grid) -> SolveError {
    match e {
        EnergyError::FoldOver { node, det } => {
            let [x, y] = grid.point(node);
            SolveError::FoldOver { node, x, y, det }
        }
        other => other.into(),
    }
}

/// Unknown layout: two components per node of the inner block (nodes at
/// least [`BOUNDARY_RING`] from the boundary), row-major. Nodes between the
/// block and the boundary take the linear interpolation between the boundary
/// value zero and the nearest block node.
struct Layout {
    grid: Grid,
    m: usize,
    my: usize,
    nodes: Vec<usize>,
}

impl Layout {
    fn new(grid: Grid) -> Self {
        let nodes = grid.interior_margin(BOUNDARY_RING);
        let r = 2 * BOUNDARY_RING;
        Self { grid, m: grid.nx() - r, my: grid.ny() - r, nodes }
    }

    fn n(&self) -> usize {
        2 * self.nodes.len()
    }

    fn band(&self) -> usize {
        2 * (STENCIL_REACH * self.m + STENCIL_REACH) + 1
    }

    fn gather(&self, v: &VectorField) -> Vec<f64> {
        self.nodes.iter().flat_map(|&k| v.data()[k]).collect()
    }

    /// Block index and interpolation weight for a grid index along one axis.
    fn closure(i: usize, n: usize) -> Option<(usize, f64)> {
        let r = BOUNDARY_RING;
        if i == 0 || i == n - 1 {
            None
        } else if i < r {
            Some((0, i as f64 / r as f64))
        } else if i > n - 1 - r {
            Some((n - 1 - 2 * r, (n - 1 - i) as f64 / r as f64))
        } else {
            Some((i - r, 1.0))
        }
    }

    fn scatter(&self, u: &[f64]) -> VectorField {
        let (nx, ny) = (self.grid.nx(), self.grid.ny());
        let mut v = VectorField::zeros(self.grid);
        for j in 0..ny {
            for i in 0..nx {
                if let (Some((bi, wi)), Some((bj, wj))) = (Self::closure(i, nx), Self::closure(j, ny)) {
                    let q = bj * self.m + bi;
                    let w = wi * wj;
                    v.data_mut()[self.grid.idx(i, j)] = [w * u[2 * q], w * u[2 * q + 1]];
                }
            }
        }
        v
    }

    /// Interior-block coordinates of unknown `q`.
    fn ij(&self, q: usize) -> (usize, usize) {
        let node = q / 2;
        (node % self.m, node / self.m)
    }
}

fn linf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| f64::max(m, x.abs()))
}

struct Problem<'a> {
    g: &'a ConformalMetric,
    target: &'a Target,
    kappa_g: ScalarField,
    layout: Layout,
}

impl<'a> Problem<'a> {
    fn new(g: &'a ConformalMetric, target: &'a Target) -> Result<Self, SolveError> {
        Ok(Self { g, target, kappa_g: background_curvature(g)?, layout: Layout::new(*g.grid()) })
    }

    fn eval(&self, u: &[f64]) -> Result<Vec<f64>, SolveError> {
        let x = self.layout.scatter(u);
        let r = covariant_residual(&x, self.g, self.target, &self.kappa_g)?;
        Ok(self.layout.gather(&r))
    }

    /// Finite-difference Jacobian with grouped columns.
    fn jacobian(&self, u: &[f64], r0: &[f64]) -> Result<BandMatrix, SolveError> {
        let n = self.layout.n();
        let bw = self.layout.band();
        let mut jac = BandMatrix::zeros(n, bw, bw);
        let period = 2 * STENCIL_REACH + 1;
        let mut up = u.to_vec();
        for ci in 0..period {
            for cj in 0..period {
                for comp in 0..2 {
                    let cols: Vec<usize> = (0..n)
                        .filter(|&q| {
                            let (i, j) = self.layout.ij(q);
                            q % 2 == comp && i % period == ci && j % period == cj
                        })
                        .collect();
                    if cols.is_empty() {
                        continue;
                    }
                    for &q in &cols {
                        up[q] = u[q] + FD_STEP;
                    }
                    let r1 = self.eval(&up)?;
                    for &q in &cols {
                        up[q] = u[q];
                    }
                    for &q in &cols {
                        let (qi, qj) = self.layout.ij(q);
                        for rj in qj.saturating_sub(STENCIL_REACH)..=(qj + STENCIL_REACH).min(self.layout.my - 1) {
                            for ri in qi.saturating_sub(STENCIL_REACH)..=(qi + STENCIL_REACH).min(self.layout.m - 1) {
                                for rc in 0..2 {
                                    let row = 2 * (rj * self.layout.m + ri) + rc;
                                    jac.set(row, q, (r1[row] - r0[row]) / FD_STEP);
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(jac)
    }
}

/// Settings for [`newton_solve_target`].
#[derive(Debug, Clone, Copy)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iterations: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iterations: MAX_ITERATIONS }
    }
}

/// Damped Newton iteration from `x0` for a nodal target metric.
pub fn newton_solve(
    g: &ConformalMetric,
    h: &MetricField,
    x0: &Displacement,
    tol: f64,
) -> Result<(Displacement, SolveReport), SolveError> {
    newton_solve_target(g, &Target::nodal(h), x0, NewtonOptions { tol, ..Default::default() })
}

pub fn newton_solve_target(
    g: &ConformalMetric,
    target: &Target,
    x0: &Displacement,
    opts: NewtonOptions,
) -> Result<(Displacement, SolveReport), SolveError> {
    if g.grid().topology() != Topology::Dirichlet {
        return Err(SolveError::NotDirichlet);
    }
    g.check(x0.grid())?;
    let p = Problem::new(g, target)?;
    let mut u = p.layout.gather(x0.field());
    let mut r = p.eval(&u)?;
    let mut res = linf(&r);
    let mut report = SolveReport { residuals: vec![res], ..Default::default() };
    while res > opts.tol {
        if report.iterations >= opts.max_iterations {
            return Err(SolveError::MaxIterations { iterations: report.iterations, residual: res });
        }
        let jac = p.jacobian(&u, &r)?;
        let du = jac.factor()?.solve(&r)?;
        let mut lambda = 1.0;
        let mut halvings = 0;
        loop {
            let trial: Vec<f64> = u.iter().zip(&du).map(|(a, d)| a - lambda * d).collect();
            let ev = p.eval(&trial);
            match ev {
                Ok(rt) if linf(&rt) < res => {
                    u = trial;
                    r = rt;
                    res = linf(&r);
                    break;
                }
                Ok(_) | Err(SolveError::FoldOver { .. }) => {
                    halvings += 1;
                    if halvings > MAX_HALVINGS {
                        return Err(SolveError::LineSearch(MAX_HALVINGS, res));
                    }
                    lambda *= 0.5;
                }
                Err(e) => return Err(e),
            }
        }
        report.iterations += 1;
        report.residuals.push(res);
    }
    let x = Displacement::new(p.layout.scatter(&u))?;
    report.codazzi_residual = codazzi_of(g, target, &x)?;
    Ok((x, report))
}

fn codazzi_of(g: &ConformalMetric, target: &Target, x: &Displacement) -> Result<f64, SolveError> {
    let ph = target.pullback(x.field())?;
    let a = energy_variation::a_field(&ph, g)?;
    Ok(CodazziField::measure(a, g)?.codazzi_residual())
}

/// The linearised residual `DF[X]·V` by finite differences, as assembled in
/// the Newton Jacobian; for testing the assembly against directional
/// derivatives.
pub fn jacobian_apply(
    g: &ConformalMetric,
    target: &Target,
    x: &Displacement,
    v: &VectorField,
) -> Result<VectorField, SolveError> {
    let p = Problem::new(g, target)?;
    let u = p.layout.gather(x.field());
    let r = p.eval(&u)?;
    let jac = p.jacobian(&u, &r)?;
    let out = jac.mul_vec(&p.layout.gather(v));
    Ok(p.layout.scatter(&out))
}

/// The Newton correction `DF[X]⁻¹·F[X]` at `X`.
pub fn newton_direction(g: &ConformalMetric, target: &Target, x: &Displacement) -> Result<VectorField, SolveError> {
    let p = Problem::new(g, target)?;
    let u = p.layout.gather(x.field());
    let r = p.eval(&u)?;
    let du = p.jacobian(&u, &r)?.factor()?.solve(&r)?;
    Ok(p.layout.scatter(&du))
}

/// Largest `κ_g` over the interior nodes.
pub fn max_curvature(g: &ConformalMetric) -> f64 {
    let k = g.curvature();
    g.grid().interior().iter().map(|&i| k.data()[i]).fold(f64::NEG_INFINITY, f64::max)
}

/// Fails unless `κ_g < 0` at all interior nodes.
pub fn require_negative_curvature(g: &ConformalMetric, t: f64) -> Result<(), SolveError> {
    let kappa = max_curvature(g);
    if !(kappa < 0.0) {
        return Err(SolveError::Curvature { t, kappa });
    }
    Ok(())
}

/// Tracks the solution along `t ↦ (g_t, h_t)` from `t = 0` to `t = 1`,
/// starting from `X = 0`, with `steps` initial steps and step halving on
/// Newton failure.
pub fn continuation_solve_family(
    g_at: impl Fn(f64) -> ConformalMetric,
    target_at: impl Fn(f64) -> Target,
    steps: usize,
    opts: NewtonOptions,
) -> Result<(Displacement, SolveReport), SolveError> {
    let g0 = g_at(0.0);
    require_negative_curvature(&g0, 0.0)?;
    let mut x = Displacement::zero(*g0.grid())?;
    let mut report = SolveReport::default();
    let mut t = 0.0;
    let mut dt = 1.0 / steps.max(1) as f64;
    while t < 1.0 {
        let mut t1 = t + dt;
        if t1 > 1.0 - 1e-9 {
            t1 = 1.0;
        }
        let g = g_at(t1);
        require_negative_curvature(&g, t1)?;
        match newton_solve_target(&g, &target_at(t1), &x, opts) {
            Ok((xn, rep)) => {
                x = xn;
                t = t1;
                report.iterations += rep.iterations;
                report.residuals.extend(rep.residuals);
                report.steps.accepted += 1;
                report.codazzi_residual = rep.codazzi_residual;
            }
            Err(e @ SolveError::Curvature { .. }) => return Err(e),
            Err(e) => {
                dt *= 0.5;
                report.steps.halved += 1;
                if dt < MIN_STEP {
                    return Err(SolveError::StepUnderflow { t, min: MIN_STEP, last: e.to_string() });
                }
            }
        }
    }
    Ok((x, report))
}

/// Continuation along the linear interpolations `φ_t = (1−t)φ₀ + tφ₁` and
/// `h_t = (1−t)h₀ + th₁`.
pub fn continuation_solve(
    g0: &ConformalMetric,
    g1: &ConformalMetric,
    h0: &MetricField,
    h1: &MetricField,
    steps: usize,
) -> Result<(Displacement, SolveReport), SolveError> {
    g0.check(g1.grid())?;
    g0.check(h0.grid())?;
    g0.check(h1.grid())?;
    let (e0, e1) = (h0.as_endo(), h1.as_endo());
    continuation_solve_family(
        |t| ConformalMetric::new(g0.phi().zip(g1.phi(), |a, b| (1.0 - t) * a + t * b)),
        |t| Target::from_endo(e0.zip(&e1, |a, b| a * (1.0 - t) + b * t)),
        steps,
        NewtonOptions::default(),
    )
}

/// A small diffeomorphism `ψ = id + δ·b·(u, v)` of the chart, fixing the
/// boundary, with its exact Jacobian.
pub type AnalyticMap = Arc<dyn Fn(f64, f64) -> ([f64; 2], Mat2) + Send + Sync>;

/// `ψ*h₀` for closed-form `ψ` and `h₀`: `dψᵀ h₀(ψ) dψ`.
pub fn analytic_pullback(psi: AnalyticMap, h0: Arc<dyn Fn(f64, f64) -> Mat2 + Send + Sync>) -> Target {
    Target::analytic(move |x, y| {
        let (q, d) = psi(x, y);
        d.transpose() * h0(q[0], q[1]) * d
    })
}

/// `max_k |ψ(Φ_X(p_k)) − p_k|` over all nodes.
pub fn recovery_error(x: &Displacement, psi: &AnalyticMap) -> f64 {
    let g = x.grid();
    (0..g.len()).fold(0.0, |m, k| {
        let q = x.map_node(k);
        let (r, _) = psi(q[0], q[1]);
        let p = g.point(k);
        f64::max(m, (r[0] - p[0]).abs().max((r[1] - p[1]).abs()))
    })
}

/// `max_k |Φ_X(ψ(p_k)) − p_k|`, interpolating `X` bilinearly off the nodes.
pub fn recovery_error_inverse_order(x: &Displacement, psi: &AnalyticMap) -> f64 {
    let g = x.grid();
    (0..g.len()).fold(0.0, |m, k| {
        let p = g.point(k);
        let (q, _) = psi(p[0], p[1]);
        let r = x.map_point(q[0], q[1]);
        f64::max(m, (r[0] - p[0]).abs().max((r[1] - p[1]).abs()))
    })
}
