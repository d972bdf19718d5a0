//! Node fields on a rectangular chart and the differential operators of a
//! conformal metric `g = e^{2φ}·δ`.
//!
//! Nodes are stored row-major with `x` fastest. The chart is centred on the
//! origin: `x ∈ [−lx/2, lx/2]`, `y ∈ [−ly/2, ly/2]`; periodic grids omit the
//! right/top edge. Vectors are stored in chart components and endomorphisms as
//! chart matrices, which for a conformal metric coincide with their matrices
//! in the orthonormal frame `eᵢ = e^{−φ}∂ᵢ`.
//!
//! Derivatives are second-order central differences, with one-sided
//! second-order stencils on the boundary of Dirichlet grids.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::j_calculus::{Mat2, SpdMat2};

#[derive(Debug, Error)]
pub enum FieldError {
    #[error("grid needs at least 8 nodes per direction, got {nx}x{ny}")]
    GridTooSmall { nx: usize, ny: usize },
    #[error("grid extents must be positive and finite, got lx={lx}, ly={ly}")]
    BadExtent { lx: f64, ly: f64 },
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("{file}: key \"{key}\" has {got} entries, grid has {expected} nodes")]
    Length { file: String, key: String, expected: usize, got: usize },
    #[error("{file}: key \"{key}\": {msg}")]
    BadValue { file: String, key: String, msg: String },
    #[error("{file}: {source}")]
    Io { file: String, source: std::io::Error },
    #[error("{file}: malformed field JSON: {source}")]
    Json { file: String, source: serde_json::Error },
    #[error("chart does not fit inside the unit disk (corner radius {0})")]
    OutsideDisk(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Topology {
    Periodic,
    Dirichlet,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridSpec", into = "GridSpec")]
pub struct Grid {
    nx: usize,
    ny: usize,
    lx: f64,
    ly: f64,
    topology: Topology,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct GridSpec {
    nx: usize,
    ny: usize,
    lx: f64,
    ly: f64,
    topology: Topology,
}

impl TryFrom<GridSpec> for Grid {
    type Error = FieldError;
    fn try_from(s: GridSpec) -> Result<Grid, FieldError> {
        Grid::new(s.nx, s.ny, s.lx, s.ly, s.topology)
    }
}

impl From<Grid> for GridSpec {
    fn from(g: Grid) -> GridSpec {
        GridSpec { nx: g.nx, ny: g.ny, lx: g.lx, ly: g.ly, topology: g.topology }
    }
}

impl Grid {
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64, topology: Topology) -> Result<Self, FieldError> {
        if nx < 8 || ny < 8 {
            return Err(FieldError::GridTooSmall { nx, ny });
        }
        if !(lx > 0.0 && ly > 0.0 && lx.is_finite() && ly.is_finite()) {
            return Err(FieldError::BadExtent { lx, ly });
        }
        Ok(Self { nx, ny, lx, ly, topology })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn ny(&self) -> usize {
        self.ny
    }
    pub fn lx(&self) -> f64 {
        self.lx
    }
    pub fn ly(&self) -> f64 {
        self.ly
    }
    pub fn topology(&self) -> Topology {
        self.topology
    }
    pub fn periodic(&self) -> bool {
        self.topology == Topology::Periodic
    }
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }
    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dx(&self) -> f64 {
        match self.topology {
            Topology::Periodic => self.lx / self.nx as f64,
            Topology::Dirichlet => self.lx / (self.nx - 1) as f64,
        }
    }

    pub fn dy(&self) -> f64 {
        match self.topology {
            Topology::Periodic => self.ly / self.ny as f64,
            Topology::Dirichlet => self.ly / (self.ny - 1) as f64,
        }
    }

    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn ij(&self, k: usize) -> (usize, usize) {
        (k % self.nx, k / self.nx)
    }

    pub fn x(&self, i: usize) -> f64 {
        -0.5 * self.lx + i as f64 * self.dx()
    }

    pub fn y(&self, j: usize) -> f64 {
        -0.5 * self.ly + j as f64 * self.dy()
    }

    pub fn point(&self, k: usize) -> [f64; 2] {
        let (i, j) = self.ij(k);
        [self.x(i), self.y(j)]
    }

    pub fn is_boundary(&self, i: usize, j: usize) -> bool {
        !self.periodic() && (i == 0 || j == 0 || i == self.nx - 1 || j == self.ny - 1)
    }

    /// Nodes at which residuals are measured: all nodes of a periodic grid,
    /// nodes off the boundary ring of a Dirichlet grid.
    pub fn interior(&self) -> Vec<usize> {
        (0..self.len())
            .filter(|&k| {
                let (i, j) = self.ij(k);
                !self.is_boundary(i, j)
            })
            .collect()
    }

    /// Nodes at least `m` steps away from the boundary (all nodes if periodic).
    pub fn interior_margin(&self, m: usize) -> Vec<usize> {
        (0..self.len())
            .filter(|&k| {
                if self.periodic() {
                    return true;
                }
                let (i, j) = self.ij(k);
                i >= m && j >= m && i + m < self.nx && j + m < self.ny
            })
            .collect()
    }

    /// Quadrature weight of a node (trapezoidal on Dirichlet grids).
    pub fn weight(&self, k: usize) -> f64 {
        let w = self.dx() * self.dy();
        if self.periodic() {
            return w;
        }
        let (i, j) = self.ij(k);
        let fx = if i == 0 || i == self.nx - 1 { 0.5 } else { 1.0 };
        let fy = if j == 0 || j == self.ny - 1 { 0.5 } else { 1.0 };
        w * fx * fy
    }

    /// Same grid with node counts doubled (spacing halved).
    pub fn refined(&self) -> Grid {
        let (nx, ny) = match self.topology {
            Topology::Periodic => (2 * self.nx, 2 * self.ny),
            Topology::Dirichlet => (2 * self.nx - 1, 2 * self.ny - 1),
        };
        Grid { nx, ny, ..*self }
    }
}

/// Values closed under linear combination, so stencils apply componentwise.
pub trait Linear: Copy + Send + Sync {
    fn zero() -> Self;
    fn lin(a: f64, x: Self, b: f64, y: Self) -> Self;
    fn scale(self, a: f64) -> Self {
        Self::lin(a, self, 0.0, Self::zero())
    }
    fn plus(self, y: Self) -> Self {
        Self::lin(1.0, self, 1.0, y)
    }
    fn max_abs(self) -> f64;
}

impl Linear for f64 {
    fn zero() -> Self {
        0.0
    }
    fn lin(a: f64, x: f64, b: f64, y: f64) -> f64 {
        a * x + b * y
    }
    fn max_abs(self) -> f64 {
        self.abs()
    }
}

impl Linear for [f64; 2] {
    fn zero() -> Self {
        [0.0; 2]
    }
    fn lin(a: f64, x: Self, b: f64, y: Self) -> Self {
        [a * x[0] + b * y[0], a * x[1] + b * y[1]]
    }
    fn max_abs(self) -> f64 {
        self[0].abs().max(self[1].abs())
    }
}

impl Linear for Mat2 {
    fn zero() -> Self {
        Mat2::zero()
    }
    fn lin(a: f64, x: Self, b: f64, y: Self) -> Self {
        x * a + y * b
    }
    fn max_abs(self) -> f64 {
        Mat2::max_abs(self)
    }
}

/// Values on the nodes of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeField<T> {
    grid: Grid,
    data: Vec<T>,
}

pub type ScalarField = NodeField<f64>;
pub type VectorField = NodeField<[f64; 2]>;
pub type EndoField = NodeField<Mat2>;

impl<T: Linear> NodeField<T> {
    pub fn new(grid: Grid, data: Vec<T>) -> Result<Self, FieldError> {
        if data.len() != grid.len() {
            return Err(FieldError::Length {
                file: "<memory>".into(),
                key: "data".into(),
                expected: grid.len(),
                got: data.len(),
            });
        }
        Ok(Self { grid, data })
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64) -> T) -> Self {
        let data = (0..grid.len())
            .map(|k| {
                let p = grid.point(k);
                f(p[0], p[1])
            })
            .collect();
        Self { grid, data }
    }

    pub fn constant(grid: Grid, v: T) -> Self {
        Self { grid, data: vec![v; grid.len()] }
    }

    pub fn zeros(grid: Grid) -> Self {
        Self::constant(grid, T::zero())
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn at(&self, i: usize, j: usize) -> T {
        self.data[self.grid.idx(i, j)]
    }

    pub fn map<U: Linear>(&self, f: impl Fn(T) -> U) -> NodeField<U> {
        NodeField { grid: self.grid, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip<U: Linear, V: Linear>(&self, o: &NodeField<U>, f: impl Fn(T, U) -> V) -> NodeField<V> {
        assert_eq!(self.grid, o.grid, "zip of fields on different grids");
        NodeField {
            grid: self.grid,
            data: self.data.iter().zip(&o.data).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    /// Pointwise map with the node coordinates.
    pub fn map_xy<U: Linear>(&self, f: impl Fn([f64; 2], T) -> U) -> NodeField<U> {
        NodeField {
            grid: self.grid,
            data: self.data.iter().enumerate().map(|(k, &v)| f(self.grid.point(k), v)).collect(),
        }
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.zip(o, |a, b| T::lin(1.0, a, -1.0, b))
    }

    pub fn add(&self, o: &Self) -> Self {
        self.zip(o, |a, b| a.plus(b))
    }

    pub fn scaled(&self, c: f64) -> Self {
        self.map(|a| a.scale(c))
    }

    /// Max-abs over the given nodes.
    pub fn linf_on(&self, nodes: &[usize]) -> f64 {
        nodes.iter().fold(0.0, |m, &k| f64::max(m, self.data[k].max_abs()))
    }

    pub fn linf(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| f64::max(m, v.max_abs()))
    }

    pub fn linf_interior(&self) -> f64 {
        self.linf_on(&self.grid.interior())
    }

    /// First derivative in x.
    pub fn dx(&self) -> Self {
        Self { grid: self.grid, data: diff(&self.grid, &self.data, Axis::X) }
    }

    /// First derivative in y.
    pub fn dy(&self) -> Self {
        Self { grid: self.grid, data: diff(&self.grid, &self.data, Axis::Y) }
    }

    /// Compact second derivative in x.
    pub fn dxx(&self) -> Self {
        Self { grid: self.grid, data: diff2(&self.grid, &self.data, Axis::X) }
    }

    /// Compact second derivative in y.
    pub fn dyy(&self) -> Self {
        Self { grid: self.grid, data: diff2(&self.grid, &self.data, Axis::Y) }
    }

    /// Bilinear interpolation at a chart point. Periodic grids wrap; Dirichlet
    /// grids extrapolate linearly from the nearest boundary cell.
    pub fn sample(&self, x: f64, y: f64) -> T {
        let g = &self.grid;
        let (i0, tx) = cell(x + 0.5 * g.lx, g.dx(), g.nx, g.lx, g.periodic());
        let (j0, ty) = cell(y + 0.5 * g.ly, g.dy(), g.ny, g.ly, g.periodic());
        let i1 = if g.periodic() { (i0 + 1) % g.nx } else { i0 + 1 };
        let j1 = if g.periodic() { (j0 + 1) % g.ny } else { j0 + 1 };
        let f00 = self.data[g.idx(i0, j0)];
        let f10 = self.data[g.idx(i1, j0)];
        let f01 = self.data[g.idx(i0, j1)];
        let f11 = self.data[g.idx(i1, j1)];
        let bottom = T::lin(1.0 - tx, f00, tx, f10);
        let top = T::lin(1.0 - tx, f01, tx, f11);
        T::lin(1.0 - ty, bottom, ty, top)
    }
}

impl ScalarField {
    pub fn gradient0(&self) -> VectorField {
        let fx = self.dx();
        let fy = self.dy();
        fx.zip(&fy, |a, b| [a, b])
    }

    /// Flat Laplacian by compact second differences.
    pub fn laplacian0(&self) -> ScalarField {
        self.dxx().add(&self.dyy())
    }

    pub fn min(&self) -> f64 {
        self.data.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }
}

impl VectorField {
    /// Flat Jacobian matrix `∂ⱼXⁱ` per node.
    pub fn jacobian0(&self) -> EndoField {
        let xx = self.dx();
        let xy = self.dy();
        xx.zip(&xy, |a, b| Mat2::new(a[0], b[0], a[1], b[1]))
    }

    pub fn component(&self, c: usize) -> ScalarField {
        self.map(|v| v[c])
    }
}

impl EndoField {
    /// Column `c` of each matrix as a vector field.
    pub fn column(&self, c: usize) -> VectorField {
        self.map(|m| if c == 0 { [m.a11, m.a21] } else { [m.a12, m.a22] })
    }

    pub fn trace(&self) -> ScalarField {
        self.map(|m| m.trace())
    }

    /// Pointwise product `A·B`.
    pub fn mul(&self, o: &EndoField) -> EndoField {
        self.zip(o, |a, b| a * b)
    }

    /// Pointwise `A·J`.
    pub fn times_j(&self) -> EndoField {
        self.map(|a| a * Mat2::j())
    }

    /// Pointwise action on a vector field.
    pub fn apply(&self, v: &VectorField) -> VectorField {
        self.zip(v, |a, x| a.apply(x))
    }

    /// Max-abs of `Tr(AJ)`, the symmetry defect.
    pub fn symmetry_residual(&self) -> f64 {
        self.data.iter().fold(0.0, |m, a| f64::max(m, (*a * Mat2::j()).trace().abs()))
    }
}

fn cell(s: f64, h: f64, n: usize, l: f64, periodic: bool) -> (usize, f64) {
    if periodic {
        let s = s.rem_euclid(l);
        let u = s / h;
        let i = (u.floor() as usize).min(n - 1);
        (i, u - i as f64)
    } else {
        let u = s / h;
        let i = (u.floor().max(0.0) as usize).min(n - 2);
        (i, u - i as f64)
    }
}

#[derive(Clone, Copy)]
enum Axis {
    X,
    Y,
}

fn line(grid: &Grid, axis: Axis) -> (usize, usize, usize, f64) {
    // (length along axis, stride, number of lines, spacing)
    match axis {
        Axis::X => (grid.nx, 1, grid.ny, grid.dx()),
        Axis::Y => (grid.ny, grid.nx, grid.nx, grid.dy()),
    }
}

fn line_start(grid: &Grid, axis: Axis, l: usize) -> usize {
    match axis {
        Axis::X => l * grid.nx,
        Axis::Y => l,
    }
}

fn diff<T: Linear>(grid: &Grid, f: &[T], axis: Axis) -> Vec<T> {
    let (n, stride, lines, h) = line(grid, axis);
    let mut out = vec![T::zero(); f.len()];
    let c = 0.5 / h;
    for l in 0..lines {
        let s = line_start(grid, axis, l);
        let at = |i: usize| f[s + i * stride];
        if grid.periodic() {
            for i in 0..n {
                let ip = (i + 1) % n;
                let im = (i + n - 1) % n;
                out[s + i * stride] = T::lin(c, at(ip), -c, at(im));
            }
        } else {
            for i in 1..n - 1 {
                out[s + i * stride] = T::lin(c, at(i + 1), -c, at(i - 1));
            }
            out[s] = T::lin(-3.0 * c, at(0), 4.0 * c, at(1)).plus(at(2).scale(-c));
            out[s + (n - 1) * stride] =
                T::lin(3.0 * c, at(n - 1), -4.0 * c, at(n - 2)).plus(at(n - 3).scale(c));
        }
    }
    out
}

/// `¼, ½, ¼` average along `axis`; Dirichlet end nodes are left as they are.
fn smooth<T: Linear>(grid: &Grid, f: &[T], axis: Axis) -> Vec<T> {
    let (n, stride, lines, _) = line(grid, axis);
    let mut out = f.to_vec();
    for l in 0..lines {
        let s = line_start(grid, axis, l);
        let at = |i: usize| f[s + i * stride];
        let range = if grid.periodic() { 0..n } else { 1..n - 1 };
        for i in range {
            let (ip, im) = ((i + 1) % n, (i + n - 1) % n);
            out[s + i * stride] = T::lin(0.25, at(ip), 0.25, at(im)).plus(at(i).scale(0.5));
        }
    }
    out
}

/// Node derivative from the circulation around the four adjacent cells: the
/// mean of the cell-centred differences, i.e. the central difference
/// averaged across the transverse axis.
fn cell_diff<T: Linear>(grid: &Grid, f: &[T], axis: Axis) -> Vec<T> {
    let across = match axis {
        Axis::X => Axis::Y,
        Axis::Y => Axis::X,
    };
    smooth(grid, &diff(grid, f, axis), across)
}

fn diff2<T: Linear>(grid: &Grid, f: &[T], axis: Axis) -> Vec<T> {
    let (n, stride, lines, h) = line(grid, axis);
    let mut out = vec![T::zero(); f.len()];
    let c = 1.0 / (h * h);
    for l in 0..lines {
        let s = line_start(grid, axis, l);
        let at = |i: usize| f[s + i * stride];
        if grid.periodic() {
            for i in 0..n {
                let ip = (i + 1) % n;
                let im = (i + n - 1) % n;
                out[s + i * stride] = T::lin(c, at(ip), c, at(im)).plus(at(i).scale(-2.0 * c));
            }
        } else {
            for i in 1..n - 1 {
                out[s + i * stride] = T::lin(c, at(i + 1), c, at(i - 1)).plus(at(i).scale(-2.0 * c));
            }
            out[s] = T::lin(2.0 * c, at(0), -5.0 * c, at(1))
                .plus(T::lin(4.0 * c, at(2), -c, at(3)));
            out[s + (n - 1) * stride] = T::lin(2.0 * c, at(n - 1), -5.0 * c, at(n - 2))
                .plus(T::lin(4.0 * c, at(n - 3), -c, at(n - 4)));
        }
    }
    out
}

/// The metric `e^{2φ}·δ` on a chart.
#[derive(Debug, Clone, PartialEq)]
pub struct ConformalMetric {
    phi: ScalarField,
    dphi: VectorField,
    e2phi: ScalarField,
}

impl ConformalMetric {
    pub fn new(phi: ScalarField) -> Self {
        let dphi = phi.gradient0();
        let e2phi = phi.map(|p| (2.0 * p).exp());
        Self { phi, dphi, e2phi }
    }

    /// Metric whose conformal factor `φ` and its gradient are known exactly.
    pub fn with_gradient(grid: Grid, phi: impl Fn(f64, f64) -> f64, dphi: impl Fn(f64, f64) -> [f64; 2]) -> Self {
        let phi = ScalarField::from_fn(grid, phi);
        let dphi = VectorField::from_fn(grid, dphi);
        let e2phi = phi.map(|p| (2.0 * p).exp());
        Self { phi, dphi, e2phi }
    }

    pub fn flat(grid: Grid) -> Self {
        Self::new(ScalarField::zeros(grid))
    }

    pub fn from_fn(grid: Grid, phi: impl Fn(f64, f64) -> f64) -> Self {
        Self::new(ScalarField::from_fn(grid, phi))
    }

    /// Hyperbolic metric of the Poincaré disk, `φ = log(2/(1 − |z|²))`, on a
    /// chart that must lie inside the unit disk.
    pub fn poincare(grid: Grid) -> Result<Self, FieldError> {
        let r = (0.25 * (grid.lx() * grid.lx() + grid.ly() * grid.ly())).sqrt();
        if r >= 1.0 {
            return Err(FieldError::OutsideDisk(r));
        }
        Ok(Self::with_gradient(
            grid,
            |x, y| (2.0 / (1.0 - x * x - y * y)).ln(),
            |x, y| {
                let d = 1.0 - x * x - y * y;
                [2.0 * x / d, 2.0 * y / d]
            },
        ))
    }

    pub fn grid(&self) -> &Grid {
        self.phi.grid()
    }

    pub fn phi(&self) -> &ScalarField {
        &self.phi
    }

    pub fn dphi(&self) -> &VectorField {
        &self.dphi
    }

    pub fn e2phi(&self) -> &ScalarField {
        &self.e2phi
    }

    /// The metric tensor at node `k`.
    pub fn tensor(&self, k: usize) -> SpdMat2 {
        SpdMat2::scalar(self.e2phi.data()[k]).expect("conformal factor is positive")
    }

    /// `g(u, v)` at node `k`.
    pub fn dot(&self, k: usize, u: [f64; 2], v: [f64; 2]) -> f64 {
        self.e2phi.data()[k] * (u[0] * v[0] + u[1] * v[1])
    }

    pub fn check(&self, grid: &Grid) -> Result<(), FieldError> {
        if self.grid() != grid {
            return Err(FieldError::GridMismatch);
        }
        Ok(())
    }

    /// `∫ f dArea_g`.
    pub fn integrate(&self, f: &ScalarField) -> f64 {
        let g = self.grid();
        (0..g.len()).map(|k| g.weight(k) * self.e2phi.data()[k] * f.data()[k]).sum()
    }

    pub fn area(&self) -> f64 {
        self.integrate(&ScalarField::constant(*self.grid(), 1.0))
    }

    /// `∫ ⟨X, Y⟩ dArea_g`.
    pub fn inner(&self, x: &VectorField, y: &VectorField) -> f64 {
        let g = self.grid();
        (0..g.len())
            .map(|k| {
                let (a, b) = (x.data()[k], y.data()[k]);
                let e = self.e2phi.data()[k];
                g.weight(k) * e * e * (a[0] * b[0] + a[1] * b[1])
            })
            .sum()
    }

    /// Max over `nodes` of the g-length of `v`.
    pub fn vec_linf_on(&self, v: &VectorField, nodes: &[usize]) -> f64 {
        nodes.iter().fold(0.0, |m, &k| {
            let a = v.data()[k];
            f64::max(m, self.phi.data()[k].exp() * a[0].hypot(a[1]))
        })
    }

    pub fn vec_linf_interior(&self, v: &VectorField) -> f64 {
        self.vec_linf_on(v, &self.grid().interior())
    }

    /// `Γᵢ·Y`, the Christoffel term of `∇_{∂ᵢ}Y`, at node `k`.
    pub fn christoffel(&self, k: usize, i: usize, y: [f64; 2]) -> [f64; 2] {
        let p = self.dphi.data()[k];
        let py = p[0] * y[0] + p[1] * y[1];
        let mut out = [p[i] * y[0] - p[0] * y[i], p[i] * y[1] - p[1] * y[i]];
        out[i] += py;
        out
    }

    /// Covariant derivative `∇X` as an endomorphism field (column `i` is `∇_{∂ᵢ}X`).
    pub fn nabla_vec(&self, x: &VectorField) -> EndoField {
        let xx = x.dx();
        let xy = x.dy();
        let data = (0..x.grid().len())
            .map(|k| {
                let v = x.data()[k];
                let c0 = self.christoffel(k, 0, v);
                let c1 = self.christoffel(k, 1, v);
                let a = xx.data()[k];
                let b = xy.data()[k];
                Mat2::new(a[0] + c0[0], b[0] + c1[0], a[1] + c0[1], b[1] + c1[1])
            })
            .collect();
        EndoField { grid: *x.grid(), data }
    }

    /// Curvature `κ = −e^{−2φ}Δ₀φ`.
    pub fn curvature(&self) -> ScalarField {
        let lap = self.phi.laplacian0();
        lap.zip(&self.e2phi, |l, e| -l / e)
    }
}

/// Gradient `Σ (D_{eᵢ}f) eᵢ = e^{−2φ}∂f`.
pub fn grad(f: &ScalarField, g: &ConformalMetric) -> Result<VectorField, FieldError> {
    g.check(f.grid())?;
    let d = f.gradient0();
    Ok(d.zip(g.e2phi(), |v, e| [v[0] / e, v[1] / e]))
}

/// Divergence `Σ ⟨∇_{eᵢ}X, eᵢ⟩ = ∂ᵢXⁱ + 2 ∂ᵢφ Xⁱ` via Christoffel symbols.
pub fn div_vec(x: &VectorField, g: &ConformalMetric) -> Result<ScalarField, FieldError> {
    g.check(x.grid())?;
    let xx = x.dx();
    let xy = x.dy();
    let data = (0..x.grid().len())
        .map(|k| {
            let v = x.data()[k];
            let c0 = g.christoffel(k, 0, v);
            let c1 = g.christoffel(k, 1, v);
            xx.data()[k][0] + xy.data()[k][1] + c0[0] + c1[1]
        })
        .collect();
    Ok(NodeField { grid: *x.grid(), data })
}

/// Divergence by the exterior-calculus route `−d(αJ)(e₁, e₂)` with `α = X♭`.
pub fn div_vec_exterior(x: &VectorField, g: &ConformalMetric) -> Result<ScalarField, FieldError> {
    g.check(x.grid())?;
    // α = X♭ has chart components e^{2φ}X; (αJ)(v) = α(Jv).
    let alpha = x.zip(g.e2phi(), |v, e| [e * v[0], e * v[1]]);
    let beta = alpha.map(|a| [a[1], -a[0]]);
    let bx = beta.dx();
    let by = beta.dy();
    let data = (0..x.grid().len())
        .map(|k| {
            let dbeta = bx.data()[k][1] - by.data()[k][0];
            -dbeta / g.e2phi().data()[k]
        })
        .collect();
    Ok(NodeField { grid: *x.grid(), data })
}

/// Divergence of an endomorphism field, `Σ (∇_{eᵢ}A) eᵢ`, via Christoffel symbols.
pub fn div_endo(a: &EndoField, g: &ConformalMetric) -> Result<VectorField, FieldError> {
    g.check(a.grid())?;
    let c0 = a.column(0).dx();
    let c1 = a.column(1).dy();
    let data = (0..a.grid().len())
        .map(|k| {
            let m = a.data()[k];
            let col0 = [m.a11, m.a21];
            let col1 = [m.a12, m.a22];
            // Σᵢ Γᵢ·(A∂ᵢ) − A·(Σᵢ Γᵢ∂ᵢ)
            let t0 = g.christoffel(k, 0, col0);
            let t1 = g.christoffel(k, 1, col1);
            let gx = g.christoffel(k, 0, [1.0, 0.0]);
            let gy = g.christoffel(k, 1, [0.0, 1.0]);
            let s = m.apply([gx[0] + gy[0], gx[1] + gy[1]]);
            let e = g.e2phi().data()[k];
            [
                (c0.data()[k][0] + c1.data()[k][0] + t0[0] + t1[0] - s[0]) / e,
                (c0.data()[k][1] + c1.data()[k][1] + t0[1] + t1[1] - s[1]) / e,
            ]
        })
        .collect();
    Ok(NodeField { grid: *a.grid(), data })
}

/// Divergence by the exterior-calculus route `−d^∇(AJ)(e₁, e₂)`, evaluated
/// in the orthonormal frame with its connection form; the exterior
/// derivative is taken from cell circulations.
pub fn div_endo_exterior(a: &EndoField, g: &ConformalMetric) -> Result<VectorField, FieldError> {
    g.check(a.grid())?;
    let m = a.times_j();
    let w1 = m.column(0); // frame components of M e₁
    let w2 = m.column(1); // frame components of M e₂
    let w2x = NodeField { grid: *a.grid(), data: cell_diff(a.grid(), w2.data(), Axis::X) };
    let w1y = NodeField { grid: *a.grid(), data: cell_diff(a.grid(), w1.data(), Axis::Y) };
    let j = Mat2::j();
    let data = (0..a.grid().len())
        .map(|k| {
            let phi = g.phi().data()[k];
            let p = g.dphi().data()[k];
            let em = (-phi).exp();
            // ∇_V e₁ = ω(V) e₂ with ω(e₁) = −e^{−φ}φ_y, ω(e₂) = e^{−φ}φ_x.
            let om1 = -em * p[1];
            let om2 = em * p[0];
            let jw2 = j.apply(w2.data()[k]);
            let jw1 = j.apply(w1.data()[k]);
            let bracket = [em * p[1], -em * p[0]];
            let mb = m.data()[k].apply(bracket);
            let r = [
                em * w2x.data()[k][0] + om1 * jw2[0] - em * w1y.data()[k][0] - om2 * jw1[0] - mb[0],
                em * w2x.data()[k][1] + om1 * jw2[1] - em * w1y.data()[k][1] - om2 * jw1[1] - mb[1],
            ];
            // Frame components → chart components.
            [-em * r[0], -em * r[1]]
        })
        .collect();
    Ok(NodeField { grid: *a.grid(), data })
}

/// Codazzi residual `(d^∇A)(e₁, e₂) = e^{−2φ}(∇_x(A∂_y) − ∇_y(A∂_x))`.
pub fn dnabla_endo(a: &EndoField, g: &ConformalMetric) -> Result<VectorField, FieldError> {
    g.check(a.grid())?;
    let c1x = a.column(1).dx();
    let c0y = a.column(0).dy();
    let data = (0..a.grid().len())
        .map(|k| {
            let m = a.data()[k];
            let t1 = g.christoffel(k, 0, [m.a12, m.a22]);
            let t0 = g.christoffel(k, 1, [m.a11, m.a21]);
            let e = g.e2phi().data()[k];
            [
                (c1x.data()[k][0] + t1[0] - c0y.data()[k][0] - t0[0]) / e,
                (c1x.data()[k][1] + t1[1] - c0y.data()[k][1] - t0[1]) / e,
            ]
        })
        .collect();
    Ok(NodeField { grid: *a.grid(), data })
}

/// Curvature of `g`.
pub fn curvature(g: &ConformalMetric) -> ScalarField {
    g.curvature()
}

/// Pointwise `J·V`.
pub fn rot_j(v: &VectorField) -> VectorField {
    v.map(|x| [-x[1], x[0]])
}

/// The vector field `∇Tr(A) − ∇·A − J∇Tr(AJ) + J∇·(AJ)`, which vanishes
/// identically in the continuum. The gradients use the nodal central
/// differences and the divergences the exterior route, so the discrete field
/// is the truncation error of the two routes (with a single route the four
/// terms cancel exactly).
pub fn frame_identity_field(a: &EndoField, g: &ConformalMetric) -> Result<VectorField, FieldError> {
    let aj = a.times_j();
    let t1 = grad(&a.trace(), g)?;
    let t2 = div_endo_exterior(a, g)?;
    let t3 = rot_j(&grad(&aj.trace(), g)?);
    let t4 = rot_j(&div_endo_exterior(&aj, g)?);
    Ok(t1.sub(&t2).sub(&t3).add(&t4))
}

/// g-norm L∞ over interior nodes of [`frame_identity_field`].
pub fn frame_identity_residual(a: &EndoField, g: &ConformalMetric) -> Result<f64, FieldError> {
    let f = frame_identity_field(a, g)?;
    Ok(g.vec_linf_interior(&f))
}

/// Nodal values at an off-grid point by tensor Lagrange interpolation on the
/// nearest `INTERP_POINTS × INTERP_POINTS` block.
/// Dirichlet layout only: periodic grids are not wrapped.
pub fn interpolate<T: Linear>(f: &NodeField<T>, z: [f64; 2]) -> T {
    let g = f.grid();
    let (wx, i0) = lagrange(z[0], g.x(0), g.dx(), g.nx());
    let (wy, j0) = lagrange(z[1], g.y(0), g.dy(), g.ny());
    let mut acc = T::zero();
    for (b, wyb) in wy.iter().enumerate() {
        for (a, wxa) in wx.iter().enumerate() {
            acc = acc.plus(f.data()[g.idx(i0 + a, j0 + b)].scale(wxa * wyb));
        }
    }
    acc
}

pub const INTERP_POINTS: usize = 6;

fn lagrange(x: f64, x0: f64, h: f64, n: usize) -> ([f64; INTERP_POINTS], usize) {
    let s = (x - x0) / h;
    let half = INTERP_POINTS / 2;
    let start = (s.floor() as isize + 1 - half as isize).clamp(0, (n - INTERP_POINTS) as isize) as usize;
    let mut w = [1.0; INTERP_POINTS];
    for (a, wa) in w.iter_mut().enumerate() {
        for b in 0..INTERP_POINTS {
            if a != b {
                *wa *= (s - (start + b) as f64) / (a as f64 - b as f64);
            }
        }
    }
    (w, start)
}

/// On-disk field file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FieldFile {
    pub grid: Grid,
    pub phi: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<Vec<[f64; 3]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endo: Option<Vec<[f64; 4]>>,
}

impl FieldFile {
    pub fn load(path: &Path) -> Result<Self, FieldError> {
        let file = path.display().to_string();
        let text = fs::read_to_string(path).map_err(|source| FieldError::Io { file: file.clone(), source })?;
        let ff: FieldFile =
            serde_json::from_str(&text).map_err(|source| FieldError::Json { file: file.clone(), source })?;
        ff.validate(&file)?;
        Ok(ff)
    }

    pub fn validate(&self, file: &str) -> Result<(), FieldError> {
        let n = self.grid.len();
        let len_err = |key: &str, got: usize| FieldError::Length {
            file: file.to_string(),
            key: key.to_string(),
            expected: n,
            got,
        };
        if self.phi.len() != n {
            return Err(len_err("phi", self.phi.len()));
        }
        if let Some(h) = &self.h {
            if h.len() != n {
                return Err(len_err("h", h.len()));
            }
            for (k, v) in h.iter().enumerate() {
                if SpdMat2::from_sym(v[0], v[1], v[2]).is_err() {
                    return Err(FieldError::BadValue {
                        file: file.to_string(),
                        key: "h".into(),
                        msg: format!("entry {k} is not positive-definite"),
                    });
                }
            }
        }
        if let Some(e) = &self.endo {
            if e.len() != n {
                return Err(len_err("endo", e.len()));
            }
        }
        for (key, ok) in [
            ("phi", self.phi.iter().all(|v| v.is_finite())),
            ("endo", self.endo.iter().flatten().flatten().all(|v| v.is_finite())),
        ] {
            if !ok {
                return Err(FieldError::BadValue {
                    file: file.to_string(),
                    key: key.into(),
                    msg: "non-finite value".into(),
                });
            }
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<(), FieldError> {
        let file = path.display().to_string();
        let text = serde_json::to_string(self).map_err(|source| FieldError::Json { file: file.clone(), source })?;
        fs::write(path, text).map_err(|source| FieldError::Io { file, source })
    }

    pub fn metric(&self) -> ConformalMetric {
        ConformalMetric::new(NodeField { grid: self.grid, data: self.phi.clone() })
    }

    pub fn endo_field(&self) -> Option<EndoField> {
        self.endo.as_ref().map(|e| NodeField {
            grid: self.grid,
            data: e.iter().map(|&a| Mat2::from_array(a)).collect(),
        })
    }
}
