//! Seeded analytic test fields shared by the verification suites, the CLI and
//! the integration tests. Each carries closed-form derivatives so oracles can
//! avoid the discretisation under test.

use num_complex::Complex64;
use rand_chacha::ChaCha8Rng;

use crate::energy_variation::hessian_endo;
use crate::fields::{ConformalMetric, EndoField, Grid, VectorField};
use crate::j_calculus::Mat2;
use crate::rng::{bump, bump_gradient, uniform, TrigSum};

/// `X = amp·b(x, y)·(u, v)` with `b` a bump supported on `|x| < ax, |y| < ay`.
#[derive(Debug, Clone)]
pub struct BumpVector {
    pub ax: f64,
    pub ay: f64,
    pub amp: f64,
    pub u: TrigSum,
    pub v: TrigSum,
}

impl BumpVector {
    /// Random field supported in the central `frac` of the chart, with wave
    /// numbers up to `kmax`.
    pub fn random(r: &mut ChaCha8Rng, grid: &Grid, frac: f64, amp: f64, kmax: i32) -> Self {
        let (lx, ly) = (grid.lx(), grid.ly());
        Self {
            ax: 0.5 * frac * lx,
            ay: 0.5 * frac * ly,
            amp,
            u: TrigSum::random(r, lx, ly, kmax, 4, 1.0),
            v: TrigSum::random(r, lx, ly, kmax, 4, 1.0),
        }
    }

    pub fn value(&self, x: f64, y: f64) -> [f64; 2] {
        let b = self.amp * bump(x, y, self.ax, self.ay);
        [b * self.u.value(x, y), b * self.v.value(x, y)]
    }

    /// `∂ⱼXⁱ`.
    pub fn jacobian(&self, x: f64, y: f64) -> Mat2 {
        let b = self.amp * bump(x, y, self.ax, self.ay);
        let db = bump_gradient(x, y, self.ax, self.ay);
        let (u, v) = (self.u.value(x, y), self.v.value(x, y));
        let (du, dv) = (self.u.gradient(x, y), self.v.gradient(x, y));
        let a = self.amp;
        Mat2::new(
            a * db[0] * u + b * du[0],
            a * db[1] * u + b * du[1],
            a * db[0] * v + b * dv[0],
            a * db[1] * v + b * dv[1],
        )
    }

    pub fn nodal(&self, grid: Grid) -> VectorField {
        VectorField::from_fn(grid, |x, y| self.value(x, y))
    }

    pub fn nodal_jacobian(&self, grid: Grid) -> EndoField {
        EndoField::from_fn(grid, |x, y| self.jacobian(x, y))
    }
}

/// Symmetric field `A = c·Id + eps·b(x, y)·S(x, y)` with `S` a random
/// trigonometric symmetric matrix and `b` either a bump or `1`.
#[derive(Debug, Clone)]
pub struct SmoothSym {
    pub c: f64,
    pub eps: f64,
    pub support: Option<(f64, f64)>,
    pub s: [TrigSum; 3],
}

impl SmoothSym {
    pub fn random(r: &mut ChaCha8Rng, grid: &Grid, c: f64, eps: f64, support: Option<f64>, kmax: i32) -> Self {
        let (lx, ly) = (grid.lx(), grid.ly());
        let s = [
            TrigSum::random(r, lx, ly, kmax, 4, 1.0),
            TrigSum::random(r, lx, ly, kmax, 4, 1.0),
            TrigSum::random(r, lx, ly, kmax, 4, 1.0),
        ];
        Self { c, eps, support: support.map(|f| (0.5 * f * lx, 0.5 * f * ly)), s }
    }

    pub fn value(&self, x: f64, y: f64) -> Mat2 {
        let b = self.support.map_or(1.0, |(ax, ay)| bump(x, y, ax, ay));
        let e = self.eps * b;
        Mat2::sym(
            self.c + e * self.s[0].value(x, y),
            e * self.s[1].value(x, y),
            self.c + e * self.s[2].value(x, y),
        )
    }

    pub fn nodal(&self, grid: Grid) -> EndoField {
        EndoField::from_fn(grid, |x, y| self.value(x, y))
    }
}

/// Conformal factor of the Poincaré disk with its gradient.
pub fn poincare_phi(x: f64, y: f64) -> (f64, [f64; 2]) {
    let d = 1.0 - x * x - y * y;
    ((2.0 / d).ln(), [2.0 * x / d, 2.0 * y / d])
}

/// Codazzi field `c·Id + eps·(Hess f − f·Id)` of the hyperbolic metric on the
/// Poincaré chart, for a trigonometric `f`.
#[derive(Debug, Clone)]
pub struct HyperbolicCodazzi {
    pub c: f64,
    pub eps: f64,
    pub f: TrigSum,
}

impl HyperbolicCodazzi {
    pub fn random(r: &mut ChaCha8Rng, c: f64, eps: f64) -> Self {
        let f = TrigSum::random(r, 2.0, 2.0, 2, 4, 1.0);
        Self { c, eps, f }
    }

    pub fn value(&self, x: f64, y: f64) -> Mat2 {
        let (phi, dphi) = poincare_phi(x, y);
        let hess = hessian_endo((2.0 * phi).exp(), dphi, self.f.gradient(x, y), self.f.hessian(x, y));
        Mat2::scalar(self.c) + (hess - Mat2::scalar(self.f.value(x, y))) * self.eps
    }

    /// The metric `h = g(A·, A·) = e^{2φ}A²` at a point.
    pub fn metric(&self, x: f64, y: f64) -> Mat2 {
        let (phi, _) = poincare_phi(x, y);
        let a = self.value(x, y);
        a.transpose() * a * (2.0 * phi).exp()
    }

    pub fn nodal(&self, grid: Grid) -> EndoField {
        EndoField::from_fn(grid, |x, y| self.value(x, y))
    }
}

/// Poincaré metric on a grid, with the exact gradient of its conformal factor.
pub fn poincare(grid: Grid) -> ConformalMetric {
    ConformalMetric::with_gradient(grid, |x, y| poincare_phi(x, y).0, |x, y| poincare_phi(x, y).1)
}

/// A random smooth conformal factor `φ = Σ a cos(…)` with amplitude `amp`.
pub fn random_conformal(r: &mut ChaCha8Rng, grid: Grid, amp: f64) -> ConformalMetric {
    let t = TrigSum::random(r, grid.lx(), grid.ly(), 2, 4, amp);
    ConformalMetric::with_gradient(grid, |x, y| t.value(x, y), |x, y| t.gradient(x, y))
}

/// Random general (non-symmetric) endomorphism field with smooth entries.
pub fn random_endo(r: &mut ChaCha8Rng, grid: Grid) -> EndoField {
    let t: Vec<TrigSum> = (0..4).map(|_| TrigSum::random(r, grid.lx(), grid.ly(), 2, 4, 1.0)).collect();
    let c = uniform(r, 0.5, 2.0);
    EndoField::from_fn(grid, |x, y| {
        Mat2::new(c + t[0].value(x, y), t[1].value(x, y), t[2].value(x, y), c + t[3].value(x, y))
    })
}

/// Trace-free Codazzi field `B = e^{−2φ}·Hess₀u` of a conformal metric, with
/// `u = Re Σ c_k z^k` harmonic, so that `h(B·,·)` is the real part of the
/// holomorphic quadratic differential `u_zz dz²`.
#[derive(Debug, Clone)]
pub struct HarmonicQuadratic {
    pub coeffs: Vec<(i32, Complex64)>,
}

impl HarmonicQuadratic {
    /// Random coefficients for powers `2..=kmax` with magnitude up to `amp`.
    pub fn random(r: &mut ChaCha8Rng, kmax: i32, amp: f64) -> Self {
        let coeffs = (2..=kmax).map(|k| (k, Complex64::new(uniform(r, -amp, amp), uniform(r, -amp, amp)))).collect();
        Self { coeffs }
    }

    /// `w = 4·u_zz`, so that `Hess₀u = [[Re w, −Im w], [−Im w, −Re w]]`.
    pub fn w(&self, x: f64, y: f64) -> Complex64 {
        let z = Complex64::new(x, y);
        self.coeffs.iter().map(|&(k, c)| c * (k * (k - 1)) as f64 * z.powi(k - 2)).sum()
    }

    pub fn u(&self, x: f64, y: f64) -> f64 {
        let z = Complex64::new(x, y);
        self.coeffs.iter().map(|&(k, c)| (c * z.powi(k)).re).sum()
    }

    /// `Hess₀u`, exactly trace-free.
    pub fn hessian0(&self, x: f64, y: f64) -> Mat2 {
        let w = self.w(x, y);
        Mat2::sym(w.re, -w.im, -w.re)
    }

    /// `B = e^{−2φ}Hess₀u` on the nodes of `g`.
    pub fn field(&self, g: &ConformalMetric) -> EndoField {
        let grid = *g.grid();
        let mut b = EndoField::from_fn(grid, |x, y| self.hessian0(x, y));
        for (m, e) in b.data_mut().iter_mut().zip(g.e2phi().data()) {
            *m = *m * (1.0 / e);
        }
        b
    }
}
