//! Seeded randomness and the smooth random test fields built from it.
//!
//! All randomness goes through ChaCha8, a counter-based generator: the pair
//! (seed, stream) fixes the whole sequence, so a check can draw from its own
//! stream without disturbing any other.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Generator for `(seed, stream)`.
pub fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

pub fn uniform(r: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * r.gen::<f64>()
}

/// A finite sum `Σ a·cos(2π(kx·x/lx + ky·y/ly) + phase)`.
///
/// With integer wave numbers the sum is periodic on `[−lx/2, lx/2] × [−ly/2, ly/2]`.
#[derive(Debug, Clone)]
pub struct TrigSum {
    pub lx: f64,
    pub ly: f64,
    pub terms: Vec<(f64, f64, f64, f64)>,
}

impl TrigSum {
    /// Random sum with wave numbers in `-kmax..=kmax` and amplitudes
    /// decaying like `1/(1 + |k|²)`, scaled so the sum is at most `amp`.
    pub fn random(r: &mut ChaCha8Rng, lx: f64, ly: f64, kmax: i32, nterms: usize, amp: f64) -> Self {
        let mut terms = Vec::with_capacity(nterms);
        let mut total = 0.0;
        for _ in 0..nterms {
            let kx = r.gen_range(-kmax..=kmax) as f64;
            let ky = r.gen_range(-kmax..=kmax) as f64;
            let a = uniform(r, -1.0, 1.0) / (1.0 + kx * kx + ky * ky);
            let phase = uniform(r, 0.0, 2.0 * PI);
            total += a.abs();
            terms.push((kx, ky, a, phase));
        }
        let scale = if total > 0.0 { amp / total } else { 0.0 };
        for t in &mut terms {
            t.2 *= scale;
        }
        Self { lx, ly, terms }
    }

    fn arg(&self, t: &(f64, f64, f64, f64), x: f64, y: f64) -> (f64, f64, f64) {
        let wx = 2.0 * PI * t.0 / self.lx;
        let wy = 2.0 * PI * t.1 / self.ly;
        (wx * x + wy * y + t.3, wx, wy)
    }

    pub fn value(&self, x: f64, y: f64) -> f64 {
        self.terms
            .iter()
            .map(|t| t.2 * self.arg(t, x, y).0.cos())
            .sum()
    }

    /// `(f_x, f_y)`.
    pub fn gradient(&self, x: f64, y: f64) -> [f64; 2] {
        let mut g = [0.0; 2];
        for t in &self.terms {
            let (a, wx, wy) = self.arg(t, x, y);
            let s = -t.2 * a.sin();
            g[0] += s * wx;
            g[1] += s * wy;
        }
        g
    }

    /// `(f_xx, f_xy, f_yy)`.
    pub fn hessian(&self, x: f64, y: f64) -> [f64; 3] {
        let mut h = [0.0; 3];
        for t in &self.terms {
            let (a, wx, wy) = self.arg(t, x, y);
            let c = -t.2 * a.cos();
            h[0] += c * wx * wx;
            h[1] += c * wx * wy;
            h[2] += c * wy * wy;
        }
        h
    }
}

/// Smooth bump `(1 − (x/ax)²)³(1 − (y/ay)²)³` on `|x| < ax, |y| < ay`, zero outside.
/// Vanishes with its first two derivatives on the boundary of its box.
pub fn bump(x: f64, y: f64, ax: f64, ay: f64) -> f64 {
    let u = 1.0 - (x / ax).powi(2);
    let v = 1.0 - (y / ay).powi(2);
    if u <= 0.0 || v <= 0.0 {
        0.0
    } else {
        u.powi(3) * v.powi(3)
    }
}

/// Gradient of [`bump`].
pub fn bump_gradient(x: f64, y: f64, ax: f64, ay: f64) -> [f64; 2] {
    let u = 1.0 - (x / ax).powi(2);
    let v = 1.0 - (y / ay).powi(2);
    if u <= 0.0 || v <= 0.0 {
        return [0.0; 2];
    }
    let du = -2.0 * x / (ax * ax);
    let dv = -2.0 * y / (ay * ay);
    [3.0 * u * u * du * v.powi(3), u.powi(3) * 3.0 * v * v * dv]
}
