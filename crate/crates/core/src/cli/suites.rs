//! The checks behind `codazzi verify`.

use serde::{Deserialize, Serialize};

use super::{CliError, RunConfig, Suite};
use crate::diagnostics;
use crate::embedding::{self, HyperboloidPatch, Isometry21, MinkVec};
use crate::energy_variation::{self as ev, CodazziField, MetricField};
use crate::fields::{self, ConformalMetric, EndoField, FieldFile, Grid, ScalarField, Topology};
use crate::fixtures::{self, BumpVector, HarmonicQuadratic, HyperbolicCodazzi, SmoothSym};
use crate::j_calculus::{self as jc, Mat2, SpdMat2};
use crate::one_harmonic;
use crate::rng::{stream, uniform, TrigSum};
use crate::symmetric_space::{self as ss, BeltramiPoint};
use crate::teich_variation::{self as tv, DeformationFamily};

/// One verification check. `values` holds one entry per resolution for
/// refinement checks and a single aggregate otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub resolutions: Vec<usize>,
    pub values: Vec<f64>,
    pub order: Option<f64>,
    pub requirement: String,
    pub passed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: String,
    pub checks: Vec<Check>,
    pub passed: bool,
}

/// Refinement ratio 3.5 expressed as an order.
pub fn ratio_order(ratio: f64) -> f64 {
    ratio.log2()
}

pub(super) struct Context {
    seed: u64,
    tol: Option<f64>,
    n: [usize; 2],
    len: [f64; 2],
    topology: Topology,
}

impl Context {
    pub(super) fn new(cfg: &RunConfig) -> Result<Self, CliError> {
        let n1 = cfg.grid.nx.unwrap_or(32);
        let n2 = cfg.grid.nx2.unwrap_or(2 * n1);
        if n1 < 8 || n2 <= n1 {
            return Err(CliError::Usage(format!("need 8 ≤ nx < nx2, got nx = {n1}, nx2 = {n2}")));
        }
        if cfg.grid.ny.is_some_and(|ny| ny != n1) {
            return Err(CliError::Usage("verify runs on square grids; --ny must equal --nx".into()));
        }
        let lx = cfg.grid.lx.unwrap_or(1.0);
        let ly = cfg.grid.ly.unwrap_or(lx);
        if !(lx > 0.0 && ly > 0.0 && lx.is_finite() && ly.is_finite()) {
            return Err(CliError::Usage(format!("bad extent {lx} × {ly}")));
        }
        if lx.hypot(ly) >= 2.0 {
            return Err(CliError::Usage(format!("extent {lx} × {ly} leaves the Poincaré disk")));
        }
        let topology = cfg.grid.topology.map_or(Topology::Periodic, Topology::from);
        Ok(Self { seed: cfg.seed, tol: cfg.tol, n: [n1, n2], len: [lx, ly], topology })
    }

    fn tol(&self, default: f64) -> f64 {
        self.tol.unwrap_or(default)
    }

    /// Dirichlet grid with `cells` cells per side.
    fn dirichlet(&self, cells: usize) -> Grid {
        Grid::new(cells + 1, cells + 1, self.len[0], self.len[1], Topology::Dirichlet).expect("validated extent")
    }

    fn grid(&self, cells: usize, topology: Topology) -> Grid {
        match topology {
            Topology::Periodic => {
                Grid::new(cells, cells, self.len[0], self.len[1], Topology::Periodic).expect("validated extent")
            }
            Topology::Dirichlet => self.dirichlet(cells),
        }
    }
}

fn finite_all(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}

fn check(name: &str, resolutions: Vec<usize>, values: Vec<f64>, requirement: String, passed: bool) -> Check {
    let passed = passed && finite_all(&values);
    Check { name: name.into(), resolutions, values, order: None, requirement, passed, error: None }
}

fn at_most(name: &str, resolutions: Vec<usize>, values: Vec<f64>, tol: f64) -> Check {
    let ok = values.iter().all(|&v| v <= tol);
    check(name, resolutions, values, format!("<= {tol:e}"), ok)
}

fn at_least(name: &str, resolutions: Vec<usize>, values: Vec<f64>, lo: f64) -> Check {
    let ok = values.iter().all(|&v| v >= lo);
    check(name, resolutions, values, format!(">= {lo:e}"), ok)
}

/// Observed order from residuals at two spacings; passes when the order is at
/// least `min_order` or the fine residual is below `floor`.
fn order(name: &str, res: [usize; 2], values: [f64; 2], spacing: [f64; 2], min_order: f64, floor: f64) -> Check {
    let p = (values[0] / values[1]).ln() / (spacing[0] / spacing[1]).ln();
    let ok = p >= min_order || values[1] <= floor;
    let mut c = check(name, res.to_vec(), values.to_vec(), format!("order >= {min_order:.3} or fine <= {floor:e}"), ok);
    c.order = p.is_finite().then_some(p);
    c
}

fn failed(name: &str, err: impl std::fmt::Display) -> Check {
    Check {
        name: name.into(),
        resolutions: vec![],
        values: vec![],
        order: None,
        requirement: "computable".into(),
        passed: false,
        error: Some(err.to_string()),
    }
}

fn guard(name: &str, f: impl FnOnce() -> Result<Check, Box<dyn std::error::Error>>) -> Check {
    match f() {
        Ok(c) => c,
        Err(e) => failed(name, e),
    }
}

type Res<T> = Result<T, Box<dyn std::error::Error>>;

pub(super) fn run_suite(suite: Suite, ctx: &Context) -> SuiteReport {
    let checks = match suite {
        Suite::Jcalc => jcalc(ctx),
        Suite::Fields => fields_suite(ctx),
        Suite::Energy => energy(ctx),
        Suite::Teich => teich(ctx),
        Suite::Embed => embed(ctx),
        Suite::Appendix => appendix(ctx),
        Suite::Diagnostics => diagnostics_suite(ctx),
        Suite::All => unreachable!("expanded by the caller"),
    };
    let passed = checks.iter().all(|c| c.passed);
    SuiteReport { suite: suite.name().into(), checks, passed }
}

/// Loads and summarises the input files, if any.
pub(super) fn input_checks(cfg: &RunConfig) -> Result<Option<SuiteReport>, CliError> {
    let i = &cfg.inputs;
    if i.g.is_none() && i.h.is_none() && i.endo.is_none() {
        return Ok(None);
    }
    let g = i.g.as_deref().map(FieldFile::load).transpose()?;
    let h = i.h.as_deref().map(FieldFile::load).transpose()?;
    let endo = i.endo.as_deref().map(FieldFile::load).transpose()?;
    let mut checks = Vec::new();
    if let Some(gf) = &g {
        checks.push(check("g max curvature", vec![], vec![one_harmonic::max_curvature(&gf.metric())], "finite".into(), true));
    }
    if let (Some(gf), Some(hf), Some(hp)) = (&g, &h, &i.h) {
        let entries = super::require_key(hf.h.clone(), hp, "h")?;
        let name = "energy report of (g, h)";
        checks.push(guard(name, || {
            if gf.grid != hf.grid {
                return Err("g and h are on different grids".into());
            }
            let hm = MetricField::from_entries(hf.grid, &entries)?;
            let r = ev::report(&hm, &gf.metric())?;
            let v = vec![r.energy, r.gradient_linf, r.correction_linf, r.codazzi_residual];
            Ok(check(name, vec![], v, "finite".into(), true))
        }));
    }
    if let (Some(ef), Some(ep)) = (&endo, &i.endo) {
        let a = super::require_key(ef.endo_field(), ep, "endo")?;
        let name = "endo symmetry and Codazzi residuals";
        checks.push(guard(name, || {
            let c = CodazziField::measure(a, &ef.metric())?;
            Ok(check(name, vec![], vec![c.symmetry_residual(), c.codazzi_residual()], "finite".into(), true))
        }));
    }
    let passed = checks.iter().all(|c| c.passed);
    Ok(Some(SuiteReport { suite: "input".into(), checks, passed }))
}

fn random_mat(r: &mut rand_chacha::ChaCha8Rng) -> Mat2 {
    Mat2::new(uniform(r, -2.0, 2.0), uniform(r, -2.0, 2.0), uniform(r, -2.0, 2.0), uniform(r, -2.0, 2.0))
}

fn random_spd(r: &mut rand_chacha::ChaCha8Rng) -> SpdMat2 {
    let m = random_mat(r);
    SpdMat2::new((m.transpose() * m + Mat2::scalar(0.1)).symmetrized()).expect("shifted Gram matrix")
}

const JCALC_SAMPLES: usize = 10_000;

fn jcalc(ctx: &Context) -> Vec<Check> {
    let mut r = stream(ctx.seed, 100);
    let (mut sig, mut rot, mut rel1, mut rel2, mut act, mut conj) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let j = Mat2::j();
    for _ in 0..JCALC_SAMPLES {
        let a = random_mat(&mut r);
        let scale = 1.0 + a.max_abs();
        sig = sig.max((jc::sigma(a) - jc::jlin_part(a).frobenius()).abs() / scale);
        let rm = Mat2::rotation(uniform(&mut r, 0.0, std::f64::consts::TAU));
        let s = jc::sigma(a);
        rot = rot.max((jc::sigma(rm * a) - s).abs() / scale).max((jc::sigma(rm * a * rm.transpose()) - s).abs() / scale);
        rel1 = rel1.max((a - a.transpose() + j * (a * j).trace()).max_abs() / scale);
        if a.det().abs() > 1e-3 {
            let inv = a.inverse().expect("nonsingular");
            rel2 = rel2.max((j * a.transpose() * j + inv * a.det()).max_abs() / (scale * scale));
        }
        let (g, h) = (random_spd(&mut r), random_spd(&mut r));
        match jc::metric_to_a(g, h).and_then(|am| jc::metric_action(am, g)) {
            Ok(back) => act = act.max((back.mat() - h.mat()).max_abs() / (1.0 + h.mat().max_abs())),
            Err(_) => act = f64::INFINITY,
        }
        let b = random_mat(&mut r).symmetrized();
        let p = random_mat(&mut r);
        if p.det().abs() > 1e-2 {
            let pb = p * b * p.inverse().expect("nonsingular");
            let cond = p.max_abs() * p.inverse().expect("nonsingular").max_abs();
            conj = conj.max((jc::b_form(pb) - jc::b_form(b)).abs() / ((1.0 + b.max_abs()).powi(2) * cond * cond));
        }
    }
    let n = vec![JCALC_SAMPLES];
    vec![
        at_most("sigma equals |J-linear part|", n.clone(), vec![sig], ctx.tol(1e-12)),
        at_most("sigma rotation invariance", n.clone(), vec![rot], ctx.tol(1e-12)),
        at_most("A - At = -Tr(AJ)J", n.clone(), vec![rel1], ctx.tol(1e-14)),
        at_most("J At J = -Det(A) A^-1", n.clone(), vec![rel2], ctx.tol(1e-14)),
        at_most("metric_action(metric_to_a(g, h), g) = h", n.clone(), vec![act], ctx.tol(1e-12)),
        at_most("b conjugation invariance", n, vec![conj], ctx.tol(1e-12)),
    ]
}

const FIELD_SEEDS: u64 = 3;

fn fields_suite(ctx: &Context) -> Vec<Check> {
    let mut out = Vec::new();
    for s in 0..FIELD_SEEDS {
        let name = format!("frame identity, field {s}");
        out.push(guard(&name, || {
            let mut v = [0.0; 2];
            let mut h = [0.0; 2];
            for (i, &n) in ctx.n.iter().enumerate() {
                let grid = ctx.grid(n, ctx.topology);
                let mut r = stream(ctx.seed, 200 + s);
                let a = SmoothSym::random(&mut r, &grid, 1.0, 0.3, None, 1).nodal(grid);
                let g = fixtures::random_conformal(&mut r, grid, 0.3);
                v[i] = fields::frame_identity_residual(&a, &g)?;
                h[i] = grid.dx();
            }
            Ok(order(&name, ctx.n, v, h, 1.8, 1e-12))
        }));
    }
    let name = "divergence routes agree";
    out.push(guard(name, || {
        let mut v = [0.0; 2];
        let mut h = [0.0; 2];
        for (i, &n) in ctx.n.iter().enumerate() {
            let grid = ctx.grid(n, ctx.topology);
            let mut r = stream(ctx.seed, 210);
            let a = SmoothSym::random(&mut r, &grid, 1.0, 0.3, None, 1).nodal(grid);
            let g = fixtures::random_conformal(&mut r, grid, 0.3);
            let d1 = fields::div_endo(&a, &g)?;
            let d2 = fields::div_endo_exterior(&a, &g)?;
            v[i] = g.vec_linf_interior(&d1.sub(&d2));
            h[i] = grid.dx();
        }
        Ok(order(name, ctx.n, v, h, 1.8, 1e-12))
    }));
    out
}

/// `E(t) = E[Φ_{tX}*h]` from a closed-form `h` and the exact Jacobian of `X`.
fn energy_along<'a>(
    grid: Grid,
    hf: &'a dyn Fn(f64, f64) -> Mat2,
    x: &BumpVector,
    g: &ConformalMetric,
) -> impl Fn(f64) -> Res<f64> + 'a {
    let xv = x.nodal(grid);
    let jac = x.nodal_jacobian(grid);
    let g = g.clone();
    move |t| Ok(ev::energy(&ev::pullback_with(grid, hf, &xv.scaled(t), &jac.scaled(t))?, &g)?)
}

fn energy(ctx: &Context) -> Vec<Check> {
    let mut out = Vec::new();
    let name = "gradient vanishes for h = c^2 g";
    out.push(guard(name, || {
        let mut v = Vec::new();
        for &n in &ctx.n {
            let g = fixtures::poincare(ctx.dirichlet(n));
            let h = MetricField::conformal_multiple(&g, 1.5)?;
            v.push(g.vec_linf_interior(&ev::energy_gradient(&h, &g)?));
        }
        Ok(at_most(name, ctx.n.to_vec(), v, ctx.tol(1e-10)))
    }));
    let name = "gradient vs directional derivative (relative)";
    out.push(guard(name, || {
        let mut v = Vec::new();
        for &n in &ctx.n {
            let grid = ctx.dirichlet(n);
            let mut r = stream(ctx.seed, 300);
            let s = SmoothSym::random(&mut r, &grid, 1.0, 0.2, None, 1);
            let hf = |x: f64, y: f64| {
                let a = s.value(x, y);
                a * a
            };
            let g = ConformalMetric::flat(grid);
            let h = MetricField::from_fn(grid, hf)?;
            let xb = BumpVector::random(&mut r, &grid, 0.8, 1.0, 1);
            let e = energy_along(grid, &hf, &xb, &g);
            let eps = 1e-4;
            let fd = ev::TRACE_NORMALISATION * (e(eps)? - e(-eps)?) / (2.0 * eps);
            let form = g.inner(&ev::energy_gradient(&h, &g)?, &xb.nodal(grid));
            v.push((form - fd).abs() / fd.abs());
        }
        Ok(at_most(name, ctx.n.to_vec(), vec![v[1]], ctx.tol(1e-3)).with_coarse(v[0]))
    }));
    let name = "second variation vs second difference (relative)";
    out.push(guard(name, || {
        let n = ctx.n[1];
        let grid = ctx.dirichlet(n);
        let g = fixtures::poincare(grid);
        let mut r = stream(ctx.seed, 310);
        let a = HyperbolicCodazzi::random(&mut r, 2.0, 0.1);
        let hf = |x: f64, y: f64| a.metric(x, y);
        let h = MetricField::from_fn(grid, hf)?;
        let xb = BumpVector::random(&mut r, &grid, 0.8, 1.0, 1);
        let e = energy_along(grid, &hf, &xb, &g);
        let eps = 1e-3;
        let fd2 = ev::TRACE_NORMALISATION * (e(eps)? - 2.0 * e(0.0)? + e(-eps)?) / (eps * eps);
        let form = ev::second_variation(&h, &g, &xb.nodal(grid))?;
        Ok(at_most(name, vec![n], vec![(form - fd2).abs() / fd2.abs()], ctx.tol(1e-2)))
    }));
    let name = "second variation positive at h = c^2 g";
    out.push(guard(name, || {
        let grid = ctx.dirichlet(ctx.n[0]);
        let g = fixtures::poincare(grid);
        let h = MetricField::conformal_multiple(&g, 1.5)?;
        let mut r = stream(ctx.seed, 320);
        let mut lo = f64::INFINITY;
        for _ in 0..5 {
            let x = BumpVector::random(&mut r, &grid, 0.8, 1.0, 2).nodal(grid);
            lo = lo.min(ev::second_variation(&h, &g, &x)?);
        }
        Ok(check(name, vec![ctx.n[0]], vec![lo], "> 0".into(), lo > 0.0))
    }));
    let name = "curvature identity routes";
    out.push(guard(name, || {
        let mut v = [0.0; 2];
        let mut hs = [0.0; 2];
        for (i, &n) in ctx.n.iter().enumerate() {
            let grid = ctx.dirichlet(n);
            let mut r = stream(ctx.seed, 330);
            let a = SmoothSym::random(&mut r, &grid, 1.0, 0.2, None, 1).nodal(grid);
            let f = ev::curvature_identity_field(&a, &fixtures::poincare(grid))?;
            v[i] = f.linf_on(&grid.interior_margin(2));
            hs[i] = grid.dx();
        }
        Ok(order(name, ctx.n, v, hs, 1.8, 1e-12))
    }));
    let name = "flat pullback curvature";
    out.push(guard(name, || {
        let grid = ctx.dirichlet(ctx.n[1]);
        let hp = MetricField::from_fn(grid, |x, y| {
            let d = Mat2::new(1.0, 0.1 * y.cos(), 0.1 * x.cos(), 1.0);
            d.transpose() * d
        })?;
        Ok(at_most(name, vec![ctx.n[1]], vec![ev::metric_curvature(&hp).linf_interior()], ctx.tol(1e-3)))
    }));
    let name = "modified-functional inequality";
    out.push(guard(name, || {
        let grid = ctx.dirichlet(ctx.n[0]);
        let g = fixtures::poincare(grid);
        let mut r = stream(ctx.seed, 340);
        let mut worst = f64::INFINITY;
        for _ in 0..5 {
            let s = SmoothSym::random(&mut r, &grid, 1.0, 0.2, Some(0.8), 1);
            let h = MetricField::from_endo(&s.nodal(grid), &g)?;
            let (l, rr) = ev::modified_inequality_check(&h, &g)?;
            worst = worst.min(l - rr + ev::modified_inequality_slack(rr));
        }
        Ok(at_least(name, vec![ctx.n[0]], vec![worst], 0.0))
    }));
    out
}

impl Check {
    /// Records the coarse-resolution value next to a fine-resolution check.
    fn with_coarse(mut self, v: f64) -> Self {
        self.values.insert(0, v);
        self.resolutions.insert(0, 0);
        self
    }
}

fn teich_setup(grid: Grid, seed: u64) -> Res<(ConformalMetric, CodazziField, DeformationFamily)> {
    let h0 = fixtures::poincare(grid);
    let mut r = stream(seed, 400);
    let hc = HyperbolicCodazzi::random(&mut r, 1.5, 0.05);
    let a0 = CodazziField::measure(hc.nodal(grid), &h0)?;
    let q = HarmonicQuadratic::random(&mut r, 4, 0.3);
    let fam = DeformationFamily::new(q.field(&h0), &h0, 1.0, (-0.1, 0.1))?;
    Ok((h0, a0, fam))
}

fn teich(ctx: &Context) -> Vec<Check> {
    let mut out = Vec::new();
    let mut phi = Vec::new();
    let mut first = Vec::new();
    let mut second = Vec::new();
    let mut err = None;
    for &n in &ctx.n {
        match (|| -> Res<()> {
            let (h0, a0, fam) = teich_setup(ctx.dirichlet(n), ctx.seed)?;
            phi.push(fam.phi0().min());
            let formula = tv::e_hat_first_derivative(&a0, fam.b(), &h0)?;
            let dt = 1e-4;
            let fd = (tv::e_hat_along(&a0, &fam, &h0, dt)? - tv::e_hat_along(&a0, &fam, &h0, -dt)?) / (2.0 * dt);
            first.push((fd - formula).abs() / formula.abs().max(1e-12));
            let (l, r) = tv::second_derivative_lower_bound(&a0, &fam, &h0)?;
            second.push((l, r));
            Ok(())
        })() {
            Ok(()) => {}
            Err(e) => err = Some(e.to_string()),
        }
    }
    if let Some(e) = err {
        return vec![failed("teich setup", e)];
    }
    let res = ctx.n.to_vec();
    out.push(at_least("phi0 >= 0", res.clone(), phi, -1e-10));
    out.push(at_most("first derivative vs FD (relative)", res.clone(), first, ctx.tol(1e-2)));
    let fd2: Vec<f64> = second.iter().map(|p| p.0).collect();
    out.push(check("second derivative positive", res.clone(), fd2, "> 0".into(), second.iter().all(|p| p.0 > 0.0)));
    let margin: Vec<f64> = second.iter().map(|&(l, r)| l - r + tv::second_derivative_slack(r)).collect();
    out.push(at_least("second derivative above lower bound", res, margin, 0.0));
    out
}

/// `f = −(1 + 0.1 s)` with its derivatives.
fn negative_f(s: &TrigSum) -> impl Fn(f64, f64) -> (f64, [f64; 2], [f64; 3]) + '_ {
    move |x, y| (-(1.0 + 0.1 * s.value(x, y)), s.gradient(x, y).map(|v| -0.1 * v), s.hessian(x, y).map(|v| -0.1 * v))
}

fn embed(ctx: &Context) -> Vec<Check> {
    let a = 0.5;
    let mut rows: Vec<[f64; 7]> = Vec::new();
    let mut h = [0.0; 2];
    let mut hyperboloid = Vec::new();
    let mut convex = true;
    for (i, &n) in ctx.n.iter().enumerate() {
        let r = (|| -> Res<[f64; 7]> {
            let p = HyperboloidPatch::new(n, a)?;
            h[i] = p.grid().dx();
            let grid = *p.grid();
            let one = CodazziField::measure(EndoField::constant(grid, Mat2::id()), p.metric())?;
            let xi = embedding::integrate_immersion(&one, &p, p.iota(p.base()), 1.0, 1e-6)?;
            hyperboloid.push(xi.sub(&p.iota_field()).linf());
            let hc = HyperbolicCodazzi::random(&mut stream(ctx.seed, 1), 1.0, -0.1);
            let ac = CodazziField::measure(hc.nodal(grid), p.metric())?;
            let x = embedding::integrate_immersion(&ac, &p, p.iota(p.base()), 1.0, 1.0)?;
            let c = embedding::convexity_check(&x, &p);
            convex &= c.spacelike && c.definite;
            let half = tv::hessian_type_field(p.metric(), negative_f(&hc.f)).scaled(0.5);
            let ah = CodazziField::measure(half, p.metric())?;
            let fv = negative_f(&hc.f);
            let (f0, df0, _) = fv(0.0, 0.0);
            let xp = embedding::integrate_immersion(&ah, &p, embedding::homogeneous_gradient([0.0, 0.0], f0, df0), 1.0, 1.0)?;
            let xm = embedding::integrate_immersion(&ah, &p, MinkVec::default(), -1.0, 1.0)?;
            let sum = embedding::support_function(&xp, &p, 1.0).add(&embedding::support_function(&xm, &p, -1.0));
            let pair = sum.sub(&ScalarField::from_fn(grid, |x, y| fv(x, y).0)).linf_on(&p.disk_nodes(0));
            let c2 = CodazziField::measure(EndoField::constant(grid, Mat2::scalar(2.0)), p.metric())?;
            let x2 = embedding::integrate_immersion(&c2, &p, p.iota(p.base()), 1.0, 1e-6)?;
            let boost = embedding::equivariance_residual(&x2, &Isometry21::boost_x(0.1), &c2, &p, 1e-8)?.residual;
            let rad = |x: f64, y: f64| (1.0 + 0.3 * (x * x + y * y), [0.6 * x, 0.6 * y], [0.6, 0.0, 0.6]);
            let ar = CodazziField::measure(tv::hessian_type_field(p.metric(), rad).scaled(-1.0), p.metric())?;
            let xr = embedding::integrate_immersion(&ar, &p, p.iota(p.base()), 1.0, 1.0)?;
            let rot = embedding::equivariance_residual(&xr, &Isometry21::rotation(0.7), &ar, &p, 1e-6)?.residual;
            Ok([
                embedding::plaquette_defect(&ac, &p),
                embedding::path_dependence(&ac, &p, 1.0)?,
                embedding::induced_metric_error(&x, &ac, &p),
                embedding::differential_error(&x, &ac, &p, 1.0),
                pair,
                boost,
                rot,
            ])
        })();
        match r {
            Ok(v) => rows.push(v),
            Err(e) => return vec![failed("embedding setup", e)],
        }
    }
    let min = ratio_order(3.5);
    let names = [
        "plaquette defect",
        "path dependence",
        "induced metric error",
        "differential error",
        "pair support sum minus f",
        "equivariance, A = 2Id under a boost",
        "equivariance, radial field under a rotation",
    ];
    let mut out = vec![at_most("A = Id reproduces the hyperboloid", ctx.n.to_vec(), hyperboloid, ctx.tol(1e-10))];
    for (c, name) in names.iter().enumerate() {
        let floor = if c >= 5 { 1e-12 } else { 0.0 };
        let min = if c == 0 { min } else { 1.8 };
        out.push(order(name, ctx.n, [rows[0][c], rows[1][c]], h, min, floor));
    }
    out.push(check("Hessian-type immersion is locally strictly convex", ctx.n.to_vec(), vec![], "true".into(), convex));
    out
}

const APPENDIX_SAMPLES: usize = 10_000;

fn appendix(ctx: &Context) -> Vec<Check> {
    let mut r = stream(ctx.seed, 500);
    let (mut psi, mut conj, mut ident, mut membership, mut sig) = (0.0f64, 0.0f64, 0.0f64, 0usize, 0usize);
    let mut err = None;
    for _ in 0..APPENDIX_SAMPLES {
        let bp = BeltramiPoint::new(uniform(&mut r, -1.5, 1.5), num_complex::Complex64::new(uniform(&mut r, -1.0, 1.0), uniform(&mut r, -1.0, 1.0)));
        let m = Mat2::id() + ss::beltrami_matrix(bp);
        let s = bp.p + 1.0;
        let scale = 1.0 + s * s + bp.q.norm_sqr();
        ident = ident.max((m.trace() - 2.0 * s).abs() / scale).max((m.det() - (s * s - bp.q.norm_sqr())).abs() / scale);
        let pd = m.sym_eigenvalues().0 > 0.0;
        if pd != bp.in_u_tilde() {
            membership += 1;
        }
        if bp.in_u_tilde() {
            let g0 = SpdMat2::scalar(uniform(&mut r, 0.2, 3.0)).expect("positive");
            match (ss::psi_tilde(bp, g0), ss::exp_map(ss::beltrami_matrix(bp), g0)) {
                (Ok(a), Ok(b)) => psi = psi.max((a.mat() - b.mat()).max_abs() / (1.0 + b.mat().max_abs())),
                // Boundary of the domain within rounding.
                (Err(_), _) | (_, Err(_)) if m.sym_eigenvalues().0 < 1e-12 => {}
                (Err(e), _) | (_, Err(e)) => err = Some(e.to_string()),
            }
        }
        let g = random_mat(&mut r);
        let b = random_mat(&mut r).symmetrized();
        if g.det().abs() > 1e-2 {
            let cond = g.max_abs() * g.inverse().expect("nonsingular").max_abs();
            match ss::conjugation_residual(g, b) {
                Ok(v) => conj = conj.max(v / ((1.0 + b.max_abs()).powi(2) * cond * cond)),
                Err(e) => err = Some(e.to_string()),
            }
        }
        if ss::signature(random_spd(&mut r), uniform(&mut r, -1.0, 2.0)) != (2, 1) {
            sig += 1;
        }
    }
    let name = "geodesic equation residual";
    let geo = guard(name, || {
        let mut worst = 0.0f64;
        for _ in 0..20 {
            let a = Mat2::sym(uniform(&mut r, -0.5, 0.5), uniform(&mut r, -0.5, 0.5), uniform(&mut r, -0.5, 0.5));
            for t in [0.0, 0.3, 0.6] {
                worst = worst.max(ss::geodesic_residual(a, t, 1e-4)?);
            }
        }
        Ok(at_most(name, vec![], vec![worst], ctx.tol(1e-6)))
    });
    let n = vec![APPENDIX_SAMPLES];
    let mut out = vec![
        at_most("psi_tilde = exp_map of beltrami_matrix", n.clone(), vec![psi], ctx.tol(1e-14)),
        geo,
        at_most("b conjugation invariance", n.clone(), vec![conj], ctx.tol(1e-12)),
        at_most("trace and determinant of Id + A(P, Q)", n.clone(), vec![ident], ctx.tol(1e-14)),
        at_most("U-tilde membership mismatches", n.clone(), vec![membership as f64], 0.0),
        at_most("signature (2, 1) mismatches", n, vec![sig as f64], 0.0),
    ];
    if let Some(e) = err {
        out.push(failed("appendix evaluation", e));
    }
    out
}

fn diagnostics_suite(ctx: &Context) -> Vec<Check> {
    let mut r = stream(ctx.seed, 600);
    let s = TrigSum::random(&mut r, 1.0, 1.0, 1, 4, 0.005);
    let hc = HyperbolicCodazzi::random(&mut r, 1.0, 0.1);
    let mut jres = Vec::new();
    let mut flat = [0.0; 2];
    let mut hyp = [0.0; 2];
    let mut bad = Vec::new();
    let mut resc = Vec::new();
    let mut eid = Vec::new();
    let mut eid_tol = 0.0f64;
    let mut mp = Vec::new();
    let mut hs = [0.0; 2];
    for (i, &n) in ctx.n.iter().enumerate() {
        let step = (|| -> Res<()> {
            let grid = ctx.dirichlet(n);
            hs[i] = grid.dx();
            let g = ConformalMetric::flat(grid);
            let a = EndoField::from_fn(grid, |x, y| {
                let h = s.hessian(x, y);
                Mat2::sym(1.0 + h[0], h[1], 1.0 + h[2])
            });
            let control = EndoField::from_fn(grid, |x, _| Mat2::diag(1.0, 1.0 + x));
            let u = ScalarField::from_fn(grid, |x, y| 0.3 * (x + 2.0 * y).sin());
            let gp = ConformalMetric::poincare(grid)?;
            let ah = hc.nodal(grid);
            let (sq, compat) = diagnostics::intermediate_j_residuals(&ah, &gp)?;
            jres.push(sq.max(compat));
            flat[i] = diagnostics::alpha_harmonic_defect(&a, &g)?;
            hyp[i] = diagnostics::alpha_harmonic_defect(&ah, &gp)?;
            bad.push(diagnostics::alpha_harmonic_defect(&control, &g)?);
            let rs = diagnostics::alpha_harmonic_defect_rescaled(&ah, &gp, &u)?;
            resc.push((rs - hyp[i]).abs() / hyp[i].max(f64::MIN_POSITIVE));
            let (l, rr) = diagnostics::energy_identity_check(&CodazziField::measure(ah, &gp)?, &gp)?;
            eid.push((l - rr).abs() / rr.abs());
            eid_tol = eid_tol.max(hs[i] * hs[i]);
            mp.push(diagnostics::max_principle_premise(&a, &g, [0.1, 0.0])?);
            Ok(())
        })();
        if let Err(e) = step {
            return vec![failed("diagnostics setup", e)];
        }
    }
    let res = ctx.n.to_vec();
    let collar = guard("collar and modulus hand values", || {
        let c = diagnostics::collar_and_modulus(std::f64::consts::TAU, 1.0, 2)?;
        let d = diagnostics::collar_and_modulus(2.0, 0.5, 3)?;
        let (derived, stated) = diagnostics::intermediate_modulus_bounds(1.0);
        let tau = std::f64::consts::TAU;
        let errs = [
            c.mod_upper - 2.0,
            d.l2max - (1.0 / 1f64.sinh()).asinh(),
            d.l - std::f64::consts::PI * 0.5f64.tanh().atan(),
            diagnostics::modulus_lower_via_flat(1.0, 1.0) - tau,
            derived - tau,
            stated - tau,
        ];
        let worst = errs.iter().fold(0.0f64, |m, e| m.max(e.abs()));
        Ok(at_most("collar and modulus hand values", vec![], vec![worst], ctx.tol(1e-12)))
    });
    vec![
        at_most("J-hat squares to -Id and is compatible", res.clone(), jres, ctx.tol(1e-12)),
        order("alpha-harmonic defect, flat Codazzi", ctx.n, flat, hs, 1.8, 1e-12),
        order("alpha-harmonic defect, hyperbolic Codazzi", ctx.n, hyp, hs, 1.8, 1e-12),
        at_least("alpha-harmonic defect, negative control", res.clone(), bad, 0.1),
        at_most("alpha-harmonic defect under source rescaling (relative change)", res.clone(), resc, ctx.tol(1e-10)),
        at_most("energy identity (relative)", res.clone(), eid, ctx.tol(eid_tol)),
        check("maximum-principle premise", res, mp.clone(), "> 0".into(), mp.iter().all(|&v| v > 0.0)),
        collar,
    ]
}
