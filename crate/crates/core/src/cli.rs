//! The `codazzi` command line: verification suites, the one-harmonic solver
//! and the immersion exporter.
//!
//! Exit status: 0 when everything passes, 1 when a check fails or an input is
//! refused, 2 on usage and I/O errors.

mod suites;

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::{self, Convexity, EmbeddingError, HyperboloidPatch};
use crate::energy_variation::{CodazziField, MetricField};
use crate::fields::{self, FieldError, FieldFile, Grid, Topology, VectorField};
use crate::fixtures;
use crate::j_calculus::Mat2;
use crate::one_harmonic::{self, Displacement, NewtonOptions, SolveError};
use crate::rng;

pub use suites::{Check, SuiteReport};

/// Default Newton tolerance of `solve`.
pub const SOLVE_TOL: f64 = 1e-8;
/// Default Codazzi certification tolerance of `embed`.
pub const EMBED_CODAZZI_TOL: f64 = 1e-2;
/// Symmetry tolerance for endomorphism inputs.
pub const SYMMETRY_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Input(#[from] FieldError),
    #[error("cannot write {file}: {msg}")]
    Output { file: String, msg: String },
    #[error("refused: {0}")]
    Refused(String),
    #[error("solver failed: {0}")]
    Solve(#[from] SolveError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Input(_) | CliError::Output { .. } => 2,
            CliError::Refused(_) | CliError::Solve(_) => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "codazzi", version, about = "Codazzi fields, one-harmonic maps and Minkowski immersions")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Run verification suites at two resolutions and write a JSON report.
    Verify(VerifyArgs),
    /// Solve for the one-harmonic diffeomorphism of a metric pair.
    Solve(SolveArgs),
    /// Integrate a Codazzi field to an immersion in R^{2,1} and export the mesh.
    Embed(EmbedArgs),
    /// Write a seeded manufactured input set (g, h, reference map, endo field).
    Manufacture(ManufactureArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Jcalc,
    Fields,
    Energy,
    Teich,
    Embed,
    Appendix,
    Diagnostics,
    All,
}

impl Suite {
    pub const EACH: [Suite; 7] =
        [Suite::Jcalc, Suite::Fields, Suite::Energy, Suite::Teich, Suite::Embed, Suite::Appendix, Suite::Diagnostics];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Jcalc => "jcalc",
            Suite::Fields => "fields",
            Suite::Energy => "energy",
            Suite::Teich => "teich",
            Suite::Embed => "embed",
            Suite::Appendix => "appendix",
            Suite::Diagnostics => "diagnostics",
            Suite::All => "all",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum TopologyArg {
    Periodic,
    Dirichlet,
}

impl From<TopologyArg> for Topology {
    fn from(t: TopologyArg) -> Topology {
        match t {
            TopologyArg::Periodic => Topology::Periodic,
            TopologyArg::Dirichlet => Topology::Dirichlet,
        }
    }
}

#[derive(Debug, Clone, Args)]
struct GridArgs {
    /// Cells per side at the coarse resolution.
    #[arg(long)]
    nx: Option<usize>,
    #[arg(long)]
    ny: Option<usize>,
    #[arg(long)]
    lx: Option<f64>,
    #[arg(long)]
    ly: Option<f64>,
    #[arg(long, value_enum)]
    topology: Option<TopologyArg>,
}

#[derive(Debug, Clone, Args)]
struct CommonArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[arg(long, value_enum, default_value = "all")]
    suite: Suite,
    #[arg(long)]
    g: Option<PathBuf>,
    #[arg(long)]
    h: Option<PathBuf>,
    #[arg(long)]
    endo: Option<PathBuf>,
    #[command(flatten)]
    grid: GridArgs,
    /// Cells per side at the fine resolution (default 2·nx).
    #[arg(long)]
    nx2: Option<usize>,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Debug, Args)]
struct SolveArgs {
    #[arg(long, required = true)]
    g: PathBuf,
    #[arg(long, required = true)]
    h: PathBuf,
    /// Displacement file of the map ψ with h = ψ*h₀; enables the recovery error.
    #[arg(long)]
    reference: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    continuation_steps: usize,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Debug, Args)]
struct EmbedArgs {
    /// Endomorphism field on a Poincaré patch grid; A = Id when omitted.
    #[arg(long)]
    endo: Option<PathBuf>,
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Debug, Args)]
struct ManufactureArgs {
    #[command(flatten)]
    grid: GridArgs,
    /// Amplitude of the manufactured diffeomorphism.
    #[arg(long, default_value_t = 0.004)]
    delta: f64,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CommandKind {
    Verify,
    Solve,
    Embed,
    Manufacture,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Inputs {
    pub g: Option<PathBuf>,
    pub h: Option<PathBuf>,
    pub endo: Option<PathBuf>,
    pub reference: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GridOverrides {
    pub nx: Option<usize>,
    pub nx2: Option<usize>,
    pub ny: Option<usize>,
    pub lx: Option<f64>,
    pub ly: Option<f64>,
    pub topology: Option<TopologyArg>,
}

/// Everything a run depends on. Identical configurations give byte-identical
/// outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: CommandKind,
    pub suite: Option<Suite>,
    pub inputs: Inputs,
    pub grid: GridOverrides,
    pub seed: u64,
    pub tol: Option<f64>,
    /// Where the report goes; not part of the report itself.
    #[serde(skip)]
    pub out: Option<PathBuf>,
    pub continuation_steps: usize,
    pub delta: Option<f64>,
}

impl RunConfig {
    pub fn verify(suite: Suite) -> Self {
        RunConfig {
            command: CommandKind::Verify,
            suite: Some(suite),
            inputs: Inputs::default(),
            grid: GridOverrides::default(),
            seed: 0,
            tol: None,
            out: None,
            continuation_steps: 10,
            delta: None,
        }
    }
}

fn overrides(g: &GridArgs, nx2: Option<usize>) -> GridOverrides {
    GridOverrides { nx: g.nx, nx2, ny: g.ny, lx: g.lx, ly: g.ly, topology: g.topology }
}

impl From<Cli> for RunConfig {
    fn from(cli: Cli) -> RunConfig {
        let base = RunConfig::verify(Suite::All);
        match cli.command {
            Cmd::Verify(a) => RunConfig {
                suite: Some(a.suite),
                inputs: Inputs { g: a.g, h: a.h, endo: a.endo, reference: None },
                grid: overrides(&a.grid, a.nx2),
                seed: a.common.seed,
                tol: a.common.tol,
                out: a.common.out,
                ..base
            },
            Cmd::Solve(a) => RunConfig {
                command: CommandKind::Solve,
                suite: None,
                inputs: Inputs { g: Some(a.g), h: Some(a.h), endo: None, reference: a.reference },
                seed: a.common.seed,
                tol: a.common.tol,
                out: a.common.out,
                continuation_steps: a.continuation_steps,
                ..base
            },
            Cmd::Embed(a) => RunConfig {
                command: CommandKind::Embed,
                suite: None,
                inputs: Inputs { endo: a.endo, ..Inputs::default() },
                grid: overrides(&a.grid, None),
                seed: a.common.seed,
                tol: a.common.tol,
                out: a.common.out,
                ..base
            },
            Cmd::Manufacture(a) => RunConfig {
                command: CommandKind::Manufacture,
                suite: None,
                grid: overrides(&a.grid, None),
                seed: a.common.seed,
                tol: a.common.tol,
                out: a.common.out,
                delta: Some(a.delta),
                ..base
            },
        }
    }
}

/// Parses `args` (program name first), runs the command and returns the exit
/// status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli.into()) {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("codazzi: {e}");
            e.exit_code()
        }
    }
}

/// Runs a configuration; `Ok(false)` when a check failed.
pub fn execute(cfg: &RunConfig) -> Result<bool, CliError> {
    match cfg.command {
        CommandKind::Verify => cmd_verify(cfg),
        CommandKind::Solve => cmd_solve(cfg),
        CommandKind::Embed => cmd_embed(cfg),
        CommandKind::Manufacture => cmd_manufacture(cfg),
    }
}

fn write_out(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::Output { file: path.display().to_string(), msg: e.to_string() })
}

fn to_json<T: Serialize>(v: &T) -> Vec<u8> {
    let mut s = serde_json::to_vec_pretty(v).expect("report serialises");
    s.push(b'\n');
    s
}

fn out_dir(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    let dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir).map_err(|e| CliError::Output { file: dir.display().to_string(), msg: e.to_string() })?;
    Ok(dir)
}

fn load(path: &Path) -> Result<FieldFile, CliError> {
    Ok(FieldFile::load(path)?)
}

fn require_key<T>(v: Option<T>, file: &Path, key: &str) -> Result<T, CliError> {
    v.ok_or_else(|| {
        CliError::Input(FieldError::BadValue { file: file.display().to_string(), key: key.into(), msg: "missing".into() })
    })
}

#[derive(Debug, Serialize)]
pub struct VerifyReport {
    pub config: RunConfig,
    pub suites: Vec<SuiteReport>,
    pub passed: bool,
}

fn cmd_verify(cfg: &RunConfig) -> Result<bool, CliError> {
    let ctx = suites::Context::new(cfg)?;
    // Inputs are loaded before any suite runs so that a bad file fails fast.
    let input = suites::input_checks(cfg)?;
    let suite = cfg.suite.unwrap_or(Suite::All);
    let selected: Vec<Suite> = if suite == Suite::All { Suite::EACH.to_vec() } else { vec![suite] };
    let mut reports: Vec<SuiteReport> = selected.into_iter().map(|s| suites::run_suite(s, &ctx)).collect();
    if let Some(r) = input {
        reports.insert(0, r);
    }
    let passed = reports.iter().all(|r| r.passed);
    for r in &reports {
        for c in &r.checks {
            eprintln!("{} {}/{}", if c.passed { "pass" } else { "FAIL" }, r.suite, c.name);
        }
    }
    let report = VerifyReport { config: cfg.clone(), suites: reports, passed };
    let bytes = to_json(&report);
    match &cfg.out {
        Some(p) => write_out(p, &bytes)?,
        None => {
            std::io::stdout().write_all(&bytes).map_err(|e| CliError::Output { file: "stdout".into(), msg: e.to_string() })?
        }
    }
    Ok(passed)
}

/// Nodal displacement field on disk.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DisplacementFile {
    pub grid: Grid,
    pub x: Vec<[f64; 2]>,
}

impl DisplacementFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let file = path.display().to_string();
        let text = fs::read_to_string(path).map_err(|source| FieldError::Io { file: file.clone(), source })?;
        let d: DisplacementFile =
            serde_json::from_str(&text).map_err(|source| FieldError::Json { file: file.clone(), source })?;
        if d.x.len() != d.grid.len() {
            return Err(FieldError::Length { file, key: "x".into(), expected: d.grid.len(), got: d.x.len() }.into());
        }
        Ok(d)
    }

    pub fn field(&self) -> Result<VectorField, CliError> {
        Ok(VectorField::new(self.grid, self.x.clone())?)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveSummary {
    pub config: RunConfig,
    pub method: String,
    pub converged: bool,
    pub report: one_harmonic::SolveReport,
    pub final_residual: f64,
    pub max_curvature_g: f64,
    pub min_jacobian_det: f64,
    pub recovery_error: Option<f64>,
}

fn cmd_solve(cfg: &RunConfig) -> Result<bool, CliError> {
    let (gp, hp) = match (&cfg.inputs.g, &cfg.inputs.h) {
        (Some(g), Some(h)) => (g, h),
        _ => return Err(CliError::Usage("solve needs --g and --h".into())),
    };
    let gf = load(gp)?;
    let hf = load(hp)?;
    if gf.grid != hf.grid {
        return Err(CliError::Usage(format!("{} and {} are on different grids", gp.display(), hp.display())));
    }
    let g = gf.metric();
    let h = MetricField::from_entries(hf.grid, &require_key(hf.h.clone(), hp, "h")?)
        .map_err(|e| CliError::Usage(format!("{}: {e}", hp.display())))?;
    if g.grid().topology() != Topology::Dirichlet {
        return Err(CliError::Refused("the solver needs a Dirichlet grid".into()));
    }
    let kappa = one_harmonic::max_curvature(&g);
    if !(kappa < 0.0) {
        return Err(CliError::Refused(format!(
            "background metric {} has max curvature {kappa:.3e}; the one-harmonic operator is only elliptic \
             for negatively curved g (κ_g < 0)",
            gp.display()
        )));
    }
    let tol = cfg.tol.unwrap_or(SOLVE_TOL);
    let x0 = Displacement::zero(*g.grid())?;
    let opts = NewtonOptions { tol, ..Default::default() };
    let target = one_harmonic::Target::nodal(&h);
    let (x, report, method) = match one_harmonic::newton_solve_target(&g, &target, &x0, opts) {
        Ok((x, r)) => (x, r, "newton"),
        Err(_) => {
            // Homotopy from the conformal multiple of g with the same total area.
            let c = (h.data().iter().map(|m| m.mat().det().sqrt()).sum::<f64>()
                / g.e2phi().data().iter().sum::<f64>())
            .sqrt();
            let h0 = MetricField::conformal_multiple(&g, c).map_err(SolveError::from)?;
            let (x, r) = one_harmonic::continuation_solve(&g, &g, &h0, &h, cfg.continuation_steps)?;
            (x, r, "continuation")
        }
    };
    let final_residual = report.residuals.last().copied().unwrap_or(f64::NAN);
    let recovery_error = match &cfg.inputs.reference {
        Some(p) => Some(recovery(&x, &DisplacementFile::load(p)?.field()?)?),
        None => None,
    };
    let summary = SolveSummary {
        config: cfg.clone(),
        method: method.into(),
        converged: final_residual <= tol,
        report,
        final_residual,
        max_curvature_g: kappa,
        min_jacobian_det: x.jacobian_det().min(),
        recovery_error,
    };
    let dir = out_dir(cfg)?;
    let disp = DisplacementFile { grid: *x.grid(), x: x.field().data().to_vec() };
    write_out(&dir.join("displacement.json"), &to_json(&disp))?;
    write_out(&dir.join("solve_report.json"), &to_json(&summary))?;
    eprintln!(
        "solve: {method}, {} iterations, residual {final_residual:.3e}{}",
        summary.report.iterations,
        recovery_error.map_or(String::new(), |r| format!(", recovery {r:.3e}"))
    );
    Ok(summary.converged)
}

/// `max_k |ψ(Φ_X(p_k)) − p_k|` with `ψ − id` interpolated from its nodal values.
fn recovery(x: &Displacement, psi: &VectorField) -> Result<f64, CliError> {
    if psi.grid() != x.grid() {
        return Err(CliError::Usage("reference map is on a different grid".into()));
    }
    let grid = *x.grid();
    Ok((0..grid.len()).fold(0.0, |m, k| {
        let q = x.map_node(k);
        let v = fields::interpolate(psi, q);
        let p = grid.point(k);
        f64::max(m, (q[0] + v[0] - p[0]).abs().max((q[1] + v[1] - p[1]).abs()))
    }))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmbedSummary {
    pub config: RunConfig,
    pub cells: usize,
    pub half_width: f64,
    pub codazzi_residual: f64,
    pub symmetry_residual: f64,
    pub plaquette_defect: f64,
    pub path_dependence: f64,
    pub induced_metric_error: f64,
    pub differential_error: f64,
    pub normal_component_error: f64,
    pub support_min: f64,
    pub support_max: f64,
    pub convexity: Convexity,
}

/// Patch half-width used when no input file fixes it.
pub const DEFAULT_HALF_WIDTH: f64 = 0.5;

fn embed_input(cfg: &RunConfig) -> Result<(HyperboloidPatch, CodazziField), CliError> {
    let Some(path) = &cfg.inputs.endo else {
        let cells = cfg.grid.nx.unwrap_or(32);
        let a = cfg.grid.lx.map_or(DEFAULT_HALF_WIDTH, |l| 0.5 * l);
        let patch = HyperboloidPatch::new(cells, a).map_err(|e| CliError::Usage(e.to_string()))?;
        let id = fields::EndoField::constant(*patch.grid(), Mat2::id());
        let c = CodazziField::measure(id, patch.metric()).map_err(|e| CliError::Usage(e.to_string()))?;
        return Ok((patch, c));
    };
    let ff = load(path)?;
    let file = path.display();
    let endo = require_key(ff.endo_field(), path, "endo")?;
    let g = ff.grid;
    let square = g.topology() == Topology::Dirichlet && g.nx() == g.ny() && g.nx() % 2 == 1 && g.lx() == g.ly();
    if !square {
        return Err(CliError::Usage(format!(
            "{file}: grid must be a square Dirichlet grid with an odd node count centred on the chart origin"
        )));
    }
    let patch = HyperboloidPatch::new(g.nx() - 1, 0.5 * g.lx()).map_err(|e| CliError::Usage(format!("{file}: {e}")))?;
    if patch.grid() != &g {
        return Err(CliError::Usage(format!("{file}: grid is not a hyperboloid patch grid")));
    }
    let dphi = ff.phi.iter().zip(patch.metric().phi().data()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    if dphi > 1e-10 {
        return Err(CliError::Refused(format!(
            "{file}: key phi is not the Poincaré conformal factor (max deviation {dphi:.3e})"
        )));
    }
    let c = CodazziField::measure(endo, patch.metric()).map_err(|e| CliError::Refused(format!("{file}: {e}")))?;
    Ok((patch, c))
}

fn cmd_embed(cfg: &RunConfig) -> Result<bool, CliError> {
    let (patch, a) = embed_input(cfg)?;
    let tol = cfg.tol.unwrap_or(EMBED_CODAZZI_TOL);
    if a.symmetry_residual() > SYMMETRY_TOL {
        return Err(CliError::Refused(format!(
            "endomorphism field is not symmetric: symmetry residual {:.3e} > {SYMMETRY_TOL:.1e}",
            a.symmetry_residual()
        )));
    }
    if a.codazzi_residual() > tol {
        return Err(CliError::Refused(format!(
            "endomorphism field is not Codazzi: Codazzi residual {:.3e} > {tol:.3e}",
            a.codazzi_residual()
        )));
    }
    let embed_err = |e: EmbeddingError| CliError::Refused(e.to_string());
    let x = embedding::integrate_immersion(&a, &patch, patch.iota(patch.base()), 1.0, tol).map_err(embed_err)?;
    let support = embedding::support_function(&x, &patch, 1.0);
    let summary = EmbedSummary {
        config: cfg.clone(),
        cells: patch.grid().nx() - 1,
        half_width: patch.half_width(),
        codazzi_residual: a.codazzi_residual(),
        symmetry_residual: a.symmetry_residual(),
        plaquette_defect: embedding::plaquette_defect(&a, &patch),
        path_dependence: embedding::path_dependence(&a, &patch, tol).map_err(embed_err)?,
        induced_metric_error: embedding::induced_metric_error(&x, &a, &patch),
        differential_error: embedding::differential_error(&x, &a, &patch, 1.0),
        normal_component_error: embedding::normal_component_error(&x, &patch),
        support_min: support.min(),
        support_max: support.max(),
        convexity: embedding::convexity_check(&x, &patch),
    };
    let dir = out_dir(cfg)?;
    let mut mesh = Vec::new();
    embedding::write_mesh(&mut mesh, &x, &support).map_err(embed_err)?;
    write_out(&dir.join("mesh.csv"), &mesh)?;
    write_out(&dir.join("embed_report.json"), &to_json(&summary))?;
    eprintln!(
        "embed: plaquette {:.3e}, induced metric {:.3e}, convexity {:?}",
        summary.plaquette_defect, summary.induced_metric_error, summary.convexity
    );
    Ok(true)
}

/// Writes `g.json` (Poincaré disk), `h.json` (`ψ*(c²g)` for a seeded bump
/// diffeomorphism `ψ`), `psi.json` (`ψ − id`) and `endo.json` (a seeded
/// Hessian-type Codazzi field on the hyperboloid patch).
fn cmd_manufacture(cfg: &RunConfig) -> Result<bool, CliError> {
    let cells = cfg.grid.nx.unwrap_or(32);
    let l = cfg.grid.lx.unwrap_or(1.0);
    let grid = Grid::new(cells + 1, cells + 1, l, l, Topology::Dirichlet).map_err(|e| CliError::Usage(e.to_string()))?;
    if !(0.5 * l * std::f64::consts::SQRT_2 < 1.0) {
        return Err(CliError::Usage(format!("--lx {l} leaves the Poincaré disk")));
    }
    let delta = cfg.delta.unwrap_or(0.004);
    let g = fixtures::poincare(grid);
    let mut r = rng::stream(cfg.seed, 7);
    let pv = fixtures::BumpVector::random(&mut r, &grid, 0.7, delta, 1);
    let c2 = 2.25;
    let h = MetricField::from_fn(grid, |x, y| {
        let v = pv.value(x, y);
        let d = Mat2::id() + pv.jacobian(x, y);
        d.transpose() * Mat2::scalar(c2 * (2.0 * fixtures::poincare_phi(x + v[0], y + v[1]).0).exp()) * d
    })
    .map_err(|e| CliError::Usage(e.to_string()))?;
    let dir = out_dir(cfg)?;
    let save = |name: &str, ff: &FieldFile| -> Result<(), CliError> {
        let p = dir.join(name);
        ff.save(&p).map_err(|e| CliError::Output { file: p.display().to_string(), msg: e.to_string() })
    };
    let phi = g.phi().data().to_vec();
    save("g.json", &FieldFile { grid, phi: phi.clone(), h: None, endo: None })?;
    save("h.json", &FieldFile { grid, phi, h: Some(h.entries()), endo: None })?;
    let psi = DisplacementFile { grid, x: pv.nodal(grid).data().to_vec() };
    write_out(&dir.join("psi.json"), &to_json(&psi))?;
    let patch = HyperboloidPatch::new(cells, 0.5 * l.min(1.0)).map_err(|e| CliError::Usage(e.to_string()))?;
    let hc = fixtures::HyperbolicCodazzi::random(&mut rng::stream(cfg.seed, 1), 1.0, -0.1);
    let endo = hc.nodal(*patch.grid());
    let pg = *patch.grid();
    save(
        "endo.json",
        &FieldFile {
            grid: pg,
            phi: patch.metric().phi().data().to_vec(),
            h: None,
            endo: Some(endo.data().iter().map(|m| m.to_array()).collect()),
        },
    )?;
    Ok(true)
}
