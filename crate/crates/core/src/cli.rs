//! Command-line pipeline: configuration, verbs, exit codes and file outputs.
//!
//! Every verb reads one JSON [`RunConfig`] and writes CSV/JSON files into the output directory.
//! Floats are written with 17 significant digits and all work is sequential, so repeated runs
//! produce byte-identical files.

use crate::borel_solver::{disc_agreement, solve, BorelGrid, BorelOperator, SolveReport, SolverConfig, SolverError};
use crate::formal_asymptotics::{
    default_probes, difference_samples, fit_decay, formal_coefficients, formal_residual, gevrey_remainder_check, DecayFit,
    FormalError, FormalSeries, GevreyReport,
};
use crate::geometry::{
    build_good_covering, c1_constant, c2_constant, c3_constant, check_assumption_d, check_smallness, AssumptionD,
    CoveringParams, GeometryConfig, GeometryError, GoodCovering, SectorGeometry, Smallness,
};
use crate::problem_model::{default_m_grid, validate_assumptions, AssumptionReport, ComplexRepr, Poly, ProblemSpec, SpecConfig};
use crate::solution_assembly::{evaluate_component, residual_borel, residual_physical, AssemblyError, LogSolution};
use crate::transforms::{MGrid, QuadratureSpec};
use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ASSUMPTION: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_USAGE: i32 = 64;
pub const EXIT_CONFIG: i32 = 65;

#[derive(Debug, Error)]
pub enum CliError {
    /// Carries the witness written to `witness.json`.
    #[error("assumption or geometry failure: {message}")]
    Assumption { message: String, witness: serde_json::Value },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("usage: {0}")]
    Usage(String),
    #[error("configuration: {0}")]
    Config(String),
    #[error("i/o: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Assumption { .. } => EXIT_ASSUMPTION,
            CliError::Numerical(_) | CliError::Io(_) => EXIT_NUMERICAL,
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Config(_) => EXIT_CONFIG,
        }
    }

    fn assumption(message: impl Into<String>, witness: impl Serialize) -> Self {
        CliError::Assumption { message: message.into(), witness: serde_json::to_value(witness).unwrap_or_default() }
    }
}

impl From<GeometryError> for CliError {
    fn from(e: GeometryError) -> Self {
        let w = serde_json::json!({ "geometry_error": e.to_string() });
        CliError::Assumption { message: e.to_string(), witness: w }
    }
}

impl From<SolverError> for CliError {
    fn from(e: SolverError) -> Self {
        match e {
            SolverError::Dilation { .. } => CliError::assumption(e.to_string(), serde_json::json!({ "solver": e.to_string() })),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

impl From<AssemblyError> for CliError {
    fn from(e: AssemblyError) -> Self {
        match e {
            AssemblyError::EpsMismatch { .. } | AssemblyError::Component(_) => CliError::Numerical(e.to_string()),
            other => CliError::assumption(other.to_string(), serde_json::json!({ "domain": other.to_string() })),
        }
    }
}

impl From<FormalError> for CliError {
    fn from(e: FormalError) -> Self {
        match e {
            FormalError::Assembly(a) => a.into(),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FormalParams {
    #[serde(default = "default_order")]
    pub order: usize,
    #[serde(default = "default_formal_tol")]
    pub tol: f64,
}

fn default_order() -> usize {
    6
}
fn default_formal_tol() -> f64 {
    1e-13
}

impl Default for FormalParams {
    fn default() -> Self {
        FormalParams { order: default_order(), tol: default_formal_tol() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveParams {
    /// ε used by `solve`, `all` and point-free runs; `0.8 ε₀ e^{i d}` when absent.
    #[serde(default)]
    pub eps: Option<ComplexRepr>,
    /// Residual checks pass below these.
    #[serde(default = "default_borel_tol")]
    pub borel_residual_tol: f64,
    #[serde(default = "default_physical_tol")]
    pub physical_residual_tol: f64,
}

fn default_borel_tol() -> f64 {
    1e-8
}
fn default_physical_tol() -> f64 {
    1e-6
}

impl Default for SolveParams {
    fn default() -> Self {
        SolveParams { eps: None, borel_residual_tol: default_borel_tol(), physical_residual_tol: default_physical_tol() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AsymptoticsParams {
    /// |ε| range of the sector-difference samples, log-spaced.
    pub eps_min: f64,
    pub eps_max: f64,
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Probe radii as fractions of r_𝒯 (positive axis).
    #[serde(default = "default_t_fracs")]
    pub t_fractions: Vec<f64>,
    #[serde(default = "default_z")]
    pub z: Vec<f64>,
    /// Differences and remainders at or below this are treated as noise.
    #[serde(default = "default_floor")]
    pub noise_floor: f64,
    /// Real ε values for the remainder envelope (sector 0).
    #[serde(default = "default_remainder_eps")]
    pub remainder_eps: Vec<f64>,
    #[serde(default = "default_remainder_order")]
    pub remainder_order: usize,
}

fn default_samples() -> usize {
    12
}
fn default_t_fracs() -> Vec<f64> {
    vec![0.3, 0.6, 0.9]
}
fn default_z() -> Vec<f64> {
    vec![-0.5, 0.0, 0.5]
}
fn default_floor() -> f64 {
    1e-11
}
fn default_remainder_eps() -> Vec<f64> {
    vec![0.02, 0.04, 0.08]
}
fn default_remainder_order() -> usize {
    4
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub spec: SpecConfig,
    #[serde(default)]
    pub geometry: GeometryConfig,
    #[serde(default)]
    pub covering: CoveringParams,
    #[serde(default)]
    pub quadrature: QuadratureSpec,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub solve: SolveParams,
    #[serde(default)]
    pub formal: FormalParams,
    /// Sector-difference and remainder study; skipped by `all` when absent.
    #[serde(default)]
    pub asymptotics: Option<AsymptoticsParams>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Seeds the contraction probes.
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_seed() -> u64 {
    7
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

/// Parsed spec plus the grids every verb shares.
pub struct Setup {
    pub cfg: RunConfig,
    pub spec: ProblemSpec,
    pub m_geo: Vec<f64>,
    pub report: AssumptionReport,
    pub mgrid: MGrid,
}

impl Setup {
    pub fn new(cfg: RunConfig) -> Result<Self, CliError> {
        let spec = cfg.spec.build().map_err(|e| CliError::Config(e.to_string()))?;
        let m_geo = default_m_grid();
        let report = validate_assumptions(&spec, &m_geo).map_err(|e| CliError::Config(e.to_string()))?;
        let mgrid = cfg.quadrature.m_grid(spec.beta).map_err(|e| CliError::Config(e.to_string()))?;
        let mut solver = cfg.solver.clone();
        solver.seed = cfg.seed;
        let cfg = RunConfig { solver, ..cfg };
        Ok(Setup { cfg, spec, m_geo, report, mgrid })
    }

    pub fn adm_delta(&self) -> f64 {
        self.cfg.quadrature.admissibility_delta
    }

    pub fn sector(&self, direction: f64) -> Result<SectorGeometry, CliError> {
        let gc = GeometryConfig { direction, ..self.cfg.geometry.clone() };
        Ok(SectorGeometry::build(&self.spec, &self.report, &gc, &self.m_geo)?)
    }

    pub fn grid(&self, geom: &SectorGeometry) -> Result<Arc<BorelGrid>, CliError> {
        Ok(Arc::new(BorelGrid::build(&self.spec, geom, &self.cfg.quadrature, &self.cfg.solver)?))
    }

    pub fn covering(&self) -> Result<GoodCovering, CliError> {
        Ok(build_good_covering(
            &self.spec,
            &self.report,
            &self.cfg.geometry,
            &self.cfg.covering,
            self.spec.eps0,
            self.adm_delta(),
            &self.m_geo,
        )?)
    }

    pub fn default_eps(&self) -> Complex64 {
        self.cfg
            .solve
            .eps
            .map(Complex64::from)
            .unwrap_or_else(|| Complex64::from_polar(0.8 * self.spec.eps0, self.cfg.geometry.direction))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GeometrySummary {
    pub assumptions: AssumptionReport,
    pub sector: SectorGeometry,
    pub assumption_d: AssumptionD,
    pub c1: Vec<f64>,
    pub c2: Vec<f64>,
    pub c3: Vec<f64>,
    pub c2_b: f64,
    pub varsigma_b: f64,
    pub smallness: Smallness,
    /// `None` when no good covering exists; the reason is in `covering_error`.
    pub covering: Option<GoodCovering>,
    pub covering_error: Option<String>,
}

impl GeometrySummary {
    pub fn pass(&self) -> bool {
        self.assumptions.all_pass() && self.assumption_d.pass && self.smallness.pass && self.covering.is_some()
    }
}

/// Sector constants, Assumption (D), smallness and the good covering; `Err` only on hard failures.
pub fn geometry_summary(setup: &Setup) -> Result<GeometrySummary, CliError> {
    let spec = &setup.spec;
    let sector = setup.sector(setup.cfg.geometry.direction)?;
    let assumption_d = check_assumption_d(spec, setup.report.d1, &sector.consts);
    let grid = setup.grid(&sector)?;
    let ray = grid.main_radii();
    let mut c1 = Vec::new();
    let mut c2 = Vec::new();
    let mut c3 = Vec::new();
    for (l, t) in spec.terms.iter().enumerate() {
        let a = c1_constant(spec, &sector, l, &ray, grid.m_points());
        let b = c2_constant(&setup.mgrid, &t.r, Some(&spec.q_poly), spec.beta, spec.mu);
        c3.push(c3_constant(spec, &sector, l, a, b));
        c1.push(a);
        c2.push(b);
    }
    let c2_b = c2_constant(&setup.mgrid, &Poly::real(&[1.0]), None, spec.beta, spec.mu);
    let varsigma_b = spec.coeffs.c_b;
    let smallness = check_smallness(spec, setup.report.d1, &sector.consts, spec.eps0, varsigma_b, c2_b, &c3, &setup.m_geo);
    let (covering, covering_error) = match setup.covering() {
        Ok(c) => (Some(c), None),
        Err(e) => (None, Some(e.to_string())),
    };
    Ok(GeometrySummary {
        assumptions: setup.report.clone(),
        sector,
        assumption_d,
        c1,
        c2,
        c3,
        c2_b,
        varsigma_b,
        smallness,
        covering,
        covering_error,
    })
}

/// Fixed point at one ε on a prepared grid.
pub struct Solved {
    pub op: BorelOperator,
    pub sol: LogSolution,
    pub report: SolveReport,
}

pub fn solve_at(setup: &Setup, grid: &Arc<BorelGrid>, eps: Complex64, guaranteed: Option<bool>) -> Result<Solved, CliError> {
    let op = BorelOperator::new(&setup.spec, grid.clone(), eps)?;
    let (w0, w1, mut report) = solve(&setup.spec, &op, &setup.cfg.solver)?;
    report.guaranteed = guaranteed;
    let sol = LogSolution::new(&setup.spec, w0, w1, setup.adm_delta());
    Ok(Solved { op, sol, report })
}

fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    w.write_record(header).map_err(|e| io_err(path, e))?;
    for r in rows {
        w.write_record(&r).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

fn write_json(path: &Path, v: &impl Serialize) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(v).map_err(|e| io_err(path, e))?;
    fs::write(path, text + "\n").map_err(|e| io_err(path, e))
}

fn write_omega_csv(path: &Path, sol: &LogSolution, j: usize) -> Result<(), CliError> {
    let w = sol.omega(j);
    let g = w.grid();
    let nm = g.m_points().len();
    let rows = g.taus().iter().enumerate().flat_map(|(n, tau)| {
        let row = w.row(n);
        g.m_points().iter().enumerate().map(move |(i, m)| vec![fmt(tau.re), fmt(tau.im), fmt(*m), fmt(row[i].re), fmt(row[i].im)])
    });
    let _ = nm;
    write_csv(path, &["re_tau", "im_tau", "m", "re_omega", "im_omega"], rows)
}

/// One evaluation point `(t, z, ε)`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PointSpec {
    pub t: ComplexRepr,
    pub z: ComplexRepr,
    pub eps: ComplexRepr,
}

#[derive(Debug, Deserialize)]
struct PointRow {
    re_t: f64,
    im_t: f64,
    re_z: f64,
    im_z: f64,
    re_eps: f64,
    im_eps: f64,
}

pub type Point = (Complex64, Complex64, Complex64);

/// Reads points from JSON (array of `{t, z, eps}`) or CSV (`re_t,im_t,re_z,im_z,re_eps,im_eps`).
pub fn read_points(path: &Path) -> Result<Vec<Point>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    if text.trim_start().starts_with('[') {
        let pts: Vec<PointSpec> = serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        return Ok(pts.into_iter().map(|p| (p.t.into(), p.z.into(), p.eps.into())).collect());
    }
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    r.deserialize::<PointRow>()
        .map(|row| {
            let p = row.map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            Ok((Complex64::new(p.re_t, p.im_t), Complex64::new(p.re_z, p.im_z), Complex64::new(p.re_eps, p.im_eps)))
        })
        .collect()
}

/// Five probe points at the default ε along the sector direction.
pub fn default_points(setup: &Setup) -> Vec<Point> {
    let eps = setup.default_eps();
    let r_t = setup.cfg.covering.r_t;
    [(0.2, -0.5), (0.4, 0.0), (0.6, 0.5), (0.8, 0.25), (0.95, -0.25)]
        .iter()
        .map(|&(f, z)| (Complex64::new(f * r_t, 0.0), Complex64::new(z, 0.0), eps))
        .collect()
}

/// Groups points by ε (first-seen order) so each distinct ε is solved once.
fn group_by_eps(points: &[Point]) -> Vec<(Complex64, Vec<usize>)> {
    let mut groups: Vec<(Complex64, Vec<usize>)> = Vec::new();
    for (i, p) in points.iter().enumerate() {
        match groups.iter_mut().find(|g| g.0 == p.2) {
            Some(g) => g.1.push(i),
            None => groups.push((p.2, vec![i])),
        }
    }
    groups
}

pub struct Outputs {
    pub dir: PathBuf,
}

impl Outputs {
    pub fn new(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        Ok(Outputs { dir: dir.to_path_buf() })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }
}

fn require_geometry(summary: &GeometrySummary) -> Result<(), CliError> {
    let mut failures: Vec<String> = summary.assumptions.failures().iter().map(|f| format!("{f:?}")).collect();
    if !summary.assumption_d.pass {
        failures.push(format!(
            "Assumption (D): margin {} ≤ 1, k must be ≥ {}",
            summary.assumption_d.margin, summary.assumption_d.k_threshold
        ));
    }
    if !summary.smallness.pass {
        failures.push(format!("smallness: left side {} > 1/2", summary.smallness.lhs));
    }
    if let Some(e) = &summary.covering_error {
        failures.push(format!("good covering: {e}"));
    }
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::assumption(failures.join("; "), summary))
    }
}

pub fn cmd_check_geometry(setup: &Setup, out: &Outputs) -> Result<GeometrySummary, CliError> {
    let s = geometry_summary(setup)?;
    write_json(&out.path("geometry.json"), &s)?;
    require_geometry(&s)?;
    Ok(s)
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveSummary {
    pub eps: [f64; 2],
    pub direction: f64,
    pub solver: SolveReport,
    pub borel_residual: f64,
    pub borel_residual_pass: bool,
    pub nodes: usize,
    pub m_nodes: usize,
}

pub fn cmd_solve(setup: &Setup, out: &Outputs) -> Result<(Solved, SolveSummary), CliError> {
    let g = geometry_summary(setup)?;
    let grid = setup.grid(&g.sector)?;
    let eps = setup.default_eps();
    let solved = solve_at(setup, &grid, eps, Some(g.pass()))?;
    let borel = residual_borel(&solved.op, solved.sol.omega(0), solved.sol.omega(1));
    write_omega_csv(&out.path("omega0.csv"), &solved.sol, 0)?;
    write_omega_csv(&out.path("omega1.csv"), &solved.sol, 1)?;
    let summary = SolveSummary {
        eps: [eps.re, eps.im],
        direction: grid.direction(),
        solver: solved.report.clone(),
        borel_residual: borel,
        borel_residual_pass: borel <= setup.cfg.solve.borel_residual_tol,
        nodes: grid.n_nodes(),
        m_nodes: grid.m_points().len(),
    };
    write_json(&out.path("solve_report.json"), &summary)?;
    if !borel.is_finite() {
        return Err(CliError::Numerical("non-finite Borel residual".into()));
    }
    Ok((solved, summary))
}

/// Solves once per distinct ε in `points` along the configured direction.
fn solve_points(setup: &Setup, points: &[Point]) -> Result<Vec<(Vec<usize>, Solved)>, CliError> {
    let sector = setup.sector(setup.cfg.geometry.direction)?;
    let grid = setup.grid(&sector)?;
    group_by_eps(points).into_iter().map(|(eps, idx)| Ok((idx, solve_at(setup, &grid, eps, None)?))).collect()
}

pub fn cmd_evaluate(setup: &Setup, out: &Outputs, points: &[Point]) -> Result<Vec<[Complex64; 3]>, CliError> {
    let mut values = vec![[Complex64::new(0.0, 0.0); 3]; points.len()];
    for (idx, s) in solve_points(setup, points)? {
        for i in idx {
            let (t, z, eps) = points[i];
            let u0 = evaluate_component(&s.sol, 0, t, z, eps)?;
            let u1 = evaluate_component(&s.sol, 1, t, z, eps)?;
            values[i] = [u0, u1, u0 + u1 * (eps * t).ln() / setup.spec.log_q()];
        }
    }
    let rows = points.iter().zip(&values).map(|((t, z, e), v)| {
        let mut r = vec![fmt(t.re), fmt(t.im), fmt(z.re), fmt(z.im), fmt(e.re), fmt(e.im)];
        for c in v {
            r.push(fmt(c.re));
            r.push(fmt(c.im));
        }
        r
    });
    write_csv(
        &out.path("evaluate.csv"),
        &["re_t", "im_t", "re_z", "im_z", "re_eps", "im_eps", "re_u0", "im_u0", "re_u1", "im_u1", "re_u", "im_u"],
        rows,
    )?;
    Ok(values)
}

#[derive(Debug, Clone, Serialize)]
pub struct ResidualSummary {
    pub borel: Vec<([f64; 2], f64)>,
    pub physical_max: f64,
    pub borel_max: f64,
    pub pass: bool,
}

pub fn cmd_residual(setup: &Setup, out: &Outputs, points: &[Point]) -> Result<ResidualSummary, CliError> {
    let mut per_point = vec![0.0; points.len()];
    let mut borel = Vec::new();
    for (idx, s) in solve_points(setup, points)? {
        let e = s.sol.eps();
        borel.push(([e.re, e.im], residual_borel(&s.op, s.sol.omega(0), s.sol.omega(1))));
        for i in idx {
            per_point[i] = residual_physical(&s.sol, &setup.spec, &[points[i]])?;
        }
    }
    let rows = points
        .iter()
        .zip(&per_point)
        .map(|((t, z, e), r)| vec![fmt(t.re), fmt(t.im), fmt(z.re), fmt(z.im), fmt(e.re), fmt(e.im), fmt(*r)]);
    write_csv(&out.path("residual.csv"), &["re_t", "im_t", "re_z", "im_z", "re_eps", "im_eps", "physical_residual"], rows)?;
    let physical_max = per_point.iter().copied().fold(0.0, f64::max);
    let borel_max = borel.iter().map(|b| b.1).fold(0.0, f64::max);
    let summary = ResidualSummary {
        borel,
        physical_max,
        borel_max,
        pass: physical_max <= setup.cfg.solve.physical_residual_tol && borel_max <= setup.cfg.solve.borel_residual_tol,
    };
    write_json(&out.path("residual.json"), &summary)?;
    Ok(summary)
}

#[derive(Debug, Clone, Serialize)]
pub struct FormalSummary {
    pub order: usize,
    pub tol: f64,
    pub residual: f64,
    pub pass: bool,
}

pub fn cmd_formal(setup: &Setup, out: &Outputs) -> Result<(FormalSeries, FormalSummary), CliError> {
    let p = &setup.cfg.formal;
    let series = formal_coefficients(&setup.spec, &setup.mgrid, p.order, p.tol)?;
    let pts = setup.mgrid.points();
    for n in 0..=p.order {
        let fact: f64 = (1..=n).map(|i| i as f64).product();
        let mut rows = Vec::new();
        for pw in 0..=series.degree(n) {
            let (a0, a1) = (series.plain(0, n, pw), series.plain(1, n, pw));
            for (i, m) in pts.iter().enumerate() {
                let (u0, u1) = (a0[i] * fact, a1[i] * fact);
                rows.push(vec![pw.to_string(), fmt(*m), fmt(u0.re), fmt(u0.im), fmt(u1.re), fmt(u1.im)]);
            }
        }
        write_csv(&out.path(&format!("formal_order_{n}.csv")), &["t_power", "m", "re_u0", "im_u0", "re_u1", "im_u1"], rows)?;
    }
    let residual = formal_residual(&series, &setup.spec, p.order);
    let summary = FormalSummary { order: p.order, tol: p.tol, residual, pass: residual <= 10.0 * p.tol };
    write_json(&out.path("formal.json"), &summary)?;
    if !residual.is_finite() {
        return Err(CliError::Numerical("non-finite formal residual".into()));
    }
    Ok((series, summary))
}

#[derive(Debug, Clone, Serialize)]
pub struct ArcSamples {
    /// Overlap `𝓔_p ∩ 𝓔_{p+1}`.
    pub p: usize,
    pub direction: f64,
    pub samples: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AsymptoticsSummary {
    pub directions: Vec<f64>,
    pub arcs: Vec<ArcSamples>,
    /// Arc whose differences are fitted.
    pub fitted_arc: usize,
    pub decay: DecayFit,
    pub remainders: GevreyReport,
    pub pass: bool,
}

fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n <= 1 {
        return vec![lo];
    }
    (0..n).map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64)).collect()
}

fn median(v: &[f64]) -> f64 {
    let mut s: Vec<f64> = v.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    if s.is_empty() {
        0.0
    } else {
        s[s.len() / 2]
    }
}

pub fn cmd_asymptotics(setup: &Setup, out: &Outputs) -> Result<AsymptoticsSummary, CliError> {
    let ap = setup
        .cfg
        .asymptotics
        .clone()
        .ok_or_else(|| CliError::Config("the `asymptotics` section is required for this verb".into()))?;
    let spec = &setup.spec;
    let cov = setup.covering()?;
    let grids: Vec<Arc<BorelGrid>> = cov
        .sectors
        .iter()
        .map(|s| setup.sector(s.direction).and_then(|g| setup.grid(&g)))
        .collect::<Result<_, _>>()?;
    let mut probes = Vec::new();
    for &tf in &ap.t_fractions {
        for &z in &ap.z {
            probes.push((Complex64::new(tf * cov.r_t, 0.0), Complex64::new(z, 0.0)));
        }
    }
    let radii = log_spaced(ap.eps_min, ap.eps_max, ap.samples);
    let mut arcs = Vec::new();
    for p in 0..cov.zeta {
        let dir = cov.overlap_direction(p);
        let next = (p + 1) % cov.zeta;
        let mut samples = Vec::with_capacity(radii.len());
        for &r in &radii {
            let eps = Complex64::from_polar(r, dir);
            let a = solve_at(setup, &grids[p], eps, None)?;
            let b = solve_at(setup, &grids[next], eps, None)?;
            samples.extend(difference_samples(&[(&a.sol, &b.sol)], &probes)?);
        }
        arcs.push(ArcSamples { p, direction: dir, samples });
    }
    let fitted_arc = (0..arcs.len())
        .max_by(|&i, &j| {
            let mi = median(&arcs[i].samples.iter().map(|s| s.1).collect::<Vec<_>>());
            let mj = median(&arcs[j].samples.iter().map(|s| s.1).collect::<Vec<_>>());
            mi.partial_cmp(&mj).unwrap().then(j.cmp(&i))
        })
        .unwrap_or(0);

    let mut rows = Vec::new();
    for arc in &arcs {
        for &(e, d) in &arc.samples {
            let used = arc.p == arcs[fitted_arc].p && d > ap.noise_floor;
            let ec = Complex64::from_polar(e, arc.direction);
            rows.push(vec![arc.p.to_string(), fmt(ec.re), fmt(ec.im), fmt(e), fmt(d), (used as u8).to_string()]);
        }
    }
    write_csv(&out.path("asymptotics_decay.csv"), &["arc", "re_eps", "im_eps", "abs_eps", "difference", "used"], rows)?;
    let decay = fit_decay(&arcs[fitted_arc].samples, ap.noise_floor, spec.k, spec.q)?;

    let series = formal_coefficients(spec, &setup.mgrid, ap.remainder_order + 1, setup.cfg.formal.tol)?;
    let rem_sols: Vec<Solved> = ap
        .remainder_eps
        .iter()
        .map(|&e| solve_at(setup, &grids[0], Complex64::from_polar(e, cov.sectors[0].bisector), None))
        .collect::<Result<_, _>>()?;
    let refs: Vec<&LogSolution> = rem_sols.iter().map(|s| &s.sol).collect();
    let rem_probes = if probes.is_empty() { default_probes(cov.r_t) } else { probes.clone() };
    let remainders = gevrey_remainder_check(&refs, &series, ap.remainder_order, &rem_probes, ap.noise_floor, spec.k, spec.q)?;

    let rrows = remainders
        .remainders
        .iter()
        .flat_map(|(e, r)| r.iter().enumerate().map(move |(n, v)| vec![fmt(*e), n.to_string(), fmt(*v)]));
    write_csv(&out.path("asymptotics_remainders.csv"), &["abs_eps", "order", "remainder"], rrows)?;
    let summary = AsymptoticsSummary {
        directions: cov.sectors.iter().map(|s| s.direction).collect(),
        arcs,
        fitted_arc,
        pass: decay.pass && remainders.monotone,
        decay,
        remainders,
    };
    write_json(&out.path("asymptotics.json"), &summary)?;
    Ok(summary)
}

#[derive(Debug, Clone, Serialize)]
pub struct AllSummary {
    pub geometry_pass: bool,
    pub solve: SolveSummary,
    pub residual: ResidualSummary,
    pub formal: FormalSummary,
    pub asymptotics: Option<AsymptoticsSummary>,
    /// Disc agreement between the configured direction and the first other covering direction.
    pub disc_agreement: Option<f64>,
}

pub fn cmd_all(setup: &Setup, out: &Outputs) -> Result<AllSummary, CliError> {
    let geo = cmd_check_geometry(setup, out)?;
    let (solved, solve) = cmd_solve(setup, out)?;
    let points = default_points(setup);
    cmd_evaluate(setup, out, &points)?;
    let residual = cmd_residual(setup, out, &points)?;
    let (_, formal) = cmd_formal(setup, out)?;
    let other = geo.covering.iter().flat_map(|c| &c.sectors).map(|s| s.direction).find(|d| (d - solve.direction).abs() > 1e-12);
    let disc = match other {
        Some(d) => {
            let grid = setup.grid(&setup.sector(d)?)?;
            let s2 = solve_at(setup, &grid, solved.sol.eps(), None)?;
            Some(disc_agreement(solved.sol.omega(0), s2.sol.omega(0))?.max(disc_agreement(solved.sol.omega(1), s2.sol.omega(1))?))
        }
        None => None,
    };
    let asymptotics = if setup.cfg.asymptotics.is_some() { Some(cmd_asymptotics(setup, out)?) } else { None };
    let summary = AllSummary { geometry_pass: geo.pass(), solve, residual, formal, asymptotics, disc_agreement: disc };
    write_json(&out.path("all.json"), &summary)?;
    Ok(summary)
}

#[derive(Parser, Debug)]
#[command(name = "qborel", version, about = "Borel-plane solver and q-Gevrey asymptotics")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// RunConfig JSON file.
    #[arg(long, short)]
    config: PathBuf,
    /// Overrides `output_dir`.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct WithPoints {
    #[command(flatten)]
    common: Common,
    /// Points as JSON `[{t, z, eps}, …]` or CSV `re_t,im_t,re_z,im_z,re_eps,im_eps`.
    #[arg(long, short)]
    points: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Validate assumptions, sector constants and the good covering.
    CheckGeometry(Common),
    /// Solve the Borel fixed point at the configured ε.
    Solve(Common),
    /// Evaluate u₀, u₁ and u at points.
    Evaluate(WithPoints),
    /// Borel and physical residuals at points.
    Residual(WithPoints),
    /// Formal coefficients up to the configured order.
    Formal(Common),
    /// Sector differences and remainder envelopes.
    Asymptotics(Common),
    /// Every verb in sequence.
    All(Common),
}

fn prepare(c: &Common) -> Result<(Setup, Outputs), CliError> {
    let cfg = RunConfig::load(&c.config)?;
    let dir = c.out.clone().unwrap_or_else(|| cfg.output_dir.clone());
    let setup = Setup::new(cfg)?;
    let out = Outputs::new(&dir)?;
    Ok((setup, out))
}

fn points_for(setup: &Setup, p: &Option<PathBuf>) -> Result<Vec<Point>, CliError> {
    match p {
        Some(path) => read_points(path),
        None => Ok(default_points(setup)),
    }
}

fn dispatch(cmd: &Command) -> Result<(), (CliError, Option<PathBuf>)> {
    let common = match cmd {
        Command::CheckGeometry(c) | Command::Solve(c) | Command::Formal(c) | Command::Asymptotics(c) | Command::All(c) => c,
        Command::Evaluate(w) | Command::Residual(w) => &w.common,
    };
    let (setup, out) = prepare(common).map_err(|e| (e, None))?;
    let dir = Some(out.dir.clone());
    let run = || -> Result<(), CliError> {
        match cmd {
            Command::CheckGeometry(_) => cmd_check_geometry(&setup, &out).map(|_| ()),
            Command::Solve(_) => cmd_solve(&setup, &out).map(|_| ()),
            Command::Evaluate(w) => cmd_evaluate(&setup, &out, &points_for(&setup, &w.points)?).map(|_| ()),
            Command::Residual(w) => cmd_residual(&setup, &out, &points_for(&setup, &w.points)?).map(|_| ()),
            Command::Formal(_) => cmd_formal(&setup, &out).map(|_| ()),
            Command::Asymptotics(_) => cmd_asymptotics(&setup, &out).map(|_| ()),
            Command::All(_) => cmd_all(&setup, &out).map(|_| ()),
        }
    };
    run().map_err(|e| (e, dir))
}

/// Runs the CLI on `args` (including the program name) and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };
    match dispatch(&cli.cmd) {
        Ok(()) => EXIT_OK,
        Err((e, dir)) => {
            eprintln!("qborel: {e}");
            if let (CliError::Assumption { witness, .. }, Some(dir)) = (&e, dir) {
                let path = dir.join("witness.json");
                if let Err(w) = write_json(&path, witness) {
                    eprintln!("qborel: could not write witness: {w}");
                }
            }
            e.exit_code()
        }
    }
}
