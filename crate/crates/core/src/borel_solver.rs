//! Borel-plane fixed point `(ω₀, ω₁) = 𝓗_ε(ω₀, ω₁)` on a dilation-closed lattice.
//!
//! Every τ-node lies on a line `{r e^{iθ}}` sampled at `r_j = r₀ q^{j/N}`. The main line
//! follows the summation direction `d` and reaches far enough for the later q-Laplace
//! quadrature. The disc lines sit at fixed angles `2πa/n` inside `D(0,ρ)`, so two
//! geometries with equal ρ share them node for node. Each dilation `q^{δ_ℓ−d_ℓ/k}` is a
//! negative integer index shift, so the operators act line by line without interpolation.
//! A shift below a line's first node reads that first node, which approximates ω(0).

use crate::geometry::{angular_distance, SectorGeometry};
use crate::problem_model::{lcm, ProblemSpec};
use crate::special_functions::{expq_norm_samples, WeightParams};
use crate::transforms::{inv_sqrt_2pi, ConvKernel, MGrid, QuadratureSpec, TransformError};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("grid construction failed: {0}")]
    Grid(String),
    #[error("term {l}: dilation exponent {e} is not negative")]
    Dilation { l: usize, e: f64 },
    #[error("Picard iteration diverged; update norms {history:?}")]
    Divergence { history: Vec<f64> },
    #[error("Picard iteration stopped after {iterations} iterations with update {last:e}")]
    NotConverged { iterations: usize, last: f64 },
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Transform(#[from] TransformError),
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    /// Smallest main-line radius.
    #[serde(default = "default_r_min")]
    pub r_min: f64,
    /// Largest main-line radius; derived from the quadrature envelope when absent.
    #[serde(default)]
    pub r_max: Option<f64>,
    /// Largest |εt| served by the later transform; `ε₀` when absent.
    #[serde(default)]
    pub t_max: Option<f64>,
    /// Main-line contributions below this fraction of the envelope peak are cut.
    #[serde(default = "default_envelope_cut")]
    pub envelope_cut: f64,
    #[serde(default = "default_max_ray_nodes")]
    pub max_ray_nodes: usize,
    #[serde(default = "default_disc_angles")]
    pub disc_angles: usize,
    /// Disc lines start at `ρ · disc_min_fraction`.
    #[serde(default = "default_disc_min_fraction")]
    pub disc_min_fraction: f64,
    #[serde(default = "default_probes")]
    pub probes: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_tol() -> f64 {
    1e-10
}
fn default_max_iter() -> usize {
    200
}
fn default_r_min() -> f64 {
    1e-12
}
fn default_envelope_cut() -> f64 {
    1e-14
}
fn default_max_ray_nodes() -> usize {
    4000
}
fn default_disc_angles() -> usize {
    8
}
fn default_disc_min_fraction() -> f64 {
    1e-4
}
fn default_probes() -> usize {
    8
}
fn default_seed() -> u64 {
    7
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol: default_tol(),
            max_iter: default_max_iter(),
            r_min: default_r_min(),
            r_max: None,
            t_max: None,
            envelope_cut: default_envelope_cut(),
            max_ray_nodes: default_max_ray_nodes(),
            disc_angles: default_disc_angles(),
            disc_min_fraction: default_disc_min_fraction(),
            probes: default_probes(),
            seed: default_seed(),
        }
    }
}

/// Nodes `r₀ q^{j/N} e^{iθ}` for `j ∈ [j_lo, j_hi]`, stored from `offset`.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct BorelLine {
    pub angle: f64,
    pub j_lo: i64,
    pub j_hi: i64,
    pub offset: usize,
    pub main: bool,
}

impl BorelLine {
    pub fn len(&self) -> usize {
        (self.j_hi - self.j_lo + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.j_hi < self.j_lo
    }

    /// Storage index of lattice index `j`, clamped at the inner end.
    fn node(&self, j: i64) -> usize {
        self.offset + (j.max(self.j_lo) - self.j_lo) as usize
    }
}

#[derive(Debug, Clone)]
pub struct BorelGrid {
    taus: Vec<Complex64>,
    m: Vec<f64>,
    mgrid: MGrid,
    wp: WeightParams,
    r0: f64,
    n_per_q: i64,
    log_step: f64,
    direction: f64,
    lines: Vec<BorelLine>,
}

impl BorelGrid {
    pub fn taus(&self) -> &[Complex64] {
        &self.taus
    }

    pub fn m_points(&self) -> &[f64] {
        &self.m
    }

    pub fn weight_params(&self) -> WeightParams {
        self.wp
    }

    pub fn mgrid(&self) -> &MGrid {
        &self.mgrid
    }

    pub fn lines(&self) -> &[BorelLine] {
        &self.lines
    }

    pub fn main_line(&self) -> &BorelLine {
        &self.lines[0]
    }

    pub fn direction(&self) -> f64 {
        self.direction
    }

    /// Uniform step of `log r` along every line, `log q / N`.
    pub fn log_step(&self) -> f64 {
        self.log_step
    }

    pub fn n_per_q(&self) -> i64 {
        self.n_per_q
    }

    pub fn radius(&self, j: i64) -> f64 {
        self.r0 * (j as f64 * self.log_step).exp()
    }

    pub fn n_nodes(&self) -> usize {
        self.taus.len()
    }

    /// Radii of the main line, innermost first.
    pub fn main_radii(&self) -> Vec<f64> {
        let l = self.main_line();
        (l.j_lo..=l.j_hi).map(|j| self.radius(j)).collect()
    }

    /// Storage index of the disc node at angle index `a` and lattice index `j`, if present.
    pub fn disc_node(&self, a: usize, j: i64) -> Option<usize> {
        let l = self.lines.get(a + 1)?;
        (l.j_lo..=l.j_hi).contains(&j).then(|| l.offset + (j - l.j_lo) as usize)
    }

    /// Builds the main line along `geom.d` and `cfg.disc_angles` disc lines.
    pub fn build(
        spec: &ProblemSpec,
        geom: &SectorGeometry,
        quad: &QuadratureSpec,
        cfg: &SolverConfig,
    ) -> Result<BorelGrid, SolverError> {
        let lq = spec.log_q();
        let mut den = 1i64;
        for l in 0..spec.terms.len() {
            let e = spec.borel_dilation(l);
            if e.num() >= 0 {
                return Err(SolverError::Dilation { l, e: e.to_f64() });
            }
            den = lcm(den, e.den());
        }
        let n_min = (lq / quad.log_step()).ceil().max(1.0) as i64;
        let n_per_q = den * ((n_min + den - 1) / den);
        let h = lq / n_per_q as f64;
        let r0 = geom.rho / 8.0;
        let j_of = |r: f64| (r / r0).ln() / h;

        let j_lo = j_of(cfg.r_min).floor() as i64;
        let j_hi = match cfg.r_max {
            Some(r) => j_of(r).ceil() as i64,
            None => {
                let t = cfg.t_max.unwrap_or(spec.eps0);
                let a = spec.kf() / (2.0 * lq);
                let env = |r: f64| {
                    let x = (r + geom.delta).ln();
                    let y = (r / t).ln();
                    a * (x * x - y * y) + spec.alpha * x - 0.5 * y
                };
                let cut = cfg.envelope_cut.ln();
                let mut peak = f64::NEG_INFINITY;
                let mut j = j_lo;
                loop {
                    let e = env(r0 * (j as f64 * h).exp());
                    peak = peak.max(e);
                    if (e < peak + cut && j >= 0) || (j - j_lo) as usize >= cfg.max_ray_nodes {
                        break j;
                    }
                    j += 1;
                }
            }
        };
        if j_hi <= j_lo {
            return Err(SolverError::Grid(format!("empty main line: j ∈ [{j_lo}, {j_hi}]")));
        }
        let mut lines = vec![BorelLine { angle: geom.d, j_lo, j_hi, offset: 0, main: true }];
        let disc_lo = j_of(geom.rho * cfg.disc_min_fraction).floor() as i64;
        let disc_hi = j_of(geom.rho).floor() as i64;
        for a in 0..cfg.disc_angles {
            let angle = 2.0 * PI * a as f64 / cfg.disc_angles as f64;
            let offset = lines.last().map(|l| l.offset + l.len()).unwrap();
            lines.push(BorelLine { angle, j_lo: disc_lo, j_hi: disc_hi, offset, main: false });
        }
        let mut taus = Vec::new();
        for l in &lines {
            let dir = Complex64::from_polar(1.0, l.angle);
            taus.extend((l.j_lo..=l.j_hi).map(|j| dir * r0 * (j as f64 * h).exp()));
        }
        let mgrid = quad.m_grid(spec.beta)?;
        let wp = WeightParams {
            k: spec.k,
            q: spec.q,
            beta: spec.beta,
            mu: spec.mu,
            alpha: spec.alpha,
            rho: geom.rho,
            delta: geom.delta,
        };
        Ok(BorelGrid { taus, m: mgrid.points(), mgrid, wp, r0, n_per_q, log_step: h, direction: geom.d, lines })
    }
}

/// Samples of one ω component over a [`BorelGrid`], row-major `(τ-node, m-node)`.
#[derive(Debug, Clone)]
pub struct BorelFunction {
    grid: Arc<BorelGrid>,
    values: Vec<Complex64>,
    eps: Complex64,
}

impl BorelFunction {
    pub fn new(grid: Arc<BorelGrid>, values: Vec<Complex64>, eps: Complex64) -> Result<Self, SolverError> {
        if values.len() != grid.n_nodes() * grid.m.len() {
            return Err(SolverError::Grid(format!(
                "{} values for {} nodes × {} modes",
                values.len(),
                grid.n_nodes(),
                grid.m.len()
            )));
        }
        Ok(BorelFunction { grid, values, eps })
    }

    pub fn zeros(grid: Arc<BorelGrid>, eps: Complex64) -> Self {
        let n = grid.n_nodes() * grid.m.len();
        BorelFunction { grid, values: vec![Complex64::new(0.0, 0.0); n], eps }
    }

    pub fn from_fn(grid: Arc<BorelGrid>, eps: Complex64, f: impl Fn(Complex64, f64) -> Complex64) -> Self {
        let values = grid.taus.iter().flat_map(|&t| grid.m.iter().map(move |&m| (t, m))).map(|(t, m)| f(t, m)).collect();
        BorelFunction { grid, values, eps }
    }

    pub fn grid(&self) -> &BorelGrid {
        &self.grid
    }

    pub fn grid_arc(&self) -> &Arc<BorelGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn eps(&self) -> Complex64 {
        self.eps
    }

    pub fn row(&self, node: usize) -> &[Complex64] {
        let n = self.grid.m.len();
        &self.values[node * n..(node + 1) * n]
    }

    pub fn norm(&self) -> f64 {
        expq_norm_samples(&self.grid.taus, &self.grid.m, &self.values, &self.grid.wp)
    }

    /// Weighted nodewise maximum of `|self − other|`.
    pub fn distance(&self, other: &BorelFunction) -> f64 {
        let diff: Vec<Complex64> = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        expq_norm_samples(&self.grid.taus, &self.grid.m, &diff, &self.grid.wp)
    }
}

fn weighted_norm(grid: &BorelGrid, v: &[Complex64]) -> f64 {
    expq_norm_samples(&grid.taus, &grid.m, v, &grid.wp)
}

struct TermOp {
    kernel: ConvKernel,
    shift: i64,
    /// `τ^{d_ℓ} / (q^{1/k})^{d_ℓ(d_ℓ−1)/2}` per node.
    pre: Vec<Complex64>,
    eps_factor: Complex64,
    delta: f64,
}

/// Precomputed discretization of `𝓗_ε` at one ε.
pub struct BorelOperator {
    grid: Arc<BorelGrid>,
    eps: Complex64,
    nm: usize,
    pinv: Vec<Complex64>,
    hp: Vec<Complex64>,
    terms: Vec<TermOp>,
    /// `b[j][k]` acts on ω_j in the ω_k equation.
    b: [[Option<ConvKernel>; 2]; 2],
    forcing: [Vec<Complex64>; 2],
}

impl BorelOperator {
    pub fn new(spec: &ProblemSpec, grid: Arc<BorelGrid>, eps: Complex64) -> Result<Self, SolverError> {
        let nm = grid.m.len();
        let mg = grid.mgrid.clone();
        let mut pinv = Vec::with_capacity(grid.n_nodes() * nm);
        let mut hp = Vec::with_capacity(grid.n_nodes() * nm);
        let mut forcing = [Vec::with_capacity(pinv.capacity()), Vec::with_capacity(pinv.capacity())];
        let hp_scale = spec.d_d as f64 / spec.kf() / spec.q_tri(spec.d_d);
        for &tau in &grid.taus {
            for &m in &grid.m {
                let p = spec.p_m(tau, m);
                if p.norm() == 0.0 || !p.is_finite() {
                    return Err(SolverError::Grid(format!("P_m(τ) vanishes at τ = {tau}, m = {m}")));
                }
                let pi = p.inv();
                pinv.push(pi);
                hp.push(spec.r_d.eval_im(m) * tau.powu(spec.d_d) * hp_scale * pi);
                for (h, f) in forcing.iter_mut().enumerate() {
                    f.push(spec.forcing_borel(h, tau, m, eps) * pi);
                }
            }
        }
        let mut terms = Vec::with_capacity(spec.terms.len());
        for (l, t) in spec.terms.iter().enumerate() {
            let e = spec.borel_dilation(l);
            let shift = e.num() * grid.n_per_q / e.den();
            let qf = spec.q_tri(t.d);
            terms.push(TermOp {
                kernel: ConvKernel::from_fn(&mg, inv_sqrt_2pi(), |d, m1| t.c.eval(d, eps) * t.r.eval_im(m1)),
                shift,
                pre: grid.taus.iter().map(|tau| tau.powu(t.d) / qf).collect(),
                eps_factor: eps.powi(t.big_delta as i32 - t.d as i32),
                delta: t.delta.to_f64(),
            });
        }
        let kb = |s: &crate::problem_model::FourierSymbol| {
            (!s.is_zero()).then(|| ConvKernel::from_fn(&mg, inv_sqrt_2pi(), |d, _| s.eval(d, eps)))
        };
        let cb = &spec.coeffs.b;
        let b = [[kb(&cb[0][0]), kb(&cb[0][1])], [kb(&cb[1][0]), kb(&cb[1][1])]];
        Ok(BorelOperator { grid, eps, nm, pinv, hp, terms, b, forcing })
    }

    pub fn grid(&self) -> &Arc<BorelGrid> {
        &self.grid
    }

    pub fn eps(&self) -> Complex64 {
        self.eps
    }

    pub fn n_terms(&self) -> usize {
        self.terms.len()
    }

    fn zeros(&self) -> Vec<Complex64> {
        vec![Complex64::new(0.0, 0.0); self.pinv.len()]
    }

    fn wrap(&self, values: Vec<Complex64>) -> BorelFunction {
        BorelFunction { grid: self.grid.clone(), values, eps: self.eps }
    }

    /// `out += c · 𝓗_ℓ(x)` (no ε power).
    fn add_hl(&self, l: usize, x: &[Complex64], c: Complex64, out: &mut [Complex64]) {
        let t = &self.terms[l];
        let nm = self.nm;
        let mut tmp = vec![Complex64::new(0.0, 0.0); nm];
        for line in &self.grid.lines {
            for j in line.j_lo..=line.j_hi {
                let node = line.node(j);
                let src = line.node(j + t.shift);
                tmp.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
                t.kernel.apply_add(&x[src * nm..(src + 1) * nm], Complex64::new(1.0, 0.0), &mut tmp);
                let f = c * t.pre[node];
                let row = node * nm..(node + 1) * nm;
                for ((o, p), v) in out[row.clone()].iter_mut().zip(&self.pinv[row]).zip(&tmp) {
                    *o += f * p * v;
                }
            }
        }
    }

    /// `out += (1/P) K x` nodewise.
    fn add_b(&self, k: &ConvKernel, x: &[Complex64], out: &mut [Complex64]) {
        let nm = self.nm;
        let mut tmp = vec![Complex64::new(0.0, 0.0); nm];
        for node in 0..self.grid.n_nodes() {
            let row = node * nm..(node + 1) * nm;
            tmp.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
            k.apply_add(&x[row.clone()], Complex64::new(1.0, 0.0), &mut tmp);
            for ((o, p), v) in out[row.clone()].iter_mut().zip(&self.pinv[row]).zip(&tmp) {
                *o += p * v;
            }
        }
    }

    fn add_hp(&self, x1: &[Complex64], out: &mut [Complex64]) {
        for ((o, h), x) in out.iter_mut().zip(&self.hp).zip(x1) {
            *o += h * x;
        }
    }

    /// Linear part of the ω₁ equation; `x0` enters only through `b₀₁`.
    fn lin1(&self, x0: &[Complex64], x1: &[Complex64], out: &mut [Complex64]) {
        for l in 0..self.terms.len() {
            self.add_hl(l, x1, self.terms[l].eps_factor, out);
        }
        if let Some(k) = &self.b[0][1] {
            self.add_b(k, x0, out);
        }
        if let Some(k) = &self.b[1][1] {
            self.add_b(k, x1, out);
        }
    }

    /// Linear part of the ω₀ equation restricted to ω₀.
    fn lin0_self(&self, x0: &[Complex64], out: &mut [Complex64]) {
        for l in 0..self.terms.len() {
            self.add_hl(l, x0, self.terms[l].eps_factor, out);
        }
        if let Some(k) = &self.b[0][0] {
            self.add_b(k, x0, out);
        }
    }

    /// Part of the ω₀ equation driven by ω₁.
    fn lin0_cross(&self, x1: &[Complex64], out: &mut [Complex64]) {
        self.add_hp(x1, out);
        for l in 0..self.terms.len() {
            let t = &self.terms[l];
            if t.delta != 0.0 {
                self.add_hl(l, x1, t.eps_factor * t.delta, out);
            }
        }
        if let Some(k) = &self.b[1][0] {
            self.add_b(k, x1, out);
        }
    }

    /// Linear part of `𝓗_ε`.
    fn linear(&self, x0: &[Complex64], x1: &[Complex64]) -> (Vec<Complex64>, Vec<Complex64>) {
        let mut y0 = self.zeros();
        let mut y1 = self.zeros();
        self.lin0_self(x0, &mut y0);
        self.lin0_cross(x1, &mut y0);
        self.lin1(x0, x1, &mut y1);
        (y0, y1)
    }

    fn affine(&self, x0: &[Complex64], x1: &[Complex64]) -> (Vec<Complex64>, Vec<Complex64>) {
        let (mut y0, mut y1) = self.linear(x0, x1);
        y0.iter_mut().zip(&self.forcing[0]).for_each(|(a, f)| *a += f);
        y1.iter_mut().zip(&self.forcing[1]).for_each(|(a, f)| *a += f);
        (y0, y1)
    }

    /// `𝓗_ℓ(ω)` without the `ε^{Δ_ℓ−d_ℓ}` factor.
    pub fn apply_hl(&self, w: &BorelFunction, l: usize) -> BorelFunction {
        let mut out = self.zeros();
        self.add_hl(l, &w.values, Complex64::new(1.0, 0.0), &mut out);
        self.wrap(out)
    }

    /// `𝓗_P(ω₁) = (d_D/k) R_D(im) τ^{d_D} ω₁ / ((q^{1/k})^{d_D(d_D−1)/2} P_m(τ))`.
    pub fn apply_hp(&self, w1: &BorelFunction) -> BorelFunction {
        let mut out = self.zeros();
        self.add_hp(&w1.values, &mut out);
        self.wrap(out)
    }

    /// Both components of `𝓗_ε(ω₀, ω₁)`.
    pub fn apply_h(&self, w0: &BorelFunction, w1: &BorelFunction) -> (BorelFunction, BorelFunction) {
        let (y0, y1) = self.affine(&w0.values, &w1.values);
        (self.wrap(y0), self.wrap(y1))
    }

    /// `(F̃₀/P_m, F̃₁/P_m)`.
    pub fn forcing_over_p(&self) -> (BorelFunction, BorelFunction) {
        (self.wrap(self.forcing[0].clone()), self.wrap(self.forcing[1].clone()))
    }

    /// Undivided defects `P_m ω_h − (right side of the ω_h equation)`.
    pub fn undivided_defect(&self, w0: &BorelFunction, w1: &BorelFunction) -> (BorelFunction, BorelFunction) {
        let (y0, y1) = self.affine(&w0.values, &w1.values);
        let d = |w: &[Complex64], y: &[Complex64]| -> Vec<Complex64> {
            w.iter().zip(y).zip(&self.pinv).map(|((a, b), p)| (a - b) / p).collect()
        };
        (self.wrap(d(&w0.values, &y0)), self.wrap(d(&w1.values, &y1)))
    }

    /// Largest ratio `‖𝓗_ε(a) − 𝓗_ε(b)‖ / ‖a − b‖` over seeded random probe differences,
    /// each refined by a few power steps.
    pub fn contraction_estimate(&self, probes: usize, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grid = &self.grid;
        let inv_w: Vec<f64> = grid
            .taus
            .iter()
            .flat_map(|&t| grid.m.iter().map(move |&m| 1.0 / grid.wp.weight(t, m)))
            .collect();
        let mut best = 0.0f64;
        for _ in 0..probes.max(2) {
            let mut draw = || -> Vec<Complex64> {
                inv_w.iter().map(|w| Complex64::from_polar(rng.gen_range(0.0..1.0), rng.gen_range(0.0..2.0 * PI)) * w).collect()
            };
            let mut x0 = draw();
            let mut x1 = draw();
            for _ in 0..4 {
                let nx = weighted_norm(grid, &x0).max(weighted_norm(grid, &x1));
                if nx == 0.0 {
                    break;
                }
                let (y0, y1) = self.linear(&x0, &x1);
                let ny = weighted_norm(grid, &y0).max(weighted_norm(grid, &y1));
                best = best.max(ny / nx);
                if ny == 0.0 {
                    break;
                }
                x0 = y0;
                x1 = y1;
            }
        }
        best
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub iterations: usize,
    pub final_update: f64,
    pub contraction: f64,
    pub norm_w0: f64,
    pub norm_w1: f64,
    /// `max_h ‖𝓗_ε(ω)_h − ω_h‖`.
    pub fixed_point_residual: f64,
    /// `max_h ‖F̃_h/P_m‖`.
    pub c_f_tilde: f64,
    /// Certified radius `2 C̃_F / (1 − contraction)`; infinite when contraction ≥ 1.
    pub varpi: f64,
    pub history: Vec<f64>,
    /// Whether the smallness condition held; `None` when not checked.
    pub guaranteed: Option<bool>,
}

/// Picard iteration `x ← g + L x` from `x = 0`; stops when the update drops below
/// `tol · max(1, ‖x‖)`, fails after three consecutive growths.
fn picard(
    grid: &BorelGrid,
    n_comp: usize,
    step: impl Fn(&[Vec<Complex64>]) -> Vec<Vec<Complex64>>,
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<Vec<Complex64>>, Vec<f64>), SolverError> {
    let size = grid.n_nodes() * grid.m.len();
    let mut x = vec![vec![Complex64::new(0.0, 0.0); size]; n_comp];
    let mut history = Vec::new();
    let mut growth = 0;
    for _ in 0..max_iter {
        let y = step(&x);
        let mut upd = 0.0f64;
        let mut nrm = 0.0f64;
        for (a, b) in y.iter().zip(&x) {
            let d: Vec<Complex64> = a.iter().zip(b).map(|(u, v)| u - v).collect();
            upd = upd.max(weighted_norm(grid, &d));
            nrm = nrm.max(weighted_norm(grid, a));
        }
        if !upd.is_finite() {
            history.push(upd);
            return Err(SolverError::Divergence { history });
        }
        growth = if history.last().is_some_and(|&p| upd > p) { growth + 1 } else { 0 };
        history.push(upd);
        x = y;
        if upd <= tol * nrm.max(1.0) {
            return Ok((x, history));
        }
        if growth >= 3 {
            return Err(SolverError::Divergence { history });
        }
    }
    Err(SolverError::NotConverged { iterations: history.len(), last: *history.last().unwrap_or(&f64::NAN) })
}

fn finish(op: &BorelOperator, x0: Vec<Complex64>, x1: Vec<Complex64>, history: Vec<f64>, cfg: &SolverConfig) -> (BorelFunction, BorelFunction, SolveReport) {
    let w0 = op.wrap(x0);
    let w1 = op.wrap(x1);
    let (h0, h1) = op.apply_h(&w0, &w1);
    let (f0, f1) = op.forcing_over_p();
    let contraction = op.contraction_estimate(cfg.probes, cfg.seed);
    let c_f_tilde = f0.norm().max(f1.norm());
    let varpi = if contraction < 1.0 { 2.0 * c_f_tilde / (1.0 - contraction) } else { f64::INFINITY };
    let report = SolveReport {
        iterations: history.len(),
        final_update: *history.last().unwrap_or(&0.0),
        contraction,
        norm_w0: w0.norm(),
        norm_w1: w1.norm(),
        fixed_point_residual: h0.distance(&w0).max(h1.distance(&w1)),
        c_f_tilde,
        varpi,
        history,
        guaranteed: None,
    };
    (w0, w1, report)
}

/// Picard iteration on the full map `𝓗_ε` from `(0, 0)`.
pub fn solve_coupled(op: &BorelOperator, cfg: &SolverConfig) -> Result<(BorelFunction, BorelFunction, SolveReport), SolverError> {
    let (mut x, history) = picard(
        &op.grid,
        2,
        |x| {
            let (a, b) = op.affine(&x[0], &x[1]);
            vec![a, b]
        },
        cfg.tol,
        cfg.max_iter,
    )?;
    let x1 = x.pop().unwrap();
    let x0 = x.pop().unwrap();
    Ok(finish(op, x0, x1, history, cfg))
}

/// Forward substitution for `b̃₀₁ ≡ 0`: ω₁ from `𝓗^(1)`, then ω₀ from `𝓗^(0)` with `G_ε` frozen.
pub fn solve_triangular(
    spec: &ProblemSpec,
    op: &BorelOperator,
    cfg: &SolverConfig,
) -> Result<(BorelFunction, BorelFunction, SolveReport), SolverError> {
    if !spec.is_triangular() || op.b[0][1].is_some() {
        return Err(SolverError::Usage("triangular solve needs the triangular flag and b01 ≡ 0".into()));
    }
    let zero = op.zeros();
    let (mut x1, mut hist) = picard(
        &op.grid,
        1,
        |x| {
            let mut y = op.forcing[1].clone();
            op.lin1(&zero, &x[0], &mut y);
            vec![y]
        },
        cfg.tol,
        cfg.max_iter,
    )?;
    let x1 = x1.pop().unwrap();
    let mut g = op.forcing[0].clone();
    op.lin0_cross(&x1, &mut g);
    let (mut x0, h0) = picard(
        &op.grid,
        1,
        |x| {
            let mut y = g.clone();
            op.lin0_self(&x[0], &mut y);
            vec![y]
        },
        cfg.tol,
        cfg.max_iter,
    )?;
    hist.extend(h0);
    Ok(finish(op, x0.pop().unwrap(), x1, hist, cfg))
}

/// Chooses the solver path from the triangular flag.
pub fn solve(spec: &ProblemSpec, op: &BorelOperator, cfg: &SolverConfig) -> Result<(BorelFunction, BorelFunction, SolveReport), SolverError> {
    if spec.is_triangular() {
        solve_triangular(spec, op, cfg)
    } else {
        solve_coupled(op, cfg)
    }
}

/// Largest weighted gap between two solutions on the disc nodes they share.
pub fn disc_agreement(a: &BorelFunction, b: &BorelFunction) -> Result<f64, SolverError> {
    let (ga, gb) = (a.grid(), b.grid());
    if ga.r0 != gb.r0 || ga.log_step != gb.log_step || ga.m != gb.m || ga.lines.len() != gb.lines.len() {
        return Err(SolverError::Grid("disc lattices differ".into()));
    }
    let mut worst = 0.0f64;
    for (la, lb) in ga.lines[1..].iter().zip(&gb.lines[1..]) {
        if angular_distance(la.angle, lb.angle) > 1e-15 {
            return Err(SolverError::Grid("disc angles differ".into()));
        }
        for j in la.j_lo.max(lb.j_lo)..=la.j_hi.min(lb.j_hi) {
            let (na, nb) = (la.node(j), lb.node(j));
            let tau = ga.taus[na];
            for (i, &m) in ga.m.iter().enumerate() {
                let d = (a.row(na)[i] - b.row(nb)[i]).norm() * ga.wp.weight(tau, m);
                worst = worst.max(d);
            }
        }
    }
    Ok(worst)
}
