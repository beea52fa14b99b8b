//! Root locus of `P_m(τ)`, admissible sectors and their bound constants,
//! Assumption (D), the smallness condition, and good coverings.

use crate::problem_model::{AssumptionReport, Poly, ProblemSpec};
use crate::special_functions::e_weight;
use crate::transforms::{check_admissible, default_r1, inv_sqrt_2pi, MGrid};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("R_D(im) vanishes at m = {m}")]
    DegenerateSymbol { m: f64 },
    #[error("sector around d = {d:.6} meets root q_{ell}(m) at m = {m}, arg = {root_arg:.6}")]
    RootInSector { d: f64, m: f64, ell: usize, root_arg: f64 },
    #[error("ρ = {rho} violates 0 < ρ < {bound}")]
    RhoTooLarge { rho: f64, bound: f64 },
    #[error("sector contains the direction π; no shift δ separates −δ from it")]
    NoShift,
    #[error("no admissible direction for sector p = {p}; blocked arcs: {blocked:?}")]
    NoAdmissibleDirection { p: usize, blocked: Vec<(f64, f64)> },
    #[error("invalid geometry input: {0}")]
    Invalid(String),
}

/// Distance on the circle, in `[0, π]`.
pub fn angular_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0 * PI);
    d.min(2.0 * PI - d)
}

/// Closed-form roots `q_ℓ(m)` of `P_m`, `ℓ = 0..d_D−1`.
pub fn pm_roots(spec: &ProblemSpec, m: f64) -> Result<Vec<Complex64>, GeometryError> {
    let rd = spec.r_d.eval_im(m);
    if rd.norm() == 0.0 {
        return Err(GeometryError::DegenerateSymbol { m });
    }
    let dd = spec.d_d;
    if dd == 0 {
        return Ok(Vec::new());
    }
    let ratio = spec.q_poly.eval_im(m) / rd;
    let ddf = dd as f64;
    let radius = (ratio.norm() * spec.q_tri(dd)).powf(1.0 / ddf);
    Ok((0..dd)
        .map(|l| Complex64::from_polar(radius, ratio.arg() / ddf + 2.0 * PI * l as f64 / ddf))
        .collect())
}

/// Coefficients of `P_m(τ)` in τ, low to high.
pub fn pm_coefficients(spec: &ProblemSpec, m: f64) -> Vec<Complex64> {
    let mut c = vec![Complex64::new(0.0, 0.0); spec.d_d as usize + 1];
    c[0] += spec.q_poly.eval_im(m);
    c[spec.d_d as usize] -= spec.r_d.eval_im(m) / spec.q_tri(spec.d_d);
    c
}

/// Aberth iteration for all roots of a polynomial (coefficients low to high).
pub fn poly_roots(coeffs: &[Complex64]) -> Vec<Complex64> {
    let p = Poly::new(coeffs.to_vec());
    let n = p.degree();
    if n == 0 {
        return Vec::new();
    }
    let lead = p.leading();
    let monic: Vec<Complex64> = coeffs[..=n].iter().map(|c| c / lead).collect();
    let dp: Vec<Complex64> = (1..=n).map(|i| monic[i] * i as f64).collect();
    let eval = |c: &[Complex64], z: Complex64| c.iter().rev().fold(Complex64::new(0.0, 0.0), |a, b| a * z + b);
    let radius = 1.0 + monic[..n].iter().map(|c| c.norm()).fold(0.0, f64::max);
    let mut z: Vec<Complex64> = (0..n)
        .map(|i| Complex64::from_polar(radius * 0.5, 2.0 * PI * i as f64 / n as f64 + 0.4))
        .collect();
    for _ in 0..500 {
        let mut moved = 0.0f64;
        for i in 0..n {
            let ratio = eval(&monic, z[i]) / eval(&dp, z[i]);
            let s: Complex64 = (0..n).filter(|&j| j != i).map(|j| (z[i] - z[j]).inv()).sum();
            let w = ratio / (Complex64::new(1.0, 0.0) - ratio * s);
            if w.is_finite() {
                z[i] -= w;
                moved = moved.max(w.norm() / z[i].norm().max(1e-300));
            }
        }
        if moved < 1e-15 {
            break;
        }
    }
    z
}

/// Closed-form roots, each confirmed against the generic solver.
pub fn pm_roots_checked(spec: &ProblemSpec, m: f64) -> Result<(Vec<Complex64>, f64), GeometryError> {
    let closed = pm_roots(spec, m)?;
    let generic = poly_roots(&pm_coefficients(spec, m));
    let mut worst = 0.0f64;
    for r in &closed {
        let best = generic.iter().map(|g| (g - r).norm()).fold(f64::INFINITY, f64::min);
        worst = worst.max(best / r.norm().max(1.0));
    }
    Ok((closed, worst))
}

/// Arguments of all roots over the grid plus the `|m| → ∞` limit.
fn root_args(spec: &ProblemSpec, m_grid: &[f64]) -> Result<Vec<(f64, usize, f64)>, GeometryError> {
    let mut out = Vec::new();
    for &m in m_grid {
        for (l, r) in pm_roots(spec, m)?.iter().enumerate() {
            out.push((m, l, r.arg()));
        }
    }
    if spec.d_d > 0 && spec.q_poly.degree() == spec.r_d.degree() {
        let lim = spec.q_poly.leading() / spec.r_d.leading();
        let ddf = spec.d_d as f64;
        // Leading term of Q(im)/R_D(im) is lead_Q/lead_R_D for equal degrees.
        for l in 0..spec.d_d {
            out.push((f64::INFINITY, l as usize, lim.arg() / ddf + 2.0 * PI * l as f64 / ddf));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    #[serde(default)]
    pub direction: f64,
    /// Opening of S_d used for root avoidance.
    #[serde(default = "default_aperture")]
    pub aperture: f64,
    /// Opening used for the θ-window of 𝔇₃₁; defaults to `aperture`.
    #[serde(default)]
    pub constants_aperture: Option<f64>,
    #[serde(default)]
    pub rho: Option<f64>,
    #[serde(default)]
    pub delta: Option<f64>,
    /// Split radius R of the 𝔇₃ estimate (in units of |q_ℓ(m)|).
    #[serde(default = "default_big_r")]
    pub big_r: f64,
    #[serde(default = "default_u_nodes")]
    pub u_nodes: usize,
    #[serde(default = "default_disc_radial")]
    pub disc_radial: usize,
    #[serde(default = "default_disc_angular")]
    pub disc_angular: usize,
}

fn default_aperture() -> f64 {
    PI / 36.0
}
fn default_big_r() -> f64 {
    2.0 + 1e-9
}
fn default_u_nodes() -> usize {
    2001
}
fn default_disc_radial() -> usize {
    41
}
fn default_disc_angular() -> usize {
    72
}

impl Default for GeometryConfig {
    fn default() -> Self {
        GeometryConfig {
            direction: 0.0,
            aperture: default_aperture(),
            constants_aperture: None,
            rho: None,
            delta: None,
            big_r: default_big_r(),
            u_nodes: default_u_nodes(),
            disc_radial: default_disc_radial(),
            disc_angular: default_disc_angular(),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, PartialEq)]
pub struct BoundConstants {
    pub c_d: f64,
    /// Lower bound `1 − 2^{−d_D}` of the norm ratio.
    pub c_d_floor: f64,
    pub d31: f64,
    pub d32: f64,
    pub d3: f64,
    pub d4: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SectorGeometry {
    pub d: f64,
    pub aperture: f64,
    pub constants_aperture: f64,
    pub rho: f64,
    pub delta: f64,
    pub d1: f64,
    pub d2: f64,
    pub consts: BoundConstants,
}

/// `½ q^{(d_D−1)/(2k)} 𝔇₁^{1/d_D}` capped at 1 (upper bound for ρ).
pub fn rho_bound(spec: &ProblemSpec, d1: f64) -> f64 {
    if spec.d_d == 0 {
        return 1.0;
    }
    let ddf = spec.d_d as f64;
    let b = 0.5 * (spec.log_q() * (ddf - 1.0) / (2.0 * spec.kf())).exp() * d1.powf(1.0 / ddf);
    b.min(1.0)
}

/// Angular distance from π to the closed arc `[d − A/2, d + A/2]` (0 if π is inside).
fn gap_to_negative_axis(d: f64, aperture: f64) -> f64 {
    (angular_distance(d, PI) - aperture / 2.0).max(0.0)
}

/// `dist(S_d ∪ D(0,ρ), −δ)`.
pub fn shift_distance(d: f64, aperture: f64, rho: f64, delta: f64) -> f64 {
    let psi = gap_to_negative_axis(d, aperture);
    let sector = if psi >= PI / 2.0 { delta } else { delta * psi.sin() };
    (delta - rho).min(sector)
}

/// Smallest δ with `dist(S_d ∪ D(0,ρ), −δ) ≥ 1`, by bisection.
pub fn minimal_shift(d: f64, aperture: f64, rho: f64) -> Result<f64, GeometryError> {
    if gap_to_negative_axis(d, aperture) < 1e-12 {
        return Err(GeometryError::NoShift);
    }
    let (mut lo, mut hi) = (0.0, 2.0);
    while shift_distance(d, aperture, rho, hi) < 1.0 {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(GeometryError::NoShift);
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if shift_distance(d, aperture, rho, mid) >= 1.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Root-avoidance check of `S_d` over the grid; returns the smallest angular clearance.
pub fn root_clearance(spec: &ProblemSpec, d: f64, aperture: f64, m_grid: &[f64]) -> Result<f64, GeometryError> {
    let mut clearance = PI;
    for (m, ell, a) in root_args(spec, m_grid)? {
        let gap = angular_distance(a, d) - aperture / 2.0;
        if gap <= 0.0 {
            return Err(GeometryError::RootInSector { d, m, ell, root_arg: a });
        }
        clearance = clearance.min(gap);
    }
    Ok(clearance)
}

impl SectorGeometry {
    /// Validates the sector against the roots and fills in ρ, δ and the bound constants.
    pub fn build(
        spec: &ProblemSpec,
        report: &AssumptionReport,
        cfg: &GeometryConfig,
        m_grid: &[f64],
    ) -> Result<SectorGeometry, GeometryError> {
        if !(cfg.aperture >= 0.0 && cfg.aperture < PI) {
            return Err(GeometryError::Invalid(format!("aperture {} outside [0, π)", cfg.aperture)));
        }
        root_clearance(spec, cfg.direction, cfg.aperture, m_grid)?;
        let bound = rho_bound(spec, report.d1);
        let rho = cfg.rho.unwrap_or(0.8 * bound);
        if !(rho > 0.0 && rho < bound) {
            return Err(GeometryError::RhoTooLarge { rho, bound });
        }
        let min_delta = minimal_shift(cfg.direction, cfg.aperture, rho)?;
        let delta = match cfg.delta {
            Some(dl) if shift_distance(cfg.direction, cfg.aperture, rho, dl) >= 1.0 => dl,
            Some(dl) => return Err(GeometryError::Invalid(format!("δ = {dl} is below the minimal shift {min_delta}"))),
            None => min_delta,
        };
        let mut geom = SectorGeometry {
            d: cfg.direction,
            aperture: cfg.aperture,
            constants_aperture: cfg.constants_aperture.unwrap_or(cfg.aperture),
            rho,
            delta,
            d1: report.d1,
            d2: report.d2,
            consts: BoundConstants { c_d: 0.0, c_d_floor: 0.0, d31: 0.0, d32: 0.0, d3: 0.0, d4: 0.0 },
        };
        let u_grid: Vec<f64> = (0..cfg.u_nodes).map(|i| cfg.big_r * i as f64 / (cfg.u_nodes - 1) as f64).collect();
        geom.consts = bound_constants(spec, &geom, m_grid, &u_grid, cfg.disc_radial, cfg.disc_angular)?;
        Ok(geom)
    }
}

/// C_D, 𝔇₃₁, 𝔇₃₂, 𝔇₃ and 𝔇₄ for a validated sector.
pub fn bound_constants(
    spec: &ProblemSpec,
    geom: &SectorGeometry,
    m_grid: &[f64],
    u_grid: &[f64],
    disc_radial: usize,
    disc_angular: usize,
) -> Result<BoundConstants, GeometryError> {
    let dd = spec.d_d;
    let ddf = dd as f64;
    let c_d_floor = 1.0 - 0.5f64.powi(dd as i32);

    let mut c_d = f64::INFINITY;
    for &m in m_grid {
        let qm = spec.q_poly.eval_im(m);
        for ir in 0..disc_radial.max(2) {
            let r = geom.rho * ir as f64 / (disc_radial.max(2) - 1) as f64;
            for ia in 0..disc_angular.max(1) {
                let tau = Complex64::from_polar(r, 2.0 * PI * ia as f64 / disc_angular.max(1) as f64);
                c_d = c_d.min(spec.p_m(tau, m).norm() / qm.norm());
            }
        }
    }

    let big_r = u_grid.last().copied().unwrap_or(2.0);
    let c = geom.d2.powf(1.0 / ddf.max(1.0)) * (spec.log_q() * (ddf - 1.0) / (2.0 * spec.kf())).exp();
    let (d31, d32) = if dd == 0 {
        (1.0, 1.0)
    } else {
        // θ = arg τ − arg q_ℓ(m) over the sector window.
        let half = geom.constants_aperture / 2.0;
        let phis: Vec<f64> = if half == 0.0 { vec![geom.d] } else { (0..=8).map(|i| geom.d - half + half * i as f64 / 4.0).collect() };
        let mut thetas = Vec::new();
        for (_, _, a) in root_args(spec, m_grid)? {
            for &phi in &phis {
                thetas.push(phi - a);
            }
        }
        let mut d31 = f64::INFINITY;
        for &theta in &thetas {
            let rot = Complex64::from_polar(1.0, ddf * theta);
            for &u in u_grid {
                let num = (Complex64::new(1.0, 0.0) - rot * u.powf(ddf)).norm();
                d31 = d31.min(num / (1.0 + u * c).powf(ddf));
            }
        }
        (d31, 0.5 * (big_r / (1.0 + big_r * c)).powf(ddf))
    };
    let lrd = (geom.rho + geom.delta).ln();
    let d4 = spec.kf() / (2.0 * spec.log_q()) * (lrd * lrd + spec.alpha * lrd);
    Ok(BoundConstants { c_d, c_d_floor, d31, d32, d3: d31.min(d32), d4 })
}

/// Relative slack demanded by the strict inequality of Assumption (D).
pub const ASSUMPTION_D_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, Serialize, PartialEq)]
pub struct AssumptionD {
    pub pass: bool,
    /// `(½ 𝔇₁ min{C_D, 𝔇₃}) / (d_D/k)`; infinite when `d_D = 0`.
    pub margin: f64,
    pub k_threshold: u32,
}

/// `d_D/k < ½ 𝔇₁ min{C_D, 𝔇₃}` with the constants held fixed.
pub fn check_assumption_d(spec: &ProblemSpec, d1: f64, consts: &BoundConstants) -> AssumptionD {
    let rhs = 0.5 * d1 * consts.c_d.min(consts.d3);
    if spec.d_d == 0 {
        return AssumptionD { pass: true, margin: f64::INFINITY, k_threshold: 1 };
    }
    let ddf = spec.d_d as f64;
    let margin = rhs * spec.kf() / ddf;
    let pass = margin > 1.0 + ASSUMPTION_D_TOL;
    // Smallest k with k·rhs/d_D > 1 + tol.
    let mut kt = ((1.0 + ASSUMPTION_D_TOL) * ddf / rhs).floor().max(0.0) as u32;
    while kt as f64 * rhs / ddf <= 1.0 + ASSUMPTION_D_TOL {
        kt += 1;
    }
    AssumptionD { pass, margin, k_threshold: kt.max(1) }
}

/// Sup-norm operator bound of `m ↦ b(m)(2π)^{−1/2}∫κ(m−m₁)h(im₁)g(m₁)dm₁` on the E_(β,μ)
/// scale for any kernel with `|κ| ≤ 1/w`: `sup_m w(m)|b(m)| Σ_j h_m|h(im_j)|/(w(m−m_j)w(m_j))`.
pub fn c2_constant(grid: &MGrid, h: &Poly, q_div: Option<&Poly>, beta: f64, mu: f64) -> f64 {
    let pts = grid.points();
    let hm = grid.h();
    let hv: Vec<f64> = pts.iter().map(|&m| h.eval_im(m).norm() / e_weight(m, beta, mu)).collect();
    let mut best = 0.0f64;
    for &m in &pts {
        let b = q_div.map(|p| 1.0 / p.eval_im(m).norm()).unwrap_or(1.0);
        let s: f64 = pts.iter().zip(&hv).map(|(&m1, hh)| hh / e_weight(m - m1, beta, mu)).sum();
        best = best.max(e_weight(m, beta, mu) * b * s * hm * inv_sqrt_2pi());
    }
    best
}

/// Sector part of C₁ for term ℓ: sup over ray samples and m of
/// `|Q(im)/P_m(τ)| |τ|^{d_ℓ} (q^{1/k})^{−d_ℓ(d_ℓ−1)/2} W(τ)/W(q^{e_ℓ}τ)` with `W` the τ-weight.
pub fn c1_constant(spec: &ProblemSpec, geom: &SectorGeometry, l: usize, ray_radii: &[f64], m_grid: &[f64]) -> f64 {
    let term = &spec.terms[l];
    let e = spec.borel_dilation(l).to_f64();
    let lam = spec.q.powf(e);
    let kf = spec.kf();
    let lq = spec.log_q();
    let ln_w = |tau: Complex64| {
        let x = (tau + geom.delta).norm().ln();
        -kf / (2.0 * lq) * x * x - spec.alpha * x
    };
    let qf = spec.q_tri(term.d);
    let dir = Complex64::from_polar(1.0, geom.d);
    let mut best = 0.0f64;
    for &r in ray_radii {
        let tau = dir * r;
        let wr = (ln_w(tau) - ln_w(tau * lam)).exp() * r.powi(term.d as i32) / qf;
        for &m in m_grid {
            let ratio = spec.q_poly.eval_im(m).norm() / spec.p_m(tau, m).norm();
            best = best.max(ratio * wr);
        }
    }
    best
}

/// `C_{3,ℓ} = max{(1−2^{−d_D})^{−1} ρ^{d_ℓ} e^{𝔇₄}, C₁} · C₂ · 𝒞_C`.
pub fn c3_constant(spec: &ProblemSpec, geom: &SectorGeometry, l: usize, c1: f64, c2: f64) -> f64 {
    let floor = geom.consts.c_d_floor.max(f64::MIN_POSITIVE);
    let disc = geom.rho.powi(spec.terms[l].d as i32) * geom.consts.d4.exp() / floor;
    disc.max(c1) * c2 * spec.coeffs.c_c
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Smallness {
    pub pass: bool,
    pub lhs: f64,
    pub hp_term: f64,
    pub ell_terms: Vec<f64>,
    pub b_term: f64,
}

/// Left side of the smallness condition; passes iff it is at most 1/2.
pub fn check_smallness(
    spec: &ProblemSpec,
    d1: f64,
    consts: &BoundConstants,
    eps0: f64,
    varsigma_b: f64,
    c2_b: f64,
    c3l: &[f64],
    m_grid: &[f64],
) -> Smallness {
    let hp_term = spec.d_d as f64 / spec.kf() / d1 * (1.0 / consts.c_d).max(1.0 / consts.d3);
    let ell_terms: Vec<f64> = spec
        .terms
        .iter()
        .zip(c3l)
        .map(|(t, c3)| eps0.powi(t.big_delta as i32 - t.d as i32) * c3 * (1.0 + t.delta.to_f64()))
        .collect();
    let inv_q = m_grid.iter().map(|&m| 1.0 / spec.q_poly.eval_im(m).norm()).fold(0.0, f64::max);
    let b_term = inv_q * 2.0 / consts.c_d * varsigma_b * c2_b;
    let lhs = hp_term + ell_terms.iter().sum::<f64>() + b_term;
    Smallness { pass: lhs <= 0.5, lhs, hp_term, ell_terms, b_term }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CoveringParams {
    #[serde(default = "default_zeta")]
    pub zeta: usize,
    /// Extra half-overlap η added on each side of the 2π/ζ opening.
    #[serde(default = "default_overlap")]
    pub overlap: f64,
    /// Opening of the time sector 𝒯 (bisected by the positive axis).
    #[serde(default = "default_t_aperture")]
    pub t_aperture: f64,
    /// Radius r_𝒯 < 1 of 𝒯.
    #[serde(default = "default_r_t")]
    pub r_t: f64,
    #[serde(default = "default_scan")]
    pub direction_samples: usize,
}

fn default_zeta() -> usize {
    2
}
fn default_overlap() -> f64 {
    0.1
}
fn default_t_aperture() -> f64 {
    0.1
}
fn default_r_t() -> f64 {
    0.5
}
fn default_scan() -> usize {
    720
}

impl Default for CoveringParams {
    fn default() -> Self {
        CoveringParams {
            zeta: default_zeta(),
            overlap: default_overlap(),
            t_aperture: default_t_aperture(),
            r_t: default_r_t(),
            direction_samples: default_scan(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CoveringSector {
    pub p: usize,
    pub bisector: f64,
    pub aperture: f64,
    pub radius: f64,
    pub direction: f64,
    /// Smallest admissibility slack `|1 + e^{i d_p} r/(εt)| − Δ` over sampled (ε, t).
    pub admissibility_slack: f64,
    pub assumption_d: AssumptionD,
}

impl CoveringSector {
    pub fn contains_direction(&self, a: f64) -> bool {
        angular_distance(a, self.bisector) <= self.aperture / 2.0 + 1e-12
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GoodCovering {
    pub zeta: usize,
    pub eps0: f64,
    pub sectors: Vec<CoveringSector>,
    pub t_aperture: f64,
    pub r_t: f64,
    pub r1: f64,
    pub admissibility_delta: f64,
}

impl GoodCovering {
    /// Number of sectors whose opening contains direction `a`.
    pub fn multiplicity(&self, a: f64) -> usize {
        self.sectors.iter().filter(|s| s.contains_direction(a)).count()
    }

    /// Bisecting direction of the overlap `𝓔_p ∩ 𝓔_{p+1}` (indices mod ζ).
    pub fn overlap_direction(&self, p: usize) -> f64 {
        let a = self.sectors[p].bisector;
        let mut b = self.sectors[(p + 1) % self.zeta].bisector;
        while b <= a {
            b += 2.0 * PI;
        }
        0.5 * (a + b)
    }
}

fn sample_products(bisector: f64, aperture: f64, eps0: f64, t_ap: f64, r_t: f64) -> Vec<Complex64> {
    let mut out = Vec::new();
    for ie in 0..=12 {
        let ae = bisector - aperture / 2.0 + aperture * ie as f64 / 12.0;
        for it in 0..=4 {
            let at = -t_ap / 2.0 + t_ap * it as f64 / 4.0;
            for &re in &[0.05, 0.5, 0.999] {
                out.push(Complex64::from_polar(re * eps0 * r_t, ae + at));
            }
        }
    }
    out
}

/// ζ sectors of opening `2π/ζ + 2η` bisected by `2πp/ζ`, each with a scanned direction `d_p`
/// that avoids the roots, satisfies Assumption (D), and keeps `εt ∈ 𝓡_{d_p,Δ} ∩ D(0,r₁)`.
pub fn build_good_covering(
    spec: &ProblemSpec,
    report: &AssumptionReport,
    base: &GeometryConfig,
    params: &CoveringParams,
    eps0: f64,
    adm_delta: f64,
    m_grid: &[f64],
) -> Result<GoodCovering, GeometryError> {
    let zeta = params.zeta;
    if zeta < 2 {
        return Err(GeometryError::Invalid(format!("ζ = {zeta} < 2")));
    }
    if !(params.r_t > 0.0 && params.r_t < 1.0) {
        return Err(GeometryError::Invalid(format!("r_T = {} not in (0,1)", params.r_t)));
    }
    let aperture = 2.0 * PI / zeta as f64 + 2.0 * params.overlap;
    if 2.0 * params.overlap >= 2.0 * PI / zeta as f64 {
        return Err(GeometryError::Invalid("overlap η too large: triple intersections".into()));
    }
    let r1 = default_r1(spec.q, spec.k, spec.alpha);
    let coarse: Vec<f64> = m_grid.iter().step_by((m_grid.len() / 200).max(1)).copied().collect();
    let mut sectors = Vec::with_capacity(zeta);
    for p in 0..zeta {
        let bisector = 2.0 * PI * p as f64 / zeta as f64;
        let products = sample_products(bisector, aperture, eps0, params.t_aperture, params.r_t);
        if products.iter().any(|t| t.norm() >= r1) {
            return Err(GeometryError::Invalid(format!("ε₀·r_T = {} is not below r₁ = {r1}", eps0 * params.r_t)));
        }
        let n = params.direction_samples.max(8);
        let mut candidates: Vec<(f64, f64)> = Vec::new();
        let mut blocked = Vec::new();
        let mut run: Option<f64> = None;
        for i in 0..n {
            let d = 2.0 * PI * i as f64 / n as f64;
            let slack = products
                .iter()
                .map(|t| crate::transforms::ray_distance(*t, d).0 - adm_delta)
                .fold(f64::INFINITY, f64::min);
            let ok = slack >= 0.0
                && root_clearance(spec, d, base.aperture, &coarse).is_ok()
                && gap_to_negative_axis(d, base.aperture) > 1e-9;
            if ok {
                candidates.push((d, slack));
                if let Some(s) = run.take() {
                    blocked.push((s, d));
                }
            } else if run.is_none() {
                run = Some(d);
            }
        }
        if let Some(s) = run {
            blocked.push((s, 2.0 * PI));
        }
        // Among directions passing Assumption (D): most admissible, then closest to the bisector.
        let mut chosen: Option<(f64, f64, AssumptionD)> = None;
        for &(d, slack) in &candidates {
            let cfg = GeometryConfig { direction: d, u_nodes: 401, disc_radial: 11, disc_angular: 24, ..base.clone() };
            let Ok(g) = SectorGeometry::build(spec, report, &cfg, &coarse) else { continue };
            let ad = check_assumption_d(spec, report.d1, &g.consts);
            if !ad.pass {
                continue;
            }
            let better = match &chosen {
                None => true,
                Some((cd, cs, _)) => {
                    slack > cs + 1e-12
                        || ((slack - cs).abs() <= 1e-12 && angular_distance(d, bisector) < angular_distance(*cd, bisector))
                }
            };
            if better {
                chosen = Some((d, slack, ad));
            }
        }
        let (direction, admissibility_slack, assumption_d) =
            chosen.ok_or(GeometryError::NoAdmissibleDirection { p, blocked })?;
        for t in &products {
            check_admissible(*t, direction, adm_delta, Some(r1)).map_err(|e| GeometryError::Invalid(e.to_string()))?;
        }
        sectors.push(CoveringSector { p, bisector, aperture, radius: eps0, direction, admissibility_slack, assumption_d });
    }
    Ok(GoodCovering {
        zeta,
        eps0,
        sectors,
        t_aperture: params.t_aperture,
        r_t: params.r_t,
        r1,
        admissibility_delta: adm_delta,
    })
}
