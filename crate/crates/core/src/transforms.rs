//! q-Laplace transform of order k, inverse Fourier transform and the two
//! convolution products on uniform m-grids.

use crate::problem_model::Poly;
use crate::special_functions::{theta_scaled, SpecialError};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransformError {
    #[error("T = {t} is outside R_(γ,Δ): |1 + e^(iγ) r/T| = {dist:.3e} < Δ = {delta} at r = {radius:.6e}")]
    NotAdmissible { t: Complex64, radius: f64, dist: f64, delta: f64 },
    #[error("|T| = {abs_t:.6e} exceeds r1 = {r1:.6e}")]
    OutsideDisc { abs_t: f64, r1: f64 },
    #[error("inverse Fourier transform diverges: |Im z| = {im} ≥ β = {beta}")]
    FourierDivergence { im: f64, beta: f64 },
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("invalid m-grid: {0}")]
    BadGrid(String),
    #[error(transparent)]
    Special(#[from] SpecialError),
}

pub fn inv_sqrt_2pi() -> f64 {
    1.0 / (2.0 * PI).sqrt()
}

/// Uniform m-grid with an odd number of nodes, symmetric about 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MGrid {
    pub m_max: f64,
    pub n: usize,
}

impl MGrid {
    pub fn new(m_max: f64, n: usize) -> Result<Self, TransformError> {
        if n < 3 || n % 2 == 0 || !(m_max > 0.0) {
            return Err(TransformError::BadGrid(format!("need odd n ≥ 3 and M > 0, got n={n}, M={m_max}")));
        }
        Ok(MGrid { m_max, n })
    }

    pub fn h(&self) -> f64 {
        2.0 * self.m_max / (self.n - 1) as f64
    }

    pub fn center(&self) -> usize {
        self.n / 2
    }

    pub fn point(&self, i: usize) -> f64 {
        (i as f64 - self.center() as f64) * self.h()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.point(i)).collect()
    }

    /// Doubled density on the same interval.
    pub fn refined(&self) -> MGrid {
        MGrid { m_max: self.m_max, n: 2 * self.n - 1 }
    }

    fn check_len(&self, what: &str, len: usize) -> Result<(), TransformError> {
        if len != self.n {
            return Err(TransformError::GridMismatch(format!("{what} has {len} samples, grid has {}", self.n)));
        }
        Ok(())
    }
}

/// Quadrature controls shared by the ray and Fourier integrals.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct QuadratureSpec {
    /// Log-radius nodes per decade on rays.
    #[serde(default = "default_npd")]
    pub nodes_per_decade: f64,
    /// Fixed lower ray radius; automatic when absent.
    #[serde(default)]
    pub r_min: Option<f64>,
    /// Fixed upper ray radius; automatic when absent.
    #[serde(default)]
    pub r_max: Option<f64>,
    /// Fourier truncation M; defaults to 40/β.
    #[serde(default)]
    pub m_max: Option<f64>,
    #[serde(default = "default_m_nodes")]
    pub m_nodes: usize,
    /// Admissibility margin Δ of R_(γ,Δ).
    #[serde(default = "default_adm_delta")]
    pub admissibility_delta: f64,
}

fn default_npd() -> f64 {
    40.0
}
fn default_m_nodes() -> usize {
    121
}
fn default_adm_delta() -> f64 {
    0.5
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            nodes_per_decade: default_npd(),
            r_min: None,
            r_max: None,
            m_max: None,
            m_nodes: default_m_nodes(),
            admissibility_delta: default_adm_delta(),
        }
    }
}

impl QuadratureSpec {
    pub fn log_step(&self) -> f64 {
        std::f64::consts::LN_10 / self.nodes_per_decade
    }

    pub fn m_grid(&self, beta: f64) -> Result<MGrid, TransformError> {
        MGrid::new(self.m_max.unwrap_or(40.0 / beta), self.m_nodes)
    }
}

/// Infimum over r ≥ 0 of `|1 + e^{iγ} r / T|` and the radius attaining it.
pub fn ray_distance(t: Complex64, gamma: f64) -> (f64, f64) {
    let phi = gamma - t.arg();
    if phi.cos() >= 0.0 {
        (1.0, 0.0)
    } else {
        (phi.sin().abs(), -t.norm() * phi.cos())
    }
}

/// Membership of `T` in `R_(γ,Δ)`, and in `D(0, r1)` when `r1` is given.
pub fn check_admissible(t: Complex64, gamma: f64, delta: f64, r1: Option<f64>) -> Result<(), TransformError> {
    let (dist, radius) = ray_distance(t, gamma);
    if dist < delta {
        return Err(TransformError::NotAdmissible { t, radius, dist, delta });
    }
    if let Some(r1) = r1 {
        if t.norm() >= r1 {
            return Err(TransformError::OutsideDisc { abs_t: t.norm(), r1 });
        }
    }
    Ok(())
}

/// `q^{(1/2−α)/k} / 2`.
pub fn default_r1(q: f64, k: u32, alpha: f64) -> f64 {
    (q.ln() * (0.5 - alpha) / k as f64).exp() / 2.0
}

/// Quadrature weights on a geometric ray lattice `r_j = e^{s_j}` with uniform log-step:
/// `(k/log q) · h · 1/Θ(r_j e^{iγ}/T)`, so that `Σ_j w_j f(r_j e^{iγ})` approximates the transform.
pub fn lattice_laplace_weights(
    radii: &[f64],
    log_step: f64,
    gamma: f64,
    t: Complex64,
    q: f64,
    k: u32,
) -> Result<Vec<Complex64>, TransformError> {
    let pref = k as f64 / q.ln() * log_step;
    let dir = Complex64::from_polar(1.0, gamma);
    radii
        .iter()
        .map(|&r| {
            let th = theta_scaled(dir * r / t, q, k, 1e-16)?;
            Ok(th.recip().times(Complex64::new(pref, 0.0)))
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct LaplaceResult {
    pub value: Complex64,
    /// Difference against the half-resolution rule.
    pub error_estimate: f64,
    pub r_min: f64,
    pub r_max: f64,
    pub nodes: usize,
    /// Set when the integrand did not decay within the node budget.
    pub warning: Option<String>,
}

const MAX_SIDE_NODES: usize = 20000;

/// `(k/log q) ∫_{L_γ} w(u) / Θ(u/T) du/u` by trapezoid in `s = log|u|`.
pub fn q_laplace(
    w: impl Fn(Complex64) -> Complex64,
    t: Complex64,
    gamma: f64,
    q: f64,
    k: u32,
    quad: &QuadratureSpec,
) -> Result<LaplaceResult, TransformError> {
    check_admissible(t, gamma, quad.admissibility_delta, None)?;
    let h = quad.log_step();
    let dir = Complex64::from_polar(1.0, gamma);
    let integrand = |s: f64| -> Result<Complex64, TransformError> {
        let u = dir * s.exp();
        let th = theta_scaled(u / t, q, k, 1e-16)?;
        let v = w(u);
        if v == Complex64::new(0.0, 0.0) {
            return Ok(v);
        }
        Ok(th.recip().times(v))
    };
    let s0 = t.norm().ln();
    let mut samples: Vec<(i64, Complex64)> = vec![(0, integrand(s0)?)];
    let mut peak = samples[0].1.norm();
    let mut warning = None;
    for sign in [1i64, -1] {
        let fixed = if sign > 0 { quad.r_max.map(|r| r.ln()) } else { quad.r_min.map(|r| r.ln()) };
        let mut quiet = 0;
        let mut i = 0i64;
        loop {
            i += sign;
            let s = s0 + i as f64 * h;
            if let Some(b) = fixed {
                if (sign > 0 && s > b) || (sign < 0 && s < b) {
                    break;
                }
            }
            let v = integrand(s)?;
            peak = peak.max(v.norm());
            samples.push((i, v));
            if fixed.is_none() {
                quiet = if v.norm() <= 1e-17 * peak { quiet + 1 } else { 0 };
                if quiet >= 8 {
                    break;
                }
            }
            if i.unsigned_abs() as usize > MAX_SIDE_NODES {
                warning = Some(format!("integrand not decayed at r = {:.3e}; growth envelope likely violated", s.exp()));
                break;
            }
        }
    }
    let pref = k as f64 / q.ln();
    let full: Complex64 = samples.iter().map(|(_, v)| v).sum::<Complex64>() * h * pref;
    let half: Complex64 = samples.iter().filter(|(i, _)| i % 2 == 0).map(|(_, v)| v).sum::<Complex64>() * 2.0 * h * pref;
    let lo = samples.iter().map(|(i, _)| *i).min().unwrap();
    let hi = samples.iter().map(|(i, _)| *i).max().unwrap();
    Ok(LaplaceResult {
        value: full,
        error_estimate: (full - half).norm(),
        r_min: (s0 + lo as f64 * h).exp(),
        r_max: (s0 + hi as f64 * h).exp(),
        nodes: samples.len(),
        warning,
    })
}

/// Both sides of `T^σ σ^j_{q;T}(𝓛w)(T) = 𝓛[z^σ/(q^{1/k})^{σ(σ−1)/2} σ^{j−σ/k}_{q;z} w](T)`.
#[allow(clippy::too_many_arguments)]
pub fn q_laplace_operational_check(
    w: impl Fn(Complex64) -> Complex64,
    sigma: f64,
    j: f64,
    t: Complex64,
    gamma: f64,
    q: f64,
    k: u32,
    quad: &QuadratureSpec,
) -> Result<(Complex64, Complex64), TransformError> {
    let kf = k as f64;
    let lhs = t.powf(sigma) * q_laplace(&w, t * q.powf(j), gamma, q, k, quad)?.value;
    let norm = (q.ln() / kf * sigma * (sigma - 1.0) / 2.0).exp();
    let dil = q.powf(j - sigma / kf);
    let rhs = q_laplace(|z| z.powf(sigma) / norm * w(z * dil), t, gamma, q, k, quad)?.value;
    Ok((lhs, rhs))
}

#[derive(Debug, Clone, Copy)]
pub struct FourierResult {
    pub value: Complex64,
    /// Bound on the discarded tail `|m| > M` from the `e^{−β|m|}` envelope.
    pub tail_bound: f64,
}

/// `(2π)^{−1/2} ∫ f(m) e^{izm} dm` by the rectangle rule on the grid.
pub fn inverse_fourier(f: &[Complex64], z: Complex64, grid: &MGrid, beta: f64) -> Result<FourierResult, TransformError> {
    grid.check_len("f", f.len())?;
    if z.im.abs() >= beta {
        return Err(TransformError::FourierDivergence { im: z.im.abs(), beta });
    }
    let h = grid.h();
    let mut acc = Complex64::new(0.0, 0.0);
    let mut env = 0.0f64;
    for (i, v) in f.iter().enumerate() {
        let m = grid.point(i);
        acc += v * (Complex64::i() * z * m).exp();
        env = env.max(v.norm() * (beta * m.abs()).exp());
    }
    let gap = beta - z.im.abs();
    let tail = 2.0 * env * (-gap * grid.m_max).exp() / gap * inv_sqrt_2pi();
    Ok(FourierResult { value: acc * h * inv_sqrt_2pi(), tail_bound: tail })
}

/// Precomputed phases `(2π)^{−1/2} h e^{i z m_j}` for repeated transforms at one z.
pub fn fourier_row(z: Complex64, grid: &MGrid) -> Vec<Complex64> {
    let c = grid.h() * inv_sqrt_2pi();
    (0..grid.n).map(|i| (Complex64::i() * z * grid.point(i)).exp() * c).collect()
}

/// Linear interpolation of grid samples; zero outside `[−M, M]`.
pub fn interp(f: &[Complex64], grid: &MGrid, x: f64) -> Complex64 {
    let u = x / grid.h() + grid.center() as f64;
    if u < 0.0 || u > (grid.n - 1) as f64 {
        return Complex64::new(0.0, 0.0);
    }
    let i = (u.floor() as usize).min(grid.n - 2);
    let a = u - i as f64;
    f[i] * (1.0 - a) + f[i + 1] * a
}

/// `(f⋆g)(m) = (2π)^{−1/2} ∫ f(m−m₁) g(m₁) dm₁` on the grid.
pub fn convolve(f: &[Complex64], g: &[Complex64], grid: &MGrid) -> Result<Vec<Complex64>, TransformError> {
    grid.check_len("f", f.len())?;
    grid.check_len("g", g.len())?;
    let k = ConvKernel::from_fn(grid, inv_sqrt_2pi(), |d, _| interp(f, grid, d));
    Ok(k.apply(g))
}

/// Dense kernel `K[i][j] = scale · h · κ(m_i − m_j, m_j)` acting on m-samples.
#[derive(Debug, Clone)]
pub struct ConvKernel {
    n: usize,
    data: Vec<Complex64>,
}

impl ConvKernel {
    pub fn from_fn(grid: &MGrid, scale: f64, kappa: impl Fn(f64, f64) -> Complex64) -> Self {
        let n = grid.n;
        let h = grid.h();
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let d = (i as f64 - j as f64) * h;
                data.push(kappa(d, grid.point(j)) * scale * h);
            }
        }
        ConvKernel { n, data }
    }

    pub fn zero(n: usize) -> Self {
        ConvKernel { n, data: vec![Complex64::new(0.0, 0.0); n * n] }
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|c| c.re == 0.0 && c.im == 0.0)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn entry(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.n + j]
    }

    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.n];
        self.apply_add(x, Complex64::new(1.0, 0.0), &mut out);
        out
    }

    /// `out += c · K x`.
    pub fn apply_add(&self, x: &[Complex64], c: Complex64, out: &mut [Complex64]) {
        debug_assert_eq!(x.len(), self.n);
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.data[i * self.n..(i + 1) * self.n];
            let mut re = 0.0;
            let mut im = 0.0;
            for (a, b) in row.iter().zip(x) {
                re += a.re * b.re - a.im * b.im;
                im += a.re * b.im + a.im * b.re;
            }
            *o += c * Complex64::new(re, im);
        }
    }

    /// `K + c·L` entrywise.
    pub fn add_scaled(&mut self, other: &ConvKernel, c: Complex64) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += c * b;
        }
    }
}

#[derive(Debug, Clone)]
pub struct WeightedConvolution {
    /// Row-major `(τ-node, m-node)` samples.
    pub values: Vec<Complex64>,
    pub warnings: Vec<String>,
}

/// `(f ⋆^{b,h} g)(τ, m) = b(m) ∫ f(m−m₁) h(im₁) g(τ, m₁) dm₁` for every τ-row of `g`.
pub fn convolve_weighted(
    b: &[Complex64],
    h: &Poly,
    f: &[Complex64],
    g: &[Complex64],
    grid: &MGrid,
) -> Result<WeightedConvolution, TransformError> {
    grid.check_len("b", b.len())?;
    grid.check_len("f", f.len())?;
    if g.len() % grid.n != 0 {
        return Err(TransformError::GridMismatch(format!("g has {} samples, not a multiple of {}", g.len(), grid.n)));
    }
    let k = ConvKernel::from_fn(grid, 1.0, |d, m1| interp(f, grid, d) * h.eval_im(m1));
    let mut values = Vec::with_capacity(g.len());
    for row in g.chunks(grid.n) {
        let r = k.apply(row);
        values.extend(r.iter().zip(b).map(|(v, bb)| v * bb));
    }
    let mut warnings = Vec::new();
    let growth = |i: usize| b[i].norm() * (1.0 + grid.point(i).abs()).powi(h.degree() as i32);
    if growth(grid.n - 1) > 2.0 * growth(grid.center()).max(f64::MIN_POSITIVE) {
        warnings.push("b(m)·(1+|m|)^deg(h) grows toward the grid edge; the 1/|Q₁| envelope looks violated".into());
    }
    Ok(WeightedConvolution { values, warnings })
}
