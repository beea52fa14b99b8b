//! Jacobi Theta of order k, its lower-bound certificate, and the weighted
//! norms `E_(β,μ)` and `Exp^q_(k,β,μ,α,ρ)` estimated on grids.

use crate::borel_solver::BorelFunction;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpecialError {
    #[error("theta is undefined at z = 0")]
    ThetaAtZero,
    #[error("lower-bound certificate inapplicable: |1 + z q^(m/k)| ≤ Δ at m = {m}")]
    CertificateInapplicable { m: i64 },
    #[error("weight parameters differ from the grid's geometry ({0})")]
    ParamsMismatch(String),
}

/// Complex number stored as `mant · e^{log_scale}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scaled {
    pub mant: Complex64,
    pub log_scale: f64,
}

impl Scaled {
    pub fn to_complex(&self) -> Complex64 {
        self.mant * self.log_scale.exp()
    }

    pub fn ln_abs(&self) -> f64 {
        self.mant.norm().ln() + self.log_scale
    }

    pub fn recip(&self) -> Scaled {
        Scaled { mant: self.mant.inv(), log_scale: -self.log_scale }
    }

    /// `self · c`, returned unscaled (underflows to 0 gracefully).
    pub fn times(&self, c: Complex64) -> Complex64 {
        c * self.mant * self.log_scale.exp()
    }
}

/// Theta value with the truncation window that produced it.
#[derive(Debug, Clone, Copy)]
pub struct ThetaEval {
    pub value: Scaled,
    /// Log of the largest term modulus (the local scale of the series).
    pub ln_local_scale: f64,
    pub p_lo: i64,
    pub p_hi: i64,
}

const MAX_TERMS: i64 = 4000;

/// `Θ_{q^{1/k}}(z) = Σ_p q^{−p(p−1)/(2k)} z^p`, summed outward from the dominant index.
pub fn theta_eval(z: Complex64, q: f64, k: u32, tol: f64) -> Result<ThetaEval, SpecialError> {
    if z.norm() == 0.0 {
        return Err(SpecialError::ThetaAtZero);
    }
    let lq_k = q.ln() / k as f64;
    let lz = z.norm().ln();
    let az = z.arg();
    let g = |p: i64| -> f64 {
        let pf = p as f64;
        -pf * (pf - 1.0) * lq_k / 2.0 + pf * lz
    };
    let p0 = (0.5 + lz / lq_k).round() as i64;
    let a = g(p0);
    let term = |p: i64| Complex64::from_polar((g(p) - a).exp(), p as f64 * az);

    let mut sum = term(p0);
    let floor = 1e-18;
    let mut p_hi = p0;
    loop {
        p_hi += 1;
        let t = term(p_hi);
        sum += t;
        let r = (-(p_hi as f64) * lq_k + lz).exp();
        let tail = if r < 1.0 { t.norm() * r / (1.0 - r) } else { f64::INFINITY };
        if tail < tol * sum.norm() || tail < floor || p_hi - p0 > MAX_TERMS {
            break;
        }
    }
    let mut p_lo = p0;
    loop {
        p_lo -= 1;
        let t = term(p_lo);
        sum += t;
        let r = ((p_lo as f64 - 1.0) * lq_k - lz).exp();
        let tail = if r < 1.0 { t.norm() * r / (1.0 - r) } else { f64::INFINITY };
        if tail < tol * sum.norm() || tail < floor || p0 - p_lo > MAX_TERMS {
            break;
        }
    }
    Ok(ThetaEval { value: Scaled { mant: sum, log_scale: a }, ln_local_scale: a, p_lo, p_hi })
}

pub fn theta_scaled(z: Complex64, q: f64, k: u32, tol: f64) -> Result<Scaled, SpecialError> {
    theta_eval(z, q, k, tol).map(|e| e.value)
}

/// Unscaled theta; may overflow to infinity for large `|log|z||`.
pub fn theta(z: Complex64, q: f64, k: u32, tol: f64) -> Result<Complex64, SpecialError> {
    theta_scaled(z, q, k, tol).map(|s| s.to_complex())
}

/// `|Θ(z)| / (Δ exp((k/2) log²|z| / log q) |z|^{1/2})`.
pub fn theta_bound_margin(z: Complex64, q: f64, k: u32, delta: f64) -> Result<f64, SpecialError> {
    if z.norm() == 0.0 {
        return Err(SpecialError::ThetaAtZero);
    }
    let lq_k = q.ln() / k as f64;
    let lz = z.norm().ln();
    // |z q^{m/k}| must lie in [1−Δ, 1+Δ] for the condition to bind.
    let hi = (((1.0 + delta).ln() - lz) / lq_k).floor() as i64;
    if delta >= 1.0 {
        return Err(SpecialError::CertificateInapplicable { m: hi - MAX_TERMS });
    }
    let lo = (((1.0 - delta).ln() - lz) / lq_k).ceil() as i64;
    for m in lo..=hi {
        let w = z * (m as f64 * lq_k).exp();
        if (Complex64::new(1.0, 0.0) + w).norm() <= delta {
            return Err(SpecialError::CertificateInapplicable { m });
        }
    }
    let th = theta_scaled(z, q, k, 1e-15)?;
    let ln_env = delta.ln() + lz * lz / (2.0 * lq_k) + 0.5 * lz;
    Ok((th.ln_abs() - ln_env).exp())
}

/// `sup_m (1+|m|)^μ e^{β|m|} |f(m)|` over grid samples.
pub fn e_norm(values: &[Complex64], m_grid: &[f64], beta: f64, mu: f64) -> f64 {
    assert_eq!(values.len(), m_grid.len());
    values
        .iter()
        .zip(m_grid)
        .map(|(v, &m)| e_weight(m, beta, mu) * v.norm())
        .fold(0.0, f64::max)
}

/// `E_(β,μ)` norm of an evaluable map on a grid.
pub fn e_norm_fn(f: impl Fn(f64) -> Complex64, m_grid: &[f64], beta: f64, mu: f64) -> f64 {
    m_grid.iter().map(|&m| e_weight(m, beta, mu) * f(m).norm()).fold(0.0, f64::max)
}

pub fn e_weight(m: f64, beta: f64, mu: f64) -> f64 {
    (1.0 + m.abs()).powf(mu) * (beta * m.abs()).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightParams {
    pub k: u32,
    pub q: f64,
    pub beta: f64,
    pub mu: f64,
    pub alpha: f64,
    pub rho: f64,
    pub delta: f64,
}

impl WeightParams {
    /// Log of the τ-part of the inverse weight, `(k/2)log²|τ+δ|/log q + α log|τ+δ|`.
    pub fn ln_tau_envelope(&self, tau: Complex64) -> f64 {
        let l = (tau + self.delta).norm().ln();
        self.k as f64 / (2.0 * self.q.ln()) * l * l + self.alpha * l
    }

    /// Full weight `(1+|m|)^μ e^{β|m|} exp(−(k/2)log²|τ+δ|/log q − α log|τ+δ|)`.
    pub fn weight(&self, tau: Complex64, m: f64) -> f64 {
        e_weight(m, self.beta, self.mu) * (-self.ln_tau_envelope(tau)).exp()
    }
}

/// Grid sup of the `Exp^q` weighted modulus for samples `values[node * n_m + j]`.
pub fn expq_norm_samples(taus: &[Complex64], m_grid: &[f64], values: &[Complex64], p: &WeightParams) -> f64 {
    assert_eq!(values.len(), taus.len() * m_grid.len());
    let em: Vec<f64> = m_grid.iter().map(|&m| e_weight(m, p.beta, p.mu)).collect();
    let mut best = 0.0f64;
    for (i, tau) in taus.iter().enumerate() {
        let wt = (-p.ln_tau_envelope(*tau)).exp();
        let row = &values[i * m_grid.len()..(i + 1) * m_grid.len()];
        for (v, e) in row.iter().zip(&em) {
            best = best.max(v.norm() * e * wt);
        }
    }
    best
}

/// `Exp^q` norm of a Borel function; the parameters must match its geometry.
pub fn expq_norm(w: &BorelFunction, params: &WeightParams) -> Result<f64, SpecialError> {
    let g = w.grid();
    let own = g.weight_params();
    if (own.delta - params.delta).abs() > 1e-12 || (own.rho - params.rho).abs() > 1e-12 {
        return Err(SpecialError::ParamsMismatch(format!(
            "grid δ={}, ρ={}; given δ={}, ρ={}",
            own.delta, own.rho, params.delta, params.rho
        )));
    }
    Ok(expq_norm_samples(g.taus(), g.m_points(), w.values(), params))
}

/// Per-node weighted values `(node, m index, weighted modulus)` for CSV norm reports.
pub fn expq_norm_report(w: &BorelFunction, params: &WeightParams) -> Vec<(usize, usize, f64)> {
    let g = w.grid();
    let nm = g.m_points().len();
    let mut out = Vec::with_capacity(w.values().len());
    for (i, tau) in g.taus().iter().enumerate() {
        for (j, &m) in g.m_points().iter().enumerate() {
            out.push((i, j, w.values()[i * nm + j].norm() * params.weight(*tau, m)));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// Independent oracle: brute-force symmetric sum over |p| ≤ 200.
    fn theta_bruteforce(z: Complex64, q: f64, k: u32) -> Complex64 {
        let mut s = c(0.0, 0.0);
        for p in -200i64..=200 {
            let pf = p as f64;
            let ln = -pf * (pf - 1.0) * q.ln() / (2.0 * k as f64);
            s += z.powi(p as i32) * ln.exp();
        }
        s
    }

    #[test]
    fn zeros_at_negative_q_powers() {
        let (q, k) = (2.0f64, 1u32);
        for m in -2..=2 {
            let z = c(-(q as f64).powf(m as f64 / k as f64), 0.0);
            let e = theta_eval(z, q, k, 1e-15).unwrap();
            assert!(e.value.mant.norm() < 1e-13, "m={m}: {}", e.value.mant.norm());
        }
    }

    #[test]
    fn matches_bruteforce_oracle() {
        for &(q, k) in &[(2.0, 1u32), (2.0, 3), (5.0, 2)] {
            for &z in &[c(1.0, 1.0), c(0.3, -0.2), c(-2.5, 0.7), c(0.0, 1.0)] {
                let a = theta(z, q, k, 1e-16).unwrap();
                let b = theta_bruteforce(z, q, k);
                assert!((a - b).norm() <= 1e-13 * b.norm().max(1.0), "{z} {a} {b}");
            }
        }
    }

    #[test]
    fn functional_identity_example() {
        let (q, k) = (2.0f64, 3u32);
        let z = c(1.0, 1.0);
        let qk = q.powf(1.0 / k as f64);
        let lhs = theta(z * qk, q, k, 1e-16).unwrap();
        let rhs = z * qk * theta(z, q, k, 1e-16).unwrap();
        assert!((lhs - rhs).norm() < 1e-13 * rhs.norm());
    }

    #[test]
    fn real_on_positive_axis() {
        let v = theta(c(0.7, 0.0), 3.0, 2, 1e-15).unwrap();
        assert_eq!(v.im, 0.0);
        assert!(v.re > 0.0);
    }

    #[test]
    fn zero_argument_is_domain_error() {
        assert_eq!(theta(c(0.0, 0.0), 2.0, 1, 1e-12), Err(SpecialError::ThetaAtZero));
    }

    #[test]
    fn large_arguments_stay_finite_in_log_space() {
        let s = theta_scaled(c(1e80, 1e80), 2.0, 13, 1e-14).unwrap();
        assert!(s.log_scale.is_finite() && s.mant.norm().is_finite());
        assert!(s.log_scale > 700.0);
        assert!(s.recip().to_complex().norm() == 0.0 || s.recip().to_complex().norm() < 1e-300);
    }

    #[test]
    fn margin_positive_on_imaginary_ray() {
        for i in 0..100 {
            let r = 10f64.powf(-3.0 + 6.0 * i as f64 / 99.0);
            let m = theta_bound_margin(c(0.0, r), 2.0, 1, 0.5).unwrap();
            assert!(m > 0.0);
        }
    }

    #[test]
    fn margin_inapplicable_at_zero_of_theta() {
        let z = c(-4.0, 0.0);
        assert_eq!(theta_bound_margin(z, 2.0, 1, 0.4), Err(SpecialError::CertificateInapplicable { m: -2 }));
    }

    #[test]
    fn margin_scales_inversely_with_delta() {
        let z = c(0.3, 1.7);
        let a = theta_bound_margin(z, 2.0, 2, 0.4).unwrap();
        let b = theta_bound_margin(z, 2.0, 2, 0.2).unwrap();
        assert!((b / a - 2.0).abs() < 1e-12);
    }

    #[test]
    fn e_norm_examples() {
        let grid: Vec<f64> = (0..201).map(|i| -10.0 + 0.1 * i as f64).collect();
        let (beta, mu) = (1.5, 2.2);
        let f: Vec<Complex64> = grid.iter().map(|&m| c((-beta * m.abs()).exp() * (1.0 + m.abs()).powf(-mu), 0.0)).collect();
        assert!((e_norm(&f, &grid, beta, mu) - 1.0).abs() < 1e-12);
        let g: Vec<Complex64> = f.iter().map(|v| v * 3.0).collect();
        assert!((e_norm(&g, &grid, beta, mu) - 3.0).abs() < 1e-12);
        assert_eq!(e_norm(&vec![c(0.0, 0.0); grid.len()], &grid, beta, mu), 0.0);
    }

    #[test]
    fn expq_weight_cancels() {
        let p = WeightParams { k: 13, q: 2.0, beta: 2.0, mu: 2.5, alpha: 0.1, rho: 0.2, delta: 1.3 };
        let taus = [c(0.1, 0.0), c(3.0, 0.5), c(0.0, 0.15)];
        let grid = [-2.0, 0.0, 1.5];
        let mut vals = Vec::new();
        for t in &taus {
            for &m in &grid {
                vals.push(c(1.0 / p.weight(*t, m), 0.0) * 2.5);
            }
        }
        assert!((expq_norm_samples(&taus, &grid, &vals, &p) - 2.5).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn truncation_is_stable(re in -3.0f64..3.0, im in -3.0f64..3.0) {
            prop_assume!(re.abs() + im.abs() > 1e-3);
            let z = c(re, im);
            let a = theta_scaled(z, 2.0, 2, 1e-14).unwrap();
            let b = theta_scaled(z, 2.0, 2, 1e-16).unwrap();
            // Measured in units of the largest series term.
            prop_assert!((a.mant - b.mant).norm() <= 1e-13);
        }

        #[test]
        fn functional_identity_on_samples(lr in -4.0f64..4.0, arg in -3.0f64..3.0, k in 1u32..5) {
            let z = Complex64::from_polar(lr.exp(), arg);
            let q = 3.0f64;
            let qk = q.powf(1.0 / k as f64);
            let lhs = theta_scaled(z * qk, q, k, 1e-16).unwrap();
            let rhs = theta_scaled(z, q, k, 1e-16).unwrap();
            let lhs_c = lhs.mant * (lhs.log_scale - rhs.log_scale).exp();
            let rhs_c = rhs.mant * z * qk;
            let scale = (lhs.log_scale.max(rhs.log_scale + (z * qk).norm().ln()) - rhs.log_scale).exp();
            prop_assert!((lhs_c - rhs_c).norm() <= 1e-12 * scale.max(1e-300));
        }

        #[test]
        fn norms_are_homogeneous_and_subadditive(a in -3.0f64..3.0, s in 0.0f64..5.0) {
            let grid: Vec<f64> = (0..41).map(|i| -4.0 + 0.2 * i as f64).collect();
            let f: Vec<Complex64> = grid.iter().map(|&m| c((m * a).sin(), m.cos()) * (-3.0 * m.abs()).exp()).collect();
            let g: Vec<Complex64> = grid.iter().map(|&m| c(1.0, a) * (-2.5 * m.abs()).exp()).collect();
            let n = |v: &[Complex64]| e_norm(v, &grid, 2.0, 1.5);
            let fs: Vec<Complex64> = f.iter().map(|v| v * s).collect();
            prop_assert!((n(&fs) - s * n(&f)).abs() <= 1e-12 * (1.0 + s * n(&f)));
            let sum: Vec<Complex64> = f.iter().zip(&g).map(|(x, y)| x + y).collect();
            prop_assert!(n(&sum) <= n(&f) + n(&g) + 1e-12);
        }
    }
}
