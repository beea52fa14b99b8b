//! Maps the Borel fixed point back to `u = u₀ + u₁ log(εt)/log q`.
//!
//! `U_h(T, m)` is the lattice q-Laplace sum over the main line at `T = εt`; the physical value
//! is its rectangle-rule inverse Fourier transform in `m`. Because every lattice node carries its
//! own `1/Θ(r_j/T)` weight, the operational identities hold for the sums themselves, so the split
//! equations can be checked mode by mode before the inverse Fourier step.

use crate::borel_solver::{BorelFunction, BorelOperator};
use crate::problem_model::ProblemSpec;
use crate::special_functions::expq_norm_samples;
use crate::transforms::{check_admissible, default_r1, fourier_row, inv_sqrt_2pi, lattice_laplace_weights, ConvKernel, TransformError};
use num_complex::Complex64;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Mutex;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AssemblyError {
    #[error("εt = {et} lies on the branch cut (−∞, 0]")]
    Branch { et: Complex64 },
    #[error("|Im z| = {im} exceeds β′ = {beta_prime}")]
    Strip { im: f64, beta_prime: f64 },
    #[error("solution was computed at ε = {have}, asked for ε = {want}")]
    EpsMismatch { have: Complex64, want: Complex64 },
    #[error("component index {0} is not 0 or 1")]
    Component(usize),
    #[error(transparent)]
    Domain(#[from] TransformError),
}

/// Rejection width around `arg(εt) = π`.
pub const BRANCH_GUARD: f64 = 1e-9;

/// `(ω₀, ω₁)` at one ε together with the data needed to transform them back.
pub struct LogSolution {
    w: [BorelFunction; 2],
    q: f64,
    k: u32,
    beta_prime: f64,
    adm_delta: f64,
    r1: f64,
    cache: Mutex<HashMap<(u64, u64, usize), Vec<Complex64>>>,
}

impl LogSolution {
    pub fn new(spec: &ProblemSpec, w0: BorelFunction, w1: BorelFunction, adm_delta: f64) -> Self {
        LogSolution {
            w: [w0, w1],
            q: spec.q,
            k: spec.k,
            beta_prime: spec.beta_prime,
            adm_delta,
            r1: default_r1(spec.q, spec.k, spec.alpha),
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn eps(&self) -> Complex64 {
        self.w[0].eps()
    }

    pub fn direction(&self) -> f64 {
        self.w[0].grid().direction()
    }

    pub fn omega(&self, j: usize) -> &BorelFunction {
        &self.w[j]
    }

    fn check_eps(&self, eps: Complex64) -> Result<(), AssemblyError> {
        let have = self.eps();
        if (have - eps).norm() > 1e-14 * have.norm().max(1.0) {
            return Err(AssemblyError::EpsMismatch { have, want: eps });
        }
        Ok(())
    }

    fn check_t(&self, tt: Complex64) -> Result<(), AssemblyError> {
        if tt.norm() == 0.0 || (tt.arg().abs() - PI).abs() < BRANCH_GUARD {
            return Err(AssemblyError::Branch { et: tt });
        }
        check_admissible(tt, self.direction(), self.adm_delta, Some(self.r1))?;
        Ok(())
    }

    /// `U_j(T, m_i)` for all modes, from the main-line lattice.
    pub fn laplace_modes(&self, j: usize, tt: Complex64) -> Result<Vec<Complex64>, AssemblyError> {
        if j > 1 {
            return Err(AssemblyError::Component(j));
        }
        self.check_t(tt)?;
        let key = (tt.re.to_bits(), tt.im.to_bits(), j);
        if let Some(v) = self.cache.lock().unwrap().get(&key) {
            return Ok(v.clone());
        }
        let w = &self.w[j];
        let g = w.grid();
        let line = g.main_line();
        let radii = g.main_radii();
        let weights = lattice_laplace_weights(&radii, g.log_step(), line.angle, tt, self.q, self.k)?;
        let nm = g.m_points().len();
        let mut out = vec![Complex64::new(0.0, 0.0); nm];
        for (n, wt) in weights.iter().enumerate() {
            if wt.norm() == 0.0 {
                continue;
            }
            for (o, v) in out.iter_mut().zip(w.row(line.offset + n)) {
                *o += wt * v;
            }
        }
        self.cache.lock().unwrap().insert(key, out.clone());
        Ok(out)
    }

    fn fourier(&self, modes: &[Complex64], z: Complex64) -> Result<Complex64, AssemblyError> {
        if z.im.abs() > self.beta_prime {
            return Err(AssemblyError::Strip { im: z.im.abs(), beta_prime: self.beta_prime });
        }
        let row = fourier_row(z, self.w[0].grid().mgrid());
        Ok(row.iter().zip(modes).map(|(a, b)| a * b).sum())
    }
}

/// `u_j(t, z, ε)`.
pub fn evaluate_component(sol: &LogSolution, j: usize, t: Complex64, z: Complex64, eps: Complex64) -> Result<Complex64, AssemblyError> {
    sol.check_eps(eps)?;
    let modes = sol.laplace_modes(j, eps * t)?;
    sol.fourier(&modes, z)
}

/// `u₀ + u₁ log(εt)/log q` on the principal branch.
pub fn evaluate(sol: &LogSolution, t: Complex64, z: Complex64, eps: Complex64) -> Result<Complex64, AssemblyError> {
    let u0 = evaluate_component(sol, 0, t, z, eps)?;
    let u1 = evaluate_component(sol, 1, t, z, eps)?;
    Ok(u0 + u1 * (eps * t).ln() / sol.q.ln())
}

/// Component form of the formal monodromy: `(u₀ + (2πi/log q) u₁, u₁)`.
pub fn monodromy(u0: Complex64, u1: Complex64, q: f64) -> (Complex64, Complex64) {
    (u0 + Complex64::new(0.0, 2.0 * PI / q.ln()) * u1, u1)
}

/// Recovers `(u₀, u₁)` from `u` and `γ*u` at a point with logarithm `log(εt)`.
pub fn extract_components(u: Complex64, gamma_u: Complex64, log_et: Complex64, q: f64) -> (Complex64, Complex64) {
    let jump = gamma_u - u;
    let two_pi_i = Complex64::new(0.0, 2.0 * PI);
    (u - jump / two_pi_i * log_et, jump * q.ln() / two_pi_i)
}

/// Max over both equations of the `Exp^q` norm of the undivided Borel defect.
pub fn residual_borel(op: &BorelOperator, w0: &BorelFunction, w1: &BorelFunction) -> f64 {
    let (d0, d1) = op.undivided_defect(w0, w1);
    let g = d0.grid();
    let n = |f: &BorelFunction| expq_norm_samples(g.taus(), g.m_points(), f.values(), &g.weight_params());
    n(&d0).max(n(&d1))
}

/// Physical forcing `F_h(T, m) = Σ F̃_{h,n}(m, ε) (q^{1/k})^{n(n−1)/2} T^n`.
pub fn forcing_physical(spec: &ProblemSpec, h: usize, tt: Complex64, m: f64, eps: Complex64) -> Complex64 {
    spec.forcing.lambda[h]
        .iter()
        .map(|(n, s)| s.eval(m, eps) * spec.q_tri(*n) * tt.powu(*n))
        .sum()
}

/// Max over points of `|LHS − RHS|` for both split equations, each side assembled mode by mode
/// from transforms re-evaluated at the dilated arguments and then inverted at `z`.
pub fn residual_physical(
    sol: &LogSolution,
    spec: &ProblemSpec,
    points: &[(Complex64, Complex64, Complex64)],
) -> Result<f64, AssemblyError> {
    let g = sol.w[0].grid();
    let mg = g.mgrid();
    let ms = g.m_points();
    let mut worst = 0.0f64;
    for &(t, z, eps) in points {
        sol.check_eps(eps)?;
        let tt = eps * t;
        let kl: Vec<ConvKernel> = spec
            .terms
            .iter()
            .map(|term| ConvKernel::from_fn(mg, inv_sqrt_2pi(), |d, m1| term.c.eval(d, eps) * term.r.eval_im(m1)))
            .collect();
        let cb = &spec.coeffs.b;
        let kb = |j: usize, h: usize| {
            (!cb[j][h].is_zero()).then(|| ConvKernel::from_fn(mg, inv_sqrt_2pi(), |d, _| cb[j][h].eval(d, eps)))
        };
        let kb = [[kb(0, 0), kb(0, 1)], [kb(1, 0), kb(1, 1)]];
        let here = [sol.laplace_modes(0, tt)?, sol.laplace_modes(1, tt)?];
        let ttd = tt * spec.q.powf(spec.d_d as f64 / spec.kf());
        let dd = [sol.laplace_modes(0, ttd)?, sol.laplace_modes(1, ttd)?];
        let mut dil = Vec::with_capacity(spec.terms.len());
        for term in &spec.terms {
            let tl = tt * spec.q.powf(term.delta.to_f64());
            dil.push([sol.laplace_modes(0, tl)?, sol.laplace_modes(1, tl)?]);
        }
        let ddk = spec.d_d as f64 / spec.kf();
        for h in 0..2 {
            let couple = if h == 0 { 1.0 } else { 0.0 };
            let mut defect: Vec<Complex64> = ms
                .iter()
                .enumerate()
                .map(|(i, &m)| {
                    let lhs = spec.q_poly.eval_im(m) * here[h][i];
                    let dterm = tt.powu(spec.d_d) * spec.r_d.eval_im(m) * (dd[h][i] + couple * ddk * dd[1][i]);
                    lhs - dterm - forcing_physical(spec, h, tt, m, eps)
                })
                .collect();
            for (l, term) in spec.terms.iter().enumerate() {
                let arg: Vec<Complex64> = (0..ms.len()).map(|i| dil[l][h][i] + couple * term.delta.to_f64() * dil[l][1][i]).collect();
                let c = -eps.powi(term.big_delta as i32 - term.d as i32) * tt.powu(term.d);
                kl[l].apply_add(&arg, c, &mut defect);
            }
            for j in 0..2 {
                if let Some(k) = &kb[j][h] {
                    k.apply_add(&here[j], Complex64::new(-1.0, 0.0), &mut defect);
                }
            }
            worst = worst.max(sol.fourier(&defect, z)?.norm());
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::borel_solver::{solve, BorelGrid, SolverConfig};
    use crate::geometry::{GeometryConfig, SectorGeometry};
    use crate::problem_model::fixtures::example_spec;
    use crate::problem_model::{default_m_grid, validate_assumptions, FourierSymbol, Poly};
    use crate::transforms::{inverse_fourier, QuadratureSpec};
    use proptest::prelude::*;
    use std::sync::Arc;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn grid_for(spec: &ProblemSpec) -> Arc<BorelGrid> {
        let mg = default_m_grid();
        let rep = validate_assumptions(spec, &mg).unwrap();
        let gc = GeometryConfig { constants_aperture: Some(0.0), ..Default::default() };
        let geom = SectorGeometry::build(spec, &rep, &gc, &mg).unwrap();
        let quad = QuadratureSpec { m_nodes: 41, ..Default::default() };
        Arc::new(BorelGrid::build(spec, &geom, &quad, &SolverConfig { disc_angles: 2, ..Default::default() }).unwrap())
    }

    fn solved(spec: &ProblemSpec, eps: Complex64) -> (BorelOperator, LogSolution) {
        let g = grid_for(spec);
        let op = BorelOperator::new(spec, g, eps).unwrap();
        let (w0, w1, _) = solve(spec, &op, &SolverConfig::default()).unwrap();
        let sol = LogSolution::new(spec, w0, w1, 0.5);
        (op, sol)
    }

    #[test]
    fn zero_omega_gives_zero() {
        let spec = example_spec();
        let g = grid_for(&spec);
        let eps = c(0.004, 0.0);
        let z = BorelFunction::zeros(g.clone(), eps);
        let sol = LogSolution::new(&spec, z.clone(), z, 0.5);
        assert_eq!(evaluate(&sol, c(0.3, 0.01), c(0.2, 0.0), eps).unwrap(), c(0.0, 0.0));
    }

    #[test]
    fn monomial_in_tau() {
        let spec = example_spec();
        let g = grid_for(&spec);
        let eps = c(0.004, 0.001);
        let gm = |m: f64| c((-m * m).exp(), 0.3 * m * (-m * m).exp());
        let w = BorelFunction::from_fn(g.clone(), eps, |u, m| u * gm(m));
        let z0 = BorelFunction::zeros(g.clone(), eps);
        let sol = LogSolution::new(&spec, w, z0, 0.5);
        let t = c(0.4, 0.05);
        let z = c(0.7, 0.1);
        let got = evaluate_component(&sol, 0, t, z, eps).unwrap();
        let gv: Vec<Complex64> = g.m_points().iter().map(|&m| gm(m)).collect();
        let expect = eps * t * inverse_fourier(&gv, z, g.mgrid(), spec.beta).unwrap().value;
        assert!((got - expect).norm() < 1e-10 * expect.norm(), "{got} vs {expect}");
    }

    #[test]
    fn log_term_vanishes_at_unit_argument() {
        let mut spec = example_spec();
        spec.q = 2.0;
        let g = grid_for(&spec);
        let eps = c(0.3, 0.0);
        let w = BorelFunction::from_fn(g.clone(), eps, |u, m| (u + 1.0) * (-m * m).exp());
        let mut sol = LogSolution::new(&spec, w.clone(), w, 0.5);
        sol.r1 = 10.0;
        let t = c(1.0 / 0.3, 0.0);
        let u = evaluate(&sol, t, c(0.1, 0.0), eps).unwrap();
        let u0 = evaluate_component(&sol, 0, t, c(0.1, 0.0), eps).unwrap();
        assert!((u - u0).norm() <= 1e-15 * u0.norm());
    }

    #[test]
    fn domain_errors() {
        let spec = example_spec();
        let g = grid_for(&spec);
        let eps = c(0.004, 0.0);
        let z = BorelFunction::zeros(g.clone(), eps);
        let sol = LogSolution::new(&spec, z.clone(), z, 0.5);
        assert!(matches!(evaluate(&sol, c(-0.3, 0.0), c(0.0, 0.0), eps), Err(AssemblyError::Branch { .. })));
        assert!(matches!(evaluate(&sol, c(0.3, 0.0), c(0.0, 5.0), eps), Err(AssemblyError::Strip { .. })));
        assert!(matches!(evaluate(&sol, c(0.3, 0.0), c(0.0, 0.0), c(0.003, 0.0)), Err(AssemblyError::EpsMismatch { .. })));
        assert!(matches!(evaluate(&sol, c(-0.3, 0.05), c(0.0, 0.0), eps), Err(AssemblyError::Domain(_))));
        assert!(matches!(evaluate(&sol, c(300.0, 0.0), c(0.0, 0.0), eps), Err(AssemblyError::Domain(_))));
    }

    #[test]
    fn forcing_only_matches_direct_construction() {
        let mut spec = example_spec();
        spec.terms.clear();
        spec.coeffs.b = Default::default();
        spec.d_d = 0;
        spec.r_d = Poly::real(&[-1.0]);
        let eps = c(0.004, 0.0);
        let (_, sol) = solved(&spec, eps);
        let g = sol.omega(0).grid();
        for &(t, z) in &[(c(0.3, 0.0), c(0.2, 0.0)), (c(0.2, 0.02), c(-0.5, 0.3))] {
            for h in 0..2 {
                let modes: Vec<Complex64> = g
                    .m_points()
                    .iter()
                    .map(|&m| forcing_physical(&spec, h, eps * t, m, eps) / spec.p_m(c(0.0, 0.0), m))
                    .collect();
                let expect = inverse_fourier(&modes, z, g.mgrid(), spec.beta).unwrap().value;
                let got = evaluate_component(&sol, h, t, z, eps).unwrap();
                assert!((got - expect).norm() < 1e-10 * expect.norm().max(1e-12), "h={h}: {got} vs {expect}");
            }
        }
    }

    #[test]
    fn example_residuals() {
        let spec = example_spec();
        let eps = c(0.004, 0.0);
        let (op, sol) = solved(&spec, eps);
        let qmax = sol.omega(0).grid().m_points().iter().map(|&m| spec.q_poly.eval_im(m).norm()).fold(0.0, f64::max);
        let rb = residual_borel(&op, sol.omega(0), sol.omega(1));
        assert!(rb <= 10.0 * 1e-10 * qmax, "{rb}");
        let pts: Vec<_> = [(0.3, 0.0, 0.0), (0.4, 0.02, 0.5), (0.2, -0.03, -1.0), (0.45, 0.0, 2.0), (0.35, 0.04, 0.1)]
            .iter()
            .map(|&(tr, ti, z)| (c(tr, ti), c(z, 0.0), eps))
            .collect();
        let rp = residual_physical(&sol, &spec, &pts).unwrap();
        assert!(rp <= 1e-6, "{rp}");

        // Linear sensitivity: perturbing ω₁ raises the residual proportionally.
        let g = sol.omega(1).grid_arc().clone();
        let bump = |s: f64| {
            let vals: Vec<Complex64> = sol
                .omega(1)
                .values()
                .iter()
                .zip(g.taus().iter().flat_map(|t| g.m_points().iter().map(move |&m| (*t, m))))
                .map(|(v, (t, m))| v + s * (-m * m).exp() * (t + 1.0))
                .collect();
            LogSolution::new(&spec, sol.omega(0).clone(), BorelFunction::new(g.clone(), vals, eps).unwrap(), 0.5)
        };
        let r3 = residual_physical(&bump(1e-3), &spec, &pts).unwrap();
        let r2 = residual_physical(&bump(2e-3), &spec, &pts).unwrap();
        assert!(r3 > 1e-5 && (r2 / r3 - 2.0).abs() < 0.05, "{r3} {r2}");
    }

    #[test]
    fn zero_problem_has_zero_residuals() {
        let mut spec = example_spec();
        spec.forcing.lambda = [Vec::new(), Vec::new()];
        spec.coeffs.b = Default::default();
        spec.terms[0].c = FourierSymbol::zero();
        let eps = c(0.004, 0.0);
        let (op, sol) = solved(&spec, eps);
        assert_eq!(residual_borel(&op, sol.omega(0), sol.omega(1)), 0.0);
        assert_eq!(residual_physical(&sol, &spec, &[(c(0.3, 0.0), c(0.0, 0.0), eps)]).unwrap(), 0.0);
    }

    #[test]
    fn monodromy_examples() {
        let q = 2.0;
        let u0 = c(0.3, -1.0);
        assert_eq!(monodromy(u0, c(0.0, 0.0), q), (u0, c(0.0, 0.0)));
        let unit = c(q.ln(), 0.0) / c(0.0, 2.0 * PI);
        let (a, b) = monodromy(c(0.0, 0.0), unit, q);
        assert!((a - c(1.0, 0.0)).norm() < 1e-15 && b == unit);
    }

    proptest! {
        #[test]
        fn monodromy_linear_and_invertible(
            a in -3.0f64..3.0, b in -3.0f64..3.0,
            x0 in -2.0f64..2.0, x1 in -2.0f64..2.0, y0 in -2.0f64..2.0, y1 in -2.0f64..2.0,
            lr in -3.0f64..1.0, la in -3.0f64..3.0,
        ) {
            let q = 3.0;
            let (x0, x1, y0, y1) = (c(x0, y1), c(x1, x0), c(y0, x1), c(y1, y0));
            let lhs = monodromy(x0 * a + y0 * b, x1 * a + y1 * b, q);
            let (p0, p1) = monodromy(x0, x1, q);
            let (r0, r1) = monodromy(y0, y1, q);
            prop_assert!((lhs.0 - (p0 * a + r0 * b)).norm() < 1e-12);
            prop_assert!((lhs.1 - (p1 * a + r1 * b)).norm() < 1e-12);
            let log_et = c(lr, la);
            let u = x0 + x1 * log_et / q.ln();
            let gu = monodromy(x0, x1, q).0 + x1 * log_et / q.ln();
            let (e0, e1) = extract_components(u, gu, log_et, q);
            prop_assert!((e0 - x0).norm() < 1e-12 && (e1 - x1).norm() < 1e-12);
        }
    }
}
