//! Formal series in ε, remainder envelopes and the decay of sector differences.
//!
//! Coefficients are stored in plain form: `u_h ≈ Σ_n ε^n Σ_p a_{h,n,p}(m) t^p` on the Fourier
//! side, with `ũ_{h,n} = n! a_{h,n}`. Each order is a linear problem in the order-n unknowns
//! whose only self-coupling is through the ε⁰ parts of the `b` convolutions.

use crate::problem_model::{FourierSymbol, ProblemSpec};
use crate::solution_assembly::{evaluate_component, AssemblyError, LogSolution};
use crate::transforms::{fourier_row, inv_sqrt_2pi, ConvKernel, MGrid};
use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FormalError {
    #[error("order {order}: coefficient iteration did not converge (update {update:e}); smallness violated")]
    Smallness { order: usize, update: f64 },
    #[error("term {0} has Δ_ℓ = 0; order-n unknowns would enter through a dilation")]
    ZeroDelta(usize),
    #[error("need at least {need} samples spanning {decades} decades, have {have} spanning {span:.2}")]
    TooFewSamples { need: usize, decades: f64, have: usize, span: f64 },
    #[error("least-squares system is singular")]
    Singular,
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
}

fn zeros(n: usize) -> Vec<Complex64> {
    vec![Complex64::new(0.0, 0.0); n]
}

/// How the per-order b-coupling is resolved.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrderSolve {
    Coupled,
    /// ω₁ first, then ω₀; requires `b₀₁ ≡ 0`.
    Triangular,
}

#[derive(Debug, Clone)]
pub struct FormalSeries {
    order: usize,
    mgrid: MGrid,
    /// `a[n][h][p]` over the m-grid.
    a: Vec<[Vec<Vec<Complex64>>; 2]>,
    tol: f64,
}

impl FormalSeries {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn mgrid(&self) -> &MGrid {
        &self.mgrid
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    /// Plain coefficient of `ε^n t^p` in component h.
    pub fn plain(&self, h: usize, n: usize, p: usize) -> &[Complex64] {
        &self.a[n][h][p]
    }

    pub fn plain_mut(&mut self, h: usize, n: usize, p: usize) -> &mut [Complex64] {
        &mut self.a[n][h][p]
    }

    pub fn degree(&self, n: usize) -> usize {
        self.a[n][0].len() - 1
    }

    /// `Σ_p a_{h,n,p} t^p` per mode.
    pub fn plain_modes(&self, h: usize, n: usize, t: Complex64) -> Vec<Complex64> {
        let mut out = zeros(self.mgrid.n);
        let mut tp = Complex64::new(1.0, 0.0);
        for c in &self.a[n][h] {
            out.iter_mut().zip(c).for_each(|(o, v)| *o += tp * v);
            tp *= t;
        }
        out
    }

    fn fourier(&self, modes: &[Complex64], z: Complex64) -> Complex64 {
        fourier_row(z, &self.mgrid).iter().zip(modes).map(|(a, b)| a * b).sum()
    }

    /// `ũ_{h,n}(t, z) = n! Σ_p a_{h,n,p} t^p` in physical space.
    pub fn coefficient(&self, h: usize, n: usize, t: Complex64, z: Complex64) -> Complex64 {
        let fact: f64 = (1..=n).map(|i| i as f64).product();
        self.fourier(&self.plain_modes(h, n, t), z) * fact
    }

    /// Partial sum `Σ_{n≤N} ũ_{h,n}(t,z) ε^n / n!`.
    pub fn partial_sum(&self, h: usize, n_max: usize, t: Complex64, z: Complex64, eps: Complex64) -> Complex64 {
        let mut modes = zeros(self.mgrid.n);
        let mut en = Complex64::new(1.0, 0.0);
        for n in 0..=n_max.min(self.order) {
            for (o, v) in modes.iter_mut().zip(self.plain_modes(h, n, t)) {
                *o += en * v;
            }
            en *= eps;
        }
        self.fourier(&modes, z)
    }
}

/// Kernels of every ε-Taylor coefficient that the recursion needs.
struct Taylor {
    /// `kl[ℓ][s]`: `(2π)^{−1/2} h C_{ℓ,s}(m−m₁) R_ℓ(im₁)`.
    kl: Vec<Vec<ConvKernel>>,
    /// `kb[j][h][s]`.
    kb: [[Vec<ConvKernel>; 2]; 2],
    /// `q'(m) = Q(im) − [d_D = 0] R_D(im)`.
    qp: Vec<Complex64>,
    rd: Vec<Complex64>,
}

fn symbol_kernels(mg: &MGrid, s: &FourierSymbol, extra: impl Fn(f64) -> Complex64 + Copy) -> Vec<ConvKernel> {
    if s.is_zero() {
        return Vec::new();
    }
    (0..=s.eps_degree())
        .map(|deg| ConvKernel::from_fn(mg, inv_sqrt_2pi(), |d, m1| s.taylor_coeff(d, deg) * extra(m1)))
        .collect()
}

impl Taylor {
    fn new(spec: &ProblemSpec, mg: &MGrid) -> Self {
        let kl = spec.terms.iter().map(|t| symbol_kernels(mg, &t.c, |m1| t.r.eval_im(m1))).collect();
        let one = |_: f64| Complex64::new(1.0, 0.0);
        let b = &spec.coeffs.b;
        let kb = [
            [symbol_kernels(mg, &b[0][0], one), symbol_kernels(mg, &b[0][1], one)],
            [symbol_kernels(mg, &b[1][0], one), symbol_kernels(mg, &b[1][1], one)],
        ];
        let pts = mg.points();
        let rd: Vec<Complex64> = pts.iter().map(|&m| spec.r_d.eval_im(m)).collect();
        let qp = pts
            .iter()
            .zip(&rd)
            .map(|(&m, r)| spec.q_poly.eval_im(m) - if spec.d_d == 0 { *r } else { Complex64::new(0.0, 0.0) })
            .collect();
        Taylor { kl, kb, qp, rd }
    }
}

/// Right side of order n from orders below n, per component and t-power.
fn order_rhs(spec: &ProblemSpec, tay: &Taylor, mg: &MGrid, a: &[[Vec<Vec<Complex64>>; 2]], n: usize) -> [Vec<Vec<Complex64>>; 2] {
    let nm = mg.n;
    let pts = mg.points();
    let mut rhs = [vec![zeros(nm); n + 1], vec![zeros(nm); n + 1]];
    for h in 0..2 {
        for (deg, s) in &spec.forcing.lambda[h] {
            let deg = *deg as usize;
            if deg <= n {
                let qf = spec.q_tri(deg as u32);
                for (o, &m) in rhs[h][deg].iter_mut().zip(&pts) {
                    *o += s.taylor_coeff(m, n - deg) * qf;
                }
            }
        }
    }
    let dd = spec.d_d as usize;
    if dd >= 1 && n >= dd {
        let lam = spec.q.powf(spec.d_d as f64 / spec.kf());
        let ddk = spec.d_d as f64 / spec.kf();
        let src = &a[n - dd];
        for p in 0..src[0].len() {
            let scale = lam.powi(p as i32);
            for h in 0..2 {
                let couple = if h == 0 { ddk } else { 0.0 };
                for i in 0..nm {
                    rhs[h][p + dd][i] += tay.rd[i] * scale * (src[h][p][i] + couple * src[1][p][i]);
                }
            }
        }
    }
    for (l, term) in spec.terms.iter().enumerate() {
        let mu = spec.q.powf(term.delta.to_f64());
        let dl = term.d as usize;
        for (s, k) in tay.kl[l].iter().enumerate() {
            let shift = term.big_delta as usize + s;
            if shift > n {
                break;
            }
            let src = &a[n - shift];
            for p in 0..src[0].len() {
                let scale = Complex64::new(mu.powi(p as i32), 0.0);
                for h in 0..2 {
                    let couple = if h == 0 { term.delta.to_f64() } else { 0.0 };
                    let arg: Vec<Complex64> = (0..nm).map(|i| src[h][p][i] + couple * src[1][p][i]).collect();
                    k.apply_add(&arg, scale, &mut rhs[h][p + dl]);
                }
            }
        }
    }
    for j in 0..2 {
        for h in 0..2 {
            for (s, k) in tay.kb[j][h].iter().enumerate().skip(1) {
                if s > n {
                    break;
                }
                let src = &a[n - s][j];
                for (p, row) in src.iter().enumerate() {
                    k.apply_add(row, Complex64::new(1.0, 0.0), &mut rhs[h][p]);
                }
            }
        }
    }
    rhs
}

/// Defect of `q' X_h − Σ_j b_{jh,0} ⋆ X_j − rhs_h`.
fn order_defect(tay: &Taylor, x: [&[Complex64]; 2], rhs: [&[Complex64]; 2]) -> [Vec<Complex64>; 2] {
    let mut out = [zeros(x[0].len()), zeros(x[0].len())];
    for h in 0..2 {
        for (i, o) in out[h].iter_mut().enumerate() {
            *o = tay.qp[i] * x[h][i] - rhs[h][i];
        }
        for j in 0..2 {
            if let Some(k) = tay.kb[j][h].first() {
                k.apply_add(x[j], Complex64::new(-1.0, 0.0), &mut out[h]);
            }
        }
    }
    out
}

fn max_abs(v: &[Complex64]) -> f64 {
    v.iter().map(|c| c.norm()).fold(0.0, f64::max)
}

/// Fixed-point solve of one order for one t-power.
fn solve_power(
    tay: &Taylor,
    rhs: [&[Complex64]; 2],
    mode: OrderSolve,
    tol: f64,
    max_iter: usize,
    order: usize,
) -> Result<[Vec<Complex64>; 2], FormalError> {
    let nm = rhs[0].len();
    let iterate = |h: usize, x: &[Vec<Complex64>; 2], only: Option<usize>| -> Vec<Complex64> {
        let mut acc = rhs[h].to_vec();
        for j in 0..2 {
            if only.is_some_and(|o| o != j) {
                continue;
            }
            if let Some(k) = tay.kb[j][h].first() {
                k.apply_add(&x[j], Complex64::new(1.0, 0.0), &mut acc);
            }
        }
        acc.iter().zip(&tay.qp).map(|(a, q)| a / q).collect()
    };
    let mut x = [zeros(nm), zeros(nm)];
    let run = |x: &mut [Vec<Complex64>; 2], comps: &[usize], only: Option<usize>| -> Result<(), FormalError> {
        let mut last = f64::INFINITY;
        for _ in 0..max_iter {
            let mut upd = 0.0f64;
            let mut size = 0.0f64;
            for &h in comps {
                let y = iterate(h, x, only.map(|_| h).or(only));
                upd = upd.max(y.iter().zip(&x[h]).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max));
                size = size.max(max_abs(&y));
                x[h] = y;
            }
            if upd <= tol * size.max(1.0) {
                return Ok(());
            }
            if !upd.is_finite() || (upd > last && upd > 1e3 * tol) && last < f64::INFINITY && upd > 2.0 * last {
                return Err(FormalError::Smallness { order, update: upd });
            }
            last = upd;
        }
        Err(FormalError::Smallness { order, update: last })
    };
    match mode {
        OrderSolve::Coupled => run(&mut x, &[0, 1], None)?,
        OrderSolve::Triangular => {
            // ω₁ alone (b₀₁ ≡ 0), then ω₀ with b₁₀ ⋆ X₁ frozen.
            run(&mut x, &[1], Some(1))?;
            let mut frozen = rhs[0].to_vec();
            if let Some(k) = tay.kb[1][0].first() {
                k.apply_add(&x[1], Complex64::new(1.0, 0.0), &mut frozen);
            }
            let rhs0 = frozen;
            let mut last = f64::INFINITY;
            let mut done = false;
            for _ in 0..max_iter {
                let mut acc = rhs0.clone();
                if let Some(k) = tay.kb[0][0].first() {
                    k.apply_add(&x[0], Complex64::new(1.0, 0.0), &mut acc);
                }
                let y: Vec<Complex64> = acc.iter().zip(&tay.qp).map(|(a, q)| a / q).collect();
                let upd = y.iter().zip(&x[0]).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
                let size = max_abs(&y);
                x[0] = y;
                if upd <= tol * size.max(1.0) {
                    done = true;
                    break;
                }
                if !upd.is_finite() || (last < f64::INFINITY && upd > 2.0 * last && upd > 1e3 * tol) {
                    return Err(FormalError::Smallness { order, update: upd });
                }
                last = upd;
            }
            if !done {
                return Err(FormalError::Smallness { order, update: last });
            }
        }
    }
    Ok(x)
}

/// Coefficients up to order `n_max`, each order solved by fixed-point iteration.
pub fn formal_coefficients(spec: &ProblemSpec, mg: &MGrid, n_max: usize, tol: f64) -> Result<FormalSeries, FormalError> {
    let mode = if spec.is_triangular() && spec.coeffs.b[0][1].is_zero() { OrderSolve::Triangular } else { OrderSolve::Coupled };
    formal_coefficients_with(spec, mg, n_max, tol, mode)
}

pub fn formal_coefficients_with(
    spec: &ProblemSpec,
    mg: &MGrid,
    n_max: usize,
    tol: f64,
    mode: OrderSolve,
) -> Result<FormalSeries, FormalError> {
    if let Some(l) = spec.terms.iter().position(|t| t.big_delta == 0) {
        return Err(FormalError::ZeroDelta(l));
    }
    if mode == OrderSolve::Triangular && !spec.coeffs.b[0][1].is_zero() {
        return Err(FormalError::Smallness { order: 0, update: f64::NAN });
    }
    let tay = Taylor::new(spec, mg);
    let mut a: Vec<[Vec<Vec<Complex64>>; 2]> = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        let rhs = order_rhs(spec, &tay, mg, &a, n);
        let mut layer = [Vec::with_capacity(n + 1), Vec::with_capacity(n + 1)];
        for p in 0..=n {
            let [x0, x1] = solve_power(&tay, [&rhs[0][p], &rhs[1][p]], mode, tol, 500, n)?;
            layer[0].push(x0);
            layer[1].push(x1);
        }
        a.push(layer);
    }
    Ok(FormalSeries { order: n_max, mgrid: mg.clone(), a, tol })
}

/// Largest order-identity defect up to order `n_max`, relative to `max(1, |q'X|)` per power.
pub fn formal_residual(series: &FormalSeries, spec: &ProblemSpec, n_max: usize) -> f64 {
    let tay = Taylor::new(spec, &series.mgrid);
    let mut worst = 0.0f64;
    for n in 0..=n_max.min(series.order) {
        let rhs = order_rhs(spec, &tay, &series.mgrid, &series.a[..n], n);
        for p in 0..=n {
            let x = [series.a[n][0][p].as_slice(), series.a[n][1][p].as_slice()];
            let d = order_defect(&tay, x, [&rhs[0][p], &rhs[1][p]]);
            for h in 0..2 {
                let scale = x[h].iter().zip(&tay.qp).map(|(v, q)| (v * q).norm()).fold(1.0, f64::max);
                worst = worst.max(max_abs(&d[h]) / scale);
            }
        }
    }
    worst
}

/// `(t, z)` probes: `t ∈ r_T·{0.3, 0.6, 0.9}` on the positive axis, `z ∈ {−0.5, 0, 0.5}`.
pub fn default_probes(r_t: f64) -> Vec<(Complex64, Complex64)> {
    let mut out = Vec::new();
    for tf in [0.3, 0.6, 0.9] {
        for z in [-0.5, 0.0, 0.5] {
            out.push((Complex64::new(r_t * tf, 0.0), Complex64::new(z, 0.0)));
        }
    }
    out
}

/// Weighted least squares `y ≈ Σ_c θ_c x_c` via normal equations.
pub fn weighted_lsq(rows: &[Vec<f64>], y: &[f64], w: &[f64]) -> Result<Vec<f64>, FormalError> {
    let k = rows.first().map(|r| r.len()).unwrap_or(0);
    let mut a = vec![vec![0.0; k + 1]; k];
    for ((r, yy), ww) in rows.iter().zip(y).zip(w) {
        for i in 0..k {
            for j in 0..k {
                a[i][j] += ww * r[i] * r[j];
            }
            a[i][k] += ww * r[i] * yy;
        }
    }
    for col in 0..k {
        let piv = (col..k).max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap()).unwrap();
        a.swap(col, piv);
        let scale = a.iter().map(|r| r[col].abs()).fold(0.0, f64::max);
        if a[col][col].abs() <= 1e-13 * scale.max(1e-300) {
            return Err(FormalError::Singular);
        }
        for i in 0..k {
            if i != col {
                let f = a[i][col] / a[col][col];
                for j in col..=k {
                    a[i][j] -= f * a[col][j];
                }
            }
        }
    }
    Ok((0..k).map(|i| a[i][k] / a[i][i]).collect())
}

/// Sample weights: the smallest-|ε| 10% (at least one) count double.
fn emphasis_weights(log_eps: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..log_eps.len()).collect();
    idx.sort_by(|&a, &b| log_eps[a].partial_cmp(&log_eps[b]).unwrap());
    let n_small = ((log_eps.len() as f64) * 0.1).ceil().max(1.0) as usize;
    let mut w = vec![1.0; log_eps.len()];
    for &i in idx.iter().take(n_small) {
        w[i] = 2.0;
    }
    w
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayFit {
    /// `(|ε|, Δ(ε))` for every sample, including dropped ones.
    pub samples: Vec<(f64, f64)>,
    pub used: usize,
    pub quadratic: f64,
    pub linear: f64,
    pub constant: f64,
    pub target: f64,
    pub relative_deviation: f64,
    pub pass: bool,
    pub warnings: Vec<String>,
}

/// Relative tolerance on the fitted quadratic coefficient.
pub const DECAY_FIT_TOL: f64 = 0.10;

/// Fits `log Δ = a log²|ε| + b log|ε| + c` to samples above `floor`.
pub fn fit_decay(samples: &[(f64, f64)], floor: f64, k: u32, q: f64) -> Result<DecayFit, FormalError> {
    let mut warnings = Vec::new();
    let kept: Vec<(f64, f64)> = samples.iter().copied().filter(|&(_, d)| d > floor && d.is_finite()).collect();
    if kept.len() < samples.len() {
        warnings.push(format!("{} samples at or below the noise floor {floor:e} dropped", samples.len() - kept.len()));
    }
    let span = if kept.is_empty() {
        0.0
    } else {
        let lo = kept.iter().map(|s| s.0).fold(f64::INFINITY, f64::min);
        let hi = kept.iter().map(|s| s.0).fold(0.0, f64::max);
        (hi / lo).log10()
    };
    if kept.len() < 8 || span < 2.0 - 1e-9 {
        return Err(FormalError::TooFewSamples { need: 8, decades: 2.0, have: kept.len(), span });
    }
    let le: Vec<f64> = kept.iter().map(|s| s.0.ln()).collect();
    let rows: Vec<Vec<f64>> = le.iter().map(|&x| vec![x * x, x, 1.0]).collect();
    let y: Vec<f64> = kept.iter().map(|s| s.1.ln()).collect();
    let th = weighted_lsq(&rows, &y, &emphasis_weights(&le))?;
    let target = -(k as f64) / (2.0 * q.ln());
    let dev = (th[0] - target).abs() / target.abs();
    Ok(DecayFit {
        samples: samples.to_vec(),
        used: kept.len(),
        quadratic: th[0],
        linear: th[1],
        constant: th[2],
        target,
        relative_deviation: dev,
        pass: dev <= DECAY_FIT_TOL && th[0] < 0.0,
        warnings,
    })
}

/// `Δ(ε) = max_j sup_probes |u_{j,p+1} − u_{j,p}|` for each solution pair, then [`fit_decay`].
pub fn difference_decay_fit(
    pairs: &[(&LogSolution, &LogSolution)],
    probes: &[(Complex64, Complex64)],
    floor: f64,
    k: u32,
    q: f64,
) -> Result<DecayFit, FormalError> {
    let samples = difference_samples(pairs, probes)?;
    fit_decay(&samples, floor, k, q)
}

pub fn difference_samples(
    pairs: &[(&LogSolution, &LogSolution)],
    probes: &[(Complex64, Complex64)],
) -> Result<Vec<(f64, f64)>, FormalError> {
    let mut samples = Vec::with_capacity(pairs.len());
    for (a, b) in pairs {
        let eps = a.eps();
        let mut d = 0.0f64;
        for &(t, z) in probes {
            for j in 0..2 {
                let ua = evaluate_component(a, j, t, z, eps)?;
                let ub = evaluate_component(b, j, t, z, eps)?;
                d = d.max((ua - ub).norm());
            }
        }
        samples.push((eps.norm(), d));
    }
    Ok(samples)
}

#[derive(Debug, Clone, Serialize)]
pub struct GevreyReport {
    /// `(|ε|, [R_0, …, R_{N_max}])`.
    pub remainders: Vec<(f64, Vec<f64>)>,
    /// Highest order whose remainders stay above the floor at every sample.
    pub order_cap: usize,
    pub fitted_log_c: f64,
    pub fitted_log_a: f64,
    /// `g_N = log(R_{N+1}/(|ε| R_N)) − (N+1) log q / k`, averaged over samples.
    pub trend: Vec<f64>,
    pub monotone: bool,
    pub warnings: Vec<String>,
}

/// Slack of the monotone log-ratio test.
pub const LOG_RATIO_SLACK: f64 = 0.1;

/// Remainders `R_N(ε) = max_j sup_probes |u_j − Σ_{n≤N} ũ_{j,n} ε^n/n!|` and the q-Gevrey envelope fit.
pub fn gevrey_remainder_check(
    sols: &[&LogSolution],
    series: &FormalSeries,
    n_max: usize,
    probes: &[(Complex64, Complex64)],
    floor: f64,
    k: u32,
    q: f64,
) -> Result<GevreyReport, FormalError> {
    let n_max = n_max.min(series.order());
    let mut remainders = Vec::with_capacity(sols.len());
    for sol in sols {
        let eps = sol.eps();
        let mut r = vec![0.0f64; n_max + 1];
        for &(t, z) in probes {
            for j in 0..2 {
                let u = evaluate_component(sol, j, t, z, eps)?;
                for (n, rn) in r.iter_mut().enumerate() {
                    *rn = rn.max((u - series.partial_sum(j, n, t, z, eps)).norm());
                }
            }
        }
        remainders.push((eps.norm(), r));
    }
    remainder_envelope(remainders, floor, k, q)
}

/// Envelope fit and log-ratio trend for precomputed remainders.
pub fn remainder_envelope(remainders: Vec<(f64, Vec<f64>)>, floor: f64, k: u32, q: f64) -> Result<GevreyReport, FormalError> {
    let mut warnings = Vec::new();
    let n_all = remainders.first().map(|r| r.1.len()).unwrap_or(0);
    let mut cap = n_all.saturating_sub(1);
    for (_, r) in &remainders {
        if let Some(bad) = r.iter().position(|&x| x <= floor) {
            cap = cap.min(bad.saturating_sub(1));
        }
    }
    if cap + 1 < n_all {
        warnings.push(format!("remainders reach the noise floor {floor:e}; orders capped at {cap}"));
    }
    let lq = q.ln();
    let kf = k as f64;
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for (e, r) in &remainders {
        for (n, &rn) in r.iter().enumerate().take(cap + 1) {
            let nf = n as f64;
            rows.push(vec![nf + 1.0, 1.0]);
            y.push(rn.ln() - (nf + 1.0) * e.ln() - nf * (nf + 1.0) / (2.0 * kf) * lq);
        }
    }
    let th = if rows.len() >= 2 && cap >= 1 {
        weighted_lsq(&rows, &y, &vec![1.0; rows.len()])?
    } else {
        vec![f64::NAN, f64::NAN]
    };
    let mut trend = Vec::new();
    for n in 0..cap {
        let mean = remainders.iter().map(|(e, r)| (r[n + 1] / (e * r[n])).ln()).sum::<f64>() / remainders.len() as f64;
        trend.push(mean - (n as f64 + 1.0) * lq / kf);
    }
    let monotone = trend.windows(2).all(|w| w[1] <= w[0] + LOG_RATIO_SLACK);
    Ok(GevreyReport { remainders, order_cap: cap, fitted_log_a: th[0], fitted_log_c: th[1], trend, monotone, warnings })
}
