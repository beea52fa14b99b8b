//! Equation data and the executable form of Assumptions (A), (B1), (B2), (C).

mod symbol;

pub use symbol::{FourierSymbol, SymbolError};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("polynomial '{0}' has an empty coefficient list")]
    EmptyPolynomial(&'static str),
    #[error("rational with zero denominator")]
    ZeroDenominator,
    #[error("m-grid must be nonempty and symmetric about 0")]
    BadGrid,
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error(transparent)]
    Symbol(#[from] SymbolError),
}

/// Complex-coefficient polynomial, coefficients low to high degree.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly {
    coeffs: Vec<Complex64>,
}

impl Poly {
    pub fn new(coeffs: Vec<Complex64>) -> Self {
        assert!(!coeffs.is_empty(), "polynomial needs at least one coefficient");
        Poly { coeffs }
    }

    pub fn real(coeffs: &[f64]) -> Self {
        Self::new(coeffs.iter().map(|&c| Complex64::new(c, 0.0)).collect())
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// Degree ignoring trailing zero coefficients; the zero polynomial has degree 0.
    pub fn degree(&self) -> usize {
        self.coeffs.iter().rposition(|c| c.norm() != 0.0).unwrap_or(0)
    }

    pub fn leading(&self) -> Complex64 {
        self.coeffs[self.degree()]
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.coeffs.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, c| acc * z + c)
    }

    /// Symbol of the differential operator `P(∂_z)` on `e^{izm}`: `P(im)`.
    pub fn eval_im(&self, m: f64) -> Complex64 {
        self.eval(Complex64::new(0.0, m))
    }
}

/// Exact nonnegative-denominator rational in lowest terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rational {
    num: i64,
    den: i64,
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

pub fn lcm(a: i64, b: i64) -> i64 {
    (a / gcd(a, b)) * b
}

impl Rational {
    pub fn new(num: i64, den: i64) -> Result<Self, ModelError> {
        if den == 0 {
            return Err(ModelError::ZeroDenominator);
        }
        let g = gcd(num, den).max(1);
        let s = den.signum();
        Ok(Rational { num: s * num / g, den: s * den / g })
    }

    pub fn integer(n: i64) -> Self {
        Rational { num: n, den: 1 }
    }

    pub fn num(&self) -> i64 {
        self.num
    }

    pub fn den(&self) -> i64 {
        self.den
    }

    pub fn to_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    pub fn sub(&self, o: &Rational) -> Rational {
        Rational::new(self.num * o.den - o.num * self.den, self.den * o.den).unwrap()
    }

    pub fn scale(&self, k: i64) -> Rational {
        Rational::new(self.num * k, self.den).unwrap()
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

/// One operator term `ε^{Δ_ℓ} t^{d_ℓ} c_ℓ(z,ε) R_ℓ(∂_z) σ_{q,t}^{δ_ℓ}`.
#[derive(Debug, Clone)]
pub struct OperatorTerm {
    pub d: u32,
    pub big_delta: u32,
    pub delta: Rational,
    pub r: Poly,
    pub c: FourierSymbol,
}

#[derive(Debug, Clone)]
pub struct ForcingData {
    /// `(m_h, F̃_{h,m_h})` pairs for h = 0 and h = 1.
    pub lambda: [Vec<(u32, FourierSymbol)>; 2],
    pub c_f: f64,
}

#[derive(Debug, Clone)]
pub struct CoefficientData {
    /// `b[j][k]` is `b̃_{jk}`: it multiplies `ω_j` inside the equation for `ω_k`.
    pub b: [[FourierSymbol; 2]; 2],
    pub c_b: f64,
    pub c_c: f64,
    pub triangular: bool,
}

#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub k: u32,
    pub q: f64,
    pub d_d: u32,
    pub q_poly: Poly,
    pub r_d: Poly,
    pub terms: Vec<OperatorTerm>,
    pub beta: f64,
    pub beta_prime: f64,
    pub mu: f64,
    pub alpha: f64,
    pub eps0: f64,
    pub varsigma: f64,
    pub forcing: ForcingData,
    pub coeffs: CoefficientData,
}

impl ProblemSpec {
    /// Number of operator terms including the `d_D` term.
    pub fn big_d(&self) -> usize {
        self.terms.len() + 1
    }

    pub fn kf(&self) -> f64 {
        self.k as f64
    }

    pub fn log_q(&self) -> f64 {
        self.q.ln()
    }

    /// `(q^{1/k})^{n(n−1)/2}`.
    pub fn q_tri(&self, n: u32) -> f64 {
        let n = n as f64;
        (self.log_q() / self.kf() * n * (n - 1.0) / 2.0).exp()
    }

    /// `P_m(τ) = Q(im) − q^{−d_D(d_D−1)/(2k)} R_D(im) τ^{d_D}`.
    pub fn p_m(&self, tau: Complex64, m: f64) -> Complex64 {
        self.q_poly.eval_im(m) - self.r_d.eval_im(m) * tau.powu(self.d_d) / self.q_tri(self.d_d)
    }

    /// Dilation exponent `δ_ℓ − d_ℓ/k` of the Borel-plane term ℓ.
    pub fn borel_dilation(&self, l: usize) -> Rational {
        let t = &self.terms[l];
        t.delta.sub(&Rational::new(t.d as i64, self.k as i64).unwrap())
    }

    /// `F̃_h(τ, m, ε) = Σ_{m_h ∈ Λ_h} F̃_{h,m_h}(m, ε) τ^{m_h}`.
    pub fn forcing_borel(&self, h: usize, tau: Complex64, m: f64, eps: Complex64) -> Complex64 {
        self.forcing.lambda[h]
            .iter()
            .map(|(deg, s)| s.eval(m, eps) * tau.powu(*deg))
            .sum()
    }

    pub fn is_triangular(&self) -> bool {
        self.coeffs.triangular
    }
}

/// 2001 uniform points on [−50, 50].
pub fn default_m_grid() -> Vec<f64> {
    (0..2001).map(|i| -50.0 + 0.05 * i as f64).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct AssumptionCheck {
    pub id: String,
    pub description: String,
    pub pass: bool,
    pub witness: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AssumptionReport {
    pub checks: Vec<AssumptionCheck>,
    /// Lower bound of |Q(im)/R_D(im)| (grid min combined with the |m|→∞ limit).
    pub d1: f64,
    /// Upper bound of |Q(im)/R_D(im)|.
    pub d2: f64,
    /// Circular mean of arg(Q(im)/R_D(im)).
    pub arc_center: f64,
    /// Largest deviation of arg(Q/R_D) from the mean over the grid.
    pub arc_half_width: f64,
    pub sup_forcing: f64,
    pub sup_b: f64,
    pub sup_c: f64,
}

impl AssumptionReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn get(&self, id: &str) -> Option<&AssumptionCheck> {
        self.checks.iter().find(|c| c.id == id)
    }

    pub fn failures(&self) -> Vec<&AssumptionCheck> {
        self.checks.iter().filter(|c| !c.pass).collect()
    }
}

fn wrap_pi(x: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut y = (x + std::f64::consts::PI).rem_euclid(two_pi) - std::f64::consts::PI;
    if y <= -std::f64::consts::PI {
        y += two_pi;
    }
    y
}

/// Weighted sup of a symbol over the grid and the closed ε-disc; returns (sup, argmax m).
fn weighted_symbol_sup(s: &FourierSymbol, grid: &[f64], beta: f64, mu: f64, eps0: f64) -> (f64, f64) {
    grid.iter()
        .map(|&m| ((1.0 + m.abs()).powf(mu) * (beta * m.abs()).exp() * s.disc_bound(m, eps0), m))
        .fold((0.0, 0.0), |a, b| if b.0 > a.0 { b } else { a })
}

pub fn validate_assumptions(spec: &ProblemSpec, m_grid: &[f64]) -> Result<AssumptionReport, ModelError> {
    if m_grid.is_empty() {
        return Err(ModelError::BadGrid);
    }
    let symmetric = m_grid
        .iter()
        .zip(m_grid.iter().rev())
        .all(|(a, b)| (a + b).abs() <= 1e-12 * (1.0 + a.abs()));
    if !symmetric {
        return Err(ModelError::BadGrid);
    }
    let mut checks = Vec::new();
    let mut push = |id: &str, desc: String, pass: bool, witness: Option<String>| {
        checks.push(AssumptionCheck { id: id.to_string(), description: desc, pass, witness });
    };

    push(
        "P.1",
        "q > 1, k ≥ 1, D ≥ 2".into(),
        spec.q > 1.0 && spec.k >= 1 && spec.big_d() >= 2,
        None,
    );
    push(
        "P.2",
        "0 < β′ < β, μ > 1, α > 0, 0 < ε₀ < 1".into(),
        0.0 < spec.beta_prime
            && spec.beta_prime < spec.beta
            && spec.mu > 1.0
            && spec.alpha > 0.0
            && spec.eps0 > 0.0
            && spec.eps0 < 1.0,
        None,
    );

    let k = spec.k as i64;
    let first = |pred: &dyn Fn(&OperatorTerm) -> bool| {
        spec.terms.iter().position(|t| !pred(t)).map(|l| format!("ℓ={}", l + 1))
    };
    let w = first(&|t| t.big_delta > t.d);
    push("A.1", "Δ_ℓ > d_ℓ".into(), w.is_none(), w);
    let w = first(&|t| (t.d as i64) * t.delta.den() > k * t.delta.num());
    push("A.2", "d_ℓ > k·δ_ℓ".into(), w.is_none(), w);
    let w = first(&|t| (spec.d_d as i64) * t.delta.den() >= k * t.delta.num() && t.delta.num() >= 0);
    push("A.3", "d_D ≥ k·δ_ℓ ≥ 0".into(), w.is_none(), w);
    let w = first(&|t| spec.mu > t.r.degree() as f64 + 1.0);
    push("A.4", "μ > deg(R_ℓ) + 1".into(), w.is_none(), w);

    let (sup_f, m_f, which_f) = spec.forcing.lambda.iter().enumerate().flat_map(|(h, l)| l.iter().map(move |x| (h, x)))
        .map(|(h, (deg, s))| {
            let (v, m) = weighted_symbol_sup(s, m_grid, spec.beta, spec.mu, spec.eps0);
            (v, m, format!("h={h}, m_h={deg}"))
        })
        .fold((0.0, 0.0, String::new()), |a, b| if b.0 > a.0 { b } else { a });
    push(
        "B1",
        format!("sup (1+|m|)^μ e^(β|m|) |F̃_(h,m_h)| ≤ C_F = {}", spec.forcing.c_f),
        sup_f <= spec.forcing.c_f,
        (sup_f > spec.forcing.c_f).then(|| format!("{which_f}, m={m_f}, value={sup_f:.6e}")),
    );

    let mut sup_b = (0.0, 0.0, String::new());
    for j in 0..2 {
        for kk in 0..2 {
            let (v, m) = weighted_symbol_sup(&spec.coeffs.b[j][kk], m_grid, spec.beta, spec.mu, spec.eps0);
            if v > sup_b.0 {
                sup_b = (v, m, format!("b_{j}{kk}"));
            }
        }
    }
    push(
        "B2.b",
        format!("sup weighted |b̃_jk| ≤ C_B = {}", spec.coeffs.c_b),
        sup_b.0 <= spec.coeffs.c_b,
        (sup_b.0 > spec.coeffs.c_b).then(|| format!("{}, m={}, value={:.6e}", sup_b.2, sup_b.1, sup_b.0)),
    );
    let mut sup_c = (0.0, 0.0, String::new());
    for (l, t) in spec.terms.iter().enumerate() {
        let (v, m) = weighted_symbol_sup(&t.c, m_grid, spec.beta, spec.mu, spec.eps0);
        if v > sup_c.0 {
            sup_c = (v, m, format!("ℓ={}", l + 1));
        }
    }
    push(
        "B2.c",
        format!("sup weighted |C_ℓ| ≤ C_C = {}", spec.coeffs.c_c),
        sup_c.0 <= spec.coeffs.c_c,
        (sup_c.0 > spec.coeffs.c_c).then(|| format!("{}, m={}, value={:.6e}", sup_c.2, sup_c.1, sup_c.0)),
    );
    let b01_zero = spec.coeffs.b[0][1].is_zero();
    push(
        "B2.tri",
        "triangular flag implies b̃₀₁ ≡ 0".into(),
        !spec.coeffs.triangular || b01_zero,
        (spec.coeffs.triangular && !b01_zero).then(|| "b_01 nonzero".to_string()),
    );

    let dq = spec.q_poly.degree();
    push(
        "C.1",
        "deg(R_D) = deg(Q)".into(),
        spec.r_d.degree() == dq,
        (spec.r_d.degree() != dq).then(|| format!("deg Q={dq}, deg R_D={}", spec.r_d.degree())),
    );
    let w = first(&|t| t.r.degree() <= dq);
    push("C.2", "deg(R_ℓ) ≤ deg(Q)".into(), w.is_none(), w);

    let mut zero_at = None;
    let mut d1 = f64::INFINITY;
    let mut d2 = 0.0f64;
    let (mut sx, mut sy) = (0.0, 0.0);
    let mut args = Vec::with_capacity(m_grid.len());
    for &m in m_grid {
        let qv = spec.q_poly.eval_im(m);
        let rv = spec.r_d.eval_im(m);
        if qv.norm() == 0.0 || rv.norm() == 0.0 {
            zero_at.get_or_insert(m);
            continue;
        }
        let ratio = qv / rv;
        d1 = d1.min(ratio.norm());
        d2 = d2.max(ratio.norm());
        let a = ratio.arg();
        sx += a.cos();
        sy += a.sin();
        args.push(a);
    }
    push(
        "C.3",
        "Q(im) ≠ 0 and R_D(im) ≠ 0 on the grid".into(),
        zero_at.is_none(),
        zero_at.map(|m| format!("m={m}")),
    );
    if spec.r_d.degree() == dq && spec.r_d.leading().norm() > 0.0 {
        let lim = spec.q_poly.leading().norm() / spec.r_d.leading().norm();
        d1 = d1.min(lim);
        d2 = d2.max(lim);
    }
    let arc_center = sy.atan2(sx);
    let arc_half_width = args.iter().map(|a| wrap_pi(a - arc_center).abs()).fold(0.0, f64::max);
    push(
        "C.4",
        format!("arg(Q/R_D) within ς = {} of its circular mean", spec.varsigma),
        arc_half_width <= spec.varsigma,
        (arc_half_width > spec.varsigma).then(|| format!("measured half-width {arc_half_width:.6e}")),
    );

    Ok(AssumptionReport {
        checks,
        d1,
        d2,
        arc_center,
        arc_half_width,
        sup_forcing: sup_f,
        sup_b: sup_b.0,
        sup_c: sup_c.0,
    })
}

/// Forcing evaluation as a free function.
pub fn forcing_borel(spec: &ProblemSpec, h: usize, tau: Complex64, m: f64, eps: Complex64) -> Complex64 {
    spec.forcing_borel(h, tau, m, eps)
}

// ---------------------------------------------------------------------------
// JSON schema

/// Complex number as a bare real or a `[re, im]` pair.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ComplexRepr {
    Real(f64),
    Pair([f64; 2]),
}

impl From<ComplexRepr> for Complex64 {
    fn from(c: ComplexRepr) -> Self {
        match c {
            ComplexRepr::Real(r) => Complex64::new(r, 0.0),
            ComplexRepr::Pair([a, b]) => Complex64::new(a, b),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TermConfig {
    pub d: u32,
    #[serde(rename = "Delta")]
    pub big_delta: u32,
    /// `[numerator, denominator]`.
    pub delta: [i64; 2],
    #[serde(rename = "R")]
    pub r: Vec<ComplexRepr>,
    #[serde(rename = "C")]
    pub c: FourierSymbol,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ForcingEntry {
    pub deg: u32,
    pub symbol: FourierSymbol,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ForcingConfig {
    #[serde(default)]
    pub f0: Vec<ForcingEntry>,
    #[serde(default)]
    pub f1: Vec<ForcingEntry>,
    #[serde(rename = "C_F")]
    pub c_f: f64,
}

fn zero_symbol() -> FourierSymbol {
    FourierSymbol::zero()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoeffConfig {
    #[serde(default = "zero_symbol")]
    pub b00: FourierSymbol,
    #[serde(default = "zero_symbol")]
    pub b01: FourierSymbol,
    #[serde(default = "zero_symbol")]
    pub b10: FourierSymbol,
    #[serde(default = "zero_symbol")]
    pub b11: FourierSymbol,
    #[serde(rename = "C_B")]
    pub c_b: f64,
    #[serde(rename = "C_C")]
    pub c_c: f64,
    #[serde(default)]
    pub triangular: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpecConfig {
    pub k: u32,
    pub q: f64,
    #[serde(rename = "dD")]
    pub d_d: u32,
    #[serde(rename = "Q")]
    pub q_poly: Vec<ComplexRepr>,
    #[serde(rename = "RD")]
    pub r_d: Vec<ComplexRepr>,
    pub terms: Vec<TermConfig>,
    pub beta: f64,
    pub beta_prime: f64,
    pub mu: f64,
    pub alpha: f64,
    pub eps0: f64,
    pub varsigma: f64,
    pub forcing: ForcingConfig,
    pub coeffs: CoeffConfig,
}

fn poly_from(name: &'static str, v: &[ComplexRepr]) -> Result<Poly, ModelError> {
    if v.is_empty() {
        return Err(ModelError::EmptyPolynomial(name));
    }
    Ok(Poly::new(v.iter().map(|&c| c.into()).collect()))
}

impl SpecConfig {
    pub fn build(&self) -> Result<ProblemSpec, ModelError> {
        let terms = self
            .terms
            .iter()
            .map(|t| {
                Ok(OperatorTerm {
                    d: t.d,
                    big_delta: t.big_delta,
                    delta: Rational::new(t.delta[0], t.delta[1])?,
                    r: poly_from("R_l", &t.r)?,
                    c: t.c.clone(),
                })
            })
            .collect::<Result<Vec<_>, ModelError>>()?;
        let lam = |v: &[ForcingEntry]| v.iter().map(|e| (e.deg, e.symbol.clone())).collect::<Vec<_>>();
        Ok(ProblemSpec {
            k: self.k,
            q: self.q,
            d_d: self.d_d,
            q_poly: poly_from("Q", &self.q_poly)?,
            r_d: poly_from("RD", &self.r_d)?,
            terms,
            beta: self.beta,
            beta_prime: self.beta_prime,
            mu: self.mu,
            alpha: self.alpha,
            eps0: self.eps0,
            varsigma: self.varsigma,
            forcing: ForcingData { lambda: [lam(&self.forcing.f0), lam(&self.forcing.f1)], c_f: self.forcing.c_f },
            coeffs: CoefficientData {
                b: [
                    [self.coeffs.b00.clone(), self.coeffs.b01.clone()],
                    [self.coeffs.b10.clone(), self.coeffs.b11.clone()],
                ],
                c_b: self.coeffs.c_b,
                c_c: self.coeffs.c_c,
                triangular: self.coeffs.triangular,
            },
        })
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    /// The worked instance: Q = 1 − z², R_D = −2 + z², d_D = 1, with one
    /// extra term (d₁ = 2, Δ₁ = 3, δ₁ = 1/13, R₁ = 1 + z).
    pub fn example_config() -> SpecConfig {
        serde_json::from_str(
            r#"{
            "k": 13, "q": 2.0, "dD": 1,
            "Q": [1, 0, -1], "RD": [-2, 0, 1],
            "terms": [{"d": 2, "Delta": 3, "delta": [1, 13], "R": [1, 1],
                       "C": "0.2*exp(-2.5*abs(m))/(1+m^2)"}],
            "beta": 2.0, "beta_prime": 1.0, "mu": 2.5, "alpha": 0.1,
            "eps0": 0.05, "varsigma": 0.01,
            "forcing": {"f0": [{"deg": 0, "symbol": "exp(-2.5*abs(m))"},
                                {"deg": 1, "symbol": "(0.5+eps)*exp(-3*abs(m))"}],
                        "f1": [{"deg": 0, "symbol": "0.3*exp(-2.5*abs(m))"}],
                        "C_F": 10.0},
            "coeffs": {"b00": "0.01*exp(-2.5*abs(m))", "b10": "0.01*exp(-3*abs(m))",
                       "b11": "0.01*exp(-2.5*abs(m))", "C_B": 0.1, "C_C": 1.0,
                       "triangular": true}
        }"#,
        )
        .unwrap()
    }

    pub fn example_spec() -> ProblemSpec {
        example_config().build().unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn example_passes_and_reports_ratio_bounds() {
        let spec = example_spec();
        let rep = validate_assumptions(&spec, &default_m_grid()).unwrap();
        assert!(rep.all_pass(), "{:?}", rep.failures());
        assert!((rep.d1 - 0.5).abs() < 1e-6);
        assert!((rep.d2 - 1.0).abs() < 1e-6);
        assert!(rep.arc_half_width < 1e-12);
    }

    #[test]
    fn equal_delta_and_d_fails_a1_with_witness() {
        let mut cfg = example_config();
        cfg.terms[0].big_delta = cfg.terms[0].d;
        let rep = validate_assumptions(&cfg.build().unwrap(), &default_m_grid()).unwrap();
        let a1 = rep.get("A.1").unwrap();
        assert!(!a1.pass);
        assert_eq!(a1.witness.as_deref(), Some("ℓ=1"));
    }

    #[test]
    fn degree_drop_fails_c1() {
        let mut cfg = example_config();
        cfg.r_d = vec![ComplexRepr::Real(-2.0), ComplexRepr::Real(1.0)];
        let rep = validate_assumptions(&cfg.build().unwrap(), &default_m_grid()).unwrap();
        assert!(!rep.get("C.1").unwrap().pass);
    }

    #[test]
    fn empty_polynomial_is_input_error() {
        let mut cfg = example_config();
        cfg.q_poly.clear();
        assert!(matches!(cfg.build(), Err(ModelError::EmptyPolynomial("Q"))));
    }

    #[test]
    fn asymmetric_grid_rejected() {
        let spec = example_spec();
        assert!(matches!(validate_assumptions(&spec, &[0.0, 1.0]), Err(ModelError::BadGrid)));
        assert!(matches!(validate_assumptions(&spec, &[]), Err(ModelError::BadGrid)));
    }

    #[test]
    fn triangular_flag_with_nonzero_b01_fails() {
        let mut cfg = example_config();
        cfg.coeffs.b01 = FourierSymbol::parse("0.01*exp(-3*abs(m))").unwrap();
        let rep = validate_assumptions(&cfg.build().unwrap(), &default_m_grid()).unwrap();
        assert!(!rep.get("B2.tri").unwrap().pass);
    }

    #[test]
    fn forcing_borel_examples() {
        let mut cfg = example_config();
        cfg.forcing.f0 = vec![ForcingEntry { deg: 0, symbol: FourierSymbol::parse("1").unwrap() }];
        cfg.forcing.f1 = vec![
            ForcingEntry { deg: 0, symbol: FourierSymbol::parse("2").unwrap() },
            ForcingEntry { deg: 1, symbol: FourierSymbol::parse("-3").unwrap() },
        ];
        let spec = cfg.build().unwrap();
        let tau = Complex64::new(0.3, -1.1);
        assert_eq!(forcing_borel(&spec, 0, tau, 0.7, c(0.1)), c(1.0));
        assert!((forcing_borel(&spec, 1, tau, 0.7, c(0.1)) - (c(2.0) - tau * 3.0)).norm() < 1e-15);
        cfg.forcing.f0 = vec![ForcingEntry { deg: 2, symbol: FourierSymbol::parse("1.5").unwrap() }];
        let spec = cfg.build().unwrap();
        assert!((forcing_borel(&spec, 0, tau, 0.0, c(0.0)) - tau * tau * 1.5).norm() < 1e-15);
    }

    #[test]
    fn rational_normalizes() {
        let r = Rational::new(2, -26).unwrap();
        assert_eq!((r.num(), r.den()), (-1, 13));
        assert!(Rational::new(1, 0).is_err());
        let spec = example_spec();
        assert_eq!(spec.borel_dilation(0), Rational::new(-1, 13).unwrap());
    }

    #[test]
    fn p_m_matches_example_closed_form() {
        let spec = example_spec();
        for &m in &[0.0, 0.5, 3.0] {
            let tau = Complex64::new(0.3, 0.2);
            let expect = c(m * m + 1.0) + tau * (m * m + 2.0);
            assert!((spec.p_m(tau, m) - expect).norm() < 1e-13);
        }
    }

    #[test]
    fn refined_grid_never_inverts_ratio_bounds() {
        let spec = example_spec();
        let g = default_m_grid();
        let fine: Vec<f64> = (0..4001).map(|i| -50.0 + 0.025 * i as f64).collect();
        let a = validate_assumptions(&spec, &g).unwrap();
        let b = validate_assumptions(&spec, &fine).unwrap();
        assert!(b.d1 <= a.d1 + 1e-15 && b.d2 >= a.d2 - 1e-15);
        for &m in &fine {
            let r = (spec.q_poly.eval_im(m) / spec.r_d.eval_im(m)).norm();
            assert!(a.d1 <= r + 1e-15 && r <= a.d2 + 1e-15);
        }
    }

    proptest! {
        #[test]
        fn shrinking_eps0_keeps_bounds_passing(scale in 0.01f64..1.0) {
            let mut cfg = example_config();
            let grid = default_m_grid();
            let base = validate_assumptions(&cfg.build().unwrap(), &grid).unwrap();
            cfg.eps0 *= scale;
            let shrunk = validate_assumptions(&cfg.build().unwrap(), &grid).unwrap();
            for id in ["B1", "B2.b", "B2.c"] {
                prop_assert!(!base.get(id).unwrap().pass || shrunk.get(id).unwrap().pass);
            }
            prop_assert!(shrunk.sup_forcing <= base.sup_forcing);
        }

        #[test]
        fn forcing_is_polynomial_in_tau(re in -2.0f64..2.0, im in -2.0f64..2.0, h in 0.05f64..0.5) {
            let spec = example_spec();
            // Λ₀ = {0, 1}: second differences vanish.
            let f = |x: Complex64| forcing_borel(&spec, 0, x, 0.4, c(0.02));
            let t = Complex64::new(re, im);
            let d2 = f(t + 2.0 * h) - f(t + h) * 2.0 + f(t);
            prop_assert!(d2.norm() < 1e-12);
        }
    }
}
