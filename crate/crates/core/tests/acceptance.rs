//! Acceptance criteria 1–8: one PASS/FAIL line each; exits nonzero if any criterion fails.

use num_complex::Complex64;
use qborel::borel_solver::{disc_agreement, solve_coupled, solve_triangular, BorelOperator};
use qborel::cli::{self, cmd_asymptotics, default_points, geometry_summary, RunConfig, Setup};
use qborel::formal_asymptotics::{formal_coefficients, formal_residual};
use qborel::geometry::{check_assumption_d, pm_roots};
use qborel::problem_model::FourierSymbol;
use qborel::solution_assembly::{evaluate_component, residual_borel, residual_physical, LogSolution};
use qborel::special_functions::{theta_bound_margin, theta_eval};
use qborel::transforms::{q_laplace, q_laplace_operational_check, QuadratureSpec};
use std::path::{Path, PathBuf};
use std::time::Instant;

// Pinned tolerances.
const CONST_TOL: f64 = 1e-6;
const D32_TOL: f64 = 1e-9;
const CONSTANTS_SECONDS: f64 = 5.0;
const TRANSFORM_TOL: f64 = 1e-8;
const THETA_TOL: f64 = 1e-10;
const PICARD_MAX_ITER: usize = 60;
const PICARD_TOL: f64 = 1e-10;
const CONTRACTION_MAX: f64 = 0.55;
const BOREL_RESIDUAL_TOL: f64 = 1e-8;
const PHYSICAL_RESIDUAL_TOL: f64 = 1e-6;
const PATH_AGREEMENT_TOL: f64 = 1e-9;
const SOLVER_SECONDS: f64 = 120.0;
const DISC_TOL: f64 = 1e-8;
const FORMAL_ORDER: usize = 6;
const FORMAL_RESIDUAL_TOL: f64 = 1e-9;
const ORDER0_REL_TOL: f64 = 0.01;
const FOURIER_DIVISION_TOL: f64 = 1e-10;
const DECAY_REL_TOL: f64 = 0.10;
const REMAINDER_MAX_ORDER: usize = 4;
const ASYMPTOTICS_SECONDS: f64 = 600.0;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn rel(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

fn config_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn setup(name: &str) -> Setup {
    Setup::new(RunConfig::load(&config_path(name)).expect("config")).expect("setup")
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn report(n: usize, o: Result<Outcome, String>) -> bool {
    match o {
        Ok(o) => {
            println!("criterion {n}: {} | {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
            o.pass
        }
        Err(e) => {
            println!("criterion {n}: FAIL | error: {e}");
            false
        }
    }
}

fn criterion1() -> Result<Outcome, String> {
    let start = Instant::now();
    let s = setup("example.json");
    let root = pm_roots(&s.spec, 0.0).map_err(|e| e.to_string())?;
    let g = s.sector(0.0).map_err(|e| e.to_string())?;
    let ad = check_assumption_d(&s.spec, s.report.d1, &g.consts);
    let secs = start.elapsed().as_secs_f64();
    let k = &g.consts;
    let pass = (s.report.d1 - 0.5).abs() <= CONST_TOL
        && (s.report.d2 - 1.0).abs() <= CONST_TOL
        && root.len() == 1
        && (root[0] - c(-0.5, 0.0)).norm() <= CONST_TOL
        && k.d31 >= 1.0
        && (k.d32 - 1.0 / 3.0).abs() <= D32_TOL
        && (k.d3 - 1.0 / 3.0).abs() <= D32_TOL
        && k.c_d >= 0.5
        && ad.k_threshold == 13
        && secs < CONSTANTS_SECONDS;
    Ok(Outcome {
        pass,
        detail: format!(
            "D1={} D2={} q0(0)={} D31={} D32={} D3={} C_D={} k_threshold={} time={secs:.2}s",
            s.report.d1, s.report.d2, root[0], k.d31, k.d32, k.d3, k.c_d, ad.k_threshold
        ),
    })
}

fn criterion2() -> Result<Outcome, String> {
    let quad = QuadratureSpec::default();
    let ts = [c(0.2, 0.1), c(0.05, 0.0), c(0.3, -0.1), c(0.01, 0.01), c(0.12, -0.04)];
    let mut worst_mono = 0.0f64;
    for &(q, k) in &[(2.0f64, 13u32), (2.0, 3), (5.0, 2)] {
        for &t in &ts {
            for n in 0..=6u32 {
                let r = q_laplace(|u| u.powu(n), t, 0.0, q, k, &quad).map_err(|e| e.to_string())?;
                let nf = n as f64;
                let expect = (q.ln() / k as f64 * nf * (nf - 1.0) / 2.0).exp() * t.powu(n);
                worst_mono = worst_mono.max(rel(r.value, expect));
            }
        }
    }
    let mut worst_op = 0.0f64;
    let w = |u: Complex64| 1.0 + u + u * u;
    for sigma in [0.0, 1.0, 2.0] {
        for j in [0.0, 0.5, 1.0] {
            let (l, r) = q_laplace_operational_check(w, sigma, j, c(0.15, 0.05), 0.0, 2.0, 13, &quad).map_err(|e| e.to_string())?;
            worst_op = worst_op.max(rel(l, r));
        }
    }
    Ok(Outcome {
        pass: worst_mono < TRANSFORM_TOL && worst_op < TRANSFORM_TOL,
        detail: format!("monomial max rel {worst_mono:.2e}, operational max rel {worst_op:.2e}"),
    })
}

fn criterion3() -> Result<Outcome, String> {
    let mut worst_zero = 0.0f64;
    let mut worst_id = 0.0f64;
    let mut min_margin = f64::INFINITY;
    for &(q, k) in &[(2.0f64, 13u32), (2.0, 1), (5.0, 2)] {
        let qk = q.powf(1.0 / k as f64);
        for m in -3..=3 {
            let e = theta_eval(c(-qk.powi(m), 0.0), q, k, 1e-16).map_err(|e| e.to_string())?;
            // |Θ| relative to the largest series term.
            worst_zero = worst_zero.max(e.value.mant.norm());
        }
        for &z in &[c(1.0, 1.0), c(0.3, -0.2), c(-2.5, 0.7), c(0.0, 1.0), c(0.05, 0.02)] {
            let lhs = theta_eval(z * qk, q, k, 1e-16).map_err(|e| e.to_string())?;
            let rhs = theta_eval(z, q, k, 1e-16).map_err(|e| e.to_string())?;
            // Both sides divided by the local scale at q^{1/k}z.
            let ls = lhs.ln_local_scale;
            let a = lhs.value.mant * (lhs.value.log_scale - ls).exp();
            let b = z * qk * rhs.value.mant * (rhs.value.log_scale - ls).exp();
            worst_id = worst_id.max((a - b).norm());
        }
    }
    for i in 0..100 {
        let r = 10f64.powf(-3.0 + 6.0 * i as f64 / 99.0);
        let z = Complex64::from_polar(r, std::f64::consts::FRAC_PI_2);
        min_margin = min_margin.min(theta_bound_margin(z, 2.0, 13, 0.5).map_err(|e| e.to_string())?);
    }
    Ok(Outcome {
        pass: worst_zero < THETA_TOL && worst_id < THETA_TOL && min_margin > 0.0,
        detail: format!("zeros {worst_zero:.2e} (scaled), identity {worst_id:.2e} (scaled), min margin {min_margin:.3e}"),
    })
}

struct Solved {
    setup: Setup,
    sol: LogSolution,
}

fn criterion4() -> Result<(Outcome, Solved), String> {
    let start = Instant::now();
    let s = setup("example.json");
    let geo = geometry_summary(&s).map_err(|e| e.to_string())?;
    let grid = s.grid(&geo.sector).map_err(|e| e.to_string())?;
    let eps = s.default_eps();
    let op = BorelOperator::new(&s.spec, grid, eps).map_err(|e| e.to_string())?;
    let mut cfg = s.cfg.solver.clone();
    cfg.tol = PICARD_TOL;
    let (a0, a1, ra) = solve_coupled(&op, &cfg).map_err(|e| e.to_string())?;
    let (b0, b1, _) = solve_triangular(&s.spec, &op, &cfg).map_err(|e| e.to_string())?;
    let agreement = a0.distance(&b0).max(a1.distance(&b1));
    let borel = residual_borel(&op, &a0, &a1);
    let sol = LogSolution::new(&s.spec, a0, a1, s.adm_delta());
    let points = default_points(&s);
    let physical = residual_physical(&sol, &s.spec, &points).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    let pass = geo.smallness.pass
        && ra.iterations <= PICARD_MAX_ITER
        && ra.contraction <= CONTRACTION_MAX
        && borel <= BOREL_RESIDUAL_TOL
        && points.len() == 5
        && physical <= PHYSICAL_RESIDUAL_TOL
        && agreement <= PATH_AGREEMENT_TOL
        && secs < SOLVER_SECONDS;
    let detail = format!(
        "eps={eps} smallness lhs={:.4} iterations={} contraction={:.4} borel={borel:.2e} physical={physical:.2e} \
         triangular-vs-coupled={agreement:.2e} time={secs:.1}s",
        geo.smallness.lhs, ra.iterations, ra.contraction
    );
    Ok((Outcome { pass, detail }, Solved { setup: s, sol }))
}

fn criterion5(base: &Solved) -> Result<Outcome, String> {
    let s = &base.setup;
    let cov = s.covering().map_err(|e| e.to_string())?;
    let d = cov.sectors[1].direction;
    let grid = s.grid(&s.sector(d).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let other = cli::solve_at(s, &grid, base.sol.eps(), None).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for j in 0..2 {
        worst = worst.max(disc_agreement(base.sol.omega(j), other.sol.omega(j)).map_err(|e| e.to_string())?);
    }
    Ok(Outcome {
        pass: worst <= DISC_TOL,
        detail: format!("directions 0 and {d:.4}: weighted disc gap {worst:.2e}"),
    })
}

fn criterion6() -> Result<Outcome, String> {
    let s = setup("example.json");
    let series = formal_coefficients(&s.spec, &s.mgrid, FORMAL_ORDER, s.cfg.formal.tol).map_err(|e| e.to_string())?;
    let resid = formal_residual(&series, &s.spec, FORMAL_ORDER);

    // Order 0 against the analytic solution at small ε.
    let eps = c(1e-4, 0.0);
    let grid = s.grid(&s.sector(0.0).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let solved = cli::solve_at(&s, &grid, eps, None).map_err(|e| e.to_string())?;
    let mut worst0 = 0.0f64;
    for &t in &[c(0.2, 0.0), c(0.4, 0.0)] {
        for &z in &[c(0.0, 0.0), c(0.5, 0.0)] {
            for j in 0..2 {
                let u = evaluate_component(&solved.sol, j, t, z, eps).map_err(|e| e.to_string())?;
                worst0 = worst0.max(rel(u, series.coefficient(j, 0, t, z)));
            }
        }
    }

    // Fourier division when every b and c vanishes.
    let mut spec = s.spec.clone();
    spec.coeffs.b = Default::default();
    for t in &mut spec.terms {
        t.c = FourierSymbol::zero();
    }
    let plain = formal_coefficients(&spec, &s.mgrid, 2, s.cfg.formal.tol).map_err(|e| e.to_string())?;
    let mut worst_div = 0.0f64;
    for h in 0..2 {
        for (i, m) in s.mgrid.points().into_iter().enumerate() {
            let f: Complex64 = spec.forcing.lambda[h].iter().filter(|(d, _)| *d == 0).map(|(_, sym)| sym.eval(m, c(0.0, 0.0))).sum();
            worst_div = worst_div.max((plain.plain(h, 0, 0)[i] - f / spec.q_poly.eval_im(m)).norm());
        }
    }
    Ok(Outcome {
        pass: resid <= FORMAL_RESIDUAL_TOL && worst0 <= ORDER0_REL_TOL && worst_div <= FOURIER_DIVISION_TOL,
        detail: format!("residual to N={FORMAL_ORDER}: {resid:.2e}, order-0 vs eps=1e-4: {worst0:.2e}, division: {worst_div:.2e}"),
    })
}

fn criterion7(dir: &Path) -> Result<Outcome, String> {
    let start = Instant::now();
    let mut cfg = RunConfig::load(&config_path("asymptotics.json")).map_err(|e| e.to_string())?;
    cfg.output_dir = dir.to_path_buf();
    let s = Setup::new(cfg).map_err(|e| e.to_string())?;
    let out = cli::Outputs::new(dir).map_err(|e| e.to_string())?;
    let a = cmd_asymptotics(&s, &out).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    let span = {
        let kept: Vec<f64> = a.decay.samples.iter().filter(|x| x.1 > s.cfg.asymptotics.as_ref().unwrap().noise_floor).map(|x| x.0).collect();
        let lo = kept.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = kept.iter().copied().fold(0.0, f64::max);
        (hi / lo).log10()
    };
    let pass = a.decay.relative_deviation <= DECAY_REL_TOL
        && span >= 2.0 - 1e-9
        && a.remainders.monotone
        && a.remainders.order_cap >= REMAINDER_MAX_ORDER
        && secs < ASYMPTOTICS_SECONDS;
    Ok(Outcome {
        pass,
        detail: format!(
            "k={} q={}: quadratic {:.4} vs {:.4} (dev {:.2}%) over {span:.2} decades; log-ratio trend {:?} monotone={} to N={}; time={secs:.1}s",
            s.spec.k,
            s.spec.q,
            a.decay.quadratic,
            a.decay.target,
            100.0 * a.decay.relative_deviation,
            a.remainders.trend.iter().map(|g| (g * 1e4).round() / 1e4).collect::<Vec<_>>(),
            a.remainders.monotone,
            a.remainders.order_cap
        ),
    })
}

fn csv_files(dir: &Path) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(dir)
        .map(|r| r.filter_map(|e| e.ok().map(|e| e.path())).filter(|p| p.extension().is_some_and(|x| x == "csv")).collect())
        .unwrap_or_default();
    v.sort();
    v
}

fn same_csvs(a: &Path, b: &Path) -> Result<usize, String> {
    let fa = csv_files(a);
    let fb = csv_files(b);
    if fa.is_empty() || fa.iter().map(|p| p.file_name()).ne(fb.iter().map(|p| p.file_name())) {
        return Err(format!("CSV sets differ: {fa:?} vs {fb:?}"));
    }
    for (x, y) in fa.iter().zip(&fb) {
        if std::fs::read(x).map_err(|e| e.to_string())? != std::fs::read(y).map_err(|e| e.to_string())? {
            return Err(format!("{} differs", x.display()));
        }
    }
    Ok(fa.len())
}

fn criterion8(asym_first: &Path) -> Result<Outcome, String> {
    let root = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = config_path("example.json");
    let mut codes = Vec::new();
    for run in ["run1", "run2"] {
        let out = root.path().join(run);
        codes.push(cli::run(["qborel".into(), "all".into(), "-c".into(), cfg.clone().into_os_string(), "-o".into(), out.into_os_string()]));
    }
    let n_all = same_csvs(&root.path().join("run1"), &root.path().join("run2"))?;
    let asym = root.path().join("asym");
    let code = cli::run([
        "qborel".into(),
        "asymptotics".into(),
        "-c".into(),
        config_path("asymptotics.json").into_os_string(),
        "-o".into(),
        asym.clone().into_os_string(),
    ]);
    codes.push(code);
    let n_asym = same_csvs(asym_first, &asym)?;
    Ok(Outcome {
        pass: codes.iter().all(|&c| c == 0),
        detail: format!("exit codes {codes:?}; {n_all} CSVs from `all` and {n_asym} from `asymptotics` byte-identical"),
    })
}

fn main() {
    let mut ok = Vec::new();
    ok.push(report(1, criterion1()));
    ok.push(report(2, criterion2()));
    ok.push(report(3, criterion3()));
    let base = match criterion4() {
        Ok((o, s)) => {
            ok.push(report(4, Ok(o)));
            Some(s)
        }
        Err(e) => {
            ok.push(report(4, Err(e)));
            None
        }
    };
    match &base {
        Some(b) => ok.push(report(5, criterion5(b))),
        None => ok.push(report(5, Err("solver suite did not produce a solution".into()))),
    }
    ok.push(report(6, criterion6()));
    let asym_dir = tempfile::tempdir().expect("tempdir");
    ok.push(report(7, criterion7(asym_dir.path())));
    ok.push(report(8, criterion8(asym_dir.path())));
    let passed = ok.iter().filter(|&&b| b).count();
    println!("acceptance: {passed}/{} criteria passed", ok.len());
    if passed != ok.len() {
        std::process::exit(1);
    }
}
