//! Acceptance criteria, each run end to end on seeded corpora.

use std::time::Instant;

use anyhow::{ensure, Result};
use gaussblab::bineq::{deficit, log_measure_hessian, midpoint_gap_identity, strong_deficit};
use gaussblab::corpus::{
    closed_form_corpus, polytope_ellipsoid_corpus, random_polytope, random_traceless, standard_corpus, STANDARD_CORPUS_ID,
};
use gaussblab::function::{FunctionSpec, Polynomial};
use gaussblab::gauss::{closed_form_measure, measure, Engine};
use gaussblab::mgm::{
    gradient_check, log_concavity_probe, mgm_solve, uniqueness_experiment, Evaluator, MgmOptions,
};
use gaussblab::quadrature::{integrate, integrate_to_infinity};
use gaussblab::sampling::derive_seed;
use gaussblab::special::pdf;
use gaussblab::stability::{
    audit_corpus, bound_audit, calibrate_constants, dichotomy_quantity, poincare_stability_witness, strip_sharpness,
    trace_check, AuditKind, AuditSubject, Branch, ConstantsRecord, Provenance,
};
use gaussblab::{Direction, SampleConfig, SymmetricBody};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

/// Samples used by the calibration recipe that produced the committed constants.
pub const CALIBRATION_SAMPLES: usize = 200_000;
pub const CALIBRATION_SEED: u64 = 1;

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    pub seed: u64,
    pub partitions: usize,
    pub constants: ConstantsRecord,
}

impl VerifyOptions {
    fn config(&self, tag: u64, samples: usize) -> SampleConfig {
        SampleConfig::new(derive_seed(self.seed, tag), samples).with_partitions(self.partitions)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CriterionResult {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub summary: String,
    pub seconds: f64,
    pub details: Value,
}

impl CriterionResult {
    pub fn line(&self) -> String {
        format!(
            "[{}] {:02} {:<22} {} ({:.1}s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.summary,
            self.seconds
        )
    }
}

struct Outcome {
    passed: bool,
    summary: String,
    details: Value,
}

type Check = fn(&VerifyOptions) -> Result<Outcome>;

pub const CRITERIA: [(u8, &str); 13] = [
    (1, "measure-oracle"),
    (2, "b-inequality"),
    (3, "hessian-sign"),
    (4, "midpoint-identity"),
    (5, "strip-sharpness"),
    (6, "komatsu"),
    (7, "bound-audits"),
    (8, "dichotomy"),
    (9, "trace-theorem"),
    (10, "poincare-witness"),
    (11, "equality-case"),
    (12, "mgm-solver"),
    (13, "log-concavity"),
];

fn check_for(id: u8) -> Check {
    match id {
        1 => measure_oracle,
        2 => b_inequality,
        3 => hessian_sign,
        4 => midpoint_identity,
        5 => sharpness,
        6 => komatsu,
        7 => bound_audits,
        8 => dichotomy,
        9 => trace_theorem,
        10 => witness,
        11 => equality_case,
        12 => mgm_solver,
        13 => log_concavity,
        _ => unreachable!("criterion ids run from 1 to 13"),
    }
}

pub fn run_criterion(id: u8, opts: &VerifyOptions) -> CriterionResult {
    let name = CRITERIA
        .iter()
        .find(|(i, _)| *i == id)
        .map(|(_, n)| *n)
        .unwrap_or("unknown");
    let start = Instant::now();
    let out = if (1..=13).contains(&id) {
        check_for(id)(opts)
    } else {
        Err(anyhow::anyhow!("no criterion {id}"))
    };
    let seconds = start.elapsed().as_secs_f64();
    match out {
        Ok(o) => CriterionResult {
            id,
            name,
            passed: o.passed,
            summary: o.summary,
            seconds,
            details: o.details,
        },
        Err(e) => CriterionResult {
            id,
            name,
            passed: false,
            summary: format!("error: {e:#}"),
            seconds,
            details: Value::Null,
        },
    }
}

pub fn run_all(opts: &VerifyOptions) -> Vec<CriterionResult> {
    CRITERIA.iter().map(|(id, _)| run_criterion(*id, opts)).collect()
}

fn measure_oracle(opts: &VerifyOptions) -> Result<Outcome> {
    let start = Instant::now();
    let corpus = closed_form_corpus(50, derive_seed(opts.seed, 100));
    let rows: Vec<Value> = corpus
        .par_iter()
        .enumerate()
        .map(|(i, e)| {
            let exact = closed_form_measure(&e.body).expect("corpus is closed form");
            let mc = measure(&e.body, Engine::MonteCarlo(opts.config(1000 + i as u64, 1_000_000)))?;
            let z = (mc.value - exact).abs() / mc.std_error.max(f64::MIN_POSITIVE);
            Ok(json!({"body": e.label, "exact": exact, "mc": mc.value, "std_error": mc.std_error, "z": z,
                      "ok": (mc.value - exact).abs() <= 4.0 * mc.std_error}))
        })
        .collect::<Result<_>>()?;
    let secs = start.elapsed().as_secs_f64();
    let fails = rows.iter().filter(|r| r["ok"] == false).count();
    let max_z = rows.iter().map(|r| r["z"].as_f64().unwrap_or(0.0)).fold(0.0, f64::max);
    Ok(Outcome {
        passed: fails == 0 && secs <= 300.0,
        summary: format!("{} bodies, N=1e6, {fails} outside 4σ, max |z| = {max_z:.2}, {secs:.1}s ≤ 300s", rows.len()),
        details: json!({"rows": rows, "seconds": secs}),
    })
}

fn random_corpus(opts: &VerifyOptions) -> Vec<gaussblab::corpus::CorpusEntry> {
    polytope_ellipsoid_corpus(100, derive_seed(opts.seed, 200))
}

fn b_inequality(opts: &VerifyOptions) -> Result<Outcome> {
    let rows: Vec<(String, f64, f64)> = random_corpus(opts)
        .par_iter()
        .enumerate()
        .map(|(i, e)| {
            let d = deficit(&e.body, 0.5, 2.0, Engine::Auto(opts.config(2000 + i as u64, 200_000)))?;
            Ok((e.label.clone(), d.epsilon, d.epsilon_error))
        })
        .collect::<Result<_>>()?;
    let bad: Vec<_> = rows.iter().filter(|(_, e, se)| *e < -3.0 * se).collect();
    let min = rows.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    Ok(Outcome {
        passed: bad.is_empty(),
        summary: format!("{} bodies at (1/2, 2): {} below −3σ, min ε = {min:.3e}", rows.len(), bad.len()),
        details: json!({"rows": rows, "violations": bad}),
    })
}

fn hessian_sign(opts: &VerifyOptions) -> Result<Outcome> {
    let rows: Vec<(String, f64, f64)> = random_corpus(opts)
        .par_iter()
        .enumerate()
        .map(|(i, e)| {
            let ones = vec![1.0; e.body.dim()];
            let h = log_measure_hessian(&e.body, &ones, 0.0, Engine::Auto(opts.config(3000 + i as u64, 200_000)))?;
            Ok((e.label.clone(), h.value, h.std_error))
        })
        .collect::<Result<_>>()?;
    let bad = rows.iter().filter(|(_, v, se)| *v > 3.0 * se).count();
    let full = log_measure_hessian(&SymmetricBody::full_space(5), &[1.0; 5], 0.0, Engine::ClosedForm)?.value;
    Ok(Outcome {
        passed: bad == 0 && full.abs() <= 1e-12,
        summary: format!(
            "{} bodies: {bad} with Var|x|² − 2E|x|² > 3σ; full space gives {full:e}",
            rows.len()
        ),
        details: json!({"rows": rows, "full_space": full}),
    })
}

fn midpoint_identity(opts: &VerifyOptions) -> Result<Outcome> {
    let mut strip_rows = Vec::new();
    for (r, x, y) in [
        (0.5, [0.0, 0.0], [1.0, -0.5]),
        (1.0, [-0.5, 0.3], [0.8, 0.0]),
        (2.0, [0.2, 0.2], [-1.0, 0.7]),
    ] {
        let s = SymmetricBody::strip(Direction::axis(2, 0), r)?;
        let g = midpoint_gap_identity(&s, &x, &y, 64, Engine::ClosedForm)?;
        strip_rows.push(json!({"R": r, "residual": g.residual, "ok": g.residual <= 1e-3}));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(opts.seed, 400));
    let bodies: Vec<SymmetricBody> = (0..10)
        .map(|i| {
            let n = 2 + i % 3;
            if i % 2 == 0 {
                random_polytope(n, 3, derive_seed(opts.seed, 410 + i as u64))
            } else {
                gaussblab::corpus::random_ellipsoid(n, derive_seed(opts.seed, 410 + i as u64))
            }
        })
        .collect();
    let cases: Vec<(Vec<f64>, Vec<f64>)> = bodies
        .iter()
        .map(|b| {
            let n = b.dim();
            let x = (0..n).map(|_| rng.random_range(-0.5..0.5)).collect();
            let y = (0..n).map(|_| rng.random_range(-0.5..0.5)).collect();
            (x, y)
        })
        .collect();
    let mc_rows: Vec<Value> = bodies
        .par_iter()
        .zip(&cases)
        .enumerate()
        .map(|(i, (b, (x, y)))| {
            let g = midpoint_gap_identity(b, x, y, 64, Engine::MonteCarlo(opts.config(4000 + i as u64, 20_000)))?;
            Ok(json!({"dim": b.dim(), "residual": g.residual, "budget": g.error_budget,
                      "ok": g.residual <= g.error_budget}))
        })
        .collect::<Result<_>>()?;
    let ok = |rows: &[Value]| rows.iter().filter(|r| r["ok"] == true).count();
    let max_strip = strip_rows.iter().map(|r| r["residual"].as_f64().unwrap()).fold(0.0, f64::max);
    Ok(Outcome {
        passed: ok(&strip_rows) == strip_rows.len() && ok(&mc_rows) == mc_rows.len(),
        summary: format!(
            "strips: max residual {max_strip:.1e} ≤ 1e-3; MC: {}/{} within budget",
            ok(&mc_rows),
            mc_rows.len()
        ),
        details: json!({"strips": strip_rows, "monte_carlo": mc_rows}),
    })
}

/// 2∫_0^t φ by adaptive quadrature.
fn strip_mass_by_quadrature(t: f64) -> f64 {
    2.0 * integrate(pdf, 0.0, t, 1e-15).value
}

fn sharpness(_: &VerifyOptions) -> Result<Outcome> {
    let grid: Vec<f64> = (0..=16).map(|k| 1.0 + 0.25 * k as f64).collect();
    let rows = strip_sharpness(1.0, 4.0, &grid)?;
    let cs: Vec<f64> = rows.iter().map(|r| r.implied_c).collect();
    let ratio = cs.iter().cloned().fold(0.0, f64::max) / cs.iter().cloned().fold(f64::INFINITY, f64::min);
    let f = |t: f64| strip_mass_by_quadrature(t);
    let oracle = f(2.0) / (f(1.0) * f(4.0)).sqrt() - 1.0;
    let e1 = rows[0].epsilon;
    let passed = ratio <= 2.0 && (e1 - 0.1552).abs() <= 1e-4 && (e1 - oracle).abs() <= 1e-4;
    Ok(Outcome {
        passed,
        summary: format!("ε(1) = {e1:.6} (oracle {oracle:.6}), C(R) max/min = {ratio:.3} ≤ 2"),
        details: json!({"rows": rows, "oracle": oracle, "ratio": ratio}),
    })
}

fn komatsu(opts: &VerifyOptions) -> Result<Outcome> {
    let mut worst = f64::INFINITY;
    let mut max_quad_err = 0.0f64;
    let mut rows = Vec::new();
    for k in 1..=24 {
        let r = 0.25 * k as f64;
        let q = integrate_to_infinity(|s: f64| (-s * s / 2.0).exp(), r, 1e-15);
        let audit = bound_audit(
            AuditKind::Komatsu,
            &AuditSubject::Radius { r },
            &opts.constants,
            opts.config(6000, 1_000),
        )?;
        let quad_gap = (q.value - audit[0].lhs).abs();
        max_quad_err = max_quad_err.max(q.error).max(quad_gap);
        let e = (-r * r / 2.0).exp();
        let lower = q.value - e / (r + 1.0);
        let upper = e / r - q.value;
        worst = worst.min(lower.min(upper));
        rows.push(json!({"R": r, "integral": q.value, "lower_slack": lower, "upper_slack": upper}));
    }
    Ok(Outcome {
        passed: worst > 0.0 && max_quad_err < 1e-12,
        summary: format!("24 radii: min slack {worst:.3e} > 0, quadrature error {max_quad_err:.1e} < 1e-12"),
        details: json!({"rows": rows}),
    })
}

fn calibration_config(constants: &ConstantsRecord) -> SampleConfig {
    match &constants.provenance {
        Provenance::Calibrated { seed, samples, .. } => SampleConfig::new(*seed, *samples),
        Provenance::Default => SampleConfig::new(CALIBRATION_SEED, CALIBRATION_SAMPLES),
    }
}

fn bound_audits(opts: &VerifyOptions) -> Result<Outcome> {
    let quarter: Vec<(usize, f64)> = (1..=20)
        .map(|n| Ok((n, bound_audit(AuditKind::BallMass, &AuditSubject::Dim { n }, &opts.constants, opts.config(7000, 1_000))?[0].lhs)))
        .collect::<Result<_>>()?;
    let quarter_ok = quarter.iter().all(|(_, g)| *g >= 0.75);
    let corpus = standard_corpus();
    let config = calibration_config(&opts.constants);
    let audit = audit_corpus(&corpus, &opts.constants, config)?;
    let kinds = ["iso_small", "ball_mass_second", "ball_moment"];
    let relevant: Vec<_> = audit
        .rows
        .iter()
        .filter(|r| kinds.contains(&r.inequality.as_str()) && r.skipped.is_none())
        .collect();
    let negative: Vec<_> = relevant.iter().filter(|r| r.slack < -3.0 * r.error).collect();
    let redo = calibrate_constants(&corpus, STANDARD_CORPUS_ID, config)?;
    let reproducible = redo.constants == opts.constants;
    Ok(Outcome {
        passed: quarter_ok && negative.is_empty() && reproducible,
        summary: format!(
            "γ(2√n B) ≥ 3/4 for n ≤ 20: {quarter_ok}; {} audited rows, {} negative; constants reproducible: {reproducible}",
            relevant.len(),
            negative.len()
        ),
        details: json!({"quarter": quarter, "negative": negative, "recalibrated": redo.constants}),
    })
}

fn dichotomy(opts: &VerifyOptions) -> Result<Outcome> {
    let audit = audit_corpus(&standard_corpus(), &opts.constants, calibration_config(&opts.constants))?;
    let violated: Vec<_> = audit.dichotomy.iter().filter(|(_, b)| *b == Branch::Violated).collect();
    let mut qs = Vec::new();
    for r in [0.5, 1.0, 2.0] {
        let s = SymmetricBody::strip(Direction::axis(2, 0), r)?;
        qs.push((r, dichotomy_quantity(&s, opts.config(8000, 10_000), &opts.constants)?.q));
    }
    let q1 = qs[1].1;
    // γ/∫_{B}|x|² dγ + γ/γ⁺ for the unit strip in the plane
    let gamma = strip_mass_by_quadrature(1.0);
    let oracle = gamma / (2.0 - 3.0 * (-0.5f64).exp()) + gamma / (2.0 * pdf(1.0));
    let passed = violated.is_empty() && (q1 - 5.1955).abs() <= 1e-3 && (q1 - oracle).abs() <= 1e-9;
    Ok(Outcome {
        passed,
        summary: format!(
            "{} verdicts, {} violated; Q(1) = {q1:.6} (oracle {oracle:.6}, reference 5.1955 ± 1e-3)",
            audit.dichotomy.len(),
            violated.len()
        ),
        details: json!({"verdicts": audit.dichotomy, "strips": qs}),
    })
}

fn random_polynomial(n: usize, rng: &mut ChaCha8Rng) -> Result<Polynomial<f64>> {
    let terms: Vec<(f64, Vec<u32>)> = (0..4)
        .map(|_| {
            let powers = (0..n).map(|_| rng.random_range(0..=2u32)).collect();
            (rng.random_range(-1.0..1.0), powers)
        })
        .collect();
    Ok(Polynomial::new(n, terms)?)
}

fn trace_theorem(opts: &VerifyOptions) -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(opts.seed, 900));
    let mut rows = Vec::new();
    for i in 0..20 {
        let n = 1 + i % 3;
        let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.3..2.5)).collect();
        let b = SymmetricBody::boxed(&w)?;
        let g = FunctionSpec::Polynomial(random_polynomial(n, &mut rng)?);
        let t = trace_check(&b, &g, opts.config(9000 + i as u64, 100_000))?;
        rows.push(json!({"half_widths": w, "lhs": t.lhs, "rhs": t.rhs, "slack": t.slack, "error": t.error,
                         "ok": t.holds()}));
    }
    let ok = rows.iter().filter(|r| r["ok"] == true).count();
    let min = rows.iter().map(|r| r["slack"].as_f64().unwrap()).fold(f64::INFINITY, f64::min);
    Ok(Outcome {
        passed: ok == rows.len(),
        summary: format!("{ok}/{} (box, polynomial) cases hold, min slack {min:.3e}", rows.len()),
        details: json!({"rows": rows}),
    })
}

fn witness(opts: &VerifyOptions) -> Result<Outcome> {
    let b = SymmetricBody::boxed(&[1.0, 1.0])?;
    let mut rows = Vec::new();
    for eta in [0.0, 0.05, 0.1] {
        let f = FunctionSpec::Polynomial(Polynomial::new(2, vec![(1.0, vec![1, 0]), (eta, vec![3, 0])])?);
        let w = poincare_stability_witness(&b, &f, opts.config(10_000, 200_000))?;
        rows.push(json!({"eta": eta, "residual": w.w12_residual, "bound": w.w12_bound,
                         "error": w.w12_margin_error, "boundary": w.boundary_moment,
                         "boundary_bound": w.boundary_bound, "ok": w.w12_holds}));
    }
    let ok = rows.iter().all(|r| r["ok"] == true);
    Ok(Outcome {
        passed: ok,
        summary: format!(
            "E|∇f − θ|² ≤ 4ε + 3σ for η ∈ {{0, 0.05, 0.1}}: {}",
            rows.iter().map(|r| format!("{:.2e}≤{:.2e}", r["residual"].as_f64().unwrap(), r["bound"].as_f64().unwrap())).collect::<Vec<_>>().join(", ")
        ),
        details: json!({"rows": rows}),
    })
}

fn equality_case(opts: &VerifyOptions) -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(opts.seed, 1100));
    let mut rows = Vec::new();
    for i in 0..10 {
        let k = 1 + i % 3;
        let free = 1 + i % 2;
        let factor = match i % 3 {
            0 => SymmetricBody::boxed(&(0..k).map(|_| rng.random_range(0.4..2.0)).collect::<Vec<_>>())?,
            1 => SymmetricBody::ball(k, rng.random_range(0.5..2.0))?,
            _ => random_polytope(k, 2, derive_seed(opts.seed, 1110 + i as u64)),
        };
        let body = SymmetricBody::cylinder(factor, free)?;
        let x: Vec<f64> = (0..k + free).map(|_| rng.random_range(-0.5..0.5)).collect();
        let mut y = x.clone();
        for v in y.iter_mut().skip(k) {
            *v = rng.random_range(-1.0..1.0);
        }
        let d = strong_deficit(&body, &x, &y, Engine::MonteCarlo(opts.config(11_000 + i as u64, 100_000)))?;
        rows.push(json!({"factor_dim": k, "free_dims": free, "epsilon": d.epsilon, "error": d.epsilon_error,
                         "ok": d.epsilon.abs() <= 3.0 * d.epsilon_error}));
    }
    let ok = rows.iter().filter(|r| r["ok"] == true).count();
    Ok(Outcome {
        passed: ok == rows.len(),
        summary: format!("{ok}/{} cylinders with |ε| ≤ 3σ", rows.len()),
        details: json!({"rows": rows}),
    })
}

/// E[x² | |x| ≤ a] with Φ from quadrature.
fn interval_moment_oracle(a: f64) -> f64 {
    1.0 - 2.0 * a * pdf(a) / strip_mass_by_quadrature(a)
}

/// Root s of m(s·a) = m(b/s) by bisection.
pub fn two_box_oracle(a: f64, b: f64) -> f64 {
    let (mut lo, mut hi) = (1e-3_f64, 1e3_f64);
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if interval_moment_oracle(mid * a) < interval_moment_oracle(b / mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo * hi).sqrt()
}

fn mgm_solver(opts: &VerifyOptions) -> Result<Outcome> {
    let config = opts.config(12_000, 100_000);
    let b = SymmetricBody::boxed(&[1.0, 2.0])?;
    let run = mgm_solve(&b, &MgmOptions::new(config))?;
    let s = two_box_oracle(1.0, 2.0);
    let t_err = (run.state.t[(0, 0)] - s).abs().max((run.state.t[(1, 1)] - 1.0 / s).abs());
    let solver_ok = run.converged && run.state.iteration <= 200 && t_err <= 1e-3;

    let ball = SymmetricBody::ball(2, 1.0)?;
    let ball_run = mgm_solve(&ball, &MgmOptions::new(config))?;
    let ball_ok = ball_run.state.iteration == 0;

    let tight = MgmOptions {
        tol: 1e-7,
        ..MgmOptions::new(config)
    };
    let uniq = uniqueness_experiment(&b, 5, derive_seed(opts.seed, 1200), &tight)?;
    let uniq_ok = uniq.gamma_consistent && uniq.max_procrustes_distance <= 1e-2;

    let eval = Evaluator::new(&b, config);
    let state = eval.state(&random_traceless(2, derive_seed(opts.seed, 1201)), 0)?;
    let grads = gradient_check(&eval, &state, 5, derive_seed(opts.seed, 1202), 1e-3)?;
    let grad_ok = grads.iter().all(|g| g.passes);
    ensure!(!grads.is_empty(), "gradient check produced no rows");
    Ok(Outcome {
        passed: solver_ok && ball_ok && uniq_ok && grad_ok,
        summary: format!(
            "box: {} iterations, |T − diag(s*, 1/s*)| = {t_err:.1e}; ball: {} steps; 5 starts: γ gap {:.1e} (budget {:.0e}), aligned maps {:.1e}; gradient {}/5",
            run.state.iteration,
            ball_run.state.iteration,
            uniq.max_gamma_gap,
            uniq.gamma_gap_budget,
            uniq.max_procrustes_distance,
            grads.iter().filter(|g| g.passes).count()
        ),
        details: json!({"trajectory": run.trajectory, "oracle": s, "uniqueness": uniq, "gradient": grads}),
    })
}

fn log_concavity(opts: &VerifyOptions) -> Result<Outcome> {
    let bodies: Vec<_> = standard_corpus().into_iter().filter(|e| e.body.dim() >= 2).take(10).collect();
    let grid = [0.0, 0.25, 0.5, 0.75, 1.0];
    let rows: Vec<Value> = bodies
        .par_iter()
        .enumerate()
        .flat_map(|(i, e)| {
            (0..10)
                .map(|j| {
                    let tag = 13_000 + 100 * i as u64 + j as u64;
                    let raw = random_traceless(e.body.dim(), derive_seed(opts.seed, tag));
                    let d: DMatrix<f64> = &raw / raw.norm().max(1e-300);
                    let p = log_concavity_probe(&e.body, &d, &grid, Engine::Auto(opts.config(tag, 100_000)))?;
                    Ok(json!({"body": e.label, "direction": j, "min_slack": p.min_slack,
                              "error": p.min_slack_error, "ok": p.holds}))
                })
                .collect::<Vec<Result<Value>>>()
        })
        .collect::<Result<_>>()?;
    let ok = rows.iter().filter(|r| r["ok"] == true).count();
    let worst = rows
        .iter()
        .map(|r| r["min_slack"].as_f64().unwrap() / r["error"].as_f64().unwrap().max(1e-300))
        .fold(f64::INFINITY, f64::min);
    Ok(Outcome {
        passed: ok == rows.len(),
        summary: format!(
            "{ok}/{} probes (10 bodies × 10 directions) with slack ≥ −3σ, worst slack/σ = {worst:.2}",
            rows.len()
        ),
        details: json!({"rows": rows}),
    })
}
