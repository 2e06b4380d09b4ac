//! Threshold evaluators, bound audits, boundary witnesses and constant
//! calibration.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bineq::{deficit, poincare_gap, PoincareMode};
use crate::bodies::{Direction, SymmetricBody};
use crate::corpus::CorpusEntry;
use crate::error::{Error, Result};
use crate::function::{FunctionSpec, Polynomial};
use crate::gauss::{
    boundary_stats, facet_integrals, facet_polynomial_integral, measure, perimeter, Engine, MeasureEstimate, Method,
    PerimeterEngine,
};
use crate::sampling::{GaussianSource, GaussianStream, SampleConfig};
use crate::special::{
    ball_mass, ball_radius_for_mass, ball_truncated_second_moment, chi_square_cdf, pdf, strip_mass_unchecked,
    upper_mills,
};
use crate::stats::{MeanCov, MeanVar};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Provenance {
    Default,
    Calibrated { corpus: String, seed: u64, samples: usize },
}

/// The body that fixes a calibrated constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Binding {
    pub constant: String,
    pub body: String,
    pub required: f64,
}

/// Absolute constants of the stability estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantsRecord {
    pub c_weak: f64,
    #[serde(rename = "C_weak")]
    pub big_c_weak: f64,
    pub c_prop: f64,
    #[serde(rename = "C_prop")]
    pub big_c_prop: f64,
    pub c_ball: f64,
    pub c_iso: f64,
    #[serde(rename = "C_q")]
    pub big_c_q: f64,
    pub provenance: Provenance,
    #[serde(default)]
    pub bindings: Vec<Binding>,
}

impl Default for ConstantsRecord {
    fn default() -> Self {
        Self {
            c_weak: 1.0,
            big_c_weak: 1.0,
            c_prop: 1.0,
            big_c_prop: 1.0,
            c_ball: 1.0,
            c_iso: 1.0,
            big_c_q: 1.0,
            provenance: Provenance::Default,
            bindings: Vec::new(),
        }
    }
}

impl ConstantsRecord {
    pub fn validate(&self) -> Result<()> {
        let named = [
            ("c_weak", self.c_weak),
            ("C_weak", self.big_c_weak),
            ("c_prop", self.c_prop),
            ("C_prop", self.big_c_prop),
            ("c_ball", self.c_ball),
            ("c_iso", self.c_iso),
            ("C_q", self.big_c_q),
        ];
        for (name, v) in named {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Calibration(format!("{name} must be positive and finite, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ThresholdKind {
    Weak {
        n: usize,
        a: f64,
        b: f64,
        epsilon: f64,
    },
    Strong {
        n: usize,
        x: Vec<f64>,
        y: Vec<f64>,
        delta: f64,
        alpha: f64,
        beta: f64,
        epsilon: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub r_lo: f64,
    /// Absent when the logarithm's argument is at most 1.
    pub r_hi: Option<f64>,
    pub flag: Option<String>,
}

fn sqrt_log(arg: f64) -> Option<f64> {
    (arg > 1.0).then(|| arg.ln().sqrt())
}

pub fn thresholds(kind: &ThresholdKind, constants: &ConstantsRecord) -> Result<Thresholds> {
    match kind {
        ThresholdKind::Weak { n, a, b, epsilon } => {
            let (n, a, b, eps) = (*n, *a, *b, *epsilon);
            if !(a > 0.0 && a < b && b.is_finite()) {
                return Err(Error::Domain(format!("thresholds need 0 < a < b, got a={a}, b={b}")));
            }
            if !(eps >= 0.0) || n == 0 {
                return Err(Error::Domain(format!("thresholds need n ≥ 1 and ε ≥ 0, got n={n}, ε={eps}")));
            }
            let nf = n as f64;
            let l = (b / a).ln();
            let arg = constants.c_weak * l * l / (nf * nf * eps);
            let r_lo = constants.big_c_weak * nf.sqrt() * eps.powf(1.0 / (nf + 1.0)) * l.powf(-2.0 / (nf + 1.0)) / a;
            let r_hi = sqrt_log(arg).map(|s| s / b);
            Ok(Thresholds {
                r_lo,
                flag: r_hi
                    .is_none()
                    .then(|| format!("log argument {arg} ≤ 1: upper threshold absent")),
                r_hi,
            })
        }
        ThresholdKind::Strong {
            n,
            x,
            y,
            delta,
            alpha,
            beta,
            epsilon,
        } => {
            let (n, eps) = (*n, *epsilon);
            if x.len() != n || y.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: x.len().min(y.len()),
                });
            }
            if !(eps >= 0.0 && *delta > 0.0 && *alpha > 0.0 && *beta > 0.0) {
                return Err(Error::Domain("thresholds need δ, α, β > 0 and ε ≥ 0".into()));
            }
            let norm = |v: &[f64]| v.iter().map(|t| (2.0 * t).exp()).sum::<f64>().sqrt();
            let (mut ex, mut ey) = (norm(x), norm(y));
            if ex > ey {
                std::mem::swap(&mut ex, &mut ey);
            }
            let nf = n as f64;
            let k = delta * delta * alpha * beta;
            let arg = k / (eps * nf * nf);
            let r_hi = sqrt_log(arg).map(|s| s / ey);
            let r_lo = constants.big_c_weak * nf.sqrt() * eps.powf(1.0 / (nf + 1.0)) * k.powf(-1.0 / (nf + 1.0)) / ex;
            Ok(Thresholds {
                r_lo,
                flag: r_hi
                    .is_none()
                    .then(|| format!("log argument {arg} ≤ 1: upper threshold absent")),
                r_hi,
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "branch")]
pub enum Branch {
    UpperBranch,
    LowerBranch,
    Violated,
    Inconclusive { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum VerdictInputs {
    Weak {
        n: usize,
        a: f64,
        b: f64,
        epsilon: f64,
        epsilon_error: f64,
    },
    Dichotomy {
        n: usize,
        q: f64,
        q_error: f64,
        delta: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityVerdict {
    pub r: f64,
    pub r_lo: f64,
    pub r_hi: Option<f64>,
    pub branch: Branch,
    pub inputs: VerdictInputs,
}

/// Decides the branch from thresholds at the central value and at the
/// strict and lenient ends of the error bar.
fn classify(r: f64, central: &Thresholds, strict: &Thresholds, lenient: &Thresholds, regime: Option<&str>) -> Branch {
    if let Some(reason) = regime {
        return Branch::Inconclusive { reason: reason.into() };
    }
    if central.r_hi.is_none() {
        return Branch::Inconclusive {
            reason: "deficit outside the small regime: upper threshold absent".into(),
        };
    }
    if strict.r_hi.is_some_and(|h| r >= h) {
        return Branch::UpperBranch;
    }
    if r <= strict.r_lo {
        return Branch::LowerBranch;
    }
    if lenient.r_hi.is_some_and(|h| r >= h) || r <= lenient.r_lo {
        return Branch::Inconclusive {
            reason: "error bars straddle a branch boundary".into(),
        };
    }
    Branch::Violated
}

/// Measures the B-deficit for (a, b) and places r(K) against the thresholds.
pub fn weak_verdict(
    body: &SymmetricBody,
    a: f64,
    b: f64,
    engine: Engine,
    constants: &ConstantsRecord,
) -> Result<StabilityVerdict> {
    let n = body.dim();
    let r = body.in_radius().value;
    let rep = deficit(body, a, b, engine)?;
    let (eps, se) = (rep.epsilon, rep.epsilon_error);
    let at = |e: f64| {
        thresholds(
            &ThresholdKind::Weak {
                n,
                a,
                b,
                epsilon: e.max(0.0),
            },
            constants,
        )
    };
    let central = at(eps)?;
    let branch = classify(r, &central, &at(eps - 3.0 * se)?, &at(eps + 3.0 * se)?, None);
    Ok(StabilityVerdict {
        r,
        r_lo: central.r_lo,
        r_hi: central.r_hi,
        branch,
        inputs: VerdictInputs::Weak {
            n,
            a,
            b,
            epsilon: eps,
            epsilon_error: se,
        },
    })
}

/// Quantities shared by the audits and the dichotomy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BodyProfile {
    pub n: usize,
    pub r: f64,
    pub gamma: MeasureEstimate,
    pub perimeter: MeasureEstimate,
    /// ∫_{rB} |x|² dγ
    pub ball_second: f64,
}

pub fn body_profile(body: &SymmetricBody, config: SampleConfig) -> Result<BodyProfile> {
    let n = body.dim();
    let r = body.in_radius().value;
    Ok(BodyProfile {
        n,
        r,
        gamma: measure(body, Engine::Auto(config))?,
        perimeter: perimeter(body, PerimeterEngine::Auto(config.derive(1)))?,
        ball_second: ball_truncated_second_moment(n, r),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DichotomyReport {
    pub q: f64,
    pub q_error: f64,
    pub r: f64,
    pub gamma: MeasureEstimate,
    pub perimeter: MeasureEstimate,
    pub ball_second: f64,
    pub delta: f64,
    /// √(log Q)
    pub r_upper: Option<f64>,
    /// C_prop·√n·δ^{1/(n+1)}
    pub r_lower: f64,
    pub verdict: StabilityVerdict,
}

fn dichotomy_q(p: &BodyProfile) -> (f64, f64) {
    let g = p.gamma.value;
    let per = p.perimeter.value;
    let q = g / p.ball_second + g / (p.r * per);
    let dg = 1.0 / p.ball_second + 1.0 / (p.r * per);
    let dp = g / (p.r * per * per);
    (q, (dg * p.gamma.std_error).hypot(dp * p.perimeter.std_error))
}

fn dichotomy_thresholds(n: usize, q: f64, constants: &ConstantsRecord) -> Thresholds {
    let nf = n as f64;
    Thresholds {
        r_lo: constants.big_c_prop * nf.sqrt() * q.max(f64::MIN_POSITIVE).powf(-1.0 / (nf + 1.0)),
        r_hi: sqrt_log(q),
        flag: None,
    }
}

pub fn dichotomy_from_profile(p: &BodyProfile, constants: &ConstantsRecord) -> Result<DichotomyReport> {
    if !(p.r > 0.0) {
        return Err(Error::Precondition("dichotomy needs a positive in-radius".into()));
    }
    if p.r.is_infinite() {
        return Err(Error::Precondition(
            "dichotomy needs a finite in-radius: the perimeter term is undefined for the whole space".into(),
        ));
    }
    let (q, q_err) = dichotomy_q(p);
    let central = dichotomy_thresholds(p.n, q, constants);
    // larger Q raises √log Q and lowers the lower threshold
    let strict = dichotomy_thresholds(p.n, q + 3.0 * q_err, constants);
    let lenient = dichotomy_thresholds(p.n, (q - 3.0 * q_err).max(0.0), constants);
    let delta = 1.0 / q;
    let regime = (delta >= constants.c_prop).then_some("δ = 1/Q is not below c_prop");
    let branch = classify(p.r, &central, &strict, &lenient, regime);
    Ok(DichotomyReport {
        q,
        q_error: q_err,
        r: p.r,
        gamma: p.gamma,
        perimeter: p.perimeter,
        ball_second: p.ball_second,
        delta,
        r_upper: central.r_hi,
        r_lower: central.r_lo,
        verdict: StabilityVerdict {
            r: p.r,
            r_lo: central.r_lo,
            r_hi: central.r_hi,
            branch,
            inputs: VerdictInputs::Dichotomy {
                n: p.n,
                q,
                q_error: q_err,
                delta,
            },
        },
    })
}

pub fn dichotomy_quantity(
    body: &SymmetricBody,
    config: SampleConfig,
    constants: &ConstantsRecord,
) -> Result<DichotomyReport> {
    let r = body.in_radius().value;
    if r.is_infinite() {
        return Err(Error::Precondition(
            "dichotomy needs a finite in-radius: the perimeter term is undefined for the whole space".into(),
        ));
    }
    dichotomy_from_profile(&body_profile(body, config)?, constants)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditKind {
    IsoBig,
    IsoSmall,
    BallMass,
    BallMoment,
    Komatsu,
    StripPerimeter,
}

impl AuditKind {
    pub const ALL: [AuditKind; 6] = [
        Self::IsoBig,
        Self::IsoSmall,
        Self::BallMass,
        Self::BallMoment,
        Self::Komatsu,
        Self::StripPerimeter,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::IsoBig => "iso_big",
            Self::IsoSmall => "iso_small",
            Self::BallMass => "ball_mass",
            Self::BallMoment => "ball_moment",
            Self::Komatsu => "komatsu",
            Self::StripPerimeter => "strip_perimeter",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AuditSubject<'a> {
    Body { label: &'a str, body: &'a SymmetricBody },
    Profile { label: &'a str, profile: &'a BodyProfile },
    Ball { n: usize, r: f64 },
    Dim { n: usize },
    Radius { r: f64 },
}

/// One checked inequality lhs ≥ rhs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRow {
    pub inequality: String,
    pub subject: String,
    pub lhs: f64,
    pub rhs: f64,
    /// lhs − rhs
    pub slack: f64,
    /// Standard error of the slack.
    pub error: f64,
    pub skipped: Option<String>,
}

impl AuditRow {
    fn new(inequality: &str, subject: &str, lhs: f64, rhs: f64, error: f64) -> Self {
        Self {
            inequality: inequality.into(),
            subject: subject.into(),
            lhs,
            rhs,
            slack: lhs - rhs,
            error,
            skipped: None,
        }
    }

    fn skipped(inequality: &str, subject: &str, reason: String) -> Self {
        Self {
            inequality: inequality.into(),
            subject: subject.into(),
            lhs: f64::NAN,
            rhs: f64::NAN,
            slack: f64::NAN,
            error: 0.0,
            skipped: Some(reason),
        }
    }

    /// Skipped rows hold vacuously.
    pub fn holds(&self) -> bool {
        self.skipped.is_some() || self.slack >= -3.0 * self.error
    }
}

/// Radius of the ball whose Gaussian measure equals that of the strip |x₁| ≤ 1.
pub fn strip_ball_radius(n: usize) -> Result<f64> {
    ball_radius_for_mass(n, strip_mass_unchecked(1.0), 1e-10)
}

fn komatsu_rows(r: f64) -> Result<Vec<AuditRow>> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::Domain(format!("komatsu needs R > 0, got {r}")));
    }
    let e = (-r * r / 2.0).exp();
    let mid = upper_mills(r);
    let subject = format!("R={r}");
    Ok(vec![
        AuditRow::new("komatsu_lower", &subject, mid, e / (r + 1.0), 0.0),
        AuditRow::new("komatsu_upper", &subject, e / r, mid, 0.0),
    ])
}

fn ball_mass_rows(n: usize, constants: &ConstantsRecord) -> Vec<AuditRow> {
    let nf = n as f64;
    let big = 2.0 * nf.sqrt();
    let subject = format!("n={n}");
    vec![
        AuditRow::new("ball_mass", &subject, ball_mass(n, big), 0.75, 0.0),
        AuditRow::new(
            "ball_mass_second",
            &subject,
            ball_truncated_second_moment(n, big),
            constants.c_ball * nf,
            0.0,
        ),
    ]
}

fn ball_moment_row(n: usize, r: f64, constants: &ConstantsRecord) -> AuditRow {
    let nf = n as f64;
    let rhs = (constants.c_ball / nf.sqrt()).powi(n as i32) * r.powi(n as i32 + 2) * (-r * r / 2.0).exp();
    AuditRow::new("ball_moment", &format!("n={n},r={r}"), ball_truncated_second_moment(n, r), rhs, 0.0)
}

fn profile_row(kind: AuditKind, label: &str, p: &BodyProfile, constants: &ConstantsRecord) -> Result<AuditRow> {
    let name = kind.name();
    let (n, r) = (p.n, p.r);
    let g = p.gamma.value;
    if !(r > 0.0 && r.is_finite()) {
        return Ok(AuditRow::skipped(name, label, format!("in-radius {r} is not positive and finite")));
    }
    let e = (-r * r / 2.0).exp();
    let per = p.perimeter.value;
    let per_err = p.perimeter.std_error;
    Ok(match kind {
        AuditKind::IsoBig => {
            if g < 0.5 {
                AuditRow::skipped(name, label, format!("γ(K) = {g} < 1/2"))
            } else {
                AuditRow::new(name, label, per, pdf(r), per_err)
            }
        }
        AuditKind::IsoSmall => {
            if g > 0.5 {
                AuditRow::skipped(name, label, format!("γ(K) = {g} > 1/2"))
            } else {
                let rhs = (constants.c_iso * r / (n as f64).sqrt()).powi(n as i32) * e;
                AuditRow::new(name, label, per, rhs, per_err)
            }
        }
        AuditKind::StripPerimeter => {
            let rt = strip_ball_radius(n)?;
            if r < rt {
                AuditRow::skipped(name, label, format!("r = {r} below the strip-ball radius {rt}"))
            } else {
                AuditRow::new(name, label, per, 2.0 * pdf(r), per_err)
            }
        }
        AuditKind::BallMoment => ball_moment_row(n, r, constants),
        AuditKind::BallMass | AuditKind::Komatsu => {
            return Err(Error::Precondition(format!("{name} audits take a dimension or a radius, not a body")))
        }
    })
}

/// Evaluates one inequality family on a subject.
pub fn bound_audit(
    kind: AuditKind,
    subject: &AuditSubject,
    constants: &ConstantsRecord,
    config: SampleConfig,
) -> Result<Vec<AuditRow>> {
    match (kind, subject) {
        (AuditKind::Komatsu, AuditSubject::Radius { r }) => komatsu_rows(*r),
        (AuditKind::BallMass, AuditSubject::Dim { n }) => Ok(ball_mass_rows(*n, constants)),
        (AuditKind::BallMoment, AuditSubject::Ball { n, r }) => Ok(vec![ball_moment_row(*n, *r, constants)]),
        (_, AuditSubject::Profile { label, profile }) => Ok(vec![profile_row(kind, label, profile, constants)?]),
        (_, AuditSubject::Body { label, body }) => {
            let p = body_profile(body, config)?;
            Ok(vec![profile_row(kind, label, &p, constants)?])
        }
        _ => Err(Error::Precondition(format!(
            "{} audits take {}",
            kind.name(),
            match kind {
                AuditKind::Komatsu => "a radius R",
                AuditKind::BallMass => "a dimension n",
                AuditKind::BallMoment => "a dimension and radius (n, r)",
                _ => "a body",
            }
        ))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SharpnessRow {
    pub r: f64,
    pub epsilon: f64,
    /// R / √(log(1 + 1/ε))
    pub implied_c: f64,
}

/// Strip deficit ε(R) for the dilates a, b and the implied constant.
pub fn strip_sharpness(a: f64, b: f64, r_grid: &[f64]) -> Result<Vec<SharpnessRow>> {
    if !(a > 0.0 && a < b && b.is_finite()) {
        return Err(Error::Domain(format!("strip sharpness needs 0 < a < b, got a={a}, b={b}")));
    }
    // log(1 − F(t)) with F(t) = 2(1 − Φ(tR)) = erfc(tR/√2)
    let log_mass = |t: f64| (-crate::special::erfc(t / std::f64::consts::SQRT_2)).ln_1p();
    r_grid
        .iter()
        .map(|&r| {
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::Domain(format!("R must be positive, got {r}")));
            }
            let m = (a * b).sqrt();
            let log_ratio = log_mass(m * r) - 0.5 * (log_mass(a * r) + log_mass(b * r));
            let epsilon = log_ratio.exp_m1();
            Ok(SharpnessRow {
                r,
                epsilon,
                implied_c: r / (1.0 / epsilon).ln_1p().sqrt(),
            })
        })
        .collect()
}

fn require_polytopal_inradius(body: &SymmetricBody, what: &str) -> Result<f64> {
    if body.as_slabs().is_none() {
        return Err(Error::Unsupported(format!("{what} needs a polytopal body, got {}", body.kind())));
    }
    let r = body.in_radius().value;
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::Precondition(format!("{what} needs a finite positive in-radius, got {r}")));
    }
    Ok(r)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceReport {
    /// ∫_{∂K} g² dγ_∂
    pub lhs: f64,
    pub lhs_error: f64,
    /// (1/r) ∫_K (n g² + |∇g|²) dγ
    pub rhs: f64,
    pub rhs_error: f64,
    /// rhs − lhs
    pub slack: f64,
    pub error: f64,
    pub r: f64,
    pub method: Method,
}

impl TraceReport {
    pub fn holds(&self) -> bool {
        self.slack >= -3.0 * self.error
    }
}

/// Trace inequality ∫_{∂K} g² dγ_∂ ≤ (1/r) ∫_K (n g² + |∇g|²) dγ.
pub fn trace_check(body: &SymmetricBody, g: &FunctionSpec<f64>, config: SampleConfig) -> Result<TraceReport> {
    let n = body.dim();
    if g.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: g.dim(),
        });
    }
    let r = require_polytopal_inradius(body, "trace_check")?;
    let p = g.to_polynomial();
    let g2 = p.mul(&p);
    if let Some(lhs) = facet_polynomial_integral(body, &g2, |_| 1.0) {
        let ip = body.simplify().as_interval_product().expect("facet path implies an interval product");
        let grad2 = p
            .gradient()
            .iter()
            .fold(Polynomial::zero(n), |acc, d| acc.add(&d.mul(d)));
        let inner = g2.scale(n as f64).add(&grad2).integrate_box(&ip.half_widths);
        let rhs = inner / r;
        return Ok(TraceReport {
            lhs,
            lhs_error: 0.0,
            rhs,
            rhs_error: 0.0,
            slack: rhs - lhs,
            error: 0.0,
            r,
            method: Method::ClosedForm,
        });
    }
    config.require_at_least(crate::gauss::MIN_MEASURE_SAMPLES)?;
    let src = GaussianStream::new(config, n);
    let lhs = facet_integrals(body, &src, 1, &|x, _, out| {
        let v = g.eval(x);
        out[0] += v * v;
    })?[0];
    let inner_src = GaussianStream::new(config.derive(1), n);
    let inner = inner_src
        .fold(
            || (MeanVar::new(1), vec![0.0; n + 1]),
            |(acc, buf): &mut (MeanVar, Vec<f64>), z: &[f64]| {
                let (head, grad) = buf.split_at_mut(1);
                head[0] = if body.gauge(z) <= 1.0 {
                    g.gradient(z, grad);
                    let v = g.eval(z);
                    n as f64 * v * v + grad.iter().map(|t| t * t).sum::<f64>()
                } else {
                    0.0
                };
                acc.push(head);
            },
        )
        .0;
    let rhs = inner.mean(0) / r;
    let rhs_error = inner.std_error(0) / r;
    Ok(TraceReport {
        lhs: lhs.value,
        lhs_error: lhs.std_error,
        rhs,
        rhs_error,
        slack: rhs - lhs.value,
        error: lhs.std_error.hypot(rhs_error),
        r,
        method: Method::MonteCarlo,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoincareWitness {
    /// E_K[∇f]
    pub theta: Vec<f64>,
    /// E_K|∇f − θ|²
    pub w12_residual: f64,
    pub w12_error: f64,
    /// Dirichlet energy minus variance.
    pub epsilon: f64,
    pub epsilon_error: f64,
    /// ∫_{∂K} ⟨θ, n⟩² dγ_∂
    pub boundary_moment: f64,
    pub boundary_error: f64,
    /// 4ε
    pub w12_bound: f64,
    /// 2(n+1)γ(K)ε/r
    pub boundary_bound: f64,
    pub gamma: f64,
    pub r: f64,
    /// |∇_θ' E|∇f − θ'|²| at θ' = θ
    pub first_order_residual: f64,
    /// Error of 4ε − residual.
    pub w12_margin_error: f64,
    pub boundary_margin_error: f64,
    pub w12_holds: bool,
    pub boundary_holds: bool,
    pub method: Method,
}

struct WitnessMoments {
    mass: f64,
    mass_error: f64,
    ef: f64,
    ef2: f64,
    grad2: f64,
    theta: Vec<f64>,
    /// Errors of ε, the residual and 4ε − residual.
    errors: [f64; 3],
    method: Method,
}

fn witness_moments(body: &SymmetricBody, f: &FunctionSpec<f64>, config: SampleConfig) -> Result<WitnessMoments> {
    let n = body.dim();
    if let Some(ip) = body.simplify().as_interval_product().filter(|ip| ip.is_axis_aligned()) {
        let w = &ip.half_widths;
        let p = f.to_polynomial();
        let mass = Polynomial::constant(n, 1.0).integrate_box(w);
        let grads = p.gradient();
        return Ok(WitnessMoments {
            mass,
            mass_error: 0.0,
            ef: p.integrate_box(w) / mass,
            ef2: p.mul(&p).integrate_box(w) / mass,
            grad2: grads.iter().map(|d| d.mul(d).integrate_box(w)).sum::<f64>() / mass,
            theta: grads.iter().map(|d| d.integrate_box(w) / mass).collect(),
            errors: [0.0; 3],
            method: Method::ClosedForm,
        });
    }
    config.require_at_least(crate::bineq::MIN_HESSIAN_SAMPLES)?;
    let k = 3 + n;
    let src = GaussianStream::new(config, n);
    let stats = src
        .fold(
            || (MeanCov::new(k), vec![0.0; k]),
            |(acc, buf): &mut (MeanCov, Vec<f64>), z: &[f64]| {
                if body.gauge(z) > 1.0 {
                    return;
                }
                let (head, grad) = buf.split_at_mut(3);
                f.gradient(z, grad);
                let v = f.eval(z);
                head[0] = v;
                head[1] = v * v;
                head[2] = grad.iter().map(|t| t * t).sum();
                acc.push(buf);
            },
        )
        .0;
    let accepted = stats.count();
    if accepted < 2 {
        return Err(Error::UnresolvableMass {
            accepted,
            samples: config.samples as u64,
        });
    }
    let (ef, ef2, grad2) = (stats.mean(0), stats.mean(1), stats.mean(2));
    let theta: Vec<f64> = (0..n).map(|i| stats.mean(3 + i)).collect();
    let mut g_eps = vec![2.0 * ef, -1.0, 1.0];
    g_eps.resize(k, 0.0);
    let mut g_res = vec![0.0, 0.0, 1.0];
    g_res.extend(theta.iter().map(|t| -2.0 * t));
    let mut g_margin = vec![8.0 * ef, -4.0, 3.0];
    g_margin.extend(theta.iter().map(|t| 2.0 * t));
    let mass = accepted as f64 / config.samples as f64;
    Ok(WitnessMoments {
        mass,
        mass_error: (mass * (1.0 - mass) / config.samples as f64).sqrt(),
        ef,
        ef2,
        grad2,
        theta,
        errors: [
            stats.delta_std_error(&g_eps),
            stats.delta_std_error(&g_res),
            stats.delta_std_error(&g_margin),
        ],
        method: Method::MonteCarlo,
    })
}

/// Poincaré stability witness with θ = E_K[∇f].
pub fn poincare_stability_witness(
    body: &SymmetricBody,
    f: &FunctionSpec<f64>,
    config: SampleConfig,
) -> Result<PoincareWitness> {
    let n = body.dim();
    if f.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: f.dim(),
        });
    }
    let r = require_polytopal_inradius(body, "poincare_stability_witness")?;
    let m = witness_moments(body, f, config)?;
    let epsilon = m.grad2 - (m.ef2 - m.ef * m.ef);
    let theta_sq: f64 = m.theta.iter().map(|t| t * t).sum();
    let w12 = (m.grad2 - theta_sq).max(0.0);
    let [eps_err, w12_err, margin_err] = m.errors;
    if epsilon < -3.0 * eps_err {
        return Err(Error::Contradiction(format!(
            "Poincaré deficit {epsilon} is negative beyond three standard errors ({eps_err})"
        )));
    }
    let (boundary, boundary_error) = if theta_sq > 0.0 {
        let dir = Direction::normalize(DVector::from_column_slice(&m.theta))?;
        let s = boundary_stats(body, &[dir], &[], 1.0, config.derive(2))?;
        let b = s.dir_second_moment[0];
        (b.value * theta_sq, b.std_error * theta_sq)
    } else {
        (0.0, 0.0)
    };
    let nf = n as f64;
    let factor = 2.0 * (nf + 1.0) / r;
    let boundary_bound = factor * m.mass * epsilon;
    let boundary_margin_error = boundary_error
        .hypot(factor * m.mass * eps_err)
        .hypot(factor * epsilon * m.mass_error);
    Ok(PoincareWitness {
        theta: m.theta,
        w12_residual: w12,
        w12_error: w12_err,
        epsilon,
        epsilon_error: eps_err,
        boundary_moment: boundary,
        boundary_error,
        w12_bound: 4.0 * epsilon,
        boundary_bound,
        gamma: m.mass,
        r,
        first_order_residual: 0.0,
        w12_margin_error: margin_err,
        boundary_margin_error,
        w12_holds: w12 <= 4.0 * epsilon + 3.0 * margin_err,
        boundary_holds: boundary <= boundary_bound + 3.0 * boundary_margin_error,
        method: m.method,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadRow {
    pub index: usize,
    /// ∫_{∂K} ⟨t_i, n⟩² dγ_∂
    pub boundary: f64,
    pub boundary_error: f64,
    pub rhs: f64,
    /// boundary / (rhs / C_q)
    pub implied_constant: Option<f64>,
    pub slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadReport {
    /// 2E_K|Tx|² − Var_K⟨Tx, x⟩
    pub epsilon: f64,
    pub epsilon_error: f64,
    pub gamma: MeasureEstimate,
    pub perimeter: MeasureEstimate,
    pub ball_second: f64,
    pub r: f64,
    /// (γ⁺/∫_{rB}|x|² + 1/r)·n²·ε·γ(K)
    pub base: f64,
    pub rows: Vec<QuadRow>,
}

fn check_spd(t: &DMatrix<f64>, n: usize) -> Result<()> {
    if t.nrows() != n || t.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: t.nrows(),
        });
    }
    if (t - t.transpose()).amax() > 1e-12 * t.amax().max(1.0) {
        return Err(Error::Domain("T must be symmetric".into()));
    }
    if t.clone().cholesky().is_none() {
        return Err(Error::Domain("T must be positive definite".into()));
    }
    Ok(())
}

pub fn quad_boundary_check(
    body: &SymmetricBody,
    t: &DMatrix<f64>,
    config: SampleConfig,
    constants: &ConstantsRecord,
) -> Result<QuadReport> {
    let n = body.dim();
    check_spd(t, n)?;
    let r = require_polytopal_inradius(body, "quad_boundary_check")?;
    let rows: Vec<Vec<f64>> = (0..n).map(|i| t.row(i).iter().copied().collect()).collect();
    let f = FunctionSpec::quadratic(rows, 0.0)?;
    let gap = poincare_gap(body, &f, PoincareMode::EvenHalf, Engine::Auto(config))?;
    let (epsilon, epsilon_error) = (gap.gap, gap.gap_error);
    if epsilon < -3.0 * epsilon_error {
        return Err(Error::Contradiction(format!(
            "quadratic deficit {epsilon} is negative beyond three standard errors ({epsilon_error})"
        )));
    }
    let profile = body_profile(body, config.derive(3))?;
    let columns: Vec<DVector<f64>> = (0..n).map(|i| t.column(i).into_owned()).collect();
    let dirs = columns
        .iter()
        .map(|c| Direction::normalize(c.clone()))
        .collect::<Result<Vec<_>>>()?;
    let stats = boundary_stats(body, &dirs, &[], 1.0, config.derive(4))?;
    let nf = n as f64;
    let base = (profile.perimeter.value / profile.ball_second + 1.0 / r) * nf * nf * epsilon * profile.gamma.value;
    let rows = columns
        .iter()
        .zip(&stats.dir_second_moment)
        .enumerate()
        .map(|(i, (c, b))| {
            let scale = c.norm_squared();
            let boundary = b.value * scale;
            let rhs = constants.big_c_q * base;
            QuadRow {
                index: i,
                boundary,
                boundary_error: b.std_error * scale,
                rhs,
                implied_constant: (base > 0.0).then(|| boundary / base),
                slack: rhs - boundary,
            }
        })
        .collect();
    Ok(QuadReport {
        epsilon,
        epsilon_error,
        gamma: profile.gamma,
        perimeter: profile.perimeter,
        ball_second: profile.ball_second,
        r,
        base,
        rows,
    })
}

/// Calibrated constants together with the audit table they were fitted to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub constants: ConstantsRecord,
    pub rows: Vec<AuditRow>,
}

/// Dimensions covered by the ball audits during calibration.
pub const BALL_AUDIT_DIMS: std::ops::RangeInclusive<usize> = 1..=20;
/// Dilates used for the weak verdicts during calibration.
pub const CALIBRATION_DILATES: (f64, f64) = (0.5, 2.0);
const MARGIN: f64 = 1e-9;

struct Requirement {
    constant: &'static str,
    lower_bound: bool,
    best: Option<(f64, String)>,
}

impl Requirement {
    fn new(constant: &'static str, lower_bound: bool) -> Self {
        Self {
            constant,
            lower_bound,
            best: None,
        }
    }

    /// Records that the constant must be ≤ `v` (lower_bound = false: ≥ `v`).
    fn push(&mut self, v: f64, body: &str) -> Result<()> {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::Calibration(format!(
                "{} cannot be fixed by a positive constant on {body} (required {v})",
                self.constant
            )));
        }
        let tighter = match &self.best {
            None => true,
            Some((b, _)) => {
                if self.lower_bound {
                    v < *b
                } else {
                    v > *b
                }
            }
        };
        if tighter {
            self.best = Some((v, body.to_string()));
        }
        Ok(())
    }

    fn resolve(&self, default: f64, bindings: &mut Vec<Binding>) -> f64 {
        match &self.best {
            None => default,
            Some((v, body)) => {
                bindings.push(Binding {
                    constant: self.constant.into(),
                    body: body.clone(),
                    required: *v,
                });
                if self.lower_bound {
                    v * (1.0 - MARGIN)
                } else {
                    v * (1.0 + MARGIN)
                }
            }
        }
    }
}

struct EntryData {
    label: String,
    profile: BodyProfile,
    weak: Option<(f64, f64)>,
    quad: Option<QuadReport>,
}

fn entry_data(entry: &CorpusEntry, config: SampleConfig) -> Result<EntryData> {
    let body = &entry.body;
    let profile = body_profile(body, config)?;
    let finite = profile.r > 0.0 && profile.r.is_finite();
    let (a, b) = CALIBRATION_DILATES;
    let weak = if finite {
        let d = deficit(body, a, b, Engine::Auto(config.derive(5)))?;
        Some((d.epsilon, d.epsilon_error))
    } else {
        None
    };
    let quad = if finite && body.as_slabs().is_some() {
        let n = body.dim();
        Some(quad_boundary_check(body, &DMatrix::identity(n, n), config.derive(6), &ConstantsRecord::default())?)
    } else {
        None
    };
    Ok(EntryData {
        label: entry.label.clone(),
        profile,
        weak,
        quad,
    })
}

/// Fits the extremal constants making every audit, dichotomy and weak
/// verdict, and quadratic boundary check hold on the corpus.
pub fn calibrate_constants(corpus: &[CorpusEntry], corpus_id: &str, config: SampleConfig) -> Result<Calibration> {
    if corpus.is_empty() {
        return Err(Error::Calibration("empty corpus".into()));
    }
    let data: Vec<EntryData> = corpus
        .par_iter()
        .enumerate()
        .map(|(i, e)| entry_data(e, config.derive(i as u64)))
        .collect::<Result<_>>()?;
    let defaults = ConstantsRecord::default();
    let mut c_iso = Requirement::new("c_iso", true);
    let mut c_ball = Requirement::new("c_ball", true);
    let mut big_prop = Requirement::new("C_prop", false);
    let mut big_weak = Requirement::new("C_weak", false);
    let mut big_q = Requirement::new("C_q", false);
    let mut fixed_rows = Vec::new();

    for n in BALL_AUDIT_DIMS {
        let rows = ball_mass_rows(n, &defaults);
        c_ball.push(rows[1].lhs / n as f64, &format!("n={n}"))?;
        fixed_rows.push(rows[0].clone());
    }
    for r in (1..=24).map(|k| 0.25 * k as f64) {
        fixed_rows.extend(komatsu_rows(r)?);
    }
    for d in &data {
        let p = &d.profile;
        let (n, r) = (p.n, p.r);
        if !(r > 0.0 && r.is_finite()) {
            continue;
        }
        let nf = n as f64;
        for kind in [AuditKind::IsoBig, AuditKind::StripPerimeter] {
            fixed_rows.push(profile_row(kind, &d.label, p, &defaults)?);
        }
        if p.gamma.value <= 0.5 {
            let e = (-r * r / 2.0).exp();
            c_iso.push((nf.sqrt() / r) * (p.perimeter.value / e).powf(1.0 / nf), &d.label)?;
        }
        let moment = ball_truncated_second_moment(n, r);
        c_ball.push(
            nf.sqrt() * (moment * (r * r / 2.0).exp() / r.powi(n as i32 + 2)).powf(1.0 / nf),
            &d.label,
        )?;
        let (q, _) = dichotomy_q(p);
        if 1.0 / q < defaults.c_prop && !sqrt_log(q).is_some_and(|h| r >= h) {
            big_prop.push(r / (nf.sqrt() * q.powf(-1.0 / (nf + 1.0))), &d.label)?;
        }
        if let Some((eps, _)) = d.weak {
            let (a, b) = CALIBRATION_DILATES;
            if eps > 0.0 {
                let th = thresholds(&ThresholdKind::Weak { n, a, b, epsilon: eps }, &defaults)?;
                if th.r_hi.is_some_and(|h| r < h) {
                    big_weak.push(r / th.r_lo, &d.label)?;
                }
            }
        }
        if let Some(q) = &d.quad {
            for row in &q.rows {
                if let Some(c) = row.implied_constant {
                    if c > 0.0 {
                        big_q.push(c, &d.label)?;
                    }
                }
            }
        }
    }
    if let Some(bad) = fixed_rows.iter().find(|r| !r.holds()) {
        return Err(Error::Calibration(format!(
            "constant-free inequality {} fails on {}: slack {} (error {})",
            bad.inequality, bad.subject, bad.slack, bad.error
        )));
    }

    let mut bindings = Vec::new();
    let constants = ConstantsRecord {
        c_weak: defaults.c_weak,
        big_c_weak: big_weak.resolve(defaults.big_c_weak, &mut bindings),
        c_prop: defaults.c_prop,
        big_c_prop: big_prop.resolve(defaults.big_c_prop, &mut bindings),
        c_ball: c_ball.resolve(defaults.c_ball, &mut bindings),
        c_iso: c_iso.resolve(defaults.c_iso, &mut bindings),
        big_c_q: big_q.resolve(defaults.big_c_q, &mut bindings),
        provenance: Provenance::Calibrated {
            corpus: corpus_id.into(),
            seed: config.seed,
            samples: config.samples,
        },
        bindings,
    };
    constants.validate()?;
    let mut rows = fixed_rows;
    rows.extend(audit_rows(&data, &constants)?);
    Ok(Calibration { constants, rows })
}

fn audit_rows(data: &[EntryData], constants: &ConstantsRecord) -> Result<Vec<AuditRow>> {
    let mut rows = Vec::new();
    for n in BALL_AUDIT_DIMS {
        rows.push(ball_mass_rows(n, constants)[1].clone());
    }
    for d in data {
        for kind in [AuditKind::IsoSmall, AuditKind::BallMoment] {
            rows.push(profile_row(kind, &d.label, &d.profile, constants)?);
        }
    }
    Ok(rows)
}

/// Profiles, audits and verdicts of a corpus under fixed constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusAudit {
    pub rows: Vec<AuditRow>,
    pub dichotomy: Vec<(String, Branch)>,
    pub weak: Vec<(String, Branch)>,
    pub quad: Vec<(String, Vec<QuadRow>)>,
}

pub fn audit_corpus(corpus: &[CorpusEntry], constants: &ConstantsRecord, config: SampleConfig) -> Result<CorpusAudit> {
    let data: Vec<EntryData> = corpus
        .par_iter()
        .enumerate()
        .map(|(i, e)| entry_data(e, config.derive(i as u64)))
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for n in BALL_AUDIT_DIMS {
        rows.extend(ball_mass_rows(n, constants));
    }
    for r in (1..=24).map(|k| 0.25 * k as f64) {
        rows.extend(komatsu_rows(r)?);
    }
    let mut dichotomy = Vec::new();
    let mut weak = Vec::new();
    let mut quad = Vec::new();
    let (a, b) = CALIBRATION_DILATES;
    for (d, e) in data.iter().zip(corpus) {
        for kind in [
            AuditKind::IsoBig,
            AuditKind::IsoSmall,
            AuditKind::BallMoment,
            AuditKind::StripPerimeter,
        ] {
            rows.push(profile_row(kind, &d.label, &d.profile, constants)?);
        }
        let r = d.profile.r;
        if !(r > 0.0 && r.is_finite()) {
            continue;
        }
        dichotomy.push((d.label.clone(), dichotomy_from_profile(&d.profile, constants)?.verdict.branch));
        if let Some((eps, se)) = d.weak {
            let n = e.body.dim();
            let at = |v: f64| {
                thresholds(
                    &ThresholdKind::Weak {
                        n,
                        a,
                        b,
                        epsilon: v.max(0.0),
                    },
                    constants,
                )
            };
            let branch = classify(r, &at(eps)?, &at(eps - 3.0 * se)?, &at(eps + 3.0 * se)?, None);
            weak.push((d.label.clone(), branch));
        }
        if let Some(q) = &d.quad {
            let rows = q
                .rows
                .iter()
                .map(|row| QuadRow {
                    rhs: constants.big_c_q * q.base,
                    slack: constants.big_c_q * q.base - row.boundary,
                    ..row.clone()
                })
                .collect();
            quad.push((d.label.clone(), rows));
        }
    }
    Ok(CorpusAudit {
        rows,
        dichotomy,
        weak,
        quad,
    })
}

/// χ²-closed-form value of γ(2√n B).
pub fn double_sqrt_n_ball_mass(n: usize) -> f64 {
    chi_square_cdf(n, 4.0 * n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::standard_corpus;
    use crate::quadrature::integrate_to_infinity;

    #[test]
    fn threshold_examples() {
        let c = ConstantsRecord::default();
        let t = thresholds(
            &ThresholdKind::Weak {
                n: 2,
                a: 1.0,
                b: std::f64::consts::E,
                epsilon: 1e-6,
            },
            &c,
        )
        .unwrap();
        assert!((t.r_hi.unwrap() - 250_000f64.ln().sqrt() / std::f64::consts::E).abs() < 1e-12);
        assert!((t.r_lo - 2f64.sqrt() * 0.01).abs() < 1e-9);
        let tiny = thresholds(
            &ThresholdKind::Weak {
                n: 2,
                a: 1.0,
                b: 2.0,
                epsilon: 1e-300,
            },
            &c,
        )
        .unwrap();
        assert!(tiny.r_hi.unwrap() > 10.0 && tiny.r_lo < 1e-90);
        let s = thresholds(
            &ThresholdKind::Strong {
                n: 2,
                x: vec![0.0, 0.0],
                y: vec![1.0, 0.0],
                delta: 0.1,
                alpha: 0.5,
                beta: 0.5,
                epsilon: 0.1,
            },
            &c,
        )
        .unwrap();
        assert!(s.r_hi.is_none() && s.flag.is_some());
        assert!(thresholds(&ThresholdKind::Weak { n: 2, a: 2.0, b: 1.0, epsilon: 0.1 }, &c).is_err());
    }

    #[test]
    fn strong_thresholds_reorder_endpoints() {
        let c = ConstantsRecord::default();
        let mk = |x: Vec<f64>, y: Vec<f64>| {
            thresholds(
                &ThresholdKind::Strong {
                    n: 2,
                    x,
                    y,
                    delta: 1.0,
                    alpha: 1.0,
                    beta: 1.0,
                    epsilon: 1e-6,
                },
                &c,
            )
            .unwrap()
        };
        assert_eq!(mk(vec![0.0, 0.0], vec![0.5, 0.1]), mk(vec![0.5, 0.1], vec![0.0, 0.0]));
    }

    #[test]
    fn dichotomy_strip_values() {
        let c = ConstantsRecord::default();
        let cfg = SampleConfig::new(1, 10_000);
        let strip = |r: f64| SymmetricBody::strip(Direction::axis(2, 0), r).unwrap();
        let q1 = dichotomy_quantity(&strip(1.0), cfg, &c).unwrap();
        assert!((q1.q - 5.194_828).abs() < 1e-5, "{}", q1.q);
        assert_eq!(q1.q_error, 0.0);
        for r in [0.5, 2.0] {
            assert!(dichotomy_quantity(&strip(r), cfg, &c).unwrap().q.is_finite());
        }
        let small = dichotomy_quantity(&SymmetricBody::boxed(&[0.1, 0.1]).unwrap(), cfg, &c).unwrap();
        assert_eq!(small.verdict.branch, Branch::LowerBranch);
        assert!(dichotomy_quantity(&SymmetricBody::full_space(2), cfg, &c).is_err());
    }

    #[test]
    fn audit_examples() {
        let c = ConstantsRecord::default();
        let cfg = SampleConfig::new(1, 10_000);
        let bm = bound_audit(AuditKind::BallMass, &AuditSubject::Dim { n: 1 }, &c, cfg).unwrap();
        assert!((bm[0].slack - (strip_mass_unchecked(2.0) - 0.75)).abs() < 1e-15);
        let k = bound_audit(AuditKind::Komatsu, &AuditSubject::Radius { r: 1.0 }, &c, cfg).unwrap();
        assert!((k[0].rhs - 0.303_265_33).abs() < 1e-8);
        assert!((k[0].lhs - 0.397_689_745_4).abs() < 1e-9);
        assert!((k[1].lhs - 0.606_530_66).abs() < 1e-8);
        assert!(k.iter().all(|r| r.slack > 0.0));
        let wide = SymmetricBody::boxed(&[3.0, 3.0]).unwrap();
        let ib = bound_audit(AuditKind::IsoBig, &AuditSubject::Body { label: "wide", body: &wide }, &c, cfg).unwrap();
        assert!(ib[0].skipped.is_none() && ib[0].slack >= 0.0);
        let thin = SymmetricBody::boxed(&[0.2, 0.2]).unwrap();
        let skipped = bound_audit(AuditKind::IsoBig, &AuditSubject::Body { label: "thin", body: &thin }, &c, cfg).unwrap();
        assert!(skipped[0].skipped.is_some());
        assert!(bound_audit(AuditKind::Komatsu, &AuditSubject::Dim { n: 2 }, &c, cfg).is_err());
    }

    #[test]
    fn komatsu_sandwich_on_grid() {
        for k in 1..=24 {
            let r = 0.25 * k as f64;
            let q = integrate_to_infinity(|s: f64| (-s * s / 2.0).exp(), r, 1e-15);
            assert!((q.value - upper_mills(r)).abs() < 1e-12);
            for row in komatsu_rows(r).unwrap() {
                assert!(row.slack > 0.0, "{row:?}");
            }
        }
    }

    #[test]
    fn double_sqrt_n_ball_holds_up_to_twenty() {
        for n in 1..=20 {
            assert!(double_sqrt_n_ball_mass(n) >= 0.75);
        }
        assert!((strip_ball_radius(1).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn strip_sharpness_examples() {
        let rows = strip_sharpness(1.0, 4.0, &[1.0]).unwrap();
        assert!((rows[0].epsilon - 0.155_255_27).abs() < 1e-7);
        let grid: Vec<f64> = (0..=16).map(|k| 1.0 + 0.25 * k as f64).collect();
        let rows = strip_sharpness(1.0, 4.0, &grid).unwrap();
        let cs: Vec<f64> = rows.iter().map(|r| r.implied_c).collect();
        let (lo, hi) = cs.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &c| (a.min(c), b.max(c)));
        assert!(hi / lo <= 2.0);
        assert!(rows.windows(2).all(|w| w[1].epsilon < w[0].epsilon));
        assert!(strip_sharpness(4.0, 1.0, &[1.0]).is_err());
    }

    #[test]
    fn trace_examples() {
        let cfg = SampleConfig::new(3, 200_000);
        let seg = SymmetricBody::boxed(&[1.0]).unwrap();
        let t = trace_check(&seg, &FunctionSpec::Polynomial(Polynomial::constant(1, 1.0)), cfg).unwrap();
        assert!((t.lhs - 2.0 * pdf(1.0)).abs() < 1e-15);
        assert!((t.rhs - strip_mass_unchecked(1.0)).abs() < 1e-15);
        let zero = trace_check(&seg, &FunctionSpec::Polynomial(Polynomial::zero(1)), cfg).unwrap();
        assert_eq!((zero.lhs, zero.rhs), (0.0, 0.0));
        let b = SymmetricBody::boxed(&[1.0, 1.0]).unwrap();
        let g = FunctionSpec::linear(vec![1.0, 0.0]);
        let exact = trace_check(&b, &g, cfg).unwrap();
        assert!(exact.holds());
        // the facet engine agrees on a rotated copy
        let rot = b
            .linear_image(&DMatrix::from_row_slice(2, 2, &[0.6, -0.8, 0.8, 0.6]))
            .unwrap();
        let g_rot = FunctionSpec::linear(vec![0.6, 0.8]);
        let mc = trace_check(&rot, &g_rot, cfg).unwrap();
        assert_eq!(mc.method, Method::MonteCarlo);
        assert!((mc.lhs - exact.lhs).abs() <= 4.0 * mc.lhs_error);
        assert!((mc.rhs - exact.rhs).abs() <= 4.0 * mc.rhs_error);
        assert!(trace_check(&SymmetricBody::ball(2, 1.0).unwrap(), &g, cfg).is_err());
    }

    #[test]
    fn witness_examples() {
        let cfg = SampleConfig::new(4, 200_000);
        let b = SymmetricBody::boxed(&[1.0, 1.0]).unwrap();
        let lin = poincare_stability_witness(&b, &FunctionSpec::linear(vec![0.3, -1.0]), cfg).unwrap();
        assert!((lin.theta[0] - 0.3).abs() < 1e-14 && (lin.theta[1] + 1.0).abs() < 1e-14);
        assert!(lin.w12_residual.abs() < 1e-14 && lin.w12_holds);
        let even = poincare_stability_witness(&b, &FunctionSpec::diagonal_quadratic(&[1.0, 0.0]), cfg).unwrap();
        assert!(even.theta.iter().all(|t| t.abs() < 1e-14));
        assert_eq!(even.boundary_moment, 0.0);
        assert!(even.boundary_holds);
        let cubic = Polynomial::new(2, vec![(1.0, vec![1, 0]), (0.05, vec![3, 0])]).unwrap();
        let w = poincare_stability_witness(&b, &FunctionSpec::Polynomial(cubic), cfg).unwrap();
        assert!(w.w12_holds, "{w:?}");
        assert!(w.w12_residual > 0.0);
    }

    #[test]
    fn quad_check_examples() {
        let cfg = SampleConfig::new(5, 100_000);
        let c = ConstantsRecord::default();
        let b = SymmetricBody::boxed(&[1.0, 1.0]).unwrap();
        let q = quad_boundary_check(&b, &DMatrix::identity(2, 2), cfg, &c).unwrap();
        assert_eq!(q.epsilon_error, 0.0);
        assert!(q.epsilon > 0.0);
        assert!((q.rows[0].boundary - q.rows[1].boundary).abs() < 1e-15);
        let t = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0]));
        let q2 = quad_boundary_check(&b, &t, cfg, &c).unwrap();
        assert!((q2.rows[1].boundary - 4.0 * q.rows[1].boundary).abs() < 1e-14);
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(quad_boundary_check(&b, &bad, cfg, &c).is_err());
    }

    #[test]
    fn calibration_on_strips_binds_smallest_radius() {
        let corpus: Vec<CorpusEntry> = [0.5, 1.0, 2.0, 4.0]
            .iter()
            .map(|&r| CorpusEntry::new(format!("strip R={r}"), SymmetricBody::strip(Direction::axis(2, 0), r).unwrap()))
            .collect();
        let cal = calibrate_constants(&corpus, "strips", SampleConfig::new(1, 10_000)).unwrap();
        let b = cal.constants.bindings.iter().find(|b| b.constant == "c_iso").unwrap();
        assert_eq!(b.body, "strip R=0.5");
        assert!(cal.rows.iter().all(AuditRow::holds));
    }

    #[test]
    fn calibrated_constants_leave_no_violation() {
        let corpus = standard_corpus();
        let cfg = SampleConfig::new(17, 100_000);
        let cal = calibrate_constants(&corpus, "standard", cfg).unwrap();
        cal.constants.validate().unwrap();
        let audit = audit_corpus(&corpus, &cal.constants, cfg).unwrap();
        assert!(audit.rows.iter().all(AuditRow::holds));
        assert!(audit.dichotomy.iter().all(|(_, b)| *b != Branch::Violated), "{:?}", audit.dichotomy);
        assert!(audit.weak.iter().all(|(_, b)| *b != Branch::Violated), "{:?}", audit.weak);
        assert!(audit.quad.iter().all(|(_, rows)| rows.iter().all(|r| r.slack >= -3.0 * r.boundary_error)));
    }
}
