//! Maximal-Gaussian-measure position: isotropy ascent over volume-preserving
//! maps, log-concavity probes and a uniqueness experiment.

use std::sync::OnceLock;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bodies::{Direction, SymmetricBody};
use crate::corpus::random_traceless;
use crate::error::{Error, Result};
use crate::gauss::{
    deterministic_measure, deterministic_moments, joint_indicators, moments_from_source, Engine, MeasureEstimate,
    Method, MomentSummary,
};
use crate::sampling::{derive_seed, GaussianStream, SampleCloud, SampleConfig};

/// Smallest backtracking step.
pub const STEP_FLOOR: f64 = 1e-6;
/// Absolute error floor of deterministic (closed form or quadrature) objectives.
pub const DETERMINISTIC_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MgmState {
    /// Traceless symmetric generator.
    #[serde(with = "crate::matrix_serde")]
    pub d: DMatrix<f64>,
    /// e^D
    #[serde(with = "crate::matrix_serde")]
    pub t: DMatrix<f64>,
    /// Second-moment matrix of γ restricted to TK.
    #[serde(with = "crate::matrix_serde")]
    pub m: DMatrix<f64>,
    /// Ascent direction (tr M/n) I − M.
    #[serde(with = "crate::matrix_serde")]
    pub delta: DMatrix<f64>,
    pub isotropy_residual: f64,
    pub objective: MeasureEstimate,
    pub iteration: usize,
}

/// ‖M − (tr M/n) I‖_F / (tr M/n)
pub fn isotropy_residual(moments: &MomentSummary) -> Result<f64> {
    residual_of(&moments.second_moment)
}

fn residual_of(m: &DMatrix<f64>) -> Result<f64> {
    let n = m.nrows();
    let mean = m.trace() / n as f64;
    if !(mean > 0.0) {
        return Err(Error::Domain("second-moment matrix has zero trace".into()));
    }
    Ok((m - DMatrix::identity(n, n) * mean).norm() / mean)
}

fn traceless_part(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let s = (a + a.transpose()) * 0.5;
    let shift = s.trace() / n as f64;
    s - DMatrix::identity(n, n) * shift
}

/// e^D for symmetric D, renormalized to unit determinant.
pub fn volume_preserving_exp(d: &DMatrix<f64>) -> DMatrix<f64> {
    let n = d.nrows();
    let t = d.clone().exp();
    let t = (&t + t.transpose()) * 0.5;
    let det = t.determinant();
    t / det.powf(1.0 / n as f64)
}

/// Symmetric logarithm of the positive part of `t`: ½ log(TᵀT).
fn polar_log(t: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = (t.transpose() * t).symmetric_eigen();
    if eig.eigenvalues.iter().any(|&l| !(l > 0.0)) {
        return Err(Error::SingularMatrix("map lost rank during the ascent".into()));
    }
    let logs = eig.eigenvalues.map(|l| 0.5 * l.ln());
    let v = &eig.eigenvectors;
    Ok(traceless_part(&(v * DMatrix::from_diagonal(&logs) * v.transpose())))
}

/// Moments of γ on TK: closed form or planar quadrature when available,
/// otherwise a sample average on one stored cloud shared by every map.
pub struct Evaluator<'a> {
    body: &'a SymmetricBody,
    config: SampleConfig,
    cloud: OnceLock<SampleCloud>,
}

impl<'a> Evaluator<'a> {
    pub fn new(body: &'a SymmetricBody, config: SampleConfig) -> Self {
        Self {
            body,
            config,
            cloud: OnceLock::new(),
        }
    }

    pub fn body(&self) -> &SymmetricBody {
        self.body
    }

    fn cloud(&self) -> &SampleCloud {
        self.cloud
            .get_or_init(|| SampleCloud::generate(self.config, self.body.dim()))
    }

    pub fn moments_at(&self, t: &DMatrix<f64>) -> Result<MomentSummary> {
        let tk = self.body.linear_image(t)?;
        let res = match deterministic_moments(&tk) {
            Some(r) => r,
            None => moments_from_source(&tk, self.cloud()),
        };
        res.map_err(|e| match e {
            Error::UnresolvableMass { accepted, samples } => Error::Precondition(format!(
                "mass of TK unresolvable ({accepted} of {samples} samples) at T = {:?}",
                t.as_slice()
            )),
            other => other,
        })
    }

    /// γ(TK) on the evaluator's engine.
    pub fn measure_at(&self, t: &DMatrix<f64>) -> Result<MeasureEstimate> {
        let tk = self.body.linear_image(t)?;
        if let Some(m) = deterministic_measure(&tk) {
            return Ok(m);
        }
        crate::gauss::monte_carlo_measure(&tk, self.cloud())
    }

    pub fn state(&self, d: &DMatrix<f64>, iteration: usize) -> Result<MgmState> {
        let n = self.body.dim();
        if d.nrows() != n || d.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: d.nrows(),
            });
        }
        let d = traceless_part(d);
        let t = volume_preserving_exp(&d);
        let mom = self.moments_at(&t)?;
        let m = mom.second_moment;
        let mean = m.trace() / n as f64;
        Ok(MgmState {
            isotropy_residual: residual_of(&m)?,
            delta: DMatrix::identity(n, n) * mean - &m,
            objective: mom.mass,
            d,
            t,
            m,
            iteration,
        })
    }
}

fn accepts(old: &MeasureEstimate, new: &MeasureEstimate) -> bool {
    let noise = 3.0 * old.std_error.hypot(new.std_error);
    new.value >= old.value - noise - 1e-12 * old.value
}

/// One ascent step along Δ: T' = e^{sΔ} T, reduced to its positive part
/// e^{D'} (the rotation factor leaves γ unchanged). Backtracks by halving.
pub fn mgm_step(eval: &Evaluator, state: &MgmState, step: f64) -> Result<(MgmState, f64)> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::Domain(format!("step must be positive, got {step}")));
    }
    if state.delta.norm() == 0.0 {
        let mut same = state.clone();
        same.iteration += 1;
        return Ok((same, 0.0));
    }
    let mut s = step;
    let mut tried = Vec::new();
    while s >= STEP_FLOOR {
        let moved = volume_preserving_exp(&(&state.delta * s)) * &state.t;
        let cand = eval.state(&polar_log(&moved)?, state.iteration + 1)?;
        if accepts(&state.objective, &cand.objective) {
            return Ok((cand, s));
        }
        tried.push((s, cand.objective.value));
        s *= 0.5;
    }
    Err(Error::Stall(format!(
        "no step ≥ {STEP_FLOOR} accepted at iteration {}: objective {} ± {}, residual {}, tried (step, objective) {:?}",
        state.iteration, state.objective.value, state.objective.std_error, state.isotropy_residual, tried
    )))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MgmOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub step0: f64,
    pub config: SampleConfig,
}

impl MgmOptions {
    pub fn new(config: SampleConfig) -> Self {
        Self {
            tol: 1e-3,
            max_iter: 200,
            step0: 0.5,
            config,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub iteration: usize,
    pub objective: f64,
    pub std_error: f64,
    pub residual: f64,
    /// Accepted step (0 for the starting point).
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MgmRun {
    pub state: MgmState,
    pub trajectory: Vec<TrajectoryRow>,
    pub converged: bool,
    pub method: Method,
}

fn require_bounded(body: &SymmetricBody) -> Result<()> {
    let n = body.dim();
    for i in 0..n {
        let h = body.support(&Direction::axis(n, i))?;
        if !h.is_finite() {
            return Err(Error::Precondition(format!(
                "the ascent needs a bounded body; support along e{} is infinite",
                i + 1
            )));
        }
    }
    let r = body.in_radius().value;
    if !(r > 0.0) {
        return Err(Error::Precondition("the ascent needs a body with nonempty interior".into()));
    }
    Ok(())
}

fn row(s: &MgmState, step: f64) -> TrajectoryRow {
    TrajectoryRow {
        iteration: s.iteration,
        objective: s.objective.value,
        std_error: s.objective.std_error,
        residual: s.isotropy_residual,
        step,
    }
}

/// Ascends from `d0` (zero when absent) until the isotropy residual drops
/// below `tol` or `max_iter` steps have been taken.
pub fn mgm_solve_from(body: &SymmetricBody, d0: Option<&DMatrix<f64>>, opts: &MgmOptions) -> Result<MgmRun> {
    if !(opts.tol > 0.0) {
        return Err(Error::Domain(format!("tol must be positive, got {}", opts.tol)));
    }
    require_bounded(body)?;
    let n = body.dim();
    let eval = Evaluator::new(body, opts.config);
    let zero = DMatrix::zeros(n, n);
    let mut state = eval.state(d0.unwrap_or(&zero), 0)?;
    let mut trajectory = vec![row(&state, 0.0)];
    while state.isotropy_residual >= opts.tol && state.iteration < opts.max_iter {
        let (next, s) = mgm_step(&eval, &state, opts.step0)?;
        trajectory.push(row(&next, s));
        state = next;
    }
    Ok(MgmRun {
        converged: state.isotropy_residual < opts.tol,
        method: state.objective.method,
        state,
        trajectory,
    })
}

pub fn mgm_solve(body: &SymmetricBody, opts: &MgmOptions) -> Result<MgmRun> {
    mgm_solve_from(body, None, opts)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub grid: Vec<f64>,
    /// V(t) = log γ(e^{tD} K)
    pub values: Vec<f64>,
    /// V(t_j) − λ V(t_{j−1}) − (1 − λ) V(t_{j+1}) per interior node.
    pub slacks: Vec<f64>,
    pub errors: Vec<f64>,
    pub min_slack: f64,
    pub min_slack_error: f64,
    pub holds: bool,
    pub method: Method,
}

/// Midpoint concavity of t ↦ log γ(e^{tD} K) on a grid.
pub fn log_concavity_probe(body: &SymmetricBody, d: &DMatrix<f64>, grid: &[f64], engine: Engine) -> Result<ProbeReport> {
    let n = body.dim();
    if d.nrows() != n || d.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: d.nrows(),
        });
    }
    if grid.len() < 3 || grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Domain("grid needs at least 3 strictly increasing points".into()));
    }
    let d = traceless_part(d);
    let bodies = grid
        .iter()
        .map(|&t| body.linear_image(&volume_preserving_exp(&(&d * t))))
        .collect::<Result<Vec<_>>>()?;
    let k = grid.len();
    let exact: Option<Vec<MeasureEstimate>> = match engine {
        Engine::MonteCarlo(_) => None,
        _ => bodies.iter().map(deterministic_measure).collect(),
    };
    let (probs, cov, method) = match exact {
        Some(e) => (e.iter().map(|m| m.value).collect::<Vec<_>>(), None, e[0].method),
        None => {
            let config = match engine {
                Engine::ClosedForm => {
                    return Err(Error::NoClosedForm("the Gaussian measure of an image along the probe".into()))
                }
                Engine::Auto(c) | Engine::MonteCarlo(c) => c,
            };
            config.require_at_least(crate::gauss::MIN_MEASURE_SAMPLES)?;
            let src = GaussianStream::new(config, n);
            let stats = joint_indicators(&src, k, |z, out| {
                for (o, b) in out.iter_mut().zip(&bodies) {
                    *o = f64::from(u8::from(b.gauge(z) <= 1.0));
                }
            });
            (stats.means().to_vec(), Some(stats), Method::MonteCarlo)
        }
    };
    if let Some(j) = probs.iter().position(|&p| !(p > 0.0)) {
        return Err(Error::Precondition(format!("mass of e^(tD)K unresolvable at t = {}", grid[j])));
    }
    let values: Vec<f64> = probs.iter().map(|p| p.ln()).collect();
    let mut slacks = Vec::with_capacity(k - 2);
    let mut errors = Vec::with_capacity(k - 2);
    for j in 1..k - 1 {
        let lam = (grid[j + 1] - grid[j]) / (grid[j + 1] - grid[j - 1]);
        slacks.push(values[j] - lam * values[j - 1] - (1.0 - lam) * values[j + 1]);
        errors.push(match &cov {
            None => DETERMINISTIC_FLOOR,
            Some(stats) => {
                let mut g = vec![0.0; k];
                g[j - 1] = -lam / probs[j - 1];
                g[j] = 1.0 / probs[j];
                g[j + 1] = -(1.0 - lam) / probs[j + 1];
                stats.delta_std_error(&g)
            }
        });
    }
    let (jmin, &min_slack) = slacks
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("grid has an interior node");
    let holds = slacks.iter().zip(&errors).all(|(s, e)| *s >= -3.0 * e);
    Ok(ProbeReport {
        grid: grid.to_vec(),
        values,
        min_slack,
        min_slack_error: errors[jmin],
        slacks,
        errors,
        holds,
        method,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientCheckRow {
    #[serde(with = "crate::matrix_serde")]
    pub direction: DMatrix<f64>,
    /// ⟨Δ, Δ̂⟩_F
    pub predicted: f64,
    pub predicted_error: f64,
    /// Central difference with step h.
    pub finite_difference: f64,
    pub finite_difference_error: f64,
    pub combined_error: f64,
    pub passes: bool,
}

/// Compares ⟨Δ, Δ̂⟩_F with central differences of t ↦ log γ(e^{tΔ̂} T K)
/// along `count` random unit traceless directions.
pub fn gradient_check(
    eval: &Evaluator,
    state: &MgmState,
    count: usize,
    seed: u64,
    h: f64,
) -> Result<Vec<GradientCheckRow>> {
    let n = state.t.nrows();
    let mom = eval.moments_at(&state.t)?;
    (0..count)
        .map(|i| {
            let raw = random_traceless(n, derive_seed(seed, i as u64));
            let norm = raw.norm();
            if norm == 0.0 {
                return Err(Error::Domain("traceless direction vanished".into()));
            }
            let dir = raw / norm;
            let predicted = state.delta.dot(&dir);
            let predicted_error = mom.second_moment_error.component_mul(&dir).norm();
            let offsets = [h, -h, 2.0 * h, -2.0 * h];
            let maps: Vec<DMatrix<f64>> = offsets
                .iter()
                .map(|&s| volume_preserving_exp(&(&dir * s)) * &state.t)
                .collect();
            let (v, cov) = measure_many(eval, &maps)?;
            let fd_h = (v[0].ln() - v[1].ln()) / (2.0 * h);
            let fd_2h = (v[2].ln() - v[3].ln()) / (4.0 * h);
            let truncation = (fd_h - fd_2h).abs() / 3.0;
            let noise = match &cov {
                None => DETERMINISTIC_FLOOR / h,
                Some(stats) => stats.delta_std_error(&[1.0 / (2.0 * h * v[0]), -1.0 / (2.0 * h * v[1]), 0.0, 0.0]),
            };
            let fd_err = truncation.hypot(noise);
            let combined = fd_err.hypot(predicted_error);
            Ok(GradientCheckRow {
                direction: dir,
                predicted,
                predicted_error,
                finite_difference: fd_h,
                finite_difference_error: fd_err,
                combined_error: combined,
                passes: (fd_h - predicted).abs() <= 3.0 * combined,
            })
        })
        .collect()
}

fn measure_many(eval: &Evaluator, maps: &[DMatrix<f64>]) -> Result<(Vec<f64>, Option<crate::stats::MeanCov>)> {
    let bodies = maps
        .iter()
        .map(|t| eval.body().linear_image(t))
        .collect::<Result<Vec<_>>>()?;
    if let Some(v) = bodies
        .iter()
        .map(|b| deterministic_measure(b).map(|m| m.value))
        .collect::<Option<Vec<_>>>()
    {
        return Ok((v, None));
    }
    let stats = joint_indicators(eval.cloud(), bodies.len(), |z, out| {
        for (o, b) in out.iter_mut().zip(&bodies) {
            *o = f64::from(u8::from(b.gauge(z) <= 1.0));
        }
    });
    if stats.means().iter().any(|&p| !(p > 0.0)) {
        return Err(Error::UnresolvableMass {
            accepted: 0,
            samples: eval.config.samples as u64,
        });
    }
    Ok((stats.means().to_vec(), Some(stats)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartSummary {
    pub start: usize,
    #[serde(with = "crate::matrix_serde")]
    pub d0: DMatrix<f64>,
    #[serde(with = "crate::matrix_serde")]
    pub t: DMatrix<f64>,
    pub gamma: f64,
    pub gamma_error: f64,
    pub spectrum: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniquenessReport {
    pub starts: Vec<StartSummary>,
    pub max_gamma_gap: f64,
    /// Largest pairwise 3·√(se_i² + se_j²), floored at the deterministic floor.
    pub gamma_gap_budget: f64,
    pub gamma_consistent: bool,
    pub max_spectrum_distance: f64,
    /// max over pairs of min_Q ‖T_i T_j⁻¹ − Q‖_F over orthogonal Q
    pub max_procrustes_distance: f64,
    pub method: Method,
}

/// min over orthogonal Q of ‖A − Q‖_F, which is √Σ(σ_k − 1)².
pub fn procrustes_distance(a: &DMatrix<f64>) -> f64 {
    a.clone()
        .singular_values()
        .iter()
        .map(|s| (s - 1.0).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Runs the ascent from `starts` random traceless generators and compares
/// the resulting positions modulo rotations.
pub fn uniqueness_experiment(body: &SymmetricBody, starts: usize, seed: u64, opts: &MgmOptions) -> Result<UniquenessReport> {
    if starts < 2 {
        return Err(Error::Domain(format!("uniqueness needs at least 2 starts, got {starts}")));
    }
    let n = body.dim();
    let runs: Vec<StartSummary> = (0..starts)
        .into_par_iter()
        .map(|i| {
            let d0 = random_traceless(n, derive_seed(seed, i as u64));
            let run = mgm_solve_from(body, Some(&d0), opts)?;
            let mut spectrum: Vec<f64> = run.state.m.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
            spectrum.sort_by(f64::total_cmp);
            Ok(StartSummary {
                start: i,
                d0,
                t: run.state.t.clone(),
                gamma: run.state.objective.value,
                gamma_error: run.state.objective.std_error,
                spectrum,
                iterations: run.state.iteration,
                residual: run.state.isotropy_residual,
                converged: run.converged,
            })
        })
        .collect::<Result<_>>()?;
    let method = if runs.iter().all(|r| r.gamma_error == 0.0) {
        Method::Quadrature1d
    } else {
        Method::MonteCarlo
    };
    let (mut gap, mut budget, mut spec, mut proc) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let mut consistent = true;
    for (i, a) in runs.iter().enumerate() {
        for b in &runs[i + 1..] {
            let g = (a.gamma - b.gamma).abs();
            let allowed = (3.0 * a.gamma_error.hypot(b.gamma_error)).max(DETERMINISTIC_FLOOR);
            consistent &= g <= allowed;
            gap = gap.max(g);
            budget = budget.max(allowed);
            let s = a
                .spectrum
                .iter()
                .zip(&b.spectrum)
                .map(|(x, y)| (x - y).powi(2))
                .sum::<f64>()
                .sqrt();
            spec = spec.max(s);
            let inv = b
                .t
                .clone()
                .try_inverse()
                .ok_or_else(|| Error::SingularMatrix("final map is singular".into()))?;
            proc = proc.max(procrustes_distance(&(&a.t * inv)));
        }
    }
    Ok(UniquenessReport {
        starts: runs,
        max_gamma_gap: gap,
        gamma_gap_budget: budget,
        gamma_consistent: consistent,
        max_spectrum_distance: spec,
        max_procrustes_distance: proc,
        method,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::{cdf, pdf, strip_mass_unchecked};
    use nalgebra::DVector;

    fn cfg() -> SampleConfig {
        SampleConfig::new(7, 100_000)
    }

    /// E[x² | |x| ≤ a] from the density directly.
    fn m1(a: f64) -> f64 {
        1.0 - 2.0 * a * pdf(a) / (2.0 * cdf(a) - 1.0)
    }

    /// Root of m(s·a) = m(b/s) by bisection.
    fn two_box_oracle(a: f64, b: f64) -> f64 {
        let (mut lo, mut hi) = (1e-3_f64, 1e3_f64);
        for _ in 0..200 {
            let mid = (lo * hi).sqrt();
            if m1(mid * a) < m1(b / mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (lo * hi).sqrt()
    }

    #[test]
    fn exponential_matches_eigen_route() {
        let d = random_traceless(4, 3);
        let eig = d.clone().symmetric_eigen();
        let v = &eig.eigenvectors;
        let want = v * DMatrix::from_diagonal(&eig.eigenvalues.map(f64::exp)) * v.transpose();
        let got = volume_preserving_exp(&d);
        assert!((got.clone() - want).norm() < 1e-12);
        assert!((got.determinant() - 1.0).abs() < 1e-12);
        assert!((polar_log(&got).unwrap() - d).norm() < 1e-12);
    }

    #[test]
    fn residual_examples() {
        let b = SymmetricBody::boxed(&[1.0, 2.0]).unwrap();
        let e = Evaluator::new(&b, cfg());
        let s = e.state(&DMatrix::zeros(2, 2), 0).unwrap();
        assert!((s.isotropy_residual - 0.6410).abs() < 1e-4, "{}", s.isotropy_residual);
        assert!((s.delta[(0, 0)] - 0.24131).abs() < 1e-5 && (s.delta[(1, 1)] + 0.24131).abs() < 1e-5);
        let full = SymmetricBody::full_space(3);
        let f = Evaluator::new(&full, cfg()).state(&DMatrix::zeros(3, 3), 0).unwrap();
        assert_eq!(f.isotropy_residual, 0.0);
        assert_eq!(f.delta.norm(), 0.0);
        let ball = SymmetricBody::ball(3, 1.0).unwrap();
        let bs = Evaluator::new(&ball, cfg()).state(&DMatrix::zeros(3, 3), 0).unwrap();
        assert!(bs.isotropy_residual < 1e-12);
    }

    #[test]
    fn step_expands_narrow_side_and_fixed_points_stay() {
        let b = SymmetricBody::boxed(&[1.0, 2.0]).unwrap();
        let e = Evaluator::new(&b, cfg());
        let s0 = e.state(&DMatrix::zeros(2, 2), 0).unwrap();
        let (s1, step) = mgm_step(&e, &s0, 0.5).unwrap();
        assert!(step > 0.0);
        assert!(s1.t[(0, 0)] > 1.0 && s1.t[(1, 1)] < 1.0);
        assert!(s1.objective.value > s0.objective.value);
        assert!((s1.t.determinant() - 1.0).abs() < 1e-8);
        let ball = SymmetricBody::ball(2, 1.0).unwrap();
        let eb = Evaluator::new(&ball, cfg());
        let sb = eb.state(&DMatrix::zeros(2, 2), 0).unwrap();
        let (next, step) = mgm_step(&eb, &sb, 0.5).unwrap();
        assert_eq!(step, 0.0);
        assert_eq!(next.t, sb.t);
        assert!(mgm_step(&eb, &sb, 0.0).is_err());
    }

    #[test]
    fn box_converges_to_oracle() {
        let b = SymmetricBody::boxed(&[1.0, 2.0]).unwrap();
        let run = mgm_solve(&b, &MgmOptions::new(cfg())).unwrap();
        assert!(run.converged && run.state.iteration <= 200);
        let s = two_box_oracle(1.0, 2.0);
        assert!((s - 2f64.sqrt()).abs() < 1e-12);
        assert!((run.state.t[(0, 0)] - s).abs() < 1e-3, "{}", run.state.t);
        assert!((run.state.t[(1, 1)] - 1.0 / s).abs() < 1e-3);
        for w in run.trajectory.windows(2) {
            assert!(w[1].objective >= w[0].objective - 3.0 * w[0].std_error.hypot(w[1].std_error) - 1e-12);
        }
        let nb = SymmetricBody::boxed(&[0.5, 3.0]).unwrap();
        let opts = MgmOptions {
            tol: 1e-6,
            ..MgmOptions::new(cfg())
        };
        let run = mgm_solve(&nb, &opts).unwrap();
        let s = two_box_oracle(0.5, 3.0);
        assert!((run.state.t[(0, 0)] - s).abs() < 1e-3, "{} vs {s}", run.state.t);
    }

    #[test]
    fn isotropic_bodies_need_no_steps() {
        for b in [SymmetricBody::ball(2, 1.0).unwrap(), SymmetricBody::boxed(&[1.0, 1.0, 1.0]).unwrap()] {
            let run = mgm_solve(&b, &MgmOptions::new(cfg())).unwrap();
            assert_eq!(run.state.iteration, 0);
            assert!((run.state.t.clone() - DMatrix::identity(b.dim(), b.dim())).norm() < 1e-15);
        }
        let strip = SymmetricBody::strip(Direction::axis(2, 0), 1.0).unwrap();
        assert!(mgm_solve(&strip, &MgmOptions::new(cfg())).is_err());
    }

    #[test]
    fn fixed_point_identity() {
        let b = SymmetricBody::boxed(&[1.0, 2.0]).unwrap();
        let e = Evaluator::new(&b, cfg());
        let s = e.state(&DMatrix::from_diagonal(&DVector::from_vec(vec![0.2, -0.2])), 0).unwrap();
        let mean = s.m.trace() / 2.0;
        assert!((s.delta.norm() - s.isotropy_residual * mean).abs() < 1e-14);
    }

    #[test]
    fn rotation_invariance() {
        let b = SymmetricBody::boxed(&[1.0, 2.0]).unwrap();
        let e = Evaluator::new(&b, cfg());
        let t = volume_preserving_exp(&random_traceless(2, 4));
        let q = crate::corpus::random_rotation(2, 5);
        let a = e.measure_at(&t).unwrap();
        let r = e.measure_at(&(q * &t)).unwrap();
        assert!((a.value - r.value).abs() < 1e-12);
    }

    #[test]
    fn gradient_matches_differences() {
        let b = SymmetricBody::boxed(&[1.0, 2.0]).unwrap();
        let e = Evaluator::new(&b, cfg());
        let s = e.state(&random_traceless(2, 8), 0).unwrap();
        let rows = gradient_check(&e, &s, 5, 3, 1e-3).unwrap();
        assert!(rows.iter().all(|r| r.passes), "{rows:?}");
    }

    #[test]
    fn probe_examples() {
        let strip = SymmetricBody::strip(Direction::axis(2, 0), 1.0).unwrap();
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1.0]));
        let p = log_concavity_probe(&strip, &d, &[0.0, 0.5, 1.0], Engine::Auto(cfg())).unwrap();
        let v = |t: f64| strip_mass_unchecked(t.exp()).ln();
        assert!((p.slacks[0] - (v(0.5) - 0.5 * (v(0.0) + v(1.0)))).abs() < 1e-12);
        assert!(p.min_slack > 0.0 && p.holds);
        let full = SymmetricBody::full_space(2);
        let f = log_concavity_probe(&full, &d, &[0.0, 0.5, 1.0, 2.0], Engine::Auto(cfg())).unwrap();
        assert!(f.slacks.iter().all(|&s| s == 0.0));
        let poly = crate::corpus::random_polytope(3, 3, 2);
        let mc = log_concavity_probe(&poly, &random_traceless(3, 1), &[0.0, 0.5, 1.0], Engine::Auto(cfg())).unwrap();
        assert_eq!(mc.method, Method::MonteCarlo);
        assert!(mc.holds, "{mc:?}");
        assert!(log_concavity_probe(&strip, &d, &[0.0, 1.0], Engine::Auto(cfg())).is_err());
    }

    #[test]
    fn uniqueness_on_box_and_ball() {
        let b = SymmetricBody::boxed(&[1.0, 2.0]).unwrap();
        let opts = MgmOptions {
            tol: 1e-7,
            ..MgmOptions::new(cfg())
        };
        let rep = uniqueness_experiment(&b, 5, 11, &opts).unwrap();
        assert!(rep.starts.iter().all(|s| s.converged));
        assert!(rep.gamma_consistent, "{rep:?}");
        assert!(rep.max_procrustes_distance < 1e-2);
        let ball = SymmetricBody::ball(2, 1.0).unwrap();
        let rb = uniqueness_experiment(&ball, 3, 2, &opts).unwrap();
        assert!(rb.gamma_consistent && rb.max_procrustes_distance < 1e-6);
        assert!(uniqueness_experiment(&ball, 1, 2, &opts).is_err());
    }
}
