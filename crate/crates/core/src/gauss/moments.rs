//! Moments of the Gaussian measure restricted to a body.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{Engine, MeasureEstimate};
use crate::bodies::SymmetricBody;
use crate::error::{Error, Result};
use crate::sampling::{GaussianSource, GaussianStream};
use crate::special::{ball_mass, interval_fourth_moment, interval_second_moment, strip_mass_unchecked};
use crate::stats::MeanVar;

/// Minimum sample count for Monte Carlo moments.
pub const MIN_MOMENT_SAMPLES: usize = 10_000;

/// Normalized moments of γ restricted to K.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentSummary {
    pub mass: MeasureEstimate,
    /// M_ij = E_K[x_i x_j]
    #[serde(with = "crate::matrix_serde")]
    pub second_moment: DMatrix<f64>,
    #[serde(with = "crate::matrix_serde")]
    pub second_moment_error: DMatrix<f64>,
    /// S_ij = E_K[x_i² x_j²]
    #[serde(with = "crate::matrix_serde")]
    pub fourth_cross: DMatrix<f64>,
    #[serde(with = "crate::matrix_serde")]
    pub fourth_cross_error: DMatrix<f64>,
    pub mean_sq: f64,
    pub mean_sq_error: f64,
    pub mean_quart: f64,
    pub mean_quart_error: f64,
    pub coord_fourth: Vec<f64>,
    pub coord_fourth_error: Vec<f64>,
    /// Samples that landed in K (0 for exact paths).
    pub accepted: u64,
}

impl MomentSummary {
    pub fn dim(&self) -> usize {
        self.second_moment.nrows()
    }

    pub(super) fn exact(mass: f64, m: DMatrix<f64>, s: DMatrix<f64>) -> Self {
        let n = m.nrows();
        Self {
            mass: MeasureEstimate::exact(mass),
            mean_sq: m.trace(),
            mean_quart: s.sum(),
            coord_fourth: (0..n).map(|i| s[(i, i)]).collect(),
            coord_fourth_error: vec![0.0; n],
            second_moment_error: DMatrix::zeros(n, n),
            fourth_cross_error: DMatrix::zeros(n, n),
            second_moment: m,
            fourth_cross: s,
            mean_sq_error: 0.0,
            mean_quart_error: 0.0,
            accepted: 0,
        }
    }
}

struct Exact {
    mass: f64,
    m: DMatrix<f64>,
    s: DMatrix<f64>,
}

fn full_space_moments(n: usize) -> Exact {
    Exact {
        mass: 1.0,
        m: DMatrix::identity(n, n),
        s: DMatrix::from_fn(n, n, |i, j| if i == j { 3.0 } else { 1.0 }),
    }
}

fn exact_moments(body: &SymmetricBody) -> Option<Exact> {
    let body = body.simplify();
    let n = body.dim();
    if let SymmetricBody::Ball { radius, .. } = body {
        let r = radius;
        let mass = ball_mass(n, r);
        let nf = n as f64;
        let sq = nf * ball_mass(n + 2, r) / mass;
        let quart = nf * (nf + 2.0) * ball_mass(n + 4, r) / mass;
        let c = quart / (nf * (nf + 2.0));
        return Some(Exact {
            mass,
            m: DMatrix::identity(n, n) * (sq / nf),
            s: DMatrix::from_fn(n, n, |i, j| if i == j { 3.0 * c } else { c }),
        });
    }
    if let Some(ip) = body.as_interval_product() {
        let m2: Vec<f64> = ip
            .half_widths
            .iter()
            .map(|&h| if h.is_infinite() { 1.0 } else { interval_second_moment(h) })
            .collect();
        let m4: Vec<f64> = ip
            .half_widths
            .iter()
            .map(|&h| if h.is_infinite() { 3.0 } else { interval_fourth_moment(h) })
            .collect();
        let mass: f64 = ip.half_widths.iter().map(|&h| strip_mass_unchecked(h)).product();
        let f = &ip.frame;
        // x = Fᵀ y with independent symmetric y_k
        let m = DMatrix::from_fn(n, n, |i, j| (0..n).map(|k| f[(k, i)] * f[(k, j)] * m2[k]).sum());
        let s = DMatrix::from_fn(n, n, |i, j| {
            let mut v = 0.0;
            for k in 0..n {
                v += f[(k, i)].powi(2) * f[(k, j)].powi(2) * m4[k];
                for p in 0..n {
                    if p != k {
                        v += (f[(k, i)].powi(2) * f[(p, j)].powi(2)
                            + 2.0 * f[(k, i)] * f[(k, j)] * f[(p, i)] * f[(p, j)])
                            * m2[k]
                            * m2[p];
                    }
                }
            }
            v
        });
        return Some(Exact { mass, m, s });
    }
    if let SymmetricBody::Product { blocks, .. } = &body {
        let mut mass = 1.0;
        let mut m = DMatrix::zeros(n, n);
        let mut diag = vec![0.0; n];
        let mut s = DMatrix::zeros(n, n);
        let mut owner = vec![0usize; n];
        for (bi, b) in blocks.iter().enumerate() {
            let e = match &b.factor {
                Some(f) => exact_moments(f)?,
                None => full_space_moments(b.coords.len()),
            };
            mass *= e.mass;
            for (a, &ca) in b.coords.iter().enumerate() {
                owner[ca] = bi;
                diag[ca] = e.m[(a, a)];
                for (c, &cc) in b.coords.iter().enumerate() {
                    m[(ca, cc)] = e.m[(a, c)];
                    s[(ca, cc)] = e.s[(a, c)];
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                if owner[i] != owner[j] {
                    s[(i, j)] = diag[i] * diag[j];
                }
            }
        }
        return Some(Exact { mass, m, s });
    }
    None
}

/// Exact restricted moments, when available. Errors for γ-null bodies.
pub fn closed_form_moments(body: &SymmetricBody) -> Option<Result<MomentSummary>> {
    let e = exact_moments(body)?;
    if e.mass <= 0.0 || !e.m.iter().all(|v| v.is_finite()) {
        return Some(Err(Error::UnresolvableMass {
            accepted: 0,
            samples: 0,
        }));
    }
    Some(Ok(MomentSummary::exact(e.mass, e.m, e.s)))
}

/// Closed form, or radial quadrature for planar bodies.
pub fn deterministic_moments(body: &SymmetricBody) -> Option<Result<MomentSummary>> {
    closed_form_moments(body).or_else(|| super::planar::planar_moments(body).map(Ok))
}

/// Self-normalized Monte Carlo moments on a given source.
pub fn moments_from_source<S: GaussianSource>(body: &SymmetricBody, source: &S) -> Result<MomentSummary> {
    let n = body.dim();
    if source.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: source.dim(),
        });
    }
    let config = source.config();
    config.require_at_least(MIN_MOMENT_SAMPLES)?;
    let pairs = n * (n + 1) / 2;
    let k = 2 * pairs + 2;
    let stats = source
        .fold(
            || (MeanVar::new(k), vec![0.0; k]),
            |(acc, buf): &mut (MeanVar, Vec<f64>), z: &[f64]| {
                if body.gauge(z) > 1.0 {
                    return;
                }
                let mut idx = 0;
                let mut sq = 0.0;
                for i in 0..n {
                    sq += z[i] * z[i];
                    for j in i..n {
                        buf[idx] = z[i] * z[j];
                        buf[pairs + idx] = z[i] * z[i] * z[j] * z[j];
                        idx += 1;
                    }
                }
                buf[2 * pairs] = sq;
                buf[2 * pairs + 1] = sq * sq;
                acc.push(buf);
            },
        )
        .0;
    let accepted = stats.count();
    let samples = config.samples as u64;
    if accepted == 0 {
        return Err(Error::UnresolvableMass { accepted, samples });
    }
    let p = accepted as f64 / samples as f64;
    let mass = MeasureEstimate::monte_carlo(p, (p * (1.0 - p) / samples as f64).sqrt(), &config);
    let mut m = DMatrix::zeros(n, n);
    let mut me = DMatrix::zeros(n, n);
    let mut s = DMatrix::zeros(n, n);
    let mut se = DMatrix::zeros(n, n);
    let mut idx = 0;
    for i in 0..n {
        for j in i..n {
            m[(i, j)] = stats.mean(idx);
            m[(j, i)] = m[(i, j)];
            me[(i, j)] = stats.std_error(idx);
            me[(j, i)] = me[(i, j)];
            s[(i, j)] = stats.mean(pairs + idx);
            s[(j, i)] = s[(i, j)];
            se[(i, j)] = stats.std_error(pairs + idx);
            se[(j, i)] = se[(i, j)];
            idx += 1;
        }
    }
    Ok(MomentSummary {
        mass,
        coord_fourth: (0..n).map(|i| s[(i, i)]).collect(),
        coord_fourth_error: (0..n).map(|i| se[(i, i)]).collect(),
        second_moment: m,
        second_moment_error: me,
        fourth_cross: s,
        fourth_cross_error: se,
        mean_sq: stats.mean(2 * pairs),
        mean_sq_error: stats.std_error(2 * pairs),
        mean_quart: stats.mean(2 * pairs + 1),
        mean_quart_error: stats.std_error(2 * pairs + 1),
        accepted,
    })
}

pub fn moments(body: &SymmetricBody, engine: Engine) -> Result<MomentSummary> {
    match engine {
        Engine::ClosedForm => closed_form_moments(body).unwrap_or_else(|| {
            Err(Error::NoClosedForm(format!("restricted moments of a {} body", body.kind())))
        }),
        Engine::Auto(config) => match deterministic_moments(body) {
            Some(r) => r,
            None => moments_from_source(body, &GaussianStream::new(config, body.dim())),
        },
        Engine::MonteCarlo(config) => moments_from_source(body, &GaussianStream::new(config, body.dim())),
    }
}
