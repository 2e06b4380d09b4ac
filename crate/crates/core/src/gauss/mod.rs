//! Gaussian measures of bodies: closed forms and Monte Carlo.

mod boundary;
mod moments;
mod planar;

use serde::{Deserialize, Serialize};

use crate::bodies::SymmetricBody;
use crate::error::{Error, Result};
use crate::sampling::{GaussianSource, GaussianStream, SampleConfig};
use crate::special::{ball_mass, strip_mass_unchecked};
use crate::stats::MeanCov;

pub use boundary::{
    boundary_stats, closed_form_perimeter, facet_integrals, facet_polynomial_integral, perimeter,
    BoundaryStats, FacetIntegrand, PerimeterEngine,
};
pub use moments::{closed_form_moments, deterministic_moments, moments, moments_from_source, MomentSummary};

/// Minimum sample count accepted by the Monte Carlo measure engine.
pub const MIN_MEASURE_SAMPLES: usize = 1_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ClosedForm,
    Quadrature1d,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasureEstimate {
    pub value: f64,
    pub std_error: f64,
    pub method: Method,
    pub samples: u64,
    pub seed: Option<u64>,
    pub partition_count: usize,
}

impl MeasureEstimate {
    pub fn exact(value: f64) -> Self {
        Self::deterministic(value, Method::ClosedForm)
    }

    pub fn deterministic(value: f64, method: Method) -> Self {
        Self {
            value,
            std_error: 0.0,
            method,
            samples: 0,
            seed: None,
            partition_count: 1,
        }
    }

    pub fn monte_carlo(value: f64, std_error: f64, config: &SampleConfig) -> Self {
        Self {
            value,
            std_error,
            method: Method::MonteCarlo,
            samples: config.samples as u64,
            seed: Some(config.seed),
            partition_count: config.partitions,
        }
    }

    pub fn is_stochastic(&self) -> bool {
        self.method == Method::MonteCarlo
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Engine {
    /// Closed form when available, otherwise Monte Carlo with this configuration.
    Auto(SampleConfig),
    ClosedForm,
    MonteCarlo(SampleConfig),
}

impl Engine {
    pub fn config(&self) -> Option<SampleConfig> {
        match self {
            Self::Auto(c) | Self::MonteCarlo(c) => Some(*c),
            Self::ClosedForm => None,
        }
    }
}

/// γ(K) in closed form, when the body reduces to strips, boxes, balls,
/// orthogonal slab intersections or products of these.
pub fn closed_form_measure(body: &SymmetricBody) -> Option<f64> {
    let body = body.simplify();
    if let SymmetricBody::Ball { dim, radius } = body {
        return Some(ball_mass(dim, radius));
    }
    if let Some(ip) = body.as_interval_product() {
        return Some(ip.half_widths.iter().map(|&h| strip_mass_unchecked(h)).product());
    }
    if let SymmetricBody::Product { blocks, .. } = &body {
        let mut total = 1.0;
        for b in blocks {
            if let Some(f) = &b.factor {
                total *= closed_form_measure(f)?;
            }
        }
        return Some(total);
    }
    None
}

/// Closed form, or radial quadrature for planar bodies.
pub fn deterministic_measure(body: &SymmetricBody) -> Option<MeasureEstimate> {
    closed_form_measure(body)
        .map(MeasureEstimate::exact)
        .or_else(|| planar::planar_measure(body).map(MeasureEstimate::quadrature))
}

/// Estimates the probabilities of `k` events on one shared Gaussian stream.
/// `events` writes 0/1 indicators for one point.
pub fn joint_indicators<S, F>(source: &S, k: usize, events: F) -> MeanCov
where
    S: GaussianSource,
    F: Fn(&[f64], &mut [f64]) + Sync,
{
    source
        .fold(
            || (MeanCov::new(k), vec![0.0; k]),
            |(acc, buf), z| {
                events(z, buf);
                acc.push(buf);
            },
        )
        .0
}

/// Monte Carlo estimate of γ(K) on the given source.
pub fn monte_carlo_measure<S: GaussianSource>(body: &SymmetricBody, source: &S) -> Result<MeasureEstimate> {
    if source.dim() != body.dim() {
        return Err(Error::DimensionMismatch {
            expected: body.dim(),
            got: source.dim(),
        });
    }
    let config = source.config();
    config.require_at_least(MIN_MEASURE_SAMPLES)?;
    let stats = joint_indicators(source, 1, |z, out| {
        out[0] = f64::from(u8::from(body.gauge(z) <= 1.0));
    });
    let p = stats.mean(0);
    let n = stats.count() as f64;
    Ok(MeasureEstimate::monte_carlo(p, (p * (1.0 - p) / n).sqrt(), &config))
}

pub fn measure(body: &SymmetricBody, engine: Engine) -> Result<MeasureEstimate> {
    match engine {
        Engine::ClosedForm => closed_form_measure(body)
            .map(MeasureEstimate::exact)
            .ok_or_else(|| Error::NoClosedForm(format!("the Gaussian measure of a {} body", body.kind()))),
        Engine::Auto(config) => match deterministic_measure(body) {
            Some(v) => Ok(v),
            None => monte_carlo_measure(body, &GaussianStream::new(config, body.dim())),
        },
        Engine::MonteCarlo(config) => monte_carlo_measure(body, &GaussianStream::new(config, body.dim())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bodies::{Direction, ProductBlock};
    use nalgebra::{DMatrix, DVector};

    #[test]
    fn closed_form_examples() {
        let strip = SymmetricBody::strip(Direction::axis(2, 0), 1.0).unwrap();
        let m = measure(&strip, Engine::ClosedForm).unwrap();
        assert!((m.value - 0.682_689_492_137_085_9).abs() < 1e-15);
        assert_eq!(m.std_error, 0.0);
        let ball = SymmetricBody::ball(2, 1.0).unwrap();
        let b = measure(&ball, Engine::ClosedForm).unwrap().value;
        assert!((b - (1.0 - (-0.5f64).exp())).abs() < 1e-15);
        let full = SymmetricBody::full_space(3);
        assert_eq!(measure(&full, Engine::ClosedForm).unwrap().value, 1.0);
        let ell = SymmetricBody::ellipsoid(DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0])).unwrap();
        assert!(matches!(measure(&ell, Engine::ClosedForm), Err(Error::NoClosedForm(_))));
    }

    #[test]
    fn transformed_bodies_keep_closed_forms() {
        let b = SymmetricBody::boxed(&[1.0, 1.0]).unwrap();
        let rotated = b
            .linear_image(&DMatrix::from_row_slice(2, 2, &[0.6, -0.8, 0.8, 0.6]))
            .unwrap();
        let v = closed_form_measure(&rotated).unwrap();
        let direct = strip_mass_unchecked(1.0_f64).powi(2);
        assert!((v - direct).abs() < 1e-14);
        let prod = SymmetricBody::product(
            3,
            vec![
                ProductBlock {
                    coords: vec![2],
                    factor: Some(SymmetricBody::boxed(&[0.5]).unwrap()),
                },
                ProductBlock {
                    coords: vec![0, 1],
                    factor: Some(SymmetricBody::ball(2, 1.0).unwrap()),
                },
            ],
        )
        .unwrap();
        let v = closed_form_measure(&prod.scale_diag(&[0.0, 0.0, 2f64.ln()]).unwrap()).unwrap();
        assert!((v - strip_mass_unchecked(1.0) * (1.0 - (-0.5f64).exp())).abs() < 1e-14);
    }

    #[test]
    fn monte_carlo_agrees_and_requires_samples() {
        let ball = SymmetricBody::ball(2, 1.0).unwrap();
        let cfg = SampleConfig::new(3, 200_000);
        let mc = measure(&ball, Engine::MonteCarlo(cfg)).unwrap();
        let cf = 1.0 - (-0.5f64).exp();
        assert!((mc.value - cf).abs() <= 4.0 * mc.std_error);
        assert_eq!(mc.seed, Some(3));
        assert!(measure(&ball, Engine::MonteCarlo(SampleConfig::new(1, 10))).is_err());
        let p = SymmetricBody::polytope(
            3,
            vec![DVector::from_vec(vec![1.0, 0.3, 0.0]), DVector::from_vec(vec![0.2, 1.0, 0.5])],
            vec![1.0, 1.0],
        )
        .unwrap();
        let a = measure(&p, Engine::Auto(cfg.with_partitions(4))).unwrap();
        let b = measure(&p, Engine::Auto(cfg.with_partitions(4))).unwrap();
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        assert_eq!(a.partition_count, 4);
    }
}
