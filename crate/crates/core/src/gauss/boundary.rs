//! Gaussian perimeter and integrals over the boundary.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::{closed_form_measure, MeasureEstimate, Method};
use crate::bodies::{Direction, DistanceOracle, IntervalProduct, Slab, SymmetricBody};
use crate::error::{Error, Result};
use crate::function::Polynomial;
use crate::sampling::{GaussianSource, GaussianStream, SampleConfig};
use crate::special::{cdf, pdf, sphere_perimeter, strip_mass_unchecked};
use crate::stats::{MeanCov, MeanVar};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PerimeterEngine {
    /// Closed form, then the facet engine for polytopes, then a parallel
    /// difference with h = 1e-2.
    Auto(SampleConfig),
    ClosedForm,
    Facet(SampleConfig),
    /// Central difference of parallel-body measures with a Richardson pair
    /// (h, h/2).
    ParallelDiff { h: f64, config: SampleConfig },
}

/// Integrand over the boundary: `(point, outward unit normal, accumulator)`.
pub type FacetIntegrand<'a> = dyn Fn(&[f64], &[f64], &mut [f64]) + Sync + 'a;

/// Boundary functionals of a polytopal body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryStats {
    pub perimeter: MeasureEstimate,
    /// ∫_{∂K} ⟨θ, n_x⟩² dγ_∂ per requested direction.
    pub dir_second_moment: Vec<MeasureEstimate>,
    /// γ⁺ of the boundary part whose normals put weight ≥ α on σ.
    pub omega_mass: MeasureEstimate,
}

/// (unit normal, mass of the facet pair ±) for an interval product.
fn interval_facets(ip: &IntervalProduct) -> Vec<(DVector<f64>, f64)> {
    let n = ip.dim();
    let masses: Vec<f64> = ip.half_widths.iter().map(|&h| strip_mass_unchecked(h)).collect();
    (0..n)
        .filter(|&k| ip.half_widths[k].is_finite())
        .map(|k| {
            let others: f64 = (0..n).filter(|&j| j != k).map(|j| masses[j]).product();
            let normal = ip.frame.row(k).transpose().into_owned();
            (normal, 2.0 * pdf(ip.half_widths[k]) * others)
        })
        .collect()
}

pub fn closed_form_perimeter(body: &SymmetricBody) -> Option<f64> {
    let body = body.simplify();
    if let SymmetricBody::Ball { dim, radius } = body {
        return Some(sphere_perimeter(dim, radius));
    }
    if let Some(facets) = exact_facets(&body) {
        return Some(facets.iter().map(|(_, m)| m).sum());
    }
    if let SymmetricBody::Product { blocks, .. } = &body {
        let factors: Vec<(f64, f64)> = blocks
            .iter()
            .filter_map(|b| b.factor.as_ref())
            .map(|f| Some((closed_form_measure(f)?, closed_form_perimeter(f)?)))
            .collect::<Option<_>>()?;
        let mut total = 0.0;
        for (i, (_, per)) in factors.iter().enumerate() {
            let others: f64 = factors
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, (m, _))| m)
                .product();
            total += per * others;
        }
        return Some(total);
    }
    None
}

/// (outward normal, facet mass) for a planar polygon: each facet is a
/// segment whose Gaussian length is φ(b)·(Φ(t₁) − Φ(t₀)).
fn planar_facets(slabs: &[Slab]) -> Vec<(DVector<f64>, f64)> {
    let mut out = Vec::new();
    for (i, si) in slabs.iter().enumerate() {
        let a = &si.normal;
        let perp = [-a[1], a[0]];
        for sign in [1.0, -1.0] {
            let base = [sign * si.offset * a[0], sign * si.offset * a[1]];
            let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
            for (j, sj) in slabs.iter().enumerate() {
                if j == i {
                    continue;
                }
                // |⟨a_j, base + t·perp⟩| ≤ b_j
                let c = sj.normal[0] * base[0] + sj.normal[1] * base[1];
                let k = sj.normal[0] * perp[0] + sj.normal[1] * perp[1];
                if k.abs() < 1e-15 {
                    if c.abs() > sj.offset {
                        hi = lo;
                    }
                    continue;
                }
                let (t0, t1) = ((-sj.offset - c) / k, (sj.offset - c) / k);
                lo = lo.max(t0.min(t1));
                hi = hi.min(t0.max(t1));
            }
            if hi > lo {
                out.push((a * sign, pdf(si.offset) * (cdf(hi) - cdf(lo))));
            }
        }
    }
    out
}

/// Facets with exact masses, when available.
fn exact_facets(body: &SymmetricBody) -> Option<Vec<(DVector<f64>, f64)>> {
    let body = body.simplify();
    if let Some(ip) = body.as_interval_product() {
        return Some(interval_facets(&ip));
    }
    if body.dim() == 2 {
        return body.as_slabs().map(|s| planar_facets(&s));
    }
    None
}

/// Facet Monte Carlo over a slab representation. Each sample z is projected
/// onto every facet hyperplane: x = s·b_i a_i + z − ⟨z, a_i⟩ a_i.
fn facet_monte_carlo<S: GaussianSource>(
    slabs: &[Slab],
    source: &S,
    k: usize,
    integrand: &FacetIntegrand,
) -> MeanVar {
    let n = source.dim();
    let m = slabs.len();
    let gram: Vec<f64> = (0..m * m)
        .map(|t| slabs[t / m].normal.dot(&slabs[t % m].normal))
        .collect();
    let weights: Vec<f64> = slabs.iter().map(|s| pdf(s.offset)).collect();
    source
        .fold(
            || (MeanVar::new(k), vec![0.0; 2 * k + 2 * n + m]),
            |(acc, buf): &mut (MeanVar, Vec<f64>), z: &[f64]| {
                let (out, rest) = buf.split_at_mut(k);
                let (tmp, rest) = rest.split_at_mut(k);
                let (x, rest) = rest.split_at_mut(n);
                let (normal, proj) = rest.split_at_mut(n);
                out.iter_mut().for_each(|v| *v = 0.0);
                for (j, s) in slabs.iter().enumerate() {
                    proj[j] = s.normal.iter().zip(z).map(|(a, v)| a * v).sum();
                }
                for (i, si) in slabs.iter().enumerate() {
                    for sign in [1.0, -1.0] {
                        let b = sign * si.offset;
                        let inside = (0..m).all(|j| {
                            if j == i {
                                return true;
                            }
                            let g = gram[i * m + j];
                            let v = b * g + proj[j] - g * proj[i];
                            v.abs() <= slabs[j].offset * (1.0 + 1e-12)
                        });
                        if !inside {
                            continue;
                        }
                        for t in 0..n {
                            x[t] = b * si.normal[t] + z[t] - proj[i] * si.normal[t];
                            normal[t] = sign * si.normal[t];
                        }
                        tmp.iter_mut().for_each(|v| *v = 0.0);
                        integrand(x, normal, tmp);
                        for (o, t) in out.iter_mut().zip(tmp.iter()) {
                            *o += weights[i] * t;
                        }
                    }
                }
                acc.push(out);
            },
        )
        .0
}

/// Σ over facets of ∫_F integrand dγ_∂ for a polytopal body, by Monte Carlo
/// in each facet hyperplane on one shared stream.
pub fn facet_integrals<S: GaussianSource>(
    body: &SymmetricBody,
    source: &S,
    k: usize,
    integrand: &FacetIntegrand,
) -> Result<Vec<MeasureEstimate>> {
    if source.dim() != body.dim() {
        return Err(Error::DimensionMismatch {
            expected: body.dim(),
            got: source.dim(),
        });
    }
    let slabs = body.as_slabs().ok_or_else(|| {
        Error::Unsupported(format!("facet integrals need a polytopal body, got {}", body.kind()))
    })?;
    let config = source.config();
    config.require_at_least(super::MIN_MEASURE_SAMPLES)?;
    let stats = facet_monte_carlo(&slabs, source, k, integrand);
    Ok((0..k)
        .map(|i| MeasureEstimate::monte_carlo(stats.mean(i), stats.std_error(i), &config))
        .collect())
}

/// Exact Σ_facets w(n_F)·∫_F p dγ_∂ for axis-aligned interval products and a
/// polynomial p; `None` for other bodies.
pub fn facet_polynomial_integral(
    body: &SymmetricBody,
    p: &Polynomial<f64>,
    weight: impl Fn(&[f64]) -> f64,
) -> Option<f64> {
    let ip = body.simplify().as_interval_product()?;
    if !ip.is_axis_aligned() {
        return None;
    }
    let n = ip.dim();
    let mut total = 0.0;
    for k in 0..n {
        let h = ip.half_widths[k];
        if h.is_infinite() {
            continue;
        }
        let mut widths = ip.half_widths.clone();
        widths[k] = f64::INFINITY;
        for sign in [1.0, -1.0] {
            let mut normal = vec![0.0; n];
            normal[k] = sign;
            let w = weight(&normal);
            if w != 0.0 {
                total += w * pdf(h) * p.substitute(k, sign * h).integrate_box(&widths);
            }
        }
    }
    Some(total)
}

fn parallel_diff<S: GaussianSource>(body: &SymmetricBody, h: f64, source: &S) -> Result<(MeasureEstimate, f64)> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Domain(format!("parallel_diff step must be positive, got {h}")));
    }
    let oracle = DistanceOracle::new(body)?;
    let config = source.config();
    config.require_at_least(super::MIN_MEASURE_SAMPLES)?;
    let half = h / 2.0;
    let stats = source
        .fold(
            || (MeanCov::new(2), [0.0; 2]),
            |(acc, buf): &mut (MeanCov, [f64; 2]), z: &[f64]| {
                let d = oracle.signed_distance(z);
                buf[0] = f64::from(u8::from(d > -h && d <= h));
                buf[1] = f64::from(u8::from(d > -half && d <= half));
                acc.push(buf);
            },
        )
        .0;
    let coarse = stats.mean(0) / (2.0 * h);
    let fine = stats.mean(1) / (2.0 * half);
    // central differences of the Steiner expansion have an O(h²) leading error
    let value = (4.0 * fine - coarse) / 3.0;
    let grad = [-1.0 / (3.0 * 2.0 * h), 4.0 / (3.0 * 2.0 * half)];
    let se = stats.delta_std_error(&grad);
    let extrapolation = (fine - coarse).abs() / 3.0;
    Ok((MeasureEstimate::monte_carlo(value, se, &config), extrapolation))
}

/// Gaussian perimeter γ⁺(∂K). For the parallel-difference engine the
/// reported std_error combines the sampling error and the Richardson
/// extrapolation error in quadrature.
pub fn perimeter(body: &SymmetricBody, engine: PerimeterEngine) -> Result<MeasureEstimate> {
    let dim = body.dim();
    match engine {
        PerimeterEngine::ClosedForm => closed_form_perimeter(body)
            .map(MeasureEstimate::exact)
            .ok_or_else(|| Error::NoClosedForm(format!("the Gaussian perimeter of a {} body", body.kind()))),
        PerimeterEngine::Facet(config) => {
            let src = GaussianStream::new(config, dim);
            Ok(facet_integrals(body, &src, 1, &|_, _, out| out[0] += 1.0)?[0])
        }
        PerimeterEngine::ParallelDiff { h, config } => {
            let (mut est, extra) = parallel_diff(body, h, &GaussianStream::new(config, dim))?;
            est.std_error = est.std_error.hypot(extra);
            Ok(est)
        }
        PerimeterEngine::Auto(config) => {
            if let Some(v) = closed_form_perimeter(body) {
                return Ok(MeasureEstimate::exact(v));
            }
            if body.as_slabs().is_some() {
                return perimeter(body, PerimeterEngine::Facet(config));
            }
            perimeter(body, PerimeterEngine::ParallelDiff { h: 1e-2, config })
        }
    }
}

/// Perimeter, directional normal moments and Ω-mass of a polytopal body.
/// Exact for orthogonal slab intersections and polygons, facet Monte Carlo
/// otherwise.
pub fn boundary_stats(
    body: &SymmetricBody,
    directions: &[Direction],
    sigma: &[usize],
    alpha: f64,
    config: SampleConfig,
) -> Result<BoundaryStats> {
    let n = body.dim();
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Domain(format!("alpha must lie in (0,1], got {alpha}")));
    }
    for d in directions {
        if d.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: d.dim(),
            });
        }
    }
    if let Some(&bad) = sigma.iter().find(|&&i| i >= n) {
        return Err(Error::Domain(format!("coordinate {bad} outside 0..{n}")));
    }
    let omega = |normal: &[f64]| sigma.iter().map(|&i| normal[i] * normal[i]).sum::<f64>() >= alpha;

    if let Some(facets) = exact_facets(body) {
        let per: f64 = facets.iter().map(|(_, m)| m).sum();
        let dirs = directions
            .iter()
            .map(|d| {
                let v: f64 = facets.iter().map(|(f, m)| f.dot(d.as_vector()).powi(2) * m).sum();
                MeasureEstimate::exact(v)
            })
            .collect();
        let om: f64 = facets
            .iter()
            .filter(|(f, _)| omega(f.as_slice()))
            .map(|(_, m)| m)
            .sum();
        return Ok(BoundaryStats {
            perimeter: MeasureEstimate::exact(per),
            dir_second_moment: dirs,
            omega_mass: MeasureEstimate::exact(om),
        });
    }

    let k = directions.len() + 2;
    let src = GaussianStream::new(config, n);
    let est = facet_integrals(body, &src, k, &|_, normal, out| {
        out[0] += 1.0;
        for (t, d) in directions.iter().enumerate() {
            let c: f64 = d.as_vector().iter().zip(normal).map(|(a, b)| a * b).sum();
            out[1 + t] += c * c;
        }
        if omega(normal) {
            out[k - 1] += 1.0;
        }
    })?;
    Ok(BoundaryStats {
        perimeter: est[0],
        dir_second_moment: est[1..k - 1].to_vec(),
        omega_mass: est[k - 1],
    })
}

impl MeasureEstimate {
    /// Marks a deterministic value obtained by 1D quadrature.
    pub fn quadrature(value: f64) -> Self {
        Self::deterministic(value, Method::Quadrature1d)
    }
}
