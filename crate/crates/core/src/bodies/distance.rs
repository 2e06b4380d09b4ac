//! Signed Euclidean distance to the boundary (negative inside).

use nalgebra::{DMatrix, DVector};

use super::{Slab, SymmetricBody};
use crate::error::{Error, Result};

/// Precomputed signed-distance evaluator.
#[derive(Debug, Clone)]
pub enum DistanceOracle {
    Ball {
        radius: f64,
    },
    Slabs {
        dim: usize,
        slabs: Vec<Slab>,
        /// Pairwise orthogonal normals: distance is the root-sum of excesses.
        orthogonal: bool,
    },
    Ellipsoid {
        /// Eigenvectors as columns.
        basis: DMatrix<f64>,
        /// Semi-axis lengths.
        axes: Vec<f64>,
    },
    Product {
        blocks: Vec<(Vec<usize>, Option<DistanceOracle>)>,
    },
}

fn dot(a: &DVector<f64>, p: &[f64]) -> f64 {
    a.iter().zip(p).map(|(u, v)| u * v).sum()
}

/// Euclidean projection onto an intersection of slabs by Dykstra's method.
fn dykstra(slabs: &[Slab], p: &[f64]) -> Vec<f64> {
    let n = p.len();
    let mut x = p.to_vec();
    let mut corr = vec![vec![0.0; n]; slabs.len()];
    for _ in 0..5000 {
        let mut moved = 0.0f64;
        for (s, c) in slabs.iter().zip(corr.iter_mut()) {
            let y: Vec<f64> = x.iter().zip(c.iter()).map(|(a, b)| a + b).collect();
            let t = dot(&s.normal, &y);
            let clipped = t.clamp(-s.offset, s.offset);
            let shift = clipped - t;
            for i in 0..n {
                let nx = y[i] + shift * s.normal[i];
                c[i] = y[i] - nx;
                moved = moved.max((nx - x[i]).abs());
                x[i] = nx;
            }
        }
        if moved < 1e-13 {
            break;
        }
    }
    x
}

impl DistanceOracle {
    pub fn new(body: &SymmetricBody) -> Result<Self> {
        let body = body.simplify();
        if let Some(slabs) = body.as_slabs() {
            let orthogonal = slabs.iter().enumerate().all(|(i, a)| {
                slabs[..i].iter().all(|b| a.normal.dot(&b.normal).abs() < 1e-14)
            });
            return Ok(Self::Slabs {
                dim: body.dim(),
                slabs,
                orthogonal,
            });
        }
        match &body {
            SymmetricBody::Ball { radius, .. } => Ok(Self::Ball { radius: *radius }),
            SymmetricBody::Ellipsoid { shape } => {
                let eig = shape.clone().symmetric_eigen();
                Ok(Self::Ellipsoid {
                    basis: eig.eigenvectors,
                    axes: eig.eigenvalues.iter().map(|l| 1.0 / l.sqrt()).collect(),
                })
            }
            SymmetricBody::Product { blocks, .. } => {
                let blocks = blocks
                    .iter()
                    .map(|b| {
                        let o = b.factor.as_ref().map(DistanceOracle::new).transpose()?;
                        Ok((b.coords.clone(), o))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(Self::Product { blocks })
            }
            other => Err(Error::Unsupported(format!(
                "signed distance is not available for {} bodies",
                other.kind()
            ))),
        }
    }

    pub fn signed_distance(&self, p: &[f64]) -> f64 {
        match self {
            Self::Ball { radius } => p.iter().map(|v| v * v).sum::<f64>().sqrt() - radius,
            Self::Slabs {
                dim,
                slabs,
                orthogonal,
            } => {
                let excess = slabs
                    .iter()
                    .map(|s| dot(&s.normal, p).abs() - s.offset)
                    .fold(f64::NEG_INFINITY, f64::max);
                if excess <= 0.0 || slabs.is_empty() {
                    return if slabs.is_empty() { f64::NEG_INFINITY } else { excess };
                }
                if *orthogonal {
                    return slabs
                        .iter()
                        .map(|s| (dot(&s.normal, p).abs() - s.offset).max(0.0).powi(2))
                        .sum::<f64>()
                        .sqrt();
                }
                let q = dykstra(slabs, p);
                debug_assert_eq!(q.len(), *dim);
                q.iter().zip(p).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
            }
            Self::Ellipsoid { basis, axes } => {
                let n = axes.len();
                let y: Vec<f64> = (0..n)
                    .map(|k| (0..n).map(|i| basis[(i, k)] * p[i]).sum())
                    .collect();
                ellipsoid_signed_distance(axes, &y)
            }
            Self::Product { blocks } => {
                let mut inside = f64::NEG_INFINITY;
                let mut outside_sq = 0.0;
                let mut any_outside = false;
                let mut buf = Vec::new();
                for (coords, o) in blocks {
                    if let Some(o) = o {
                        buf.clear();
                        buf.extend(coords.iter().map(|&c| p[c]));
                        let d = o.signed_distance(&buf);
                        if d > 0.0 {
                            any_outside = true;
                            outside_sq += d * d;
                        } else {
                            inside = inside.max(d);
                        }
                    }
                }
                if any_outside {
                    outside_sq.sqrt()
                } else {
                    inside
                }
            }
        }
    }
}

/// Signed distance to {Σ (y_i/e_i)² ≤ 1} in the principal frame.
fn ellipsoid_signed_distance(axes: &[f64], y: &[f64]) -> f64 {
    let level: f64 = y.iter().zip(axes).map(|(v, e)| (v / e).powi(2)).sum();
    let emin = axes.iter().cloned().fold(f64::INFINITY, f64::min);
    if level == 0.0 {
        return -emin;
    }
    // closest boundary point x_i = e_i² y_i / (e_i² + t) with Σ (x_i/e_i)² = 1
    let f = |t: f64| -> f64 {
        y.iter()
            .zip(axes)
            .map(|(v, e)| (e * v / (e * e + t)).powi(2))
            .sum::<f64>()
            - 1.0
    };
    let (mut lo, mut hi) = if level > 1.0 {
        let mut hi = emin * emin;
        while f(hi) > 0.0 {
            hi *= 2.0;
        }
        (0.0, hi)
    } else {
        let floor = -emin * emin;
        let mut lo = floor * (1.0 - 1e-12);
        // degenerate: no weight along the shortest axis
        if f(lo) < 0.0 {
            lo = floor * (1.0 - 1e-15);
        }
        (lo, 0.0)
    };
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * (1.0 + hi.abs()) {
            break;
        }
    }
    let t = 0.5 * (lo + hi);
    let dist = y
        .iter()
        .zip(axes)
        .map(|(v, e)| (v - e * e * v / (e * e + t)).powi(2))
        .sum::<f64>()
        .sqrt();
    if level > 1.0 {
        dist
    } else {
        -dist
    }
}

impl SymmetricBody {
    pub fn signed_distance(&self, p: &[f64]) -> Result<f64> {
        if p.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: p.len(),
            });
        }
        Ok(DistanceOracle::new(self)?.signed_distance(p))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    #[test]
    fn box_and_ball_distances() {
        let b = SymmetricBody::boxed(&[1.0, 2.0]).unwrap();
        assert!((b.signed_distance(&[0.0, 0.0]).unwrap() + 1.0).abs() < 1e-15);
        assert!((b.signed_distance(&[2.0, 3.0]).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        assert!((b.signed_distance(&[0.5, 2.5]).unwrap() - 0.5).abs() < 1e-15);
        let ball = SymmetricBody::ball(3, 2.0).unwrap();
        assert!((ball.signed_distance(&[0.0, 3.0, 0.0]).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn polytope_projection_matches_geometry() {
        // diamond |x|+|y| ≤ 1 written as two slabs; corner (1, 0)
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let d = SymmetricBody::polytope(
            2,
            vec![DVector::from_vec(vec![1.0, 1.0]), DVector::from_vec(vec![1.0, -1.0])],
            vec![1.0, 1.0],
        )
        .unwrap();
        assert!((d.signed_distance(&[2.0, 0.0]).unwrap() - 1.0).abs() < 1e-9);
        assert!((d.signed_distance(&[1.0, 1.0]).unwrap() - s).abs() < 1e-9);
        assert!((d.signed_distance(&[0.0, 0.0]).unwrap() + s).abs() < 1e-12);
    }

    #[test]
    fn ellipsoid_distance_matches_dense_boundary_scan() {
        let e = SymmetricBody::ellipsoid(DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 0.25])).unwrap();
        let o = DistanceOracle::new(&e).unwrap();
        let SymmetricBody::Ellipsoid { shape } = &e else { unreachable!() };
        let boundary: Vec<[f64; 2]> = (0..100_000)
            .map(|k| {
                let t = k as f64 * std::f64::consts::TAU / 100_000.0;
                let v = [t.cos(), t.sin()];
                let q = shape[(0, 0)] * v[0] * v[0] + 2.0 * shape[(0, 1)] * v[0] * v[1] + shape[(1, 1)] * v[1] * v[1];
                [v[0] / q.sqrt(), v[1] / q.sqrt()]
            })
            .collect();
        for p in [[0.3, -0.2], [2.0, 1.0], [-0.1, 2.5], [0.0, 0.9]] {
            let scan = boundary
                .iter()
                .map(|b| ((b[0] - p[0]).powi(2) + (b[1] - p[1]).powi(2)).sqrt())
                .fold(f64::INFINITY, f64::min);
            let sd = o.signed_distance(&p);
            let sign = if e.contains(&p).unwrap() { -1.0 } else { 1.0 };
            assert!((sd - sign * scan).abs() < 1e-6, "{p:?}: {sd} vs {}", sign * scan);
        }
    }

    #[test]
    fn cylinder_distance() {
        let cyl = SymmetricBody::cylinder(SymmetricBody::ball(2, 1.0).unwrap(), 1).unwrap();
        assert!((cyl.signed_distance(&[0.0, 3.0, 100.0]).unwrap() - 2.0).abs() < 1e-15);
        assert!((cyl.signed_distance(&[0.0, 0.5, -7.0]).unwrap() + 0.5).abs() < 1e-15);
    }
}
