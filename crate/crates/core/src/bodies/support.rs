//! Support function and in-radius.

use minilp::{ComparisonOp, OptimizationDirection, Problem};
use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{Direction, SymmetricBody};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum InRadiusMethod {
    ClosedForm,
    /// Multistart minimization of the support function over the sphere.
    /// `gap` is (best dense-scan value − best multistart value) / best.
    Numerical { gap: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InRadius {
    pub value: f64,
    pub method: InRadiusMethod,
}

fn polytope_support(dim: usize, normals: &[DVector<f64>], offsets: &[f64], u: &DVector<f64>) -> f64 {
    let mut lp = Problem::new(OptimizationDirection::Maximize);
    let vars: Vec<_> = (0..dim)
        .map(|j| lp.add_var(u[j], (f64::NEG_INFINITY, f64::INFINITY)))
        .collect();
    for (a, &b) in normals.iter().zip(offsets) {
        let expr: Vec<_> = vars.iter().copied().zip(a.iter().copied()).collect();
        lp.add_constraint(expr.as_slice(), ComparisonOp::Le, b);
        lp.add_constraint(expr.as_slice(), ComparisonOp::Ge, -b);
    }
    match lp.solve() {
        Ok(sol) => sol.objective().max(0.0),
        Err(_) => f64::INFINITY,
    }
}

impl SymmetricBody {
    /// h_K(u) = sup_{x∈K} ⟨x, u⟩ for an arbitrary (not necessarily unit) vector.
    pub fn support_vec(&self, u: &DVector<f64>) -> f64 {
        let len = u.norm();
        if len == 0.0 {
            return 0.0;
        }
        match self {
            Self::Ball { radius, .. } => radius * len,
            Self::Strip {
                direction,
                half_width,
            } => {
                let d = direction.as_vector();
                let c = d.dot(u);
                if (u - d * c).norm() > 1e-12 * len {
                    f64::INFINITY
                } else {
                    half_width * c.abs()
                }
            }
            Self::Box { half_widths } => half_widths.iter().zip(u.iter()).map(|(a, v)| a * v.abs()).sum(),
            Self::Ellipsoid { shape } => match shape.clone().cholesky() {
                Some(ch) => u.dot(&ch.solve(u)).max(0.0).sqrt(),
                None => f64::INFINITY,
            },
            Self::Polytope {
                dim,
                normals,
                offsets,
            } => polytope_support(*dim, normals, offsets, u),
            Self::Product { blocks, .. } => {
                let mut total = 0.0;
                for b in blocks {
                    let sub = DVector::from_iterator(b.coords.len(), b.coords.iter().map(|&c| u[c]));
                    total += match &b.factor {
                        Some(f) => f.support_vec(&sub),
                        None if sub.norm() > 1e-12 * len => f64::INFINITY,
                        None => 0.0,
                    };
                }
                total
            }
            Self::DiagScaled { log_scale, inner } => {
                let v = u.component_mul(&log_scale.map(f64::exp));
                inner.support_vec(&v)
            }
            Self::LinearImage { map, inner, .. } => inner.support_vec(&(map.transpose() * u)),
        }
    }

    pub fn support(&self, u: &Direction) -> Result<f64> {
        if u.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: u.dim(),
            });
        }
        Ok(self.support_vec(u.as_vector()))
    }

    fn closed_in_radius(&self) -> Option<f64> {
        Some(match self {
            Self::Ball { radius, .. } => *radius,
            Self::Strip { half_width, .. } => *half_width,
            Self::Box { half_widths } => half_widths.min(),
            Self::Ellipsoid { shape } => {
                let lmax = shape.clone().symmetric_eigen().eigenvalues.max();
                1.0 / lmax.sqrt()
            }
            Self::Polytope {
                normals, offsets, ..
            } => normals
                .iter()
                .zip(offsets)
                .map(|(a, b)| b / a.norm())
                .fold(f64::INFINITY, f64::min),
            Self::Product { blocks, .. } => {
                let mut r = f64::INFINITY;
                for b in blocks {
                    if let Some(f) = &b.factor {
                        r = r.min(f.closed_in_radius()?);
                    }
                }
                r
            }
            Self::DiagScaled { .. } | Self::LinearImage { .. } => {
                let s = self.simplify();
                if matches!(s, Self::DiagScaled { .. } | Self::LinearImage { .. }) {
                    return None;
                }
                s.closed_in_radius()?
            }
        })
    }

    /// Largest r with rB ⊂ K.
    pub fn in_radius(&self) -> InRadius {
        match self.closed_in_radius() {
            Some(value) => InRadius {
                value,
                method: InRadiusMethod::ClosedForm,
            },
            None => self.numerical_in_radius(),
        }
    }

    fn numerical_in_radius(&self) -> InRadius {
        let n = self.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(0x1e_5ad1);
        let mut random_unit = || {
            let v = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
            let len: f64 = v.norm();
            v / len
        };
        let h = |u: &DVector<f64>| self.support_vec(&(u / u.norm()));

        let mut best = f64::INFINITY;
        for _ in 0..8 * n {
            let mut u = random_unit();
            let mut val = h(&u);
            let mut step = 0.5;
            for _ in 0..200 {
                if !val.is_finite() || step < 1e-10 {
                    break;
                }
                let fd = 1e-7;
                let mut g = DVector::zeros(n);
                for i in 0..n {
                    let mut up = u.clone();
                    up[i] += fd;
                    let mut dn = u.clone();
                    dn[i] -= fd;
                    g[i] = (h(&up) - h(&dn)) / (2.0 * fd);
                }
                // project onto the tangent space
                let g = &g - &u * g.dot(&u);
                if g.norm() < 1e-12 {
                    break;
                }
                let trial = &u - &g * (step / g.norm());
                let trial = &trial / trial.norm();
                let tv = h(&trial);
                if tv < val {
                    u = trial;
                    val = tv;
                    step *= 1.2;
                } else {
                    step *= 0.5;
                }
            }
            best = best.min(val);
        }
        let scan = (0..2000 * n).map(|_| h(&random_unit())).fold(f64::INFINITY, f64::min);
        let value = best.min(scan);
        let gap = if value > 0.0 && value.is_finite() {
            (scan - best) / value
        } else {
            0.0
        };
        InRadius {
            value,
            method: InRadiusMethod::Numerical { gap },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    #[test]
    fn support_examples() {
        let ball = SymmetricBody::ball(2, 2.0).unwrap();
        let u = Direction::from_slice(&[0.6, 0.8]).unwrap();
        assert_eq!(ball.support(&u).unwrap(), 2.0);
        let b = SymmetricBody::boxed(&[1.0, 3.0]).unwrap();
        assert_eq!(b.support(&Direction::axis(2, 0)).unwrap(), 1.0);
        assert!((b.support(&u).unwrap() - 3.0).abs() < 1e-15);
        let strip = SymmetricBody::strip(Direction::axis(2, 0), 1.5).unwrap();
        assert_eq!(strip.support(&Direction::axis(2, 1)).unwrap(), f64::INFINITY);
        assert_eq!(strip.support(&Direction::axis(2, 0)).unwrap(), 1.5);
        assert!(b.support(&Direction::axis(3, 0)).is_err());
    }

    #[test]
    fn polytope_support_matches_box() {
        let b = SymmetricBody::boxed(&[1.0, 3.0]).unwrap();
        let p = SymmetricBody::polytope(
            2,
            vec![DVector::from_vec(vec![2.0, 0.0]), DVector::from_vec(vec![0.0, 1.0])],
            vec![2.0, 3.0],
        )
        .unwrap();
        for k in 0..16 {
            let t = k as f64 * 0.4;
            let u = Direction::from_slice(&[t.cos(), t.sin()]).unwrap();
            let want = b.support(&u).unwrap();
            assert!((p.support(&u).unwrap() - want).abs() < 1e-9 * want);
        }
        let strip_like = SymmetricBody::polytope(2, vec![DVector::from_vec(vec![1.0, 0.0])], vec![1.0]).unwrap();
        assert_eq!(strip_like.support(&Direction::axis(2, 1)).unwrap(), f64::INFINITY);
    }

    #[test]
    fn in_radius_examples() {
        assert_eq!(SymmetricBody::boxed(&[1.0, 2.0, 3.0]).unwrap().in_radius().value, 1.0);
        let e = SymmetricBody::ellipsoid(DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.25]))).unwrap();
        assert!((e.in_radius().value - 1.0).abs() < 1e-14);
        let p = SymmetricBody::polytope(
            2,
            vec![DVector::from_vec(vec![1.0, 1.0]), DVector::from_vec(vec![1.0, -1.0])],
            vec![2.0, 2.0],
        )
        .unwrap();
        let r = p.in_radius();
        assert_eq!(r.method, InRadiusMethod::ClosedForm);
        assert!((r.value - 2f64.sqrt()).abs() < 1e-14);
        // dense sphere scan of the support function
        let scan = (0..20_000)
            .map(|k| {
                let t = k as f64 * std::f64::consts::TAU / 20_000.0;
                p.support_vec(&DVector::from_vec(vec![t.cos(), t.sin()]))
            })
            .fold(f64::INFINITY, f64::min);
        assert!((scan - 2f64.sqrt()).abs() < 1e-6);
        assert_eq!(SymmetricBody::full_space(3).in_radius().value, f64::INFINITY);
        assert_eq!(SymmetricBody::boxed(&[0.0, 1.0]).unwrap().in_radius().value, 0.0);
    }

    #[test]
    fn numerical_in_radius_agrees_with_closed_form() {
        // a ball factor under a shear is not rewritten, so the numerical route runs
        let body = SymmetricBody::product(
            3,
            vec![
                super::super::ProductBlock {
                    coords: vec![0, 1],
                    factor: Some(SymmetricBody::ball(2, 1.0).unwrap()),
                },
                super::super::ProductBlock {
                    coords: vec![2],
                    factor: Some(SymmetricBody::boxed(&[2.0]).unwrap()),
                },
            ],
        )
        .unwrap();
        let shear = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.3, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        let img = body.linear_image(&shear).unwrap();
        let r = img.in_radius();
        assert!(matches!(r.method, InRadiusMethod::Numerical { .. }));
        // h_K(Tᵀu) = |(u0, u1)| + 2|0.3 u0 + u2| is minimized on the kink u2 = -0.3 u0, u1 = 0
        let exact = 1.0 / 1.09f64.sqrt();
        assert!((r.value - exact).abs() <= 1e-6 * exact, "{} vs {exact}", r.value);
    }
}
