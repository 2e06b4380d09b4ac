//! Test functions with exact gradients: linear forms, quadratic forms and
//! sparse polynomials.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::special::truncated_moment;

/// Sparse polynomial in `dim` variables, stored as (coefficient, exponents).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polynomial<T> {
    dim: usize,
    terms: Vec<(T, Vec<u32>)>,
}

impl<T: Real> Polynomial<T> {
    pub fn new(dim: usize, terms: Vec<(T, Vec<u32>)>) -> Result<Self> {
        for (_, e) in &terms {
            if e.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: e.len(),
                });
            }
        }
        Ok(Self { dim, terms }.normalized())
    }

    pub fn zero(dim: usize) -> Self {
        Self { dim, terms: vec![] }
    }

    pub fn constant(dim: usize, c: T) -> Self {
        Self {
            dim,
            terms: vec![(c, vec![0; dim])],
        }
        .normalized()
    }

    /// The coordinate function x_i.
    pub fn coordinate(dim: usize, i: usize) -> Self {
        let mut e = vec![0; dim];
        e[i] = 1;
        Self {
            dim,
            terms: vec![(T::one(), e)],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> &[(T, Vec<u32>)] {
        &self.terms
    }

    pub fn degree(&self) -> u32 {
        self.terms
            .iter()
            .map(|(_, e)| e.iter().sum::<u32>())
            .max()
            .unwrap_or(0)
    }

    fn normalized(self) -> Self {
        let mut map: BTreeMap<Vec<u32>, T> = BTreeMap::new();
        for (c, e) in self.terms {
            let slot = map.entry(e).or_insert_with(T::zero);
            *slot = *slot + c;
        }
        let terms = map
            .into_iter()
            .filter(|(_, c)| *c != T::zero())
            .map(|(e, c)| (c, e))
            .collect();
        Self {
            dim: self.dim,
            terms,
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        Self {
            dim: self.dim,
            terms,
        }
        .normalized()
    }

    pub fn scale(&self, s: T) -> Self {
        Self {
            dim: self.dim,
            terms: self.terms.iter().map(|(c, e)| (*c * s, e.clone())).collect(),
        }
        .normalized()
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        let mut terms = Vec::with_capacity(self.terms.len() * other.terms.len());
        for (c1, e1) in &self.terms {
            for (c2, e2) in &other.terms {
                let e = e1.iter().zip(e2).map(|(a, b)| a + b).collect();
                terms.push((*c1 * *c2, e));
            }
        }
        Self {
            dim: self.dim,
            terms,
        }
        .normalized()
    }

    pub fn eval(&self, x: &[T]) -> T {
        self.terms.iter().fold(T::zero(), |acc, (c, e)| {
            acc + e
                .iter()
                .zip(x)
                .fold(*c, |m, (&k, &xi)| if k == 0 { m } else { m * xi.powi(k as i32) })
        })
    }

    pub fn derivative(&self, i: usize) -> Self {
        let terms = self
            .terms
            .iter()
            .filter(|(_, e)| e[i] > 0)
            .map(|(c, e)| {
                let mut e = e.clone();
                let k = e[i];
                e[i] -= 1;
                (*c * T::lit(k as f64), e)
            })
            .collect();
        Self {
            dim: self.dim,
            terms,
        }
        .normalized()
    }

    pub fn gradient(&self) -> Vec<Self> {
        (0..self.dim).map(|i| self.derivative(i)).collect()
    }

    /// Fixes x_i = value.
    pub fn substitute(&self, i: usize, value: T) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|(c, e)| {
                let mut e = e.clone();
                let k = e[i];
                e[i] = 0;
                (*c * value.powi(k as i32), e)
            })
            .collect();
        Self {
            dim: self.dim,
            terms,
        }
        .normalized()
    }

    /// True when p(−x) = p(x) identically.
    pub fn is_even(&self) -> bool {
        self.terms
            .iter()
            .all(|(_, e)| e.iter().sum::<u32>() % 2 == 0)
    }

    /// ∫ p dγ over the coordinate box Π[−a_i, a_i] (entries may be ∞).
    pub fn integrate_box(&self, half_widths: &[T]) -> T {
        assert_eq!(half_widths.len(), self.dim);
        self.terms.iter().fold(T::zero(), |acc, (c, e)| {
            acc + e
                .iter()
                .zip(half_widths)
                .fold(*c, |m, (&k, &a)| m * truncated_moment(k, a))
        })
    }
}

/// Functions used by the Poincaré, trace and witness checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FunctionSpec<T> {
    /// f(x) = ⟨v, x⟩
    Linear { v: Vec<T> },
    /// f(x) = ⟨Tx, x⟩ + c with T symmetric
    Quadratic { matrix: Vec<Vec<T>>, constant: T },
    Polynomial(Polynomial<T>),
}

impl<T: Real> FunctionSpec<T> {
    pub fn linear(v: Vec<T>) -> Self {
        Self::Linear { v }
    }

    pub fn quadratic(matrix: Vec<Vec<T>>, constant: T) -> Result<Self> {
        let n = matrix.len();
        for (i, row) in matrix.iter().enumerate() {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: row.len(),
                });
            }
            for j in 0..i {
                let tol = T::lit(1e-12) * (row[j].abs() + matrix[j][i].abs() + T::one());
                if (row[j] - matrix[j][i]).abs() > tol {
                    return Err(Error::Domain("quadratic form must be symmetric".into()));
                }
            }
        }
        Ok(Self::Quadratic { matrix, constant })
    }

    /// Σ d_i x_i²
    pub fn diagonal_quadratic(d: &[T]) -> Self {
        let n = d.len();
        let matrix = (0..n)
            .map(|i| (0..n).map(|j| if i == j { d[i] } else { T::zero() }).collect())
            .collect();
        Self::Quadratic {
            matrix,
            constant: T::zero(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Linear { v } => v.len(),
            Self::Quadratic { matrix, .. } => matrix.len(),
            Self::Polynomial(p) => p.dim(),
        }
    }

    pub fn eval(&self, x: &[T]) -> T {
        match self {
            Self::Linear { v } => v.iter().zip(x).fold(T::zero(), |a, (&vi, &xi)| a + vi * xi),
            Self::Quadratic { matrix, constant } => {
                let mut s = *constant;
                for (i, row) in matrix.iter().enumerate() {
                    let ti = row.iter().zip(x).fold(T::zero(), |a, (&m, &xj)| a + m * xj);
                    s = s + ti * x[i];
                }
                s
            }
            Self::Polynomial(p) => p.eval(x),
        }
    }

    pub fn gradient(&self, x: &[T], out: &mut [T]) {
        match self {
            Self::Linear { v } => out.copy_from_slice(v),
            Self::Quadratic { matrix, .. } => {
                for (o, row) in out.iter_mut().zip(matrix) {
                    *o = T::lit(2.0) * row.iter().zip(x).fold(T::zero(), |a, (&m, &xj)| a + m * xj);
                }
            }
            Self::Polynomial(p) => {
                for (i, o) in out.iter_mut().enumerate() {
                    *o = p.derivative(i).eval(x);
                }
            }
        }
    }

    pub fn to_polynomial(&self) -> Polynomial<T> {
        let n = self.dim();
        match self {
            Self::Linear { v } => {
                let terms = v
                    .iter()
                    .enumerate()
                    .map(|(i, &c)| {
                        let mut e = vec![0; n];
                        e[i] = 1;
                        (c, e)
                    })
                    .collect();
                Polynomial { dim: n, terms }.normalized()
            }
            Self::Quadratic { matrix, constant } => {
                let mut terms = vec![(*constant, vec![0; n])];
                for (i, row) in matrix.iter().enumerate() {
                    for (j, &m) in row.iter().enumerate() {
                        let mut e = vec![0; n];
                        e[i] += 1;
                        e[j] += 1;
                        terms.push((m, e));
                    }
                }
                Polynomial { dim: n, terms }.normalized()
            }
            Self::Polynomial(p) => p.clone(),
        }
    }

    /// Spot-checks f(−x) = f(x) on the given points.
    pub fn looks_even(&self, points: &[Vec<T>]) -> bool {
        points.iter().all(|p| {
            let neg: Vec<T> = p.iter().map(|&v| -v).collect();
            let a = self.eval(p);
            let b = self.eval(&neg);
            (a - b).abs() <= T::lit(1e-9) * (a.abs() + b.abs() + T::one())
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cubic() -> FunctionSpec<f64> {
        // x0 + 0.05 x0^3 - 0.3 x0 x1^2 + 2 x1
        FunctionSpec::Polynomial(
            Polynomial::new(
                2,
                vec![
                    (1.0, vec![1, 0]),
                    (0.05, vec![3, 0]),
                    (-0.3, vec![1, 2]),
                    (2.0, vec![0, 1]),
                ],
            )
            .unwrap(),
        )
    }

    proptest! {
        #[test]
        fn gradients_match_central_differences(x0 in -2.0..2.0f64, x1 in -2.0..2.0f64) {
            let specs = vec![
                cubic(),
                FunctionSpec::linear(vec![0.3, -1.2]),
                FunctionSpec::quadratic(vec![vec![1.0, 0.4], vec![0.4, 2.0]], 0.5).unwrap(),
            ];
            for f in &specs {
                let x = [x0, x1];
                let mut g = [0.0; 2];
                f.gradient(&x, &mut g);
                for i in 0..2 {
                    let h = 1e-5;
                    let mut xp = x; xp[i] += h;
                    let mut xm = x; xm[i] -= h;
                    let fd = (f.eval(&xp) - f.eval(&xm)) / (2.0 * h);
                    prop_assert!((fd - g[i]).abs() <= 1e-6 * (1.0 + g[i].abs()));
                }
                let p = f.to_polynomial();
                prop_assert!((p.eval(&x) - f.eval(&x)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn box_integral_of_square() {
        // ∫_{[-1,1]^2} x0^2 dγ = μ2(1) μ0(1)
        let p = Polynomial::<f64>::coordinate(2, 0).mul(&Polynomial::coordinate(2, 0));
        let v = p.integrate_box(&[1.0, 1.0]);
        let m0 = crate::special::strip_mass(1.0).unwrap();
        assert!((v - 0.291_125_094_772_793_2 * m0 * m0).abs() < 1e-14);
        assert!(p.is_even());
        assert!(!cubic().to_polynomial().is_even());
    }

    #[test]
    fn substitute_and_degree() {
        let p = cubic().to_polynomial();
        assert_eq!(p.degree(), 3);
        let q = p.substitute(0, 2.0);
        assert!((q.eval(&[123.0, 1.0]) - p.eval(&[2.0, 1.0])).abs() < 1e-12);
    }

    #[test]
    fn asymmetric_quadratic_rejected() {
        assert!(FunctionSpec::quadratic(vec![vec![1.0, 0.0], vec![1.0, 1.0]], 0.0).is_err());
    }
}
