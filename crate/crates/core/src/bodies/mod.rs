//! Centrally symmetric convex bodies given by closed-form oracles.
//!
//! Every variant exposes its gauge (Minkowski functional), so membership of
//! any dilate `aK` is a single comparison `gauge(p) <= a`. The Monte Carlo
//! engines lean on that to evaluate several dilates on one sample stream.

mod canonical;
mod distance;
mod support;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub use canonical::{IntervalProduct, Slab};
pub use distance::DistanceOracle;
pub use support::{InRadius, InRadiusMethod};

/// Relative slack used when comparing a gauge against 1 on the boundary.
pub const BOUNDARY_TOL: f64 = 1e-12;

/// Unit vector in R^n.
#[derive(Debug, Clone, PartialEq)]
pub struct Direction(DVector<f64>);

impl Direction {
    /// Accepts a vector whose Euclidean norm is 1 within `1e-12`.
    pub fn new(components: DVector<f64>) -> Result<Self> {
        let norm = components.norm();
        if !norm.is_finite() || (norm - 1.0).abs() > 1e-12 {
            return Err(Error::Domain(format!(
                "direction must have unit norm, got {norm}"
            )));
        }
        Ok(Self(components))
    }

    /// Normalizes a nonzero vector.
    pub fn normalize(components: DVector<f64>) -> Result<Self> {
        let norm = components.norm();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::Domain("cannot normalize a zero vector".into()));
        }
        Ok(Self(components / norm))
    }

    pub fn from_slice(components: &[f64]) -> Result<Self> {
        Self::new(DVector::from_column_slice(components))
    }

    pub fn axis(dim: usize, i: usize) -> Self {
        let mut v = DVector::zeros(dim);
        v[i] = 1.0;
        Self(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.0
    }
}

/// One coordinate block of a [`SymmetricBody::Product`].
#[derive(Debug, Clone, PartialEq)]
pub struct ProductBlock {
    /// Ambient coordinates owned by the block, in the factor's order.
    pub coords: Vec<usize>,
    /// `None` is the whole space on those coordinates.
    pub factor: Option<SymmetricBody>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SymmetricBody {
    Ball {
        dim: usize,
        radius: f64,
    },
    /// {x : |⟨u, x⟩| ≤ R}
    Strip {
        direction: Direction,
        half_width: f64,
    },
    /// {x : |x_i| ≤ a_i}
    Box {
        half_widths: DVector<f64>,
    },
    /// {x : ⟨Ax, x⟩ ≤ 1}, A symmetric positive definite
    Ellipsoid {
        shape: DMatrix<f64>,
    },
    /// {x : |⟨a_i, x⟩| ≤ b_i for all i}
    Polytope {
        dim: usize,
        normals: Vec<DVector<f64>>,
        offsets: Vec<f64>,
    },
    Product {
        dim: usize,
        blocks: Vec<ProductBlock>,
    },
    /// e^x K = {(e^{x_1} y_1, …, e^{x_n} y_n) : y ∈ K}
    DiagScaled {
        log_scale: DVector<f64>,
        inner: Box<SymmetricBody>,
    },
    /// T K
    LinearImage {
        map: DMatrix<f64>,
        inverse: DMatrix<f64>,
        inner: Box<SymmetricBody>,
    },
}

fn check_finite_nonneg(name: &str, v: f64) -> Result<()> {
    if !v.is_finite() || v < 0.0 {
        return Err(Error::InvalidBody(format!(
            "{name} must be finite and nonnegative, got {v}"
        )));
    }
    Ok(())
}

fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

/// num / den with the conventions 0/0 = 0 and x/0 = ∞ for x > 0.
#[inline]
fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else if num == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

impl SymmetricBody {
    pub fn ball(dim: usize, radius: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidBody("dimension must be at least 1".into()));
        }
        check_finite_nonneg("radius", radius)?;
        Ok(Self::Ball { dim, radius })
    }

    pub fn strip(direction: Direction, half_width: f64) -> Result<Self> {
        check_finite_nonneg("half_width", half_width)?;
        Ok(Self::Strip {
            direction,
            half_width,
        })
    }

    pub fn boxed(half_widths: &[f64]) -> Result<Self> {
        if half_widths.is_empty() {
            return Err(Error::InvalidBody("dimension must be at least 1".into()));
        }
        for &a in half_widths {
            check_finite_nonneg("half_widths", a)?;
        }
        Ok(Self::Box {
            half_widths: DVector::from_column_slice(half_widths),
        })
    }

    pub fn ellipsoid(shape: DMatrix<f64>) -> Result<Self> {
        let n = shape.nrows();
        if n == 0 || shape.ncols() != n {
            return Err(Error::InvalidBody("ellipsoid matrix must be square".into()));
        }
        let asym = (&shape - shape.transpose()).amax();
        if !shape.iter().all(|v| v.is_finite()) || asym > 1e-12 * shape.amax().max(1.0) {
            return Err(Error::InvalidBody("ellipsoid matrix must be symmetric".into()));
        }
        if shape.clone().cholesky().is_none() {
            return Err(Error::InvalidBody(
                "ellipsoid matrix must be positive definite".into(),
            ));
        }
        Ok(Self::Ellipsoid { shape })
    }

    pub fn polytope(dim: usize, normals: Vec<DVector<f64>>, offsets: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidBody("dimension must be at least 1".into()));
        }
        if normals.len() != offsets.len() {
            return Err(Error::InvalidBody(format!(
                "{} normals but {} offsets",
                normals.len(),
                offsets.len()
            )));
        }
        for a in &normals {
            check_dim(dim, a.len())?;
            if !(a.norm() > 0.0) || !a.iter().all(|v| v.is_finite()) {
                return Err(Error::InvalidBody("normals must be finite and nonzero".into()));
            }
        }
        for &b in &offsets {
            check_finite_nonneg("offsets", b)?;
        }
        Ok(Self::Polytope {
            dim,
            normals,
            offsets,
        })
    }

    /// Product of factors living on disjoint coordinate blocks that cover 0..dim.
    pub fn product(dim: usize, blocks: Vec<ProductBlock>) -> Result<Self> {
        let mut seen = vec![false; dim];
        for b in &blocks {
            if b.coords.is_empty() {
                return Err(Error::InvalidBody("product block without coordinates".into()));
            }
            for &c in &b.coords {
                if c >= dim || seen[c] {
                    return Err(Error::InvalidBody(format!(
                        "product coordinate {c} out of range or repeated"
                    )));
                }
                seen[c] = true;
            }
            if let Some(f) = &b.factor {
                check_dim(b.coords.len(), f.dim())?;
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::InvalidBody(
                "product blocks must cover every coordinate".into(),
            ));
        }
        Ok(Self::Product { dim, blocks })
    }

    /// The whole space R^n.
    pub fn full_space(dim: usize) -> Self {
        Self::Product {
            dim,
            blocks: vec![ProductBlock {
                coords: (0..dim).collect(),
                factor: None,
            }],
        }
    }

    /// `factor × R^m` with the factor on the leading coordinates.
    pub fn cylinder(factor: SymmetricBody, free_dims: usize) -> Result<Self> {
        let k = factor.dim();
        let mut blocks = vec![ProductBlock {
            coords: (0..k).collect(),
            factor: Some(factor),
        }];
        if free_dims > 0 {
            blocks.push(ProductBlock {
                coords: (k..k + free_dims).collect(),
                factor: None,
            });
        }
        Self::product(k + free_dims, blocks)
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Ball { dim, .. } => *dim,
            Self::Strip { direction, .. } => direction.dim(),
            Self::Box { half_widths } => half_widths.len(),
            Self::Ellipsoid { shape } => shape.nrows(),
            Self::Polytope { dim, .. } => *dim,
            Self::Product { dim, .. } => *dim,
            Self::DiagScaled { log_scale, .. } => log_scale.len(),
            Self::LinearImage { map, .. } => map.nrows(),
        }
    }

    pub fn is_full_space(&self) -> bool {
        matches!(self, Self::Product { blocks, .. } if blocks.iter().all(|b| b.factor.is_none()))
    }

    /// Short variant name for reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Ball { .. } => "ball",
            Self::Strip { .. } => "strip",
            Self::Box { .. } => "box",
            Self::Ellipsoid { .. } => "ellipsoid",
            Self::Polytope { .. } => "polytope",
            Self::Product { .. } => "product",
            Self::DiagScaled { .. } => "diag_scaled",
            Self::LinearImage { .. } => "linear_image",
        }
    }

    /// Minkowski functional inf{t ≥ 0 : p ∈ tK} (∞ when no dilate contains p).
    /// The caller guarantees `p.len() == self.dim()`.
    pub fn gauge(&self, p: &[f64]) -> f64 {
        match self {
            Self::Ball { radius, .. } => ratio(p.iter().map(|v| v * v).sum::<f64>().sqrt(), *radius),
            Self::Strip {
                direction,
                half_width,
            } => {
                let d: f64 = direction.0.iter().zip(p).map(|(u, v)| u * v).sum();
                ratio(d.abs(), *half_width)
            }
            Self::Box { half_widths } => half_widths
                .iter()
                .zip(p)
                .fold(0.0, |m, (&a, &v)| m.max(ratio(v.abs(), a))),
            Self::Ellipsoid { shape } => {
                let n = p.len();
                let mut q = 0.0;
                for i in 0..n {
                    let mut row = 0.0;
                    for j in 0..n {
                        row += shape[(i, j)] * p[j];
                    }
                    q += row * p[i];
                }
                q.max(0.0).sqrt()
            }
            Self::Polytope {
                normals, offsets, ..
            } => normals.iter().zip(offsets).fold(0.0, |m, (a, &b)| {
                let d: f64 = a.iter().zip(p).map(|(u, v)| u * v).sum();
                m.max(ratio(d.abs(), b))
            }),
            Self::Product { blocks, .. } => {
                let mut g: f64 = 0.0;
                let mut buf = Vec::new();
                for b in blocks {
                    if let Some(f) = &b.factor {
                        buf.clear();
                        buf.extend(b.coords.iter().map(|&c| p[c]));
                        g = g.max(f.gauge(&buf));
                    }
                }
                g
            }
            Self::DiagScaled { log_scale, inner } => {
                let q: Vec<f64> = p
                    .iter()
                    .zip(log_scale.iter())
                    .map(|(v, x)| v * (-x).exp())
                    .collect();
                inner.gauge(&q)
            }
            Self::LinearImage { inverse, inner, .. } => {
                let n = p.len();
                let q: Vec<f64> = (0..n)
                    .map(|i| (0..n).map(|j| inverse[(i, j)] * p[j]).sum())
                    .collect();
                inner.gauge(&q)
            }
        }
    }

    /// Membership in the closed body.
    pub fn contains(&self, p: &[f64]) -> Result<bool> {
        check_dim(self.dim(), p.len())?;
        Ok(self.gauge(p) <= 1.0 + BOUNDARY_TOL)
    }

    /// e^x K as a `DiagScaled` node.
    pub fn scale_diag(&self, x: &[f64]) -> Result<Self> {
        check_dim(self.dim(), x.len())?;
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::Domain("scaling exponents must be finite".into()));
        }
        Ok(Self::DiagScaled {
            log_scale: DVector::from_column_slice(x),
            inner: Box::new(self.clone()),
        })
    }

    /// aK for a > 0.
    pub fn scale_uniform(&self, a: f64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::Domain(format!("scale must be positive, got {a}")));
        }
        self.scale_diag(&vec![a.ln(); self.dim()])
    }

    /// T K, rewritten in closed form for balls, strips, boxes, ellipsoids
    /// and polytopes.
    pub fn linear_image(&self, map: &DMatrix<f64>) -> Result<Self> {
        let n = self.dim();
        if map.nrows() != n || map.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: map.nrows(),
            });
        }
        let inverse = map
            .clone()
            .try_inverse()
            .filter(|inv| inv.iter().all(|v| v.is_finite()))
            .ok_or_else(|| Error::SingularMatrix("linear_image map is not invertible".into()))?;
        if map.determinant().abs() < 1e-300 {
            return Err(Error::SingularMatrix("linear_image map is not invertible".into()));
        }
        Ok(canonical::apply_linear(self.clone(), map, &inverse))
    }

    /// Spot-checks central symmetry and midpoint convexity on `count` random
    /// points drawn around the body's in-radius scale.
    pub fn spot_check(&self, count: usize, seed: u64) -> Result<()> {
        let n = self.dim();
        let scale = match self.in_radius().value {
            r if r.is_finite() && r > 0.0 => 1.5 * r,
            _ => 1.0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = || -> Vec<f64> {
            (0..n)
                .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
                .collect()
        };
        let mut inside: Vec<Vec<f64>> = Vec::new();
        for _ in 0..count {
            let p = draw();
            let neg: Vec<f64> = p.iter().map(|v| -v).collect();
            let (a, b) = (self.gauge(&p), self.gauge(&neg));
            if (a - b).abs() > 1e-9 * (1.0 + a.abs().min(1e12)) && !(a.is_infinite() && b.is_infinite()) {
                return Err(Error::InvalidBody(format!(
                    "symmetry check failed: gauge {a} vs {b}"
                )));
            }
            if a <= 1.0 {
                inside.push(p);
            }
        }
        for w in inside.windows(2) {
            let mid: Vec<f64> = w[0].iter().zip(&w[1]).map(|(u, v)| 0.5 * (u + v)).collect();
            if self.gauge(&mid) > 1.0 + 1e-9 {
                return Err(Error::InvalidBody("midpoint convexity check failed".into()));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn rotation(theta: f64) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[theta.cos(), -theta.sin(), theta.sin(), theta.cos()])
    }

    pub(crate) fn corpus() -> Vec<SymmetricBody> {
        let b = SymmetricBody::boxed(&[1.0, 2.0]).unwrap();
        vec![
            SymmetricBody::ball(2, 1.3).unwrap(),
            SymmetricBody::strip(Direction::normalize(DVector::from_vec(vec![1.0, 2.0])).unwrap(), 0.7).unwrap(),
            b.clone(),
            SymmetricBody::ellipsoid(DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 0.5])).unwrap(),
            SymmetricBody::polytope(
                2,
                vec![DVector::from_vec(vec![1.0, 1.0]), DVector::from_vec(vec![1.0, -2.0])],
                vec![2.0, 1.5],
            )
            .unwrap(),
            SymmetricBody::cylinder(SymmetricBody::boxed(&[0.8]).unwrap(), 1).unwrap(),
            b.scale_diag(&[0.3, -0.2]).unwrap(),
            b.linear_image(&rotation(0.4)).unwrap(),
            SymmetricBody::cylinder(SymmetricBody::ball(1, 1.0).unwrap(), 1)
                .unwrap()
                .linear_image(&DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]))
                .unwrap(),
        ]
    }

    #[test]
    fn membership_examples() {
        let ball = SymmetricBody::ball(3, 1.0).unwrap();
        assert!(ball.contains(&[0.0, 0.0, 0.0]).unwrap());
        let b = SymmetricBody::boxed(&[1.0, 2.0]).unwrap();
        assert!(!b.contains(&[1.5, 0.0]).unwrap());
        let unit = SymmetricBody::boxed(&[1.0, 1.0]).unwrap();
        let scaled = unit.scale_diag(&[2f64.ln(), 0.0]).unwrap();
        assert!(scaled.contains(&[1.9, 0.5]).unwrap());
        assert!(!scaled.contains(&[2.1, 0.5]).unwrap());
        assert_eq!(
            b.contains(&[1.0]),
            Err(Error::DimensionMismatch { expected: 2, got: 1 })
        );
    }

    #[test]
    fn constructors_reject_bad_input() {
        assert!(SymmetricBody::ball(2, -1.0).is_err());
        assert!(SymmetricBody::boxed(&[1.0, f64::NAN]).is_err());
        assert!(SymmetricBody::ellipsoid(DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0])).is_err());
        assert!(SymmetricBody::polytope(2, vec![DVector::zeros(2)], vec![1.0]).is_err());
        assert!(Direction::from_slice(&[1.0, 1.0]).is_err());
        let sing = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(matches!(
            SymmetricBody::ball(2, 1.0).unwrap().linear_image(&sing),
            Err(Error::SingularMatrix(_))
        ));
        // zero half-width is an accepted empty-interior encoding
        assert!(SymmetricBody::boxed(&[0.0, 1.0]).is_ok());
    }

    #[test]
    fn corpus_passes_spot_check() {
        for b in corpus() {
            b.spot_check(100, 3).unwrap();
        }
    }

    proptest! {
        #[test]
        fn membership_is_symmetric(x in -3.0..3.0f64, y in -3.0..3.0f64) {
            for b in corpus() {
                prop_assert_eq!(b.contains(&[x, y]).unwrap(), b.contains(&[-x, -y]).unwrap());
            }
        }

        #[test]
        fn midpoint_convexity(a in prop::array::uniform4(-2.5..2.5f64)) {
            for b in corpus() {
                let p = [a[0], a[1]];
                let q = [a[2], a[3]];
                if b.contains(&p).unwrap() && b.contains(&q).unwrap() {
                    let m = [(p[0] + q[0]) / 2.0, (p[1] + q[1]) / 2.0];
                    prop_assert!(b.contains(&m).unwrap());
                }
            }
        }

        #[test]
        fn diag_scaling_composes_and_inverts(
            x in prop::array::uniform2(-1.0..1.0f64),
            y in prop::array::uniform2(-1.0..1.0f64),
            p in prop::array::uniform2(-3.0..3.0f64),
        ) {
            for k in corpus() {
                let twice = k.scale_diag(&x).unwrap().scale_diag(&y).unwrap();
                let once = k.scale_diag(&[x[0] + y[0], x[1] + y[1]]).unwrap();
                let g1 = twice.gauge(&p);
                let g2 = once.gauge(&p);
                prop_assert!((g1 - g2).abs() <= 1e-9 * (1.0 + g1));
                let back = k.scale_diag(&x).unwrap().scale_diag(&[-x[0], -x[1]]).unwrap();
                prop_assert!((back.gauge(&p) - k.gauge(&p)).abs() <= 1e-9 * (1.0 + k.gauge(&p)));
            }
        }

        #[test]
        fn linear_image_is_functorial(
            s in prop::array::uniform4(-1.0..1.0f64),
            t in prop::array::uniform4(-1.0..1.0f64),
            p in prop::array::uniform2(-3.0..3.0f64),
        ) {
            let sm = DMatrix::from_row_slice(2, 2, &s) + DMatrix::identity(2, 2) * 2.0;
            let tm = DMatrix::from_row_slice(2, 2, &t) + DMatrix::identity(2, 2) * 2.0;
            for k in corpus() {
                let seq = k.linear_image(&tm).unwrap().linear_image(&sm).unwrap();
                let once = k.linear_image(&(&sm * &tm)).unwrap();
                let (g1, g2) = (seq.gauge(&p), once.gauge(&p));
                prop_assert!((g1 - g2).abs() <= 1e-8 * (1.0 + g1));
            }
        }
    }

    #[test]
    fn uniform_scaling_of_box_and_strip() {
        let a = 1.7_f64;
        let scaled = SymmetricBody::boxed(&[1.0, 1.0])
            .unwrap()
            .scale_diag(&[a.ln(), a.ln()])
            .unwrap();
        let direct = SymmetricBody::boxed(&[a, a]).unwrap();
        let strip = SymmetricBody::strip(Direction::axis(2, 0), 1.5).unwrap();
        let strip_scaled = strip.scale_diag(&[2f64.ln(), 7.0]).unwrap();
        let strip_wide = SymmetricBody::strip(Direction::axis(2, 0), 3.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..2000 {
            let p = [rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0)];
            assert_eq!(scaled.contains(&p).unwrap(), direct.contains(&p).unwrap());
            assert_eq!(strip_scaled.contains(&p).unwrap(), strip_wide.contains(&p).unwrap());
            let zero = direct.scale_diag(&[0.0, 0.0]).unwrap();
            assert_eq!(zero.contains(&p).unwrap(), direct.contains(&p).unwrap());
        }
    }

    #[test]
    fn linear_image_closed_forms() {
        let img = SymmetricBody::ball(2, 1.0)
            .unwrap()
            .linear_image(&DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 0.5])))
            .unwrap();
        match &img {
            SymmetricBody::Ellipsoid { shape } => {
                assert!((shape[(0, 0)] - 0.25).abs() < 1e-15);
                assert!((shape[(1, 1)] - 4.0).abs() < 1e-12);
                assert!(shape[(0, 1)].abs() < 1e-15);
            }
            other => panic!("expected ellipsoid, got {other:?}"),
        }

        let rot = rotation(std::f64::consts::FRAC_PI_4);
        let square = SymmetricBody::boxed(&[1.0, 1.0]).unwrap();
        let rotated = square.linear_image(&rot).unwrap();
        let SymmetricBody::Polytope { normals, offsets, .. } = &rotated else {
            panic!("expected polytope, got {rotated:?}");
        };
        let s = std::f64::consts::FRAC_1_SQRT_2;
        for (a, &b) in normals.iter().zip(offsets) {
            assert!((a[0].abs() - s).abs() < 1e-12 && (a[1].abs() - s).abs() < 1e-12);
            assert!((b - 1.0).abs() < 1e-12);
        }
        let explicit = SymmetricBody::polytope(
            2,
            vec![DVector::from_vec(vec![s, s]), DVector::from_vec(vec![s, -s])],
            vec![1.0, 1.0],
        )
        .unwrap();
        let node = SymmetricBody::LinearImage {
            map: rot.clone(),
            inverse: rot.transpose(),
            inner: Box::new(square),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10_000 {
            let p = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
            let want = node.contains(&p).unwrap();
            assert_eq!(rotated.contains(&p).unwrap(), want);
            assert_eq!(explicit.contains(&p).unwrap(), want);
        }
        let same = rotated.linear_image(&DMatrix::identity(2, 2)).unwrap();
        assert!((same.gauge(&[0.3, 0.9]) - rotated.gauge(&[0.3, 0.9])).abs() < 1e-14);
    }
}
