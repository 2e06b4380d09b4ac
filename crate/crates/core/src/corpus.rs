//! Deterministic test bodies.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::bodies::{Direction, ProductBlock, SymmetricBody};
use crate::sampling::derive_seed;

/// Identifier of [`standard_corpus`].
pub const STANDARD_CORPUS_ID: &str = "standard-v1";

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusEntry {
    pub label: String,
    pub body: SymmetricBody,
}

impl CorpusEntry {
    pub fn new(label: impl Into<String>, body: SymmetricBody) -> Self {
        Self {
            label: label.into(),
            body,
        }
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn unit_vector(n: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let len = v.norm();
        if len > 1e-8 {
            return v / len;
        }
    }
}

/// Haar-random orthogonal matrix.
pub fn random_rotation(n: usize, seed: u64) -> DMatrix<f64> {
    let mut r = rng(seed);
    let g = DMatrix::from_fn(n, n, |_, _| r.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let mut q = qr.q();
    let rr = qr.r();
    for j in 0..n {
        if rr[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Symmetric polytope with `facets` pairs of uniformly random facet
/// directions and offsets in [0.5, 2]. The coordinate slabs |x_i| ≤ 3 are
/// added so the result is bounded.
pub fn random_polytope(n: usize, facets: usize, seed: u64) -> SymmetricBody {
    let mut r = rng(seed);
    let mut normals = Vec::with_capacity(facets + n);
    let mut offsets = Vec::with_capacity(facets + n);
    for _ in 0..facets {
        normals.push(unit_vector(n, &mut r));
        offsets.push(r.random_range(0.5..2.0));
    }
    for i in 0..n {
        normals.push(DVector::from_fn(n, |j, _| if i == j { 1.0 } else { 0.0 }));
        offsets.push(3.0);
    }
    SymmetricBody::polytope(n, normals, offsets).expect("random polytope is valid")
}

/// Ellipsoid xᵀAx ≤ 1 with random axes and semi-axes in [0.4, 2.5].
pub fn random_ellipsoid(n: usize, seed: u64) -> SymmetricBody {
    let q = random_rotation(n, derive_seed(seed, 1));
    let mut r = rng(seed);
    let axes = DVector::from_fn(n, |_, _| r.random_range(0.4_f64..2.5));
    let lambda = DMatrix::from_diagonal(&axes.map(|a| 1.0 / (a * a)));
    let shape = &q * lambda * q.transpose();
    let shape = (&shape + shape.transpose()) * 0.5;
    SymmetricBody::ellipsoid(shape).expect("random ellipsoid is valid")
}

/// Traceless symmetric matrix with entries uniform in [−0.5, 0.5] before
/// symmetrization and trace projection.
pub fn random_traceless(n: usize, seed: u64) -> DMatrix<f64> {
    let mut r = rng(seed);
    let a = DMatrix::from_fn(n, n, |_, _| r.random_range(-0.5..0.5));
    let s = (&a + a.transpose()) * 0.5;
    let shift = s.trace() / n as f64;
    s - DMatrix::identity(n, n) * shift
}

fn label_widths(w: &[f64]) -> String {
    let parts: Vec<String> = w.iter().map(|v| format!("{v}")).collect();
    parts.join(",")
}

fn boxed(w: &[f64]) -> CorpusEntry {
    CorpusEntry::new(format!("box[{}]", label_widths(w)), SymmetricBody::boxed(w).unwrap())
}

fn strip(n: usize, r: f64) -> CorpusEntry {
    CorpusEntry::new(
        format!("strip(n={n},R={r})"),
        SymmetricBody::strip(Direction::axis(n, 0), r).unwrap(),
    )
}

fn ball(n: usize, r: f64) -> CorpusEntry {
    CorpusEntry::new(format!("ball(n={n},r={r})"), SymmetricBody::ball(n, r).unwrap())
}

/// Mixed corpus in dimensions 1 to 5 used for audits and calibration.
pub fn standard_corpus() -> Vec<CorpusEntry> {
    let mut out = vec![
        strip(2, 0.5),
        strip(2, 1.0),
        strip(2, 2.0),
        strip(2, 4.0),
        boxed(&[0.3]),
        boxed(&[1.0]),
        boxed(&[1.0, 2.0]),
        boxed(&[0.1, 0.1]),
        boxed(&[0.5, 1.0, 1.5]),
        boxed(&[1.0, 1.0, 1.0, 1.0]),
        boxed(&[0.8, 0.8, 0.8, 0.8, 0.8]),
        ball(2, 1.0),
        ball(3, 0.5),
        ball(5, 2.5),
        CorpusEntry::new(
            "ball(n=2,r=1)x[-0.5,0.5]",
            SymmetricBody::product(
                3,
                vec![
                    ProductBlock {
                        coords: vec![0, 1],
                        factor: Some(SymmetricBody::ball(2, 1.0).unwrap()),
                    },
                    ProductBlock {
                        coords: vec![2],
                        factor: Some(SymmetricBody::boxed(&[0.5]).unwrap()),
                    },
                ],
            )
            .unwrap(),
        ),
    ];
    for (n, m, seed) in [(2, 3, 11), (3, 4, 12), (4, 5, 13), (5, 5, 14)] {
        out.push(CorpusEntry::new(
            format!("polytope(n={n},m={m},seed={seed})"),
            random_polytope(n, m, seed),
        ));
    }
    out.push(CorpusEntry::new("ellipsoid(n=2,seed=21)", random_ellipsoid(2, 21)));
    out
}

/// `count` bodies alternating random polytopes and ellipsoids, n ∈ 2..=6.
pub fn polytope_ellipsoid_corpus(count: usize, seed: u64) -> Vec<CorpusEntry> {
    (0..count)
        .map(|i| {
            let s = derive_seed(seed, i as u64);
            let n = 2 + i % 5;
            if i % 2 == 0 {
                let m = 2 + (s % 5) as usize;
                CorpusEntry::new(format!("polytope(n={n},m={m},seed={s})"), random_polytope(n, m, s))
            } else {
                CorpusEntry::new(format!("ellipsoid(n={n},seed={s})"), random_ellipsoid(n, s))
            }
        })
        .collect()
}

/// `count` bodies with closed-form measures: strips, boxes, balls and
/// products, n ∈ 1..=8.
pub fn closed_form_corpus(count: usize, seed: u64) -> Vec<CorpusEntry> {
    let mut r = rng(seed);
    (0..count)
        .map(|i| {
            let n = 1 + i % 8;
            match i % 4 {
                0 => {
                    let dir = Direction::normalize(unit_vector(n, &mut r)).unwrap();
                    let w = r.random_range(0.2..2.5);
                    CorpusEntry::new(format!("strip(n={n},R={w:.3})"), SymmetricBody::strip(dir, w).unwrap())
                }
                1 => {
                    let w: Vec<f64> = (0..n).map(|_| r.random_range(0.3..3.0)).collect();
                    CorpusEntry::new(format!("box(n={n})"), SymmetricBody::boxed(&w).unwrap())
                }
                2 => {
                    let rad = r.random_range(0.3..1.2) * (n as f64).sqrt();
                    CorpusEntry::new(format!("ball(n={n},r={rad:.3})"), SymmetricBody::ball(n, rad).unwrap())
                }
                _ => {
                    let k = 1 + n / 2;
                    let ball_part = SymmetricBody::ball(k, r.random_range(0.5..2.0)).unwrap();
                    let mut blocks = vec![ProductBlock {
                        coords: (0..k).collect(),
                        factor: Some(ball_part),
                    }];
                    if n > k {
                        let w: Vec<f64> = (k..n).map(|_| r.random_range(0.3..3.0)).collect();
                        blocks.push(ProductBlock {
                            coords: (k..n).collect(),
                            factor: Some(SymmetricBody::boxed(&w).unwrap()),
                        });
                    }
                    let dim = n.max(k);
                    CorpusEntry::new(format!("product(n={dim})"), SymmetricBody::product(dim, blocks).unwrap())
                }
            }
        })
        .collect()
}
