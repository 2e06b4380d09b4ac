//! Closed-form rewrites: pushing scalings into the payload, slab
//! representations and orthogonal interval products.

use nalgebra::{DMatrix, DVector};

use super::{ProductBlock, SymmetricBody};

/// {x : |⟨normal, x⟩| ≤ offset} with a unit normal.
#[derive(Debug, Clone, PartialEq)]
pub struct Slab {
    pub normal: DVector<f64>,
    pub offset: f64,
}

/// Body of the form {x : |⟨f_k, x⟩| ≤ h_k} for an orthonormal frame (f_k).
/// Free directions carry `h_k = ∞`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalProduct {
    /// Rows are the frame vectors.
    pub frame: DMatrix<f64>,
    pub half_widths: Vec<f64>,
}

impl IntervalProduct {
    pub fn dim(&self) -> usize {
        self.half_widths.len()
    }

    /// True when the frame is the standard basis.
    pub fn is_axis_aligned(&self) -> bool {
        (&self.frame - DMatrix::identity(self.dim(), self.dim())).amax() == 0.0
    }
}

fn is_diagonal(m: &DMatrix<f64>) -> bool {
    let n = m.nrows();
    (0..n).all(|i| (0..n).all(|j| i == j || m[(i, j)] == 0.0))
}

fn block_diagonal_for(m: &DMatrix<f64>, blocks: &[ProductBlock]) -> bool {
    let n = m.nrows();
    let mut owner = vec![0usize; n];
    for (b, blk) in blocks.iter().enumerate() {
        for &c in &blk.coords {
            owner[c] = b;
        }
    }
    (0..n).all(|i| (0..n).all(|j| owner[i] == owner[j] || m[(i, j)] == 0.0))
}

fn sub_matrix(m: &DMatrix<f64>, coords: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(coords.len(), coords.len(), |i, j| m[(coords[i], coords[j])])
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

fn slab_polytope(dim: usize, slabs: Vec<Slab>) -> SymmetricBody {
    let (normals, offsets) = slabs.into_iter().map(|s| (s.normal, s.offset)).unzip();
    SymmetricBody::Polytope {
        dim,
        normals,
        offsets,
    }
}

/// Image of `body` under `map` (with precomputed inverse), in closed form
/// whenever the result stays inside the algebra.
pub(super) fn apply_linear(
    body: SymmetricBody,
    map: &DMatrix<f64>,
    inverse: &DMatrix<f64>,
) -> SymmetricBody {
    let n = map.nrows();
    let inv_t = inverse.transpose();
    match body {
        SymmetricBody::Ball { radius, .. } if radius > 0.0 => SymmetricBody::Ellipsoid {
            shape: symmetrize(&inv_t * inverse / (radius * radius)),
        },
        SymmetricBody::Ellipsoid { shape } => SymmetricBody::Ellipsoid {
            shape: symmetrize(&inv_t * shape * inverse),
        },
        SymmetricBody::Strip {
            direction,
            half_width,
        } => {
            let w = &inv_t * direction.as_vector();
            let s = w.norm();
            SymmetricBody::Strip {
                direction: super::Direction(w / s),
                half_width: half_width / s,
            }
        }
        SymmetricBody::Box { half_widths } if is_diagonal(map) => SymmetricBody::Box {
            half_widths: DVector::from_fn(n, |i, _| half_widths[i] * map[(i, i)].abs()),
        },
        SymmetricBody::DiagScaled { log_scale, inner } => {
            let e = DMatrix::from_diagonal(&log_scale.map(f64::exp));
            let e_inv = DMatrix::from_diagonal(&log_scale.map(|x| (-x).exp()));
            apply_linear(*inner, &(map * e), &(e_inv * inverse))
        }
        SymmetricBody::LinearImage {
            map: inner_map,
            inverse: inner_inv,
            inner,
        } => apply_linear(*inner, &(map * inner_map), &(inner_inv * inverse)),
        SymmetricBody::Product { dim, blocks } if block_diagonal_for(map, &blocks) => {
            let blocks = blocks
                .into_iter()
                .map(|b| {
                    let factor = b.factor.map(|f| {
                        apply_linear(f, &sub_matrix(map, &b.coords), &sub_matrix(inverse, &b.coords))
                    });
                    ProductBlock {
                        coords: b.coords,
                        factor,
                    }
                })
                .collect();
            SymmetricBody::Product { dim, blocks }
        }
        other => match other.as_slabs() {
            Some(slabs) => {
                let slabs = slabs
                    .into_iter()
                    .map(|s| {
                        let w = &inv_t * &s.normal;
                        let len = w.norm();
                        Slab {
                            normal: w / len,
                            offset: s.offset / len,
                        }
                    })
                    .collect();
                slab_polytope(n, slabs)
            }
            None => SymmetricBody::LinearImage {
                map: map.clone(),
                inverse: inverse.clone(),
                inner: Box::new(other),
            },
        },
    }
}

impl SymmetricBody {
    /// Rewrites scaling and image nodes into closed-form payloads where
    /// possible. The result is extensionally equal to `self`.
    pub fn simplify(&self) -> SymmetricBody {
        match self {
            Self::DiagScaled { log_scale, inner } => {
                let e = DMatrix::from_diagonal(&log_scale.map(f64::exp));
                let e_inv = DMatrix::from_diagonal(&log_scale.map(|x| (-x).exp()));
                apply_linear(inner.simplify(), &e, &e_inv).tidy()
            }
            Self::LinearImage {
                map,
                inverse,
                inner,
            } => apply_linear(inner.simplify(), map, inverse).tidy(),
            Self::Product { dim, blocks } => {
                let blocks: Vec<ProductBlock> = blocks
                    .iter()
                    .map(|b| ProductBlock {
                        coords: b.coords.clone(),
                        factor: b.factor.as_ref().map(SymmetricBody::simplify),
                    })
                    .collect();
                if blocks.len() == 1 && blocks[0].coords.iter().enumerate().all(|(i, &c)| i == c) {
                    if let Some(f) = &blocks[0].factor {
                        return f.clone();
                    }
                }
                Self::Product { dim: *dim, blocks }
            }
            other => other.clone().tidy(),
        }
    }

    fn tidy(self) -> Self {
        match self {
            Self::Ellipsoid { shape } => {
                let n = shape.nrows();
                let c = shape[(0, 0)];
                let scalar = (&shape - DMatrix::identity(n, n) * c).amax() <= 1e-14 * c;
                if scalar {
                    Self::Ball {
                        dim: n,
                        radius: 1.0 / c.sqrt(),
                    }
                } else {
                    Self::Ellipsoid { shape }
                }
            }
            Self::Polytope {
                normals, offsets, ..
            } if normals.len() == 1 => {
                let len = normals[0].norm();
                Self::Strip {
                    direction: super::Direction(&normals[0] / len),
                    half_width: offsets[0] / len,
                }
            }
            other => other,
        }
    }

    /// Unit-normal slab representation, with parallel slabs merged.
    /// `None` for bodies with curved boundary.
    pub fn as_slabs(&self) -> Option<Vec<Slab>> {
        let n = self.dim();
        let raw: Vec<Slab> = match self {
            Self::Ball { radius, .. } if n == 1 => vec![Slab {
                normal: DVector::from_element(1, 1.0),
                offset: *radius,
            }],
            Self::Ellipsoid { shape } if n == 1 => vec![Slab {
                normal: DVector::from_element(1, 1.0),
                offset: 1.0 / shape[(0, 0)].sqrt(),
            }],
            Self::Ball { .. } | Self::Ellipsoid { .. } => return None,
            Self::Strip {
                direction,
                half_width,
            } => vec![Slab {
                normal: direction.as_vector().clone(),
                offset: *half_width,
            }],
            Self::Box { half_widths } => (0..n)
                .map(|i| {
                    let mut e = DVector::zeros(n);
                    e[i] = 1.0;
                    Slab {
                        normal: e,
                        offset: half_widths[i],
                    }
                })
                .collect(),
            Self::Polytope {
                normals, offsets, ..
            } => normals
                .iter()
                .zip(offsets)
                .map(|(a, &b)| {
                    let len = a.norm();
                    Slab {
                        normal: a / len,
                        offset: b / len,
                    }
                })
                .collect(),
            Self::Product { blocks, .. } => {
                let mut out = Vec::new();
                for b in blocks {
                    if let Some(f) = &b.factor {
                        for s in f.as_slabs()? {
                            let mut e = DVector::zeros(n);
                            for (k, &c) in b.coords.iter().enumerate() {
                                e[c] = s.normal[k];
                            }
                            out.push(Slab {
                                normal: e,
                                offset: s.offset,
                            });
                        }
                    }
                }
                out
            }
            Self::DiagScaled { .. } | Self::LinearImage { .. } => {
                let s = self.simplify();
                if matches!(s, Self::DiagScaled { .. } | Self::LinearImage { .. }) {
                    return None;
                }
                return s.as_slabs();
            }
        };
        let mut merged: Vec<Slab> = Vec::with_capacity(raw.len());
        'outer: for s in raw {
            for m in merged.iter_mut() {
                if m.normal.dot(&s.normal).abs() > 1.0 - 1e-12 {
                    m.offset = m.offset.min(s.offset);
                    continue 'outer;
                }
            }
            merged.push(s);
        }
        Some(merged)
    }

    /// Orthogonal interval-product form, if the slabs are pairwise orthogonal.
    pub fn as_interval_product(&self) -> Option<IntervalProduct> {
        let n = self.dim();
        let slabs = self.as_slabs()?;
        if slabs.len() > n {
            return None;
        }
        for i in 0..slabs.len() {
            for j in 0..i {
                if slabs[i].normal.dot(&slabs[j].normal).abs() > 1e-12 {
                    return None;
                }
            }
        }
        let mut rows: Vec<DVector<f64>> = slabs.iter().map(|s| s.normal.clone()).collect();
        let mut half_widths: Vec<f64> = slabs.iter().map(|s| s.offset).collect();
        // complete to an orthonormal basis with free directions
        for k in 0..n {
            if rows.len() == n {
                break;
            }
            let mut e = DVector::zeros(n);
            e[k] = 1.0;
            for r in &rows {
                let c = r.dot(&e);
                e -= r * c;
            }
            let len = e.norm();
            if len > 1e-8 {
                rows.push(e / len);
                half_widths.push(f64::INFINITY);
            }
        }
        // put axis-aligned frames in coordinate order
        let mut order: Vec<usize> = (0..n).collect();
        let axis_of = |r: &DVector<f64>| r.iter().position(|v| v.abs() == 1.0);
        if rows.iter().all(|r| axis_of(r).is_some()) {
            order.sort_by_key(|&i| axis_of(&rows[i]));
        }
        let frame = DMatrix::from_fn(n, n, |i, j| {
            let r = &rows[order[i]];
            if r.iter().any(|v| v.abs() == 1.0) {
                r[j].abs()
            } else {
                r[j]
            }
        });
        Some(IntervalProduct {
            frame,
            half_widths: order.iter().map(|&i| half_widths[i]).collect(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bodies::Direction;

    #[test]
    fn diag_scaled_box_becomes_box() {
        let b = SymmetricBody::boxed(&[1.0, 2.0]).unwrap();
        let s = b.scale_diag(&[2f64.ln(), 0.0]).unwrap().simplify();
        match s {
            SymmetricBody::Box { half_widths } => {
                assert!((half_widths[0] - 2.0).abs() < 1e-15);
                assert!((half_widths[1] - 2.0).abs() < 1e-15);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn cylinder_image_is_strip() {
        let cyl = SymmetricBody::cylinder(SymmetricBody::boxed(&[1.0]).unwrap(), 1).unwrap();
        let t = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        let img = cyl.linear_image(&t).unwrap().simplify();
        let SymmetricBody::Strip { half_width, .. } = img else {
            panic!("{img:?}");
        };
        assert!((half_width - 1.0 / 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn interval_product_frames() {
        let b = SymmetricBody::boxed(&[3.0, 1.0]).unwrap();
        let ip = b.as_interval_product().unwrap();
        assert!(ip.is_axis_aligned());
        assert_eq!(ip.half_widths, vec![3.0, 1.0]);

        let strip = SymmetricBody::strip(Direction::axis(3, 1), 0.5).unwrap();
        let ip = strip.as_interval_product().unwrap();
        assert!(ip.is_axis_aligned());
        assert_eq!(ip.half_widths[1], 0.5);
        assert!(ip.half_widths[0].is_infinite() && ip.half_widths[2].is_infinite());

        let ball = SymmetricBody::ball(2, 1.0).unwrap();
        assert!(ball.as_interval_product().is_none());

        let diamond = SymmetricBody::polytope(
            2,
            vec![DVector::from_vec(vec![1.0, 1.0]), DVector::from_vec(vec![1.0, -1.0])],
            vec![2.0, 2.0],
        )
        .unwrap();
        let ip = diamond.as_interval_product().unwrap();
        assert!(!ip.is_axis_aligned());
        assert!((ip.half_widths[0] - 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn parallel_slabs_merge() {
        let p = SymmetricBody::polytope(
            1,
            vec![DVector::from_element(1, 1.0), DVector::from_element(1, -2.0)],
            vec![1.0, 1.0],
        )
        .unwrap();
        let s = p.as_slabs().unwrap();
        assert_eq!(s.len(), 1);
        assert!((s[0].offset - 0.5).abs() < 1e-15);
    }

    #[test]
    fn isotropic_ellipsoid_becomes_ball() {
        let e = SymmetricBody::ellipsoid(DMatrix::identity(3, 3) * 4.0).unwrap().simplify();
        assert_eq!(e, SymmetricBody::Ball { dim: 3, radius: 0.5 });
    }
}
