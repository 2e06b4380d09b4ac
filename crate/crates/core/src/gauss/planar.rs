//! Radial quadrature for planar bodies.
//!
//! For K ⊂ ℝ² with radial function ρ(θ) = 1/gauge(u_θ),
//! ∫_K r^{2k} w(u) dγ = (1/2π) ∫ w(u_θ) ∫_0^ρ r^{2k+1} e^{−r²/2} dr dθ,
//! and the inner integral is elementary.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use super::moments::MomentSummary;
use super::{MeasureEstimate, Method};
use crate::bodies::SymmetricBody;
use crate::quadrature::integrate;

const TOL: f64 = 1e-14;

/// ∫_0^ρ r^{2k+1} e^{−r²/2} dr for k = 0, 1, 2.
fn radial(k: usize, rho: f64) -> f64 {
    if rho.is_infinite() {
        return [1.0, 2.0, 8.0][k];
    }
    let s = rho * rho;
    let e = (-s / 2.0).exp();
    match k {
        0 => -(-s / 2.0).exp_m1(),
        1 => 2.0 - (s + 2.0) * e,
        _ => 8.0 - (s * s + 4.0 * s + 8.0) * e,
    }
}

/// Angles in [0, π] where the radial function may fail to be smooth.
fn breakpoints(body: &SymmetricBody) -> Vec<f64> {
    let mut cuts = vec![0.0, PI];
    if let Some(slabs) = body.as_slabs() {
        for (i, si) in slabs.iter().enumerate() {
            for sj in &slabs[i + 1..] {
                for s in [1.0, -1.0] {
                    let w0 = si.normal[0] / si.offset - s * sj.normal[0] / sj.offset;
                    let w1 = si.normal[1] / si.offset - s * sj.normal[1] / sj.offset;
                    if w0.hypot(w1) < 1e-15 {
                        continue;
                    }
                    let t = (w1.atan2(w0) + PI / 2.0).rem_euclid(PI);
                    cuts.push(t);
                }
            }
        }
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-13);
    cuts
}

/// (1/π) ∫_0^π f(θ, ρ(θ)) dθ split at the breakpoints.
fn half_turn(body: &SymmetricBody, cuts: &[f64], f: impl Fn(f64, f64) -> f64) -> f64 {
    let rho = |t: f64| {
        let g = body.gauge(&[t.cos(), t.sin()]);
        if g == 0.0 {
            f64::INFINITY
        } else {
            1.0 / g
        }
    };
    let mut total = 0.0;
    for w in cuts.windows(2) {
        if w[1] - w[0] > 1e-15 {
            total += integrate(|t| f(t, rho(t)), w[0], w[1], TOL).value;
        }
    }
    total / PI
}

pub(crate) fn planar_measure(body: &SymmetricBody) -> Option<f64> {
    let body = body.simplify();
    if body.dim() != 2 {
        return None;
    }
    let cuts = breakpoints(&body);
    Some(half_turn(&body, &cuts, |_, r| radial(0, r)))
}

pub(crate) fn planar_moments(body: &SymmetricBody) -> Option<MomentSummary> {
    let body = body.simplify();
    if body.dim() != 2 {
        return None;
    }
    let cuts = breakpoints(&body);
    let mass = half_turn(&body, &cuts, |_, r| radial(0, r));
    if mass <= 0.0 {
        return None;
    }
    let m2 = |f: fn(f64, f64) -> f64| half_turn(&body, &cuts, |t, r| f(t.cos(), t.sin()) * radial(1, r)) / mass;
    let m4 = |f: fn(f64, f64) -> f64| half_turn(&body, &cuts, |t, r| f(t.cos(), t.sin()) * radial(2, r)) / mass;
    let m = DMatrix::from_row_slice(2, 2, &{
        let a = m2(|c, _| c * c);
        let b = m2(|c, s| c * s);
        let d = m2(|_, s| s * s);
        [a, b, b, d]
    });
    let s = DMatrix::from_row_slice(2, 2, &{
        let a = m4(|c, _| c.powi(4));
        let b = m4(|c, s| c * c * s * s);
        let d = m4(|_, s| s.powi(4));
        [a, b, b, d]
    });
    let mut out = MomentSummary::exact(mass, m, s);
    out.mass = MeasureEstimate::quadrature(mass);
    debug_assert_eq!(out.mass.method, Method::Quadrature1d);
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bodies::Direction;
    use crate::special::{interval_second_moment, strip_mass_unchecked};
    use nalgebra::DVector;

    #[test]
    fn reproduces_closed_forms() {
        let b = SymmetricBody::boxed(&[1.0, 2.0]).unwrap();
        let exact = strip_mass_unchecked(1.0) * strip_mass_unchecked(2.0);
        assert!((planar_measure(&b).unwrap() - exact).abs() < 1e-13);
        let m = planar_moments(&b).unwrap();
        assert!((m.second_moment[(0, 0)] - interval_second_moment(1.0)).abs() < 1e-12);
        assert!(m.second_moment[(0, 1)].abs() < 1e-13);
        let ball = SymmetricBody::ball(2, 1.3).unwrap();
        assert!((planar_measure(&ball).unwrap() - (1.0 - (-0.845f64).exp())).abs() < 1e-13);
        let strip = SymmetricBody::strip(Direction::new(DVector::from_vec(vec![0.6, 0.8])).unwrap(), 1.0).unwrap();
        assert!((planar_measure(&strip).unwrap() - strip_mass_unchecked(1.0)).abs() < 1e-12);
    }

    #[test]
    fn sheared_box_matches_rotation_invariance() {
        let rot = DMatrix::from_row_slice(2, 2, &[0.6, -0.8, 0.8, 0.6]);
        let b = SymmetricBody::boxed(&[0.7, 1.9]).unwrap();
        let r = b.linear_image(&rot).unwrap();
        let p = SymmetricBody::polytope(2, vec![DVector::from_vec(vec![0.6, 0.8]), DVector::from_vec(vec![-0.8, 0.6])], vec![0.7, 1.9]).unwrap();
        let exact = strip_mass_unchecked(0.7) * strip_mass_unchecked(1.9);
        assert!((planar_measure(&p).unwrap() - exact).abs() < 1e-13);
        let m = planar_moments(&p).unwrap().second_moment;
        let want = rot.clone() * DMatrix::from_diagonal(&DVector::from_vec(vec![interval_second_moment(0.7), interval_second_moment(1.9)])) * rot.transpose();
        assert!((m - want).norm() < 1e-12);
        assert!(r.dim() == 2);
    }
}
