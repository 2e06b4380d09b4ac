//! Adaptive Gauss–Kronrod (7/15) quadrature.

use crate::scalar::Real;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Integral value with an a-posteriori error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature<T> {
    pub value: T,
    pub error: T,
    pub evaluations: usize,
}

fn kronrod<T: Real, F: Fn(T) -> T>(f: &F, a: T, b: T) -> (T, T) {
    let center = (a + b) / T::lit(2.0);
    let half = (b - a) / T::lit(2.0);
    let fc = f(center);
    let mut kron = fc * T::lit(WGK[7]);
    let mut gauss = fc * T::lit(WG[3]);
    for j in 0..7 {
        let dx = half * T::lit(XGK[j]);
        let pair = f(center - dx) + f(center + dx);
        kron = kron + pair * T::lit(WGK[j]);
        if j % 2 == 1 {
            gauss = gauss + pair * T::lit(WG[j / 2]);
        }
    }
    (kron * half, ((kron - gauss) * half).abs())
}

/// Integrates `f` over the finite interval `[a, b]` to absolute tolerance `tol`.
pub fn integrate<T: Real, F: Fn(T) -> T>(f: F, a: T, b: T, tol: T) -> Quadrature<T> {
    let mut stack = vec![(a, b, tol, 0u32)];
    let mut value = T::zero();
    let mut error = T::zero();
    let mut evaluations = 0;
    while let Some((lo, hi, local_tol, depth)) = stack.pop() {
        let (v, e) = kronrod(&f, lo, hi);
        evaluations += 15;
        if e <= local_tol || depth >= 50 || (hi - lo).abs() <= T::epsilon() * lo.abs().max(T::one()) {
            value = value + v;
            error = error + e;
        } else {
            let mid = (lo + hi) / T::lit(2.0);
            let half_tol = local_tol / T::lit(2.0);
            stack.push((lo, mid, half_tol, depth + 1));
            stack.push((mid, hi, half_tol, depth + 1));
        }
    }
    Quadrature {
        value,
        error,
        evaluations,
    }
}

/// Integrates `f` over `[a, ∞)` via the map x = a + t/(1 − t).
pub fn integrate_to_infinity<T: Real, F: Fn(T) -> T>(f: F, a: T, tol: T) -> Quadrature<T> {
    let g = |t: T| {
        let one_minus = T::one() - t;
        if one_minus <= T::zero() {
            return T::zero();
        }
        let x = a + t / one_minus;
        let v = f(x) / (one_minus * one_minus);
        if v.is_finite() {
            v
        } else {
            T::zero()
        }
    };
    integrate(g, T::zero(), T::one(), tol)
}
