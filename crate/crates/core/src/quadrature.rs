//! Adaptive Gauss–Kronrod (7/15) quadrature for complex-valued integrands.

use num_complex::Complex;

use crate::error::{GouError, Result};
use crate::scalar::Real;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
// Gauss weights for the odd-indexed Kronrod nodes (1, 3, 5, 7).
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_intervals: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            abs: 1e-11,
            rel: 1e-10,
            max_intervals: 2000,
        }
    }
}

struct Piece<T> {
    a: T,
    b: T,
    value: Complex<T>,
    err: T,
}

fn rule<T: Real, F: FnMut(T) -> Complex<T>>(f: &mut F, a: T, b: T) -> (Complex<T>, T) {
    let half = T::lit(0.5);
    let c = (a + b) * half;
    let h = (b - a) * half;
    let fc = f(c);
    let mut kronrod = fc * T::lit(WGK[7]);
    let mut gauss = fc * T::lit(WG[3]);
    for j in 0..7 {
        let dx = h * T::lit(XGK[j]);
        let s = f(c - dx) + f(c + dx);
        kronrod = kronrod + s * T::lit(WGK[j]);
        if j % 2 == 1 {
            gauss = gauss + s * T::lit(WG[j / 2]);
        }
    }
    ((kronrod * h), ((kronrod - gauss) * h).norm())
}

/// Integrates `f` over `[a, b]` (finite bounds) to the requested tolerance.
pub fn integrate<T: Real, F: FnMut(T) -> Complex<T>>(
    mut f: F,
    a: T,
    b: T,
    tol: Tolerance,
) -> Result<Complex<T>> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(GouError::InvalidArgument("quadrature bounds must be finite".into()));
    }
    if a == b {
        return Ok(Complex::new(T::zero(), T::zero()));
    }
    let (value, err) = rule(&mut f, a, b);
    let mut pieces = vec![Piece { a, b, value, err }];
    loop {
        let total: Complex<T> = pieces.iter().fold(Complex::new(T::zero(), T::zero()), |acc, p| acc + p.value);
        let total_err: T = pieces.iter().fold(T::zero(), |acc, p| acc + p.err);
        if !total.re.is_finite() || !total.im.is_finite() {
            return Err(GouError::NonFinite("quadrature integrand".into()));
        }
        let target = T::lit(tol.abs).max(T::lit(tol.rel) * total.norm());
        if total_err <= target {
            return Ok(total);
        }
        if pieces.len() >= tol.max_intervals {
            return Err(GouError::Quadrature {
                achieved: total_err.as_f64(),
                requested: target.as_f64(),
            });
        }
        let worst = pieces
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.err.partial_cmp(&y.1.err).unwrap_or(std::cmp::Ordering::Equal))
            .map(|(i, _)| i)
            .unwrap_or(0);
        let p = pieces.swap_remove(worst);
        let mid = (p.a + p.b) * T::lit(0.5);
        if mid <= p.a || mid >= p.b {
            return Err(GouError::Quadrature {
                achieved: total_err.as_f64(),
                requested: target.as_f64(),
            });
        }
        let (v1, e1) = rule(&mut f, p.a, mid);
        let (v2, e2) = rule(&mut f, mid, p.b);
        pieces.push(Piece { a: p.a, b: mid, value: v1, err: e1 });
        pieces.push(Piece { a: mid, b: p.b, value: v2, err: e2 });
    }
}
