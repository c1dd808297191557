//! Finite-activity jump laws for the pair (ΔU, ΔL).

use num_complex::Complex;
use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{GouError, Result};
use crate::quadrature::{self, Tolerance};
use crate::scalar::{Real, Scalar};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom1<S> {
    pub value: S,
    pub p: S,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom2<S> {
    pub du: S,
    pub dl: S,
    pub p: S,
}

impl<S> Atom2<S> {
    pub fn new(du: S, dl: S, p: S) -> Self {
        Self { du, dl, p }
    }
}

/// Law of one coordinate of a jump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Marginal<S> {
    Atoms {
        atoms: Vec<Atom1<S>>,
    },
    /// Exponential with the given mean, reflected to the negative half-line if `negative`.
    Exponential {
        mean: S,
        #[serde(default)]
        negative: bool,
    },
    Uniform {
        low: S,
        high: S,
    },
    /// Gaussian restricted to `[low, high]`; a missing bound is infinite.
    TruncatedGaussian {
        mean: S,
        sd: S,
        low: Option<S>,
        high: Option<S>,
    },
}

fn probabilities_ok<'a, S: Scalar>(ps: impl Iterator<Item = &'a S>) -> Result<()> {
    let mut total = S::zero();
    let mut count = 0usize;
    for p in ps {
        if *p < S::zero() {
            return Err(GouError::InvalidModel(format!("negative probability {p:?}")));
        }
        total = total + p.clone();
        count += 1;
    }
    if count == 0 {
        return Err(GouError::InvalidModel("atom list is empty".into()));
    }
    if (total.clone() - S::one()).magnitude() > S::constant(1e-9) {
        return Err(GouError::InvalidModel(format!("probabilities sum to {total:?}, not 1")));
    }
    Ok(())
}

impl<S: Scalar> Marginal<S> {
    pub fn atom(value: S) -> Self {
        Marginal::Atoms {
            atoms: vec![Atom1 { value, p: S::one() }],
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Marginal::Atoms { atoms } => probabilities_ok(atoms.iter().map(|a| &a.p)),
            Marginal::Exponential { mean, .. } => {
                if *mean > S::zero() {
                    Ok(())
                } else {
                    Err(GouError::InvalidModel(format!("exponential mean {mean:?} must be positive")))
                }
            }
            Marginal::Uniform { low, high } => {
                if low < high {
                    Ok(())
                } else {
                    Err(GouError::InvalidModel(format!("uniform bounds {low:?} >= {high:?}")))
                }
            }
            Marginal::TruncatedGaussian { sd, low, high, .. } => {
                if *sd <= S::zero() {
                    return Err(GouError::InvalidModel(format!("gaussian sd {sd:?} must be positive")));
                }
                if let (Some(a), Some(b)) = (low, high) {
                    if a >= b {
                        return Err(GouError::InvalidModel(format!("truncation bounds {a:?} >= {b:?}")));
                    }
                }
                Ok(())
            }
        }
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self, Marginal::Atoms { .. })
    }

    /// Closed support bounds; `None` is unbounded.
    pub fn support(&self) -> (Option<S>, Option<S>) {
        match self {
            Marginal::Atoms { atoms } => {
                let mut lo: Option<S> = None;
                let mut hi: Option<S> = None;
                for a in atoms.iter().filter(|a| a.p > S::zero()) {
                    if lo.as_ref().is_none_or(|l| a.value < *l) {
                        lo = Some(a.value.clone());
                    }
                    if hi.as_ref().is_none_or(|h| a.value > *h) {
                        hi = Some(a.value.clone());
                    }
                }
                (lo, hi)
            }
            Marginal::Exponential { negative: false, .. } => (Some(S::zero()), None),
            Marginal::Exponential { negative: true, .. } => (None, Some(S::zero())),
            Marginal::Uniform { low, high } => (Some(low.clone()), Some(high.clone())),
            Marginal::TruncatedGaussian { low, high, .. } => (low.clone(), high.clone()),
        }
    }

    pub fn has_atom_at(&self, v: &S) -> bool {
        match self {
            Marginal::Atoms { atoms } => atoms.iter().any(|a| a.p > S::zero() && a.value == *v),
            _ => false,
        }
    }

    /// Whether draws are a.s. strictly greater than -1.
    pub fn above_minus_one(&self) -> bool {
        let m1 = -S::one();
        match self {
            Marginal::Atoms { atoms } => atoms.iter().filter(|a| a.p > S::zero()).all(|a| a.value > m1),
            _ => self.support().0.is_some_and(|l| l >= m1),
        }
    }

    pub fn nonnegative(&self) -> bool {
        self.support().0.is_some_and(|l| l >= S::zero())
    }

    pub fn nonpositive(&self) -> bool {
        self.support().1.is_some_and(|h| h <= S::zero())
    }

    pub fn map_scalar<S2: Scalar>(&self, f: &dyn Fn(&S) -> S2) -> Marginal<S2> {
        match self {
            Marginal::Atoms { atoms } => Marginal::Atoms {
                atoms: atoms.iter().map(|a| Atom1 { value: f(&a.value), p: f(&a.p) }).collect(),
            },
            Marginal::Exponential { mean, negative } => Marginal::Exponential {
                mean: f(mean),
                negative: *negative,
            },
            Marginal::Uniform { low, high } => Marginal::Uniform {
                low: f(low),
                high: f(high),
            },
            Marginal::TruncatedGaussian { mean, sd, low, high } => Marginal::TruncatedGaussian {
                mean: f(mean),
                sd: f(sd),
                low: low.as_ref().map(f),
                high: high.as_ref().map(f),
            },
        }
    }
}

fn std_normal() -> Normal {
    Normal::standard()
}

impl<T: Real> Marginal<T> {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> T {
        match self {
            Marginal::Atoms { atoms } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for a in atoms {
                    acc += a.p.as_f64();
                    if u < acc {
                        return a.value;
                    }
                }
                atoms.last().map(|a| a.value).unwrap_or_else(T::zero)
            }
            Marginal::Exponential { mean, negative } => {
                let e: f64 = Exp1.sample(rng);
                let x = *mean * T::lit(e);
                if *negative {
                    -x
                } else {
                    x
                }
            }
            Marginal::Uniform { low, high } => {
                let u: f64 = rng.random();
                *low + (*high - *low) * T::lit(u)
            }
            Marginal::TruncatedGaussian { mean, sd, low, high } => {
                let n = std_normal();
                let (m, s) = (mean.as_f64(), sd.as_f64());
                let pa = low.map_or(0.0, |a| n.cdf((a.as_f64() - m) / s));
                let pb = high.map_or(1.0, |b| n.cdf((b.as_f64() - m) / s));
                let u: f64 = rng.random();
                let z = n.inverse_cdf(pa + (pb - pa) * u);
                let mut x = m + s * z;
                if let Some(a) = low {
                    x = x.max(a.as_f64());
                }
                if let Some(b) = high {
                    x = x.min(b.as_f64());
                }
                T::lit(x)
            }
        }
    }

    /// `E f(X)`, exact for atoms and by adaptive quadrature otherwise.
    pub fn expect(&self, f: &mut dyn FnMut(T) -> Complex<T>, tol: Tolerance) -> Result<Complex<T>> {
        self.expect_on(f, None, None, tol)
    }

    /// `E[f(X) 1{lo <= X <= hi}]`; a missing bound is infinite.
    pub fn expect_on(
        &self,
        f: &mut dyn FnMut(T) -> Complex<T>,
        lo: Option<T>,
        hi: Option<T>,
        tol: Tolerance,
    ) -> Result<Complex<T>> {
        let zero = Complex::new(T::zero(), T::zero());
        let inside = |x: T| lo.is_none_or(|a| x >= a) && hi.is_none_or(|b| x <= b);
        match self {
            Marginal::Atoms { atoms } => Ok(atoms
                .iter()
                .filter(|a| inside(a.value))
                .fold(zero, |acc, a| acc + f(a.value) * a.p)),
            Marginal::Exponential { mean, negative } => {
                // x = mean * w / (1 - w) on the half-line, cut where the density falls below e^-60.
                let m = *mean;
                let neg = *negative;
                let (xa, xb) = if neg {
                    (hi.map(|b| -b), lo.map(|a| -a))
                } else {
                    (lo, hi)
                };
                let to_w = |x: T| x / (m + x);
                let wa = xa.map_or(T::zero(), |a| to_w(a.max(T::zero())));
                let wb = xb.map_or(T::lit(60.0 / 61.0), |b| {
                    if b <= T::zero() {
                        T::zero()
                    } else {
                        to_w(b).min(T::lit(60.0 / 61.0))
                    }
                });
                if wb <= wa {
                    return Ok(zero);
                }
                quadrature::integrate(
                    |w: T| {
                        let q = T::one() - w;
                        let r = w / q;
                        let x = if neg { -(m * r) } else { m * r };
                        f(x) * ((-r).exp() / (q * q))
                    },
                    wa,
                    wb,
                    tol,
                )
            }
            Marginal::Uniform { low, high } => {
                let a = lo.map_or(*low, |a| a.max(*low));
                let b = hi.map_or(*high, |b| b.min(*high));
                if b <= a {
                    return Ok(zero);
                }
                Ok(quadrature::integrate(|x| f(x), a, b, tol)? / (*high - *low))
            }
            Marginal::TruncatedGaussian { mean, sd, low, high } => {
                let n = std_normal();
                let span = T::lit(12.0) * *sd;
                let ta = low.map_or(*mean - span, |a| a.max(*mean - span));
                let tb = high.map_or(*mean + span, |b| b.min(*mean + span));
                let za = ((ta - *mean) / *sd).as_f64();
                let zb = ((tb - *mean) / *sd).as_f64();
                let mass = T::lit(n.cdf(zb) - n.cdf(za));
                let a = lo.map_or(ta, |a| a.max(ta));
                let b = hi.map_or(tb, |b| b.min(tb));
                if b <= a {
                    return Ok(zero);
                }
                let norm = T::lit(1.0 / (2.0 * std::f64::consts::PI).sqrt());
                let value = quadrature::integrate(
                    |x: T| {
                        let z = (x - *mean) / *sd;
                        f(x) * (norm * (-(z * z) * T::lit(0.5)).exp() / *sd)
                    },
                    a,
                    b,
                    tol,
                )?;
                Ok(value / mass)
            }
        }
    }
}

/// Intervals where `a u² + b u + c <= 0`.
fn quadratic_nonpositive<T: Real>(a: T, b: T, c: T) -> Vec<(Option<T>, Option<T>)> {
    if a == T::zero() {
        return if b > T::zero() {
            vec![(None, Some(-c / b))]
        } else if b < T::zero() {
            vec![(Some(-c / b), None)]
        } else if c <= T::zero() {
            vec![(None, None)]
        } else {
            Vec::new()
        };
    }
    let disc = b * b - T::lit(4.0) * a * c;
    if disc < T::zero() {
        return if a > T::zero() { Vec::new() } else { vec![(None, None)] };
    }
    let sq = disc.sqrt();
    let (r1, r2) = {
        let x = (-b - sq) / (T::lit(2.0) * a);
        let y = (-b + sq) / (T::lit(2.0) * a);
        (x.min(y), x.max(y))
    };
    if a > T::zero() {
        vec![(Some(r1), Some(r2))]
    } else {
        vec![(None, Some(r1)), (Some(r2), None)]
    }
}

/// Distribution of a single jump `(ΔU, ΔL)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum JumpLaw2<S> {
    PointMass {
        atoms: Vec<Atom2<S>>,
    },
    Independent {
        du: Marginal<S>,
        dl: Marginal<S>,
    },
    /// `ΔL = slope * ΔU + intercept`.
    Linked {
        du: Marginal<S>,
        slope: S,
        intercept: S,
    },
    /// Image of `inner` under `(u, l) -> (-u / (1 + u), -l / (1 + u))`.
    DualOf {
        inner: Box<JumpLaw2<S>>,
    },
}

/// Jump map of the dual pair: `(u, l) -> (-u / (1 + u), -l / (1 + u))`.
pub fn dual_jump<S: Scalar>(du: &S, dl: &S) -> (S, S) {
    let d = S::one() + du.clone();
    (-(du.clone() / d.clone()), -(dl.clone() / d))
}

impl<S: Scalar> JumpLaw2<S> {
    pub fn point_mass(atoms: Vec<(S, S, S)>) -> Self {
        JumpLaw2::PointMass {
            atoms: atoms.into_iter().map(|(u, l, p)| Atom2::new(u, l, p)).collect(),
        }
    }

    /// Placeholder law for models without jumps.
    pub fn none() -> Self {
        Self::point_mass(vec![(S::zero(), S::zero(), S::one())])
    }

    pub fn validate(&self) -> Result<()> {
        let m1 = -S::one();
        match self {
            JumpLaw2::PointMass { atoms } => {
                probabilities_ok(atoms.iter().map(|a| &a.p))?;
                if atoms.iter().any(|a| a.p > S::zero() && a.du == m1) {
                    return Err(GouError::InvalidModel("jump law puts mass on ΔU = -1".into()));
                }
                Ok(())
            }
            JumpLaw2::Independent { du, dl } => {
                du.validate()?;
                dl.validate()?;
                if du.has_atom_at(&m1) {
                    return Err(GouError::InvalidModel("jump law puts mass on ΔU = -1".into()));
                }
                Ok(())
            }
            JumpLaw2::Linked { du, .. } => {
                du.validate()?;
                if du.has_atom_at(&m1) {
                    return Err(GouError::InvalidModel("jump law puts mass on ΔU = -1".into()));
                }
                Ok(())
            }
            JumpLaw2::DualOf { inner } => {
                inner.validate()?;
                if !inner.above_minus_one() {
                    return Err(GouError::ConditionB("dual_of requires an inner law with ΔU > -1".into()));
                }
                Ok(())
            }
        }
    }

    /// Whether ΔU > -1 almost surely.
    pub fn above_minus_one(&self) -> bool {
        let m1 = -S::one();
        match self {
            JumpLaw2::PointMass { atoms } => atoms.iter().filter(|a| a.p > S::zero()).all(|a| a.du > m1),
            JumpLaw2::Independent { du, .. } | JumpLaw2::Linked { du, .. } => du.above_minus_one(),
            JumpLaw2::DualOf { .. } => true,
        }
    }

    pub fn dl_nonnegative(&self) -> bool {
        match self {
            JumpLaw2::PointMass { atoms } => atoms.iter().filter(|a| a.p > S::zero()).all(|a| a.dl >= S::zero()),
            JumpLaw2::Independent { dl, .. } => dl.nonnegative(),
            JumpLaw2::Linked { du, slope, intercept } => linked_min(du, slope, intercept).is_some_and(|m| m >= S::zero()),
            JumpLaw2::DualOf { inner } => inner.dl_nonpositive(),
        }
    }

    pub fn dl_nonpositive(&self) -> bool {
        match self {
            JumpLaw2::PointMass { atoms } => atoms.iter().filter(|a| a.p > S::zero()).all(|a| a.dl <= S::zero()),
            JumpLaw2::Independent { dl, .. } => dl.nonpositive(),
            JumpLaw2::Linked { du, slope, intercept } => {
                linked_min(du, &-slope.clone(), &-intercept.clone()).is_some_and(|m| m >= S::zero())
            }
            JumpLaw2::DualOf { inner } => inner.dl_nonnegative(),
        }
    }

    /// Atom list when the law is discrete.
    pub fn atoms(&self) -> Option<Vec<Atom2<S>>> {
        match self {
            JumpLaw2::PointMass { atoms } => Some(atoms.clone()),
            JumpLaw2::Independent {
                du: Marginal::Atoms { atoms: au },
                dl: Marginal::Atoms { atoms: al },
            } => Some(
                au.iter()
                    .flat_map(|a| {
                        al.iter()
                            .map(move |b| Atom2::new(a.value.clone(), b.value.clone(), a.p.clone() * b.p.clone()))
                    })
                    .collect(),
            ),
            JumpLaw2::Linked {
                du: Marginal::Atoms { atoms },
                slope,
                intercept,
            } => Some(
                atoms
                    .iter()
                    .map(|a| {
                        let l = slope.clone() * a.value.clone() + intercept.clone();
                        Atom2::new(a.value.clone(), l, a.p.clone())
                    })
                    .collect(),
            ),
            JumpLaw2::DualOf { inner } => inner.atoms().map(|atoms| {
                atoms
                    .into_iter()
                    .map(|a| {
                        let (u, l) = dual_jump(&a.du, &a.dl);
                        Atom2::new(u, l, a.p)
                    })
                    .collect()
            }),
            _ => None,
        }
    }

    /// Law of the transformed jump `(-u / (1 + u), -l / (1 + u))`.
    pub fn dual(&self) -> Result<Self> {
        if !self.above_minus_one() {
            return Err(GouError::ConditionB("the dual jump law needs ΔU > -1".into()));
        }
        Ok(match self {
            JumpLaw2::PointMass { atoms } => JumpLaw2::PointMass {
                atoms: atoms
                    .iter()
                    .map(|a| {
                        let (u, l) = dual_jump(&a.du, &a.dl);
                        Atom2::new(u, l, a.p.clone())
                    })
                    .collect(),
            },
            JumpLaw2::DualOf { inner } => (**inner).clone(),
            other => JumpLaw2::DualOf {
                inner: Box::new(other.clone()),
            },
        })
    }

    pub fn map_scalar<S2: Scalar>(&self, f: &dyn Fn(&S) -> S2) -> JumpLaw2<S2> {
        match self {
            JumpLaw2::PointMass { atoms } => JumpLaw2::PointMass {
                atoms: atoms.iter().map(|a| Atom2::new(f(&a.du), f(&a.dl), f(&a.p))).collect(),
            },
            JumpLaw2::Independent { du, dl } => JumpLaw2::Independent {
                du: du.map_scalar(f),
                dl: dl.map_scalar(f),
            },
            JumpLaw2::Linked { du, slope, intercept } => JumpLaw2::Linked {
                du: du.map_scalar(f),
                slope: f(slope),
                intercept: f(intercept),
            },
            JumpLaw2::DualOf { inner } => JumpLaw2::DualOf {
                inner: Box::new(inner.map_scalar(f)),
            },
        }
    }
}

/// Lower bound of `slope * u + intercept` over the support of `du`.
fn linked_min<S: Scalar>(du: &Marginal<S>, slope: &S, intercept: &S) -> Option<S> {
    let (lo, hi) = du.support();
    if *slope == S::zero() {
        Some(intercept.clone())
    } else if *slope > S::zero() {
        lo.map(|l| slope.clone() * l + intercept.clone())
    } else {
        hi.map(|h| slope.clone() * h + intercept.clone())
    }
}

impl<T: Real> JumpLaw2<T> {
    /// One jump; ΔU = -1 has probability zero and is redrawn if it ever occurs.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> [T; 2] {
        loop {
            let z = self.sample_raw(rng);
            if z[0] != -T::one() {
                return z;
            }
        }
    }

    fn sample_raw<R: Rng + ?Sized>(&self, rng: &mut R) -> [T; 2] {
        match self {
            JumpLaw2::PointMass { atoms } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for a in atoms {
                    acc += a.p.as_f64();
                    if u < acc {
                        return [a.du, a.dl];
                    }
                }
                atoms.last().map_or([T::zero(); 2], |a| [a.du, a.dl])
            }
            JumpLaw2::Independent { du, dl } => [du.sample(rng), dl.sample(rng)],
            JumpLaw2::Linked { du, slope, intercept } => {
                let u = du.sample(rng);
                [u, *slope * u + *intercept]
            }
            JumpLaw2::DualOf { inner } => {
                let [u, l] = inner.sample(rng);
                let (a, b) = dual_jump(&u, &l);
                [a, b]
            }
        }
    }

    /// `E f(ΔU, ΔL)`; exact sums for discrete laws, quadrature otherwise.
    pub fn expect(&self, f: &mut dyn FnMut(T, T) -> Complex<T>, tol: Tolerance) -> Result<Complex<T>> {
        if let Some(atoms) = self.atoms() {
            let zero = Complex::new(T::zero(), T::zero());
            return Ok(atoms.iter().fold(zero, |acc, a| acc + f(a.du, a.dl) * a.p));
        }
        match self {
            JumpLaw2::Independent { du, dl } => {
                let mut inner_err: Option<GouError> = None;
                let inner_tol = Tolerance {
                    abs: tol.abs * 1e-3,
                    rel: tol.rel * 1e-3,
                    ..tol
                };
                let value = du.expect(
                    &mut |u| match dl.expect(&mut |l| f(u, l), inner_tol) {
                        Ok(v) => v,
                        Err(e) => {
                            inner_err.get_or_insert(e);
                            Complex::new(T::nan(), T::nan())
                        }
                    },
                    tol,
                );
                match inner_err {
                    Some(e) => Err(e),
                    None => value,
                }
            }
            JumpLaw2::Linked { du, slope, intercept } => du.expect(&mut |u| f(u, *slope * u + *intercept), tol),
            JumpLaw2::DualOf { inner } => inner.expect(
                &mut |u, l| {
                    let (a, b) = dual_jump(&u, &l);
                    f(a, b)
                },
                tol,
            ),
            JumpLaw2::PointMass { .. } => unreachable!("point masses are discrete"),
        }
    }

    /// `E[f(ΔU, ΔL) 1{ΔL² <= q0 + q1 ΔU + q2 ΔU²}]`.
    ///
    /// The family of regions is closed under the dual jump map, which keeps the
    /// Euclidean unit ball (`q = (1, 0, -1)`) tractable for dual laws.
    pub fn expect_in_region(
        &self,
        f: &mut dyn FnMut(T, T) -> Complex<T>,
        q: [T; 3],
        tol: Tolerance,
    ) -> Result<Complex<T>> {
        let qf = |u: T| q[0] + q[1] * u + q[2] * u * u;
        if let Some(atoms) = self.atoms() {
            let zero = Complex::new(T::zero(), T::zero());
            return Ok(atoms
                .iter()
                .filter(|a| a.dl * a.dl <= qf(a.du))
                .fold(zero, |acc, a| acc + f(a.du, a.dl) * a.p));
        }
        let zero = Complex::new(T::zero(), T::zero());
        match self {
            JumpLaw2::Independent { du, dl } => {
                let inner_tol = Tolerance {
                    abs: tol.abs * 1e-3,
                    rel: tol.rel * 1e-3,
                    ..tol
                };
                let mut inner_err: Option<GouError> = None;
                let mut total = zero;
                for (lo, hi) in quadratic_nonpositive(-q[2], -q[1], -q[0]) {
                    total = total
                        + du.expect_on(
                            &mut |u| {
                                let r = qf(u).max(T::zero()).sqrt();
                                match dl.expect_on(&mut |l| f(u, l), Some(-r), Some(r), inner_tol) {
                                    Ok(v) => v,
                                    Err(e) => {
                                        inner_err.get_or_insert(e);
                                        Complex::new(T::nan(), T::nan())
                                    }
                                }
                            },
                            lo,
                            hi,
                            tol,
                        )
                        .map_err(|e| inner_err.clone().unwrap_or(e))?;
                }
                match inner_err {
                    Some(e) => Err(e),
                    None => Ok(total),
                }
            }
            JumpLaw2::Linked { du, slope, intercept } => {
                let (s, c) = (*slope, *intercept);
                let mut total = zero;
                for (lo, hi) in quadratic_nonpositive(s * s - q[2], T::lit(2.0) * s * c - q[1], c * c - q[0]) {
                    total = total + du.expect_on(&mut |u| f(u, s * u + c), lo, hi, tol)?;
                }
                Ok(total)
            }
            JumpLaw2::DualOf { inner } => {
                let q_inner = [q[0], T::lit(2.0) * q[0] - q[1], q[0] - q[1] + q[2]];
                inner.expect_in_region(
                    &mut |u, l| {
                        let (a, b) = dual_jump(&u, &l);
                        f(a, b)
                    },
                    q_inner,
                    tol,
                )
            }
            JumpLaw2::PointMass { .. } => unreachable!("point masses are discrete"),
        }
    }

    /// Largest relative deviation of the support from the line `l = -k u`,
    /// or `None` when the law is continuous off that line.
    pub fn line_residual(&self, k: T) -> Option<T> {
        if let Some(atoms) = self.atoms() {
            let r = atoms
                .iter()
                .filter(|a| a.p > T::zero())
                .map(|a| {
                    let scale = (k * a.du).abs().max(a.dl.abs()).max(T::min_positive_value());
                    (k * a.du + a.dl).abs() / scale
                })
                .fold(T::zero(), T::max);
            return Some(r);
        }
        match self {
            JumpLaw2::Linked { slope, intercept, .. } => {
                let scale = k.abs().max(slope.abs());
                Some(((*slope + k).abs() / scale).max(intercept.abs()))
            }
            // The dual jump map preserves every line l = -k u.
            JumpLaw2::DualOf { inner } => inner.line_residual(k),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamKey;

    fn law() -> JumpLaw2<f64> {
        JumpLaw2::point_mass(vec![(1.0, 2.0, 0.5), (-0.5, -1.0, 0.25), (3.0, 0.0, 0.25)])
    }

    #[test]
    fn flags() {
        let l = law();
        assert!(l.above_minus_one());
        assert!(!l.dl_nonnegative());
        let sub = JumpLaw2::Independent {
            du: Marginal::atom(1.0),
            dl: Marginal::Exponential {
                mean: 1.0,
                negative: false,
            },
        };
        assert!(sub.dl_nonnegative());
        assert!(sub.dual().unwrap().dl_nonpositive());
        let nm = JumpLaw2::point_mass(vec![(-2.0, 0.0, 1.0)]);
        assert!(!nm.above_minus_one());
        assert!(nm.dual().is_err());
    }

    #[test]
    fn rejects_minus_one() {
        let bad = JumpLaw2::point_mass(vec![(-1.0, 0.0, 1.0)]);
        assert!(bad.validate().is_err());
        let short = JumpLaw2::point_mass(vec![(0.5, 0.0, 0.7)]);
        assert!(short.validate().is_err());
    }

    #[test]
    fn dual_maps_atoms() {
        let d = JumpLaw2::point_mass(vec![(1.0, 2.0, 1.0)]).dual().unwrap();
        assert_eq!(d.atoms().unwrap(), vec![Atom2::new(-0.5, -1.0, 1.0)]);
    }

    #[test]
    fn linked_sign_flags() {
        let l = JumpLaw2::Linked {
            du: Marginal::Uniform { low: 0.0, high: 1.0 },
            slope: -2.0,
            intercept: 2.0,
        };
        assert!(l.dl_nonnegative());
        assert!(!l.dl_nonpositive());
    }

    #[test]
    fn expectation_matches_sample_mean() {
        let laws = vec![
            JumpLaw2::Independent {
                du: Marginal::TruncatedGaussian {
                    mean: 0.0,
                    sd: 0.5,
                    low: Some(-0.9),
                    high: None,
                },
                dl: Marginal::Exponential {
                    mean: 0.7,
                    negative: true,
                },
            },
            JumpLaw2::Linked {
                du: Marginal::Uniform { low: -0.5, high: 2.0 },
                slope: 1.5,
                intercept: 0.1,
            },
        ];
        let key = StreamKey::new(11);
        for (i, law) in laws.iter().enumerate() {
            let exact = law.expect(&mut |u, l| Complex::new(u * l, 0.0), Tolerance::default()).unwrap().re;
            let mut rng = key.path(i as u64);
            let n = 200_000;
            let mut s = 0.0;
            let mut s2 = 0.0;
            for _ in 0..n {
                let [u, l] = law.sample(&mut rng);
                s += u * l;
                s2 += (u * l) * (u * l);
            }
            let mean = s / n as f64;
            let se = ((s2 / n as f64 - mean * mean) / n as f64).sqrt();
            assert!((mean - exact).abs() < 5.0 * se, "law {i}: {mean} vs {exact}");
        }
    }

    #[test]
    fn truncated_gaussian_respects_bounds() {
        let m = Marginal::TruncatedGaussian {
            mean: -1.0,
            sd: 1.0,
            low: Some(-0.8),
            high: Some(0.5),
        };
        let mut rng = StreamKey::new(3).path(0);
        for _ in 0..10_000 {
            let x = m.sample(&mut rng);
            assert!((-0.8..=0.5).contains(&x));
        }
        assert!(m.above_minus_one());
    }

    #[test]
    fn serde_shape() {
        let text = r#"{"kind":"independent","du":{"kind":"atoms","atoms":[{"value":1.0,"p":1.0}]},"dl":{"kind":"exponential","mean":0.5}}"#;
        let law: JumpLaw2<f64> = serde_json::from_str(text).unwrap();
        assert!(law.dl_nonnegative());
    }
}
