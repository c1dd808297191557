//! Stochastic exponentials, integrals and covariations along event-list paths.
//!
//! Segment increments already carry the genuine drift, so no compensator
//! appears anywhere below.

use crate::error::{GouError, Result};
use crate::path_engine::{Event, ScalarPath};
use crate::scalar::{Real, Scalar};

/// Values at the knots of a path, with left limits available at jump knots.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedSeries<S> {
    times: Vec<S>,
    values: Vec<S>,
    jumps: Vec<bool>,
}

impl<S: Scalar> AlignedSeries<S> {
    pub fn new(times: Vec<S>, values: Vec<S>, jumps: Vec<bool>) -> Result<Self> {
        if times.len() != values.len() || times.len() != jumps.len() || times.is_empty() {
            return Err(GouError::Misaligned("times, values and jump flags differ in length".into()));
        }
        Ok(Self { times, values, jumps })
    }

    pub(crate) fn for_path<const N: usize>(path: &crate::path_engine::EventPath<S, N>, values: Vec<S>) -> Self {
        let mut jumps = Vec::with_capacity(values.len());
        jumps.push(false);
        jumps.extend(path.events().iter().map(|e| e.is_jump()));
        Self {
            times: path.knot_times(),
            values,
            jumps,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn times(&self) -> &[S] {
        &self.times
    }

    pub fn values(&self) -> &[S] {
        &self.values
    }

    pub fn is_jump(&self, k: usize) -> bool {
        self.jumps[k]
    }

    pub fn last(&self) -> &S {
        self.values.last().expect("series is never empty")
    }

    /// Left limit at knot `k`.
    pub fn left_limit(&self, k: usize) -> &S {
        if self.jumps[k] {
            &self.values[k - 1]
        } else {
            &self.values[k]
        }
    }

    /// Value at the last knot with time `<= t`.
    pub fn value_at(&self, t: &S) -> &S {
        let k = self.times.partition_point(|s| s <= t);
        &self.values[k.saturating_sub(1)]
    }

    /// Left limit at `t`: the first knot at time `t` if there is one (jump
    /// knots at `t` come after it), otherwise the last knot before `t`.
    pub fn left_limit_at(&self, t: &S) -> &S {
        let k = self.times.partition_point(|s| s < t);
        if k < self.times.len() && self.times[k] == *t {
            &self.values[k]
        } else {
            &self.values[k.saturating_sub(1)]
        }
    }

    pub fn map(&self, f: impl Fn(&S) -> S) -> Self {
        Self {
            times: self.times.clone(),
            values: self.values.iter().map(f).collect(),
            jumps: self.jumps.clone(),
        }
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(&S, &S) -> S) -> Result<Self> {
        self.check_aligned(other)?;
        Ok(Self {
            times: self.times.clone(),
            values: self.values.iter().zip(&other.values).map(|(a, b)| f(a, b)).collect(),
            jumps: self.jumps.clone(),
        })
    }

    pub fn check_aligned(&self, other: &Self) -> Result<()> {
        if self.times != other.times || self.jumps != other.jumps {
            return Err(GouError::Misaligned("series have different knots".into()));
        }
        Ok(())
    }
}

/// How a left-continuous integrand is treated inside a segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Interp {
    /// The integrand is `exp(affine)` between knots (exact for pure-drift paths).
    Exponential,
    /// Itô left-point sums.
    LeftPoint,
}

/// `∫_0^1 a^{1-s} b^s ds`, the mean of an exponential between `a` and `b`.
pub fn log_mean<T: Real>(a: T, b: T) -> T {
    if a == b {
        return a;
    }
    let r = b / a;
    if r <= T::zero() {
        return (a + b) * T::lit(0.5);
    }
    let l = r.ln();
    if l.abs() < T::lit(1e-4) {
        a * (T::one() + l * (T::lit(0.5) + l * (T::one() / T::lit(6.0) + l / T::lit(24.0))))
    } else {
        (b - a) / l
    }
}

/// `(f - 1) / ln f`, the log-mean of `1` and `f`.
pub fn exp_weight<T: Real>(f: T) -> T {
    log_mean(T::one(), f)
}

/// Doléans-Dade exponential of a scalar path, built incrementally:
/// factor `1 + ΔX` at jumps and `exp(dX - σ² dt / 2)` per segment.
pub fn stochastic_exponential<T: Real>(x: &ScalarPath<T>) -> Result<AlignedSeries<T>> {
    let sigma2 = x.cov()[0][0];
    let mut values = Vec::with_capacity(x.events().len() + 1);
    let mut e = T::one();
    values.push(e);
    for ev in x.events() {
        match ev {
            Event::Jump { time, dx } => {
                let f = T::one() + dx[0];
                if f == T::zero() {
                    return Err(GouError::JumpAtMinusOne { time: time.to_string() });
                }
                e = e * f;
            }
            Event::Segment { t0, t1, dx } => {
                e = e * (dx[0] - sigma2 * (*t1 - *t0) * T::lit(0.5)).exp();
            }
        }
        values.push(e);
    }
    Ok(AlignedSeries::for_path(x, values))
}

fn default_interp<T: Real>(x: &ScalarPath<T>) -> Interp {
    if x.backend().is_exact() {
        Interp::Exponential
    } else {
        Interp::LeftPoint
    }
}

/// Running `∫_(0,s] H_{r-} dX_r`. Exact paths use [`Interp::Exponential`],
/// Gaussian paths left-point sums.
pub fn stochastic_integral<T: Real>(h: &AlignedSeries<T>, x: &ScalarPath<T>) -> Result<AlignedSeries<T>> {
    stochastic_integral_with(h, x, default_interp(x))
}

pub fn stochastic_integral_with<T: Real>(
    h: &AlignedSeries<T>,
    x: &ScalarPath<T>,
    interp: Interp,
) -> Result<AlignedSeries<T>> {
    if h.len() != x.events().len() + 1 {
        return Err(GouError::Misaligned(format!(
            "integrand has {} knots, integrator {}",
            h.len(),
            x.events().len() + 1
        )));
    }
    let mut values = Vec::with_capacity(h.len());
    let mut acc = T::zero();
    values.push(acc);
    for (k, ev) in x.events().iter().enumerate() {
        if *ev.end_time() != h.times[k + 1] || ev.is_jump() != h.jumps[k + 1] {
            return Err(GouError::Misaligned(format!("knot {} differs", k + 1)));
        }
        let left = h.values[k];
        acc = acc
            + match ev {
                Event::Jump { dx, .. } => left * dx[0],
                Event::Segment { dx, .. } => match interp {
                    Interp::LeftPoint => left * dx[0],
                    Interp::Exponential => log_mean(left, h.values[k + 1]) * dx[0],
                },
            };
        values.push(acc);
    }
    Ok(AlignedSeries::for_path(x, values))
}

/// Continuous part of a covariation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Continuous<T> {
    /// `σ_XY t` for a known Gaussian covariance.
    Supplied(T),
    /// Sum of products of segment increments.
    Realized,
}

/// `[X, Y]_s`: the continuous part plus `Σ ΔX ΔY` over common jumps.
pub fn quadratic_covariation<T: Real>(
    x: &ScalarPath<T>,
    y: &ScalarPath<T>,
    continuous: Continuous<T>,
) -> Result<AlignedSeries<T>> {
    x.aligned_with(y)?;
    let mut values = Vec::with_capacity(x.events().len() + 1);
    let mut acc = T::zero();
    values.push(acc);
    for (a, b) in x.events().iter().zip(y.events()) {
        acc = acc
            + match (a, b, continuous) {
                (Event::Jump { dx, .. }, Event::Jump { dx: dy, .. }, _) => dx[0] * dy[0],
                (Event::Segment { t0, t1, .. }, _, Continuous::Supplied(s)) => s * (*t1 - *t0),
                (Event::Segment { dx, .. }, Event::Segment { dx: dy, .. }, Continuous::Realized) => dx[0] * dy[0],
                _ => unreachable!("alignment checked"),
            };
        values.push(acc);
    }
    Ok(AlignedSeries::for_path(x, values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jump_law::JumpLaw2;
    use crate::levy_model::{GaussianCov, LevyModel2};
    use crate::path_engine::{w_path, Backend, EventPath, PathSampler};
    use crate::rng::StreamKey;

    fn scalar(events: Vec<Event<f64, 1>>, horizon: f64, var: f64) -> ScalarPath<f64> {
        let backend = if var > 0.0 {
            Backend::Euler { grid_dt: 0.01 }
        } else {
            Backend::Exact
        };
        EventPath::new(horizon, events, [[var]], backend).unwrap()
    }

    fn seg(t0: f64, t1: f64, dx: f64) -> Event<f64, 1> {
        Event::Segment { t0, t1, dx: [dx] }
    }

    fn jump(time: f64, dx: f64) -> Event<f64, 1> {
        Event::Jump { time, dx: [dx] }
    }

    #[test]
    fn exponential_examples() {
        let zero = scalar(vec![seg(0.0, 1.0, 0.0)], 1.0, 0.0);
        assert!(stochastic_exponential(&zero).unwrap().values().iter().all(|v| *v == 1.0));

        let drift = scalar(vec![seg(0.0, 1.0, 1.0)], 1.0, 0.0);
        assert!((stochastic_exponential(&drift).unwrap().last() - std::f64::consts::E).abs() < 1e-15);

        let single = scalar(vec![seg(0.0, 0.3, 0.0), jump(0.3, -0.5), seg(0.3, 1.0, 0.0)], 1.0, 0.0);
        let e = stochastic_exponential(&single).unwrap();
        assert_eq!(*e.value_at(&0.29), 1.0);
        assert_eq!(*e.left_limit_at(&0.3), 1.0);
        assert_eq!(*e.value_at(&0.3), 0.5);
        assert_eq!(*e.last(), 0.5);

        let bad = scalar(vec![seg(0.0, 0.3, 0.0), jump(0.3, -1.0), seg(0.3, 1.0, 0.0)], 1.0, 0.0);
        assert!(matches!(stochastic_exponential(&bad), Err(GouError::JumpAtMinusOne { .. })));
    }

    #[test]
    fn sign_flips_at_big_drops() {
        let x = scalar(vec![seg(0.0, 0.5, 0.1), jump(0.5, -3.0), seg(0.5, 1.0, 0.2)], 1.0, 0.0);
        let e = stochastic_exponential(&x).unwrap();
        assert!(e.values()[1] > 0.0 && e.values()[2] < 0.0 && e.values()[3] < 0.0);
    }

    #[test]
    fn integral_examples() {
        let x = scalar(vec![seg(0.0, 1.0, 0.7)], 1.0, 0.0);
        let one = AlignedSeries::new(vec![0.0, 1.0], vec![1.0, 1.0], vec![false, false]).unwrap();
        assert!((stochastic_integral(&one, &x).unwrap().last() - 0.7).abs() < 1e-15);

        let x = scalar(vec![seg(0.0, 0.5, 0.0), jump(0.5, 2.0), seg(0.5, 1.0, 0.0)], 1.0, 0.0);
        let h = AlignedSeries::new(vec![0.0, 0.5, 0.5, 1.0], vec![3.0, 3.0, 10.0, 10.0], vec![false, false, true, false])
            .unwrap();
        assert_eq!(*stochastic_integral(&h, &x).unwrap().last(), 6.0);

        let short = AlignedSeries::new(vec![0.0], vec![1.0], vec![false]).unwrap();
        assert!(stochastic_integral(&short, &x).is_err());
    }

    #[test]
    fn exponential_interp_is_exact_for_drift() {
        // ∫_0^2 e^{-s} d(3 s) = 3 (1 - e^{-2})
        let u = scalar(vec![seg(0.0, 2.0, -2.0)], 2.0, 0.0);
        let e = stochastic_exponential(&u).unwrap();
        let l = scalar(vec![seg(0.0, 2.0, 6.0)], 2.0, 0.0);
        let v = stochastic_integral(&e, &l).unwrap();
        assert!((v.last() - 3.0 * (1.0 - (-2.0f64).exp())).abs() < 1e-14);
        assert!((log_mean(1.0_f64, 1.0 + 1e-9) - (1.0 + 0.5e-9)).abs() < 1e-15);
    }

    #[test]
    fn covariation_examples() {
        let a = scalar(vec![seg(0.0, 0.5, 0.3), jump(0.5, 1.0), seg(0.5, 1.0, 0.1)], 1.0, 0.0);
        let b = scalar(vec![seg(0.0, 0.5, -0.3), jump(0.5, 2.0), seg(0.5, 1.0, 0.2)], 1.0, 0.0);
        assert_eq!(*quadratic_covariation(&a, &b, Continuous::Supplied(0.0)).unwrap().last(), 2.0);
        let c = scalar(vec![seg(0.0, 0.25, 0.3), jump(0.25, 1.0), seg(0.25, 1.0, 0.1)], 1.0, 0.0);
        assert!(quadratic_covariation(&a, &c, Continuous::Supplied(0.0)).is_err());
    }

    fn brownian(dt: f64, seed: u64) -> ScalarPath<f64> {
        let m = LevyModel2::<f64>::new(
            [0.0, 0.0],
            GaussianCov {
                uu: 1.0,
                ul: 0.0,
                ll: 0.0,
            },
            0.0,
            JumpLaw2::none(),
        )
        .unwrap();
        PathSampler::new(&m, 1.0, Backend::Euler { grid_dt: dt })
            .unwrap()
            .sample(&mut StreamKey::new(seed).path(0))
            .component(0)
    }

    #[test]
    fn ito_integral_of_brownian_motion() {
        // ∫ B dB = (B_1² - [B]_1) / 2 exactly for left-point sums.
        let mut rms = Vec::new();
        for dt in [0.01, 0.005] {
            let mut s = 0.0;
            for seed in 0..200 {
                let b = brownian(dt, seed);
                let knots: Vec<f64> = b.knots().iter().map(|k| k[0]).collect();
                let h = AlignedSeries::for_path(&b, knots.clone());
                let int = stochastic_integral(&h, &b).unwrap();
                let qv = quadratic_covariation(&b, &b, Continuous::Realized).unwrap();
                let b1 = knots.last().unwrap();
                assert!((int.last() - (b1 * b1 - qv.last()) / 2.0).abs() < 1e-12);
                let err = int.last() - (b1 * b1 - 1.0) / 2.0;
                s += err * err;
            }
            rms.push((s / 200.0).sqrt());
        }
        let ratio = rms[0] / rms[1];
        assert!((1.2..=1.7).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn quadratic_variation_of_brownian_motion() {
        let b = brownian(1e-4, 3);
        let qv = *quadratic_covariation(&b, &b, Continuous::Realized).unwrap().last();
        assert!((qv - 1.0).abs() < 0.03, "{qv}");
    }

    #[test]
    fn exponential_times_w_exponential_is_one() {
        let m = LevyModel2::<f64>::new(
            [0.2, 0.0],
            GaussianCov {
                uu: 0.3,
                ul: 0.0,
                ll: 0.0,
            },
            2.0,
            JumpLaw2::point_mass(vec![(-0.5, 0.0, 0.5), (2.0, 0.0, 0.5)]),
        )
        .unwrap();
        let p = PathSampler::new(&m, 3.0, Backend::Euler { grid_dt: 0.01 })
            .unwrap()
            .sample(&mut StreamKey::new(6).path(0));
        let e = stochastic_exponential(&p.component(0)).unwrap();
        let ew = stochastic_exponential(&w_path(&p).unwrap()).unwrap();
        for (a, b) in e.values().iter().zip(ew.values()) {
            assert!((a * b - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn exponential_solves_its_sde_on_jump_paths() {
        let m = LevyModel2::<f64>::new(
            [0.0, 0.0],
            GaussianCov::zero(),
            4.0,
            JumpLaw2::point_mass(vec![(-0.5, 0.0, 0.5), (-2.5, 0.0, 0.2), (1.0, 0.0, 0.3)]),
        )
        .unwrap();
        let p = PathSampler::new(&m, 2.0, Backend::Exact)
            .unwrap()
            .sample(&mut StreamKey::new(2).path(0));
        let x = p.component(0);
        let e = stochastic_exponential(&x).unwrap();
        let int = stochastic_integral(&e, &x).unwrap();
        for (a, b) in e.values().iter().zip(int.values()) {
            assert!((a - 1.0 - b).abs() < 1e-12 * a.abs().max(1.0));
        }
    }
}
