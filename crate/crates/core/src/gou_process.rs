//! Forward solutions of `dV = V₋ dU + dL`, exponential functionals and
//! stationary samplers.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{GouError, Result};
use crate::levy_model::LevyModel2;
use crate::path_engine::{eta_path, Backend, Event, PairPath, PathSampler, ScalarPath};
use crate::rng::StreamKey;
use crate::scalar::{mixed_error, Real};
use crate::stats::{EmpiricalDistribution, SampleMeta};
use crate::stochastic_calculus::{
    exp_weight, stochastic_exponential, stochastic_integral, AlignedSeries, Interp,
};

/// `V^x` along one path together with the stochastic exponential driving it.
#[derive(Debug, Clone, PartialEq)]
pub struct GouTrajectory<T> {
    start: T,
    stoch_exp: AlignedSeries<T>,
    integral: Option<AlignedSeries<T>>,
    values: AlignedSeries<T>,
    backend: Backend<T>,
}

impl<T: Real> GouTrajectory<T> {
    pub fn start(&self) -> T {
        self.start
    }

    pub fn stoch_exp(&self) -> &AlignedSeries<T> {
        &self.stoch_exp
    }

    /// Running `∫ E₋⁻¹ dη` for trajectories from the explicit formula.
    pub fn integral(&self) -> Option<&AlignedSeries<T>> {
        self.integral.as_ref()
    }

    pub fn values(&self) -> &AlignedSeries<T> {
        &self.values
    }

    pub fn backend(&self) -> &Backend<T> {
        &self.backend
    }

    pub fn terminal(&self) -> T {
        *self.values.last()
    }

    /// Largest mixed error of `ΔV = V₋ ΔU + ΔL` over the jumps of `driver`.
    pub fn jump_residual(&self, driver: &PairPath<T>) -> Result<T> {
        if driver.events().len() + 1 != self.values.len() {
            return Err(GouError::Misaligned("trajectory and driver differ".into()));
        }
        let v = self.values.values();
        let mut worst = T::zero();
        for (k, e) in driver.events().iter().enumerate() {
            if let Event::Jump { dx, .. } = e {
                let predicted = v[k] + v[k] * dx[0] + dx[1];
                worst = worst.max(mixed_error(v[k + 1], predicted));
            }
        }
        Ok(worst)
    }
}

/// `E (x + ∫ E₋⁻¹ d driver)` for a given exponential `E` aligned with `driver`.
pub fn explicit_solution<T: Real>(
    stoch_exp: AlignedSeries<T>,
    driver: &ScalarPath<T>,
    x: T,
) -> Result<GouTrajectory<T>> {
    let inverse = stoch_exp.map(|e| T::one() / *e);
    let integral = stochastic_integral(&inverse, driver)?;
    let values = stoch_exp.zip_with(&integral, |e, i| *e * (x + *i))?;
    Ok(GouTrajectory {
        start: x,
        stoch_exp,
        integral: Some(integral),
        values,
        backend: *driver.backend(),
    })
}

/// `V_s = E(U)_s (x + ∫_(0,s] E(U)_{r-}⁻¹ dη_r)`.
pub fn solve_forward<T: Real>(path: &PairPath<T>, x: T) -> Result<GouTrajectory<T>> {
    let e = stochastic_exponential(&path.component(0))?;
    explicit_solution(e, &eta_path(path)?, x)
}

/// Running causal integral `∫_(0,s] E(U)_{r-} dL_r`.
pub fn causal_running_integral<T: Real>(path: &PairPath<T>) -> Result<AlignedSeries<T>> {
    let e = stochastic_exponential(&path.component(0))?;
    stochastic_integral(&e, &path.component(1))
}

/// Jump-adapted Euler scheme along a given path: `V ← V (1 + dU) + dL` per
/// Gaussian step, the exact affine solution on pure-drift segments and
/// `V ← V (1 + ΔU) + ΔL` at jumps.
pub fn euler_along<T: Real>(path: &PairPath<T>, x: T) -> Result<GouTrajectory<T>> {
    let exact = path.backend().is_exact();
    let mut v = x;
    let mut out = Vec::with_capacity(path.events().len() + 1);
    out.push(v);
    for e in path.events() {
        v = match e {
            Event::Jump { time, dx } => {
                if dx[0] == -T::one() {
                    return Err(GouError::JumpAtMinusOne { time: time.to_string() });
                }
                v * (T::one() + dx[0]) + dx[1]
            }
            Event::Segment { dx, .. } if exact => {
                let f = dx[0].exp();
                f * v + dx[1] * exp_weight(f)
            }
            Event::Segment { dx, .. } => v * (T::one() + dx[0]) + dx[1],
        };
        out.push(v);
    }
    let stoch_exp = stochastic_exponential(&path.component(0))?;
    let values = AlignedSeries::new(stoch_exp.times().to_vec(), out, jump_flags(&stoch_exp))?;
    Ok(GouTrajectory {
        start: x,
        stoch_exp,
        integral: None,
        values,
        backend: *path.backend(),
    })
}

fn jump_flags<T: Real>(s: &AlignedSeries<T>) -> Vec<bool> {
    (0..s.len()).map(|k| s.is_jump(k)).collect()
}

/// Samples a path and runs [`euler_along`] on it. The same `rng` state gives
/// the same path, so the result can be compared with [`solve_forward`].
pub fn solve_sde_euler<T: Real, R: Rng + ?Sized>(
    model: &LevyModel2<T>,
    x: T,
    horizon: T,
    grid_dt: T,
    rng: &mut R,
) -> Result<(PairPath<T>, GouTrajectory<T>)> {
    let path = PathSampler::auto(model, horizon, grid_dt)?.sample(rng);
    let traj = euler_along(&path, x)?;
    Ok((path, traj))
}

fn interp_for<T: Real>(backend: &Backend<T>) -> Interp {
    if backend.is_exact() {
        Interp::Exponential
    } else {
        Interp::LeftPoint
    }
}

/// Streaming form of the explicit solution: after any prefix of events,
/// `V^x = slope · x + intercept` for every starting value `x` at once.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineFlow<T> {
    slope: T,
    intercept: T,
    s_uu: T,
    s_ul: T,
    interp: Interp,
}

impl<T: Real> AffineFlow<T> {
    pub fn new(cov: &[[T; 2]; 2], backend: &Backend<T>) -> Self {
        Self {
            slope: T::one(),
            intercept: T::zero(),
            s_uu: cov[0][0],
            s_ul: cov[0][1],
            interp: interp_for(backend),
        }
    }

    pub fn for_model(model: &LevyModel2<T>, backend: &Backend<T>) -> Self {
        Self::new(&model.cov().matrix(), backend)
    }

    pub fn push(&mut self, e: &Event<T, 2>) -> Result<()> {
        match e {
            Event::Jump { time, dx } => {
                let g = T::one() + dx[0];
                if g == T::zero() {
                    return Err(GouError::JumpAtMinusOne { time: time.to_string() });
                }
                self.slope = self.slope * g;
                self.intercept = self.intercept * g + dx[1];
            }
            Event::Segment { t0, t1, dx } => {
                let dt = *t1 - *t0;
                let f = (dx[0] - self.s_uu * dt * T::lit(0.5)).exp();
                let d_eta = dx[1] - self.s_ul * dt;
                let w = match self.interp {
                    Interp::Exponential => exp_weight(f),
                    Interp::LeftPoint => f,
                };
                self.slope = self.slope * f;
                self.intercept = self.intercept * f + d_eta * w;
            }
        }
        Ok(())
    }

    /// `E(U)` so far.
    pub fn slope(&self) -> T {
        self.slope
    }

    /// `V^0` so far.
    pub fn intercept(&self) -> T {
        self.intercept
    }

    pub fn value(&self, x: T) -> T {
        self.slope * x + self.intercept
    }
}

/// State of the flow at a fixed time.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowSnapshot<T> {
    pub time: T,
    pub slope: T,
    pub intercept: T,
    /// Smallest knot value of `V^x` on `[0, time]`, one entry per start value.
    pub running_min: Vec<T>,
}

impl<T: Real> FlowSnapshot<T> {
    pub fn value(&self, x: T) -> T {
        self.slope * x + self.intercept
    }
}

/// Streams one path and records the flow at each of the sorted `times`,
/// which must be segment boundaries of `sampler` (marks or its horizon).
/// Sampling stops after the last time.
pub fn flow_snapshots<T: Real, R: Rng + ?Sized>(
    sampler: &PathSampler<'_, T>,
    times: &[T],
    starts: &[T],
    rng: &mut R,
) -> Result<Vec<FlowSnapshot<T>>> {
    let mut flow = AffineFlow::for_model(sampler.model(), &sampler.backend());
    let tol = sampler.horizon() * T::lit(1e-9);
    let mut mins: Vec<T> = starts.to_vec();
    let mut out = Vec::with_capacity(times.len());
    let mut failure = None;
    if times.is_empty() {
        return Ok(out);
    }
    sampler.try_for_each_event(rng, |e| {
        if let Err(err) = flow.push(&e) {
            failure = Some(err);
            return false;
        }
        for (m, x) in mins.iter_mut().zip(starts) {
            *m = m.min(flow.value(*x));
        }
        while out.len() < times.len() && !e.is_jump() && *e.end_time() >= times[out.len()] - tol {
            out.push(FlowSnapshot {
                time: times[out.len()],
                slope: flow.slope(),
                intercept: flow.intercept(),
                running_min: mins.clone(),
            });
        }
        out.len() < times.len()
    });
    if let Some(err) = failure {
        return Err(err);
    }
    if out.len() != times.len() {
        return Err(GouError::InvalidArgument("snapshot times must be segment boundaries".into()));
    }
    Ok(out)
}

/// Which exponential functional to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Functional {
    /// `∫_(0,T] E(U)_{s-} dL_s`.
    Causal,
    /// `-∫_(0,T] E(U)_{s-}⁻¹ dη_s`.
    Noncausal,
}

/// Streaming accumulator for [`Functional`] values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FunctionalAccumulator<T> {
    kind: Functional,
    /// `E(U)` for the causal functional, `E(U)⁻¹` for the noncausal one.
    weight: T,
    value: T,
    s_uu: T,
    s_ul: T,
    interp: Interp,
}

impl<T: Real> FunctionalAccumulator<T> {
    pub fn new(kind: Functional, cov: &[[T; 2]; 2], backend: &Backend<T>) -> Self {
        Self {
            kind,
            weight: T::one(),
            value: T::zero(),
            s_uu: cov[0][0],
            s_ul: cov[0][1],
            interp: interp_for(backend),
        }
    }

    pub fn push(&mut self, e: &Event<T, 2>) -> Result<()> {
        match (e, self.kind) {
            (Event::Jump { time, dx }, _) if dx[0] == -T::one() => {
                return Err(GouError::JumpAtMinusOne { time: time.to_string() });
            }
            (Event::Jump { dx, .. }, Functional::Causal) => {
                self.value = self.value + self.weight * dx[1];
                self.weight = self.weight * (T::one() + dx[0]);
            }
            (Event::Jump { dx, .. }, Functional::Noncausal) => {
                let g = T::one() + dx[0];
                self.value = self.value - self.weight * dx[1] / g;
                self.weight = self.weight / g;
            }
            (Event::Segment { t0, t1, dx }, Functional::Causal) => {
                let dt = *t1 - *t0;
                let f = (dx[0] - self.s_uu * dt * T::lit(0.5)).exp();
                let w = match self.interp {
                    Interp::Exponential => exp_weight(f),
                    Interp::LeftPoint => T::one(),
                };
                self.value = self.value + dx[1] * self.weight * w;
                self.weight = self.weight * f;
            }
            (Event::Segment { t0, t1, dx }, Functional::Noncausal) => {
                let dt = *t1 - *t0;
                let f = (dx[0] - self.s_uu * dt * T::lit(0.5)).exp();
                let d_eta = dx[1] - self.s_ul * dt;
                let w = match self.interp {
                    Interp::Exponential => exp_weight(T::one() / f),
                    Interp::LeftPoint => T::one(),
                };
                self.value = self.value - d_eta * self.weight * w;
                self.weight = self.weight / f;
            }
        }
        Ok(())
    }

    pub fn value(&self) -> T {
        self.value
    }

    /// `|E(U)_T|` (causal) or `|E(U)_T⁻¹|` (noncausal).
    pub fn diagnostic(&self) -> T {
        self.weight.abs()
    }
}

/// A truncated exponential functional with its truncation diagnostic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FunctionalSample<T> {
    pub value: T,
    pub diagnostic: T,
}

/// Evaluates a functional on one freshly sampled path on `[0, horizon]`.
pub fn exp_functional<T: Real, R: Rng + ?Sized>(
    model: &LevyModel2<T>,
    kind: Functional,
    horizon: T,
    grid_dt: T,
    rng: &mut R,
) -> Result<FunctionalSample<T>> {
    let sampler = PathSampler::auto(model, horizon, grid_dt)?;
    functional_on(&sampler, kind, rng)
}

fn functional_on<T: Real, R: Rng + ?Sized>(
    sampler: &PathSampler<'_, T>,
    kind: Functional,
    rng: &mut R,
) -> Result<FunctionalSample<T>> {
    let mut acc = FunctionalAccumulator::new(kind, &sampler.model().cov().matrix(), &sampler.backend());
    let mut failure = None;
    sampler.for_each_event(rng, |e| {
        if failure.is_none() {
            if let Err(err) = acc.push(&e) {
                failure = Some(err);
            }
        }
    });
    if let Some(err) = failure {
        return Err(err);
    }
    Ok(FunctionalSample {
        value: acc.value(),
        diagnostic: acc.diagnostic(),
    })
}

/// Settings for [`stationary_sampler`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Truncation<T> {
    pub horizon: T,
    pub grid_dt: T,
    /// A path fails when its diagnostic exceeds this.
    pub threshold: f64,
    /// The sample is flagged when more than this fraction of paths fail.
    pub max_failed: f64,
}

impl<T: Real> Truncation<T> {
    pub fn new(horizon: T, grid_dt: T) -> Self {
        Self {
            horizon,
            grid_dt,
            threshold: 1e-8,
            max_failed: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StationarySample<T> {
    pub distribution: EmpiricalDistribution<T>,
    pub failed_fraction: f64,
    pub flagged: bool,
}

/// `n` independent truncated functionals; path `i` uses `key.path(i)`.
pub fn stationary_sampler<T: Real>(
    model: &LevyModel2<T>,
    kind: Functional,
    n: usize,
    truncation: Truncation<T>,
    key: StreamKey,
) -> Result<StationarySample<T>> {
    let sampler = PathSampler::auto(model, truncation.horizon, truncation.grid_dt)?;
    let samples: Vec<FunctionalSample<T>> = (0..n as u64)
        .into_par_iter()
        .map(|i| functional_on(&sampler, kind, &mut key.path(i)))
        .collect::<Result<_>>()?;
    let failed = samples
        .iter()
        .filter(|s| !(s.diagnostic.as_f64() <= truncation.threshold))
        .count();
    let failed_fraction = failed as f64 / n.max(1) as f64;
    let distribution = EmpiricalDistribution::from_values(samples.iter().map(|s| s.value).collect())?.with_meta(
        SampleMeta {
            seed: Some(key.seed()),
            horizon: Some(truncation.horizon.as_f64()),
            failed_fraction,
        },
    );
    Ok(StationarySample {
        distribution,
        failed_fraction,
        flagged: failed_fraction > truncation.max_failed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jump_law::JumpLaw2;
    use crate::levy_model::GaussianCov;
    use crate::path_engine::EventPath;

    fn jumpy() -> LevyModel2<f64> {
        LevyModel2::new(
            [0.3, -0.2],
            GaussianCov::zero(),
            3.0,
            JumpLaw2::point_mass(vec![(0.5, 1.0, 0.3), (-0.6, -0.4, 0.3), (-2.0, 0.7, 0.2), (1.5, 0.0, 0.2)]),
        )
        .unwrap()
    }

    #[test]
    fn zero_model_is_constant() {
        let m = LevyModel2::<f64>::zero();
        let p = PathSampler::new(&m, 1.0, Backend::Exact).unwrap().sample(&mut StreamKey::new(1).path(0));
        let v = solve_forward(&p, 2.5).unwrap();
        assert!(v.values().values().iter().all(|x| *x == 2.5));
        let e = euler_along(&p, 2.5).unwrap();
        assert!(e.values().values().iter().all(|x| *x == 2.5));
    }

    #[test]
    fn linear_ode() {
        // dV = -V dt + dt from 0 gives 1 - e^{-s}.
        let m = LevyModel2::<f64>::drift_only(-1.0, 1.0);
        let p = PathSampler::new(&m, 3.0, Backend::Exact).unwrap().with_marks(&[0.5, 1.0, 2.0]).unwrap();
        let p = p.sample(&mut StreamKey::new(1).path(0));
        let v = solve_forward(&p, 0.0).unwrap();
        for (t, x) in v.values().times().iter().zip(v.values().values()) {
            assert!((x - (1.0 - (-t).exp())).abs() < 1e-14);
        }
    }

    #[test]
    fn degenerate_model_is_constant_at_k() {
        let m = LevyModel2::<f64>::new(
            [0.5, -1.0],
            GaussianCov::zero(),
            2.0,
            JumpLaw2::point_mass(vec![(0.5, -1.0, 0.5), (-0.4, 0.8, 0.5)]),
        )
        .unwrap();
        assert_eq!(m.detect_degeneracy(1e-9).unwrap().k, 2.0);
        let p = PathSampler::new(&m, 5.0, Backend::Exact).unwrap().sample(&mut StreamKey::new(9).path(0));
        let v = solve_forward(&p, 2.0).unwrap();
        assert!(v.values().values().iter().all(|x| (x - 2.0).abs() < 1e-10));
        let c = causal_running_integral(&p).unwrap();
        for (j, e) in c.values().iter().zip(v.stoch_exp().values()) {
            assert!((j - 2.0 * (1.0 - e)).abs() < 1e-10);
        }
    }

    #[test]
    fn euler_is_exact_without_gaussian() {
        let m = jumpy();
        let sampler = PathSampler::new(&m, 4.0, Backend::Exact).unwrap();
        for i in 0..50 {
            let p = sampler.sample(&mut StreamKey::new(3).path(i));
            let a = solve_forward(&p, 0.7).unwrap();
            let b = euler_along(&p, 0.7).unwrap();
            for (x, y) in a.values().values().iter().zip(b.values().values()) {
                assert!(mixed_error(*x, *y) < 1e-10);
            }
            assert!(a.jump_residual(&p).unwrap() < 1e-10);
        }
    }

    #[test]
    fn affine_flow_matches_explicit_solution() {
        let m = jumpy();
        let p = PathSampler::new(&m, 4.0, Backend::Exact).unwrap().sample(&mut StreamKey::new(4).path(0));
        let mut flow = AffineFlow::for_model(&m, &Backend::Exact);
        for e in p.events() {
            flow.push(e).unwrap();
        }
        for x in [-1.0, 0.0, 2.0] {
            let v = solve_forward(&p, x).unwrap();
            assert!(mixed_error(flow.value(x), v.terminal()) < 1e-12);
            assert!(mixed_error(flow.slope(), *v.stoch_exp().last()) < 1e-12);
        }
    }

    #[test]
    fn affine_in_start_value() {
        let m = jumpy();
        let p = PathSampler::new(&m, 3.0, Backend::Exact).unwrap().sample(&mut StreamKey::new(8).path(0));
        let v: Vec<f64> = [-1.0, 0.5, 2.0].iter().map(|x| solve_forward(&p, *x).unwrap().terminal()).collect();
        let slope = (v[1] - v[0]) / 1.5;
        assert!(mixed_error(v[0] + slope * 3.0, v[2]) < 1e-10);
        let e = *solve_forward(&p, 0.0).unwrap().stoch_exp().last();
        assert!(mixed_error(slope, e) < 1e-10);
    }

    fn coarsen(p: &PairPath<f64>) -> PairPath<f64> {
        let ev: Vec<_> = p
            .events()
            .chunks(2)
            .map(|c| match (&c[0], &c[1]) {
                (Event::Segment { t0, dx: a, .. }, Event::Segment { t1, dx: b, .. }) => Event::Segment {
                    t0: *t0,
                    t1: *t1,
                    dx: [a[0] + b[0], a[1] + b[1]],
                },
                _ => unreachable!(),
            })
            .collect();
        let dt = p.backend().grid_dt().unwrap() * 2.0;
        EventPath::new(*p.horizon(), ev, *p.cov(), Backend::Euler { grid_dt: dt }).unwrap()
    }

    #[test]
    fn euler_converges_on_shared_increments() {
        let m = LevyModel2::new(
            [0.1, 0.5],
            GaussianCov {
                uu: 1.0,
                ul: 0.0,
                ll: 0.0,
            },
            0.0,
            JumpLaw2::none(),
        )
        .unwrap();
        let fine = PathSampler::new(&m, 1.0, Backend::Euler { grid_dt: 1.0 / 1024.0 }).unwrap();
        let mut sq = [0.0; 2];
        for i in 0..500 {
            let p = fine.sample(&mut StreamKey::new(12).path(i));
            let reference = solve_forward(&p, 1.0).unwrap().terminal();
            let mut c = p.clone();
            for _ in 0..3 {
                c = coarsen(&c);
            }
            let half = euler_along(&c, 1.0).unwrap().terminal();
            let full = euler_along(&coarsen(&c), 1.0).unwrap().terminal();
            sq[0] += (full - reference).powi(2);
            sq[1] += (half - reference).powi(2);
        }
        let ratio = (sq[0] / sq[1]).sqrt();
        assert!((1.2..=2.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn functionals_of_deterministic_paths() {
        let m = LevyModel2::<f64>::drift_only(-1.0, 1.0);
        let s = exp_functional(&m, Functional::Causal, 3.0, 1e-3, &mut StreamKey::new(0).path(0)).unwrap();
        assert!((s.value - (1.0 - (-3.0f64).exp())).abs() < 1e-14);
        assert!((s.diagnostic - (-3.0f64).exp()).abs() < 1e-14);
        // -∫ e^{s} ds over [0, 2] with U drift -1.
        let n = exp_functional(&m, Functional::Noncausal, 2.0, 1e-3, &mut StreamKey::new(0).path(0)).unwrap();
        assert!((n.value + (2.0f64.exp() - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn accumulators_match_series() {
        let m = jumpy();
        let p = PathSampler::new(&m, 3.0, Backend::Exact).unwrap().sample(&mut StreamKey::new(5).path(0));
        let mut c = FunctionalAccumulator::new(Functional::Causal, p.cov(), p.backend());
        let mut n = FunctionalAccumulator::new(Functional::Noncausal, p.cov(), p.backend());
        for e in p.events() {
            c.push(e).unwrap();
            n.push(e).unwrap();
        }
        assert!(mixed_error(c.value(), *causal_running_integral(&p).unwrap().last()) < 1e-12);
        let v = solve_forward(&p, 0.0).unwrap();
        assert!(mixed_error(n.value(), -*v.integral().unwrap().last()) < 1e-12);
    }

    #[test]
    fn stationary_point_mass() {
        let m = LevyModel2::<f64>::drift_only(-1.0, 1.0);
        let s = stationary_sampler(&m, Functional::Causal, 50, Truncation::new(20.0, 1e-3), StreamKey::new(1)).unwrap();
        assert!(s.distribution.values().iter().all(|v| (v - 1.0).abs() < 1e-6));
        assert_eq!(s.failed_fraction, 0.0);
        assert!(!s.flagged);
        assert_eq!(s.distribution.meta().horizon, Some(20.0));
        let short = stationary_sampler(&m, Functional::Causal, 50, Truncation::new(10.0, 1e-3), StreamKey::new(1)).unwrap();
        assert_eq!(short.failed_fraction, 1.0);
        assert!(short.flagged);
    }
}
