//! Jump-adapted event-list paths and the pathwise transforms between them.
//!
//! A path on `[0, horizon]` is a list of events. A `Segment` carries the
//! continuous increment (drift plus Gaussian part) over `[t0, t1]`, a `Jump`
//! the jump at a single time. Segments tile `[0, horizon]` exactly; a jump at
//! time `τ` sits between the segment ending at `τ` and the one starting there.
//!
//! Knot `k` is the state after the first `k` events, so knot 0 is time 0 and
//! the knot of a jump is preceded by its left limit.

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::error::{GouError, Result};
use crate::jump_law::dual_jump;
use crate::levy_model::LevyModel2;
use crate::scalar::{Real, Scalar};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Backend<S> {
    /// No Gaussian part; segments carry pure drift and everything is exact.
    Exact,
    /// Gaussian increments on a regular grid of step `grid_dt`.
    Euler { grid_dt: S },
}

impl<S: Scalar> Backend<S> {
    pub fn is_exact(&self) -> bool {
        matches!(self, Backend::Exact)
    }

    pub fn grid_dt(&self) -> Option<&S> {
        match self {
            Backend::Exact => None,
            Backend::Euler { grid_dt } => Some(grid_dt),
        }
    }

    fn map<S2>(&self, f: &dyn Fn(&S) -> S2) -> Backend<S2> {
        match self {
            Backend::Exact => Backend::Exact,
            Backend::Euler { grid_dt } => Backend::Euler { grid_dt: f(grid_dt) },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Event<S, const N: usize> {
    Segment { t0: S, t1: S, dx: [S; N] },
    Jump { time: S, dx: [S; N] },
}

impl<S: Scalar, const N: usize> Event<S, N> {
    pub fn end_time(&self) -> &S {
        match self {
            Event::Segment { t1, .. } => t1,
            Event::Jump { time, .. } => time,
        }
    }

    pub fn dx(&self) -> &[S; N] {
        match self {
            Event::Segment { dx, .. } | Event::Jump { dx, .. } => dx,
        }
    }

    pub fn is_jump(&self) -> bool {
        matches!(self, Event::Jump { .. })
    }
}

/// Name of the transform that produced a path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transform {
    Sampled,
    Eta,
    W,
    Xi,
    DualPair,
    Reversed,
    T,
    EtaTilde,
    InverseFlowDriver,
    Recovered,
    Truncated,
    Component(usize),
    Zipped,
    Converted,
    Negated,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventPath<S, const N: usize> {
    horizon: S,
    events: Vec<Event<S, N>>,
    cov: [[S; N]; N],
    backend: Backend<S>,
    provenance: Vec<Transform>,
}

/// Realized `(U, L)` or any derived pair.
pub type PairPath<S> = EventPath<S, 2>;
pub type ScalarPath<S> = EventPath<S, 1>;
pub type SamplePath<S> = PairPath<S>;

fn zeros<S: Scalar, const N: usize>() -> [S; N] {
    std::array::from_fn(|_| S::zero())
}

fn add<S: Scalar, const N: usize>(a: &[S; N], b: &[S; N]) -> [S; N] {
    std::array::from_fn(|i| a[i].clone() + b[i].clone())
}

fn neg<S: Scalar, const N: usize>(a: &[S; N]) -> [S; N] {
    std::array::from_fn(|i| -a[i].clone())
}

impl<S: Scalar, const N: usize> EventPath<S, N> {
    /// Builds a path after checking that segments tile `[0, horizon]` and
    /// jumps fall in `(0, horizon]`.
    pub fn new(horizon: S, events: Vec<Event<S, N>>, cov: [[S; N]; N], backend: Backend<S>) -> Result<Self> {
        if horizon <= S::zero() {
            return Err(GouError::InvalidArgument("horizon must be positive".into()));
        }
        let mut t = S::zero();
        for e in &events {
            match e {
                Event::Segment { t0, t1, .. } => {
                    if *t0 != t || t1 <= t0 {
                        return Err(GouError::InvalidArgument(format!(
                            "segment [{t0:?}, {t1:?}] does not continue from {t:?}"
                        )));
                    }
                    t = t1.clone();
                }
                Event::Jump { time, .. } => {
                    if *time != t || *time <= S::zero() {
                        return Err(GouError::InvalidArgument(format!("jump at {time:?} is out of place")));
                    }
                }
            }
        }
        if t != horizon {
            return Err(GouError::InvalidArgument(format!(
                "segments end at {t:?}, horizon is {horizon:?}"
            )));
        }
        Ok(Self::from_parts(horizon, events, cov, backend, vec![Transform::Sampled]))
    }

    pub(crate) fn from_parts(
        horizon: S,
        events: Vec<Event<S, N>>,
        cov: [[S; N]; N],
        backend: Backend<S>,
        provenance: Vec<Transform>,
    ) -> Self {
        Self {
            horizon,
            events,
            cov,
            backend,
            provenance,
        }
    }

    pub fn horizon(&self) -> &S {
        &self.horizon
    }

    pub fn events(&self) -> &[Event<S, N>] {
        &self.events
    }

    /// Gaussian covariance of the continuous part per unit time.
    pub fn cov(&self) -> &[[S; N]; N] {
        &self.cov
    }

    pub fn backend(&self) -> &Backend<S> {
        &self.backend
    }

    pub fn provenance(&self) -> &[Transform] {
        &self.provenance
    }

    pub fn jump_count(&self) -> usize {
        self.events.iter().filter(|e| e.is_jump()).count()
    }

    /// Times of knots `0..=n`.
    pub fn knot_times(&self) -> Vec<S> {
        std::iter::once(S::zero())
            .chain(self.events.iter().map(|e| e.end_time().clone()))
            .collect()
    }

    /// Whether knot `k` is the value right after a jump.
    pub fn is_jump_knot(&self, k: usize) -> bool {
        k > 0 && self.events[k - 1].is_jump()
    }

    /// Path values at knots `0..=n`, starting from zero.
    pub fn knots(&self) -> Vec<[S; N]> {
        let mut out = Vec::with_capacity(self.events.len() + 1);
        let mut x = zeros::<S, N>();
        out.push(x.clone());
        for e in &self.events {
            x = add(&x, e.dx());
            out.push(x.clone());
        }
        out
    }

    /// Value at the horizon.
    pub fn terminal(&self) -> [S; N] {
        self.events.iter().fold(zeros::<S, N>(), |acc, e| add(&acc, e.dx()))
    }

    /// Value at time `s` (right-continuous).
    pub fn value_at(&self, s: &S) -> [S; N] {
        let mut x = zeros::<S, N>();
        for e in &self.events {
            match e {
                Event::Jump { time, dx } => {
                    if time > s {
                        break;
                    }
                    x = add(&x, dx);
                }
                Event::Segment { t0, t1, dx } => {
                    if t0 >= s {
                        break;
                    }
                    if t1 <= s {
                        x = add(&x, dx);
                    } else {
                        let frac = (s.clone() - t0.clone()) / (t1.clone() - t0.clone());
                        x = std::array::from_fn(|i| x[i].clone() + dx[i].clone() * frac.clone());
                        break;
                    }
                }
            }
        }
        x
    }

    fn boundary_tolerance(&self) -> S {
        S::constant(1e-12) * self.horizon.clone()
    }

    /// Restriction to `[0, at]`. A jump exactly at `at` is kept unless
    /// `drop_jump_at_end`. Exact segments are split proportionally; Euler
    /// segments can only be cut at their grid boundaries.
    fn cut(&self, at: &S, drop_jump_at_end: bool) -> Result<Self> {
        if *at <= S::zero() || *at > self.horizon {
            return Err(GouError::InvalidArgument(format!(
                "cut time {at:?} outside (0, {:?}]",
                self.horizon
            )));
        }
        let tol = self.boundary_tolerance();
        let mut events = Vec::with_capacity(self.events.len());
        let mut end = S::zero();
        for e in &self.events {
            match e {
                Event::Jump { time, .. } => {
                    if time < at || (time == at && !drop_jump_at_end) {
                        events.push(e.clone());
                    } else {
                        break;
                    }
                }
                Event::Segment { t0, t1, dx } => {
                    if t0 >= at {
                        break;
                    }
                    if (t1.clone() - at.clone()).magnitude() <= tol || t1 < at {
                        events.push(e.clone());
                        end = t1.clone();
                        if t1 >= at {
                            break;
                        }
                        continue;
                    }
                    if (at.clone() - t0.clone()).magnitude() <= tol {
                        break;
                    }
                    if !self.backend.is_exact() {
                        return Err(GouError::InvalidArgument(format!(
                            "cut time {at:?} falls inside the Gaussian step [{t0:?}, {t1:?}]"
                        )));
                    }
                    let frac = (at.clone() - t0.clone()) / (t1.clone() - t0.clone());
                    events.push(Event::Segment {
                        t0: t0.clone(),
                        t1: at.clone(),
                        dx: std::array::from_fn(|i| dx[i].clone() * frac.clone()),
                    });
                    end = at.clone();
                    break;
                }
            }
        }
        let mut provenance = self.provenance.clone();
        provenance.push(Transform::Truncated);
        Ok(Self::from_parts(end, events, self.cov.clone(), self.backend.clone(), provenance))
    }

    /// The same path with a segment boundary at `at`. Exact segments are
    /// split proportionally; on Euler paths `at` must already be a boundary.
    pub fn with_knot_at(&self, at: &S) -> Result<Self> {
        if *at < S::zero() || *at > self.horizon {
            return Err(GouError::InvalidArgument(format!("time {at:?} outside the horizon")));
        }
        let tol = self.boundary_tolerance();
        let mut events = Vec::with_capacity(self.events.len() + 1);
        for e in &self.events {
            match e {
                Event::Segment { t0, t1, dx }
                    if t0 < at
                        && at < t1
                        && (at.clone() - t0.clone()).magnitude() > tol
                        && (t1.clone() - at.clone()).magnitude() > tol =>
                {
                    if !self.backend.is_exact() {
                        return Err(GouError::InvalidArgument(format!(
                            "time {at:?} falls inside the Gaussian step [{t0:?}, {t1:?}]"
                        )));
                    }
                    let frac = (at.clone() - t0.clone()) / (t1.clone() - t0.clone());
                    let first: [S; N] = std::array::from_fn(|i| dx[i].clone() * frac.clone());
                    let second: [S; N] = std::array::from_fn(|i| dx[i].clone() - first[i].clone());
                    events.push(Event::Segment {
                        t0: t0.clone(),
                        t1: at.clone(),
                        dx: first,
                    });
                    events.push(Event::Segment {
                        t0: at.clone(),
                        t1: t1.clone(),
                        dx: second,
                    });
                }
                _ => events.push(e.clone()),
            }
        }
        Ok(Self::from_parts(
            self.horizon.clone(),
            events,
            self.cov.clone(),
            self.backend.clone(),
            self.provenance.clone(),
        ))
    }

    /// Restriction to `[0, at]`, keeping a jump at `at`.
    pub fn truncate(&self, at: &S) -> Result<Self> {
        self.cut(at, false)
    }

    /// Restriction to `[0, at]` with any jump at `at` removed, so the end value
    /// is the left limit `X_{at-}`.
    pub fn truncate_open(&self, at: &S) -> Result<Self> {
        self.cut(at, true)
    }

    /// Time reversal at `at`: `X̃_s = X_{(at-s)-} - X_{at-}` for `s ∈ [0, at]`.
    ///
    /// A jump at `at` is removed first. A jump `ΔX` at `τ` becomes a jump
    /// `-ΔX` at `at - τ`, and segments are reversed with negated increments.
    pub fn reversed_at(&self, at: &S) -> Result<Self> {
        let cut = self.truncate_open(at)?;
        let horizon = cut.horizon.clone();
        let events = cut
            .events
            .iter()
            .rev()
            .map(|e| match e {
                Event::Segment { t0, t1, dx } => Event::Segment {
                    t0: horizon.clone() - t1.clone(),
                    t1: horizon.clone() - t0.clone(),
                    dx: neg(dx),
                },
                Event::Jump { time, dx } => Event::Jump {
                    time: horizon.clone() - time.clone(),
                    dx: neg(dx),
                },
            })
            .collect();
        let mut provenance = cut.provenance;
        provenance.push(Transform::Reversed);
        Ok(Self::from_parts(horizon, events, cut.cov, cut.backend, provenance))
    }

    pub fn component(&self, i: usize) -> ScalarPath<S> {
        let mut provenance = self.provenance.clone();
        provenance.push(Transform::Component(i));
        EventPath::from_parts(
            self.horizon.clone(),
            self.events
                .iter()
                .map(|e| match e {
                    Event::Segment { t0, t1, dx } => Event::Segment {
                        t0: t0.clone(),
                        t1: t1.clone(),
                        dx: [dx[i].clone()],
                    },
                    Event::Jump { time, dx } => Event::Jump {
                        time: time.clone(),
                        dx: [dx[i].clone()],
                    },
                })
                .collect(),
            [[self.cov[i][i].clone()]],
            self.backend.clone(),
            provenance,
        )
    }

    /// `-X`, covariance unchanged.
    pub fn negated(&self) -> Self {
        let mut provenance = self.provenance.clone();
        provenance.push(Transform::Negated);
        let events = self
            .events
            .iter()
            .map(|e| match e {
                Event::Segment { t0, t1, dx } => Event::Segment {
                    t0: t0.clone(),
                    t1: t1.clone(),
                    dx: neg(dx),
                },
                Event::Jump { time, dx } => Event::Jump {
                    time: time.clone(),
                    dx: neg(dx),
                },
            })
            .collect();
        Self::from_parts(self.horizon.clone(), events, self.cov.clone(), self.backend.clone(), provenance)
    }

    /// Same path in another scalar type.
    pub fn convert<S2: Scalar>(&self, f: &dyn Fn(&S) -> S2) -> EventPath<S2, N> {
        let arr = |a: &[S; N]| -> [S2; N] { std::array::from_fn(|i| f(&a[i])) };
        let mut provenance = self.provenance.clone();
        provenance.push(Transform::Converted);
        EventPath {
            horizon: f(&self.horizon),
            events: self
                .events
                .iter()
                .map(|e| match e {
                    Event::Segment { t0, t1, dx } => Event::Segment {
                        t0: f(t0),
                        t1: f(t1),
                        dx: arr(dx),
                    },
                    Event::Jump { time, dx } => Event::Jump { time: f(time), dx: arr(dx) },
                })
                .collect(),
            cov: std::array::from_fn(|i| arr(&self.cov[i])),
            backend: self.backend.map(f),
            provenance,
        }
    }

    /// Checks that two paths share times and event kinds.
    pub fn aligned_with<const M: usize>(&self, other: &EventPath<S, M>) -> Result<()> {
        if self.horizon != other.horizon || self.events.len() != other.events.len() {
            return Err(GouError::Misaligned("horizons or event counts differ".into()));
        }
        for (k, (a, b)) in self.events.iter().zip(&other.events).enumerate() {
            let same = match (a, b) {
                (Event::Segment { t0, t1, .. }, Event::Segment { t0: s0, t1: s1, .. }) => t0 == s0 && t1 == s1,
                (Event::Jump { time, .. }, Event::Jump { time: s, .. }) => time == s,
                _ => false,
            };
            if !same {
                return Err(GouError::Misaligned(format!("event {k} differs")));
            }
        }
        Ok(())
    }

    /// Event-by-event map into a path of dimension `M`.
    fn derive<const M: usize>(
        &self,
        cov: [[S; M]; M],
        tag: Transform,
        mut segment: impl FnMut(&[S; N], &S) -> [S; M],
        mut jump: impl FnMut(&[S; N], &S) -> Result<[S; M]>,
    ) -> Result<EventPath<S, M>> {
        let mut events = Vec::with_capacity(self.events.len());
        for e in &self.events {
            events.push(match e {
                Event::Segment { t0, t1, dx } => Event::Segment {
                    t0: t0.clone(),
                    t1: t1.clone(),
                    dx: segment(dx, &(t1.clone() - t0.clone())),
                },
                Event::Jump { time, dx } => Event::Jump {
                    time: time.clone(),
                    dx: jump(dx, time)?,
                },
            });
        }
        let mut provenance = self.provenance.clone();
        provenance.push(tag);
        Ok(EventPath::from_parts(
            self.horizon.clone(),
            events,
            cov,
            self.backend.clone(),
            provenance,
        ))
    }
}

impl<S: Scalar> ScalarPath<S> {
    /// Pairs two aligned scalar paths; the cross covariance must be supplied.
    pub fn zip(a: &ScalarPath<S>, b: &ScalarPath<S>, cross_cov: S) -> Result<PairPath<S>> {
        a.aligned_with(b)?;
        let events = a
            .events
            .iter()
            .zip(&b.events)
            .map(|(x, y)| match (x, y) {
                (Event::Segment { t0, t1, dx }, Event::Segment { dx: dy, .. }) => Event::Segment {
                    t0: t0.clone(),
                    t1: t1.clone(),
                    dx: [dx[0].clone(), dy[0].clone()],
                },
                (Event::Jump { time, dx }, Event::Jump { dx: dy, .. }) => Event::Jump {
                    time: time.clone(),
                    dx: [dx[0].clone(), dy[0].clone()],
                },
                _ => unreachable!("alignment checked"),
            })
            .collect();
        let cov = [
            [a.cov[0][0].clone(), cross_cov.clone()],
            [cross_cov, b.cov[0][0].clone()],
        ];
        Ok(EventPath::from_parts(
            a.horizon.clone(),
            events,
            cov,
            a.backend.clone(),
            vec![Transform::Zipped],
        ))
    }
}

fn jump_at_minus_one<S: Scalar>(time: &S) -> GouError {
    GouError::JumpAtMinusOne {
        time: format!("{time:?}"),
    }
}

/// `η` with `Δη = ΔL / (1 + ΔU)` and continuous part `dL - σ_UL dt`.
pub fn eta_path<S: Scalar>(path: &PairPath<S>) -> Result<ScalarPath<S>> {
    let s_ul = path.cov[0][1].clone();
    path.derive(
        [[path.cov[1][1].clone()]],
        Transform::Eta,
        |dx, dt| [dx[1].clone() - s_ul.clone() * dt.clone()],
        |dx, time| {
            let d = S::one() + dx[0].clone();
            if d == S::zero() {
                return Err(jump_at_minus_one(time));
            }
            Ok([dx[1].clone() / d])
        },
    )
}

/// `W` with `ΔW = -ΔU / (1 + ΔU)` and continuous part `-dU + σ_U² dt`, so that
/// `E(U)⁻¹ = E(W)`.
pub fn w_path<S: Scalar>(path: &PairPath<S>) -> Result<ScalarPath<S>> {
    let s_uu = path.cov[0][0].clone();
    path.derive(
        [[s_uu.clone()]],
        Transform::W,
        |dx, dt| [-dx[0].clone() + s_uu.clone() * dt.clone()],
        |dx, time| {
            let d = S::one() + dx[0].clone();
            if d == S::zero() {
                return Err(jump_at_minus_one(time));
            }
            Ok([-(dx[0].clone() / d)])
        },
    )
}

/// The dual driver `(W, K)` with `K = -η`.
pub fn dual_pair_path<S: Scalar>(path: &PairPath<S>) -> Result<PairPath<S>> {
    let s_uu = path.cov[0][0].clone();
    let s_ul = path.cov[0][1].clone();
    path.derive(
        path.cov.clone(),
        Transform::DualPair,
        |dx, dt| {
            [
                -dx[0].clone() + s_uu.clone() * dt.clone(),
                -dx[1].clone() + s_ul.clone() * dt.clone(),
            ]
        },
        |dx, time| {
            if dx[0] == -S::one() {
                return Err(jump_at_minus_one(time));
            }
            let (u, l) = dual_jump(&dx[0], &dx[1]);
            Ok([u, l])
        },
    )
}

/// `T` from the reversed `Ũ`: `ΔT = ΔŨ / (1 - ΔŨ)`, continuous part `dŨ + σ_U² dt`.
pub fn t_path<S: Scalar>(reversed_u: &ScalarPath<S>, sigma_u_sq: &S) -> Result<ScalarPath<S>> {
    reversed_u.derive(
        reversed_u.cov.clone(),
        Transform::T,
        |dx, dt| [dx[0].clone() + sigma_u_sq.clone() * dt.clone()],
        |dx, time| {
            let d = S::one() - dx[0].clone();
            if d == S::zero() {
                return Err(jump_at_minus_one(time));
            }
            Ok([dx[0].clone() / d])
        },
    )
}

/// `η̃` from the reversed pair: `Δη̃ = ΔL̃ / (1 - ΔŨ)`, continuous part `dL̃ + σ_UL dt`.
pub fn eta_tilde_path<S: Scalar>(reversed: &PairPath<S>) -> Result<ScalarPath<S>> {
    let s_ul = reversed.cov[0][1].clone();
    reversed.derive(
        [[reversed.cov[1][1].clone()]],
        Transform::EtaTilde,
        |dx, dt| [dx[1].clone() + s_ul.clone() * dt.clone()],
        |dx, time| {
            let d = S::one() - dx[0].clone();
            if d == S::zero() {
                return Err(jump_at_minus_one(time));
            }
            Ok([dx[1].clone() / d])
        },
    )
}

/// The pair `(T, η̃)` driving the inverse flow, built from the reversed `(Ũ, L̃)`.
pub fn inverse_flow_driver<S: Scalar>(reversed: &PairPath<S>) -> Result<PairPath<S>> {
    let s_uu = reversed.cov[0][0].clone();
    let s_ul = reversed.cov[0][1].clone();
    reversed.derive(
        reversed.cov.clone(),
        Transform::InverseFlowDriver,
        |dx, dt| {
            [
                dx[0].clone() + s_uu.clone() * dt.clone(),
                dx[1].clone() + s_ul.clone() * dt.clone(),
            ]
        },
        |dx, time| {
            let d = S::one() - dx[0].clone();
            if d == S::zero() {
                return Err(jump_at_minus_one(time));
            }
            Ok([dx[0].clone() / d.clone(), dx[1].clone() / d])
        },
    )
}

/// `ξ = -log E(U)`: `Δξ = -log(1 + ΔU)`, continuous part `-dU + σ_U² dt / 2`.
pub fn xi_path<T: Real>(path: &PairPath<T>) -> Result<ScalarPath<T>> {
    let s_uu = path.cov[0][0];
    path.derive(
        [[s_uu]],
        Transform::Xi,
        |dx, dt| [-dx[0] + s_uu * *dt * T::lit(0.5)],
        |dx, time| {
            if dx[0] <= -T::one() {
                return Err(GouError::ConditionB(format!("jump ΔU = {} at t = {time}", dx[0])));
            }
            Ok([-dx[0].ln_1p()])
        },
    )
}

/// Recovers `(U, L)` from `(ξ, η)`: `ΔU = e^{-Δξ} - 1`, `ΔL = e^{-Δξ} Δη`,
/// continuous parts `-dξ + σ_ξ² dt / 2` and `dη - σ_ξη dt`.
pub fn recover_ul_from_xi_eta<T: Real>(
    xi: &ScalarPath<T>,
    eta: &ScalarPath<T>,
    sigma_xi_sq: T,
    sigma_xi_eta: T,
) -> Result<PairPath<T>> {
    let zipped = ScalarPath::zip(xi, eta, sigma_xi_eta)?;
    let cov = [[sigma_xi_sq, -sigma_xi_eta], [-sigma_xi_eta, eta.cov[0][0]]];
    zipped.derive(
        cov,
        Transform::Recovered,
        |dx, dt| [-dx[0] + sigma_xi_sq * *dt * T::lit(0.5), dx[1] - sigma_xi_eta * *dt],
        |dx, _| {
            let g = (-dx[0]).exp();
            Ok([g - T::one(), g * dx[1]])
        },
    )
}

/// Samples `(U, L)` paths of a model on `[0, horizon]`.
#[derive(Debug, Clone)]
pub struct PathSampler<'a, T> {
    model: &'a LevyModel2<T>,
    horizon: T,
    backend: Backend<T>,
    marks: Vec<T>,
    chol: [[T; 2]; 2],
}

impl<'a, T: Real> PathSampler<'a, T> {
    pub fn new(model: &'a LevyModel2<T>, horizon: T, backend: Backend<T>) -> Result<Self> {
        if !(horizon > T::zero() && horizon.is_finite()) {
            return Err(GouError::InvalidArgument(format!("horizon {horizon} must be positive")));
        }
        match backend {
            Backend::Exact if model.has_gaussian() => return Err(GouError::ExactWithGaussian),
            Backend::Euler { grid_dt } if !(grid_dt > T::zero() && grid_dt.is_finite()) => {
                return Err(GouError::InvalidArgument(format!("grid_dt {grid_dt} must be positive")));
            }
            _ => {}
        }
        let c = model.cov();
        let l11 = c.uu.max(T::zero()).sqrt();
        let l21 = if l11 > T::zero() { c.ul / l11 } else { T::zero() };
        let l22 = (c.ll - l21 * l21).max(T::zero()).sqrt();
        Ok(Self {
            model,
            horizon,
            backend,
            marks: Vec::new(),
            chol: [[l11, T::zero()], [l21, l22]],
        })
    }

    /// Backend used for a model: exact when it has no Gaussian part.
    pub fn auto(model: &'a LevyModel2<T>, horizon: T, grid_dt: T) -> Result<Self> {
        let backend = if model.has_gaussian() {
            Backend::Euler { grid_dt }
        } else {
            Backend::Exact
        };
        Self::new(model, horizon, backend)
    }

    /// Forces segment boundaries at the given times.
    pub fn with_marks(mut self, marks: &[T]) -> Result<Self> {
        let mut m: Vec<T> = marks.to_vec();
        if m.iter().any(|t| !(*t > T::zero() && *t <= self.horizon)) {
            return Err(GouError::InvalidArgument("mark times must lie in (0, horizon]".into()));
        }
        m.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        m.dedup();
        m.retain(|t| *t < self.horizon);
        self.marks = m;
        Ok(self)
    }

    pub fn model(&self) -> &LevyModel2<T> {
        self.model
    }

    pub fn horizon(&self) -> T {
        self.horizon
    }

    pub fn backend(&self) -> Backend<T> {
        self.backend
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> PairPath<T> {
        let mut events = Vec::new();
        self.sample_into(rng, &mut events);
        EventPath::from_parts(
            self.horizon,
            events,
            self.model.cov().matrix(),
            self.backend,
            vec![Transform::Sampled],
        )
    }

    /// Streams the events of one path into `sink`.
    pub fn for_each_event<R: Rng + ?Sized>(&self, rng: &mut R, mut sink: impl FnMut(Event<T, 2>)) {
        self.try_for_each_event(rng, |e| {
            sink(e);
            true
        });
    }

    /// Like [`Self::for_each_event`], but stops as soon as `sink` returns `false`.
    pub fn try_for_each_event<R: Rng + ?Sized>(&self, rng: &mut R, mut sink: impl FnMut(Event<T, 2>) -> bool) {
        let b = *self.model.drift();
        let lambda = *self.model.jump_intensity();
        let law = self.model.jump_law();
        let h = self.horizon;
        let grid = self.backend.grid_dt().copied();
        let eps = grid.map_or(T::zero(), |g| g * T::lit(1e-9));
        let [[l11, _], [l21, l22]] = self.chol;

        let draw_jump_time = |rng: &mut R, from: T| -> T {
            if lambda > T::zero() {
                let e: f64 = Exp1.sample(rng);
                from + T::lit(e) / lambda
            } else {
                T::infinity()
            }
        };
        let mut next_jump = draw_jump_time(rng, T::zero());
        let mut t = T::zero();
        let mut k: u64 = 1;
        let mut mi = 0usize;

        let segment = |rng: &mut R, t0: T, t1: T, sink: &mut dyn FnMut(Event<T, 2>) -> bool| -> bool {
            let dt = t1 - t0;
            let mut dx = [b[0] * dt, b[1] * dt];
            if grid.is_some() {
                let sq = dt.sqrt();
                let z1 = if l11 > T::zero() || l21 != T::zero() {
                    let z: f64 = StandardNormal.sample(rng);
                    T::lit(z)
                } else {
                    T::zero()
                };
                let z2 = if l22 > T::zero() {
                    let z: f64 = StandardNormal.sample(rng);
                    T::lit(z)
                } else {
                    T::zero()
                };
                dx[0] = dx[0] + l11 * sq * z1;
                dx[1] = dx[1] + (l21 * z1 + l22 * z2) * sq;
            }
            sink(Event::Segment { t0, t1, dx })
        };

        while t < h {
            let grid_next = grid.map_or(h, |g| (T::from_u64(k).unwrap_or_else(T::infinity) * g).min(h));
            let mark_next = self.marks.get(mi).copied().unwrap_or(h);
            let det = grid_next.min(mark_next);
            if next_jump <= det {
                if next_jump > t && !segment(rng, t, next_jump, &mut sink) {
                    return;
                }
                let dx = law.sample(rng);
                if !sink(Event::Jump { time: next_jump, dx }) {
                    return;
                }
                t = next_jump;
                next_jump = draw_jump_time(rng, next_jump);
                continue;
            }
            if det > t && !segment(rng, t, det, &mut sink) {
                return;
            }
            t = det;
            if grid_next <= det + eps {
                k += 1;
            }
            if mark_next <= det + eps {
                mi += 1;
            }
        }
    }

    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, events: &mut Vec<Event<T, 2>>) {
        events.clear();
        self.for_each_event(rng, |e| events.push(e));
    }
}
