//! The Siegmund dual `dR = R₋ dW + dK`, hitting times and ruin identities.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{GouError, Result};
use crate::gou_process::{
    explicit_solution, flow_snapshots, solve_forward, stationary_sampler, AffineFlow, Functional, GouTrajectory,
    Truncation,
};
use crate::levy_model::LevyModel2;
use crate::path_engine::{dual_pair_path, w_path, Backend, Event, PairPath, PathSampler};
use crate::rng::StreamKey;
use crate::scalar::{mixed_error, Real};
use crate::stats::{bootstrap_joint, clopper_pearson, BootstrapSummary, EmpiricalDistribution, Proportion};
use crate::stochastic_calculus::{stochastic_exponential, AlignedSeries};

/// A model together with its dual.
#[derive(Debug, Clone, PartialEq)]
pub struct DualPair<T> {
    forward: LevyModel2<T>,
    dual: LevyModel2<T>,
    degenerate_k: Option<T>,
}

impl<T: Real> DualPair<T> {
    /// Fails unless every jump has `ΔU > -1`.
    pub fn new(forward: LevyModel2<T>) -> Result<Self> {
        let dual = forward.dual()?;
        let degenerate_k = forward.detect_degeneracy(T::lit(1e-9)).map(|d| d.k);
        Ok(Self {
            forward,
            dual,
            degenerate_k,
        })
    }

    pub fn forward(&self) -> &LevyModel2<T> {
        &self.forward
    }

    pub fn dual(&self) -> &LevyModel2<T> {
        &self.dual
    }

    pub fn degenerate_k(&self) -> Option<T> {
        self.degenerate_k
    }

    /// Whether the forward `L` is a subordinator.
    pub fn l_subordinator(&self) -> bool {
        self.forward.l_is_subordinator()
    }
}

fn require_b<T: Real>(path: &PairPath<T>) -> Result<()> {
    for e in path.events() {
        if let Event::Jump { time, dx } = e {
            if dx[0] <= -T::one() {
                return Err(GouError::ConditionB(format!("jump ΔU = {} at t = {time}", dx[0])));
            }
        }
    }
    Ok(())
}

/// `R^y` computed two ways on the same path.
#[derive(Debug, Clone, PartialEq)]
pub struct DualSolution<T> {
    /// Explicit solution driven by the `(W, K)` path.
    pub trajectory: GouTrajectory<T>,
    /// `E(W) (y - ∫ E(W)₋⁻¹ dL)`.
    pub via_w: GouTrajectory<T>,
    /// Largest mixed error between the two.
    pub discrepancy: T,
}

pub fn dual_solve<T: Real>(path: &PairPath<T>, y: T) -> Result<DualSolution<T>> {
    require_b(path)?;
    let trajectory = solve_forward(&dual_pair_path(path)?, y)?;
    let ew = stochastic_exponential(&w_path(path)?)?;
    let via_w = explicit_solution(ew, &path.component(1).negated(), y)?;
    let discrepancy = trajectory
        .values()
        .values()
        .iter()
        .zip(via_w.values().values())
        .fold(T::zero(), |m, (a, b)| m.max(mixed_error(*a, *b)));
    Ok(DualSolution {
        trajectory,
        via_w,
        discrepancy,
    })
}

/// The dual killed at `0` on the half-line, `max(R, 0)`.
pub fn killed_dual<T: Real>(pair: &DualPair<T>, traj: &GouTrajectory<T>) -> Result<AlignedSeries<T>> {
    if !pair.l_subordinator() {
        return Err(GouError::Hypothesis("the killed dual needs L to be a subordinator".into()));
    }
    if traj.start() < T::zero() {
        return Err(GouError::InvalidArgument(format!("start {} is negative", traj.start())));
    }
    Ok(traj.values().map(|r| r.max(T::zero())))
}

/// `R_s 1{s < τ_R}`, the dual absorbed at its first passage below zero.
pub fn absorbed_at_zero<T: Real>(traj: &GouTrajectory<T>) -> AlignedSeries<T> {
    let dead = std::cell::Cell::new(false);
    traj.values().map(|r| {
        dead.set(dead.get() || *r <= T::zero());
        if dead.get() {
            T::zero()
        } else {
            *r
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HittingRecord<T> {
    pub hit: bool,
    /// First passage time when hit.
    pub time: Option<T>,
    /// Value at the first passage time.
    pub overshoot: Option<T>,
}

impl<T: Real> HittingRecord<T> {
    fn miss() -> Self {
        Self {
            hit: false,
            time: None,
            overshoot: None,
        }
    }

    fn at(time: T, value: T) -> Self {
        Self {
            hit: true,
            time: Some(time),
            overshoot: Some(value),
        }
    }
}

/// Crossing time of `level` inside a pure-drift segment, where
/// `V(s) = (V_a + C) f^{(s - t0)/(t1 - t0)} - C`.
fn segment_crossing<T: Real>(t0: T, t1: T, va: T, vb: T, f: T, level: T) -> T {
    let dt = t1 - t0;
    let frac = if (f - T::one()).abs() < T::lit(1e-12) {
        (level - va) / (vb - va)
    } else {
        let c = (vb - va * f) / (f - T::one());
        ((level + c) / (va + c)).ln() / f.ln()
    };
    t0 + dt * frac.max(T::zero()).min(T::one())
}

/// First time `V <= level`. Exact trajectories also resolve crossings inside
/// drift segments; Euler trajectories report the first knot at or below.
pub fn hitting_time<T: Real>(traj: &GouTrajectory<T>, level: T) -> HittingRecord<T> {
    let v = traj.values().values();
    let t = traj.values().times();
    let e = traj.stoch_exp().values();
    if v[0] <= level {
        return HittingRecord::at(t[0], v[0]);
    }
    for k in 1..v.len() {
        if v[k] <= level {
            if traj.values().is_jump(k) || !traj.backend().is_exact() {
                return HittingRecord::at(t[k], v[k]);
            }
            let time = segment_crossing(t[k - 1], t[k], v[k - 1], v[k], e[k] / e[k - 1], level);
            return HittingRecord::at(time, level);
        }
    }
    HittingRecord::miss()
}

/// First passage of `V^x` below `level` on one freshly sampled path.
pub fn first_passage<T: Real, R: Rng + ?Sized>(
    sampler: &PathSampler<'_, T>,
    x: T,
    level: T,
    rng: &mut R,
) -> Result<HittingRecord<T>> {
    if x <= level {
        return Ok(HittingRecord::at(T::zero(), x));
    }
    let exact = sampler.backend().is_exact();
    let mut flow = AffineFlow::for_model(sampler.model(), &sampler.backend());
    let mut record = HittingRecord::miss();
    let mut failure = None;
    let mut prev = (x, T::one());
    sampler.try_for_each_event(rng, |e| {
        if let Err(err) = flow.push(&e) {
            failure = Some(err);
            return false;
        }
        let v = flow.value(x);
        if v <= level {
            record = match e {
                Event::Segment { t0, t1, .. } if exact => {
                    HittingRecord::at(segment_crossing(t0, t1, prev.0, v, flow.slope() / prev.1, level), level)
                }
                _ => HittingRecord::at(*e.end_time(), v),
            };
            return false;
        }
        prev = (v, flow.slope());
        true
    });
    match failure {
        Some(err) => Err(err),
        None => Ok(record),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HittingResult<T> {
    pub horizon: T,
    pub records: Vec<HittingRecord<T>>,
    /// Estimate of `P(τ <= horizon)`.
    pub estimate: Proportion,
    /// Exact 95% interval.
    pub ci: (f64, f64),
}

/// Monte Carlo estimate of `P(τ(x) <= T)` for `V^x` with level `0`.
pub fn ruin_probability<T: Real>(
    model: &LevyModel2<T>,
    x: T,
    truncation: Truncation<T>,
    n: usize,
    key: StreamKey,
) -> Result<HittingResult<T>> {
    let sampler = PathSampler::auto(model, truncation.horizon, truncation.grid_dt)?;
    let records: Vec<HittingRecord<T>> = (0..n as u64)
        .into_par_iter()
        .map(|i| first_passage(&sampler, x, T::zero(), &mut key.path(i)))
        .collect::<Result<_>>()?;
    let hits = records.iter().filter(|r| r.hit).count() as u64;
    Ok(HittingResult {
        horizon: truncation.horizon,
        records,
        estimate: Proportion::new(hits, n as u64),
        ci: clopper_pearson(hits, n as u64, 0.95)?,
    })
}

/// One level of the subordinator ruin comparison.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RuinComparison {
    pub level: f64,
    /// `P(τ_R(y) <= T)` for the dual started at `y`.
    pub ruin: Proportion,
    /// `P(V_∞ >= y)` from the causal stationary sample.
    pub tail: Proportion,
    pub diff: f64,
    pub se: f64,
    pub allowance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubordinatorRuinReport {
    pub rows: Vec<RuinComparison>,
    pub failed_fraction: f64,
    pub pass: bool,
}

/// Ruin of the dual against the stationary tail of the forward process,
/// for `L` a subordinator. Passes when `|diff| <= 3 se + allowance`.
pub fn subordinator_ruin_check<T: Real>(
    pair: &DualPair<T>,
    levels: &[T],
    n: usize,
    truncation: Truncation<T>,
    allowance: f64,
    key: StreamKey,
) -> Result<SubordinatorRuinReport> {
    if !pair.l_subordinator() {
        return Err(GouError::Hypothesis("the ruin formula needs L to be a subordinator".into()));
    }
    if let Some(y) = levels.iter().find(|y| **y < T::zero()) {
        return Err(GouError::InvalidArgument(format!("level {y} is negative")));
    }
    let stationary = stationary_sampler(pair.forward(), Functional::Causal, n, truncation, key.fork("stationary"))?;
    let mut rows = Vec::with_capacity(levels.len());
    for (i, y) in levels.iter().enumerate() {
        let ruin = ruin_probability(pair.dual(), *y, truncation, n, key.fork("ruin").fork_index(i as u64))?.estimate;
        let hits = stationary
            .distribution
            .values()
            .iter()
            .filter(|v| **v >= *y)
            .count() as u64;
        let tail = Proportion::new(hits, n as u64);
        let diff = ruin.p - tail.p;
        let se = (ruin.se.powi(2) + tail.se.powi(2)).sqrt();
        rows.push(RuinComparison {
            level: y.as_f64(),
            ruin,
            tail,
            diff,
            se,
            allowance,
            pass: diff.abs() <= 3.0 * se + allowance,
        });
    }
    Ok(SubordinatorRuinReport {
        pass: rows.iter().all(|r| r.pass),
        rows,
        failed_fraction: stationary.failed_fraction,
    })
}

/// Both sides of `P(τ(x) < ∞) E[H(-V_τ) | τ < ∞] = H(-x)` at one `x`, where
/// `H` is the law of `∫_0^∞ E(U)₋⁻¹ dη`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RuinIdentityRow {
    pub x: f64,
    pub hit_fraction: f64,
    pub lhs: BootstrapSummary,
    pub rhs: BootstrapSummary,
    /// Joint bootstrap of `lhs - rhs`.
    pub diff: BootstrapSummary,
    pub z: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RuinIdentityReport {
    pub rows: Vec<RuinIdentityRow>,
    /// Fraction of `H` paths whose truncation diagnostic failed.
    pub h_failed_fraction: f64,
    pub warnings: Vec<String>,
    pub pass: bool,
}

/// Settings for [`verify_ruin_identity`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RuinIdentityConfig<T> {
    pub truncation: Truncation<T>,
    /// Paths for the hitting side.
    pub n: usize,
    /// Paths for the sample of `H`.
    pub n_h: usize,
    pub replicates: usize,
    /// Critical value for `|diff| / se`.
    pub z: f64,
}

/// Estimates both sides of the ruin identity from independent samples. `H`
/// comes from the truncated noncausal functional; the identity is refused
/// when that sample is degenerate.
pub fn verify_ruin_identity<T: Real>(
    model: &LevyModel2<T>,
    xs: &[T],
    cfg: RuinIdentityConfig<T>,
    key: StreamKey,
) -> Result<RuinIdentityReport> {
    if !model.condition_b() {
        return Err(GouError::Hypothesis("the ruin identity needs ΔU > -1".into()));
    }
    if let Some(d) = model.detect_degeneracy(T::lit(1e-9)) {
        return Err(GouError::Hypothesis(format!(
            "the pair is degenerate with k = {}; the perpetuity law H is a point mass",
            d.k
        )));
    }
    let h_sample = stationary_sampler(model, Functional::Noncausal, cfg.n_h, cfg.truncation, key.fork("h"))?;
    let h = &h_sample.distribution;
    if h.is_degenerate(T::lit(1e-12) * h.max().abs().max(T::one())) {
        return Err(GouError::Hypothesis(
            "the perpetuity law H is a point mass; the identity assumes a non-degenerate limit".into(),
        ));
    }
    let mut warnings = Vec::new();
    if h.max_atom_mass() > 0.01 {
        warnings.push(format!(
            "the sample of H has an atom of mass {:.3}; the limit law is assumed atomless",
            h.max_atom_mass()
        ));
    }
    if h_sample.flagged {
        warnings.push(format!(
            "{:.1}% of H paths failed the truncation diagnostic",
            100.0 * h_sample.failed_fraction
        ));
    }
    // H(z) = P(∫ E⁻¹ dη <= z) = P(N >= -z) for the noncausal sample N.
    let neg: Vec<f64> = h.values().iter().map(|v| v.as_f64()).collect();
    let h_at = |sorted: &[f64], z: f64| -> f64 {
        let below = sorted.partition_point(|v| *v < -z);
        (sorted.len() - below) as f64 / sorted.len() as f64
    };
    let sampler = PathSampler::auto(model, cfg.truncation.horizon, cfg.truncation.grid_dt)?;
    let mut rows = Vec::with_capacity(xs.len());
    for (i, x) in xs.iter().enumerate() {
        let records: Vec<HittingRecord<T>> = (0..cfg.n as u64)
            .into_par_iter()
            .map(|j| first_passage(&sampler, *x, T::zero(), &mut key.fork("hit").fork_index(i as u64).path(j)))
            .collect::<Result<_>>()?;
        let overshoots: Vec<f64> = records
            .iter()
            .map(|r| r.overshoot.map_or(f64::NAN, |v| v.as_f64()))
            .collect();
        let n = overshoots.len();
        let lhs_of = |h: &[f64], idx: Option<&[usize]>| -> f64 {
            let total: f64 = match idx {
                None => overshoots.iter().filter(|v| !v.is_nan()).map(|v| h_at(h, -v)).sum(),
                Some(idx) => idx
                    .iter()
                    .map(|&j| overshoots[j])
                    .filter(|v| !v.is_nan())
                    .map(|v| h_at(h, -v))
                    .sum(),
            };
            total / n as f64
        };
        let xf = x.as_f64();
        let lhs0 = lhs_of(&neg, None);
        let rhs0 = h_at(&neg, -xf);
        let boot_key = key.fork("bootstrap").fork_index(i as u64);
        let draw = |rng: &mut crate::rng::PathRng| -> (f64, f64) {
            let hi: Vec<f64> = {
                let mut v: Vec<f64> = (0..neg.len()).map(|_| neg[rng.random_range(0..neg.len())]).collect();
                v.sort_by(|a, b| a.total_cmp(b));
                v
            };
            let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            (lhs_of(&hi, Some(&idx)), h_at(&hi, -xf))
        };
        let [lhs, rhs, diff] = bootstrap_joint([lhs0, rhs0, lhs0 - rhs0], cfg.replicates, boot_key, 0.95, |rng| {
            let (a, b) = draw(rng);
            [a, b, a - b]
        });
        let z = if diff.se > 0.0 {
            (lhs0 - rhs0) / diff.se
        } else if lhs0 == rhs0 {
            0.0
        } else {
            f64::INFINITY
        };
        let hit_fraction = overshoots.iter().filter(|v| !v.is_nan()).count() as f64 / n as f64;
        rows.push(RuinIdentityRow {
            x: xf,
            hit_fraction,
            lhs,
            rhs,
            diff,
            z,
            pass: z.abs() <= cfg.z,
        });
    }
    Ok(RuinIdentityReport {
        pass: rows.iter().all(|r| r.pass),
        rows,
        h_failed_fraction: h_sample.failed_fraction,
        warnings,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotonicityRow {
    pub x: f64,
    pub p: Proportion,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotonicityReport {
    pub t: f64,
    pub y: f64,
    pub rows: Vec<MonotonicityRow>,
    /// Paths on which `1{V_t^x >= y}` decreases somewhere along the sorted `xs`.
    pub coupled_violations: u64,
    /// Largest paired z-score of `P(V_t^{x_i} >= y) - P(V_t^{x_j} >= y)` over `x_i < x_j`.
    pub max_violation_z: f64,
    /// No decrease is significant at `z = 3.29`.
    pub monotone: bool,
}

/// Estimates `P(V_t^x >= y)` over `xs` with all `x` sharing each path.
pub fn monotonicity_probe<T: Real>(
    model: &LevyModel2<T>,
    t: T,
    y: T,
    xs: &[T],
    n: usize,
    grid_dt: T,
    key: StreamKey,
) -> Result<MonotonicityReport> {
    let mut xs = xs.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).expect("finite starts"));
    let sampler = PathSampler::auto(model, t, grid_dt)?;
    let indicators: Vec<Vec<bool>> = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let snap = flow_snapshots(&sampler, &[t], &[], &mut key.path(i))?;
            Ok(xs.iter().map(|x| snap[0].value(*x) >= y).collect())
        })
        .collect::<Result<_>>()?;
    let m = xs.len();
    let mut hits = vec![0u64; m];
    let mut violations = 0u64;
    // pair_counts[i][j]: paths with the indicator on at x_i and off at x_j, and the reverse.
    let mut down = vec![vec![0u64; m]; m];
    let mut up = vec![vec![0u64; m]; m];
    for ind in &indicators {
        for (i, b) in ind.iter().enumerate() {
            hits[i] += u64::from(*b);
        }
        if ind.windows(2).any(|w| w[0] && !w[1]) {
            violations += 1;
        }
        for i in 0..m {
            for j in i + 1..m {
                down[i][j] += u64::from(ind[i] && !ind[j]);
                up[i][j] += u64::from(!ind[i] && ind[j]);
            }
        }
    }
    let nf = n as f64;
    let mut max_z = f64::NEG_INFINITY;
    for i in 0..m {
        for j in i + 1..m {
            let (a, b) = (down[i][j] as f64 / nf, up[i][j] as f64 / nf);
            let mean = a - b;
            let var = (a + b - mean * mean).max(0.0);
            let z = if var > 0.0 {
                mean / (var / nf).sqrt()
            } else if mean > 0.0 {
                f64::INFINITY
            } else {
                0.0
            };
            max_z = max_z.max(z);
        }
    }
    if m < 2 {
        max_z = 0.0;
    }
    Ok(MonotonicityReport {
        t: t.as_f64(),
        y: y.as_f64(),
        rows: xs
            .iter()
            .zip(&hits)
            .map(|(x, h)| MonotonicityRow {
                x: x.as_f64(),
                p: Proportion::new(*h, n as u64),
            })
            .collect(),
        coupled_violations: violations,
        max_violation_z: max_z,
        monotone: max_z <= 3.29,
    })
}

/// One `(t, x, y)` probe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Probe {
    pub t: f64,
    pub x: f64,
    pub y: f64,
}

/// Probes on `ts × xs × ys`.
pub fn probe_grid(ts: &[f64], xs: &[f64], ys: &[f64]) -> Vec<Probe> {
    let mut out = Vec::new();
    for &t in ts {
        for &x in xs {
            for &y in ys {
                out.push(Probe { t, x, y });
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DualityRow {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub p_v: f64,
    pub se_v: f64,
    pub p_r: f64,
    pub se_r: f64,
    pub z: f64,
    pub pass: bool,
}

impl DualityRow {
    fn new(probe: &Probe, v: Proportion, r: Proportion, z_crit: f64) -> Self {
        let z = v.z_score(&r);
        Self {
            t: probe.t,
            x: probe.x,
            y: probe.y,
            p_v: v.p,
            se_v: v.se,
            p_r: r.p,
            se_r: r.se,
            z,
            pass: z.abs() <= z_crit,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualityReport {
    /// `P(V_t^x >= y)` against `P(R_t^y <= x)`.
    pub rows: Vec<DualityRow>,
    /// `P(V_t^x <= y)` against `P(R_t^y >= x)`.
    pub symmetric: Vec<DualityRow>,
    /// `P(V_t^x >= y)` against the absorbed dual, for `x, y >= 0` when `L`
    /// is a subordinator.
    pub killed: Option<Vec<DualityRow>>,
    pub pass: bool,
}

/// Settings for [`siegmund_duality_check`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualityConfig<T> {
    pub n: usize,
    pub grid_dt: T,
    pub z: f64,
}

fn snapshots_for<T: Real>(
    model: &LevyModel2<T>,
    ts: &[T],
    starts: &[T],
    n: usize,
    grid_dt: T,
    key: StreamKey,
) -> Result<Vec<Vec<crate::gou_process::FlowSnapshot<T>>>> {
    let horizon = *ts.last().expect("at least one time");
    let sampler = PathSampler::auto(model, horizon, grid_dt)?.with_marks(ts)?;
    (0..n as u64)
        .into_par_iter()
        .map(|i| flow_snapshots(&sampler, ts, starts, &mut key.path(i)))
        .collect()
}

/// Independent Monte Carlo estimates of both sides of the duality relation
/// at each probe; forward and dual paths never share randomness.
pub fn siegmund_duality_check<T: Real>(
    pair: &DualPair<T>,
    probes: &[Probe],
    cfg: DualityConfig<T>,
    key: StreamKey,
) -> Result<DualityReport> {
    if probes.is_empty() {
        return Err(GouError::InvalidArgument("no probes".into()));
    }
    if probes.iter().any(|p| !(p.t > 0.0)) {
        return Err(GouError::InvalidArgument("probe times must be positive".into()));
    }
    let mut ts: Vec<f64> = probes.iter().map(|p| p.t).collect();
    ts.sort_by(|a, b| a.total_cmp(b));
    ts.dedup();
    let mut ys: Vec<f64> = probes.iter().map(|p| p.y).collect();
    ys.sort_by(|a, b| a.total_cmp(b));
    ys.dedup();
    let tt: Vec<T> = ts.iter().map(|t| T::lit(*t)).collect();
    let yt: Vec<T> = ys.iter().map(|y| T::lit(*y)).collect();
    let fwd = snapshots_for(pair.forward(), &tt, &[], cfg.n, cfg.grid_dt, key.fork("forward"))?;
    let dual = snapshots_for(pair.dual(), &tt, &yt, cfg.n, cfg.grid_dt, key.fork("dual"))?;
    let killed_ok = pair.l_subordinator();
    let count = |snaps: &[Vec<crate::gou_process::FlowSnapshot<T>>], f: &dyn Fn(&crate::gou_process::FlowSnapshot<T>) -> bool, ti: usize| {
        Proportion::new(snaps.iter().filter(|s| f(&s[ti])).count() as u64, cfg.n as u64)
    };
    let mut rows = Vec::new();
    let mut symmetric = Vec::new();
    let mut killed = Vec::new();
    for p in probes {
        let ti = ts.iter().position(|t| *t == p.t).expect("time listed");
        let yi = ys.iter().position(|y| *y == p.y).expect("level listed");
        let (x, y) = (T::lit(p.x), T::lit(p.y));
        let v_ge = count(&fwd, &|s| s.value(x) >= y, ti);
        let r_le = count(&dual, &|s| s.value(y) <= x, ti);
        rows.push(DualityRow::new(p, v_ge, r_le, cfg.z));
        let v_le = count(&fwd, &|s| s.value(x) <= y, ti);
        let r_ge = count(&dual, &|s| s.value(y) >= x, ti);
        symmetric.push(DualityRow::new(p, v_le, r_ge, cfg.z));
        if killed_ok && p.x >= 0.0 && p.y >= 0.0 {
            let absorbed = count(&dual, &|s| s.running_min[yi] <= T::zero() || s.value(y) <= x, ti);
            killed.push(DualityRow::new(p, v_ge, absorbed, cfg.z));
        }
    }
    let pass = rows.iter().chain(&symmetric).chain(&killed).all(|r| r.pass);
    Ok(DualityReport {
        rows,
        symmetric,
        killed: killed_ok.then_some(killed),
        pass,
    })
}

/// Backend used for a model by the samplers above.
pub fn backend_for<T: Real>(model: &LevyModel2<T>, grid_dt: T) -> Backend<T> {
    if model.has_gaussian() {
        Backend::Euler { grid_dt }
    } else {
        Backend::Exact
    }
}

/// Empirical law of the stationary causal sample of `V` against the
/// noncausal sample of `R`, both at horizon `T`.
pub fn stationary_transfer<T: Real>(
    pair: &DualPair<T>,
    n: usize,
    truncation: Truncation<T>,
    key: StreamKey,
) -> Result<(EmpiricalDistribution<T>, EmpiricalDistribution<T>)> {
    let v = stationary_sampler(pair.forward(), Functional::Causal, n, truncation, key.fork("causal"))?;
    let r = stationary_sampler(pair.dual(), Functional::Noncausal, n, truncation, key.fork("noncausal"))?;
    Ok((v.distribution, r.distribution))
}
