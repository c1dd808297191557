//! The inverse stochastic flow: `R` driven by `(T, η̃)` built from the
//! time-reversed path, and pathwise checks against the forward flow.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{GouError, Result};
use crate::gou_process::{explicit_solution, flow_snapshots, solve_forward, GouTrajectory};
use crate::levy_model::LevyModel2;
use crate::path_engine::{
    eta_path, eta_tilde_path, inverse_flow_driver, t_path, Event, PairPath, PathSampler, ScalarPath,
};
use crate::rng::StreamKey;
use crate::scalar::{mixed_error, Real};
use crate::stats::{ks_two_sample, EmpiricalDistribution, KsResult};
use crate::stochastic_calculus::stochastic_exponential;

/// `R^y` on `[0, t]` with the paths it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct InverseFlow<T> {
    /// `(Ũ, L̃)`, the forward path reversed at `t`.
    pub reversed: PairPath<T>,
    /// `(T, η̃)`.
    pub driver: PairPath<T>,
    pub trajectory: GouTrajectory<T>,
    /// Largest mixed error of `ΔR = R₋ ΔT + Δη̃` over the jumps.
    pub sde_residual: T,
    /// Largest difference between `η̃` from the formula and the reversed `η`.
    pub eta_discrepancy: T,
}

fn max_abs_diff<T: Real>(a: &ScalarPath<T>, b: &ScalarPath<T>) -> Result<T> {
    a.aligned_with(b)?;
    Ok(a.events()
        .iter()
        .zip(b.events())
        .fold(T::zero(), |m, (x, y)| m.max((x.dx()[0] - y.dx()[0]).abs())))
}

/// `R_s = E(T)_s (y + ∫_(0,s] E(T)_{u-}⁻¹ dL̃_u)` for the path reversed at `t`.
/// A jump of the forward path exactly at `t` is dropped first. The model
/// supplies `σ_U²`.
pub fn inverse_flow_solve<T: Real>(path: &PairPath<T>, model: &LevyModel2<T>, t: T, y: T) -> Result<InverseFlow<T>> {
    let mut reversed = path.reversed_at(&t)?;
    let mut cov = *reversed.cov();
    cov[0][0] = model.cov().uu;
    cov[0][1] = model.cov().ul;
    cov[1][0] = model.cov().ul;
    reversed = PairPath::new(*reversed.horizon(), reversed.events().to_vec(), cov, *reversed.backend())?;
    let t_u = t_path(&reversed.component(0), &model.cov().uu)?;
    let trajectory = explicit_solution(stochastic_exponential(&t_u)?, &reversed.component(1), y)?;
    let driver = inverse_flow_driver(&reversed)?;
    let sde_residual = trajectory.jump_residual(&driver)?;
    let from_formula = eta_tilde_path(&reversed)?;
    let from_reversal = eta_path(path)?.reversed_at(&t)?;
    let eta_discrepancy = max_abs_diff(&from_formula, &from_reversal)?;
    Ok(InverseFlow {
        reversed,
        driver,
        trajectory,
        sde_residual,
        eta_discrepancy,
    })
}

/// Largest mixed error of `V_{(t-s)-}^x = E(T)_s (V_t^x + ∫ E(T)₋⁻¹ dL̃)` over
/// all knots `s` of the reversed path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IdentityCheck<T> {
    pub max_error: T,
    pub knots: usize,
}

pub fn verify_pathwise_identity<T: Real>(
    path: &PairPath<T>,
    model: &LevyModel2<T>,
    x: T,
    t: T,
) -> Result<IdentityCheck<T>> {
    let forward = solve_forward(&path.truncate_open(&t)?, x)?;
    let inverse = inverse_flow_solve(path, model, t, forward.terminal())?;
    let v = forward.values().values();
    let r = inverse.trajectory.values().values();
    if v.len() != r.len() {
        return Err(GouError::Misaligned("forward and reversed knots differ".into()));
    }
    // Reversed knot j is V at forward knot n - j: after a reversed jump this
    // is the forward value just before the original jump.
    let n = v.len() - 1;
    let max_error = (0..=n).fold(T::zero(), |m, j| m.max(mixed_error(r[j], v[n - j])));
    Ok(IdentityCheck { max_error, knots: n + 1 })
}

/// The affine map `φ_{u,t}: V_u ↦ V_t` of one path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FlowMap<T> {
    pub from: T,
    pub to: T,
    pub slope: T,
    pub intercept: T,
}

impl<T: Real> FlowMap<T> {
    /// Reads `φ_{u,t}` off a trajectory started at `0`, whose values are the
    /// intercepts `φ_{0,s}(0)` and whose exponential holds the slopes. `u` and
    /// `t` should be knot times (see [`PairPath::with_knot_at`]).
    pub fn from_trajectory(traj: &GouTrajectory<T>, u: T, t: T) -> Result<Self> {
        if traj.start() != T::zero() {
            return Err(GouError::InvalidArgument("flow maps are read from V^0".into()));
        }
        if !(u <= t) {
            return Err(GouError::InvalidArgument(format!("interval [{u}, {t}] is empty")));
        }
        let (eu, et) = (*traj.stoch_exp().value_at(&u), *traj.stoch_exp().value_at(&t));
        let (bu, bt) = (*traj.values().value_at(&u), *traj.values().value_at(&t));
        let slope = et / eu;
        Ok(Self {
            from: u,
            to: t,
            slope,
            intercept: bt - slope * bu,
        })
    }

    pub fn apply(&self, x: T) -> T {
        self.slope * x + self.intercept
    }

    pub fn inverse(&self, y: T) -> Result<T> {
        if self.slope == T::zero() {
            return Err(GouError::InvalidArgument("flow map has zero slope".into()));
        }
        Ok((y - self.intercept) / self.slope)
    }

    /// `next ∘ self`, defined when `self.to == next.from`.
    pub fn then(&self, next: &FlowMap<T>) -> Result<Self> {
        if self.to != next.from {
            return Err(GouError::InvalidArgument("flow maps do not chain".into()));
        }
        Ok(Self {
            from: self.from,
            to: next.to,
            slope: next.slope * self.slope,
            intercept: next.slope * self.intercept + next.intercept,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FlowInverseCheck<T> {
    pub map: FlowMap<T>,
    /// `φ_{u,t}⁻¹(y)`.
    pub inverted: T,
    /// `R^y_{(t-u)-}` from the inverse flow.
    pub inverse_flow: T,
    pub error: T,
}

/// Compares `φ_{u,t}⁻¹(y)` with the left limit of the inverse flow at `t - u`.
pub fn flow_inverse_check<T: Real>(
    path: &PairPath<T>,
    model: &LevyModel2<T>,
    u: T,
    t: T,
    y: T,
) -> Result<FlowInverseCheck<T>> {
    let path = &path.with_knot_at(&u)?;
    let base = solve_forward(&path.truncate_open(&t)?, T::zero())?;
    let map = FlowMap::from_trajectory(&base, u, t)?;
    let inverted = map.inverse(y)?;
    let s = t - u;
    let r = inverse_flow_solve(path, model, t, y)?;
    let inverse_flow = if s == T::zero() {
        y
    } else {
        *r.trajectory.values().left_limit_at(&s)
    };
    Ok(FlowInverseCheck {
        map,
        inverted,
        inverse_flow,
        error: mixed_error(inverted, inverse_flow),
    })
}

/// Number of probes `(x, y)` on which `1{V_t^x >= y}` and `1{R_t^y <= x}`
/// differ for the inverse flow on the same path. Probes within `tie` of
/// equality are skipped.
pub fn strong_duality_mismatches<T: Real>(
    path: &PairPath<T>,
    model: &LevyModel2<T>,
    t: T,
    xs: &[T],
    ys: &[T],
    tie: T,
) -> Result<usize> {
    let base = solve_forward(&path.truncate_open(&t)?, T::zero())?;
    let slope = *base.stoch_exp().last();
    let intercept = base.terminal();
    let mut bad = 0;
    for y in ys {
        let r = *inverse_flow_solve(path, model, t, *y)?.trajectory.values().last();
        for x in xs {
            let v = slope * *x + intercept;
            if (v - *y).abs() <= tie {
                continue;
            }
            if (v >= *y) != (r <= *x) {
                bad += 1;
            }
        }
    }
    Ok(bad)
}

/// Two-sample tests of `(T_t, η̃_t)` against `(W_t, K_t)` and of the inverse
/// flow `R_t^y` against the dual `R_t^y` from independent dual paths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LawCheck {
    pub t_vs_w: KsResult,
    pub eta_tilde_vs_k: KsResult,
    pub inverse_vs_dual: KsResult,
}

pub fn inverse_flow_law_check<T: Real>(
    model: &LevyModel2<T>,
    t: T,
    y: T,
    n: usize,
    grid_dt: T,
    key: StreamKey,
) -> Result<LawCheck> {
    let dual = model.dual()?;
    let forward = PathSampler::auto(model, t, grid_dt)?;
    let reversed_side: Vec<[T; 3]> = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let p = forward.sample(&mut key.fork("forward").path(i));
            let inv = inverse_flow_solve(&p, model, t, y)?;
            let d = inv.driver.terminal();
            Ok([d[0], d[1], inv.trajectory.terminal()])
        })
        .collect::<Result<_>>()?;
    let dual_sampler = PathSampler::auto(&dual, t, grid_dt)?;
    let dual_side: Vec<[T; 3]> = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = key.fork("dual").path(i);
            let p = dual_sampler.sample(&mut rng);
            let wk = p.terminal();
            let snap = flow_snapshots(&dual_sampler, &[t], &[], &mut key.fork("dual").path(i))?;
            Ok([wk[0], wk[1], snap[0].value(y)])
        })
        .collect::<Result<_>>()?;
    let ks = |k: usize| -> Result<KsResult> {
        let a = EmpiricalDistribution::from_values(reversed_side.iter().map(|v| v[k]).collect())?;
        let b = EmpiricalDistribution::from_values(dual_side.iter().map(|v| v[k]).collect())?;
        Ok(ks_two_sample(&a, &b))
    };
    Ok(LawCheck {
        t_vs_w: ks(0)?,
        eta_tilde_vs_k: ks(1)?,
        inverse_vs_dual: ks(2)?,
    })
}

/// Whether an event list has a jump at exactly `t`.
pub fn jumps_at<T: Real>(path: &PairPath<T>, t: T) -> bool {
    path.events()
        .iter()
        .any(|e| matches!(e, Event::Jump { time, .. } if *time == t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jump_law::JumpLaw2;
    use crate::levy_model::GaussianCov;
    use crate::path_engine::Backend;

    fn model_a() -> LevyModel2<f64> {
        LevyModel2::new(
            [0.4, -0.3],
            GaussianCov::zero(),
            3.0,
            JumpLaw2::point_mass(vec![(0.5, 1.0, 0.3), (-0.6, -0.4, 0.3), (-2.0, 0.7, 0.2), (1.5, 0.0, 0.2)]),
        )
        .unwrap()
    }

    #[test]
    fn zero_model_keeps_y() {
        let m = LevyModel2::<f64>::zero();
        let p = PathSampler::new(&m, 1.0, Backend::Exact).unwrap().sample(&mut StreamKey::new(1).path(0));
        let r = inverse_flow_solve(&p, &m, 1.0, 0.3).unwrap();
        assert!(r.trajectory.values().values().iter().all(|v| *v == 0.3));
    }

    #[test]
    fn deterministic_ode_runs_backward() {
        // dV = -V dt + c dt; the inverse flow solves dR = R ds - c ds.
        let (lam, c, t, y) = (0.7, 0.4, 2.0, 1.3);
        let m = LevyModel2::<f64>::drift_only(-lam, c);
        let p = PathSampler::new(&m, t, Backend::Exact).unwrap().sample(&mut StreamKey::new(1).path(0));
        let r = inverse_flow_solve(&p, &m, t, y).unwrap();
        let s = t;
        let expected = (y - c / lam) * (lam * s).exp() + c / lam;
        assert!(mixed_error(r.trajectory.terminal(), expected) < 1e-13);
        let check = verify_pathwise_identity(&p, &m, 0.2, t).unwrap();
        assert!(check.max_error < 1e-14);
    }

    #[test]
    fn pathwise_identity_on_jump_paths() {
        let m = model_a();
        let sampler = PathSampler::new(&m, 3.0, Backend::Exact).unwrap();
        for i in 0..100 {
            let p = sampler.sample(&mut StreamKey::new(2).path(i));
            for (x, t) in [(0.5, 3.0), (-1.0, 1.7)] {
                let c = verify_pathwise_identity(&p, &m, x, t).unwrap();
                assert!(c.max_error < 1e-9, "{}", c.max_error);
            }
            let inv = inverse_flow_solve(&p, &m, 3.0, 0.4).unwrap();
            assert!(inv.eta_discrepancy < 1e-12);
            assert!(inv.sde_residual < 1e-10);
        }
    }

    #[test]
    fn flow_maps_invert_and_compose() {
        let m = model_a();
        let p = PathSampler::new(&m, 3.0, Backend::Exact).unwrap().sample(&mut StreamKey::new(7).path(0));
        let id = flow_inverse_check(&p, &m, 3.0, 3.0, 0.8).unwrap();
        assert_eq!(id.inverse_flow, 0.8);
        assert!(id.error < 1e-12);
        for u in [0.0, 0.5, 1.3, 2.9] {
            let c = flow_inverse_check(&p, &m, u, 3.0, 0.8).unwrap();
            assert!(c.error < 1e-9, "u = {u}: {}", c.error);
        }
        let base = solve_forward(&p.with_knot_at(&1.1).unwrap().with_knot_at(&2.5).unwrap(), 0.0).unwrap();
        let a = FlowMap::from_trajectory(&base, 0.0, 1.1).unwrap();
        let b = FlowMap::from_trajectory(&base, 1.1, 2.5).unwrap();
        let ab = a.then(&b).unwrap();
        let direct = FlowMap::from_trajectory(&base, 0.0, 2.5).unwrap();
        assert!(mixed_error(ab.slope, direct.slope) < 1e-10);
        assert!(mixed_error(ab.intercept, direct.intercept) < 1e-10);
        assert!(b.then(&a).is_err());
    }

    #[test]
    fn strong_duality_on_shared_paths() {
        let m = LevyModel2::<f64>::new(
            [-0.5, 0.3],
            GaussianCov::zero(),
            2.0,
            JumpLaw2::point_mass(vec![(0.5, 1.0, 0.4), (-0.6, -0.4, 0.6)]),
        )
        .unwrap();
        let sampler = PathSampler::new(&m, 2.0, Backend::Exact).unwrap();
        let grid = [-1.0, -0.3, 0.0, 0.4, 1.0];
        for i in 0..50 {
            let p = sampler.sample(&mut StreamKey::new(3).path(i));
            assert_eq!(strong_duality_mismatches(&p, &m, 2.0, &grid, &grid, 1e-9).unwrap(), 0);
        }
    }
}
