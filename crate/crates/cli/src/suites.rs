//! Verification suites run by the CLI, each producing a CSV table and a set
//! of summary metrics.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use gou_core::duality::{
    monotonicity_probe, probe_grid, siegmund_duality_check, stationary_transfer, subordinator_ruin_check,
    verify_ruin_identity, DualPair, DualityConfig, RuinIdentityConfig,
};
use gou_core::gou_process::Truncation;
use gou_core::inverse_flow::verify_pathwise_identity;
use gou_core::path_engine::{Backend, PathSampler};
use gou_core::stats::ks_two_sample;
use gou_core::{GouError, Model, StreamKey};

use crate::config::{ExperimentConfig, ResolvedModel, Suite};

/// Two-sided critical value shared by the Monte Carlo comparisons.
pub const Z_CRIT: f64 = 3.29;

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Table {
    pub headers: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(headers: &[&'static str]) -> Self {
        Self {
            headers: headers.to_vec(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteOutcome {
    pub pass: bool,
    pub metrics: BTreeMap<String, Value>,
    #[serde(skip)]
    pub table: Table,
}

#[derive(Debug)]
pub enum SuiteError {
    /// A hypothesis of the suite does not hold for the model.
    Refused(String),
    Failed(GouError),
}

impl From<GouError> for SuiteError {
    fn from(e: GouError) -> Self {
        match e {
            GouError::ConditionB(_) | GouError::JumpAtMinusOne { .. } | GouError::Hypothesis(_) => {
                SuiteError::Refused(e.to_string())
            }
            other => SuiteError::Failed(other),
        }
    }
}

type SuiteResult = Result<SuiteOutcome, SuiteError>;

fn num(x: f64) -> String {
    format!("{x}")
}

fn require_b(model: &Model, suite: Suite) -> Result<(), SuiteError> {
    if model.condition_b() {
        Ok(())
    } else {
        Err(SuiteError::Refused(format!(
            "the {suite} suite needs every jump of U strictly above -1 (condition (B)); this model has jumps with ΔU <= -1"
        )))
    }
}

fn require_a(model: &Model) -> Result<(), SuiteError> {
    let at_minus_one = model
        .jump_law()
        .atoms()
        .is_some_and(|atoms| atoms.iter().any(|a| a.du == -1.0 && a.p > 0.0));
    if *model.jump_intensity() > 0.0 && at_minus_one {
        return Err(SuiteError::Refused(
            "the inverse-flow suite needs ΔU != -1 almost surely (condition (A)); the jump law has an atom at ΔU = -1"
                .into(),
        ));
    }
    Ok(())
}

pub fn run_suite(suite: Suite, m: &ResolvedModel, cfg: &ExperimentConfig, key: StreamKey) -> SuiteResult {
    match suite {
        Suite::Duality => duality(m, cfg, key),
        Suite::InverseFlow => inverse_flow(m, cfg, key),
        Suite::Ruin => ruin(m, cfg, key),
        Suite::Stationary => stationary(m, cfg, key),
        Suite::Monotonicity => monotonicity(m, cfg, key),
        Suite::All => unreachable!("`all` is expanded before dispatch"),
    }
}

fn duality(m: &ResolvedModel, cfg: &ExperimentConfig, key: StreamKey) -> SuiteResult {
    require_b(&m.model, Suite::Duality)?;
    let pair = DualPair::new(m.model.clone())?;
    let p = &cfg.probes;
    let probes = probe_grid(&p.ts, &p.xs, &p.ys);
    let dcfg = DualityConfig {
        n: cfg.n_paths,
        grid_dt: cfg.grid_dt,
        z: Z_CRIT,
    };
    let report = siegmund_duality_check(&pair, &probes, dcfg, key)?;
    let mut table = Table::new(&["t", "x", "y", "p_V", "se_V", "p_R", "se_R", "z", "pass"]);
    for r in &report.rows {
        table.push(vec![
            num(r.t),
            num(r.x),
            num(r.y),
            num(r.p_v),
            num(r.se_v),
            num(r.p_r),
            num(r.se_r),
            num(r.z),
            r.pass.to_string(),
        ]);
    }
    let max_z = |rows: &[gou_core::duality::DualityRow]| rows.iter().fold(0.0f64, |a, r| a.max(r.z.abs()));
    let mut metrics = BTreeMap::new();
    metrics.insert("probes".into(), json!(report.rows.len()));
    metrics.insert("max_abs_z".into(), json!(max_z(&report.rows)));
    metrics.insert("max_abs_z_symmetric".into(), json!(max_z(&report.symmetric)));
    if let Some(killed) = &report.killed {
        metrics.insert("max_abs_z_absorbed".into(), json!(max_z(killed)));
    }
    metrics.insert("z_crit".into(), json!(Z_CRIT));
    Ok(SuiteOutcome {
        pass: report.pass,
        metrics,
        table,
    })
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 { v[k / 2] } else { 0.5 * (v[k / 2 - 1] + v[k / 2]) }
}

/// Per-path maxima of the pathwise identity error over the `(t, x)` probes,
/// with the overall maximum for each probe.
fn identity_errors(
    model: &Model,
    backend: Backend<f64>,
    ts: &[f64],
    xs: &[f64],
    n: usize,
    key: StreamKey,
) -> Result<(Vec<f64>, Vec<f64>), SuiteError> {
    let horizon = ts.iter().copied().fold(0.0, f64::max);
    let sampler = PathSampler::new(model, horizon, backend)?.with_marks(ts)?;
    let per_path: Vec<Vec<f64>> = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let path = sampler.sample(&mut key.path(i));
            let mut errs = Vec::with_capacity(ts.len() * xs.len());
            for t in ts {
                for x in xs {
                    errs.push(verify_pathwise_identity(&path, model, *x, *t)?.max_error);
                }
            }
            Ok(errs)
        })
        .collect::<gou_core::Result<_>>()?;
    let probes = ts.len() * xs.len();
    let per_probe = (0..probes)
        .map(|j| per_path.iter().fold(0.0f64, |a, e| a.max(e[j])))
        .collect();
    let per_path_max = per_path.iter().map(|e| e.iter().copied().fold(0.0, f64::max)).collect();
    Ok((per_path_max, per_probe))
}

/// Exact paths must satisfy the identity to `1e-9`. On Euler paths the
/// identity holds only in the limit, so the median error must drop when the
/// step is halved.
pub const EXACT_IDENTITY_TOL: f64 = 1e-9;

fn inverse_flow(m: &ResolvedModel, cfg: &ExperimentConfig, key: StreamKey) -> SuiteResult {
    require_a(&m.model)?;
    let p = &cfg.probes;
    let mut table = Table::new(&["seed", "t", "x", "max_error", "backend", "grid_dt"]);
    let mut metrics = BTreeMap::new();
    let push_rows = |table: &mut Table, per_probe: &[f64], backend: &str, dt: Option<f64>| {
        let mut j = 0;
        for t in &p.ts {
            for x in &p.xs {
                table.push(vec![
                    cfg.seed.to_string(),
                    num(*t),
                    num(*x),
                    num(per_probe[j]),
                    backend.to_string(),
                    dt.map(num).unwrap_or_default(),
                ]);
                j += 1;
            }
        }
    };
    let pass = if m.model.has_gaussian() {
        let fine = Backend::Euler { grid_dt: cfg.grid_dt };
        let coarse = Backend::Euler {
            grid_dt: 2.0 * cfg.grid_dt,
        };
        let (fine_paths, fine_probe) = identity_errors(&m.model, fine, &p.ts, &p.xs, cfg.n_paths, key.fork("fine"))?;
        let (coarse_paths, coarse_probe) =
            identity_errors(&m.model, coarse, &p.ts, &p.xs, cfg.n_paths, key.fork("coarse"))?;
        push_rows(&mut table, &coarse_probe, "euler", Some(2.0 * cfg.grid_dt));
        push_rows(&mut table, &fine_probe, "euler", Some(cfg.grid_dt));
        let (mf, mc) = (median(fine_paths), median(coarse_paths));
        metrics.insert("median_error".into(), json!(mf));
        metrics.insert("median_error_coarse".into(), json!(mc));
        metrics.insert("max_error".into(), json!(fine_probe.iter().copied().fold(0.0, f64::max)));
        mf.is_finite() && mf < mc
    } else {
        let (paths, per_probe) = identity_errors(&m.model, Backend::Exact, &p.ts, &p.xs, cfg.n_paths, key)?;
        push_rows(&mut table, &per_probe, "exact", None);
        let max = paths.iter().copied().fold(0.0, f64::max);
        metrics.insert("max_error".into(), json!(max));
        metrics.insert("median_error".into(), json!(median(paths)));
        metrics.insert("tolerance".into(), json!(EXACT_IDENTITY_TOL));
        max <= EXACT_IDENTITY_TOL
    };
    Ok(SuiteOutcome { pass, metrics, table })
}

/// Truncation allowance of the subordinator ruin comparison.
pub const RUIN_ALLOWANCE: f64 = 0.005;

fn ruin(m: &ResolvedModel, cfg: &ExperimentConfig, key: StreamKey) -> SuiteResult {
    require_b(&m.model, Suite::Ruin)?;
    let truncation = Truncation::new(cfg.horizon, cfg.grid_dt);
    let mut metrics = BTreeMap::new();
    if m.model.l_is_subordinator() {
        let pair = DualPair::new(m.model.clone())?;
        let report = subordinator_ruin_check(&pair, &cfg.probes.levels, cfg.n_paths, truncation, RUIN_ALLOWANCE, key)?;
        if report.failed_fraction > truncation.max_failed {
            return Err(SuiteError::Refused(format!(
                "no stationary regime: {:.1}% of paths keep |E(U)_T| above {:e} at T = {}",
                100.0 * report.failed_fraction,
                truncation.threshold,
                cfg.horizon
            )));
        }
        let mut table = Table::new(&["y", "p_ruin", "se_ruin", "p_tail", "se_tail", "diff", "bound", "pass"]);
        for r in &report.rows {
            table.push(vec![
                num(r.level),
                num(r.ruin.p),
                num(r.ruin.se),
                num(r.tail.p),
                num(r.tail.se),
                num(r.diff),
                num(3.0 * r.se + r.allowance),
                r.pass.to_string(),
            ]);
        }
        metrics.insert("form".into(), json!("subordinator"));
        metrics.insert("failed_fraction".into(), json!(report.failed_fraction));
        metrics.insert(
            "max_abs_diff".into(),
            json!(report.rows.iter().fold(0.0f64, |a, r| a.max(r.diff.abs()))),
        );
        Ok(SuiteOutcome {
            pass: report.pass,
            metrics,
            table,
        })
    } else {
        let xs: Vec<f64> = cfg.probes.levels.iter().copied().filter(|x| *x > 0.0).collect();
        let rcfg = RuinIdentityConfig {
            truncation,
            n: cfg.n_paths,
            n_h: cfg.n_paths,
            replicates: 200,
            z: Z_CRIT,
        };
        let report = verify_ruin_identity(&m.model, &xs, rcfg, key)?;
        if report.h_failed_fraction > truncation.max_failed {
            return Err(SuiteError::Refused(format!(
                "E(U)^-1 does not vanish: {:.1}% of paths keep it above {:e} at T = {}",
                100.0 * report.h_failed_fraction,
                truncation.threshold,
                cfg.horizon
            )));
        }
        let mut table = Table::new(&["x", "hit_fraction", "lhs", "se_lhs", "rhs", "se_rhs", "diff", "z", "pass"]);
        for r in &report.rows {
            table.push(vec![
                num(r.x),
                num(r.hit_fraction),
                num(r.lhs.estimate),
                num(r.lhs.se),
                num(r.rhs.estimate),
                num(r.rhs.se),
                num(r.diff.estimate),
                num(r.z),
                r.pass.to_string(),
            ]);
        }
        metrics.insert("form".into(), json!("identity"));
        metrics.insert("failed_fraction".into(), json!(report.h_failed_fraction));
        metrics.insert("max_abs_z".into(), json!(report.rows.iter().fold(0.0f64, |a, r| a.max(r.z.abs()))));
        metrics.insert("warnings".into(), json!(report.warnings));
        Ok(SuiteOutcome {
            pass: report.pass,
            metrics,
            table,
        })
    }
}

/// Significance level of the stationary two-sample test.
pub const KS_ALPHA: f64 = 1e-3;

fn stationary(m: &ResolvedModel, cfg: &ExperimentConfig, key: StreamKey) -> SuiteResult {
    require_b(&m.model, Suite::Stationary)?;
    let pair = DualPair::new(m.model.clone())?;
    let truncation = Truncation::new(cfg.horizon, cfg.grid_dt);
    let (v, r) = stationary_transfer(&pair, cfg.n_paths, truncation, key)?;
    let failed = v.meta().failed_fraction.max(r.meta().failed_fraction);
    if failed > truncation.max_failed {
        return Err(SuiteError::Refused(format!(
            "no stationary regime: {:.1}% of paths fail the truncation diagnostic at T = {}",
            100.0 * failed,
            cfg.horizon
        )));
    }
    let ks = ks_two_sample(&v, &r);
    let mut table = Table::new(&["q", "v_quantile", "r_quantile"]);
    for i in 1..100 {
        let q = i as f64 / 100.0;
        table.push(vec![num(q), num(v.quantile(q)), num(r.quantile(q))]);
    }
    let mut metrics = BTreeMap::new();
    metrics.insert("ks_statistic".into(), json!(ks.statistic));
    metrics.insert("ks_p_value".into(), json!(ks.p_value));
    metrics.insert("alpha".into(), json!(KS_ALPHA));
    metrics.insert("failed_fraction_v".into(), json!(v.meta().failed_fraction));
    metrics.insert("failed_fraction_r".into(), json!(r.meta().failed_fraction));
    metrics.insert("mean_v".into(), json!(v.mean()));
    metrics.insert("mean_r".into(), json!(r.mean()));
    Ok(SuiteOutcome {
        pass: !ks.rejects(KS_ALPHA),
        metrics,
        table,
    })
}

/// Under condition (B) no path may break monotonicity in the start point.
/// Without it the suite only reports what it finds.
fn monotonicity(m: &ResolvedModel, cfg: &ExperimentConfig, key: StreamKey) -> SuiteResult {
    let p = &cfg.probes;
    let mut table = Table::new(&["t", "y", "x", "p", "se"]);
    let (mut violations, mut max_z) = (0u64, 0.0f64);
    for (i, t) in p.ts.iter().enumerate() {
        for (j, y) in p.ys.iter().enumerate() {
            let k = key.fork_index((i * p.ys.len() + j) as u64);
            let report = monotonicity_probe(&m.model, *t, *y, &p.xs, cfg.n_paths, cfg.grid_dt, k)?;
            violations += report.coupled_violations;
            max_z = max_z.max(report.max_violation_z);
            for row in &report.rows {
                table.push(vec![num(*t), num(*y), num(row.x), num(row.p.p), num(row.p.se)]);
            }
        }
    }
    let condition_b = m.model.condition_b();
    let mut metrics = BTreeMap::new();
    metrics.insert("condition_b".into(), json!(condition_b));
    metrics.insert("coupled_violations".into(), json!(violations));
    metrics.insert("max_violation_z".into(), json!(max_z));
    Ok(SuiteOutcome {
        pass: !condition_b || violations == 0,
        metrics,
        table,
    })
}
