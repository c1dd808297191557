//! Empirical distributions, Kolmogorov–Smirnov tests and binomial intervals.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{Beta, ContinuousCDF, Normal};

use crate::error::{GouError, Result};
use crate::rng::{PathRng, StreamKey};
use crate::scalar::Real;

/// Where a sample came from.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SampleMeta {
    pub seed: Option<u64>,
    pub horizon: Option<f64>,
    /// Fraction of paths whose truncation diagnostic exceeded its threshold.
    pub failed_fraction: f64,
}

/// Sorted sample with right-continuous CDF.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalDistribution<T> {
    values: Vec<T>,
    meta: SampleMeta,
}

fn sort_real<T: Real>(v: &mut [T]) {
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
}

impl<T: Real> EmpiricalDistribution<T> {
    pub fn from_values(mut values: Vec<T>) -> Result<Self> {
        if values.is_empty() {
            return Err(GouError::EmptySample);
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(GouError::NonFinite(format!("sample value {v}")));
        }
        sort_real(&mut values);
        Ok(Self {
            values,
            meta: SampleMeta::default(),
        })
    }

    pub fn with_meta(mut self, meta: SampleMeta) -> Self {
        self.meta = meta;
        self
    }

    pub fn meta(&self) -> &SampleMeta {
        &self.meta
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// `#{v <= x} / n`.
    pub fn cdf(&self, x: T) -> f64 {
        self.values.partition_point(|v| *v <= x) as f64 / self.len() as f64
    }

    /// `#{v < x} / n`.
    pub fn cdf_left(&self, x: T) -> f64 {
        self.values.partition_point(|v| *v < x) as f64 / self.len() as f64
    }

    /// `#{v >= x} / n`.
    pub fn survival_ge(&self, x: T) -> f64 {
        1.0 - self.cdf_left(x)
    }

    /// Smallest sample value `v` with `cdf(v) >= p`.
    pub fn quantile(&self, p: f64) -> T {
        let n = self.len();
        let k = ((p.clamp(0.0, 1.0) * n as f64).ceil() as usize).clamp(1, n);
        self.values[k - 1]
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().map(|v| v.as_f64()).sum::<f64>() / self.len() as f64
    }

    pub fn min(&self) -> T {
        self.values[0]
    }

    pub fn max(&self) -> T {
        self.values[self.len() - 1]
    }

    /// Largest relative frequency of a single value.
    pub fn max_atom_mass(&self) -> f64 {
        let mut best = 0usize;
        let mut run = 0usize;
        for (i, v) in self.values.iter().enumerate() {
            run = if i > 0 && self.values[i - 1] == *v { run + 1 } else { 1 };
            best = best.max(run);
        }
        best as f64 / self.len() as f64
    }

    /// Whether all values lie within `tol` of each other.
    pub fn is_degenerate(&self, tol: T) -> bool {
        self.max() - self.min() <= tol
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    pub n: usize,
    /// Second sample size; `None` for a one-sample test.
    pub m: Option<usize>,
}

impl KsResult {
    pub fn rejects(&self, alpha: f64) -> bool {
        self.p_value < alpha
    }
}

/// `P(K > λ)` for the Kolmogorov distribution.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += sign * term;
        if term < 1e-16 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Two-sample statistic `sup |F_a - F_b|` by a merge scan over both sorted samples.
pub fn ks_two_sample<T: Real>(a: &EmpiricalDistribution<T>, b: &EmpiricalDistribution<T>) -> KsResult {
    let (x, y) = (a.values(), b.values());
    let (n, m) = (x.len(), y.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < n && j < m {
        let t = if x[i] <= y[j] { x[i] } else { y[j] };
        while i < n && x[i] == t {
            i += 1;
        }
        while j < m && y[j] == t {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let ne = (n * m) as f64 / (n + m) as f64;
    KsResult {
        statistic: d,
        p_value: kolmogorov_survival(ne.sqrt() * d),
        n,
        m: Some(m),
    }
}

/// One-sample statistic against a continuous CDF.
pub fn ks_one_sample<T: Real>(a: &EmpiricalDistribution<T>, cdf: impl Fn(f64) -> f64) -> KsResult {
    let n = a.len();
    let mut d = 0.0f64;
    for (i, v) in a.values().iter().enumerate() {
        let f = cdf(v.as_f64());
        d = d.max(f - i as f64 / n as f64).max((i + 1) as f64 / n as f64 - f);
    }
    KsResult {
        statistic: d,
        p_value: kolmogorov_survival((n as f64).sqrt() * d),
        n,
        m: None,
    }
}

/// Asymptotic two-sample critical value at level `alpha`.
pub fn ks_critical_value(alpha: f64, n: usize, m: usize) -> f64 {
    (-(alpha / 2.0).ln() / 2.0).sqrt() * ((n + m) as f64 / (n * m) as f64).sqrt()
}

fn check_counts(hits: u64, n: u64, level: f64) -> Result<()> {
    if n == 0 || hits > n {
        return Err(GouError::InvalidArgument(format!("{hits} hits out of {n}")));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(GouError::InvalidArgument(format!("confidence level {level}")));
    }
    Ok(())
}

fn normal_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

/// Wilson score interval.
pub fn binomial_ci(hits: u64, n: u64, level: f64) -> Result<(f64, f64)> {
    check_counts(hits, n, level)?;
    let z = normal_quantile(0.5 + level / 2.0);
    let nf = n as f64;
    let p = hits as f64 / nf;
    let z2n = z * z / nf;
    let centre = (p + z2n / 2.0) / (1.0 + z2n);
    let half = z / (1.0 + z2n) * (p * (1.0 - p) / nf + z2n / (4.0 * nf)).sqrt();
    Ok(((centre - half).max(0.0), (centre + half).min(1.0)))
}

/// Exact Clopper–Pearson interval.
pub fn clopper_pearson(hits: u64, n: u64, level: f64) -> Result<(f64, f64)> {
    check_counts(hits, n, level)?;
    let a = (1.0 - level) / 2.0;
    let (k, nf) = (hits as f64, n as f64);
    let lo = if hits == 0 {
        0.0
    } else {
        Beta::new(k, nf - k + 1.0).expect("positive shape").inverse_cdf(a)
    };
    let hi = if hits == n {
        1.0
    } else {
        Beta::new(k + 1.0, nf - k).expect("positive shape").inverse_cdf(1.0 - a)
    };
    Ok((lo, hi))
}

/// A Bernoulli frequency with its plug-in standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Proportion {
    pub hits: u64,
    pub n: u64,
    pub p: f64,
    pub se: f64,
}

impl Proportion {
    pub fn new(hits: u64, n: u64) -> Self {
        let p = if n == 0 { 0.0 } else { hits as f64 / n as f64 };
        let se = if n == 0 { 0.0 } else { (p * (1.0 - p) / n as f64).sqrt() };
        Self { hits, n, p, se }
    }

    /// `(p_a - p_b) / sqrt(se_a² + se_b²)`, zero when both errors vanish and
    /// the estimates agree.
    pub fn z_score(&self, other: &Proportion) -> f64 {
        let diff = self.p - other.p;
        let se = (self.se * self.se + other.se * other.se).sqrt();
        if se == 0.0 {
            if diff == 0.0 {
                0.0
            } else {
                diff.signum() * f64::INFINITY
            }
        } else {
            diff / se
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BootstrapSummary {
    pub estimate: f64,
    pub se: f64,
    pub lo: f64,
    pub hi: f64,
    pub replicates: usize,
}

/// Draws `n` indices uniformly with replacement.
pub fn resample_indices<R: Rng + ?Sized>(rng: &mut R, n: usize, out: &mut Vec<usize>) {
    out.clear();
    out.extend((0..n).map(|_| rng.random_range(0..n)));
}

/// Runs `replicates` bootstrap replicates in parallel; replicate `r` gets the
/// stream `key.path(r)`, so the result does not depend on the thread count.
/// `estimate` is the statistic on the original data; the interval is the
/// percentile interval at `level`.
pub fn bootstrap<F>(estimate: f64, replicates: usize, key: StreamKey, level: f64, stat: F) -> BootstrapSummary
where
    F: Fn(&mut PathRng) -> f64 + Sync,
{
    let [s] = bootstrap_joint([estimate], replicates, key, level, |rng| [stat(rng)]);
    s
}

/// [`bootstrap`] for several statistics computed on the same resamples.
pub fn bootstrap_joint<const K: usize, F>(
    estimates: [f64; K],
    replicates: usize,
    key: StreamKey,
    level: f64,
    stat: F,
) -> [BootstrapSummary; K]
where
    F: Fn(&mut PathRng) -> [f64; K] + Sync,
{
    let reps: Vec<[f64; K]> = (0..replicates as u64)
        .into_par_iter()
        .map(|r| stat(&mut key.path(r)))
        .collect();
    let a = (1.0 - level) / 2.0;
    std::array::from_fn(|k| {
        let mut v: Vec<f64> = reps.iter().map(|r| r[k]).collect();
        let mean = v.iter().sum::<f64>() / replicates.max(1) as f64;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (replicates.max(2) - 1) as f64;
        v.sort_by(|a, b| a.total_cmp(b));
        let pick = |q: f64| {
            if v.is_empty() {
                estimates[k]
            } else {
                v[((q * (v.len() - 1) as f64).round() as usize).min(v.len() - 1)]
            }
        };
        BootstrapSummary {
            estimate: estimates[k],
            se: var.sqrt(),
            lo: pick(a),
            hi: pick(1.0 - a),
            replicates,
        }
    })
}
