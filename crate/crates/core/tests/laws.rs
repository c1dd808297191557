use rand::Rng;
use rayon::prelude::*;

use gou_core::duality::ruin_probability;
use gou_core::gou_process::{exp_functional, solve_forward, stationary_sampler, Functional, Truncation};
use gou_core::path_engine::{Backend, PathSampler};
use gou_core::presets::{dufresne_cdf, preset};
use gou_core::stats::{ks_one_sample, ks_two_sample, EmpiricalDistribution};
use gou_core::{GaussianCov, JumpLaw2, Marginal, Model, StreamKey};

fn sample(n: usize, f: impl Fn(u64) -> f64 + Sync + Send) -> EmpiricalDistribution<f64> {
    EmpiricalDistribution::from_values((0..n as u64).into_par_iter().map(f).collect()).unwrap()
}

#[test]
fn ks_null_rejection_rate() {
    let key = StreamKey::new(17);
    let mut rejected = 0;
    for r in 0..200 {
        let mut rng = key.path(r);
        let a: Vec<f64> = (0..1000).map(|_| rng.random()).collect();
        let b: Vec<f64> = (0..1000).map(|_| rng.random()).collect();
        let ks = ks_two_sample(
            &EmpiricalDistribution::from_values(a).unwrap(),
            &EmpiricalDistribution::from_values(b).unwrap(),
        );
        rejected += ks.rejects(1e-3) as usize;
    }
    assert!(rejected <= 2, "{rejected}");
}

#[test]
fn dufresne_stationary_law() {
    let m = preset("dufresne").unwrap().model;
    let s = stationary_sampler(&m, Functional::Causal, 2000, Truncation::new(15.0, 1e-2), StreamKey::new(3)).unwrap();
    assert_eq!(s.failed_fraction, 0.0);
    let ks = ks_one_sample(&s.distribution, dufresne_cdf);
    assert!(!ks.rejects(1e-3), "{ks:?}");
    // E[1 / Gamma(3, 1)] = 1/2.
    assert!((s.distribution.mean() - 0.5).abs() < 0.03, "{}", s.distribution.mean());
}

#[test]
fn explicit_solution_matches_causal_integral_in_law() {
    let m = preset("drift-ou").unwrap().model;
    let sampler = PathSampler::new(&m, 1.0, Backend::Exact).unwrap();
    let (ka, kb) = (StreamKey::new(5).fork("a"), StreamKey::new(5).fork("b"));
    let a = sample(5000, |i| solve_forward(&sampler.sample(&mut ka.path(i)), 0.0).unwrap().terminal());
    let b = sample(5000, |i| exp_functional(&m, Functional::Causal, 1.0, 1e-2, &mut kb.path(i)).unwrap().value);
    let ks = ks_two_sample(&a, &b);
    assert!(!ks.rejects(1e-3), "{ks:?}");
}

#[test]
fn reversed_path_is_negated_in_law() {
    let m = preset("drift-ou").unwrap().model;
    let longer = PathSampler::new(&m, 1.5, Backend::Exact).unwrap();
    let (ka, kb) = (StreamKey::new(6).fork("a"), StreamKey::new(6).fork("b"));
    let at = |p: gou_core::Path| (p.truncate(&0.6).unwrap().terminal()[1] * 1e9).round() / 1e9;
    let reversed = sample(5000, |i| at(longer.sample(&mut ka.path(i)).reversed_at(&1.0).unwrap()));
    let negated = sample(5000, |i| at(longer.sample(&mut kb.path(i)).negated()));
    let plain = sample(5000, |i| at(longer.sample(&mut kb.path(i))));
    assert!(!ks_two_sample(&reversed, &negated).rejects(1e-3));
    assert!(ks_two_sample(&reversed, &plain).rejects(1e-3));
}

#[test]
fn cramer_lundberg_ruin() {
    // U = 0, L = t - compound Poisson(1) of Exp(mean 1/2) claims:
    // P(ruin from x) = (λμ/c) exp(-(1/μ - λ/c) x) = exp(-x) / 2.
    let m = Model::new(
        [0.0, 1.0],
        GaussianCov::zero(),
        1.0,
        JumpLaw2::Independent {
            du: Marginal::atom(0.0),
            dl: Marginal::Exponential {
                mean: 0.5,
                negative: true,
            },
        },
    )
    .unwrap();
    for x in [0.5, 1.5] {
        let r = ruin_probability(&m, x, Truncation::new(150.0, 1e-2), 4000, StreamKey::new(7)).unwrap();
        let psi = 0.5 * (-x as f64).exp();
        let p = r.estimate;
        assert!((p.p - psi).abs() <= 4.0 * p.se, "x = {x}: {} vs {psi}", p.p);
        assert!(r.ci.0 <= p.p && p.p <= r.ci.1);
    }
}
