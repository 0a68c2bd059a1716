use num_bigint::BigInt;
use num_rational::BigRational;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use traplab_core::learning::{
    kl_divergence, pac_bayes_lower_bound, rare_event_sample_bound, simulate_rare_observation, toy_posterior_experiment,
    DataSpec, FailureSource, KlDivergence, PosteriorConfig, PriorSpec, RareEventSpec,
};
use traplab_core::SeedStream;

#[test]
fn sample_bound_is_the_least_sufficient_count() {
    for &p in &[1e-1, 1e-2, 1e-3, 1e-4, 3.7e-5, 1e-6] {
        for &delta in &[0.5, 0.1, 0.05, 1e-3, 1e-6] {
            let spec = RareEventSpec::new(p, delta).unwrap();
            let b = rare_event_sample_bound(&spec);
            // (1-p)^m computed by repeated squaring, independent of ln/exp.
            let miss = |m: u64| {
                let (mut acc, mut base, mut e) = (1.0f64, 1.0 - p, m);
                while e > 0 {
                    if e & 1 == 1 {
                        acc *= base;
                    }
                    base *= base;
                    e >>= 1;
                }
                acc
            };
            assert!(miss(b.m_min) <= delta * (1.0 + 1e-9), "p {p} delta {delta}");
            assert!(b.m_min == 1 || miss(b.m_min - 1) > delta * (1.0 - 1e-9), "p {p} delta {delta}");
            assert!(b.m_min as f64 <= (1.0 / p) * (1.0 / delta).ln() + 1.0);
        }
    }
}

#[test]
fn observation_rate_matches_closed_form() {
    let r = simulate_rare_observation(1e-3, 700, 20_000, &SeedStream::new(8)).unwrap();
    let expected = 1.0 - (1.0f64 - 1e-3).powi(700);
    assert!((r.expected - expected).abs() < 1e-12);
    assert!(r.within_three_sigma);
}

#[test]
fn posterior_bound_holds_with_exact_arithmetic() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for i in 0..60 {
        let config = PosteriorConfig::random(&mut rng);
        let r = toy_posterior_experiment(&config, &SeedStream::new(i)).unwrap();
        assert!(r.bound_holds_exactly);
        let risk: BigRational = r.expected_risk_exact.parse().unwrap();
        let bound: BigRational = r.lower_bound_exact.parse().unwrap();
        assert!(risk >= bound);
        assert!((r.posterior.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn zero_prior_on_safe_set_stays_zero() {
    let config = PosteriorConfig {
        losses_milli: vec![0, 0, 150, 400, 900],
        safe: vec![0, 1],
        prior: PriorSpec::ZeroOnSafe,
        data: DataSpec {
            observations: 20,
            failures: FailureSource::Fixed { failures: 0 },
        },
    };
    let r = toy_posterior_experiment(&config, &SeedStream::new(1)).unwrap();
    assert_eq!(r.q_safe, 0.0);
    assert_eq!(r.zero_prior_forces_zero_posterior, Some(true));
    assert!(r.expected_risk >= r.eps_min);
    let zero = BigRational::from_integer(BigInt::from(0));
    assert!(r.expected_risk_exact.parse::<BigRational>().unwrap() > zero);
}

#[test]
fn lower_bound_and_divergence_values() {
    assert_eq!(pac_bayes_lower_bound(0.2, 0.25).unwrap(), 0.15000000000000002);
    assert!(pac_bayes_lower_bound(0.2, 1.5).is_err());
    let KlDivergence::Finite { value } = kl_divergence(&[0.5, 0.5], &[0.25, 0.75]).unwrap() else {
        panic!("finite expected");
    };
    let oracle = 0.5 * (0.5f64 / 0.25).ln() + 0.5 * (0.5f64 / 0.75).ln();
    assert!((value - oracle).abs() < 1e-15);
    assert_eq!(kl_divergence(&[0.5, 0.5], &[1.0, 0.0]).unwrap(), KlDivergence::Infinite);
}
