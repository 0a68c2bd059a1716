use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use traplab_core::learning::{eps_safe_set_monotonicity, PolicySampler};
use traplab_core::policy::{hazard_probability, is_eps_safe, BooleanPolicy, HazardModel, LinearPolicy, ReluNetwork};
use traplab_core::SeedStream;

fn binomial(n: u64, k: u64) -> u64 {
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

#[test]
fn eps_safe_counts_match_binomial_cdf() {
    // Among the 2^16 tables on 4 inputs, those with at most 16 eps unsafe inputs.
    let oracle = |eps: f64| (0..=(16.0 * eps) as u64).map(|j| binomial(16, j)).sum::<u64>();
    assert_eq!(oracle(0.25), 2517);
    assert_eq!(oracle(0.5), 39203);
    for eps in [0.0, 0.25, 0.5, 1.0] {
        let count = (0..1u64 << 16)
            .filter(|&w| is_eps_safe(&BooleanPolicy::from_words(4, vec![w]).unwrap(), eps).unwrap())
            .count() as u64;
        assert_eq!(count, oracle(eps), "eps {eps}");
    }
}

#[test]
fn sampled_eps_measure_agrees_with_exact() {
    let r = eps_safe_set_monotonicity(&PolicySampler::UniformTable { arity: 4 }, &[0.25, 0.5], 200_000, &SeedStream::new(3))
        .unwrap();
    assert!(r.rows[0].estimate.within_sigmas(2517.0 / 65536.0, 4.0));
    assert!(r.rows[1].estimate.within_sigmas(39203.0 / 65536.0, 4.0));
    assert!(r.non_decreasing);
}

#[test]
fn relu_is_affine_within_an_activation_region() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let net = ReluNetwork::random(&[3, 6, 6, 1], &mut rng).unwrap();
    let mut checked = 0;
    for i in 0..200 {
        let x = [(i as f64 * 0.37).sin(), (i as f64 * 0.11).cos(), (i as f64 * 0.73).sin() * 0.5];
        let (out, grad) = net.output_and_input_gradient(&x).unwrap();
        let d = [1e-4, -2e-4, 5e-5];
        let y: Vec<f64> = x.iter().zip(d).map(|(a, b)| a + b).collect();
        if net.activation_pattern(&x).unwrap() != net.activation_pattern(&y).unwrap() {
            continue;
        }
        let predicted = out + grad.iter().zip(d).map(|(g, b)| g * b).sum::<f64>();
        assert!((net.forward(&y).unwrap() - predicted).abs() < 1e-12);
        checked += 1;
    }
    assert!(checked > 150);
}

// The 95% interval shrinks like 1/sqrt(n): quadrupling the sample roughly
// halves it.
#[test]
fn hazard_interval_halves_with_four_times_the_samples() {
    let model = HazardModel::default_for(4).unwrap();
    let policy = LinearPolicy::new(vec![1.0, 0.5, -0.3, 0.2], 0.1).unwrap();
    let seed = SeedStream::new(9);
    let a = hazard_probability(&policy, &model, 40_000, &seed).unwrap();
    let b = hazard_probability(&policy, &model, 160_000, &seed).unwrap();
    let ratio = b.ci_width() / a.ci_width();
    assert!((ratio - 0.5).abs() < 0.05, "{ratio}");
}
