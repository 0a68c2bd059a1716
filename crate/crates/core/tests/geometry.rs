use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use traplab_core::geometry::{
    escape_perturbation, random_safe_network, safety_margin, simulate_path, simulate_training_paths_multi, Dynamics,
    EscapeExperimentConfig, EscapeOptions, GridDomain, MarginStatus, Potential, ThinSafeSet,
};
use traplab_core::policy::ReluNetwork;
use traplab_core::SeedStream;

// For an affine network the margin proxy is the exact distance from each grid
// point to the hyperplane w.x + b = 0.
#[test]
fn affine_margin_is_hyperplane_distance() {
    let (w, b) = (vec![0.6, -0.8], -2.0);
    let net = ReluNetwork::affine(w.clone(), b).unwrap();
    let domain = GridDomain::unit(2, 11).unwrap();
    let r = safety_margin(&net, &domain).unwrap();
    let mut oracle = f64::INFINITY;
    let mut x = Vec::new();
    for i in 0..domain.point_count() {
        domain.point(i, &mut x);
        oracle = oracle.min((w[0] * x[0] + w[1] * x[1] + b).abs());
    }
    assert_eq!(r.status, MarginStatus::Boundary);
    assert!((r.margin - oracle).abs() < 1e-12);
    // Nearest grid corner (1, 0): |0.6 - 2| = 1.4.
    assert!((r.margin - 1.4).abs() < 1e-12);
}

#[test]
fn escape_on_random_safe_networks_reduces_margin() {
    let config = EscapeExperimentConfig::default();
    let domain = GridDomain::unit(config.input_dim, config.resolution).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut reduced = 0;
    let mut total = 0;
    for _ in 0..40 {
        let net = random_safe_network(&config, &domain, &mut rng).unwrap();
        let Ok(r) = escape_perturbation(&net, &domain, &EscapeOptions::default()) else {
            continue;
        };
        total += 1;
        if r.final_margin() < r.initial_margin() {
            reduced += 1;
        }
        // The reported trace agrees with a fresh margin computation; an
        // unsafe network counts as margin 0.
        let check = safety_margin(&r.network, &domain).unwrap();
        let fresh = if check.is_safe() { check.margin } else { 0.0 };
        assert!((fresh - r.final_margin()).abs() <= 1e-12 * fresh.max(1.0));
    }
    assert!(total >= 30 && reduced == total, "{reduced}/{total}");
}

#[test]
fn path_hits_are_reproducible_and_recorded_paths_match_statistics() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let line = ThinSafeSet::random(3, 2, 0.5, 0.05, &mut rng).unwrap();
    let plane = line.leading_hyperplane();
    let dynamics = Dynamics {
        max_steps: 2000,
        ..Dynamics::default()
    };
    let seed = SeedStream::new(4);
    let a = simulate_training_paths_multi(300, &[line.clone(), plane.clone()], &dynamics, &[0.1, 0.05], &seed).unwrap();
    let b = simulate_training_paths_multi(300, &[line.clone(), plane], &dynamics, &[0.1, 0.05], &seed).unwrap();
    assert_eq!(a, b);
    // A line sits inside its own leading hyperplane, so the plane is hit at
    // least as often.
    assert!(a[1].hits >= a[0].hits);
    for s in &a {
        assert!(s.rows.windows(2).all(|w| w[1].hits <= w[0].hits));
    }

    // Replaying one path by hand gives the same minimum distance.
    let dim = 3;
    let mut prng = seed.rng(0);
    use rand::Rng;
    let start: Vec<f64> = (0..dim).map(|_| prng.sample(rand_distr::StandardNormal)).collect();
    let potential = Potential::random(dim, &dynamics, &mut prng);
    let path = simulate_path(&start, &potential, &dynamics, &line, true, &mut prng).unwrap();
    let brute = path.points.iter().map(|p| line.distance(p)).fold(f64::INFINITY, f64::min);
    assert!(path.min_distance <= brute + 1e-12);
}
