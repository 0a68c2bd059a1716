use traplab_core::adversarial::{
    blackbox_detection_experiment, build_audit_evader, build_planted_trigger_policy, build_prf_policy,
    check_diagonalization, crypto_threshold, diagonal_policy, planted_trigger_search_cost, prf_trigger_fraction,
    run_audit, AuditSuite, KeyedPermutation, TechniqueRegistry,
};
use traplab_core::SeedStream;

#[test]
fn evader_passes_ten_thousand_input_audit() {
    let audit = AuditSuite::prefix(16, 10_000).unwrap();
    let b = build_audit_evader(&audit, 50_000).unwrap();
    let out = run_audit(&b.policy, &audit).unwrap();
    assert!(out.passes_all);
    assert!(b.policy.is_catastrophic(50_000));
    assert_eq!(b.policy.count_catastrophic(), 1);
}

#[test]
fn audit_suite_json_is_validated() {
    let ok: AuditSuite = serde_json::from_str(r#"{"arity": 4, "inputs": [3, 1, 3]}"#).unwrap();
    assert_eq!(ok.inputs(), &[1, 3]);
    assert!(serde_json::from_str::<AuditSuite>(r#"{"arity": 2, "inputs": [9]}"#).is_err());
}

#[test]
fn feistel_is_a_bijection_on_small_domains() {
    let p = KeyedPermutation::new(b"bijection");
    let mut seen = std::collections::HashSet::new();
    for x in 0..1u64 << 14 {
        assert!(seen.insert(p.eval(x)));
    }
}

#[test]
fn trigger_density_and_detection() {
    let policy = build_prf_policy(b"density", 16, 0.01).unwrap();
    assert!(prf_trigger_fraction(&policy).within_three_sigma);
    let d = blackbox_detection_experiment(&policy, 100, 4000, &SeedStream::new(2)).unwrap();
    assert!(d.within_three_sigma, "{d:?}");
    assert!((d.expected_nominal - (1.0 - 0.99f64.powi(100))).abs() < 1e-12);
}

#[test]
fn planted_trigger_is_found_only_by_scanning() {
    let keys: Vec<Vec<u8>> = (0..16u8).map(|i| vec![i, 7, 7]).collect();
    let r = planted_trigger_search_cost(12, &keys).unwrap();
    assert!(r.meets_half_domain);
    for k in &keys {
        let p = build_planted_trigger_policy(k, 12).unwrap();
        assert_eq!(p.trigger_count(), 1);
    }
}

// The decoded (slice, y) pairs enumerate every input exactly once.
#[test]
fn diagonal_encoding_is_a_bijection() {
    let registry = TechniqueRegistry::shipped();
    let d = diagonal_policy(&registry, 2, 3).unwrap();
    let mut seen = [false; 1 << 5];
    for slice in 0..4u64 {
        for y in 0..8u64 {
            let x = d.encode(slice, y);
            assert_eq!(d.decode(x), (slice, y));
            assert!(!std::mem::replace(&mut seen[x as usize], true));
        }
    }
    for v in check_diagonalization(&registry, &d).unwrap() {
        assert!(v.error.unsafe_inputs > 0 && v.witness.is_some(), "{}", v.name);
    }
}

#[test]
fn crypto_threshold_matches_loop() {
    for d in 1..5000u64 {
        let mut c = 0;
        while (1u64 << c) < d {
            c += 1;
        }
        assert_eq!(crypto_threshold(d).unwrap(), c + 2);
    }
}
