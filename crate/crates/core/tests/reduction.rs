use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use traplab_core::verification::{
    parse_dimacs, parse_formula, policy_from_formula, random_formula, random_kcnf, separating_threshold, to_dimacs,
    verify_eps_safety, verify_perfect_safety, Formula, PropositionalFormula, SafetyVerdict,
};

// Straightforward recursive evaluation, independent of the bit-parallel path.
fn eval(f: &Formula, a: u64) -> bool {
    match f {
        Formula::Var(i) => a >> (i - 1) & 1 == 1,
        Formula::Not(g) => !eval(g, a),
        Formula::And(gs) => gs.iter().all(|g| eval(g, a)),
        Formula::Or(gs) => gs.iter().any(|g| eval(g, a)),
    }
}

fn falsifying(phi: &PropositionalFormula) -> Vec<u64> {
    (0..1u64 << phi.num_vars()).filter(|&a| !eval(phi.root(), a)).collect()
}

fn formula(rng: &mut ChaCha8Rng) -> PropositionalFormula {
    let k = rng.random_range(1..=10);
    let f = random_formula(k, 4, rng);
    match rng.random_range(0..3) {
        0 => f,
        // `f | !f` is always a tautology.
        1 => PropositionalFormula::new(Formula::Or(vec![f.root().clone(), f.root().clone().negate()]), k).unwrap(),
        _ => random_kcnf(k, rng.random_range(1..4), 2, rng).negated(),
    }
}

#[test]
fn agrees_with_brute_force_tautology_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut tautologies, mut others) = (0, 0);
    for _ in 0..1000 {
        let phi = formula(&mut rng);
        let phi = parse_formula(&phi.to_string()).expect("printed formulas parse");
        let bad = falsifying(&phi);
        let reduced = policy_from_formula(&phi).unwrap();
        let verdict = verify_perfect_safety(&reduced.policy).unwrap();
        if bad.is_empty() {
            tautologies += 1;
            assert_eq!(verdict, SafetyVerdict::Safe, "{phi}");
        } else {
            others += 1;
            assert_eq!(verdict, SafetyVerdict::Counterexample { input: bad[0] }, "{phi}");
            let k = phi.num_vars();
            let err = verify_eps_safety(&reduced.policy, 0.0).unwrap().error();
            assert_eq!(err.unsafe_inputs, bad.len() as u64);
            assert!(err.value() >= 0.5f64.powi(k as i32));
            assert!(!verify_eps_safety(&reduced.policy, separating_threshold(k)).unwrap().is_eps_safe());
        }
    }
    assert!(tautologies > 100 && others > 100, "{tautologies} / {others}");
}

#[test]
fn dimacs_round_trip_preserves_truth_table() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..50 {
        let phi = random_kcnf(8, 20, 3, &mut rng);
        let back = parse_dimacs(&to_dimacs(&phi).unwrap()).unwrap();
        for a in 0..256 {
            assert_eq!(eval(phi.root(), a), eval(back.root(), a));
        }
    }
}
