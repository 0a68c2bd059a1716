use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use traplab_core::crs::{
    convergence_witness, emit_trap_curves, operational_failure_rate, required_epsilon, CrsModel, Impact,
    SECONDS_PER_YEAR,
};

#[test]
fn figure_default_curves() {
    let curve = emit_trap_curves(&CrsModel::figure_default(), &[0.0, 1.0, 2.0, 3.0, 4.0]).unwrap();
    for row in &curve.rows {
        let eps = 10f64.powf(-2.0 * row.c - 2.0);
        let cost = 10f64.powf(3.0 * row.c + 2.0);
        assert!(((row.required_eps - eps) / eps).abs() < 1e-12, "{row:?}");
        assert!(((row.verification_cost - cost) / cost).abs() < 1e-12, "{row:?}");
    }
    assert!(curve.model_label.contains("figure-default"));
}

#[test]
fn unbounded_impact_drives_requirement_below_any_threshold() {
    for impact in [Impact::Linear { scale: 1.0 }, Impact::Exponential { scale: 1.0, rate: 0.5 }] {
        let model = CrsModel {
            impact,
            ..CrsModel::figure_default()
        };
        let w = convergence_witness(&model, 1e-12, 1e9).unwrap();
        let c = w.capability.expect("converges within range");
        assert!(required_epsilon(&model, c).unwrap().eps < 1e-12);
    }
    let bounded = CrsModel {
        impact: Impact::Constant { value: 3.0 },
        ..CrsModel::figure_default()
    };
    assert!(convergence_witness(&bounded, 1e-12, 1e9).unwrap().capability.is_none());
}

#[test]
fn random_models_have_non_increasing_requirement() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..50 {
        let m = CrsModel::random(&mut rng);
        m.validate().unwrap();
        let grid: Vec<f64> = (0..100).map(|i| m.c_max * i as f64 / 99.0).collect();
        let curve = emit_trap_curves(&m, &grid).unwrap();
        assert!(curve.eps_non_increasing(), "{m:?}");
        assert!(curve.cost_non_decreasing(), "{m:?}");
    }
}

proptest! {
    #[test]
    fn mtbf_times_yearly_failures_is_seconds_per_year(eps in 1e-15f64..1.0, rate in 1e-3f64..1e9) {
        let r = operational_failure_rate(eps, rate).unwrap();
        prop_assert!((r.mtbf_seconds * r.failures_per_year / SECONDS_PER_YEAR - 1.0).abs() < 1e-12);
    }

    #[test]
    fn required_epsilon_reproduces_acceptable_risk(seed in any::<u64>(), c in 0.0f64..1.0) {
        let m = CrsModel::random(&mut ChaCha8Rng::seed_from_u64(seed));
        let r = required_epsilon(&m, c * m.c_max).unwrap();
        let f = m.risk_map.eval(r.eps);
        if r.eps < 1.0 {
            prop_assert!((f - r.acceptable_risk).abs() <= 1e-9 * r.acceptable_risk.max(1e-300));
        } else {
            prop_assert!(f <= r.acceptable_risk);
        }
    }
}
