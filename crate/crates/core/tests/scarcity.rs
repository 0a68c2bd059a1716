use std::collections::HashSet;

use num_bigint::BigUint;
use traplab_core::scarcity::{incompressibility_verdict, safe_policy_fraction, space_filling_cost};

#[test]
fn exact_fraction_matches_big_integer_oracle() {
    for m in 1..=10u32 {
        let (n, d) = safe_policy_fraction(m).unwrap().exact_parts().unwrap();
        assert_eq!(n, BigUint::from(1u32));
        assert_eq!(d, BigUint::from(2u32).pow(2u32.pow(m)));
    }
    assert_eq!(safe_policy_fraction(4).unwrap().exact_parts().unwrap().1, BigUint::from(65_536u32));
}

#[test]
fn quoted_magnitudes() {
    let v5 = safe_policy_fraction(5).unwrap().value();
    assert!((v5 / 2.3e-10 - 1.0).abs() < 0.05, "{v5}");
    let l10 = safe_policy_fraction(10).unwrap().log10_value;
    assert!((-308.5..=-308.0).contains(&l10), "{l10}");
    // log10(2^-1024) = -1024 log10(2)
    assert!((l10 + 1024.0 * 2f64.log10()).abs() < 1e-9);
}

#[test]
fn million_dimensional_grid() {
    let c = space_filling_cost(1_000_000, 1).unwrap();
    assert_eq!(c.log2_samples, 1_000_000);
    assert_eq!((c.log2_atoms_bound, c.log2_planck_times_bound), (266, 204));
    assert!(c.exceeds_atoms && c.exceeds_planck_times);
}

// Every decoder reading programs of at most C bits reaches at most 2^(C+1) - 1
// distinct K-bit tables.
#[test]
fn decoder_enumeration_respects_counting_bound() {
    let (k, c) = (10u32, 5u32);
    let v = incompressibility_verdict(k as u64, c as u64);
    for salt in 0..20u64 {
        let mut tables = HashSet::new();
        for len in 0..=c {
            for bits in 0..1u64 << len {
                let mut h = (bits | 1 << len).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ salt;
                let table: Vec<bool> = (0..k)
                    .map(|_| {
                        h ^= h >> 29;
                        h = h.wrapping_mul(0xBF58_476D_1CE4_E5B9);
                        h >> 63 == 1
                    })
                    .collect();
                tables.insert(table);
            }
        }
        assert!((tables.len() as u64) < 1 << v.log2_program_count_bound);
        assert!(tables.len() as f64 / (1u64 << k) as f64 <= v.fraction_bound());
    }
    assert!(!v.feasible);
}
