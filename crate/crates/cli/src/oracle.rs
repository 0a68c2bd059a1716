//! Independent reference computations used to judge library results.

use traplab_core::verification::{Formula, PropositionalFormula};

fn eval(f: &Formula, a: u64) -> bool {
    match f {
        Formula::Var(i) => a >> (i - 1) & 1 == 1,
        Formula::Not(g) => !eval(g, a),
        Formula::And(gs) => gs.iter().all(|g| eval(g, a)),
        Formula::Or(gs) => gs.iter().any(|g| eval(g, a)),
    }
}

/// Brute-force count of falsifying assignments; zero means tautology.
pub fn falsifying_assignments(phi: &PropositionalFormula) -> u64 {
    (0..1u64 << phi.num_vars()).filter(|&a| !eval(phi.root(), a)).count() as u64
}

/// `(1 - p)^m` by binary exponentiation.
pub fn miss_probability(p: f64, m: u64) -> f64 {
    let (mut acc, mut base, mut e) = (1.0f64, 1.0 - p, m);
    while e > 0 {
        if e & 1 == 1 {
            acc *= base;
        }
        base *= base;
        e >>= 1;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use traplab_core::verification::parse_formula;

    #[test]
    fn counts() {
        assert_eq!(falsifying_assignments(&parse_formula("x1 | !x1").unwrap()), 0);
        assert_eq!(falsifying_assignments(&parse_formula("x1 & x2").unwrap()), 3);
        assert!((miss_probability(0.5, 10) - 0.5f64.powi(10)).abs() < 1e-18);
        assert_eq!(miss_probability(0.3, 0), 1.0);
    }
}
