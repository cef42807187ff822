use crate::banach::{distance, norm, norm_weights};
use crate::combinatorics::{enumerate_pairs, enumerate_triples, ln_weight_triple, symmetry_factor};
use crate::envelopes::{slot, Coupling, EnvelopeSet, GreenSequence};
use crate::ext::{ln_factorial, ExtScalar};
use crate::solver::ClosurePolicy;
use proptest::prelude::*;

fn ext() -> impl Strategy<Value = ExtScalar> {
    (prop_oneof![Just(-1i8), Just(1i8)], -700.0f64..700.0).prop_map(|(s, l)| ExtScalar::from_parts(s, l))
}

fn moderate() -> impl Strategy<Value = f64> {
    prop_oneof![-1e6f64..-1e-6, 1e-6f64..1e6]
}

fn close(a: f64, b: f64, scale: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * scale.max(f64::MIN_POSITIVE)
}

fn weighted_sequence(lambda: Coupling, n_max: usize, xs: &[f64]) -> GreenSequence {
    let w = norm_weights(lambda, n_max).unwrap();
    let values = (1..=n_max)
        .step_by(2)
        .map(|n| ExtScalar::from_f64(xs[slot(n)]) * w.get(n))
        .collect();
    GreenSequence::new(lambda, values, ClosurePolicy::ZeroTail).unwrap()
}

proptest! {
    #[test]
    fn addition_commutes(a in ext(), b in ext()) {
        let (x, y) = (a + b, b + a);
        prop_assert_eq!(x.sign(), y.sign());
        prop_assert!(close(x.logmag(), y.logmag(), 1.0, 1e-12) || x.is_zero());
    }

    #[test]
    fn addition_associates(a in moderate(), b in moderate(), c in moderate()) {
        let (ea, eb, ec) = (ExtScalar::from_f64(a), ExtScalar::from_f64(b), ExtScalar::from_f64(c));
        let left = ((ea + eb) + ec).to_f64();
        let right = (ea + (eb + ec)).to_f64();
        let scale = a.abs() + b.abs() + c.abs();
        prop_assert!(close(left, right, scale, 1e-13));
        prop_assert!(close(left, a + b + c, scale, 1e-13));
    }

    #[test]
    fn multiplication_inverts(a in ext(), b in ext()) {
        let q = (a * b) / b;
        prop_assert_eq!(q.sign(), a.sign());
        prop_assert!(close(q.logmag(), a.logmag(), 1.0 + a.logmag().abs() + b.logmag().abs(), 1e-14));
    }

    #[test]
    fn f64_round_trip(x in moderate()) {
        prop_assert!(close(ExtScalar::from_f64(x).to_f64(), x, x.abs(), 1e-14));
        prop_assert_eq!((ExtScalar::from_f64(x) - ExtScalar::from_f64(x)).is_zero(), true);
    }

    #[test]
    fn norm_is_a_norm(
        l in 0.001f64..0.05,
        xs in prop::collection::vec(-1.0f64..1.0, 11),
        ys in prop::collection::vec(-1.0f64..1.0, 11),
        c in -10.0f64..10.0,
    ) {
        let lambda = Coupling::new(l).unwrap();
        let w = norm_weights(lambda, 21).unwrap();
        let x = weighted_sequence(lambda, 21, &xs);
        let y = weighted_sequence(lambda, 21, &ys);
        let sum: Vec<f64> = xs.iter().zip(&ys).map(|(a, b)| a + b).collect();
        let scaled: Vec<f64> = xs.iter().map(|a| c * a).collect();
        let nx = norm(&x, &w).unwrap();
        let ny = norm(&y, &w).unwrap();
        prop_assert!(norm(&weighted_sequence(lambda, 21, &sum), &w).unwrap() <= nx + ny + 1e-12);
        prop_assert!(close(norm(&weighted_sequence(lambda, 21, &scaled), &w).unwrap(), c.abs() * nx, c.abs() * nx, 1e-12));
        prop_assert!(close(distance(&x, &y, &w).unwrap(), distance(&y, &x, &w).unwrap(), 1.0, 1e-15));
    }

    #[test]
    fn pair_count_and_parity(k in 1usize..200) {
        let n = 2 * k + 1;
        let pairs = enumerate_pairs(n).unwrap();
        prop_assert_eq!(pairs.len(), (n - 1) / 2);
        prop_assert!(pairs.iter().all(|p| p.j1 + p.j2 == n && p.j1 % 2 == 1 && p.j2 % 2 == 0));
    }

    #[test]
    fn triple_orbits_cover_ordered_triples(k in 1usize..40) {
        let n = 2 * k + 1;
        let triples = enumerate_triples(n).unwrap();
        let orbit_total: usize = triples.iter().map(|t| 6 / usize::from(t.sigma)).sum();
        prop_assert_eq!(orbit_total, (n - 1) * (n + 1) / 8);
        let by_partition: f64 = triples.iter().map(|t| 6.0 * ln_weight_triple(n, t).exp()).sum();
        let mut ordered = 0.0;
        for a in (1..n).step_by(2) {
            for b in (1..n - a).step_by(2) {
                let c = n - a - b;
                ordered += (ln_factorial(n) - ln_factorial(a) - ln_factorial(b) - ln_factorial(c)).exp();
                prop_assert_eq!(6 % symmetry_factor(a, b, c), 0);
            }
        }
        prop_assert!(close(by_partition, ordered, ordered, 1e-12));
    }

    #[test]
    fn envelopes_sandwich_the_fundamental_sequence(l in 0.001f64..0.05) {
        let env = EnvelopeSet::build(Coupling::new(l).unwrap(), 31).unwrap();
        for n in (3..=31).step_by(2) {
            prop_assert!(env.delta_min.get(n) <= env.delta0.get(n) + 1e-15);
            prop_assert!(env.delta0.get(n) <= env.delta_max.get(n) + 1e-15);
            prop_assert!(env.h_min.get(n).logmag() <= env.h0.get(n).logmag() + 1e-12);
            prop_assert!(env.h0.get(n).logmag() <= env.h_max.get(n).logmag() + 1e-12);
            prop_assert_eq!(env.h0.get(n).sign(), if n % 4 == 3 { -1 } else { 1 });
        }
    }
}
