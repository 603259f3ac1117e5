use proptest::prelude::*;
use regop::block::{trace_pair, BlockMatrix};
use regop::cp::{adjoint_map, is_cp, LinearMap};
use regop::linalg::{cx, identity, kron, schatten_norm, trace, PExponent};
use regop::random::{random_cp_map, random_map, random_matrix, random_unitary, seeded};

fn exponent() -> impl Strategy<Value = PExponent> {
    prop_oneof![
        Just(PExponent::ONE),
        Just(PExponent::INFINITY),
        (1.0f64..8.0).prop_map(|p| PExponent::new(p).unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn schatten_norm_is_unitarily_invariant(seed in any::<u64>(), n in 1usize..5, p in exponent()) {
        let mut rng = seeded(seed);
        let a = random_matrix(&mut rng, n, n);
        let u = random_unitary(&mut rng, n);
        let v = random_unitary(&mut rng, n);
        let lhs = schatten_norm(&(&u * &a * &v), p);
        let rhs = schatten_norm(&a, p);
        prop_assert!((lhs - rhs).abs() <= 1e-10 * rhs.max(1.0));
    }

    #[test]
    fn holder_inequality(seed in any::<u64>(), n in 1usize..5, p in exponent()) {
        let mut rng = seeded(seed);
        let a = random_matrix(&mut rng, n, n);
        let b = random_matrix(&mut rng, n, n);
        let lhs = trace(&(&a * &b)).norm();
        let rhs = schatten_norm(&a, p) * schatten_norm(&b, p.conjugate());
        prop_assert!(lhs <= rhs * (1.0 + 1e-12));
    }

    #[test]
    fn schatten_norm_decreases_in_p(seed in any::<u64>(), n in 1usize..5, p in 1.0f64..6.0, dp in 0.0f64..4.0) {
        let mut rng = seeded(seed);
        let a = random_matrix(&mut rng, n, n);
        let lo = schatten_norm(&a, PExponent::new(p).unwrap());
        let hi = schatten_norm(&a, PExponent::new(p + dp).unwrap());
        let top = schatten_norm(&a, PExponent::INFINITY);
        prop_assert!(hi <= lo * (1.0 + 1e-12));
        prop_assert!(top <= hi * (1.0 + 1e-12));
    }

    #[test]
    fn trace_pair_conjugation_identity(seed in any::<u64>(), n in 1usize..4) {
        let mut rng = seeded(seed);
        let alpha = random_matrix(&mut rng, n, n);
        let beta = random_matrix(&mut rng, n, n);
        let z = random_matrix(&mut rng, n * n, n * n);
        let i = identity(n);
        let left = kron(&alpha, &i) * &z * kron(&beta, &i);
        let right = kron(&i, &alpha.transpose()) * &z * kron(&i, &beta.transpose());
        let l = trace_pair(&BlockMatrix::new(n, n, left).unwrap()).unwrap();
        let r = trace_pair(&BlockMatrix::new(n, n, right).unwrap()).unwrap();
        prop_assert!((l - r).norm() <= 1e-10 * l.norm().max(1.0));
    }

    #[test]
    fn choi_is_linear(seed in any::<u64>(), n in 1usize..4, m in 1usize..4, a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let mut rng = seeded(seed);
        let u = random_map(&mut rng, n, m);
        let v = random_map(&mut rng, n, m);
        let (ca, cb) = (cx(a, 0.5 * b), cx(b, -a));
        let w = u.scale(ca).add(&v.scale(cb)).unwrap();
        let expect = u.choi() * ca + v.choi() * cb;
        prop_assert!((w.choi() - expect).norm() <= 1e-12 * w.choi().norm().max(1.0));
    }

    #[test]
    fn composition_of_cp_maps_is_cp(seed in any::<u64>(), n in 1usize..4, m in 1usize..4, k in 1usize..4, r in 1usize..3) {
        let tol = 1e-10;
        let mut rng = seeded(seed);
        let u = random_cp_map(&mut rng, n, m, r);
        let v = random_cp_map(&mut rng, m, k, r);
        let w = u.then(&v).unwrap();
        let scale = w.choi().norm().max(1.0);
        prop_assert!(is_cp(&w, tol * scale).margin >= -2.0 * tol * scale);
    }

    #[test]
    fn adjoint_preserves_cp_margin(seed in any::<u64>(), n in 1usize..4, m in 1usize..4, cp in any::<bool>()) {
        let mut rng = seeded(seed);
        let u: LinearMap = if cp { random_cp_map(&mut rng, n, m, 2) } else { random_map(&mut rng, n, m) };
        let a = is_cp(&u, 1e-10);
        let b = is_cp(&adjoint_map(&u), 1e-10);
        prop_assert_eq!(a.is_cp, b.is_cp);
        prop_assert!((a.margin - b.margin).abs() <= 1e-10 * u.choi().norm().max(1.0));
    }
}
