use proptest::prelude::*;
use regop::block::{trace_pair, BlockMatrix};
use regop::cp::{adjoint_map, cb_norm, LinearMap};
use regop::linalg::{identity, kron, op_norm, PExponent, C64};
use regop::random::{random_block, random_cp_map, random_map, random_unitary, seeded};
use regop::regular::{regular_lower, regular_upper, RegularOptions};
use regop::rho::{rho_upper, PairingElement, RhoOptions};
use regop::vnorm::{vnorm_lower, vnorm_upper, UpperOptions};

fn interior() -> impl Strategy<Value = PExponent> {
    (1.2f64..6.0).prop_map(|p| PExponent::new(p).unwrap())
}

fn any_p() -> impl Strategy<Value = PExponent> {
    prop_oneof![Just(PExponent::ONE), Just(PExponent::INFINITY), interior()]
}

fn quick(seed: u64) -> RegularOptions {
    RegularOptions {
        levels: 2,
        starts: 2,
        iterations: 80,
        seed,
        rounds: 1,
        decomposition: false,
    }
}

fn upper(x: &BlockMatrix, p: PExponent) -> f64 {
    vnorm_upper(x, p, &UpperOptions::default()).0
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn vnorm_bracket_is_sound(seed in any::<u64>(), n in 1usize..4, m in 1usize..4, p in any_p()) {
        let x = random_block(&mut seeded(seed), n, m);
        let lo = vnorm_lower(&x, p);
        let up = upper(&x, p);
        prop_assert!(lo <= up + 1e-9 * up.max(1.0), "{lo} > {up}");
    }

    #[test]
    fn vnorm_is_operator_norm_at_infinity(seed in any::<u64>(), n in 1usize..4, m in 1usize..4) {
        let x = random_block(&mut seeded(seed), n, m);
        let op = op_norm(x.body());
        prop_assert!((vnorm_lower(&x, PExponent::INFINITY) - op).abs() <= 1e-9 * op);
        prop_assert!((upper(&x, PExponent::INFINITY) - op).abs() <= 1e-9 * op);
    }

    #[test]
    fn vnorm_upper_is_unitarily_invariant(seed in any::<u64>(), p in interior()) {
        let mut rng = seeded(seed);
        let x = random_block(&mut rng, 2, 2);
        let (u, v) = (random_unitary(&mut rng, 2), random_unitary(&mut rng, 2));
        let i = identity(2);
        let y = BlockMatrix::new(2, 2, kron(&u, &i) * x.body() * kron(&v, &i)).unwrap();
        let (a, b) = (upper(&x, p), upper(&y, p));
        prop_assert!((a - b).abs() <= 1e-6 * a, "{a} vs {b}");
    }

    #[test]
    fn cb_contractions_do_not_increase_vnorm(seed in any::<u64>(), p in interior()) {
        let mut rng = seeded(seed);
        let x = random_block(&mut rng, 2, 2);
        let w = random_cp_map(&mut rng, 2, 2, 2);
        // a CP map is a cb-contraction once ‖w(I)‖ ≤ 1
        let w = w.scale(C64::from(1.0 / op_norm(&w.image_of_identity())));
        let y = BlockMatrix::new(2, 2, w.amplify(2).apply(x.body())).unwrap();
        let (a, b) = (upper(&x, p), upper(&y, p));
        prop_assert!(b <= a + 1e-6 * a.max(1.0), "{b} > {a}");
    }

    #[test]
    fn pairing_bounded_by_trace_class_vnorm(seed in any::<u64>(), n in 1usize..4) {
        let z = random_block(&mut seeded(seed), n, n);
        let t = trace_pair(&z).unwrap().norm();
        prop_assert!(t <= upper(&z, PExponent::ONE) + 1e-6);
    }

    #[test]
    fn rho_triangle_inequality(seed in any::<u64>(), p in interior()) {
        let mut rng = seeded(seed);
        let a = PairingElement::new(random_block(&mut rng, 2, 2), p);
        let b = PairingElement::new(random_block(&mut rng, 2, 2), p);
        let opts = RhoOptions { seed, ..RhoOptions::default() };
        let ra = rho_upper(&a, &opts);
        let rb = rho_upper(&b, &opts);
        let shared = RhoOptions {
            warm: vec![
                (ra.witness.alpha.clone(), ra.witness.beta.clone()),
                (rb.witness.alpha.clone(), rb.witness.beta.clone()),
            ],
            ..opts
        };
        let rs = rho_upper(&a.add(&b).unwrap(), &shared).value;
        prop_assert!(rs <= ra.value + rb.value + 1e-5, "{rs} > {} + {}", ra.value, rb.value);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(4))]

    #[test]
    fn regular_bracket_is_sound_and_monotone(seed in any::<u64>(), p in any_p()) {
        let u = random_map(&mut seeded(seed), 2, 2);
        let opts = quick(seed);
        let lo = regular_lower(&u, p, &opts);
        let up = regular_upper(&u, p, &opts).unwrap().upper;
        prop_assert!(lo.best <= up + 1e-5, "{} > {up}", lo.best);
        prop_assert!(lo.levels.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn regular_brackets_of_adjoint_overlap(seed in any::<u64>(), p in interior()) {
        let u = random_map(&mut seeded(seed), 2, 2);
        let v = adjoint_map(&u);
        let opts = quick(seed);
        let (lu, uu) = (regular_lower(&u, p, &opts).best, regular_upper(&u, p, &opts).unwrap().upper);
        let pc = p.conjugate();
        let (lv, uv) = (regular_lower(&v, pc, &opts).best, regular_upper(&v, pc, &opts).unwrap().upper);
        prop_assert!(lu <= uv + 1e-5 && lv <= uu + 1e-5, "[{lu}, {uu}] vs [{lv}, {uv}]");
    }

    #[test]
    fn normalized_cp_maps_are_regular_contractions(seed in any::<u64>(), p in any_p(), r in 1usize..4) {
        let u = random_cp_map(&mut seeded(seed), 2, 2, r);
        let s = op_norm(&u.image_of_identity()).max(op_norm(&u.adjoint_image_of_identity()));
        let u: LinearMap = u.scale(C64::from(1.0 / s));
        let up = regular_upper(&u, p, &quick(seed)).unwrap().upper;
        prop_assert!(up <= 1.0 + 1e-5, "{up}");
    }

    #[test]
    fn regular_upper_is_cb_norm_at_infinity(seed in any::<u64>()) {
        let u = random_map(&mut seeded(seed), 2, 2);
        let up = regular_upper(&u, PExponent::INFINITY, &quick(seed)).unwrap().upper;
        let cb = cb_norm(&u).unwrap().value;
        prop_assert!(up <= cb * (1.0 + 1e-9), "{up} vs {cb}");
        prop_assert!((up - cb).abs() <= 1e-5 * cb);
    }

    #[test]
    fn cb_norm_is_stable_under_tensoring_identity(seed in any::<u64>(), k in 1usize..3) {
        let u = random_map(&mut seeded(seed), 2, 2);
        let a = cb_norm(&u).unwrap().value;
        let b = cb_norm(&u.tensor_identity(k)).unwrap().value;
        prop_assert!((a - b).abs() <= 1e-5 * a.max(1.0), "{a} vs {b}");
    }
}
