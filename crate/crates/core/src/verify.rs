//! The acceptance suite: fourteen seeded checks, shared by the command line
//! `verify` runner and the integration tests.

use serde::Serialize;

use crate::block::{fubini_reshuffle, trace_pair, BlockMatrix};
use crate::cp::{adjoint_map, cb_norm, is_cp, sp_op_norm_lower, LinearMap, SearchBudget};
use crate::error::Result;
use crate::extension::{
    extend, lattice_regular_oracle, ExtensionOptions, SubspaceBasis, SubspaceMap,
};
use crate::haagerup::{self, ChoiSpec};
use crate::linalg::{identity, kron, op_norm, schatten_norm, trace, unit, CMatrix, PExponent, C64};
use crate::random::{
    complex_normal, random_block, random_cp_map, random_map, random_matrix, random_real, substream,
    Rng,
};
use crate::regular::{decompose_cp, regular_lower, regular_upper, RegularOptions};
use crate::rho::{duality_check, pairing_direct, rho_upper, PairingElement, RhoOptions};
use crate::vnorm::{vnorm_lower, vnorm_upper, UpperOptions};

#[derive(Clone, Debug, Serialize)]
pub struct CriterionOutcome {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

pub const CRITERIA: [(u8, &str); 14] = [
    (1, "endpoint collapse at p = ∞"),
    (2, "transpose benchmark"),
    (3, "completely positive bound"),
    (4, "adjoint symmetry"),
    (5, "cb lower bound below regular upper bound"),
    (6, "vector norm exact at p = ∞"),
    (7, "crossnorm on elementary tensors"),
    (8, "Fubini reshuffle invariance"),
    (9, "trace pairing identities"),
    (10, "duality inequality"),
    (11, "completely positive decomposition"),
    (12, "regular extension"),
    (13, "lattice reduction"),
    (14, "norm axioms of the pairing norm"),
];

/// Running worst case of a family of checks.
struct Tally {
    failures: Vec<String>,
    worst: f64,
    count: usize,
}

impl Tally {
    fn new() -> Self {
        Tally {
            failures: Vec::new(),
            worst: f64::NEG_INFINITY,
            count: 0,
        }
    }

    /// Records `slack ≥ 0` as a pass; the margin printed is the worst slack.
    fn check(&mut self, slack: f64, what: impl FnOnce() -> String) {
        self.count += 1;
        if self.count == 1 || slack < self.worst {
            self.worst = slack;
        }
        if !(slack >= 0.0) {
            self.failures.push(what());
        }
    }

    fn finish(self, id: u8, extra: String) -> CriterionOutcome {
        let name = CRITERIA[id as usize - 1].1;
        let mut detail = format!("{} checks, worst slack {:.3e}", self.count, self.worst);
        if !extra.is_empty() {
            detail.push_str("; ");
            detail.push_str(&extra);
        }
        if let Some(f) = self.failures.first() {
            detail.push_str(&format!("; {} failed, first: {f}", self.failures.len()));
        }
        CriterionOutcome {
            id,
            name,
            passed: self.failures.is_empty(),
            detail,
        }
    }
}

fn rng_for(seed: u64, criterion: u8, instance: usize) -> Rng {
    substream(seed, criterion as u64 * 1_000_000 + instance as u64)
}

fn px(v: f64) -> PExponent {
    PExponent::new(v).expect("valid exponent")
}

fn lower_opts(seed: u64, levels: usize) -> RegularOptions {
    RegularOptions {
        levels,
        seed,
        ..RegularOptions::default()
    }
}

fn c1(seed: u64) -> Result<CriterionOutcome> {
    let mut t = Tally::new();
    for i in 0..20 {
        let u = random_map(&mut rng_for(seed, 1, i), 2, 2);
        let cb = cb_norm(&u)?.value;
        let up = regular_upper(&u, PExponent::INFINITY, &RegularOptions::default())?.upper;
        t.check(1e-4 * cb - (up - cb).abs(), || {
            format!("instance {i}: upper {up} vs cb {cb}")
        });
        let low = regular_lower(&u, PExponent::INFINITY, &lower_opts(seed, 2)).best;
        t.check(low - 0.99 * cb, || {
            format!("instance {i}: lower {low} vs cb {cb}")
        });
    }
    Ok(t.finish(1, String::new()))
}

fn c2(seed: u64) -> Result<CriterionOutcome> {
    let mut t = Tally::new();
    let tr = LinearMap::transpose(2);
    let margin = is_cp(&tr, 1e-9);
    t.check(if margin.is_cp { -1.0 } else { 0.0 }, || {
        "transpose reported CP".into()
    });
    t.check(1e-9 - (margin.margin + 1.0).abs(), || {
        format!("margin {}", margin.margin)
    });
    let cb = cb_norm(&tr)?.value;
    t.check(1e-4 - (cb - 2.0).abs(), || format!("cb norm {cb}"));
    let up = regular_upper(&tr, PExponent::INFINITY, &RegularOptions::default())?.upper;
    let low = regular_lower(&tr, PExponent::INFINITY, &lower_opts(seed, 2)).best;
    t.check((2.0 - low + 1e-6).min(up - 2.0 + 1e-6), || {
        format!("bracket [{low}, {up}]")
    });
    Ok(t.finish(
        2,
        format!(
            "margin {:.12}, cb {cb:.9}, bracket [{low:.9}, {up:.9}]",
            margin.margin
        ),
    ))
}

fn c3(seed: u64) -> Result<CriterionOutcome> {
    let mut t = Tally::new();
    for i in 0..20 {
        let n = if i < 10 { 2 } else { 3 };
        let mut rng = rng_for(seed, 3, i);
        let u = random_cp_map(&mut rng, n, n, 2);
        let bound = op_norm(&u.image_of_identity()).max(op_norm(&u.adjoint_image_of_identity()));
        for pv in [1.0, 2.0, 4.0, f64::INFINITY] {
            let p = px(pv);
            let up = regular_upper(&u, p, &RegularOptions::default())?.upper;
            t.check(bound + 1e-4 - up, || {
                format!("instance {i}, p = {p}: upper {up} > {bound}")
            });
            let low = regular_lower(&u, p, &lower_opts(seed, 2)).best;
            t.check(up + 1e-5 - low, || {
                format!("instance {i}, p = {p}: lower {low} > upper {up}")
            });
        }
    }
    Ok(t.finish(3, String::new()))
}

fn adjoint_instances(seed: u64) -> Vec<LinearMap> {
    (0..10)
        .map(|i| random_map(&mut rng_for(seed, 4, i), 2, 2))
        .collect()
}

const ADJOINT_EXPONENTS: [f64; 3] = [4.0 / 3.0, 2.0, 4.0];

fn c4(seed: u64) -> Result<CriterionOutcome> {
    let mut t = Tally::new();
    for (i, u) in adjoint_instances(seed).iter().enumerate() {
        let ua = adjoint_map(u);
        for pv in ADJOINT_EXPONENTS {
            let p = px(pv);
            let opts = lower_opts(seed, 2);
            let (l1, u1) = (
                regular_lower(u, p, &opts).best,
                regular_upper(u, p, &opts)?.upper,
            );
            let pc = p.conjugate();
            let (l2, u2) = (
                regular_lower(&ua, pc, &opts).best,
                regular_upper(&ua, pc, &opts)?.upper,
            );
            let slack = u1.min(u2) - l1.max(l2) + 1e-4;
            t.check(slack, || {
                format!("instance {i}, p = {p}: [{l1}, {u1}] vs [{l2}, {u2}]")
            });
        }
    }
    Ok(t.finish(4, String::new()))
}

fn c5(seed: u64) -> Result<CriterionOutcome> {
    let mut t = Tally::new();
    for (i, u) in adjoint_instances(seed).iter().enumerate() {
        for pv in ADJOINT_EXPONENTS {
            let p = px(pv);
            let up = regular_upper(u, p, &RegularOptions::default())?.upper;
            for k in 1..=2 {
                let budget = SearchBudget {
                    seed: seed ^ (k as u64),
                    ..SearchBudget::default()
                };
                let (low, _) = sp_op_norm_lower(&u.tensor_identity(k), p, &budget);
                t.check(up + 1e-4 - low, || {
                    format!("instance {i}, p = {p}, k = {k}: {low} > {up}")
                });
            }
        }
    }
    Ok(t.finish(5, String::new()))
}

fn c6(seed: u64) -> Result<CriterionOutcome> {
    let mut t = Tally::new();
    for i in 0..50 {
        let mut rng = rng_for(seed, 6, i);
        let n = 1 + i % 3;
        let m = 1 + (i / 3) % 3;
        let x = random_block(&mut rng, n, m);
        let target = op_norm(x.body());
        let (up, _) = vnorm_upper(&x, PExponent::INFINITY, &UpperOptions::default());
        let low = vnorm_lower(&x, PExponent::INFINITY);
        let err = (up - target).abs().max((low - target).abs());
        t.check(1e-6 - err, || {
            format!("instance {i}: [{low}, {up}] vs {target}")
        });
    }
    Ok(t.finish(6, String::new()))
}

fn c7(seed: u64) -> Result<CriterionOutcome> {
    let mut t = Tally::new();
    for pv in [1.0, 2.0, 3.0] {
        let p = px(pv);
        for i in 0..5 {
            let mut rng = rng_for(seed, 7, i + 10 * pv as usize);
            let a = random_matrix(&mut rng, 2, 2);
            let e = random_matrix(&mut rng, 2, 2);
            let target = schatten_norm(&a, p) * op_norm(&e);
            let x = BlockMatrix::from_kron(&a, &e)?;
            let opts = UpperOptions {
                seed,
                ..UpperOptions::default()
            };
            let (up, _) = vnorm_upper(&x, p, &opts);
            let low = vnorm_lower(&x, p);
            t.check(target + 1e-4 - up, || {
                format!("p = {p}, instance {i}: upper {up} > {target}")
            });
            t.check(low - 0.9 * target, || {
                format!("p = {p}, instance {i}: lower {low} < 0.9·{target}")
            });
        }
    }
    Ok(t.finish(7, String::new()))
}

fn c8(seed: u64) -> Result<CriterionOutcome> {
    let mut t = Tally::new();
    let p = PExponent::TWO;
    let opts = UpperOptions {
        seed,
        ..UpperOptions::default()
    };
    for i in 0..10 {
        let x = random_block(&mut rng_for(seed, 8, i), 4, 2);
        let y = fubini_reshuffle(&x, 2, 2)?;
        let (u1, _) = vnorm_upper(&x, p, &opts);
        let (u2, _) = vnorm_upper(&y, p, &opts);
        let (l1, l2) = (vnorm_lower(&x, p), vnorm_lower(&y, p));
        let slack = u1.min(u2) - l1.max(l2) + 1e-4;
        t.check(slack, || {
            format!("instance {i}: [{l1}, {u1}] vs [{l2}, {u2}]")
        });
    }
    Ok(t.finish(8, String::new()))
}

fn c9(seed: u64) -> Result<CriterionOutcome> {
    let mut t = Tally::new();
    let opts = UpperOptions {
        seed,
        ..UpperOptions::default()
    };
    for i in 0..50 {
        let mut rng = rng_for(seed, 9, i);
        let m = 2 + i % 2;
        let z = random_block(&mut rng, m, m);
        let tp = trace_pair(&z)?;
        let (up, _) = vnorm_upper(&z, PExponent::ONE, &opts);
        t.check(up + 1e-6 - tp.norm(), || {
            format!("instance {i}: |tr z| = {} > {up}", tp.norm())
        });

        let alpha = random_matrix(&mut rng, m, m);
        let beta = random_matrix(&mut rng, m, m);
        let im = identity(m);
        let left = kron(&alpha, &im) * z.body() * kron(&beta, &im);
        let right = kron(&im, &alpha.transpose()) * z.body() * kron(&im, &beta.transpose());
        let l = trace_pair(&BlockMatrix::new(m, m, left)?)?;
        let r = trace_pair(&BlockMatrix::new(m, m, right)?)?;
        t.check(1e-9 * l.norm().max(1.0) - (l - r).norm(), || {
            format!("instance {i}: routes {l} vs {r}")
        });

        let a = random_matrix(&mut rng, m, m);
        let b = random_matrix(&mut rng, m, m);
        let e = trace_pair(&BlockMatrix::from_kron(&a, &b)?)?;
        let direct = trace(&(a.transpose() * &b));
        t.check(1e-10 * e.norm().max(1.0) - (e - direct).norm(), || {
            format!("instance {i}: {e} vs {direct}")
        });
    }
    Ok(t.finish(9, String::new()))
}

fn c10(seed: u64) -> Result<CriterionOutcome> {
    let mut t = Tally::new();
    let mut above = 0;
    let mut ratios = Vec::new();
    for i in 0..20 {
        let mut rng = rng_for(seed, 10, i);
        let p = px(if i % 2 == 0 { 2.0 } else { 3.0 });
        let u = random_map(&mut rng, 2, 2);
        let a = PairingElement::new(random_block(&mut rng, 2, 2), p);
        let rho = rho_upper(
            &a,
            &RhoOptions {
                seed,
                ..RhoOptions::default()
            },
        )
        .value;
        let reg = regular_upper(&u, p, &RegularOptions::default())?.upper;
        let pairing = pairing_direct(&u, &a)?;
        let check = duality_check(pairing, rho, reg, 1e-5);
        t.check(check.bound + 1e-5 - check.pairing, || {
            format!(
                "instance {i}: |<u, a>| = {} > {}",
                check.pairing, check.bound
            )
        });

        // maximize the pairing over maps whose certificate is at most one
        let mut best = check.pairing / check.bound;
        let body = a.body().body();
        let an = body.scale(1.0 / body.norm());
        if let Ok(raw) = haagerup::solve_raw(
            2,
            2,
            p.theta(),
            None,
            ChoiSpec::Dual(&an),
            &Default::default(),
        ) {
            let v = LinearMap::from_choi(2, 2, raw.choi)?;
            let reg_v = regular_upper(&v, p, &RegularOptions::default())?.upper;
            let pv = pairing_direct(&v, &a)?.norm();
            t.check(rho * reg_v + 1e-5 - pv, || {
                format!("instance {i}: optimized pairing {pv} > {}", rho * reg_v)
            });
            if reg_v > 0.0 {
                best = best.max(pv / (rho * reg_v));
            }
        }
        if best > 0.5 {
            above += 1;
        }
        ratios.push(best);
    }
    let min = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let soft = if above * 2 >= ratios.len() {
        "met"
    } else {
        "not met"
    };
    Ok(t.finish(
        10,
        format!("duality ratio > 0.5 on {above}/20 instances (soft threshold {soft}), smallest ratio {min:.4}"),
    ))
}

fn c11(seed: u64) -> Result<CriterionOutcome> {
    let mut t = Tally::new();
    let mut wins = 0;
    for i in 0..20 {
        let mut rng = rng_for(seed, 11, i);
        let p = px(if i % 2 == 0 { 2.0 } else { 3.0 });
        let u = random_map(&mut rng, 2, 2);
        let d = decompose_cp(&u, p)?;
        for (j, part) in d.parts.iter().enumerate() {
            let c = is_cp(part, 1e-7);
            t.check(c.margin + 1e-7, || {
                format!("instance {i}: part {} margin {}", j + 1, c.margin)
            });
        }
        let res = (d.recombine().choi() - u.choi()).norm();
        t.check(1e-7 - res, || {
            format!("instance {i}: recombination residual {res}")
        });
        let rep = regular_upper(&u, p, &RegularOptions::default())?;
        let dv = rep.decomposition_value.unwrap_or(f64::NAN);
        t.check(1e-6 - (d.value - dv).abs(), || {
            format!("instance {i}: {} vs {dv}", d.value)
        });
        if rep.certificate.kind() == "four-part decomposition" {
            wins += 1;
        }
    }
    Ok(t.finish(
        11,
        format!("decomposition was the best certificate on {wins}/20 maps"),
    ))
}

fn c12(seed: u64) -> Result<CriterionOutcome> {
    let mut t = Tally::new();
    let spaces = [
        (
            "span{e11}",
            SubspaceBasis::new(2, vec![unit(2, 0, 0)])?,
            1e-3,
        ),
        ("T_2", SubspaceBasis::upper_triangular(2), f64::INFINITY),
    ];
    let mut worst_rel = 0.0f64;
    for (si, (name, s, abs_gap)) in spaces.iter().enumerate() {
        for pv in [1.0, 2.0, f64::INFINITY] {
            let p = px(pv);
            for i in 0..5 {
                let u = random_map(&mut rng_for(seed, 12, si * 100 + i), 2, 2);
                let f = SubspaceMap::restrict(&u, s.clone())?;
                let opts = ExtensionOptions {
                    seed,
                    ..ExtensionOptions::default()
                };
                let r = extend(&f, p, &opts)?;
                t.check(1e-8 - r.restriction_residual, || {
                    format!(
                        "{name}, p = {p}, map {i}: residual {}",
                        r.restriction_residual
                    )
                });
                let rel = r.gap / r.subspace_lower;
                worst_rel = worst_rel.max(rel);
                t.check(0.15 * r.subspace_lower - r.gap, || {
                    format!(
                        "{name}, p = {p}, map {i}: gap {} with lower {}",
                        r.gap, r.subspace_lower
                    )
                });
                if abs_gap.is_finite() {
                    t.check(abs_gap - r.gap, || {
                        format!("{name}, p = {p}, map {i}: gap {}", r.gap)
                    });
                }
            }
        }
    }
    Ok(t.finish(12, format!("largest relative gap {worst_rel:.3e}")))
}

fn c13(seed: u64) -> Result<CriterionOutcome> {
    let mut t = Tally::new();
    for i in 0..10 {
        let mut rng = rng_for(seed, 13, i);
        let n = if i < 5 { 2 } else { 3 };
        let mat = if i % 2 == 0 {
            random_real(&mut rng, n, n).map(C64::from)
        } else {
            CMatrix::from_fn(n, n, |_, _| complex_normal(&mut rng))
        };
        let u = LinearMap::diagonal_embedding(&mat)?;
        for p in [PExponent::ONE, PExponent::INFINITY] {
            let oracle = lattice_regular_oracle(&u, p)?;
            let low = regular_lower(&u, p, &lower_opts(seed, 2)).best;
            let up = regular_upper(&u, p, &RegularOptions::default())?.upper;
            let slack = (oracle + 1e-3 - low).min(up - oracle + 1e-3);
            t.check(slack, || {
                format!("map {i}, p = {p}: [{low}, {up}] vs {oracle}")
            });
        }
    }
    Ok(t.finish(13, String::new()))
}

fn c14(seed: u64) -> Result<CriterionOutcome> {
    let mut t = Tally::new();
    for i in 0..20 {
        let mut rng = rng_for(seed, 14, i);
        let p = px(if i % 2 == 0 { 2.0 } else { 3.0 });
        let a = PairingElement::new(random_block(&mut rng, 2, 2), p);
        let b = PairingElement::new(random_block(&mut rng, 2, 2), p);
        let lambda = complex_normal(&mut rng);
        let opts = RhoOptions {
            seed,
            ..RhoOptions::default()
        };
        let ra = rho_upper(&a, &opts);
        let rb = rho_upper(&b, &opts);
        let rl = rho_upper(&a.scale(lambda), &opts).value;
        let expect = lambda.norm() * ra.value;
        t.check(1e-6 * expect.max(1.0) - (rl - expect).abs(), || {
            format!("instance {i}: rho(λa) = {rl} vs |λ| rho(a) = {expect}")
        });
        let shared = RhoOptions {
            warm: vec![
                (ra.witness.alpha.clone(), ra.witness.beta.clone()),
                (rb.witness.alpha.clone(), rb.witness.beta.clone()),
            ],
            ..opts
        };
        let rs = rho_upper(&a.add(&b)?, &shared).value;
        t.check(ra.value + rb.value + 1e-5 - rs, || {
            format!(
                "instance {i}: rho(a + b) = {rs} > {} + {}",
                ra.value, rb.value
            )
        });
    }
    Ok(t.finish(14, String::new()))
}

/// Runs one criterion; errors from the numerical routines count as failures.
pub fn run_criterion(id: u8, seed: u64) -> CriterionOutcome {
    let result = match id {
        1 => c1(seed),
        2 => c2(seed),
        3 => c3(seed),
        4 => c4(seed),
        5 => c5(seed),
        6 => c6(seed),
        7 => c7(seed),
        8 => c8(seed),
        9 => c9(seed),
        10 => c10(seed),
        11 => c11(seed),
        12 => c12(seed),
        13 => c13(seed),
        14 => c14(seed),
        _ => panic!("no criterion {id}"),
    };
    result.unwrap_or_else(|e| CriterionOutcome {
        id,
        name: CRITERIA[id as usize - 1].1,
        passed: false,
        detail: format!("error: {e}"),
    })
}

pub fn run_all(seed: u64) -> Vec<CriterionOutcome> {
    CRITERIA
        .iter()
        .map(|&(id, _)| run_criterion(id, seed))
        .collect()
}

impl std::fmt::Display for CriterionOutcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let status = if self.passed { "PASS" } else { "FAIL" };
        write!(
            f,
            "[{status}] {:>2} {}: {}",
            self.id, self.name, self.detail
        )
    }
}
