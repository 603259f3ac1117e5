//! The factorization norm `ρ_p` on `S_p^n ⊗ S_{p'}^m` and its pairing with
//! maps `u: M_n → M_m`.

use crate::block::{trace_pair, BlockMatrix, FactorOrder};
use crate::cp::LinearMap;
use crate::error::{Error, Result};
use crate::linalg::{
    eigh, hermitian_part, identity, kron, op_norm, schatten_norm, CMatrix, PExponent, C64,
};
use crate::par;
use crate::random::{random_matrix, substream};
use crate::vnorm::{vnorm_upper, UpperOptions};

/// An element `a ∈ S_p^n ⊗ S_{p'}^m`, stored with `n` as the outer factor.
#[derive(Clone, Debug)]
pub struct PairingElement {
    body: BlockMatrix,
    p: PExponent,
}

impl PairingElement {
    pub fn new(body: BlockMatrix, p: PExponent) -> Self {
        PairingElement {
            body: body.canonical(),
            p,
        }
    }

    pub fn n(&self) -> usize {
        self.body.outer_dim()
    }

    pub fn m(&self) -> usize {
        self.body.inner_dim()
    }

    pub fn p(&self) -> PExponent {
        self.p
    }

    pub fn body(&self) -> &BlockMatrix {
        &self.body
    }

    pub fn scale(&self, c: C64) -> Self {
        PairingElement {
            body: self.body.scale(c),
            p: self.p,
        }
    }

    pub fn add(&self, other: &PairingElement) -> Result<Self> {
        Ok(PairingElement {
            body: self.body.add(&other.body)?,
            p: self.p,
        })
    }
}

/// `a = (γ ⊗ α) g (δ ⊗ β)`.
#[derive(Clone, Debug)]
pub struct RhoWitness {
    pub gamma: CMatrix,
    pub alpha: CMatrix,
    pub g: CMatrix,
    pub beta: CMatrix,
    pub delta: CMatrix,
}

impl RhoWitness {
    pub fn trivial(a: &PairingElement) -> Self {
        let (n, m) = (a.n(), a.m());
        RhoWitness {
            gamma: identity(n),
            alpha: identity(m),
            g: a.body.body().clone(),
            beta: identity(m),
            delta: identity(n),
        }
    }

    pub fn value(&self, p: PExponent) -> f64 {
        let q = p.scaled(2.0);
        let qc = p.conjugate().scaled(2.0);
        schatten_norm(&self.gamma, q)
            * schatten_norm(&self.alpha, qc)
            * op_norm(&self.g)
            * schatten_norm(&self.beta, qc)
            * schatten_norm(&self.delta, q)
    }

    pub fn reconstruct(&self) -> CMatrix {
        kron(&self.gamma, &self.alpha) * &self.g * kron(&self.delta, &self.beta)
    }

    /// `y = (γ ⊗ I) g (δ ⊗ I)`, so that `a = (I ⊗ α) y (I ⊗ β)`.
    pub fn inner(&self) -> CMatrix {
        let im = identity(self.alpha.nrows());
        kron(&self.gamma, &im) * &self.g * kron(&self.delta, &im)
    }
}

#[derive(Clone, Debug)]
pub struct RhoOptions {
    pub restarts: usize,
    pub seed: u64,
    pub cycles: usize,
    /// Extra `(α, β)` starting points, e.g. from related elements.
    pub warm: Vec<(CMatrix, CMatrix)>,
}

impl Default for RhoOptions {
    fn default() -> Self {
        RhoOptions {
            restarts: 2,
            seed: 0,
            cycles: 6,
            warm: Vec::new(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct RhoResult {
    pub value: f64,
    pub witness: RhoWitness,
}

fn ridge_inverse(a: &CMatrix) -> CMatrix {
    // factors produced by the vector-norm solver are positive semidefinite;
    // a ridge is only added when they are close to singular
    let e = eigh(&hermitian_part(a));
    let top = e.max().max(f64::MIN_POSITIVE);
    let shift = if e.min() > 1e-8 * top {
        0.0
    } else {
        1e-8 * top
    };
    e.map_values(|v| 1.0 / (v.max(0.0) + shift))
}

/// Multiplies `x ∈ M_n(M_m)` by `l ⊗ r_side` factors: `(a ⊗ b) x (c ⊗ d)`.
fn sandwich(x: &CMatrix, a: &CMatrix, b: &CMatrix, c: &CMatrix, d: &CMatrix) -> CMatrix {
    kron(a, b) * x * kron(c, d)
}

fn improve(
    a: &CMatrix,
    n: usize,
    m: usize,
    p: PExponent,
    alpha: CMatrix,
    beta: CMatrix,
    cycles: usize,
) -> RhoResult {
    let pc = p.conjugate();
    let (iden_n, iden_m) = (identity(n), identity(m));
    let vopts = UpperOptions {
        tol: 1e-7,
        max_iter: 2000,
        ..UpperOptions::default()
    };
    let mut alpha = alpha;
    let mut beta = beta;
    let mut best: Option<RhoResult> = None;
    let mut last = f64::INFINITY;
    for _ in 0..cycles {
        // outer factors for fixed (α, β)
        let a1 = sandwich(
            a,
            &iden_n,
            &ridge_inverse(&alpha),
            &iden_n,
            &ridge_inverse(&beta),
        );
        let x1 = BlockMatrix::new(n, m, a1).expect("square");
        let (_, f1) = vnorm_upper(&x1, p, &vopts);
        let w1 = RhoWitness {
            gamma: f1.a.clone(),
            alpha: alpha.clone(),
            g: f1.y.canonical_body(),
            beta: beta.clone(),
            delta: f1.b.clone(),
        };
        let (gamma, delta) = (f1.a, f1.b);
        // inner factors for fixed (γ, δ), seen in M_m(M_n)
        let a2 = sandwich(
            a,
            &ridge_inverse(&gamma),
            &iden_m,
            &ridge_inverse(&delta),
            &iden_m,
        );
        let x2 = BlockMatrix::new(n, m, a2)
            .expect("square")
            .swap_roles()
            .canonical();
        let (_, f2) = vnorm_upper(&x2, pc, &vopts);
        let g = f2.y.swap_roles().canonical().into_body();
        let w2 = RhoWitness {
            gamma,
            alpha: f2.a.clone(),
            g,
            beta: f2.b.clone(),
            delta,
        };
        alpha = f2.a;
        beta = f2.b;
        let mut cur = f64::INFINITY;
        for w in [w1, w2] {
            let v = w.value(p);
            cur = cur.min(v);
            if best.as_ref().is_none_or(|b| v < b.value) {
                best = Some(RhoResult {
                    value: v,
                    witness: w,
                });
            }
        }
        if cur >= last * (1.0 - 1e-9) {
            break;
        }
        last = cur;
    }
    best.expect("at least one cycle")
}

/// Upper bound for `ρ_p(a)` by alternating exact vector-norm solves over the
/// outer factors `(γ, δ)` and the inner factors `(α, β)`.
pub fn rho_upper(a: &PairingElement, opts: &RhoOptions) -> RhoResult {
    let (n, m, p) = (a.n(), a.m(), a.p());
    let body = a.body.body();
    let fro = body.norm();
    if fro == 0.0 {
        return RhoResult {
            value: 0.0,
            witness: RhoWitness::trivial(a),
        };
    }
    // fix scale and phase so the search is invariant under a ↦ λa
    let (mut pos, mut top) = ((0, 0), -1.0);
    for c in 0..body.ncols() {
        for r in 0..body.nrows() {
            let v = body[(r, c)].norm();
            if v > top * (1.0 + 1e-9) {
                top = v;
                pos = (r, c);
            }
        }
    }
    let phase = body[pos] / body[pos].norm();
    let lambda = phase * fro;
    let normalized = body / lambda;

    let mut starts: Vec<(CMatrix, CMatrix)> = vec![(identity(m), identity(m))];
    starts.extend(opts.warm.iter().cloned());
    for s in 1..opts.restarts.max(1) {
        let mut rng = substream(opts.seed, s as u64);
        let ga = random_matrix(&mut rng, m, m);
        let gb = random_matrix(&mut rng, m, m);
        let eps = identity(m).scale(1e-3);
        starts.push((&ga * ga.adjoint() + &eps, &gb * gb.adjoint() + eps));
    }
    let results = par::map(&starts, |(al, be)| {
        improve(&normalized, n, m, p, al.clone(), be.clone(), opts.cycles)
    });
    let best = results
        .into_iter()
        .fold(None::<RhoResult>, |acc, r| match acc {
            Some(a) if a.value <= r.value => Some(a),
            _ => Some(r),
        })
        .expect("at least one start");
    let w = best.witness;
    RhoResult {
        value: best.value * fro,
        witness: RhoWitness {
            g: w.g * lambda,
            ..w
        },
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairingValue {
    /// `Σ_rc a_rc J_rc`.
    pub direct: C64,
    /// `trace_pair((ᵗα ⊗ I)(u ⊗ I)(y)(ᵗβ ⊗ I))` for the witness in use.
    pub via_witness: C64,
}

fn check_dims(u: &LinearMap, a: &PairingElement) -> Result<()> {
    if u.in_dim() != a.n() || u.out_dim() != a.m() {
        return Err(Error::dim(format!(
            "map M_{} → M_{} cannot pair with an element of S^{} ⊗ S^{}",
            u.in_dim(),
            u.out_dim(),
            a.n(),
            a.m()
        )));
    }
    Ok(())
}

pub fn pairing_direct(u: &LinearMap, a: &PairingElement) -> Result<C64> {
    check_dims(u, a)?;
    Ok(u.choi().component_mul(a.body.body()).sum())
}

/// `⟨u, a⟩` by both routes, using the given factorization of `a`.
pub fn pairing_value_with(
    u: &LinearMap,
    a: &PairingElement,
    w: &RhoWitness,
) -> Result<PairingValue> {
    let direct = pairing_direct(u, a)?;
    let m = a.m();
    let y = w.inner();
    let z = u.tensor_identity(m).apply(&y);
    let im = identity(m);
    let zh = kron(&w.alpha.transpose(), &im) * z * kron(&w.beta.transpose(), &im);
    let via_witness = trace_pair(&BlockMatrix::with_order(m, m, zh, FactorOrder::OuterInner)?)?;
    Ok(PairingValue {
        direct,
        via_witness,
    })
}

pub fn pairing_value(u: &LinearMap, a: &PairingElement) -> Result<PairingValue> {
    pairing_value_with(u, a, &RhoWitness::trivial(a))
}

#[derive(Clone, Copy, Debug)]
pub struct DualityCheck {
    pub pairing: f64,
    pub bound: f64,
    pub holds: bool,
}

/// `|⟨u, a⟩| ≤ ρ_p(a) · ‖u‖_r` with both factors replaced by upper bounds.
pub fn duality_check(pairing: C64, rho: f64, regular: f64, tol: f64) -> DualityCheck {
    let bound = rho * regular;
    DualityCheck {
        pairing: pairing.norm(),
        bound,
        holds: pairing.norm() <= bound + tol,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::unit;
    use crate::random::{random_block, random_map, seeded};
    use crate::vnorm::vnorm_upper;

    fn element(body: BlockMatrix, p: f64) -> PairingElement {
        PairingElement::new(body, PExponent::new(p).unwrap())
    }

    #[test]
    fn scalar_case() {
        let a = element(
            BlockMatrix::new(1, 1, CMatrix::from_element(1, 1, C64::new(3.0, -4.0))).unwrap(),
            2.0,
        );
        let r = rho_upper(&a, &RhoOptions::default());
        assert!((r.value - 5.0).abs() < 1e-9);
    }

    #[test]
    fn rank_one_unit_tensor() {
        let e = unit(2, 0, 0);
        for p in [1.0, 2.0, 3.0, f64::INFINITY] {
            let a = element(BlockMatrix::from_kron(&e, &e).unwrap(), p);
            let r = rho_upper(&a, &RhoOptions::default());
            assert!((r.value - 1.0).abs() < 1e-6, "p = {p}: {}", r.value);
        }
    }

    #[test]
    fn witness_reconstructs() {
        let mut rng = seeded(3);
        let a = element(random_block(&mut rng, 2, 2), 3.0);
        let r = rho_upper(&a, &RhoOptions::default());
        let rec = r.witness.reconstruct();
        assert!((rec - a.body().body()).norm() < 1e-6 * a.body().body().norm());
        assert!((r.witness.value(a.p()) - r.value).abs() < 1e-9 * r.value);
    }

    #[test]
    fn infinity_matches_flipped_trace_class_norm() {
        let mut rng = seeded(4);
        let a = element(random_block(&mut rng, 2, 2), f64::INFINITY);
        let r = rho_upper(&a, &RhoOptions::default());
        let flipped = a.body().swap_roles().canonical();
        let (v, _) = vnorm_upper(&flipped, PExponent::ONE, &UpperOptions::default());
        assert!((r.value - v).abs() < 1e-4 * v, "{} {v}", r.value);
    }

    #[test]
    fn homogeneous() {
        let mut rng = seeded(5);
        let a = element(random_block(&mut rng, 2, 2), 2.0);
        let lam = C64::new(-0.7, 1.9);
        let r1 = rho_upper(&a, &RhoOptions::default()).value;
        let r2 = rho_upper(&a.scale(lam), &RhoOptions::default()).value;
        assert!((lam.norm() * r1 - r2).abs() < 1e-6 * r2);
    }

    #[test]
    fn pairing_routes_agree() {
        let mut rng = seeded(6);
        let u = random_map(&mut rng, 2, 2);
        let a = element(random_block(&mut rng, 2, 2), 2.0);
        let r = rho_upper(&a, &RhoOptions::default());
        let pv = pairing_value_with(&u, &a, &r.witness).unwrap();
        assert!((pv.direct - pv.via_witness).norm() < 1e-9 * pv.direct.norm().max(1.0));
        let pv = pairing_value(&u, &a).unwrap();
        assert!((pv.direct - pv.via_witness).norm() < 1e-9 * pv.direct.norm().max(1.0));
    }

    #[test]
    fn identity_pairs_with_unit_tensor() {
        let e = unit(2, 0, 0);
        let a = element(BlockMatrix::from_kron(&e, &e).unwrap(), 2.0);
        let pv = pairing_value(&LinearMap::identity(2), &a).unwrap();
        assert!((pv.direct - C64::new(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let mut rng = seeded(7);
        let u = random_map(&mut rng, 2, 3);
        let a = element(random_block(&mut rng, 2, 2), 2.0);
        assert!(pairing_value(&u, &a).is_err());
    }
}
