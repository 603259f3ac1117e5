//! Brackets for the norm of `S_p^n[M_m]`:
//!
//! ```text
//! ‖x‖ = inf { ‖a‖_{2p} ‖y‖_{M_n(M_m)} ‖b‖_{2p} : x = (a ⊗ I) y (b ⊗ I) }.
//! ```
//!
//! With `A = a a*` and `B = b* b` the infimum is the convex program
//! `min √(‖A‖_p ‖B‖_p)` over `[[A ⊗ I, x], [x*, B ⊗ I]] ⪰ 0`. The upper bound
//! solves it by ADMM and turns the iterate into an explicit factorization; the
//! lower bound maximizes a trace-duality witness.

use serde::Serialize;

use crate::block::BlockMatrix;
use crate::cp::NormBracket;
use crate::error::Result;
use crate::linalg::{
    eigh, hermitian_part, identity, kron, lp_norm, op_norm, polar_isometry, psd_projection,
    schatten_dual_maximizer, schatten_norm, svd, trace, trace_inner, CMatrix, PExponent, C64,
};
use crate::par;
use crate::random::{random_matrix, random_positive_definite, substream};

pub use crate::block::fubini_reshuffle;

/// `x = (a ⊗ I_m) · y · (b ⊗ I_m)` with `value = ‖a‖_{2p} ‖y‖_∞ ‖b‖_{2p}`.
#[derive(Clone, Debug)]
pub struct Factorization {
    pub a: CMatrix,
    pub y: BlockMatrix,
    pub b: CMatrix,
    pub value: f64,
}

impl Factorization {
    pub fn reconstruct(&self) -> CMatrix {
        let m = self.y.inner_dim();
        kron(&self.a, &identity(m)) * self.y.canonical_body() * kron(&self.b, &identity(m))
    }
}

#[derive(Clone, Copy, Debug)]
pub struct UpperOptions {
    pub restarts: usize,
    pub seed: u64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for UpperOptions {
    fn default() -> Self {
        UpperOptions {
            restarts: 1,
            seed: 0,
            max_iter: 5000,
            tol: 1e-9,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct LowerOptions {
    pub starts: usize,
    pub iterations: usize,
    pub seed: u64,
}

impl Default for LowerOptions {
    fn default() -> Self {
        LowerOptions {
            starts: 6,
            iterations: 300,
            seed: 0x5eed,
        }
    }
}

/// Dual witness for the lower bound: `|tr((α⊗I) x (β⊗I) W)|` divided by the
/// norms of its factors.
#[derive(Clone, Debug, Serialize)]
pub struct LowerWitness {
    pub kind: &'static str,
    pub value: f64,
}

/// `argmin_s c|s|^p + ½(s − v)²`.
fn prox_power(v: f64, c: f64, p: f64) -> f64 {
    let a = v.abs();
    let s = if p == 1.0 {
        (a - c).max(0.0)
    } else {
        // s + c p s^{p-1} = a has a unique root in [0, a]
        let (mut lo, mut hi) = (0.0f64, a);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if mid + c * p * mid.powf(p - 1.0) > a {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    };
    s.copysign(v)
}

fn prox_hermitian(t: &CMatrix, c: f64, p: f64) -> CMatrix {
    eigh(t).map_values(|v| prox_power(v, c, p))
}

/// How the off-diagonal block of the LMI is determined.
pub(crate) enum XSpec<'a> {
    Fixed(&'a CMatrix),
    /// Frobenius projection onto an affine set.
    Affine(&'a (dyn Fn(&CMatrix) -> CMatrix + Sync)),
}

pub(crate) struct LmiSolution {
    pub a: CMatrix,
    pub b: CMatrix,
    pub x: CMatrix,
}

/// ADMM for `min ‖A‖_p^p + ‖B‖_p^p` over `[[A⊗I, X], [X*, B⊗I]] ⪰ 0`.
pub(crate) fn lmi_admm(
    n: usize,
    m: usize,
    p: f64,
    spec: XSpec<'_>,
    start: (CMatrix, CMatrix),
    max_iter: usize,
    tol: f64,
) -> LmiSolution {
    let nn = n * m;
    let rho = 1.0;
    let alpha = 1.5;
    let im = identity(m);
    let mut a = start.0;
    let mut b = start.1;
    let mut x = match &spec {
        XSpec::Fixed(x) => (*x).clone(),
        XSpec::Affine(proj) => proj(&CMatrix::zeros(nn, nn)),
    };
    let assemble = |a: &CMatrix, b: &CMatrix, x: &CMatrix| {
        let mut mm = CMatrix::zeros(2 * nn, 2 * nn);
        mm.view_mut((0, 0), (nn, nn)).copy_from(&kron(a, &im));
        mm.view_mut((nn, nn), (nn, nn)).copy_from(&kron(b, &im));
        mm.view_mut((0, nn), (nn, nn)).copy_from(x);
        mm.view_mut((nn, 0), (nn, nn)).copy_from(&x.adjoint());
        mm
    };
    let mut z = psd_projection(&assemble(&a, &b, &x));
    let mut u = CMatrix::zeros(2 * nn, 2 * nn);
    let c = 1.0 / (rho * m as f64);
    for it in 0..max_iter {
        let t = &z - &u;
        a = prox_hermitian(
            &hermitian_part(&trace_inner(&t.view((0, 0), (nn, nn)).into_owned(), n, m))
                .scale(1.0 / m as f64),
            c,
            p,
        );
        b = prox_hermitian(
            &hermitian_part(&trace_inner(&t.view((nn, nn), (nn, nn)).into_owned(), n, m))
                .scale(1.0 / m as f64),
            c,
            p,
        );
        if let XSpec::Affine(proj) = &spec {
            let off = (t.view((0, nn), (nn, nn)).into_owned()
                + t.view((nn, 0), (nn, nn)).adjoint())
            .scale(0.5);
            x = proj(&off);
        }
        let mk = assemble(&a, &b, &x);
        let mh = &mk * C64::from(alpha) + &z * C64::from(1.0 - alpha);
        let z_old = std::mem::replace(&mut z, psd_projection(&(&mh + &u)));
        u += &mh - &z;
        if it % 25 == 24 {
            let r = (&mk - &z).norm();
            let d = rho * (&z - &z_old).norm();
            if r < tol && d < tol {
                break;
            }
        }
    }
    LmiSolution { a, b, x }
}

/// Explicit factorization from PSD estimates of `a a*` and `b* b`.
pub(crate) fn certify(
    x: &CMatrix,
    n: usize,
    m: usize,
    p: PExponent,
    a_sq: &CMatrix,
    b_sq: &CMatrix,
) -> Factorization {
    let im = identity(m);
    let q = p.scaled(2.0);
    let mut best: Option<Factorization> = None;
    for ridge in [1e-12, 1e-10, 1e-8, 1e-6] {
        let ea = eigh(a_sq);
        let eb = eigh(b_sq);
        let fa = ea.max().max(f64::MIN_POSITIVE) * ridge;
        let fb = eb.max().max(f64::MIN_POSITIVE) * ridge;
        let a = ea.map_values(|v| (v.max(0.0) + fa).sqrt());
        let ai = ea.map_values(|v| 1.0 / (v.max(0.0) + fa).sqrt());
        let b = eb.map_values(|v| (v.max(0.0) + fb).sqrt());
        let bi = eb.map_values(|v| 1.0 / (v.max(0.0) + fb).sqrt());
        let y = kron(&ai, &im) * x * kron(&bi, &im);
        let value = schatten_norm(&a, q) * op_norm(&y) * schatten_norm(&b, q);
        if value.is_finite() && best.as_ref().is_none_or(|f| value < f.value) {
            best = Some(Factorization {
                a,
                y: BlockMatrix::new(n, m, y).expect("dimensions match"),
                b,
                value,
            });
        }
    }
    best.expect("at least one finite ridge")
}

fn trivial_factorization(x: &CMatrix, n: usize, m: usize, p: PExponent) -> Factorization {
    let q = p.scaled(2.0);
    let i = identity(n);
    let s = schatten_norm(&i, q);
    Factorization {
        value: s * s * op_norm(x),
        a: i.clone(),
        y: BlockMatrix::new(n, m, x.clone()).expect("dimensions match"),
        b: i,
    }
}

/// Upper bound with an explicit factorization.
pub fn vnorm_upper(x: &BlockMatrix, p: PExponent, opts: &UpperOptions) -> (f64, Factorization) {
    let (n, m) = (x.outer_dim(), x.inner_dim());
    let body = x.canonical_body();
    if p.is_infinite() {
        let f = trivial_factorization(&body, n, m, p);
        return (f.value, f);
    }
    let s = op_norm(&body);
    if s == 0.0 {
        let f = trivial_factorization(&body, n, m, p);
        return (0.0, f);
    }
    if m == 1 {
        // polar factorization x = |x*|^{1/2} w |x|^{1/2} is optimal
        let d = svd(&body);
        let weighted = |u: &CMatrix| {
            let mut w = u.clone();
            for (j, sj) in d.s.iter().enumerate() {
                for i in 0..w.nrows() {
                    w[(i, j)] *= *sj;
                }
            }
            w * u.adjoint()
        };
        let f = certify(
            &body,
            n,
            m,
            p,
            &weighted(&d.u),
            &weighted(&d.v_adj.adjoint()),
        );
        return (f.value, f);
    }
    let xn = body.scale(1.0 / s);
    let starts: Vec<usize> = (0..opts.restarts.max(1)).collect();
    let results = par::map(&starts, |&r| {
        let start = if r == 0 {
            (identity(n), identity(n))
        } else {
            let mut rng = substream(opts.seed, r as u64);
            let a0 = random_positive_definite(&mut rng, n, 0.1);
            let b0 = random_positive_definite(&mut rng, n, 0.1);
            let (na, nb) = (op_norm(&a0), op_norm(&b0));
            (a0.scale(1.0 / na), b0.scale(1.0 / nb))
        };
        let sol = lmi_admm(
            n,
            m,
            p.value(),
            XSpec::Fixed(&xn),
            start,
            opts.max_iter,
            opts.tol,
        );
        certify(&xn, n, m, p, &sol.a, &sol.b)
    });
    let mut best = trivial_factorization(&xn, n, m, p);
    for f in results {
        if f.value < best.value {
            best = f;
        }
    }
    // undo the normalization on the right factor
    let f = Factorization {
        value: best.value * s,
        y: BlockMatrix::new(n, m, best.y.canonical_body().scale(s)).expect("dimensions match"),
        a: best.a,
        b: best.b,
    };
    (f.value, f)
}

/// Columns `v_ρ ∈ ℂ^{n·m}` of a contraction `V: ℂ^n → ℂ^m ⊗ ℂ^r`, as an
/// `nm × r` matrix with `v_ρ[(i, k)] = V[(k, ρ), i]`.
fn columns(v: &CMatrix, n: usize, m: usize, r: usize) -> CMatrix {
    CMatrix::from_fn(n * m, r, |row, rho| {
        let (i, k) = (row / m, row % m);
        v[(k * r + rho, i)]
    })
}

fn uncolumns(c: &CMatrix, n: usize, m: usize, r: usize) -> CMatrix {
    CMatrix::from_fn(m * r, n, |row, i| {
        let (k, rho) = (row / r, row % r);
        c[(i * m + k, rho)]
    })
}

/// State of the dual ascent.
#[derive(Clone, Debug)]
pub(crate) struct DualWitness {
    pub alpha: CMatrix,
    pub beta: CMatrix,
    pub u: CMatrix,
    pub v: CMatrix,
}

impl DualWitness {
    /// `W = Σ_ρ v_ρ u_ρ*`.
    pub fn w(&self, n: usize, m: usize, r: usize) -> CMatrix {
        columns(&self.v, n, m, r) * columns(&self.u, n, m, r).adjoint()
    }

    /// `(β ⊗ I) W (α ⊗ I)`, the matrix `Ŵ` with `tr((α⊗I) x (β⊗I) W) = tr(x Ŵ)`.
    pub fn w_hat(&self, n: usize, m: usize, r: usize) -> CMatrix {
        let im = identity(m);
        kron(&self.beta, &im) * self.w(n, m, r) * kron(&self.alpha, &im)
    }

    pub fn denominator(&self, q: PExponent) -> f64 {
        schatten_norm(&self.alpha, q)
            * schatten_norm(&self.beta, q)
            * op_norm(&self.u)
            * op_norm(&self.v)
    }

    pub fn value(&self, x: &CMatrix, n: usize, m: usize, r: usize, q: PExponent) -> f64 {
        let t = trace(&(x * self.w_hat(n, m, r)));
        let d = self.denominator(q);
        if d > 0.0 {
            t.norm() / d
        } else {
            0.0
        }
    }

    /// One sweep of exact block maximizations.
    pub fn sweep(&mut self, x: &CMatrix, n: usize, m: usize, r: usize, q: PExponent) {
        let im = identity(m);
        let z = kron(&self.alpha, &im) * x * kron(&self.beta, &im);
        let g = uncolumns(&(&z * columns(&self.v, n, m, r)), n, m, r);
        self.u = polar_isometry(&g);
        let h = uncolumns(&(z.adjoint() * columns(&self.u, n, m, r)), n, m, r);
        self.v = polar_isometry(&h);
        let w = self.w(n, m, r);
        let mt = x * kron(&self.beta, &im) * &w;
        self.alpha = schatten_dual_maximizer(&trace_inner(&mt, n, m), q);
        let mt = &w * kron(&self.alpha, &im) * x;
        self.beta = schatten_dual_maximizer(&trace_inner(&mt, n, m), q);
    }
}

pub(crate) fn ascend(
    x: &CMatrix,
    n: usize,
    m: usize,
    p: PExponent,
    start: DualWitness,
    iterations: usize,
) -> (f64, DualWitness) {
    let r = m;
    let q = p.conjugate().scaled(2.0);
    let mut w = start;
    let mut best = (w.value(x, n, m, r, q), w.clone());
    for _ in 0..iterations {
        w.sweep(x, n, m, r, q);
        let v = w.value(x, n, m, r, q);
        let done = v <= best.0 * (1.0 + 1e-12);
        if v > best.0 {
            best = (v, w.clone());
        }
        if done {
            break;
        }
    }
    best
}

pub(crate) fn random_witness(
    rng: &mut crate::random::Rng,
    n: usize,
    m: usize,
    r: usize,
    identity_start: bool,
) -> DualWitness {
    let (alpha, beta) = if identity_start {
        (identity(n), identity(n))
    } else {
        (random_matrix(rng, n, n), random_matrix(rng, n, n))
    };
    DualWitness {
        alpha,
        beta,
        u: random_matrix(rng, m * r, n),
        v: random_matrix(rng, m * r, n),
    }
}

/// Lower bound and the name of the bound that achieved it.
pub fn vnorm_lower_with(x: &BlockMatrix, p: PExponent, opts: &LowerOptions) -> (f64, LowerWitness) {
    let (n, m) = (x.outer_dim(), x.inner_dim());
    let body = x.canonical_body();
    let sv = crate::linalg::singular_values(&body);
    let opn = sv.first().copied().unwrap_or(0.0);
    let flat = lp_norm(&sv, p) * (m as f64).powf(-p.theta());
    let mut best = LowerWitness {
        kind: "operator norm",
        value: opn,
    };
    if flat > best.value {
        best = LowerWitness {
            kind: "scaled flat Schatten norm",
            value: flat,
        };
    }
    if p.is_infinite() || opn == 0.0 {
        return (best.value, best);
    }
    let xn = body.scale(1.0 / opn);
    let starts: Vec<usize> = (0..opts.starts.max(1)).collect();
    let vals = par::map(&starts, |&s| {
        let mut rng = substream(opts.seed, s as u64);
        let w0 = random_witness(&mut rng, n, m, m, s == 0);
        ascend(&xn, n, m, p, w0, opts.iterations).0
    });
    for v in vals {
        if v * opn > best.value {
            best = LowerWitness {
                kind: "trace duality witness",
                value: v * opn,
            };
        }
    }
    (best.value, best)
}

pub fn vnorm_lower(x: &BlockMatrix, p: PExponent) -> f64 {
    vnorm_lower_with(x, p, &LowerOptions::default()).0
}

pub fn vnorm_bracket(
    x: &BlockMatrix,
    p: PExponent,
    upper: &UpperOptions,
    lower: &LowerOptions,
) -> Result<(NormBracket, Factorization)> {
    let (up, f) = vnorm_upper(x, p, upper);
    let (lo, w) = vnorm_lower_with(x, p, lower);
    Ok((
        NormBracket {
            lower: lo,
            upper: up,
            lower_witness: w.kind.to_string(),
            upper_witness: "factorization (a ⊗ I) y (b ⊗ I)".to_string(),
        },
        f,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{rel_frobenius, unit};
    use crate::random::{random_block, random_matrix, random_unitary, seeded};

    fn p(v: f64) -> PExponent {
        PExponent::new(v).unwrap()
    }

    #[test]
    fn prox_solves_optimality_condition() {
        for &(v, c, q) in &[
            (2.0, 0.3, 2.0),
            (-1.5, 0.1, 3.0),
            (0.5, 1.0, 1.0),
            (4.0, 0.2, 1.5),
        ] {
            let s: f64 = prox_power(v, c, q);
            if q == 1.0 {
                assert_eq!(s, 0.0);
            } else {
                let g = s - v + c * q * s.abs().powf(q - 1.0) * s.signum();
                assert!(g.abs() < 1e-10);
            }
        }
    }

    #[test]
    fn scalar_outer_gives_operator_norm() {
        let mut rng = seeded(1);
        let e = random_matrix(&mut rng, 3, 3);
        let x = BlockMatrix::new(1, 3, e.clone()).unwrap();
        for pv in [1.0, 2.0, 3.0] {
            let (up, f) = vnorm_upper(&x, p(pv), &UpperOptions::default());
            let lo = vnorm_lower(&x, p(pv));
            assert!((up - op_norm(&e)).abs() < 1e-6 * up, "{up}");
            assert!((lo - op_norm(&e)).abs() < 1e-9 * up);
            assert!(rel_frobenius(&f.reconstruct(), &e) < 1e-8);
        }
    }

    #[test]
    fn scalar_inner_gives_schatten_norm() {
        let mut rng = seeded(2);
        let a = random_matrix(&mut rng, 3, 3);
        let x = BlockMatrix::new(3, 1, a.clone()).unwrap();
        for pv in [1.0, 2.0, 4.0] {
            let (up, f) = vnorm_upper(&x, p(pv), &UpperOptions::default());
            let exact = schatten_norm(&a, p(pv));
            assert!((up - exact).abs() < 1e-6 * exact);
            assert!((vnorm_lower(&x, p(pv)) - exact).abs() < 1e-9 * exact);
            assert!(rel_frobenius(&f.reconstruct(), &a) < 1e-8);
        }
    }

    #[test]
    fn elementary_tensor_crossnorm() {
        let mut rng = seeded(3);
        let a0 = random_matrix(&mut rng, 2, 2);
        let e = random_matrix(&mut rng, 2, 2);
        let x = BlockMatrix::from_kron(&a0, &e).unwrap();
        for pv in [1.0, 2.0, 3.0] {
            let target = schatten_norm(&a0, p(pv)) * op_norm(&e);
            let (up, _) = vnorm_upper(&x, p(pv), &UpperOptions::default());
            let lo = vnorm_lower(&x, p(pv));
            assert!(up <= target + 1e-6, "{up} {target}");
            assert!(lo >= 0.95 * target, "{lo} {target}");
        }
    }

    #[test]
    fn bracket_is_ordered_and_factorization_exact() {
        let mut rng = seeded(4);
        for _ in 0..4 {
            let x = random_block(&mut rng, 2, 2);
            for pv in [1.0, 2.0, 3.0, f64::INFINITY] {
                let (up, f) = vnorm_upper(&x, p(pv), &UpperOptions::default());
                let lo = vnorm_lower(&x, p(pv));
                assert!(lo <= up * (1.0 + 1e-9), "{lo} {up}");
                assert!(rel_frobenius(&f.reconstruct(), x.body()) < 1e-8);
                if pv.is_finite() {
                    assert!((up - lo) / up < 1e-4, "gap {lo} {up} at p={pv}");
                }
            }
        }
    }

    #[test]
    fn infinity_is_operator_norm() {
        let mut rng = seeded(5);
        let x = random_block(&mut rng, 3, 2);
        let (up, f) = vnorm_upper(&x, PExponent::INFINITY, &UpperOptions::default());
        assert_eq!(up, op_norm(x.body()));
        assert_eq!(vnorm_lower(&x, PExponent::INFINITY), up);
        assert_eq!(f.a, identity(3));
    }

    #[test]
    fn unitary_invariance() {
        let mut rng = seeded(6);
        let x = random_block(&mut rng, 2, 2);
        let u = random_unitary(&mut rng, 2);
        let v = random_unitary(&mut rng, 2);
        let i2 = identity(2);
        let y = BlockMatrix::new(2, 2, kron(&u, &i2) * x.body() * kron(&v, &i2)).unwrap();
        let (a, _) = vnorm_upper(&x, PExponent::TWO, &UpperOptions::default());
        let (b, _) = vnorm_upper(&y, PExponent::TWO, &UpperOptions::default());
        assert!((a - b).abs() < 1e-6 * a);
    }

    #[test]
    fn unit_tensor() {
        let x = BlockMatrix::from_kron(&unit(2, 0, 0), &unit(2, 0, 0)).unwrap();
        let (up, _) = vnorm_upper(&x, PExponent::TWO, &UpperOptions::default());
        assert!((up - 1.0).abs() < 1e-6);
    }
}
