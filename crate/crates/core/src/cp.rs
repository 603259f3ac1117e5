//! Linear maps between matrix algebras, represented by their Choi matrices.
//!
//! A map `u: M_n → M_m` is stored as `J ∈ M_n ⊗ M_m` whose block `(i, j)` is
//! `u(e_ij)`, so `u(X) = Σ_ij X_ij · J_block(i, j)`. Adjoints are taken with
//! respect to the bilinear pairing `⟨x, y⟩ = tr(x · ᵗy)`.

use serde::Serialize;

use crate::conic::SolveStatus;
use crate::error::{Error, Result};
use crate::haagerup;
use crate::linalg::{
    eigh, hermitian_deviation, identity, op_norm, schatten_dual_maximizer, schatten_norm, trace,
    trace_inner, trace_outer, unit, CMatrix, PExponent, C64, ZERO,
};
use crate::par;
use crate::random::{random_matrix, substream};

#[derive(Clone, Debug, PartialEq)]
pub struct LinearMap {
    in_dim: usize,
    out_dim: usize,
    choi: CMatrix,
}

/// Kraus operators `y_s` (each `m × n`) with `u(x) = Σ y_s x y_s*`.
#[derive(Clone, Debug)]
pub struct KrausSet {
    pub ops: Vec<CMatrix>,
}

impl KrausSet {
    pub fn apply(&self, x: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(self.ops[0].nrows(), self.ops[0].nrows());
        for y in &self.ops {
            out += y * x * y.adjoint();
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CpCheck {
    pub is_cp: bool,
    /// Smallest eigenvalue of the Choi matrix, or minus the Hermiticity defect
    /// when that is larger.
    pub margin: f64,
}

impl LinearMap {
    pub fn from_choi(in_dim: usize, out_dim: usize, choi: CMatrix) -> Result<Self> {
        let d = in_dim * out_dim;
        if in_dim == 0 || out_dim == 0 || choi.nrows() != d || choi.ncols() != d {
            return Err(Error::dim(format!(
                "Choi matrix {}x{} for a map M_{in_dim} -> M_{out_dim}",
                choi.nrows(),
                choi.ncols()
            )));
        }
        Ok(LinearMap {
            in_dim,
            out_dim,
            choi,
        })
    }

    /// Builds the map from its action on matrix units.
    pub fn from_fn(in_dim: usize, out_dim: usize, f: impl Fn(&CMatrix) -> CMatrix) -> Self {
        let mut choi = CMatrix::zeros(in_dim * out_dim, in_dim * out_dim);
        for i in 0..in_dim {
            for j in 0..in_dim {
                let b = f(&unit(in_dim, i, j));
                assert_eq!((b.nrows(), b.ncols()), (out_dim, out_dim));
                choi.view_mut((i * out_dim, j * out_dim), (out_dim, out_dim))
                    .copy_from(&b);
            }
        }
        LinearMap {
            in_dim,
            out_dim,
            choi,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |x| x.clone())
    }

    pub fn transpose(n: usize) -> Self {
        Self::from_fn(n, n, |x| x.transpose())
    }

    /// `x ↦ a x b` with `a` of size `m × n` and `b` of size `n × m`.
    pub fn sandwich(a: &CMatrix, b: &CMatrix) -> Result<Self> {
        if a.ncols() != b.nrows() || a.nrows() != b.ncols() {
            return Err(Error::dim("sandwich factors have incompatible shapes"));
        }
        Ok(Self::from_fn(a.ncols(), a.nrows(), |x| a * x * b))
    }

    /// `x ↦ v x v*`.
    pub fn conjugation(v: &CMatrix) -> Self {
        Self::from_fn(v.ncols(), v.nrows(), |x| v * x * v.adjoint())
    }

    pub fn from_kraus(k: &KrausSet) -> Result<Self> {
        let first = k.ops.first().ok_or_else(|| Error::dim("empty Kraus set"))?;
        let (m, n) = (first.nrows(), first.ncols());
        if k.ops.iter().any(|y| y.nrows() != m || y.ncols() != n) {
            return Err(Error::dim("Kraus operators of different shapes"));
        }
        Ok(Self::from_fn(n, m, |x| k.apply(x)))
    }

    /// The map `x ↦ Σ_ij M_ij x_jj e_ii` on `M_n`.
    pub fn diagonal_embedding(mat: &CMatrix) -> Result<Self> {
        if !mat.is_square() {
            return Err(Error::dim("lattice matrix must be square"));
        }
        let n = mat.nrows();
        Ok(Self::from_fn(n, n, |x| {
            let mut y = CMatrix::zeros(n, n);
            for i in 0..n {
                y[(i, i)] = (0..n).map(|j| mat[(i, j)] * x[(j, j)]).sum();
            }
            y
        }))
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn choi(&self) -> &CMatrix {
        &self.choi
    }

    /// `u(e_ij)`.
    pub fn choi_block(&self, i: usize, j: usize) -> CMatrix {
        let m = self.out_dim;
        self.choi.view((i * m, j * m), (m, m)).into_owned()
    }

    pub fn apply(&self, x: &CMatrix) -> CMatrix {
        let m = self.out_dim;
        let mut out = CMatrix::zeros(m, m);
        for i in 0..self.in_dim {
            for j in 0..self.in_dim {
                let c = x[(i, j)];
                if c != ZERO {
                    out += self.choi.view((i * m, j * m), (m, m)) * c;
                }
            }
        }
        out
    }

    /// The transpose map `u^T: M_m → M_n` with `tr(y u(x)) = tr(u^T(y) x)`.
    pub fn apply_transpose(&self, y: &CMatrix) -> CMatrix {
        let m = self.out_dim;
        CMatrix::from_fn(self.in_dim, self.in_dim, |j, i| {
            let mut s = ZERO;
            for a in 0..m {
                for b in 0..m {
                    s += y[(b, a)] * self.choi[(i * m + a, j * m + b)];
                }
            }
            s
        })
    }

    /// Hilbert–Schmidt adjoint: `tr(u(x) y*) = tr(x u†(y)*)`.
    pub fn apply_hs_adjoint(&self, y: &CMatrix) -> CMatrix {
        let m = self.out_dim;
        CMatrix::from_fn(self.in_dim, self.in_dim, |i, j| {
            let mut s = ZERO;
            for a in 0..m {
                for b in 0..m {
                    s += self.choi[(i * m + a, j * m + b)].conj() * y[(a, b)];
                }
            }
            s
        })
    }

    /// `u(I)`.
    pub fn image_of_identity(&self) -> CMatrix {
        trace_outer(&self.choi, self.in_dim, self.out_dim)
    }

    /// `u*(I)` for the adjoint under the transpose pairing.
    pub fn adjoint_image_of_identity(&self) -> CMatrix {
        trace_inner(&self.choi, self.in_dim, self.out_dim)
    }

    pub fn scale(&self, c: C64) -> LinearMap {
        LinearMap {
            choi: &self.choi * c,
            ..self.clone()
        }
    }

    pub fn add(&self, other: &LinearMap) -> Result<LinearMap> {
        self.check_same_shape(other)?;
        Ok(LinearMap {
            choi: &self.choi + &other.choi,
            ..self.clone()
        })
    }

    pub fn sub(&self, other: &LinearMap) -> Result<LinearMap> {
        self.check_same_shape(other)?;
        Ok(LinearMap {
            choi: &self.choi - &other.choi,
            ..self.clone()
        })
    }

    fn check_same_shape(&self, other: &LinearMap) -> Result<()> {
        if self.in_dim != other.in_dim || self.out_dim != other.out_dim {
            return Err(Error::dim("maps act between different spaces"));
        }
        Ok(())
    }

    /// `v ∘ self`.
    pub fn then(&self, v: &LinearMap) -> Result<LinearMap> {
        if v.in_dim != self.out_dim {
            return Err(Error::dim("composition of incompatible maps"));
        }
        Ok(Self::from_fn(self.in_dim, v.out_dim, |x| {
            v.apply(&self.apply(x))
        }))
    }

    /// `id_{M_k} ⊗ u` on `M_k ⊗ M_n`.
    pub fn amplify(&self, k: usize) -> LinearMap {
        let (n, m) = (self.in_dim, self.out_dim);
        let mut choi = CMatrix::zeros(k * n * k * m, k * n * k * m);
        let km = k * m;
        for a in 0..k {
            for b in 0..k {
                for i in 0..n {
                    for j in 0..n {
                        // block ((a,i),(b,j)) = e_ab ⊗ u(e_ij)
                        let r0 = (a * n + i) * km + a * m;
                        let c0 = (b * n + j) * km + b * m;
                        choi.view_mut((r0, c0), (m, m))
                            .copy_from(&self.choi.view((i * m, j * m), (m, m)));
                    }
                }
            }
        }
        LinearMap {
            in_dim: k * n,
            out_dim: k * m,
            choi,
        }
    }

    /// `u ⊗ id_{M_k}` on `M_n ⊗ M_k`.
    pub fn tensor_identity(&self, k: usize) -> LinearMap {
        let (n, m) = (self.in_dim, self.out_dim);
        Self::from_fn(n * k, m * k, |x| {
            // x = Σ x[(i,a),(j,b)] e_ij ⊗ e_ab
            let mut out = CMatrix::zeros(m * k, m * k);
            for i in 0..n {
                for j in 0..n {
                    let mut xij = CMatrix::zeros(k, k);
                    for a in 0..k {
                        for b in 0..k {
                            xij[(a, b)] = x[(i * k + a, j * k + b)];
                        }
                    }
                    if xij.iter().all(|z| *z == ZERO) {
                        continue;
                    }
                    out += crate::linalg::kron(&self.choi_block(i, j), &xij);
                }
            }
            out
        })
    }
}

pub fn choi(u: &LinearMap) -> &CMatrix {
    u.choi()
}

/// Complete positivity through positivity of the Choi matrix.
pub fn is_cp(u: &LinearMap, tol: f64) -> CpCheck {
    let dev = hermitian_deviation(u.choi());
    let lmin = eigh(u.choi()).min();
    let margin = if dev > tol { lmin.min(-dev) } else { lmin };
    CpCheck {
        is_cp: margin >= -tol,
        margin,
    }
}

/// Kraus operators from the spectral decomposition of the Choi matrix.
pub fn kraus(u: &LinearMap, tol: f64) -> Result<KrausSet> {
    let check = is_cp(u, tol);
    if !check.is_cp {
        return Err(Error::NotCompletelyPositive {
            margin: check.margin,
        });
    }
    let (n, m) = (u.in_dim, u.out_dim);
    let eig = eigh(u.choi());
    let lmax = eig.max();
    let cutoff = (1e-10 * lmax).max(tol);
    let mut ops = Vec::new();
    for (s, &l) in eig.values.iter().enumerate() {
        if l < cutoff {
            break;
        }
        let r = l.sqrt();
        ops.push(CMatrix::from_fn(m, n, |k, i| {
            eig.vectors[(i * m + k, s)] * r
        }));
    }
    if ops.is_empty() {
        ops.push(CMatrix::zeros(m, n));
    }
    Ok(KrausSet { ops })
}

/// Adjoint `u*: M_m → M_n` with `tr(u(x)·ᵗy) = tr(x·ᵗu*(y))`.
pub fn adjoint_map(u: &LinearMap) -> LinearMap {
    let (n, m) = (u.in_dim, u.out_dim);
    let j = &u.choi;
    let choi = CMatrix::from_fn(n * m, n * m, |r, c| {
        let (k, i) = (r / n, r % n);
        let (l, jj) = (c / n, c % n);
        j[(i * m + k, jj * m + l)]
    });
    LinearMap {
        in_dim: m,
        out_dim: n,
        choi,
    }
}

/// Completely bounded norm together with its certificate.
#[derive(Clone, Debug)]
pub struct CbNorm {
    /// Certified upper bound `√(‖tr P‖·‖tr Q‖)` from a repaired feasible
    /// certificate; equals the optimum to solver accuracy.
    pub value: f64,
    pub status: SolveStatus,
    pub p_block: CMatrix,
    pub q_block: CMatrix,
}

/// `‖u‖_cb = min max(‖Σ_i P_ii‖, ‖Σ_i Q_ii‖)` over `[[P, J], [J*, Q]] ⪰ 0`.
pub fn cb_norm(u: &LinearMap) -> Result<CbNorm> {
    let cert = haagerup::solve_fixed(u, 0.0, None)?;
    Ok(CbNorm {
        value: cert.value,
        status: cert.status,
        p_block: cert.p_block,
        q_block: cert.q_block,
    })
}

/// A certified interval `[lower, upper]`.
#[derive(Clone, Debug, Serialize)]
pub struct NormBracket {
    pub lower: f64,
    pub upper: f64,
    pub lower_witness: String,
    pub upper_witness: String,
}

impl NormBracket {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, v: f64, slack: f64) -> bool {
        self.lower - slack <= v && v <= self.upper + slack
    }

    pub fn overlaps(&self, other: &NormBracket, slack: f64) -> bool {
        self.lower - slack <= other.upper && other.lower - slack <= self.upper
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SearchBudget {
    pub restarts: usize,
    pub iterations: usize,
    pub seed: u64,
}

impl Default for SearchBudget {
    fn default() -> Self {
        SearchBudget {
            restarts: 8,
            iterations: 300,
            seed: 0,
        }
    }
}

/// Lower bound on `‖u: S_p^n → S_p^m‖` by alternating ascent on the bilinear
/// form `Re tr(Y u(X))` over `‖X‖_p ≤ 1`, `‖Y‖_{p'} ≤ 1`.
pub fn sp_op_norm_lower(u: &LinearMap, p: PExponent, budget: &SearchBudget) -> (f64, CMatrix) {
    let n = u.in_dim;
    let pc = p.conjugate();
    let starts: Vec<usize> = (0..budget.restarts.max(1)).collect();
    let results = par::map(&starts, |&s| {
        let mut x = if s == 0 {
            identity(n)
        } else {
            let mut rng = substream(budget.seed, s as u64);
            random_matrix(&mut rng, n, n)
        };
        let nx = schatten_norm(&x, p);
        x /= C64::from(nx.max(f64::MIN_POSITIVE));
        let mut best = (schatten_norm(&u.apply(&x), p), x.clone());
        for _ in 0..budget.iterations {
            let y = schatten_dual_maximizer(&u.apply(&x), pc);
            x = schatten_dual_maximizer(&u.apply_transpose(&y), p);
            let v = schatten_norm(&u.apply(&x), p) / schatten_norm(&x, p);
            if v <= best.0 * (1.0 + 1e-13) {
                if v > best.0 {
                    best = (v, x.clone());
                }
                break;
            }
            best = (v, x.clone());
        }
        best
    });
    results
        .into_iter()
        .fold((0.0, CMatrix::zeros(n, n)), |acc, r| {
            if r.0 > acc.0 {
                r
            } else {
                acc
            }
        })
}

/// Bracket for `‖u: S_p^n → S_p^m‖`.
///
/// For completely positive `u` the upper bound is `‖u(I)‖^{1−θ}·‖u*(I)‖^θ`;
/// otherwise it is the best regular-norm certificate, which dominates the
/// operator norm.
pub fn sp_op_norm(u: &LinearMap, p: PExponent, budget: &SearchBudget) -> Result<NormBracket> {
    let (lower, _) = sp_op_norm_lower(u, p, budget);
    let check = is_cp(u, 1e-10);
    let (upper, upper_witness) = if check.is_cp {
        let th = p.theta();
        let a = op_norm(&u.image_of_identity());
        let b = op_norm(&u.adjoint_image_of_identity());
        (
            a.powf(1.0 - th) * b.powf(th),
            "completely positive endpoint interpolation".to_string(),
        )
    } else {
        let r = crate::regular::regular_upper(u, p, &Default::default())?;
        (
            r.upper,
            format!("regular certificate ({})", r.certificate.kind()),
        )
    };
    Ok(NormBracket {
        lower: lower.min(upper),
        upper,
        lower_witness: "alternating ascent on the unit sphere".to_string(),
        upper_witness,
    })
}

/// `tr(u(x) ᵗy)`, the bilinear pairing used for adjoints.
pub fn transpose_pairing(x: &CMatrix, y: &CMatrix) -> C64 {
    trace(&(x * y.transpose()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{eigvalsh, rel_frobenius};
    use crate::random::{random_cp_map, random_map, random_unitary, seeded};

    #[test]
    fn choi_of_identity_and_transpose() {
        let id = LinearMap::identity(2);
        let ev = eigvalsh(id.choi());
        assert!((ev[0] - 2.0).abs() < 1e-12 && ev[1..].iter().all(|v| v.abs() < 1e-12));
        let t = LinearMap::transpose(2);
        let ev = eigvalsh(t.choi());
        for (a, b) in ev.iter().zip([1.0, 1.0, 1.0, -1.0]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn apply_matches_definition() {
        let mut rng = seeded(1);
        let a = random_matrix(&mut rng, 3, 2);
        let b = random_matrix(&mut rng, 2, 3);
        let u = LinearMap::sandwich(&a, &b).unwrap();
        let x = random_matrix(&mut rng, 2, 2);
        assert!(rel_frobenius(&u.apply(&x), &(&a * &x * &b)) < 1e-12);
    }

    #[test]
    fn cp_checks() {
        assert!(is_cp(&LinearMap::identity(2), 1e-9).is_cp);
        let t = is_cp(&LinearMap::transpose(2), 1e-9);
        assert!(!t.is_cp && (t.margin + 1.0).abs() < 1e-9);
        let mut rng = seeded(2);
        let v = random_matrix(&mut rng, 3, 2);
        assert!(is_cp(&LinearMap::conjugation(&v), 1e-9).is_cp);
        let diag = LinearMap::from_fn(2, 2, |x| {
            CMatrix::from_fn(2, 2, |i, j| if i == j { x[(i, i)] } else { ZERO })
        });
        assert!(is_cp(&diag, 1e-12).is_cp);
    }

    #[test]
    fn kraus_reconstructs() {
        let mut rng = seeded(3);
        let u = random_cp_map(&mut rng, 3, 2, 4);
        let k = kraus(&u, 1e-9).unwrap();
        assert!(k.ops.len() <= 4);
        let back = LinearMap::from_kraus(&k).unwrap();
        assert!((back.choi() - u.choi()).norm() < 1e-8);
        let one = kraus(&LinearMap::identity(2), 1e-9).unwrap();
        assert_eq!(one.ops.len(), 1);
        let ph = one.ops[0][(0, 0)];
        assert!((&one.ops[0] - identity(2) * ph).norm() < 1e-10 && (ph.norm() - 1.0).abs() < 1e-10);
        assert!(matches!(
            kraus(&LinearMap::transpose(2), 1e-9),
            Err(Error::NotCompletelyPositive { .. })
        ));
    }

    #[test]
    fn adjoint_pairing_on_basis() {
        let mut rng = seeded(4);
        let u = random_map(&mut rng, 2, 3);
        let ua = adjoint_map(&u);
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..3 {
                    for l in 0..3 {
                        let x = unit(2, i, j);
                        let y = unit(3, k, l);
                        let lhs = transpose_pairing(&u.apply(&x), &y);
                        let rhs = transpose_pairing(&x, &ua.apply(&y));
                        assert!((lhs - rhs).norm() < 1e-12);
                    }
                }
            }
        }
        assert_eq!(adjoint_map(&ua), u);
        assert_eq!(adjoint_map(&LinearMap::identity(3)), LinearMap::identity(3));
    }

    #[test]
    fn adjoint_of_sandwich() {
        let mut rng = seeded(5);
        let a = random_matrix(&mut rng, 2, 2);
        let b = random_matrix(&mut rng, 2, 2);
        let u = LinearMap::sandwich(&a, &b).unwrap();
        let expect = LinearMap::sandwich(&a.transpose(), &b.transpose()).unwrap();
        assert!((adjoint_map(&u).choi() - expect.choi()).norm() < 1e-12);
    }

    #[test]
    fn transpose_and_hs_adjoint_identities() {
        let mut rng = seeded(6);
        let u = random_map(&mut rng, 2, 3);
        let x = random_matrix(&mut rng, 2, 2);
        let y = random_matrix(&mut rng, 3, 3);
        let lhs = trace(&(&y * u.apply(&x)));
        let rhs = trace(&(u.apply_transpose(&y) * &x));
        assert!((lhs - rhs).norm() < 1e-12);
        let lhs = trace(&(u.apply(&x) * y.adjoint()));
        let rhs = trace(&(&x * u.apply_hs_adjoint(&y).adjoint()));
        assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn amplification_acts_blockwise() {
        let mut rng = seeded(7);
        let u = random_map(&mut rng, 2, 2);
        let a = u.amplify(2);
        let x = random_matrix(&mut rng, 4, 4);
        let y = a.apply(&x);
        for p in 0..2 {
            for q in 0..2 {
                let xb = x.view((p * 2, q * 2), (2, 2)).into_owned();
                let yb = y.view((p * 2, q * 2), (2, 2)).into_owned();
                assert!((u.apply(&xb) - yb).norm() < 1e-12);
            }
        }
        let t = u.tensor_identity(2);
        let e = random_matrix(&mut rng, 2, 2);
        let x = crate::linalg::kron(&random_matrix(&mut rng, 2, 2), &e);
        let xa = CMatrix::from_fn(2, 2, |i, j| x[(i * 2, j * 2)] / e[(0, 0)]);
        let expect = crate::linalg::kron(&u.apply(&xa), &e);
        assert!((t.apply(&x) - expect).norm() < 1e-10);
    }

    #[test]
    fn cb_norm_examples() {
        let id = cb_norm(&LinearMap::identity(2)).unwrap();
        assert!((id.value - 1.0).abs() < 1e-5, "{}", id.value);
        let t = cb_norm(&LinearMap::transpose(2)).unwrap();
        assert!((t.value - 2.0).abs() < 1e-4, "{}", t.value);
        let mut rng = seeded(8);
        let u = random_cp_map(&mut rng, 2, 2, 2);
        let c = cb_norm(&u).unwrap();
        let expect = op_norm(&u.image_of_identity());
        assert!(
            (c.value - expect).abs() < 1e-4 * expect,
            "{} {}",
            c.value,
            expect
        );
    }

    #[test]
    fn sp_norm_of_unitary_conjugation() {
        let mut rng = seeded(9);
        let v = random_unitary(&mut rng, 3);
        let u = LinearMap::conjugation(&v);
        for p in [1.0, 2.0, 3.0, f64::INFINITY] {
            let p = PExponent::new(p).unwrap();
            let b = sp_op_norm(&u, p, &SearchBudget::default()).unwrap();
            assert!((b.lower - 1.0).abs() < 1e-9 && (b.upper - 1.0).abs() < 1e-9);
        }
        let b = sp_op_norm(
            &LinearMap::identity(2),
            PExponent::TWO,
            &SearchBudget::default(),
        )
        .unwrap();
        assert!((b.lower - 1.0).abs() < 1e-9 && (b.upper - 1.0).abs() < 1e-9);
    }

    #[test]
    fn sp_norm_of_cp_map_is_ordered() {
        let mut rng = seeded(10);
        let u = random_cp_map(&mut rng, 2, 2, 3);
        let b = sp_op_norm(&u, PExponent::TWO, &SearchBudget::default()).unwrap();
        assert!(b.lower <= b.upper + 1e-12);
        // x = I is a feasible input
        let i2 = identity(2);
        let at_identity = schatten_norm(&u.apply(&i2), PExponent::TWO) / 2f64.sqrt();
        assert!(b.lower >= at_identity - 1e-12);
    }
}
