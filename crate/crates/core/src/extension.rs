//! Regular extensions of maps defined on a subspace `S ⊂ S_p^n`.

use nalgebra::DMatrix;

use crate::conic::{CExpr, ConicProgram, MatExpr, SolverSettings};
use crate::cp::LinearMap;
use crate::error::{Error, Result};
use crate::haagerup::{self, ChoiSpec};
use crate::linalg::{
    eigh, identity, op_norm, schatten_norm, trace, unit, CMatrix, PExponent, C64, ONE, ZERO,
};
use crate::random::{random_matrix, substream};
use crate::regular::{regular_upper, RegularOptions, UpperCertificate};
use crate::vnorm::{self, certify, lmi_admm, XSpec};

/// Linearly independent `n × n` matrices spanning `S`.
#[derive(Clone, Debug)]
pub struct SubspaceBasis {
    n: usize,
    basis: Vec<CMatrix>,
    /// Hilbert–Schmidt orthonormal basis of the same span.
    orthonormal: Vec<CMatrix>,
    gram_inverse: CMatrix,
}

fn hs(a: &CMatrix, b: &CMatrix) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

impl SubspaceBasis {
    pub fn new(n: usize, basis: Vec<CMatrix>) -> Result<Self> {
        if basis.is_empty() {
            return Err(Error::dim("a subspace basis needs at least one element"));
        }
        if let Some(b) = basis.iter().find(|b| b.nrows() != n || b.ncols() != n) {
            return Err(Error::dim(format!(
                "basis element is {}x{}, expected {n}x{n}",
                b.nrows(),
                b.ncols()
            )));
        }
        let d = basis.len();
        let gram = CMatrix::from_fn(d, d, |i, j| hs(&basis[i], &basis[j]));
        let e = eigh(&gram);
        let cond = if e.min() > 0.0 {
            e.max() / e.min()
        } else {
            f64::INFINITY
        };
        if !(cond < 1e8) {
            return Err(Error::IllConditionedBasis { cond });
        }
        let gram_inverse = e.map_values(|v| 1.0 / v);
        // orthonormal combinations through the inverse square root of the Gram matrix
        let g_half = e.map_values(|v| 1.0 / v.sqrt());
        let orthonormal = (0..d)
            .map(|j| {
                let mut q = CMatrix::zeros(n, n);
                for (i, b) in basis.iter().enumerate() {
                    q += b * g_half[(i, j)];
                }
                q
            })
            .collect();
        Ok(SubspaceBasis {
            n,
            basis,
            orthonormal,
            gram_inverse,
        })
    }

    pub fn full(n: usize) -> Self {
        let basis = (0..n)
            .flat_map(|i| (0..n).map(move |j| unit(n, i, j)))
            .collect();
        Self::new(n, basis).expect("matrix units are orthonormal")
    }

    /// Upper triangular matrices.
    pub fn upper_triangular(n: usize) -> Self {
        let basis = (0..n)
            .flat_map(|i| (i..n).map(move |j| unit(n, i, j)))
            .collect();
        Self::new(n, basis).expect("matrix units are orthonormal")
    }

    pub fn ambient(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[CMatrix] {
        &self.basis
    }

    /// Coefficients of the trace-orthogonal projection of `x` onto `S`.
    pub fn coordinates(&self, x: &CMatrix) -> Vec<C64> {
        let d = self.dim();
        let rhs: Vec<C64> = self.basis.iter().map(|b| hs(b, x)).collect();
        (0..d)
            .map(|i| (0..d).map(|j| self.gram_inverse[(i, j)] * rhs[j]).sum())
            .collect()
    }

    pub fn project(&self, x: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(self.n, self.n);
        for (q, c) in self.orthonormal.iter().zip(self.coordinates_orthonormal(x)) {
            out += q * c;
        }
        out
    }

    fn coordinates_orthonormal(&self, x: &CMatrix) -> Vec<C64> {
        self.orthonormal.iter().map(|q| hs(q, x)).collect()
    }

    /// Projection of `x ∈ M_n(M_k)` onto `S ⊗ M_k`.
    fn project_amplified(&self, x: &CMatrix, k: usize) -> CMatrix {
        let n = self.n;
        let mut out = CMatrix::zeros(n * k, n * k);
        for q in &self.orthonormal {
            let mut y = CMatrix::zeros(k, k);
            for r in 0..n {
                for c in 0..n {
                    let w = q[(r, c)].conj();
                    if w != ZERO {
                        y += x.view((r * k, c * k), (k, k)) * w;
                    }
                }
            }
            for r in 0..n {
                for c in 0..n {
                    let w = q[(r, c)];
                    if w != ZERO {
                        let mut v = out.view_mut((r * k, c * k), (k, k));
                        v += &y * w;
                    }
                }
            }
        }
        out
    }
}

/// A map given by its values on a basis of `S`.
#[derive(Clone, Debug)]
pub struct SubspaceMap {
    pub basis: SubspaceBasis,
    pub values: Vec<CMatrix>,
    pub out_dim: usize,
}

impl SubspaceMap {
    pub fn new(basis: SubspaceBasis, values: Vec<CMatrix>) -> Result<Self> {
        if values.len() != basis.dim() {
            return Err(Error::dim(format!(
                "{} values for a basis of {} elements",
                values.len(),
                basis.dim()
            )));
        }
        let out_dim = values.first().map(|v| v.nrows()).unwrap_or(0);
        if values
            .iter()
            .any(|v| v.nrows() != out_dim || v.ncols() != out_dim)
        {
            return Err(Error::dim("values must be square matrices of one size"));
        }
        Ok(SubspaceMap {
            basis,
            values,
            out_dim,
        })
    }

    pub fn restrict(u: &LinearMap, basis: SubspaceBasis) -> Result<Self> {
        if u.in_dim() != basis.ambient() {
            return Err(Error::dim("subspace and map act on different spaces"));
        }
        let values = basis.basis().iter().map(|b| u.apply(b)).collect();
        Self::new(basis, values)
    }

    /// The extension `u ∘ P_S`, zero on the trace-orthogonal complement.
    pub fn baseline(&self) -> LinearMap {
        let n = self.basis.ambient();
        LinearMap::from_fn(n, self.out_dim, |x| {
            let mut y = CMatrix::zeros(self.out_dim, self.out_dim);
            for (c, v) in self.basis.coordinates(x).into_iter().zip(&self.values) {
                y += v * c;
            }
            y
        })
    }

    pub fn residual(&self, u: &LinearMap) -> f64 {
        self.basis
            .basis()
            .iter()
            .zip(&self.values)
            .map(|(b, v)| (u.apply(b) - v).norm())
            .fold(0.0, f64::max)
    }

    /// Moves a Choi matrix to the nearest one (entrywise least squares) whose
    /// map agrees with the prescribed values on `S`.
    fn project_choi(&self, j: &CMatrix) -> CMatrix {
        let n = self.basis.ambient();
        let m = self.out_dim;
        let d = self.basis.dim();
        let b = DMatrix::from_fn(d, n * n, |t, c| self.basis.basis()[t][(c / n, c % n)]);
        let bbt = &b * b.adjoint();
        let inv = eigh(&crate::linalg::hermitian_part(&bbt)).map_values(|v| 1.0 / v);
        let corr = b.adjoint() * inv;
        let mut out = j.clone();
        for k in 0..m {
            for l in 0..m {
                let vec = CMatrix::from_fn(n * n, 1, |c, _| j[((c / n) * m + k, (c % n) * m + l)]);
                let target = CMatrix::from_fn(d, 1, |t, _| self.values[t][(k, l)]);
                let fixed = &vec - &corr * (&b * &vec - target);
                for c in 0..n * n {
                    out[((c / n) * m + k, (c % n) * m + l)] = fixed[(c, 0)];
                }
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ExtensionOptions {
    pub levels: usize,
    pub starts: usize,
    /// Alternations between the input step and the dual witness.
    pub alternations: usize,
    pub seed: u64,
    pub regular: RegularOptions,
}

impl Default for ExtensionOptions {
    fn default() -> Self {
        ExtensionOptions {
            levels: 2,
            starts: 2,
            alternations: 4,
            seed: 0,
            regular: RegularOptions {
                decomposition: false,
                ..RegularOptions::default()
            },
        }
    }
}

#[derive(Clone, Debug)]
pub struct ExtensionResult {
    pub extension: LinearMap,
    pub restriction_residual: f64,
    pub upper: f64,
    pub certificate: &'static str,
    /// Lower bound for the regular norm of the map on `S`.
    pub subspace_lower: f64,
    pub gap: f64,
}

/// Searches for an extension with small regular norm: the better of `u ∘ P_S`
/// and the minimizer of the certificate program over all extensions.
pub fn extend(f: &SubspaceMap, p: PExponent, opts: &ExtensionOptions) -> Result<ExtensionResult> {
    let n = f.basis.ambient();
    let m = f.out_dim;
    let theta = p.theta();
    let baseline = f.baseline();
    let rep = regular_upper(&baseline, p, &opts.regular)?;
    let mut best = (rep.upper, rep.certificate.kind(), baseline.clone());

    let scale = op_norm(baseline.choi());
    if scale > 0.0 && f.basis.dim() < n * n {
        let pairs: Vec<(CMatrix, CMatrix)> = f
            .basis
            .basis()
            .iter()
            .zip(&f.values)
            .map(|(b, v)| (b.clone(), v.scale(1.0 / scale)))
            .collect();
        let mut weights = None;
        for _ in 0..3 {
            // the baseline is always available, so a failed solve only ends the search
            let Ok(raw) = haagerup::solve_raw(
                n,
                m,
                theta,
                weights.as_ref(),
                ChoiSpec::Affine(&pairs),
                &SolverSettings::default(),
            ) else {
                break;
            };
            let j = f.project_choi(&raw.choi.scale(scale));
            let cand = LinearMap::from_choi(n, m, j)?;
            let Ok(rep) = regular_upper(&cand, p, &opts.regular) else {
                break;
            };
            if rep.upper < best.0 {
                best = (rep.upper, rep.certificate.kind(), cand);
            }
            match rep.certificate {
                UpperCertificate::Factorization {
                    weights: Some(w), ..
                } => weights = Some(w),
                _ => break,
            }
        }
    }
    let subspace_lower = subspace_lower(f, &baseline, p, opts);
    let (upper, certificate, extension) = best;
    Ok(ExtensionResult {
        restriction_residual: f.residual(&extension),
        extension,
        upper,
        certificate,
        subspace_lower,
        gap: upper - subspace_lower,
    })
}

/// `min ‖x‖_∞` over `x ∈ S ⊗ M_k` with `tr(x y) = 1`, as a semidefinite program.
fn min_op_norm_affine(s: &SubspaceBasis, k: usize, y: &CMatrix) -> Option<CMatrix> {
    let n = s.ambient();
    let nk = n * k;
    let mut prog = ConicProgram::new();
    let z = prog.add_psd(2 * nk);
    let ze = prog.herm_expr(z);
    let t = prog.add_free();
    let te = prog.scalar(t);
    let mut x = MatExpr::zeros(nk, nk);
    for q in &s.orthonormal {
        for a in 0..k {
            for b in 0..k {
                let re = prog.add_free();
                let im = prog.add_free();
                let mut c = CExpr::real(prog.scalar(re));
                c.add_scaled(&CExpr::real(prog.scalar(im)), C64::new(0.0, 1.0));
                for r in 0..n {
                    for cc in 0..n {
                        let w = q[(r, cc)];
                        if w != ZERO {
                            let mut e = x.get(r * k + a, cc * k + b).clone();
                            e.add_scaled(&c, w);
                            x.set(r * k + a, cc * k + b, e);
                        }
                    }
                }
            }
        }
    }
    let zero = CMatrix::zeros(nk, nk);
    let tid = MatExpr::scalar_identity(&te, nk);
    prog.add_hermitian_eq(&ze.view(0, 0, nk, nk).sub(&tid), &zero);
    prog.add_hermitian_eq(&ze.view(nk, nk, nk, nk).sub(&tid), &zero);
    prog.add_matrix_eq(&ze.view(0, nk, nk, nk).sub(&x), &zero);
    let mut pairing = CExpr::default();
    for r in 0..nk {
        for c in 0..nk {
            pairing.add_scaled(x.get(r, c), y[(c, r)]);
        }
    }
    prog.add_ceq(&pairing, ONE);
    prog.add_objective(&te);
    let rep = prog.solve(&SolverSettings::default());
    if rep.status == crate::conic::SolveStatus::InfeasibleSuspected {
        return None;
    }
    Some(rep.herm(z).view((0, nk), (nk, nk)).into_owned())
}

/// Certified lower bound for the regular norm of `f` on `S`: inputs are
/// restricted to `S ⊗ M_k`, where every extension agrees with `baseline`.
fn subspace_lower(
    f: &SubspaceMap,
    baseline: &LinearMap,
    p: PExponent,
    opts: &ExtensionOptions,
) -> f64 {
    let s = &f.basis;
    let (n, m) = (s.ambient(), f.out_dim);
    let q_out = p.conjugate().scaled(2.0);
    // level one: both norms are plain Schatten norms
    let mut best = 0.0f64;
    for b in s.basis().iter().chain(s.orthonormal.iter()) {
        let d = schatten_norm(b, p);
        if d > 0.0 {
            best = best.max(schatten_norm(&baseline.apply(b), p) / d);
        }
    }
    for k in 1..=opts.levels.max(1) {
        let lk = baseline.tensor_identity(k);
        for start in 0..opts.starts.max(1) {
            let mut rng = substream(opts.seed, (k * 100 + start) as u64);
            let mut x = s.project_amplified(&random_matrix(&mut rng, n * k, n * k), k);
            let mut witness = vnorm::random_witness(&mut rng, m, k, k, start == 0);
            for _ in 0..opts.alternations.max(1) {
                let z = lk.apply(&x);
                let (_, w) = vnorm::ascend(&z, m, k, p, witness, 100);
                witness = w;
                let den = witness.denominator(q_out);
                let y = lk.apply_transpose(&witness.w_hat(m, k, k));
                let Some((next, norm)) = min_norm_input(s, k, p, &y) else {
                    break;
                };
                let t = trace(&(lk.apply(&next) * witness.w_hat(m, k, k))).norm();
                if norm > 0.0 && den > 0.0 {
                    best = best.max(t / (norm * den));
                }
                x = next;
            }
        }
    }
    best
}

/// Input of small norm in `S ⊗ M_k` with `tr(x y) = 1`, with a certified norm
/// upper bound.
fn min_norm_input(
    s: &SubspaceBasis,
    k: usize,
    p: PExponent,
    y: &CMatrix,
) -> Option<(CMatrix, f64)> {
    let n = s.ambient();
    // h with tr(x y) = ⟨h, x⟩, restricted to the subspace
    let h = s.project_amplified(&y.adjoint(), k);
    let hn = h.norm_squared();
    if hn == 0.0 {
        return None;
    }
    let x0 = &h / C64::from(hn);
    let c = op_norm(&x0);
    // rescale so the minimal-Frobenius solution has unit operator norm
    let hs_ = &h * C64::from(c);
    let hsn = hs_.norm_squared();
    if p.is_infinite() {
        let x = min_op_norm_affine(s, k, &y.scale(c))?.scale(c);
        let norm = op_norm(&x);
        return Some((x, norm));
    }
    let proj = |off: &CMatrix| {
        let w = s.project_amplified(off, k);
        let g = hs(&hs_, &w);
        &w + &hs_ * ((ONE - g) / hsn)
    };
    let sol = lmi_admm(
        n,
        k,
        p.value(),
        XSpec::Affine(&proj),
        (identity(n), identity(n)),
        3000,
        1e-8,
    );
    // undo the rescaling: tr(x · c y) = 1, and the LMI scales along
    let x = sol.x.scale(c);
    let f = certify(&x, n, k, p, &sol.a.scale(c), &sol.b.scale(c));
    Some((x, f.value))
}

/// `‖ |M| ‖_{ℓ_p^n → ℓ_p^n}` for a map `x ↦ Σ_ij M_ij x_jj e_ii`: it must send
/// `e_jj` to diagonal matrices and every `e_ij`, `i ≠ j`, to zero.
pub fn lattice_regular_oracle(u: &LinearMap, p: PExponent) -> Result<f64> {
    let n = u.in_dim();
    if u.out_dim() != n {
        return Err(Error::NotDiagonalPreserving);
    }
    let mut mat = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i != j && u.choi_block(i, j).norm() > 1e-12 * u.choi().norm().max(1.0) {
                return Err(Error::NotDiagonalPreserving);
            }
        }
    }
    for j in 0..n {
        let img = u.choi_block(j, j);
        let scale = img.norm().max(1.0);
        for r in 0..n {
            for c in 0..n {
                if r != c && img[(r, c)].norm() > 1e-12 * scale {
                    return Err(Error::NotDiagonalPreserving);
                }
            }
            mat[(r, j)] = img[(r, r)].norm();
        }
    }
    Ok(lattice_norm(&mat, p))
}

fn lattice_norm(a: &DMatrix<f64>, p: PExponent) -> f64 {
    let n = a.ncols();
    if p.is_infinite() {
        // extreme points of the unit ball are the sign vectors
        let mut best = 0.0f64;
        for mask in 0..(1u64 << n.min(20)) {
            let x =
                nalgebra::DVector::from_fn(n, |j, _| if mask >> j & 1 == 1 { -1.0 } else { 1.0 });
            best = best.max((a * x).amax());
        }
        return best;
    }
    if p.is_one() {
        return (0..n)
            .map(|j| a.column(j).iter().sum::<f64>())
            .fold(0.0, f64::max);
    }
    // nonlinear power iteration for nonnegative matrices
    let pv = p.value();
    let qv = pv / (pv - 1.0);
    let lp = |v: &nalgebra::DVector<f64>, e: f64| {
        v.iter().map(|x| x.abs().powf(e)).sum::<f64>().powf(1.0 / e)
    };
    let mut x = nalgebra::DVector::from_element(n, 1.0);
    x /= lp(&x, pv);
    let mut val = 0.0;
    for _ in 0..2000 {
        let y = a * &x;
        let v = lp(&y, pv);
        if v == 0.0 {
            break;
        }
        let g = a.transpose() * y.map(|t| t.powf(pv - 1.0));
        let mut next = g.map(|t| t.powf(qv - 1.0));
        let nn = lp(&next, pv);
        if nn == 0.0 {
            break;
        }
        next /= nn;
        let diff = (&next - &x).norm();
        x = next;
        val = lp(&(a * &x), pv);
        if diff < 1e-14 {
            break;
        }
    }
    val
}
