//! Dense complex linear algebra shared by every other module.
//!
//! Matrices are `nalgebra` dense matrices over `Complex<f64>`. Tensor products
//! use the row-major Kronecker convention: in `A ⊗ B` the index of the first
//! factor is the slow one, so entry `((i, k), (j, l))` of an element of
//! `M_n ⊗ M_m` lives at `(i * m + k, j * m + l)`.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Relative threshold below which singular values and eigenvalues count as zero
/// when forming inverses or fractional powers.
pub const RANK_CUTOFF: f64 = 1e-12;

/// Tolerance used when checking a user-supplied matrix for Hermiticity.
pub const HERMITIAN_TOL: f64 = 1e-10;

#[inline]
pub fn cx(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// An exponent `p ∈ [1, ∞]`. Infinity is a distinct value, never a large float.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PExponent(Repr);

#[derive(Clone, Copy, Debug, PartialEq)]
enum Repr {
    Finite(f64),
    Infinity,
}

impl PExponent {
    pub const ONE: PExponent = PExponent(Repr::Finite(1.0));
    pub const TWO: PExponent = PExponent(Repr::Finite(2.0));
    pub const INFINITY: PExponent = PExponent(Repr::Infinity);

    pub fn new(p: f64) -> Result<Self> {
        if p == f64::INFINITY {
            Ok(Self::INFINITY)
        } else if p.is_finite() && p >= 1.0 {
            Ok(PExponent(Repr::Finite(p)))
        } else {
            Err(Error::InvalidExponent(p.to_string()))
        }
    }

    /// Builds the exponent with `1/p = theta`; `theta = 0` gives infinity.
    pub fn from_theta(theta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&theta) {
            return Err(Error::InvalidExponent(format!("theta={theta}")));
        }
        if theta == 0.0 {
            Ok(Self::INFINITY)
        } else {
            Self::new(1.0 / theta)
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self.0, Repr::Infinity)
    }

    pub fn is_one(self) -> bool {
        matches!(self.0, Repr::Finite(p) if p == 1.0)
    }

    /// The exponent as a float (`f64::INFINITY` for `p = ∞`).
    pub fn value(self) -> f64 {
        match self.0 {
            Repr::Finite(p) => p,
            Repr::Infinity => f64::INFINITY,
        }
    }

    /// `θ = 1/p`.
    pub fn theta(self) -> f64 {
        match self.0 {
            Repr::Finite(p) => 1.0 / p,
            Repr::Infinity => 0.0,
        }
    }

    /// The conjugate exponent `p'` with `1/p + 1/p' = 1`.
    pub fn conjugate(self) -> PExponent {
        match self.0 {
            Repr::Infinity => Self::ONE,
            Repr::Finite(p) if p == 1.0 => Self::INFINITY,
            Repr::Finite(p) => PExponent(Repr::Finite(p / (p - 1.0))),
        }
    }

    /// `k·p` for `k ≥ 1`; infinity stays infinity.
    pub fn scaled(self, k: f64) -> PExponent {
        debug_assert!(k >= 1.0);
        match self.0 {
            Repr::Infinity => self,
            Repr::Finite(p) => PExponent(Repr::Finite(p * k)),
        }
    }
}

impl fmt::Display for PExponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Repr::Infinity => f.write_str("inf"),
            Repr::Finite(p) => write!(f, "{p}"),
        }
    }
}

impl FromStr for PExponent {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        match t.to_ascii_lowercase().as_str() {
            "inf" | "infinity" | "∞" => return Ok(Self::INFINITY),
            _ => {}
        }
        let p: f64 = t
            .parse()
            .map_err(|_| Error::InvalidExponent(t.to_string()))?;
        if p.is_infinite() {
            // "1e999" and friends are large floats, not the distinguished endpoint
            return Err(Error::InvalidExponent(t.to_string()));
        }
        Self::new(p)
    }
}

/// `‖v‖_p` of a vector of non-negative reals.
pub fn lp_norm(values: &[f64], p: PExponent) -> f64 {
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    if p.is_infinite() {
        return scale;
    }
    let p = p.value();
    let s: f64 = values.iter().map(|v| (v.abs() / scale).powf(p)).sum();
    scale * s.powf(1.0 / p)
}

/// Eigendecomposition of a Hermitian matrix.
#[derive(Clone, Debug)]
pub struct HermitianEig {
    /// Eigenvalues in descending order.
    pub values: Vec<f64>,
    /// Unitary matrix whose columns are the matching eigenvectors.
    pub vectors: CMatrix,
}

impl HermitianEig {
    pub fn reconstruct(&self) -> CMatrix {
        self.map_values(|v| v)
    }

    /// `V f(Λ) V*`.
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> CMatrix {
        let d = self.values.len();
        let mut scaled = self.vectors.clone();
        for (j, &v) in self.values.iter().enumerate() {
            let fv = f(v);
            for i in 0..d {
                scaled[(i, j)] *= fv;
            }
        }
        &scaled * self.vectors.adjoint()
    }

    pub fn min(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    pub fn max(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }
}

pub fn hermitian_deviation(a: &CMatrix) -> f64 {
    let n = a.nrows();
    let mut dev = 0.0f64;
    for i in 0..n {
        for j in 0..=i {
            dev = dev.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    dev
}

pub fn max_abs_entry(a: &CMatrix) -> f64 {
    a.iter().fold(0.0f64, |m, z| m.max(z.norm()))
}

pub fn hermitian_part(a: &CMatrix) -> CMatrix {
    (a + a.adjoint()).scale(0.5)
}

/// Eigendecomposition of a Hermitian matrix, rejecting inputs that are not
/// Hermitian to within [`HERMITIAN_TOL`] relative to the largest entry.
pub fn hermitian_eig(a: &CMatrix) -> Result<HermitianEig> {
    if a.nrows() != a.ncols() {
        return Err(Error::dim(format!(
            "eigendecomposition of a {}x{} matrix",
            a.nrows(),
            a.ncols()
        )));
    }
    let dev = hermitian_deviation(a);
    if dev > HERMITIAN_TOL * max_abs_entry(a).max(1.0) {
        return Err(Error::NotHermitian { deviation: dev });
    }
    Ok(eigh(a))
}

/// Eigendecomposition of the Hermitian part of `a`, without input validation.
pub fn eigh(a: &CMatrix) -> HermitianEig {
    let d = a.nrows();
    if d == 0 {
        return HermitianEig {
            values: Vec::new(),
            vectors: CMatrix::zeros(0, 0),
        };
    }
    let eig = nalgebra::SymmetricEigen::new(hermitian_part(a));
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[y].total_cmp(&eig.eigenvalues[x]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = CMatrix::from_fn(d, d, |i, j| eig.eigenvectors[(i, order[j])]);
    HermitianEig { values, vectors }
}

/// Eigenvalues (descending) of the Hermitian part of `a`.
pub fn eigvalsh(a: &CMatrix) -> Vec<f64> {
    let mut v: Vec<f64> = nalgebra::SymmetricEigen::new(hermitian_part(a))
        .eigenvalues
        .iter()
        .copied()
        .collect();
    v.sort_by(|x, y| y.total_cmp(x));
    v
}

pub fn min_eigenvalue(a: &CMatrix) -> f64 {
    eigvalsh(a).last().copied().unwrap_or(0.0)
}

/// Singular values in descending order.
pub fn singular_values(a: &CMatrix) -> Vec<f64> {
    if a.is_empty() {
        return Vec::new();
    }
    let mut s: Vec<f64> = a
        .clone()
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

/// Thin SVD `a = U diag(s) V*` with singular values sorted descending.
pub struct Svd {
    pub u: CMatrix,
    pub s: Vec<f64>,
    pub v_adj: CMatrix,
}

pub fn svd(a: &CMatrix) -> Svd {
    let dec = a.clone().svd(true, true);
    let u = dec.u.expect("svd requested u");
    let v_adj = dec.v_t.expect("svd requested v");
    let k = dec.singular_values.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&x, &y| dec.singular_values[y].total_cmp(&dec.singular_values[x]));
    Svd {
        u: CMatrix::from_fn(u.nrows(), k, |i, j| u[(i, order[j])]),
        s: order.iter().map(|&j| dec.singular_values[j]).collect(),
        v_adj: CMatrix::from_fn(k, v_adj.ncols(), |i, j| v_adj[(order[i], j)]),
    }
}

pub fn op_norm(a: &CMatrix) -> f64 {
    singular_values(a).first().copied().unwrap_or(0.0)
}

/// `‖A‖_p = (Σ σ_i^p)^{1/p}`, and the largest singular value for `p = ∞`.
pub fn schatten_norm(a: &CMatrix, p: PExponent) -> f64 {
    lp_norm(&singular_values(a), p)
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

/// Matrix unit `e_ij` of size `n × n`.
pub fn unit(n: usize, i: usize, j: usize) -> CMatrix {
    let mut e = CMatrix::zeros(n, n);
    e[(i, j)] = ONE;
    e
}

pub fn trace(a: &CMatrix) -> C64 {
    a.diagonal().iter().sum()
}

/// Partial trace of `M ∈ M_outer ⊗ M_inner` over the inner factor.
pub fn trace_inner(m: &CMatrix, outer: usize, inner: usize) -> CMatrix {
    debug_assert_eq!(m.nrows(), outer * inner);
    CMatrix::from_fn(outer, outer, |i, j| {
        (0..inner).map(|k| m[(i * inner + k, j * inner + k)]).sum()
    })
}

/// Partial trace of `M ∈ M_outer ⊗ M_inner` over the outer factor.
pub fn trace_outer(m: &CMatrix, outer: usize, inner: usize) -> CMatrix {
    debug_assert_eq!(m.nrows(), outer * inner);
    CMatrix::from_fn(inner, inner, |k, l| {
        (0..outer).map(|i| m[(i * inner + k, i * inner + l)]).sum()
    })
}

/// Projection of the Hermitian part of `a` onto the positive semidefinite cone.
pub fn psd_projection(a: &CMatrix) -> CMatrix {
    eigh(a).map_values(|v| v.max(0.0))
}

/// `A^e` for a positive semidefinite `A`; eigenvalues below
/// `RANK_CUTOFF · λ_max` are raised to that floor first.
pub fn psd_power(a: &CMatrix, e: f64) -> CMatrix {
    let eig = eigh(a);
    let floor = (eig.max().abs() * RANK_CUTOFF).max(f64::MIN_POSITIVE);
    eig.map_values(|v| v.max(floor).powf(e))
}

/// Partial isometry `U V*` from the thin SVD of `g`.
pub fn polar_isometry(g: &CMatrix) -> CMatrix {
    let d = svd(g);
    &d.u * &d.v_adj
}

/// A matrix `X` with `‖X‖_q = 1` maximizing `|tr(X N)|`; on return
/// `tr(X N) = ‖N‖_{q'}` is real and non-negative.
pub fn schatten_dual_maximizer(n: &CMatrix, q: PExponent) -> CMatrix {
    let d = svd(n);
    let k = d.s.len();
    let smax = d.s.first().copied().unwrap_or(0.0);
    let qc = q.conjugate();
    let f: Vec<f64> = if smax == 0.0 {
        // any unit-norm matrix is optimal
        let mut f = vec![0.0; k];
        if k > 0 {
            f[0] = 1.0;
        }
        f
    } else if qc.is_infinite() {
        let mut f = vec![0.0; k];
        f[0] = 1.0;
        f
    } else if qc.is_one() {
        vec![1.0; k]
    } else {
        let r = qc.value();
        let nrm = lp_norm(&d.s, qc);
        d.s.iter().map(|s| (s / nrm).powf(r - 1.0)).collect()
    };
    let mut v = d.v_adj.adjoint();
    for (j, fj) in f.iter().enumerate() {
        for i in 0..v.nrows() {
            v[(i, j)] *= *fj;
        }
    }
    v * d.u.adjoint()
}

/// Relative Frobenius distance `‖a − b‖_F / max(‖b‖_F, tiny)`.
pub fn rel_frobenius(a: &CMatrix, b: &CMatrix) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}
