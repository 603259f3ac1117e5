//! A small deterministic conic solver for problems of the form
//!
//! ```text
//! minimize cᵀx  subject to  A x = b,  x ∈ K
//! ```
//!
//! where `K` is a product of Hermitian PSD cones (in scaled-vector coordinates),
//! free scalars and non-negative scalars. The iteration is ADMM with a fixed
//! penalty and over-relaxation: an exact affine projection followed by a cone
//! projection.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::linalg::{CMatrix, C64, ZERO};

const SQRT2: f64 = std::f64::consts::SQRT_2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    MaxIter,
    InfeasibleSuspected,
}

#[derive(Clone, Copy, Debug)]
pub struct SolverSettings {
    pub tol: f64,
    pub max_iter: usize,
    pub rho: f64,
    pub alpha: f64,
    /// Residuals are evaluated every this many iterations.
    pub check_every: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            tol: 1e-7,
            max_iter: 50_000,
            rho: 1.0,
            alpha: 1.5,
            check_every: 10,
        }
    }
}

#[derive(Clone, Copy, Debug)]
enum Cone {
    Psd { offset: usize, dim: usize },
    Free { index: usize },
    Nonneg { index: usize },
}

/// Handle to a Hermitian PSD matrix variable.
#[derive(Clone, Copy, Debug)]
pub struct HermVar {
    offset: usize,
    dim: usize,
}

impl HermVar {
    pub fn dim(&self) -> usize {
        self.dim
    }
}

/// Handle to a real scalar variable.
#[derive(Clone, Copy, Debug)]
pub struct ScalarVar {
    index: usize,
}

/// Affine real expression `Σ coef·x[index] + constant`.
#[derive(Clone, Debug, Default)]
pub struct LinExpr {
    terms: Vec<(usize, f64)>,
    constant: f64,
}

impl LinExpr {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        LinExpr {
            terms: Vec::new(),
            constant: c,
        }
    }

    fn coord(index: usize, coef: f64) -> Self {
        LinExpr {
            terms: vec![(index, coef)],
            constant: 0.0,
        }
    }

    pub fn add_scaled(&mut self, other: &LinExpr, s: f64) {
        if s == 0.0 {
            return;
        }
        self.terms
            .extend(other.terms.iter().map(|&(i, c)| (i, c * s)));
        self.constant += other.constant * s;
    }

    fn scaled(&self, s: f64) -> LinExpr {
        let mut e = LinExpr::zero();
        e.add_scaled(self, s);
        e
    }

    /// Merges duplicate coordinates and drops zero coefficients.
    fn compact(&mut self) {
        if self.terms.len() < 2 {
            self.terms.retain(|&(_, c)| c != 0.0);
            return;
        }
        self.terms.sort_by_key(|&(i, _)| i);
        let mut out: Vec<(usize, f64)> = Vec::with_capacity(self.terms.len());
        for &(i, c) in &self.terms {
            match out.last_mut() {
                Some(last) if last.0 == i => last.1 += c,
                _ => out.push((i, c)),
            }
        }
        out.retain(|&(_, c)| c != 0.0);
        self.terms = out;
    }
}

impl Add for LinExpr {
    type Output = LinExpr;
    fn add(mut self, rhs: LinExpr) -> LinExpr {
        self.add_scaled(&rhs, 1.0);
        self
    }
}

impl Sub for LinExpr {
    type Output = LinExpr;
    fn sub(mut self, rhs: LinExpr) -> LinExpr {
        self.add_scaled(&rhs, -1.0);
        self
    }
}

impl Mul<f64> for LinExpr {
    type Output = LinExpr;
    fn mul(self, s: f64) -> LinExpr {
        self.scaled(s)
    }
}

impl Neg for LinExpr {
    type Output = LinExpr;
    fn neg(self) -> LinExpr {
        self.scaled(-1.0)
    }
}

/// Affine complex expression with real and imaginary parts.
#[derive(Clone, Debug, Default)]
pub struct CExpr {
    pub re: LinExpr,
    pub im: LinExpr,
}

impl CExpr {
    pub fn real(e: LinExpr) -> Self {
        CExpr {
            re: e,
            im: LinExpr::zero(),
        }
    }

    pub fn constant(c: C64) -> Self {
        CExpr {
            re: LinExpr::constant(c.re),
            im: LinExpr::constant(c.im),
        }
    }

    /// `self += c·other`.
    pub fn add_scaled(&mut self, other: &CExpr, c: C64) {
        if c == ZERO {
            return;
        }
        self.re.add_scaled(&other.re, c.re);
        self.re.add_scaled(&other.im, -c.im);
        self.im.add_scaled(&other.im, c.re);
        self.im.add_scaled(&other.re, c.im);
    }

    pub fn scaled(&self, c: C64) -> CExpr {
        let mut e = CExpr::default();
        e.add_scaled(self, c);
        e
    }

    pub fn conj(&self) -> CExpr {
        CExpr {
            re: self.re.clone(),
            im: -self.im.clone(),
        }
    }
}

/// Matrix of complex affine expressions, row-major.
#[derive(Clone, Debug)]
pub struct MatExpr {
    rows: usize,
    cols: usize,
    entries: Vec<CExpr>,
}

impl MatExpr {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        MatExpr {
            rows,
            cols,
            entries: vec![CExpr::default(); rows * cols],
        }
    }

    pub fn constant(a: &CMatrix) -> Self {
        let mut e = Self::zeros(a.nrows(), a.ncols());
        for i in 0..a.nrows() {
            for j in 0..a.ncols() {
                e.entries[i * a.ncols() + j] = CExpr::constant(a[(i, j)]);
            }
        }
        e
    }

    /// `s·I_d` for a real scalar expression `s`.
    pub fn scalar_identity(s: &LinExpr, d: usize) -> Self {
        let mut e = Self::zeros(d, d);
        for i in 0..d {
            e.entries[i * d + i] = CExpr::real(s.clone());
        }
        e
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &CExpr {
        &self.entries[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, e: CExpr) {
        self.entries[i * self.cols + j] = e;
    }

    fn get_mut(&mut self, i: usize, j: usize) -> &mut CExpr {
        &mut self.entries[i * self.cols + j]
    }

    pub fn view(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> MatExpr {
        let mut e = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                e.entries[i * cols + j] = self.get(r0 + i, c0 + j).clone();
            }
        }
        e
    }

    /// `self += c·other`.
    pub fn add_scaled(&mut self, other: &MatExpr, c: C64) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, b) in self.entries.iter_mut().zip(&other.entries) {
            a.add_scaled(b, c);
        }
    }

    pub fn sub(&self, other: &MatExpr) -> MatExpr {
        let mut e = self.clone();
        e.add_scaled(other, C64::new(-1.0, 0.0));
        e
    }

    /// `A · self`.
    pub fn lmul(&self, a: &CMatrix) -> MatExpr {
        assert_eq!(a.ncols(), self.rows);
        let mut out = Self::zeros(a.nrows(), self.cols);
        for i in 0..a.nrows() {
            for k in 0..self.rows {
                let c = a[(i, k)];
                if c == ZERO {
                    continue;
                }
                for j in 0..self.cols {
                    let src = self.get(k, j).clone();
                    out.get_mut(i, j).add_scaled(&src, c);
                }
            }
        }
        out.compact();
        out
    }

    /// `self · B`.
    pub fn rmul(&self, b: &CMatrix) -> MatExpr {
        assert_eq!(b.nrows(), self.cols);
        let mut out = Self::zeros(self.rows, b.ncols());
        for i in 0..self.rows {
            for k in 0..self.cols {
                let src = self.get(i, k).clone();
                for j in 0..b.ncols() {
                    let c = b[(k, j)];
                    if c != ZERO {
                        out.get_mut(i, j).add_scaled(&src, c);
                    }
                }
            }
        }
        out.compact();
        out
    }

    pub fn trace(&self) -> CExpr {
        let mut t = CExpr::default();
        for i in 0..self.rows.min(self.cols) {
            t.add_scaled(self.get(i, i), C64::new(1.0, 0.0));
        }
        t
    }

    fn compact(&mut self) {
        for e in &mut self.entries {
            e.re.compact();
            e.im.compact();
        }
    }
}

/// Outcome of [`ConicProgram::solve`].
#[derive(Clone, Debug)]
pub struct SolveReport {
    pub primal_value: f64,
    pub dual_value: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub iterations: usize,
    pub status: SolveStatus,
    /// Final iterate; it lies in the cone exactly.
    pub x: Vec<f64>,
}

impl SolveReport {
    pub fn herm(&self, v: HermVar) -> CMatrix {
        unpack_herm(&self.x[v.offset..v.offset + v.dim * v.dim], v.dim)
    }

    pub fn scalar(&self, v: ScalarVar) -> f64 {
        self.x[v.index]
    }
}

#[derive(Clone, Debug, Default)]
pub struct ConicProgram {
    cones: Vec<Cone>,
    dim: usize,
    objective: LinExpr,
    rows: Vec<(LinExpr, f64)>,
}

/// Position of entry `(i, j)`, `i ≤ j`, inside the scaled vector of a `d × d`
/// Hermitian block: diagonal entries occupy one slot, off-diagonal entries two
/// (`√2·Re`, `√2·Im`).
fn svec_index(d: usize, i: usize, j: usize) -> usize {
    debug_assert!(i <= j && j < d);
    // rows 0..i contribute Σ_{r<i} (1 + 2(d-1-r)) slots
    let before = i * (2 * d - i);
    if i == j {
        before
    } else {
        before + 1 + 2 * (j - i - 1)
    }
}

fn unpack_herm(v: &[f64], d: usize) -> CMatrix {
    let mut a = CMatrix::zeros(d, d);
    for i in 0..d {
        a[(i, i)] = C64::new(v[svec_index(d, i, i)], 0.0);
        for j in i + 1..d {
            let k = svec_index(d, i, j);
            let z = C64::new(v[k], v[k + 1]) / SQRT2;
            a[(i, j)] = z;
            a[(j, i)] = z.conj();
        }
    }
    a
}

#[cfg(test)]
fn pack_herm(a: &CMatrix, out: &mut [f64]) {
    let d = a.nrows();
    for i in 0..d {
        out[svec_index(d, i, i)] = a[(i, i)].re;
        for j in i + 1..d {
            let k = svec_index(d, i, j);
            let z = (a[(i, j)] + a[(j, i)].conj()) * 0.5;
            out[k] = SQRT2 * z.re;
            out[k + 1] = SQRT2 * z.im;
        }
    }
}

/// Projects a scaled Hermitian vector onto the PSD cone through the real
/// symmetric embedding `[[Re, −Im], [Im, Re]]`.
fn project_psd(v: &mut [f64], d: usize) {
    let mut e = DMatrix::<f64>::zeros(2 * d, 2 * d);
    for i in 0..d {
        e[(i, i)] = v[svec_index(d, i, i)];
        e[(i + d, i + d)] = e[(i, i)];
        for j in i + 1..d {
            let k = svec_index(d, i, j);
            let (re, im) = (v[k] / SQRT2, v[k + 1] / SQRT2);
            e[(i, j)] = re;
            e[(j, i)] = re;
            e[(i + d, j + d)] = re;
            e[(j + d, i + d)] = re;
            // Im block sits at (row + d, col): entry (i, j) of Im is im
            e[(i + d, j)] = im;
            e[(j + d, i)] = -im;
            e[(j, i + d)] = im;
            e[(i, j + d)] = -im;
        }
    }
    let eig = SymmetricEigen::new(e);
    if eig.eigenvalues.iter().all(|&l| l >= 0.0) {
        return;
    }
    let mut vecs = eig.eigenvectors.clone();
    for (c, &l) in eig.eigenvalues.iter().enumerate() {
        let s = l.max(0.0).sqrt();
        for r in 0..2 * d {
            vecs[(r, c)] *= s;
        }
    }
    let p = &vecs * vecs.transpose();
    for i in 0..d {
        v[svec_index(d, i, i)] = 0.5 * (p[(i, i)] + p[(i + d, i + d)]);
        for j in i + 1..d {
            let k = svec_index(d, i, j);
            let re = 0.5 * (p[(i, j)] + p[(i + d, j + d)]);
            let im = 0.5 * (p[(i + d, j)] - p[(i, j + d)]);
            v[k] = SQRT2 * re;
            v[k + 1] = SQRT2 * im;
        }
    }
}

impl ConicProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_psd(&mut self, dim: usize) -> HermVar {
        let offset = self.dim;
        self.cones.push(Cone::Psd { offset, dim });
        self.dim += dim * dim;
        HermVar { offset, dim }
    }

    pub fn add_free(&mut self) -> ScalarVar {
        let index = self.dim;
        self.cones.push(Cone::Free { index });
        self.dim += 1;
        ScalarVar { index }
    }

    pub fn add_nonneg(&mut self) -> ScalarVar {
        let index = self.dim;
        self.cones.push(Cone::Nonneg { index });
        self.dim += 1;
        ScalarVar { index }
    }

    pub fn num_vars(&self) -> usize {
        self.dim
    }

    pub fn num_constraints(&self) -> usize {
        self.rows.len()
    }

    pub fn scalar(&self, v: ScalarVar) -> LinExpr {
        LinExpr::coord(v.index, 1.0)
    }

    pub fn herm_entry(&self, v: HermVar, i: usize, j: usize) -> CExpr {
        let d = v.dim;
        if i == j {
            return CExpr::real(LinExpr::coord(v.offset + svec_index(d, i, i), 1.0));
        }
        let (a, b, sign) = if i < j { (i, j, 1.0) } else { (j, i, -1.0) };
        let k = v.offset + svec_index(d, a, b);
        CExpr {
            re: LinExpr::coord(k, 1.0 / SQRT2),
            im: LinExpr::coord(k + 1, sign / SQRT2),
        }
    }

    pub fn herm_expr(&self, v: HermVar) -> MatExpr {
        let d = v.dim;
        let mut e = MatExpr::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                e.entries[i * d + j] = self.herm_entry(v, i, j);
            }
        }
        e
    }

    /// Adds `e` to the objective (to be minimized).
    pub fn add_objective(&mut self, e: &LinExpr) {
        self.objective.add_scaled(e, 1.0);
    }

    /// Constraint `e = rhs`.
    pub fn add_eq(&mut self, e: &LinExpr, rhs: f64) {
        let mut e = e.clone();
        e.compact();
        let r = rhs - e.constant;
        e.constant = 0.0;
        self.rows.push((e, r));
    }

    /// Complex constraint `e = rhs`, as two real rows.
    pub fn add_ceq(&mut self, e: &CExpr, rhs: C64) {
        self.add_eq(&e.re, rhs.re);
        self.add_eq(&e.im, rhs.im);
    }

    /// Entrywise `lhs = rhs` for a general (non-Hermitian) matrix expression.
    pub fn add_matrix_eq(&mut self, lhs: &MatExpr, rhs: &CMatrix) {
        assert_eq!((lhs.rows, lhs.cols), (rhs.nrows(), rhs.ncols()));
        for i in 0..lhs.rows {
            for j in 0..lhs.cols {
                self.add_ceq(lhs.get(i, j), rhs[(i, j)]);
            }
        }
    }

    /// `lhs = rhs` where both sides are Hermitian by construction; only the
    /// upper triangle is imposed.
    pub fn add_hermitian_eq(&mut self, lhs: &MatExpr, rhs: &CMatrix) {
        assert_eq!(lhs.rows, lhs.cols);
        for i in 0..lhs.rows {
            self.add_eq(&lhs.get(i, i).re, rhs[(i, i)].re);
            for j in i + 1..lhs.cols {
                self.add_ceq(lhs.get(i, j), rhs[(i, j)]);
            }
        }
    }

    /// `lhs ⪯ rhs` for Hermitian expressions, through a PSD slack block.
    pub fn add_loewner_le(&mut self, lhs: &MatExpr, rhs: &MatExpr) -> HermVar {
        let d = lhs.rows;
        let s = self.add_psd(d);
        let mut diff = rhs.sub(lhs);
        diff.add_scaled(&self.herm_expr(s), C64::new(-1.0, 0.0));
        self.add_hermitian_eq(&diff, &CMatrix::zeros(d, d));
        s
    }

    fn project_cone(&self, v: &mut [f64]) {
        for cone in &self.cones {
            match *cone {
                Cone::Psd { offset, dim } => project_psd(&mut v[offset..offset + dim * dim], dim),
                Cone::Free { .. } => {}
                Cone::Nonneg { index } => v[index] = v[index].max(0.0),
            }
        }
    }

    /// Projection onto the dual cone, zeroing free coordinates.
    fn project_dual_cone(&self, v: &mut [f64]) {
        for cone in &self.cones {
            match *cone {
                Cone::Psd { offset, dim } => project_psd(&mut v[offset..offset + dim * dim], dim),
                Cone::Free { index } => v[index] = 0.0,
                Cone::Nonneg { index } => v[index] = v[index].max(0.0),
            }
        }
    }

    pub fn solve(&self, settings: &SolverSettings) -> SolveReport {
        let n = self.dim;
        let r = self.rows.len();
        let mut c = DVector::<f64>::zeros(n);
        for &(i, v) in &self.objective.terms {
            c[i] += v;
        }
        let mut a = DMatrix::<f64>::zeros(r, n);
        let mut b = DVector::<f64>::zeros(r);
        for (k, (e, rhs)) in self.rows.iter().enumerate() {
            for &(i, v) in &e.terms {
                a[(k, i)] += v;
            }
            b[k] = *rhs;
        }

        // (A Aᵀ)⁺ through a symmetric eigendecomposition; redundant rows are
        // common (e.g. constraints implied by Hermiticity) and simply drop out.
        let aat = &a * a.transpose();
        let eig = if r == 0 {
            SymmetricEigen {
                eigenvectors: DMatrix::zeros(0, 0),
                eigenvalues: DVector::zeros(0),
            }
        } else {
            SymmetricEigen::new(aat)
        };
        let lmax = eig.eigenvalues.iter().fold(0.0f64, |m, &l| m.max(l));
        let cutoff = 1e-10 * lmax.max(1.0);
        let mut inv = eig.eigenvectors.clone();
        for (j, &l) in eig.eigenvalues.iter().enumerate() {
            let s = if l > cutoff { 1.0 / l } else { 0.0 };
            for i in 0..r {
                inv[(i, j)] *= s;
            }
        }
        let aat_pinv = &inv * eig.eigenvectors.transpose();
        let at_pinv = a.transpose() * &aat_pinv; // n × r
        let x0 = &at_pinv * &b;
        let affine_gap = (&a * &x0 - &b).norm();
        let c_norm = c.norm();
        let b_norm = b.norm();

        let proj_affine = |v: &DVector<f64>| -> DVector<f64> {
            if r == 0 {
                return v.clone();
            }
            let av = &a * v;
            v - &at_pinv * av + &x0
        };

        let mut z = DVector::<f64>::zeros(n);
        let mut u = DVector::<f64>::zeros(n);
        let rho = settings.rho;
        let alpha = settings.alpha;
        let c_rho = &c / rho;

        let mut report = SolveReport {
            primal_value: 0.0,
            dual_value: 0.0,
            primal_residual: f64::INFINITY,
            dual_residual: f64::INFINITY,
            iterations: 0,
            status: SolveStatus::MaxIter,
            x: vec![0.0; n],
        };

        if affine_gap > 1e-8 * (1.0 + b_norm) {
            report.status = SolveStatus::InfeasibleSuspected;
            report.primal_residual = affine_gap;
            return report;
        }

        let mut iter = 0;
        loop {
            let x = proj_affine(&(&z - &u - &c_rho));
            let xh = &x * alpha + &z * (1.0 - alpha);
            let z_old = z.clone();
            let mut w = &xh + &u;
            self.project_cone(w.as_mut_slice());
            z = w;
            u += &xh - &z;
            iter += 1;

            let check = iter % settings.check_every.max(1) == 0 || iter >= settings.max_iter;
            if !check {
                continue;
            }
            let r_prim = (&x - &z).norm();
            let r_step = rho * (&z - &z_old).norm();
            let scale = 1.0 + x.norm().max(z.norm());
            let primal_ok = r_prim <= settings.tol * scale;
            let step_ok = r_step <= settings.tol * (1.0 + rho * u.norm());
            if (primal_ok && step_ok) || iter >= settings.max_iter {
                // dual slack s = Π_{K*}(−ρu), multipliers from least squares
                let mut s = &u * (-rho);
                self.project_dual_cone(s.as_mut_slice());
                let lam = &aat_pinv * (&a * (&c - &s));
                let dres = (&c - &s - a.transpose() * &lam).norm();
                let pval = c.dot(&z);
                let dval = b.dot(&lam);
                let gap = (pval - dval).abs();
                let aff = (&a * &z - &b).norm();
                report.primal_value = pval;
                report.dual_value = dval;
                report.primal_residual = aff.max(r_prim);
                report.dual_residual = dres;
                report.iterations = iter;
                let tol = settings.tol;
                let optimal = report.primal_residual <= tol * (1.0 + b_norm.max(z.norm()))
                    && dres <= tol * (1.0 + c_norm)
                    && gap <= tol * (1.0 + pval.abs());
                if optimal {
                    report.status = SolveStatus::Optimal;
                    break;
                }
                if iter >= settings.max_iter {
                    report.status = if report.primal_residual > 1e-3 * scale {
                        SolveStatus::InfeasibleSuspected
                    } else {
                        SolveStatus::MaxIter
                    };
                    break;
                }
            }
        }
        report.x = z.iter().copied().collect();
        report
    }
}
