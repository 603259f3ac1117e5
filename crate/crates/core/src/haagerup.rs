//! Factorization certificates `[[P, J], [J*, Q]] ⪰ 0` for a Choi matrix `J`.
//!
//! For weights `H` (output side) and `K` (input side) write
//!
//! ```text
//! Ψ_θ(X; H, K) = ‖H^{-θ} φ_X(K^{-2θ}) H^{-θ}‖^{1−θ} · ‖K^{1−θ} φ_X†(H^{2−2θ}) K^{1−θ}‖^θ
//! ```
//!
//! where `φ_X(W) = Σ_ij W_ij X_block(i, j)` is the map with Choi matrix `X` and
//! `φ_X†` its Hilbert–Schmidt adjoint. Every positive block certificate gives
//! `‖u‖_r ≤ √(Ψ_θ(P)·Ψ_θ(Q))` for `θ = 1/p`; with identity weights and `θ = 0`
//! this is the usual completely bounded norm program.

use crate::conic::{CExpr, ConicProgram, LinExpr, MatExpr, SolveStatus, SolverSettings};
use crate::cp::LinearMap;
use crate::error::{Error, Result};
use crate::linalg::{
    eigh, hermitian_part, identity, min_eigenvalue, op_norm, psd_power, schatten_norm, CMatrix,
    PExponent, C64, ONE, ZERO,
};

/// Weights `(H, K)` for one diagonal block of a certificate.
#[derive(Clone, Debug)]
pub struct Weights {
    pub h: CMatrix,
    pub k: CMatrix,
}

impl Weights {
    pub fn identity(n: usize, m: usize) -> Self {
        Weights {
            h: identity(m),
            k: identity(n),
        }
    }
}

#[derive(Clone, Debug)]
pub struct PairWeights {
    pub p: Weights,
    pub q: Weights,
}

/// What the off-diagonal block of the certificate is allowed to be.
pub enum ChoiSpec<'a> {
    Fixed(&'a CMatrix),
    /// `Σ_ij s_ij J_block(i, j) = v` for every pair `(s, v)`.
    Affine(&'a [(CMatrix, CMatrix)]),
    /// `J` free; maximize `Re Σ a_rc J_rc` subject to the certificate objective
    /// being at most one.
    Dual(&'a CMatrix),
}

#[derive(Clone, Debug)]
pub struct Certificate {
    pub value: f64,
    pub status: SolveStatus,
    pub p_block: CMatrix,
    pub q_block: CMatrix,
    pub weights: Option<PairWeights>,
}

#[derive(Clone, Debug)]
pub struct RawSolution {
    pub p_block: CMatrix,
    pub q_block: CMatrix,
    pub choi: CMatrix,
    pub status: SolveStatus,
}

/// `φ_X(W) = Σ_ij W_ij X_block(i, j)`.
pub fn phi(x: &CMatrix, n: usize, m: usize, w: &CMatrix) -> CMatrix {
    let mut out = CMatrix::zeros(m, m);
    for i in 0..n {
        for j in 0..n {
            let c = w[(i, j)];
            if c != ZERO {
                out += x.view((i * m, j * m), (m, m)) * c;
            }
        }
    }
    out
}

/// `φ_X†(Y)_ij = Σ_ab conj(X[(i,a),(j,b)]) Y_ab`.
pub fn phi_adjoint(x: &CMatrix, n: usize, m: usize, y: &CMatrix) -> CMatrix {
    CMatrix::from_fn(n, n, |i, j| {
        let mut s = ZERO;
        for a in 0..m {
            for b in 0..m {
                s += x[(i * m + a, j * m + b)].conj() * y[(a, b)];
            }
        }
        s
    })
}

fn weight_powers(theta: f64, w: &Weights) -> (CMatrix, CMatrix, CMatrix, CMatrix) {
    (
        psd_power(&w.h, -theta),
        psd_power(&w.k, -2.0 * theta),
        psd_power(&w.k, 1.0 - theta),
        psd_power(&w.h, 2.0 - 2.0 * theta),
    )
}

/// The two operator norms entering `Ψ_θ`.
pub fn psi_parts(x: &CMatrix, n: usize, m: usize, theta: f64, w: Option<&Weights>) -> (f64, f64) {
    match w {
        None => (
            op_norm(&phi(x, n, m, &identity(n))),
            op_norm(&phi_adjoint(x, n, m, &identity(m))),
        ),
        Some(w) => {
            let (hm, km, kp, hp) = weight_powers(theta, w);
            let a = &hm * phi(x, n, m, &km) * &hm;
            let b = &kp * phi_adjoint(x, n, m, &hp) * &kp;
            (op_norm(&a), op_norm(&b))
        }
    }
}

pub fn psi(x: &CMatrix, n: usize, m: usize, theta: f64, w: Option<&Weights>) -> f64 {
    let (a, b) = psi_parts(x, n, m, theta, w);
    combine(a, b, theta)
}

fn combine(a: f64, b: f64, theta: f64) -> f64 {
    if theta == 0.0 {
        a
    } else if theta == 1.0 {
        b
    } else {
        a.powf(1.0 - theta) * b.powf(theta)
    }
}

pub fn certificate_value(
    p_block: &CMatrix,
    q_block: &CMatrix,
    n: usize,
    m: usize,
    theta: f64,
    w: Option<&PairWeights>,
) -> f64 {
    let vp = psi(p_block, n, m, theta, w.map(|w| &w.p));
    let vq = psi(q_block, n, m, theta, w.map(|w| &w.q));
    (vp * vq).sqrt()
}

/// Makes `[[P, J], [J*, Q]]` positive semidefinite by shifting both diagonal
/// blocks by the most negative eigenvalue.
pub fn repair(p_block: &CMatrix, q_block: &CMatrix, j: &CMatrix) -> (CMatrix, CMatrix) {
    let nn = j.nrows();
    let mut p = hermitian_part(p_block);
    let mut q = hermitian_part(q_block);
    let mut big = CMatrix::zeros(2 * nn, 2 * nn);
    big.view_mut((0, 0), (nn, nn)).copy_from(&p);
    big.view_mut((nn, nn), (nn, nn)).copy_from(&q);
    big.view_mut((0, nn), (nn, nn)).copy_from(j);
    big.view_mut((nn, 0), (nn, nn)).copy_from(&j.adjoint());
    let lmin = min_eigenvalue(&big);
    let scale = op_norm(&big).max(f64::MIN_POSITIVE);
    // a little headroom covers the rounding error of the eigensolver itself
    let delta = (-lmin).max(0.0) + 1e-13 * scale;
    for i in 0..nn {
        p[(i, i)] += C64::from(delta);
        q[(i, i)] += C64::from(delta);
    }
    (p, q)
}

/// Weights from the fixed point `X ∝ (φ†(φ(X)^{p−1}))^{1/(p−1)}`, which aligns
/// the two factors of `Ψ_θ` for `1 < p < ∞`.
pub fn power_weights(x: &CMatrix, n: usize, m: usize, p: PExponent, iters: usize) -> Weights {
    debug_assert!(!p.is_infinite() && !p.is_one());
    let pv = p.value();
    let theta = p.theta();
    let mut w = identity(n).scale(1.0 / schatten_norm(&identity(n), p));
    for _ in 0..iters {
        let y = hermitian_part(&phi(x, n, m, &w));
        let z = hermitian_part(&phi_adjoint(x, n, m, &psd_power(&y, pv - 1.0)));
        let next = psd_power(&z, 1.0 / (pv - 1.0));
        let nrm = schatten_norm(&next, p);
        if !nrm.is_finite() || nrm == 0.0 {
            break;
        }
        let next = next.scale(1.0 / nrm);
        let diff = (&next - &w).norm();
        w = next;
        if diff < 1e-12 {
            break;
        }
    }
    let y = hermitian_part(&phi(x, n, m, &w));
    let k = clamp_condition(&psd_power(&w, -1.0 / (2.0 * theta)));
    let h = clamp_condition(&psd_power(&y, 1.0 / (2.0 * theta)));
    Weights { h, k }
}

/// Rescales to unit operator norm and lifts eigenvalues below `1e-6`.
fn clamp_condition(a: &CMatrix) -> CMatrix {
    let eig = eigh(a);
    let top = eig.max().max(f64::MIN_POSITIVE);
    eig.map_values(|v| (v / top).max(1e-6))
}

fn block_constraints(
    prog: &mut ConicProgram,
    x: &MatExpr,
    n: usize,
    m: usize,
    theta: f64,
    w: Option<&Weights>,
) -> (LinExpr, LinExpr) {
    let mut s_expr = LinExpr::zero();
    let mut t_expr = LinExpr::zero();
    let powers = w.map(|w| weight_powers(theta, w));
    if theta < 1.0 {
        let s = prog.add_free();
        s_expr = prog.scalar(s);
        let mut a = MatExpr::zeros(m, m);
        let km = powers.as_ref().map(|p| &p.1);
        for i in 0..n {
            for j in 0..n {
                let c = match km {
                    Some(km) => km[(i, j)],
                    None if i == j => ONE,
                    None => ZERO,
                };
                if c != ZERO {
                    a.add_scaled(&x.view(i * m, j * m, m, m), c);
                }
            }
        }
        if let Some(pw) = &powers {
            a = a.lmul(&pw.0).rmul(&pw.0);
        }
        prog.add_loewner_le(&a, &MatExpr::scalar_identity(&s_expr, m));
    }
    if theta > 0.0 {
        let t = prog.add_free();
        t_expr = prog.scalar(t);
        let hp = powers
            .as_ref()
            .map(|p| p.3.clone())
            .unwrap_or_else(|| identity(m));
        // φ_X†(Y)_ij = Σ_ab Y_ab X[(j,b),(i,a)] for Hermitian X
        let mut b = MatExpr::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let mut e = CExpr::default();
                for a_ in 0..m {
                    for b_ in 0..m {
                        let c = hp[(a_, b_)];
                        if c != ZERO {
                            e.add_scaled(x.get(j * m + b_, i * m + a_), c);
                        }
                    }
                }
                b.set(i, j, e);
            }
        }
        if let Some(pw) = &powers {
            b = b.lmul(&pw.2).rmul(&pw.2);
        }
        prog.add_loewner_le(&b, &MatExpr::scalar_identity(&t_expr, n));
    }
    (s_expr, t_expr)
}

/// Solves the (weighted) certificate program without repairing the result.
pub fn solve_raw(
    n: usize,
    m: usize,
    theta: f64,
    weights: Option<&PairWeights>,
    spec: ChoiSpec<'_>,
    settings: &SolverSettings,
) -> Result<RawSolution> {
    let nn = n * m;
    let mut prog = ConicProgram::new();
    let z = prog.add_psd(2 * nn);
    let ze = prog.herm_expr(z);
    let pe = ze.view(0, 0, nn, nn);
    let qe = ze.view(nn, nn, nn, nn);
    let je = ze.view(0, nn, nn, nn);
    let (sp, tp) = block_constraints(&mut prog, &pe, n, m, theta, weights.map(|w| &w.p));
    let (sq, tq) = block_constraints(&mut prog, &qe, n, m, theta, weights.map(|w| &w.q));
    let objective = (sp + sq) * (0.5 * (1.0 - theta)) + (tp + tq) * (0.5 * theta);
    match spec {
        ChoiSpec::Fixed(j) => {
            prog.add_matrix_eq(&je, j);
            prog.add_objective(&objective);
        }
        ChoiSpec::Affine(pairs) => {
            for (s, v) in pairs {
                let mut lhs = MatExpr::zeros(m, m);
                for i in 0..n {
                    for j in 0..n {
                        let c = s[(i, j)];
                        if c != ZERO {
                            lhs.add_scaled(&je.view(i * m, j * m, m, m), c);
                        }
                    }
                }
                prog.add_matrix_eq(&lhs, v);
            }
            prog.add_objective(&objective);
        }
        ChoiSpec::Dual(a) => {
            let slack = prog.add_nonneg();
            let budget = objective + prog.scalar(slack);
            prog.add_eq(&budget, 1.0);
            let mut gain = CExpr::default();
            for r in 0..nn {
                for c in 0..nn {
                    gain.add_scaled(je.get(r, c), a[(r, c)]);
                }
            }
            prog.add_objective(&(-gain.re));
        }
    }
    let rep = prog.solve(settings);
    if rep.status == SolveStatus::InfeasibleSuspected {
        return Err(Error::Solver(rep.status));
    }
    let zv = rep.herm(z);
    Ok(RawSolution {
        p_block: zv.view((0, 0), (nn, nn)).into_owned(),
        q_block: zv.view((nn, nn), (nn, nn)).into_owned(),
        choi: zv.view((0, nn), (nn, nn)).into_owned(),
        status: rep.status,
    })
}

/// Repairs a raw solution against the exact `j` and evaluates it.
pub fn finish(
    raw_p: &CMatrix,
    raw_q: &CMatrix,
    j: &CMatrix,
    n: usize,
    m: usize,
    theta: f64,
    weights: Option<&PairWeights>,
    status: SolveStatus,
) -> Certificate {
    let (p, q) = repair(raw_p, raw_q, j);
    let value = certificate_value(&p, &q, n, m, theta, weights);
    Certificate {
        value,
        status,
        p_block: p,
        q_block: q,
        weights: weights.cloned(),
    }
}

/// Certificate for the fixed map `u`, computed on the normalized Choi matrix
/// and rescaled.
pub fn solve_fixed(
    u: &LinearMap,
    theta: f64,
    weights: Option<&PairWeights>,
) -> Result<Certificate> {
    let (n, m) = (u.in_dim(), u.out_dim());
    let j = u.choi();
    let scale = op_norm(j);
    if scale == 0.0 {
        let z = CMatrix::zeros(n * m, n * m);
        return Ok(Certificate {
            value: 0.0,
            status: SolveStatus::Optimal,
            p_block: z.clone(),
            q_block: z,
            weights: weights.cloned(),
        });
    }
    let jn = j.scale(1.0 / scale);
    let raw = solve_raw(
        n,
        m,
        theta,
        weights,
        ChoiSpec::Fixed(&jn),
        &SolverSettings::default(),
    )?;
    let p = raw.p_block.scale(scale);
    let q = raw.q_block.scale(scale);
    Ok(finish(&p, &q, j, n, m, theta, weights, raw.status))
}

/// Trivial certificate `P = Q = J` for completely positive `u`.
pub fn cp_certificate(u: &LinearMap, theta: f64) -> Certificate {
    let (n, m) = (u.in_dim(), u.out_dim());
    finish(
        u.choi(),
        u.choi(),
        u.choi(),
        n,
        m,
        theta,
        None,
        SolveStatus::Optimal,
    )
}

/// Alternates weight updates and weighted solves, keeping the best bound.
pub fn refine(
    u: &LinearMap,
    p: PExponent,
    start: Certificate,
    rounds: usize,
) -> Result<Certificate> {
    let (n, m) = (u.in_dim(), u.out_dim());
    let theta = p.theta();
    let mut best = start.clone();
    if p.is_infinite() || p.is_one() || best.value == 0.0 {
        return Ok(best);
    }
    let mut cur = start;
    for _ in 0..rounds {
        let w = PairWeights {
            p: power_weights(&cur.p_block, n, m, p, 200),
            q: power_weights(&cur.q_block, n, m, p, 200),
        };
        let v = certificate_value(&cur.p_block, &cur.q_block, n, m, theta, Some(&w));
        if v < best.value {
            best = Certificate {
                value: v,
                weights: Some(w.clone()),
                ..cur.clone()
            };
        }
        // a weighted program that fails to converge ends the refinement
        let Ok(next) = solve_fixed(u, theta, Some(&w)) else {
            break;
        };
        let improved = next.value < best.value * (1.0 - 1e-6);
        if next.value < best.value {
            best = next.clone();
        }
        cur = next;
        if !improved && v >= best.value * (1.0 - 1e-6) {
            break;
        }
    }
    Ok(best)
}
