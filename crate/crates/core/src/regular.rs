//! Two-sided bounds for the regular norm `‖u‖_r = sup_k ‖u ⊗ I_{M_k}‖` of a map
//! `u: S_p^n → S_p^m`, and decompositions into completely positive parts.

use crate::block::BlockMatrix;
use crate::conic::{ConicProgram, MatExpr, SolveStatus, SolverSettings};
use crate::cp::{is_cp, LinearMap};
use crate::error::{Error, Result};
use crate::haagerup::{self, Certificate, PairWeights};
use crate::linalg::{
    eigh, hermitian_part, identity, kron, op_norm, psd_projection, schatten_dual_maximizer,
    schatten_norm, trace, trace_inner, CMatrix, PExponent, C64, I, ONE,
};
use crate::par;
use crate::random::{random_matrix, substream};
use crate::vnorm::{self, DualWitness, LowerOptions, UpperOptions};

#[derive(Clone, Copy, Debug)]
pub struct RegularOptions {
    /// Highest amplification level for the lower bound.
    pub levels: usize,
    pub starts: usize,
    pub iterations: usize,
    pub seed: u64,
    /// Weighted refinement rounds for `1 < p < ∞`.
    pub rounds: usize,
    /// Also solve the four-part decomposition program.
    pub decomposition: bool,
}

impl Default for RegularOptions {
    fn default() -> Self {
        RegularOptions {
            levels: 3,
            starts: 4,
            iterations: 200,
            seed: 0,
            rounds: 4,
            decomposition: true,
        }
    }
}

/// `u = u₁ − u₂ + i(u₃ − u₄)` with completely positive `u_j`.
#[derive(Clone, Debug)]
pub struct Decomposition {
    pub parts: [LinearMap; 4],
    /// `Σ_j ‖u_j(I)‖^{1−θ} ‖u_j*(I)‖^θ`, an upper bound for `‖u‖_r`.
    pub value: f64,
    /// `Σ_j max(‖u_j(I)‖, ‖u_j*(I)‖)`.
    pub objective: f64,
    pub status: SolveStatus,
}

impl Decomposition {
    pub fn recombine(&self) -> LinearMap {
        let [u1, u2, u3, u4] = &self.parts;
        let c = u1.choi() - u2.choi() + (u3.choi() - u4.choi()) * I;
        LinearMap::from_choi(u1.in_dim(), u1.out_dim(), c).expect("same shapes")
    }
}

#[derive(Clone, Debug)]
pub enum UpperCertificate {
    /// Positive block certificate, optionally weighted.
    Factorization {
        p_block: CMatrix,
        q_block: CMatrix,
        weights: Option<PairWeights>,
    },
    /// `u` itself is completely positive.
    CompletelyPositive,
    /// `u(x) = Σ_t σ_t tr(x w_t) v_t`, bounded by `Σ_t σ_t ‖w_t‖_{p'} ‖v_t‖_p`.
    RankOneExpansion,
    Decomposition(Decomposition),
}

impl UpperCertificate {
    pub fn kind(&self) -> &'static str {
        match self {
            UpperCertificate::Factorization { weights: None, .. } => "block factorization",
            UpperCertificate::Factorization { .. } => "weighted block factorization",
            UpperCertificate::CompletelyPositive => "completely positive",
            UpperCertificate::RankOneExpansion => "rank-one expansion",
            UpperCertificate::Decomposition(_) => "four-part decomposition",
        }
    }
}

#[derive(Clone, Debug)]
pub struct UpperReport {
    pub upper: f64,
    pub certificate: UpperCertificate,
    /// Value of the four-part decomposition, when it was computed.
    pub decomposition_value: Option<f64>,
    pub status: SolveStatus,
}

#[derive(Clone, Debug)]
pub struct LowerReport {
    /// Monotone envelope of the per-level bounds, levels `1..=K`.
    pub levels: Vec<f64>,
    pub best: f64,
    pub best_level: usize,
    /// Input `x ∈ S_p^n[M_k]` achieving the best ratio.
    pub witness: BlockMatrix,
}

#[derive(Clone, Debug)]
pub struct RegularReport {
    pub p: PExponent,
    pub lower: LowerReport,
    pub upper: UpperReport,
}

fn from_certificate(c: Certificate) -> (f64, UpperCertificate, SolveStatus) {
    (
        c.value,
        UpperCertificate::Factorization {
            p_block: c.p_block,
            q_block: c.q_block,
            weights: c.weights,
        },
        c.status,
    )
}

/// Upper bound for `‖u‖_r`: the completely bounded norm at `p = ∞`, that of
/// the adjoint at `p = 1`, and the best available certificate in between.
pub fn regular_upper(u: &LinearMap, p: PExponent, opts: &RegularOptions) -> Result<UpperReport> {
    let theta = p.theta();
    let start = haagerup::solve_fixed(u, theta, None)?;
    let refined = haagerup::refine(u, p, start, opts.rounds)?;
    let (mut upper, mut certificate, status) = from_certificate(refined);
    if is_cp(u, 1e-10 * op_norm(u.choi())).is_cp {
        let c = haagerup::cp_certificate(u, theta);
        if c.value < upper {
            upper = c.value;
            certificate = UpperCertificate::CompletelyPositive;
        }
    }
    let nuclear = rank_one_bound(u, p);
    if nuclear < upper {
        upper = nuclear;
        certificate = UpperCertificate::RankOneExpansion;
    }
    let mut decomposition_value = None;
    // the block certificate is exact at the endpoints
    if opts.decomposition && !p.is_infinite() && !p.is_one() {
        if let Ok(d) = decompose_cp(u, p) {
            decomposition_value = Some(d.value);
            if d.value < upper {
                upper = d.value;
                certificate = UpperCertificate::Decomposition(d);
            }
        }
    }
    Ok(UpperReport {
        upper,
        certificate,
        decomposition_value,
        status,
    })
}

/// Sum of `σ_t ‖w_t‖_{p'} ‖v_t‖_p` over the singular value expansion of `u`
/// as a linear map `vec(x) ↦ vec(u(x))`; each rank-one term factors through
/// the scalars.
pub fn rank_one_bound(u: &LinearMap, p: PExponent) -> f64 {
    let (n, m) = (u.in_dim(), u.out_dim());
    let j = u.choi();
    let r = CMatrix::from_fn(m * m, n * n, |row, col| {
        let (k, l) = (row / m, row % m);
        let (i, jj) = (col / n, col % n);
        j[(i * m + k, jj * m + l)]
    });
    let d = crate::linalg::svd(&r);
    let pc = p.conjugate();
    d.s.iter()
        .enumerate()
        .filter(|(_, &s)| s > 0.0)
        .map(|(t, &s)| {
            let v = CMatrix::from_fn(m, m, |k, l| d.u[(k * m + l, t)]);
            let w = CMatrix::from_fn(n, n, |i, jj| d.v_adj[(t, i * n + jj)]);
            s * schatten_norm(&v, p) * schatten_norm(&w, pc)
        })
        .sum()
}

/// Jordan decomposition `h = h₊ − h₋` of a Hermitian matrix.
fn jordan(h: &CMatrix) -> (CMatrix, CMatrix) {
    let e = eigh(h);
    (
        e.map_values(|v| v.max(0.0)),
        e.map_values(|v| (-v).max(0.0)),
    )
}

fn interpolated(u: &LinearMap, theta: f64) -> f64 {
    let a = op_norm(&u.image_of_identity());
    let b = op_norm(&u.adjoint_image_of_identity());
    if theta == 0.0 {
        a
    } else if theta == 1.0 {
        b
    } else {
        a.powf(1.0 - theta) * b.powf(theta)
    }
}

/// Solves `min Σ_j max(‖u_j(I)‖, ‖u_j*(I)‖)` over completely positive parts with
/// `u = u₁ − u₂ + i(u₃ − u₄)`, with `Σ_j tr C_j` as a small tie-breaker, then
/// repairs the parts so that positivity and recombination hold exactly.
pub fn decompose_cp(u: &LinearMap, p: PExponent) -> Result<Decomposition> {
    let (n, m) = (u.in_dim(), u.out_dim());
    let nn = n * m;
    let j = u.choi();
    let scale = op_norm(j);
    let theta = p.theta();
    let zero = LinearMap::from_choi(n, m, CMatrix::zeros(nn, nn))?;
    if scale == 0.0 {
        return Ok(Decomposition {
            parts: [zero.clone(), zero.clone(), zero.clone(), zero],
            value: 0.0,
            objective: 0.0,
            status: SolveStatus::Optimal,
        });
    }
    let jn = j.scale(1.0 / scale);
    let herm = hermitian_part(&jn);
    let anti = (&jn - jn.adjoint()) * C64::new(0.0, -0.5);

    let mut prog = ConicProgram::new();
    let blocks: Vec<_> = (0..4).map(|_| prog.add_psd(nn)).collect();
    let exprs: Vec<MatExpr> = blocks.iter().map(|&b| prog.herm_expr(b)).collect();
    let mut objective = crate::conic::LinExpr::zero();
    for e in &exprs {
        let s = prog.add_free();
        let t = prog.add_free();
        let w = prog.add_free();
        let (se, te, we) = (prog.scalar(s), prog.scalar(t), prog.scalar(w));
        // φ(I) = Σ_i block(i, i) and φ†(I)_ab = tr block(b, a)
        let mut a_side = MatExpr::zeros(m, m);
        for i in 0..n {
            a_side.add_scaled(&e.view(i * m, i * m, m, m), ONE);
        }
        let mut b_side = MatExpr::zeros(n, n);
        for a in 0..n {
            for b in 0..n {
                b_side.set(a, b, e.view(b * m, a * m, m, m).trace());
            }
        }
        prog.add_loewner_le(&a_side, &MatExpr::scalar_identity(&se, m));
        prog.add_loewner_le(&b_side, &MatExpr::scalar_identity(&te, n));
        let g1 = prog.add_nonneg();
        let g2 = prog.add_nonneg();
        prog.add_eq(&(we.clone() - se - prog.scalar(g1)), 0.0);
        prog.add_eq(&(we.clone() - te - prog.scalar(g2)), 0.0);
        objective = objective + we + e.trace().re * 1e-6;
    }
    prog.add_objective(&objective);
    let mut d12 = exprs[0].clone();
    d12.add_scaled(&exprs[1], C64::new(-1.0, 0.0));
    prog.add_hermitian_eq(&d12, &herm);
    let mut d34 = exprs[2].clone();
    d34.add_scaled(&exprs[3], C64::new(-1.0, 0.0));
    prog.add_hermitian_eq(&d34, &anti);
    let rep = prog.solve(&SolverSettings::default());
    if rep.status == SolveStatus::InfeasibleSuspected {
        return Err(Error::Solver(rep.status));
    }

    let mut c: Vec<CMatrix> = blocks
        .iter()
        .map(|&b| psd_projection(&rep.herm(b)).scale(scale))
        .collect();
    let jh = hermitian_part(j);
    let ja = (j - j.adjoint()) * C64::new(0.0, -0.5);
    let (rp, rm) = jordan(&(&jh - (&c[0] - &c[1])));
    c[0] += rp;
    c[1] += rm;
    let (rp, rm) = jordan(&(&ja - (&c[2] - &c[3])));
    c[2] += rp;
    c[3] += rm;
    let parts: Vec<LinearMap> = c
        .into_iter()
        .map(|cj| LinearMap::from_choi(n, m, cj).expect("same shape"))
        .collect();
    let value = parts.iter().map(|uj| interpolated(uj, theta)).sum();
    let objective = parts
        .iter()
        .map(|uj| op_norm(&uj.image_of_identity()).max(op_norm(&uj.adjoint_image_of_identity())))
        .sum();
    let parts: [LinearMap; 4] = parts.try_into().expect("four parts");
    Ok(Decomposition {
        parts,
        value,
        objective,
        status: rep.status,
    })
}

/// Zero-pads every `k × k` block of an element of `M_n(M_k)` to size `k + 1`.
fn pad_blocks(x: &CMatrix, n: usize, k: usize) -> CMatrix {
    let k1 = k + 1;
    let mut out = CMatrix::zeros(n * k1, n * k1);
    for i in 0..n {
        for j in 0..n {
            out.view_mut((i * k1, j * k1), (k, k))
                .copy_from(&x.view((i * k, j * k), (k, k)));
        }
    }
    out
}

/// Pads a contraction `ℂ^m → ℂ^k ⊗ ℂ^r` to `ℂ^m → ℂ^{k+1} ⊗ ℂ^{r+1}`.
fn pad_contraction(u: &CMatrix, k: usize, r: usize, m: usize) -> CMatrix {
    let (k1, r1) = (k + 1, r + 1);
    let mut out = CMatrix::zeros(k1 * r1, m);
    for kk in 0..k {
        for rho in 0..r {
            for s in 0..m {
                out[(kk * r1 + rho, s)] = u[(kk * r + rho, s)];
            }
        }
    }
    out
}

#[derive(Clone, Debug)]
struct LevelState {
    a: CMatrix,
    b: CMatrix,
    y: CMatrix,
    dual: DualWitness,
}

impl LevelState {
    fn pad(&self, n: usize, m: usize, k: usize) -> LevelState {
        LevelState {
            a: self.a.clone(),
            b: self.b.clone(),
            y: pad_blocks(&self.y, n, k),
            dual: DualWitness {
                alpha: self.dual.alpha.clone(),
                beta: self.dual.beta.clone(),
                u: pad_contraction(&self.dual.u, k, k, m),
                v: pad_contraction(&self.dual.v, k, k, m),
            },
        }
    }

    fn input(&self, k: usize) -> CMatrix {
        let ik = identity(k);
        kron(&self.a, &ik) * &self.y * kron(&self.b, &ik)
    }
}

/// Certified ratio `|tr(L(x) Ŵ)| / (‖x‖-factorization · witness norms)`.
fn level_value(lk: &LinearMap, st: &LevelState, m: usize, k: usize, p: PExponent) -> f64 {
    let q_in = p.scaled(2.0);
    let q_out = p.conjugate().scaled(2.0);
    let x = st.input(k);
    let z = lk.apply(&x);
    let t = trace(&(&z * st.dual.w_hat(m, k, k)));
    let den = schatten_norm(&st.a, q_in)
        * schatten_norm(&st.b, q_in)
        * op_norm(&st.y)
        * st.dual.denominator(q_out);
    if den > 0.0 && den.is_finite() {
        t.norm() / den
    } else {
        0.0
    }
}

fn ascend_level(
    lk: &LinearMap,
    n: usize,
    m: usize,
    k: usize,
    p: PExponent,
    mut st: LevelState,
    iterations: usize,
) -> (f64, LevelState) {
    let q_in = p.scaled(2.0);
    let q_out = p.conjugate().scaled(2.0);
    let ik = identity(k);
    let mut best = (level_value(lk, &st, m, k, p), st.clone());
    for _ in 0..iterations {
        let z = lk.apply(&st.input(k));
        st.dual.sweep(&z, m, k, k, q_out);
        let y_dual = lk.apply_transpose(&st.dual.w_hat(m, k, k));
        st.a = schatten_dual_maximizer(
            &trace_inner(&(&st.y * kron(&st.b, &ik) * &y_dual), n, k),
            q_in,
        );
        st.b = schatten_dual_maximizer(
            &trace_inner(&(&y_dual * kron(&st.a, &ik) * &st.y), n, k),
            q_in,
        );
        st.y = schatten_dual_maximizer(
            &(kron(&st.b, &ik) * &y_dual * kron(&st.a, &ik)),
            PExponent::INFINITY,
        );
        let v = level_value(lk, &st, m, k, p);
        let done = v <= best.0 * (1.0 + 1e-12);
        if v > best.0 {
            best = (v, st.clone());
        }
        if done {
            break;
        }
    }
    best
}

fn random_state(seed: u64, index: u64, n: usize, m: usize, k: usize) -> LevelState {
    let mut rng = substream(seed, index);
    LevelState {
        a: random_matrix(&mut rng, n, n),
        b: random_matrix(&mut rng, n, n),
        y: random_matrix(&mut rng, n * k, n * k),
        dual: DualWitness {
            alpha: random_matrix(&mut rng, m, m),
            beta: random_matrix(&mut rng, m, m),
            u: random_matrix(&mut rng, k * k, m),
            v: random_matrix(&mut rng, k * k, m),
        },
    }
}

/// Lower bounds for `‖u ⊗ I_{M_k}‖` on `S_p^n[M_k]`, `k = 1..=levels`.
pub fn regular_lower(u: &LinearMap, p: PExponent, opts: &RegularOptions) -> LowerReport {
    let (n, m) = (u.in_dim(), u.out_dim());
    let scale = op_norm(u.choi());
    let levels = opts.levels.max(1);
    if scale == 0.0 {
        return LowerReport {
            levels: vec![0.0; levels],
            best: 0.0,
            best_level: 1,
            witness: BlockMatrix::new(n, 1, identity(n)).expect("square"),
        };
    }
    let un = u.scale(C64::from(1.0 / scale));
    let mut envelope: Vec<f64> = Vec::with_capacity(levels);
    let mut carried: Option<LevelState> = None;
    let mut best: (f64, usize, CMatrix) = (0.0, 1, identity(n));
    for k in 1..=levels {
        let lk = un.tensor_identity(k);
        let mut starts: Vec<LevelState> = (0..opts.starts.max(1))
            .map(|s| random_state(opts.seed, (k * 1000 + s) as u64, n, m, k))
            .collect();
        if let Some(prev) = &carried {
            starts[0] = prev.pad(n, m, k - 1);
        }
        let results = par::map(&starts, |st| {
            ascend_level(&lk, n, m, k, p, st.clone(), opts.iterations)
        });
        let (v, st) = results
            .into_iter()
            .fold(None::<(f64, LevelState)>, |acc, r| match acc {
                Some(a) if a.0 >= r.0 => Some(a),
                _ => Some(r),
            })
            .expect("at least one start");
        let prev = envelope.last().copied().unwrap_or(0.0);
        if v * scale > best.0 {
            best = (v * scale, k, st.input(k));
        }
        envelope.push(prev.max(v * scale));
        carried = Some(st);
    }
    // the literal ratio of certified vector norm bounds for the best input
    let (bv, bk, bx) = best;
    let xb = BlockMatrix::new(n, bk, bx.clone()).expect("dimensions match");
    let zb = BlockMatrix::new(m, bk, u.tensor_identity(bk).apply(&bx)).expect("dimensions match");
    let num = vnorm::vnorm_lower_with(&zb, p, &LowerOptions::default()).0;
    let (den, _) = vnorm::vnorm_upper(&xb, p, &UpperOptions::default());
    let direct = if den > 0.0 { num / den } else { 0.0 };
    let mut best_value = bv;
    if direct > best_value {
        best_value = direct;
        for e in envelope.iter_mut().skip(bk - 1) {
            *e = e.max(direct);
        }
    }
    LowerReport {
        levels: envelope,
        best: best_value,
        best_level: bk,
        witness: xb,
    }
}

pub fn regular_bracket(
    u: &LinearMap,
    p: PExponent,
    opts: &RegularOptions,
) -> Result<RegularReport> {
    Ok(RegularReport {
        p,
        lower: regular_lower(u, p, opts),
        upper: regular_upper(u, p, opts)?,
    })
}
