//! Seeded instance generators. Every stochastic routine in the crate draws from
//! a `ChaCha8Rng` derived from an explicit seed, so results never depend on
//! wall-clock state or thread scheduling.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::block::BlockMatrix;
use crate::cp::LinearMap;
use crate::linalg::{cx, CMatrix, C64};

pub type Rng = ChaCha8Rng;

pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent generator for task `index` of a batch seeded by `seed`.
pub fn substream(seed: u64, index: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index.wrapping_add(1));
    rng
}

/// Standard complex Gaussian, `E|z|² = 1`.
pub fn complex_normal(rng: &mut Rng) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    cx(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn random_matrix(rng: &mut Rng, rows: usize, cols: usize) -> CMatrix {
    let mut m = CMatrix::zeros(rows, cols);
    // fill row-major so the stream order does not depend on storage layout
    for i in 0..rows {
        for j in 0..cols {
            m[(i, j)] = complex_normal(rng);
        }
    }
    m
}

pub fn random_hermitian(rng: &mut Rng, n: usize) -> CMatrix {
    let g = random_matrix(rng, n, n);
    (&g + g.adjoint()).scale(0.5)
}

/// `G G* + eps·I` with `G` Gaussian.
pub fn random_positive_definite(rng: &mut Rng, n: usize, eps: f64) -> CMatrix {
    let g = random_matrix(rng, n, n);
    &g * g.adjoint() + CMatrix::identity(n, n).scale(eps)
}

/// Haar-distributed unitary from the QR factorization of a Gaussian matrix.
pub fn random_unitary(rng: &mut Rng, n: usize) -> CMatrix {
    let g = random_matrix(rng, n, n);
    let qr = g.qr();
    let q = qr.q();
    let r = qr.r();
    let mut u = q;
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 {
            d / d.norm()
        } else {
            cx(1.0, 0.0)
        };
        for i in 0..n {
            u[(i, j)] *= phase;
        }
    }
    u
}

/// Map `M_n → M_m` with an i.i.d. complex Gaussian Choi matrix.
pub fn random_map(rng: &mut Rng, n: usize, m: usize) -> LinearMap {
    LinearMap::from_choi(n, m, random_matrix(rng, n * m, n * m)).expect("dimensions match")
}

/// Completely positive map with Choi matrix `W W*`, `W` Gaussian of size
/// `nm × rank`.
pub fn random_cp_map(rng: &mut Rng, n: usize, m: usize, rank: usize) -> LinearMap {
    let w = random_matrix(rng, n * m, rank);
    LinearMap::from_choi(n, m, &w * w.adjoint()).expect("dimensions match")
}

pub fn random_block(rng: &mut Rng, outer: usize, inner: usize) -> BlockMatrix {
    BlockMatrix::new(
        outer,
        inner,
        random_matrix(rng, outer * inner, outer * inner),
    )
    .expect("dimensions match")
}

/// Real Gaussian matrix, used for lattice instances.
pub fn random_real(rng: &mut Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            m[(i, j)] = StandardNormal.sample(rng);
        }
    }
    m
}
