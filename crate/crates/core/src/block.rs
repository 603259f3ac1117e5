//! Elements of `M_n ⊗ M_m` with an explicit record of which tensor factor is
//! the slow index of the stored body.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{kron, CMatrix, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FactorOrder {
    /// Body row `(i, k)` at `i * inner + k`.
    OuterInner,
    /// Body row `(k, i)` at `k * outer + i`.
    InnerOuter,
}

impl FactorOrder {
    fn toggled(self) -> Self {
        match self {
            FactorOrder::OuterInner => FactorOrder::InnerOuter,
            FactorOrder::InnerOuter => FactorOrder::OuterInner,
        }
    }
}

/// An element of `M_n(M_m) = M_n ⊗ M_m`: `n = outer_dim` indexes the matrix
/// of blocks, `m = inner_dim` the blocks themselves.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockMatrix {
    outer_dim: usize,
    inner_dim: usize,
    body: CMatrix,
    order: FactorOrder,
}

/// Permutation matrix sending `e_i ⊗ e_k` to `e_k ⊗ e_i` for `i < a`, `k < b`.
fn swap_index(a: usize, b: usize, row: usize) -> usize {
    let (i, k) = (row / b, row % b);
    k * a + i
}

fn permute(body: &CMatrix, a: usize, b: usize) -> CMatrix {
    let d = a * b;
    let mut out = CMatrix::zeros(d, d);
    for r in 0..d {
        let pr = swap_index(a, b, r);
        for c in 0..d {
            out[(pr, swap_index(a, b, c))] = body[(r, c)];
        }
    }
    out
}

impl BlockMatrix {
    pub fn new(outer_dim: usize, inner_dim: usize, body: CMatrix) -> Result<Self> {
        Self::with_order(outer_dim, inner_dim, body, FactorOrder::OuterInner)
    }

    pub fn with_order(
        outer_dim: usize,
        inner_dim: usize,
        body: CMatrix,
        order: FactorOrder,
    ) -> Result<Self> {
        let d = outer_dim * inner_dim;
        if outer_dim == 0 || inner_dim == 0 || body.nrows() != d || body.ncols() != d {
            return Err(Error::dim(format!(
                "block matrix {}x{} with outer_dim {outer_dim} and inner_dim {inner_dim}",
                body.nrows(),
                body.ncols()
            )));
        }
        Ok(BlockMatrix {
            outer_dim,
            inner_dim,
            body,
            order,
        })
    }

    /// The elementary tensor `a ⊗ e` with `a ∈ M_n`, `e ∈ M_m`.
    pub fn from_kron(a: &CMatrix, e: &CMatrix) -> Result<Self> {
        if !a.is_square() || !e.is_square() {
            return Err(Error::dim("elementary tensor factors must be square"));
        }
        Self::new(a.nrows(), e.nrows(), kron(a, e))
    }

    pub fn outer_dim(&self) -> usize {
        self.outer_dim
    }

    pub fn inner_dim(&self) -> usize {
        self.inner_dim
    }

    pub fn order(&self) -> FactorOrder {
        self.order
    }

    /// The stored body in its current factor order.
    pub fn body(&self) -> &CMatrix {
        &self.body
    }

    pub fn into_body(self) -> CMatrix {
        self.body
    }

    /// Body in the `OuterInner` layout.
    pub fn canonical_body(&self) -> CMatrix {
        match self.order {
            FactorOrder::OuterInner => self.body.clone(),
            FactorOrder::InnerOuter => permute(&self.body, self.inner_dim, self.outer_dim),
        }
    }

    pub fn canonical(&self) -> BlockMatrix {
        BlockMatrix {
            outer_dim: self.outer_dim,
            inner_dim: self.inner_dim,
            body: self.canonical_body(),
            order: FactorOrder::OuterInner,
        }
    }

    /// Block `(i, j)` as an `m × m` matrix.
    pub fn block(&self, i: usize, j: usize) -> CMatrix {
        let m = self.inner_dim;
        let n = self.outer_dim;
        match self.order {
            FactorOrder::OuterInner => self.body.view((i * m, j * m), (m, m)).into_owned(),
            FactorOrder::InnerOuter => {
                CMatrix::from_fn(m, m, |k, l| self.body[(k * n + i, l * n + j)])
            }
        }
    }

    /// Re-stores the same element with the other factor order. Involutive.
    pub fn flip_factors(&self) -> BlockMatrix {
        let (a, b) = match self.order {
            FactorOrder::OuterInner => (self.outer_dim, self.inner_dim),
            FactorOrder::InnerOuter => (self.inner_dim, self.outer_dim),
        };
        BlockMatrix {
            outer_dim: self.outer_dim,
            inner_dim: self.inner_dim,
            body: permute(&self.body, a, b),
            order: self.order.toggled(),
        }
    }

    /// Reads the stored element as a member of `M_m(M_n)`: the tensor factors
    /// exchange roles, so `a ⊗ e` becomes `e ⊗ a`. No entries move.
    pub fn swap_roles(&self) -> BlockMatrix {
        BlockMatrix {
            outer_dim: self.inner_dim,
            inner_dim: self.outer_dim,
            body: self.body.clone(),
            order: self.order.toggled(),
        }
    }

    pub fn scale(&self, s: C64) -> BlockMatrix {
        BlockMatrix {
            body: &self.body * s,
            ..self.clone()
        }
    }

    /// Sum of two elements with equal dimensions, in the layout of `self`.
    pub fn add(&self, other: &BlockMatrix) -> Result<BlockMatrix> {
        if self.outer_dim != other.outer_dim || self.inner_dim != other.inner_dim {
            return Err(Error::dim("adding block matrices of different shapes"));
        }
        let rhs = if other.order == self.order {
            other.body.clone()
        } else {
            other.flip_factors().body
        };
        Ok(BlockMatrix {
            body: &self.body + rhs,
            ..self.clone()
        })
    }
}

/// `Σ_ij ⟨e_i, z_ij e_j⟩` for `z ∈ M_n(M_n)`.
pub fn trace_pair(z: &BlockMatrix) -> Result<C64> {
    let n = z.outer_dim();
    if n != z.inner_dim() {
        return Err(Error::dim(format!(
            "trace pairing needs equal factors, got {n} and {}",
            z.inner_dim()
        )));
    }
    // the diagonal index (i, i) is the same row in both layouts
    let b = z.body();
    let mut s = C64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            s += b[(i * n + i, j * n + j)];
        }
    }
    Ok(s)
}

/// For `x ∈ M_{h·k}(M_m)` with outer index `(i, j)`, `i < h`, `j < k`, returns
/// the element of `M_{k·h}(M_m)` with outer index `(j, i)`. Applying it again
/// with `(k, h)` restores `x`.
pub fn fubini_reshuffle(x: &BlockMatrix, h: usize, k: usize) -> Result<BlockMatrix> {
    if h * k != x.outer_dim() {
        return Err(Error::dim(format!(
            "outer dimension {} does not factor as {h} x {k}",
            x.outer_dim()
        )));
    }
    let m = x.inner_dim();
    let body = x.canonical_body();
    let idx = |r: usize| {
        let (outer, e) = (r / m, r % m);
        swap_index(h, k, outer) * m + e
    };
    let d = h * k * m;
    let mut out = CMatrix::zeros(d, d);
    for r in 0..d {
        let pr = idx(r);
        for c in 0..d {
            out[(pr, idx(c))] = body[(r, c)];
        }
    }
    BlockMatrix::new(h * k, m, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{identity, schatten_norm, trace, unit, PExponent};
    use crate::random::{random_block, random_matrix, seeded};

    #[test]
    fn flip_is_involutive_and_preserves_blocks() {
        let mut rng = seeded(1);
        let x = random_block(&mut rng, 2, 3);
        let f = x.flip_factors();
        assert_eq!(f.flip_factors(), x);
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(f.block(i, j), x.block(i, j));
            }
        }
        assert_eq!(f.canonical_body(), x.canonical_body());
    }

    #[test]
    fn flip_of_elementary_tensor() {
        let mut rng = seeded(2);
        let a = random_matrix(&mut rng, 2, 2);
        let b = random_matrix(&mut rng, 3, 3);
        let x = BlockMatrix::from_kron(&a, &b).unwrap();
        assert_eq!(x.flip_factors().body(), &kron(&b, &a));
        let s = x.swap_roles().canonical_body();
        assert!((s - kron(&b, &a)).norm() < 1e-15);
    }

    #[test]
    fn flip_preserves_schatten_norms() {
        let mut rng = seeded(3);
        let x = random_block(&mut rng, 2, 3);
        for p in [PExponent::ONE, PExponent::TWO, PExponent::INFINITY] {
            let a = schatten_norm(x.body(), p);
            let b = schatten_norm(x.flip_factors().body(), p);
            assert!((a - b).abs() < 1e-10 * a);
        }
    }

    #[test]
    fn trace_pair_of_elementary_tensor() {
        let mut rng = seeded(4);
        let a = random_matrix(&mut rng, 3, 3);
        let b = random_matrix(&mut rng, 3, 3);
        let z = BlockMatrix::from_kron(&a, &b).unwrap();
        let expect = trace(&(a.transpose() * &b));
        assert!((trace_pair(&z).unwrap() - expect).norm() < 1e-12);
        let e = BlockMatrix::from_kron(&unit(2, 0, 0), &unit(2, 0, 0)).unwrap();
        assert_eq!(trace_pair(&e).unwrap(), C64::new(1.0, 0.0));
        assert_eq!(
            trace_pair(&z.flip_factors()).unwrap(),
            trace_pair(&z).unwrap()
        );
    }

    #[test]
    fn trace_pair_matches_basis_sum() {
        let mut rng = seeded(5);
        let z = random_block(&mut rng, 2, 2);
        let mut s = C64::new(0.0, 0.0);
        for i in 0..2 {
            for j in 0..2 {
                // ⟨e_i, z_ij e_j⟩
                let zij = z.block(i, j);
                let ej =
                    CMatrix::from_fn(2, 1, |r, _| if r == j { 1.0.into() } else { 0.0.into() });
                let v = &zij * ej;
                s += v[(i, 0)];
            }
        }
        assert!((trace_pair(&z).unwrap() - s).norm() < 1e-14);
        assert!(trace_pair(&random_block(&mut rng, 2, 3)).is_err());
    }

    #[test]
    fn reshuffle_round_trip() {
        let mut rng = seeded(6);
        let x = random_block(&mut rng, 6, 2);
        let y = fubini_reshuffle(&x, 2, 3).unwrap();
        assert_eq!(fubini_reshuffle(&y, 3, 2).unwrap(), x);
        assert!(fubini_reshuffle(&x, 4, 2).is_err());
        let id = BlockMatrix::new(4, 2, identity(8)).unwrap();
        assert_eq!(fubini_reshuffle(&id, 2, 2).unwrap(), id);
    }

    #[test]
    fn reshuffle_of_triple_tensor() {
        let mut rng = seeded(7);
        let a = random_matrix(&mut rng, 2, 2);
        let b = random_matrix(&mut rng, 3, 3);
        let e = random_matrix(&mut rng, 2, 2);
        let x = BlockMatrix::new(6, 2, kron(&kron(&a, &b), &e)).unwrap();
        let y = fubini_reshuffle(&x, 2, 3).unwrap();
        assert!((y.body() - kron(&kron(&b, &a), &e)).norm() < 1e-14);
    }
}
