//! Ordered Schur form: unitary similarity swaps that bubble a selected
//! eigenvalue cluster to the leading block, and the spectral projector built
//! from the ordered form through a triangular Sylvester solve.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::Result;
use crate::linops::matrix::OperatorMatrix;

#[derive(Debug, Clone)]
pub struct OrderedSchur {
    pub q: DMatrix<Complex64>,
    pub t: DMatrix<Complex64>,
    /// Number of selected eigenvalues, occupying the leading diagonal block.
    pub selected: usize,
}

impl OrderedSchur {
    /// Orthonormal basis of the invariant subspace for the selected cluster.
    pub fn selected_basis(&self) -> DMatrix<Complex64> {
        self.q.columns(0, self.selected).into_owned()
    }
}

/// Reorders a cached Schur factorization so eigenvalues satisfying `select`
/// appear first along the diagonal.
pub fn ordered_schur(
    a: &OperatorMatrix,
    select: impl Fn(Complex64) -> bool,
) -> Result<OrderedSchur> {
    let cache = a.schur()?;
    let mut q = cache.q.clone();
    let mut t = cache.t.clone();
    let n = t.nrows();

    let mut front = 0;
    for scan in 0..n {
        if select(t[(scan, scan)]) {
            let mut k = scan;
            while k > front {
                swap_adjacent(&mut t, &mut q, k - 1);
                k -= 1;
            }
            front += 1;
        }
    }
    Ok(OrderedSchur {
        q,
        t,
        selected: front,
    })
}

/// Exchanges the diagonal entries at positions (j, j+1) of an upper-triangular
/// T by a unitary similarity, updating Q accordingly.
fn swap_adjacent(t: &mut DMatrix<Complex64>, q: &mut DMatrix<Complex64>, j: usize) {
    let t11 = t[(j, j)];
    let t12 = t[(j, j + 1)];
    let t22 = t[(j + 1, j + 1)];
    if (t11 - t22).norm() == 0.0 {
        // Equal eigenvalues: membership in the cluster is unaffected by order.
        return;
    }
    // Unit vector spanning the t22-eigenvector of the 2x2 block [[t11,t12],[0,t22]].
    let a = t12;
    let b = t22 - t11;
    let r = (a.norm_sqr() + b.norm_sqr()).sqrt();
    let (c1, c2) = (a / r, b / r);
    // Z = [[c1, -conj(c2)], [c2, conj(c1)]] is unitary with first column (c1, c2).
    let n = t.nrows();
    // T <- Z^H T (rows j, j+1) and T <- T Z (columns j, j+1); Q <- Q Z.
    for col in 0..n {
        let x = t[(j, col)];
        let y = t[(j + 1, col)];
        t[(j, col)] = c1.conj() * x + c2.conj() * y;
        t[(j + 1, col)] = -c2 * x + c1 * y;
    }
    for row in 0..n {
        let x = t[(row, j)];
        let y = t[(row, j + 1)];
        t[(row, j)] = x * c1 + y * c2;
        t[(row, j + 1)] = -x * c2.conj() + y * c1.conj();
        let qx = q[(row, j)];
        let qy = q[(row, j + 1)];
        q[(row, j)] = qx * c1 + qy * c2;
        q[(row, j + 1)] = -qx * c2.conj() + qy * c1.conj();
    }
    t[(j + 1, j)] = Complex64::new(0.0, 0.0);
}

/// Spectral projector onto the invariant subspace of the selected eigenvalues,
/// along the complementary one: P = Q [I R; 0 0] Q^H where R solves the
/// triangular Sylvester equation T11 R - R T22 = T12.
pub fn spectral_projector(
    a: &OperatorMatrix,
    select: impl Fn(Complex64) -> bool,
) -> Result<DMatrix<Complex64>> {
    let ordered = ordered_schur(a, select)?;
    let n = ordered.t.nrows();
    let k = ordered.selected;
    if k == 0 {
        return Ok(DMatrix::zeros(n, n));
    }
    if k == n {
        return Ok(DMatrix::identity(n, n));
    }
    let t11 = ordered.t.view((0, 0), (k, k));
    let t12 = ordered.t.view((0, k), (k, n - k));
    let t22 = ordered.t.view((k, k), (n - k, n - k));

    // Column-wise solve: (T11 - T22[j,j] I) R[:,j] = T12[:,j] + sum_{i<j} R[:,i] T22[i,j].
    let mut r = DMatrix::<Complex64>::zeros(k, n - k);
    for j in 0..n - k {
        let mut rhs: Vec<Complex64> = (0..k).map(|i| t12[(i, j)]).collect();
        for i in 0..j {
            let w = t22[(i, j)];
            for (row, item) in rhs.iter_mut().enumerate() {
                *item += r[(row, i)] * w;
            }
        }
        let shift = t22[(j, j)];
        // Back-substitution on the shifted upper-triangular T11.
        for row in (0..k).rev() {
            let mut acc = rhs[row];
            for col in row + 1..k {
                acc -= t11[(row, col)] * r[(col, j)];
            }
            r[(row, j)] = acc / (t11[(row, row)] - shift);
        }
    }

    let mut core = DMatrix::<Complex64>::zeros(n, n);
    for i in 0..k {
        core[(i, i)] = Complex64::new(1.0, 0.0);
        for j in 0..n - k {
            core[(i, k + j)] = r[(i, j)];
        }
    }
    Ok(&ordered.q * core * ordered.q.adjoint())
}
