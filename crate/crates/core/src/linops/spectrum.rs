//! Eigenvalue decomposition and resolvent built on the cached complex Schur
//! factorization. Eigenvectors come from triangular back-substitution on the
//! Schur factor.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linops::matrix::OperatorMatrix;

/// Cap applied to the eigenvector-matrix condition number so reports stay
/// finite for defective inputs.
const CONDITION_CAP: f64 = 1e300;

#[derive(Debug, Clone)]
pub struct SpectrumResult {
    /// Sorted by descending real part, then ascending imaginary part.
    pub eigenvalues: Vec<Complex64>,
    /// Unit eigenvectors aligned with `eigenvalues`.
    pub eigenvectors: Vec<DVector<Complex64>>,
    /// Two-norm condition number of the eigenvector matrix: near 1 for normal
    /// operators, huge for defective ones.
    pub condition_estimate: f64,
}

/// R(lambda, A) = (lambda I - A)^{-1}. The point must keep a distance of
/// `dim * eps * ||A||` from the spectrum.
pub fn resolvent(a: &OperatorMatrix, lambda: Complex64) -> Result<OperatorMatrix> {
    let n = a.dim();
    let tol = n as f64 * f64::EPSILON * a.norm2();
    let eigs = a.eigenvalues()?;
    let nearest = eigs
        .iter()
        .copied()
        .min_by(|x, y| (lambda - x).norm().total_cmp(&(lambda - y).norm()))
        .expect("spectrum of a nonempty matrix is nonempty");
    if (lambda - nearest).norm() <= tol {
        return Err(Error::SingularResolvent {
            lambda,
            eigenvalue: nearest,
        });
    }
    let mut shifted = -a.matrix().clone();
    for i in 0..n {
        shifted[(i, i)] += lambda;
    }
    let inv = shifted
        .lu()
        .solve(&DMatrix::<Complex64>::identity(n, n))
        .ok_or(Error::SingularResolvent {
            lambda,
            eigenvalue: nearest,
        })?;
    OperatorMatrix::new(inv, "")
}

/// Full eigenvalue decomposition with per-eigenvalue eigenvectors.
pub fn spectrum(a: &OperatorMatrix) -> Result<SpectrumResult> {
    let cache = a.schur()?;
    let n = a.dim();
    let t_norm = cache.t.iter().map(|z| z.norm()).fold(0.0_f64, f64::max);
    let guard = (f64::EPSILON * t_norm).max(f64::MIN_POSITIVE);

    let mut pairs: Vec<(Complex64, DVector<Complex64>)> = Vec::with_capacity(n);
    for k in 0..n {
        let lambda = cache.t[(k, k)];
        // Back-substitute (T - lambda I) y = 0 with y[k] = 1; the guarded
        // denominator keeps clustered eigenvalues from dividing by zero.
        let mut y = DVector::<Complex64>::zeros(n);
        y[k] = Complex64::new(1.0, 0.0);
        for i in (0..k).rev() {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in i + 1..=k {
                acc += cache.t[(i, j)] * y[j];
            }
            let mut den = cache.t[(i, i)] - lambda;
            if den.norm() < guard {
                den = Complex64::new(guard, 0.0);
            }
            y[i] = -acc / den;
        }
        let mut v = &cache.q * y;
        let norm = v.norm();
        if norm > 0.0 {
            v /= Complex64::new(norm, 0.0);
        }
        pairs.push((lambda, v));
    }

    pairs.sort_by(|a, b| b.0.re.total_cmp(&a.0.re).then(a.0.im.total_cmp(&b.0.im)));

    let mut vmat = DMatrix::<Complex64>::zeros(n, n);
    for (j, (_, v)) in pairs.iter().enumerate() {
        vmat.set_column(j, v);
    }
    let sv = vmat.svd(false, false).singular_values;
    let smax = sv.iter().fold(0.0_f64, |acc, s| acc.max(*s));
    let smin = sv.iter().fold(f64::INFINITY, |acc, s| acc.min(*s));
    let condition_estimate = if smin > smax / CONDITION_CAP {
        (smax / smin).max(1.0)
    } else {
        CONDITION_CAP
    };

    let (eigenvalues, eigenvectors) = pairs.into_iter().unzip();
    Ok(SpectrumResult {
        eigenvalues,
        eigenvectors,
        condition_estimate,
    })
}
