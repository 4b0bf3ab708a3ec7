//! Principal matrix fractional powers A^alpha for alpha in (0, 1].
//!
//! Well-conditioned eigenvector matrices take the eigendecomposition route;
//! otherwise the power is evaluated on the triangular Schur factor, either by
//! the Parlett recurrence (separated eigenvalues) or through the triangular
//! square-root / logarithm composition (clustered or defective spectra).

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linops::expm::matrix_exp;
use crate::linops::matrix::OperatorMatrix;
use crate::linops::spectrum::spectrum;

/// Above this eigenvector condition number the eigendecomposition route is
/// abandoned for the triangular one.
const DIAGONALIZABLE_CAP: f64 = 1e6;
/// Minimum relative eigenvalue separation for the Parlett recurrence.
const PARLETT_SEPARATION: f64 = 1e-5;

pub fn fractional_power(a: &OperatorMatrix, alpha: f64) -> Result<OperatorMatrix> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidExponent { alpha });
    }
    let cut_tol = (a.dim() as f64 * f64::EPSILON * a.norm2()).max(f64::MIN_POSITIVE);
    for &lambda in a.eigenvalues()? {
        let cut_distance = if lambda.re <= 0.0 {
            lambda.im.abs()
        } else {
            // Nearest point of the ray (-inf, 0] is the origin.
            lambda.norm().min(f64::INFINITY)
        };
        if lambda.re <= cut_tol && cut_distance <= cut_tol {
            return Err(Error::BranchCutViolation { eigenvalue: lambda });
        }
    }
    if alpha == 1.0 {
        return Ok(a.clone());
    }

    let spec = spectrum(a)?;
    if spec.condition_estimate <= DIAGONALIZABLE_CAP {
        let n = a.dim();
        let mut v = DMatrix::<Complex64>::zeros(n, n);
        for (j, vec) in spec.eigenvectors.iter().enumerate() {
            v.set_column(j, vec);
        }
        let mut vd = v.clone();
        for (j, lambda) in spec.eigenvalues.iter().enumerate() {
            let p = lambda.powf(alpha);
            for i in 0..n {
                vd[(i, j)] *= p;
            }
        }
        // A^alpha = (V D) V^{-1}, solved as X V = V D i.e. V^T X^T = (V D)^T.
        let xt = v
            .transpose()
            .lu()
            .solve(&vd.transpose())
            .ok_or_else(|| Error::invalid_operator("eigenvector matrix is singular"))?;
        return OperatorMatrix::new(xt.transpose(), "");
    }

    let cache = a.schur()?;
    let f = triangular_power(&cache.t, alpha)?;
    OperatorMatrix::new(&cache.q * f * cache.q.adjoint(), "")
}

/// T^alpha for upper-triangular T with spectrum off the branch cut.
pub(crate) fn triangular_power(t: &DMatrix<Complex64>, alpha: f64) -> Result<DMatrix<Complex64>> {
    let n = t.nrows();
    let scale = t.iter().map(|z| z.norm()).fold(0.0_f64, f64::max).max(1.0);
    let mut min_sep = f64::INFINITY;
    for i in 0..n {
        for j in i + 1..n {
            min_sep = min_sep.min((t[(i, i)] - t[(j, j)]).norm());
        }
    }
    if n == 1 || min_sep > PARLETT_SEPARATION * scale {
        Ok(parlett_power(t, alpha))
    } else {
        let log = triangular_log(t)?;
        let scaled = OperatorMatrix::new(log, "")?;
        Ok(matrix_exp(&scaled, alpha)?.into_matrix())
    }
}

/// Parlett recurrence for f(T) with f(z) = z^alpha, valid for separated
/// diagonal entries.
fn parlett_power(t: &DMatrix<Complex64>, alpha: f64) -> DMatrix<Complex64> {
    let n = t.nrows();
    let mut f = DMatrix::<Complex64>::zeros(n, n);
    for i in 0..n {
        f[(i, i)] = t[(i, i)].powf(alpha);
    }
    for d in 1..n {
        for i in 0..n - d {
            let j = i + d;
            let mut acc = t[(i, j)] * (f[(i, i)] - f[(j, j)]);
            for k in i + 1..j {
                acc += f[(i, k)] * t[(k, j)] - t[(i, k)] * f[(k, j)];
            }
            f[(i, j)] = acc / (t[(i, i)] - t[(j, j)]);
        }
    }
    f
}

/// Principal logarithm of upper-triangular T by inverse scaling and squaring:
/// repeated triangular square roots until T^(1/2^k) is close to I, then the
/// alternating series for log(I + X), then multiplication by 2^k.
fn triangular_log(t: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
    let n = t.nrows();
    let ident = DMatrix::<Complex64>::identity(n, n);
    let mut s = t.clone();
    let mut doublings = 0u32;
    while (&s - &ident).norm() > 0.3 {
        if doublings > 80 {
            return Err(Error::invalid_operator(
                "triangular square-root iteration failed to contract",
            ));
        }
        s = triangular_sqrt(&s)?;
        doublings += 1;
    }
    let x = &s - &ident;
    let mut log = DMatrix::<Complex64>::zeros(n, n);
    let mut power = x.clone();
    for m in 1..=64 {
        let sign = if m % 2 == 1 { 1.0 } else { -1.0 };
        let term = &power * Complex64::new(sign / m as f64, 0.0);
        log += &term;
        if term.norm() < 1e-18 * (1.0 + log.norm()) {
            break;
        }
        power = &power * &x;
    }
    Ok(log * Complex64::new(2.0_f64.powi(doublings as i32), 0.0))
}

/// Principal square root of upper-triangular T via the standard recurrence.
fn triangular_sqrt(t: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
    let n = t.nrows();
    let mut s = DMatrix::<Complex64>::zeros(n, n);
    for i in 0..n {
        s[(i, i)] = t[(i, i)].sqrt();
    }
    for d in 1..n {
        for i in 0..n - d {
            let j = i + d;
            let mut acc = t[(i, j)];
            for k in i + 1..j {
                acc -= s[(i, k)] * s[(k, j)];
            }
            let den = s[(i, i)] + s[(j, j)];
            if den.norm() == 0.0 {
                return Err(Error::invalid_operator(
                    "square-root recurrence hit a zero pivot",
                ));
            }
            s[(i, j)] = acc / den;
        }
    }
    Ok(s)
}
