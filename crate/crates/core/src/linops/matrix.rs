use std::fmt;
use std::sync::{Arc, OnceLock};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Iteration budget for the QR eigenvalue iteration. Generous: desk-scale
/// matrices converge in far fewer sweeps.
const SCHUR_MAX_ITER: usize = 40_000;

/// Complex Schur factorization A = Q T Q^H together with data derived from it.
#[derive(Debug, Clone)]
pub struct SchurCache {
    pub q: DMatrix<Complex64>,
    pub t: DMatrix<Complex64>,
    /// Diagonal of `t`, in Schur order.
    pub eigenvalues: Vec<Complex64>,
    /// Largest real part over the spectrum.
    pub abscissa: f64,
}

/// Dense square complex matrix standing in for a (discretized) closed operator.
///
/// The matrix is immutable after construction; spectral data computed from it
/// is cached and shared between clones.
pub struct OperatorMatrix {
    label: String,
    data: DMatrix<Complex64>,
    schur: OnceLock<std::result::Result<Arc<SchurCache>, Error>>,
    norm2: OnceLock<f64>,
}

impl OperatorMatrix {
    /// Wraps a square matrix with finite entries. The label is a free-form tag
    /// carried through reports.
    pub fn new(data: DMatrix<Complex64>, label: impl Into<String>) -> Result<Self> {
        if data.nrows() == 0 || data.nrows() != data.ncols() {
            return Err(Error::invalid_operator(format!(
                "expected a nonempty square matrix, got {}x{}",
                data.nrows(),
                data.ncols()
            )));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::invalid_operator("matrix entries must be finite"));
        }
        Ok(OperatorMatrix {
            label: label.into(),
            data,
            schur: OnceLock::new(),
            norm2: OnceLock::new(),
        })
    }

    pub fn zeros(dim: usize) -> Self {
        Self::new(DMatrix::zeros(dim, dim), "").expect("zero matrix is valid")
    }

    pub fn identity(dim: usize) -> Self {
        Self::new(DMatrix::identity(dim, dim), "").expect("identity matrix is valid")
    }

    pub fn diagonal(entries: &[Complex64]) -> Self {
        let n = entries.len();
        let mut m = DMatrix::zeros(n, n);
        for (i, z) in entries.iter().enumerate() {
            m[(i, i)] = *z;
        }
        Self::new(m, "").expect("diagonal matrix is valid")
    }

    pub fn diagonal_real(entries: &[f64]) -> Self {
        let complex: Vec<Complex64> = entries.iter().map(|x| Complex64::new(*x, 0.0)).collect();
        Self::diagonal(&complex)
    }

    /// Row-major real entries.
    pub fn from_real(dim: usize, rows: &[f64]) -> Result<Self> {
        if rows.len() != dim * dim {
            return Err(Error::invalid_operator(format!(
                "expected {} entries for a {dim}x{dim} matrix, got {}",
                dim * dim,
                rows.len()
            )));
        }
        let complex: Vec<Complex64> = rows.iter().map(|x| Complex64::new(*x, 0.0)).collect();
        Self::new(DMatrix::from_row_slice(dim, dim, &complex), "")
    }

    /// Row-major complex entries.
    pub fn from_complex(dim: usize, rows: &[Complex64]) -> Result<Self> {
        if rows.len() != dim * dim {
            return Err(Error::invalid_operator(format!(
                "expected {} entries for a {dim}x{dim} matrix, got {}",
                dim * dim,
                rows.len()
            )));
        }
        Self::new(DMatrix::from_row_slice(dim, dim, rows), "")
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.data
    }

    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.data
    }

    /// Operator 2-norm (largest singular value).
    pub fn norm2(&self) -> f64 {
        *self
            .norm2
            .get_or_init(|| spectral_norm(&self.data))
    }

    pub fn frobenius(&self) -> f64 {
        self.data.norm()
    }

    /// Complex Schur factorization, computed once and cached.
    pub fn schur(&self) -> Result<&SchurCache> {
        let cached = self.schur.get_or_init(|| {
            nalgebra::linalg::Schur::try_new(self.data.clone(), 1e-14, SCHUR_MAX_ITER)
                .map(|s| {
                    let (q, t) = s.unpack();
                    let eigenvalues: Vec<Complex64> =
                        (0..t.nrows()).map(|i| t[(i, i)]).collect();
                    let abscissa = eigenvalues
                        .iter()
                        .map(|z| z.re)
                        .fold(f64::NEG_INFINITY, f64::max);
                    Arc::new(SchurCache {
                        q,
                        t,
                        eigenvalues,
                        abscissa,
                    })
                })
                .ok_or(Error::SpectrumFailure {
                    dim: self.data.nrows(),
                })
        });
        match cached {
            Ok(arc) => Ok(arc.as_ref()),
            Err(e) => Err(e.clone()),
        }
    }

    /// Eigenvalues in Schur order (with multiplicity).
    pub fn eigenvalues(&self) -> Result<&[Complex64]> {
        Ok(&self.schur()?.eigenvalues)
    }

    /// Largest real part over the spectrum.
    pub fn spectral_abscissa(&self) -> Result<f64> {
        Ok(self.schur()?.abscissa)
    }

    /// Componentwise map into a fresh operator (spectral cache not carried over).
    pub fn map_entries(&self, f: impl Fn(Complex64) -> Complex64) -> Result<Self> {
        Self::new(self.data.map(f), self.label.clone())
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        OperatorMatrix {
            label: self.label.clone(),
            data: &self.data * c,
            schur: OnceLock::new(),
            norm2: OnceLock::new(),
        }
    }

    pub fn scaled_re(&self, c: f64) -> Self {
        self.scaled(Complex64::new(c, 0.0))
    }

    pub fn adjoint(&self) -> Self {
        OperatorMatrix {
            label: self.label.clone(),
            data: self.data.adjoint(),
            schur: OnceLock::new(),
            norm2: OnceLock::new(),
        }
    }
}

/// Operator 2-norm of a raw matrix via singular values.
pub fn spectral_norm(m: &DMatrix<Complex64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .fold(0.0_f64, |acc, s| acc.max(*s))
}

/// Operator 2-norm of an `OperatorMatrix` (cached on the value).
pub fn operator_norm(a: &OperatorMatrix) -> f64 {
    a.norm2()
}

impl Clone for OperatorMatrix {
    fn clone(&self) -> Self {
        OperatorMatrix {
            label: self.label.clone(),
            data: self.data.clone(),
            schur: self.schur.clone(),
            norm2: self.norm2.clone(),
        }
    }
}

impl fmt::Debug for OperatorMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OperatorMatrix")
            .field("label", &self.label)
            .field("dim", &self.dim())
            .finish()
    }
}

impl PartialEq for OperatorMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.label == other.label && self.data == other.data
    }
}

impl std::ops::Add for &OperatorMatrix {
    type Output = OperatorMatrix;
    fn add(self, rhs: &OperatorMatrix) -> OperatorMatrix {
        assert_eq!(self.dim(), rhs.dim(), "operator dimensions must match");
        OperatorMatrix {
            label: String::new(),
            data: &self.data + &rhs.data,
            schur: OnceLock::new(),
            norm2: OnceLock::new(),
        }
    }
}

impl std::ops::Sub for &OperatorMatrix {
    type Output = OperatorMatrix;
    fn sub(self, rhs: &OperatorMatrix) -> OperatorMatrix {
        assert_eq!(self.dim(), rhs.dim(), "operator dimensions must match");
        OperatorMatrix {
            label: String::new(),
            data: &self.data - &rhs.data,
            schur: OnceLock::new(),
            norm2: OnceLock::new(),
        }
    }
}

impl std::ops::Mul for &OperatorMatrix {
    type Output = OperatorMatrix;
    fn mul(self, rhs: &OperatorMatrix) -> OperatorMatrix {
        assert_eq!(self.dim(), rhs.dim(), "operator dimensions must match");
        OperatorMatrix {
            label: String::new(),
            data: &self.data * &rhs.data,
            schur: OnceLock::new(),
            norm2: OnceLock::new(),
        }
    }
}
