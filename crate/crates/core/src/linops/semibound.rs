//! Grid-certified growth bound (M, omega) with ||e^{tA}|| <= M e^{omega t}
//! checked on a dense t-grid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linops::expm::matrix_exp;
use crate::linops::matrix::OperatorMatrix;

/// Margin added to the spectral abscissa so the certified ratio stays bounded.
const OMEGA_MARGIN: f64 = 1e-9;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SemigroupBound {
    /// Certified constant, clamped to at least 1.
    pub m: f64,
    /// Growth rate: spectral abscissa plus a fixed margin.
    pub omega: f64,
    /// Times at which the certificate was checked.
    pub t_grid: Vec<f64>,
}

/// Certifies ||e^{tA}|| <= M e^{omega t} on a grid covering [0, t_check]:
/// uniform up to t = 1, log-spaced beyond.
pub fn semigroup_bound(a: &OperatorMatrix, t_check: f64, grid_points: usize) -> Result<SemigroupBound> {
    if !(t_check > 0.0) || !t_check.is_finite() {
        return Err(Error::bad_input(format!(
            "certificate horizon {t_check} must be positive and finite"
        )));
    }
    if grid_points < 2 {
        return Err(Error::bad_input("certificate grid needs at least 2 points"));
    }
    let omega = a.spectral_abscissa()? + OMEGA_MARGIN;
    let t_grid = build_grid(t_check, grid_points);
    let mut m = 1.0_f64;
    for &t in &t_grid {
        let growth = matrix_exp(a, t)?.norm2();
        // e^{-omega t} can underflow for huge omega*t; work in logs.
        let ratio = growth.ln() - omega * t;
        m = m.max(ratio.exp());
    }
    Ok(SemigroupBound { m, omega, t_grid })
}

fn build_grid(t_check: f64, points: usize) -> Vec<f64> {
    let mut grid = Vec::with_capacity(points);
    if t_check <= 1.0 {
        for k in 0..points {
            grid.push(t_check * k as f64 / (points - 1) as f64);
        }
    } else {
        let head = points / 2;
        let tail = points - head;
        for k in 0..head {
            grid.push(k as f64 / head as f64);
        }
        // Log spacing from 1 to t_check inclusive.
        let top = t_check.ln();
        for k in 0..tail {
            grid.push((top * k as f64 / (tail - 1) as f64).exp());
        }
    }
    grid
}
