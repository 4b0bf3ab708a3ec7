//! Matrix exponential by diagonal Pade approximation with scaling and
//! squaring. Order is chosen from the 1-norm against the standard backward
//! error thresholds; order 13 with repeated squaring covers the rest.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linops::matrix::OperatorMatrix;

/// Beyond this 1-norm, e^{tA} cannot be represented in f64 anyway.
// Bounds the squaring count (~20 at the cap); entry overflow is caught on the
// result instead, so stiff stable matrices are not rejected up front.
const OVERFLOW_CAP: f64 = 1e6;

const THETA_3: f64 = 1.495_585_217_958_292e-2;
const THETA_5: f64 = 2.539_398_330_063_230e-1;
const THETA_7: f64 = 9.504_178_996_162_932e-1;
const THETA_9: f64 = 2.097_847_961_257_068e0;
const THETA_13: f64 = 5.371_920_351_148_152e0;

const B3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const B5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const B7: [f64; 8] = [
    17_297_280.0,
    8_648_640.0,
    1_995_840.0,
    277_200.0,
    25_200.0,
    1_512.0,
    56.0,
    1.0,
];
const B9: [f64; 10] = [
    17_643_225_600.0,
    8_821_612_800.0,
    2_075_673_600.0,
    302_702_400.0,
    30_270_240.0,
    2_162_160.0,
    110_880.0,
    3_960.0,
    90.0,
    1.0,
];
const B13: [f64; 14] = [
    64_764_752_532_480_000.0,
    32_382_376_266_240_000.0,
    7_771_770_303_897_600.0,
    1_187_353_796_428_800.0,
    129_060_195_264_000.0,
    10_559_470_521_600.0,
    670_442_572_800.0,
    33_522_128_640.0,
    1_323_241_920.0,
    40_840_800.0,
    960_960.0,
    16_380.0,
    182.0,
    1.0,
];

/// e^{tA}. Errors with `ExpOverflow` when `||tA||_1` exceeds the scaling
/// budget or when the result leaves the f64 range (genuinely exploding
/// semigroups). Stiff but stable inputs with large `||tA||` are fine: the
/// squaring phase only ever holds genuine semigroup values.
pub fn matrix_exp(a: &OperatorMatrix, t: f64) -> Result<OperatorMatrix> {
    if !t.is_finite() {
        return Err(Error::bad_input(format!("exponential time {t} not finite")));
    }
    let m = a.matrix() * Complex64::new(t, 0.0);
    let eta = one_norm(&m);
    if eta > OVERFLOW_CAP {
        return Err(Error::ExpOverflow {
            norm: eta,
            cap: OVERFLOW_CAP,
        });
    }
    let n = m.nrows();
    let result = if eta <= THETA_9 {
        let coeffs: &[f64] = if eta <= THETA_3 {
            &B3
        } else if eta <= THETA_5 {
            &B5
        } else if eta <= THETA_7 {
            &B7
        } else {
            &B9
        };
        pade_low_order(&m, coeffs)?
    } else {
        let s = ((eta / THETA_13).log2().ceil().max(0.0)) as u32;
        let scaled = &m * Complex64::new(0.5_f64.powi(s as i32), 0.0);
        let mut e = pade_13(&scaled)?;
        for _ in 0..s {
            e = &e * &e;
        }
        e
    };
    debug_assert_eq!(result.nrows(), n);
    if result.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::ExpOverflow {
            norm: eta,
            cap: f64::MAX,
        });
    }
    OperatorMatrix::new(result, "")
}

/// Diagonal Pade of odd order given its coefficient table: builds
/// U (odd powers) and V (even powers), then solves (V - U) X = V + U.
fn pade_low_order(m: &DMatrix<Complex64>, b: &[f64]) -> Result<DMatrix<Complex64>> {
    let n = m.nrows();
    let ident = DMatrix::<Complex64>::identity(n, n);
    let m2 = m * m;
    // Horner evaluation in powers of M^2.
    let top = b.len() / 2 - 1;
    let mut u_poly = &ident * Complex64::new(b[2 * top + 1], 0.0);
    let mut v_poly = &ident * Complex64::new(b[2 * top], 0.0);
    for k in (0..top).rev() {
        u_poly = &u_poly * &m2 + &ident * Complex64::new(b[2 * k + 1], 0.0);
        v_poly = &v_poly * &m2 + &ident * Complex64::new(b[2 * k], 0.0);
    }
    let u = m * u_poly;
    solve_pade(&v_poly, &u)
}

fn pade_13(m: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
    let n = m.nrows();
    let ident = DMatrix::<Complex64>::identity(n, n);
    let m2 = m * m;
    let m4 = &m2 * &m2;
    let m6 = &m2 * &m4;
    let c = |k: usize| Complex64::new(B13[k], 0.0);
    let u_inner = &m6 * (&m6 * c(13) + &m4 * c(11) + &m2 * c(9));
    let u = m * (u_inner + &m6 * c(7) + &m4 * c(5) + &m2 * c(3) + &ident * c(1));
    let v_inner = &m6 * (&m6 * c(12) + &m4 * c(10) + &m2 * c(8));
    let v = v_inner + &m6 * c(6) + &m4 * c(4) + &m2 * c(2) + &ident * c(0);
    solve_pade(&v, &u)
}

fn solve_pade(v: &DMatrix<Complex64>, u: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
    let lhs = v - u;
    let rhs = v + u;
    lhs.lu()
        .solve(&rhs)
        .ok_or_else(|| Error::invalid_operator("Pade denominator is singular"))
}

fn one_norm(m: &DMatrix<Complex64>) -> f64 {
    let mut worst = 0.0_f64;
    for j in 0..m.ncols() {
        let col: f64 = (0..m.nrows()).map(|i| m[(i, j)].norm()).sum();
        worst = worst.max(col);
    }
    worst
}
