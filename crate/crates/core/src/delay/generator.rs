//! Discretized solution-semigroup generator of u'(t) = A u(t) + B u_t on the
//! collocated phase space: differentiation away from the right endpoint, the
//! splicing condition phi'(0) = A phi(0) + B phi at row-block 0.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::cheb::{bary_weights, cgl_nodes, diff_matrix, interp_row};
use crate::error::{Error, Result};
use crate::linops::matrix::OperatorMatrix;

/// Discretized state dimension times mesh size must stay at or below this.
pub const DIMENSION_CAP: usize = 4000;
/// Minimum collocation order.
pub const MIN_ORDER: usize = 4;

/// A delay system u'(t) = A u(t) + B u_t, where the functional B pairs a
/// point evaluation at -r with finitely many kernel atoms:
/// B phi = B_point phi(-r) + sum_j W_j phi(theta_j).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelaySystem {
    pub a: OperatorMatrix,
    pub r: f64,
    pub b_point: OperatorMatrix,
    /// (theta_j, W_j) pairs with theta_j in [-r, 0], no duplicates.
    pub b_kernel: Vec<(f64, OperatorMatrix)>,
}

impl DelaySystem {
    pub fn new(
        a: OperatorMatrix,
        r: f64,
        b_point: OperatorMatrix,
        b_kernel: Vec<(f64, OperatorMatrix)>,
    ) -> Result<Self> {
        if !(r > 0.0) || !r.is_finite() {
            return Err(Error::bad_input(format!("delay {r} must be positive")));
        }
        if b_point.dim() != a.dim() {
            return Err(Error::bad_input(format!(
                "state dimension {} does not match delay coefficient dimension {}",
                a.dim(),
                b_point.dim()
            )));
        }
        for (k, (theta, w)) in b_kernel.iter().enumerate() {
            if !(-r..=0.0).contains(theta) {
                return Err(Error::bad_input(format!(
                    "kernel node {theta} outside [-{r}, 0]"
                )));
            }
            if w.dim() != a.dim() {
                return Err(Error::bad_input(format!(
                    "kernel weight {k} has dimension {} instead of {}",
                    w.dim(),
                    a.dim()
                )));
            }
            if b_kernel[..k].iter().any(|(t, _)| t == theta) {
                return Err(Error::bad_input(format!("duplicate kernel node {theta}")));
            }
        }
        Ok(DelaySystem {
            a,
            r,
            b_point,
            b_kernel,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.a.dim()
    }

    /// ||B_point|| + sum ||W_j||: the functional norm of B, and also the
    /// norm-difference metric between delay functionals.
    pub fn functional_norm(&self) -> f64 {
        self.b_point.norm2() + self.b_kernel.iter().map(|(_, w)| w.norm2()).sum::<f64>()
    }
}

/// The collocated generator together with its mesh and source system.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiscretizedGenerator {
    /// CGL nodes on [-r, 0], node 0 first.
    pub mesh: Vec<f64>,
    pub g: OperatorMatrix,
    pub system: DelaySystem,
}

impl DiscretizedGenerator {
    pub fn order(&self) -> usize {
        self.mesh.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.g.dim()
    }

    /// How far a mesh function violates the domain condition: the Chebyshev
    /// derivative at node 0 minus A phi(0) - B phi, in Euclidean norm.
    pub fn splicing_residual(&self, phi: &DVector<Complex64>) -> Result<f64> {
        let n_state = self.system.state_dim();
        if phi.len() != self.dim() {
            return Err(Error::bad_input(format!(
                "phase vector length {} does not match generator dimension {}",
                phi.len(),
                self.dim()
            )));
        }
        let d = diff_matrix(self.order(), self.system.r);
        let mut residual = DVector::<Complex64>::zeros(n_state);
        // phi'(0) by pure differentiation of the interpolant.
        for j in 0..self.mesh.len() {
            let w = Complex64::new(d[(0, j)], 0.0);
            for s in 0..n_state {
                residual[s] += w * phi[j * n_state + s];
            }
        }
        let boundary = functional_row(&self.system, &self.mesh)?;
        let head = phi.rows(0, n_state).clone_owned();
        let a_part = self.system.a.matrix() * head;
        let b_part = &boundary * phi;
        residual -= a_part + b_part;
        Ok(residual.norm())
    }
}

/// The functional B as a row of blocks over mesh values: point evaluation at
/// -r plus interpolated kernel atoms. Shared by the generator's splicing row
/// and the fixed-point operator of the resolvent construction.
pub fn functional_row(sys: &DelaySystem, mesh: &[f64]) -> Result<DMatrix<Complex64>> {
    let n_state = sys.state_dim();
    let n_nodes = mesh.len();
    let order = n_nodes - 1;
    let mut row = DMatrix::<Complex64>::zeros(n_state, n_state * n_nodes);
    // phi(-r) is the last mesh value exactly.
    let add_block = |row: &mut DMatrix<Complex64>, node: usize, m: &OperatorMatrix, scale: f64| {
        for s in 0..n_state {
            for t in 0..n_state {
                row[(s, node * n_state + t)] += m.matrix()[(s, t)] * scale;
            }
        }
    };
    add_block(&mut row, order, &sys.b_point, 1.0);
    let weights = bary_weights(order);
    for (theta, w) in &sys.b_kernel {
        let interp = interp_row(mesh, &weights, *theta);
        for (node, coeff) in interp.iter().enumerate() {
            if *coeff != 0.0 {
                add_block(&mut row, node, w, *coeff);
            }
        }
    }
    Ok(row)
}

/// Collocates the generator on N+1 CGL nodes: row-blocks 1..N differentiate,
/// row-block 0 carries the splicing condition A phi(0) + B phi.
pub fn assemble_generator(sys: &DelaySystem, n: usize) -> Result<DiscretizedGenerator> {
    if n < MIN_ORDER {
        return Err(Error::bad_input(format!(
            "collocation order {n} below the minimum {MIN_ORDER}"
        )));
    }
    let n_state = sys.state_dim();
    let dim = n_state * (n + 1);
    if dim > DIMENSION_CAP {
        return Err(Error::TooLarge {
            dim,
            cap: DIMENSION_CAP,
        });
    }
    let mesh = cgl_nodes(n, sys.r);
    let d = diff_matrix(n, sys.r);
    let mut g = DMatrix::<Complex64>::zeros(dim, dim);
    for i in 1..=n {
        for j in 0..=n {
            let v = Complex64::new(d[(i, j)], 0.0);
            if v != Complex64::new(0.0, 0.0) {
                for s in 0..n_state {
                    g[(i * n_state + s, j * n_state + s)] = v;
                }
            }
        }
    }
    for s in 0..n_state {
        for t in 0..n_state {
            g[(s, t)] = sys.a.matrix()[(s, t)];
        }
    }
    let boundary = functional_row(sys, &mesh)?;
    for s in 0..n_state {
        for c in 0..dim {
            g[(s, c)] += boundary[(s, c)];
        }
    }
    Ok(DiscretizedGenerator {
        mesh,
        g: OperatorMatrix::new(g, "delay generator")?,
        system: sys.clone(),
    })
}
