//! Chebyshev-Gauss-Lobatto collocation on the delay interval [-r, 0]:
//! nodes, spectral differentiation, barycentric interpolation, and
//! Clenshaw-Curtis quadrature weights.

use nalgebra::DMatrix;

/// N+1 collocation nodes on [-r, 0], descending from theta_0 = 0 to
/// theta_N = -r. Node 0 sits first so the splicing row is row-block 0.
pub fn cgl_nodes(n: usize, r: f64) -> Vec<f64> {
    assert!(n >= 1 && r > 0.0);
    (0..=n)
        .map(|j| {
            let x = (j as f64 * std::f64::consts::PI / n as f64).cos();
            r * (x - 1.0) / 2.0
        })
        .collect()
}

/// Spectral differentiation matrix on the nodes of `cgl_nodes(n, r)`:
/// (D phi)_i = phi'(theta_i) exactly for polynomials of degree <= n.
pub fn diff_matrix(n: usize, r: f64) -> DMatrix<f64> {
    assert!(n >= 1 && r > 0.0);
    let x: Vec<f64> = (0..=n)
        .map(|j| (j as f64 * std::f64::consts::PI / n as f64).cos())
        .collect();
    let c = |i: usize| -> f64 {
        if i == 0 || i == n {
            2.0
        } else {
            1.0
        }
    };
    let mut d = DMatrix::<f64>::zeros(n + 1, n + 1);
    for i in 0..=n {
        for j in 0..=n {
            if i != j {
                let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
                d[(i, j)] = (c(i) / c(j)) * sign / (x[i] - x[j]);
            }
        }
    }
    // Negative-sum trick: diagonal entries from exactness on constants.
    for i in 0..=n {
        let mut row_sum = 0.0;
        for j in 0..=n {
            if i != j {
                row_sum += d[(i, j)];
            }
        }
        d[(i, i)] = -row_sum;
    }
    // Chain rule for the affine map from [-1, 1] onto [-r, 0].
    d * (2.0 / r)
}

/// Barycentric weights for the CGL nodes: (-1)^j, halved at both ends. Any
/// common scaling cancels in the interpolation formula.
pub fn bary_weights(n: usize) -> Vec<f64> {
    (0..=n)
        .map(|j| {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            if j == 0 || j == n {
                0.5 * sign
            } else {
                sign
            }
        })
        .collect()
}

/// Row of interpolation weights: p(theta) = sum_j row[j] * p(theta_j) for
/// every polynomial p of degree <= n. Exact unit row at a node.
pub fn interp_row(nodes: &[f64], weights: &[f64], theta: f64) -> Vec<f64> {
    assert_eq!(nodes.len(), weights.len());
    if let Some(hit) = nodes.iter().position(|&t| t == theta) {
        let mut row = vec![0.0; nodes.len()];
        row[hit] = 1.0;
        return row;
    }
    let terms: Vec<f64> = nodes
        .iter()
        .zip(weights)
        .map(|(&t, &w)| w / (theta - t))
        .collect();
    let denom: f64 = terms.iter().sum();
    terms.iter().map(|v| v / denom).collect()
}

/// Clenshaw-Curtis weights for the K+1 CGL points on [a, b] (descending from
/// b to a, matching `cc_nodes`); exact for polynomials of degree <= K.
/// K must be even.
pub fn cc_weights(k: usize, a: f64, b: f64) -> Vec<f64> {
    assert!(k >= 2 && k % 2 == 0 && b > a);
    let half = k / 2;
    let mut w = vec![0.0; k + 1];
    for (j, wj) in w.iter_mut().enumerate() {
        let cj = if j == 0 || j == k { 0.5 } else { 1.0 };
        let mut s = 0.0;
        for m in 0..=half {
            let halve = if m == 0 || m == half { 0.5 } else { 1.0 };
            let angle = 2.0 * m as f64 * j as f64 * std::f64::consts::PI / k as f64;
            s += halve * 2.0 / (1.0 - 4.0 * (m * m) as f64) * angle.cos();
        }
        *wj = 2.0 * cj / k as f64 * s;
    }
    // Scale from [-1, 1] to [a, b].
    let scale = (b - a) / 2.0;
    for wj in &mut w {
        *wj *= scale;
    }
    w
}

/// The K+1 quadrature points matching `cc_weights`, descending from b to a.
pub fn cc_nodes(k: usize, a: f64, b: f64) -> Vec<f64> {
    (0..=k)
        .map(|j| {
            let x = (j as f64 * std::f64::consts::PI / k as f64).cos();
            a + (b - a) * (x + 1.0) / 2.0
        })
        .collect()
}
