//! One-dimensional Chebyshev–Gauss–Lobatto grids and spectral
//! differentiation matrices.
//!
//! Every operator in the space-time scheme is assembled from these 1-D
//! building blocks: the first-derivative matrix maps nodal values of the
//! degree-N interpolant to nodal values of its derivative, and the second
//! derivative is the matrix square of the first.

use ndarray::Array2;
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("a Gauss-Lobatto grid needs at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("degenerate interval [{0}, {1}]")]
    DegenerateInterval(f64, f64),
}

/// Chebyshev–Gauss–Lobatto collocation grid on `[a, b]` with its first and
/// second differentiation matrices.
///
/// Nodes are stored in ascending order with the endpoints exact, so index 0
/// carries the left boundary (the initial-time plane when used along `t`).
#[derive(Debug, Clone)]
pub struct ChebyshevGrid1D {
    pub interval: (f64, f64),
    pub nodes: Vec<f64>,
    /// First-derivative matrix `d1[i][j] = l_j'(x_i)`.
    pub d1: Array2<f64>,
    /// Second-derivative matrix, the product `d1 * d1`.
    pub d2: Array2<f64>,
}

impl ChebyshevGrid1D {
    pub fn new(n_points: usize, interval: (f64, f64)) -> Result<Self, GridError> {
        let nodes = gauss_lobatto_nodes(n_points, interval)?;
        let d1 = differentiation_matrix(&nodes);
        let d2 = second_derivative_matrix(&d1);
        Ok(Self {
            interval,
            nodes,
            d1,
            d2,
        })
    }

    /// Single-node grid with zero derivative matrices.
    ///
    /// Stands in for a suppressed dimension in lower-dimensional problems
    /// (e.g. the 2-D `(t, x)` setting); such a mode has no boundary and
    /// contributes nothing to any differential operator.
    pub fn singleton(value: f64) -> Self {
        Self {
            interval: (value, value),
            nodes: vec![value],
            d1: Array2::zeros((1, 1)),
            d2: Array2::zeros((1, 1)),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn is_singleton(&self) -> bool {
        self.nodes.len() == 1
    }
}

/// Chebyshev–Gauss–Lobatto nodes `x_j = mid + half * cos(pi (N - j) / N)`,
/// j = 0..N, ascending, with the endpoints (and midpoint, for even N) exact.
pub fn gauss_lobatto_nodes(n_points: usize, interval: (f64, f64)) -> Result<Vec<f64>, GridError> {
    if n_points < 2 {
        return Err(GridError::TooFewPoints(n_points));
    }
    let (a, b) = interval;
    if !(a < b) {
        return Err(GridError::DegenerateInterval(a, b));
    }
    let n = n_points - 1;
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut nodes: Vec<f64> = (0..=n)
        .map(|j| mid + half * (PI * (n - j) as f64 / n as f64).cos())
        .collect();
    nodes[0] = a;
    nodes[n] = b;
    if n % 2 == 0 {
        nodes[n / 2] = mid;
    }
    Ok(nodes)
}

/// First-derivative collocation matrix for ascending Gauss-Lobatto nodes.
///
/// Off-diagonal entries come from the closed-form barycentric weights
/// `w_j = (-1)^j * (1/2 at the endpoints, 1 otherwise)`; the diagonal uses
/// the negative-sum trick so each row annihilates constants exactly. The
/// affine map to `[a, b]` is absorbed by the node differences, so no extra
/// chain-rule factor is needed.
pub fn differentiation_matrix(nodes: &[f64]) -> Array2<f64> {
    let np = nodes.len();
    let mut d = Array2::zeros((np, np));
    if np < 2 {
        return d;
    }
    let n = np - 1;
    let weight = |j: usize| -> f64 {
        let base = if j == 0 || j == n { 0.5 } else { 1.0 };
        if j % 2 == 0 {
            base
        } else {
            -base
        }
    };
    for i in 0..np {
        let mut row_sum = 0.0;
        for j in 0..np {
            if i != j {
                let v = (weight(j) / weight(i)) / (nodes[i] - nodes[j]);
                d[[i, j]] = v;
                row_sum += v;
            }
        }
        d[[i, i]] = -row_sum;
    }
    d
}

/// Second-derivative matrix as the explicit product `d1 * d1`.
pub fn second_derivative_matrix(d1: &Array2<f64>) -> Array2<f64> {
    assert_eq!(d1.nrows(), d1.ncols(), "d1 must be square");
    d1.dot(d1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array1;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    /// Evaluates p(x) = sum c_k T_k(xi) and its x-derivative on [a, b] via the
    /// Chebyshev recurrence; independent of the collocation matrices.
    fn cheb_poly_and_derivative(coeffs: &[f64], x: f64, interval: (f64, f64)) -> (f64, f64) {
        let (a, b) = interval;
        let xi = (2.0 * x - (a + b)) / (b - a);
        let dxi_dx = 2.0 / (b - a);
        // T and dT/dxi by recurrence
        let (mut t_prev, mut t_cur) = (1.0, xi);
        let (mut dt_prev, mut dt_cur) = (0.0, 1.0);
        let mut value = coeffs[0] * t_prev;
        let mut deriv = coeffs[0] * dt_prev;
        if coeffs.len() > 1 {
            value += coeffs[1] * t_cur;
            deriv += coeffs[1] * dt_cur;
        }
        for c in coeffs.iter().skip(2) {
            let t_next = 2.0 * xi * t_cur - t_prev;
            let dt_next = 2.0 * t_cur + 2.0 * xi * dt_cur - dt_prev;
            value += c * t_next;
            deriv += c * dt_next;
            t_prev = t_cur;
            t_cur = t_next;
            dt_prev = dt_cur;
            dt_cur = dt_next;
        }
        (value, deriv * dxi_dx)
    }

    #[test]
    fn nodes_three_points_canonical() {
        let nodes = gauss_lobatto_nodes(3, (-1.0, 1.0)).unwrap();
        assert_eq!(nodes, vec![-1.0, 0.0, 1.0]);
    }

    #[test]
    fn nodes_two_points() {
        let nodes = gauss_lobatto_nodes(2, (0.0, 6.0)).unwrap();
        assert_eq!(nodes, vec![0.0, 6.0]);
    }

    #[test]
    fn nodes_five_points_analytic() {
        // cos(pi j / 4) for j = 4..0: -1, -sqrt(2)/2, 0, sqrt(2)/2, 1
        let nodes = gauss_lobatto_nodes(5, (-1.0, 1.0)).unwrap();
        let s = 0.5_f64.sqrt();
        let expect = [-1.0, -s, 0.0, s, 1.0];
        for (n, e) in nodes.iter().zip(expect.iter()) {
            assert!((n - e).abs() < 1e-15, "{n} vs {e}");
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(gauss_lobatto_nodes(1, (-1.0, 1.0)).is_err());
        assert!(gauss_lobatto_nodes(4, (1.0, 1.0)).is_err());
        assert!(gauss_lobatto_nodes(4, (2.0, -1.0)).is_err());
    }

    #[test]
    fn two_node_matrix_is_constant_slope() {
        let grid = ChebyshevGrid1D::new(2, (-1.0, 1.0)).unwrap();
        let expect = [[-0.5, 0.5], [-0.5, 0.5]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((grid.d1[[i, j]] - expect[i][j]).abs() < 1e-15);
            }
        }
        // second derivative of linears vanishes
        assert!(grid.d2.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn quadratic_on_three_nodes() {
        let grid = ChebyshevGrid1D::new(3, (-1.0, 1.0)).unwrap();
        let samples = Array1::from(vec![1.0, 0.0, 1.0]); // x^2 at {-1, 0, 1}
        let d = grid.d1.dot(&samples);
        let dd = grid.d2.dot(&samples);
        for (got, want) in d.iter().zip([-2.0, 0.0, 2.0]) {
            assert!((got - want).abs() < 1e-13);
        }
        for got in dd.iter() {
            assert!((got - 2.0).abs() < 1e-13);
        }
    }

    #[test]
    fn row_sums_vanish() {
        for &(a, b) in &[(-1.0, 1.0), (0.0, 6.0), (-2.0, 2.0)] {
            for n in 2..=33 {
                let grid = ChebyshevGrid1D::new(n, (a, b)).unwrap();
                for i in 0..n {
                    let s: f64 = grid.d1.row(i).sum();
                    assert!(
                        s.abs() < 1e-12 * n as f64,
                        "row sum {s} at n={n} on [{a},{b}]"
                    );
                    let s2: f64 = grid.d2.row(i).sum();
                    assert!(s2.abs() < 1e-9 * n as f64, "d2 row sum {s2} at n={n}");
                }
            }
        }
    }

    #[test]
    fn spectral_exactness_up_to_degree_n() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for &interval in &[(-1.0, 1.0), (0.25, 6.5)] {
            for n_points in 2..=33 {
                let grid = ChebyshevGrid1D::new(n_points, interval).unwrap();
                let degree = n_points - 1;
                for _ in 0..3 {
                    let coeffs: Vec<f64> =
                        (0..=degree).map(|_| rng.random_range(-1.0..1.0)).collect();
                    let mut values = Array1::zeros(n_points);
                    let mut derivs = Array1::zeros(n_points);
                    for (i, &x) in grid.nodes.iter().enumerate() {
                        let (p, dp) = cheb_poly_and_derivative(&coeffs, x, interval);
                        values[i] = p;
                        derivs[i] = dp;
                    }
                    let got = grid.d1.dot(&values);
                    let err = (&got - &derivs).mapv(|v| v * v).sum().sqrt();
                    let scale = derivs.mapv(|v: f64| v * v).sum().sqrt().max(1e-30);
                    assert!(
                        err / scale < 1e-10,
                        "degree {degree} on {interval:?}: rel err {}",
                        err / scale
                    );
                }
            }
        }
    }

    #[test]
    fn mapping_consistency_identity_function() {
        let grid = ChebyshevGrid1D::new(9, (2.0, 11.0)).unwrap();
        let x = Array1::from(grid.nodes.clone());
        let dx = grid.d1.dot(&x);
        for v in dx.iter() {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn nodes_symmetric_about_midpoint() {
        let grid = ChebyshevGrid1D::new(8, (-3.0, 5.0)).unwrap();
        let mid = 1.0;
        let n = grid.len();
        for j in 0..n {
            let lhs = grid.nodes[j] - mid;
            let rhs = mid - grid.nodes[n - 1 - j];
            assert!((lhs - rhs).abs() < 1e-13);
        }
    }
}
