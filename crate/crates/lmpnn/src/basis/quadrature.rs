//! Gauss-Legendre quadrature and basis orthogonality checks.

use super::legendre::{legendre_sequence, legendre_sequence_with_deriv};
use super::BasisError;

/// Nodes and weights of the `order`-point Gauss-Legendre rule on [-1, 1].
///
/// Roots of P_order are found by Newton iteration from the Chebyshev-like
/// initial guesses cos(pi (i + 0.75)/(order + 0.5)); weights are
/// 2 / ((1 - x^2) P'_order(x)^2). Exact for polynomials of degree
/// <= 2*order - 1.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(order >= 1, "quadrature order must be >= 1");
    let mut nodes = vec![0.0; order];
    let mut weights = vec![0.0; order];
    for i in 0..order {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (order as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_sequence_with_deriv(order, x);
            let step = p[order] / dp[order];
            x -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_sequence_with_deriv(order, x);
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp[order] * dp[order]);
    }
    (nodes, weights)
}

/// Gauss-Legendre approximation of the inner product
/// integral_{-1}^{1} Q_i(x) Q_j(x) dx.
///
/// The integrand has degree i + j, so the rule is exact once
/// 2*order - 1 >= i + j; the stricter precondition order >= i + j + 1
/// is enforced so callers cannot sit on the exactness boundary.
pub fn orthogonality_residual(i: usize, j: usize, order: usize) -> Result<f64, BasisError> {
    let required = i + j + 1;
    if order < required {
        return Err(BasisError::InsufficientQuadratureOrder {
            order,
            i,
            j,
            required,
        });
    }
    let (nodes, weights) = gauss_legendre(order);
    let max_degree = i.max(j);
    let mut acc = 0.0;
    for (&x, &w) in nodes.iter().zip(weights.iter()) {
        let p = legendre_sequence(max_degree, x);
        acc += w * p[i] * p[j];
    }
    Ok(acc)
}
