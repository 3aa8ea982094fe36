//! Legendre rational functions on [0, inf).
//!
//! R_n(x) = sqrt(2)/(x+1) * P_n((x-1)/(x+1)). The recurrence
//!
//!   R_{n+1}(x) = (2n+1)/(n+1) * (x-1)/(x+1) * R_n(x) - n/(n+1) * R_{n-1}(x)
//!
//! is the production path; the direct Moebius-mapped form is the
//! independent route the recurrence is checked against.

use super::legendre::{legendre_first_kind, legendre_sequence_with_deriv};
use super::BasisError;

const SQRT_2: f64 = std::f64::consts::SQRT_2;

/// Evaluate R_n(x) by the rational recurrence (production path).
pub fn legendre_rational(degree: usize, x: f64) -> Result<f64, BasisError> {
    if x < 0.0 {
        return Err(BasisError::NegativeArgument { x });
    }
    let t = (x - 1.0) / (x + 1.0);
    let r0 = SQRT_2 / (x + 1.0);
    if degree == 0 {
        return Ok(r0);
    }
    let r1 = r0 * t;
    if degree == 1 {
        return Ok(r1);
    }
    let mut prev = r0;
    let mut curr = r1;
    for n in 1..degree {
        let nf = n as f64;
        let next = (2.0 * nf + 1.0) / (nf + 1.0) * t * curr - nf / (nf + 1.0) * prev;
        prev = curr;
        curr = next;
    }
    Ok(curr)
}

/// Evaluate R_n(x) directly from the defining form (oracle route).
pub fn legendre_rational_direct(degree: usize, x: f64) -> Result<f64, BasisError> {
    if x < 0.0 {
        return Err(BasisError::NegativeArgument { x });
    }
    let t = (x - 1.0) / (x + 1.0);
    Ok(SQRT_2 / (x + 1.0) * legendre_first_kind(degree, t))
}

/// Evaluate R_0..R_max in one pass.
pub fn rational_sequence(max_degree: usize, x: f64) -> Result<Vec<f64>, BasisError> {
    if x < 0.0 {
        return Err(BasisError::NegativeArgument { x });
    }
    let t = (x - 1.0) / (x + 1.0);
    let mut out = Vec::with_capacity(max_degree + 1);
    out.push(SQRT_2 / (x + 1.0));
    if max_degree == 0 {
        return Ok(out);
    }
    out.push(out[0] * t);
    for n in 1..max_degree {
        let nf = n as f64;
        let next = (2.0 * nf + 1.0) / (nf + 1.0) * t * out[n] - nf / (nf + 1.0) * out[n - 1];
        out.push(next);
    }
    Ok(out)
}

/// Evaluate (R_k, dR_k/dx) for k = 0..=max.
///
/// With t = (x-1)/(x+1):
///   dR_k/dx = -sqrt(2) P_k(t)/(x+1)^2 + 2 sqrt(2) P'_k(t)/(x+1)^3
pub fn rational_sequence_with_deriv(
    max_degree: usize,
    x: f64,
) -> Result<(Vec<f64>, Vec<f64>), BasisError> {
    if x < 0.0 {
        return Err(BasisError::NegativeArgument { x });
    }
    let t = (x - 1.0) / (x + 1.0);
    let (p, dp) = legendre_sequence_with_deriv(max_degree, t);
    let inv = 1.0 / (x + 1.0);
    let mut values = Vec::with_capacity(max_degree + 1);
    let mut derivs = Vec::with_capacity(max_degree + 1);
    for k in 0..=max_degree {
        values.push(SQRT_2 * inv * p[k]);
        derivs.push(-SQRT_2 * inv * inv * p[k] + 2.0 * SQRT_2 * inv * inv * inv * dp[k]);
    }
    Ok((values, derivs))
}
