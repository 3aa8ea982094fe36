//! Legendre polynomials of the first kind.
//!
//! Production evaluation goes through the stable three-term recurrence
//! (n+1) P_{n+1}(x) = (2n+1) x P_n(x) - n P_{n-1}(x). The explicit
//! binomial sum is kept as an independent route for cross-checking.

/// Evaluate P_n(x) by the three-term recurrence.
///
/// The argument is clamped to [-1, 1]; callers feed cosines that may
/// carry floating-point drift slightly past the boundary.
pub fn legendre_first_kind(degree: usize, x: f64) -> f64 {
    let x = x.clamp(-1.0, 1.0);
    if degree == 0 {
        return 1.0;
    }
    if degree == 1 {
        return x;
    }
    let mut p_prev = 1.0;
    let mut p_curr = x;
    for k in 1..degree {
        let p_next = ((2 * k + 1) as f64 * x * p_curr - k as f64 * p_prev) / (k + 1) as f64;
        p_prev = p_curr;
        p_curr = p_next;
    }
    p_curr
}

/// Evaluate P_0..P_max in one recurrence pass.
pub fn legendre_sequence(max_degree: usize, x: f64) -> Vec<f64> {
    let x = x.clamp(-1.0, 1.0);
    let mut out = Vec::with_capacity(max_degree + 1);
    out.push(1.0);
    if max_degree == 0 {
        return out;
    }
    out.push(x);
    for k in 1..max_degree {
        let next = ((2 * k + 1) as f64 * x * out[k] - k as f64 * out[k - 1]) / (k + 1) as f64;
        out.push(next);
    }
    out
}

/// Evaluate (P_k, P'_k) for k = 0..=max via the joint recurrence
/// (k+1) P'_{k+1} = (2k+1)(P_k + x P'_k) - k P'_{k-1}.
///
/// The joint form stays finite at x = +-1 where the closed-form
/// derivative expression degenerates.
pub fn legendre_sequence_with_deriv(max_degree: usize, x: f64) -> (Vec<f64>, Vec<f64>) {
    let x = x.clamp(-1.0, 1.0);
    let mut p = Vec::with_capacity(max_degree + 1);
    let mut dp = Vec::with_capacity(max_degree + 1);
    p.push(1.0);
    dp.push(0.0);
    if max_degree == 0 {
        return (p, dp);
    }
    p.push(x);
    dp.push(1.0);
    for k in 1..max_degree {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0) * x * p[k] - kf * p[k - 1]) / (kf + 1.0);
        let dnext = ((2.0 * kf + 1.0) * (p[k] + x * dp[k]) - kf * dp[k - 1]) / (kf + 1.0);
        p.push(next);
        dp.push(dnext);
    }
    (p, dp)
}

/// Explicit binomial-sum evaluation of P_n(x):
///
///   P_n(x) = 2^n sum_k x^k C(n,k) C((n+k-1)/2, n)
///
/// Every coefficient is assembled exactly in integer arithmetic
/// (the half-integer binomial numerators are products of integers
/// divided by 2^n, which cancels the leading 2^n), and the terms are
/// summed with Kahan compensation. Used as an oracle against the
/// recurrence; not a production path.
pub fn legendre_explicit_sum(degree: usize, x: f64) -> f64 {
    assert!(degree <= 20, "explicit sum oracle supports degree <= 20");
    let n = degree;
    let n_factorial: f64 = (1..=n).map(|i| i as f64).product::<f64>().max(1.0);
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for k in 0..=n {
        // C((n+k-1)/2, n) = prod_{i=0}^{n-1} (n+k-1-2i) / (2^n n!)
        let mut numerator: i128 = binomial(n, k);
        for i in 0..n {
            numerator *= (n + k) as i128 - 1 - 2 * i as i128;
        }
        let term = numerator as f64 / n_factorial * x.powi(k as i32);
        // Kahan summation
        let y = term - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    sum
}

fn binomial(n: usize, k: usize) -> i128 {
    let mut acc: i128 = 1;
    for i in 0..k.min(n - k) {
        acc = acc * (n - i) as i128 / (i + 1) as i128;
    }
    acc
}
