//! Central finite differences, independent of the tape.

/// Gradient of `f` at `x` by central differences with step `eps`.
/// Evaluates `f` twice per coordinate on perturbed copies.
pub fn central_difference<F: FnMut(&[f64]) -> f64>(f: &mut F, x: &[f64], eps: f64) -> Vec<f64> {
    let mut grad = vec![0.0; x.len()];
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        probe[i] = x[i] + eps;
        let hi = f(&probe);
        probe[i] = x[i] - eps;
        let lo = f(&probe);
        probe[i] = x[i];
        grad[i] = (hi - lo) / (2.0 * eps);
    }
    grad
}

/// Relative error with a floor for near-zero pairs:
/// |a - b| / max(|a|, |b|, floor).
pub fn relative_error(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}
