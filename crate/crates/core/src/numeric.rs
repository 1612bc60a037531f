//! Small floating-point helpers shared across modules.

/// `x^a` for `x ≥ 0`, evaluated as `exp(a·ln x)` with `0^a = 0`.
#[inline]
pub fn pow_nonneg(x: f64, a: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        (a * x.ln()).exp()
    }
}

/// Euclidean norm.
pub fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Largest absolute coordinate difference.
pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}
