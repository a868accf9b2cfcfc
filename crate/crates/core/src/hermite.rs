//! Normalized Hermite functions and the exact ladder algebra acting on
//! coefficient sequences.
//!
//! `Φ_n(x) = (2^n n! √π)^{-1/2} H_n(x) e^{-x²/2}`. Every operator here maps a
//! finite coefficient vector to a finite coefficient vector, so no truncation
//! error is introduced: the output is simply longer than the input.

use std::f64::consts::PI;

const RESCALE: f64 = 1e150;

/// Fills `out[n] = Φ_n(x)` for `n < out.len()`.
///
/// The three-term recurrence is run on unweighted values with a running log
/// scale, and the Gaussian weight is applied through that scale, so the
/// result neither overflows nor underflows prematurely for large `|x|`.
pub fn hermite_functions(x: f64, out: &mut [f64]) {
    hermite_functions_weighted(x, 0.0, out);
}

/// Fills `out[n] = e^{log_weight} Φ_n(x)`; the weight is folded into the
/// running scale, so `e^{log_weight}` itself may overflow.
pub fn hermite_functions_weighted(x: f64, log_weight: f64, out: &mut [f64]) {
    let len = out.len();
    if len == 0 {
        return;
    }
    let mut log_scale = log_weight - 0.5 * x * x;
    let mut factor = log_scale.exp();
    let mut prev = 0.0;
    let mut cur = PI.powf(-0.25);
    out[0] = cur * factor;
    for n in 0..len - 1 {
        let nf = n as f64;
        let next = (2.0 / (nf + 1.0)).sqrt() * x * cur - (nf / (nf + 1.0)).sqrt() * prev;
        prev = cur;
        cur = next;
        if cur.abs() > RESCALE {
            prev /= RESCALE;
            cur /= RESCALE;
            log_scale += RESCALE.ln();
            factor = log_scale.exp();
        }
        out[n + 1] = cur * factor;
    }
}

/// `Φ_n(x)` for a single index.
pub fn hermite_function(n: usize, x: f64) -> f64 {
    let mut buf = vec![0.0; n + 1];
    hermite_functions(x, &mut buf);
    buf[n]
}

/// Evaluates `Σ c_n Φ_n(x)`.
pub fn hermite_series(coeffs: &[f64], x: f64) -> f64 {
    let mut buf = vec![0.0; coeffs.len()];
    hermite_functions(x, &mut buf);
    coeffs.iter().zip(&buf).map(|(c, p)| c * p).sum()
}

/// Multiplication by `x`: `xΦ_n = √((n+1)/2) Φ_{n+1} + √(n/2) Φ_{n-1}`.
pub fn mul_x(coeffs: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; coeffs.len() + 1];
    for (n, &c) in coeffs.iter().enumerate() {
        if c == 0.0 {
            continue;
        }
        let nf = n as f64;
        out[n + 1] += c * ((nf + 1.0) / 2.0).sqrt();
        if n > 0 {
            out[n - 1] += c * (nf / 2.0).sqrt();
        }
    }
    out
}

/// Multiplication by `⟨x⟩² = 1 + x²`.
pub fn mul_bracket_sq(coeffs: &[f64]) -> Vec<f64> {
    let mut out = mul_x(&mul_x(coeffs));
    for (o, c) in out.iter_mut().zip(coeffs) {
        *o += c;
    }
    out
}

/// First derivative: `∂Φ_n = √(n/2) Φ_{n-1} − √((n+1)/2) Φ_{n+1}`.
pub fn derivative(coeffs: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; coeffs.len() + 1];
    for (n, &c) in coeffs.iter().enumerate() {
        if c == 0.0 {
            continue;
        }
        let nf = n as f64;
        out[n + 1] -= c * ((nf + 1.0) / 2.0).sqrt();
        if n > 0 {
            out[n - 1] += c * (nf / 2.0).sqrt();
        }
    }
    out
}

/// `β`-fold derivative.
pub fn derivative_n(coeffs: &[f64], order: usize) -> Vec<f64> {
    let mut v = coeffs.to_vec();
    for _ in 0..order {
        v = derivative(&v);
    }
    v
}

/// Applies `x^α` exactly.
pub fn mul_x_pow(coeffs: &[f64], alpha: usize) -> Vec<f64> {
    let mut v = coeffs.to_vec();
    for _ in 0..alpha {
        v = mul_x(&v);
    }
    v
}

/// Applies `(1 + x²)^p` exactly.
pub fn mul_bracket_pow(coeffs: &[f64], p: usize) -> Vec<f64> {
    let mut v = coeffs.to_vec();
    for _ in 0..p {
        v = mul_bracket_sq(&v);
    }
    v
}

/// Inner product of two coefficient sequences of possibly different length.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `‖⟨x⟩^p f‖²`, computed as `⟨A^a f, A^b f⟩` with `A = 1 + x²`, `a + b = p`.
pub fn bracket_norm_sq(coeffs: &[f64], p: usize) -> f64 {
    let lo = mul_bracket_pow(coeffs, p / 2);
    let hi = if p % 2 == 0 {
        lo.clone()
    } else {
        mul_bracket_sq(&lo)
    };
    dot(&lo, &hi)
}

/// `‖x^α f‖²` (exact).
pub fn monomial_norm_sq(coeffs: &[f64], alpha: usize) -> f64 {
    let v = mul_x_pow(coeffs, alpha);
    dot(&v, &v)
}
