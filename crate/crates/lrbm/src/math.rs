//! Small numeric helpers used throughout the crate.

use nalgebra::DMatrix;

/// Numerically stable logistic function.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable `log(1 + exp(x))`, computed as
/// `max(x, 0) + log1p(exp(-|x|))` so neither branch overflows.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// `log(sum(exp(xs)))` guarded against overflow by shifting by the maximum.
/// Empty input yields negative infinity (log of an empty sum).
pub fn logsumexp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    let s: f64 = xs.iter().map(|&x| (x - m).exp()).sum();
    m + s.ln()
}

/// Largest (signed) eigenvalue of a symmetric matrix.
///
/// Panics if the matrix is not square; symmetry is the caller's contract.
pub fn lambda_max_symmetric(m: &DMatrix<f64>) -> f64 {
    assert_eq!(m.nrows(), m.ncols(), "lambda_max needs a square matrix");
    if m.nrows() == 0 {
        return 0.0;
    }
    let eig = m.clone().symmetric_eigen();
    eig.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// SplitMix64 step, used to derive independent seeds from a master seed.
/// Stream indices give reproducible, well-separated substreams.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    let mut z = master
        .wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(stream.wrapping_add(1)));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
