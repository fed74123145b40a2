//! Matrix exponential by scaling and squaring with a Taylor core.

use nalgebra::DMatrix;

/// `exp(s·A)`. Returns the identity exactly when `s·A` is zero.
pub fn matrix_exponential(a: &DMatrix<f64>, s: f64) -> DMatrix<f64> {
    assert!(a.is_square(), "matrix exponential needs a square matrix");
    let n = a.nrows();
    let m = a * s;
    let norm = m.iter().map(|v| v.abs()).fold(0.0, f64::max) * n as f64;
    if norm == 0.0 {
        return DMatrix::identity(n, n);
    }

    // Bring the 1-norm bound under 1/2, then sum until terms drop below eps.
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as u32
    } else {
        0
    };
    let scaled = m / 2f64.powi(squarings as i32);

    let mut result = DMatrix::<f64>::identity(n, n);
    let mut term = DMatrix::<f64>::identity(n, n);
    for k in 1..=30 {
        term = &term * &scaled / k as f64;
        let size = term.iter().map(|v| v.abs()).fold(0.0, f64::max);
        result += &term;
        if size <= f64::EPSILON * 1e-3 {
            break;
        }
    }
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}
