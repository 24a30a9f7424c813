//! Random symmetric positive-definite matrices with a bounded condition number.

use nalgebra::DMatrix;
use rand::Rng;

/// Random orthogonal `d x d` matrix from the QR factor of a uniform matrix.
pub fn random_orthogonal(rng: &mut impl Rng, d: usize) -> DMatrix<f64> {
    let m = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
    m.qr().q()
}

/// `Q diag(λ) Qᵀ` with `λ` log-uniform in `[1, max_condition]`; the extreme
/// eigenvalues are pinned so the condition number is exactly `max_condition`
/// when `d >= 2`.
pub fn random_spd(rng: &mut impl Rng, d: usize, max_condition: f64) -> DMatrix<f64> {
    let q = random_orthogonal(rng, d);
    let span = max_condition.log10();
    let mut lambda: Vec<f64> = (0..d).map(|_| 10f64.powf(rng.random_range(0.0..=span))).collect();
    if d >= 2 {
        lambda[0] = 1.0;
        lambda[d - 1] = max_condition;
    }
    let m = &q * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(lambda)) * q.transpose();
    (&m + m.transpose()) * 0.5
}

/// Eigenvalue ratio `λmax / λmin` of a symmetric matrix.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let e = m.clone().symmetric_eigen().eigenvalues;
    e.max() / e.min()
}
