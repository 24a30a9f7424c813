use nalgebra::{DMatrix, SymmetricEigen};

use super::{FidError, PSD_TOLERANCE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SqrtMethod {
    /// Eigendecomposition of the symmetric `Σa^½ Σb Σa^½`.
    #[default]
    SymmetricEigen,
    /// Coupled Newton–Schulz iteration, independent of the eigensolver.
    NewtonSchulz,
}

const EIGEN_MAX_ITER: usize = 10_000;

pub(super) fn eigen(m: &DMatrix<f64>) -> Result<SymmetricEigen<f64, nalgebra::Dyn>, FidError> {
    SymmetricEigen::try_new(m.clone(), f64::EPSILON, EIGEN_MAX_ITER)
        .ok_or_else(|| FidError::NumericalFailure("symmetric eigensolver did not converge".into()))
}

/// Clamps near-zero eigenvalues: anything below `n·ε·λmax` is rounding
/// noise, and negatives past [`PSD_TOLERANCE`] are rejected.
fn clamp_spectrum(values: &[f64]) -> Result<Vec<f64>, FidError> {
    let max = values.iter().cloned().fold(0.0_f64, f64::max);
    let floor = values.len() as f64 * f64::EPSILON * max;
    values
        .iter()
        .map(|&v| {
            if v < PSD_TOLERANCE {
                Err(FidError::NotPositiveSemidefinite { min_eigenvalue: v })
            } else if v <= floor {
                Ok(0.0)
            } else {
                Ok(v)
            }
        })
        .collect()
}

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Principal square root of a symmetric PSD matrix.
pub fn sym_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>, FidError> {
    let eig = eigen(&symmetrize(m))?;
    let roots: Vec<f64> = clamp_spectrum(eig.eigenvalues.as_slice())?
        .into_iter()
        .map(f64::sqrt)
        .collect();
    let q = &eig.eigenvectors;
    let scaled = q * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(roots));
    Ok(symmetrize(&(scaled * q.transpose())))
}

/// `Tr((Σa Σb)^½)` for symmetric PSD inputs.
pub fn trace_sqrt_product(a: &DMatrix<f64>, b: &DMatrix<f64>, method: SqrtMethod) -> Result<f64, FidError> {
    if a.nrows() == 0 {
        return Ok(0.0);
    }
    match method {
        SqrtMethod::SymmetricEigen => {
            let s = sym_sqrt(a)?;
            let m = symmetrize(&(&s * b * &s));
            let eig = eigen(&m)?;
            let vals = clamp_spectrum(eig.eigenvalues.as_slice())?;
            let roots: Vec<f64> = vals.into_iter().map(f64::sqrt).collect();
            Ok(super::pairwise_sum(&roots))
        }
        SqrtMethod::NewtonSchulz => {
            // Lᵀ Σb L is symmetric and similar to Σa Σb when Σa = L Lᵀ;
            // singular Σa falls back to the raw product.
            let target = match nalgebra::Cholesky::new(symmetrize(a)) {
                Some(ch) => {
                    let l = ch.l();
                    symmetrize(&(l.transpose() * b * &l))
                }
                None => a * b,
            };
            Ok(sqrtm_newton_schulz(&target, 500)?.trace())
        }
    }
}

/// Square root of a matrix whose eigenvalues are real and non-negative,
/// by the coupled Newton–Schulz iteration
/// `T = (3I − Z Y)/2, Y ← Y T, Z ← T Z` on `A / ‖A‖_F`.
pub fn sqrtm_newton_schulz(a: &DMatrix<f64>, max_iter: usize) -> Result<DMatrix<f64>, FidError> {
    let n = a.nrows();
    let norm = a.norm();
    if norm == 0.0 {
        return Ok(DMatrix::zeros(n, n));
    }
    let eye = DMatrix::<f64>::identity(n, n);
    let mut y = a / norm;
    let mut z = eye.clone();
    for _ in 0..max_iter {
        let t = (&eye * 3.0 - &z * &y) * 0.5;
        let next_y = &y * &t;
        z = &t * &z;
        let delta = (&next_y - &y).norm();
        y = next_y;
        if !y.iter().all(|v| v.is_finite()) {
            return Err(FidError::NumericalFailure("Newton–Schulz iteration diverged".into()));
        }
        if delta <= 1e-15 * y.norm() {
            break;
        }
    }
    Ok(y * norm.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sym_sqrt_squares_back() {
        let m = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0]);
        let s = sym_sqrt(&m).unwrap();
        assert!((&s * &s - &m).amax() < 1e-12);
    }

    #[test]
    fn newton_schulz_on_nonsymmetric_product() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let b = DMatrix::from_row_slice(2, 2, &[1.0, -0.3, -0.3, 3.0]);
        let p = &a * &b;
        let r = sqrtm_newton_schulz(&p, 200).unwrap();
        assert!((&r * &r - &p).amax() < 1e-10);
        let t_eig = trace_sqrt_product(&a, &b, SqrtMethod::SymmetricEigen).unwrap();
        let t_ns = trace_sqrt_product(&a, &b, SqrtMethod::NewtonSchulz).unwrap();
        assert!((t_eig - t_ns).abs() < 1e-12, "{t_eig} vs {t_ns}");
        assert!((r.trace() - t_eig).abs() < 1e-10);
    }

    #[test]
    fn singular_inputs() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let t = trace_sqrt_product(&a, &a, SqrtMethod::SymmetricEigen).unwrap();
        // (a a)^½ = a for a PSD projector-like matrix: trace 2
        assert!((t - 2.0).abs() < 1e-12);
        let t_ns = trace_sqrt_product(&a, &a, SqrtMethod::NewtonSchulz).unwrap();
        assert!((t_ns - 2.0).abs() < 1e-9, "{t_ns}");
        let z = DMatrix::zeros(3, 3);
        assert_eq!(trace_sqrt_product(&z, &z, SqrtMethod::NewtonSchulz).unwrap(), 0.0);
    }
}
