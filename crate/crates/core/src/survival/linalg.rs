use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::SurvivalError;

/// Relative eigenvalue floor below which an information matrix is treated
/// as singular.
const RCOND: f64 = 1e-10;

/// Inverse of a symmetric positive-definite matrix, or the covariates
/// spanning its (near) null space.
pub(crate) fn spd_inverse(m: &DMatrix<f64>, names: &[String]) -> Result<DMatrix<f64>, SurvivalError> {
    let eig = SymmetricEigen::new(m.clone());
    let largest = eig.eigenvalues.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let floor = RCOND * largest.max(1.0);
    let weak: Vec<usize> = (0..eig.eigenvalues.len()).filter(|&k| eig.eigenvalues[k] <= floor).collect();
    if !weak.is_empty() {
        let mut involved: Vec<String> = Vec::new();
        for k in weak {
            let v = eig.eigenvectors.column(k);
            for (j, name) in names.iter().enumerate() {
                if v[j].abs() > 0.1 && !involved.contains(name) {
                    involved.push(name.clone());
                }
            }
        }
        return Err(SurvivalError::Singular { covariates: involved });
    }
    match m.clone().cholesky() {
        Some(c) => Ok(c.inverse()),
        None => Err(SurvivalError::Singular { covariates: names.to_vec() }),
    }
}

pub(crate) fn quad(v: &DVector<f64>, m: &DMatrix<f64>) -> f64 {
    (v.transpose() * m * v)[(0, 0)]
}
