use nalgebra::SymmetricEigen;

use super::{fix_gauge, residual_norm, EigenSolution};
use crate::error::{Error, Result};
use crate::model::SparseOperator;

/// Full dense diagonalization; the reference path for small dimensions.
pub fn dense_lowest_eigenpairs(h: &SparseOperator, k: usize, tol: f64) -> Result<EigenSolution> {
    super::check_request(h, k, tol)?;
    let eig = SymmetricEigen::new(h.to_dense());
    let mut order: Vec<usize> = (0..h.dim()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let mut eigenvalues = Vec::with_capacity(k);
    let mut eigenvectors = Vec::with_capacity(k);
    let mut residuals = Vec::with_capacity(k);
    for &idx in order.iter().take(k) {
        let lambda = eig.eigenvalues[idx];
        let mut v: Vec<f64> = eig.eigenvectors.column(idx).iter().copied().collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= norm);
        fix_gauge(&mut v);
        residuals.push(residual_norm(h, &v, lambda));
        eigenvalues.push(lambda);
        eigenvectors.push(v);
    }
    let worst = residuals.iter().copied().fold(0.0, f64::max);
    let bound = super::residual_bound(h, tol);
    if !(worst <= bound) {
        return Err(Error::NotConverged {
            best_residual: worst,
            tol: bound,
        });
    }
    Ok(EigenSolution {
        eigenvalues,
        eigenvectors,
        residuals,
        n_tr_used: super::n_tr_of(h.dim()),
    })
}
