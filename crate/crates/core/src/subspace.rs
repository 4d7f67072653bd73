//! The coefficient subspace `H` on which the Gaussian series has small
//! covariance norm.
//!
//! If `u_j` is a Gram eigenvector with eigenvalue `lambda_j`, the matching
//! covariance eigenvector is `vec(V_j)` with `V_j = lambda_j^{-1/2} sum_i (u_j)_i A_i`,
//! and `Tr(A_i V_j) = sqrt(lambda_j) (u_j)_i`. The constraints
//! `sum_i y_i Tr(A_i V_j) = 0` are therefore just `<y, u_j> = 0`, and `H` is
//! spanned by the remaining Gram eigenvectors.

use nalgebra::DMatrix;

use crate::error::{invalid, Result};
use crate::instance::Instance;
use crate::linalg::{spectral_norm, SubspaceBasis, SymmetricMatrix};
use crate::params::{gram_matrix, GramMatrix};

/// Eigenvalues within this distance of the threshold count as not exceeding it.
pub const THRESHOLD_TOLERANCE: f64 = 1e-10;

/// Excludes every Gram eigenvector whose eigenvalue is strictly above `delta_sq`.
pub fn bad_subspace(gram: &GramMatrix, delta_sq: f64) -> Result<SubspaceBasis> {
    if !(delta_sq > 0.0 && delta_sq.is_finite()) {
        return Err(invalid(format!("threshold must be positive, got {delta_sq}")));
    }
    let n = gram.n();
    let k = gram
        .eigen
        .eigenvalues
        .iter()
        .filter(|&&l| l > delta_sq + THRESHOLD_TOLERANCE)
        .count();
    Ok(SubspaceBasis {
        ambient_dim: n,
        basis: gram.eigen.eigenvectors.columns(k, n - k).into_owned(),
        constraint_count: k,
        delta_sq: Some(delta_sq),
    })
}

/// Gram matrix of the restricted series `B_j = sum_i (b_j)_i A_i`, i.e. `P^T G P`.
pub fn restricted_gram(gram: &GramMatrix, basis: &SubspaceBasis) -> DMatrix<f64> {
    basis.basis.tr_mul(&(&gram.matrix * &basis.basis))
}

/// `v(Y)` for `Y = sum_j h_j B_j` given a precomputed Gram matrix.
pub fn restricted_v_from_gram(gram: &GramMatrix, basis: &SubspaceBasis) -> Result<f64> {
    if basis.ambient_dim != gram.n() {
        return Err(invalid("basis and Gram matrix disagree on n"));
    }
    if basis.dim() == 0 {
        return Ok(0.0);
    }
    let g = SymmetricMatrix::symmetrize(restricted_gram(gram, basis));
    Ok(spectral_norm(&g).sqrt())
}

/// `v(Y)` for the series restricted to `basis`.
pub fn restricted_v_param(inst: &Instance, basis: &SubspaceBasis) -> Result<f64> {
    if basis.ambient_dim != inst.n() {
        return Err(invalid(format!(
            "basis lives in R^{} but the instance has n = {}",
            basis.ambient_dim,
            inst.n()
        )));
    }
    if basis.dim() == 0 {
        return Ok(0.0);
    }
    restricted_v_from_gram(&gram_matrix(inst)?, basis)
}

/// The matrices `B_j = sum_i (b_j)_i A_i` of the restricted series.
pub fn restricted_series(inst: &Instance, basis: &SubspaceBasis) -> Vec<SymmetricMatrix> {
    basis
        .basis
        .column_iter()
        .map(|b| inst.signed_sum(b.as_slice()))
        .collect()
}

/// `sigma(Y) = ||sum_j B_j^2||_op^{1/2}`.
pub fn restricted_sigma(inst: &Instance, basis: &SubspaceBasis) -> f64 {
    let mut acc = SymmetricMatrix::zeros(inst.d());
    for b in restricted_series(inst, basis) {
        acc.add_scaled(&b.square(), 1.0);
    }
    spectral_norm(&acc).sqrt()
}
