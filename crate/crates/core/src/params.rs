//! Concentration parameters of the Gaussian series `X = sum_i g_i A_i`.
//!
//! `Cov(X)` is the `d^2 x d^2` matrix `sum_i vec(A_i) vec(A_i)^T`; it shares
//! its nonzero spectrum with the `n x n` Gram matrix `G_ij = Tr(A_i A_j)`,
//! which is what gets computed here.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::instance::Instance;
use crate::linalg::{spectral_norm, symmetric_eigen, BlockPartition, EigenDecomposition, SymmetricMatrix};
use crate::operator::SeriesOperator;

/// Default working constant for [`bbvh_bound`]. Empirical, not a proven value.
pub const DEFAULT_BBVH_CONSTANT: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationParams {
    /// `||sum_i A_i^2||_op^{1/2}`.
    pub sigma: f64,
    /// `||Cov(X)||_op^{1/2}`.
    pub v: f64,
    /// `sum_i ||A_i||_F^2`.
    pub frobenius_budget: f64,
    /// `sqrt(frobenius_budget / n)`.
    pub f: f64,
    pub n: usize,
    pub d: usize,
}

impl ConcentrationParams {
    pub fn compute(inst: &Instance) -> Result<Self> {
        let gram = gram_matrix(inst)?;
        Ok(Self::from_parts(inst, sigma_param(inst), &gram))
    }

    pub fn from_parts(inst: &Instance, sigma: f64, gram: &GramMatrix) -> Self {
        let budget = gram.trace();
        ConcentrationParams {
            sigma,
            v: gram.top_eigenvalue().max(0.0).sqrt(),
            frobenius_budget: budget,
            f: (budget / inst.n() as f64).sqrt(),
            n: inst.n(),
            d: inst.d(),
        }
    }

    /// Every quantity scales linearly when all matrices are multiplied by `t >= 0`.
    pub fn scaled(&self, t: f64) -> Self {
        ConcentrationParams {
            sigma: self.sigma * t,
            v: self.v * t,
            frobenius_budget: self.frobenius_budget * t * t,
            f: self.f * t,
            ..*self
        }
    }
}

/// `Tr(A_i A_j)` with its eigendecomposition.
#[derive(Debug, Clone)]
pub struct GramMatrix {
    pub matrix: DMatrix<f64>,
    pub eigen: EigenDecomposition,
}

impl GramMatrix {
    pub fn from_matrix(matrix: DMatrix<f64>) -> Result<Self> {
        let eigen = symmetric_eigen(&SymmetricMatrix::symmetrize(matrix.clone()))?;
        Ok(GramMatrix { matrix, eigen })
    }

    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace()
    }

    pub fn top_eigenvalue(&self) -> f64 {
        if self.n() == 0 {
            0.0
        } else {
            self.eigen.eigenvalues[0]
        }
    }

    /// Gram matrix of the sub-instance on `indices`.
    pub fn principal(&self, indices: &[usize]) -> Result<GramMatrix> {
        let k = indices.len();
        GramMatrix::from_matrix(DMatrix::from_fn(k, k, |r, c| self.matrix[(indices[r], indices[c])]))
    }
}

pub fn gram_matrix(inst: &Instance) -> Result<GramMatrix> {
    GramMatrix::from_matrix(SeriesOperator::new(inst).gram())
}

/// `sum_i A_i^2`, computed block by block.
pub fn sum_of_squares(inst: &Instance) -> SymmetricMatrix {
    let d = inst.d();
    let blocks = BlockPartition::from_matrices(d, inst.matrices());
    let mut acc = DMatrix::zeros(d, d);
    if blocks.is_single() {
        for m in inst.matrices() {
            acc.gemm(1.0, m.as_matrix(), m.as_matrix(), 1.0);
        }
        return SymmetricMatrix::symmetrize(acc);
    }
    for idx in blocks.blocks() {
        let b = idx.len();
        if b == 1 {
            let k = idx[0];
            acc[(k, k)] = inst.matrices().iter().map(|m| m.get(k, k).powi(2)).sum();
            continue;
        }
        let mut sub_acc = DMatrix::zeros(b, b);
        for m in inst.matrices() {
            let sub = DMatrix::from_fn(b, b, |r, c| m.get(idx[r], idx[c]));
            sub_acc.gemm(1.0, &sub, &sub, 1.0);
        }
        for r in 0..b {
            for c in 0..b {
                acc[(idx[r], idx[c])] = sub_acc[(r, c)];
            }
        }
    }
    SymmetricMatrix::symmetrize(acc)
}

pub fn sigma_param(inst: &Instance) -> f64 {
    spectral_norm(&sum_of_squares(inst)).sqrt()
}

pub fn v_param(inst: &Instance) -> Result<f64> {
    Ok(gram_matrix(inst)?.top_eigenvalue().max(0.0).sqrt())
}

fn require_log_dimension(d: usize) -> Result<f64> {
    if d < 2 {
        return Err(invalid(format!("bound needs d >= 2 so that ln d > 0, got d = {d}")));
    }
    Ok((d as f64).ln())
}

/// `C (sigma + (ln d)^{3/4} sqrt(sigma v))`.
pub fn bbvh_bound(params: &ConcentrationParams, c: f64) -> Result<f64> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(invalid(format!("constant must be positive, got {c}")));
    }
    let ln_d = require_log_dimension(params.d)?;
    Ok(bbvh_expression(params.sigma, params.v, ln_d, c))
}

pub(crate) fn bbvh_expression(sigma: f64, second: f64, ln_d: f64, c: f64) -> f64 {
    c * (sigma + ln_d.powf(0.75) * (sigma * second).sqrt())
}

/// Matrix-Gaussian expectation bound `sigma sqrt(2 ln(2d))`.
pub fn chernoff_bound(params: &ConcentrationParams) -> Result<f64> {
    require_log_dimension(params.d)?;
    Ok(params.sigma * (2.0 * (2.0 * params.d as f64).ln()).sqrt())
}
