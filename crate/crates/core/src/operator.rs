//! The linear map `y -> sum_i y_i A_i` in packed coordinates.
//!
//! Each matrix is stored as its upper triangle restricted to the blocks of
//! the instance's [`BlockPartition`]; diagonal entries come first. Inner
//! products weight off-diagonal coordinates by two so that the packed dot
//! product equals `Tr(A B)`.

use nalgebra::{DMatrix, DVector, DVectorView};

use crate::error::Result;
use crate::instance::Instance;
use crate::linalg::{BlockPartition, SymmetricMatrix};

#[derive(Debug, Clone)]
pub struct SeriesOperator {
    dim: usize,
    coords: Vec<(usize, usize)>,
    diag_count: usize,
    /// `packed_len x n`; column `i` is the packed form of `A_i`.
    columns: DMatrix<f64>,
    blocks: BlockPartition,
    all_singletons: bool,
}

impl SeriesOperator {
    pub fn new(inst: &Instance) -> Self {
        let dim = inst.d();
        let blocks = BlockPartition::from_matrices(dim, inst.matrices());
        let mut coords: Vec<(usize, usize)> = (0..dim).map(|k| (k, k)).collect();
        let diag_count = dim;
        for block in blocks.blocks() {
            for (a, &i) in block.iter().enumerate() {
                for &j in &block[a + 1..] {
                    coords.push((i.min(j), i.max(j)));
                }
            }
        }
        let columns = DMatrix::from_fn(coords.len(), inst.n(), |p, i| {
            let (r, c) = coords[p];
            inst.matrix(i).get(r, c)
        });
        let all_singletons = blocks.largest_block() <= 1;
        SeriesOperator {
            dim,
            coords,
            diag_count,
            columns,
            blocks,
            all_singletons,
        }
    }

    pub fn n(&self) -> usize {
        self.columns.ncols()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn packed_len(&self) -> usize {
        self.coords.len()
    }

    pub fn blocks(&self) -> &BlockPartition {
        &self.blocks
    }

    /// Packed form of `A_i`.
    pub fn column(&self, i: usize) -> DVectorView<'_, f64> {
        self.columns.column(i)
    }

    /// Packed form of `sum_i y_i A_i`.
    pub fn apply(&self, y: &DVector<f64>) -> DVector<f64> {
        &self.columns * y
    }

    /// Packed form of `sum_i y_i A_i` over a subset of the matrices.
    pub fn apply_subset(&self, indices: &[usize], coeffs: &[f64]) -> DVector<f64> {
        let mut out = DVector::zeros(self.packed_len());
        for (&i, &c) in indices.iter().zip(coeffs) {
            out.axpy(c, &self.columns.column(i), 1.0);
        }
        out
    }

    /// `(Tr(A_i M))_i` for a packed symmetric `M`.
    pub fn adjoint(&self, packed: &DVector<f64>) -> DVector<f64> {
        let weighted = self.weighted(packed);
        self.columns.tr_mul(&weighted)
    }

    fn weighted(&self, packed: &DVector<f64>) -> DVector<f64> {
        let mut w = packed.clone();
        w.rows_mut(self.diag_count, self.packed_len() - self.diag_count)
            .scale_mut(2.0);
        w
    }

    /// Frobenius inner product of two packed matrices.
    pub fn inner(&self, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        let k = self.diag_count;
        let rest = self.packed_len() - k;
        a.rows(0, k).dot(&b.rows(0, k)) + 2.0 * a.rows(k, rest).dot(&b.rows(k, rest))
    }

    pub fn frobenius(&self, packed: &DVector<f64>) -> f64 {
        self.inner(packed, packed).sqrt()
    }

    /// The Gram matrix `G_ij = Tr(A_i A_j)`.
    pub fn gram(&self) -> DMatrix<f64> {
        let k = self.diag_count;
        let rest = self.packed_len() - k;
        let diag = self.columns.rows(0, k);
        let off = self.columns.rows(k, rest);
        let mut g = diag.tr_mul(&diag);
        g.gemm_tr(2.0, &off, &off, 1.0);
        SymmetricMatrix::symmetrize(g).into_matrix()
    }

    pub fn unpack(&self, packed: &DVector<f64>) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for (&(r, c), &v) in self.coords.iter().zip(packed.iter()) {
            m[(r, c)] = v;
            m[(c, r)] = v;
        }
        m
    }

    pub fn pack(&self, m: &DMatrix<f64>) -> DVector<f64> {
        DVector::from_iterator(self.packed_len(), self.coords.iter().map(|&(r, c)| m[(r, c)]))
    }

    /// Packed `v v^T`.
    pub fn pack_outer(&self, v: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.packed_len(), self.coords.iter().map(|&(r, c)| v[r] * v[c]))
    }

    /// `(v^T A_i v)_i`.
    pub fn quadratic_forms(&self, v: &DVector<f64>) -> DVector<f64> {
        self.adjoint(&self.pack_outer(v))
    }

    /// Spectral norm of a packed matrix.
    pub fn norm_packed(&self, packed: &DVector<f64>) -> f64 {
        if self.all_singletons {
            return packed.amax();
        }
        self.blocks.spectral_norm(&self.unpack(packed))
    }

    /// `||sum_i y_i A_i||_op`.
    pub fn norm_of(&self, y: &DVector<f64>) -> f64 {
        self.norm_packed(&self.apply(y))
    }

    /// Spectral norm and a unit vector attaining it.
    pub fn extremal_pair(&self, packed: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
        self.blocks.extremal_pair(&self.unpack(packed))
    }

    /// Frobenius projection of a packed matrix onto the operator-norm ball of radius `t`.
    pub fn clip_packed(&self, packed: &DVector<f64>, t: f64) -> Result<DVector<f64>> {
        if self.all_singletons {
            return Ok(packed.map(|v| v.clamp(-t, t)));
        }
        let clipped = self.blocks.clip(&self.unpack(packed), t)?;
        Ok(self.pack(&clipped))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{generate_block_diagonal, generate_low_rank_random, generate_lower_bound};
    use crate::linalg::{clip_eigenvalues, spectral_norm, standard_normal_vector};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn apply_matches_signed_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for inst in [
            generate_block_diagonal(5, 6, 2, 3).unwrap(),
            generate_low_rank_random(4, 5, 2, 3).unwrap(),
            generate_lower_bound(5).unwrap(),
        ] {
            let op = SeriesOperator::new(&inst);
            let y = standard_normal_vector(&mut rng, inst.n());
            let direct = inst.signed_sum(y.as_slice());
            assert!((op.unpack(&op.apply(&y)) - direct.as_matrix()).amax() < 1e-13);
            assert!((op.norm_of(&y) - spectral_norm(&direct)).abs() < 1e-12);
        }
    }

    #[test]
    fn adjoint_and_gram_use_trace_inner_product() {
        let inst = generate_block_diagonal(4, 6, 3, 5).unwrap();
        let op = SeriesOperator::new(&inst);
        let g = op.gram();
        for i in 0..4 {
            for j in 0..4 {
                let tr = inst.matrix(i).trace_product(inst.matrix(j));
                assert!((g[(i, j)] - tr).abs() < 1e-13);
            }
        }
        let m = op.apply(&DVector::from_vec(vec![0.3, -1.0, 2.0, 0.5]));
        let adj = op.adjoint(&m);
        let mm = SymmetricMatrix::from_matrix(op.unpack(&m)).unwrap();
        for i in 0..4 {
            assert!((adj[i] - inst.matrix(i).trace_product(&mm)).abs() < 1e-12);
        }
    }

    #[test]
    fn blockwise_clip_agrees_with_dense_clip() {
        let inst = generate_block_diagonal(3, 6, 2, 9).unwrap();
        let op = SeriesOperator::new(&inst);
        let packed = op.apply(&DVector::from_vec(vec![1.0, 1.0, 1.0]));
        let clipped = op.unpack(&op.clip_packed(&packed, 0.7).unwrap());
        let dense = clip_eigenvalues(&SymmetricMatrix::from_matrix(op.unpack(&packed)).unwrap(), 0.7).unwrap();
        assert!((clipped - dense.as_matrix()).amax() < 1e-12);
    }

    #[test]
    fn quadratic_forms_match_direct_evaluation() {
        let inst = generate_lower_bound(4).unwrap();
        let op = SeriesOperator::new(&inst);
        let v = DVector::from_vec(vec![0.5, -0.5, 0.5, 0.5]);
        let q = op.quadratic_forms(&v);
        for i in 0..4 {
            let direct = v.dot(&(inst.matrix(i).as_matrix() * &v));
            assert!((q[i] - direct).abs() < 1e-14);
        }
    }
}
