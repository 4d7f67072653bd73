//! Dense symmetric linear algebra shared by the rest of the crate.
//!
//! Matrices are small enough (a few hundred rows) that dense storage and
//! nalgebra's Householder/QR eigensolver are the right tools. Two exact
//! shortcuts matter for speed: diagonal inputs never reach the eigensolver,
//! and [`BlockPartition`] splits block-diagonal matrices into independent
//! problems.

use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Error, Result};

/// Threshold, relative to the largest singular value, below which a
/// constraint direction is considered dependent.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// A dense real symmetric `d x d` matrix.
///
/// Construction symmetrizes the input as `(A + A^T) / 2`, so the stored
/// entries are exactly mirror images of each other.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix(DMatrix<f64>);

impl SymmetricMatrix {
    /// Builds a matrix from `d * d` row-major entries.
    pub fn from_row_major(dim: usize, entries: &[f64]) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("matrix dimension must be positive"));
        }
        if entries.len() != dim * dim {
            return Err(invalid(format!(
                "expected {} entries for a {dim}x{dim} matrix, got {}",
                dim * dim,
                entries.len()
            )));
        }
        Self::from_matrix(DMatrix::from_row_slice(dim, dim, entries))
    }

    pub fn from_matrix(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() || m.nrows() == 0 {
            return Err(invalid(format!(
                "expected a non-empty square matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if let Some(pos) = m.iter().position(|v| !v.is_finite()) {
            let d = m.nrows();
            return Err(invalid(format!("non-finite entry at row {} col {}", pos % d, pos / d)));
        }
        Ok(Self::symmetrize(m))
    }

    /// Symmetrizes without checking finiteness. Used on internal products
    /// that are symmetric up to rounding.
    pub(crate) fn symmetrize(mut m: DMatrix<f64>) -> Self {
        let d = m.nrows();
        for j in 0..d {
            for i in (j + 1)..d {
                let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
                m[(i, j)] = avg;
                m[(j, i)] = avg;
            }
        }
        SymmetricMatrix(m)
    }

    pub fn zeros(dim: usize) -> Self {
        SymmetricMatrix(DMatrix::zeros(dim, dim))
    }

    pub fn identity(dim: usize) -> Self {
        SymmetricMatrix(DMatrix::identity(dim, dim))
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        Self::from_matrix(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    /// `scale * v v^T`.
    pub fn outer(v: &DVector<f64>, scale: f64) -> Result<Self> {
        Self::from_matrix(v * v.transpose() * scale)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.0[(row, col)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    /// Entries in row-major order (identical to column-major by symmetry).
    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }

    pub fn is_diagonal(&self) -> bool {
        let d = self.dim();
        (0..d).all(|j| (0..d).all(|i| i == j || self.0[(i, j)] == 0.0))
    }

    pub fn scaled(&self, factor: f64) -> Self {
        SymmetricMatrix(&self.0 * factor)
    }

    /// `self += factor * other`.
    pub fn add_scaled(&mut self, other: &SymmetricMatrix, factor: f64) {
        debug_assert_eq!(self.dim(), other.dim());
        self.0 += &other.0 * factor;
    }

    /// `Tr(self * other)`, the Frobenius inner product of two symmetric matrices.
    pub fn trace_product(&self, other: &SymmetricMatrix) -> f64 {
        self.0.dot(&other.0)
    }

    pub fn square(&self) -> SymmetricMatrix {
        SymmetricMatrix::symmetrize(&self.0 * &self.0)
    }

    /// `Q^T A Q` for a `d x m` matrix `Q`.
    pub fn congruence(&self, q: &DMatrix<f64>) -> SymmetricMatrix {
        SymmetricMatrix::symmetrize(q.tr_mul(&(&self.0 * q)))
    }

    /// Leading principal `k x k` block.
    pub fn leading_block(&self, k: usize) -> SymmetricMatrix {
        SymmetricMatrix(self.0.view((0, 0), (k, k)).into_owned())
    }
}

impl TryFrom<DMatrix<f64>> for SymmetricMatrix {
    type Error = Error;

    fn try_from(m: DMatrix<f64>) -> Result<Self> {
        SymmetricMatrix::from_matrix(m)
    }
}

impl From<SymmetricMatrix> for DMatrix<f64> {
    fn from(m: SymmetricMatrix) -> Self {
        m.0
    }
}

/// Eigenvalues sorted descending with matching eigenvector columns.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub eigenvalues: DVector<f64>,
    pub eigenvectors: DMatrix<f64>,
}

impl EigenDecomposition {
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let scaled = &self.eigenvectors * DMatrix::from_diagonal(&self.eigenvalues);
        scaled * self.eigenvectors.transpose()
    }

    /// Eigenvalue of largest magnitude together with its eigenvector.
    pub fn extremal(&self) -> (f64, DVector<f64>) {
        let d = self.eigenvalues.len();
        let last = d - 1;
        let idx = if self.eigenvalues[0].abs() >= self.eigenvalues[last].abs() {
            0
        } else {
            last
        };
        (self.eigenvalues[idx], self.eigenvectors.column(idx).into_owned())
    }
}

fn max_eigen_iterations(dim: usize) -> usize {
    10_000 + 200 * dim
}

/// Full eigendecomposition, eigenvalues descending.
///
/// Eigenvectors are sign-normalized (first nonzero component positive) and
/// exactly tied eigenvalues are ordered by descending lexicographic order of
/// their eigenvectors, so identical input gives identical output.
pub fn symmetric_eigen(a: &SymmetricMatrix) -> Result<EigenDecomposition> {
    let d = a.dim();
    if a.is_diagonal() {
        let mut order: Vec<usize> = (0..d).collect();
        // Stable sort keeps e_i ahead of e_j (i < j) on ties, which is the
        // descending lexicographic order of the unit vectors.
        order.sort_by(|&i, &j| a.get(j, j).total_cmp(&a.get(i, i)));
        let eigenvalues = DVector::from_iterator(d, order.iter().map(|&i| a.get(i, i)));
        let mut eigenvectors = DMatrix::zeros(d, d);
        for (col, &i) in order.iter().enumerate() {
            eigenvectors[(i, col)] = 1.0;
        }
        return Ok(EigenDecomposition {
            eigenvalues,
            eigenvectors,
        });
    }

    let max_iterations = max_eigen_iterations(d);
    let eig = nalgebra::SymmetricEigen::try_new(a.as_matrix().clone(), f64::EPSILON, max_iterations)
        .ok_or(Error::EigenConvergence { dim: d, max_iterations })?;

    let mut pairs: Vec<(f64, DVector<f64>)> = (0..d)
        .map(|k| {
            let mut v = eig.eigenvectors.column(k).into_owned();
            normalize_sign(&mut v);
            (eig.eigenvalues[k], v)
        })
        .collect();
    pairs.sort_by(|(la, va), (lb, vb)| lb.total_cmp(la).then_with(|| lex_cmp(vb, va)));

    let eigenvalues = DVector::from_iterator(d, pairs.iter().map(|(l, _)| *l));
    let mut eigenvectors = DMatrix::zeros(d, d);
    for (k, (_, v)) in pairs.iter().enumerate() {
        eigenvectors.set_column(k, v);
    }
    Ok(EigenDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

fn normalize_sign(v: &mut DVector<f64>) {
    let scale = v.amax();
    if let Some(first) = v.iter().find(|c| c.abs() > 1e-12 * scale) {
        if *first < 0.0 {
            v.neg_mut();
        }
    }
}

fn lex_cmp(a: &DVector<f64>, b: &DVector<f64>) -> Ordering {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

/// Eigenvalues only, descending.
pub fn symmetric_eigenvalues(a: &SymmetricMatrix) -> DVector<f64> {
    let mut vals: Vec<f64> = if a.is_diagonal() {
        a.as_matrix().diagonal().iter().copied().collect()
    } else {
        a.as_matrix().symmetric_eigenvalues().iter().copied().collect()
    };
    vals.sort_by(|x, y| y.total_cmp(x));
    DVector::from_vec(vals)
}

/// Largest absolute eigenvalue.
pub fn spectral_norm(a: &SymmetricMatrix) -> f64 {
    if a.is_diagonal() {
        return a.as_matrix().diagonal().amax();
    }
    a.as_matrix().symmetric_eigenvalues().amax()
}

pub fn frobenius_norm(a: &SymmetricMatrix) -> f64 {
    a.as_matrix().norm()
}

/// Frobenius-nearest matrix with operator norm at most `t`: eigenvalues are
/// clamped into `[-t, t]`. Matrices already inside the ball come back unchanged.
pub fn clip_eigenvalues(a: &SymmetricMatrix, t: f64) -> Result<SymmetricMatrix> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(invalid(format!("clip radius must be finite and >= 0, got {t}")));
    }
    if a.is_diagonal() {
        let mut m = a.as_matrix().clone();
        for k in 0..a.dim() {
            m[(k, k)] = m[(k, k)].clamp(-t, t);
        }
        return Ok(SymmetricMatrix(m));
    }
    let eig = symmetric_eigen(a)?;
    Ok(SymmetricMatrix::symmetrize(clip_with_eigen(a.as_matrix(), &eig, t)))
}

/// Applies the clamp as a low-rank correction so eigen-directions inside
/// the ball are untouched.
pub(crate) fn clip_with_eigen(a: &DMatrix<f64>, eig: &EigenDecomposition, t: f64) -> DMatrix<f64> {
    let mut out = a.clone();
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        let excess = lambda - lambda.clamp(-t, t);
        if excess != 0.0 {
            let q = eig.eigenvectors.column(k);
            out.ger(-excess, &q, &q, 1.0);
        }
    }
    out
}

/// An orthonormal basis (columns of `basis`) of a subspace of `R^n`.
#[derive(Debug, Clone)]
pub struct SubspaceBasis {
    pub ambient_dim: usize,
    /// `ambient_dim x dim` matrix with orthonormal columns.
    pub basis: DMatrix<f64>,
    /// Number of independent directions that were excluded.
    pub constraint_count: usize,
    /// Eigenvalue threshold used to pick excluded directions, when the
    /// basis came from a covariance spectrum.
    pub delta_sq: Option<f64>,
}

impl SubspaceBasis {
    pub fn full(n: usize) -> Self {
        SubspaceBasis {
            ambient_dim: n,
            basis: DMatrix::identity(n, n),
            constraint_count: 0,
            delta_sq: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    /// `B h` for coefficients `h` in the basis.
    pub fn embed(&self, coeffs: &DVector<f64>) -> DVector<f64> {
        &self.basis * coeffs
    }

    /// Orthogonal projection of `y` onto the subspace.
    pub fn project(&self, y: &DVector<f64>) -> DVector<f64> {
        &self.basis * self.basis.tr_mul(y)
    }
}

/// Orthonormal basis of the orthogonal complement of `span(constraints)` in `R^n`.
///
/// Rank is decided by singular values above [`RANK_TOLERANCE`] times the
/// largest one, so dependent constraints collapse.
pub fn orthonormal_complement_basis(n: usize, constraints: &[DVector<f64>]) -> Result<SubspaceBasis> {
    if let Some(bad) = constraints.iter().find(|c| c.len() != n) {
        return Err(invalid(format!(
            "constraint of length {} in ambient dimension {n}",
            bad.len()
        )));
    }
    if constraints.is_empty() || n == 0 {
        return Ok(SubspaceBasis::full(n));
    }
    let c = DMatrix::from_columns(constraints);
    let svd = nalgebra::SVD::try_new(c, true, false, f64::EPSILON, max_eigen_iterations(n)).ok_or(
        Error::EigenConvergence {
            dim: n,
            max_iterations: max_eigen_iterations(n),
        },
    )?;
    let smax = svd.singular_values.max();
    let rank = if smax > 0.0 {
        svd.singular_values
            .iter()
            .filter(|&&s| s > RANK_TOLERANCE * smax)
            .count()
    } else {
        0
    };
    if rank == 0 {
        return Ok(SubspaceBasis::full(n));
    }
    let u = svd.u.expect("left singular vectors requested");
    let range = u.columns(0, rank);
    // The complementary projector has eigenvalues exactly 0 or 1, so its
    // leading eigenvectors are a well-separated basis of the complement.
    let projector = DMatrix::identity(n, n) - &range * range.transpose();
    let eig = symmetric_eigen(&SymmetricMatrix::symmetrize(projector))?;
    Ok(SubspaceBasis {
        ambient_dim: n,
        basis: eig.eigenvectors.columns(0, n - rank).into_owned(),
        constraint_count: rank,
        delta_sq: None,
    })
}

/// Connected components of the "shares a nonzero entry" graph on `0..d`.
///
/// Any linear combination of matrices whose off-diagonal support respects
/// the partition is block-diagonal after a permutation, so its spectrum is
/// the union of the block spectra.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockPartition {
    dim: usize,
    blocks: Vec<Vec<usize>>,
}

impl BlockPartition {
    pub fn single(dim: usize) -> Self {
        BlockPartition {
            dim,
            blocks: vec![(0..dim).collect()],
        }
    }

    pub fn from_matrices<'a>(dim: usize, mats: impl IntoIterator<Item = &'a SymmetricMatrix>) -> Self {
        let mut parent: Vec<usize> = (0..dim).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        let mut linked = vec![false; dim * dim];
        for m in mats {
            for j in 0..dim {
                for i in (j + 1)..dim {
                    if !linked[j * dim + i] && m.get(i, j) != 0.0 {
                        linked[j * dim + i] = true;
                        let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                        if ri != rj {
                            parent[ri.max(rj)] = ri.min(rj);
                        }
                    }
                }
            }
        }
        let mut blocks: Vec<Vec<usize>> = Vec::new();
        let mut slot = vec![usize::MAX; dim];
        for i in 0..dim {
            let root = find(&mut parent, i);
            if slot[root] == usize::MAX {
                slot[root] = blocks.len();
                blocks.push(Vec::new());
            }
            blocks[slot[root]].push(i);
        }
        BlockPartition { dim, blocks }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn is_single(&self) -> bool {
        self.blocks.len() == 1
    }

    pub fn largest_block(&self) -> usize {
        self.blocks.iter().map(Vec::len).max().unwrap_or(0)
    }

    fn sub_block(m: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(idx.len(), idx.len(), |r, c| m[(idx[r], idx[c])])
    }

    /// Spectral norm of `m`, which must respect the partition.
    pub fn spectral_norm(&self, m: &DMatrix<f64>) -> f64 {
        if self.is_single() {
            return spectral_norm(&SymmetricMatrix(m.clone()));
        }
        self.blocks
            .iter()
            .map(|idx| match idx.len() {
                1 => m[(idx[0], idx[0])].abs(),
                _ => Self::sub_block(m, idx).symmetric_eigenvalues().amax(),
            })
            .fold(0.0, f64::max)
    }

    /// Spectral norm plus a unit vector attaining it.
    pub fn extremal_pair(&self, m: &DMatrix<f64>) -> Result<(f64, DVector<f64>)> {
        let mut best = (-1.0, DVector::zeros(self.dim));
        for idx in &self.blocks {
            let (value, local) = if idx.len() == 1 {
                (m[(idx[0], idx[0])].abs(), DVector::from_element(1, 1.0))
            } else {
                let eig = symmetric_eigen(&SymmetricMatrix(Self::sub_block(m, idx)))?;
                let (lambda, v) = eig.extremal();
                (lambda.abs(), v)
            };
            if value > best.0 {
                let mut v = DVector::zeros(self.dim);
                for (k, &i) in idx.iter().enumerate() {
                    v[i] = local[k];
                }
                best = (value, v);
            }
        }
        Ok(best)
    }

    /// Blockwise eigenvalue clamp into `[-t, t]`; `m` must respect the partition.
    pub fn clip(&self, m: &DMatrix<f64>, t: f64) -> Result<DMatrix<f64>> {
        if self.is_single() {
            return clip_eigenvalues(&SymmetricMatrix(m.clone()), t).map(SymmetricMatrix::into_matrix);
        }
        let mut out = m.clone();
        for idx in &self.blocks {
            if idx.len() == 1 {
                let k = idx[0];
                out[(k, k)] = m[(k, k)].clamp(-t, t);
                continue;
            }
            let sub = SymmetricMatrix(Self::sub_block(m, idx));
            let clipped = clip_eigenvalues(&sub, t)?;
            for (r, &i) in idx.iter().enumerate() {
                for (c, &j) in idx.iter().enumerate() {
                    out[(i, j)] = clipped.get(r, c);
                }
            }
        }
        Ok(out)
    }
}

pub fn standard_normal_vector<R: Rng + ?Sized>(rng: &mut R, n: usize) -> DVector<f64> {
    DVector::from_iterator(n, (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)))
}

/// Symmetric matrix with independent standard Gaussian entries on and above
/// the diagonal.
pub fn gaussian_symmetric<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> SymmetricMatrix {
    let mut m = DMatrix::zeros(dim, dim);
    for j in 0..dim {
        for i in 0..=j {
            let v: f64 = rng.sample(StandardNormal);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    SymmetricMatrix(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    /// Independent oracle: power iteration on A^2 gives lambda_max(A^2) = ||A||^2.
    fn power_iteration_norm(a: &SymmetricMatrix, steps: usize) -> f64 {
        let a2 = a.as_matrix() * a.as_matrix();
        let mut v = DVector::from_element(a.dim(), 1.0).normalize();
        for _ in 0..steps {
            v = (&a2 * &v).normalize();
        }
        (v.dot(&(&a2 * &v))).sqrt()
    }

    #[test]
    fn spectral_norm_of_simple_matrices() {
        assert_eq!(spectral_norm(&SymmetricMatrix::identity(3)), 1.0);
        let d = SymmetricMatrix::from_diagonal(&[2.0, -7.0, 3.0]).unwrap();
        assert_eq!(spectral_norm(&d), 7.0);
    }

    #[test]
    fn spectral_norm_matches_power_iteration() {
        let a = gaussian_symmetric(&mut rng(11), 8);
        let got = spectral_norm(&a);
        let oracle = power_iteration_norm(&a, 10_000);
        assert!((got - oracle).abs() <= 1e-6 * oracle, "{got} vs {oracle}");
    }

    #[test]
    fn frobenius_norm_cases() {
        assert_eq!(frobenius_norm(&SymmetricMatrix::identity(4)), 2.0);
        assert_eq!(frobenius_norm(&SymmetricMatrix::zeros(3)), 0.0);
        let v = DVector::from_vec(vec![1.0, 1.0, 0.0]);
        let a = SymmetricMatrix::outer(&v, 0.5).unwrap();
        assert!((frobenius_norm(&a) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn non_finite_entries_rejected() {
        let err = SymmetricMatrix::from_row_major(2, &[1.0, f64::NAN, 0.0, 1.0]).unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)));
    }

    #[test]
    fn constructor_symmetrizes_exactly() {
        let a = SymmetricMatrix::from_row_major(2, &[1.0, 0.3, 0.1, 2.0]).unwrap();
        assert_eq!(a.get(0, 1), a.get(1, 0));
        assert_eq!(a.get(0, 1), 0.2);
    }

    #[test]
    fn eigen_of_diagonal_and_pauli_x() {
        let d = SymmetricMatrix::from_diagonal(&[1.0, 2.0, 3.0]).unwrap();
        let e = symmetric_eigen(&d).unwrap();
        assert_eq!(e.eigenvalues.as_slice(), &[3.0, 2.0, 1.0]);

        let x = SymmetricMatrix::from_row_major(2, &[0.0, 1.0, 1.0, 0.0]).unwrap();
        let e = symmetric_eigen(&x).unwrap();
        assert!((e.eigenvalues[0] - 1.0).abs() < 1e-14);
        assert!((e.eigenvalues[1] + 1.0).abs() < 1e-14);
    }

    #[test]
    fn eigen_reconstruction_and_orthogonality() {
        for seed in 0..5 {
            let a = gaussian_symmetric(&mut rng(seed), 6);
            let e = symmetric_eigen(&a).unwrap();
            let resid = (e.reconstruct() - a.as_matrix()).norm();
            assert!(resid <= 1e-8 * frobenius_norm(&a).max(1.0));
            let orth = (e.eigenvectors.tr_mul(&e.eigenvectors) - DMatrix::identity(6, 6)).norm();
            assert!(orth <= 1e-8 * 6.0);
            assert!(e.eigenvalues.as_slice().windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn eigen_is_deterministic_and_sign_normalized() {
        let a = gaussian_symmetric(&mut rng(3), 7);
        let e1 = symmetric_eigen(&a).unwrap();
        let e2 = symmetric_eigen(&a).unwrap();
        assert_eq!(e1.eigenvalues, e2.eigenvalues);
        assert_eq!(e1.eigenvectors, e2.eigenvectors);
        for col in e1.eigenvectors.column_iter() {
            let first = col.iter().find(|c| c.abs() > 1e-12).unwrap();
            assert!(*first > 0.0);
        }
    }

    #[test]
    fn clip_examples() {
        let a = SymmetricMatrix::from_diagonal(&[5.0, -1.0]).unwrap();
        let c = clip_eigenvalues(&a, 2.0).unwrap();
        assert_eq!(c, SymmetricMatrix::from_diagonal(&[2.0, -1.0]).unwrap());

        let b = gaussian_symmetric(&mut rng(5), 5);
        let t = spectral_norm(&b) * 1.01;
        let same = clip_eigenvalues(&b, t).unwrap();
        assert!((same.as_matrix() - b.as_matrix()).amax() <= 1e-10);
    }

    #[test]
    fn clip_is_nearest_among_sampled_feasible_points() {
        let mut r = rng(21);
        let a = gaussian_symmetric(&mut r, 5);
        let c = clip_eigenvalues(&a, 1.0).unwrap();
        assert!(spectral_norm(&c) <= 1.0 + 1e-8);
        let dist = (c.as_matrix() - a.as_matrix()).norm();
        for _ in 0..100 {
            let b = gaussian_symmetric(&mut r, 5);
            let scale = r.random_range(0.0..1.0) / spectral_norm(&b);
            let feasible = b.scaled(scale);
            assert!(dist <= (feasible.as_matrix() - a.as_matrix()).norm() + 1e-12);
        }
    }

    #[test]
    fn complement_basis_examples() {
        let b = orthonormal_complement_basis(3, &[]).unwrap();
        assert_eq!(b.dim(), 3);

        let e1 = DVector::from_vec(vec![1.0, 0.0, 0.0]);
        let b = orthonormal_complement_basis(3, &[e1]).unwrap();
        assert_eq!(b.dim(), 2);
        assert!(b.basis.row(0).amax() < 1e-12);

        let c1 = DVector::from_vec(vec![1.0, 1.0, 0.0]);
        let c2 = DVector::from_vec(vec![2.0, 2.0, 0.0]);
        let b = orthonormal_complement_basis(3, &[c1, c2]).unwrap();
        assert_eq!(b.dim(), 2);
        assert_eq!(b.constraint_count, 1);
    }

    #[test]
    fn complement_rejects_wrong_length() {
        let c = DVector::from_vec(vec![1.0, 0.0]);
        assert!(orthonormal_complement_basis(3, &[c]).is_err());
    }

    #[test]
    fn block_partition_detects_structure() {
        let d = SymmetricMatrix::from_diagonal(&[1.0, 2.0, 3.0]).unwrap();
        let p = BlockPartition::from_matrices(3, [&d]);
        assert_eq!(p.blocks().len(), 3);

        let m = SymmetricMatrix::from_row_major(
            4,
            &[
                1.0, 0.0, 0.0, 0.5, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.5, 0.0, 0.0, 1.0,
            ],
        )
        .unwrap();
        let p = BlockPartition::from_matrices(4, [&m]);
        assert_eq!(p.blocks(), &[vec![0, 3], vec![1], vec![2]]);
        assert!((p.spectral_norm(m.as_matrix()) - spectral_norm(&m)).abs() < 1e-14);
        let clipped = p.clip(m.as_matrix(), 1.2).unwrap();
        let direct = clip_eigenvalues(&m, 1.2).unwrap();
        assert!((clipped - direct.as_matrix()).amax() < 1e-14);
        let (value, v) = p.extremal_pair(m.as_matrix()).unwrap();
        assert!((value - 1.5).abs() < 1e-14);
        assert!((v.dot(&(m.as_matrix() * &v)).abs() - 1.5).abs() < 1e-14);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn sym(seed: u64, dim: usize) -> SymmetricMatrix {
            gaussian_symmetric(&mut rng(seed), dim)
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn norm_sandwich(seed in any::<u64>(), dim in 1usize..10) {
                let a = sym(seed, dim);
                let op = spectral_norm(&a);
                let fro = frobenius_norm(&a);
                prop_assert!(op <= fro * (1.0 + 1e-12));
                prop_assert!(fro <= (dim as f64).sqrt() * op * (1.0 + 1e-12));
            }

            #[test]
            fn clip_idempotent(seed in any::<u64>(), dim in 1usize..8, t in 0.1f64..3.0) {
                let a = sym(seed, dim);
                let once = clip_eigenvalues(&a, t).unwrap();
                let twice = clip_eigenvalues(&once, t).unwrap();
                prop_assert!((once.as_matrix() - twice.as_matrix()).amax() <= 1e-10);
            }

            #[test]
            fn complement_is_orthonormal_and_orthogonal(seed in any::<u64>(), n in 1usize..9, k in 0usize..6) {
                let mut r = rng(seed);
                let cons: Vec<_> = (0..k).map(|_| standard_normal_vector(&mut r, n)).collect();
                let b = orthonormal_complement_basis(n, &cons).unwrap();
                prop_assert_eq!(b.dim(), n - k.min(n));
                let gram = b.basis.tr_mul(&b.basis);
                prop_assert!((gram - DMatrix::identity(b.dim(), b.dim())).amax() <= 1e-8);
                for c in &cons {
                    prop_assert!(b.basis.tr_mul(c).amax() <= 1e-8 * c.norm().max(1.0));
                }
            }
        }
    }
}
