//! Euclidean projection onto `(x0 + K') ∩ [-1, 1]^n`, where
//! `K' = { y in H : ||sum_i y_i A_i||_op <= t }`.
//!
//! Solved with ADMM on three blocks: the step `q = B z` parameterized by
//! coefficients `z` in an orthonormal basis `B` of `H`, a cube copy `w` of
//! `x0 + q`, and a matrix copy `Z` of `sum_i q_i A_i / t`. The `z` update is
//! a linear solve against the fixed matrix `(1 + rho) I + rho B^T G B / t^2`,
//! diagonalized once; the `w` update is a clamp and the `Z` update an
//! eigenvalue clip. The penalty follows residual balancing.

use log::debug;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::instance::Instance;
use crate::linalg::{symmetric_eigen, SubspaceBasis, SymmetricMatrix};
use crate::operator::SeriesOperator;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjectionConfig {
    pub max_iterations: usize,
    pub primal_tol: f64,
    /// Initial ADMM penalty.
    pub penalty: f64,
}

impl Default for ProjectionConfig {
    fn default() -> Self {
        ProjectionConfig {
            max_iterations: 2000,
            primal_tol: 1e-6,
            penalty: 1.0,
        }
    }
}

impl ProjectionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 || !(self.primal_tol > 0.0) || !(self.penalty > 0.0) {
            return Err(invalid(format!("projection settings must be positive: {self:?}")));
        }
        Ok(())
    }
}

/// Output of [`project`], with the measured constraint violations.
#[derive(Debug, Clone)]
pub struct Projection {
    /// Lies in the cube exactly.
    pub x: DVector<f64>,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    /// `max(0, ||sum_i (x_i - x0_i) A_i||_op - t)`.
    pub spectral_violation: f64,
    /// Distance of `x - x0` from `H`.
    pub subspace_violation: f64,
    pub final_penalty: f64,
}

/// Residual checks happen every this many iterations.
const CHECK_EVERY: usize = 5;
const BALANCE_RATIO: f64 = 10.0;

/// Reusable pieces of one projection problem: everything except `g`.
pub struct ProjectionProblem<'a> {
    op: &'a SeriesOperator,
    basis: &'a SubspaceBasis,
    x0: DVector<f64>,
    t: f64,
    /// Eigenvectors of `B^T G B / t^2`.
    system_vectors: DMatrix<f64>,
    system_values: DVector<f64>,
    spectral_active: bool,
}

impl<'a> ProjectionProblem<'a> {
    pub fn new(
        op: &'a SeriesOperator,
        gram: &DMatrix<f64>,
        x0: &DVector<f64>,
        t: f64,
        basis: &'a SubspaceBasis,
    ) -> Result<Self> {
        let n = op.n();
        if x0.len() != n || basis.ambient_dim != n || gram.nrows() != n {
            return Err(invalid("projection inputs disagree on n"));
        }
        if x0.iter().any(|v| !(-1.0..=1.0).contains(v)) {
            return Err(invalid("x0 must lie in [-1, 1]^n"));
        }
        if !(t >= 0.0 && t.is_finite()) {
            return Err(invalid(format!("radius must be finite and >= 0, got {t}")));
        }
        let spectral_active = gram.amax() > 0.0;
        if spectral_active && t == 0.0 {
            return Err(invalid("radius must be positive for a nonzero instance"));
        }
        let m = basis.dim();
        let (system_vectors, system_values) = if spectral_active && m > 0 {
            let s = basis.basis.tr_mul(&(gram * &basis.basis)) / (t * t);
            let eig = symmetric_eigen(&SymmetricMatrix::symmetrize(s))?;
            (eig.eigenvectors, eig.eigenvalues.map(|l| l.max(0.0)))
        } else {
            (DMatrix::identity(m, m), DVector::zeros(m))
        };
        Ok(ProjectionProblem {
            op,
            basis,
            x0: x0.clone(),
            t,
            system_vectors,
            system_values,
            spectral_active,
        })
    }

    fn solve_system(&self, rhs: &DVector<f64>, rho: f64) -> DVector<f64> {
        let mut c = self.system_vectors.tr_mul(rhs);
        for (ck, &s) in c.iter_mut().zip(self.system_values.iter()) {
            *ck /= 1.0 + rho + rho * s;
        }
        &self.system_vectors * c
    }

    fn scaled_apply(&self, q: &DVector<f64>) -> DVector<f64> {
        self.op.apply(q) / self.t
    }

    fn scaled_adjoint(&self, packed: &DVector<f64>) -> DVector<f64> {
        self.op.adjoint(packed) / self.t
    }

    /// Measured violations of a candidate point.
    pub fn violations(&self, x: &DVector<f64>) -> (f64, f64) {
        let step = x - &self.x0;
        let off_subspace = (&step - self.basis.project(&step)).norm();
        let spectral = if self.spectral_active {
            (self.op.norm_of(&step) - self.t).max(0.0)
        } else {
            0.0
        };
        (spectral, off_subspace)
    }

    pub fn project(&self, g: &DVector<f64>, cfg: &ProjectionConfig) -> Result<Projection> {
        cfg.validate()?;
        let n = self.op.n();
        if g.len() != n {
            return Err(invalid("target point has the wrong length"));
        }
        let b = &self.basis.basis;
        let tol = cfg.primal_tol;
        let scale_tol = tol * self.t.max(1.0);
        let target = b.tr_mul(&(g - &self.x0));
        let dual_scale = target.norm().max(1.0);

        let mut rho = cfg.penalty;
        let mut z = target.clone();
        let mut q = b * &z;
        let mut w = (&self.x0 + &q).map(|v| v.clamp(-1.0, 1.0));
        let mut u = DVector::zeros(n);
        let p = self.op.packed_len();
        let (mut zmat, mut umat) = if self.spectral_active {
            (self.op.clip_packed(&self.scaled_apply(&q), 1.0)?, DVector::zeros(p))
        } else {
            (DVector::zeros(0), DVector::zeros(0))
        };
        let (mut primal, mut dual) = (f64::INFINITY, f64::INFINITY);

        for iter in 1..=cfg.max_iterations {
            let mut rhs = &target + b.tr_mul(&(&w - &u - &self.x0)) * rho;
            if self.spectral_active {
                rhs += b.tr_mul(&self.scaled_adjoint(&(&zmat - &umat))) * rho;
            }
            z = self.solve_system(&rhs, rho);
            q = b * &z;
            let xq = &self.x0 + &q;

            let w_prev = w.clone();
            w = (&xq + &u).map(|v| v.clamp(-1.0, 1.0));
            let cube_gap = &xq - &w;
            u += &cube_gap;
            let mut primal_sq = cube_gap.norm_squared();

            let check = iter % CHECK_EVERY == 0 || iter == cfg.max_iterations;
            let mut zmat_prev = None;
            if self.spectral_active {
                let aq = self.scaled_apply(&q);
                let prev = std::mem::replace(&mut zmat, self.op.clip_packed(&(&aq + &umat), 1.0)?);
                let mat_gap = &aq - &zmat;
                umat += &mat_gap;
                primal_sq += self.op.inner(&mat_gap, &mat_gap);
                if check {
                    zmat_prev = Some(prev);
                }
            }
            if !check {
                continue;
            }

            primal = primal_sq.sqrt();
            let mut dual_vec = b.tr_mul(&(&w - &w_prev));
            if let Some(prev) = zmat_prev {
                dual_vec += b.tr_mul(&self.scaled_adjoint(&(&zmat - prev)));
            }
            dual = rho * dual_vec.norm();

            if primal <= tol && dual <= tol * dual_scale {
                let (spectral, off) = self.violations(&w);
                if spectral <= scale_tol && off <= scale_tol {
                    debug!("projection converged in {iter} iterations (rho {rho:.3e})");
                    return Ok(Projection {
                        x: w,
                        iterations: iter,
                        primal_residual: primal,
                        dual_residual: dual,
                        spectral_violation: spectral,
                        subspace_violation: off,
                        final_penalty: rho,
                    });
                }
            }

            let dual_rel = dual / dual_scale;
            if primal > BALANCE_RATIO * dual_rel {
                rho *= 2.0;
                u /= 2.0;
                umat /= 2.0;
            } else if dual_rel > BALANCE_RATIO * primal {
                rho /= 2.0;
                u *= 2.0;
                umat *= 2.0;
            }
        }
        Err(Error::ProjectionConvergence {
            iterations: cfg.max_iterations,
            primal_residual: primal,
            dual_residual: dual,
            tolerance: tol,
        })
    }
}

/// Projects `g` onto `{x : x - x0 in H, ||sum_i (x_i - x0_i) A_i||_op <= t, x in [-1, 1]^n}`.
pub fn project_to_body(
    inst: &Instance,
    g: &DVector<f64>,
    x0: &DVector<f64>,
    t: f64,
    basis: &SubspaceBasis,
    cfg: &ProjectionConfig,
) -> Result<DVector<f64>> {
    let op = SeriesOperator::new(inst);
    let gram = op.gram();
    let problem = ProjectionProblem::new(&op, &gram, x0, t, basis)?;
    Ok(problem.project(g, cfg)?.x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::generate_low_rank_random;
    use crate::linalg::standard_normal_vector;
    use crate::params::gram_matrix;
    use crate::subspace::bad_subspace;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn diag_units(coeffs: &[f64]) -> Instance {
        let n = coeffs.len();
        let mats = coeffs
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                let mut d = vec![0.0; n];
                d[i] = c;
                SymmetricMatrix::from_diagonal(&d).unwrap()
            })
            .collect();
        Instance::new(mats, "diag", None).unwrap()
    }

    #[test]
    fn spectral_constraint_caps_coordinate() {
        let inst = diag_units(&[1.0, 1.0]);
        let x = project_to_body(
            &inst,
            &DVector::from_vec(vec![3.0, 0.0]),
            &DVector::zeros(2),
            0.5,
            &SubspaceBasis::full(2),
            &ProjectionConfig::default(),
        )
        .unwrap();
        assert!((x[0] - 0.5).abs() < 1e-6 && x[1].abs() < 1e-6, "{x}");
    }

    #[test]
    fn zero_instance_reduces_to_clamp() {
        let inst = Instance::zeros(4, 3).unwrap();
        let g = DVector::from_vec(vec![2.0, -0.3, -5.0, 0.9]);
        let x = project_to_body(
            &inst,
            &g,
            &DVector::zeros(4),
            1.0,
            &SubspaceBasis::full(4),
            &ProjectionConfig::default(),
        )
        .unwrap();
        let expected = g.map(|v| v.clamp(-1.0, 1.0));
        assert!((x - expected).amax() < 1e-8);
    }

    #[test]
    fn feasible_target_is_fixed_point() {
        let inst = generate_low_rank_random(6, 4, 2, 3).unwrap();
        let x0 = DVector::from_vec(vec![0.1, -0.2, 0.0, 0.3, 0.0, -0.1]);
        let g = &x0 + DVector::from_vec(vec![0.05, 0.02, -0.03, 0.0, 0.01, 0.02]);
        let x = project_to_body(
            &inst,
            &g,
            &x0,
            5.0,
            &SubspaceBasis::full(6),
            &ProjectionConfig::default(),
        )
        .unwrap();
        assert!((x - g).amax() < 1e-8);
    }

    #[test]
    fn dense_projection_is_feasible_and_beats_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let inst = generate_low_rank_random(10, 6, 2, 5).unwrap();
        let gram = gram_matrix(&inst).unwrap();
        let basis = bad_subspace(&gram, 2.0).unwrap();
        let x0 = DVector::from_fn(10, |_, _| rng.random_range(-0.5..0.5));
        let g = &x0 + basis.embed(&standard_normal_vector(&mut rng, basis.dim())) * 2.0;
        let t = 1.0;
        let cfg = ProjectionConfig::default();
        let op = SeriesOperator::new(&inst);
        let problem = ProjectionProblem::new(&op, &gram.matrix, &x0, t, &basis).unwrap();
        let out = problem.project(&g, &cfg).unwrap();
        assert!(out.x.iter().all(|v| v.abs() <= 1.0));
        assert!(out.spectral_violation <= cfg.primal_tol);
        assert!(out.subspace_violation <= cfg.primal_tol);
        let best = (&out.x - &g).norm();
        for _ in 0..100 {
            let dir = basis.embed(&standard_normal_vector(&mut rng, basis.dim()));
            let spec = t / op.norm_of(&dir);
            let cube = (0..10)
                .map(|i| {
                    if dir[i] > 0.0 {
                        (1.0 - x0[i]) / dir[i]
                    } else {
                        (-1.0 - x0[i]) / dir[i]
                    }
                })
                .fold(f64::INFINITY, f64::min);
            let p = &x0 + dir * (spec.min(cube) * rng.random_range(0.0..1.0));
            assert!(best <= (p - &g).norm() + 1e-9);
        }
    }

    #[test]
    fn exhausted_budget_reports_residuals() {
        let inst = generate_low_rank_random(8, 5, 2, 1).unwrap();
        let g = DVector::from_element(8, 3.0);
        let cfg = ProjectionConfig {
            max_iterations: 3,
            ..ProjectionConfig::default()
        };
        let err = project_to_body(&inst, &g, &DVector::zeros(8), 0.3, &SubspaceBasis::full(8), &cfg).unwrap_err();
        assert!(matches!(err, Error::ProjectionConvergence { iterations: 3, .. }));
    }
}
