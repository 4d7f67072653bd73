//! One round of partial coloring.
//!
//! Restrict the coefficients to the subspace `H` that removes the large
//! covariance directions (eigenvalues above `f^2 / delta`), sample a
//! Gaussian in `H`, and project it onto `(x0 + K') ∩ [-1, 1]^n`. The
//! projection of a far-away Gaussian lands on many cube faces at once; those
//! coordinates are frozen at `+-1`.

use log::{debug, warn};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::instance::Instance;
use crate::linalg::{standard_normal_vector, SubspaceBasis};
use crate::operator::SeriesOperator;
use crate::params::{ConcentrationParams, GramMatrix};
use crate::projection::{ProjectionConfig, ProjectionProblem};
use crate::subspace::bad_subspace;

/// Relative slack on the spectral radius after snapping frozen coordinates.
pub const RADIUS_SLACK: f64 = 1e-4;

/// `(3/2) eps log2(1/eps)`.
pub fn theoretical_delta(epsilon: f64) -> f64 {
    1.5 * epsilon * (1.0 / epsilon).log2()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConstantsMode {
    /// Desk-scale constants; `delta` is free.
    Practical,
    /// `epsilon = 1/60000` and `delta = (3/2) eps log2(1/eps)`.
    Theoretical,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartialColoringConfig {
    pub mode: ConstantsMode,
    /// A round succeeds once `epsilon * n / 2` coordinates are frozen.
    pub epsilon: f64,
    /// Subspace budget: `Delta^2 = f^2 / delta`.
    pub delta: f64,
    /// Multiplier on `sigma + (ln d)^{3/4} sqrt(sigma f)` giving the radius `t`.
    pub c_bound: f64,
    pub max_restarts: usize,
    /// `c_bound` doubles after every this many failed attempts.
    pub escalate_every: usize,
    /// The Gaussian sample is multiplied by this before projecting.
    pub step_scale: f64,
    pub freeze_tol: f64,
    /// Use `-y` instead of `y` for every Gaussian sample.
    pub negate_samples: bool,
    pub projection: ProjectionConfig,
}

impl PartialColoringConfig {
    pub fn practical() -> Self {
        PartialColoringConfig {
            mode: ConstantsMode::Practical,
            epsilon: 0.25,
            delta: 0.375,
            c_bound: 2.0,
            max_restarts: 8,
            escalate_every: 4,
            step_scale: 1.0,
            freeze_tol: 1e-7,
            negate_samples: false,
            projection: ProjectionConfig::default(),
        }
    }

    pub fn theoretical() -> Self {
        let epsilon = 1.0 / 60000.0;
        PartialColoringConfig {
            mode: ConstantsMode::Theoretical,
            epsilon,
            delta: theoretical_delta(epsilon),
            ..Self::practical()
        }
    }

    /// Fraction of coordinates a round has to freeze.
    pub fn accept_fraction(&self) -> f64 {
        self.epsilon / 2.0
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(invalid(format!("epsilon must lie in (0, 1), got {}", self.epsilon)));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(invalid(format!("delta must be positive, got {}", self.delta)));
        }
        if self.mode == ConstantsMode::Theoretical
            && (self.delta - theoretical_delta(self.epsilon)).abs() > 1e-12 * self.delta
        {
            return Err(invalid("theoretical mode requires delta = (3/2) eps log2(1/eps)"));
        }
        if !(self.c_bound > 0.0 && self.c_bound.is_finite()) {
            return Err(invalid(format!("c_bound must be positive, got {}", self.c_bound)));
        }
        if self.max_restarts == 0 || self.escalate_every == 0 {
            return Err(invalid("max_restarts and escalate_every must be positive"));
        }
        if !(self.step_scale > 0.0) || !(self.freeze_tol > 0.0 && self.freeze_tol < 0.5) {
            return Err(invalid("step_scale must be positive and freeze_tol in (0, 0.5)"));
        }
        self.projection.validate()
    }
}

impl Default for PartialColoringConfig {
    fn default() -> Self {
        Self::practical()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartialColoringResult {
    /// New point in `[-1, 1]^n`; frozen coordinates are exactly `+-1`.
    pub x: Vec<f64>,
    /// Indices with `|x_i| = 1`, ascending.
    pub frozen: Vec<usize>,
    /// `||sum_i (x_i - x0_i) A_i||_op`.
    pub achieved_norm: f64,
    /// The radius `t` the accepted attempt used.
    pub radius: f64,
    pub c_bound: f64,
    /// Failed attempts before the accepted one.
    pub restarts_used: usize,
    pub subspace_dim: usize,
    pub bad_directions: usize,
    pub projection_iterations: usize,
}

/// `sigma + (ln d)^{3/4} sqrt(sigma f)`, the radius before the constant.
pub fn base_radius(params: &ConcentrationParams) -> f64 {
    let ln_d = (params.d.max(1) as f64).ln();
    params.sigma + ln_d.powf(0.75) * (params.sigma * params.f).sqrt()
}

/// Subspace `H` for the given parameters: Gram eigenvalues above `f^2 / delta` removed.
pub fn coloring_subspace(gram: &GramMatrix, params: &ConcentrationParams, delta: f64) -> Result<SubspaceBasis> {
    let delta_sq = params.f * params.f / delta;
    if delta_sq > 0.0 {
        bad_subspace(gram, delta_sq)
    } else {
        Ok(SubspaceBasis::full(gram.n()))
    }
}

/// Partial coloring with the operator and Gram matrix already built.
pub fn partial_color_with<R: Rng + ?Sized>(
    op: &SeriesOperator,
    gram: &GramMatrix,
    x0: &[f64],
    params: &ConcentrationParams,
    cfg: &PartialColoringConfig,
    rng: &mut R,
) -> Result<PartialColoringResult> {
    cfg.validate()?;
    let n = op.n();
    if x0.len() != n || gram.n() != n {
        return Err(invalid("x0, operator and Gram matrix disagree on n"));
    }
    if let Some(i) = x0.iter().position(|v| !(v.abs() < 1.0)) {
        return Err(invalid(format!("x0[{i}] = {} is not strictly inside (-1, 1)", x0[i])));
    }
    let x0v = DVector::from_column_slice(x0);
    let basis = coloring_subspace(gram, params, cfg.delta)?;
    let radius0 = base_radius(params);
    let required = cfg.accept_fraction() * n as f64;
    let base_seed: u64 = rng.random();

    let mut c = cfg.c_bound;
    let mut problem: Option<(f64, ProjectionProblem)> = None;
    let mut best_fraction = 0.0f64;

    for attempt in 0..cfg.max_restarts {
        if attempt > 0 && attempt % cfg.escalate_every == 0 {
            c *= 2.0;
        }
        let t = c * radius0;
        if problem.as_ref().is_none_or(|(pt, _)| *pt != t) {
            problem = Some((t, ProjectionProblem::new(op, &gram.matrix, &x0v, t, &basis)?));
        }
        let (_, prob) = problem.as_ref().expect("problem built above");

        let mut sample_rng = ChaCha8Rng::seed_from_u64(base_seed);
        sample_rng.set_stream(attempt as u64);
        let mut y = basis.embed(&standard_normal_vector(&mut sample_rng, basis.dim()));
        if cfg.negate_samples {
            y.neg_mut();
        }
        let g = &x0v + y * cfg.step_scale;

        let proj = match prob.project(&g, &cfg.projection) {
            Ok(p) => p,
            Err(e @ Error::ProjectionConvergence { .. }) => {
                warn!("attempt {attempt}: {e}");
                continue;
            }
            Err(e) => return Err(e),
        };

        let mut x = proj.x;
        let mut frozen = Vec::new();
        for (i, xi) in x.iter_mut().enumerate() {
            if xi.abs() >= 1.0 - cfg.freeze_tol {
                *xi = xi.signum();
                frozen.push(i);
            }
        }
        let achieved = op.norm_of(&(&x - &x0v));
        let fraction = frozen.len() as f64 / n as f64;
        best_fraction = best_fraction.max(fraction);
        debug!(
            "attempt {attempt}: t {t:.4}, froze {}/{n}, norm {achieved:.4}, {} projection iterations",
            frozen.len(),
            proj.iterations
        );
        if achieved > t * (1.0 + RADIUS_SLACK) {
            warn!("attempt {attempt}: norm {achieved} exceeds radius {t} after snapping");
            continue;
        }
        if frozen.is_empty() || (frozen.len() as f64) < required {
            continue;
        }
        return Ok(PartialColoringResult {
            x: x.iter().copied().collect(),
            frozen,
            achieved_norm: achieved,
            radius: t,
            c_bound: c,
            restarts_used: attempt,
            subspace_dim: basis.dim(),
            bad_directions: basis.constraint_count,
            projection_iterations: proj.iterations,
        });
    }
    Err(Error::PartialColoringFailure {
        restarts: cfg.max_restarts,
        best_fraction,
        required_fraction: cfg.accept_fraction(),
    })
}

/// Finds `x in [-1, 1]^n` with `||sum_i (x_i - x0_i) A_i||_op <= t` and at
/// least `epsilon n / 2` coordinates at `+-1`.
pub fn partial_color<R: Rng + ?Sized>(
    inst: &Instance,
    x0: &[f64],
    params: &ConcentrationParams,
    cfg: &PartialColoringConfig,
    rng: &mut R,
) -> Result<PartialColoringResult> {
    let op = SeriesOperator::new(inst);
    let gram = GramMatrix::from_matrix(op.gram())?;
    partial_color_with(&op, &gram, x0, params, cfg, rng)
}
