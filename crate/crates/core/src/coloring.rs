//! Full coloring: repeated partial coloring down to a small active set, then
//! exhaustive search over the rest.

use log::{debug, info, warn};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::exhaustive_search;
use crate::error::{invalid, Error, Result};
use crate::instance::{Instance, SignVector};
use crate::linalg::{spectral_norm, symmetric_eigen, SymmetricMatrix};
use crate::operator::SeriesOperator;
use crate::params::{
    bbvh_bound, chernoff_bound, sum_of_squares, ConcentrationParams, GramMatrix, DEFAULT_BBVH_CONSTANT,
};
use crate::partial::{partial_color_with, PartialColoringConfig};

/// Default size of the active set below which the endgame takes over.
pub const DEFAULT_ENDGAME_THRESHOLD: usize = 12;

/// Largest active set the endgame will enumerate.
pub const ENDGAME_LIMIT: usize = 30;

/// Eigenvalues of `sum_i A_i^2` below this fraction of the largest are
/// treated as zero when compressing the range.
const RANGE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveConfig {
    pub partial: PartialColoringConfig,
    pub endgame_threshold: usize,
    /// Times a failed round is retried with a larger radius before giving up.
    pub max_escalations: usize,
    /// Replace `d > n^2` by the leading `n^2` eigendirections of `sum_i A_i^2`.
    pub truncate: bool,
    /// Restrict each round to the range of the active matrices when it is small.
    pub compress: bool,
    pub bbvh_constant: f64,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            partial: PartialColoringConfig::practical(),
            endgame_threshold: DEFAULT_ENDGAME_THRESHOLD,
            max_escalations: 4,
            truncate: true,
            compress: true,
            bbvh_constant: DEFAULT_BBVH_CONSTANT,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        self.partial.validate()?;
        if self.endgame_threshold > ENDGAME_LIMIT {
            return Err(invalid(format!(
                "endgame threshold {} exceeds the limit {ENDGAME_LIMIT}",
                self.endgame_threshold
            )));
        }
        if !(self.bbvh_constant > 0.0 && self.bbvh_constant.is_finite()) {
            return Err(invalid("bbvh constant must be positive"));
        }
        Ok(())
    }
}

/// What [`truncate_dimension`] did.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationInfo {
    pub original_dim: usize,
    pub kept_dim: usize,
    /// `sqrt(sum_i ||A_i||_F^2 / n)` of the original instance.
    pub f: f64,
    /// First discarded eigenvalue of `sum_i A_i^2`.
    pub tail_eigenvalue: f64,
    /// `2 sqrt(n * tail_eigenvalue)`: bound on how much the discarded part can
    /// add to the norm of any signed sum.
    pub tail_bound: f64,
}

/// Rotates into the eigenbasis of `sum_i A_i^2` and keeps the leading
/// `n^2 x n^2` block when `d > n^2`; otherwise returns the instance unchanged.
pub fn truncate_dimension(inst: &Instance) -> Result<(Instance, Option<TruncationInfo>)> {
    let n = inst.n();
    let d = inst.d();
    let keep = n.saturating_mul(n);
    if d <= keep {
        return Ok((inst.clone(), None));
    }
    let eig = symmetric_eigen(&sum_of_squares(inst))?;
    let q = eig.eigenvectors.columns(0, keep).into_owned();
    let truncated = inst.congruence(&q)?;
    let tail = eig.eigenvalues[keep].max(0.0);
    let budget: f64 = inst.matrices().iter().map(|m| m.trace_product(m)).sum();
    Ok((
        truncated,
        Some(TruncationInfo {
            original_dim: d,
            kept_dim: keep,
            f: (budget / n as f64).sqrt(),
            tail_eigenvalue: tail,
            tail_bound: 2.0 * (n as f64 * tail).sqrt(),
        }),
    ))
}

/// One partial-coloring round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub active_before: usize,
    pub frozen: usize,
    pub frozen_fraction: f64,
    /// Dimension the round worked in after range compression.
    pub working_dim: usize,
    pub sigma: f64,
    pub v: f64,
    pub f: f64,
    pub subspace_dim: usize,
    pub bad_directions: usize,
    pub c_bound: f64,
    pub radius: f64,
    /// `||sum_i (x_i - x0_i) A_i||_op` for this round's move.
    pub achieved_norm: f64,
    pub restarts: usize,
    pub escalations: usize,
    pub projection_iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EndgameRecord {
    pub active: usize,
    pub evaluated: u64,
    pub pruned: u64,
    pub norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundsSummary {
    pub sigma: f64,
    pub v: f64,
    pub f: f64,
    /// `sigma sqrt(2 ln 2d)`; absent when `d < 2`.
    pub chernoff: Option<f64>,
    /// `C (sigma + (ln d)^{3/4} sqrt(sigma v))`; absent when `d < 2`.
    pub bbvh: Option<f64>,
    pub bbvh_constant: f64,
}

impl BoundsSummary {
    pub fn compute(inst: &Instance, c: f64) -> Result<Self> {
        let p = ConcentrationParams::compute(inst)?;
        Ok(BoundsSummary {
            sigma: p.sigma,
            v: p.v,
            f: p.f,
            chernoff: chernoff_bound(&p).ok(),
            bbvh: bbvh_bound(&p, c).ok(),
            bbvh_constant: c,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub version: String,
    pub label: String,
    pub n: usize,
    pub d: usize,
    pub seed: Option<u64>,
    pub signs: SignVector,
    /// `||sum_i x_i A_i||_op` on the input instance.
    pub discrepancy: f64,
    pub rounds: Vec<RoundRecord>,
    /// Sum of the per-round norms plus the endgame norm contribution; an upper
    /// bound on the discrepancy of the working instance by the triangle inequality.
    pub ledger_total: f64,
    pub endgame: Option<EndgameRecord>,
    pub truncation: Option<TruncationInfo>,
    pub bounds: BoundsSummary,
    pub config: SolveConfig,
}

/// A solve that stopped early, with the state reached so far.
#[derive(Debug, thiserror::Error)]
#[error("{error}")]
pub struct SolveFailure {
    #[source]
    pub error: Error,
    pub rounds: Vec<RoundRecord>,
    /// Fractional coloring at the time of failure.
    pub x: Vec<f64>,
    pub active: Vec<usize>,
}

impl From<Error> for SolveFailure {
    fn from(error: Error) -> Self {
        SolveFailure {
            error,
            rounds: Vec::new(),
            x: Vec::new(),
            active: Vec::new(),
        }
    }
}

/// Exhaustive search over the active coordinates with the rest held fixed.
///
/// Coordinates outside `active` must already be `+-1`. Values of `x_partial`
/// on `active` are ignored.
pub fn endgame_exhaustive(
    inst: &Instance,
    x_partial: &[f64],
    active: &[usize],
    threshold: usize,
) -> Result<(SignVector, EndgameRecord)> {
    let op = SeriesOperator::new(inst);
    endgame_with(&op, x_partial, active, threshold)
}

fn endgame_with(
    op: &SeriesOperator,
    x_partial: &[f64],
    active: &[usize],
    threshold: usize,
) -> Result<(SignVector, EndgameRecord)> {
    let n = op.n();
    if x_partial.len() != n {
        return Err(invalid(format!("x has length {} but n = {n}", x_partial.len())));
    }
    if active.len() > threshold.min(ENDGAME_LIMIT) {
        return Err(invalid(format!(
            "{} active coordinates exceed the endgame threshold {}",
            active.len(),
            threshold.min(ENDGAME_LIMIT)
        )));
    }
    let mut is_active = vec![false; n];
    for &i in active {
        if i >= n || is_active[i] {
            return Err(invalid(format!("active index {i} is out of range or repeated")));
        }
        is_active[i] = true;
    }
    let fixed_idx: Vec<usize> = (0..n).filter(|&i| !is_active[i]).collect();
    if let Some(&i) = fixed_idx.iter().find(|&&i| x_partial[i].abs() != 1.0) {
        return Err(invalid(format!(
            "coordinate {i} is inactive but x = {} is not +-1",
            x_partial[i]
        )));
    }
    let coeffs: Vec<f64> = fixed_idx.iter().map(|&i| x_partial[i]).collect();
    let fixed = op.apply_subset(&fixed_idx, &coeffs);
    let res = exhaustive_search(op, &fixed, active)?;
    let mut x = x_partial.to_vec();
    for (&i, &s) in active.iter().zip(&res.signs) {
        x[i] = s as f64;
    }
    Ok((
        SignVector::from_f64(&x)?,
        EndgameRecord {
            active: active.len(),
            evaluated: res.evaluated,
            pruned: res.pruned,
            norm: res.norm,
        },
    ))
}

/// Orthonormal basis of the numerical range of `m` when it is at most half of
/// the ambient dimension.
fn small_range(m: &SymmetricMatrix) -> Result<Option<DMatrix<f64>>> {
    let eig = symmetric_eigen(m)?;
    let top = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    if top <= 0.0 {
        return Ok(None);
    }
    let rank = eig.eigenvalues.iter().filter(|&&l| l > RANGE_TOLERANCE * top).count();
    if 2 * rank > m.dim() {
        return Ok(None);
    }
    Ok(Some(eig.eigenvectors.columns(0, rank).into_owned()))
}

/// Mutable state of a solve in progress.
struct ColoringState {
    x: Vec<f64>,
    active: Vec<usize>,
    rounds: Vec<RoundRecord>,
}

struct Workspace<'a> {
    work: &'a Instance,
    op: SeriesOperator,
    gram: GramMatrix,
    /// `sum_i A_i^2` over the active matrices.
    m_active: SymmetricMatrix,
}

impl Workspace<'_> {
    fn round<R: Rng + ?Sized>(&mut self, state: &mut ColoringState, cfg: &SolveConfig, rng: &mut R) -> Result<()> {
        let active = &state.active;
        let n_t = active.len();
        let sub = self.work.restrict(active)?;
        let range = if cfg.compress && self.work.d() > 1 && self.op.blocks().is_single() {
            small_range(&self.m_active)?
        } else {
            None
        };
        let round_inst = match range {
            Some(q) => sub.congruence(&q)?,
            None => sub,
        };
        let op = SeriesOperator::new(&round_inst);
        let gram = self.gram.principal(active)?;
        let trace = gram.trace().max(0.0);
        let params = ConcentrationParams {
            sigma: spectral_norm(&self.m_active).sqrt().min((n_t as f64).sqrt()),
            v: gram.top_eigenvalue().max(0.0).sqrt(),
            frobenius_budget: trace,
            f: (trace / n_t as f64).sqrt(),
            n: n_t,
            d: round_inst.d(),
        };
        let x0: Vec<f64> = active.iter().map(|&i| state.x[i]).collect();

        let mut pcfg = cfg.partial;
        let per_call = pcfg.max_restarts.div_ceil(pcfg.escalate_every) as i32;
        let mut escalations = 0;
        let res = loop {
            match partial_color_with(&op, &gram, &x0, &params, &pcfg, rng) {
                Ok(r) => break r,
                Err(e @ Error::PartialColoringFailure { .. }) if escalations < cfg.max_escalations => {
                    escalations += 1;
                    pcfg.c_bound *= 2f64.powi(per_call);
                    warn!(
                        "round {}: {e}; retrying with c_bound {}",
                        state.rounds.len(),
                        pcfg.c_bound
                    );
                }
                Err(e) => return Err(e),
            }
        };

        for (j, &i) in active.iter().enumerate() {
            state.x[i] = res.x[j];
        }
        let newly: Vec<usize> = res.frozen.iter().map(|&j| active[j]).collect();
        self.m_active
            .add_scaled(&sum_of_squares(&self.work.restrict(&newly)?), -1.0);
        let record = RoundRecord {
            round: state.rounds.len(),
            active_before: n_t,
            frozen: newly.len(),
            frozen_fraction: newly.len() as f64 / n_t as f64,
            working_dim: round_inst.d(),
            sigma: params.sigma,
            v: params.v,
            f: params.f,
            subspace_dim: res.subspace_dim,
            bad_directions: res.bad_directions,
            c_bound: res.c_bound,
            radius: res.radius,
            achieved_norm: res.achieved_norm,
            restarts: res.restarts_used,
            escalations,
            projection_iterations: res.projection_iterations,
        };
        debug!("{record:?}");
        state.rounds.push(record);
        let x = &state.x;
        state.active.retain(|&i| x[i].abs() != 1.0);
        Ok(())
    }

    /// Rounds until the endgame threshold, then the endgame.
    fn run<R: Rng + ?Sized>(
        &mut self,
        state: &mut ColoringState,
        cfg: &SolveConfig,
        rng: &mut R,
    ) -> Result<(SignVector, Option<EndgameRecord>)> {
        while state.active.len() > cfg.endgame_threshold {
            self.round(state, cfg, rng)?;
        }
        if state.active.is_empty() {
            return Ok((SignVector::from_f64(&state.x)?, None));
        }
        let (signs, rec) = endgame_with(&self.op, &state.x, &state.active, cfg.endgame_threshold)?;
        Ok((signs, Some(rec)))
    }
}

/// Runs partial-coloring rounds until at most `endgame_threshold` coordinates
/// are active, then finishes them exhaustively.
pub fn solve<R: Rng + ?Sized>(
    inst: &Instance,
    cfg: &SolveConfig,
    rng: &mut R,
) -> std::result::Result<SolveReport, SolveFailure> {
    cfg.validate()?;
    inst.validate_unit_norm()?;
    let n = inst.n();
    let bounds = BoundsSummary::compute(inst, cfg.bbvh_constant)?;
    let (work, truncation) = if cfg.truncate {
        truncate_dimension(inst)?
    } else {
        (inst.clone(), None)
    };
    if let Some(t) = &truncation {
        info!("truncated d = {} to {}", t.original_dim, t.kept_dim);
    }

    let op = SeriesOperator::new(&work);
    let gram = GramMatrix::from_matrix(op.gram())?;
    let mut ws = Workspace {
        work: &work,
        op,
        gram,
        m_active: sum_of_squares(&work),
    };
    let mut state = ColoringState {
        x: vec![0.0; n],
        active: (0..n).collect(),
        rounds: Vec::new(),
    };
    let (signs, endgame) = match ws.run(&mut state, cfg, rng) {
        Ok(out) => out,
        Err(error) => {
            return Err(SolveFailure {
                error,
                rounds: state.rounds,
                x: state.x,
                active: state.active,
            })
        }
    };

    let partial_sum: f64 = state.rounds.iter().map(|r| r.achieved_norm).sum();
    let ledger_total = if endgame.is_some() {
        let mut step = DVector::zeros(n);
        for &i in &state.active {
            step[i] = signs.values()[i] as f64 - state.x[i];
        }
        partial_sum + ws.op.norm_of(&step)
    } else {
        partial_sum
    };
    let discrepancy = inst.discrepancy(&signs);
    info!("discrepancy {discrepancy:.6} after {} rounds", state.rounds.len());
    Ok(SolveReport {
        version: env!("CARGO_PKG_VERSION").to_string(),
        label: inst.label.clone(),
        n,
        d: inst.d(),
        seed: inst.seed,
        signs,
        discrepancy,
        rounds: state.rounds,
        ledger_total,
        endgame,
        truncation,
        bounds,
        config: *cfg,
    })
}

/// [`solve`] with a ChaCha8 stream seeded from `seed`; the seed is recorded in the report.
pub fn solve_seeded(inst: &Instance, cfg: &SolveConfig, seed: u64) -> std::result::Result<SolveReport, SolveFailure> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = solve(inst, cfg, &mut rng)?;
    report.seed = Some(seed);
    Ok(report)
}
