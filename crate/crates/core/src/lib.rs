//! Signed sums of symmetric matrices with small spectral norm.
//!
//! Given symmetric `A_1, ..., A_n` with `||A_i||_op <= 1`, [`solve`] finds
//! signs `x in {-1, +1}^n` making `||sum_i x_i A_i||_op` small by repeated
//! partial coloring: sample a Gaussian in a subspace where the series has
//! small covariance norm, project it onto the spectral-norm body intersected
//! with the cube, freeze coordinates that reach `+-1`, and recurse.

pub mod baselines;
pub mod coloring;
pub mod error;
pub mod instance;
pub mod linalg;
pub mod operator;
pub mod params;
pub mod partial;
pub mod projection;
pub mod subspace;
pub mod verify;

pub use baselines::{
    brute_force_min, monte_carlo_gaussian_norm, random_coloring, random_coloring_stats, MonteCarloEstimate,
};
pub use coloring::{
    endgame_exhaustive, solve, solve_seeded, truncate_dimension, SolveConfig, SolveFailure, SolveReport,
};
pub use error::{Error, ParseError, Result};
pub use instance::{Family, Instance, SignVector};
pub use linalg::{EigenDecomposition, SubspaceBasis, SymmetricMatrix};
pub use params::{ConcentrationParams, GramMatrix};
pub use partial::{partial_color, ConstantsMode, PartialColoringConfig, PartialColoringResult};
pub use projection::ProjectionConfig;
