//! Reference colorings: uniform random signs, the Gaussian-series norm, and
//! exhaustive search.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::instance::{Instance, SignVector};
use crate::operator::SeriesOperator;

/// Largest `n` [`brute_force_min`] accepts.
pub const BRUTE_FORCE_LIMIT: usize = 24;

/// Number of extremal eigenvectors kept for pruning.
const PRUNING_VECTORS: usize = 64;

/// Uniform random signs and their discrepancy.
pub fn random_coloring<R: Rng + ?Sized>(inst: &Instance, rng: &mut R) -> (SignVector, f64) {
    let signs: Vec<i8> = (0..inst.n())
        .map(|_| if rng.random::<bool>() { 1 } else { -1 })
        .collect();
    let signs = SignVector::new(signs).expect("entries are +-1");
    let disc = inst.discrepancy(&signs);
    (signs, disc)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloEstimate {
    pub mean: f64,
    /// Standard error of the mean; zero for a single sample.
    pub stderr: f64,
    pub samples: usize,
}

/// Independent generator for sample `k` of a batch seeded by `base`.
fn sample_rng(base: u64, k: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(base);
    rng.set_stream(k as u64);
    rng
}

/// Estimates `E ||sum_i g_i A_i||_op` for independent standard Gaussians `g_i`.
///
/// One seed is drawn from `rng` and every sample gets its own stream, so the
/// result does not depend on the size of the rayon thread pool.
pub fn monte_carlo_gaussian_norm<R: Rng + ?Sized>(
    inst: &Instance,
    samples: usize,
    rng: &mut R,
) -> Result<MonteCarloEstimate> {
    if samples == 0 {
        return Err(invalid("need at least one sample"));
    }
    let op = SeriesOperator::new(inst);
    let base: u64 = rng.random();
    let norms: Vec<f64> = (0..samples)
        .into_par_iter()
        .map(|k| {
            let mut r = sample_rng(base, k);
            let g = DVector::from_iterator(inst.n(), (0..inst.n()).map(|_| r.sample::<f64, _>(StandardNormal)));
            op.norm_of(&g)
        })
        .collect();
    let k = samples as f64;
    let mean = norms.iter().sum::<f64>() / k;
    let stderr = if samples > 1 {
        let var = norms.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0);
        (var / k).sqrt()
    } else {
        0.0
    };
    Ok(MonteCarloEstimate { mean, stderr, samples })
}

/// Mean and standard error of the discrepancy of `trials` uniformly random colorings.
pub fn random_coloring_stats<R: Rng + ?Sized>(
    inst: &Instance,
    trials: usize,
    rng: &mut R,
) -> Result<MonteCarloEstimate> {
    if trials == 0 {
        return Err(invalid("need at least one trial"));
    }
    let op = SeriesOperator::new(inst);
    let base: u64 = rng.random();
    let norms: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|k| {
            let mut r = sample_rng(base, k);
            let x = DVector::from_iterator(
                inst.n(),
                (0..inst.n()).map(|_| if r.random::<bool>() { 1.0 } else { -1.0 }),
            );
            op.norm_of(&x)
        })
        .collect();
    let k = trials as f64;
    let mean = norms.iter().sum::<f64>() / k;
    let stderr = if trials > 1 {
        let var = norms.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0);
        (var / k).sqrt()
    } else {
        0.0
    };
    Ok(MonteCarloEstimate {
        mean,
        stderr,
        samples: trials,
    })
}

/// Outcome of an exhaustive search over the free coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct ExhaustiveResult {
    /// Signs of the free coordinates, in the order they were given.
    pub signs: Vec<i8>,
    pub norm: f64,
    /// Candidates whose norm was computed by an eigendecomposition.
    pub evaluated: u64,
    /// Candidates ruled out by a stored eigenvector.
    pub pruned: u64,
}

/// A unit vector `v` with cached `v^T F v` and `v^T A_j v` for the free `j`.
struct Witness {
    value: f64,
    forms: Vec<f64>,
}

/// Minimizes `||F + sum_j s_j A_{free_j}||_op` over `s in {-1, +1}^k`.
///
/// Candidates are visited in lexicographic order with `+1 < -1`, so the
/// first free coordinate is the most significant; the first minimizer in that
/// order wins. A candidate is skipped when some stored eigenvector `v` already
/// shows `|v^T S v|` above the best norm found.
pub(crate) fn exhaustive_search(op: &SeriesOperator, fixed: &DVector<f64>, free: &[usize]) -> Result<ExhaustiveResult> {
    let k = free.len();
    if k >= 63 {
        return Err(Error::TooLarge { n: k, limit: 62 });
    }
    if k == 0 {
        return Ok(ExhaustiveResult {
            signs: Vec::new(),
            norm: op.norm_packed(fixed),
            evaluated: 1,
            pruned: 0,
        });
    }
    let mut signs = vec![1.0f64; k];
    let mut current = fixed.clone();
    for &j in free {
        current.axpy(1.0, &op.column(j), 1.0);
    }

    let mut witnesses: Vec<Witness> = Vec::new();
    let mut next_slot = 0usize;
    let mut best_norm = f64::INFINITY;
    let mut best_code = 0u64;
    let mut evaluated = 0u64;
    let mut pruned = 0u64;

    let total = 1u64 << k;
    for code in 0..total {
        if code > 0 {
            // Flip the bits that changed between code - 1 and code.
            let changed = (code - 1) ^ code;
            for bit in 0..k {
                if changed & (1u64 << bit) == 0 {
                    continue;
                }
                let pos = k - 1 - bit;
                signs[pos] = -signs[pos];
                let col = op.column(free[pos]);
                current.axpy(2.0 * signs[pos], &col, 1.0);
                for w in &mut witnesses {
                    w.value += 2.0 * signs[pos] * w.forms[pos];
                }
            }
        }
        let lower = witnesses.iter().map(|w| w.value.abs()).fold(0.0, f64::max);
        if lower > best_norm * (1.0 + 1e-12) + 1e-14 {
            pruned += 1;
            continue;
        }
        let (norm, v) = op.extremal_pair(&current)?;
        evaluated += 1;
        let forms_all = op.quadratic_forms(&v);
        let forms: Vec<f64> = free.iter().map(|&j| forms_all[j]).collect();
        let value = op.inner(&current, &op.pack_outer(&v));
        let w = Witness { value, forms };
        if witnesses.len() < PRUNING_VECTORS {
            witnesses.push(w);
        } else {
            witnesses[next_slot] = w;
            next_slot = (next_slot + 1) % PRUNING_VECTORS;
        }
        if norm < best_norm {
            best_norm = norm;
            best_code = code;
        }
    }
    let signs = (0..k)
        .map(|pos| {
            if best_code & (1u64 << (k - 1 - pos)) == 0 {
                1
            } else {
                -1
            }
        })
        .collect();
    Ok(ExhaustiveResult {
        signs,
        norm: best_norm,
        evaluated,
        pruned,
    })
}

/// Exact minimum of `||sum_i x_i A_i||_op` over `x in {-1, +1}^n` with `x_1 = +1`.
///
/// The objective is invariant under `x -> -x`, so fixing the first sign loses
/// nothing. Ties go to the lexicographically first minimizer with `+1 < -1`.
pub fn brute_force_min(inst: &Instance) -> Result<(SignVector, f64)> {
    let n = inst.n();
    if n > BRUTE_FORCE_LIMIT {
        return Err(Error::TooLarge {
            n,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    if n == 0 {
        return Ok((SignVector::new(Vec::new())?, 0.0));
    }
    let op = SeriesOperator::new(inst);
    let fixed = op.apply_subset(&[0], &[1.0]);
    let free: Vec<usize> = (1..n).collect();
    let res = exhaustive_search(&op, &fixed, &free)?;
    let mut signs = vec![1i8];
    signs.extend(res.signs);
    let signs = SignVector::new(signs)?;
    let disc = inst.discrepancy(&signs);
    Ok((signs, disc))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{generate_diagonal_spencer, generate_low_rank_random, generate_lower_bound};
    use crate::linalg::SymmetricMatrix;

    /// Plain enumeration without pruning.
    fn naive_min(inst: &Instance) -> (Vec<i8>, f64) {
        let n = inst.n();
        let mut best = (Vec::new(), f64::INFINITY);
        for code in 0..(1u64 << (n - 1)) {
            let mut x = vec![1i8];
            x.extend((1..n).map(|pos| if code & (1u64 << (n - 1 - pos)) == 0 { 1 } else { -1 }));
            let d = inst.discrepancy(&SignVector::new(x.clone()).unwrap());
            if d < best.1 {
                best = (x, d);
            }
        }
        best
    }

    #[test]
    fn pruned_search_matches_naive_enumeration() {
        for seed in 0..4 {
            for inst in [
                generate_low_rank_random(9, 5, 2, seed).unwrap(),
                generate_diagonal_spencer(9, 6, seed).unwrap(),
                generate_lower_bound(8).unwrap(),
            ] {
                let (signs, disc) = brute_force_min(&inst).unwrap();
                let (naive_signs, naive_disc) = naive_min(&inst);
                assert!((disc - naive_disc).abs() < 1e-12, "{disc} vs {naive_disc}");
                if (disc - naive_disc).abs() < 1e-15 {
                    assert_eq!(signs.values(), &naive_signs[..]);
                }
            }
        }
    }

    #[test]
    fn two_identical_matrices_cancel() {
        let a = SymmetricMatrix::from_row_major(2, &[1.0, 0.0, 0.0, -0.5]).unwrap();
        let inst = Instance::new(vec![a.clone(), a], "pair", None).unwrap();
        let (signs, disc) = brute_force_min(&inst).unwrap();
        assert_eq!(signs.values(), &[1, -1]);
        assert_eq!(disc, 0.0);
    }

    #[test]
    fn refuses_large_instances() {
        let inst = Instance::zeros(25, 1).unwrap();
        assert!(matches!(
            brute_force_min(&inst),
            Err(Error::TooLarge { n: 25, limit: 24 })
        ));
    }

    #[test]
    fn monte_carlo_on_scalar_series() {
        // For d = 1 and A_i = 1, the norm is |N(0, n)| with mean sqrt(2 n / pi).
        let inst = Instance::new(vec![SymmetricMatrix::identity(1); 4], "ones", None).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let est = monte_carlo_gaussian_norm(&inst, 4000, &mut rng).unwrap();
        let exact = (2.0 * 4.0 / std::f64::consts::PI).sqrt();
        assert!((est.mean - exact).abs() < 4.0 * est.stderr, "{est:?} vs {exact}");
        assert!(monte_carlo_gaussian_norm(&inst, 0, &mut rng).is_err());
    }

    #[test]
    fn random_coloring_reports_its_discrepancy() {
        let inst = generate_low_rank_random(10, 4, 1, 0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let (signs, disc) = random_coloring(&inst, &mut rng);
        assert_eq!(disc, inst.discrepancy(&signs));
    }
}
