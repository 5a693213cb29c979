//! Brute-force cross-checks of the closed forms the ledger relies on.
//!
//! Everything here materializes the full block-diagonal or Kronecker matrix
//! and measures it directly, so it is limited to small state spaces.

use rand::Rng;

use crate::error::MatrixError;
use crate::matrix::{
    block_diagonal, entropy_rate, kronecker_capped, BistochasticMatrix, TransitionMatrix,
    KRONECKER_CAP,
};
use crate::randomizer::{pram_apply, CategoricalColumn, Substream};
use crate::sinkhorn::sinkhorn_project;

/// Left-associated Kronecker product of the chain.
pub fn kron_chain(ps: &[BistochasticMatrix]) -> Result<BistochasticMatrix, MatrixError> {
    let (first, rest) = ps.split_first().ok_or(MatrixError::EmptyPartition)?;
    let size = ps
        .iter()
        .try_fold(1usize, |acc, p| acc.checked_mul(p.n()))
        .unwrap_or(usize::MAX);
    if size > KRONECKER_CAP {
        return Err(MatrixError::SizeCap {
            size,
            cap: KRONECKER_CAP,
        });
    }
    rest.iter().try_fold(first.clone(), |acc, p| {
        kronecker_capped(&acc, p, KRONECKER_CAP)
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityCheck {
    /// Entropy rate of the materialized matrix.
    pub direct_bits: f64,
    /// Closed-form value from the component entropies.
    pub closed_form_bits: f64,
    pub delta: f64,
}

impl IdentityCheck {
    fn new(direct_bits: f64, closed_form_bits: f64) -> Self {
        Self {
            direct_bits,
            closed_form_bits,
            delta: (direct_bits - closed_form_bits).abs(),
        }
    }
}

/// Block-diagonal entropy vs. the size-weighted mean of block entropies.
pub fn verify_block_weighted_mean(
    blocks: &[BistochasticMatrix],
) -> Result<IdentityCheck, MatrixError> {
    let direct = entropy_rate(&block_diagonal(blocks)?).bits;
    let total: usize = blocks.iter().map(|b| b.n()).sum();
    let weighted = blocks
        .iter()
        .map(|b| b.n() as f64 / total as f64 * entropy_rate(b).bits)
        .sum();
    Ok(IdentityCheck::new(direct, weighted))
}

/// Kronecker-chain entropy vs. the sum of factor entropies.
pub fn verify_kronecker_sum(ps: &[BistochasticMatrix]) -> Result<IdentityCheck, MatrixError> {
    let direct = entropy_rate(&kron_chain(ps)?).bits;
    let summed = ps.iter().map(|p| entropy_rate(p).bits).sum();
    Ok(IdentityCheck::new(direct, summed))
}

/// Uniform `(0, 1]` entries Sinkhorn-scaled to tolerance 1e-12.
pub fn random_bistochastic<R: Rng + ?Sized>(n: usize, rng: &mut R) -> BistochasticMatrix {
    let grid: Vec<f64> = (0..n * n).map(|_| 1.0 - rng.gen::<f64>()).collect();
    sinkhorn_project(n, &grid, 1e-12, 100_000)
        .expect("strictly positive grids have total support")
        .matrix
}

/// Runs PRAM over `counts_per_category` synthetic individuals per category
/// and returns the worst standardized deviation `|p̂_uv − p_uv| / σ_uv`,
/// `σ_uv = sqrt(p_uv (1 − p_uv) / N_u)`. Degenerate cells (`p_uv` of 0 or 1)
/// count as 0 when matched exactly and infinity otherwise.
pub fn mc_transition_check(p: &TransitionMatrix, counts_per_category: usize, seed: u64) -> f64 {
    let r = p.n();
    let catalog: Vec<String> = (0..r).map(|i| i.to_string()).collect();
    let values: Vec<usize> = (0..r)
        .flat_map(|u| std::iter::repeat_n(u, counts_per_category))
        .collect();
    let column = CategoricalColumn::complete(catalog, values).expect("indices in range");
    let outcome = pram_apply(&column, p, Substream::new(seed, 0, 0)).expect("sizes match");
    let counts = outcome.transition_counts.expect("categorical outcome");
    worst_deviation(p, &counts)
}

/// Worst standardized deviation of observed transition counts from `p`.
pub fn worst_deviation(p: &TransitionMatrix, counts: &[Vec<u64>]) -> f64 {
    let mut worst = 0.0_f64;
    for (u, row) in counts.iter().enumerate() {
        let n_u: u64 = row.iter().sum();
        if n_u == 0 {
            continue;
        }
        for (v, &c) in row.iter().enumerate() {
            let expected = p.get(u, v);
            let observed = c as f64 / n_u as f64;
            let sigma = (expected * (1.0 - expected) / n_u as f64).sqrt();
            let dev = if sigma > 0.0 {
                (observed - expected).abs() / sigma
            } else if (observed - expected).abs() < 1e-15 {
                0.0
            } else {
                f64::INFINITY
            };
            worst = worst.max(dev);
        }
    }
    worst
}

/// Plug-in mutual information, in bits, of a joint count table.
pub fn mutual_information_bits(counts: &[Vec<u64>]) -> f64 {
    let total: u64 = counts.iter().flatten().sum();
    if total == 0 {
        return 0.0;
    }
    let total = total as f64;
    let rows: Vec<f64> = counts
        .iter()
        .map(|r| r.iter().sum::<u64>() as f64)
        .collect();
    let cols: Vec<f64> = (0..counts.first().map_or(0, Vec::len))
        .map(|v| counts.iter().map(|r| r[v]).sum::<u64>() as f64)
        .collect();
    let mut mi = 0.0;
    for (u, row) in counts.iter().enumerate() {
        for (v, &c) in row.iter().enumerate() {
            if c == 0 {
                continue;
            }
            let c = c as f64;
            mi += c / total * (c * total / (rows[u] * cols[v])).log2();
        }
    }
    mi.max(0.0)
}

/// Shannon entropy, in bits, of an empirical category histogram.
pub fn empirical_entropy_bits(histogram: &[u64]) -> f64 {
    let total: u64 = histogram.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let probs: Vec<f64> = histogram.iter().map(|&c| c as f64 / total as f64).collect();
    crate::matrix::shannon_bits(&probs)
}
