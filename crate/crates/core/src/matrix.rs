//! Dense transition matrices, bistochastic validation and entropy rates.
//!
//! Matrices are stored row-major: entry `(u, v)` is the probability that
//! original category `u` is reported as `v`.

use std::fmt::Write as _;
use std::ops::Deref;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{InvalidReason, MatrixError};

/// Row/column-sum tolerance applied to every matrix this crate constructs.
pub const CONSTRUCTION_TOL: f64 = 1e-9;
/// Default tolerance for user-supplied matrices read from text files.
pub const FILE_TOL: f64 = 1e-6;
/// Largest state count `kronecker` will materialize.
pub const KRONECKER_CAP: usize = 4096;
/// Above this epsilon the DP circulant off-diagonal is below ~2e-22.
pub const EPSILON_CAP: f64 = 50.0;

/// Outcome of checking a square grid against the stochasticity constraints.
#[derive(Debug, Clone, PartialEq)]
pub enum Validation {
    RowStochastic,
    Bistochastic,
    Invalid(InvalidReason),
}

/// Classifies a row-major `n × n` grid.
///
/// Negative entries and bad row sums make the grid invalid; a grid whose rows
/// sum to one but whose columns do not is merely row-stochastic.
pub fn validate(n: usize, entries: &[f64], tol: f64) -> Validation {
    if n == 0 {
        return Validation::Invalid(InvalidReason::Empty);
    }
    if entries.len() != n * n {
        return Validation::Invalid(InvalidReason::NotSquare {
            n,
            len: entries.len(),
        });
    }
    // one pass; entry errors still take precedence over sum errors
    let mut bad_row = None;
    let mut col_sums = vec![0.0; n];
    for (row, chunk) in entries.chunks_exact(n).enumerate() {
        let mut sum = 0.0;
        for ((col, &p), c) in chunk.iter().enumerate().zip(col_sums.iter_mut()) {
            if !p.is_finite() {
                return Validation::Invalid(InvalidReason::NonFinite { row, col });
            }
            if p < 0.0 {
                return Validation::Invalid(InvalidReason::NegativeEntry { row, col, value: p });
            }
            sum += p;
            *c += p;
        }
        if bad_row.is_none() && (sum - 1.0).abs() > tol {
            bad_row = Some(InvalidReason::RowSum { row, sum });
        }
    }
    if let Some(reason) = bad_row {
        return Validation::Invalid(reason);
    }
    if col_sums.iter().any(|s| (s - 1.0).abs() > tol) {
        Validation::RowStochastic
    } else {
        Validation::Bistochastic
    }
}

fn column_violation(n: usize, entries: &[f64], tol: f64) -> Option<InvalidReason> {
    let mut sums = vec![0.0; n];
    for row in entries.chunks_exact(n) {
        for (s, &p) in sums.iter_mut().zip(row) {
            *s += p;
        }
    }
    sums.into_iter()
        .enumerate()
        .find(|&(_, sum)| (sum - 1.0).abs() > tol)
        .map(|(col, sum)| InvalidReason::ColumnSum { col, sum })
}

/// A square right-stochastic matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl TransitionMatrix {
    pub fn new(n: usize, entries: Vec<f64>, tol: f64) -> Result<Self, InvalidReason> {
        match validate(n, &entries, tol) {
            Validation::Invalid(reason) => Err(reason),
            _ => Ok(Self { n, entries }),
        }
    }

    /// Builds from nested rows; fails unless the rows form a square grid.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, InvalidReason> {
        let (n, entries) = flatten(rows)?;
        Self::new(n, entries, CONSTRUCTION_TOL)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.entries[row * self.n + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.entries[row * self.n..(row + 1) * self.n]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.entries.chunks_exact(self.n)
    }

    pub fn is_bistochastic(&self, tol: f64) -> bool {
        column_violation(self.n, &self.entries, tol).is_none()
    }

    pub fn into_bistochastic(self, tol: f64) -> Result<BistochasticMatrix, InvalidReason> {
        match column_violation(self.n, &self.entries, tol) {
            Some(reason) => Err(reason),
            None => Ok(BistochasticMatrix(self)),
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{}\n", self.n);
        for row in self.rows() {
            for (j, p) in row.iter().enumerate() {
                if j > 0 {
                    out.push(' ');
                }
                // shortest round-trip representation
                write!(out, "{p}").unwrap();
            }
            out.push('\n');
        }
        out
    }
}

fn flatten(rows: &[Vec<f64>]) -> Result<(usize, Vec<f64>), InvalidReason> {
    let n = rows.len();
    if n == 0 {
        return Err(InvalidReason::Empty);
    }
    let mut entries = Vec::with_capacity(n * n);
    for row in rows {
        if row.len() != n {
            return Err(InvalidReason::NotSquare {
                n,
                len: n * (n - 1) + row.len(),
            });
        }
        entries.extend_from_slice(row);
    }
    Ok((n, entries))
}

/// A transition matrix whose columns also sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct BistochasticMatrix(TransitionMatrix);

impl Deref for BistochasticMatrix {
    type Target = TransitionMatrix;

    fn deref(&self) -> &TransitionMatrix {
        &self.0
    }
}

impl BistochasticMatrix {
    pub fn new(n: usize, entries: Vec<f64>, tol: f64) -> Result<Self, InvalidReason> {
        match validate(n, &entries, tol) {
            Validation::Bistochastic => Ok(Self(TransitionMatrix { n, entries })),
            Validation::RowStochastic => {
                Err(column_violation(n, &entries, tol).expect("row-stochastic has a bad column"))
            }
            Validation::Invalid(reason) => Err(reason),
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, InvalidReason> {
        let (n, entries) = flatten(rows)?;
        Self::new(n, entries, CONSTRUCTION_TOL)
    }

    pub(crate) fn from_parts_unchecked(n: usize, entries: Vec<f64>) -> Self {
        debug_assert_eq!(
            validate(n, &entries, CONSTRUCTION_TOL),
            Validation::Bistochastic
        );
        Self(TransitionMatrix { n, entries })
    }

    pub fn identity(n: usize) -> Result<Self, MatrixError> {
        if n == 0 {
            return Err(MatrixError::TooSmall { n, min: 1 });
        }
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            entries[i * n + i] = 1.0;
        }
        Ok(Self::from_parts_unchecked(n, entries))
    }

    pub fn transition(&self) -> &TransitionMatrix {
        &self.0
    }

    pub fn into_transition(self) -> TransitionMatrix {
        self.0
    }

    /// `lambda * self + (1 - lambda) * other`.
    pub fn convex_combination(
        &self,
        other: &BistochasticMatrix,
        lambda: f64,
    ) -> Result<Self, MatrixError> {
        if self.n != other.n {
            return Err(InvalidReason::NotSquare {
                n: self.n,
                len: other.entries.len(),
            }
            .into());
        }
        if !(0.0..=1.0).contains(&lambda) {
            return Err(MatrixError::BadBeta(lambda));
        }
        let entries = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(p, q)| lambda * p + (1.0 - lambda) * q)
            .collect();
        Ok(Self::new(self.n, entries, CONSTRUCTION_TOL)?)
    }

    pub fn from_text(text: &str, tol: f64) -> Result<Self, MatrixError> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| MatrixError::Parse("missing size line".into()))?;
        let n: usize = header
            .trim()
            .parse()
            .map_err(|_| MatrixError::Parse(format!("bad size line {header:?}")))?;
        let mut entries = Vec::with_capacity(n * n);
        for (i, line) in lines.enumerate() {
            if i >= n {
                return Err(MatrixError::Parse(format!("more than {n} rows")));
            }
            let row: Vec<f64> = line
                .split_whitespace()
                .map(|tok| {
                    tok.parse::<f64>()
                        .map_err(|_| MatrixError::Parse(format!("bad number {tok:?} in row {i}")))
                })
                .collect::<Result<_, _>>()?;
            if row.len() != n {
                return Err(MatrixError::Parse(format!(
                    "row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            entries.extend(row);
        }
        if entries.len() != n * n {
            return Err(MatrixError::Parse(format!(
                "expected {n} rows, got {}",
                entries.len() / n.max(1)
            )));
        }
        Ok(Self::new(n, entries, tol)?)
    }

    pub fn read_file(path: &Path, tol: f64) -> Result<Self, MatrixError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_text(&text, tol)
    }

    pub fn write_file(&self, path: &Path) -> Result<(), MatrixError> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

/// Entropy measurement of a bistochastic matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyReport {
    pub n: usize,
    /// Entropy rate in bits.
    pub bits: f64,
    /// `log2 n`, the entropy rate of the perfect-secrecy matrix.
    pub max_bits: f64,
    pub beta: f64,
}

impl EntropyReport {
    /// Stationary distribution; uniform for every bistochastic matrix.
    pub fn stationary(&self) -> Vec<f64> {
        vec![1.0 / self.n as f64; self.n]
    }
}

/// Shannon entropy in bits of a probability vector, with `0 log 0 = 0`.
pub fn shannon_bits(probs: &[f64]) -> f64 {
    // written as a subtraction so a zero entropy is +0.0, never -0.0
    0.0 - probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * p.log2())
        .sum::<f64>()
}

/// Entropy rate of a bistochastic matrix: the mean of its row entropies.
pub fn entropy_rate(p: &BistochasticMatrix) -> EntropyReport {
    let n = p.n();
    let max_bits = (n as f64).log2();
    let first = p.entries()[0];
    let bits = if p.entries().iter().all(|&x| x == first) {
        // all entries equal: P* exactly
        max_bits
    } else {
        let sum: f64 = p.rows().map(shannon_bits).sum();
        (sum / n as f64).clamp(0.0, max_bits)
    };
    let beta = if n == 1 { 0.0 } else { bits / max_bits };
    EntropyReport {
        n,
        bits,
        max_bits,
        beta,
    }
}

/// The perfect-secrecy matrix `P*` with every entry `1/n`.
pub fn perfect_secrecy_matrix(n: usize) -> Result<BistochasticMatrix, MatrixError> {
    if n == 0 {
        return Err(MatrixError::TooSmall { n, min: 1 });
    }
    Ok(BistochasticMatrix::from_parts_unchecked(
        n,
        vec![1.0 / n as f64; n * n],
    ))
}

/// Symmetric circulant matrix with diagonal `e^ε/(e^ε + n − 1)` and
/// off-diagonal `1/(e^ε + n − 1)`, the ε-differentially private
/// randomized-response parameterization.
pub fn dp_circulant_matrix(n: usize, epsilon: f64) -> Result<BistochasticMatrix, MatrixError> {
    if n < 2 {
        return Err(MatrixError::TooSmall { n, min: 2 });
    }
    if !epsilon.is_finite() || epsilon < 0.0 {
        return Err(MatrixError::BadEpsilon(epsilon));
    }
    if epsilon > EPSILON_CAP {
        log::warn!(
            "epsilon {epsilon} exceeds cap {EPSILON_CAP}: off-diagonal entries are below 1e-21, \
             the matrix is effectively the identity"
        );
    }
    // divide through by e^ε so nothing overflows
    let shrink = (-epsilon).exp();
    let denom = 1.0 + (n as f64 - 1.0) * shrink;
    let diag = 1.0 / denom;
    let off = shrink / denom;
    let mut entries = vec![off; n * n];
    for i in 0..n {
        entries[i * n + i] = diag;
    }
    Ok(BistochasticMatrix::from_parts_unchecked(n, entries))
}

/// Block-diagonal matrix of perfect-secrecy blocks of the given sizes.
pub fn k_anon_block_matrix(partition: &[usize]) -> Result<BistochasticMatrix, MatrixError> {
    if partition.is_empty() {
        return Err(MatrixError::EmptyPartition);
    }
    if partition.contains(&0) {
        return Err(MatrixError::ZeroBlock);
    }
    let blocks = partition
        .iter()
        .map(|&k| perfect_secrecy_matrix(k))
        .collect::<Result<Vec<_>, _>>()?;
    block_diagonal(&blocks)
}

/// `(1 − α) I + α P*`.
pub fn interpolated_matrix(n: usize, alpha: f64) -> BistochasticMatrix {
    let off = alpha / n as f64;
    let diag = 1.0 - alpha + off;
    let mut entries = vec![off; n * n];
    for i in 0..n {
        entries[i * n + i] = diag;
    }
    BistochasticMatrix::from_parts_unchecked(n, entries)
}

/// Result of entropy targeting: the matrix and the mixing weight used.
#[derive(Debug, Clone)]
pub struct EntropyTarget {
    pub matrix: BistochasticMatrix,
    pub alpha: f64,
    pub report: EntropyReport,
}

/// Width of the acceptance window above the target beta.
pub const BETA_WINDOW: f64 = 1e-6;

/// Finds the smallest `α` (to bisection precision) for which
/// `(1 − α) I + α P*` reaches `beta_target`, stopping once the achieved beta
/// lies in `[beta_target, beta_target + BETA_WINDOW]`.
pub fn entropy_target_matrix(n: usize, beta_target: f64) -> Result<EntropyTarget, MatrixError> {
    if n < 2 {
        return Err(MatrixError::TooSmall { n, min: 2 });
    }
    if !(0.0..=1.0).contains(&beta_target) {
        return Err(MatrixError::BadBeta(beta_target));
    }
    let finish = |alpha: f64| {
        let matrix = if alpha >= 1.0 {
            perfect_secrecy_matrix(n).expect("n >= 2")
        } else {
            interpolated_matrix(n, alpha)
        };
        let report = entropy_rate(&matrix);
        EntropyTarget {
            matrix,
            alpha,
            report,
        }
    };
    if beta_target == 0.0 {
        return Ok(finish(0.0));
    }
    if beta_target == 1.0 {
        return Ok(finish(1.0));
    }
    let beta_at = |alpha: f64| entropy_rate(&interpolated_matrix(n, alpha)).beta;
    // invariant: beta(lo) < target <= beta(hi)
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    if beta_at(hi) < beta_target {
        return Ok(finish(1.0));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let beta = beta_at(mid);
        if beta >= beta_target {
            hi = mid;
            if beta - beta_target <= BETA_WINDOW {
                break;
            }
        } else {
            lo = mid;
        }
    }
    Ok(finish(hi))
}

/// Places the blocks along the diagonal of an `N × N` matrix, `N = Σ n_t`.
pub fn block_diagonal(blocks: &[BistochasticMatrix]) -> Result<BistochasticMatrix, MatrixError> {
    if blocks.is_empty() {
        return Err(MatrixError::EmptyPartition);
    }
    let total: usize = blocks.iter().map(|b| b.n()).sum();
    let mut entries = vec![0.0; total * total];
    let mut offset = 0;
    for block in blocks {
        let k = block.n();
        for (i, row) in block.rows().enumerate() {
            let start = (offset + i) * total + offset;
            entries[start..start + k].copy_from_slice(row);
        }
        offset += k;
    }
    Ok(BistochasticMatrix::from_parts_unchecked(total, entries))
}

/// Kronecker product with entry `((i,j),(k,l)) = p_ik · q_jl`, capped at
/// [`KRONECKER_CAP`] states.
pub fn kronecker(
    p: &BistochasticMatrix,
    q: &BistochasticMatrix,
) -> Result<BistochasticMatrix, MatrixError> {
    kronecker_capped(p, q, KRONECKER_CAP)
}

pub fn kronecker_capped(
    p: &BistochasticMatrix,
    q: &BistochasticMatrix,
    cap: usize,
) -> Result<BistochasticMatrix, MatrixError> {
    let (m, n) = (p.n(), q.n());
    let size = m.checked_mul(n).ok_or(MatrixError::SizeCap {
        size: usize::MAX,
        cap,
    })?;
    if size > cap {
        return Err(MatrixError::SizeCap { size, cap });
    }
    let mut entries = vec![0.0; size * size];
    // output row (i, j) is p's row i with each entry scaled into q's row j
    for (row, out) in entries.chunks_exact_mut(size).enumerate() {
        let (i, j) = (row / n, row % n);
        let q_row = q.row(j);
        for (block, &pik) in out.chunks_exact_mut(n).zip(p.row(i)) {
            if pik == 0.0 {
                continue;
            }
            for (o, &qjl) in block.iter_mut().zip(q_row) {
                *o = pik * qjl;
            }
        }
    }
    Ok(BistochasticMatrix::new(size, entries, CONSTRUCTION_TOL)?)
}
