//! Sinkhorn-Knopp scaling of a nonnegative square grid onto the Birkhoff
//! polytope.

use crate::error::{InvalidReason, LineKind, MatrixError};
use crate::matrix::BistochasticMatrix;

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 10_000;

#[derive(Debug, Clone)]
pub struct SinkhornResult {
    pub matrix: BistochasticMatrix,
    /// Row+column sweeps performed; zero when the input was already within
    /// tolerance.
    pub iterations: usize,
    pub residual: f64,
}

/// Largest deviation of any row or column sum from one.
pub fn marginal_residual(n: usize, entries: &[f64]) -> f64 {
    let rows = entries
        .chunks_exact(n)
        .map(|r| (r.iter().sum::<f64>() - 1.0).abs());
    let cols = (0..n).map(|j| ((0..n).map(|i| entries[i * n + j]).sum::<f64>() - 1.0).abs());
    rows.chain(cols).fold(0.0, f64::max)
}

/// Alternately rescales rows and columns until every marginal is within
/// `tol` of one.
///
/// Inputs with an all-zero row or column are rejected up front. Inputs
/// without total support (e.g. `[[1,1],[0,1]]`) converge only in the limit
/// and surface as [`MatrixError::NoConvergence`].
pub fn sinkhorn_project(
    n: usize,
    entries: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<SinkhornResult, MatrixError> {
    if n == 0 {
        return Err(InvalidReason::Empty.into());
    }
    if entries.len() != n * n {
        return Err(InvalidReason::NotSquare {
            n,
            len: entries.len(),
        }
        .into());
    }
    for (idx, &x) in entries.iter().enumerate() {
        if !x.is_finite() {
            return Err(InvalidReason::NonFinite {
                row: idx / n,
                col: idx % n,
            }
            .into());
        }
        if x < 0.0 {
            return Err(InvalidReason::NegativeEntry {
                row: idx / n,
                col: idx % n,
                value: x,
            }
            .into());
        }
    }
    if let Some(i) = (0..n).find(|&i| entries[i * n..(i + 1) * n].iter().all(|&x| x == 0.0)) {
        return Err(MatrixError::ZeroLine {
            kind: LineKind::Row,
            index: i,
        });
    }
    if let Some(j) = (0..n).find(|&j| (0..n).all(|i| entries[i * n + j] == 0.0)) {
        return Err(MatrixError::ZeroLine {
            kind: LineKind::Column,
            index: j,
        });
    }

    let mut m = entries.to_vec();
    let mut residual = marginal_residual(n, &m);
    let mut iterations = 0;
    while residual >= tol {
        if iterations == max_iter {
            return Err(MatrixError::NoConvergence {
                iterations,
                residual,
            });
        }
        for row in m.chunks_exact_mut(n) {
            let s: f64 = row.iter().sum();
            row.iter_mut().for_each(|x| *x /= s);
        }
        for j in 0..n {
            let s: f64 = (0..n).map(|i| m[i * n + j]).sum();
            for i in 0..n {
                m[i * n + j] /= s;
            }
        }
        iterations += 1;
        residual = marginal_residual(n, &m);
    }
    Ok(SinkhornResult {
        matrix: BistochasticMatrix::new(n, m, tol.max(crate::matrix::CONSTRUCTION_TOL))?,
        iterations,
        residual,
    })
}

/// [`sinkhorn_project`] with the default tolerance and iteration budget.
pub fn sinkhorn_default(n: usize, entries: &[f64]) -> Result<SinkhornResult, MatrixError> {
    sinkhorn_project(n, entries, DEFAULT_TOL, DEFAULT_MAX_ITER)
}
