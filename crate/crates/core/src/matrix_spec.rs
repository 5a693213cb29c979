use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::MatrixError;
use crate::matrix::{
    dp_circulant_matrix, entropy_target_matrix, k_anon_block_matrix, perfect_secrecy_matrix,
    BistochasticMatrix, FILE_TOL,
};

/// How a period's transition matrix is parameterized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MatrixSpec {
    PerfectSecrecy { n: usize },
    DpCirculant { n: usize, epsilon: f64 },
    KAnonBlocks { partition: Vec<usize> },
    EntropyTarget { n: usize, beta: f64 },
    Identity { n: usize },
    Custom { path: PathBuf },
}

impl MatrixSpec {
    /// State count, when it is known without reading a file.
    pub fn n(&self) -> Option<usize> {
        match self {
            MatrixSpec::PerfectSecrecy { n }
            | MatrixSpec::DpCirculant { n, .. }
            | MatrixSpec::EntropyTarget { n, .. }
            | MatrixSpec::Identity { n } => Some(*n),
            MatrixSpec::KAnonBlocks { partition } => Some(partition.iter().sum()),
            MatrixSpec::Custom { .. } => None,
        }
    }

    pub fn check(&self) -> Result<(), MatrixError> {
        match self {
            MatrixSpec::PerfectSecrecy { n } | MatrixSpec::Identity { n } if *n == 0 => {
                Err(MatrixError::TooSmall { n: 0, min: 1 })
            }
            MatrixSpec::DpCirculant { n, epsilon } => {
                if *n < 2 {
                    Err(MatrixError::TooSmall { n: *n, min: 2 })
                } else if !epsilon.is_finite() || *epsilon < 0.0 {
                    Err(MatrixError::BadEpsilon(*epsilon))
                } else {
                    Ok(())
                }
            }
            MatrixSpec::EntropyTarget { n, beta } => {
                if *n < 2 {
                    Err(MatrixError::TooSmall { n: *n, min: 2 })
                } else if !(0.0..=1.0).contains(beta) {
                    Err(MatrixError::BadBeta(*beta))
                } else {
                    Ok(())
                }
            }
            MatrixSpec::KAnonBlocks { partition } => {
                if partition.is_empty() {
                    Err(MatrixError::EmptyPartition)
                } else if partition.contains(&0) {
                    Err(MatrixError::ZeroBlock)
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    /// Builds the matrix. Custom files are read at [`FILE_TOL`].
    pub fn build(&self) -> Result<BistochasticMatrix, MatrixError> {
        self.check()?;
        match self {
            MatrixSpec::PerfectSecrecy { n } => perfect_secrecy_matrix(*n),
            MatrixSpec::DpCirculant { n, epsilon } => dp_circulant_matrix(*n, *epsilon),
            MatrixSpec::KAnonBlocks { partition } => k_anon_block_matrix(partition),
            MatrixSpec::EntropyTarget { n, beta } => Ok(entropy_target_matrix(*n, *beta)?.matrix),
            MatrixSpec::Identity { n } => BistochasticMatrix::identity(*n),
            MatrixSpec::Custom { path } => BistochasticMatrix::read_file(path, FILE_TOL),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn serde_shape() {
        let spec = MatrixSpec::DpCirculant { n: 4, epsilon: 1.5 };
        let json = serde_json::to_string(&spec).unwrap();
        assert_eq!(json, r#"{"kind":"dp_circulant","n":4,"epsilon":1.5}"#);
        let back: MatrixSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, spec);
    }

    #[test]
    fn check_rejects_bad_parameters() {
        assert!(MatrixSpec::DpCirculant {
            n: 3,
            epsilon: -1.0
        }
        .check()
        .is_err());
        assert!(MatrixSpec::EntropyTarget { n: 3, beta: 1.01 }
            .check()
            .is_err());
        assert!(MatrixSpec::KAnonBlocks { partition: vec![] }
            .check()
            .is_err());
        assert!(MatrixSpec::PerfectSecrecy { n: 0 }.check().is_err());
        assert_eq!(
            MatrixSpec::KAnonBlocks {
                partition: vec![2, 3]
            }
            .n(),
            Some(5)
        );
    }

    #[test]
    fn build_matches_constructors() {
        assert_eq!(
            MatrixSpec::PerfectSecrecy { n: 3 }.build().unwrap(),
            perfect_secrecy_matrix(3).unwrap()
        );
        assert_eq!(
            MatrixSpec::Identity { n: 3 }.build().unwrap(),
            BistochasticMatrix::identity(3).unwrap()
        );
    }
}
