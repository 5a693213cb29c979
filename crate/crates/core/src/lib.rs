//! Bistochastic randomized response for longitudinal microdata.
//!
//! Each release period is anonymized with a bistochastic transition matrix.
//! The privacy of a single release is the entropy rate of its matrix relative
//! to `log2 n`; the privacy of individual trajectories is the sum of those
//! entropy rates relative to the sum of maxima, which the [`ledger`] tracks
//! without forming Kronecker products. The [`oracle`] module checks those
//! closed forms by brute force.

pub mod error;
pub mod ledger;
pub mod matrix;
pub mod matrix_spec;
pub mod oracle;
pub mod randomizer;
pub mod sinkhorn;
pub mod table;

pub use error::{InvalidReason, LedgerError, MatrixError, RandomizeError};
pub use ledger::{Convention, ReleaseLedger, ReleaseMeta, ReleaseRecord, TrajectoryGuarantee};
pub use matrix::{entropy_rate, BistochasticMatrix, EntropyReport, TransitionMatrix, Validation};
pub use matrix_spec::MatrixSpec;
