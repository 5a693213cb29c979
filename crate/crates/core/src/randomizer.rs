//! Randomized response / PRAM over attribute columns.
//!
//! # Seeds
//!
//! Every draw is driven by an explicit master seed. The seed of individual
//! `i` for attribute `a` in period `t` is
//!
//! ```text
//! s0 = mix(master + G)
//! s1 = mix(s0 ^ (t + G))
//! s2 = mix(s1 ^ (a + G))      <- substream seed
//! si = mix(s2 ^ (i + G))      <- individual seed
//! ```
//!
//! where `mix` is the SplitMix64 finalizer and `G = 0x9E3779B97F4A7C15`.
//! The individual seed keys a ChaCha8 generator; its first `u64`, shifted to
//! 53 bits and scaled by `2^-53`, is the uniform draw in `[0, 1)`. Draws
//! therefore do not depend on processing order.

use rand::SeedableRng;
use rand_chacha::rand_core::RngCore;
use rand_chacha::ChaCha8Rng;

use crate::error::RandomizeError;
use crate::matrix::{BistochasticMatrix, TransitionMatrix, FILE_TOL};
use crate::sinkhorn::sinkhorn_default;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// Largest joint catalog `joint_encode` will build.
pub const JOINT_CATALOG_CAP: usize = 10_000;

/// SplitMix64 output function.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed derivation context for one attribute in one period.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Substream {
    pub master: u64,
    pub period: u32,
    pub attribute: u32,
}

impl Substream {
    pub fn new(master: u64, period: u32, attribute: u32) -> Self {
        Self {
            master,
            period,
            attribute,
        }
    }

    pub fn seed(&self) -> u64 {
        let s0 = mix64(self.master.wrapping_add(GOLDEN));
        let s1 = mix64(s0 ^ u64::from(self.period).wrapping_add(GOLDEN));
        mix64(s1 ^ u64::from(self.attribute).wrapping_add(GOLDEN))
    }

    pub fn individual_seed(&self, individual: usize) -> u64 {
        mix64(self.seed() ^ (individual as u64).wrapping_add(GOLDEN))
    }
}

/// Uniform draw in `[0, 1)` for a seed.
pub fn uniform_from_seed(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Inverse-CDF pick from a probability row given `u` in `[0, 1)`.
///
/// Cumulative sums use Neumaier compensation, and every cumulative from the
/// last positive entry on is pinned to exactly 1, so `u` always lands on a
/// positive-probability column.
pub fn sample_row(row: &[f64], u: f64) -> usize {
    let last_positive = row.iter().rposition(|&p| p > 0.0).unwrap_or(0);
    let (mut sum, mut comp) = (0.0_f64, 0.0_f64);
    for (v, &p) in row.iter().enumerate() {
        if v >= last_positive {
            return last_positive;
        }
        let t = sum + p;
        comp += if sum.abs() >= p.abs() {
            (sum - t) + p
        } else {
            (p - t) + sum
        };
        sum = t;
        if p > 0.0 && u < sum + comp {
            return v;
        }
    }
    last_positive
}

#[derive(Debug, Clone, PartialEq)]
pub struct CategoricalColumn {
    pub catalog: Vec<String>,
    /// Category index per individual; ignored where `present` is false.
    pub values: Vec<usize>,
    pub present: Vec<bool>,
}

impl CategoricalColumn {
    pub fn new(
        catalog: Vec<String>,
        values: Vec<usize>,
        present: Vec<bool>,
    ) -> Result<Self, RandomizeError> {
        if values.len() != present.len() {
            return Err(RandomizeError::LengthMismatch(values.len(), present.len()));
        }
        let r = catalog.len();
        if let Some((&bad, _)) = values
            .iter()
            .zip(&present)
            .find(|&(&v, &here)| here && v >= r)
        {
            return Err(RandomizeError::IndexOutOfRange { index: bad, n: r });
        }
        Ok(Self {
            catalog,
            values,
            present,
        })
    }

    /// Column with everyone present.
    pub fn complete(catalog: Vec<String>, values: Vec<usize>) -> Result<Self, RandomizeError> {
        let present = vec![true; values.len()];
        Self::new(catalog, values, present)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn present_count(&self) -> usize {
        self.present.iter().filter(|&&p| p).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NumericalColumn {
    pub values: Vec<f64>,
    pub present: Vec<bool>,
}

impl NumericalColumn {
    pub fn new(values: Vec<f64>, present: Vec<bool>) -> Result<Self, RandomizeError> {
        if values.len() != present.len() {
            return Err(RandomizeError::LengthMismatch(values.len(), present.len()));
        }
        Ok(Self { values, present })
    }

    pub fn complete(values: Vec<f64>) -> Self {
        let present = vec![true; values.len()];
        Self { values, present }
    }

    pub fn present_values(&self) -> Vec<f64> {
        self.values
            .iter()
            .zip(&self.present)
            .filter(|(_, &p)| p)
            .map(|(&x, _)| x)
            .collect()
    }

    pub fn present_count(&self) -> usize {
        self.present.iter().filter(|&&p| p).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AttributeColumn {
    Categorical(CategoricalColumn),
    Numerical(NumericalColumn),
}

impl AttributeColumn {
    pub fn present(&self) -> &[bool] {
        match self {
            AttributeColumn::Categorical(c) => &c.present,
            AttributeColumn::Numerical(c) => &c.present,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandomizationOutcome {
    pub anonymized: AttributeColumn,
    /// Substream seed, for categorical draws.
    pub seed_used: Option<u64>,
    /// `counts[u][v]`: present individuals moved from category `u` to `v`.
    pub transition_counts: Option<Vec<Vec<u64>>>,
}

/// Draws a reported category for one individual.
pub fn local_randomize(
    value: usize,
    p: &TransitionMatrix,
    seed: u64,
) -> Result<usize, RandomizeError> {
    if value >= p.n() {
        return Err(RandomizeError::IndexOutOfRange {
            index: value,
            n: p.n(),
        });
    }
    Ok(sample_row(p.row(value), uniform_from_seed(seed)))
}

/// Randomizes every present individual of a categorical column; absent ones
/// pass through unchanged.
pub fn pram_apply(
    column: &CategoricalColumn,
    p: &TransitionMatrix,
    stream: Substream,
) -> Result<RandomizationOutcome, RandomizeError> {
    let r = column.catalog.len();
    if p.n() != r {
        return Err(RandomizeError::CatalogSizeMismatch {
            matrix: p.n(),
            catalog: r,
        });
    }
    let mut counts = vec![vec![0u64; r]; r];
    let mut values = column.values.clone();
    for (i, (value, &here)) in values.iter_mut().zip(&column.present).enumerate() {
        if !here {
            continue;
        }
        let reported = local_randomize(*value, p, stream.individual_seed(i))?;
        counts[*value][reported] += 1;
        *value = reported;
    }
    Ok(RandomizationOutcome {
        anonymized: AttributeColumn::Categorical(CategoricalColumn {
            catalog: column.catalog.clone(),
            values,
            present: column.present.clone(),
        }),
        seed_used: Some(stream.seed()),
        transition_counts: Some(counts),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MixMode {
    /// Curator-side mixing with individuals as categories.
    #[default]
    ExPost,
}

/// Replaces the present values `x` by `P x` (row convention,
/// `y_i = Σ_j p_ij x_j`). Bistochasticity makes this mean-preserving.
pub fn mix_numerical(
    column: &NumericalColumn,
    p: &TransitionMatrix,
    _mode: MixMode,
) -> Result<NumericalColumn, RandomizeError> {
    let x = column.present_values();
    if p.n() != x.len() {
        return Err(RandomizeError::SizeMismatch {
            matrix: p.n(),
            expected: x.len(),
        });
    }
    if let Err(reason) = p.clone().into_bistochastic(FILE_TOL) {
        return Err(RandomizeError::NotBistochastic(reason));
    }
    let mut mixed = p.rows().map(|row| {
        row.iter()
            .zip(&x)
            .filter(|(&w, _)| w != 0.0)
            .map(|(w, xi)| w * xi)
            .sum::<f64>()
    });
    let values = column
        .values
        .iter()
        .zip(&column.present)
        .map(|(&v, &here)| {
            if here {
                mixed.next().expect("sized")
            } else {
                v
            }
        })
        .collect();
    Ok(NumericalColumn {
        values,
        present: column.present.clone(),
    })
}

/// Mixed-radix encoding of several categorical columns into one.
#[derive(Debug, Clone, PartialEq)]
pub struct JointEncoding {
    pub radices: Vec<usize>,
    pub catalogs: Vec<Vec<String>>,
    pub column: CategoricalColumn,
}

impl JointEncoding {
    /// Row-major: the last column varies fastest.
    pub fn encode(&self, tuple: &[usize]) -> usize {
        encode_tuple(&self.radices, tuple)
    }

    pub fn decode(&self, index: usize) -> Vec<usize> {
        let mut tuple = vec![0; self.radices.len()];
        let mut rest = index;
        for (slot, &r) in tuple.iter_mut().zip(&self.radices).rev() {
            *slot = rest % r;
            rest /= r;
        }
        tuple
    }

    /// Splits a joint column back into its component columns.
    pub fn decode_column(&self, joint: &CategoricalColumn) -> Vec<CategoricalColumn> {
        let mut parts: Vec<CategoricalColumn> = self
            .catalogs
            .iter()
            .map(|catalog| CategoricalColumn {
                catalog: catalog.clone(),
                values: Vec::with_capacity(joint.len()),
                present: joint.present.clone(),
            })
            .collect();
        for (&v, &here) in joint.values.iter().zip(&joint.present) {
            let tuple = if here {
                self.decode(v)
            } else {
                vec![0; self.radices.len()]
            };
            for (part, x) in parts.iter_mut().zip(tuple) {
                part.values.push(x);
            }
        }
        parts
    }
}

fn encode_tuple(radices: &[usize], tuple: &[usize]) -> usize {
    tuple
        .iter()
        .zip(radices)
        .fold(0, |acc, (&x, &r)| acc * r + x)
}

/// Encodes the columns into one column over the product catalog. An
/// individual is present in the joint column only if present in every part;
/// absent individuals keep index 0 in the joint column.
pub fn joint_encode(
    columns: &[&CategoricalColumn],
    cap: usize,
) -> Result<JointEncoding, RandomizeError> {
    let first = columns.first().ok_or(RandomizeError::WrongKind {
        expected: "nonempty list of categorical",
    })?;
    let len = first.len();
    if let Some(c) = columns.iter().find(|c| c.len() != len) {
        return Err(RandomizeError::LengthMismatch(len, c.len()));
    }
    let radices: Vec<usize> = columns.iter().map(|c| c.catalog.len()).collect();
    let size = radices
        .iter()
        .try_fold(1usize, |acc, &r| acc.checked_mul(r))
        .unwrap_or(usize::MAX);
    if size > cap {
        return Err(RandomizeError::DimensionalityCap { size, cap });
    }
    let present: Vec<bool> = (0..len)
        .map(|i| columns.iter().all(|c| c.present[i]))
        .collect();
    let values: Vec<usize> = (0..len)
        .map(|i| {
            if present[i] {
                let tuple: Vec<usize> = columns.iter().map(|c| c.values[i]).collect();
                encode_tuple(&radices, &tuple)
            } else {
                0
            }
        })
        .collect();
    let catalogs: Vec<Vec<String>> = columns.iter().map(|c| c.catalog.clone()).collect();
    let mut encoding = JointEncoding {
        radices,
        catalogs,
        column: CategoricalColumn {
            catalog: Vec::new(),
            values,
            present,
        },
    };
    encoding.column.catalog = (0..size)
        .map(|idx| {
            encoding
                .decode(idx)
                .iter()
                .zip(&encoding.catalogs)
                .map(|(&x, cat)| cat[x].as_str())
                .collect::<Vec<_>>()
                .join("|")
        })
        .collect();
    Ok(encoding)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DropoutPolicy {
    /// Keep the rows/columns of present individuals and Sinkhorn-rescale the
    /// submatrix back to bistochastic.
    #[default]
    RestrictAndRenormalize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DropoutOutcome {
    pub outcome: RandomizationOutcome,
    /// The matrix actually applied.
    pub applied: BistochasticMatrix,
    /// Original cohort size when the matrix was restricted.
    pub restricted_from: Option<usize>,
}

/// Principal submatrix over `keep`, re-projected to bistochastic.
pub fn restrict(
    p: &BistochasticMatrix,
    keep: &[usize],
) -> Result<BistochasticMatrix, RandomizeError> {
    let k = keep.len();
    let mut grid = Vec::with_capacity(k * k);
    for &i in keep {
        for &j in keep {
            grid.push(p.get(i, j));
        }
    }
    Ok(sinkhorn_default(k, &grid)?.matrix)
}

/// Applies a cohort-sized matrix to a column with possible dropouts.
///
/// Numerical columns are indexed by individual, so the matrix is restricted
/// to present individuals. Categorical matrices are over categories and are
/// applied unchanged.
pub fn apply_with_dropouts(
    column: &AttributeColumn,
    p_full: &BistochasticMatrix,
    stream: Substream,
    _policy: DropoutPolicy,
) -> Result<DropoutOutcome, RandomizeError> {
    match column {
        AttributeColumn::Categorical(c) => Ok(DropoutOutcome {
            outcome: pram_apply(c, p_full, stream)?,
            applied: p_full.clone(),
            restricted_from: None,
        }),
        AttributeColumn::Numerical(c) => {
            if p_full.n() != c.values.len() {
                return Err(RandomizeError::SizeMismatch {
                    matrix: p_full.n(),
                    expected: c.values.len(),
                });
            }
            let keep: Vec<usize> = (0..c.values.len()).filter(|&i| c.present[i]).collect();
            let (applied, restricted_from) = if keep.len() == c.values.len() {
                (p_full.clone(), None)
            } else {
                (restrict(p_full, &keep)?, Some(p_full.n()))
            };
            let mixed = mix_numerical(c, &applied, MixMode::ExPost)?;
            Ok(DropoutOutcome {
                outcome: RandomizationOutcome {
                    anonymized: AttributeColumn::Numerical(mixed),
                    seed_used: None,
                    transition_counts: None,
                },
                applied,
                restricted_from,
            })
        }
    }
}
