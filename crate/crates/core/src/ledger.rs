//! Append-only accounting of per-period releases.
//!
//! Each release contributes its entropy rate `H(P_t)`. The trajectory
//! guarantee is the ratio of summed entropy rates to summed maximal entropies,
//! which equals the entropy rate of the Kronecker product of all period
//! matrices without ever building that product.

use serde::{Deserialize, Serialize};

use crate::error::LedgerError;
use crate::matrix::{entropy_rate, TransitionMatrix, FILE_TOL};
use crate::matrix_spec::MatrixSpec;

/// Significant digits kept for every stored or serialized quantity.
pub const LEDGER_DIGITS: usize = 15;

/// Tolerance for the equal-size shortcut check.
pub const EQUAL_SIZE_TOL: f64 = 1e-12;

pub(crate) fn round_sig(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{:.*e}", LEDGER_DIGITS - 1, x)
        .parse()
        .expect("formatted float parses")
}

/// Which releases the trajectory sums run over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Convention {
    /// Every recorded release (running mean of cross-sections).
    #[serde(rename = "t1")]
    FromFirstPeriod,
    /// Every release after the first one; a trajectory needs two
    /// observations to exist.
    #[serde(rename = "t2")]
    FromSecondPeriod,
}

impl Convention {
    fn skip(self) -> usize {
        match self {
            Convention::FromFirstPeriod => 0,
            Convention::FromSecondPeriod => 1,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Convention::FromFirstPeriod => "t1",
            Convention::FromSecondPeriod => "t2",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReleaseRecord {
    pub t: u32,
    pub n_t: usize,
    pub bits_t: f64,
    pub beta_t: f64,
    pub spec: MatrixSpec,
    pub active_count: usize,
    /// Cohort size the matrix was restricted from when dropouts occurred.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub restricted_from: Option<usize>,
}

impl ReleaseRecord {
    pub fn max_bits(&self) -> f64 {
        round_sig((self.n_t as f64).log2())
    }
}

/// Metadata stored alongside a release's entropy.
#[derive(Debug, Clone, PartialEq)]
pub struct ReleaseMeta {
    pub spec: MatrixSpec,
    pub active_count: usize,
    pub restricted_from: Option<usize>,
}

impl ReleaseMeta {
    pub fn new(spec: MatrixSpec, active_count: usize) -> Self {
        Self {
            spec,
            active_count,
            restricted_from: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryGuarantee {
    pub total_bits: f64,
    pub max_bits: f64,
    pub beta_l: f64,
    pub convention: Convention,
    pub periods: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EqualSizeIdentity {
    pub holds: bool,
    /// Trajectory entropy `Σ H(P_t)`.
    pub lhs_bits: f64,
    /// `T · mean(H(P_t))`.
    pub rhs_bits: f64,
    /// False when the period matrices differ in size, where the shortcut
    /// does not apply.
    pub sizes_match: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Targets {
    pub per_period: Vec<f64>,
    pub beta_l: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeriodVerdict {
    pub t: u32,
    pub beta: f64,
    pub target: f64,
    /// Whether the convention includes this period.
    pub evaluated: bool,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LedgerVerdict {
    pub periods: Vec<PeriodVerdict>,
    pub trajectory: TrajectoryGuarantee,
    pub beta_l_target: f64,
    pub trajectory_pass: bool,
    pub pass: bool,
}

impl LedgerVerdict {
    pub fn failed_periods(&self) -> Vec<u32> {
        self.periods
            .iter()
            .filter(|p| !p.pass)
            .map(|p| p.t)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NextEntropy {
    /// Minimal entropy rate, in bits, the next release must reach.
    Required(f64),
    /// Even perfect secrecy at the next period leaves the target unmet.
    Infeasible { needed_bits: f64, max_bits: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerVersion {
    pub version: u32,
    pub records: Vec<ReleaseRecord>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReleaseLedger {
    version: u32,
    records: Vec<ReleaseRecord>,
    history: Vec<LedgerVersion>,
}

impl ReleaseLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn version(&self) -> u32 {
        self.version
    }

    pub fn records(&self) -> &[ReleaseRecord] {
        &self.records
    }

    /// Superseded versions, oldest first.
    pub fn history(&self) -> &[LedgerVersion] {
        &self.history
    }

    pub fn record(&self, t: u32) -> Option<&ReleaseRecord> {
        self.records.iter().find(|r| r.t == t)
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    fn make_record(
        t: u32,
        matrix: &TransitionMatrix,
        meta: ReleaseMeta,
    ) -> Result<ReleaseRecord, LedgerError> {
        if t == 0 {
            return Err(LedgerError::ZeroPeriod);
        }
        let bistochastic = matrix.clone().into_bistochastic(FILE_TOL)?;
        let report = entropy_rate(&bistochastic);
        let bits_t = round_sig(report.bits);
        let max_bits = round_sig(report.max_bits);
        let beta_t = if max_bits > 0.0 {
            round_sig(bits_t / max_bits)
        } else {
            0.0
        };
        Ok(ReleaseRecord {
            t,
            n_t: report.n,
            bits_t,
            beta_t,
            spec: meta.spec,
            active_count: meta.active_count,
            restricted_from: meta.restricted_from,
        })
    }

    /// Appends the release of period `t`.
    pub fn record_release(
        &mut self,
        t: u32,
        matrix: &TransitionMatrix,
        meta: ReleaseMeta,
    ) -> Result<&ReleaseRecord, LedgerError> {
        if let Some(last) = self.records.last() {
            if t <= last.t {
                return Err(LedgerError::NonMonotonePeriod { t, last: last.t });
            }
        }
        let record = Self::make_record(t, matrix, meta)?;
        self.records.push(record);
        Ok(self.records.last().expect("just pushed"))
    }

    /// Returns a new ledger version with period `t` replaced; `self` is left
    /// untouched and is kept in the new version's history.
    pub fn revise_release(
        &self,
        t: u32,
        matrix: &TransitionMatrix,
        meta: ReleaseMeta,
    ) -> Result<ReleaseLedger, LedgerError> {
        let idx = self
            .records
            .iter()
            .position(|r| r.t == t)
            .ok_or(LedgerError::UnknownPeriod(t))?;
        let record = Self::make_record(t, matrix, meta)?;
        let mut records = self.records.clone();
        records[idx] = record;
        let mut history = self.history.clone();
        history.push(LedgerVersion {
            version: self.version,
            records: self.records.clone(),
        });
        Ok(ReleaseLedger {
            version: self.version + 1,
            records,
            history,
        })
    }

    fn included(&self, convention: Convention) -> &[ReleaseRecord] {
        let skip = convention.skip().min(self.records.len());
        &self.records[skip..]
    }

    pub fn trajectory_guarantee(
        &self,
        convention: Convention,
    ) -> Result<TrajectoryGuarantee, LedgerError> {
        let needed = convention.skip() + 1;
        if self.records.len() < needed {
            return Err(LedgerError::InsufficientPeriods {
                needed,
                have: self.records.len(),
            });
        }
        let included = self.included(convention);
        let total_bits: f64 = included.iter().map(|r| r.bits_t).sum();
        let max_bits: f64 = included.iter().map(|r| r.max_bits()).sum();
        let beta_l = if max_bits > 0.0 {
            (total_bits / max_bits).min(1.0)
        } else {
            0.0
        };
        Ok(TrajectoryGuarantee {
            total_bits,
            max_bits,
            beta_l,
            convention,
            periods: included.len(),
        })
    }

    /// Compares the trajectory entropy with `T` times the mean per-period
    /// entropy. Only meaningful when all period matrices share one size.
    pub fn check_equal_size_identity(&self) -> EqualSizeIdentity {
        let count = self.records.len();
        let lhs_bits: f64 = self.records.iter().map(|r| r.bits_t).sum();
        let rhs_bits = if count == 0 {
            0.0
        } else {
            count as f64 * (lhs_bits / count as f64)
        };
        let sizes_match = self.records.windows(2).all(|w| w[0].n_t == w[1].n_t);
        EqualSizeIdentity {
            holds: sizes_match && (lhs_bits - rhs_bits).abs() <= EQUAL_SIZE_TOL,
            lhs_bits,
            rhs_bits,
            sizes_match,
        }
    }

    /// Evaluates per-period and trajectory targets, reporting every failure.
    ///
    /// `targets.per_period` must have one entry per recorded release; under
    /// [`Convention::FromSecondPeriod`] the first release's target is not
    /// evaluated.
    pub fn verdict(
        &self,
        targets: &Targets,
        convention: Convention,
    ) -> Result<LedgerVerdict, LedgerError> {
        if targets.per_period.len() != self.records.len() {
            return Err(LedgerError::TargetArityMismatch {
                targets: targets.per_period.len(),
                records: self.records.len(),
            });
        }
        let trajectory = self.trajectory_guarantee(convention)?;
        let periods: Vec<PeriodVerdict> = self
            .records
            .iter()
            .zip(&targets.per_period)
            .enumerate()
            .map(|(i, (r, &target))| {
                let evaluated = i >= convention.skip();
                PeriodVerdict {
                    t: r.t,
                    beta: r.beta_t,
                    target,
                    evaluated,
                    pass: !evaluated || r.beta_t >= target,
                }
            })
            .collect();
        let trajectory_pass = trajectory.beta_l >= targets.beta_l;
        let pass = trajectory_pass && periods.iter().all(|p| p.pass);
        Ok(LedgerVerdict {
            periods,
            trajectory,
            beta_l_target: targets.beta_l,
            trajectory_pass,
            pass,
        })
    }

    /// Smallest entropy rate the next release (with `n_next` states) needs
    /// for the trajectory to reach `beta_l_target`.
    pub fn required_next_entropy(
        &self,
        beta_l_target: f64,
        n_next: usize,
        convention: Convention,
    ) -> Result<NextEntropy, LedgerError> {
        if n_next < 2 {
            return Err(LedgerError::BadNextSize(n_next));
        }
        let next_max = (n_next as f64).log2();
        if self.records.len() < convention.skip() {
            // the next release is not part of any trajectory yet
            return Ok(NextEntropy::Required(0.0));
        }
        let included = self.included(convention);
        let total: f64 = included.iter().map(|r| r.bits_t).sum();
        let max: f64 = included.iter().map(|r| r.max_bits()).sum();
        let needed = beta_l_target * (max + next_max) - total;
        if needed > next_max * (1.0 + 1e-12) {
            return Ok(NextEntropy::Infeasible {
                needed_bits: needed,
                max_bits: next_max,
            });
        }
        Ok(NextEntropy::Required(needed.clamp(0.0, next_max)))
    }

    pub fn to_json(&self) -> String {
        let derived = |c| self.trajectory_guarantee(c).ok().map(DerivedDoc::from);
        let doc = LedgerDocument {
            version: self.version,
            records: self.records.iter().map(RecordDoc::from).collect(),
            derived: DerivedPair {
                from_first_period: derived(Convention::FromFirstPeriod),
                from_second_period: derived(Convention::FromSecondPeriod),
            },
            history: self
                .history
                .iter()
                .map(|v| VersionDoc {
                    version: v.version,
                    records: v.records.iter().map(RecordDoc::from).collect(),
                })
                .collect(),
        };
        let mut out = serde_json::to_string_pretty(&doc).expect("ledger serializes");
        out.push('\n');
        out
    }

    /// Parses a ledger document. Derived values are recomputed from the
    /// records, not trusted.
    pub fn from_json(text: &str) -> Result<Self, LedgerError> {
        let doc: LedgerDocument =
            serde_json::from_str(text).map_err(|e| LedgerError::Corrupt(e.to_string()))?;
        let records = check_records(doc.records)?;
        let history = doc
            .history
            .into_iter()
            .map(|v| {
                Ok(LedgerVersion {
                    version: v.version,
                    records: check_records(v.records)?,
                })
            })
            .collect::<Result<_, LedgerError>>()?;
        Ok(ReleaseLedger {
            version: doc.version,
            records,
            history,
        })
    }
}

fn check_records(docs: Vec<RecordDoc>) -> Result<Vec<ReleaseRecord>, LedgerError> {
    let mut out: Vec<ReleaseRecord> = Vec::with_capacity(docs.len());
    for d in docs {
        let r = ReleaseRecord::from(d);
        if r.t == 0 || out.last().is_some_and(|last| r.t <= last.t) {
            return Err(LedgerError::Corrupt(format!(
                "periods not strictly increasing at t = {}",
                r.t
            )));
        }
        if r.n_t == 0
            || !(0.0..=1.0).contains(&r.beta_t)
            || !(0.0..=r.max_bits() + 1e-12).contains(&r.bits_t)
        {
            return Err(LedgerError::Corrupt(format!(
                "record t = {} out of range",
                r.t
            )));
        }
        out.push(r);
    }
    Ok(out)
}

fn ser_sig<S: serde::Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_f64(round_sig(*x))
}

#[derive(Serialize, Deserialize)]
struct RecordDoc {
    t: u32,
    n_t: usize,
    #[serde(serialize_with = "ser_sig")]
    bits_t: f64,
    #[serde(serialize_with = "ser_sig")]
    beta_t: f64,
    spec: MatrixSpec,
    active_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    restricted_from: Option<usize>,
}

impl From<&ReleaseRecord> for RecordDoc {
    fn from(r: &ReleaseRecord) -> Self {
        RecordDoc {
            t: r.t,
            n_t: r.n_t,
            bits_t: r.bits_t,
            beta_t: r.beta_t,
            spec: r.spec.clone(),
            active_count: r.active_count,
            restricted_from: r.restricted_from,
        }
    }
}

impl From<RecordDoc> for ReleaseRecord {
    fn from(d: RecordDoc) -> Self {
        ReleaseRecord {
            t: d.t,
            n_t: d.n_t,
            bits_t: d.bits_t,
            beta_t: d.beta_t,
            spec: d.spec,
            active_count: d.active_count,
            restricted_from: d.restricted_from,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct DerivedDoc {
    #[serde(serialize_with = "ser_sig")]
    total_bits: f64,
    #[serde(serialize_with = "ser_sig")]
    max_bits: f64,
    #[serde(serialize_with = "ser_sig")]
    beta_l: f64,
}

impl From<TrajectoryGuarantee> for DerivedDoc {
    fn from(g: TrajectoryGuarantee) -> Self {
        DerivedDoc {
            total_bits: g.total_bits,
            max_bits: g.max_bits,
            beta_l: g.beta_l,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct DerivedPair {
    from_first_period: Option<DerivedDoc>,
    from_second_period: Option<DerivedDoc>,
}

#[derive(Serialize, Deserialize)]
struct VersionDoc {
    version: u32,
    records: Vec<RecordDoc>,
}

#[derive(Serialize, Deserialize)]
struct LedgerDocument {
    version: u32,
    records: Vec<RecordDoc>,
    derived: DerivedPair,
    #[serde(default)]
    history: Vec<VersionDoc>,
}
