//! Seeded oracle suites behind `bistoch verify`.

use std::fmt::Write as _;

use bistoch_core::matrix::{BistochasticMatrix, KRONECKER_CAP};
use bistoch_core::oracle::{
    mc_transition_check, random_bistochastic, verify_block_weighted_mean, verify_kronecker_sum,
};
use bistoch_core::MatrixError;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Entropy identities must hold to this absolute difference in bits.
pub const DELTA_TOL: f64 = 1e-9;
/// Monte Carlo transition frequencies must stay within this many σ.
pub const SIGMA_TOL: f64 = 4.0;
pub const MC_PER_CATEGORY: usize = 50_000;

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub name: &'static str,
    pub trials: usize,
    pub worst: f64,
    pub tolerance: f64,
    /// Component sizes of the worst trial.
    pub worst_sizes: Vec<usize>,
}

impl SuiteReport {
    pub fn pass(&self) -> bool {
        self.worst <= self.tolerance
    }
}

/// Block-diagonal compositions of 1 to 5 blocks, each of size 2 to 8.
pub fn block_suite(seed: u64, trials: usize) -> Result<SuiteReport, MatrixError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = SuiteReport {
        name: "block-diagonal weighted mean",
        trials,
        worst: 0.0,
        tolerance: DELTA_TOL,
        worst_sizes: Vec::new(),
    };
    for _ in 0..trials {
        let count = rng.gen_range(1..=5);
        let blocks: Vec<BistochasticMatrix> = (0..count)
            .map(|_| {
                let n = rng.gen_range(2..=8);
                random_bistochastic(n, &mut rng)
            })
            .collect();
        let check = verify_block_weighted_mean(&blocks)?;
        if check.delta >= report.worst {
            report.worst = check.delta;
            report.worst_sizes = blocks.iter().map(|b| b.n()).collect();
        }
    }
    Ok(report)
}

/// Kronecker chains of 1 to 6 factors of size 2 to 8, stopping before the
/// product exceeds the materialization cap.
pub fn kronecker_suite(seed: u64, trials: usize) -> Result<SuiteReport, MatrixError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = SuiteReport {
        name: "Kronecker entropy sum",
        trials,
        worst: 0.0,
        tolerance: DELTA_TOL,
        worst_sizes: Vec::new(),
    };
    for _ in 0..trials {
        let wanted = rng.gen_range(1..=6);
        let mut product = 1usize;
        let mut factors = Vec::new();
        for _ in 0..wanted {
            let n = rng.gen_range(2..=8);
            if product * n > KRONECKER_CAP {
                break;
            }
            product *= n;
            factors.push(random_bistochastic(n, &mut rng));
        }
        let check = verify_kronecker_sum(&factors)?;
        if check.delta >= report.worst {
            report.worst = check.delta;
            report.worst_sizes = factors.iter().map(|f| f.n()).collect();
        }
    }
    Ok(report)
}

/// PRAM transition frequencies against `p` (a random 4x4 matrix when none is
/// given).
pub fn transition_suite(seed: u64, p: Option<&BistochasticMatrix>) -> SuiteReport {
    let generated;
    let p = match p {
        Some(p) => p,
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            generated = random_bistochastic(4, &mut rng);
            &generated
        }
    };
    SuiteReport {
        name: "PRAM transition frequencies (sigma)",
        trials: MC_PER_CATEGORY * p.n(),
        worst: mc_transition_check(p, MC_PER_CATEGORY, seed),
        tolerance: SIGMA_TOL,
        worst_sizes: vec![p.n()],
    }
}

pub fn render(reports: &[SuiteReport]) -> String {
    let mut out = String::new();
    for r in reports {
        let _ = writeln!(
            out,
            "{}: {} {} trials, worst {:.3e} (tolerance {:.0e}), worst sizes {:?}",
            if r.pass() { "PASS" } else { "FAIL" },
            r.name,
            r.trials,
            r.worst,
            r.tolerance,
            r.worst_sizes
        );
    }
    out
}
