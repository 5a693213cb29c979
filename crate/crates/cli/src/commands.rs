//! Command bodies shared by the binary and the tests. Each returns the text
//! to print so that output can be asserted without spawning a process.

use std::fmt::Write as _;
use std::path::Path;

use bistoch_core::ledger::{NextEntropy, Targets};
use bistoch_core::{entropy_rate, table, Convention, LedgerError, MatrixSpec, ReleaseLedger};

use crate::error::CliError;

/// Builds the matrix, optionally writes it, and reports its entropy.
pub fn genmat(spec: &MatrixSpec, out: Option<&Path>) -> Result<String, CliError> {
    let p = spec.build()?;
    if let Some(path) = out {
        p.write_file(path)?;
    }
    let r = entropy_rate(&p);
    let mut text = format!(
        "n={} bits={} max_bits={} beta={}\n",
        r.n, r.bits, r.max_bits, r.beta
    );
    if out.is_none() {
        text.push_str(&p.to_text());
    }
    Ok(text)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LedgerReport {
    pub text: String,
    /// Target verdict, when targets were given.
    pub pass: Option<bool>,
}

fn beta_l_line(ledger: &ReleaseLedger, c: Convention) -> String {
    match ledger.trajectory_guarantee(c) {
        Ok(g) => format!(
            "beta_L({}) = {} over {} period(s) ({} of {} bits)",
            c.label(),
            g.beta_l,
            g.periods,
            g.total_bits,
            g.max_bits
        ),
        Err(LedgerError::InsufficientPeriods { needed, have }) => format!(
            "beta_L({}): insufficient periods (needs {needed}, has {have})",
            c.label()
        ),
        Err(e) => format!("beta_L({}): {e}", c.label()),
    }
}

/// Per-period and trajectory β, an optional verdict against `targets`, and
/// an optional next-release requirement for `(beta_l_target, n_next)`.
pub fn ledger_report(
    ledger: &ReleaseLedger,
    targets: Option<&Targets>,
    convention: Convention,
    next: Option<(f64, usize)>,
) -> Result<LedgerReport, CliError> {
    let mut text = format!("ledger version {}\n", ledger.version());
    text.push_str("periods:\n");
    for r in ledger.records() {
        let _ = write!(
            text,
            "  t={} n_t={} bits={} beta_t={} active={}",
            r.t, r.n_t, r.bits_t, r.beta_t, r.active_count
        );
        if let Some(from) = r.restricted_from {
            let _ = write!(text, " restricted_from={from}");
        }
        text.push('\n');
    }
    for c in [Convention::FromFirstPeriod, Convention::FromSecondPeriod] {
        let _ = writeln!(text, "{}", beta_l_line(ledger, c));
    }
    let eq = ledger.check_equal_size_identity();
    if !ledger.is_empty() {
        let _ = writeln!(
            text,
            "equal-size identity: {} (sum {} vs T*mean {})",
            if !eq.sizes_match {
                "not applicable, sizes differ"
            } else if eq.holds {
                "holds"
            } else {
                "violated"
            },
            eq.lhs_bits,
            eq.rhs_bits
        );
    }

    let mut pass = None;
    let verdict = match targets.map(|t| ledger.verdict(t, convention)) {
        // no trajectory exists yet under this convention: nothing to judge
        Some(Err(LedgerError::InsufficientPeriods { needed, have })) => {
            let _ = writeln!(
                text,
                "verdict ({}): not evaluable yet (needs {needed} periods, has {have})",
                convention.label()
            );
            None
        }
        other => other.transpose()?,
    };
    if let Some(v) = verdict {
        let _ = writeln!(text, "verdict ({}):", convention.label());
        for p in &v.periods {
            let status = match (p.evaluated, p.pass) {
                (false, _) => "skipped",
                (true, true) => "pass",
                (true, false) => "FAIL",
            };
            let _ = writeln!(
                text,
                "  t={} beta_t={} target={} {status}",
                p.t, p.beta, p.target
            );
        }
        let _ = writeln!(
            text,
            "  trajectory beta_L={} target={} {}",
            v.trajectory.beta_l,
            v.beta_l_target,
            if v.trajectory_pass { "pass" } else { "FAIL" }
        );
        let _ = writeln!(text, "overall: {}", if v.pass { "PASS" } else { "FAIL" });
        pass = Some(v.pass);
    }

    if let Some((target, n_next)) = next {
        match ledger.required_next_entropy(target, n_next, convention)? {
            NextEntropy::Required(bits) => {
                let _ = writeln!(
                    text,
                    "next release (n={n_next}) needs >= {bits} bits (beta >= {}) for beta_L({}) >= {target}",
                    bits / (n_next as f64).log2(),
                    convention.label()
                );
            }
            NextEntropy::Infeasible {
                needed_bits,
                max_bits,
            } => {
                let _ = writeln!(
                    text,
                    "next release (n={n_next}) cannot reach beta_L({}) >= {target}: needs {needed_bits} bits, at most {max_bits}",
                    convention.label()
                );
            }
        }
    }
    Ok(LedgerReport { text, pass })
}

pub fn read_ledger(path: &Path) -> Result<ReleaseLedger, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    ReleaseLedger::from_json(&text).map_err(|e| match e {
        LedgerError::Corrupt(msg) => {
            CliError::Ledger(LedgerError::Corrupt(format!("{}: {msg}", path.display())))
        }
        other => other.into(),
    })
}

/// ε schedules of the published longitudinal example, by row.
pub const DEFAULT_SCHEDULES: [[f64; 5]; 4] = [
    [2.0, 2.0, 2.0, 2.0, 2.0],
    [0.1, 0.1, 0.1, 0.1, 0.1],
    [3.0, 2.0, 1.5, 1.0, 0.5],
    [1.0, 0.8, 0.5, 0.3, 0.1],
];

pub fn simulate(n: usize, schedules: &[Vec<f64>]) -> Result<String, CliError> {
    let mut out = String::new();
    for s in schedules {
        let rows = table::simulate_schedule(n, s)?;
        let label = s
            .iter()
            .map(|e| format!("{e}"))
            .collect::<Vec<_>>()
            .join(",");
        out.push_str(&table::render(&rows, &format!("eps={label}")));
    }
    Ok(out)
}

/// Trajectory percentages implied by given cross-section percentages.
pub fn simulate_from_cross_sections(percentages: &[f64]) -> String {
    let fractions: Vec<f64> = percentages.iter().map(|p| p / 100.0).collect();
    let rows = table::trajectory_from_cross_sections(&fractions);
    table::render(&rows, "given")
}
