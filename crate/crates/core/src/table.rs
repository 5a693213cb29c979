//! Cross-section vs. trajectory guarantee tables for ε schedules.

use crate::error::MatrixError;
use crate::ledger::{Convention, ReleaseLedger, ReleaseMeta};
use crate::matrix::dp_circulant_matrix;
use crate::matrix_spec::MatrixSpec;

#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub t: u32,
    pub epsilon: Option<f64>,
    /// Cross-section beta as a fraction.
    pub cross_section: f64,
    /// Running trajectory beta (first-period convention).
    pub trajectory: f64,
}

/// Percentages rounded half-up.
pub fn round_percent(fraction: f64) -> u32 {
    (fraction * 100.0 + 0.5).floor() as u32
}

/// One DP-circulant release per ε in the schedule, accounted in a ledger.
pub fn simulate_schedule(n: usize, schedule: &[f64]) -> Result<Vec<TableRow>, MatrixError> {
    let mut ledger = ReleaseLedger::new();
    let mut rows = Vec::with_capacity(schedule.len());
    for (i, &epsilon) in schedule.iter().enumerate() {
        let t = i as u32 + 1;
        let p = dp_circulant_matrix(n, epsilon)?;
        let record = ledger
            .record_release(
                t,
                &p,
                ReleaseMeta::new(MatrixSpec::DpCirculant { n, epsilon }, n),
            )
            .expect("constructed matrices are bistochastic and periods increase")
            .clone();
        let traj = ledger
            .trajectory_guarantee(Convention::FromFirstPeriod)
            .expect("at least one period");
        rows.push(TableRow {
            t,
            epsilon: Some(epsilon),
            cross_section: record.beta_t,
            trajectory: traj.beta_l,
        });
    }
    Ok(rows)
}

/// Trajectory betas implied by given cross-section betas when every period
/// has the same state count: the running mean.
pub fn trajectory_from_cross_sections(cross_sections: &[f64]) -> Vec<TableRow> {
    let mut sum = 0.0;
    cross_sections
        .iter()
        .enumerate()
        .map(|(i, &beta)| {
            sum += beta;
            TableRow {
                t: i as u32 + 1,
                epsilon: None,
                cross_section: beta,
                trajectory: sum / (i + 1) as f64,
            }
        })
        .collect()
}

/// Renders rows in the layout `T=1 .. T=k` with cross-section and
/// trajectory percentages (no trajectory column at T=1).
pub fn render(rows: &[TableRow], label: &str) -> String {
    let mut header = String::from("schedule");
    let mut line = label.to_string();
    let mut exact = String::from("unrounded");
    for r in rows {
        if r.t == 1 {
            header.push_str(&format!("\tT={} cross", r.t));
            line.push_str(&format!("\t{}%", round_percent(r.cross_section)));
            exact.push_str(&format!("\t{:.4}", r.cross_section * 100.0));
        } else {
            header.push_str(&format!("\tT={} cross\tT={} traj", r.t, r.t));
            line.push_str(&format!(
                "\t{}%\t{}%",
                round_percent(r.cross_section),
                round_percent(r.trajectory)
            ));
            exact.push_str(&format!(
                "\t{:.4}\t{:.4}",
                r.cross_section * 100.0,
                r.trajectory * 100.0
            ));
        }
    }
    format!("{header}\n{line}\n{exact}\n")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_is_half_up() {
        assert_eq!(round_percent(0.725), 73);
        assert_eq!(round_percent(0.7249), 72);
        assert_eq!(round_percent(0.772), 77);
        assert_eq!(round_percent(1.0), 100);
    }

    #[test]
    fn constant_schedule_has_equal_columns() {
        for eps in [2.0, 0.1] {
            let rows = simulate_schedule(100, &[eps; 5]).unwrap();
            for r in &rows {
                assert!((r.trajectory - r.cross_section).abs() < 1e-12);
                assert_eq!(round_percent(r.trajectory), round_percent(r.cross_section));
            }
        }
    }

    #[test]
    fn trajectory_is_running_mean() {
        let rows = simulate_schedule(100, &[3.0, 2.0, 1.5, 1.0, 0.5]).unwrap();
        let mut sum = 0.0;
        for (i, r) in rows.iter().enumerate() {
            sum += r.cross_section;
            assert!((r.trajectory - sum / (i + 1) as f64).abs() < 1e-12);
        }
        // less ε, more entropy
        assert!(rows
            .windows(2)
            .all(|w| w[1].cross_section > w[0].cross_section));
    }

    #[test]
    fn render_layout() {
        let rows = trajectory_from_cross_sections(&[0.42, 0.70]);
        let out = render(&rows, "x");
        let lines: Vec<&str> = out.lines().collect();
        assert_eq!(lines[0], "schedule\tT=1 cross\tT=2 cross\tT=2 traj");
        assert_eq!(lines[1], "x\t42%\t70%\t56%");
    }
}
