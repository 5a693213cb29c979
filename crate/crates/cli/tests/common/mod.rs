#![allow(dead_code)]

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub const STATUS: [&str; 3] = ["employed", "unemployed", "inactive"];

/// Deterministic synthetic panel: `people` individuals over `periods`
/// periods with a categorical `status` and a numerical `income`. Individuals
/// whose index is in `lost` disappear from period 2 on.
pub fn write_panel(dir: &Path, people: usize, periods: u32, lost: &[usize]) -> Vec<PathBuf> {
    (1..=periods)
        .map(|t| {
            let mut text = String::from("id,status,income\n");
            for i in 0..people {
                if t >= 2 && lost.contains(&i) {
                    continue;
                }
                let status = STATUS[(i * 7 + t as usize) % 3];
                let income = 1000 + (i * 37 + t as usize * 11) % 500;
                let _ = writeln!(text, "p{i:04},{status},{income}");
            }
            let path = dir.join(format!("wave{t}.csv"));
            std::fs::write(&path, text).unwrap();
            path
        })
        .collect()
}

/// Plan over the synthetic panel: DP-circulant status, entropy-targeted
/// income.
pub fn write_plan(dir: &Path, periods: u32, seed: u64) -> PathBuf {
    let mut text = format!(
        r#"master_seed = {seed}

[[attributes]]
name = "status"
kind = "categorical"
catalog = ["employed", "unemployed", "inactive"]

[[attributes]]
name = "income"
kind = "numerical"

[targets]
per_period = [{targets}]
beta_l = 0.3
convention = "t2"
"#,
        targets = vec!["0.3"; periods as usize].join(", ")
    );
    for t in 1..=periods {
        let _ = write!(
            text,
            r#"
[[periods]]
t = {t}
input = "wave{t}.csv"
[periods.matrices]
status = {{ kind = "dp_circulant", epsilon = {eps} }}
income = {{ kind = "entropy_target", beta = {beta} }}
"#,
            eps = 1.5 - 0.25 * t as f64,
            beta = 0.2 + 0.1 * t as f64,
        );
    }
    let path = dir.join("plan.toml");
    std::fs::write(&path, text).unwrap();
    path
}

/// Every file in `dir`, sorted, with contents.
pub fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read(&p).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

/// Data lines of a release CSV (comment header stripped).
pub fn data_lines(bytes: &[u8]) -> Vec<String> {
    String::from_utf8(bytes.to_vec())
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(str::to_owned)
        .collect()
}
