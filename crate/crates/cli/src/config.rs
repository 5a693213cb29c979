//! Release plan: a single TOML document describing attributes, joint
//! groups, per-period inputs and matrices, the master seed and targets.
//!
//! ```toml
//! master_seed = 42
//!
//! [[attributes]]
//! name = "status"
//! kind = "categorical"
//! catalog = ["employed", "unemployed", "inactive"]
//!
//! [[attributes]]
//! name = "income"
//! kind = "numerical"
//!
//! [[joint_groups]]
//! name = "sex_region"
//! attributes = ["sex", "region"]
//!
//! [targets]
//! per_period = [0.3, 0.3]
//! beta_l = 0.5
//! convention = "t2"
//!
//! [[periods]]
//! t = 1
//! input = "wave1.csv"
//! [periods.matrices]
//! status = { kind = "dp_circulant", epsilon = 1.0 }
//! income = { kind = "entropy_target", beta = 0.4 }
//! sex_region = { kind = "perfect_secrecy" }
//! ```
//!
//! Matrix `n` may be omitted; it defaults to the unit's state count (catalog
//! size, product of catalog sizes for a joint group, or the period-1 cohort
//! size for a numerical attribute). Relative paths resolve against the
//! config file's directory.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use bistoch_core::ledger::Targets;
use bistoch_core::{Convention, MatrixSpec};
use serde::Deserialize;

use crate::error::CliError;

/// Required key column of every panel CSV.
pub const ID_COLUMN: &str = "id";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttributeKind {
    Categorical,
    Numerical,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttributeDecl {
    pub name: String,
    pub kind: AttributeKind,
    #[serde(default)]
    pub catalog: Option<Vec<String>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointGroup {
    pub name: String,
    pub attributes: Vec<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeriodPlan {
    pub t: u32,
    pub input: PathBuf,
    pub matrices: BTreeMap<String, toml::Value>,
}

fn default_convention() -> Convention {
    Convention::FromSecondPeriod
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetsConfig {
    #[serde(default)]
    pub per_period: Vec<f64>,
    #[serde(default)]
    pub beta_l: f64,
    #[serde(default = "default_convention")]
    pub convention: Convention,
}

impl TargetsConfig {
    pub fn targets(&self) -> Targets {
        Targets {
            per_period: self.per_period.clone(),
            beta_l: self.beta_l,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReleasePlanConfig {
    #[serde(default)]
    pub master_seed: u64,
    pub attributes: Vec<AttributeDecl>,
    #[serde(default)]
    pub joint_groups: Vec<JointGroup>,
    pub periods: Vec<PeriodPlan>,
    #[serde(default)]
    pub targets: Option<TargetsConfig>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

/// What one randomization pass operates on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum UnitKind {
    Attribute(usize),
    Group(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Unit {
    pub name: String,
    pub kind: UnitKind,
    /// Attribute slot used in seed derivation.
    pub seed_index: u32,
}

impl ReleasePlanConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg = Self::parse(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: ReleasePlanConfig =
            toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    pub fn attribute(&self, name: &str) -> Option<(usize, &AttributeDecl)> {
        self.attributes
            .iter()
            .enumerate()
            .find(|(_, a)| a.name == name)
    }

    pub fn period(&self, t: u32) -> Option<&PeriodPlan> {
        self.periods.iter().find(|p| p.t == t)
    }

    /// Randomization units: every attribute outside a joint group, then every
    /// group.
    pub fn units(&self) -> Vec<Unit> {
        let grouped: BTreeSet<&str> = self
            .joint_groups
            .iter()
            .flat_map(|g| g.attributes.iter().map(String::as_str))
            .collect();
        let singles = self
            .attributes
            .iter()
            .enumerate()
            .filter(|(_, a)| !grouped.contains(a.name.as_str()))
            .map(|(i, a)| Unit {
                name: a.name.clone(),
                kind: UnitKind::Attribute(i),
                seed_index: i as u32,
            });
        let groups = self.joint_groups.iter().enumerate().map(|(g, group)| Unit {
            name: group.name.clone(),
            kind: UnitKind::Group(g),
            seed_index: (self.attributes.len() + g) as u32,
        });
        singles.chain(groups).collect()
    }

    fn check(&self) -> Result<(), CliError> {
        let err = |msg: String| Err(CliError::Config(msg));
        if self.attributes.is_empty() {
            return err("no attributes declared".into());
        }
        let mut names = BTreeSet::new();
        for a in &self.attributes {
            if a.name == ID_COLUMN {
                return err(format!("attribute may not be named {ID_COLUMN:?}"));
            }
            if !names.insert(a.name.as_str()) {
                return err(format!("attribute {:?} declared twice", a.name));
            }
            match (a.kind, &a.catalog) {
                (AttributeKind::Categorical, None) => {
                    return err(format!(
                        "categorical attribute {:?} needs a catalog",
                        a.name
                    ))
                }
                (AttributeKind::Categorical, Some(cat)) => {
                    let distinct: BTreeSet<_> = cat.iter().collect();
                    if cat.is_empty() || distinct.len() != cat.len() {
                        return err(format!(
                            "catalog of {:?} must be nonempty with distinct labels",
                            a.name
                        ));
                    }
                }
                (AttributeKind::Numerical, Some(_)) => {
                    return err(format!("numerical attribute {:?} takes no catalog", a.name))
                }
                (AttributeKind::Numerical, None) => {}
            }
        }
        let mut seen_in_groups = BTreeSet::new();
        for g in &self.joint_groups {
            if !names.insert(g.name.as_str()) {
                return err(format!("group name {:?} collides", g.name));
            }
            if g.attributes.is_empty() {
                return err(format!("group {:?} is empty", g.name));
            }
            for member in &g.attributes {
                match self.attribute(member) {
                    None => return err(format!("group {:?} names unknown {member:?}", g.name)),
                    Some((_, a)) if a.kind != AttributeKind::Categorical => {
                        return err(format!("group member {member:?} must be categorical"))
                    }
                    _ => {}
                }
                if !seen_in_groups.insert(member.as_str()) {
                    return err(format!("attribute {member:?} is in more than one group"));
                }
            }
        }
        if self.periods.is_empty() {
            return err("no periods".into());
        }
        let mut periods = BTreeSet::new();
        for p in &self.periods {
            if p.t == 0 || !periods.insert(p.t) {
                return err(format!("period {} is zero or repeated", p.t));
            }
        }
        if !periods.contains(&1) {
            return err("period 1 defines the cohort and must be present".into());
        }
        let unit_names: BTreeSet<String> = self.units().into_iter().map(|u| u.name).collect();
        for p in &self.periods {
            for name in p.matrices.keys() {
                if !unit_names.contains(name) {
                    return err(format!(
                        "period {}: matrix for {name:?}, which is not a randomized unit",
                        p.t
                    ));
                }
            }
            for name in &unit_names {
                if !p.matrices.contains_key(name) {
                    return err(format!("period {}: no matrix for {name:?}", p.t));
                }
            }
        }
        Ok(())
    }

    /// The matrix spec for `unit` at period `t`, with `n` filled in and
    /// custom paths resolved; fails if an explicit `n` disagrees with
    /// `states`.
    pub fn matrix_spec(&self, t: u32, unit: &str, states: usize) -> Result<MatrixSpec, CliError> {
        let period = self
            .period(t)
            .ok_or_else(|| CliError::Config(format!("no period {t} in plan")))?;
        let raw = period
            .matrices
            .get(unit)
            .ok_or_else(|| CliError::Config(format!("period {t}: no matrix for {unit:?}")))?;
        let mut table = raw.as_table().cloned().ok_or_else(|| {
            CliError::Config(format!("period {t}: matrix for {unit:?} must be a table"))
        })?;
        let kind = table
            .get("kind")
            .and_then(toml::Value::as_str)
            .unwrap_or("");
        let takes_n = !matches!(kind, "k_anon_blocks" | "custom");
        if takes_n && !table.contains_key("n") {
            table.insert("n".into(), toml::Value::Integer(states as i64));
        }
        let mut spec: MatrixSpec = toml::Value::Table(table)
            .try_into()
            .map_err(|e| CliError::Config(format!("period {t}, {unit:?}: {e}")))?;
        if let MatrixSpec::Custom { path } = &mut spec {
            *path = self.resolve(path);
        }
        spec.check()?;
        if let Some(n) = spec.n() {
            if n != states {
                return Err(CliError::Schema(format!(
                    "period {t}, {unit:?}: matrix has {n} states but the unit has {states}"
                )));
            }
        }
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const PLAN: &str = r#"
master_seed = 9

[[attributes]]
name = "status"
kind = "categorical"
catalog = ["a", "b"]

[[attributes]]
name = "sex"
kind = "categorical"
catalog = ["f", "m"]

[[attributes]]
name = "region"
kind = "categorical"
catalog = ["n", "s", "e"]

[[attributes]]
name = "income"
kind = "numerical"

[[joint_groups]]
name = "sex_region"
attributes = ["sex", "region"]

[[periods]]
t = 1
input = "w1.csv"
[periods.matrices]
status = { kind = "dp_circulant", epsilon = 1.0 }
income = { kind = "identity" }
sex_region = { kind = "perfect_secrecy" }
"#;

    #[test]
    fn parses_and_lists_units() {
        let cfg = ReleasePlanConfig::parse(PLAN).unwrap();
        let units = cfg.units();
        let names: Vec<&str> = units.iter().map(|u| u.name.as_str()).collect();
        assert_eq!(names, ["status", "income", "sex_region"]);
        assert_eq!(units[2].seed_index, 4);
        assert_eq!(units[1].seed_index, 3);
    }

    #[test]
    fn fills_in_state_count() {
        let cfg = ReleasePlanConfig::parse(PLAN).unwrap();
        assert_eq!(
            cfg.matrix_spec(1, "sex_region", 6).unwrap(),
            MatrixSpec::PerfectSecrecy { n: 6 }
        );
        assert_eq!(
            cfg.matrix_spec(1, "status", 2).unwrap(),
            MatrixSpec::DpCirculant { n: 2, epsilon: 1.0 }
        );
    }

    #[test]
    fn explicit_size_must_match() {
        let text = PLAN.replace(
            r#"status = { kind = "dp_circulant", epsilon = 1.0 }"#,
            r#"status = { kind = "dp_circulant", epsilon = 1.0, n = 3 }"#,
        );
        let cfg = ReleasePlanConfig::parse(&text).unwrap();
        assert!(matches!(
            cfg.matrix_spec(1, "status", 2),
            Err(CliError::Schema(_))
        ));
    }

    #[test]
    fn rejects_inconsistent_plans() {
        let missing = PLAN.replace("income = { kind = \"identity\" }\n", "");
        assert!(ReleasePlanConfig::parse(&missing).is_err());

        let grouped_matrix = PLAN.replace(
            "sex_region = { kind = \"perfect_secrecy\" }",
            "sex_region = { kind = \"perfect_secrecy\" }\nsex = { kind = \"identity\" }",
        );
        assert!(ReleasePlanConfig::parse(&grouped_matrix).is_err());

        let overlapping = PLAN.replace(
            "attributes = [\"sex\", \"region\"]",
            "attributes = [\"sex\", \"sex\"]",
        );
        assert!(ReleasePlanConfig::parse(&overlapping).is_err());

        let numeric_group = PLAN.replace(
            "attributes = [\"sex\", \"region\"]",
            "attributes = [\"sex\", \"income\"]",
        );
        assert!(ReleasePlanConfig::parse(&numeric_group).is_err());

        let no_catalog = PLAN.replace("catalog = [\"a\", \"b\"]\n", "");
        assert!(ReleasePlanConfig::parse(&no_catalog).is_err());

        let unknown_key = format!("{PLAN}\nbogus = 1\n");
        assert!(ReleasePlanConfig::parse(&unknown_key).is_err());

        let no_first = PLAN.replace("t = 1", "t = 2");
        assert!(ReleasePlanConfig::parse(&no_first).is_err());
    }
}
