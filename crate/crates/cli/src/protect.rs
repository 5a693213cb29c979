//! One period of the release pipeline: read the panel, randomize every unit,
//! update each unit's ledger and write the anonymized CSV.
//!
//! Nothing is written until every unit has been randomized and every ledger
//! update has succeeded, so a bad label or a ledger conflict leaves the
//! output directory untouched.

use std::path::{Path, PathBuf};

use bistoch_core::randomizer::{
    apply_with_dropouts, joint_encode, mix64, pram_apply, AttributeColumn, CategoricalColumn,
    DropoutPolicy, NumericalColumn, Substream, JOINT_CATALOG_CAP,
};
use bistoch_core::{Convention, MatrixSpec, ReleaseLedger, ReleaseMeta};

use crate::config::{AttributeKind, ReleasePlanConfig, UnitKind};
use crate::csvio::{read_panel, render_release, Cohort, Panel};
use crate::error::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct UnitSummary {
    pub name: String,
    pub spec: MatrixSpec,
    pub n_t: usize,
    pub beta_t: f64,
    pub restricted_from: Option<usize>,
    /// Trajectory β so far; `None` while too few periods are recorded.
    pub beta_l_from_first: Option<f64>,
    pub beta_l_from_second: Option<f64>,
    pub ledger_path: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtectReport {
    pub t: u32,
    pub csv_path: PathBuf,
    pub units: Vec<UnitSummary>,
}

impl ProtectReport {
    pub fn render(&self) -> String {
        let mut out = format!("period {} -> {}\n", self.t, self.csv_path.display());
        let fmt = |b: Option<f64>| b.map_or_else(|| "n/a".to_string(), |b| format!("{b:.6}"));
        for u in &self.units {
            out.push_str(&format!(
                "  {}: n_t={} beta_t={:.6} beta_L(t1)={} beta_L(t2)={}",
                u.name,
                u.n_t,
                u.beta_t,
                fmt(u.beta_l_from_first),
                fmt(u.beta_l_from_second),
            ));
            if let Some(from) = u.restricted_from {
                out.push_str(&format!(" restricted_from={from}"));
            }
            out.push('\n');
        }
        out
    }
}

pub fn release_path(out_dir: &Path, t: u32) -> PathBuf {
    out_dir.join(format!("t{t}.csv"))
}

pub fn ledger_path(out_dir: &Path, unit: &str) -> PathBuf {
    out_dir.join(format!("{unit}.ledger.json"))
}

/// Shown in the release header instead of the master seed itself.
pub fn seed_fingerprint(master: u64) -> String {
    format!("{:016x}", mix64(master ^ 0x6269_7374_6f63_6821))
}

fn categorical_column(
    panel: &Panel,
    cohort: &Cohort,
    name: &str,
    catalog: &[String],
) -> Result<CategoricalColumn, CliError> {
    let col = panel.column(name).expect("schema checked");
    let mut values = vec![0; cohort.len()];
    let mut present = vec![false; cohort.len()];
    for (row, id) in panel.rows.iter().zip(panel.ids()) {
        let i = cohort.position(id).expect("ids checked against cohort");
        let cell = &row[col];
        if cell.is_empty() {
            continue;
        }
        let idx = catalog.iter().position(|c| c == cell).ok_or_else(|| {
            CliError::Schema(format!("{name}: label {cell:?} (id {id:?}) not in catalog"))
        })?;
        values[i] = idx;
        present[i] = true;
    }
    Ok(CategoricalColumn::new(catalog.to_vec(), values, present)?)
}

fn numerical_column(
    panel: &Panel,
    cohort: &Cohort,
    name: &str,
) -> Result<NumericalColumn, CliError> {
    let col = panel.column(name).expect("schema checked");
    let mut values = vec![0.0; cohort.len()];
    let mut present = vec![false; cohort.len()];
    for (row, id) in panel.rows.iter().zip(panel.ids()) {
        let i = cohort.position(id).expect("ids checked against cohort");
        let cell = row[col].trim();
        if cell.is_empty() {
            continue;
        }
        let v: f64 = cell
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| {
                CliError::Schema(format!(
                    "{name}: {cell:?} (id {id:?}) is not a finite number"
                ))
            })?;
        values[i] = v;
        present[i] = true;
    }
    Ok(NumericalColumn::new(values, present)?)
}

/// Cohort-indexed replacement cell text for one attribute.
struct Replacement {
    column: usize,
    cells: Vec<Option<String>>,
}

fn categorical_cells(col: &CategoricalColumn) -> Vec<Option<String>> {
    col.values
        .iter()
        .zip(&col.present)
        .map(|(&v, &here)| here.then(|| col.catalog[v].clone()))
        .collect()
}

fn numerical_cells(original: &NumericalColumn, mixed: &NumericalColumn) -> Vec<Option<String>> {
    original
        .values
        .iter()
        .zip(&mixed.values)
        .zip(&mixed.present)
        .map(|((&before, &after), &here)| {
            // None keeps the input text, so untouched values stay byte-identical
            here.then(|| (after.to_bits() != before.to_bits()).then(|| format!("{after}")))
                .flatten()
        })
        .collect()
}

/// Runs period `t` of the plan and writes into `out_dir`. `seed` overrides
/// the plan's master seed.
pub fn protect(
    cfg: &ReleasePlanConfig,
    t: u32,
    out_dir: &Path,
    seed: Option<u64>,
) -> Result<ProtectReport, CliError> {
    let master = seed.unwrap_or(cfg.master_seed);
    let plan = cfg
        .period(t)
        .ok_or_else(|| CliError::Config(format!("no period {t} in plan")))?;
    let panel = read_panel(&cfg.resolve(&plan.input), cfg)?;
    let cohort = if t == 1 {
        Cohort::from_panel(&panel)
    } else {
        let first = cfg.period(1).expect("plan checked");
        Cohort::from_panel(&read_panel(&cfg.resolve(&first.input), cfg)?)
    };
    if let Some(id) = panel.ids().find(|id| cohort.position(id).is_none()) {
        return Err(CliError::Schema(format!(
            "id {id:?} at period {t} is not in the period-1 cohort"
        )));
    }

    let mut replacements = Vec::new();
    let mut staged = Vec::new();
    for unit in cfg.units() {
        let stream = Substream::new(master, t, unit.seed_index);
        let (spec, applied, meta_active, restricted_from) = match unit.kind {
            UnitKind::Attribute(a) => {
                let decl = &cfg.attributes[a];
                match decl.kind {
                    AttributeKind::Categorical => {
                        let catalog = decl.catalog.as_deref().expect("config checked");
                        let column = categorical_column(&panel, &cohort, &decl.name, catalog)?;
                        let spec = cfg.matrix_spec(t, &unit.name, catalog.len())?;
                        let p = spec.build()?;
                        let outcome = pram_apply(&column, &p, stream)?;
                        let AttributeColumn::Categorical(out) = outcome.anonymized else {
                            unreachable!("categorical in, categorical out")
                        };
                        replacements.push(Replacement {
                            column: panel.column(&decl.name).expect("schema checked"),
                            cells: categorical_cells(&out),
                        });
                        (spec, p, column.present_count(), None)
                    }
                    AttributeKind::Numerical => {
                        let column = numerical_column(&panel, &cohort, &decl.name)?;
                        let spec = cfg.matrix_spec(t, &unit.name, cohort.len())?;
                        let p = spec.build()?;
                        let active = column.present_count();
                        let result = apply_with_dropouts(
                            &AttributeColumn::Numerical(column.clone()),
                            &p,
                            stream,
                            DropoutPolicy::RestrictAndRenormalize,
                        )?;
                        let AttributeColumn::Numerical(mixed) = &result.outcome.anonymized else {
                            unreachable!("numerical in, numerical out")
                        };
                        replacements.push(Replacement {
                            column: panel.column(&decl.name).expect("schema checked"),
                            cells: numerical_cells(&column, mixed),
                        });
                        (spec, result.applied, active, result.restricted_from)
                    }
                }
            }
            UnitKind::Group(g) => {
                let group = &cfg.joint_groups[g];
                let members: Vec<CategoricalColumn> = group
                    .attributes
                    .iter()
                    .map(|name| {
                        let (_, decl) = cfg.attribute(name).expect("config checked");
                        let catalog = decl.catalog.as_deref().expect("config checked");
                        categorical_column(&panel, &cohort, name, catalog)
                    })
                    .collect::<Result<_, _>>()?;
                let refs: Vec<&CategoricalColumn> = members.iter().collect();
                let encoding = joint_encode(&refs, JOINT_CATALOG_CAP)?;
                let spec = cfg.matrix_spec(t, &unit.name, encoding.column.catalog.len())?;
                let p = spec.build()?;
                let outcome = pram_apply(&encoding.column, &p, stream)?;
                let AttributeColumn::Categorical(joint) = outcome.anonymized else {
                    unreachable!("categorical in, categorical out")
                };
                for (name, (decoded, original)) in group
                    .attributes
                    .iter()
                    .zip(encoding.decode_column(&joint).iter().zip(&members))
                {
                    // individuals missing any member are not randomized
                    // jointly; their observed members are released as is
                    let cells = categorical_cells(decoded)
                        .into_iter()
                        .zip(categorical_cells(original))
                        .map(|(d, o)| d.or(o))
                        .collect();
                    replacements.push(Replacement {
                        column: panel.column(name).expect("schema checked"),
                        cells,
                    });
                }
                (spec, p, encoding.column.present_count(), None)
            }
        };

        let path = ledger_path(out_dir, &unit.name);
        let ledger = match std::fs::read_to_string(&path) {
            Ok(text) => ReleaseLedger::from_json(&text)?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => ReleaseLedger::new(),
            Err(e) => return Err(CliError::io(&path, e)),
        };
        let meta = ReleaseMeta {
            spec: spec.clone(),
            active_count: meta_active,
            restricted_from,
        };
        let ledger = if ledger.record(t).is_some() {
            ledger.revise_release(t, &applied, meta)?
        } else {
            let mut ledger = ledger;
            ledger.record_release(t, &applied, meta)?;
            ledger
        };
        let record = ledger.record(t).expect("just recorded").clone();
        staged.push((
            UnitSummary {
                name: unit.name.clone(),
                spec,
                n_t: record.n_t,
                beta_t: record.beta_t,
                restricted_from: record.restricted_from,
                beta_l_from_first: ledger
                    .trajectory_guarantee(Convention::FromFirstPeriod)
                    .ok()
                    .map(|g| g.beta_l),
                beta_l_from_second: ledger
                    .trajectory_guarantee(Convention::FromSecondPeriod)
                    .ok()
                    .map(|g| g.beta_l),
                ledger_path: path,
            },
            ledger,
        ));
    }

    let mut rows = panel.rows.clone();
    for (row, id) in rows.iter_mut().zip(panel.ids()) {
        let i = cohort.position(id).expect("ids checked against cohort");
        for r in &replacements {
            if let Some(text) = &r.cells[i] {
                row[r.column] = text.clone();
            }
        }
    }

    let mut comments = vec![
        format!("anonymized release t={t}"),
        format!("seed_fingerprint={}", seed_fingerprint(master)),
    ];
    for (u, _) in &staged {
        comments.push(format!(
            "unit={} n_t={} beta_t={} spec={}",
            u.name,
            u.n_t,
            u.beta_t,
            serde_json::to_string(&u.spec).expect("specs serialize")
        ));
    }
    let bytes = render_release(&comments, &panel.headers, &rows)?;

    std::fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    let csv_path = release_path(out_dir, t);
    std::fs::write(&csv_path, bytes).map_err(|e| CliError::io(&csv_path, e))?;
    let mut units = Vec::with_capacity(staged.len());
    for (summary, ledger) in staged {
        std::fs::write(&summary.ledger_path, ledger.to_json())
            .map_err(|e| CliError::io(&summary.ledger_path, e))?;
        units.push(summary);
    }
    Ok(ProtectReport { t, csv_path, units })
}
