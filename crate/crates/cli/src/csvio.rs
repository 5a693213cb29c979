//! Panel CSV reading and anonymized release writing.
//!
//! Input: UTF-8, comma separated, header row, a required `id` column plus
//! exactly the declared attributes. Lines starting with `#` are skipped, so a
//! released file can be read back. An empty cell means the value is absent
//! for that individual in that period.

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use crate::config::{ReleasePlanConfig, ID_COLUMN};
use crate::error::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    pub headers: Vec<String>,
    /// Row cells in file order, `headers.len()` per row.
    pub rows: Vec<Vec<String>>,
    id_col: usize,
}

impl Panel {
    pub fn column(&self, name: &str) -> Option<usize> {
        self.headers.iter().position(|h| h == name)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.rows.iter().map(move |r| r[self.id_col].as_str())
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

fn reader_builder() -> csv::ReaderBuilder {
    let mut b = csv::ReaderBuilder::new();
    b.has_headers(true).comment(Some(b'#')).flexible(false);
    b
}

/// Reads a panel and checks it against the declared attributes.
pub fn read_panel(path: &Path, cfg: &ReleasePlanConfig) -> Result<Panel, CliError> {
    let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    parse_panel(file, cfg).map_err(|e| match e {
        CliError::Schema(msg) => CliError::Schema(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn parse_panel<R: std::io::Read>(input: R, cfg: &ReleasePlanConfig) -> Result<Panel, CliError> {
    let mut reader = reader_builder().from_reader(input);
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    let mut seen = BTreeSet::new();
    for h in &headers {
        if !seen.insert(h.as_str()) {
            return Err(CliError::Schema(format!("duplicate column {h:?}")));
        }
        if h != ID_COLUMN && cfg.attribute(h).is_none() {
            return Err(CliError::Schema(format!("undeclared column {h:?}")));
        }
    }
    let id_col = headers
        .iter()
        .position(|h| h == ID_COLUMN)
        .ok_or_else(|| CliError::Schema(format!("missing {ID_COLUMN:?} column")))?;
    if let Some(a) = cfg
        .attributes
        .iter()
        .find(|a| !seen.contains(a.name.as_str()))
    {
        return Err(CliError::Schema(format!("missing column {:?}", a.name)));
    }

    let mut rows = Vec::new();
    let mut ids = BTreeSet::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let row: Vec<String> = record.iter().map(str::to_owned).collect();
        let id = &row[id_col];
        if id.is_empty() {
            return Err(CliError::Schema(format!("record {}: missing id", line + 1)));
        }
        if !ids.insert(id.clone()) {
            return Err(CliError::Schema(format!("duplicate id {id:?}")));
        }
        rows.push(row);
    }
    Ok(Panel {
        headers,
        rows,
        id_col,
    })
}

/// Ids of the first-period panel, in file order, with their positions.
#[derive(Debug, Clone, PartialEq)]
pub struct Cohort {
    pub ids: Vec<String>,
    index: HashMap<String, usize>,
}

impl Cohort {
    pub fn from_panel(panel: &Panel) -> Self {
        let ids: Vec<String> = panel.ids().map(str::to_owned).collect();
        let index = ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), i))
            .collect();
        Self { ids, index }
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// Serializes `#`-prefixed comment lines followed by the table.
pub fn render_release(
    comments: &[String],
    headers: &[String],
    rows: &[Vec<String>],
) -> Result<Vec<u8>, CliError> {
    let mut out = Vec::new();
    for c in comments {
        for line in c.lines() {
            out.extend_from_slice(b"# ");
            out.extend_from_slice(line.as_bytes());
            out.push(b'\n');
        }
    }
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(&mut out);
    writer.write_record(headers)?;
    for row in rows {
        writer.write_record(row)?;
    }
    writer.flush().map_err(|e| CliError::Io {
        path: "<buffer>".into(),
        source: e,
    })?;
    drop(writer);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> ReleasePlanConfig {
        ReleasePlanConfig::parse(
            r#"
[[attributes]]
name = "status"
kind = "categorical"
catalog = ["a", "b"]

[[attributes]]
name = "income"
kind = "numerical"

[[periods]]
t = 1
input = "w1.csv"
[periods.matrices]
status = { kind = "identity" }
income = { kind = "identity" }
"#,
        )
        .unwrap()
    }

    #[test]
    fn reads_and_indexes() {
        let text = "# note\nstatus,id,income\na,x1,10\nb,x2,\n";
        let panel = parse_panel(text.as_bytes(), &cfg()).unwrap();
        assert_eq!(panel.len(), 2);
        assert_eq!(panel.ids().collect::<Vec<_>>(), ["x1", "x2"]);
        assert_eq!(panel.column("income"), Some(2));
        let cohort = Cohort::from_panel(&panel);
        assert_eq!(cohort.position("x2"), Some(1));
        assert_eq!(cohort.position("x3"), None);
    }

    #[test]
    fn schema_errors() {
        let c = cfg();
        for bad in [
            "status,income\na,1\n",
            "id,status\nx,a\n",
            "id,status,income,extra\nx,a,1,2\n",
            "id,status,income\n,a,1\n",
            "id,status,income\nx,a,1\nx,b,2\n",
            "id,status,status,income\nx,a,a,1\n",
        ] {
            assert!(
                matches!(parse_panel(bad.as_bytes(), &c), Err(CliError::Schema(_))),
                "{bad:?}"
            );
        }
        assert!(parse_panel("id,status,income\nx,a\n".as_bytes(), &c).is_err());
    }

    #[test]
    fn release_round_trips_through_reader() {
        let headers: Vec<String> = ["id", "status", "income"].map(String::from).to_vec();
        let rows = vec![vec!["x1".into(), "a".into(), "10".into()]];
        let bytes = render_release(&["t=1\nmore".into()], &headers, &rows).unwrap();
        let text = String::from_utf8(bytes.clone()).unwrap();
        assert!(text.starts_with("# t=1\n# more\nid,status,income\n"));
        let panel = parse_panel(bytes.as_slice(), &cfg()).unwrap();
        assert_eq!(panel.rows, rows);
    }
}
