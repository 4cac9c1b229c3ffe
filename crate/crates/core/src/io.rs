//! Trajectory files.
//!
//! CSV columns, in order: `t`, `c_<species>`..., `R_<reaction>`... (only for
//! reaction-extent schemes), `F`, `cons_<k>`... Every value is written in
//! scientific notation with 17 significant digits, which round-trips 64-bit
//! floats exactly. A run that stopped early ends with a `# truncated` line.

use std::fmt::Write;

use serde::Serialize;
use thiserror::Error;

use crate::scheme::{Record, StepReport};

pub const TRUNCATED_TRAILER: &str = "# truncated";

/// Column layout shared by the writer and the reader.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Layout {
    pub species: Vec<String>,
    /// Empty when the scheme has no reaction extents.
    pub reaction_ids: Vec<String>,
    pub n_conservation: usize,
}

impl Layout {
    pub fn header(&self) -> Vec<String> {
        let mut cols = vec!["t".to_string()];
        cols.extend(self.species.iter().map(|s| format!("c_{s}")));
        cols.extend(self.reaction_ids.iter().map(|r| format!("R_{r}")));
        cols.push("F".into());
        cols.extend((1..=self.n_conservation).map(|k| format!("cons_{k}")));
        cols
    }

    fn width(&self) -> usize {
        2 + self.species.len() + self.reaction_ids.len() + self.n_conservation
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub layout: Layout,
    pub records: Vec<Record>,
    pub truncated: bool,
}

/// Fixed 17-significant-digit form.
pub fn format_value(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.16e}")
    }
}

pub fn write_csv(table: &Table) -> String {
    let mut out = table.layout.header().join(",");
    out.push('\n');
    for r in &table.records {
        let mut first = true;
        let mut put = |v: f64, out: &mut String| {
            if !first {
                out.push(',');
            }
            first = false;
            out.push_str(&format_value(v));
        };
        put(r.t, &mut out);
        for &v in &r.c {
            put(v, &mut out);
        }
        for &v in &r.extents {
            put(v, &mut out);
        }
        put(r.free_energy, &mut out);
        for &v in &r.conservation {
            put(v, &mut out);
        }
        out.push('\n');
    }
    if table.truncated {
        let _ = writeln!(out, "{TRUNCATED_TRAILER}");
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CsvError {
    #[error("empty file")]
    Empty,
    #[error("line 1: bad header: {0}")]
    Header(String),
    #[error("line {line}: expected {expected} fields, found {found}")]
    Width {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}, field {field}: invalid number `{text}`")]
    Number {
        line: usize,
        field: usize,
        text: String,
    },
    #[error("line {line}: content after `{TRUNCATED_TRAILER}`")]
    AfterTrailer { line: usize },
}

fn parse_header(line: &str) -> Result<Layout, CsvError> {
    let cols: Vec<&str> = line.split(',').collect();
    let bad = |msg: &str| CsvError::Header(msg.to_string());
    if cols.first() != Some(&"t") {
        return Err(bad("first column must be `t`"));
    }
    let f_at = cols
        .iter()
        .position(|c| *c == "F")
        .ok_or_else(|| bad("missing `F` column"))?;
    let mut layout = Layout {
        species: Vec::new(),
        reaction_ids: Vec::new(),
        n_conservation: 0,
    };
    for c in &cols[1..f_at] {
        if let Some(s) = c.strip_prefix("c_") {
            if !layout.reaction_ids.is_empty() {
                return Err(bad("species columns must precede reaction columns"));
            }
            layout.species.push(s.to_string());
        } else if let Some(r) = c.strip_prefix("R_") {
            layout.reaction_ids.push(r.to_string());
        } else {
            return Err(bad(&format!("unexpected column `{c}`")));
        }
    }
    for (k, c) in cols[f_at + 1..].iter().enumerate() {
        if *c != format!("cons_{}", k + 1) {
            return Err(bad(&format!("expected `cons_{}`, found `{c}`", k + 1)));
        }
    }
    layout.n_conservation = cols.len() - f_at - 1;
    if layout.species.is_empty() {
        return Err(bad("no species columns"));
    }
    Ok(layout)
}

/// Reads a trajectory CSV as written by [`write_csv`].
pub fn read_csv(text: &str) -> Result<Table, CsvError> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(CsvError::Empty)?;
    let layout = parse_header(header)?;
    let width = layout.width();
    let (ns, nr) = (layout.species.len(), layout.reaction_ids.len());
    let mut records = Vec::new();
    let mut truncated = false;
    for (i, line) in lines {
        let lineno = i + 1;
        if truncated {
            if line.trim().is_empty() {
                continue;
            }
            return Err(CsvError::AfterTrailer { line: lineno });
        }
        if line.trim() == TRUNCATED_TRAILER {
            truncated = true;
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != width {
            return Err(CsvError::Width {
                line: lineno,
                expected: width,
                found: fields.len(),
            });
        }
        let values = fields
            .iter()
            .enumerate()
            .map(|(k, f)| {
                f.parse::<f64>().map_err(|_| CsvError::Number {
                    line: lineno,
                    field: k + 1,
                    text: f.to_string(),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        records.push(Record {
            t: values[0],
            c: values[1..1 + ns].to_vec(),
            extents: values[1 + ns..1 + ns + nr].to_vec(),
            free_energy: values[1 + ns + nr],
            conservation: values[2 + ns + nr..].to_vec(),
        });
    }
    Ok(Table {
        layout,
        records,
        truncated,
    })
}

/// Parses `v1,v2,...` into floats (used for `--c-inf`).
pub fn parse_vector(text: &str) -> Result<Vec<f64>, String> {
    text.split(',')
        .map(|s| {
            let s = s.trim();
            match s.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(format!("invalid number `{s}`")),
            }
        })
        .collect()
}

/// JSON document mirroring the CSV plus per-step solver reports.
#[derive(Debug, Clone, Serialize)]
pub struct JsonOutput<'a, M: Serialize, A: Serialize> {
    pub metadata: &'a M,
    pub columns: Vec<String>,
    pub records: &'a [Record],
    pub steps: &'a [StepReport],
    pub audit: &'a A,
    pub truncated: bool,
}

pub fn write_json<M: Serialize, A: Serialize>(
    metadata: &M,
    table: &Table,
    steps: &[StepReport],
    audit: &A,
) -> String {
    let doc = JsonOutput {
        metadata,
        columns: table.layout.header(),
        records: &table.records,
        steps,
        audit,
        truncated: table.truncated,
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("trajectory serializes");
    s.push('\n');
    s
}
