//! Provenance highlights, row sampling for large tables, and HTML rendering.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rand::seq::IteratorRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::EvalError;
use crate::formula::Formula;
use crate::provenance::{provenance_chain, record_sets, AggregateMark, ProvenanceChain};
use crate::table::{CellRef, Table};

pub const DEFAULT_SAMPLE_THRESHOLD: usize = 50;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HighlightError {
    #[error("annotation references cell (column {column}, row {row}) outside the table")]
    DanglingCellRef { column: usize, row: usize },
    #[error("annotation references unknown column `{0}`")]
    UnknownColumn(String),
}

/// Cell styles ordered from weakest to strongest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellStyle {
    Lit,
    Framed,
    Colored,
}

impl CellStyle {
    pub fn css_class(self) -> &'static str {
        match self {
            CellStyle::Lit => "hl-lit",
            CellStyle::Framed => "hl-framed",
            CellStyle::Colored => "hl-colored",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SamplingPolicy {
    /// Lowest row index of each set.
    LowestIndex,
    /// Uniform pick per set from a seeded generator.
    Seeded { seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HighlightOptions {
    /// Tables with more rows than this are sampled.
    pub sample_threshold: usize,
    pub policy: SamplingPolicy,
}

impl Default for HighlightOptions {
    fn default() -> Self {
        HighlightOptions {
            sample_threshold: DEFAULT_SAMPLE_THRESHOLD,
            policy: SamplingPolicy::LowestIndex,
        }
    }
}

/// The strongest style of every highlighted cell, header marks, and the sampled
/// rows when sampling applied.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct HighlightAnnotation {
    pub styles: BTreeMap<CellRef, CellStyle>,
    pub header_marks: BTreeSet<AggregateMark>,
    pub sampled_rows: Option<Vec<usize>>,
}

impl HighlightAnnotation {
    pub fn cells_with(&self, style: CellStyle) -> BTreeSet<CellRef> {
        self.styles
            .iter()
            .filter(|(_, s)| **s == style)
            .map(|(c, _)| *c)
            .collect()
    }

    /// Paints a chain, restricted to `rows` when given.
    pub fn from_chain(p: &ProvenanceChain, rows: Option<Vec<usize>>) -> Self {
        let keep = |c: &CellRef| rows.as_ref().is_none_or(|r| r.binary_search(&c.row).is_ok());
        let mut styles = BTreeMap::new();
        for (cells, style) in [
            (&p.column_cells, CellStyle::Lit),
            (&p.executed_cells, CellStyle::Framed),
            (&p.output_cells, CellStyle::Colored),
        ] {
            for c in cells.iter().filter(|c| keep(c)) {
                styles.insert(*c, style);
            }
        }
        HighlightAnnotation {
            styles,
            header_marks: p.executed_marks.clone(),
            sampled_rows: rows,
        }
    }
}

fn pick(set: &BTreeSet<usize>, policy: SamplingPolicy, rng: &mut ChaCha8Rng) -> Option<usize> {
    match policy {
        SamplingPolicy::LowestIndex => set.first().copied(),
        SamplingPolicy::Seeded { .. } => set.iter().copied().choose(rng),
    }
}

/// One row from each of the output rows, the other executed rows and the other
/// column rows. For a difference, one output row per operand is taken instead of
/// a single output row. Result is ascending.
pub fn sample_rows(p: &ProvenanceChain, t: &Table, policy: SamplingPolicy) -> Vec<usize> {
    let seed = match policy {
        SamplingPolicy::Seeded { seed } => seed,
        SamplingPolicy::LowestIndex => 0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = record_sets(p, t);
    let mut out = BTreeSet::new();
    match &p.difference_rows {
        Some((a, b)) => {
            let a: BTreeSet<usize> = a.intersection(&r.output).copied().collect();
            let b: BTreeSet<usize> = b.intersection(&r.output).copied().collect();
            if let Some(x) = pick(&a, policy, &mut rng) {
                out.insert(x);
            }
            let rest: BTreeSet<usize> = b.difference(&out).copied().collect();
            if let Some(y) = pick(&rest, policy, &mut rng) {
                out.insert(y);
            }
            if out.is_empty() {
                if let Some(x) = pick(&r.output, policy, &mut rng) {
                    out.insert(x);
                }
            }
        }
        None => {
            if let Some(x) = pick(&r.output, policy, &mut rng) {
                out.insert(x);
            }
        }
    }
    let executed_only = r.executed.difference(&r.output).copied().collect();
    let column_only = r.column.difference(&r.executed).copied().collect();
    for set in [&executed_only, &column_only] {
        if let Some(x) = pick(set, policy, &mut rng) {
            out.insert(x);
        }
    }
    out.into_iter().collect()
}

/// Highlights with default options.
pub fn highlight(f: &Formula, t: &Table) -> Result<HighlightAnnotation, EvalError> {
    highlight_with(f, t, &HighlightOptions::default())
}

pub fn highlight_with(f: &Formula, t: &Table, opts: &HighlightOptions) -> Result<HighlightAnnotation, EvalError> {
    let p = provenance_chain(f, t)?;
    let rows = (t.row_count() > opts.sample_threshold).then(|| sample_rows(&p, t, opts.policy));
    Ok(HighlightAnnotation::from_chain(&p, rows))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StyledCell {
    pub column: String,
    pub row: usize,
    pub style: CellStyle,
}

/// Wire form of a highlight annotation, with cells addressed by column name.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationDocument {
    pub table_id: String,
    pub styles: Vec<StyledCell>,
    pub header_marks: Vec<AggregateMark>,
    pub sampled_rows: Option<Vec<usize>>,
}

impl AnnotationDocument {
    pub fn new(table_id: impl Into<String>, t: &Table, a: &HighlightAnnotation) -> Self {
        AnnotationDocument {
            table_id: table_id.into(),
            styles: a
                .styles
                .iter()
                .map(|(c, s)| StyledCell {
                    column: t.column_name(c.column).to_string(),
                    row: c.row,
                    style: *s,
                })
                .collect(),
            header_marks: a.header_marks.iter().cloned().collect(),
            sampled_rows: a.sampled_rows.clone(),
        }
    }

    pub fn to_annotation(&self, t: &Table) -> Result<HighlightAnnotation, HighlightError> {
        let mut styles = BTreeMap::new();
        for s in &self.styles {
            let column = t
                .column_index(&s.column)
                .map_err(|_| HighlightError::UnknownColumn(s.column.clone()))?;
            styles.insert(CellRef::new(column, s.row), s.style);
        }
        Ok(HighlightAnnotation {
            styles,
            header_marks: self.header_marks.iter().cloned().collect(),
            sampled_rows: self.sampled_rows.clone(),
        })
    }
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            c => out.push(c),
        }
    }
    out
}

const STYLE: &str = "\
table.qexplain { border-collapse: collapse; font-family: sans-serif; }
table.qexplain th, table.qexplain td { border: 1px solid #bbb; padding: 2px 6px; }
.hl-lit { background: #fdf2c8; }
.hl-framed { background: #fdf2c8; outline: 2px solid #c0392b; outline-offset: -2px; }
.hl-colored { background: #8fd19e; outline: 2px solid #c0392b; outline-offset: -2px; }
th.hl-mark { color: #c0392b; }
";

/// Standalone HTML page of the (sampled) table with highlight classes
/// `hl-colored`, `hl-framed` and `hl-lit`; marked headers read `MAX(Year)`.
pub fn render_html(t: &Table, a: &HighlightAnnotation) -> Result<String, HighlightError> {
    for c in a.styles.keys() {
        if t.get(*c).is_none() {
            return Err(HighlightError::DanglingCellRef {
                column: c.column,
                row: c.row,
            });
        }
    }
    let mut marks: BTreeMap<usize, Vec<&AggregateMark>> = BTreeMap::new();
    for m in &a.header_marks {
        let c = t
            .column_index(&m.column)
            .map_err(|_| HighlightError::UnknownColumn(m.column.clone()))?;
        marks.entry(c).or_default().push(m);
    }
    let rows: Vec<usize> = match &a.sampled_rows {
        Some(rows) => {
            if let Some(&r) = rows.iter().find(|&&r| r >= t.row_count()) {
                return Err(HighlightError::DanglingCellRef { column: 0, row: r });
            }
            rows.clone()
        }
        None => (0..t.row_count()).collect(),
    };
    let lit_columns: BTreeSet<usize> = a.styles.keys().map(|c| c.column).collect();

    let mut html = String::new();
    html.push_str("<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n");
    let _ = writeln!(html, "<title>{}</title>", escape(t.name()));
    let _ = write!(html, "<style>\n{STYLE}</style>\n</head>\n<body>\n");
    html.push_str("<table class=\"qexplain\">\n<thead>\n<tr>");
    for (i, name) in t.headers().iter().enumerate() {
        let mut classes = Vec::new();
        if lit_columns.contains(&i) {
            classes.push("hl-lit");
        }
        let label = match marks.get(&i) {
            Some(ms) => {
                classes.push("hl-mark");
                ms.iter().map(|m| m.label()).collect::<Vec<_>>().join(" ")
            }
            None => name.clone(),
        };
        if classes.is_empty() {
            let _ = write!(html, "<th>{}</th>", escape(&label));
        } else {
            let _ = write!(html, "<th class=\"{}\">{}</th>", classes.join(" "), escape(&label));
        }
    }
    html.push_str("</tr>\n</thead>\n<tbody>\n");
    for r in rows {
        let _ = write!(html, "<tr data-row=\"{r}\">");
        for (c, v) in t.rows()[r].iter().enumerate() {
            let text = escape(&v.to_string());
            match a.styles.get(&CellRef::new(c, r)) {
                Some(s) => {
                    let _ = write!(html, "<td class=\"{}\">{text}</td>", s.css_class());
                }
                None => {
                    let _ = write!(html, "<td>{text}</td>");
                }
            }
        }
        html.push_str("</tr>\n");
    }
    html.push_str("</tbody>\n</table>\n</body>\n</html>\n");
    Ok(html)
}
