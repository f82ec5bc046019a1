//! Natural-language utterances for formulas, built bottom-up from one template
//! per node kind. Templates can be overridden from TOML.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::formula::{AggregateFn, CompareOp, Direction, Formula};

/// Template set. Placeholders are `{name}`; unknown placeholders are kept verbatim.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Templates {
    pub union: String,
    pub intersect: String,
    pub join: String,
    pub all_records: String,
    pub lt: String,
    pub gt: String,
    pub leq: String,
    pub geq: String,
    pub column_values: String,
    pub prev_values: String,
    pub next_values: String,
    pub count: String,
    pub max: String,
    pub min: String,
    pub sum: String,
    pub avg: String,
    pub sub_values: String,
    pub sub_counts: String,
    pub argmax_records: String,
    pub argmin_records: String,
    pub last_index_value: String,
    pub first_index_value: String,
    pub most_frequent: String,
    pub least_frequent: String,
    pub compare_max: String,
    pub compare_min: String,
}

impl Default for Templates {
    fn default() -> Self {
        let s = str::to_string;
        Templates {
            union: s("{a} or {b}"),
            intersect: s("{a} and also {b}"),
            join: s("rows where value of column {column} {arg}"),
            all_records: s("rows"),
            lt: s("is less than {bound}"),
            gt: s("is more than {bound}"),
            leq: s("is at most {bound}"),
            geq: s("is at least {bound}"),
            column_values: s("values in column {column} in {records}"),
            prev_values: s("values in column {column} in rows right above {records}"),
            next_values: s("values in column {column} in rows right below {records}"),
            count: s("the number of {arg}"),
            max: s("maximum of {arg}"),
            min: s("minimum of {arg}"),
            sum: s("the sum of {arg}"),
            avg: s("the average of {arg}"),
            sub_values: s(
                "difference in values of column {out} between rows where values of column {key} is {v} and {u}",
            ),
            sub_counts: s(
                "in column {column}, what is the difference between rows with value {v} and rows with value {u}",
            ),
            argmax_records: s("rows that have the highest value in column {column}"),
            argmin_records: s("rows that have the lowest value in column {column}"),
            last_index_value: s("values in column {column} where it is the last row in {records}"),
            first_index_value: s("values in column {column} where it is the first row in {records}"),
            most_frequent: s("the value of {values} that appears the most in column {column}"),
            least_frequent: s("the value of {values} that appears the least in column {column}"),
            compare_max: s("between {values} who has the highest value of column {by}"),
            compare_min: s("between {values} who has the lowest value of column {by}"),
        }
    }
}

/// Single-pass placeholder substitution, so substituted text is never rescanned.
fn fill(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len() + 32);
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        match after.find('}') {
            Some(close) => {
                let name = &after[..close];
                match vars.iter().find(|(k, _)| *k == name) {
                    Some((_, v)) => out.push_str(v),
                    None => {
                        out.push('{');
                        out.push_str(name);
                        out.push('}');
                    }
                }
                rest = &after[close + 1..];
            }
            None => {
                out.push_str(&rest[open..]);
                rest = "";
            }
        }
    }
    out.push_str(rest);
    out
}

impl Templates {
    pub fn from_toml(src: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(src)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("templates are plain strings")
    }

    pub fn utter(&self, f: &Formula) -> String {
        match f {
            Formula::ValueLit { value } => value.to_string(),
            Formula::AllRecords => self.all_records.clone(),
            Formula::NumCompare { op, bound } => {
                let t = match op {
                    CompareOp::Lt => &self.lt,
                    CompareOp::Gt => &self.gt,
                    CompareOp::Leq => &self.leq,
                    CompareOp::Geq => &self.geq,
                };
                fill(t, &[("bound", &bound.to_string())])
            }
            Formula::Join { column, arg } => {
                let a = self.utter(arg);
                let a = if a.starts_with("is ") { a } else { format!("is {a}") };
                fill(&self.join, &[("column", column), ("arg", &a)])
            }
            Formula::ColumnValues { column, records } => fill(
                &self.column_values,
                &[("column", column), ("records", &self.utter(records))],
            ),
            Formula::PrevValues { column, records } => fill(
                &self.prev_values,
                &[("column", column), ("records", &self.utter(records))],
            ),
            Formula::NextValues { column, records } => fill(
                &self.next_values,
                &[("column", column), ("records", &self.utter(records))],
            ),
            Formula::Aggregate { func, arg } => {
                let t = match func {
                    AggregateFn::Count => &self.count,
                    AggregateFn::Max => &self.max,
                    AggregateFn::Min => &self.min,
                    AggregateFn::Sum => &self.sum,
                    AggregateFn::Avg => &self.avg,
                };
                fill(t, &[("arg", &self.utter(arg))])
            }
            Formula::SubValues {
                column_out,
                column_key,
                left,
                right,
            } => fill(
                &self.sub_values,
                &[
                    ("out", column_out),
                    ("key", column_key),
                    ("v", &left.to_string()),
                    ("u", &right.to_string()),
                ],
            ),
            Formula::SubCounts { column, left, right } => fill(
                &self.sub_counts,
                &[("column", column), ("v", &left.to_string()), ("u", &right.to_string())],
            ),
            Formula::Union { left, right } => fill(&self.union, &[("a", &self.utter(left)), ("b", &self.utter(right))]),
            Formula::Intersect { left, right } => {
                let b = self.utter(right);
                let b = b.strip_prefix("rows ").map(str::to_string).unwrap_or(b);
                fill(&self.intersect, &[("a", &self.utter(left)), ("b", &b)])
            }
            Formula::ArgmaxRecords { direction, column } => {
                let t = match direction {
                    Direction::Max => &self.argmax_records,
                    Direction::Min => &self.argmin_records,
                };
                fill(t, &[("column", column)])
            }
            Formula::ExtremeIndexValue {
                direction,
                column,
                records,
            } => {
                let t = match direction {
                    Direction::Max => &self.last_index_value,
                    Direction::Min => &self.first_index_value,
                };
                fill(t, &[("column", column), ("records", &self.utter(records))])
            }
            Formula::MostFrequent {
                direction,
                values,
                column,
            } => {
                let t = match direction {
                    Direction::Max => &self.most_frequent,
                    Direction::Min => &self.least_frequent,
                };
                fill(t, &[("values", &self.utter(values)), ("column", column)])
            }
            Formula::CompareValues {
                direction,
                values,
                column_key,
                column_by,
            } => {
                let t = match direction {
                    Direction::Max => &self.compare_max,
                    Direction::Min => &self.compare_min,
                };
                fill(
                    t,
                    &[("values", &self.utter(values)), ("key", column_key), ("by", column_by)],
                )
            }
        }
    }
}

fn defaults() -> &'static Templates {
    static T: OnceLock<Templates> = OnceLock::new();
    T.get_or_init(Templates::default)
}

/// Utterance under the default templates.
pub fn utter(f: &Formula) -> String {
    defaults().utter(f)
}

pub fn utter_candidates(cs: &[Formula]) -> Vec<String> {
    cs.iter().map(utter).collect()
}
