//! SQL translation over a fixed single-table schema, plus differential execution
//! against SQLite.
//!
//! The table is `T` with an integer index column `"Index"` and one double-quoted
//! column per header. Record formulas become `WHERE` conditions, value formulas
//! single-column `SELECT`s and scalars a one-row `SELECT`.

use std::collections::BTreeSet;

use rusqlite::types::ValueRef;
use rusqlite::Connection;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::{eval_val, evaluate, Denotation, EvalError};
use crate::formula::{infer_ty, typecheck, AggregateFn, Direction, Formula, ResultType, Ty, TypeError};
use crate::table::{format_number, infer_value, CellValue, Table, ValueKind};

#[derive(Debug, Error)]
pub enum SqlError {
    #[error(transparent)]
    Type(#[from] TypeError),
    #[error("sql engine: {0}")]
    Engine(#[from] rusqlite::Error),
    #[error("statement returned {0} rows where one scalar was expected")]
    ScalarShape(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SqlType {
    Text,
    Numeric,
    Date,
}

impl SqlType {
    fn declared(self) -> &'static str {
        match self {
            SqlType::Numeric => "NUMERIC",
            SqlType::Text | SqlType::Date => "TEXT",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SqlColumn {
    pub name: String,
    pub ident: String,
    pub ty: SqlType,
}

/// Table `T`: the index column plus one column per header.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SqlSchema {
    pub table: String,
    pub index: String,
    pub columns: Vec<SqlColumn>,
    shape: Table,
}

fn quote_ident(name: &str) -> String {
    format!("\"{}\"", name.replace('"', "\"\""))
}

/// SQL literal for a cell value; dates are ISO strings.
pub fn sql_literal(v: &CellValue) -> String {
    match v {
        CellValue::Number(x) => format_number(*x),
        CellValue::Text(s) => format!("'{}'", s.replace('\'', "''")),
        CellValue::Date(d) => format!("'{}'", d.iso()),
    }
}

impl SqlSchema {
    /// Infers column types from the cells: numeric or date when every cell is,
    /// text otherwise.
    pub fn from_table(t: &Table) -> Self {
        let mut taken: Vec<String> = Vec::new();
        let mut unique = |base: &str| -> String {
            let mut name = base.to_string();
            let mut k = 0;
            while taken.iter().any(|n| n.eq_ignore_ascii_case(&name)) {
                k += 1;
                name = format!("{base}_{k}");
            }
            taken.push(name.clone());
            name
        };
        let mut columns = Vec::new();
        for (i, name) in t.headers().iter().enumerate() {
            let kinds: BTreeSet<ValueKind> = t.column_values(i).map(CellValue::kind).collect();
            let ty = match (kinds.len(), kinds.iter().next()) {
                (1, Some(ValueKind::Number)) => SqlType::Numeric,
                (1, Some(ValueKind::Date)) => SqlType::Date,
                _ => SqlType::Text,
            };
            columns.push(SqlColumn {
                name: name.clone(),
                ident: quote_ident(&unique(name)),
                ty,
            });
        }
        let index = quote_ident(&unique("Index"));
        let shape = Table::new("T", t.headers().to_vec(), Vec::new()).expect("headers of a valid table are valid");
        SqlSchema {
            table: "T".into(),
            index,
            columns,
            shape,
        }
    }

    fn col(&self, name: &str) -> Result<&str, SqlError> {
        self.columns
            .iter()
            .find(|c| c.name == name)
            .map(|c| c.ident.as_str())
            .ok_or_else(|| TypeError::UnknownColumn(name.to_string()).into())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SqlOptions {
    /// Emit the literal `ORDER BY COUNT(..) DESC LIMIT 1` form for most-frequent,
    /// which drops ties.
    pub paper_faithful: bool,
}

struct Gen<'a> {
    s: &'a SqlSchema,
    opts: SqlOptions,
}

impl Gen<'_> {
    fn ty(&self, f: &Formula) -> Result<Ty, SqlError> {
        Ok(infer_ty(f, &self.s.shape)?)
    }

    fn table_where(&self, cond: Option<String>) -> String {
        match cond {
            Some(c) => format!("FROM {} WHERE {c}", self.s.table),
            None => format!("FROM {}", self.s.table),
        }
    }

    /// `"Index" IN (SELECT <expr> FROM T WHERE cond)`.
    fn index_in(&self, expr: &str, cond: Option<String>) -> String {
        format!("{} IN (SELECT {expr} {})", self.s.index, self.table_where(cond))
    }

    /// Condition selecting the records of `f`; `None` means every record.
    fn records(&self, f: &Formula) -> Result<Option<String>, SqlError> {
        Ok(match f {
            Formula::AllRecords => None,
            Formula::Join { column, arg } => Some(self.filter(arg, self.s.col(column)?)?),
            Formula::ArgmaxRecords { direction, column } => {
                let c = self.s.col(column)?;
                Some(format!(
                    "{c} = (SELECT {}({c}) FROM {})",
                    extreme_fn(*direction),
                    self.s.table
                ))
            }
            Formula::Union { left, right } => match (self.records(left)?, self.records(right)?) {
                (Some(a), Some(b)) => Some(format!("({a} OR {b})")),
                _ => None,
            },
            Formula::Intersect { left, right } => {
                let parts: Vec<String> = [left, right]
                    .into_iter()
                    .map(|side| self.records(side))
                    .collect::<Result<Vec<_>, _>>()?
                    .into_iter()
                    .flatten()
                    .map(|c| self.index_in(&self.s.index, Some(c)))
                    .collect();
                (!parts.is_empty()).then(|| parts.join(" AND "))
            }
            other => unreachable!("not a records formula: {other:?}"),
        })
    }

    /// Condition on column expression `col` for a join argument.
    fn filter(&self, f: &Formula, col: &str) -> Result<String, SqlError> {
        Ok(match f {
            Formula::ValueLit { value } => format!("{col} = {}", sql_literal(value)),
            Formula::NumCompare { op, bound } => {
                format!("{col} {} {}", op.symbol(), sql_literal(bound))
            }
            Formula::Union { left, right } if self.ty(f)? == Ty::Filter => {
                format!("({} OR {})", self.filter(left, col)?, self.filter(right, col)?)
            }
            Formula::Intersect { left, right } => {
                format!("({} AND {})", self.filter(left, col)?, self.filter(right, col)?)
            }
            Formula::Union { left, right }
                if matches!(**left, Formula::ValueLit { .. }) || matches!(**right, Formula::ValueLit { .. }) =>
            {
                format!("({} OR {})", self.filter(left, col)?, self.filter(right, col)?)
            }
            values => format!("{col} IN ({})", self.values(values, false)?),
        })
    }

    /// Single-column `SELECT` of the values of `f`, aliased `v` on request.
    fn values(&self, f: &Formula, alias: bool) -> Result<String, SqlError> {
        let a = if alias { " AS v" } else { "" };
        let t = &self.s.table;
        let idx = &self.s.index;
        Ok(match f {
            Formula::ValueLit { value } => format!("SELECT {}{a}", sql_literal(value)),
            Formula::ColumnValues { column, records } => {
                let c = self.s.col(column)?;
                match self.records(records)? {
                    Some(cond) => format!("SELECT {c}{a} FROM {t} WHERE {}", self.index_in(idx, Some(cond))),
                    None => format!("SELECT {c}{a} FROM {t}"),
                }
            }
            Formula::PrevValues { column, records } | Formula::NextValues { column, records } => {
                let c = self.s.col(column)?;
                let shift = if matches!(f, Formula::PrevValues { .. }) {
                    format!("{idx} - 1")
                } else {
                    format!("{idx} + 1")
                };
                let cond = self.records(records)?;
                format!("SELECT {c}{a} FROM {t} WHERE {}", self.index_in(&shift, cond))
            }
            Formula::ExtremeIndexValue {
                direction,
                column,
                records,
            } => {
                let c = self.s.col(column)?;
                let cond = self.records(records)?;
                format!(
                    "SELECT {c}{a} FROM {t} WHERE {idx} = (SELECT {}({idx}) {})",
                    extreme_fn(*direction),
                    self.table_where(cond)
                )
            }
            Formula::Union { left, right } => format!(
                "SELECT * FROM ({}) UNION SELECT * FROM ({})",
                self.values(left, alias)?,
                self.values(right, alias)?
            ),
            Formula::MostFrequent {
                direction,
                values,
                column,
            } => {
                let c = self.s.col(column)?;
                let vals = self.values(values, false)?;
                if self.opts.paper_faithful {
                    let order = match direction {
                        Direction::Max => "DESC",
                        Direction::Min => "ASC",
                    };
                    format!(
                        "SELECT {c}{a} FROM {t} WHERE {c} IN ({vals}) GROUP BY {c} ORDER BY COUNT({idx}) {order} LIMIT 1"
                    )
                } else {
                    format!(
                        "SELECT {c}{a} FROM {t} WHERE {c} IN ({vals}) GROUP BY {c} HAVING COUNT({idx}) = \
                         (SELECT {}(n) FROM (SELECT COUNT({idx}) AS n FROM {t} WHERE {c} IN ({vals}) GROUP BY {c}))",
                        extreme_fn(*direction)
                    )
                }
            }
            Formula::CompareValues {
                direction,
                values,
                column_key,
                column_by,
            } => {
                let (k, b) = (self.s.col(column_key)?, self.s.col(column_by)?);
                let vals = self.values(values, false)?;
                format!(
                    "SELECT DISTINCT {k}{a} FROM {t} WHERE {k} IN ({vals}) AND {b} = \
                     (SELECT {}({b}) FROM {t} WHERE {k} IN ({vals}))",
                    extreme_fn(*direction)
                )
            }
            other => unreachable!("not a values formula: {other:?}"),
        })
    }

    fn scalar(&self, f: &Formula) -> Result<String, SqlError> {
        let t = &self.s.table;
        let idx = &self.s.index;
        Ok(match f {
            Formula::Aggregate { func, arg } => match self.ty(arg)? {
                Ty::Records => format!("SELECT COUNT({idx}) {}", self.table_where(self.records(arg)?)),
                _ => {
                    let inner = if *func == AggregateFn::Count {
                        "COUNT(v)".to_string()
                    } else {
                        format!("{}(v)", func.sql())
                    };
                    format!("SELECT {inner} FROM ({})", self.values(arg, true)?)
                }
            },
            Formula::SubValues { .. } => {
                let parts = crate::formula::decompose(f);
                format!(
                    "SELECT ({}) - ({})",
                    self.values(&parts[0], false)?,
                    self.values(&parts[1], false)?
                )
            }
            Formula::SubCounts { column, left, right } => {
                let c = self.s.col(column)?;
                format!(
                    "SELECT (SELECT COUNT({idx}) FROM {t} WHERE {c} = {}) - (SELECT COUNT({idx}) FROM {t} WHERE {c} = {})",
                    sql_literal(left),
                    sql_literal(right)
                )
            }
            other => unreachable!("not a scalar formula: {other:?}"),
        })
    }
}

fn extreme_fn(d: Direction) -> &'static str {
    match d {
        Direction::Max => "MAX",
        Direction::Min => "MIN",
    }
}

/// Translates `f`; fails when a column is unknown or `f` does not type-check.
pub fn to_sql(f: &Formula, s: &SqlSchema) -> Result<String, SqlError> {
    to_sql_with(f, s, SqlOptions::default())
}

pub fn to_sql_with(f: &Formula, s: &SqlSchema, opts: SqlOptions) -> Result<String, SqlError> {
    let g = Gen { s, opts };
    Ok(match g.ty(f)? {
        Ty::Records => format!("SELECT * {}", g.table_where(g.records(f)?)),
        Ty::Values => g.values(f, false)?,
        Ty::Scalar => g.scalar(f)?,
        Ty::Filter => return Err(TypeError::TypeMismatch("comparison unary outside of a join".into()).into()),
    })
}

/// `CREATE TABLE` plus one `INSERT` per record.
pub fn export_table_sql(t: &Table, s: &SqlSchema) -> String {
    let mut cols = vec![format!("{} INTEGER", s.index)];
    cols.extend(s.columns.iter().map(|c| format!("{} {}", c.ident, c.ty.declared())));
    let mut out = format!("CREATE TABLE {} ({});\n", s.table, cols.join(", "));
    for (i, row) in t.rows().iter().enumerate() {
        let mut vals = vec![i.to_string()];
        vals.extend(row.iter().map(sql_literal));
        out.push_str(&format!("INSERT INTO {} VALUES ({});\n", s.table, vals.join(", ")));
    }
    out
}

/// Result of running a statement, read as a set.
#[derive(Debug, Clone, PartialEq)]
pub enum SqlResult {
    Records(BTreeSet<usize>),
    Values(BTreeSet<CellValue>),
    /// `None` for SQL `NULL`.
    Scalar(Option<CellValue>),
}

fn read_value(v: ValueRef<'_>) -> Option<CellValue> {
    match v {
        ValueRef::Null => None,
        ValueRef::Integer(i) => CellValue::number(i as f64),
        ValueRef::Real(x) => CellValue::number(x),
        ValueRef::Text(b) | ValueRef::Blob(b) => Some(infer_value(&String::from_utf8_lossy(b))),
    }
}

/// Loads `t` into a fresh in-memory database.
pub fn load_sqlite(t: &Table, s: &SqlSchema) -> Result<Connection, SqlError> {
    let conn = Connection::open_in_memory()?;
    conn.execute_batch(&export_table_sql(t, s))?;
    Ok(conn)
}

/// Runs `sql` and reads its first column according to the expected result type.
pub fn run_sql(conn: &Connection, sql: &str, ty: ResultType) -> Result<SqlResult, SqlError> {
    let mut stmt = conn.prepare(sql)?;
    let mut rows = stmt.query([])?;
    let mut cells = Vec::new();
    while let Some(row) = rows.next()? {
        cells.push(read_value(row.get_ref(0)?));
    }
    Ok(match ty {
        ResultType::Records => SqlResult::Records(
            cells
                .into_iter()
                .flatten()
                .filter_map(|v| v.as_number().map(|x| x as usize))
                .collect(),
        ),
        ResultType::Scalar => {
            if cells.len() != 1 {
                return Err(SqlError::ScalarShape(cells.len()));
            }
            SqlResult::Scalar(cells.pop().flatten())
        }
        ResultType::Values => SqlResult::Values(cells.into_iter().flatten().collect()),
    })
}

fn approx_eq(a: &CellValue, b: &CellValue) -> bool {
    match (a, b) {
        (CellValue::Number(x), CellValue::Number(y)) => (x - y).abs() <= 1e-9 * x.abs().max(y.abs()).max(1.0),
        _ => a == b,
    }
}

/// Outcome of one differential case.
#[derive(Debug, Clone, PartialEq)]
pub enum CaseOutcome {
    Agree,
    /// The evaluator rejects the case in a way SQL has no counterpart for.
    Skipped(String),
    Mismatch {
        expected: String,
        actual: String,
    },
}

/// Compares the evaluator with SQLite on one (formula, table) pair.
pub fn check_case(f: &Formula, t: &Table, opts: SqlOptions) -> Result<(CaseOutcome, String), SqlError> {
    let s = SqlSchema::from_table(t);
    let sql = to_sql_with(f, &s, opts)?;
    let ty = typecheck(f, t)?;
    let conn = load_sqlite(t, &s)?;
    let actual = run_sql(&conn, &sql, ty)?;
    let outcome = match (evaluate(f, t), &actual) {
        (Err(EvalError::EmptyAggregate { .. }), SqlResult::Scalar(None)) => CaseOutcome::Agree,
        (
            Err(
                e @ (EvalError::NonSingletonSub { .. }
                | EvalError::NonNumericSub { .. }
                | EvalError::NonNumericAggregate { .. }),
            ),
            _,
        ) => CaseOutcome::Skipped(e.to_string()),
        (Err(e), _) => CaseOutcome::Mismatch {
            expected: format!("error: {e}"),
            actual: format!("{actual:?}"),
        },
        (Ok(d), _) => {
            let agree = match (&d, &actual) {
                (Denotation::Records(a), SqlResult::Records(b)) => a == b,
                (Denotation::Values(a), SqlResult::Values(b)) => a == b,
                (Denotation::Scalar(a), SqlResult::Scalar(Some(b))) => approx_eq(&a.value, b),
                _ => false,
            };
            if agree {
                CaseOutcome::Agree
            } else {
                CaseOutcome::Mismatch {
                    expected: d.to_string(),
                    actual: format!("{actual:?}"),
                }
            }
        }
    };
    Ok((outcome, sql))
}

/// True when some most-frequent sub-formula of `f` has tied winners on `t`.
pub fn has_most_frequent_tie(f: &Formula, t: &Table) -> bool {
    let mut tie = false;
    f.walk(&mut |g| {
        if let Formula::MostFrequent { .. } = g {
            if let Ok(v) = eval_val(g, t) {
                tie |= v.distinct_values().len() > 1;
            }
        }
    });
    tie
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffMismatch {
    pub formula: String,
    pub table: Vec<Vec<String>>,
    pub sql: String,
    pub expected: String,
    pub actual: String,
    pub most_frequent_tie: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DiffReport {
    pub generated: usize,
    pub compared: usize,
    pub skipped: usize,
    pub mismatches: Vec<DiffMismatch>,
}

/// Generates random cases until `cases` of them are compared (skips do not count).
pub fn difftest(cases: usize, seed: u64, opts: SqlOptions) -> Result<DiffReport, SqlError> {
    let mut g = crate::gen::CaseGenerator::new(seed);
    let mut report = DiffReport::default();
    while report.compared < cases {
        let (t, f) = g.case();
        report.generated += 1;
        let (outcome, sql) = check_case(&f, &t, opts)?;
        match outcome {
            CaseOutcome::Agree => report.compared += 1,
            CaseOutcome::Skipped(_) => report.skipped += 1,
            CaseOutcome::Mismatch { expected, actual } => {
                report.compared += 1;
                let mut table = vec![t.headers().to_vec()];
                table.extend(t.rows().iter().map(|r| r.iter().map(ToString::to_string).collect()));
                report.mismatches.push(DiffMismatch {
                    formula: f.to_string(),
                    table,
                    sql,
                    expected,
                    actual,
                    most_frequent_tie: has_most_frequent_tie(&f, &t),
                });
            }
        }
    }
    Ok(report)
}
