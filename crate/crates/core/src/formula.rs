//! Lambda DCS formula AST with a dotted concrete syntax.
//!
//! Canonical text forms:
//!
//! | node | text |
//! |---|---|
//! | literal | `Athens`, `2004`, `'June 8 2013'` |
//! | all records | `Record` |
//! | join | `Country.Greece`, `Games.gt(4)`, `City.(Athens u London)` |
//! | column values | `R[Year].Country.Greece` |
//! | preceding / following | `R[City].Prev.X`, `R[City].R[Prev].X` |
//! | aggregate | `max(X)`, `count(X)` |
//! | differences | `sub(R[Total].Nation.Fiji, R[Total].Nation.Tonga)`, `sub(count(C.v), count(C.u))` |
//! | union / intersection | `A u B` (`||`), `A n B` (`&&`) |
//! | superlative records | `argmax(Record, Year)` |
//! | extreme index | `R[C].argmax(X, Index)` |
//! | most frequent | `mostfreq(X, C)`, `leastfreq(X, C)` |
//! | compare values | `comparemax(X, Key, By)`, `comparemin(X, Key, By)` |
//!
//! The long lambda spellings `argmax(Record, λx[C.x])`, `argmax(X, R[λx.count(C.x)])`
//! and `argmax(X, R[λx.R[By].Key.x])` are accepted and normalised.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::table::{format_number, infer_value, CellValue, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompareOp {
    Lt,
    Gt,
    Leq,
    Geq,
}

impl CompareOp {
    pub const ALL: [CompareOp; 4] = [CompareOp::Lt, CompareOp::Gt, CompareOp::Leq, CompareOp::Geq];

    pub fn keyword(self) -> &'static str {
        match self {
            CompareOp::Lt => "lt",
            CompareOp::Gt => "gt",
            CompareOp::Leq => "leq",
            CompareOp::Geq => "geq",
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            CompareOp::Lt => "<",
            CompareOp::Gt => ">",
            CompareOp::Leq => "<=",
            CompareOp::Geq => ">=",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggregateFn {
    Count,
    Max,
    Min,
    Sum,
    Avg,
}

impl AggregateFn {
    pub const ALL: [AggregateFn; 5] = [
        AggregateFn::Count,
        AggregateFn::Max,
        AggregateFn::Min,
        AggregateFn::Sum,
        AggregateFn::Avg,
    ];

    pub fn keyword(self) -> &'static str {
        match self {
            AggregateFn::Count => "count",
            AggregateFn::Max => "max",
            AggregateFn::Min => "min",
            AggregateFn::Sum => "sum",
            AggregateFn::Avg => "avg",
        }
    }

    pub fn sql(self) -> &'static str {
        match self {
            AggregateFn::Count => "COUNT",
            AggregateFn::Max => "MAX",
            AggregateFn::Min => "MIN",
            AggregateFn::Sum => "SUM",
            AggregateFn::Avg => "AVG",
        }
    }
}

impl fmt::Display for AggregateFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Max,
    Min,
}

/// A lambda DCS formula over a single table. Column names are plain symbols and
/// are validated against a table by [`typecheck`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Formula {
    ValueLit {
        value: CellValue,
    },
    AllRecords,
    /// `C.v`: records whose `column` cell matches the unary `arg`.
    Join {
        column: String,
        arg: Box<Formula>,
    },
    /// Comparison unary, only meaningful as (part of) a join argument.
    NumCompare {
        op: CompareOp,
        bound: CellValue,
    },
    ColumnValues {
        column: String,
        records: Box<Formula>,
    },
    PrevValues {
        column: String,
        records: Box<Formula>,
    },
    NextValues {
        column: String,
        records: Box<Formula>,
    },
    Aggregate {
        func: AggregateFn,
        arg: Box<Formula>,
    },
    /// `sub(R[out].key.v, R[out].key.u)`
    SubValues {
        column_out: String,
        column_key: String,
        left: CellValue,
        right: CellValue,
    },
    /// `sub(count(column.v), count(column.u))`
    SubCounts {
        column: String,
        left: CellValue,
        right: CellValue,
    },
    Union {
        left: Box<Formula>,
        right: Box<Formula>,
    },
    Intersect {
        left: Box<Formula>,
        right: Box<Formula>,
    },
    /// `argmax(Record, λx[C.x])`
    ArgmaxRecords {
        direction: Direction,
        column: String,
    },
    /// `R[C].argmax(records, Index)`
    ExtremeIndexValue {
        direction: Direction,
        column: String,
        records: Box<Formula>,
    },
    /// `argmax(vals, R[λx.count(C.x)])`
    MostFrequent {
        direction: Direction,
        values: Box<Formula>,
        column: String,
    },
    /// `argmax(vals, R[λx.R[by].key.x])`
    CompareValues {
        direction: Direction,
        values: Box<Formula>,
        column_key: String,
        column_by: String,
    },
}

/// Node kinds, used for templates and feature extraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NodeKind {
    ValueLit,
    AllRecords,
    Join,
    NumCompare,
    ColumnValues,
    PrevValues,
    NextValues,
    Aggregate,
    SubValues,
    SubCounts,
    Union,
    Intersect,
    ArgmaxRecords,
    ExtremeIndexValue,
    MostFrequent,
    CompareValues,
}

impl NodeKind {
    pub const ALL: [NodeKind; 16] = [
        NodeKind::ValueLit,
        NodeKind::AllRecords,
        NodeKind::Join,
        NodeKind::NumCompare,
        NodeKind::ColumnValues,
        NodeKind::PrevValues,
        NodeKind::NextValues,
        NodeKind::Aggregate,
        NodeKind::SubValues,
        NodeKind::SubCounts,
        NodeKind::Union,
        NodeKind::Intersect,
        NodeKind::ArgmaxRecords,
        NodeKind::ExtremeIndexValue,
        NodeKind::MostFrequent,
        NodeKind::CompareValues,
    ];
}

fn bx(f: Formula) -> Box<Formula> {
    Box::new(f)
}

impl Formula {
    pub fn lit(value: CellValue) -> Self {
        Formula::ValueLit { value }
    }

    /// Literal typed with [`infer_value`].
    pub fn lit_str(raw: &str) -> Self {
        Formula::ValueLit {
            value: infer_value(raw),
        }
    }

    pub fn join(column: impl Into<String>, arg: Formula) -> Self {
        Formula::Join {
            column: column.into(),
            arg: bx(arg),
        }
    }

    pub fn compare(op: CompareOp, bound: CellValue) -> Self {
        Formula::NumCompare { op, bound }
    }

    pub fn column_values(column: impl Into<String>, records: Formula) -> Self {
        Formula::ColumnValues {
            column: column.into(),
            records: bx(records),
        }
    }

    pub fn prev_values(column: impl Into<String>, records: Formula) -> Self {
        Formula::PrevValues {
            column: column.into(),
            records: bx(records),
        }
    }

    pub fn next_values(column: impl Into<String>, records: Formula) -> Self {
        Formula::NextValues {
            column: column.into(),
            records: bx(records),
        }
    }

    pub fn aggregate(func: AggregateFn, arg: Formula) -> Self {
        Formula::Aggregate { func, arg: bx(arg) }
    }

    pub fn union(left: Formula, right: Formula) -> Self {
        Formula::Union {
            left: bx(left),
            right: bx(right),
        }
    }

    pub fn intersect(left: Formula, right: Formula) -> Self {
        Formula::Intersect {
            left: bx(left),
            right: bx(right),
        }
    }

    pub fn argmax_records(direction: Direction, column: impl Into<String>) -> Self {
        Formula::ArgmaxRecords {
            direction,
            column: column.into(),
        }
    }

    pub fn extreme_index(direction: Direction, column: impl Into<String>, records: Formula) -> Self {
        Formula::ExtremeIndexValue {
            direction,
            column: column.into(),
            records: bx(records),
        }
    }

    pub fn most_frequent(direction: Direction, values: Formula, column: impl Into<String>) -> Self {
        Formula::MostFrequent {
            direction,
            values: bx(values),
            column: column.into(),
        }
    }

    pub fn compare_values(
        direction: Direction,
        values: Formula,
        column_key: impl Into<String>,
        column_by: impl Into<String>,
    ) -> Self {
        Formula::CompareValues {
            direction,
            values: bx(values),
            column_key: column_key.into(),
            column_by: column_by.into(),
        }
    }

    pub fn kind(&self) -> NodeKind {
        match self {
            Formula::ValueLit { .. } => NodeKind::ValueLit,
            Formula::AllRecords => NodeKind::AllRecords,
            Formula::Join { .. } => NodeKind::Join,
            Formula::NumCompare { .. } => NodeKind::NumCompare,
            Formula::ColumnValues { .. } => NodeKind::ColumnValues,
            Formula::PrevValues { .. } => NodeKind::PrevValues,
            Formula::NextValues { .. } => NodeKind::NextValues,
            Formula::Aggregate { .. } => NodeKind::Aggregate,
            Formula::SubValues { .. } => NodeKind::SubValues,
            Formula::SubCounts { .. } => NodeKind::SubCounts,
            Formula::Union { .. } => NodeKind::Union,
            Formula::Intersect { .. } => NodeKind::Intersect,
            Formula::ArgmaxRecords { .. } => NodeKind::ArgmaxRecords,
            Formula::ExtremeIndexValue { .. } => NodeKind::ExtremeIndexValue,
            Formula::MostFrequent { .. } => NodeKind::MostFrequent,
            Formula::CompareValues { .. } => NodeKind::CompareValues,
        }
    }

    /// Column symbols named directly by this node (not its children).
    pub fn own_columns(&self) -> Vec<&str> {
        match self {
            Formula::Join { column, .. }
            | Formula::ColumnValues { column, .. }
            | Formula::PrevValues { column, .. }
            | Formula::NextValues { column, .. }
            | Formula::SubCounts { column, .. }
            | Formula::ArgmaxRecords { column, .. }
            | Formula::ExtremeIndexValue { column, .. }
            | Formula::MostFrequent { column, .. } => vec![column],
            Formula::SubValues {
                column_out, column_key, ..
            } => vec![column_out, column_key],
            Formula::CompareValues {
                column_key, column_by, ..
            } => vec![column_key, column_by],
            _ => vec![],
        }
    }

    /// Every column symbol in the tree, deduplicated.
    pub fn columns(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.walk(&mut |f| {
            out.extend(f.own_columns().into_iter().map(str::to_string));
        });
        out
    }

    /// Pre-order traversal over the sub-formula closure given by [`decompose`].
    pub fn walk(&self, visit: &mut impl FnMut(&Formula)) {
        visit(self);
        for child in decompose(self) {
            child.walk(visit);
        }
    }

    pub fn depth(&self) -> usize {
        1 + decompose(self).iter().map(Formula::depth).max().unwrap_or(0)
    }

    pub fn size(&self) -> usize {
        1 + decompose(self).iter().map(Formula::size).sum::<usize>()
    }

    /// True when the tree contains an arithmetic difference.
    pub fn has_difference(&self) -> bool {
        let mut found = false;
        self.walk(&mut |f| found |= matches!(f, Formula::SubValues { .. } | Formula::SubCounts { .. }));
        found
    }

    /// Literal values appearing anywhere in the tree.
    pub fn literals(&self) -> Vec<&CellValue> {
        fn go<'a>(f: &'a Formula, out: &mut Vec<&'a CellValue>) {
            match f {
                Formula::ValueLit { value } | Formula::NumCompare { bound: value, .. } => out.push(value),
                Formula::SubValues { left, right, .. } | Formula::SubCounts { left, right, .. } => {
                    out.push(left);
                    out.push(right);
                }
                _ => {}
            }
            for c in direct_children(f) {
                go(c, out);
            }
        }
        let mut out = Vec::new();
        go(self, &mut out);
        out
    }
}

/// Child formulas stored in the node itself (no synthesised sub-queries).
pub(crate) fn direct_children(f: &Formula) -> Vec<&Formula> {
    match f {
        Formula::Join { arg, .. } | Formula::Aggregate { arg, .. } => vec![arg],
        Formula::ColumnValues { records, .. }
        | Formula::PrevValues { records, .. }
        | Formula::NextValues { records, .. }
        | Formula::ExtremeIndexValue { records, .. } => vec![records],
        Formula::Union { left, right } | Formula::Intersect { left, right } => vec![left, right],
        Formula::MostFrequent { values, .. } | Formula::CompareValues { values, .. } => {
            vec![values]
        }
        _ => vec![],
    }
}

/// Direct sub-queries of `f`.
///
/// Fused nodes expose the sub-queries their execution runs: a value difference
/// yields its two `R[out].key.v` operands, an occurrence difference its two joins,
/// `argmax(Record, C)` the `Record` unary, most-frequent the join `C.vals` and
/// compare-values the projection `R[by].key.vals`.
pub fn decompose(f: &Formula) -> Vec<Formula> {
    match f {
        Formula::ValueLit { .. } | Formula::AllRecords | Formula::NumCompare { .. } => vec![],
        Formula::SubValues {
            column_out,
            column_key,
            left,
            right,
        } => [left, right]
            .into_iter()
            .map(|v| {
                Formula::column_values(
                    column_out.clone(),
                    Formula::join(column_key.clone(), Formula::lit(v.clone())),
                )
            })
            .collect(),
        Formula::SubCounts { column, left, right } => [left, right]
            .into_iter()
            .map(|v| Formula::join(column.clone(), Formula::lit(v.clone())))
            .collect(),
        Formula::ArgmaxRecords { .. } => vec![Formula::AllRecords],
        Formula::MostFrequent { values, column, .. } => {
            vec![Formula::join(column.clone(), (**values).clone())]
        }
        Formula::CompareValues {
            values,
            column_key,
            column_by,
            ..
        } => vec![Formula::column_values(
            column_by.clone(),
            Formula::join(column_key.clone(), (**values).clone()),
        )],
        other => direct_children(other).into_iter().cloned().collect(),
    }
}

// ---------------------------------------------------------------------------
// Type checking

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResultType {
    Values,
    Records,
    Scalar,
}

impl fmt::Display for ResultType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ResultType::Values => "values",
            ResultType::Records => "records",
            ResultType::Scalar => "scalar",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TypeError {
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("type mismatch: {0}")]
    TypeMismatch(String),
}

/// Internal type: value sets, record sets, scalars, or a filter unary that
/// contains a comparison and so only denotes something inside a join.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Ty {
    Values,
    Records,
    Scalar,
    Filter,
}

fn mismatch(msg: impl Into<String>) -> TypeError {
    TypeError::TypeMismatch(msg.into())
}

pub(crate) fn infer_ty(f: &Formula, t: &Table) -> Result<Ty, TypeError> {
    for c in f.own_columns() {
        t.column_index(c).map_err(|_| TypeError::UnknownColumn(c.to_string()))?;
    }
    let ty = match f {
        Formula::ValueLit { .. } => Ty::Values,
        Formula::AllRecords | Formula::ArgmaxRecords { .. } => Ty::Records,
        Formula::NumCompare { .. } => Ty::Filter,
        Formula::Join { arg, .. } => match infer_ty(arg, t)? {
            Ty::Values | Ty::Filter => Ty::Records,
            other => return Err(mismatch(format!("join argument must be a unary, got {other:?}"))),
        },
        Formula::ColumnValues { records, .. }
        | Formula::PrevValues { records, .. }
        | Formula::NextValues { records, .. }
        | Formula::ExtremeIndexValue { records, .. } => {
            expect_records(records, t)?;
            Ty::Values
        }
        Formula::Aggregate { func, arg } => {
            match (func, infer_ty(arg, t)?) {
                (_, Ty::Values) | (AggregateFn::Count, Ty::Records) => {}
                (func, other) => return Err(mismatch(format!("{func} cannot aggregate {other:?}"))),
            }
            Ty::Scalar
        }
        Formula::SubValues { .. } | Formula::SubCounts { .. } => Ty::Scalar,
        Formula::Union { left, right } => match (infer_ty(left, t)?, infer_ty(right, t)?) {
            (Ty::Values, Ty::Values) => Ty::Values,
            (Ty::Records, Ty::Records) => Ty::Records,
            (Ty::Values | Ty::Filter, Ty::Values | Ty::Filter) => Ty::Filter,
            (l, r) => return Err(mismatch(format!("union of {l:?} and {r:?}"))),
        },
        Formula::Intersect { left, right } => match (infer_ty(left, t)?, infer_ty(right, t)?) {
            (Ty::Records, Ty::Records) => Ty::Records,
            (Ty::Filter, Ty::Values | Ty::Filter) | (Ty::Values, Ty::Filter) => Ty::Filter,
            (l, r) => return Err(mismatch(format!("intersection of {l:?} and {r:?}"))),
        },
        Formula::MostFrequent { values, .. } | Formula::CompareValues { values, .. } => match infer_ty(values, t)? {
            Ty::Values => Ty::Values,
            other => return Err(mismatch(format!("superlative over {other:?}"))),
        },
    };
    Ok(ty)
}

fn expect_records(f: &Formula, t: &Table) -> Result<(), TypeError> {
    match infer_ty(f, t)? {
        Ty::Records => Ok(()),
        other => Err(mismatch(format!("expected records, got {other:?}"))),
    }
}

/// Result type of `f` on `t`; validates every column symbol against the table.
pub fn typecheck(f: &Formula, t: &Table) -> Result<ResultType, TypeError> {
    match infer_ty(f, t)? {
        Ty::Values => Ok(ResultType::Values),
        Ty::Records => Ok(ResultType::Records),
        Ty::Scalar => Ok(ResultType::Scalar),
        Ty::Filter => Err(mismatch("comparison unary outside of a join")),
    }
}

// ---------------------------------------------------------------------------
// Lexer

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("`{function}` at byte {offset} takes {expected} argument(s), got {found}")]
    Arity {
        function: String,
        expected: usize,
        found: usize,
        offset: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Backtick(String),
    Quoted(String),
    Number(String),
    Dot,
    Comma,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Or,
    And,
    Lambda,
    Eof,
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn err(&self, offset: usize, message: impl Into<String>) -> ParseError {
        ParseError::Syntax {
            offset,
            message: message.into(),
        }
    }

    fn tokens(mut self) -> Result<Vec<(Tok, usize)>, ParseError> {
        let mut out = Vec::new();
        loop {
            let rest = &self.src[self.pos..];
            let Some(c) = rest.chars().next() else {
                out.push((Tok::Eof, self.pos));
                return Ok(out);
            };
            let start = self.pos;
            if c.is_whitespace() {
                self.pos += c.len_utf8();
                continue;
            }
            let tok = match c {
                '.' => {
                    self.pos += 1;
                    Tok::Dot
                }
                ',' => {
                    self.pos += 1;
                    Tok::Comma
                }
                '(' => {
                    self.pos += 1;
                    Tok::LParen
                }
                ')' => {
                    self.pos += 1;
                    Tok::RParen
                }
                '[' => {
                    self.pos += 1;
                    Tok::LBracket
                }
                ']' => {
                    self.pos += 1;
                    Tok::RBracket
                }
                'λ' => {
                    self.pos += c.len_utf8();
                    Tok::Lambda
                }
                '|' if rest.starts_with("||") => {
                    self.pos += 2;
                    Tok::Or
                }
                '&' if rest.starts_with("&&") => {
                    self.pos += 2;
                    Tok::And
                }
                '\'' => Tok::Quoted(self.delimited('\'')?),
                '`' => Tok::Backtick(self.delimited('`')?),
                c if c.is_ascii_digit() || (c == '-' || c == '+') => {
                    let len = number_len(rest);
                    if len == 0 {
                        return Err(self.err(start, format!("unexpected character `{c}`")));
                    }
                    self.pos += len;
                    Tok::Number(rest[..len].to_string())
                }
                c if c.is_alphabetic() || c == '_' => {
                    let len = rest
                        .char_indices()
                        .find(|(_, ch)| !(ch.is_alphanumeric() || *ch == '_'))
                        .map(|(i, _)| i)
                        .unwrap_or(rest.len());
                    self.pos += len;
                    let word = &rest[..len];
                    match word {
                        "u" => Tok::Or,
                        "n" => Tok::And,
                        "lambda" => Tok::Lambda,
                        _ => Tok::Ident(word.to_string()),
                    }
                }
                c => return Err(self.err(start, format!("unexpected character `{c}`"))),
            };
            out.push((tok, start));
        }
    }

    /// Reads a quoted token; backslash escapes the delimiter and itself.
    fn delimited(&mut self, delim: char) -> Result<String, ParseError> {
        let start = self.pos;
        self.pos += 1;
        let mut out = String::new();
        let mut chars = self.src[self.pos..].char_indices();
        while let Some((i, c)) = chars.next() {
            if c == '\\' {
                match chars.next() {
                    Some((_, e)) => out.push(e),
                    None => break,
                }
            } else if c == delim {
                self.pos += i + 1;
                return Ok(out);
            } else {
                out.push(c);
            }
        }
        Err(self.err(start, format!("unterminated {delim}-quoted token")))
    }
}

/// Length of a numeric token at the start of `s`: optional sign, digits, optional
/// fraction. A trailing identifier character (as in `4th`) makes it not a number.
fn number_len(s: &str) -> usize {
    let b = s.as_bytes();
    let mut i = 0;
    if i < b.len() && (b[i] == b'-' || b[i] == b'+') {
        i += 1;
    }
    let digits_start = i;
    while i < b.len() && b[i].is_ascii_digit() {
        i += 1;
    }
    if i == digits_start {
        return 0;
    }
    if i + 1 < b.len() && b[i] == b'.' && b[i + 1].is_ascii_digit() {
        i += 1;
        while i < b.len() && b[i].is_ascii_digit() {
            i += 1;
        }
    }
    if i < b.len() && (b[i].is_ascii_alphabetic() || b[i] == b'_') {
        return 0;
    }
    i
}

// ---------------------------------------------------------------------------
// Parser

const KEYWORDS: &[&str] = &[
    "R",
    "Record",
    "Index",
    "Prev",
    "u",
    "n",
    "lambda",
    "λ",
    "sub",
    "count",
    "max",
    "min",
    "sum",
    "avg",
    "argmax",
    "argmin",
    "mostfreq",
    "leastfreq",
    "comparemax",
    "comparemin",
    "lt",
    "gt",
    "leq",
    "geq",
];

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
}

enum ArgKey {
    Index,
    Column(String),
    CountOf(String),
    CompareBy { key: String, by: String },
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn peek_at(&self, n: usize) -> &Tok {
        let i = (self.pos + n).min(self.toks.len() - 1);
        &self.toks[i].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError::Syntax {
            offset: self.offset(),
            message: message.into(),
        })
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), ParseError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            self.err(format!("expected {what}, found {:?}", self.peek()))
        }
    }

    fn is_ident(&self, word: &str) -> bool {
        matches!(self.peek(), Tok::Ident(w) if w == word)
    }

    fn expr(&mut self) -> Result<Formula, ParseError> {
        let mut left = self.inter()?;
        while *self.peek() == Tok::Or {
            self.bump();
            let right = self.inter()?;
            left = Formula::union(left, right);
        }
        Ok(left)
    }

    fn inter(&mut self) -> Result<Formula, ParseError> {
        let mut left = self.atom()?;
        while *self.peek() == Tok::And {
            self.bump();
            let right = self.atom()?;
            left = Formula::intersect(left, right);
        }
        Ok(left)
    }

    fn column(&mut self) -> Result<String, ParseError> {
        match self.bump() {
            Tok::Ident(w) | Tok::Backtick(w) => Ok(w),
            other => {
                self.pos -= 1;
                self.err(format!("expected a column name, found {other:?}"))
            }
        }
    }

    /// Parses `( e1, e2, ... )` after a function keyword.
    fn args(&mut self, function: &str, expected: usize) -> Result<Vec<Formula>, ParseError> {
        let start = self.offset();
        self.expect(Tok::LParen, "`(`")?;
        let mut out = vec![self.expr()?];
        while *self.peek() == Tok::Comma {
            self.bump();
            out.push(self.expr()?);
        }
        self.expect(Tok::RParen, "`)`")?;
        if out.len() != expected {
            return Err(ParseError::Arity {
                function: function.to_string(),
                expected,
                found: out.len(),
                offset: start,
            });
        }
        Ok(out)
    }

    fn atom(&mut self) -> Result<Formula, ParseError> {
        let offset = self.offset();
        match self.peek().clone() {
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Tok::Quoted(s) => {
                self.bump();
                Ok(Formula::lit(infer_value(&s)))
            }
            Tok::Number(s) => {
                self.bump();
                Ok(Formula::lit(infer_value(&s)))
            }
            Tok::Backtick(name) => {
                self.bump();
                self.join_rest(name)
            }
            Tok::Ident(word) => self.ident_atom(word, offset),
            other => self.err(format!("unexpected {other:?}")),
        }
    }

    fn ident_atom(&mut self, word: String, offset: usize) -> Result<Formula, ParseError> {
        let is_call = *self.peek_at(1) == Tok::LParen;
        match word.as_str() {
            "Record" => {
                self.bump();
                Ok(Formula::AllRecords)
            }
            "R" if *self.peek_at(1) == Tok::LBracket => {
                self.bump();
                self.reverse()
            }
            "Prev" if *self.peek_at(1) == Tok::Dot => self.err("`Prev` must follow a column projection `R[C].`"),
            _ if is_call => self.call(word, offset),
            _ if *self.peek_at(1) == Tok::Dot => {
                self.bump();
                self.join_rest(word)
            }
            _ => {
                self.bump();
                Ok(Formula::lit(infer_value(&word)))
            }
        }
    }

    fn join_rest(&mut self, column: String) -> Result<Formula, ParseError> {
        self.expect(Tok::Dot, "`.` after column")?;
        let arg = self.atom()?;
        Ok(Formula::join(column, arg))
    }

    /// After `R`: `[C].X`, `[C].Prev.X`, `[C].R[Prev].X`, `[C].argmax(X, Index)`.
    fn reverse(&mut self) -> Result<Formula, ParseError> {
        self.expect(Tok::LBracket, "`[`")?;
        if self.is_ident("Prev") {
            return self.err("`R[Prev]` must follow a column projection `R[C].`");
        }
        let column = self.column()?;
        self.expect(Tok::RBracket, "`]`")?;
        self.expect(Tok::Dot, "`.`")?;
        if self.is_ident("Prev") && *self.peek_at(1) == Tok::Dot {
            self.bump();
            self.bump();
            let records = self.atom()?;
            return Ok(Formula::prev_values(column, records));
        }
        if self.is_ident("R")
            && *self.peek_at(1) == Tok::LBracket
            && matches!(self.peek_at(2), Tok::Ident(w) if w == "Prev")
        {
            self.bump();
            self.bump();
            self.bump();
            self.expect(Tok::RBracket, "`]`")?;
            self.expect(Tok::Dot, "`.`")?;
            let records = self.atom()?;
            return Ok(Formula::next_values(column, records));
        }
        if (self.is_ident("argmax") || self.is_ident("argmin")) && *self.peek_at(1) == Tok::LParen {
            let save = self.pos;
            let direction = if self.is_ident("argmax") {
                Direction::Max
            } else {
                Direction::Min
            };
            self.bump();
            self.bump();
            let records = self.expr()?;
            if *self.peek() == Tok::Comma
                && matches!(self.peek_at(1), Tok::Ident(w) if w == "Index")
                && *self.peek_at(2) == Tok::RParen
            {
                self.bump();
                self.bump();
                self.bump();
                return Ok(Formula::extreme_index(direction, column, records));
            }
            self.pos = save;
        }
        let records = self.atom()?;
        Ok(Formula::column_values(column, records))
    }

    fn call(&mut self, word: String, offset: usize) -> Result<Formula, ParseError> {
        self.bump();
        let agg = AggregateFn::ALL.into_iter().find(|a| a.keyword() == word);
        if let Some(func) = agg {
            let mut a = self.args(&word, 1)?;
            return Ok(Formula::aggregate(func, a.remove(0)));
        }
        let cmp = CompareOp::ALL.into_iter().find(|c| c.keyword() == word);
        if let Some(op) = cmp {
            let mut a = self.args(&word, 1)?;
            return match a.remove(0) {
                Formula::ValueLit { value } => Ok(Formula::compare(op, value)),
                _ => Err(ParseError::Syntax {
                    offset,
                    message: format!("`{word}` takes a literal bound"),
                }),
            };
        }
        match word.as_str() {
            "sub" => {
                let a = self.args("sub", 2)?;
                sub_formula(&a[0], &a[1]).ok_or(ParseError::Syntax {
                    offset,
                    message: "sub expects `R[C].K.v, R[C].K.u` or `count(C.v), count(C.u)` operands".into(),
                })
            }
            "mostfreq" | "leastfreq" => {
                let start = self.offset();
                self.expect(Tok::LParen, "`(`")?;
                let values = self.expr()?;
                let mut cols = self.trailing_columns()?;
                if cols.len() != 1 {
                    return Err(ParseError::Arity {
                        function: word,
                        expected: 2,
                        found: cols.len() + 1,
                        offset: start,
                    });
                }
                let dir = if word == "mostfreq" {
                    Direction::Max
                } else {
                    Direction::Min
                };
                Ok(Formula::most_frequent(dir, values, cols.remove(0)))
            }
            "comparemax" | "comparemin" => {
                let start = self.offset();
                self.expect(Tok::LParen, "`(`")?;
                let values = self.expr()?;
                let mut cols = self.trailing_columns()?;
                if cols.len() != 2 {
                    return Err(ParseError::Arity {
                        function: word,
                        expected: 3,
                        found: cols.len() + 1,
                        offset: start,
                    });
                }
                let dir = if word == "comparemax" {
                    Direction::Max
                } else {
                    Direction::Min
                };
                let by = cols.remove(1);
                Ok(Formula::compare_values(dir, values, cols.remove(0), by))
            }
            "argmax" | "argmin" => {
                let dir = if word == "argmax" {
                    Direction::Max
                } else {
                    Direction::Min
                };
                let start = self.offset();
                self.expect(Tok::LParen, "`(`")?;
                let first = self.expr()?;
                if *self.peek() != Tok::Comma {
                    return Err(ParseError::Arity {
                        function: word,
                        expected: 2,
                        found: 1,
                        offset: start,
                    });
                }
                self.bump();
                let key_offset = self.offset();
                let key = self.arg_key()?;
                if *self.peek() == Tok::Comma {
                    return Err(ParseError::Arity {
                        function: word,
                        expected: 2,
                        found: 3,
                        offset: start,
                    });
                }
                self.expect(Tok::RParen, "`)`")?;
                let syntax = |message: &str| ParseError::Syntax {
                    offset: key_offset,
                    message: message.to_string(),
                };
                match key {
                    ArgKey::Index => Err(syntax(
                        "superlative by `Index` must be projected: `R[C].argmax(records, Index)`",
                    )),
                    ArgKey::Column(c) => match first {
                        Formula::AllRecords => Ok(Formula::argmax_records(dir, c)),
                        _ => Err(syntax("superlative by column ranges over `Record` only")),
                    },
                    ArgKey::CountOf(c) => Ok(Formula::most_frequent(dir, first, c)),
                    ArgKey::CompareBy { key, by } => Ok(Formula::compare_values(dir, first, key, by)),
                }
            }
            _ => Err(ParseError::Syntax {
                offset,
                message: format!("unknown function `{word}`"),
            }),
        }
    }

    /// `, C1, C2 ... )`
    fn trailing_columns(&mut self) -> Result<Vec<String>, ParseError> {
        let mut cols = Vec::new();
        while *self.peek() == Tok::Comma {
            self.bump();
            cols.push(self.column()?);
        }
        self.expect(Tok::RParen, "`)`")?;
        Ok(cols)
    }

    /// Second argument of `argmax`/`argmin`.
    fn arg_key(&mut self) -> Result<ArgKey, ParseError> {
        if self.is_ident("Index") {
            self.bump();
            return Ok(ArgKey::Index);
        }
        if *self.peek() == Tok::Lambda {
            // λx[C.x]
            self.bump();
            let var = self.column()?;
            self.expect(Tok::LBracket, "`[`")?;
            let c = self.column()?;
            self.expect(Tok::Dot, "`.`")?;
            self.expect_var(&var)?;
            self.expect(Tok::RBracket, "`]`")?;
            return Ok(ArgKey::Column(c));
        }
        if self.is_ident("R") && *self.peek_at(1) == Tok::LBracket && *self.peek_at(2) == Tok::Lambda {
            self.bump();
            self.bump();
            self.bump();
            let var = self.column()?;
            self.expect(Tok::Dot, "`.`")?;
            let key = if self.is_ident("count") {
                // R[λx.count(C.x)]
                self.bump();
                self.expect(Tok::LParen, "`(`")?;
                let c = self.column()?;
                self.expect(Tok::Dot, "`.`")?;
                self.expect_var(&var)?;
                self.expect(Tok::RParen, "`)`")?;
                ArgKey::CountOf(c)
            } else {
                // R[λx.R[By].Key.x]
                if !self.is_ident("R") {
                    return self.err("expected `count(` or `R[` inside lambda");
                }
                self.bump();
                self.expect(Tok::LBracket, "`[`")?;
                let by = self.column()?;
                self.expect(Tok::RBracket, "`]`")?;
                self.expect(Tok::Dot, "`.`")?;
                let key = self.column()?;
                self.expect(Tok::Dot, "`.`")?;
                self.expect_var(&var)?;
                ArgKey::CompareBy { key, by }
            };
            self.expect(Tok::RBracket, "`]`")?;
            return Ok(key);
        }
        Ok(ArgKey::Column(self.column()?))
    }

    fn expect_var(&mut self, var: &str) -> Result<(), ParseError> {
        match self.peek() {
            Tok::Ident(w) if w == var => {
                self.bump();
                Ok(())
            }
            _ => self.err(format!("expected lambda variable `{var}`")),
        }
    }
}

fn sub_formula(a: &Formula, b: &Formula) -> Option<Formula> {
    fn projected_lit(f: &Formula) -> Option<(&str, &str, &CellValue)> {
        if let Formula::ColumnValues { column, records } = f {
            if let Formula::Join { column: key, arg } = &**records {
                if let Formula::ValueLit { value } = &**arg {
                    return Some((column, key, value));
                }
            }
        }
        None
    }
    fn counted_lit(f: &Formula) -> Option<(&str, &CellValue)> {
        if let Formula::Aggregate {
            func: AggregateFn::Count,
            arg,
        } = f
        {
            if let Formula::Join { column, arg } = &**arg {
                if let Formula::ValueLit { value } = &**arg {
                    return Some((column, value));
                }
            }
        }
        None
    }
    if let (Some((o1, k1, v)), Some((o2, k2, u))) = (projected_lit(a), projected_lit(b)) {
        if o1 == o2 && k1 == k2 {
            return Some(Formula::SubValues {
                column_out: o1.to_string(),
                column_key: k1.to_string(),
                left: v.clone(),
                right: u.clone(),
            });
        }
    }
    if let (Some((c1, v)), Some((c2, u))) = (counted_lit(a), counted_lit(b)) {
        if c1 == c2 {
            return Some(Formula::SubCounts {
                column: c1.to_string(),
                left: v.clone(),
                right: u.clone(),
            });
        }
    }
    None
}

/// Parses the canonical dotted syntax (plus the accepted lambda spellings).
///
/// Literals are typed with [`infer_value`], quoted or not, so `'June 8 2013'`
/// is a date and `2004` a number.
pub fn parse_formula(src: &str) -> Result<Formula, ParseError> {
    let toks = Lexer { src, pos: 0 }.tokens()?;
    let mut p = Parser { toks, pos: 0 };
    let f = p.expr()?;
    if *p.peek() != Tok::Eof {
        return p.err(format!("trailing input {:?}", p.peek()));
    }
    Ok(f)
}

// ---------------------------------------------------------------------------
// Formatter

fn is_bare_word(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_alphabetic() || c == '_')
        && chars.all(|c| c.is_alphanumeric() || c == '_')
        && !KEYWORDS.contains(&s)
}

fn quote(s: &str, delim: char) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push(delim);
    for c in s.chars() {
        if c == delim || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push(delim);
    out
}

pub(crate) fn format_column(name: &str) -> String {
    if is_bare_word(name) {
        name.to_string()
    } else {
        quote(name, '`')
    }
}

fn format_literal(v: &CellValue) -> String {
    match v {
        CellValue::Number(x) => format_number(*x),
        CellValue::Text(s) if is_bare_word(s) && infer_value(s) == *v => s.clone(),
        other => quote(&other.to_string(), '\''),
    }
}

fn write_formula(f: &Formula, out: &mut String) {
    match f {
        Formula::ValueLit { value } => out.push_str(&format_literal(value)),
        Formula::AllRecords => out.push_str("Record"),
        Formula::Join { column, arg } => {
            out.push_str(&format_column(column));
            out.push('.');
            write_atom(arg, out);
        }
        Formula::NumCompare { op, bound } => {
            out.push_str(op.keyword());
            out.push('(');
            out.push_str(&format_literal(bound));
            out.push(')');
        }
        Formula::ColumnValues { column, records } => {
            out.push_str(&format!("R[{}].", format_column(column)));
            write_atom(records, out);
        }
        Formula::PrevValues { column, records } => {
            out.push_str(&format!("R[{}].Prev.", format_column(column)));
            write_atom(records, out);
        }
        Formula::NextValues { column, records } => {
            out.push_str(&format!("R[{}].R[Prev].", format_column(column)));
            write_atom(records, out);
        }
        Formula::Aggregate { func, arg } => {
            out.push_str(func.keyword());
            out.push('(');
            write_formula(arg, out);
            out.push(')');
        }
        Formula::SubValues {
            column_out,
            column_key,
            left,
            right,
        } => {
            let (o, k) = (format_column(column_out), format_column(column_key));
            out.push_str(&format!(
                "sub(R[{o}].{k}.{}, R[{o}].{k}.{})",
                format_literal(left),
                format_literal(right)
            ));
        }
        Formula::SubCounts { column, left, right } => {
            let c = format_column(column);
            out.push_str(&format!(
                "sub(count({c}.{}), count({c}.{}))",
                format_literal(left),
                format_literal(right)
            ));
        }
        Formula::Union { left, right } => {
            write_formula(left, out);
            out.push_str(" u ");
            write_inter(right, out);
        }
        Formula::Intersect { left, right } => {
            write_inter(left, out);
            out.push_str(" n ");
            write_atom(right, out);
        }
        Formula::ArgmaxRecords { direction, column } => {
            out.push_str(&format!("{}(Record, {})", argword(*direction), format_column(column)));
        }
        Formula::ExtremeIndexValue {
            direction,
            column,
            records,
        } => {
            out.push_str(&format!("R[{}].{}(", format_column(column), argword(*direction)));
            write_formula(records, out);
            out.push_str(", Index)");
        }
        Formula::MostFrequent {
            direction,
            values,
            column,
        } => {
            out.push_str(match direction {
                Direction::Max => "mostfreq(",
                Direction::Min => "leastfreq(",
            });
            write_formula(values, out);
            out.push_str(&format!(", {})", format_column(column)));
        }
        Formula::CompareValues {
            direction,
            values,
            column_key,
            column_by,
        } => {
            out.push_str(match direction {
                Direction::Max => "comparemax(",
                Direction::Min => "comparemin(",
            });
            write_formula(values, out);
            out.push_str(&format!(
                ", {}, {})",
                format_column(column_key),
                format_column(column_by)
            ));
        }
    }
}

fn argword(d: Direction) -> &'static str {
    match d {
        Direction::Max => "argmax",
        Direction::Min => "argmin",
    }
}

/// Operand of `n`: unions need parentheses.
fn write_inter(f: &Formula, out: &mut String) {
    if matches!(f, Formula::Union { .. }) {
        out.push('(');
        write_formula(f, out);
        out.push(')');
    } else {
        write_formula(f, out);
    }
}

/// Argument of a dotted step: any infix node needs parentheses.
fn write_atom(f: &Formula, out: &mut String) {
    if matches!(f, Formula::Union { .. } | Formula::Intersect { .. }) {
        out.push('(');
        write_formula(f, out);
        out.push(')');
    } else {
        write_formula(f, out);
    }
}

/// Canonical text; `parse_formula(&format_formula(f)) == f`.
pub fn format_formula(f: &Formula) -> String {
    let mut out = String::new();
    write_formula(f, &mut out);
    out
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_formula(self))
    }
}

impl std::str::FromStr for Formula {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_formula(s)
    }
}
