//! Denotational evaluation of formulas over a table.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formula::{infer_ty, AggregateFn, CompareOp, Direction, Formula, ResultType, Ty, TypeError};
use crate::table::{CellValue, Table};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error(transparent)]
    Type(#[from] TypeError),
    #[error("{func} over an empty set")]
    EmptyAggregate { func: AggregateFn },
    #[error("{func} over non-numeric values")]
    NonNumericAggregate { func: AggregateFn },
    #[error("difference operand {side} denotes {found} values, expected exactly one")]
    NonSingletonSub { side: usize, found: usize },
    #[error("difference operand {side} is not a number")]
    NonNumericSub { side: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "fn", rename_all = "snake_case")]
pub enum ScalarOrigin {
    Aggregate(AggregateFn),
    Difference,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Scalar {
    pub value: CellValue,
    pub origin: ScalarOrigin,
}

/// The result of executing a formula.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", content = "value", rename_all = "snake_case")]
pub enum Denotation {
    Values(BTreeSet<CellValue>),
    Records(BTreeSet<usize>),
    Scalar(Scalar),
}

impl Denotation {
    pub fn result_type(&self) -> ResultType {
        match self {
            Denotation::Values(_) => ResultType::Values,
            Denotation::Records(_) => ResultType::Records,
            Denotation::Scalar(_) => ResultType::Scalar,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Denotation::Values(v) => v.len(),
            Denotation::Records(r) => r.len(),
            Denotation::Scalar(_) => 1,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Values of the answer as a set; records have no value reading.
    pub fn as_values(&self) -> Option<BTreeSet<CellValue>> {
        match self {
            Denotation::Values(v) => Some(v.clone()),
            Denotation::Scalar(s) => Some(BTreeSet::from([s.value.clone()])),
            Denotation::Records(_) => None,
        }
    }
}

impl fmt::Display for Denotation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Denotation::Values(v) => {
                let parts: Vec<String> = v.iter().map(ToString::to_string).collect();
                write!(f, "{{{}}}", parts.join(", "))
            }
            Denotation::Records(r) => {
                let parts: Vec<String> = r.iter().map(ToString::to_string).collect();
                write!(f, "rows {{{}}}", parts.join(", "))
            }
            Denotation::Scalar(s) => write!(f, "{}", s.value),
        }
    }
}

/// Set equality, except that a scalar equals the singleton value set holding it.
pub fn result_equals(a: &Denotation, b: &Denotation) -> bool {
    match (a, b) {
        (Denotation::Records(x), Denotation::Records(y)) => x == y,
        (Denotation::Records(_), _) | (_, Denotation::Records(_)) => false,
        _ => a.as_values() == b.as_values(),
    }
}

/// Predicate denoted by a unary used as a join argument.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Matcher {
    In(BTreeSet<CellValue>),
    Cmp(CompareOp, CellValue),
    And(Box<Matcher>, Box<Matcher>),
    Or(Box<Matcher>, Box<Matcher>),
}

impl Matcher {
    pub(crate) fn matches(&self, v: &CellValue) -> bool {
        match self {
            Matcher::In(set) => set.contains(v),
            Matcher::Cmp(op, bound) => {
                if v.kind() != bound.kind() {
                    return false;
                }
                let ord = v.cmp(bound);
                match op {
                    CompareOp::Lt => ord.is_lt(),
                    CompareOp::Gt => ord.is_gt(),
                    CompareOp::Leq => ord.is_le(),
                    CompareOp::Geq => ord.is_ge(),
                }
            }
            Matcher::And(a, b) => a.matches(v) && b.matches(v),
            Matcher::Or(a, b) => a.matches(v) || b.matches(v),
        }
    }
}

/// Intermediate denotation. Value collections keep multiplicity and row order so
/// that aggregates see every contributing cell.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Val {
    Records(BTreeSet<usize>),
    Values(Vec<CellValue>),
    Scalar(Scalar),
    Filter(Matcher),
}

impl Val {
    fn into_records(self) -> BTreeSet<usize> {
        match self {
            Val::Records(r) => r,
            other => unreachable!("type-checked records, got {other:?}"),
        }
    }

    fn into_values(self) -> Vec<CellValue> {
        match self {
            Val::Values(v) => v,
            other => unreachable!("type-checked values, got {other:?}"),
        }
    }

    fn into_matcher(self) -> Matcher {
        match self {
            Val::Values(v) => Matcher::In(v.into_iter().collect()),
            Val::Filter(m) => m,
            other => unreachable!("type-checked unary, got {other:?}"),
        }
    }

    pub(crate) fn distinct_values(&self) -> BTreeSet<CellValue> {
        match self {
            Val::Values(v) => v.iter().cloned().collect(),
            Val::Scalar(s) => BTreeSet::from([s.value.clone()]),
            _ => BTreeSet::new(),
        }
    }

    pub(crate) fn records(&self) -> Option<&BTreeSet<usize>> {
        match self {
            Val::Records(r) => Some(r),
            _ => None,
        }
    }
}

fn dedup(values: impl IntoIterator<Item = CellValue>) -> Vec<CellValue> {
    values.into_iter().collect::<BTreeSet<_>>().into_iter().collect()
}

pub(crate) fn extreme<'a, T: Ord + ?Sized>(dir: Direction, items: impl Iterator<Item = &'a T>) -> Option<&'a T> {
    match dir {
        Direction::Max => items.max(),
        Direction::Min => items.min(),
    }
}

/// Rows whose `column` cell is matched by `m`.
pub(crate) fn join_rows(t: &Table, column: usize, m: &Matcher) -> BTreeSet<usize> {
    t.column_values(column)
        .enumerate()
        .filter(|(_, v)| m.matches(v))
        .map(|(i, _)| i)
        .collect()
}

pub(crate) fn shift_rows(t: &Table, rows: &BTreeSet<usize>, delta: isize) -> BTreeSet<usize> {
    rows.iter()
        .filter_map(|&r| r.checked_add_signed(delta))
        .filter(|&r| r < t.row_count())
        .collect()
}

/// Rows of `column` ranked extreme by number of occurrences among `vals`.
pub(crate) fn most_frequent_values(
    t: &Table,
    column: usize,
    vals: &BTreeSet<CellValue>,
    dir: Direction,
) -> BTreeSet<CellValue> {
    let mut counts: BTreeMap<&CellValue, usize> = BTreeMap::new();
    for v in t.column_values(column).filter(|v| vals.contains(v)) {
        *counts.entry(v).or_default() += 1;
    }
    let Some(best) = extreme(dir, counts.values()).copied() else {
        return BTreeSet::new();
    };
    counts
        .into_iter()
        .filter(|(_, c)| *c == best)
        .map(|(v, _)| v.clone())
        .collect()
}

/// Rows whose `key` value is in `vals` and whose `by` value is extreme among them.
pub(crate) fn compare_rows(
    t: &Table,
    key: usize,
    by: usize,
    vals: &BTreeSet<CellValue>,
    dir: Direction,
) -> BTreeSet<usize> {
    let candidates: Vec<usize> = (0..t.row_count())
        .filter(|&r| vals.contains(&t.rows()[r][key]))
        .collect();
    let Some(best) = extreme(dir, candidates.iter().map(|&r| &t.rows()[r][by])) else {
        return BTreeSet::new();
    };
    candidates.into_iter().filter(|&r| t.rows()[r][by] == *best).collect()
}

fn col(t: &Table, name: &str) -> Result<usize, EvalError> {
    t.column_index(name)
        .map_err(|_| EvalError::Type(TypeError::UnknownColumn(name.to_string())))
}

fn number(x: f64, func: AggregateFn) -> Result<CellValue, EvalError> {
    CellValue::number(x).ok_or(EvalError::NonNumericAggregate { func })
}

fn aggregate(func: AggregateFn, input: Val) -> Result<CellValue, EvalError> {
    let values = match input {
        Val::Records(r) => {
            debug_assert_eq!(func, AggregateFn::Count);
            return number(r.len() as f64, func);
        }
        other => other.into_values(),
    };
    match func {
        AggregateFn::Count => number(values.len() as f64, func),
        AggregateFn::Max | AggregateFn::Min => {
            let dir = if func == AggregateFn::Max {
                Direction::Max
            } else {
                Direction::Min
            };
            extreme(dir, values.iter())
                .cloned()
                .ok_or(EvalError::EmptyAggregate { func })
        }
        AggregateFn::Sum | AggregateFn::Avg => {
            if values.is_empty() {
                return Err(EvalError::EmptyAggregate { func });
            }
            let nums: Option<Vec<f64>> = values.iter().map(CellValue::as_number).collect();
            let nums = nums.ok_or(EvalError::NonNumericAggregate { func })?;
            let sum: f64 = nums.iter().sum();
            if func == AggregateFn::Sum {
                number(sum, func)
            } else {
                number(sum / nums.len() as f64, func)
            }
        }
    }
}

fn sub_operand(values: &BTreeSet<CellValue>, side: usize) -> Result<f64, EvalError> {
    if values.len() != 1 {
        return Err(EvalError::NonSingletonSub {
            side,
            found: values.len(),
        });
    }
    values
        .iter()
        .next()
        .and_then(CellValue::as_number)
        .ok_or(EvalError::NonNumericSub { side })
}

/// Evaluates a type-checked formula to its intermediate denotation.
pub(crate) fn eval_val(f: &Formula, t: &Table) -> Result<Val, EvalError> {
    Ok(match f {
        Formula::ValueLit { value } => Val::Values(vec![value.clone()]),
        Formula::AllRecords => Val::Records((0..t.row_count()).collect()),
        Formula::NumCompare { op, bound } => Val::Filter(Matcher::Cmp(*op, bound.clone())),
        Formula::Join { column, arg } => {
            let m = eval_val(arg, t)?.into_matcher();
            Val::Records(join_rows(t, col(t, column)?, &m))
        }
        Formula::ColumnValues { column, records } => {
            let c = col(t, column)?;
            let rows = eval_val(records, t)?.into_records();
            Val::Values(rows.into_iter().map(|r| t.rows()[r][c].clone()).collect())
        }
        Formula::PrevValues { column, records } | Formula::NextValues { column, records } => {
            let c = col(t, column)?;
            let delta = if matches!(f, Formula::PrevValues { .. }) { -1 } else { 1 };
            let rows = shift_rows(t, &eval_val(records, t)?.into_records(), delta);
            Val::Values(rows.into_iter().map(|r| t.rows()[r][c].clone()).collect())
        }
        Formula::Aggregate { func, arg } => Val::Scalar(Scalar {
            value: aggregate(*func, eval_val(arg, t)?)?,
            origin: ScalarOrigin::Aggregate(*func),
        }),
        Formula::SubValues { .. } => {
            let parts = crate::formula::decompose(f);
            let a = sub_operand(&eval_val(&parts[0], t)?.distinct_values(), 0)?;
            let b = sub_operand(&eval_val(&parts[1], t)?.distinct_values(), 1)?;
            Val::Scalar(Scalar {
                value: number(a - b, AggregateFn::Sum)?,
                origin: ScalarOrigin::Difference,
            })
        }
        Formula::SubCounts { column, left, right } => {
            let c = col(t, column)?;
            let count = |v: &CellValue| t.column_values(c).filter(|x| *x == v).count() as f64;
            Val::Scalar(Scalar {
                value: number(count(left) - count(right), AggregateFn::Count)?,
                origin: ScalarOrigin::Difference,
            })
        }
        Formula::Union { left, right } => match (eval_val(left, t)?, eval_val(right, t)?) {
            (Val::Records(a), Val::Records(b)) => Val::Records(a.union(&b).copied().collect()),
            (Val::Values(a), Val::Values(b)) => Val::Values(dedup(a.into_iter().chain(b))),
            (a, b) => Val::Filter(Matcher::Or(Box::new(a.into_matcher()), Box::new(b.into_matcher()))),
        },
        Formula::Intersect { left, right } => match (eval_val(left, t)?, eval_val(right, t)?) {
            (Val::Records(a), Val::Records(b)) => Val::Records(a.intersection(&b).copied().collect()),
            (a, b) => Val::Filter(Matcher::And(Box::new(a.into_matcher()), Box::new(b.into_matcher()))),
        },
        Formula::ArgmaxRecords { direction, column } => {
            let c = col(t, column)?;
            match extreme(*direction, t.column_values(c)) {
                Some(best) => Val::Records(join_rows(t, c, &Matcher::In(BTreeSet::from([best.clone()])))),
                None => Val::Records(BTreeSet::new()),
            }
        }
        Formula::ExtremeIndexValue {
            direction,
            column,
            records,
        } => {
            let c = col(t, column)?;
            let rows = eval_val(records, t)?.into_records();
            let row = match direction {
                Direction::Max => rows.last(),
                Direction::Min => rows.first(),
            };
            Val::Values(row.map(|&r| t.rows()[r][c].clone()).into_iter().collect())
        }
        Formula::MostFrequent {
            direction,
            values,
            column,
        } => {
            let vals = eval_val(values, t)?.distinct_values();
            Val::Values(
                most_frequent_values(t, col(t, column)?, &vals, *direction)
                    .into_iter()
                    .collect(),
            )
        }
        Formula::CompareValues {
            direction,
            values,
            column_key,
            column_by,
        } => {
            let (key, by) = (col(t, column_key)?, col(t, column_by)?);
            let vals = eval_val(values, t)?.distinct_values();
            let rows = compare_rows(t, key, by, &vals, *direction);
            Val::Values(dedup(rows.into_iter().map(|r| t.rows()[r][key].clone())))
        }
    })
}

pub(crate) fn to_denotation(v: Val) -> Denotation {
    match v {
        Val::Records(r) => Denotation::Records(r),
        Val::Values(v) => Denotation::Values(v.into_iter().collect()),
        Val::Scalar(s) => Denotation::Scalar(s),
        Val::Filter(_) => unreachable!("filters are rejected by typecheck"),
    }
}

/// Type-checks `f` against `t` and executes it.
pub fn evaluate(f: &Formula, t: &Table) -> Result<Denotation, EvalError> {
    if infer_ty(f, t)? == Ty::Filter {
        return Err(TypeError::TypeMismatch("comparison unary outside of a join".into()).into());
    }
    Ok(to_denotation(eval_val(f, t)?))
}
