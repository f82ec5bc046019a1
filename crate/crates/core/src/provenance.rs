//! Multilevel cell provenance: output cells, executed cells and column cells.
//!
//! Output cells follow the per-operator rules: a join outputs the matching cells
//! of its column, a projection the projected cells, `max`/`min` the input cells
//! holding the extreme value, and the other aggregates every input cell. Executed
//! cells are the union of the output cells over the formula and every sub-formula
//! reachable through [`decompose`]. Column cells are the full columns the formula
//! mentions.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::eval::{compare_rows, eval_val, evaluate, most_frequent_values, shift_rows, EvalError, Val};
use crate::formula::{decompose, AggregateFn, Formula};
use crate::table::{CellRef, Table};

/// An aggregate function attached to a column header.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AggregateMark {
    #[serde(rename = "fn")]
    pub func: AggregateFn,
    pub column: String,
}

impl AggregateMark {
    /// Header label, e.g. `MAX(Year)`.
    pub fn label(&self) -> String {
        format!("{}({})", self.func.sql(), self.column)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProvenanceChain {
    pub output_cells: BTreeSet<CellRef>,
    pub executed_cells: BTreeSet<CellRef>,
    pub column_cells: BTreeSet<CellRef>,
    pub output_marks: BTreeSet<AggregateMark>,
    pub executed_marks: BTreeSet<AggregateMark>,
    /// Rows behind each operand of the outermost difference, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub difference_rows: Option<(BTreeSet<usize>, BTreeSet<usize>)>,
}

impl ProvenanceChain {
    /// `output ⊆ executed ⊆ column` on cells and `output ⊆ executed` on marks.
    pub fn is_ordered(&self) -> bool {
        self.output_cells.is_subset(&self.executed_cells)
            && self.executed_cells.is_subset(&self.column_cells)
            && self.output_marks.is_subset(&self.executed_marks)
    }

    pub fn is_empty(&self) -> bool {
        self.column_cells.is_empty() && self.executed_marks.is_empty()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordSets {
    pub output: BTreeSet<usize>,
    pub executed: BTreeSet<usize>,
    pub column: BTreeSet<usize>,
}

type Cells = BTreeSet<CellRef>;
type Marks = BTreeSet<AggregateMark>;

fn column_at(t: &Table, name: &str) -> Result<usize, EvalError> {
    t.column_index(name)
        .map_err(|_| crate::formula::TypeError::UnknownColumn(name.to_string()).into())
}

fn cells_on(column: usize, rows: impl IntoIterator<Item = usize>) -> Cells {
    rows.into_iter().map(|r| CellRef::new(column, r)).collect()
}

fn rows_of(cells: &Cells) -> BTreeSet<usize> {
    cells.iter().map(|c| c.row).collect()
}

fn records_of(f: &Formula, t: &Table) -> Result<BTreeSet<usize>, EvalError> {
    Ok(eval_val(f, t)?.records().cloned().unwrap_or_default())
}

/// Output provenance of `f` alone (cells and aggregate marks).
pub fn output_provenance(f: &Formula, t: &Table) -> Result<(Cells, Marks), EvalError> {
    let mut marks = Marks::new();
    let cells = match f {
        Formula::ValueLit { .. } | Formula::AllRecords | Formula::NumCompare { .. } => Cells::new(),
        Formula::Join { column, .. } | Formula::ArgmaxRecords { column, .. } => {
            cells_on(column_at(t, column)?, records_of(f, t)?)
        }
        Formula::ColumnValues { column, records } => cells_on(column_at(t, column)?, records_of(records, t)?),
        Formula::PrevValues { column, records } => {
            cells_on(column_at(t, column)?, shift_rows(t, &records_of(records, t)?, -1))
        }
        Formula::NextValues { column, records } => {
            cells_on(column_at(t, column)?, shift_rows(t, &records_of(records, t)?, 1))
        }
        Formula::Aggregate { func, arg } => {
            let (mut cells, _) = output_provenance(arg, t)?;
            if matches!(func, AggregateFn::Max | AggregateFn::Min) {
                let result = match eval_val(f, t)? {
                    Val::Scalar(s) => s.value,
                    other => unreachable!("aggregate yields a scalar, got {other:?}"),
                };
                cells.retain(|c| *t.value(*c) == result);
            }
            marks.extend(cells.iter().map(|c| AggregateMark {
                func: *func,
                column: t.column_name(c.column).to_string(),
            }));
            cells
        }
        Formula::SubValues { .. } | Formula::SubCounts { .. } => {
            let mut cells = Cells::new();
            for part in decompose(f) {
                cells.extend(output_provenance(&part, t)?.0);
            }
            cells
        }
        Formula::Union { left, right } => {
            let mut cells = output_provenance(left, t)?.0;
            cells.extend(output_provenance(right, t)?.0);
            cells
        }
        Formula::Intersect { left, right } => match eval_val(f, t)? {
            Val::Records(rows) => {
                let on_rows = |side: &Formula| -> Result<Cells, EvalError> {
                    let mut cells = output_provenance(side, t)?.0;
                    cells.retain(|c| rows.contains(&c.row));
                    Ok(cells)
                };
                let first = on_rows(left)?;
                if first.is_empty() {
                    on_rows(right)?
                } else {
                    first
                }
            }
            _ => Cells::new(),
        },
        Formula::ExtremeIndexValue {
            direction,
            column,
            records,
        } => {
            let rows = records_of(records, t)?;
            let row = match direction {
                crate::formula::Direction::Max => rows.last(),
                crate::formula::Direction::Min => rows.first(),
            };
            cells_on(column_at(t, column)?, row.copied())
        }
        Formula::MostFrequent {
            direction,
            values,
            column,
        } => {
            let c = column_at(t, column)?;
            let vals = eval_val(values, t)?.distinct_values();
            let winners = most_frequent_values(t, c, &vals, *direction);
            t.cells_of(c).filter(|cell| winners.contains(t.value(*cell))).collect()
        }
        Formula::CompareValues {
            direction,
            values,
            column_key,
            column_by,
        } => {
            let (key, by) = (column_at(t, column_key)?, column_at(t, column_by)?);
            let vals = eval_val(values, t)?.distinct_values();
            cells_on(key, compare_rows(t, key, by, &vals, *direction))
        }
    };
    Ok((cells, marks))
}

fn executed(f: &Formula, t: &Table, cells: &mut Cells, marks: &mut Marks) -> Result<(), EvalError> {
    let (c, m) = output_provenance(f, t)?;
    cells.extend(c);
    marks.extend(m);
    for child in decompose(f) {
        executed(&child, t, cells, marks)?;
    }
    Ok(())
}

fn first_difference(f: &Formula) -> Option<Formula> {
    if matches!(f, Formula::SubValues { .. } | Formula::SubCounts { .. }) {
        return Some(f.clone());
    }
    decompose(f).iter().find_map(first_difference)
}

/// Computes the provenance chain of `f` on `t`. Fails when `f` does not type-check
/// or its execution fails.
pub fn provenance_chain(f: &Formula, t: &Table) -> Result<ProvenanceChain, EvalError> {
    evaluate(f, t)?;
    let (output_cells, output_marks) = output_provenance(f, t)?;
    let mut executed_cells = Cells::new();
    let mut executed_marks = Marks::new();
    executed(f, t, &mut executed_cells, &mut executed_marks)?;
    let mut column_cells = Cells::new();
    for name in f.columns() {
        column_cells.extend(t.cells_of(column_at(t, &name)?));
    }
    let difference_rows = match first_difference(f) {
        Some(sub) => {
            let parts = decompose(&sub);
            Some((
                rows_of(&output_provenance(&parts[0], t)?.0),
                rows_of(&output_provenance(&parts[1], t)?.0),
            ))
        }
        None => None,
    };
    Ok(ProvenanceChain {
        output_cells,
        executed_cells,
        column_cells,
        output_marks,
        executed_marks,
        difference_rows,
    })
}

/// Maps every provenance cell to its row.
pub fn record_sets(p: &ProvenanceChain, t: &Table) -> RecordSets {
    let rows =
        |cells: &Cells| -> BTreeSet<usize> { cells.iter().map(|c| c.row).filter(|&r| r < t.row_count()).collect() };
    RecordSets {
        output: rows(&p.output_cells),
        executed: rows(&p.executed_cells),
        column: rows(&p.column_cells),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::parse_formula;
    use crate::table::fixtures::olympics;

    fn chain(src: &str) -> ProvenanceChain {
        provenance_chain(&parse_formula(src).unwrap(), &olympics()).unwrap()
    }

    fn cells(t: &Table, items: &[(&str, usize)]) -> Cells {
        items
            .iter()
            .map(|(c, r)| CellRef::new(t.column_index(c).unwrap(), *r))
            .collect()
    }

    fn column(t: &Table, names: &[&str]) -> Cells {
        names.iter().flat_map(|n| t.column_cells(n).unwrap()).collect()
    }

    #[test]
    fn reverse_join_chain() {
        let t = olympics();
        let p = chain("R[Year].City.Athens");
        assert_eq!(p.output_cells, cells(&t, &[("Year", 0), ("Year", 2)]));
        assert_eq!(
            p.executed_cells,
            cells(&t, &[("Year", 0), ("Year", 2), ("City", 0), ("City", 2)])
        );
        assert_eq!(p.column_cells, column(&t, &["Year", "City"]));
        let r = record_sets(&p, &t);
        assert_eq!(r.output, BTreeSet::from([0, 2]));
        assert_eq!(r.executed, BTreeSet::from([0, 2]));
        assert_eq!(r.column, (0..6).collect());
    }

    #[test]
    fn count_marks_its_column() {
        let t = olympics();
        let p = chain("count(City.Athens)");
        let mark = AggregateMark {
            func: AggregateFn::Count,
            column: "City".into(),
        };
        assert_eq!(p.output_marks, BTreeSet::from([mark.clone()]));
        assert_eq!(p.executed_marks, BTreeSet::from([mark]));
        assert_eq!(p.output_cells, cells(&t, &[("City", 0), ("City", 2)]));
        assert_eq!(p.executed_cells, p.output_cells);
        let r = record_sets(&p, &t);
        assert_eq!(r.output, BTreeSet::from([0, 2]));
        assert_eq!(r.executed, BTreeSet::from([0, 2]));
    }

    #[test]
    fn max_outputs_only_the_extreme_cell() {
        let t = olympics();
        let p = chain("max(R[Year].Country.Greece)");
        assert_eq!(p.output_cells, cells(&t, &[("Year", 2)]));
        assert_eq!(
            p.executed_cells,
            cells(&t, &[("Year", 0), ("Year", 2), ("Country", 0), ("Country", 2)])
        );
        assert_eq!(p.output_marks.iter().next().unwrap().label(), "MAX(Year)");
    }

    #[test]
    fn literal_touches_nothing() {
        let p = chain("Athens");
        assert!(p.is_empty());
        assert_eq!(record_sets(&p, &olympics()), RecordSets::default());
    }

    #[test]
    fn intersection_outputs_first_operand_cells() {
        let t = olympics();
        let p = chain("City.London n Country.UK");
        assert_eq!(p.output_cells, cells(&t, &[("City", 4)]));
        assert!(p.executed_cells.is_superset(&cells(&t, &[("City", 4), ("Country", 4)])));
        let q = chain("R[City].(Country.UK n Year.2012)");
        assert_eq!(q.output_cells, cells(&t, &[("City", 4)]));
        assert_eq!(q.executed_cells, cells(&t, &[("City", 4), ("Country", 4), ("Year", 4)]));
    }

    #[test]
    fn comparison_join_outputs_matching_cells() {
        let t = olympics();
        let p = chain("Year.gt(2004)");
        assert_eq!(p.output_cells, cells(&t, &[("Year", 3), ("Year", 4), ("Year", 5)]));
        assert_eq!(p.executed_cells, p.output_cells);
    }

    #[test]
    fn superlative_rows() {
        let t = olympics();
        let p = chain("comparemax(London u Beijing, City, Year)");
        assert_eq!(p.output_cells, cells(&t, &[("City", 4)]));
        assert_eq!(
            p.executed_cells,
            cells(&t, &[("City", 3), ("City", 4), ("Year", 3), ("Year", 4)])
        );
        let m = chain("mostfreq(Athens u Paris u Beijing u London, City)");
        assert_eq!(m.output_cells, cells(&t, &[("City", 0), ("City", 2)]));
        assert_eq!(
            m.executed_cells,
            cells(&t, &[("City", 0), ("City", 1), ("City", 2), ("City", 3), ("City", 4)])
        );
        let e = chain("R[Year].argmax(City.Athens, Index)");
        assert_eq!(e.output_cells, cells(&t, &[("Year", 2)]));
    }

    #[test]
    fn difference_rows_split_by_operand() {
        let p = chain("sub(count(City.Athens), count(City.London))");
        assert_eq!(p.difference_rows, Some((BTreeSet::from([0, 2]), BTreeSet::from([4]))));
        assert!(p.output_marks.is_empty());
        assert!(chain("R[Year].City.Athens").difference_rows.is_none());
    }

    #[test]
    fn chain_is_ordered_on_examples() {
        for src in [
            "max(R[Year].Country.Greece)",
            "R[City].Prev.City.London",
            "R[City].R[Prev].City.Athens",
            "count(Country.Greece n argmax(Record, Year))",
            "R[City].argmin(Record, Year)",
            "sub(R[Year].City.London, R[Year].City.Beijing)",
        ] {
            assert!(chain(src).is_ordered(), "{src}");
        }
    }
}
