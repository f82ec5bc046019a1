//! Seeded random tables and well-typed formulas for property and differential tests.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::formula::{AggregateFn, CompareOp, Direction, Formula};
use crate::table::{CellValue, DateValue, Table, ValueKind};

const WORDS: &[&str] = &["alpha", "beta", "gamma", "delta", "o'neil", "x y"];
const EXOTIC_HEADERS: &[&str] = &["Open Cup", "Index", "u", "R", "it's", "max", "Prev"];

/// Size limits for generated cases.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GenLimits {
    pub max_rows: usize,
    pub max_columns: usize,
    pub max_depth: usize,
}

impl Default for GenLimits {
    fn default() -> Self {
        GenLimits {
            max_rows: 12,
            max_columns: 5,
            max_depth: 4,
        }
    }
}

pub struct CaseGenerator {
    rng: ChaCha8Rng,
    limits: GenLimits,
}

/// Column descriptor of the table being generated against.
struct Col {
    name: String,
    kind: ValueKind,
    cells: Vec<CellValue>,
}

impl CaseGenerator {
    pub fn new(seed: u64) -> Self {
        Self::with_limits(seed, GenLimits::default())
    }

    pub fn with_limits(seed: u64, limits: GenLimits) -> Self {
        CaseGenerator {
            rng: ChaCha8Rng::seed_from_u64(seed),
            limits,
        }
    }

    fn value(&mut self, kind: ValueKind) -> CellValue {
        match kind {
            ValueKind::Number => {
                if self.rng.gen_bool(0.15) {
                    CellValue::Number(self.rng.gen_range(-4..10) as f64 + 0.5)
                } else {
                    CellValue::Number(self.rng.gen_range(0..10) as f64)
                }
            }
            ValueKind::Date => {
                let d = DateValue::ymd(
                    2000 + self.rng.gen_range(0..3),
                    self.rng.gen_range(1..=3),
                    self.rng.gen_range(1..=3),
                )
                .expect("valid date");
                CellValue::Date(d)
            }
            ValueKind::Text => CellValue::text(WORDS.choose(&mut self.rng).expect("nonempty")),
        }
    }

    /// A table of up to `max_rows` rows (possibly none) and 1 to `max_columns`
    /// type-homogeneous columns.
    pub fn table(&mut self) -> Table {
        let rows = self.rng.gen_range(0..=self.limits.max_rows);
        self.table_sized(rows)
    }

    /// A table with exactly `rows` rows.
    pub fn table_sized(&mut self, rows: usize) -> Table {
        let ncols = self.rng.gen_range(1..=self.limits.max_columns);
        let exotic = self.rng.gen_bool(0.2);
        let mut headers = Vec::with_capacity(ncols);
        let mut kinds = Vec::with_capacity(ncols);
        for i in 0..ncols {
            let name = if exotic {
                EXOTIC_HEADERS[i % EXOTIC_HEADERS.len()].to_string()
            } else {
                format!("c{i}")
            };
            headers.push(name);
            kinds.push(
                *[ValueKind::Text, ValueKind::Number, ValueKind::Date]
                    .choose(&mut self.rng)
                    .expect("nonempty"),
            );
        }
        let data = (0..rows)
            .map(|_| kinds.iter().map(|&k| self.value(k)).collect())
            .collect();
        Table::new("gen", headers, data).expect("generated headers are unique and nonempty")
    }

    fn cols(t: &Table) -> Vec<Col> {
        t.headers()
            .iter()
            .enumerate()
            .map(|(i, name)| {
                let cells: Vec<CellValue> = t.column_values(i).cloned().collect();
                let kind = cells.first().map(CellValue::kind).unwrap_or(ValueKind::Text);
                Col {
                    name: name.clone(),
                    kind,
                    cells,
                }
            })
            .collect()
    }

    /// A well-typed formula for `t` whose canonical depth is within the limit.
    pub fn formula(&mut self, t: &Table) -> Formula {
        let cols = Self::cols(t);
        loop {
            let budget = self.rng.gen_range(1..=self.limits.max_depth);
            let f = match self.rng.gen_range(0..3) {
                0 => self.records(&cols, budget),
                1 => {
                    let k = cols.choose(&mut self.rng).expect("nonempty").kind;
                    self.values(&cols, budget, k)
                }
                _ => self.scalar(&cols, budget),
            };
            if f.depth() <= self.limits.max_depth {
                return f;
            }
        }
    }

    /// One (table, formula) pair.
    pub fn case(&mut self) -> (Table, Formula) {
        let t = self.table();
        let f = self.formula(&t);
        (t, f)
    }

    fn lit(&mut self, col: &Col) -> CellValue {
        match col.cells.choose(&mut self.rng) {
            Some(v) if self.rng.gen_bool(0.85) => v.clone(),
            _ => self.value(col.kind),
        }
    }

    fn pick<'c>(&mut self, cols: &'c [Col]) -> &'c Col {
        cols.choose(&mut self.rng).expect("tables have columns")
    }

    fn pick_kind<'c>(&mut self, cols: &'c [Col], kind: ValueKind) -> Option<&'c Col> {
        let matching: Vec<&Col> = cols.iter().filter(|c| c.kind == kind).collect();
        matching.choose(&mut self.rng).copied()
    }

    fn ordered_col<'c>(&mut self, cols: &'c [Col]) -> Option<&'c Col> {
        let matching: Vec<&Col> = cols.iter().filter(|c| c.kind != ValueKind::Text).collect();
        matching.choose(&mut self.rng).copied()
    }

    fn records(&mut self, cols: &[Col], d: usize) -> Formula {
        let choice = self.rng.gen_range(0..if d > 1 { 8 } else { 5 });
        match choice {
            0 => Formula::AllRecords,
            1 => {
                let c = self.pick(cols);
                Formula::argmax_records(self.direction(), c.name.clone())
            }
            2 | 3 => {
                let c = self.pick(cols);
                let v = self.lit(c);
                let arg = if self.rng.gen_bool(0.3) {
                    let w = self.lit(c);
                    Formula::union(Formula::lit(v), Formula::lit(w))
                } else {
                    Formula::lit(v)
                };
                Formula::join(c.name.clone(), arg)
            }
            4 => match self.ordered_col(cols) {
                Some(c) => {
                    let name = c.name.clone();
                    let a = Formula::compare(self.op(), self.lit(c));
                    let arg = if self.rng.gen_bool(0.3) {
                        let b = Formula::compare(self.op(), self.lit(c));
                        if self.rng.gen_bool(0.5) {
                            Formula::intersect(a, b)
                        } else {
                            Formula::union(a, b)
                        }
                    } else {
                        a
                    };
                    Formula::join(name, arg)
                }
                None => Formula::AllRecords,
            },
            5 => Formula::union(self.records(cols, d - 1), self.records(cols, d - 1)),
            6 => Formula::intersect(self.records(cols, d - 1), self.records(cols, d - 1)),
            _ => {
                let c = self.pick(cols);
                let (name, kind) = (c.name.clone(), c.kind);
                Formula::join(name, self.values(cols, d - 1, kind))
            }
        }
    }

    /// Values formula whose members all have `kind`.
    fn values(&mut self, cols: &[Col], d: usize, kind: ValueKind) -> Formula {
        let Some(c) = self.pick_kind(cols, kind) else {
            return Formula::lit(self.value(kind));
        };
        if d <= 1 {
            return Formula::lit(self.lit(c));
        }
        let name = c.name.clone();
        match self.rng.gen_range(0..8) {
            0 => Formula::lit(self.lit(c)),
            1 | 2 => Formula::column_values(name, self.records(cols, d - 1)),
            3 => {
                let r = self.records(cols, d - 1);
                if self.rng.gen_bool(0.5) {
                    Formula::prev_values(name, r)
                } else {
                    Formula::next_values(name, r)
                }
            }
            4 => Formula::extreme_index(self.direction(), name, self.records(cols, d - 1)),
            5 => Formula::union(self.values(cols, d - 1, kind), self.values(cols, d - 1, kind)),
            6 => Formula::most_frequent(
                self.direction(),
                self.values(cols, d.saturating_sub(2).max(1), kind),
                name,
            ),
            _ => {
                let by = self.pick(cols).name.clone();
                Formula::compare_values(
                    self.direction(),
                    self.values(cols, d.saturating_sub(3).max(1), kind),
                    name,
                    by,
                )
            }
        }
    }

    fn scalar(&mut self, cols: &[Col], d: usize) -> Formula {
        let inner = d.saturating_sub(1).max(1);
        match self.rng.gen_range(0..6) {
            0 => Formula::aggregate(AggregateFn::Count, self.records(cols, inner)),
            1 => {
                let k = self.pick(cols).kind;
                Formula::aggregate(AggregateFn::Count, self.values(cols, inner, k))
            }
            2 => {
                let k = self.pick(cols).kind;
                let func = if self.rng.gen_bool(0.5) {
                    AggregateFn::Max
                } else {
                    AggregateFn::Min
                };
                Formula::aggregate(func, self.values(cols, inner, k))
            }
            3 if self.pick_kind(cols, ValueKind::Number).is_some() => {
                let func = if self.rng.gen_bool(0.5) {
                    AggregateFn::Sum
                } else {
                    AggregateFn::Avg
                };
                Formula::aggregate(func, self.values(cols, inner, ValueKind::Number))
            }
            4 => {
                let key = self.pick(cols);
                let (v, u) = (self.lit(key), self.lit(key));
                Formula::SubCounts {
                    column: key.name.clone(),
                    left: v,
                    right: u,
                }
            }
            _ => match self.pick_kind(cols, ValueKind::Number) {
                Some(out) => {
                    let key = self.pick(cols);
                    Formula::SubValues {
                        column_out: out.name.clone(),
                        column_key: key.name.clone(),
                        left: self.lit(key),
                        right: self.lit(key),
                    }
                }
                None => Formula::aggregate(AggregateFn::Count, Formula::AllRecords),
            },
        }
    }

    fn direction(&mut self) -> Direction {
        if self.rng.gen_bool(0.5) {
            Direction::Max
        } else {
            Direction::Min
        }
    }

    fn op(&mut self) -> CompareOp {
        *[CompareOp::Lt, CompareOp::Gt, CompareOp::Leq, CompareOp::Geq]
            .choose(&mut self.rng)
            .expect("nonempty")
    }

    /// Arbitrary AST, not necessarily well-typed, with awkward column names and
    /// literals; used for parse/format round trips.
    pub fn any_formula(&mut self, depth: usize) -> Formula {
        const NAMES: &[&str] = &[
            "Year", "Open Cup", "u", "n", "Index", "it's", "R", "a`b", "Prev", "x1", "count",
        ];
        const TEXTS: &[&str] = &[
            "Athens",
            "June 8 2013",
            "o'neil",
            "u",
            "Record",
            "4th Round",
            "",
            "a\\b",
            "-",
            "λ",
        ];
        let col = |rng: &mut ChaCha8Rng| NAMES.choose(rng).expect("nonempty").to_string();
        let lit = |rng: &mut ChaCha8Rng| match rng.gen_range(0..4) {
            0 => CellValue::Number(rng.gen_range(-50..3000) as f64),
            1 => CellValue::Number(rng.gen_range(-50..50) as f64 / 4.0),
            2 => CellValue::Date(
                DateValue::ymd(rng.gen_range(1890..2020), rng.gen_range(1..=12), rng.gen_range(1..=28)).expect("valid"),
            ),
            _ => crate::table::infer_value(TEXTS.choose(rng).expect("nonempty")),
        };
        let leaf = depth <= 1 || self.rng.gen_bool(0.2);
        let r = &mut self.rng;
        if leaf {
            return match r.gen_range(0..4) {
                0 => Formula::AllRecords,
                1 => Formula::compare(*[CompareOp::Lt, CompareOp::Geq].choose(r).expect("nonempty"), lit(r)),
                2 => Formula::argmax_records(Direction::Min, col(r)),
                _ => Formula::lit(lit(r)),
            };
        }
        let d = depth - 1;
        match self.rng.gen_range(0..14) {
            0 => {
                let c = col(&mut self.rng);
                Formula::join(c, self.any_formula(d))
            }
            1 => {
                let c = col(&mut self.rng);
                Formula::column_values(c, self.any_formula(d))
            }
            2 => {
                let c = col(&mut self.rng);
                Formula::prev_values(c, self.any_formula(d))
            }
            3 => {
                let c = col(&mut self.rng);
                Formula::next_values(c, self.any_formula(d))
            }
            4 => {
                let func = *[
                    AggregateFn::Count,
                    AggregateFn::Max,
                    AggregateFn::Min,
                    AggregateFn::Sum,
                    AggregateFn::Avg,
                ]
                .choose(&mut self.rng)
                .expect("nonempty");
                Formula::aggregate(func, self.any_formula(d))
            }
            5 => Formula::union(self.any_formula(d), self.any_formula(d)),
            6 => Formula::intersect(self.any_formula(d), self.any_formula(d)),
            7 => {
                let (a, b) = (col(&mut self.rng), col(&mut self.rng));
                let (v, u) = (lit(&mut self.rng), lit(&mut self.rng));
                Formula::SubValues {
                    column_out: a,
                    column_key: b,
                    left: v,
                    right: u,
                }
            }
            8 => {
                let a = col(&mut self.rng);
                let (v, u) = (lit(&mut self.rng), lit(&mut self.rng));
                Formula::SubCounts {
                    column: a,
                    left: v,
                    right: u,
                }
            }
            9 => {
                let c = col(&mut self.rng);
                let dir = self.direction();
                Formula::extreme_index(dir, c, self.any_formula(d))
            }
            10 => {
                let c = col(&mut self.rng);
                let dir = self.direction();
                Formula::most_frequent(dir, self.any_formula(d), c)
            }
            11 => {
                let (k, b) = (col(&mut self.rng), col(&mut self.rng));
                let dir = self.direction();
                Formula::compare_values(dir, self.any_formula(d), k, b)
            }
            12 => {
                let c = col(&mut self.rng);
                let dir = self.direction();
                Formula::argmax_records(dir, c)
            }
            _ => Formula::lit(lit(&mut self.rng)),
        }
    }
}
