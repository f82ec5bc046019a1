//! Shared fixtures for the benchmarks.

use qexplain_core::{CellValue, Table};

/// A `rows` x `cols` table: column 0 cycles through a few country names, the
/// rest hold integers.
pub fn wide_table(rows: usize, cols: usize) -> Table {
    let countries = ["Greece", "France", "China", "UK", "Brazil", "Japan", "Italy"];
    let mut headers = vec!["Country".to_string()];
    headers.extend((1..cols).map(|i| format!("C{i}")));
    let data = (0..rows)
        .map(|r| {
            let mut row = vec![CellValue::text(countries[r % countries.len()])];
            row.extend((1..cols).map(|c| CellValue::Number(((r * 7 + c * 13) % 97) as f64)));
            row
        })
        .collect();
    Table::new("wide", headers, data).expect("valid headers")
}
