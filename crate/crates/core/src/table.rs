//! Immutable single-table data model.
//!
//! A [`Table`] is an ordered list of records. The position of a record is its
//! index, so indices are always `0..n` without gaps and the predecessor of
//! record `i` is record `i - 1`.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TableError {
    #[error("table has no header row")]
    EmptyTable,
    #[error("duplicate column header `{0}`")]
    DuplicateHeader(String),
    #[error("line {line}: expected {expected} cells, found {found}")]
    MalformedRow { line: u64, expected: usize, found: usize },
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("cell ({column}, {row}) is outside the table")]
    CellOutOfRange { column: String, row: usize },
    #[error("unsupported table file extension for {0}")]
    UnknownFormat(PathBuf),
    #[error("unknown table id `{0}`")]
    UnknownTable(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Calendar date with optional month and day.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DateValue {
    year: i32,
    month: Option<u8>,
    day: Option<u8>,
}

const MONTHS: [&str; 12] = [
    "January",
    "February",
    "March",
    "April",
    "May",
    "June",
    "July",
    "August",
    "September",
    "October",
    "November",
    "December",
];

fn days_in_month(year: i32, month: u8) -> u8 {
    match month {
        1 | 3 | 5 | 7 | 8 | 10 | 12 => 31,
        4 | 6 | 9 | 11 => 30,
        _ => {
            let leap = (year % 4 == 0 && year % 100 != 0) || year % 400 == 0;
            if leap {
                29
            } else {
                28
            }
        }
    }
}

impl DateValue {
    /// Returns `None` unless the parts name a real calendar date. A day needs a month.
    pub fn new(year: i32, month: Option<u8>, day: Option<u8>) -> Option<Self> {
        match (month, day) {
            (None, Some(_)) => None,
            (Some(m), _) if !(1..=12).contains(&m) => None,
            (Some(m), Some(d)) if d == 0 || d > days_in_month(year, m) => None,
            _ => Some(DateValue { year, month, day }),
        }
    }

    pub fn ymd(year: i32, month: u8, day: u8) -> Option<Self> {
        Self::new(year, Some(month), Some(day))
    }

    pub fn year(&self) -> i32 {
        self.year
    }

    pub fn month(&self) -> Option<u8> {
        self.month
    }

    pub fn day(&self) -> Option<u8> {
        self.day
    }

    /// ISO-8601 form (`YYYY`, `YYYY-MM` or `YYYY-MM-DD`); sorts chronologically as text.
    pub fn iso(&self) -> String {
        match (self.month, self.day) {
            (Some(m), Some(d)) => format!("{:04}-{:02}-{:02}", self.year, m, d),
            (Some(m), None) => format!("{:04}-{:02}", self.year, m),
            _ => format!("{:04}", self.year),
        }
    }
}

impl fmt::Display for DateValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.month, self.day) {
            (Some(m), Some(d)) => write!(f, "{} {} {}", MONTHS[m as usize - 1], d, self.year),
            (Some(m), None) => write!(f, "{} {}", MONTHS[m as usize - 1], self.year),
            _ => write!(f, "{}", self.year),
        }
    }
}

/// A typed table cell.
///
/// Ordering: numbers numerically, dates chronologically, text by case-insensitive
/// code points (exact text breaks ties). Values of different variants compare by
/// their textual rendering, then by variant.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellValue {
    Text(String),
    Number(f64),
    #[serde(with = "date_serde")]
    Date(DateValue),
}

mod date_serde {
    use super::{infer_value, CellValue, DateValue};
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &DateValue, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&d.iso())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DateValue, D::Error> {
        let raw = String::deserialize(d)?;
        match infer_value(&raw) {
            CellValue::Date(v) => Ok(v),
            _ => Err(D::Error::custom(format!("invalid date `{raw}`"))),
        }
    }
}

impl CellValue {
    /// Builds a number cell; NaN is rejected and negative zero normalised.
    pub fn number(x: f64) -> Option<Self> {
        if x.is_nan() {
            None
        } else {
            Some(CellValue::Number(x + 0.0))
        }
    }

    pub fn text(s: impl AsRef<str>) -> Self {
        CellValue::Text(s.as_ref().trim().to_string())
    }

    pub fn as_number(&self) -> Option<f64> {
        match self {
            CellValue::Number(x) => Some(*x),
            _ => None,
        }
    }

    pub fn kind(&self) -> ValueKind {
        match self {
            CellValue::Text(_) => ValueKind::Text,
            CellValue::Number(_) => ValueKind::Number,
            CellValue::Date(_) => ValueKind::Date,
        }
    }

    fn rank(&self) -> u8 {
        match self {
            CellValue::Number(_) => 0,
            CellValue::Date(_) => 1,
            CellValue::Text(_) => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueKind {
    Text,
    Number,
    Date,
}

pub(crate) fn format_number(x: f64) -> String {
    if x.fract() == 0.0 && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format!("{x}")
    }
}

impl fmt::Display for CellValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CellValue::Text(s) => f.write_str(s),
            CellValue::Number(x) => f.write_str(&format_number(*x)),
            CellValue::Date(d) => d.fmt(f),
        }
    }
}

fn cmp_text(a: &str, b: &str) -> Ordering {
    let folded = a
        .chars()
        .flat_map(char::to_lowercase)
        .cmp(b.chars().flat_map(char::to_lowercase));
    folded.then_with(|| a.cmp(b))
}

impl Ord for CellValue {
    fn cmp(&self, other: &Self) -> Ordering {
        use CellValue::*;
        match (self, other) {
            (Number(a), Number(b)) => {
                if a == b {
                    Ordering::Equal
                } else {
                    a.total_cmp(b)
                }
            }
            (Date(a), Date(b)) => a.cmp(b),
            (Text(a), Text(b)) => cmp_text(a, b),
            _ => cmp_text(&self.to_string(), &other.to_string()).then_with(|| self.rank().cmp(&other.rank())),
        }
    }
}

impl PartialOrd for CellValue {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for CellValue {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for CellValue {}

impl Hash for CellValue {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.rank().hash(state);
        match self {
            CellValue::Text(s) => s.hash(state),
            CellValue::Number(x) => (x + 0.0).to_bits().hash(state),
            CellValue::Date(d) => d.hash(state),
        }
    }
}

fn number_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^[+-]?(?:\d{1,3}(?:,\d{3})+|\d+)(?:\.\d+)?$").unwrap())
}

fn iso_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^(\d{4})-(\d{1,2})(?:-(\d{1,2}))?$").unwrap())
}

fn month_day_year_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^([A-Za-z]+)\.?\s+(\d{1,2}),?\s+(\d{4})$").unwrap())
}

fn month_year_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^([A-Za-z]+)\.?\s+(\d{4})$").unwrap())
}

fn month_number(name: &str) -> Option<u8> {
    let lower = name.to_lowercase();
    MONTHS
        .iter()
        .position(|m| {
            let m = m.to_lowercase();
            m == lower || (lower.len() >= 3 && m.starts_with(&lower) && lower.len() <= m.len())
        })
        .map(|i| i as u8 + 1)
}

fn infer_date(s: &str) -> Option<DateValue> {
    if let Some(c) = iso_re().captures(s) {
        let year = c[1].parse().ok()?;
        let month = c[2].parse().ok()?;
        let day = match c.get(3) {
            Some(d) => Some(d.as_str().parse().ok()?),
            None => None,
        };
        return DateValue::new(year, Some(month), day);
    }
    if let Some(c) = month_day_year_re().captures(s) {
        let month = month_number(&c[1])?;
        return DateValue::ymd(c[3].parse().ok()?, month, c[2].parse().ok()?);
    }
    if let Some(c) = month_year_re().captures(s) {
        let month = month_number(&c[1])?;
        return DateValue::new(c[2].parse().ok()?, Some(month), None);
    }
    None
}

/// Types a raw cell: a decimal number (sign allowed, `,` thousands separators
/// stripped), else a date (`YYYY-MM-DD`, `YYYY-MM`, `Month D YYYY`,
/// `Month D, YYYY`, `Month YYYY`), else trimmed text. Bare years stay numbers.
pub fn infer_value(raw: &str) -> CellValue {
    let s = raw.trim();
    if number_re().is_match(s) {
        let cleaned: String = s.chars().filter(|c| *c != ',').collect();
        if let Some(v) = cleaned.parse::<f64>().ok().and_then(CellValue::number) {
            return v;
        }
    }
    match infer_date(s) {
        Some(d) => CellValue::Date(d),
        None => CellValue::Text(s.to_string()),
    }
}

/// Trims and collapses internal whitespace.
pub fn sanitize_header(raw: &str) -> String {
    raw.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// A cell position: row index and column position within the owning table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellRef {
    pub row: usize,
    pub column: usize,
}

impl CellRef {
    pub fn new(column: usize, row: usize) -> Self {
        CellRef { row, column }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    name: String,
    headers: Vec<String>,
    rows: Vec<Vec<CellValue>>,
}

impl Table {
    /// Validates headers (sanitised, unique) and row widths.
    pub fn new(name: impl Into<String>, headers: Vec<String>, rows: Vec<Vec<CellValue>>) -> Result<Self, TableError> {
        if headers.is_empty() {
            return Err(TableError::EmptyTable);
        }
        let headers: Vec<String> = headers.iter().map(|h| sanitize_header(h)).collect();
        for (i, h) in headers.iter().enumerate() {
            if headers[..i].contains(h) {
                return Err(TableError::DuplicateHeader(h.clone()));
            }
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != headers.len() {
                return Err(TableError::MalformedRow {
                    line: i as u64 + 2,
                    expected: headers.len(),
                    found: row.len(),
                });
            }
        }
        Ok(Table {
            name: name.into(),
            headers,
            rows,
        })
    }

    /// Builds a table from raw strings, typing each cell with [`infer_value`].
    pub fn from_strings<H: AsRef<str>, S: AsRef<str>>(
        name: impl Into<String>,
        headers: &[H],
        rows: &[Vec<S>],
    ) -> Result<Self, TableError> {
        let headers = headers.iter().map(|h| h.as_ref().to_string()).collect();
        let rows = rows
            .iter()
            .map(|r| r.iter().map(|c| infer_value(c.as_ref())).collect())
            .collect();
        Table::new(name, headers, rows)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn headers(&self) -> &[String] {
        &self.headers
    }

    pub fn rows(&self) -> &[Vec<CellValue>] {
        &self.rows
    }

    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    pub fn column_count(&self) -> usize {
        self.headers.len()
    }

    pub fn column_index(&self, name: &str) -> Result<usize, TableError> {
        self.headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| TableError::UnknownColumn(name.to_string()))
    }

    pub fn column_name(&self, column: usize) -> &str {
        &self.headers[column]
    }

    pub fn value(&self, cell: CellRef) -> &CellValue {
        &self.rows[cell.row][cell.column]
    }

    pub fn get(&self, cell: CellRef) -> Option<&CellValue> {
        self.rows.get(cell.row).and_then(|r| r.get(cell.column))
    }

    /// Predecessor of record `row` (the record directly above it).
    pub fn prev(&self, row: usize) -> Option<usize> {
        row.checked_sub(1).filter(|r| *r < self.rows.len())
    }

    /// All cells of `column`, in ascending row order.
    pub fn column_cells(&self, column: &str) -> Result<Vec<CellRef>, TableError> {
        let c = self.column_index(column)?;
        Ok(self.cells_of(c).collect())
    }

    pub(crate) fn cells_of(&self, column: usize) -> impl Iterator<Item = CellRef> + '_ {
        (0..self.rows.len()).map(move |row| CellRef { row, column })
    }

    pub fn column_values(&self, column: usize) -> impl Iterator<Item = &CellValue> + '_ {
        self.rows.iter().map(move |r| &r[column])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Tsv,
    Csv,
}

impl TableFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "tsv" => Some(TableFormat::Tsv),
            "csv" => Some(TableFormat::Csv),
            _ => None,
        }
    }
}

/// Reads a delimited file whose first line is the header row. The table is
/// named after the file stem.
pub fn load_table(path: &Path, format: TableFormat) -> Result<Table, TableError> {
    let mut builder = csv::ReaderBuilder::new();
    builder.has_headers(false).flexible(true);
    match format {
        TableFormat::Tsv => builder.delimiter(b'\t').quoting(false),
        TableFormat::Csv => builder.delimiter(b','),
    };
    let mut reader = builder.from_path(path)?;
    let mut records = reader.records();
    let header = match records.next() {
        Some(r) => r?,
        None => return Err(TableError::EmptyTable),
    };
    let headers: Vec<String> = header
        .iter()
        .enumerate()
        .map(|(i, h)| {
            if i == 0 {
                h.trim_start_matches('\u{feff}').to_string()
            } else {
                h.to_string()
            }
        })
        .collect();
    let mut rows = Vec::new();
    for record in records {
        let record = record?;
        if record.len() != headers.len() {
            let line = record.position().map(|p| p.line()).unwrap_or(0);
            return Err(TableError::MalformedRow {
                line,
                expected: headers.len(),
                found: record.len(),
            });
        }
        rows.push(record.iter().map(infer_value).collect());
    }
    if rows.is_empty() {
        return Err(TableError::EmptyTable);
    }
    let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("T").to_string();
    Table::new(name, headers, rows)
}

/// Loads a `.tsv` or `.csv` file, picking the format from the extension.
pub fn load_table_file(path: &Path) -> Result<Table, TableError> {
    let format = TableFormat::from_path(path).ok_or_else(|| TableError::UnknownFormat(path.to_path_buf()))?;
    load_table(path, format)
}

/// Maps table ids (file stems) to the `.tsv`/`.csv` files of a directory.
#[derive(Debug, Clone, Default)]
pub struct TableRegistry {
    files: BTreeMap<String, PathBuf>,
}

impl TableRegistry {
    pub fn scan(dir: &Path) -> Result<Self, TableError> {
        let mut files = BTreeMap::new();
        for entry in std::fs::read_dir(dir)? {
            let path = entry?.path();
            if TableFormat::from_path(&path).is_none() {
                continue;
            }
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                files.insert(stem.to_string(), path);
            }
        }
        Ok(TableRegistry { files })
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.files.keys().map(String::as_str)
    }

    pub fn path(&self, id: &str) -> Option<&Path> {
        self.files.get(id).map(PathBuf::as_path)
    }

    pub fn load(&self, id: &str) -> Result<Table, TableError> {
        let path = self.path(id).ok_or_else(|| TableError::UnknownTable(id.to_string()))?;
        load_table_file(path)
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::Table;

    /// The Olympic games table with the elided middle rows collapsed.
    pub fn olympics() -> Table {
        Table::from_strings(
            "olympics",
            &["Year", "Country", "City"],
            &[
                vec!["1896", "Greece", "Athens"],
                vec!["1900", "France", "Paris"],
                vec!["2004", "Greece", "Athens"],
                vec!["2008", "China", "Beijing"],
                vec!["2012", "UK", "London"],
                vec!["2016", "Brazil", "Rio de Janeiro"],
            ],
        )
        .unwrap()
    }
}
