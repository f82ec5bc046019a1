//! Query engine and explanation toolkit for lambda DCS formulas over single tables.
//!
//! The crate is organised bottom-up:
//!
//! * [`table`] holds the immutable table model and delimited-file ingestion.
//! * [`formula`] defines the formula AST, its canonical text syntax and type checking.
//! * [`eval`] executes formulas against tables.
//! * [`provenance`] computes the multilevel cell provenance chain of an execution.
//! * [`highlight`] turns provenance into cell highlights, row samples and HTML.
//! * [`utterance`] renders formulas as natural-language descriptions.
//! * [`sql`] translates formulas to SQL and runs differential checks against SQLite.
//! * [`rerank`] is the log-linear candidate reranker trained from answers and annotations.
//! * [`service`] ties everything together over a data directory (manifest, tables,
//!   annotation store, model checkpoint).

pub mod error;
pub mod eval;
pub mod formula;
pub mod gen;
pub mod highlight;
pub mod provenance;
pub mod rerank;
pub mod service;
pub mod sql;
pub mod table;
pub mod utterance;

pub use error::{Error, Result};
pub use eval::{evaluate, result_equals, Denotation, EvalError, Scalar, ScalarOrigin};
pub use formula::{
    decompose, format_formula, parse_formula, typecheck, AggregateFn, CompareOp, Direction, Formula, ParseError,
    ResultType, TypeError,
};
pub use highlight::{
    highlight, highlight_with, render_html, sample_rows, AnnotationDocument, CellStyle, HighlightAnnotation,
    HighlightOptions, SamplingPolicy,
};
pub use provenance::{provenance_chain, record_sets, AggregateMark, ProvenanceChain, RecordSets};
pub use table::{infer_value, load_table, CellRef, CellValue, DateValue, Table, TableError, TableFormat};
pub use utterance::{utter, utter_candidates, Templates};
