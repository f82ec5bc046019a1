//! Independent recomputations used by property tests and the acceptance run.

use std::collections::BTreeSet;

use qexplain_core::gen::CaseGenerator;
use qexplain_core::provenance::output_provenance;
use qexplain_core::rerank::{objective, Candidate, Example, Hyperparameters, ModelState};
use qexplain_core::{
    decompose, provenance_chain, record_sets, sample_rows, CellRef, CellValue, Denotation, Formula, SamplingPolicy,
    Table,
};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const DIM: usize = 10;

/// Executed cells as the union of output cells over the formula and everything
/// reachable through `decompose`.
pub fn executed_oracle(f: &Formula, t: &Table) -> BTreeSet<CellRef> {
    let mut out = output_provenance(f, t).unwrap().0;
    for child in decompose(f) {
        out.extend(executed_oracle(&child, t));
    }
    out
}

/// Checks `cases` generated pairs; returns the first violation.
pub fn provenance_fuzz(seed: u64, cases: usize) -> Result<usize, String> {
    let mut g = CaseGenerator::new(seed);
    let mut checked = 0;
    while checked < cases {
        let (t, f) = g.case();
        let Ok(p) = provenance_chain(&f, &t) else { continue };
        checked += 1;
        if !p.is_ordered() {
            return Err(format!("unordered chain for {f}"));
        }
        if p.executed_cells != executed_oracle(&f, &t) {
            return Err(format!("executed cells differ from recomputation for {f}"));
        }
        let cols: BTreeSet<CellRef> = f.columns().iter().flat_map(|c| t.column_cells(c).unwrap()).collect();
        if p.column_cells != cols {
            return Err(format!("column cells differ for {f}"));
        }
    }
    Ok(checked)
}

/// Sampling shape on generated tables of 51..=110 rows, under both policies.
pub fn sampling_fuzz(seed: u64, cases: usize) -> Result<usize, String> {
    let mut g = CaseGenerator::new(seed);
    let mut checked = 0;
    while checked < cases {
        let t = g.table_sized(51 + checked % 60);
        let f = g.formula(&t);
        let Ok(p) = provenance_chain(&f, &t) else { continue };
        let r = record_sets(&p, &t);
        for policy in [
            SamplingPolicy::LowestIndex,
            SamplingPolicy::Seeded { seed: checked as u64 },
        ] {
            let s = sample_rows(&p, &t, policy);
            let bound = if f.has_difference() { 4 } else { 3 };
            if s.len() > bound {
                return Err(format!("{f}: {} rows", s.len()));
            }
            if !s.windows(2).all(|w| w[0] < w[1]) {
                return Err(format!("{f}: not ascending {s:?}"));
            }
            if !r.output.is_empty() && !s.iter().any(|x| r.output.contains(x)) {
                return Err(format!("{f}: misses output rows {s:?}"));
            }
        }
        checked += 1;
    }
    Ok(checked)
}

pub fn random_example(rng: &mut ChaCha8Rng, id: usize, annotated: bool) -> Example {
    let n = rng.gen_range(2..=7);
    let candidates: Vec<Candidate> = (0..n)
        .map(|_| {
            let answer = if rng.gen_bool(0.4) { "gold" } else { "other" };
            Candidate::new(
                Formula::lit_str(answer),
                (0..DIM).map(|_| rng.gen_range(-2.0..2.0)).collect(),
                Some(Denotation::Values(BTreeSet::from([CellValue::text(answer)]))),
            )
        })
        .collect();
    let annotations = if annotated {
        let mut a = BTreeSet::from([rng.gen_range(0..n)]);
        if rng.gen_bool(0.3) {
            a.insert(rng.gen_range(0..n));
        }
        a
    } else {
        BTreeSet::new()
    };
    Example {
        question_id: format!("q{id}"),
        question: String::new(),
        table_id: String::new(),
        gold: vec![CellValue::text("gold")],
        candidates,
        annotations,
    }
}

pub fn random_model(rng: &mut ChaCha8Rng) -> ModelState {
    let mut m = ModelState::zeros(DIM, Hyperparameters::default());
    m.theta = (0..DIM).map(|_| rng.gen_range(-1.0..1.0)).collect();
    m.hyper.lambda = rng.gen_range(0.0..0.3);
    m
}

/// Central differences of `objective`.
pub fn numeric_gradient(data: &[Example], m: &ModelState, h: f64) -> Vec<f64> {
    (0..m.dim())
        .map(|j| {
            let mut up = m.clone();
            let mut down = m.clone();
            up.theta[j] += h;
            down.theta[j] -= h;
            (objective(data, &up).unwrap() - objective(data, &down).unwrap()) / (2.0 * h)
        })
        .collect()
}

/// Largest relative deviation, with the scale floored at 1e-3.
pub fn max_rel_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(1e-3))
        .fold(0.0, f64::max)
}

/// 100×10 table: a Country column and nine integer columns.
pub fn wide_table() -> Table {
    let countries = ["Greece", "France", "China", "UK", "Brazil", "Japan", "Chad", "Peru"];
    let headers: Vec<String> = std::iter::once("Country".to_string())
        .chain((1..10).map(|i| format!("C{i}")))
        .collect();
    let rows: Vec<Vec<String>> = (0..100)
        .map(|r| {
            std::iter::once(countries[r % countries.len()].to_string())
                .chain((1..10).map(|c| ((r * 31 + c * 17) % 97).to_string()))
                .collect()
        })
        .collect();
    Table::from_strings("wide", &headers, &rows).unwrap()
}
