mod common;

use common::oracles::{provenance_fuzz, sampling_fuzz};
use qexplain_core::gen::CaseGenerator;
use qexplain_core::parse_formula;

#[test]
fn provenance_chain_is_ordered_and_recomputable() {
    assert_eq!(provenance_fuzz(2024, 1000), Ok(1000));
}

#[test]
fn samples_of_large_tables_have_the_three_row_shape() {
    assert_eq!(sampling_fuzz(99, 300), Ok(300));
}

#[test]
fn canonical_text_round_trips() {
    let mut g = CaseGenerator::new(5);
    for _ in 0..1000 {
        let f = g.any_formula(4);
        let text = f.to_string();
        let back = parse_formula(&text).unwrap_or_else(|e| panic!("{text}: {e}"));
        assert_eq!(back, f, "{text}");
        assert_eq!(back.to_string(), text);
    }
}
