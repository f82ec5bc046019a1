mod common;

use common::{drawn_mismatches, golden_mismatches, utterance_mismatch, CASES};

#[test]
fn golden_files_match() {
    let errs = golden_mismatches();
    assert!(errs.is_empty(), "{}", errs.join("\n"));
}

#[test]
fn highlights_match_drawn_examples() {
    let errs: Vec<String> = CASES.iter().flat_map(drawn_mismatches).collect();
    assert!(errs.is_empty(), "{}", errs.join("\n"));
}

#[test]
fn utterances_match_examples() {
    let errs: Vec<String> = CASES.iter().filter_map(utterance_mismatch).collect();
    assert!(errs.is_empty(), "{}", errs.join("\n"));
}

#[test]
fn large_table_is_sampled_to_three_rows() {
    let c = CASES.iter().find(|c| c.name == "sampled_max").unwrap();
    let t = common::table(c.table);
    assert!(t.row_count() > 50);
    let f = qexplain_core::parse_formula(c.formula).unwrap();
    let a = qexplain_core::highlight(&f, &t).unwrap();
    let rows = a.sampled_rows.clone().expect("sampled");
    assert_eq!(rows.len(), 3);
    let out: Vec<usize> = a
        .cells_with(qexplain_core::CellStyle::Colored)
        .iter()
        .map(|c| c.row)
        .collect();
    // 1986 is the maximal Madagascar row in the decade.
    assert_eq!(out, vec![31]);
    assert!(rows.contains(&31));
}
