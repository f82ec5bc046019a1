use qexplain_core::sql::{difftest, SqlOptions};

#[test]
fn evaluator_and_sqlite_agree_on_random_cases() {
    let r = difftest(1000, 11, SqlOptions::default()).unwrap();
    for m in r.mismatches.iter().take(5) {
        eprintln!("{m:#?}");
    }
    assert_eq!(r.compared, 1000);
    assert!(r.mismatches.is_empty(), "{} mismatches", r.mismatches.len());
}

#[test]
fn paper_faithful_mismatches_are_most_frequent_ties() {
    let r = difftest(1000, 12, SqlOptions { paper_faithful: true }).unwrap();
    for m in r.mismatches.iter().filter(|m| !m.most_frequent_tie).take(5) {
        eprintln!("{m:#?}");
    }
    assert!(r.mismatches.iter().all(|m| m.most_frequent_tie));
}

#[test]
fn generator_covers_every_node_kind() {
    use qexplain_core::formula::NodeKind;
    use qexplain_core::gen::CaseGenerator;
    use std::collections::BTreeSet;
    let mut g = CaseGenerator::new(11);
    let mut seen = BTreeSet::new();
    for _ in 0..1000 {
        let (_, f) = g.case();
        f.walk(&mut |n| {
            seen.insert(format!("{:?}", n.kind()));
        });
    }
    assert_eq!(seen.len(), NodeKind::ALL.len(), "{seen:?}");
}
