use criterion::{black_box, criterion_group, criterion_main, Criterion};
use qexplain_bench::wide_table;
use qexplain_core::{evaluate, highlight, parse_formula, utter};

const FORMULAS: &[&str] = &[
    "max(R[C3].Country.Greece)",
    "R[Country].argmax(Record, C5)",
    "count(C2.gt(40) n Country.China)",
    "sub(R[C4].Country.UK, R[C4].Country.Japan)",
    "mostfreq(R[Country].C1.lt(30), Country)",
];

fn bench(c: &mut Criterion) {
    let t = wide_table(100, 10);
    let fs: Vec<_> = FORMULAS.iter().map(|s| parse_formula(s).unwrap()).collect();
    c.bench_function("utter", |b| {
        b.iter(|| fs.iter().map(|f| utter(black_box(f)).len()).sum::<usize>())
    });
    c.bench_function("highlight", |b| {
        b.iter(|| fs.iter().filter_map(|f| highlight(black_box(f), &t).ok()).count())
    });
    c.bench_function("evaluate", |b| {
        b.iter(|| fs.iter().filter_map(|f| evaluate(black_box(f), &t).ok()).count())
    });
}

criterion_group!(benches, bench);
criterion_main!(benches);
