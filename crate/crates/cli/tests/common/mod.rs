#![allow(dead_code)]

use std::fs;

use tempfile::TempDir;

pub const OLYMPICS: &str = "Year\tCountry\tCity\n1896\tGreece\tAthens\n1900\tFrance\tParis\n2004\tGreece\tAthens\n2008\tChina\tBeijing\n2012\tUK\tLondon\n2016\tBrazil\tRio de Janeiro\n";

pub const USL: &str = "Year\tLeague\tAttendance\tOpen Cup\n2002\tUSL A-League\t6,260\tDid not qualify\n2003\tUSL A-League\t5,871\tDid not qualify\n2004\tUSL A-League\t5,628\t4th Round\n2005\tUSL First Division\t6,028\t4th Round\n2006\tUSL First Division\t5,575\t3rd Round\n";

/// Data directory with a two-candidate question and a seven-candidate one.
pub fn data_dir() -> TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::create_dir(dir.path().join("tables")).unwrap();
    fs::write(dir.path().join("tables/olympics.tsv"), OLYMPICS).unwrap();
    fs::write(dir.path().join("tables/usl.tsv"), USL).unwrap();
    let manifest = serde_json::json!({"questions": [
        {
            "question_id": "usl",
            "question": "What was the last year the team was a part of the USL A-League?",
            "table_id": "usl",
            "gold": ["2004"],
            "candidates": [
                "max(R[Year].League.'USL A-League')",
                "min(R[Year].argmax(Record, `Open Cup`))"
            ]
        },
        {
            "question_id": "greece",
            "question": "Greece held its last Olympics in what year?",
            "table_id": "olympics",
            "gold": ["2004"],
            "candidates": [
                "max(R[Year].Country.Greece)",
                "min(R[Year].Country.Greece)",
                "count(Country.Greece)",
                "R[Year].argmax(Record, Year)",
                "R[Year].Country.Greece",
                "sum(R[Year].Country.Greece)",
                "sum(R[City].Record)"
            ]
        }
    ]});
    fs::write(dir.path().join("manifest.json"), manifest.to_string()).unwrap();
    dir
}
