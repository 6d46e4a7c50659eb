//! Fixture files and an in-process runner for the CLI tests.
#![allow(dead_code)]

use std::path::{Path, PathBuf};

pub const SOURCE_LABELS: [&str; 5] = [
    "age",
    "ethnicity",
    "gender",
    "religion",
    "other_cyberbullying",
];

const CLASS_WORDS: [[&str; 4]; 5] = [
    ["school", "kid", "teen", "grade"],
    ["race", "black", "white", "asian"],
    ["girl", "woman", "sexist", "joke"],
    ["muslim", "christian", "islam", "church"],
    ["bully", "troll", "block", "report"],
];

/// `per_class` rows per source label, each a short tweet built from the
/// class's own words plus a unique number, with some noise around it.
pub fn write_tweets(path: &Path, per_class: usize) {
    let mut w = String::from("tweet_text,cyberbullying_type\n");
    for i in 0..per_class {
        for (c, label) in SOURCE_LABELS.iter().enumerate() {
            let words = CLASS_WORDS[c];
            let text = format!(
                "\"@user{i} {} {} the {}, #{} n{i} http://t.co/{i}\"",
                words[i % 4],
                words[(i + 1) % 4].to_uppercase(),
                words[(i + 2) % 4],
                words[(i + 3) % 4]
            );
            w.push_str(&format!("{text},{label}\n"));
        }
    }
    w.push_str("\"a normal day\",not_cyberbullying\n");
    std::fs::write(path, w).unwrap();
}

pub struct Run {
    pub code: i32,
    pub stdout: String,
}

pub fn run(args: &[&str]) -> Run {
    let mut buf = Vec::new();
    let mut full = vec!["tweetclf"];
    full.extend_from_slice(args);
    let code = tweetclf_cli::run(full, &mut buf);
    Run {
        code,
        stdout: String::from_utf8(buf).unwrap(),
    }
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Prepares `per_class` rows per class with word length 6 into `dir/prep`.
pub fn prepared(dir: &Path, per_class: usize, seed: u64) -> PathBuf {
    let raw = dir.join("raw.csv");
    write_tweets(&raw, per_class);
    let prep = dir.join("prep");
    let r = run(&[
        "prepare",
        "--data",
        s(&raw),
        "--out",
        s(&prep),
        "--seed",
        &seed.to_string(),
        "--word-length",
        "6",
    ]);
    assert_eq!(r.code, 0, "{}", r.stdout);
    prep
}

pub fn read(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}
