use std::collections::HashSet;

use proptest::prelude::*;
use tweetclf::text::*;

/// Token-level transcription of the cleaning rules for simple inputs
/// (whitespace-separated tokens, emoji only as whole tokens).
fn oracle_clean(s: &str, stop: &HashSet<&str>) -> String {
    let mut out = Vec::new();
    for tok in s.split_whitespace() {
        let lower = tok.to_lowercase();
        if lower.starts_with("http://")
            || lower.starts_with("https://")
            || lower.starts_with("www.")
        {
            continue;
        }
        if tok.starts_with('@') {
            continue;
        }
        if tok.chars().all(|c| (c as u32) >= 0x1F000) {
            continue;
        }
        let kept: String = lower
            .chars()
            .filter(|&c| c != '\'')
            .map(|c| if c.is_alphanumeric() { c } else { ' ' })
            .collect();
        for w in kept.split_whitespace() {
            if !stop.contains(w) {
                out.push(w.to_string());
            }
        }
    }
    out.join(" ")
}

#[test]
fn cleaning_fixtures_match_rule_oracle() {
    let sw = StopWords::english();
    let words = sw.words();
    let stop: HashSet<&str> = words.iter().map(String::as_str).collect();
    let fixtures = [
        "Check THIS http://t.co/x @user 😀",
        "#Bully today",
        "the a an",
        "WWW.example.com is BAD!!! @someone 🤬",
        "you're not funny, #idiot 😂😂",
        "Muslims... and  Christians   are    people",
        "school bully at age 13 https://t.co/AbC",
        "don't @ me",
    ];
    for f in fixtures {
        assert_eq!(clean_text(f, &sw), oracle_clean(f, &stop), "{f}");
    }
    assert_eq!(
        clean_text("Check THIS http://t.co/x @user 😀", &sw),
        "check"
    );
    assert_eq!(clean_text("the a an", &sw), "");
    assert_eq!(clean_text("#Bully today", &sw), "bully today");
}

#[test]
fn tokenize_examples() {
    assert_eq!(tokenize("a b"), vec!["a", "b"]);
    assert!(tokenize("").is_empty());
    let sw = StopWords::from_words(["zzz"]);
    assert_eq!(tokenize(&clean_text("a  b", &sw)), vec!["a", "b"]);
}

#[test]
fn ingest_fixture_with_quotes_and_bad_rows() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    let mut bytes = b"tweet_text,cyberbullying_type\n\"hi, there\",age\n".to_vec();
    bytes.extend_from_slice(b"bad \xff\xfe utf8,gender\n");
    bytes.extend_from_slice(b"lonely\n");
    bytes.extend_from_slice(b"\"multi\nline\",religion\n");
    std::fs::write(&path, bytes).unwrap();
    let (recs, report) = ingest_csv(&path).unwrap();
    assert_eq!(recs.len(), 2);
    assert_eq!(recs[0].text, "hi, there");
    assert_eq!(recs[1].text, "multi\nline");
    assert_eq!(recs[1].line, 5);
    assert_eq!(report.skipped, 2);
    assert_eq!(
        report.problems.iter().map(|p| p.0).collect::<Vec<_>>(),
        vec![3, 4]
    );

    std::fs::write(&path, "body,label\nx,age\n").unwrap();
    assert!(matches!(
        ingest_csv(&path),
        Err(tweetclf::Error::MissingColumn(_))
    ));
}

#[test]
fn dedup_examples() {
    let (kept, removed) = deduplicate(vec!["A", "B", "A"], |s| s);
    assert_eq!((kept, removed), (vec!["A", "B"], 1));
    let (kept, removed) = deduplicate(vec!["x", "y"], |s| s);
    assert_eq!((kept.len(), removed), (2, 0));
}

#[test]
fn label_round_trip() {
    let map = LabelMap::default_map();
    let enc = map.encoder();
    assert_eq!(enc.len(), 5);
    for c in enc.classes() {
        assert_eq!(enc.decode(enc.encode(c).unwrap()), Some(c.as_str()));
    }
}

fn text_strategy() -> impl Strategy<Value = String> {
    let pieces = prop::collection::vec(
        prop_oneof![
            "[a-zA-Z]{1,8}",
            "[0-9]{1,3}",
            Just("the".to_string()),
            Just("Don't".to_string()),
            Just("http://t.co/abc".to_string()),
            Just("@user".to_string()),
            Just("#tag".to_string()),
            Just(":)".to_string()),
            Just("xD!".to_string()),
            Just("😀".to_string()),
            Just("👍🏽".to_string()),
            Just("¡olé!".to_string()),
            "[ -~]{1,6}",
            "\\PC{1,4}",
        ],
        0..12,
    );
    (
        pieces,
        prop::collection::vec(
            prop_oneof![Just(" "), Just("  "), Just("\t"), Just("\n"), Just("")],
            12,
        ),
    )
        .prop_map(|(p, seps)| {
            p.iter()
                .zip(seps.iter().cycle())
                .map(|(a, b)| format!("{a}{b}"))
                .collect()
        })
}

proptest! {
    #[test]
    fn clean_text_is_idempotent(s in text_strategy()) {
        let sw = StopWords::english();
        let once = clean_text(&s, &sw);
        prop_assert_eq!(clean_text(&once, &sw), once.clone());
        prop_assert!(!once.contains("  ") && once.trim() == once);
    }

    #[test]
    fn strip_noise_is_idempotent(s in text_strategy()) {
        let once = strip_noise(&s);
        prop_assert_eq!(strip_noise(&once), once);
    }

    #[test]
    fn dedup_matches_hash_set_oracle(texts in prop::collection::vec(text_strategy(), 0..30)) {
        let sw = StopWords::english();
        let cleaned: Vec<String> = texts.iter().map(|t| clean_text(t, &sw)).collect();
        let (kept, removed) = deduplicate(cleaned.clone(), |s| s);
        let distinct: HashSet<&String> = cleaned.iter().collect();
        prop_assert_eq!(kept.len(), distinct.len());
        prop_assert_eq!(removed, cleaned.len() - distinct.len());
        let unique: HashSet<&String> = kept.iter().collect();
        prop_assert_eq!(unique.len(), kept.len());
        // first occurrences, original order
        let mut seen = HashSet::new();
        let expected: Vec<&String> = cleaned.iter().filter(|s| seen.insert(*s)).collect();
        prop_assert_eq!(kept.iter().collect::<Vec<_>>(), expected);
    }

    #[test]
    fn ids_stay_in_range(s in text_strategy(), len in 1usize..40) {
        let q = quantize_chars(&s, 1014);
        prop_assert_eq!(q.len(), 1014);
        prop_assert!(q.iter().all(|&i| i <= 69));
        let sw = StopWords::english();
        let toks = tokenize(&clean_text(&s, &sw));
        let vocab = build_vocab([toks[..toks.len() / 2].to_vec()], 1);
        let ids = encode_words(&toks, &vocab, len);
        prop_assert_eq!(ids.len(), len);
        prop_assert!(ids.iter().all(|&i| i < vocab.len()));
    }

    // Per-class rounding moves a share by at most ~1/|test|, so the bound
    // needs a few hundred samples per class.
    #[test]
    fn split_is_stratified(counts in prop::collection::vec(150usize..1500, 2..6), seed in 0u64..1000) {
        let labels: Vec<usize> = counts.iter().enumerate().flat_map(|(c, &n)| std::iter::repeat_n(c, n)).collect();
        let total = labels.len() as f64;
        let (train, test) = split_train_test(labels.clone(), |&c| c, 0.8, seed).unwrap();
        prop_assert_eq!(train.len() + test.len(), labels.len());
        for (c, &n) in counts.iter().enumerate() {
            let whole = n as f64 / total;
            for part in [&train, &test] {
                let share = part.iter().filter(|&&x| x == c).count() as f64 / part.len() as f64;
                prop_assert!((share - whole).abs() <= 0.02, "class {} share {} vs {}", c, share, whole);
            }
        }
    }
}

#[test]
fn glove_fixture_hundred_dims() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("glove.txt");
    let values: Vec<f64> = (0..100).map(|i| (i as f64 - 50.0) / 64.0).collect();
    let line = |tok: &str| {
        format!(
            "{tok} {}\n",
            values
                .iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join(" ")
        )
    };
    std::fs::write(&path, line("hello") + &line("unused")).unwrap();
    let vocab = build_vocab([vec!["hello".to_string(), "absent".to_string()]], 1);
    let table = load_glove(&path, &vocab, 100, &mut tweetclf::RngState::new(5)).unwrap();
    let id = vocab.get("hello").unwrap();
    assert_eq!(&table.data()[id * 100..(id + 1) * 100], &values[..]);
    assert!(table.data()[..100].iter().all(|&v| v == 0.0));
    let again = load_glove(&path, &vocab, 100, &mut tweetclf::RngState::new(5)).unwrap();
    assert_eq!(table.data(), again.data());
    let other = load_glove(&path, &vocab, 100, &mut tweetclf::RngState::new(6)).unwrap();
    assert_ne!(table.data(), other.data());

    std::fs::write(&path, line("hello") + "short 1 2 3\n").unwrap();
    let err = load_glove(&path, &vocab, 100, &mut tweetclf::RngState::new(5)).unwrap_err();
    assert!(err.to_string().contains(":2:"), "{err}");
}
