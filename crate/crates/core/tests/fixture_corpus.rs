use gesture_asr::chat::{parse_corpus, parse_file, parse_named, serialize, Corpus, Token};
use gesture_asr::label::GestureLabel;
use gesture_asr::stats::{compute_stats, render, StatsFormat, StatsReport};
use gesture_asr::BigRational;
use num_traits::{ToPrimitive, Zero};
use proptest::prelude::*;
use std::path::{Path, PathBuf};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn corpus() -> Corpus {
    let c = parse_corpus(&fixtures().join("corpus")).unwrap();
    assert!(c.diagnostics.is_empty(), "{:?}", c.diagnostics);
    c
}

fn golden(name: &str) -> String {
    std::fs::read_to_string(fixtures().join("golden").join(name)).unwrap()
}

#[test]
fn corpus_has_the_required_coverage() {
    let c = corpus();
    assert!(c.files.len() >= 12);
    let tokens: Vec<&Token> = c
        .files
        .iter()
        .flat_map(|f| &f.utterances)
        .flat_map(|u| &u.tokens)
        .collect();
    for label in GestureLabel::NAMED {
        assert!(
            tokens
                .iter()
                .any(|t| matches!(t, Token::Gesture { label: l, .. } if *l == label)),
            "{label}"
        );
    }
    assert!(tokens.iter().any(|t| matches!(t, Token::Fragment { .. })));
    assert!(tokens.iter().any(|t| matches!(t, Token::Filler { .. })));
    assert!(tokens
        .iter()
        .any(|t| matches!(t, Token::Gesture { span: Some(_), .. })));
    assert!(c
        .files
        .iter()
        .flat_map(|f| &f.utterances)
        .any(|u| u.span.is_some()));

    let raw_double_colon = walk(&fixtures().join("corpus"))
        .iter()
        .any(|p| std::fs::read_to_string(p).unwrap().contains("[gesture::"));
    assert!(raw_double_colon);
}

fn walk(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            out.extend(walk(&p));
        } else if p.extension().is_some_and(|x| x == "cha") {
            out.push(p);
        }
    }
    out.sort();
    out
}

#[test]
fn every_fixture_round_trips() {
    let files = walk(&fixtures().join("corpus"));
    assert!(files.len() >= 12);
    for path in files {
        let text = std::fs::read_to_string(&path).unwrap();
        let first = parse_named(&path.display().to_string(), &text).unwrap();
        let written = serialize(&first);
        let second = parse_named(&path.display().to_string(), &written).unwrap();
        assert_eq!(first, second, "{}", path.display());
        assert_eq!(serialize(&second), written, "{}", path.display());
    }
}

#[test]
fn double_colon_is_written_with_one() {
    let text = std::fs::read_to_string(fixtures().join("corpus/aphasia/sandwich03.cha")).unwrap();
    let out = serialize(&parse_file(&text).unwrap());
    assert!(out.contains("[gesture:spreading]"));
    assert!(!out.contains("[gesture::"));
}

#[test]
fn stats_match_goldens_byte_for_byte() {
    let report = compute_stats::<f64>(&corpus());
    assert_eq!(
        render(&report, StatsFormat::Json).unwrap(),
        golden("stats.json")
    );
    assert_eq!(
        render(&report, StatsFormat::Csv).unwrap(),
        golden("stats.csv")
    );
    assert_eq!(
        render(&report, StatsFormat::Table).unwrap(),
        golden("stats.txt")
    );
}

#[test]
fn json_golden_round_trips() {
    let parsed: StatsReport<f64> = serde_json::from_str(&golden("stats.json")).unwrap();
    assert_eq!(parsed, compute_stats::<f64>(&corpus()));
}

fn weighted_mean_gap(report: &StatsReport<f64>) -> f64 {
    let (mut num, mut den) = (0.0, 0usize);
    for row in &report.rows {
        if let Some(d) = &row.duration {
            num += d.mean_s * d.samples as f64;
            den += d.samples;
        }
    }
    let total = report.total.duration.as_ref().unwrap();
    assert_eq!(den, total.samples);
    (num / den as f64 - total.mean_s).abs()
}

#[test]
fn total_row_is_the_weighted_mean() {
    let report = compute_stats::<f64>(&corpus());
    assert!(weighted_mean_gap(&report) < 1e-9);

    let exact = compute_stats::<BigRational>(&corpus());
    let mut num = BigRational::zero();
    let mut den = 0usize;
    for row in &exact.rows {
        let d = row.duration.as_ref().unwrap();
        num += d.mean_s.clone() * BigRational::from_integer(d.samples.into());
        den += d.samples;
    }
    let total = exact.total.duration.unwrap();
    assert_eq!(num / BigRational::from_integer(den.into()), total.mean_s);
    assert!((total.mean_s.to_f64().unwrap() - report.total.duration.unwrap().mean_s).abs() < 1e-12);
}

#[test]
fn total_counts_are_consistent() {
    let report = compute_stats::<f64>(&corpus());
    let utt: usize = report.rows.iter().map(|r| r.utterance_count).sum();
    let events: usize = report.rows.iter().map(|r| r.event_count).sum();
    assert_eq!(report.total.utterance_count, utt);
    assert_eq!(report.total.event_count, events);
    assert!(report.total.user_count <= report.rows.iter().map(|r| r.user_count).sum());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn stats_ignore_file_order(seed in any::<u64>()) {
        let mut c = corpus();
        let base = compute_stats::<BigRational>(&c);
        // Fisher-Yates with a small LCG so the permutation follows the seed.
        let mut s = seed;
        for i in (1..c.files.len()).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let j = (s >> 33) as usize % (i + 1);
            c.files.swap(i, j);
        }
        prop_assert_eq!(compute_stats::<BigRational>(&c), base);
    }

    #[test]
    fn adding_a_file_never_lowers_counts(
        labels in proptest::collection::vec(0usize..6, 1..5),
        start in 0u64..10_000,
        len in 1u64..5000,
    ) {
        let mut c = corpus();
        let before = compute_stats::<f64>(&c);
        let body: Vec<String> = labels
            .iter()
            .map(|i| format!("[gesture:{}]", GestureLabel::NAMED[*i]))
            .collect();
        let extra = format!("*PAR:\tso {} . \u{15}{}_{}\u{15}\n", body.join(" "), start, start + len);
        c.files.push(parse_named("extra.cha", &extra).unwrap());
        let after = compute_stats::<f64>(&c);
        prop_assert!(after.total.utterance_count >= before.total.utterance_count);
        prop_assert!(after.total.event_count == before.total.event_count + labels.len());
        for row in &before.rows {
            let new = after.rows.iter().find(|r| r.label == row.label).unwrap();
            prop_assert!(new.utterance_count >= row.utterance_count);
            prop_assert!(new.user_count >= row.user_count);
            prop_assert!(new.event_count >= row.event_count);
        }
        prop_assert!(weighted_mean_gap(&after) < 1e-9);
    }
}
