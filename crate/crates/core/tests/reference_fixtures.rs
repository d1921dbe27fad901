//! Analyzer and stop-word projection checked against outputs frozen from
//! scikit-learn's default token pattern (`lowercase=False`).

use std::collections::BTreeSet;

use authorship_core::textprep::{analyze, bundled_stopwords, clean_text, normalize_unicode, AnalyzerConfig};
use serde::Deserialize;

#[derive(Deserialize)]
struct Case {
    text: String,
    tokens: Vec<String>,
}

#[test]
fn analyzer_matches_reference_tokens() {
    let cases: Vec<Case> = serde_json::from_str(include_str!("fixtures_analyzer.json")).unwrap();
    assert!(!cases.is_empty());
    let cfg = AnalyzerConfig::default();
    for case in &cases {
        assert_eq!(analyze(&case.text, &cfg), case.tokens, "text: {}", case.text);
        // Cleaning only removes characters the pattern already skips.
        assert_eq!(analyze(&clean_text(&case.text), &cfg), case.tokens);
    }
}

#[test]
fn bundled_list_projects_like_reference() {
    let expected: BTreeSet<String> = include_str!("fixtures_projected.txt")
        .lines()
        .map(normalize_unicode)
        .filter(|l| !l.is_empty())
        .collect();
    let set = bundled_stopwords(&AnalyzerConfig::default()).unwrap();
    assert_eq!(set.projected, expected);
    assert_eq!(set.projected.len(), 130);
    for t in ["মত", "আম", "অন"] {
        assert!(set.projected.contains(t));
    }
}
