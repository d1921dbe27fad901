//! Text cleaning, tokenization and stop-word list handling.
//!
//! The reference-compatible analyzer mirrors a `\w\w+`-style token pattern:
//! a token is a maximal run of letters and digits, and anything else
//! (whitespace, combining vowel signs, viramas, joiners) ends the run. For
//! Bangla this cuts words at every dependent vowel sign, which is how
//! `মতো` becomes `মত` and `অনেক` becomes `অন`.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use unicode_general_category::{get_general_category, GeneralCategory};
use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AnalyzerMode {
    ReferenceCompatible,
    Whitespace,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalyzerConfig {
    pub mode: AnalyzerMode,
    pub min_token_len: usize,
    /// Inclusive word n-gram range; `(1, 1)` is plain unigrams.
    #[serde(default = "default_ngram_range")]
    pub ngram_range: (usize, usize),
}

fn default_ngram_range() -> (usize, usize) {
    (1, 1)
}

impl Default for AnalyzerConfig {
    fn default() -> Self {
        Self::reference_compatible()
    }
}

impl AnalyzerConfig {
    pub fn reference_compatible() -> Self {
        Self {
            mode: AnalyzerMode::ReferenceCompatible,
            min_token_len: 2,
            ngram_range: (1, 1),
        }
    }

    pub fn whitespace() -> Self {
        Self {
            mode: AnalyzerMode::Whitespace,
            min_token_len: 1,
            ngram_range: (1, 1),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.min_token_len == 0 {
            return Err(Error::Config("min_token_len must be at least 1".into()));
        }
        let (lo, hi) = self.ngram_range;
        if lo == 0 || hi < lo {
            return Err(Error::Config(format!("invalid ngram_range ({lo}, {hi})")));
        }
        Ok(())
    }
}

/// Canonical composition (NFC).
pub fn normalize_unicode(text: &str) -> String {
    text.nfc().collect()
}

fn is_punct_or_symbol(c: char) -> bool {
    use GeneralCategory::*;
    matches!(
        get_general_category(c),
        ConnectorPunctuation
            | DashPunctuation
            | OpenPunctuation
            | ClosePunctuation
            | InitialPunctuation
            | FinalPunctuation
            | OtherPunctuation
            | MathSymbol
            | CurrencySymbol
            | ModifierSymbol
            | OtherSymbol
    )
}

fn is_word_char(c: char) -> bool {
    use GeneralCategory::*;
    matches!(
        get_general_category(c),
        UppercaseLetter
            | LowercaseLetter
            | TitlecaseLetter
            | ModifierLetter
            | OtherLetter
            | DecimalNumber
            | LetterNumber
            | OtherNumber
    )
}

/// Replaces every punctuation or symbol character (including danda and
/// double danda) with one space.
pub fn strip_punctuation(text: &str) -> String {
    text.chars()
        .map(|c| if is_punct_or_symbol(c) { ' ' } else { c })
        .collect()
}

/// NFC followed by punctuation stripping; the shared cleaning step for
/// every pipeline path.
pub fn clean_text(text: &str) -> String {
    strip_punctuation(&normalize_unicode(text))
}

pub fn tokenize_whitespace(text: &str) -> Vec<&str> {
    text.split_whitespace().collect()
}

fn letter_runs(text: &str, min_len: usize) -> Vec<String> {
    let mut out = Vec::new();
    let mut current = String::new();
    let mut len = 0usize;
    for c in text.chars() {
        if is_word_char(c) {
            current.push(c);
            len += 1;
        } else {
            if len >= min_len {
                out.push(std::mem::take(&mut current));
            } else {
                current.clear();
            }
            len = 0;
        }
    }
    if len >= min_len {
        out.push(current);
    }
    out
}

fn word_ngrams(tokens: Vec<String>, (lo, hi): (usize, usize)) -> Vec<String> {
    if lo == 1 && hi == 1 {
        return tokens;
    }
    let mut out = Vec::new();
    for n in lo..=hi {
        if n == 1 {
            out.extend(tokens.iter().cloned());
            continue;
        }
        for window in tokens.windows(n) {
            out.push(window.join(" "));
        }
    }
    out
}

/// Feature tokens for `text`, in order. Expects cleaned text.
pub fn analyze(text: &str, config: &AnalyzerConfig) -> Vec<String> {
    let unigrams = match config.mode {
        AnalyzerMode::ReferenceCompatible => letter_runs(text, config.min_token_len),
        AnalyzerMode::Whitespace => text
            .split_whitespace()
            .filter(|t| t.chars().count() >= config.min_token_len)
            .map(str::to_owned)
            .collect(),
    };
    word_ngrams(unigrams, config.ngram_range)
}

/// A stop-word list together with its analyzer projection.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StopwordSet {
    /// Surface forms, NFC-normalized and deduplicated.
    pub raw: BTreeSet<String>,
    /// Union of `analyze(entry)` over `raw`.
    pub projected: BTreeSet<String>,
    /// Raw entries whose projection is empty.
    pub unprojected: Vec<String>,
    pub source: PathBuf,
}

impl StopwordSet {
    /// Builds a set from in-memory entries. Blank entries are skipped.
    pub fn from_entries<I, S>(entries: I, config: &AnalyzerConfig, source: PathBuf) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        config.validate()?;
        let raw: BTreeSet<String> = entries
            .into_iter()
            .map(|e| normalize_unicode(e.as_ref().trim()))
            .filter(|e| !e.is_empty())
            .collect();
        if raw.is_empty() {
            return Err(Error::EmptyStopwords(source.display().to_string()));
        }
        let mut projected = BTreeSet::new();
        let mut unprojected = Vec::new();
        for entry in &raw {
            let tokens = analyze(&strip_punctuation(entry), config);
            if tokens.is_empty() {
                unprojected.push(entry.clone());
            }
            projected.extend(tokens);
        }
        Ok(Self {
            raw,
            projected,
            unprojected,
            source,
        })
    }

    pub fn contains_surface(&self, token: &str) -> bool {
        self.raw.contains(token)
    }
}

/// Reads a stop-word file: one entry per line, `#` comments and blank lines
/// ignored.
pub fn load_stopwords(path: &Path, config: &AnalyzerConfig) -> Result<StopwordSet> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_stopwords(&text, config, path.to_path_buf())
}

pub fn parse_stopwords(text: &str, config: &AnalyzerConfig, source: PathBuf) -> Result<StopwordSet> {
    let entries = text
        .lines()
        .map(|l| l.trim_start_matches('\u{feff}').trim())
        .filter(|l| !l.is_empty() && !l.starts_with('#'));
    StopwordSet::from_entries(entries, config, source)
}

/// The BNLP Bengali stop-word list shipped with this crate.
pub const BUNDLED_BENGALI_STOPWORDS: &str = include_str!("../data/bnlp_stopwords.txt");

pub fn bundled_stopwords(config: &AnalyzerConfig) -> Result<StopwordSet> {
    parse_stopwords(
        BUNDLED_BENGALI_STOPWORDS,
        config,
        PathBuf::from("<bundled:bnlp_stopwords.txt>"),
    )
}

/// Drops whitespace tokens whose surface form is a raw stop-word and
/// rejoins the rest with single spaces.
pub fn remove_stopwords_from_text(text: &str, stopwords: &StopwordSet) -> String {
    let kept: Vec<&str> = text
        .split_whitespace()
        .filter(|t| !stopwords.contains_surface(t))
        .collect();
    kept.join(" ")
}
