//! Seeded synthetic corpora with planted per-author stop-word habits.
//!
//! Every author draws content words from one shared pool, plus a few
//! weakly preferred content words. Each author also has one *signature*
//! stop-word that shows up in most of their documents. Ablating a
//! signature column should hurt mainly its own author's recall.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Corpus, Document};
use crate::error::{Error, Result};

const CONSONANTS: [char; 32] = [
    'ক', 'খ', 'গ', 'ঘ', 'ঙ', 'চ', 'ছ', 'জ', 'ঝ', 'ঞ', 'ট', 'ঠ', 'ড', 'ঢ', 'ণ', 'ত', 'থ', 'দ', 'ধ', 'ন', 'প', 'ফ', 'ব',
    'ভ', 'ম', 'য', 'র', 'ল', 'শ', 'ষ', 'স', 'হ',
];
const VOWEL_SIGN_AA: char = '\u{09BE}';
const VOWEL_SIGN_E: char = '\u{09C7}';

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub authors: usize,
    pub docs_per_author: usize,
    pub words_per_doc: usize,
    /// Probability that a document carries its author's signature word.
    pub signature_rate: f64,
    /// Signature occurrences per carrying document.
    pub signature_count: usize,
    pub content_pool: usize,
    pub shared_stopwords: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            authors: 10,
            docs_per_author: 40,
            words_per_doc: 120,
            signature_rate: 0.9,
            signature_count: 4,
            content_pool: 400,
            shared_stopwords: 12,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub corpus: Corpus,
    /// Stop-word list file contents, one surface form per line.
    pub stopword_list: String,
    /// Analyzer-visible signature token of each author, in author order.
    pub signatures: Vec<String>,
    /// Surface form of each signature as written in the text.
    pub signature_surfaces: Vec<String>,
}

fn word(rng: &mut ChaCha8Rng, len: usize) -> String {
    (0..len).map(|_| *CONSONANTS.choose(rng).unwrap()).collect()
}

fn unique_words(
    rng: &mut ChaCha8Rng,
    n: usize,
    len: std::ops::RangeInclusive<usize>,
    taken: &mut BTreeSet<String>,
) -> Vec<String> {
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let l = rng.random_range(len.clone());
        let w = word(rng, l);
        if taken.insert(w.clone()) {
            out.push(w);
        }
    }
    out
}

pub fn generate(spec: &SyntheticSpec) -> Result<SyntheticCorpus> {
    if spec.authors < 2 || spec.docs_per_author < 2 || spec.words_per_doc == 0 {
        return Err(Error::Config(
            "synthetic corpus needs ≥2 authors, ≥2 docs each and non-empty docs".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut taken = BTreeSet::new();
    // Two-consonant stems are reserved for stop-words; content words are longer.
    let signatures = unique_words(&mut rng, spec.authors, 2..=2, &mut taken);
    let shared = unique_words(&mut rng, spec.shared_stopwords, 2..=2, &mut taken);
    let content = unique_words(&mut rng, spec.content_pool, 3..=5, &mut taken);
    let signature_surfaces: Vec<String> = signatures.iter().map(|s| format!("{s}{VOWEL_SIGN_AA}")).collect();
    let shared_surfaces: Vec<String> = shared.iter().map(|s| format!("{s}{VOWEL_SIGN_E}")).collect();

    let authors: Vec<String> = (0..spec.authors).map(|a| format!("author{a:02}")).collect();
    let mut docs = Vec::with_capacity(spec.authors * spec.docs_per_author);
    for (a, author) in authors.iter().enumerate() {
        let preferred: Vec<&String> = content.iter().skip(a * 3).take(3).collect();
        for d in 0..spec.docs_per_author {
            let mut words: Vec<String> = Vec::with_capacity(spec.words_per_doc + spec.signature_count);
            for _ in 0..spec.words_per_doc {
                let r: f64 = rng.random();
                let w = if r < 0.25 {
                    shared_surfaces.choose(&mut rng).unwrap().clone()
                } else if r < 0.27 {
                    (*preferred.choose(&mut rng).unwrap()).clone()
                } else {
                    content.choose(&mut rng).unwrap().clone()
                };
                words.push(w);
            }
            if rng.random_bool(spec.signature_rate) {
                for _ in 0..spec.signature_count {
                    let at = rng.random_range(0..=words.len());
                    words.insert(at, signature_surfaces[a].clone());
                }
            }
            let mut text = String::new();
            for (i, w) in words.iter().enumerate() {
                if i > 0 {
                    text.push(' ');
                }
                text.push_str(w);
                if i % 11 == 10 {
                    text.push('।');
                }
            }
            docs.push(Document {
                id: format!("{author}/doc{d:04}.txt"),
                author: author.clone(),
                text,
                source: format!("{author}/doc{d:04}.txt"),
            });
        }
    }
    let corpus = Corpus::from_documents(docs)?;
    let mut stopword_list = String::from("# synthetic stop-word list\n");
    for s in signature_surfaces.iter().chain(&shared_surfaces) {
        stopword_list.push_str(s);
        stopword_list.push('\n');
    }
    Ok(SyntheticCorpus {
        corpus,
        stopword_list,
        signatures,
        signature_surfaces,
    })
}

impl SyntheticCorpus {
    /// Writes the corpus as `<root>/<author>/docNNNN.txt`. The stop-word
    /// list is left to the caller.
    pub fn write_author_dirs(&self, root: &Path) -> Result<()> {
        for doc in self.corpus.documents() {
            let path = root.join(&doc.id);
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
            }
            fs::write(&path, &doc.text).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textprep::{analyze, parse_stopwords, AnalyzerConfig};

    #[test]
    fn deterministic_and_shaped() {
        let spec = SyntheticSpec {
            authors: 3,
            docs_per_author: 4,
            ..SyntheticSpec::default()
        };
        let a = generate(&spec).unwrap();
        let b = generate(&spec).unwrap();
        assert_eq!(a.corpus, b.corpus);
        assert_eq!(a.corpus.len(), 12);
        assert_eq!(a.corpus.author_counts(), vec![4, 4, 4]);
    }

    #[test]
    fn signatures_project_to_analyzer_tokens() {
        let s = generate(&SyntheticSpec::default()).unwrap();
        let cfg = AnalyzerConfig::default();
        let set = parse_stopwords(&s.stopword_list, &cfg, "synthetic".into()).unwrap();
        for (sig, surface) in s.signatures.iter().zip(&s.signature_surfaces) {
            assert_eq!(analyze(surface, &cfg), vec![sig.clone()]);
            assert!(set.projected.contains(sig));
        }
    }
}
