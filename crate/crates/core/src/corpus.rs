//! Corpus loading, segmentation, stratified splitting and descriptive stats.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::textprep::{clean_text, StopwordSet};

pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub author: String,
    pub text: String,
    pub source: String,
}

/// Ordered documents plus the label list that fixes class indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    documents: Vec<Document>,
    authors: Vec<String>,
}

impl Corpus {
    /// Builds a corpus whose label list is the sorted set of document authors.
    pub fn from_documents(documents: Vec<Document>) -> Result<Self> {
        let authors: Vec<String> = documents
            .iter()
            .map(|d| d.author.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        if authors.len() < 2 {
            return Err(Error::TooFewAuthors(authors.len()));
        }
        Self::with_authors(documents, authors)
    }

    /// Builds a corpus over an explicit label list (used for subsets that
    /// must keep their parent's class indices).
    pub fn with_authors(documents: Vec<Document>, authors: Vec<String>) -> Result<Self> {
        if authors.len() < 2 {
            return Err(Error::TooFewAuthors(authors.len()));
        }
        let known: HashSet<&str> = authors.iter().map(String::as_str).collect();
        let mut ids = HashSet::with_capacity(documents.len());
        for doc in &documents {
            if doc.author.is_empty() {
                return Err(Error::MalformedRecord {
                    location: doc.source.clone(),
                    reason: "empty author".into(),
                });
            }
            if !known.contains(doc.author.as_str()) {
                return Err(Error::Data(format!(
                    "document {} has unknown author {:?}",
                    doc.id, doc.author
                )));
            }
            if !ids.insert(doc.id.as_str()) {
                return Err(Error::Data(format!("duplicate document id {:?}", doc.id)));
            }
        }
        Ok(Self { documents, authors })
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn authors(&self) -> &[String] {
        &self.authors
    }

    pub fn num_classes(&self) -> usize {
        self.authors.len()
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn label_of(&self, author: &str) -> Option<usize> {
        self.authors.binary_search_by(|a| a.as_str().cmp(author)).ok()
    }

    /// Class index of every document, in document order.
    pub fn labels(&self) -> Vec<usize> {
        self.documents
            .iter()
            .map(|d| self.label_of(&d.author).expect("validated at construction"))
            .collect()
    }

    pub fn texts(&self) -> impl Iterator<Item = &str> {
        self.documents.iter().map(|d| d.text.as_str())
    }

    /// Applies `f` to every text, keeping ids, authors and order.
    pub fn map_texts(&self, f: impl Fn(&str) -> String) -> Corpus {
        Corpus {
            documents: self
                .documents
                .iter()
                .map(|d| Document {
                    text: f(&d.text),
                    ..d.clone()
                })
                .collect(),
            authors: self.authors.clone(),
        }
    }

    /// Documents whose ids are in `ids`, in corpus order.
    pub fn select_ids(&self, ids: &[String]) -> Result<Corpus> {
        let wanted: HashSet<&str> = ids.iter().map(String::as_str).collect();
        let documents: Vec<Document> = self
            .documents
            .iter()
            .filter(|d| wanted.contains(d.id.as_str()))
            .cloned()
            .collect();
        if documents.len() != wanted.len() {
            let present: HashSet<&str> = documents.iter().map(|d| d.id.as_str()).collect();
            let missing = ids.iter().find(|id| !present.contains(id.as_str())).unwrap();
            return Err(Error::Data(format!("document id {missing:?} not in corpus")));
        }
        Corpus::with_authors(documents, self.authors.clone())
    }

    pub fn author_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.authors.len()];
        for label in self.labels() {
            counts[label] += 1;
        }
        counts
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorpusFormat {
    AuthorDirs,
    Jsonl,
    Csv,
}

impl FromStr for CorpusFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "author-dirs" => Ok(CorpusFormat::AuthorDirs),
            "jsonl" => Ok(CorpusFormat::Jsonl),
            "csv" => Ok(CorpusFormat::Csv),
            other => Err(Error::Config(format!(
                "unknown corpus format {other:?} (expected author-dirs, jsonl or csv)"
            ))),
        }
    }
}

#[derive(Deserialize)]
struct RawRecord {
    author: Option<String>,
    text: Option<String>,
    id: Option<String>,
}

fn check_record(rec: RawRecord, location: &str, default_id: String) -> Result<Document> {
    let malformed = |reason: &str| Error::MalformedRecord {
        location: location.to_string(),
        reason: reason.to_string(),
    };
    let author = rec.author.ok_or_else(|| malformed("missing \"author\""))?;
    let text = rec.text.ok_or_else(|| malformed("missing \"text\""))?;
    let author = author.trim().to_string();
    if author.is_empty() {
        return Err(malformed("empty author"));
    }
    if text.trim().is_empty() {
        return Err(malformed("empty text"));
    }
    Ok(Document {
        id: rec.id.unwrap_or(default_id),
        author,
        text,
        source: location.to_string(),
    })
}

fn load_author_dirs(root: &Path) -> Result<Vec<Document>> {
    let mut docs = Vec::new();
    let entries = fs::read_dir(root).map_err(|e| Error::io(root, e))?;
    let mut author_dirs: Vec<PathBuf> = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(root, e))?;
        let path = entry.path();
        if path.is_dir() {
            author_dirs.push(path);
        }
    }
    author_dirs.sort();
    for dir in author_dirs {
        let author = dir
            .file_name()
            .and_then(|n| n.to_str())
            .ok_or_else(|| Error::Data(format!("{}: author directory name is not UTF-8", dir.display())))?
            .to_string();
        let mut files: Vec<PathBuf> = Vec::new();
        for entry in fs::read_dir(&dir).map_err(|e| Error::io(&dir, e))? {
            let path = entry.map_err(|e| Error::io(&dir, e))?.path();
            if path.is_file() && path.extension().is_some_and(|ext| ext == "txt") {
                files.push(path);
            }
        }
        files.sort();
        for file in files {
            let bytes = fs::read(&file).map_err(|e| Error::io(&file, e))?;
            let location = file.display().to_string();
            let text = String::from_utf8(bytes).map_err(|_| Error::MalformedRecord {
                location: location.clone(),
                reason: "not valid UTF-8".into(),
            })?;
            let text = text.trim_start_matches('\u{feff}').to_string();
            let name = file.file_name().unwrap().to_string_lossy();
            let rec = RawRecord {
                author: Some(author.clone()),
                text: Some(text),
                id: None,
            };
            docs.push(check_record(rec, &location, format!("{author}/{name}"))?);
        }
    }
    Ok(docs)
}

fn load_jsonl(path: &Path) -> Result<Vec<Document>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut docs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = line.trim_start_matches('\u{feff}');
        if line.trim().is_empty() {
            continue;
        }
        let location = format!("{}:{line_no:08}", path.display());
        let rec: RawRecord = serde_json::from_str(line).map_err(|e| Error::MalformedRecord {
            location: format!("{} line {line_no}", path.display()),
            reason: e.to_string(),
        })?;
        let doc = check_record(rec, &location, format!("line-{line_no}")).map_err(|e| match e {
            Error::MalformedRecord { reason, .. } => Error::MalformedRecord {
                location: format!("{} line {line_no}", path.display()),
                reason,
            },
            other => other,
        })?;
        docs.push(doc);
    }
    Ok(docs)
}

fn load_csv(path: &Path) -> Result<Vec<Document>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::MalformedRecord {
        location: path.display().to_string(),
        reason: e.to_string(),
    })?;
    let mut docs = Vec::new();
    for (i, rec) in reader.deserialize::<RawRecord>().enumerate() {
        let row = i + 1;
        let location = format!("{} row {row}", path.display());
        let rec = rec.map_err(|e| Error::MalformedRecord {
            location: location.clone(),
            reason: e.to_string(),
        })?;
        let source = format!("{}:{row:08}", path.display());
        let doc = check_record(rec, &source, format!("row-{row}")).map_err(|e| match e {
            Error::MalformedRecord { reason, .. } => Error::MalformedRecord {
                location: location.clone(),
                reason,
            },
            other => other,
        })?;
        docs.push(doc);
    }
    Ok(docs)
}

/// Loads a labeled corpus. Documents come back ordered by source.
pub fn load_corpus(path: &Path, format: CorpusFormat) -> Result<Corpus> {
    if !path.exists() {
        return Err(Error::io(
            path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "no such file or directory"),
        ));
    }
    let mut docs = match format {
        CorpusFormat::AuthorDirs => load_author_dirs(path)?,
        CorpusFormat::Jsonl => load_jsonl(path)?,
        CorpusFormat::Csv => load_csv(path)?,
    };
    docs.sort_by(|a, b| a.source.cmp(&b.source));
    Corpus::from_documents(docs)
}

/// Cuts every document into consecutive whitespace-token windows of exactly
/// `words_per_segment` words, dropping any shorter remainder.
pub fn segment_documents(corpus: &Corpus, words_per_segment: usize) -> Result<Corpus> {
    if words_per_segment == 0 {
        return Err(Error::Config("words_per_segment must be at least 1".into()));
    }
    let mut out = Vec::new();
    for doc in corpus.documents() {
        let words: Vec<&str> = doc.text.split_whitespace().collect();
        for (idx, chunk) in words.chunks_exact(words_per_segment).enumerate() {
            out.push(Document {
                id: format!("{}#{idx:05}", doc.id),
                author: doc.author.clone(),
                text: chunk.join(" "),
                source: format!("{}#{idx:05}", doc.source),
            });
        }
    }
    Corpus::with_authors(out, corpus.authors().to_vec())
}

#[derive(Debug, Clone)]
pub struct SplitPair {
    pub train: Corpus,
    pub test: Corpus,
    pub seed: u64,
    pub ratio: f64,
}

/// Number of training documents for a class of size `n`.
pub fn train_quota(n: usize, ratio: f64) -> usize {
    // The epsilon keeps products such as 0.29 * 100 from flooring to 28.
    let q = (ratio * n as f64 + 1e-9).floor() as usize;
    q.clamp(1, n - 1)
}

/// Per-author seeded shuffle, then `train_quota` documents to train.
pub fn stratified_split(corpus: &Corpus, ratio: f64, seed: u64) -> Result<SplitPair> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::Config(format!("split ratio {ratio} must lie in (0, 1)")));
    }
    let labels = corpus.labels();
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); corpus.num_classes()];
    for (i, &label) in labels.iter().enumerate() {
        by_class[label].push(i);
    }
    for (class, members) in by_class.iter().enumerate() {
        if members.len() < 2 {
            return Err(Error::AuthorTooSmall {
                author: corpus.authors()[class].clone(),
                count: members.len(),
            });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut in_train = vec![false; corpus.len()];
    for members in &mut by_class {
        members.shuffle(&mut rng);
        let quota = train_quota(members.len(), ratio);
        for &i in &members[..quota] {
            in_train[i] = true;
        }
    }
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (doc, &t) in corpus.documents().iter().zip(&in_train) {
        if t {
            train.push(doc.clone());
        } else {
            test.push(doc.clone());
        }
    }
    Ok(SplitPair {
        train: Corpus::with_authors(train, corpus.authors().to_vec())?,
        test: Corpus::with_authors(test, corpus.authors().to_vec())?,
        seed,
        ratio,
    })
}

/// On-disk form of a split: the document ids on each side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub seed: u64,
    pub ratio: f64,
    pub fingerprint: String,
    pub authors: Vec<String>,
    pub train_ids: Vec<String>,
    pub test_ids: Vec<String>,
}

impl SplitPair {
    /// SHA-256 over seed, ratio and the ordered ids of both sides.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update(format!("seed={}\nratio={}\n", self.seed, self.ratio));
        for (tag, side) in [("train", &self.train), ("test", &self.test)] {
            h.update(tag.as_bytes());
            h.update(b"\n");
            for doc in side.documents() {
                h.update(doc.id.as_bytes());
                h.update(b"\0");
                h.update(doc.author.as_bytes());
                h.update(b"\n");
            }
        }
        hex::encode(h.finalize())
    }

    pub fn manifest(&self) -> SplitManifest {
        SplitManifest {
            seed: self.seed,
            ratio: self.ratio,
            fingerprint: self.fingerprint(),
            authors: self.train.authors().to_vec(),
            train_ids: self.train.documents().iter().map(|d| d.id.clone()).collect(),
            test_ids: self.test.documents().iter().map(|d| d.id.clone()).collect(),
        }
    }
}

impl SplitManifest {
    /// Re-materializes the split against `corpus`, checking the fingerprint.
    pub fn apply(&self, corpus: &Corpus) -> Result<SplitPair> {
        if corpus.authors() != self.authors.as_slice() {
            return Err(Error::Data("split manifest authors do not match corpus".into()));
        }
        let pair = SplitPair {
            train: corpus.select_ids(&self.train_ids)?,
            test: corpus.select_ids(&self.test_ids)?,
            seed: self.seed,
            ratio: self.ratio,
        };
        let fp = pair.fingerprint();
        if fp != self.fingerprint {
            return Err(Error::Data(format!(
                "split fingerprint mismatch: manifest {} vs corpus {}",
                self.fingerprint, fp
            )));
        }
        Ok(pair)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuthorStats {
    pub author: String,
    pub sample_count: usize,
    pub total_words: usize,
    pub stopword_count: usize,
    pub stopword_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub rows: Vec<AuthorStats>,
    pub mean_sample_count: f64,
}

/// Word and stop-word totals per author over cleaned whitespace tokens.
pub fn corpus_stats(corpus: &Corpus, stopwords: &StopwordSet) -> CorpusStats {
    let mut acc: BTreeMap<&str, (usize, usize, usize)> =
        corpus.authors().iter().map(|a| (a.as_str(), (0, 0, 0))).collect();
    for doc in corpus.documents() {
        let cleaned = clean_text(&doc.text);
        let entry = acc.get_mut(doc.author.as_str()).expect("validated author");
        entry.0 += 1;
        for token in cleaned.split_whitespace() {
            entry.1 += 1;
            if stopwords.contains_surface(token) {
                entry.2 += 1;
            }
        }
    }
    let rows: Vec<AuthorStats> = acc
        .into_iter()
        .map(|(author, (samples, words, stops))| AuthorStats {
            author: author.to_string(),
            sample_count: samples,
            total_words: words,
            stopword_count: stops,
            stopword_pct: if words == 0 {
                0.0
            } else {
                100.0 * stops as f64 / words as f64
            },
        })
        .collect();
    let mean_sample_count = rows.iter().map(|r| r.sample_count as f64).sum::<f64>() / rows.len() as f64;
    CorpusStats {
        rows,
        mean_sample_count,
    }
}

impl CorpusStats {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("author_id,author,sample_count,total_words,stopword_count,stopword_pct\n");
        for (i, r) in self.rows.iter().enumerate() {
            writeln!(
                out,
                "A{i},{},{},{},{},{}",
                csv_field(&r.author),
                r.sample_count,
                r.total_words,
                r.stopword_count,
                r.stopword_pct
            )
            .unwrap();
        }
        out
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::from(
            "| Author Id | Author | Samples | Total_Words | Stopword_Count | Stopword_% |\n\
             |---|---|---:|---:|---:|---:|\n",
        );
        for (i, r) in self.rows.iter().enumerate() {
            writeln!(
                out,
                "| A{i} | {} | {} | {} | {} | {:.3} |",
                r.author, r.sample_count, r.total_words, r.stopword_count, r.stopword_pct
            )
            .unwrap();
        }
        writeln!(out, "\nMean samples per author: {:.1}", self.mean_sample_count).unwrap();
        out
    }
}

pub(crate) fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
