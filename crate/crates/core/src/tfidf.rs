//! Sublinear TF-IDF with smoothed idf and L2 row normalization.
//!
//! weight(d, j) = (1 + ln tf) * idf[j],  idf[j] = ln((1 + N) / (1 + df_j)) + 1,
//! then each row is divided by its Euclidean norm.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;
use crate::textprep::{analyze, AnalyzerConfig};

pub const VECTORIZER_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct VectorizerModel {
    vocab: Vec<String>,
    index: HashMap<String, usize>,
    idf: Vec<f64>,
    train_doc_count: usize,
    config: AnalyzerConfig,
}

#[derive(Serialize, Deserialize)]
struct VectorizerFile {
    format_version: u32,
    analyzer: AnalyzerConfig,
    vocab: Vec<String>,
    idf: Vec<f64>,
    train_doc_count: usize,
}

pub fn smoothed_idf(n_docs: usize, df: usize) -> f64 {
    ((1.0 + n_docs as f64) / (1.0 + df as f64)).ln() + 1.0
}

/// Learns the vocabulary and idf weights from training documents only.
/// Texts are expected to be cleaned already.
pub fn fit_vectorizer(train: &Corpus, config: &AnalyzerConfig) -> Result<VectorizerModel> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::Data("cannot fit a vectorizer on an empty corpus".into()));
    }
    let per_doc: Vec<BTreeSet<String>> = train
        .documents()
        .par_iter()
        .map(|d| analyze(&d.text, config).into_iter().collect())
        .collect();
    let mut df: BTreeMap<String, usize> = BTreeMap::new();
    for tokens in per_doc {
        for t in tokens {
            *df.entry(t).or_insert(0) += 1;
        }
    }
    if df.is_empty() {
        return Err(Error::EmptyVocabulary);
    }
    let n = train.len();
    let (vocab, idf): (Vec<String>, Vec<f64>) = df.into_iter().map(|(t, d)| (t, smoothed_idf(n, d))).unzip();
    Ok(VectorizerModel::from_parts(vocab, idf, n, config.clone()))
}

impl VectorizerModel {
    fn from_parts(vocab: Vec<String>, idf: Vec<f64>, train_doc_count: usize, config: AnalyzerConfig) -> Self {
        let index = vocab.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Self {
            vocab,
            index,
            idf,
            train_doc_count,
            config,
        }
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    pub fn idf(&self) -> &[f64] {
        &self.idf
    }

    pub fn num_features(&self) -> usize {
        self.vocab.len()
    }

    pub fn train_doc_count(&self) -> usize {
        self.train_doc_count
    }

    pub fn config(&self) -> &AnalyzerConfig {
        &self.config
    }

    pub fn column(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    /// Normalized TF-IDF row for one cleaned text, as sorted `(col, value)`.
    pub fn transform_text(&self, text: &str) -> Vec<(usize, f64)> {
        let mut tf: HashMap<usize, u32> = HashMap::new();
        for token in analyze(text, &self.config) {
            if let Some(&j) = self.index.get(&token) {
                *tf.entry(j).or_insert(0) += 1;
            }
        }
        let mut row: Vec<(usize, f64)> = tf
            .into_iter()
            .map(|(j, count)| (j, (1.0 + (count as f64).ln()) * self.idf[j]))
            .collect();
        row.sort_by_key(|&(j, _)| j);
        let norm = row.iter().map(|&(_, v)| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            for (_, v) in &mut row {
                *v /= norm;
            }
        }
        row
    }

    pub fn transform(&self, docs: &Corpus) -> SparseMatrix {
        let rows: Vec<Vec<(usize, f64)>> = docs
            .documents()
            .par_iter()
            .map(|d| self.transform_text(&d.text))
            .collect();
        let mut m = SparseMatrix::empty(self.num_features());
        for row in &rows {
            m.push_sorted_row(row);
        }
        m
    }

    /// Column mask for a token set; tokens without a column are ignored.
    pub fn column_mask<'a, I>(&self, tokens: I) -> Vec<bool>
    where
        I: IntoIterator<Item = &'a String>,
    {
        let mut mask = vec![false; self.num_features()];
        for t in tokens {
            if let Some(j) = self.column(t) {
                mask[j] = true;
            }
        }
        mask
    }

    pub fn to_json(&self) -> String {
        let file = VectorizerFile {
            format_version: VECTORIZER_FORMAT_VERSION,
            analyzer: self.config.clone(),
            vocab: self.vocab.clone(),
            idf: self.idf.clone(),
            train_doc_count: self.train_doc_count,
        };
        serde_json::to_string(&file).expect("vectorizer serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::Corrupt {
            what: "vectorizer".into(),
            reason: e.to_string(),
        })?;
        let found = value
            .get("format_version")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| Error::Corrupt {
                what: "vectorizer".into(),
                reason: "missing format_version".into(),
            })? as u32;
        if found != VECTORIZER_FORMAT_VERSION {
            return Err(Error::Version {
                what: "vectorizer",
                found,
                expected: VECTORIZER_FORMAT_VERSION,
            });
        }
        let file: VectorizerFile = serde_json::from_value(value).map_err(|e| Error::Corrupt {
            what: "vectorizer".into(),
            reason: e.to_string(),
        })?;
        if file.vocab.len() != file.idf.len() {
            return Err(Error::Corrupt {
                what: "vectorizer".into(),
                reason: "vocab and idf lengths differ".into(),
            });
        }
        if file.vocab.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Corrupt {
                what: "vectorizer".into(),
                reason: "vocab is not strictly sorted".into(),
            });
        }
        Ok(Self::from_parts(
            file.vocab,
            file.idf,
            file.train_doc_count,
            file.analyzer,
        ))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// Removes every entry whose column belongs to a token in `tokens`. No
/// renormalization; the input is left untouched.
pub fn zero_columns<'a, I>(matrix: &SparseMatrix, tokens: I, model: &VectorizerModel) -> Result<SparseMatrix>
where
    I: IntoIterator<Item = &'a String>,
{
    if matrix.cols() != model.num_features() {
        return Err(Error::DimensionMismatch {
            expected: model.num_features(),
            actual: matrix.cols(),
        });
    }
    Ok(matrix.without_columns(&model.column_mask(tokens)))
}
