//! Frozen-model stop-word ablation.
//!
//! For every projected stop-word `w` the matching column of the test matrix
//! is removed, predictions are recomputed with the trained model left
//! untouched, and
//!
//! ```text
//! ΔRecall[w][a] = recall_baseline[a] − recall_without_w[a]
//! ```
//!
//! Positive values mean the token helps the model retrieve author `a`.
//! Rows are never renormalized after a column is removed.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::csv_field;
use crate::error::{Error, Result};
use crate::sparse::{dot_row, SparseMatrix};
use crate::svm::SvmModel;
use crate::textprep::StopwordSet;
use crate::tfidf::{zero_columns, VectorizerModel};

/// |Δ| below this counts as zero.
pub const ZERO_EPS: f64 = 1e-12;
pub const DEFAULT_THRESHOLD_PP: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecallVector {
    pub recall: Vec<f64>,
    pub support: Vec<usize>,
}

impl RecallVector {
    /// Authors with at least one test document.
    pub fn defined(&self, class: usize) -> bool {
        self.support[class] > 0
    }
}

fn recall_from(y_true: &[usize], y_pred: &[usize], k: usize) -> RecallVector {
    let mut hits = vec![0usize; k];
    let mut support = vec![0usize; k];
    for (&t, &p) in y_true.iter().zip(y_pred) {
        support[t] += 1;
        if t == p {
            hits[t] += 1;
        }
    }
    let recall = hits
        .iter()
        .zip(&support)
        .map(|(&h, &s)| if s == 0 { 0.0 } else { h as f64 / s as f64 })
        .collect();
    RecallVector { recall, support }
}

fn check_labels(model: &SvmModel, x_test: &SparseMatrix, y_test: &[usize]) -> Result<()> {
    if x_test.rows() != y_test.len() {
        return Err(Error::Data(format!(
            "{} test rows but {} labels",
            x_test.rows(),
            y_test.len()
        )));
    }
    let k = model.num_classes();
    if let Some(&label) = y_test.iter().find(|&&l| l >= k) {
        return Err(Error::LabelOutOfRange { label, classes: k });
    }
    Ok(())
}

/// Per-author recall of the frozen model on the unmodified test matrix.
pub fn baseline_recall(model: &SvmModel, x_test: &SparseMatrix, y_test: &[usize]) -> Result<RecallVector> {
    check_labels(model, x_test, y_test)?;
    let pred = model.predict(x_test)?;
    Ok(recall_from(y_test, &pred, model.num_classes()))
}

/// Per-author recall after removing the column of `token` from a copy of
/// the test matrix. Tokens outside the vocabulary leave it unchanged.
pub fn ablate_token(
    model: &SvmModel,
    x_test: &SparseMatrix,
    y_test: &[usize],
    token: &str,
    vectorizer: &VectorizerModel,
) -> Result<RecallVector> {
    check_labels(model, x_test, y_test)?;
    let ablated = zero_columns(x_test, [&token.to_string()], vectorizer)?;
    let pred = model.predict(&ablated)?;
    Ok(recall_from(y_test, &pred, model.num_classes()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaRecallMatrix {
    pub tokens: Vec<String>,
    pub authors: Vec<String>,
    /// Whether each token has a vocabulary column.
    pub in_vocab: Vec<bool>,
    pub baseline: RecallVector,
    /// Recall after ablating each token, `[token][author]`.
    pub ablated: Vec<Vec<f64>>,
    /// `baseline − ablated`, `[token][author]`, in recall units.
    pub delta: Vec<Vec<f64>>,
}

/// Predictions for every test row after dropping column `col`, recomputing
/// only rows that store a value there.
fn predictions_without(
    model: &SvmModel,
    x_test: &SparseMatrix,
    baseline_pred: &[usize],
    rows: &[usize],
    col: usize,
) -> Vec<usize> {
    let mut pred = baseline_pred.to_vec();
    let mut idx_buf = Vec::new();
    let mut val_buf = Vec::new();
    for &r in rows {
        let (idx, vals) = x_test.row(r);
        idx_buf.clear();
        val_buf.clear();
        for (&c, &v) in idx.iter().zip(vals) {
            if c != col {
                idx_buf.push(c);
                val_buf.push(v);
            }
        }
        let margins: Vec<f64> = model
            .machines
            .iter()
            .map(|m| dot_row(&idx_buf, &val_buf, &m.weights) + m.bias)
            .collect();
        pred[r] = model.vote(&margins);
    }
    pred
}

/// Δ-Recall for every projected stop-word, one row per token in sorted
/// order. `workers` caps the thread count; the result does not depend on it.
pub fn delta_recall_matrix(
    model: &SvmModel,
    x_test: &SparseMatrix,
    y_test: &[usize],
    stopwords: &StopwordSet,
    vectorizer: &VectorizerModel,
    workers: Option<usize>,
) -> Result<DeltaRecallMatrix> {
    check_labels(model, x_test, y_test)?;
    if x_test.cols() != vectorizer.num_features() || model.num_features != vectorizer.num_features() {
        return Err(Error::DimensionMismatch {
            expected: vectorizer.num_features(),
            actual: x_test.cols(),
        });
    }
    let k = model.num_classes();
    let baseline_pred = model.predict(x_test)?;
    let baseline = recall_from(y_test, &baseline_pred, k);
    let tokens: Vec<String> = stopwords.projected.iter().cloned().collect();
    let columns: Vec<Option<usize>> = tokens.iter().map(|t| vectorizer.column(t)).collect();
    let occupancy = x_test.column_occupancy();

    let sweep = || -> Vec<Vec<f64>> {
        columns
            .par_iter()
            .map(|col| match col {
                Some(j) if !occupancy[*j].is_empty() => {
                    let pred = predictions_without(model, x_test, &baseline_pred, &occupancy[*j], *j);
                    recall_from(y_test, &pred, k).recall
                }
                _ => baseline.recall.clone(),
            })
            .collect()
    };
    let ablated = match workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?
            .install(sweep),
        None => sweep(),
    };

    let delta = ablated
        .iter()
        .map(|row| row.iter().zip(&baseline.recall).map(|(a, b)| b - a).collect())
        .collect();
    Ok(DeltaRecallMatrix {
        tokens,
        authors: model.classes.clone(),
        in_vocab: columns.iter().map(Option::is_some).collect(),
        baseline,
        ablated,
        delta,
    })
}

impl DeltaRecallMatrix {
    pub fn delta_pp(&self, token: usize, author: usize) -> f64 {
        100.0 * self.delta[token][author]
    }

    /// Δ summed over authors, highest first; ties in token order.
    pub fn global_importance(&self) -> Vec<(String, f64)> {
        let mut out: Vec<(String, f64)> = self
            .tokens
            .iter()
            .zip(&self.delta)
            .map(|(t, row)| (t.clone(), row.iter().sum()))
            .collect();
        out.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        out
    }

    /// Token rows × author columns, values in percentage points.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("token");
        for a in &self.authors {
            out.push(',');
            out.push_str(&csv_field(a));
        }
        out.push('\n');
        for (t, token) in self.tokens.iter().enumerate() {
            out.push_str(&csv_field(token));
            for a in 0..self.authors.len() {
                write!(out, ",{}", self.delta_pp(t, a)).unwrap();
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenDelta {
    pub token: String,
    pub delta_pp: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuthorExtremes {
    pub author: String,
    /// False when the author has no test documents.
    pub defined: bool,
    /// Up to two tokens with the largest Δ ≥ +threshold.
    pub harmful: Vec<TokenDelta>,
    /// Up to two tokens with the most negative Δ ≤ −threshold.
    pub helpful: Vec<TokenDelta>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtremesReport {
    pub threshold_pp: f64,
    pub authors: Vec<AuthorExtremes>,
}

pub fn extremes_report(matrix: &DeltaRecallMatrix, threshold_pp: f64) -> ExtremesReport {
    let tol = 1e-9;
    let authors = (0..matrix.authors.len())
        .map(|a| {
            let defined = matrix.baseline.defined(a);
            let mut ranked: Vec<TokenDelta> = matrix
                .tokens
                .iter()
                .enumerate()
                .map(|(t, token)| TokenDelta {
                    token: token.clone(),
                    delta_pp: matrix.delta_pp(t, a),
                })
                .collect();
            let (mut harmful, mut helpful) = (Vec::new(), Vec::new());
            if defined {
                ranked.sort_by(|x, y| y.delta_pp.total_cmp(&x.delta_pp).then_with(|| x.token.cmp(&y.token)));
                harmful = ranked
                    .iter()
                    .filter(|d| d.delta_pp >= threshold_pp - tol)
                    .take(2)
                    .cloned()
                    .collect();
                ranked.sort_by(|x, y| x.delta_pp.total_cmp(&y.delta_pp).then_with(|| x.token.cmp(&y.token)));
                helpful = ranked
                    .iter()
                    .filter(|d| d.delta_pp <= -threshold_pp + tol)
                    .take(2)
                    .cloned()
                    .collect();
            }
            AuthorExtremes {
                author: matrix.authors[a].clone(),
                defined,
                harmful,
                helpful,
            }
        })
        .collect();
    ExtremesReport { threshold_pp, authors }
}

/// Markdown layout for extremes tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExtremesStyle {
    /// Two harmful and two helpful tokens per author, one-decimal pp.
    Detailed,
    /// One of each with a separate Δ column, two-decimal pp.
    Compact,
}

const DASH: &str = "—";

fn signed(v: f64, decimals: usize) -> String {
    format!("{v:+.decimals$}")
}

impl ExtremesReport {
    pub fn to_markdown(&self, style: ExtremesStyle) -> String {
        let mut out = String::new();
        match style {
            ExtremesStyle::Detailed => {
                out.push_str(
                    "| Author | Most harmful token (largest +Δ) | 2nd most harmful | \
                     Most helpful-to-remove token (most −Δ) | 2nd most helpful-to-remove |\n\
                     |---|---|---|---|---|\n",
                );
                let cell = |list: &[TokenDelta], i: usize| match list.get(i) {
                    Some(d) => format!("{} ({} pp)", d.token, signed(d.delta_pp, 1)),
                    None => DASH.to_string(),
                };
                for (i, a) in self.authors.iter().enumerate() {
                    writeln!(
                        out,
                        "| A{i} | {} | {} | {} | {} |",
                        cell(&a.harmful, 0),
                        cell(&a.harmful, 1),
                        cell(&a.helpful, 0),
                        cell(&a.helpful, 1)
                    )
                    .unwrap();
                }
            }
            ExtremesStyle::Compact => {
                out.push_str(
                    "| Author | Most harmful token (+Δ) | Δ (pp) | Most helpful-to-remove (−Δ) | Δ (pp) |\n\
                     |---|---|---|---|---|\n",
                );
                let pair = |list: &[TokenDelta]| match list.first() {
                    Some(d) => (d.token.clone(), signed(d.delta_pp, 2)),
                    None => (DASH.to_string(), DASH.to_string()),
                };
                for (i, a) in self.authors.iter().enumerate() {
                    let (ht, hv) = pair(&a.harmful);
                    let (pt, pv) = pair(&a.helpful);
                    writeln!(out, "| A{i} | {ht} | {hv} | {pt} | {pv} |").unwrap();
                }
            }
        }
        writeln!(
            out,
            "\n{DASH}: no token reaches |Δ| ≥ {} pp for that author.\n",
            self.threshold_pp
        )
        .unwrap();
        for (i, a) in self.authors.iter().enumerate() {
            let note = if a.defined { "" } else { " (no test documents)" };
            writeln!(out, "- A{i}: {}{note}", a.author).unwrap();
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxStats {
    pub count: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub lower_fence: f64,
    pub upper_fence: f64,
    pub outliers: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaDistribution {
    pub pairs: usize,
    pub positive: usize,
    pub negative: usize,
    pub zero: usize,
    pub positive_share: f64,
    pub negative_share: f64,
    pub zero_share: f64,
    /// Box statistics of non-zero |Δ| in pp; `None` when every Δ is zero.
    pub abs_nonzero_pp: Option<BoxStats>,
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn box_stats(values: &[f64]) -> Option<BoxStats> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let q1 = quantile(&v, 0.25);
    let q3 = quantile(&v, 0.75);
    let iqr = q3 - q1;
    let lower_fence = q1 - 1.5 * iqr;
    let upper_fence = q3 + 1.5 * iqr;
    Some(BoxStats {
        count: v.len(),
        min: v[0],
        q1,
        median: quantile(&v, 0.5),
        q3,
        max: v[v.len() - 1],
        lower_fence,
        upper_fence,
        outliers: v
            .iter()
            .copied()
            .filter(|&x| x < lower_fence || x > upper_fence)
            .collect(),
    })
}

/// Sign shares over all token-author pairs plus the spread of non-zero |Δ|.
pub fn distribution_report(matrix: &DeltaRecallMatrix) -> DeltaDistribution {
    let (mut positive, mut negative, mut zero) = (0, 0, 0);
    let mut abs_pp = Vec::new();
    for row in &matrix.delta {
        for &d in row {
            if d.abs() < ZERO_EPS {
                zero += 1;
            } else {
                if d > 0.0 {
                    positive += 1;
                } else {
                    negative += 1;
                }
                abs_pp.push(100.0 * d.abs());
            }
        }
    }
    let pairs = positive + negative + zero;
    let share = |n: usize| if pairs == 0 { 0.0 } else { n as f64 / pairs as f64 };
    DeltaDistribution {
        pairs,
        positive,
        negative,
        zero,
        positive_share: share(positive),
        negative_share: share(negative),
        zero_share: if pairs == 0 { 1.0 } else { share(zero) },
        abs_nonzero_pp: box_stats(&abs_pp),
    }
}

impl DeltaDistribution {
    pub fn to_markdown(&self) -> String {
        let mut out = String::from("| Sign | Pairs | Share |\n|---|---:|---:|\n");
        for (name, n, s) in [
            ("positive", self.positive, self.positive_share),
            ("negative", self.negative, self.negative_share),
            ("zero", self.zero, self.zero_share),
        ] {
            writeln!(out, "| {name} | {n} | {:.1}% |", 100.0 * s).unwrap();
        }
        match &self.abs_nonzero_pp {
            Some(b) => writeln!(
                out,
                "\nNon-zero |Δ| (pp): n={} min={:.2} q1={:.2} median={:.2} q3={:.2} max={:.2} outliers={}",
                b.count,
                b.min,
                b.q1,
                b.median,
                b.q3,
                b.max,
                b.outliers.len()
            )
            .unwrap(),
            None => out.push_str("\nNo non-zero Δ values.\n"),
        }
        out
    }
}
