//! End-to-end runs: one frozen split, the stop-words-retained and
//! stop-words-removed variants, optional frozen-model ablation, and every
//! emitted artifact.
//!
//! Run directory layout:
//!
//! ```text
//! <output_dir>/
//!   config.json  split.json  record.json  summary.md
//!   retained/  vectorizer.json model.json metrics.json metrics.md per_class.csv confusion.csv
//!   removed/   ... same, plus zeroed_tokens.txt
//!   ablation/  delta_recall.csv delta_recall.json extremes.json extremes.md
//!              distribution.json distribution.md abs_delta_pp.csv sign_shares.csv
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ablation::{
    delta_recall_matrix, distribution_report, extremes_report, DeltaDistribution, DeltaRecallMatrix, ExtremesReport,
    ExtremesStyle, DEFAULT_THRESHOLD_PP,
};
use crate::corpus::{
    corpus_stats, load_corpus, segment_documents, stratified_split, Corpus, CorpusFormat, CorpusStats, SplitManifest,
    SplitPair, DEFAULT_SEED,
};
use crate::error::{Error, Result};
use crate::metrics::{confusion_matrix, delta_f1, metrics, ConfusionMatrix, MetricsReport};
use crate::sparse::SparseMatrix;
use crate::svm::{train_svm, SvmConfig, SvmModel};
use crate::textprep::{
    bundled_stopwords, clean_text, load_stopwords, remove_stopwords_from_text, AnalyzerConfig, StopwordSet,
};
use crate::tfidf::{fit_vectorizer, zero_columns, VectorizerModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Retained,
    Removed,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Retained => "retained",
            Variant::Removed => "removed",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "retained" => Ok(Variant::Retained),
            "removed" => Ok(Variant::Removed),
            other => Err(Error::Config(format!("unknown variant {other:?}"))),
        }
    }
}

/// How the removed variant drops stop-words.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RemovalMode {
    /// Zero the projected stop-word columns of the TF-IDF matrices.
    Columns,
    /// Delete surface stop-words from the text and refit the vectorizer.
    Text,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub path: PathBuf,
    pub format: CorpusFormat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitConfig {
    pub ratio: f64,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            ratio: 0.8,
            seed: DEFAULT_SEED,
        }
    }
}

fn default_variants() -> Vec<Variant> {
    vec![Variant::Retained, Variant::Removed]
}

fn default_removal() -> RemovalMode {
    RemovalMode::Columns
}

fn default_threshold() -> f64 {
    DEFAULT_THRESHOLD_PP
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("run")
}

fn default_style() -> ExtremesStyle {
    ExtremesStyle::Detailed
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dataset: DatasetConfig,
    /// Stop-word list; the bundled Bengali list when absent.
    #[serde(default)]
    pub stopwords: Option<PathBuf>,
    #[serde(default)]
    pub segment_words: Option<usize>,
    #[serde(default)]
    pub split: SplitConfig,
    #[serde(default)]
    pub analyzer: AnalyzerConfig,
    #[serde(default)]
    pub svm: SvmConfig,
    #[serde(default = "default_variants")]
    pub variants: Vec<Variant>,
    #[serde(default = "default_removal")]
    pub removal: RemovalMode,
    /// Run the frozen-model ablation on the retained variant.
    #[serde(default)]
    pub ablation: bool,
    #[serde(default = "default_threshold")]
    pub ablation_threshold_pp: f64,
    #[serde(default = "default_style")]
    pub extremes_style: ExtremesStyle,
    /// Thread cap for parallel stages; never changes results.
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn new(dataset: PathBuf, format: CorpusFormat, output_dir: PathBuf) -> Self {
        Self {
            dataset: DatasetConfig { path: dataset, format },
            stopwords: None,
            segment_words: None,
            split: SplitConfig::default(),
            analyzer: AnalyzerConfig::default(),
            svm: SvmConfig::default(),
            variants: default_variants(),
            removal: default_removal(),
            ablation: false,
            ablation_threshold_pp: DEFAULT_THRESHOLD_PP,
            extremes_style: default_style(),
            workers: None,
            output_dir,
        }
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        if self.variants.is_empty() {
            return Err(Error::Config("at least one variant is required".into()));
        }
        if !(self.split.ratio > 0.0 && self.split.ratio < 1.0) {
            return Err(Error::Config(format!(
                "split ratio {} must lie in (0, 1)",
                self.split.ratio
            )));
        }
        if self.segment_words == Some(0) {
            return Err(Error::Config("segment_words must be at least 1".into()));
        }
        if self.ablation && !self.variants.contains(&Variant::Retained) {
            return Err(Error::Config("ablation needs the retained variant".into()));
        }
        if self.ablation_threshold_pp.is_nan() || self.ablation_threshold_pp < 0.0 {
            return Err(Error::Config("ablation_threshold_pp must be non-negative".into()));
        }
        self.analyzer.validate()?;
        self.svm.validate()
    }

    pub fn load_stopwords(&self) -> Result<StopwordSet> {
        match &self.stopwords {
            Some(path) => load_stopwords(path, &self.analyzer),
            None => bundled_stopwords(&self.analyzer),
        }
    }

    /// Loads, optionally segments, and cleans the dataset.
    pub fn prepare_corpus(&self) -> Result<Corpus> {
        let raw = self.load_raw_corpus()?;
        Ok(raw.map_texts(clean_text))
    }

    /// Loaded and optionally segmented, but not cleaned.
    pub fn load_raw_corpus(&self) -> Result<Corpus> {
        let corpus = load_corpus(&self.dataset.path, self.dataset.format)?;
        match self.segment_words {
            Some(n) => segment_documents(&corpus, n),
            None => Ok(corpus),
        }
    }
}

/// Everything one trained variant produces.
#[derive(Debug, Clone)]
pub struct VariantOutcome {
    pub variant: Variant,
    pub vectorizer: VectorizerModel,
    pub model: SvmModel,
    pub x_test: SparseMatrix,
    pub y_test: Vec<usize>,
    pub predictions: Vec<usize>,
    pub confusion: ConfusionMatrix,
    pub report: MetricsReport,
    /// Tokens whose columns were zeroed (columns removal only).
    pub zeroed_tokens: Vec<String>,
}

/// Fits the vectorizer on the training side and builds both matrices for a
/// variant, before any SVM training.
pub fn build_features(
    split: &SplitPair,
    stopwords: &StopwordSet,
    analyzer: &AnalyzerConfig,
    variant: Variant,
    removal: RemovalMode,
) -> Result<(VectorizerModel, SparseMatrix, SparseMatrix, Vec<String>)> {
    match (variant, removal) {
        (Variant::Retained, _) => {
            let v = fit_vectorizer(&split.train, analyzer)?;
            let (xtr, xte) = (v.transform(&split.train), v.transform(&split.test));
            Ok((v, xtr, xte, Vec::new()))
        }
        (Variant::Removed, RemovalMode::Columns) => {
            let v = fit_vectorizer(&split.train, analyzer)?;
            let xtr = zero_columns(&v.transform(&split.train), &stopwords.projected, &v)?;
            let xte = zero_columns(&v.transform(&split.test), &stopwords.projected, &v)?;
            let zeroed = stopwords
                .projected
                .iter()
                .filter(|t| v.column(t).is_some())
                .cloned()
                .collect();
            Ok((v, xtr, xte, zeroed))
        }
        (Variant::Removed, RemovalMode::Text) => {
            let strip = |c: &Corpus| c.map_texts(|t| remove_stopwords_from_text(t, stopwords));
            let (train, test) = (strip(&split.train), strip(&split.test));
            let v = fit_vectorizer(&train, analyzer)?;
            let (xtr, xte) = (v.transform(&train), v.transform(&test));
            Ok((v, xtr, xte, Vec::new()))
        }
    }
}

/// Features for unseen documents under an already-fitted variant's vectorizer.
pub fn transform_for_variant(
    vectorizer: &VectorizerModel,
    docs: &Corpus,
    stopwords: &StopwordSet,
    variant: Variant,
    removal: RemovalMode,
) -> Result<SparseMatrix> {
    match (variant, removal) {
        (Variant::Retained, _) => Ok(vectorizer.transform(docs)),
        (Variant::Removed, RemovalMode::Columns) => {
            zero_columns(&vectorizer.transform(docs), &stopwords.projected, vectorizer)
        }
        (Variant::Removed, RemovalMode::Text) => {
            Ok(vectorizer.transform(&docs.map_texts(|t| remove_stopwords_from_text(t, stopwords))))
        }
    }
}

pub fn train_and_evaluate(
    split: &SplitPair,
    stopwords: &StopwordSet,
    config: &ExperimentConfig,
    variant: Variant,
) -> Result<VariantOutcome> {
    let (vectorizer, x_train, x_test, zeroed_tokens) =
        build_features(split, stopwords, &config.analyzer, variant, config.removal)
            .map_err(|e| e.at_stage("vectorize"))?;
    let y_train = split.train.labels();
    let y_test = split.test.labels();
    let model = train_svm(&x_train, &y_train, split.train.authors(), &config.svm).map_err(|e| e.at_stage("train"))?;
    let predictions = model.predict(&x_test).map_err(|e| e.at_stage("evaluate"))?;
    let confusion =
        confusion_matrix(&y_test, &predictions, split.test.authors()).map_err(|e| e.at_stage("evaluate"))?;
    let report = metrics(&confusion).map_err(|e| e.at_stage("evaluate"))?;
    Ok(VariantOutcome {
        variant,
        vectorizer,
        model,
        x_test,
        y_test,
        predictions,
        confusion,
        report,
        zeroed_tokens,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantRecord {
    pub variant: Variant,
    pub split_fingerprint: String,
    pub accuracy: f64,
    pub macro_f1: f64,
    pub converged: bool,
    pub max_epochs: usize,
    pub model_path: PathBuf,
    pub vectorizer_path: PathBuf,
    pub metrics_path: PathBuf,
    pub confusion_path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRecord {
    pub tokens: usize,
    pub tokens_in_vocab: usize,
    pub model_digest: String,
    pub vectorizer_digest: String,
    pub matrix_csv: PathBuf,
    pub matrix_json: PathBuf,
    pub extremes_json: PathBuf,
    pub extremes_md: PathBuf,
    pub distribution_json: PathBuf,
    pub distribution_md: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSummary {
    pub classes: usize,
    pub train_docs: usize,
    pub test_docs: usize,
    pub train_per_author: Vec<usize>,
    pub test_per_author: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config: ExperimentConfig,
    pub split_fingerprint: String,
    pub split: SplitSummary,
    pub variants: Vec<VariantRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_f1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ablation: Option<AblationRecord>,
    /// Wall-clock seconds per stage; excluded from the digest.
    pub timings: BTreeMap<String, f64>,
}

impl RunRecord {
    /// SHA-256 of the record without timings.
    pub fn digest(&self) -> String {
        let mut clean = self.clone();
        clean.timings.clear();
        let json = serde_json::to_string(&clean).expect("record serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    pub fn variant(&self, v: Variant) -> Option<&VariantRecord> {
        self.variants.iter().find(|r| r.variant == v)
    }

    pub fn load(run_dir: &Path) -> Result<Self> {
        let path = run_dir.join("record.json");
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Corrupt {
            what: path.display().to_string(),
            reason: e.to_string(),
        })
    }
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write(path, serde_json::to_string_pretty(value).expect("serializable") + "\n")
}

fn sha256_hex(s: &str) -> String {
    hex::encode(Sha256::digest(s.as_bytes()))
}

fn write_variant(dir: &Path, outcome: &VariantOutcome, fingerprint: &str) -> Result<VariantRecord> {
    let name = outcome.variant.name();
    let sub = dir.join(name);
    let rel = |f: &str| PathBuf::from(name).join(f);
    write(&sub.join("vectorizer.json"), outcome.vectorizer.to_json())?;
    write(&sub.join("model.json"), outcome.model.to_json())?;
    write_json(&sub.join("metrics.json"), &outcome.report)?;
    write(&sub.join("metrics.md"), outcome.report.to_markdown())?;
    write(&sub.join("per_class.csv"), outcome.report.per_class_csv())?;
    write(&sub.join("confusion.csv"), outcome.confusion.to_csv())?;
    write_json(&sub.join("confusion.json"), &outcome.confusion)?;
    if outcome.variant == Variant::Removed {
        let mut list = outcome.zeroed_tokens.join("\n");
        list.push('\n');
        write(&sub.join("zeroed_tokens.txt"), list)?;
    }
    Ok(VariantRecord {
        variant: outcome.variant,
        split_fingerprint: fingerprint.to_string(),
        accuracy: outcome.report.accuracy,
        macro_f1: outcome.report.macro_avg.f1,
        converged: outcome.model.all_converged(),
        max_epochs: outcome
            .model
            .machines
            .iter()
            .map(|m| m.report.epochs)
            .max()
            .unwrap_or(0),
        model_path: rel("model.json"),
        vectorizer_path: rel("vectorizer.json"),
        metrics_path: rel("metrics.json"),
        confusion_path: rel("confusion.csv"),
    })
}

/// Everything the ablation stage needs, already in memory.
pub struct FrozenArtifacts<'a> {
    pub model: &'a SvmModel,
    pub vectorizer: &'a VectorizerModel,
    pub x_test: &'a SparseMatrix,
    pub y_test: &'a [usize],
}

/// Output of one ablation sweep.
pub struct AblationOutcome {
    pub matrix: DeltaRecallMatrix,
    pub extremes: ExtremesReport,
    pub distribution: DeltaDistribution,
}

/// Runs the sweep and verifies the frozen artifacts are unchanged by it.
pub fn ablate(
    frozen: &FrozenArtifacts<'_>,
    stopwords: &StopwordSet,
    threshold_pp: f64,
    workers: Option<usize>,
) -> Result<(AblationOutcome, String, String)> {
    let model_before = sha256_hex(&frozen.model.to_json());
    let vec_before = sha256_hex(&frozen.vectorizer.to_json());
    let matrix = delta_recall_matrix(
        frozen.model,
        frozen.x_test,
        frozen.y_test,
        stopwords,
        frozen.vectorizer,
        workers,
    )?;
    let model_after = sha256_hex(&frozen.model.to_json());
    let vec_after = sha256_hex(&frozen.vectorizer.to_json());
    if model_before != model_after || vec_before != vec_after {
        return Err(Error::Data("frozen model or vectorizer changed during ablation".into()));
    }
    let extremes = extremes_report(&matrix, threshold_pp);
    let distribution = distribution_report(&matrix);
    Ok((
        AblationOutcome {
            matrix,
            extremes,
            distribution,
        },
        model_before,
        vec_before,
    ))
}

fn write_ablation(
    dir: &Path,
    outcome: &AblationOutcome,
    style: ExtremesStyle,
    model_digest: String,
    vectorizer_digest: String,
) -> Result<AblationRecord> {
    let sub = dir.join("ablation");
    let rel = |f: &str| PathBuf::from("ablation").join(f);
    write(&sub.join("delta_recall.csv"), outcome.matrix.to_csv())?;
    write_json(&sub.join("delta_recall.json"), &outcome.matrix)?;
    write_json(&sub.join("extremes.json"), &outcome.extremes)?;
    write(&sub.join("extremes.md"), outcome.extremes.to_markdown(style))?;
    write_json(&sub.join("distribution.json"), &outcome.distribution)?;
    write(&sub.join("distribution.md"), outcome.distribution.to_markdown())?;

    let mut abs = String::from("token,author,abs_delta_pp\n");
    for (t, token) in outcome.matrix.tokens.iter().enumerate() {
        for (a, author) in outcome.matrix.authors.iter().enumerate() {
            let v = outcome.matrix.delta_pp(t, a).abs();
            if v >= 100.0 * crate::ablation::ZERO_EPS {
                writeln!(
                    abs,
                    "{},{},{v}",
                    crate::corpus::csv_field(token),
                    crate::corpus::csv_field(author)
                )
                .unwrap();
            }
        }
    }
    write(&sub.join("abs_delta_pp.csv"), abs)?;
    let d = &outcome.distribution;
    write(
        &sub.join("sign_shares.csv"),
        format!(
            "sign,pairs,share\npositive,{},{}\nnegative,{},{}\nzero,{},{}\n",
            d.positive, d.positive_share, d.negative, d.negative_share, d.zero, d.zero_share
        ),
    )?;
    Ok(AblationRecord {
        tokens: outcome.matrix.tokens.len(),
        tokens_in_vocab: outcome.matrix.in_vocab.iter().filter(|&&b| b).count(),
        model_digest,
        vectorizer_digest,
        matrix_csv: rel("delta_recall.csv"),
        matrix_json: rel("delta_recall.json"),
        extremes_json: rel("extremes.json"),
        extremes_md: rel("extremes.md"),
        distribution_json: rel("distribution.json"),
        distribution_md: rel("distribution.md"),
    })
}

fn summary_markdown(record: &RunRecord) -> String {
    let mut out = String::new();
    writeln!(out, "# Run summary\n").unwrap();
    writeln!(
        out,
        "Split {} (seed {}, ratio {}): {} train / {} test documents, {} authors.\n",
        &record.split_fingerprint[..12],
        record.config.split.seed,
        record.config.split.ratio,
        record.split.train_docs,
        record.split.test_docs,
        record.split.classes
    )
    .unwrap();
    out.push_str("| Stopword Removal | Accuracy | Macro-F1 | Converged |\n|---|---:|---:|---|\n");
    for v in &record.variants {
        let label = match v.variant {
            Variant::Retained => "No",
            Variant::Removed => "Yes",
        };
        writeln!(
            out,
            "| {label} | {:.3} | {:.3} | {} |",
            v.accuracy, v.macro_f1, v.converged
        )
        .unwrap();
    }
    if let Some(d) = record.delta_f1 {
        writeln!(out, "\nΔF1 (removed − retained, macro): {d:+.3}").unwrap();
    }
    out
}

fn temp_dir_for(output: &Path) -> PathBuf {
    let mut name = output
        .file_name()
        .map(|n| n.to_os_string())
        .unwrap_or_else(|| "run".into());
    name.push(format!(".partial-{}", std::process::id()));
    output.with_file_name(name)
}

/// Runs the whole experiment, writing into `config.output_dir`. Nothing is
/// left behind on failure. An existing non-empty output directory is only
/// replaced when `overwrite` is set.
pub fn run_experiment(config: &ExperimentConfig, overwrite: bool) -> Result<RunRecord> {
    config.validate()?;
    let out = &config.output_dir;
    if out.exists() && fs::read_dir(out).map(|mut d| d.next().is_some()).unwrap_or(true) && !overwrite {
        return Err(Error::Config(format!(
            "output directory {} is not empty (pass overwrite to replace it)",
            out.display()
        )));
    }
    let tmp = temp_dir_for(out);
    if tmp.exists() {
        fs::remove_dir_all(&tmp).map_err(|e| Error::io(&tmp, e))?;
    }
    fs::create_dir_all(&tmp).map_err(|e| Error::io(&tmp, e))?;
    match run_into(config, &tmp) {
        Ok(record) => {
            if out.exists() {
                fs::remove_dir_all(out).map_err(|e| Error::io(out, e))?;
            }
            fs::rename(&tmp, out).map_err(|e| Error::io(out, e))?;
            Ok(record)
        }
        Err(e) => {
            let _ = fs::remove_dir_all(&tmp);
            Err(e)
        }
    }
}

fn run_into(config: &ExperimentConfig, dir: &Path) -> Result<RunRecord> {
    let mut timings = BTreeMap::new();
    let mut clock = Instant::now();
    let mut lap = |timings: &mut BTreeMap<String, f64>, name: &str| {
        timings.insert(name.to_string(), clock.elapsed().as_secs_f64());
        clock = Instant::now();
    };

    let stopwords = config.load_stopwords().map_err(|e| e.at_stage("stopwords"))?;
    let corpus = config.prepare_corpus().map_err(|e| e.at_stage("load"))?;
    lap(&mut timings, "load");
    let split = stratified_split(&corpus, config.split.ratio, config.split.seed).map_err(|e| e.at_stage("split"))?;
    let fingerprint = split.fingerprint();
    write_json(&dir.join("config.json"), config)?;
    write_json(&dir.join("split.json"), &split.manifest())?;
    lap(&mut timings, "split");

    let mut variants = Vec::new();
    let mut outcomes = BTreeMap::new();
    let mut ordered = config.variants.clone();
    ordered.sort();
    ordered.dedup();
    for v in ordered {
        let outcome = train_and_evaluate(&split, &stopwords, config, v)?;
        variants.push(write_variant(dir, &outcome, &fingerprint).map_err(|e| e.at_stage("write"))?);
        outcomes.insert(v, outcome);
        lap(&mut timings, v.name());
    }
    let delta = match (outcomes.get(&Variant::Removed), outcomes.get(&Variant::Retained)) {
        (Some(rem), Some(ret)) => Some(delta_f1(&rem.report, &ret.report)),
        _ => None,
    };

    let ablation = if config.ablation {
        let ret = &outcomes[&Variant::Retained];
        let frozen = FrozenArtifacts {
            model: &ret.model,
            vectorizer: &ret.vectorizer,
            x_test: &ret.x_test,
            y_test: &ret.y_test,
        };
        let (outcome, md, vd) = ablate(&frozen, &stopwords, config.ablation_threshold_pp, config.workers)
            .map_err(|e| e.at_stage("ablate"))?;
        let rec = write_ablation(dir, &outcome, config.extremes_style, md, vd).map_err(|e| e.at_stage("write"))?;
        lap(&mut timings, "ablation");
        Some(rec)
    } else {
        None
    };

    let record = RunRecord {
        config: config.clone(),
        split_fingerprint: fingerprint,
        split: SplitSummary {
            classes: split.train.num_classes(),
            train_docs: split.train.len(),
            test_docs: split.test.len(),
            train_per_author: split.train.author_counts(),
            test_per_author: split.test.author_counts(),
        },
        variants,
        delta_f1: delta,
        ablation,
        timings,
    };
    write_json(&dir.join("record.json"), &record)?;
    write(&dir.join("summary.md"), summary_markdown(&record))?;
    Ok(record)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Corrupt {
        what: path.display().to_string(),
        reason: e.to_string(),
    })
}

/// Post-hoc ablation of an existing run's retained model. Rebuilds the test
/// matrix from the dataset and stored split, writes `ablation/`, and
/// updates `record.json`. Model files are only read.
pub fn run_ablation(run_dir: &Path, workers: Option<usize>, threshold_pp: Option<f64>) -> Result<AblationRecord> {
    let mut record = RunRecord::load(run_dir)?;
    let config = record.config.clone();
    let retained = record
        .variant(Variant::Retained)
        .ok_or_else(|| Error::Data("run has no retained-variant model".into()))?
        .clone();
    let model_path = run_dir.join(&retained.model_path);
    let model_bytes_before = fs::read(&model_path).map_err(|e| Error::io(&model_path, e))?;
    let model = SvmModel::load(&model_path).map_err(|e| e.at_stage("load model"))?;
    let vectorizer =
        VectorizerModel::load(&run_dir.join(&retained.vectorizer_path)).map_err(|e| e.at_stage("load model"))?;
    if model.num_features != vectorizer.num_features() {
        return Err(Error::Data(format!(
            "incompatible artifacts: model has {} features, vectorizer {}",
            model.num_features,
            vectorizer.num_features()
        ))
        .at_stage("load model"));
    }
    let stopwords = config.load_stopwords().map_err(|e| e.at_stage("stopwords"))?;
    let corpus = config.prepare_corpus().map_err(|e| e.at_stage("load"))?;
    let manifest: SplitManifest = read_json(&run_dir.join("split.json"))?;
    let split = manifest.apply(&corpus).map_err(|e| e.at_stage("split"))?;
    if model.classes != split.test.authors() {
        return Err(Error::Data("model classes do not match the corpus authors".into()).at_stage("load model"));
    }
    let x_test = vectorizer.transform(&split.test);
    let y_test = split.test.labels();
    let frozen = FrozenArtifacts {
        model: &model,
        vectorizer: &vectorizer,
        x_test: &x_test,
        y_test: &y_test,
    };
    let threshold = threshold_pp.unwrap_or(config.ablation_threshold_pp);
    let started = Instant::now();
    let (outcome, md, vd) = ablate(&frozen, &stopwords, threshold, workers).map_err(|e| e.at_stage("ablate"))?;
    let rec = write_ablation(run_dir, &outcome, config.extremes_style, md, vd).map_err(|e| e.at_stage("write"))?;
    let model_bytes_after = fs::read(&model_path).map_err(|e| Error::io(&model_path, e))?;
    if model_bytes_before != model_bytes_after {
        return Err(Error::Data("model file changed during ablation".into()));
    }
    record.ablation = Some(rec.clone());
    record
        .timings
        .insert("ablation".into(), started.elapsed().as_secs_f64());
    write_json(&run_dir.join("record.json"), &record)?;
    Ok(rec)
}

/// Corpus statistics for the configured dataset, written as CSV, JSON and
/// Markdown into `out_dir`.
pub fn emit_stats(config: &ExperimentConfig, out_dir: &Path) -> Result<CorpusStats> {
    config.analyzer.validate()?;
    let stopwords = config.load_stopwords().map_err(|e| e.at_stage("stopwords"))?;
    let corpus = config.load_raw_corpus().map_err(|e| e.at_stage("load"))?;
    let stats = corpus_stats(&corpus, &stopwords);
    write(&out_dir.join("stats.csv"), stats.to_csv())?;
    write_json(&out_dir.join("stats.json"), &stats)?;
    write(&out_dir.join("stats.md"), stats.to_markdown())?;
    Ok(stats)
}

/// Markdown report assembled from an existing run directory.
pub fn render_report(run_dir: &Path, style: Option<ExtremesStyle>) -> Result<String> {
    let record = RunRecord::load(run_dir)?;
    let mut out = summary_markdown(&record);
    for v in &record.variants {
        let report: MetricsReport = read_json(&run_dir.join(&v.metrics_path))?;
        writeln!(out, "\n## Variant: {}\n", v.variant.name()).unwrap();
        out.push_str(&report.to_markdown());
    }
    if let Some(abl) = &record.ablation {
        let extremes: ExtremesReport = read_json(&run_dir.join(&abl.extremes_json))?;
        let dist: DeltaDistribution = read_json(&run_dir.join(&abl.distribution_json))?;
        writeln!(out, "\n## Per-author extremes\n").unwrap();
        out.push_str(&extremes.to_markdown(style.unwrap_or(record.config.extremes_style)));
        writeln!(out, "\n## Δ-Recall distribution\n").unwrap();
        out.push_str(&dist.to_markdown());
    }
    Ok(out)
}
