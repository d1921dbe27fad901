//! `authorship` — batch driver for the attribution pipeline.
//!
//! Exit codes: 0 success, 1 configuration error, 2 data error, 3 numeric failure.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use authorship_core::ablation::ExtremesStyle;
use authorship_core::corpus::{stratified_split, CorpusFormat, SplitManifest, SplitPair};
use authorship_core::experiment::{
    build_features, emit_stats, render_report, run_ablation, run_experiment, transform_for_variant, ExperimentConfig,
    RemovalMode, Variant,
};
use authorship_core::metrics::{confusion_matrix, metrics};
use authorship_core::svm::{train_svm, Scheme, SvmModel};
use authorship_core::tfidf::VectorizerModel;
use authorship_core::{Error, ErrorKind, Result};
use clap::{Args, Parser, Subcommand};
use log::info;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

#[derive(Parser)]
#[command(name = "authorship", version, about = "Bengali authorship attribution experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Per-author corpus statistics (CSV, JSON, Markdown).
    Stats {
        #[command(flatten)]
        common: CommonArgs,
        /// Directory for stats.csv / stats.json / stats.md.
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute the stratified split and write its manifest.
    Split {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit the vectorizer and SVM for one variant.
    Train {
        #[command(flatten)]
        common: CommonArgs,
        /// Reuse a stored split manifest instead of recomputing it.
        #[arg(long)]
        split: Option<PathBuf>,
        #[arg(long, default_value = "retained", value_parser = parse_serde::<Variant>)]
        variant: Variant,
        /// Directory for model.json, vectorizer.json, split.json, train.json.
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a trained model directory on its held-out split.
    Eval {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        model_dir: PathBuf,
        /// Where to write metrics.json / confusion.csv (defaults to the model directory).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Full run: split, both variants, optional ablation.
    Experiment {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        output_dir: Option<PathBuf>,
        /// Also run the frozen-model ablation.
        #[arg(long)]
        ablation: bool,
        /// Replace an existing output directory.
        #[arg(long)]
        overwrite: bool,
    },
    /// Frozen-model stop-word ablation over an existing run directory.
    Ablate {
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        threshold_pp: Option<f64>,
    },
    /// Print a Markdown report assembled from a run directory.
    Report {
        #[arg(long)]
        run: PathBuf,
        #[arg(long, value_parser = parse_serde::<ExtremesStyle>)]
        style: Option<ExtremesStyle>,
        /// Write to a file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Config file plus flag overrides shared by the data-handling commands.
#[derive(Args)]
struct CommonArgs {
    /// JSON experiment config; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long, value_parser = parse_serde::<CorpusFormat>)]
    format: Option<CorpusFormat>,
    #[arg(long)]
    stopwords: Option<PathBuf>,
    #[arg(long)]
    segment_words: Option<usize>,
    #[arg(long)]
    ratio: Option<f64>,
    /// Seed for both the split shuffle and the solver.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long = "C")]
    c: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long, value_parser = parse_serde::<Scheme>)]
    scheme: Option<Scheme>,
    #[arg(long, value_parser = parse_serde::<RemovalMode>)]
    removal: Option<RemovalMode>,
    #[arg(long)]
    workers: Option<usize>,
}

fn parse_serde<T: DeserializeOwned>(s: &str) -> std::result::Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

impl CommonArgs {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_json_file(path)?,
            None => {
                let dataset = self
                    .dataset
                    .clone()
                    .ok_or_else(|| Error::Config("either --config or --dataset is required".into()))?;
                ExperimentConfig::new(dataset, CorpusFormat::AuthorDirs, PathBuf::from("run"))
            }
        };
        if let Some(v) = &self.dataset {
            cfg.dataset.path = v.clone();
        }
        if let Some(v) = self.format {
            cfg.dataset.format = v;
        }
        if let Some(v) = &self.stopwords {
            cfg.stopwords = Some(v.clone());
        }
        if let Some(v) = self.segment_words {
            cfg.segment_words = Some(v);
        }
        if let Some(v) = self.ratio {
            cfg.split.ratio = v;
        }
        if let Some(v) = self.seed {
            cfg.split.seed = v;
            cfg.svm.seed = v;
        }
        if let Some(v) = self.c {
            cfg.svm.c = v;
        }
        if let Some(v) = self.tol {
            cfg.svm.tol = v;
        }
        if let Some(v) = self.max_iter {
            cfg.svm.max_iter = v;
        }
        if let Some(v) = self.scheme {
            cfg.svm.scheme = v;
        }
        if let Some(v) = self.removal {
            cfg.removal = v;
        }
        if self.workers.is_some() {
            cfg.workers = self.workers;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Provenance of a `train` output directory, read back by `eval`.
#[derive(Serialize, Deserialize)]
struct TrainInfo {
    variant: Variant,
    removal: RemovalMode,
    split_fingerprint: String,
    converged: bool,
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Corrupt {
        what: path.display().to_string(),
        reason: e.to_string(),
    })
}

fn pretty<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serializable") + "\n"
}

fn load_split(cfg: &ExperimentConfig, manifest: Option<&Path>) -> Result<SplitPair> {
    let corpus = cfg.prepare_corpus().map_err(|e| e.at_stage("load"))?;
    match manifest {
        Some(path) => read_json::<SplitManifest>(path)?.apply(&corpus),
        None => stratified_split(&corpus, cfg.split.ratio, cfg.split.seed),
    }
    .map_err(|e| e.at_stage("split"))
}

fn configure_threads(workers: Option<usize>) {
    if let Some(n) = workers {
        // Only the first call can succeed; later runs in the same process keep the pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Stats { common, out } => {
            let cfg = common.resolve()?;
            let stats = emit_stats(&cfg, &out)?;
            print!("{}", stats.to_markdown());
        }
        Command::Split { common, out } => {
            let cfg = common.resolve()?;
            let split = load_split(&cfg, None)?;
            write_file(&out, pretty(&split.manifest()))?;
            println!(
                "split {}: {} train / {} test",
                split.fingerprint(),
                split.train.len(),
                split.test.len()
            );
        }
        Command::Train {
            common,
            split,
            variant,
            out,
        } => {
            let cfg = common.resolve()?;
            configure_threads(cfg.workers);
            let stopwords = cfg.load_stopwords().map_err(|e| e.at_stage("stopwords"))?;
            let pair = load_split(&cfg, split.as_deref())?;
            let (vectorizer, x_train, _, _) = build_features(&pair, &stopwords, &cfg.analyzer, variant, cfg.removal)
                .map_err(|e| e.at_stage("vectorize"))?;
            let model = train_svm(&x_train, &pair.train.labels(), pair.train.authors(), &cfg.svm)
                .map_err(|e| e.at_stage("train"))?;
            info!("trained {} machines", model.machines.len());
            write_file(&out.join("model.json"), model.to_json())?;
            write_file(&out.join("vectorizer.json"), vectorizer.to_json())?;
            write_file(&out.join("split.json"), pretty(&pair.manifest()))?;
            let info = TrainInfo {
                variant,
                removal: cfg.removal,
                split_fingerprint: pair.fingerprint(),
                converged: model.all_converged(),
            };
            write_file(&out.join("train.json"), pretty(&info))?;
            println!(
                "trained {} variant on {} documents ({} features, converged: {})",
                variant.name(),
                pair.train.len(),
                vectorizer.num_features(),
                info.converged
            );
        }
        Command::Eval { common, model_dir, out } => {
            let cfg = common.resolve()?;
            let info: TrainInfo = read_json(&model_dir.join("train.json"))?;
            let model = SvmModel::load(&model_dir.join("model.json"))?;
            let vectorizer = VectorizerModel::load(&model_dir.join("vectorizer.json"))?;
            if model.num_features != vectorizer.num_features() {
                return Err(Error::DimensionMismatch {
                    expected: vectorizer.num_features(),
                    actual: model.num_features,
                });
            }
            let stopwords = cfg.load_stopwords().map_err(|e| e.at_stage("stopwords"))?;
            let pair = load_split(&cfg, Some(&model_dir.join("split.json")))?;
            let x_test = transform_for_variant(&vectorizer, &pair.test, &stopwords, info.variant, info.removal)?;
            let pred = model.predict(&x_test).map_err(|e| e.at_stage("evaluate"))?;
            let cm = confusion_matrix(&pair.test.labels(), &pred, pair.test.authors())?;
            let report = metrics(&cm)?;
            let out = out.unwrap_or(model_dir);
            write_file(&out.join("metrics.json"), pretty(&report))?;
            write_file(&out.join("per_class.csv"), report.per_class_csv())?;
            write_file(&out.join("confusion.csv"), cm.to_csv())?;
            print!("{}", report.to_markdown());
        }
        Command::Experiment {
            common,
            output_dir,
            ablation,
            overwrite,
        } => {
            let mut cfg = common.resolve()?;
            if let Some(dir) = output_dir {
                cfg.output_dir = dir;
            }
            cfg.ablation |= ablation;
            cfg.validate()?;
            configure_threads(cfg.workers);
            let record = run_experiment(&cfg, overwrite)?;
            for v in &record.variants {
                println!(
                    "{:<8} accuracy {:.4}  macro-F1 {:.4}",
                    v.variant.name(),
                    v.accuracy,
                    v.macro_f1
                );
            }
            if let Some(d) = record.delta_f1 {
                println!("delta-F1 {d:+.4}");
            }
            println!(
                "run written to {} (digest {})",
                cfg.output_dir.display(),
                record.digest()
            );
        }
        Command::Ablate {
            run,
            workers,
            threshold_pp,
        } => {
            let rec = run_ablation(&run, workers, threshold_pp)?;
            println!(
                "ablated {} tokens ({} in vocabulary); model digest {}",
                rec.tokens, rec.tokens_in_vocab, rec.model_digest
            );
        }
        Command::Report { run, style, out } => {
            let text = render_report(&run, style)?;
            match out {
                Some(path) => write_file(&path, text)?,
                None => print!("{text}"),
            }
        }
    }
    Ok(())
}

fn exit_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::Config => 1,
        ErrorKind::Data => 2,
        ErrorKind::Numeric => 3,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(e.kind()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_kinds_map_to_documented_codes() {
        assert_eq!(exit_code(Error::Config("x".into()).kind()), 1);
        assert_eq!(exit_code(Error::EmptyVocabulary.kind()), 2);
        assert_eq!(exit_code(Error::NonFinite { row: 0, col: 0 }.kind()), 3);
        assert_eq!(
            exit_code(Error::NonFinite { row: 0, col: 0 }.at_stage("train").kind()),
            3
        );
    }
}
