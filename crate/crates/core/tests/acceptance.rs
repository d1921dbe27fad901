//! Acceptance suite: one PASS / FAIL / SKIP line per criterion.
//!
//! The external-corpus criteria read their data from environment
//! variables (`BARD10_PATH`, `BAAD16_PATH`, optional `*_FORMAT` in
//! `author-dirs|jsonl|csv`, optional `AUTHORSHIP_STOPWORDS`). Without them
//! the synthetic replacement runs instead, and the line says so.

use std::env;
use std::fs;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use authorship_core::ablation::{ablate_token, baseline_recall, delta_recall_matrix};
use authorship_core::corpus::{corpus_stats, stratified_split, Corpus, CorpusFormat, Document};
use authorship_core::experiment::{run_experiment, ExperimentConfig, RunRecord, Variant};
use authorship_core::metrics::{confusion_matrix, metrics};
use authorship_core::sparse::SparseMatrix;
use authorship_core::svm::{solve_binary, train_svm, SvmConfig};
use authorship_core::synthetic::{generate, SyntheticSpec};
use authorship_core::textprep::{analyze, parse_stopwords, AnalyzerConfig};
use authorship_core::tfidf::{fit_vectorizer, zero_columns};

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn within_budget(outcome: Outcome, elapsed: Duration, budget: Duration) -> Outcome {
    match outcome {
        Outcome::Pass(d) if elapsed > budget => Outcome::Fail(format!("{d}; took {elapsed:?} > {budget:?}")),
        other => other,
    }
}

fn docs(texts: &[(&str, &str)]) -> Corpus {
    Corpus::from_documents(
        texts
            .iter()
            .enumerate()
            .map(|(i, (a, t))| Document {
                id: format!("d{i}"),
                author: a.to_string(),
                text: t.to_string(),
                source: format!("d{i}"),
            })
            .collect(),
    )
    .unwrap()
}

fn analyzer_fixture() -> Outcome {
    let cfg = AnalyzerConfig::default();
    let start = Instant::now();
    let got: Vec<Vec<String>> = ["মতো", "আমি", "অনেক"].iter().map(|w| analyze(w, &cfg)).collect();
    let elapsed = start.elapsed();
    let want = [vec!["মত"], vec!["আম"], vec!["অন"]];
    let ok = got.iter().zip(&want).all(|(g, w)| g == w);
    within_budget(check(ok, format!("got {got:?}")), elapsed, Duration::from_millis(1))
}

fn tfidf_oracle() -> Outcome {
    let start = Instant::now();
    let c = docs(&[("x", "আম আম তর"), ("y", "তর নও")]);
    let m = fit_vectorizer(&c, &AnalyzerConfig::default()).unwrap();
    let x = m.transform(&c).to_dense();
    // Independent oracle: the closed-form weights, cross-checked against a
    // reference TfidfVectorizer(sublinear_tf=True).
    let idf_rare = (3.0f64 / 2.0).ln() + 1.0;
    let r0 = [(1.0 + 2f64.ln()) * idf_rare, 1.0, 0.0];
    let r1 = [0.0, 1.0, idf_rare];
    let norm = |r: [f64; 3]| {
        let n = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        r.map(|v| v / n)
    };
    let want = [norm(r0), norm(r1)];
    let frozen = [
        [0.921_906_969_816_441_6, 0.387_411_330_505_273_9, 0.0],
        [0.0, 0.579_738_671_537_665_7, 0.814_802_474_667_168_9],
    ];
    let mut worst = 0.0f64;
    for i in 0..2 {
        for j in 0..3 {
            worst = worst
                .max((x[i][j] - want[i][j]).abs())
                .max((x[i][j] - frozen[i][j]).abs());
        }
    }
    let ok = m.vocab() == ["আম", "তর", "নও"] && worst <= 1e-9;
    within_budget(
        check(
            ok,
            format!(
                "max |error| {worst:.2e}; x[0][0]={:.6}, x[0][1]={:.6}",
                x[0][0], x[0][1]
            ),
        ),
        start.elapsed(),
        Duration::from_secs(1),
    )
}

fn svm_properties() -> Outcome {
    let start = Instant::now();
    let mut notes = Vec::new();
    let mut ok = true;

    // Two points, hard margin: w = (1, 0), b = 0.
    let x = SparseMatrix::from_dense(&[vec![1.0, 0.0], vec![-1.0, 0.0]], 2).unwrap();
    let sol = solve_binary(&x, &[0, 1], &[1.0, -1.0], 1e3, 1e-10, 100_000, 1);
    let err = (sol.weights[0] - 1.0)
        .abs()
        .max(sol.weights[1].abs())
        .max(sol.bias.abs());
    ok &= err < 1e-4;
    notes.push(format!("2-point |err| {err:.1e}"));

    // Logged toy: synthetic TF-IDF rows, soft margin.
    let s = generate(&SyntheticSpec {
        authors: 2,
        docs_per_author: 30,
        words_per_doc: 40,
        ..SyntheticSpec::default()
    })
    .unwrap();
    let v = fit_vectorizer(&s.corpus, &AnalyzerConfig::default()).unwrap();
    let xt = v.transform(&s.corpus);
    let rows: Vec<usize> = (0..xt.rows()).collect();
    let signs: Vec<f64> = s
        .corpus
        .labels()
        .iter()
        .map(|&l| if l == 0 { 1.0 } else { -1.0 })
        .collect();
    let (c, tol) = (0.5, 1e-6);
    let sol = solve_binary(&xt, &rows, &signs, c, tol, 10_000, 42);
    let r = &sol.report;
    let in_box = r.alpha.iter().all(|&a| (0.0..=c).contains(&a));
    let monotone = r
        .dual_trace
        .windows(2)
        .all(|w| w[1] >= w[0] - 1e-12 * w[0].abs().max(1.0));
    ok &= in_box && r.converged && r.kkt_violation < tol && monotone && !r.dual_trace.is_empty();
    notes.push(format!(
        "α∈[0,C]: {in_box}, converged in {} epochs, KKT {:.1e} < {tol:.0e}, dual monotone over {} epochs: {monotone}",
        r.epochs,
        r.kkt_violation,
        r.dual_trace.len()
    ));
    within_budget(check(ok, notes.join("; ")), start.elapsed(), Duration::from_secs(5))
}

fn metrics_bruteforce() -> Outcome {
    let start = Instant::now();
    let labels: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
    let decode = |mut code: usize| {
        let mut v = [0usize; 6];
        for slot in &mut v {
            *slot = code % 3;
            code /= 3;
        }
        v
    };
    let mut cases = 0usize;
    let mut mismatches = 0usize;
    for tc in 0..729 {
        let t = decode(tc);
        for pc in 0..729 {
            let p = decode(pc);
            let report = metrics(&confusion_matrix(&t, &p, &labels).unwrap()).unwrap();
            let mut f1_sum = 0.0;
            let mut correct = 0;
            for c in 0..3 {
                let (mut tp, mut pred, mut sup) = (0usize, 0usize, 0usize);
                for i in 0..6 {
                    tp += (t[i] == c && p[i] == c) as usize;
                    pred += (p[i] == c) as usize;
                    sup += (t[i] == c) as usize;
                }
                correct += tp;
                let prec = if pred == 0 { 0.0 } else { tp as f64 / pred as f64 };
                let rec = if sup == 0 { 0.0 } else { tp as f64 / sup as f64 };
                let f1 = if prec + rec == 0.0 {
                    0.0
                } else {
                    2.0 * prec * rec / (prec + rec)
                };
                f1_sum += f1;
                let m = &report.per_class[c];
                if m.precision != prec || m.recall != rec || m.f1 != f1 || m.support != sup {
                    mismatches += 1;
                }
            }
            if report.macro_avg.f1 != f1_sum / 3.0 || report.accuracy != correct as f64 / 6.0 {
                mismatches += 1;
            }
            cases += 1;
        }
    }
    within_budget(
        check(mismatches == 0, format!("{cases} assignments, {mismatches} mismatches")),
        start.elapsed(),
        Duration::from_secs(5),
    )
}

fn ablation_determinism() -> Outcome {
    let start = Instant::now();
    let s = generate(&SyntheticSpec {
        authors: 4,
        docs_per_author: 50,
        words_per_doc: 80,
        seed: 11,
        ..SyntheticSpec::default()
    })
    .unwrap();
    let cfg = AnalyzerConfig::default();
    let list = format!("{}ঙঙঙঙঙঙ\n", s.stopword_list);
    let stop = parse_stopwords(&list, &cfg, "synthetic".into()).unwrap();
    let corpus = s.corpus.map_texts(authorship_core::textprep::clean_text);
    let split = stratified_split(&corpus, 0.8, 42).unwrap();
    let v = fit_vectorizer(&split.train, &cfg).unwrap();
    let (xtr, xte) = (v.transform(&split.train), v.transform(&split.test));
    let model = train_svm(
        &xtr,
        &split.train.labels(),
        split.train.authors(),
        &SvmConfig::default(),
    )
    .unwrap();
    let y = split.test.labels();

    let serial = delta_recall_matrix(&model, &xte, &y, &stop, &v, Some(1)).unwrap();
    let parallel = delta_recall_matrix(&model, &xte, &y, &stop, &v, Some(4)).unwrap();
    let bits = |m: &authorship_core::ablation::DeltaRecallMatrix| -> Vec<u64> {
        m.delta.iter().flatten().map(|d| d.to_bits()).collect()
    };
    let identical = bits(&serial) == bits(&parallel);

    let base = model.predict(&xte).unwrap();
    let base_recall = baseline_recall(&model, &xte, &y).unwrap();
    let mut local = true;
    let mut oov_zero = true;
    let mut reference_match = true;
    for (t, token) in serial.tokens.iter().enumerate() {
        let ablated = zero_columns(&xte, [token], &v).unwrap();
        let pred = model.predict(&ablated).unwrap();
        let touched = v.column(token).map(|j| xte.rows_with_column(j)).unwrap_or_default();
        for i in 0..xte.rows() {
            if pred[i] != base[i] && !touched.contains(&i) {
                local = false;
            }
        }
        let reference = ablate_token(&model, &xte, &y, token, &v).unwrap();
        for a in 0..serial.authors.len() {
            let d = base_recall.recall[a] - reference.recall[a];
            reference_match &= d.to_bits() == serial.delta[t][a].to_bits();
        }
        if v.column(token).is_none() {
            oov_zero &= serial.delta[t].iter().all(|&d| d == 0.0);
        }
    }
    let has_oov = serial.in_vocab.iter().any(|&b| !b);
    let ok = identical && local && oov_zero && has_oov && reference_match;
    within_budget(
        check(
            ok,
            format!(
                "{} docs, {} tokens: parallel≡serial {identical}, locality {local}, out-of-vocab Δ=0 {}, fast≡reference {reference_match}",
                corpus.len(),
                serial.tokens.len(),
                oov_zero && has_oov
            ),
        ),
        start.elapsed(),
        Duration::from_secs(10),
    )
}

fn dataset(var: &str) -> Option<(PathBuf, CorpusFormat)> {
    let path = PathBuf::from(env::var_os(var)?);
    let format = env::var(format!("{}_FORMAT", var.trim_end_matches("_PATH")))
        .ok()
        .map(|f| f.parse().expect("valid corpus format"))
        .unwrap_or(CorpusFormat::AuthorDirs);
    Some((path, format))
}

fn real_config(
    path: PathBuf,
    format: CorpusFormat,
    out: PathBuf,
    segment: Option<usize>,
    ablation: bool,
) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(path, format, out);
    cfg.stopwords = env::var_os("AUTHORSHIP_STOPWORDS").map(PathBuf::from);
    cfg.segment_words = segment;
    cfg.ablation = ablation;
    cfg
}

fn accuracies(record: &RunRecord) -> (f64, f64) {
    (
        record.variant(Variant::Retained).unwrap().accuracy,
        record.variant(Variant::Removed).unwrap().accuracy,
    )
}

/// Ten-author synthetic stand-in for the external corpora.
struct SyntheticRun {
    record: RunRecord,
    dominance: Outcome,
}

fn synthetic_run() -> SyntheticRun {
    let tmp = tempfile::tempdir().unwrap();
    let s = generate(&SyntheticSpec::default()).unwrap();
    let root = tmp.path().join("corpus");
    s.write_author_dirs(&root).unwrap();
    let list = tmp.path().join("stopwords.txt");
    fs::write(&list, &s.stopword_list).unwrap();
    let mut cfg = ExperimentConfig::new(root, CorpusFormat::AuthorDirs, tmp.path().join("run"));
    cfg.stopwords = Some(list);
    cfg.ablation = true;
    let record = run_experiment(&cfg, false).unwrap();
    let extremes: authorship_core::ablation::ExtremesReport =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("run/ablation/extremes.json")).unwrap()).unwrap();
    let mut hits = 0;
    for (a, ex) in extremes.authors.iter().enumerate() {
        if ex.harmful.first().map(|d| &d.token) == Some(&s.signatures[a]) {
            hits += 1;
        }
    }
    let n = extremes.authors.len();
    let dominance = check(
        hits == n,
        format!("planted signature is the top harmful token for {hits}/{n} authors"),
    );
    SyntheticRun { record, dominance }
}

fn main() {
    let mut lines: Vec<(String, Outcome)> = vec![
        ("1 analyzer fixture".into(), analyzer_fixture()),
        ("2 tf-idf oracle".into(), tfidf_oracle()),
        ("3 svm solver properties".into(), svm_properties()),
        ("4 metrics brute-force oracle".into(), metrics_bruteforce()),
        ("5 ablation determinism & locality".into(), ablation_determinism()),
    ];
    let fixtures_green = lines.iter().all(|(_, o)| matches!(o, Outcome::Pass(_)));
    let mut synthetic: Option<SyntheticRun> = None;

    let bard = dataset("BARD10_PATH");
    let baad = dataset("BAAD16_PATH");
    let tmp = tempfile::tempdir().unwrap();

    let mut c6_real_pass = false;
    let bard_record = bard.as_ref().map(|(p, f)| {
        let cfg = real_config(p.clone(), *f, tmp.path().join("bard10"), None, true);
        run_experiment(&cfg, false).expect("BARD10 run")
    });
    let c6 = match &bard_record {
        Some(rec) => {
            let (ret, rem) = accuracies(rec);
            let d = rec.delta_f1.unwrap();
            let ok = (ret - 0.921).abs() <= 0.03 && (rem - 0.893).abs() <= 0.03 && rem <= ret && d < 0.0;
            c6_real_pass = ok;
            check(
                ok,
                format!("retained {ret:.3} (0.921±0.03), removed {rem:.3} (0.893±0.03), ΔF1 {d:+.3}"),
            )
        }
        None => {
            let s = synthetic.get_or_insert_with(synthetic_run);
            let (ret, rem) = accuracies(&s.record);
            let d = s.record.delta_f1.unwrap();
            let ok = fixtures_green && rem <= ret && d < 0.0;
            replaced(check(
                ok,
                format!("synthetic 10-author: retained {ret:.3}, removed {rem:.3}, ΔF1 {d:+.3} (directional gate)"),
            ))
        }
    };
    lines.push(("6 reproduction BARD10".into(), c6));

    let c7 = match &baad {
        Some((p, f)) => {
            let cfg = real_config(p.clone(), *f, tmp.path().join("baad16"), Some(750), false);
            let rec = run_experiment(&cfg, false).expect("BAAD16 run");
            let (ret, _) = accuracies(&rec);
            let d = rec.delta_f1.unwrap();
            check(
                ret >= 0.98 && d.abs() <= 0.01,
                format!("retained {ret:.3} (≥0.98), |ΔF1| {:.3} (≤0.01)", d.abs()),
            )
        }
        None => {
            let s = synthetic.get_or_insert_with(synthetic_run);
            let ok = fixtures_green && s.record.variants.iter().all(|v| v.converged);
            replaced(check(
                ok,
                "synthetic suites 1–5 green and both synthetic variants converged".into(),
            ))
        }
    };
    lines.push(("7 reproduction BAAD16".into(), c7));

    let c8 = match (&bard_record, bard.as_ref()) {
        (Some(rec), Some(_)) => {
            let run = tmp.path().join("bard10");
            let dist: authorship_core::ablation::DeltaDistribution =
                serde_json::from_str(&fs::read_to_string(run.join("ablation/distribution.json")).unwrap()).unwrap();
            let extremes: authorship_core::ablation::ExtremesReport =
                serde_json::from_str(&fs::read_to_string(run.join("ablation/extremes.json")).unwrap()).unwrap();
            let pos = 100.0 * dist.positive_share;
            let neg = 100.0 * dist.negative_share;
            let mut ok = (pos - 7.3).abs() <= 3.0 && (neg - 1.9).abs() <= 3.0;
            let mut detail = format!("positive {pos:.1}% (7.3±3), negative {neg:.1}% (1.9±3)");
            if c6_real_pass {
                let a2 = extremes
                    .authors
                    .iter()
                    .find(|a| matches_name(&a.author, "Hasan Mahbub"));
                let top2 = a2
                    .map(|a| a.harmful.iter().take(2).any(|d| d.token == "মত"))
                    .unwrap_or(false);
                ok &= top2;
                detail.push_str(&format!("; মত in A2 top-2 harmful: {top2}"));
            }
            let _ = rec;
            check(ok, detail)
        }
        _ => {
            let s = synthetic.get_or_insert_with(synthetic_run);
            replaced(match &s.dominance {
                Outcome::Pass(d) if fixtures_green => Outcome::Pass(d.clone()),
                Outcome::Pass(d) => Outcome::Fail(format!("{d}, but a fixture suite is red")),
                Outcome::Fail(d) => Outcome::Fail(d.clone()),
                Outcome::Skip(d) => Outcome::Skip(d.clone()),
            })
        }
    };
    lines.push(("8 ablation reproduction BARD10".into(), c8));

    let c9 = match &bard {
        Some((p, f)) => stats_reproduction(p.clone(), *f),
        None => Outcome::Skip("BARD10_PATH not set; the corpus is not available offline".into()),
    };
    lines.push(("9 stats reproduction".into(), c9));

    let mut failed = 0;
    for (name, outcome) in &lines {
        let (tag, detail) = match outcome {
            Outcome::Pass(d) => ("PASS", d),
            Outcome::Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
            Outcome::Skip(d) => ("SKIP", d),
        };
        println!("[{tag}] criterion {name}: {detail}");
    }
    assert_eq!(failed, 0, "{failed} acceptance criteria failed");
}

fn replaced(o: Outcome) -> Outcome {
    let tag = "replaced (dataset unavailable) by synthetic check";
    match o {
        Outcome::Pass(d) => Outcome::Pass(format!("{tag}: {d}")),
        Outcome::Fail(d) => Outcome::Fail(format!("{tag}: {d}")),
        Outcome::Skip(d) => Outcome::Skip(d),
    }
}

fn squash(s: &str) -> String {
    s.chars()
        .filter(|c| c.is_alphanumeric())
        .flat_map(char::to_lowercase)
        .collect()
}

fn matches_name(label: &str, name: &str) -> bool {
    let (l, n) = (squash(label), squash(name));
    l.contains(&n) || n.contains(&l)
}

/// Per-author stop-word percentages as published for BARD10.
const BARD10_STOPWORD_PCT: [(&str, f64); 10] = [
    ("Akash Ambar", 15.7),
    ("Noyon", 14.3),
    ("Hasan Mahbub", 15.8),
    ("Morubhumi Joldossu", 16.5),
    ("Shunya Aranyak", 15.7),
    ("Charu Mannan", 15.2),
    ("Ahmad Abdul Halim", 15.0),
    ("Akhtar Javed", 15.1),
    ("Kamal Uddin", 16.3),
    ("Tajerul Islam", 17.5),
];

fn stats_reproduction(path: PathBuf, format: CorpusFormat) -> Outcome {
    let start = Instant::now();
    let cfg = real_config(path, format, PathBuf::from("unused"), None, false);
    let stop = cfg.load_stopwords().unwrap();
    let corpus = cfg.load_raw_corpus().unwrap();
    let stats = corpus_stats(&corpus, &stop);
    let mut worst: f64 = 0.0;
    let mut missing = Vec::new();
    for (name, pct) in BARD10_STOPWORD_PCT {
        match stats.rows.iter().find(|r| matches_name(&r.author, name)) {
            Some(r) => worst = worst.max((r.stopword_pct - pct).abs()),
            None => missing.push(name),
        }
    }
    within_budget(
        check(
            missing.is_empty() && worst <= 0.3,
            format!("max |Δ pct| {worst:.2} pp (≤0.3); unmatched authors {missing:?}"),
        ),
        start.elapsed(),
        Duration::from_secs(60),
    )
}
