//! Confusion matrices and the usual per-class and averaged scores.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::corpus::csv_field;
use crate::error::{Error, Result};

/// `counts[t][p]` = number of samples with true class `t` predicted as `p`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub labels: Vec<String>,
    pub counts: Vec<Vec<usize>>,
}

pub fn confusion_matrix(y_true: &[usize], y_pred: &[usize], labels: &[String]) -> Result<ConfusionMatrix> {
    if y_true.len() != y_pred.len() {
        return Err(Error::Data(format!(
            "{} true labels but {} predictions",
            y_true.len(),
            y_pred.len()
        )));
    }
    let k = labels.len();
    let mut counts = vec![vec![0; k]; k];
    for (&t, &p) in y_true.iter().zip(y_pred) {
        for label in [t, p] {
            if label >= k {
                return Err(Error::LabelOutOfRange { label, classes: k });
            }
        }
        counts[t][p] += 1;
    }
    Ok(ConfusionMatrix {
        labels: labels.to_vec(),
        counts,
    })
}

impl ConfusionMatrix {
    pub fn num_classes(&self) -> usize {
        self.labels.len()
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> usize {
        (0..self.num_classes()).map(|i| self.counts[i][i]).sum()
    }

    pub fn support(&self, class: usize) -> usize {
        self.counts[class].iter().sum()
    }

    pub fn predicted(&self, class: usize) -> usize {
        self.counts.iter().map(|row| row[class]).sum()
    }

    /// CSV grid: header row of predicted labels, one row per true label.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("true\\pred");
        for l in &self.labels {
            out.push(',');
            out.push_str(&csv_field(l));
        }
        out.push('\n');
        for (l, row) in self.labels.iter().zip(&self.counts) {
            out.push_str(&csv_field(l));
            for c in row {
                write!(out, ",{c}").unwrap();
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
    /// Set when precision or recall had a zero denominator and was reported as 0.
    pub zero_division: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Averages {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub total: usize,
    pub per_class: Vec<ClassMetrics>,
    pub macro_avg: Averages,
    pub micro_avg: Averages,
    pub weighted_avg: Averages,
}

fn ratio(num: usize, den: usize) -> (f64, bool) {
    if den == 0 {
        (0.0, true)
    } else {
        (num as f64 / den as f64, false)
    }
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

pub fn metrics(cm: &ConfusionMatrix) -> Result<MetricsReport> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::Data("confusion matrix is empty".into()));
    }
    let k = cm.num_classes();
    let per_class: Vec<ClassMetrics> = (0..k)
        .map(|c| {
            let tp = cm.counts[c][c];
            let (precision, zp) = ratio(tp, cm.predicted(c));
            let (recall, zr) = ratio(tp, cm.support(c));
            ClassMetrics {
                label: cm.labels[c].clone(),
                precision,
                recall,
                f1: f1(precision, recall),
                support: cm.support(c),
                zero_division: zp || zr,
            }
        })
        .collect();

    let kf = k as f64;
    let macro_avg = Averages {
        precision: per_class.iter().map(|m| m.precision).sum::<f64>() / kf,
        recall: per_class.iter().map(|m| m.recall).sum::<f64>() / kf,
        f1: per_class.iter().map(|m| m.f1).sum::<f64>() / kf,
    };
    let tf = total as f64;
    let weighted = |f: fn(&ClassMetrics) -> f64| per_class.iter().map(|m| f(m) * m.support as f64).sum::<f64>() / tf;
    let weighted_avg = Averages {
        precision: weighted(|m| m.precision),
        recall: weighted(|m| m.recall),
        f1: weighted(|m| m.f1),
    };
    // Single-label multiclass: pooled TP = trace, pooled FP = pooled FN = total - trace.
    let accuracy = cm.trace() as f64 / tf;
    let micro_avg = Averages {
        precision: accuracy,
        recall: accuracy,
        f1: accuracy,
    };
    Ok(MetricsReport {
        accuracy,
        total,
        per_class,
        macro_avg,
        micro_avg,
        weighted_avg,
    })
}

/// Macro-F1 of the stop-word-free run minus that of the retained run.
pub fn delta_f1(without_stopwords: &MetricsReport, with_stopwords: &MetricsReport) -> f64 {
    without_stopwords.macro_avg.f1 - with_stopwords.macro_avg.f1
}

impl MetricsReport {
    pub fn per_class_csv(&self) -> String {
        let mut out = String::from("label,precision,recall,f1,support,zero_division\n");
        for m in &self.per_class {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                csv_field(&m.label),
                m.precision,
                m.recall,
                m.f1,
                m.support,
                m.zero_division
            )
            .unwrap();
        }
        out
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        writeln!(out, "Accuracy: {:.3} ({} samples)\n", self.accuracy, self.total).unwrap();
        out.push_str("| Class | Precision | Recall | F1 | Support |\n|---|---:|---:|---:|---:|\n");
        for m in &self.per_class {
            writeln!(
                out,
                "| {} | {:.3} | {:.3} | {:.3} | {} |",
                m.label, m.precision, m.recall, m.f1, m.support
            )
            .unwrap();
        }
        for (name, a) in [
            ("macro avg", self.macro_avg),
            ("micro avg", self.micro_avg),
            ("weighted avg", self.weighted_avg),
        ] {
            writeln!(
                out,
                "| {name} | {:.3} | {:.3} | {:.3} | {} |",
                a.precision, a.recall, a.f1, self.total
            )
            .unwrap();
        }
        out
    }
}
