//! Multiclass linear SVM trained by dual coordinate descent.
//!
//! Each binary machine solves the L2-regularized L1-loss (hinge) problem
//!
//! ```text
//! min_w  ½‖w‖² + C Σ max(0, 1 − yᵢ wᵀxᵢ)
//! ```
//!
//! through its box-constrained dual, one coordinate at a time. The bias is
//! the weight of an implicit constant feature equal to 1, so it is
//! regularized together with `w`.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::{dot_row, SparseMatrix};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    OneVsOne,
    OneVsRest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmConfig {
    #[serde(rename = "C")]
    pub c: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub scheme: Scheme,
    pub seed: u64,
}

impl Default for SvmConfig {
    fn default() -> Self {
        Self {
            c: 1.0,
            tol: 1e-3,
            max_iter: 10_000,
            scheme: Scheme::OneVsOne,
            seed: 42,
        }
    }
}

impl SvmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::Config(format!("C must be positive, got {}", self.c)));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::Config(format!("tol must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::Config("max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

/// Outcome of one binary solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub epochs: usize,
    pub converged: bool,
    /// Largest projected-gradient magnitude at the returned point.
    pub kkt_violation: f64,
    /// Dual objective `Σα − ½‖(w, b)‖²` after each epoch.
    #[serde(skip)]
    pub dual_trace: Vec<f64>,
    #[serde(skip)]
    pub alpha: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinarySolution {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub report: SolveReport,
}

fn projected_gradient(g: f64, alpha: f64, c: f64) -> f64 {
    if alpha <= 0.0 {
        g.min(0.0)
    } else if alpha >= c {
        g.max(0.0)
    } else {
        g
    }
}

/// Solves one binary problem over the rows `rows` of `x` with labels
/// `signs` (±1). Deterministic in `seed`.
pub fn solve_binary(
    x: &SparseMatrix,
    rows: &[usize],
    signs: &[f64],
    c: f64,
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> BinarySolution {
    let n = rows.len();
    let mut w = vec![0.0; x.cols()];
    let mut b = 0.0;
    let mut alpha = vec![0.0; n];
    let qd: Vec<f64> = rows
        .iter()
        .map(|&r| x.row(r).1.iter().map(|v| v * v).sum::<f64>() + 1.0)
        .collect();

    // Coordinates of w that can ever become nonzero.
    let mut active: Vec<usize> = rows.iter().flat_map(|&r| x.row(r).0.iter().copied()).collect();
    active.sort_unstable();
    active.dedup();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut trace = Vec::new();
    let mut converged = false;
    let mut epochs = 0;

    let margin = |w: &[f64], b: f64, i: usize| {
        let (idx, vals) = x.row(rows[i]);
        dot_row(idx, vals, w) + b
    };
    let dual = |w: &[f64], b: f64, alpha: &[f64]| {
        let wsq: f64 = active.iter().map(|&j| w[j] * w[j]).sum::<f64>() + b * b;
        alpha.iter().sum::<f64>() - 0.5 * wsq
    };
    let violation = |w: &[f64], b: f64, alpha: &[f64]| {
        (0..n)
            .map(|i| {
                let g = signs[i] * margin(w, b, i) - 1.0;
                projected_gradient(g, alpha[i], c).abs()
            })
            .fold(0.0, f64::max)
    };

    while epochs < max_iter {
        epochs += 1;
        order.shuffle(&mut rng);
        let mut sweep_max = 0.0f64;
        for &i in &order {
            let g = signs[i] * margin(&w, b, i) - 1.0;
            let pg = projected_gradient(g, alpha[i], c);
            sweep_max = sweep_max.max(pg.abs());
            if pg.abs() > 1e-12 {
                let old = alpha[i];
                alpha[i] = (old - g / qd[i]).clamp(0.0, c);
                let d = (alpha[i] - old) * signs[i];
                if d != 0.0 {
                    let (idx, vals) = x.row(rows[i]);
                    for (&j, &v) in idx.iter().zip(vals) {
                        w[j] += d * v;
                    }
                    b += d;
                }
            }
        }
        trace.push(dual(&w, b, &alpha));
        if sweep_max < tol && violation(&w, b, &alpha) < tol {
            converged = true;
            break;
        }
    }

    let kkt_violation = violation(&w, b, &alpha);
    BinarySolution {
        weights: w,
        bias: b,
        report: SolveReport {
            epochs,
            converged,
            kkt_violation,
            dual_trace: trace,
            alpha,
        },
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Machine {
    /// Class voted for by a positive margin.
    pub positive: usize,
    /// Opposing class; `None` for one-vs-rest.
    pub negative: Option<usize>,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub report: SolveReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    pub classes: Vec<String>,
    pub num_features: usize,
    pub machines: Vec<Machine>,
    pub config: SvmConfig,
}

fn class_pairs(k: usize, scheme: Scheme) -> Vec<(usize, Option<usize>)> {
    match scheme {
        Scheme::OneVsOne => (0..k).flat_map(|i| ((i + 1)..k).map(move |j| (i, Some(j)))).collect(),
        Scheme::OneVsRest => (0..k).map(|i| (i, None)).collect(),
    }
}

/// Trains one machine per class pair (or per class) in parallel.
pub fn train_svm(x: &SparseMatrix, y: &[usize], classes: &[String], config: &SvmConfig) -> Result<SvmModel> {
    config.validate()?;
    if x.rows() != y.len() {
        return Err(Error::Data(format!("{} feature rows but {} labels", x.rows(), y.len())));
    }
    x.validate()?;
    let k = classes.len();
    if k < 2 {
        return Err(Error::TooFewAuthors(k));
    }
    let mut seen = vec![false; k];
    for &label in y {
        if label >= k {
            return Err(Error::LabelOutOfRange { label, classes: k });
        }
        seen[label] = true;
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(Error::MissingClass(missing));
    }

    let pairs = class_pairs(k, config.scheme);
    let machines = pairs
        .par_iter()
        .enumerate()
        .map(|(m, &(pos, neg))| {
            let (rows, signs): (Vec<usize>, Vec<f64>) = y
                .iter()
                .enumerate()
                .filter_map(|(r, &label)| match neg {
                    Some(_) if label == pos => Some((r, 1.0)),
                    Some(neg_class) if label == neg_class => Some((r, -1.0)),
                    Some(_) => None,
                    None => Some((r, if label == pos { 1.0 } else { -1.0 })),
                })
                .unzip();
            let seed = config.seed.wrapping_add((m as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            let sol = solve_binary(x, &rows, &signs, config.c, config.tol, config.max_iter, seed);
            Machine {
                positive: pos,
                negative: neg,
                weights: sol.weights,
                bias: sol.bias,
                report: sol.report,
            }
        })
        .collect();

    Ok(SvmModel {
        classes: classes.to_vec(),
        num_features: x.cols(),
        machines,
        config: config.clone(),
    })
}

impl SvmModel {
    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn all_converged(&self) -> bool {
        self.machines.iter().all(|m| m.report.converged)
    }

    fn check_width(&self, x: &SparseMatrix) -> Result<()> {
        if x.cols() != self.num_features {
            return Err(Error::DimensionMismatch {
                expected: self.num_features,
                actual: x.cols(),
            });
        }
        Ok(())
    }

    /// Margin of every machine on one stored row.
    pub fn row_margins(&self, indices: &[usize], values: &[f64]) -> Vec<f64> {
        self.machines
            .iter()
            .map(|m| dot_row(indices, values, &m.weights) + m.bias)
            .collect()
    }

    /// `⟨w, x⟩ + b` for every row and machine.
    pub fn decision_values(&self, x: &SparseMatrix) -> Result<Vec<Vec<f64>>> {
        self.check_width(x)?;
        Ok((0..x.rows())
            .into_par_iter()
            .map(|i| {
                let (idx, vals) = x.row(i);
                self.row_margins(idx, vals)
            })
            .collect())
    }

    /// Class for one row's machine margins.
    pub fn vote(&self, margins: &[f64]) -> usize {
        let k = self.num_classes();
        match self.config.scheme {
            Scheme::OneVsRest => {
                let mut best = 0;
                for c in 1..k {
                    if margins[c] > margins[best] {
                        best = c;
                    }
                }
                best
            }
            Scheme::OneVsOne => {
                let mut votes = vec![0usize; k];
                let mut sums = vec![0.0f64; k];
                for (m, &d) in self.machines.iter().zip(margins) {
                    let neg = m.negative.expect("one-vs-one machine has two classes");
                    if d > 0.0 {
                        votes[m.positive] += 1;
                    } else {
                        votes[neg] += 1;
                    }
                    sums[m.positive] += d;
                    sums[neg] -= d;
                }
                let top = *votes.iter().max().unwrap();
                let mut best: Option<usize> = None;
                for c in (0..k).filter(|&c| votes[c] == top) {
                    match best {
                        Some(b) if sums[c] <= sums[b] => {}
                        _ => best = Some(c),
                    }
                }
                best.unwrap()
            }
        }
    }

    pub fn predict(&self, x: &SparseMatrix) -> Result<Vec<usize>> {
        self.check_width(x)?;
        Ok((0..x.rows())
            .into_par_iter()
            .map(|i| {
                let (idx, vals) = x.row(i);
                self.vote(&self.row_margins(idx, vals))
            })
            .collect())
    }

    pub fn to_json(&self) -> String {
        let file = ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            scheme: self.config.scheme,
            classes: self.classes.clone(),
            num_features: self.num_features,
            machines: self
                .machines
                .iter()
                .map(|m| MachineFile {
                    positive: m.positive,
                    negative: m.negative,
                    bias: m.bias,
                    weights: m
                        .weights
                        .iter()
                        .enumerate()
                        .filter(|(_, v)| v.to_bits() != 0)
                        .map(|(j, &v)| (j, v))
                        .collect(),
                    report: m.report.clone(),
                })
                .collect(),
            config: self.config.clone(),
        };
        serde_json::to_string(&file).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let corrupt = |reason: String| Error::Corrupt {
            what: "svm model".into(),
            reason,
        };
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| corrupt(e.to_string()))?;
        let found = value
            .get("format_version")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| corrupt("missing format_version".into()))? as u32;
        if found != MODEL_FORMAT_VERSION {
            return Err(Error::Version {
                what: "svm model",
                found,
                expected: MODEL_FORMAT_VERSION,
            });
        }
        let file: ModelFile = serde_json::from_value(value).map_err(|e| corrupt(e.to_string()))?;
        let k = file.classes.len();
        let expected = class_pairs(k, file.scheme);
        if file.scheme != file.config.scheme || file.machines.len() != expected.len() {
            return Err(corrupt("machine layout does not match scheme".into()));
        }
        let mut machines = Vec::with_capacity(file.machines.len());
        for (mf, &(pos, neg)) in file.machines.into_iter().zip(&expected) {
            if mf.positive != pos || mf.negative != neg {
                return Err(corrupt("machine class pair out of order".into()));
            }
            let mut weights = vec![0.0; file.num_features];
            for (j, v) in mf.weights {
                if j >= file.num_features {
                    return Err(corrupt(format!("weight index {j} out of range")));
                }
                weights[j] = v;
            }
            machines.push(Machine {
                positive: pos,
                negative: neg,
                weights,
                bias: mf.bias,
                report: mf.report,
            });
        }
        Ok(SvmModel {
            classes: file.classes,
            num_features: file.num_features,
            machines,
            config: file.config,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

#[derive(Serialize, Deserialize)]
struct MachineFile {
    positive: usize,
    negative: Option<usize>,
    bias: f64,
    weights: Vec<(usize, f64)>,
    report: SolveReport,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    scheme: Scheme,
    classes: Vec<String>,
    num_features: usize,
    machines: Vec<MachineFile>,
    config: SvmConfig,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(k: usize) -> Vec<String> {
        (0..k).map(|i| format!("c{i}")).collect()
    }

    fn two_points() -> (SparseMatrix, Vec<usize>) {
        let x = SparseMatrix::from_dense(&[vec![1.0, 0.0], vec![-1.0, 0.0]], 2).unwrap();
        (x, vec![0, 1])
    }

    #[test]
    fn two_point_hard_margin() {
        let (x, y) = two_points();
        let cfg = SvmConfig {
            c: 100.0,
            tol: 1e-8,
            ..Default::default()
        };
        let m = train_svm(&x, &y, &names(2), &cfg).unwrap();
        let mach = &m.machines[0];
        assert!((mach.weights[0] - 1.0).abs() < 1e-4);
        assert!(mach.weights[1].abs() < 1e-4);
        assert!(mach.bias.abs() < 1e-4);
        let dv = m.decision_values(&x).unwrap();
        assert!((dv[0][0] - 1.0).abs() < 1e-9 && (dv[1][0] + 1.0).abs() < 1e-9);
        assert!(mach.report.converged);
    }

    #[test]
    fn binary_prediction_is_margin_sign() {
        let (x, y) = two_points();
        let m = train_svm(&x, &y, &names(2), &SvmConfig::default()).unwrap();
        let dv = m.decision_values(&x).unwrap();
        let p = m.predict(&x).unwrap();
        for (d, p) in dv.iter().zip(p) {
            assert_eq!(p, if d[0] > 0.0 { 0 } else { 1 });
        }
    }

    #[test]
    fn label_swap_negates_weights() {
        let x = SparseMatrix::from_dense(&[vec![1.0, 0.2], vec![0.9, 0.1], vec![0.1, 1.0], vec![0.3, 0.8]], 2).unwrap();
        let a = train_svm(&x, &[0, 0, 1, 1], &names(2), &SvmConfig::default()).unwrap();
        let b = train_svm(&x, &[1, 1, 0, 0], &names(2), &SvmConfig::default()).unwrap();
        for (wa, wb) in a.machines[0].weights.iter().zip(&b.machines[0].weights) {
            assert_eq!(*wa, -*wb);
        }
        assert_eq!(a.machines[0].bias, -b.machines[0].bias);
    }

    #[test]
    fn zero_row_margin_is_bias() {
        let (x, y) = two_points();
        let m = train_svm(&x, &y, &names(2), &SvmConfig::default()).unwrap();
        let zero = SparseMatrix::from_rows(2, vec![vec![]]).unwrap();
        assert_eq!(m.decision_values(&zero).unwrap()[0][0], m.machines[0].bias);
    }

    #[test]
    fn hand_built_margin() {
        let model = SvmModel {
            classes: names(2),
            num_features: 3,
            machines: vec![Machine {
                positive: 0,
                negative: Some(1),
                weights: vec![0.5, -2.0, 4.0],
                bias: 0.25,
                report: SolveReport {
                    epochs: 0,
                    converged: true,
                    kkt_violation: 0.0,
                    dual_trace: vec![],
                    alpha: vec![],
                },
            }],
            config: SvmConfig::default(),
        };
        let x = SparseMatrix::from_rows(3, vec![vec![(0, 2.0), (2, 0.5)]]).unwrap();
        // 0.5*2 + 4*0.5 + 0.25
        assert_eq!(model.decision_values(&x).unwrap()[0][0], 3.25);
        let wide = SparseMatrix::empty(4);
        assert!(model.decision_values(&wide).is_err());
    }

    fn fixed_ovo(margins_per_machine: [f64; 3]) -> (SvmModel, SparseMatrix) {
        // One feature, weight 0: every margin equals the machine bias.
        let pairs = [(0, 1), (0, 2), (1, 2)];
        let machines = pairs
            .iter()
            .zip(margins_per_machine)
            .map(|(&(p, n), b)| Machine {
                positive: p,
                negative: Some(n),
                weights: vec![0.0],
                bias: b,
                report: SolveReport {
                    epochs: 0,
                    converged: true,
                    kkt_violation: 0.0,
                    dual_trace: vec![],
                    alpha: vec![],
                },
            })
            .collect();
        let model = SvmModel {
            classes: names(3),
            num_features: 1,
            machines,
            config: SvmConfig::default(),
        };
        (model, SparseMatrix::from_rows(1, vec![vec![]]).unwrap())
    }

    #[test]
    fn cyclic_tie_uses_margin_sums() {
        // 0 beats 1 (+0.5), 2 beats 0 (-0.2), 1 beats 2 (+0.9): one vote each.
        // Sums: c0 = 0.5 - 0.2 = 0.3, c1 = -0.5 + 0.9 = 0.4, c2 = 0.2 - 0.9 = -0.7.
        let (model, x) = fixed_ovo([0.5, -0.2, 0.9]);
        assert_eq!(model.predict(&x).unwrap(), vec![1]);
        // Symmetric margins leave equal sums; lowest index wins.
        let (model, x) = fixed_ovo([0.5, -0.5, 0.5]);
        assert_eq!(model.predict(&x).unwrap(), vec![0]);
    }

    #[test]
    fn separable_three_class() {
        let x = SparseMatrix::from_dense(
            &[
                vec![1.0, 0.0, 0.0],
                vec![0.9, 0.1, 0.0],
                vec![0.0, 1.0, 0.0],
                vec![0.1, 0.9, 0.1],
                vec![0.0, 0.0, 1.0],
                vec![0.0, 0.2, 0.9],
            ],
            3,
        )
        .unwrap();
        let y = vec![0, 0, 1, 1, 2, 2];
        for scheme in [Scheme::OneVsOne, Scheme::OneVsRest] {
            let cfg = SvmConfig {
                scheme,
                c: 10.0,
                ..Default::default()
            };
            let m = train_svm(&x, &y, &names(3), &cfg).unwrap();
            assert_eq!(m.machines.len(), 3);
            assert_eq!(m.predict(&x).unwrap(), y);
        }
    }

    #[test]
    fn training_errors() {
        let (x, _) = two_points();
        assert!(matches!(
            train_svm(&x, &[0, 0], &names(2), &SvmConfig::default()),
            Err(Error::MissingClass(1))
        ));
        assert!(train_svm(&x, &[0], &names(2), &SvmConfig::default()).is_err());
        let bad = SparseMatrix::from_dense(&[vec![f64::NAN], vec![1.0]], 1).unwrap();
        assert!(matches!(
            train_svm(&bad, &[0, 1], &names(2), &SvmConfig::default()),
            Err(Error::NonFinite { .. })
        ));
        let cfg = SvmConfig {
            c: 0.0,
            ..Default::default()
        };
        assert!(matches!(train_svm(&x, &[0, 1], &names(2), &cfg), Err(Error::Config(_))));
    }

    #[test]
    fn model_round_trip_and_corruption() {
        let (x, y) = two_points();
        let m = train_svm(&x, &y, &names(2), &SvmConfig::default()).unwrap();
        let json = m.to_json();
        let back = SvmModel::from_json(&json).unwrap();
        assert_eq!(back.machines[0].weights, m.machines[0].weights);
        assert_eq!(back.machines[0].bias.to_bits(), m.machines[0].bias.to_bits());
        assert_eq!(back.classes, m.classes);
        assert_eq!(back.config, m.config);
        assert_eq!(back.predict(&x).unwrap(), m.predict(&x).unwrap());

        let wrong = json.replacen("\"format_version\":1", "\"format_version\":2", 1);
        assert!(matches!(
            SvmModel::from_json(&wrong),
            Err(Error::Version { found: 2, .. })
        ));
        let truncated = &json[..json.len() / 2];
        assert!(matches!(SvmModel::from_json(truncated), Err(Error::Corrupt { .. })));
    }
}
