//! L2-regularized L2-loss support vector regression trained by dual
//! coordinate descent, plus the ablation and cross-emotion harnesses.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Dataset, Emotion, Partition};
use crate::features::{assemble, FeatureConfig, FeatureError, FeatureVector, Resources};
use crate::stats::{self, StatsError};

pub const DEFAULT_C: f64 = 1.0;
pub const DEFAULT_EPSILON: f64 = 0.1;
pub const DEFAULT_TOLERANCE: f64 = 1e-3;
pub const DEFAULT_MAX_EPOCHS: usize = 1000;
pub const DEFAULT_SUBSET_THRESHOLD: f64 = 0.5;

const MODEL_MAGIC: &str = "# bwskit-svr";

#[derive(Error, Debug)]
pub enum RegressionError {
    #[error("need at least {needed} examples, got {got}")]
    TooFew { needed: usize, got: usize },
    #[error("every feature vector is empty")]
    Degenerate,
    #[error("non-finite target at example {0}")]
    BadTarget(usize),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Features(#[from] FeatureError),
    #[error("{0}")]
    Data(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub c: f64,
    pub epsilon: f64,
    /// Bound on the largest optimality violation, measured as the spread of
    /// bias values the examples admit.
    pub tolerance: f64,
    pub max_epochs: usize,
    /// Seeds the per-epoch coordinate order.
    pub seed: u64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            c: DEFAULT_C,
            epsilon: DEFAULT_EPSILON,
            tolerance: DEFAULT_TOLERANCE,
            max_epochs: DEFAULT_MAX_EPOCHS,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionModel {
    pub weights: BTreeMap<String, f64>,
    pub bias: f64,
    pub hyperparams: Hyperparams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub epochs: usize,
    pub converged: bool,
    /// Dual objective at the start and after each epoch.
    pub dual_objective: Vec<f64>,
    pub final_violation: f64,
}

/// Training set in index space; rows are sorted by feature index.
#[derive(Debug, Clone)]
pub struct Problem {
    pub names: Vec<String>,
    pub rows: Vec<Vec<(usize, f64)>>,
    pub targets: Vec<f64>,
}

impl Problem {
    pub fn new(examples: &[(FeatureVector, f64)]) -> Result<Self, RegressionError> {
        if examples.len() < 2 {
            return Err(RegressionError::TooFew { needed: 2, got: examples.len() });
        }
        if examples.iter().all(|(x, _)| x.is_empty()) {
            return Err(RegressionError::Degenerate);
        }
        if let Some(i) = examples.iter().position(|(_, y)| !y.is_finite()) {
            return Err(RegressionError::BadTarget(i));
        }
        let mut vocab: BTreeMap<&str, usize> = BTreeMap::new();
        for (x, _) in examples {
            for name in x.names() {
                vocab.entry(name).or_insert(0);
            }
        }
        for (i, v) in vocab.values_mut().enumerate() {
            *v = i;
        }
        let rows = examples
            .iter()
            .map(|(x, _)| x.iter().map(|(k, v)| (vocab[k], v)).collect())
            .collect();
        Ok(Self {
            names: vocab.keys().map(|k| k.to_string()).collect(),
            rows,
            targets: examples.iter().map(|(_, y)| *y).collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    fn dot(row: &[(usize, f64)], w: &[f64]) -> f64 {
        row.iter().map(|&(j, v)| w[j] * v).sum()
    }

    fn row_dot(a: &[(usize, f64)], b: &[(usize, f64)]) -> f64 {
        let (mut i, mut j, mut s) = (0, 0, 0.0);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    s += a[i].1 * b[j].1;
                    i += 1;
                    j += 1;
                }
            }
        }
        s
    }

    /// (1/2)‖w‖² + C Σ max(0, |w·xᵢ + b − yᵢ| − ε)²; the bias is not penalized.
    pub fn primal_objective(&self, w: &[f64], b: f64, c: f64, epsilon: f64) -> f64 {
        let reg: f64 = w.iter().map(|v| v * v).sum::<f64>() / 2.0;
        let loss: f64 = self
            .rows
            .iter()
            .zip(&self.targets)
            .map(|(row, y)| {
                let excess = ((Self::dot(row, w) + b - y).abs() - epsilon).max(0.0);
                excess * excess
            })
            .sum();
        reg + c * loss
    }

    /// Gradient of the primal objective: the weight part, then the bias part.
    pub fn primal_gradient(&self, w: &[f64], b: f64, c: f64, epsilon: f64) -> (Vec<f64>, f64) {
        let mut g = w.to_vec();
        let mut gb = 0.0;
        for (row, y) in self.rows.iter().zip(&self.targets) {
            let r = Self::dot(row, w) + b - y;
            let excess = r.abs() - epsilon;
            if excess > 0.0 {
                let coef = 2.0 * c * excess * r.signum();
                gb += coef;
                for &(j, v) in row {
                    g[j] += coef * v;
                }
            }
        }
        (g, gb)
    }

    /// (1/2)‖w(β)‖² − yᵀβ + ε‖β‖₁ + (1/(4C))‖β‖², minimized subject to
    /// Σβ = 0; its minimum is the negated primal optimum.
    pub fn dual_objective(&self, beta: &[f64], c: f64, epsilon: f64) -> f64 {
        let w = self.weights_from_dual(beta);
        let lambda = 0.5 / c;
        let mut f = w.iter().map(|v| v * v).sum::<f64>() / 2.0;
        for (b, y) in beta.iter().zip(&self.targets) {
            f += -y * b + epsilon * b.abs() + lambda * b * b / 2.0;
        }
        f
    }

    pub fn weights_from_dual(&self, beta: &[f64]) -> Vec<f64> {
        let mut w = vec![0.0; self.dim()];
        for (row, b) in self.rows.iter().zip(beta) {
            for &(j, v) in row {
                w[j] += b * v;
            }
        }
        w
    }
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub beta: Vec<f64>,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub report: TrainReport,
}

/// Range of bias values consistent with the optimality conditions of each
/// example, given dual gradient `g`: 0 ∈ g + b + ε∂|β|.
fn bias_interval(beta: f64, g: f64, eps: f64) -> (f64, f64) {
    if beta > 0.0 {
        (-g - eps, -g - eps)
    } else if beta < 0.0 {
        (-g + eps, -g + eps)
    } else {
        (-g - eps, -g + eps)
    }
}

/// Exact minimizer over t of g·t + h·t²/2 + ε(|bi + t| + |bj − t|).
fn pair_step(g: f64, h: f64, bi: f64, bj: f64, eps: f64) -> f64 {
    let phi = |t: f64| g * t + h * t * t / 2.0 + eps * ((bi + t).abs() + (bj - t).abs());
    let mut best = (0.0, phi(0.0));
    let mut consider = |t: f64| {
        let v = phi(t);
        if v < best.1 {
            best = (t, v);
        }
    };
    consider(-bi);
    consider(bj);
    for si in [-1.0, 1.0] {
        for sj in [-1.0, 1.0] {
            let t = -(g + eps * (si - sj)) / h;
            if (bi + t) * si >= 0.0 && (bj - t) * sj >= 0.0 {
                consider(t);
            }
        }
    }
    best.0
}

/// Dual coordinate descent with the bias handled exactly: the bias adds the
/// constraint Σβ = 0, so coordinates move in pairs (βᵢ += t, βⱼ −= t) with
/// each pair minimized in closed form. Each epoch pairs the examples whose
/// admissible bias ranges disagree most, then stops once the largest
/// disagreement is within tolerance. No shrinking.
pub fn solve(problem: &Problem, hp: &Hyperparams) -> Solution {
    let n = problem.rows.len();
    let lambda = 0.5 / hp.c;
    let eps = hp.epsilon;
    let sq: Vec<f64> = problem.rows.iter().map(|r| r.iter().map(|(_, v)| v * v).sum()).collect();
    let mut beta = vec![0.0; n];
    let mut w = vec![0.0; problem.dim()];
    let mut rng = ChaCha8Rng::seed_from_u64(hp.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut history = vec![0.0];
    let mut converged = false;
    let mut epochs = 0;
    let grad = |i: usize, w: &[f64], beta: &[f64]| {
        Problem::dot(&problem.rows[i], w) - problem.targets[i] + lambda * beta[i]
    };

    let (bias, violation) = loop {
        let intervals: Vec<(f64, f64)> = (0..n).map(|i| bias_interval(beta[i], grad(i, &w, &beta), eps)).collect();
        let lo = intervals.iter().map(|r| r.0).fold(f64::NEG_INFINITY, f64::max);
        let hi = intervals.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
        let violation = (lo - hi).max(0.0);
        if violation <= hp.tolerance {
            converged = true;
            break ((lo + hi) / 2.0, violation);
        }
        if epochs == hp.max_epochs {
            break ((lo + hi) / 2.0, violation);
        }
        epochs += 1;

        // greedy matching of violating pairs, largest disagreement first
        order.shuffle(&mut rng);
        let mut by_lo = order.clone();
        by_lo.sort_by(|&a, &b| intervals[b].0.total_cmp(&intervals[a].0));
        let mut by_hi = order.clone();
        by_hi.sort_by(|&a, &b| intervals[a].1.total_cmp(&intervals[b].1));
        let mut used = vec![false; n];
        let mut pairs = Vec::with_capacity(n / 2);
        let (mut p, mut q) = (0, 0);
        while p < n && q < n {
            let (i, j) = (by_lo[p], by_hi[q]);
            if used[i] {
                p += 1;
                continue;
            }
            if used[j] || i == j {
                q += 1;
                continue;
            }
            if intervals[i].0 <= intervals[j].1 {
                break;
            }
            used[i] = true;
            used[j] = true;
            pairs.push((i, j));
        }
        for (i, j) in pairs {
            let (ri, rj) = (&problem.rows[i], &problem.rows[j]);
            let g = grad(i, &w, &beta) - grad(j, &w, &beta);
            let h = sq[i] + sq[j] - 2.0 * Problem::row_dot(ri, rj) + 2.0 * lambda;
            let t = pair_step(g, h, beta[i], beta[j], eps);
            if t == 0.0 {
                continue;
            }
            beta[i] += t;
            beta[j] -= t;
            for &(f, v) in ri {
                w[f] += t * v;
            }
            for &(f, v) in rj {
                w[f] -= t * v;
            }
        }
        history.push(problem.dual_objective(&beta, hp.c, eps));
    };
    Solution {
        beta,
        weights: w,
        bias,
        report: TrainReport {
            epochs,
            converged,
            dual_objective: history,
            final_violation: violation,
        },
    }
}

pub fn train_with_report(
    examples: &[(FeatureVector, f64)],
    hp: &Hyperparams,
) -> Result<(RegressionModel, TrainReport), RegressionError> {
    let problem = Problem::new(examples)?;
    let sol = solve(&problem, hp);
    let weights = problem
        .names
        .into_iter()
        .zip(sol.weights)
        .filter(|(_, v)| *v != 0.0)
        .collect();
    Ok((
        RegressionModel {
            weights,
            bias: sol.bias,
            hyperparams: *hp,
        },
        sol.report,
    ))
}

pub fn train(examples: &[(FeatureVector, f64)], hp: &Hyperparams) -> Result<RegressionModel, RegressionError> {
    train_with_report(examples, hp).map(|(m, _)| m)
}

impl RegressionModel {
    /// w·x + b; features unseen in training contribute nothing. Unclipped.
    pub fn predict(&self, x: &FeatureVector) -> f64 {
        self.bias
            + x.iter()
                .map(|(k, v)| self.weights.get(k).map_or(0.0, |w| w * v))
                .sum::<f64>()
    }

    pub fn to_tsv(&self) -> String {
        let hp = &self.hyperparams;
        let mut out = format!(
            "{MODEL_MAGIC} C={} epsilon={} tolerance={} max_epochs={} seed={} bias={}\n",
            hp.c, hp.epsilon, hp.tolerance, hp.max_epochs, hp.seed, self.bias
        );
        for (k, v) in &self.weights {
            out.push_str(&format!("{k}\t{v}\n"));
        }
        out
    }

    pub fn from_tsv(content: &str) -> Result<Self, RegressionError> {
        let parse_err = |line: usize, message: String| RegressionError::Parse { line, message };
        let mut lines = content.lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| parse_err(1, "empty model file".into()))?;
        let rest = header
            .strip_prefix(MODEL_MAGIC)
            .ok_or_else(|| parse_err(1, "missing model header".into()))?;
        let fields: BTreeMap<&str, &str> = rest.split_whitespace().filter_map(|kv| kv.split_once('=')).collect();
        let num = |key: &str| -> Result<f64, RegressionError> {
            fields
                .get(key)
                .ok_or_else(|| parse_err(1, format!("header lacks {key}")))?
                .parse::<f64>()
                .map_err(|e| parse_err(1, format!("bad {key}: {e}")))
        };
        let hyperparams = Hyperparams {
            c: num("C")?,
            epsilon: num("epsilon")?,
            tolerance: num("tolerance")?,
            max_epochs: num("max_epochs")? as usize,
            seed: num("seed")? as u64,
        };
        let bias = num("bias")?;
        let mut weights = BTreeMap::new();
        for (idx, line) in lines {
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .rsplit_once('\t')
                .ok_or_else(|| parse_err(idx + 1, "expected feature<TAB>weight".into()))?;
            let v: f64 = v.parse().map_err(|e| parse_err(idx + 1, format!("bad weight: {e}")))?;
            if !v.is_finite() {
                return Err(parse_err(idx + 1, "non-finite weight".into()));
            }
            weights.insert(k.to_string(), v);
        }
        Ok(Self { weights, bias, hyperparams })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), RegressionError> {
        let path = path.as_ref();
        fs::write(path, self.to_tsv()).map_err(|e| RegressionError::Io {
            path: path.display().to_string(),
            source: e,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, RegressionError> {
        let path = path.as_ref();
        let content = fs::read_to_string(path).map_err(|e| RegressionError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::from_tsv(&content)
    }
}

pub fn predict(model: &RegressionModel, x: &FeatureVector) -> f64 {
    model.predict(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub pearson: f64,
    pub spearman: f64,
    pub n: usize,
    pub subset_threshold: Option<f64>,
}

pub fn evaluate(model: &RegressionModel, test: &[(FeatureVector, f64)]) -> Result<EvalResult, RegressionError> {
    let preds: Vec<f64> = test.iter().map(|(x, _)| model.predict(x)).collect();
    let gold: Vec<f64> = test.iter().map(|(_, y)| *y).collect();
    Ok(EvalResult {
        pearson: stats::pearson(&preds, &gold)?,
        spearman: stats::spearman(&preds, &gold)?,
        n: test.len(),
        subset_threshold: None,
    })
}

/// Evaluation over the items whose gold score is at least `threshold`.
pub fn evaluate_subset(
    model: &RegressionModel,
    test: &[(FeatureVector, f64)],
    threshold: f64,
) -> Result<EvalResult, RegressionError> {
    let subset: Vec<(FeatureVector, f64)> = test.iter().filter(|(_, y)| *y >= threshold).cloned().collect();
    if subset.len() < 2 {
        return Err(RegressionError::TooFew { needed: 2, got: subset.len() });
    }
    let mut r = evaluate(model, &subset)?;
    r.subset_threshold = Some(threshold);
    Ok(r)
}

/// Feature vectors for the scored items of `partitions`.
pub fn featurize(
    dataset: &Dataset,
    partitions: &[Partition],
    config: &FeatureConfig,
    resources: &Resources,
) -> Result<Vec<(FeatureVector, f64)>, RegressionError> {
    dataset
        .in_partitions(partitions)
        .map(|item| {
            let y = item
                .gold_score
                .ok_or_else(|| RegressionError::Data(format!("item {} has no score", item.id)))?;
            Ok((assemble(&item.text, config, resources)?, y))
        })
        .collect()
}

/// Final models train on train + dev.
pub const TRAIN_PARTITIONS: [Partition; 2] = [Partition::Train, Partition::Dev];
pub const TEST_PARTITIONS: [Partition; 1] = [Partition::Test];

fn dataset_emotion(d: &Dataset) -> Result<Emotion, RegressionError> {
    d.emotion.ok_or_else(|| RegressionError::Data("dataset has no emotion".into()))
}

pub fn train_and_evaluate(
    train_sets: &[&Dataset],
    test_set: &Dataset,
    config: &FeatureConfig,
    resources: &Resources,
    hp: &Hyperparams,
    subset_threshold: Option<f64>,
) -> Result<EvalResult, RegressionError> {
    let mut train_examples = Vec::new();
    for d in train_sets {
        train_examples.extend(featurize(d, &TRAIN_PARTITIONS, config, resources)?);
    }
    let test = featurize(test_set, &TEST_PARTITIONS, config, resources)?;
    let model = train(&train_examples, hp)?;
    match subset_threshold {
        Some(t) => evaluate_subset(&model, &test, t),
        None => evaluate(&model, &test),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub config: String,
    pub results: Vec<EvalResult>,
    pub average: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationTable {
    pub emotions: Vec<Emotion>,
    pub rows: Vec<AblationRow>,
    pub subset_threshold: Option<f64>,
}

/// One row per configuration, one column per dataset plus the macro-average
/// Pearson. Cells train in parallel.
pub fn ablation_run(
    datasets: &[Dataset],
    configs: &[FeatureConfig],
    resources: &Resources,
    hp: &Hyperparams,
    subset_threshold: Option<f64>,
) -> Result<AblationTable, RegressionError> {
    let emotions = datasets.iter().map(dataset_emotion).collect::<Result<Vec<_>, _>>()?;
    let cells: Vec<(usize, usize)> = (0..configs.len())
        .flat_map(|c| (0..datasets.len()).map(move |d| (c, d)))
        .collect();
    let results = cells
        .par_iter()
        .map(|&(c, d)| train_and_evaluate(&[&datasets[d]], &datasets[d], &configs[c], resources, hp, subset_threshold))
        .collect::<Result<Vec<_>, _>>()?;
    let rows = configs
        .iter()
        .enumerate()
        .map(|(c, cfg)| {
            let row: Vec<EvalResult> = results[c * datasets.len()..(c + 1) * datasets.len()].to_vec();
            let average = row.iter().map(|r| r.pearson).sum::<f64>() / row.len().max(1) as f64;
            AblationRow {
                config: cfg.to_string(),
                results: row,
                average,
            }
        })
        .collect();
    Ok(AblationTable {
        emotions,
        rows,
        subset_threshold,
    })
}

impl AblationTable {
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("config");
        for e in &self.emotions {
            out.push_str(&format!("\t{e}"));
        }
        out.push_str("\tavg.\n");
        for row in &self.rows {
            out.push_str(&row.config);
            for r in &row.results {
                out.push_str(&format!("\t{:.3}", r.pearson));
            }
            out.push_str(&format!("\t{:.3}\n", row.average));
        }
        out
    }

    /// Flat `config, emotion, pearson, spearman, n, threshold` rows.
    pub fn to_flat_tsv(&self) -> String {
        let mut out = String::from("config\temotion\tpearson\tspearman\tn\tsubset_threshold\n");
        for row in &self.rows {
            for (e, r) in self.emotions.iter().zip(&row.results) {
                let t = r.subset_threshold.map_or("NONE".to_string(), |t| t.to_string());
                out.push_str(&format!("{}\t{e}\t{}\t{}\t{}\t{t}\n", row.config, r.pearson, r.spearman, r.n));
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferMatrix {
    pub emotions: Vec<Emotion>,
    /// cells[train][test]
    pub cells: Vec<Vec<f64>>,
}

/// Train on each dataset's train + dev, evaluate on every dataset's test.
pub fn transfer_matrix(
    datasets: &[Dataset],
    config: &FeatureConfig,
    resources: &Resources,
    hp: &Hyperparams,
) -> Result<TransferMatrix, RegressionError> {
    let emotions = datasets.iter().map(dataset_emotion).collect::<Result<Vec<_>, _>>()?;
    let k = datasets.len();
    let features = datasets
        .par_iter()
        .map(|d| {
            Ok((
                featurize(d, &TRAIN_PARTITIONS, config, resources)?,
                featurize(d, &TEST_PARTITIONS, config, resources)?,
            ))
        })
        .collect::<Result<Vec<_>, RegressionError>>()?;
    let models = features
        .par_iter()
        .map(|(train_set, _)| train(train_set, hp))
        .collect::<Result<Vec<_>, _>>()?;
    let mut cells = vec![vec![0.0; k]; k];
    for (i, model) in models.iter().enumerate() {
        for (j, (_, test)) in features.iter().enumerate() {
            cells[i][j] = evaluate(model, test)?.pearson;
        }
    }
    Ok(TransferMatrix { emotions, cells })
}

/// Pearson of a model trained on the union of `train_sets` on `test_set`'s test split.
pub fn transfer_pooled(
    train_sets: &[&Dataset],
    test_set: &Dataset,
    config: &FeatureConfig,
    resources: &Resources,
    hp: &Hyperparams,
) -> Result<EvalResult, RegressionError> {
    train_and_evaluate(train_sets, test_set, config, resources, hp, None)
}

impl fmt::Display for TransferMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "train\\test")?;
        for e in &self.emotions {
            write!(f, "\t{e}")?;
        }
        writeln!(f)?;
        for (e, row) in self.emotions.iter().zip(&self.cells) {
            write!(f, "{e}")?;
            for v in row {
                write!(f, "\t{v:.3}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}
