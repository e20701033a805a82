//! Pairwise calibration and voting: turns per-class unnormalized
//! log-likelihoods into multi-class decisions without ever computing a
//! partition function.
//!
//! For classes `i < j` a threshold `c_ij` calibrates the score difference
//! `t = g_i(V) - g_j(V)`; the pair votes for `i` when `t` exceeds `c_ij`.
//! Votes are either soft (a sigmoid of the margin, sharpness `alpha`) or
//! hard, and each class accumulates its votes into a score; the highest
//! score wins. Thresholds absorb the unknown log-partition gap between the
//! class models, so adding any constant to every `g` leaves decisions
//! unchanged.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::{NormStats, PreprocessConfig};
use crate::error::{Error, Result};
use crate::math::sigmoid;
use crate::model::{LrbmModel, SequenceSample, TrainProvenance};

/// A fitted pairwise threshold, with a flag raised when every calibration
/// score difference was identical and the threshold is arbitrary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CijEstimate {
    pub threshold: f64,
    pub degenerate: bool,
}

/// Fits the threshold for one class pair from calibration score
/// differences `t = g_first - g_second`: `t_first` comes from samples of
/// the first class (which should land above the threshold), `t_second`
/// from the second.
///
/// Candidates are the midpoints of consecutive sorted `t` values; the one
/// maximizing balanced accuracy wins. Ties prefer the candidate closest to
/// the median of all `t`, then the smaller candidate. If every `t` is
/// identical the threshold is that value and the degenerate flag is set.
pub fn estimate_cij(t_first: &[f64], t_second: &[f64]) -> Result<CijEstimate> {
    if t_first.is_empty() || t_second.is_empty() {
        return Err(Error::Data(
            "threshold calibration needs samples from both classes".into(),
        ));
    }
    for &t in t_first.iter().chain(t_second) {
        if !t.is_finite() {
            return Err(Error::Numerical(format!(
                "non-finite score difference {t} during calibration"
            )));
        }
    }
    let mut all: Vec<f64> = t_first.iter().chain(t_second).copied().collect();
    all.sort_by(f64::total_cmp);
    let n = all.len();
    if all[0] == all[n - 1] {
        return Ok(CijEstimate { threshold: all[0], degenerate: true });
    }
    let median = if n % 2 == 1 {
        all[n / 2]
    } else {
        0.5 * (all[n / 2 - 1] + all[n / 2])
    };

    let balanced_accuracy = |c: f64| -> f64 {
        let hit_first = t_first.iter().filter(|&&t| t > c).count() as f64
            / t_first.len() as f64;
        let hit_second = t_second.iter().filter(|&&t| t <= c).count() as f64
            / t_second.len() as f64;
        0.5 * (hit_first + hit_second)
    };

    let mut best: Option<(f64, f64, f64)> = None; // (accuracy, median distance, threshold)
    for k in 0..n - 1 {
        let cand = 0.5 * (all[k] + all[k + 1]);
        let acc = balanced_accuracy(cand);
        let dist = (cand - median).abs();
        let better = match best {
            None => true,
            Some((b_acc, b_dist, b_c)) => {
                acc > b_acc
                    || (acc == b_acc && dist < b_dist)
                    || (acc == b_acc && dist == b_dist && cand < b_c)
            }
        };
        if better {
            best = Some((acc, dist, cand));
        }
    }
    let (_, _, threshold) = best.expect("at least one midpoint exists");
    Ok(CijEstimate { threshold, degenerate: false })
}

/// Number of sharpness candidates tried when fitting `alpha`.
pub const ALPHA_GRID_SIZE: usize = 30;

/// Log-spaced sharpness grid on `[0.01, 100]`, endpoints exact.
pub fn alpha_grid() -> Vec<f64> {
    let lo = 0.01f64.ln();
    let hi = 100.0f64.ln();
    (0..ALPHA_GRID_SIZE)
        .map(|k| match k {
            0 => 0.01,
            k if k == ALPHA_GRID_SIZE - 1 => 100.0,
            k => (lo + (hi - lo) * k as f64 / (ALPHA_GRID_SIZE - 1) as f64).exp(),
        })
        .collect()
}

/// Pairwise thresholds for every class pair plus the vote sharpness.
/// Thresholds are stored for `i < j` only; the accessor is antisymmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseCalibration {
    n_classes: usize,
    /// `c_ij` for `i < j` in row-major upper-triangle order.
    c_upper: Vec<f64>,
    pub alpha: f64,
}

impl PairwiseCalibration {
    pub fn new(n_classes: usize, c_upper: Vec<f64>, alpha: f64) -> Result<Self> {
        if n_classes < 2 {
            return Err(Error::InvalidConfig(format!(
                "pairwise calibration needs at least 2 classes, got {n_classes}"
            )));
        }
        let want = n_classes * (n_classes - 1) / 2;
        if c_upper.len() != want {
            return Err(Error::InvalidConfig(format!(
                "{n_classes} classes need {want} thresholds, got {}",
                c_upper.len()
            )));
        }
        if !c_upper.iter().all(|c| c.is_finite()) {
            return Err(Error::InvalidConfig("non-finite pairwise threshold".into()));
        }
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "vote sharpness must be positive and finite, got {alpha}"
            )));
        }
        Ok(PairwiseCalibration { n_classes, c_upper, alpha })
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    /// Same thresholds with a different sharpness.
    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        PairwiseCalibration::new(self.n_classes, self.c_upper.clone(), alpha)
    }

    fn upper_index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < j && j < self.n_classes);
        i * (2 * self.n_classes - i - 1) / 2 + (j - i - 1)
    }

    /// Antisymmetric threshold accessor: `c(i, j) == -c(j, i)`, zero on the
    /// diagonal.
    pub fn c(&self, i: usize, j: usize) -> f64 {
        use std::cmp::Ordering::*;
        match i.cmp(&j) {
            Equal => 0.0,
            Less => self.c_upper[self.upper_index(i, j)],
            Greater => -self.c_upper[self.upper_index(j, i)],
        }
    }

    /// Raw upper-triangle storage, row-major over `i < j`.
    pub fn c_upper(&self) -> &[f64] {
        &self.c_upper
    }

    /// Signed transitivity defect `c_ij + c_jk - c_ik` for every triple
    /// `i < j < k`. Thresholds estimated pair by pair need not telescope;
    /// the defects quantify how far they are from doing so.
    pub fn transitivity_defects(&self) -> Vec<((usize, usize, usize), f64)> {
        let n = self.n_classes;
        let mut out = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                for k in j + 1..n {
                    let defect = self.c(i, j) + self.c(j, k) - self.c(i, k);
                    out.push(((i, j, k), defect));
                }
            }
        }
        out
    }
}

/// How pairwise votes are cast.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VoteMode {
    /// Sigmoid of the sharpened margin: graded votes in `(0, 1)`.
    #[default]
    Soft,
    /// One full vote to the winning side of each pair; split on exact ties.
    Hard,
}

/// Pairwise preference matrix from per-class scores `g`.
///
/// `R[(i, j)]` is class `i`'s vote strength against class `j`:
/// `sigmoid(alpha * (g_i - g_j - c(i, j)))` for `i < j`, the exact
/// complement `1 - R[(j, i)]` for `i > j`, zero on the diagonal. Hard mode
/// rounds votes to 0 or 1, splitting exact ties at one half.
pub fn preference_matrix(
    g: &[f64],
    cal: &PairwiseCalibration,
    mode: VoteMode,
) -> Result<DMatrix<f64>> {
    let n = cal.n_classes();
    if g.len() != n {
        return Err(Error::Dimension(format!(
            "got {} scores for {n} classes",
            g.len()
        )));
    }
    if !g.iter().all(|x| x.is_finite()) {
        return Err(Error::Numerical("non-finite class score".into()));
    }
    let mut r = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let margin = g[i] - g[j] - cal.c(i, j);
            let vote = match mode {
                VoteMode::Soft => sigmoid(cal.alpha * margin),
                VoteMode::Hard => {
                    if margin > 0.0 {
                        1.0
                    } else if margin < 0.0 {
                        0.0
                    } else {
                        0.5
                    }
                }
            };
            r[(i, j)] = vote;
            r[(j, i)] = 1.0 - vote;
        }
    }
    Ok(r)
}

/// Per-class vote totals `S(i) = sum over j != i of R(i, j)`.
pub fn class_scores(
    g: &[f64],
    cal: &PairwiseCalibration,
    mode: VoteMode,
) -> Result<Vec<f64>> {
    let r = preference_matrix(g, cal, mode)?;
    Ok((0..cal.n_classes()).map(|i| r.row(i).sum()).collect())
}

/// Index of the class with the highest vote total; the lowest index wins
/// exact ties.
pub fn predict_index(
    g: &[f64],
    cal: &PairwiseCalibration,
    mode: VoteMode,
) -> Result<usize> {
    let scores = class_scores(g, cal, mode)?;
    Ok(argmax_lowest(&scores))
}

/// First index attaining the maximum.
pub fn argmax_lowest(xs: &[f64]) -> usize {
    let mut best = 0;
    for (k, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = k;
        }
    }
    best
}

/// The result of classifying one sequence: the winning class index and the
/// per-class vote totals it was chosen from.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub class_index: usize,
    pub scores: Vec<f64>,
}

/// A complete classifier: one generative model per class, pairwise
/// calibration, and the preprocessing provenance needed to reproduce its
/// input representation.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierBundle {
    /// Lexicographically sorted, unique class labels; all index-aligned
    /// fields follow this order.
    pub class_labels: Vec<String>,
    pub models: Vec<LrbmModel>,
    pub calibration: PairwiseCalibration,
    /// Normalization applied to the training data, if any.
    pub norm_stats: Option<NormStats>,
    /// Preprocessing pipeline the training data went through, if recorded.
    pub preprocess: Option<PreprocessConfig>,
    /// Per-model training provenance, index-aligned with `models`.
    pub provenance: Option<Vec<TrainProvenance>>,
}

impl ClassifierBundle {
    pub fn validate(&self) -> Result<()> {
        let n = self.class_labels.len();
        if n < 2 {
            return Err(Error::InvalidConfig(format!(
                "a classifier needs at least 2 classes, got {n}"
            )));
        }
        if self.models.len() != n {
            return Err(Error::InvalidConfig(format!(
                "{n} labels but {} models",
                self.models.len()
            )));
        }
        if self.calibration.n_classes() != n {
            return Err(Error::InvalidConfig(format!(
                "{n} labels but calibration covers {} classes",
                self.calibration.n_classes()
            )));
        }
        for pair in self.class_labels.windows(2) {
            if pair[0] >= pair[1] {
                return Err(Error::InvalidConfig(format!(
                    "class labels must be sorted and unique: {:?} before {:?}",
                    pair[0], pair[1]
                )));
            }
        }
        let (d, n_t) = (self.models[0].d(), self.models[0].n_t());
        for (k, m) in self.models.iter().enumerate() {
            m.validate()?;
            if m.d() != d || m.n_t() != n_t {
                return Err(Error::InvalidConfig(format!(
                    "model {k} is {}x{}, expected {d}x{n_t}",
                    m.d(),
                    m.n_t()
                )));
            }
        }
        if let Some(stats) = &self.norm_stats {
            if stats.mean.len() != d || stats.std.len() != d {
                return Err(Error::InvalidConfig(format!(
                    "normalization statistics cover {} dimensions, models expect {d}",
                    stats.mean.len()
                )));
            }
        }
        if let Some(prov) = &self.provenance {
            if prov.len() != n {
                return Err(Error::InvalidConfig(format!(
                    "{n} models but {} provenance records",
                    prov.len()
                )));
            }
        }
        Ok(())
    }

    pub fn n_classes(&self) -> usize {
        self.class_labels.len()
    }

    /// Unnormalized log-likelihood of the sequence under each class model.
    pub fn g_scores(&self, v: &SequenceSample) -> Result<Vec<f64>> {
        self.models.iter().map(|m| m.unnormalized_loglik(v)).collect()
    }

    /// Classifies one sequence.
    pub fn predict(&self, v: &SequenceSample, mode: VoteMode) -> Result<Prediction> {
        let g = self.g_scores(v)?;
        let scores = class_scores(&g, &self.calibration, mode)?;
        Ok(Prediction { class_index: argmax_lowest(&scores), scores })
    }
}

/// Picks the vote sharpness maximizing plain accuracy on validation data:
/// `g_rows[s]` holds per-class scores for sample `s` with true class
/// `labels[s]`. Grid search over [`alpha_grid`]; the smallest tied value
/// wins.
pub fn fit_alpha(
    g_rows: &[Vec<f64>],
    labels: &[usize],
    thresholds: &PairwiseCalibration,
) -> Result<f64> {
    if g_rows.is_empty() || g_rows.len() != labels.len() {
        return Err(Error::Data(format!(
            "sharpness fitting needs matching non-empty scores and labels, got {} and {}",
            g_rows.len(),
            labels.len()
        )));
    }
    let n = thresholds.n_classes();
    for (row, &label) in g_rows.iter().zip(labels) {
        if row.len() != n {
            return Err(Error::Dimension(format!(
                "score row has {} entries for {n} classes",
                row.len()
            )));
        }
        if label >= n {
            return Err(Error::Data(format!(
                "label index {label} out of range for {n} classes"
            )));
        }
    }
    let count_correct = |cal: &PairwiseCalibration| -> Result<usize> {
        let mut correct = 0;
        for (row, &label) in g_rows.iter().zip(labels) {
            if predict_index(row, cal, VoteMode::Soft)? == label {
                correct += 1;
            }
        }
        Ok(correct)
    };
    let grid = alpha_grid();
    let mut best_alpha = grid[0];
    let mut best_correct = count_correct(&thresholds.with_alpha(grid[0])?)?;
    for &alpha in &grid[1..] {
        let correct = count_correct(&thresholds.with_alpha(alpha)?)?;
        if correct > best_correct {
            best_alpha = alpha;
            best_correct = correct;
        }
    }
    Ok(best_alpha)
}

/// Evaluation summary over a labeled set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub class_labels: Vec<String>,
    /// Raw confusion counts, `confusion[true][predicted]`.
    pub confusion: Vec<Vec<usize>>,
    /// Row-normalized confusion in percent; all-zero rows stay zero.
    pub confusion_percent: Vec<Vec<f64>>,
    /// Hit rate per true class; zero for classes absent from the truth.
    pub per_class_accuracy: Vec<f64>,
    /// Mean per-class hit rate over classes present in the truth.
    pub macro_accuracy: f64,
    /// Plain fraction of correct predictions.
    pub accuracy: f64,
    /// One-vs-rest ranking AUC per class from the vote totals; `None` when
    /// the class has no positives or no negatives.
    pub per_class_auc: Vec<Option<f64>>,
    /// F1 per group under an optional class-to-group mapping, sorted by
    /// group name; empty when no mapping was given.
    pub group_f1: Vec<(String, f64)>,
}

impl EvalReport {
    /// Tallies a report from parallel truth/prediction index arrays and
    /// the per-sample vote totals. `groups`, when given, assigns a group
    /// name to each class index.
    pub fn from_predictions(
        class_labels: &[String],
        truth: &[usize],
        predicted: &[usize],
        scores: &[Vec<f64>],
        groups: Option<&[String]>,
    ) -> Result<EvalReport> {
        let n = class_labels.len();
        if n == 0 {
            return Err(Error::InvalidConfig("no classes to evaluate".into()));
        }
        if truth.len() != predicted.len() || truth.len() != scores.len() {
            return Err(Error::Dimension(format!(
                "{} truths, {} predictions, {} score rows",
                truth.len(),
                predicted.len(),
                scores.len()
            )));
        }
        if truth.is_empty() {
            return Err(Error::Data("cannot evaluate an empty set".into()));
        }
        for (&t, (&p, row)) in truth.iter().zip(predicted.iter().zip(scores)) {
            if t >= n || p >= n {
                return Err(Error::Data(format!(
                    "class index out of range: truth {t}, predicted {p}, {n} classes"
                )));
            }
            if row.len() != n {
                return Err(Error::Dimension(format!(
                    "score row has {} entries for {n} classes",
                    row.len()
                )));
            }
        }
        if let Some(groups) = groups {
            if groups.len() != n {
                return Err(Error::InvalidConfig(format!(
                    "group mapping covers {} classes, expected {n}",
                    groups.len()
                )));
            }
        }

        let mut confusion = vec![vec![0usize; n]; n];
        for (&t, &p) in truth.iter().zip(predicted) {
            confusion[t][p] += 1;
        }
        let mut confusion_percent = vec![vec![0.0f64; n]; n];
        let mut per_class_accuracy = vec![0.0f64; n];
        let mut macro_sum = 0.0;
        let mut present = 0usize;
        for (k, row) in confusion.iter().enumerate() {
            let total: usize = row.iter().sum();
            if total > 0 {
                for (j, &c) in row.iter().enumerate() {
                    confusion_percent[k][j] = 100.0 * c as f64 / total as f64;
                }
                per_class_accuracy[k] = row[k] as f64 / total as f64;
                macro_sum += per_class_accuracy[k];
                present += 1;
            }
        }
        let macro_accuracy = macro_sum / present as f64;
        let correct = truth.iter().zip(predicted).filter(|(t, p)| t == p).count();
        let accuracy = correct as f64 / truth.len() as f64;

        let per_class_auc = (0..n)
            .map(|k| {
                one_vs_rest_auc(
                    scores.iter().map(|row| row[k]),
                    truth.iter().map(|&t| t == k),
                )
            })
            .collect();

        let group_f1 = match groups {
            None => Vec::new(),
            Some(groups) => {
                let mut names: Vec<&String> = groups.iter().collect();
                names.sort();
                names.dedup();
                names
                    .into_iter()
                    .map(|name| {
                        let in_group = |k: usize| &groups[k] == name;
                        let mut tp = 0usize;
                        let mut fp = 0usize;
                        let mut fn_ = 0usize;
                        for (&t, &p) in truth.iter().zip(predicted) {
                            match (in_group(t), in_group(p)) {
                                (true, true) => tp += 1,
                                (false, true) => fp += 1,
                                (true, false) => fn_ += 1,
                                (false, false) => {}
                            }
                        }
                        let precision = ratio_or_zero(tp, tp + fp);
                        let recall = ratio_or_zero(tp, tp + fn_);
                        let f1 = if precision + recall > 0.0 {
                            2.0 * precision * recall / (precision + recall)
                        } else {
                            0.0
                        };
                        (name.clone(), f1)
                    })
                    .collect()
            }
        };

        Ok(EvalReport {
            class_labels: class_labels.to_vec(),
            confusion,
            confusion_percent,
            per_class_accuracy,
            macro_accuracy,
            accuracy,
            per_class_auc,
            group_f1,
        })
    }
}

fn ratio_or_zero(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Ranking AUC via midranks (equivalent to the trapezoidal area under the
/// ROC curve with tied scores averaged). `None` when either side is empty.
fn one_vs_rest_auc(
    scores: impl Iterator<Item = f64>,
    is_positive: impl Iterator<Item = bool>,
) -> Option<f64> {
    let mut rows: Vec<(f64, bool)> = scores.zip(is_positive).collect();
    let n_pos = rows.iter().filter(|(_, p)| *p).count();
    let n_neg = rows.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut rank_sum = 0.0;
    let mut k = 0;
    while k < rows.len() {
        let mut m = k;
        while m + 1 < rows.len() && rows[m + 1].0 == rows[k].0 {
            m += 1;
        }
        // Tied block [k, m]: every member gets the mean rank (1-based).
        let midrank = (k + m) as f64 / 2.0 + 1.0;
        for row in &rows[k..=m] {
            if row.1 {
                rank_sum += midrank;
            }
        }
        k = m + 1;
    }
    let u = rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Some(u / (n_pos as f64 * n_neg as f64))
}
