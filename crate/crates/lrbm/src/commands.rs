//! Library implementations of the command-line operations.
//!
//! Each function performs one subcommand end to end and returns the human
//! summary the binary prints. Every file an operation writes is
//! deterministic byte for byte given the same inputs and arguments: RNG
//! streams derive from explicit seeds, classes are processed in sorted
//! label order, parallel work is collected in input order, and nothing
//! here consults the clock or unordered containers.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write as _};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::classify::{
    estimate_cij, fit_alpha, ClassifierBundle, EvalReport, PairwiseCalibration, VoteMode,
};
use crate::data::{
    average_bone_lengths, impute_missing, inject_missing, inject_noise, interpolate,
    normalize_apply, normalize_fit, select_features, skeleton_renormalize, smooth,
    NormStats, PreprocessConfig, RawSequence, SkeletonSpec, SkeletonTopology,
};
use crate::error::{Error, Result};
use crate::io::{read_bundle, read_dataset, read_model, to_fixed, write_bundle, write_dataset};
use crate::math::{derive_seed, lambda_max_symmetric};
use crate::model::{SequenceSample, TrainProvenance};
use crate::oracle::{make_synthetic_dataset, SynthConfig};
use crate::train::{select_candidate, train_candidates, TrainConfig};

/// Reads the LRBM_THREADS override: `None` when unset, the validated
/// positive worker count otherwise. The binary applies it to the global
/// thread pool before dispatching.
pub fn threads_from_env() -> Result<Option<usize>> {
    match std::env::var("LRBM_THREADS") {
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(Error::InvalidConfig(format!("LRBM_THREADS: {e}"))),
        Ok(raw) => {
            let n: usize = raw.trim().parse().map_err(|_| {
                Error::InvalidConfig(format!(
                    "LRBM_THREADS must be a positive integer, got {raw:?}"
                ))
            })?;
            if n == 0 {
                return Err(Error::InvalidConfig(
                    "LRBM_THREADS must be at least 1".into(),
                ));
            }
            Ok(Some(n))
        }
    }
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let file = File::open(path)?;
    serde_json::from_reader(BufReader::new(file))
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    PathBuf::from(format!("{}{suffix}", prefix.display()))
}

/// Arguments for [`cmd_preprocess`]. Steps run in pipeline order: skeleton
/// renormalization, feature selection, smoothing, interpolation,
/// normalization; absent options are skipped.
#[derive(Debug, Clone)]
pub struct PreprocessArgs {
    pub input: PathBuf,
    pub output: PathBuf,
    /// JSON [`SkeletonSpec`]; when its target lengths are absent they are
    /// averaged from this dataset and the resolved spec is written back so
    /// later runs reuse identical targets.
    pub skeleton_spec: Option<PathBuf>,
    pub feature_subset: Option<Vec<usize>>,
    pub smooth_window: Option<usize>,
    pub target_length: Option<usize>,
    /// Fit and apply z-score normalization (without persisting the stats).
    pub normalize: bool,
    /// Normalization statistics file: loaded and applied when it exists,
    /// otherwise fitted on this dataset and saved there. Implies
    /// normalization.
    pub norm_stats_path: Option<PathBuf>,
}

/// Reads a dataset, applies the configured pipeline, writes the result.
pub fn cmd_preprocess(args: &PreprocessArgs) -> Result<String> {
    let mut seqs = read_dataset(&args.input)?;
    if seqs.is_empty() {
        return Err(Error::Data(format!(
            "{}: dataset has no sequences",
            args.input.display()
        )));
    }
    let mut summary = String::new();
    let _ = writeln!(summary, "read {} sequences from {}", seqs.len(), args.input.display());

    if let Some(spec_path) = &args.skeleton_spec {
        let spec: SkeletonSpec = read_json(spec_path)?;
        let topo = SkeletonTopology::new(spec.parents.clone())?;
        let targets = match &spec.target_bone_lengths {
            Some(t) => t.clone(),
            None => {
                let t = average_bone_lengths(&seqs, &topo)?;
                let resolved = SkeletonSpec {
                    parents: spec.parents.clone(),
                    target_bone_lengths: Some(t.clone()),
                };
                write_json(spec_path, &resolved)?;
                let _ = writeln!(
                    summary,
                    "resolved bone lengths from data and updated {}",
                    spec_path.display()
                );
                t
            }
        };
        let mut warned = 0usize;
        for s in &mut seqs {
            let (renormed, w) = skeleton_renormalize(s, &topo, &targets)?;
            *s = renormed;
            if w {
                warned += 1;
            }
        }
        let _ = writeln!(summary, "skeleton renormalization applied");
        if warned > 0 {
            let _ = writeln!(
                summary,
                "warning: {warned} sequences had zero-length bones; directions were carried over"
            );
        }
    }

    if let Some(keep) = &args.feature_subset {
        for s in &mut seqs {
            *s = select_features(s, keep)?;
        }
        let _ = writeln!(summary, "kept {} of the original dimensions", keep.len());
    }

    if let Some(window) = args.smooth_window {
        for s in &mut seqs {
            *s = smooth(s, window)?;
        }
        let _ = writeln!(summary, "smoothed with window {window}");
    }

    if let Some(n_t) = args.target_length {
        for s in &mut seqs {
            let fixed = interpolate(s, n_t)?;
            *s = RawSequence { frames: fixed.frames, label: fixed.label, id: fixed.id };
        }
        let _ = writeln!(summary, "interpolated every sequence to {n_t} frames");
    }

    if args.normalize || args.norm_stats_path.is_some() {
        let stats = match &args.norm_stats_path {
            Some(p) if p.exists() => {
                let stats: NormStats = read_json(p)?;
                let _ = writeln!(summary, "loaded normalization statistics from {}", p.display());
                stats
            }
            Some(p) => {
                let stats = normalize_fit(&seqs)?;
                write_json(p, &stats)?;
                let _ = writeln!(summary, "fitted normalization statistics and saved {}", p.display());
                stats
            }
            None => {
                let _ = writeln!(summary, "fitted normalization statistics (not persisted)");
                normalize_fit(&seqs)?
            }
        };
        for s in &mut seqs {
            *s = normalize_apply(s, &stats)?;
        }
    }

    write_dataset(&args.output, &seqs)?;
    let _ = writeln!(summary, "wrote {} sequences to {}", seqs.len(), args.output.display());
    Ok(summary)
}

/// Arguments for [`cmd_train`].
#[derive(Debug, Clone)]
pub struct TrainArgs {
    /// Labeled fixed-length dataset.
    pub input: PathBuf,
    /// Bundle destination.
    pub output: PathBuf,
    pub config: TrainConfig,
    /// Per-class fraction held out for candidate selection and
    /// calibration; the held-out count is clamped to `[1, n-1]`.
    pub val_fraction: f64,
    /// Normalization statistics to embed as provenance (not applied).
    pub norm_stats_path: Option<PathBuf>,
    /// Preprocessing description to embed as provenance (not applied).
    pub preprocess_record: Option<PathBuf>,
}

/// Trains one model per class and assembles a calibrated classifier.
///
/// Per class, `candidates` independently seeded models are trained on the
/// training split and the one ranking its own validation samples highest
/// wins. Pairwise thresholds and the vote sharpness are then fitted on the
/// pooled validation split. Rerunning with identical inputs writes an
/// identical bundle.
pub fn cmd_train(args: &TrainArgs) -> Result<String> {
    args.config.validate()?;
    if !(args.val_fraction > 0.0 && args.val_fraction < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "validation fraction must lie in (0, 1), got {}",
            args.val_fraction
        )));
    }
    let samples = to_fixed(read_dataset(&args.input)?)?;
    if samples.is_empty() {
        return Err(Error::Data(format!(
            "{}: dataset has no sequences",
            args.input.display()
        )));
    }

    let mut by_label: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (k, s) in samples.iter().enumerate() {
        match &s.label {
            Some(label) => by_label.entry(label.clone()).or_default().push(k),
            None => {
                return Err(Error::Data(format!(
                    "sequence {k} ({}) has no label; training needs labeled data",
                    s.id.as_deref().unwrap_or("unnamed")
                )))
            }
        }
    }
    if by_label.len() < 2 {
        return Err(Error::Data(format!(
            "training needs at least 2 classes, found {}",
            by_label.len()
        )));
    }
    let labels: Vec<String> = by_label.keys().cloned().collect();

    // Deterministic per-class split: stream 0 of the class master seed
    // shuffles, stream 1 seeds training.
    struct ClassPlan {
        train: Vec<usize>,
        val: Vec<usize>,
        train_seed: u64,
    }
    let mut plans = Vec::with_capacity(labels.len());
    for (k, label) in labels.iter().enumerate() {
        let idxs = &by_label[label];
        let n = idxs.len();
        if n < 2 {
            return Err(Error::Data(format!(
                "class {label:?} has {n} samples; need at least 2 to hold out validation data"
            )));
        }
        let class_master = derive_seed(args.config.seed, k as u64);
        let mut order = idxs.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(class_master, 0));
        order.shuffle(&mut rng);
        let val_n = ((args.val_fraction * n as f64).floor() as usize).clamp(1, n - 1);
        let mut val: Vec<usize> = order[..val_n].to_vec();
        let mut train: Vec<usize> = order[val_n..].to_vec();
        val.sort_unstable();
        train.sort_unstable();
        plans.push(ClassPlan { train, val, train_seed: derive_seed(class_master, 1) });
    }

    let mut summary = String::new();
    let _ = writeln!(
        summary,
        "training {} classes from {} sequences",
        labels.len(),
        samples.len()
    );

    let mut picked = Vec::with_capacity(labels.len());
    let mut provenance = Vec::with_capacity(labels.len());
    for (k, label) in labels.iter().enumerate() {
        let plan = &plans[k];
        let train_set: Vec<SequenceSample> =
            plan.train.iter().map(|&i| samples[i].clone()).collect();
        let mut cfg = args.config.clone();
        cfg.seed = plan.train_seed;
        let candidates = train_candidates(&train_set, &cfg)?;
        let own: Vec<&SequenceSample> = plan.val.iter().map(|&i| &samples[i]).collect();
        let other: Vec<&SequenceSample> = plans
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != k)
            .flat_map(|(_, p)| p.val.iter().map(|&i| &samples[i]))
            .collect();
        let choice = select_candidate(&candidates, &own, &other)?;
        let _ = writeln!(
            summary,
            "class {label:?}: {} train / {} validation, candidate {} of {} selected",
            plan.train.len(),
            plan.val.len(),
            choice + 1,
            candidates.len()
        );
        picked.push(candidates.into_iter().nth(choice).expect("index from selection"));
        provenance.push(TrainProvenance {
            seed: cfg.seed,
            epochs: cfg.epochs,
            config_hash: args.config.config_hash(),
        });
    }

    // Pooled validation scores, class-major then sample order.
    let val_rows: Vec<(usize, usize)> = plans
        .iter()
        .enumerate()
        .flat_map(|(k, p)| p.val.iter().map(move |&i| (k, i)))
        .collect();
    let g_rows: Vec<Vec<f64>> = val_rows
        .par_iter()
        .map(|&(_, i)| {
            picked
                .iter()
                .map(|m| m.unnormalized_loglik(&samples[i]))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let val_truth: Vec<usize> = val_rows.iter().map(|&(k, _)| k).collect();

    let n = labels.len();
    let mut c_upper = Vec::with_capacity(n * (n - 1) / 2);
    let mut degenerate_pairs = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let t_first: Vec<f64> = g_rows
                .iter()
                .zip(&val_truth)
                .filter(|(_, &t)| t == i)
                .map(|(row, _)| row[i] - row[j])
                .collect();
            let t_second: Vec<f64> = g_rows
                .iter()
                .zip(&val_truth)
                .filter(|(_, &t)| t == j)
                .map(|(row, _)| row[i] - row[j])
                .collect();
            let est = estimate_cij(&t_first, &t_second)?;
            if est.degenerate {
                degenerate_pairs.push((labels[i].clone(), labels[j].clone()));
            }
            c_upper.push(est.threshold);
        }
    }
    for (a, b) in &degenerate_pairs {
        let _ = writeln!(
            summary,
            "warning: classes {a:?} and {b:?} were indistinguishable on validation data; \
             their threshold is arbitrary"
        );
    }

    let thresholds = PairwiseCalibration::new(n, c_upper, 1.0)?;
    let alpha = fit_alpha(&g_rows, &val_truth, &thresholds)?;
    let calibration = thresholds.with_alpha(alpha)?;

    let correct = g_rows
        .iter()
        .zip(&val_truth)
        .filter(|(row, &truth)| {
            crate::classify::predict_index(row, &calibration, VoteMode::Soft)
                .map(|p| p == truth)
                .unwrap_or(false)
        })
        .count();
    let _ = writeln!(
        summary,
        "vote sharpness {alpha:.6}; validation accuracy {:.1}% ({correct}/{})",
        100.0 * correct as f64 / val_truth.len() as f64,
        val_truth.len()
    );

    let norm_stats: Option<NormStats> =
        args.norm_stats_path.as_deref().map(read_json).transpose()?;
    let preprocess: Option<PreprocessConfig> =
        args.preprocess_record.as_deref().map(read_json).transpose()?;
    let bundle = ClassifierBundle {
        class_labels: labels,
        models: picked,
        calibration,
        norm_stats,
        preprocess,
        provenance: Some(provenance),
    };
    write_bundle(&args.output, &bundle)?;
    let _ = writeln!(summary, "wrote bundle to {}", args.output.display());
    Ok(summary)
}

/// Arguments for [`cmd_predict`].
#[derive(Debug, Clone)]
pub struct PredictArgs {
    pub bundle: PathBuf,
    pub input: PathBuf,
    /// CSV destination: one headerless row per sequence holding the id,
    /// the predicted label, and one vote total per class in label order.
    pub output: PathBuf,
    pub hard_vote: bool,
}

fn load_compatible(
    bundle_path: &Path,
    input: &Path,
) -> Result<(ClassifierBundle, Vec<SequenceSample>)> {
    let bundle = read_bundle(bundle_path)?;
    let samples = to_fixed(read_dataset(input)?)?;
    if samples.is_empty() {
        return Err(Error::Data(format!(
            "{}: dataset has no sequences",
            input.display()
        )));
    }
    let (d, n_t) = (bundle.models[0].d(), bundle.models[0].n_t());
    if samples[0].d() != d || samples[0].n_t() != n_t {
        return Err(Error::Data(format!(
            "dataset is {}x{} per sequence but the bundle expects {d}x{n_t}; \
             was the dataset preprocessed the same way?",
            samples[0].d(),
            samples[0].n_t()
        )));
    }
    Ok((bundle, samples))
}

fn vote_mode(hard: bool) -> VoteMode {
    if hard {
        VoteMode::Hard
    } else {
        VoteMode::Soft
    }
}

/// Classifies every sequence in a dataset and writes the prediction CSV.
pub fn cmd_predict(args: &PredictArgs) -> Result<String> {
    let (bundle, samples) = load_compatible(&args.bundle, &args.input)?;
    let mode = vote_mode(args.hard_vote);
    let predictions = samples
        .par_iter()
        .map(|s| bundle.predict(s, mode))
        .collect::<Result<Vec<_>>>()?;

    let mut writer = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(&args.output)?;
    for (k, (s, p)) in samples.iter().zip(&predictions).enumerate() {
        let mut record = Vec::with_capacity(2 + bundle.n_classes());
        record.push(match &s.id {
            Some(id) => id.clone(),
            None => format!("sample-{k}"),
        });
        record.push(bundle.class_labels[p.class_index].clone());
        record.extend(p.scores.iter().map(|x| x.to_string()));
        writer.write_record(&record)?;
    }
    writer.flush()?;
    Ok(format!(
        "classified {} sequences into {}\n",
        samples.len(),
        args.output.display()
    ))
}

/// Arguments for [`cmd_evaluate`].
#[derive(Debug, Clone)]
pub struct EvaluateArgs {
    pub bundle: PathBuf,
    /// Labeled dataset; every label must be known to the bundle.
    pub input: PathBuf,
    /// Writes `<prefix>.metrics.json` and `<prefix>.confusion.csv`.
    pub output_prefix: PathBuf,
    pub hard_vote: bool,
    /// Optional JSON object mapping each class label to a group name,
    /// enabling per-group F1.
    pub groups: Option<PathBuf>,
}

fn truth_indices(bundle: &ClassifierBundle, samples: &[SequenceSample]) -> Result<Vec<usize>> {
    samples
        .iter()
        .enumerate()
        .map(|(k, s)| {
            let label = s.label.as_deref().ok_or_else(|| {
                Error::Data(format!(
                    "sequence {k} ({}) has no label; evaluation needs labeled data",
                    s.id.as_deref().unwrap_or("unnamed")
                ))
            })?;
            bundle
                .class_labels
                .iter()
                .position(|l| l == label)
                .ok_or_else(|| {
                    Error::Data(format!(
                        "sequence {k} has label {label:?}, which the bundle does not know"
                    ))
                })
        })
        .collect()
}

/// Evaluates a bundle on labeled data, writing a metrics JSON and a
/// row-normalized percent confusion CSV.
pub fn cmd_evaluate(args: &EvaluateArgs) -> Result<String> {
    let (bundle, samples) = load_compatible(&args.bundle, &args.input)?;
    let truth = truth_indices(&bundle, &samples)?;
    let groups: Option<Vec<String>> = match &args.groups {
        None => None,
        Some(path) => {
            let map: BTreeMap<String, String> = read_json(path)?;
            Some(
                bundle
                    .class_labels
                    .iter()
                    .map(|label| {
                        map.get(label).cloned().ok_or_else(|| {
                            Error::Data(format!(
                                "{}: no group for class {label:?}",
                                path.display()
                            ))
                        })
                    })
                    .collect::<Result<Vec<_>>>()?,
            )
        }
    };

    let mode = vote_mode(args.hard_vote);
    let predictions = samples
        .par_iter()
        .map(|s| bundle.predict(s, mode))
        .collect::<Result<Vec<_>>>()?;
    let predicted: Vec<usize> = predictions.iter().map(|p| p.class_index).collect();
    let scores: Vec<Vec<f64>> = predictions.into_iter().map(|p| p.scores).collect();
    let report = EvalReport::from_predictions(
        &bundle.class_labels,
        &truth,
        &predicted,
        &scores,
        groups.as_deref(),
    )?;

    let metrics_path = with_suffix(&args.output_prefix, ".metrics.json");
    write_json(&metrics_path, &report)?;

    let confusion_path = with_suffix(&args.output_prefix, ".confusion.csv");
    let mut writer = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(&confusion_path)?;
    let mut header = vec!["true_label".to_string()];
    header.extend(bundle.class_labels.iter().cloned());
    writer.write_record(&header)?;
    for (k, row) in report.confusion_percent.iter().enumerate() {
        let mut record = vec![bundle.class_labels[k].clone()];
        record.extend(row.iter().map(|x| x.to_string()));
        writer.write_record(&record)?;
    }
    writer.flush()?;

    let mut summary = String::new();
    let _ = writeln!(
        summary,
        "accuracy {:.1}%, macro accuracy {:.1}% over {} sequences",
        100.0 * report.accuracy,
        100.0 * report.macro_accuracy,
        samples.len()
    );
    let _ = writeln!(summary, "wrote {}", metrics_path.display());
    let _ = writeln!(summary, "wrote {}", confusion_path.display());
    Ok(summary)
}

/// What a robustness sweep injects.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorruptionMode {
    /// Multiplicative noise on a fraction of entries.
    Noise,
    /// Entries marked missing, then imputed from temporal neighbors.
    Missing,
}

/// Arguments for [`cmd_robustness`].
#[derive(Debug, Clone)]
pub struct RobustnessArgs {
    pub bundle: PathBuf,
    pub input: PathBuf,
    /// CSV destination: header plus one `fraction,correct,total,accuracy`
    /// row per corruption level.
    pub output: PathBuf,
    pub mode: CorruptionMode,
    /// Corrupted fractions, each in `[0, 0.5]`.
    pub fractions: Vec<f64>,
    pub seed: u64,
    pub hard_vote: bool,
}

/// The default corruption grid: 0 through 50 percent in steps of 10.
pub fn default_robustness_fractions() -> Vec<f64> {
    vec![0.0, 0.1, 0.2, 0.3, 0.4, 0.5]
}

/// Measures accuracy under increasing corruption of a labeled dataset.
pub fn cmd_robustness(args: &RobustnessArgs) -> Result<String> {
    if args.fractions.is_empty() {
        return Err(Error::InvalidConfig("no corruption fractions given".into()));
    }
    for &f in &args.fractions {
        if !(f.is_finite() && (0.0..=0.5).contains(&f)) {
            return Err(Error::InvalidConfig(format!(
                "corruption fractions must lie in [0, 0.5], got {f}"
            )));
        }
    }
    let (bundle, samples) = load_compatible(&args.bundle, &args.input)?;
    let truth = truth_indices(&bundle, &samples)?;
    let mode = vote_mode(args.hard_vote);

    let mut summary = String::new();
    let mut writer = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(&args.output)?;
    writer.write_record(["fraction", "correct", "total", "accuracy"])?;
    for (fi, &fraction) in args.fractions.iter().enumerate() {
        let level_seed = derive_seed(args.seed, fi as u64);
        let correct = samples
            .par_iter()
            .enumerate()
            .map(|(k, s)| -> Result<bool> {
                // One stream per (level, sample): parallel order cannot
                // change what any sample sees.
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(level_seed, k as u64));
                let corrupted = match args.mode {
                    CorruptionMode::Noise => inject_noise(s, fraction, &mut rng)?,
                    CorruptionMode::Missing => {
                        impute_missing(&inject_missing(s, fraction, &mut rng)?)?
                    }
                };
                Ok(bundle.predict(&corrupted, mode)?.class_index == truth[k])
            })
            .collect::<Result<Vec<bool>>>()?
            .into_iter()
            .filter(|&c| c)
            .count();
        let accuracy = correct as f64 / samples.len() as f64;
        writer.write_record([
            fraction.to_string(),
            correct.to_string(),
            samples.len().to_string(),
            accuracy.to_string(),
        ])?;
        let _ = writeln!(
            summary,
            "fraction {fraction:.2}: accuracy {:.1}% ({correct}/{})",
            100.0 * accuracy,
            samples.len()
        );
    }
    writer.flush()?;
    let _ = writeln!(summary, "wrote {}", args.output.display());
    Ok(summary)
}

/// Arguments for [`cmd_synth`].
#[derive(Debug, Clone)]
pub struct SynthArgs {
    /// Writes `<prefix>.train.jsonl` and, when held-out samples are
    /// requested, `<prefix>.test.jsonl`.
    pub output_prefix: PathBuf,
    pub config: SynthConfig,
    /// When set, also writes each generating model to
    /// `<truth_prefix>.<label>.json`.
    pub truth_prefix: Option<PathBuf>,
}

fn samples_to_raw(samples: Vec<SequenceSample>) -> Vec<RawSequence> {
    samples
        .into_iter()
        .map(|s| RawSequence { frames: s.frames, label: s.label, id: s.id })
        .collect()
}

/// Draws a labeled synthetic dataset from per-class generating models.
pub fn cmd_synth(args: &SynthArgs) -> Result<String> {
    let data = make_synthetic_dataset(&args.config)?;
    let mut summary = String::new();

    let train_path = with_suffix(&args.output_prefix, ".train.jsonl");
    let train = samples_to_raw(data.train);
    write_dataset(&train_path, &train)?;
    let _ = writeln!(summary, "wrote {} sequences to {}", train.len(), train_path.display());

    if args.config.test_per_class > 0 {
        let test_path = with_suffix(&args.output_prefix, ".test.jsonl");
        let test = samples_to_raw(data.test);
        write_dataset(&test_path, &test)?;
        let _ = writeln!(summary, "wrote {} sequences to {}", test.len(), test_path.display());
    }

    if let Some(truth_prefix) = &args.truth_prefix {
        for (k, model) in data.truth.iter().enumerate() {
            let path = with_suffix(truth_prefix, &format!(".class{k}.json"));
            crate::io::write_model(&path, model, None)?;
            let _ = writeln!(summary, "wrote generating model to {}", path.display());
        }
    }
    Ok(summary)
}

/// Arguments for [`cmd_inspect`].
#[derive(Debug, Clone)]
pub struct InspectArgs {
    /// A dataset, model, or bundle file; the kind is detected from its
    /// header.
    pub path: PathBuf,
}

/// Prints a human summary of any file this toolkit writes.
pub fn cmd_inspect(args: &InspectArgs) -> Result<String> {
    let text = std::fs::read_to_string(&args.path)?;
    let first_line = text.lines().next().unwrap_or("");
    if let Ok(value) = serde_json::from_str::<serde_json::Value>(first_line) {
        if value.get("format").and_then(|f| f.as_str()) == Some("lrbm-dataset") {
            return inspect_dataset(&args.path);
        }
    }
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| Error::Data(format!("{}: {e}", args.path.display())))?;
    match value.get("format").and_then(|f| f.as_str()) {
        Some("lrbm-model") => inspect_model(&args.path),
        Some("lrbm-bundle") => inspect_bundle(&args.path),
        other => Err(Error::Data(format!(
            "{}: unrecognized file (format {other:?})",
            args.path.display()
        ))),
    }
}

fn inspect_dataset(path: &Path) -> Result<String> {
    let seqs = read_dataset(path)?;
    let mut out = String::new();
    let _ = writeln!(out, "dataset: {}", path.display());
    let _ = writeln!(out, "  sequences: {}", seqs.len());
    if seqs.is_empty() {
        return Ok(out);
    }
    let d = seqs[0].d();
    let lengths: Vec<usize> = seqs.iter().map(|s| s.n_frames()).collect();
    let lo = lengths.iter().min().expect("nonempty");
    let hi = lengths.iter().max().expect("nonempty");
    let _ = writeln!(out, "  dimension: {d}");
    if lo == hi {
        let _ = writeln!(out, "  frames per sequence: {lo}");
    } else {
        let _ = writeln!(out, "  frames per sequence: {lo} to {hi} (ragged)");
    }
    let mut label_counts: BTreeMap<&str, usize> = BTreeMap::new();
    let mut unlabeled = 0usize;
    for s in &seqs {
        match &s.label {
            Some(l) => *label_counts.entry(l.as_str()).or_default() += 1,
            None => unlabeled += 1,
        }
    }
    for (label, count) in &label_counts {
        let _ = writeln!(out, "  label {label:?}: {count}");
    }
    if unlabeled > 0 {
        let _ = writeln!(out, "  unlabeled: {unlabeled}");
    }
    let finite = seqs.iter().all(|s| s.frames.iter().all(|x| x.is_finite()));
    if !finite {
        let _ = writeln!(out, "  warning: contains non-finite values");
    }
    Ok(out)
}

fn inspect_model(path: &Path) -> Result<String> {
    let (model, provenance) = read_model(path)?;
    let mut out = String::new();
    let _ = writeln!(out, "model: {}", path.display());
    let _ = writeln!(
        out,
        "  dimensions: {} per frame, {} frames, {} hidden units",
        model.d(),
        model.n_t(),
        model.n_h()
    );
    let _ = writeln!(
        out,
        "  largest interaction eigenvalue: {:.6}",
        lambda_max_symmetric(&model.u)
    );
    let w_max = model
        .w
        .iter()
        .flat_map(|m| m.iter())
        .fold(0.0f64, |acc, &x| acc.max(x.abs()));
    let _ = writeln!(out, "  largest weight magnitude: {w_max:.6}");
    if let Some(p) = provenance {
        let _ = writeln!(
            out,
            "  trained with seed {} for {} epochs (config {})",
            p.seed,
            p.epochs,
            &p.config_hash[..12.min(p.config_hash.len())]
        );
    }
    Ok(out)
}

fn inspect_bundle(path: &Path) -> Result<String> {
    let bundle = read_bundle(path)?;
    let mut out = String::new();
    let _ = writeln!(out, "bundle: {}", path.display());
    let _ = writeln!(out, "  classes: {}", bundle.class_labels.join(", "));
    let _ = writeln!(
        out,
        "  model dimensions: {} per frame, {} frames, {} hidden units",
        bundle.models[0].d(),
        bundle.models[0].n_t(),
        bundle.models[0].n_h()
    );
    let _ = writeln!(out, "  vote sharpness: {:.6}", bundle.calibration.alpha);
    for i in 0..bundle.n_classes() {
        for j in i + 1..bundle.n_classes() {
            let _ = writeln!(
                out,
                "  threshold {} vs {}: {:.6}",
                bundle.class_labels[i],
                bundle.class_labels[j],
                bundle.calibration.c(i, j)
            );
        }
    }
    for ((i, j, k), defect) in bundle.calibration.transitivity_defects() {
        let _ = writeln!(
            out,
            "  transitivity defect ({}, {}, {}): {:.6}",
            bundle.class_labels[i], bundle.class_labels[j], bundle.class_labels[k], defect
        );
    }
    for (k, model) in bundle.models.iter().enumerate() {
        let _ = writeln!(
            out,
            "  class {:?} largest interaction eigenvalue: {:.6}",
            bundle.class_labels[k],
            lambda_max_symmetric(&model.u)
        );
    }
    let _ = writeln!(
        out,
        "  normalization statistics: {}",
        if bundle.norm_stats.is_some() { "embedded" } else { "none" }
    );
    let _ = writeln!(
        out,
        "  preprocessing record: {}",
        if bundle.preprocess.is_some() { "embedded" } else { "none" }
    );
    Ok(out)
}
