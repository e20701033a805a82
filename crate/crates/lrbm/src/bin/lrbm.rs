//! Thin command-line front end: parses arguments, configures the thread
//! pool from LRBM_THREADS, and dispatches to the library operations.
//!
//! Exit codes: 0 success, 2 invalid usage or configuration, 3 data or IO
//! problems, 4 numerical failures.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use lrbm::commands::{
    self, cmd_evaluate, cmd_inspect, cmd_predict, cmd_preprocess, cmd_robustness,
    cmd_synth, cmd_train, CorruptionMode, EvaluateArgs, InspectArgs, PredictArgs,
    PreprocessArgs, RobustnessArgs, SynthArgs, TrainArgs,
};
use lrbm::oracle::SynthConfig;
use lrbm::train::TrainConfig;

#[derive(Parser)]
#[command(
    name = "lrbm",
    version,
    about = "Generative sequence classification with locally interacting \
             Gaussian-binary restricted Boltzmann machines"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Resample, smooth, select, and normalize sequence datasets
    Preprocess(PreprocessCli),
    /// Train one model per class and calibrate a classifier bundle
    Train(TrainCli),
    /// Classify sequences with a trained bundle (CSV output)
    Predict(PredictCli),
    /// Score a bundle against labeled data (metrics and confusion)
    Evaluate(EvaluateCli),
    /// Measure accuracy under injected noise or missing data
    Robustness(RobustnessCli),
    /// Generate a labeled synthetic dataset from random models
    Synth(SynthCli),
    /// Summarize a dataset, model, or bundle file
    Inspect(InspectCli),
}

#[derive(Args)]
struct PreprocessCli {
    /// Input dataset (JSON Lines)
    #[arg(long)]
    input: PathBuf,
    /// Output dataset (JSON Lines)
    #[arg(long)]
    output: PathBuf,
    /// Skeleton spec JSON; missing bone lengths are fitted and written back
    #[arg(long)]
    skeleton: Option<PathBuf>,
    /// Comma-separated dimension indices to keep, in order
    #[arg(long, value_delimiter = ',')]
    feature_subset: Option<Vec<usize>>,
    /// Centered moving-average window (odd)
    #[arg(long)]
    smooth_window: Option<usize>,
    /// Interpolate every sequence to this many frames
    #[arg(long)]
    target_length: Option<usize>,
    /// Fit and apply z-score normalization without persisting statistics
    #[arg(long)]
    normalize: bool,
    /// Statistics file: loaded if present, otherwise fitted and saved here
    #[arg(long)]
    normalize_stats: Option<PathBuf>,
}

#[derive(Args)]
struct TrainCli {
    /// Labeled fixed-length dataset (JSON Lines)
    #[arg(long)]
    input: PathBuf,
    /// Bundle destination (JSON)
    #[arg(long)]
    output: PathBuf,
    /// Hidden layer width
    #[arg(long)]
    n_h: usize,
    #[arg(long, default_value_t = 250)]
    epochs: usize,
    #[arg(long, default_value_t = 1e-3)]
    learning_rate: f64,
    /// Contrastive-divergence chain length
    #[arg(long, default_value_t = 1)]
    cd_steps: usize,
    /// Mean-field sweeps per reconstruction
    #[arg(long, default_value_t = 10)]
    mf_sweeps: usize,
    #[arg(long, default_value_t = 0.5)]
    momentum: f64,
    #[arg(long, default_value_t = 1e-4)]
    weight_decay: f64,
    #[arg(long, default_value_t = 16)]
    minibatch: usize,
    /// Independently seeded models trained per class
    #[arg(long, default_value_t = 10)]
    candidates: usize,
    /// Keeps the largest interaction eigenvalue at or below 1 minus this
    #[arg(long, default_value_t = 0.05)]
    stability_margin: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Learn visible biases instead of keeping them at zero
    #[arg(long)]
    learn_visible_bias: bool,
    /// Freeze interactions at zero (plain restricted Boltzmann machine)
    #[arg(long)]
    freeze_u: bool,
    /// Reconstruct with Gibbs noise instead of mean-field
    #[arg(long)]
    stochastic_reconstruction: bool,
    /// Per-class fraction held out for selection and calibration
    #[arg(long, default_value_t = 0.2)]
    val_fraction: f64,
    /// Normalization statistics to embed as provenance
    #[arg(long)]
    normalize_stats: Option<PathBuf>,
    /// Preprocessing description to embed as provenance
    #[arg(long)]
    preprocess_record: Option<PathBuf>,
}

#[derive(Args)]
struct PredictCli {
    /// Trained bundle (JSON)
    #[arg(long)]
    bundle: PathBuf,
    /// Dataset to classify (JSON Lines)
    #[arg(long)]
    input: PathBuf,
    /// Prediction CSV: headerless rows of id, label, per-class vote totals
    #[arg(long)]
    output: PathBuf,
    /// Whole votes per pair instead of graded sigmoid votes
    #[arg(long)]
    hard_vote: bool,
}

#[derive(Args)]
struct EvaluateCli {
    /// Trained bundle (JSON)
    #[arg(long)]
    bundle: PathBuf,
    /// Labeled dataset (JSON Lines)
    #[arg(long)]
    input: PathBuf,
    /// Writes <prefix>.metrics.json and <prefix>.confusion.csv
    #[arg(long)]
    output_prefix: PathBuf,
    /// Whole votes per pair instead of graded sigmoid votes
    #[arg(long)]
    hard_vote: bool,
    /// JSON object mapping class labels to group names (enables group F1)
    #[arg(long)]
    groups: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeCli {
    Noise,
    Missing,
}

#[derive(Args)]
struct RobustnessCli {
    /// Trained bundle (JSON)
    #[arg(long)]
    bundle: PathBuf,
    /// Labeled dataset (JSON Lines)
    #[arg(long)]
    input: PathBuf,
    /// Curve CSV destination
    #[arg(long)]
    output: PathBuf,
    /// Corruption kind
    #[arg(long, value_enum)]
    mode: ModeCli,
    /// Comma-separated corrupted fractions, each in [0, 0.5]
    #[arg(long, value_delimiter = ',', default_values_t = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5])]
    fractions: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Whole votes per pair instead of graded sigmoid votes
    #[arg(long)]
    hard_vote: bool,
}

#[derive(Args)]
struct SynthCli {
    /// Writes <prefix>.train.jsonl and, with --test-per-class, <prefix>.test.jsonl
    #[arg(long)]
    output_prefix: PathBuf,
    #[arg(long, default_value_t = 3)]
    classes: usize,
    #[arg(long, default_value_t = 100)]
    per_class: usize,
    #[arg(long, default_value_t = 0)]
    test_per_class: usize,
    /// Dimensions per frame
    #[arg(long, default_value_t = 3)]
    d: usize,
    /// Frames per sequence
    #[arg(long, default_value_t = 4)]
    n_t: usize,
    /// Hidden units of the generating models
    #[arg(long, default_value_t = 8)]
    n_h: usize,
    /// Class separation scale
    #[arg(long, default_value_t = 1.0)]
    separation: f64,
    /// Weight scale before separation scaling
    #[arg(long, default_value_t = 0.3)]
    w_sigma: f64,
    /// Hidden bias scale before separation scaling
    #[arg(long, default_value_t = 0.3)]
    b_sigma: f64,
    /// Largest interaction eigenvalue at separation 1 (clipped to 0.95)
    #[arg(long, default_value_t = 0.4)]
    u_lambda: f64,
    /// Temporal smoothing window for generated weights (odd)
    #[arg(long, default_value_t = 3)]
    smooth_window: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write each generating model to <prefix>.class<k>.json
    #[arg(long)]
    truth_prefix: Option<PathBuf>,
}

#[derive(Args)]
struct InspectCli {
    /// Dataset, model, or bundle file
    path: PathBuf,
}

fn run(cli: Cli) -> lrbm::Result<String> {
    if let Some(n) = commands::threads_from_env()? {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| lrbm::Error::InvalidConfig(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Preprocess(a) => cmd_preprocess(&PreprocessArgs {
            input: a.input,
            output: a.output,
            skeleton_spec: a.skeleton,
            feature_subset: a.feature_subset,
            smooth_window: a.smooth_window,
            target_length: a.target_length,
            normalize: a.normalize,
            norm_stats_path: a.normalize_stats,
        }),
        Command::Train(a) => cmd_train(&TrainArgs {
            input: a.input,
            output: a.output,
            config: TrainConfig {
                n_h: a.n_h,
                epochs: a.epochs,
                learning_rate: a.learning_rate,
                cd_steps: a.cd_steps,
                mf_sweeps: a.mf_sweeps,
                momentum: a.momentum,
                weight_decay: a.weight_decay,
                minibatch: a.minibatch,
                candidates: a.candidates,
                stability_margin: a.stability_margin,
                seed: a.seed,
                learn_visible_bias: a.learn_visible_bias,
                freeze_u: a.freeze_u,
                stochastic_reconstruction: a.stochastic_reconstruction,
            },
            val_fraction: a.val_fraction,
            norm_stats_path: a.normalize_stats,
            preprocess_record: a.preprocess_record,
        }),
        Command::Predict(a) => cmd_predict(&PredictArgs {
            bundle: a.bundle,
            input: a.input,
            output: a.output,
            hard_vote: a.hard_vote,
        }),
        Command::Evaluate(a) => cmd_evaluate(&EvaluateArgs {
            bundle: a.bundle,
            input: a.input,
            output_prefix: a.output_prefix,
            hard_vote: a.hard_vote,
            groups: a.groups,
        }),
        Command::Robustness(a) => cmd_robustness(&RobustnessArgs {
            bundle: a.bundle,
            input: a.input,
            output: a.output,
            mode: match a.mode {
                ModeCli::Noise => CorruptionMode::Noise,
                ModeCli::Missing => CorruptionMode::Missing,
            },
            fractions: a.fractions,
            seed: a.seed,
            hard_vote: a.hard_vote,
        }),
        Command::Synth(a) => cmd_synth(&SynthArgs {
            output_prefix: a.output_prefix,
            config: SynthConfig {
                classes: a.classes,
                per_class: a.per_class,
                test_per_class: a.test_per_class,
                d: a.d,
                n_t: a.n_t,
                n_h: a.n_h,
                separation: a.separation,
                w_sigma: a.w_sigma,
                b_sigma: a.b_sigma,
                u_lambda: a.u_lambda,
                smooth_window: a.smooth_window,
                seed: a.seed,
            },
            truth_prefix: a.truth_prefix,
        }),
        Command::Inspect(a) => cmd_inspect(&InspectArgs { path: a.path }),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(summary) => {
            print!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
