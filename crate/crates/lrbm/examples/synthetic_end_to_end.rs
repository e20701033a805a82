//! Runs the whole pipeline through the same entry points the command-line
//! binary uses: generate a benchmark, train a classifier bundle, predict,
//! and evaluate, all inside a temporary directory.
//!
//! Every artifact is a plain file (JSON Lines dataset, JSON bundle, CSV
//! predictions, JSON metrics), so each stage can also be driven from the
//! `lrbm` binary with the same results.

use std::fs;

use lrbm::commands::{
    cmd_evaluate, cmd_predict, cmd_synth, cmd_train, EvaluateArgs, PredictArgs, SynthArgs,
    TrainArgs,
};
use lrbm::oracle::SynthConfig;
use lrbm::train::TrainConfig;

fn main() -> lrbm::Result<()> {
    let dir = tempfile::tempdir()?;
    let p = |name: &str| dir.path().join(name);

    // Three classes of smooth 3-dimensional sequences, four slices each.
    let summary = cmd_synth(&SynthArgs {
        output_prefix: p("bench"),
        config: SynthConfig {
            classes: 3,
            per_class: 80,
            test_per_class: 40,
            separation: 1.5,
            seed: 11,
            ..SynthConfig::default()
        },
        truth_prefix: None,
    })?;
    println!("{summary}");

    let summary = cmd_train(&TrainArgs {
        input: p("bench.train.jsonl"),
        output: p("bundle.json"),
        config: TrainConfig {
            n_h: 16,
            epochs: 80,
            candidates: 3,
            seed: 7,
            ..TrainConfig::default()
        },
        val_fraction: 0.2,
        norm_stats_path: None,
        preprocess_record: None,
    })?;
    println!("{summary}");

    let summary = cmd_predict(&PredictArgs {
        bundle: p("bundle.json"),
        input: p("bench.test.jsonl"),
        output: p("predictions.csv"),
        hard_vote: false,
    })?;
    println!("{summary}");

    let csv = fs::read_to_string(p("predictions.csv"))?;
    println!("first prediction rows:");
    for line in csv.lines().take(3) {
        println!("  {line}");
    }
    println!();

    let summary = cmd_evaluate(&EvaluateArgs {
        bundle: p("bundle.json"),
        input: p("bench.test.jsonl"),
        output_prefix: p("eval"),
        hard_vote: false,
        groups: None,
    })?;
    println!("{summary}");

    println!("confusion matrix (row percentages):");
    print!("{}", fs::read_to_string(p("eval.confusion.csv"))?);
    Ok(())
}
