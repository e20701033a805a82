//! Measures how a trained classifier degrades when test sequences are
//! corrupted, either by multiplicative noise or by missing values that get
//! imputed before scoring.
//!
//! A small bundle is trained first, then the robustness sweep writes one
//! accuracy row per corruption level for each mode.

use std::fs;

use lrbm::commands::{
    cmd_robustness, cmd_synth, cmd_train, CorruptionMode, RobustnessArgs, SynthArgs, TrainArgs,
};
use lrbm::oracle::SynthConfig;
use lrbm::train::TrainConfig;

fn main() -> lrbm::Result<()> {
    let dir = tempfile::tempdir()?;
    let p = |name: &str| dir.path().join(name);

    cmd_synth(&SynthArgs {
        output_prefix: p("bench"),
        config: SynthConfig {
            classes: 2,
            per_class: 60,
            test_per_class: 50,
            separation: 1.5,
            seed: 3,
            ..SynthConfig::default()
        },
        truth_prefix: None,
    })?;
    cmd_train(&TrainArgs {
        input: p("bench.train.jsonl"),
        output: p("bundle.json"),
        config: TrainConfig {
            n_h: 12,
            epochs: 60,
            candidates: 2,
            seed: 1,
            ..TrainConfig::default()
        },
        val_fraction: 0.2,
        norm_stats_path: None,
        preprocess_record: None,
    })?;

    for (mode, name) in [
        (CorruptionMode::Noise, "noise"),
        (CorruptionMode::Missing, "missing"),
    ] {
        let out = p(&format!("{name}.csv"));
        let summary = cmd_robustness(&RobustnessArgs {
            bundle: p("bundle.json"),
            input: p("bench.test.jsonl"),
            output: out.clone(),
            mode,
            fractions: vec![0.0, 0.1, 0.2, 0.3, 0.4, 0.5],
            seed: 99,
            hard_vote: false,
        })?;
        print!("{summary}");
        println!("{name} curve:");
        print!("{}", fs::read_to_string(&out)?);
        println!();
    }
    Ok(())
}
