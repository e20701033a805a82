//! Round-trips a model through its JSON file format and shows that the
//! serialization is bit-exact: reading a written model and writing it
//! again produces byte-identical files.
//!
//! Exact floating-point round-tripping is what makes retraining and
//! re-scoring reproducible across machines and runs.

use std::fs;

use lrbm::commands::{cmd_inspect, InspectArgs};
use lrbm::io::{read_model, write_model};
use lrbm::model::TrainProvenance;
use lrbm::oracle::{make_synthetic_dataset, SynthConfig};
use lrbm::train::TrainConfig;

fn main() -> lrbm::Result<()> {
    let dir = tempfile::tempdir()?;
    let path_a = dir.path().join("model.json");
    let path_b = dir.path().join("model_again.json");

    // Any model works; a planted generator keeps this example fast.
    let data = make_synthetic_dataset(&SynthConfig {
        classes: 1,
        per_class: 1,
        seed: 23,
        ..SynthConfig::default()
    })?;
    let model = &data.truth[0];

    // A provenance record normally comes out of training; building one by
    // hand here just shows what travels with the file.
    let config = TrainConfig::default();
    let provenance = TrainProvenance {
        seed: config.seed,
        epochs: config.epochs,
        config_hash: config.config_hash(),
    };
    write_model(&path_a, model, Some(&provenance))?;

    let (loaded, loaded_prov) = read_model(&path_a)?;
    assert_eq!(&loaded, model, "parsed parameters must match bit for bit");
    write_model(&path_b, &loaded, loaded_prov.as_ref())?;

    let bytes_a = fs::read(&path_a)?;
    let bytes_b = fs::read(&path_b)?;
    println!("file size: {} bytes", bytes_a.len());
    println!("write-read-write is byte-identical: {}", bytes_a == bytes_b);

    println!("\ninspection:");
    println!("{}", cmd_inspect(&InspectArgs { path: path_a })?);
    Ok(())
}
