//! Uses the hidden layer as a feature extractor: each sequence maps to its
//! vector of hidden activation probabilities.
//!
//! Samples from two planted classes are pushed through one class's model;
//! units whose mean activation differs between the classes carry class
//! information, which is what the pairwise classifier exploits through the
//! free energy.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use lrbm::oracle::{make_synthetic_dataset, SynthConfig};
use lrbm::SequenceSample;

fn mean_activation(
    model: &lrbm::LrbmModel,
    samples: &[&SequenceSample],
) -> lrbm::Result<DVector<f64>> {
    let mut acc = DVector::zeros(model.n_h());
    for s in samples {
        acc += model.hidden_activation(s)?.values();
    }
    Ok(acc / samples.len() as f64)
}

fn main() -> lrbm::Result<()> {
    let data = make_synthetic_dataset(&SynthConfig {
        classes: 2,
        per_class: 200,
        separation: 1.5,
        seed: 17,
        ..SynthConfig::default()
    })?;
    let model = &data.truth[0];

    let by_class = |label: &str| -> Vec<&SequenceSample> {
        data.train
            .iter()
            .filter(|s| s.label.as_deref() == Some(label))
            .collect()
    };
    let own = mean_activation(model, &by_class("class0"))?;
    let other = mean_activation(model, &by_class("class1"))?;

    println!("mean hidden activation under the class0 model:");
    println!("unit  class0  class1  gap");
    let mut best = (0, 0.0f64);
    for j in 0..model.n_h() {
        let gap = own[j] - other[j];
        println!("{j:>4}  {:.4}  {:.4}  {gap:+.4}", own[j], other[j]);
        if gap.abs() > best.1.abs() {
            best = (j, gap);
        }
    }
    println!(
        "\nmost discriminative unit: {} (gap {:+.4})",
        best.0, best.1
    );

    // The probabilities are deterministic; binary features come from
    // sampling them with an explicit seed when stochasticity is wanted.
    let sample = &data.train[0];
    let probs = model.hidden_activation(sample)?;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let bits = model.sample_hidden(sample, &mut rng)?;
    println!("\none sequence, activation probabilities: {:.4?}", probs.values().as_slice());
    println!("one seeded binary draw:                 {:?}", bits.values().as_slice());
    Ok(())
}
