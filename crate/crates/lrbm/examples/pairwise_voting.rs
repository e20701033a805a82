//! Shows how per-class free energies turn into a multiclass decision:
//! thresholds on score differences, a soft preference matrix, and row-sum
//! voting.
//!
//! Free energies are unnormalized, so a constant shift per model must not
//! change decisions; the last section checks that invariance directly.

use lrbm::classify::{
    class_scores, estimate_cij, preference_matrix, PairwiseCalibration, VoteMode,
};
use lrbm::oracle::{make_synthetic_dataset, SynthConfig};

fn main() -> lrbm::Result<()> {
    let data = make_synthetic_dataset(&SynthConfig {
        classes: 3,
        per_class: 120,
        separation: 1.4,
        seed: 29,
        ..SynthConfig::default()
    })?;
    let models = &data.truth;
    let n = models.len();

    // Free-energy score rows, one per sample, plus the true class index.
    let mut g_rows: Vec<Vec<f64>> = Vec::new();
    let mut labels = Vec::new();
    for s in &data.train {
        let row: lrbm::Result<Vec<f64>> =
            models.iter().map(|m| m.unnormalized_loglik(s)).collect();
        g_rows.push(row?);
        let label = s.label.as_deref().expect("synthetic data is labeled");
        labels.push(label.strip_prefix("class").unwrap().parse::<usize>().unwrap());
    }

    // One threshold per ordered pair, fitted on the score differences of
    // the two classes involved.
    let mut c_upper = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let t_i: Vec<f64> = g_rows
                .iter()
                .zip(&labels)
                .filter(|(_, &l)| l == i)
                .map(|(r, _)| r[i] - r[j])
                .collect();
            let t_j: Vec<f64> = g_rows
                .iter()
                .zip(&labels)
                .filter(|(_, &l)| l == j)
                .map(|(r, _)| r[i] - r[j])
                .collect();
            let est = estimate_cij(&t_i, &t_j)?;
            println!("threshold c({i},{j}) = {:+.4}", est.threshold);
            c_upper.push(est.threshold);
        }
    }
    let cal = PairwiseCalibration::new(n, c_upper, 1.0)?;

    // Score one sample: soft votes in the preference matrix, then row sums.
    let sample = &data.train[0];
    let g: Vec<f64> = models
        .iter()
        .map(|m| m.unnormalized_loglik(sample))
        .collect::<lrbm::Result<_>>()?;
    println!("\nsample of {:?}", sample.label.as_deref().unwrap());
    println!("free energies: {g:.3?}");
    let r = preference_matrix(&g, &cal, VoteMode::Soft)?;
    println!("preference matrix:");
    for i in 0..n {
        let row: Vec<String> = (0..n).map(|j| format!("{:.3}", r[(i, j)])).collect();
        println!("  [{}]", row.join(", "));
    }
    let votes = class_scores(&g, &cal, VoteMode::Soft)?;
    println!("vote totals: {votes:.3?}");

    // Shifting one model's scores by a constant cancels in every score
    // difference it participates in. Decisions cannot move.
    let shifted: Vec<f64> = g.iter().map(|x| x + 250.0).collect();
    let votes_shifted = class_scores(&shifted, &cal, VoteMode::Soft)?;
    let drift: f64 = votes
        .iter()
        .zip(&votes_shifted)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    println!("\nvote drift after shifting every score by 250: {drift:.2e}");

    // Accuracy of the calibrated rule over the generating data.
    let correct = g_rows
        .iter()
        .zip(&labels)
        .filter(|(row, &l)| {
            lrbm::classify::predict_index(row, &cal, VoteMode::Soft).unwrap() == l
        })
        .count();
    println!(
        "training accuracy of the voting rule: {}/{}",
        correct,
        data.train.len()
    );
    Ok(())
}
