//! Builds a tiny model by hand and walks through its energy function.
//!
//! Two identities are checked numerically: the free energy returned by
//! `unnormalized_loglik` equals the log-sum over all hidden configurations
//! of the negative energy, and the hidden activation does not depend on
//! the within-slice interaction matrix.

use nalgebra::{DMatrix, DVector};

use lrbm::model::HiddenState;
use lrbm::{LrbmModel, SequenceSample};

fn main() -> lrbm::Result<()> {
    // Two dimensions, three time slices, two hidden units.
    let mut m = LrbmModel::zeros(2, 3, 2);
    m.a = DMatrix::from_row_slice(2, 3, &[0.5, 0.0, -0.5, 0.2, 0.1, 0.0]);
    m.b = DVector::from_vec(vec![0.3, -0.2]);
    for (i, w) in m.w.iter_mut().enumerate() {
        let s = 0.4 - 0.1 * i as f64;
        *w = DMatrix::from_row_slice(2, 2, &[s, -s, 0.5 * s, s]);
    }
    m.u = DMatrix::from_row_slice(2, 2, &[0.0, 0.35, 0.35, 0.0]);
    m.validate()?;

    let v = SequenceSample::new(DMatrix::from_row_slice(
        2,
        3,
        &[0.8, 0.1, -0.4, 0.3, 0.6, -0.2],
    ));

    // Energy of the joint state for each of the four hidden configurations.
    println!("energy by hidden configuration:");
    let mut log_terms = Vec::new();
    for bits in 0..4u32 {
        let h = HiddenState::Binary(DVector::from_fn(2, |j, _| {
            f64::from(bits >> j & 1)
        }));
        let e = m.energy(&v, &h)?;
        println!("  h = [{}, {}]  E = {:+.6}", bits & 1, bits >> 1 & 1, e);
        log_terms.push(-e);
    }

    // Summing the Boltzmann weights over the hidden layer reproduces the
    // closed-form free energy.
    let brute = {
        let max = log_terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        max + log_terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
    };
    let g = m.unnormalized_loglik(&v)?;
    println!("\nlogsumexp over hidden states: {brute:.12}");
    println!("free energy g(V):             {g:.12}");
    println!("difference:                   {:.3e}", (brute - g).abs());

    // The hidden conditional only sees the visible values, never the
    // interaction matrix, so zeroing it changes nothing.
    let mut decoupled = m.clone();
    decoupled.u = DMatrix::zeros(2, 2);
    let h1 = m.hidden_activation(&v)?;
    let h2 = decoupled.hidden_activation(&v)?;
    let drift = (h1.values() - h2.values()).abs().max();
    println!("\nhidden activation: {:.6?}", h1.values().as_slice());
    println!("change after removing interactions: {drift:.1e}");
    Ok(())
}
