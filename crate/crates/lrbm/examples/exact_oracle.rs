//! Exercises the brute-force reference implementations that anchor the
//! fast paths: exact partition function, exact log-likelihood, exact
//! gradients, and exact sampling.
//!
//! Everything here enumerates all hidden configurations, so it only works
//! for very small models. That is exactly what makes it trustworthy as a
//! check on the closed-form code.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use lrbm::oracle::{exact_gradient, exact_log_partition, exact_loglik, ExactSampler};
use lrbm::{LrbmModel, SequenceSample};

fn random_tiny_model(seed: u64) -> lrbm::Result<LrbmModel> {
    let (d, n_t, n_h) = (2, 2, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = LrbmModel::zeros(d, n_t, n_h);
    m.a = DMatrix::from_fn(d, n_t, |_, _| rng.gen_range(-0.6..0.6));
    m.b.apply(|b| *b = rng.gen_range(-0.4..0.4));
    for w in &mut m.w {
        *w = DMatrix::from_fn(d, n_h, |_, _| rng.gen_range(-0.4..0.4));
    }
    let off = rng.gen_range(-0.4..0.4);
    m.u = DMatrix::from_fn(d, d, |r, c| if r == c { 0.0 } else { off });
    m.validate()?;
    Ok(m)
}

fn main() -> lrbm::Result<()> {
    let m = random_tiny_model(21)?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);

    let log_z = exact_log_partition(&m)?;
    println!("exact log partition: {log_z:.10}");

    // The free energy minus the log partition must equal the exact
    // log-likelihood computed by full enumeration.
    let v = SequenceSample::new(DMatrix::from_fn(2, 2, |_, _| rng.gen_range(-1.0..1.0)));
    let fast = m.unnormalized_loglik(&v)? - log_z;
    let slow = exact_loglik(&m, &v)?;
    println!("loglik via free energy: {fast:.10}");
    println!("loglik via enumeration: {slow:.10}");
    println!("difference:             {:.3e}", (fast - slow).abs());

    // Central finite differences on a hidden bias reproduce the analytic
    // gradient.
    let grad = exact_gradient(&m, &v)?;
    let eps = 1e-5;
    let mut hi = m.clone();
    let mut lo = m.clone();
    hi.b[1] += eps;
    lo.b[1] -= eps;
    let fd = (exact_loglik(&hi, &v)? - exact_loglik(&lo, &v)?) / (2.0 * eps);
    println!("\nd loglik / d b[1]  analytic: {:+.8}", grad.db[1]);
    println!("d loglik / d b[1]  numeric:  {fd:+.8}");

    // The visible-bias gradient is the data frame minus the model mean, so
    // `v - grad.da` is the exact model expectation of the visible layer.
    // A large seeded sample should land close to it.
    let expected = &v.frames - &grad.da;
    let sampler = ExactSampler::new(&m)?;
    let n = 200_000;
    let mut mean = DMatrix::zeros(2, 2);
    for _ in 0..n {
        mean += sampler.sample(&mut rng).frames;
    }
    mean /= n as f64;
    println!("\nmodel mean of V, closed form: {:.4?}", expected.as_slice());
    println!("model mean of V, {n} draws:  {:.4?}", mean.as_slice());
    println!("max deviation: {:.3e}", (&mean - &expected).abs().max());
    Ok(())
}
