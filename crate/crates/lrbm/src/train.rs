//! Contrastive-divergence training with within-slice interactions.
//!
//! One model is trained per class on that class's sequences alone. Each
//! update contrasts data statistics against reconstruction statistics:
//! the positive phase uses hidden activation probabilities at the data,
//! the negative phase samples a binary hidden state and reconstructs the
//! visibles by deterministic mean-field sweeps (optionally Gibbs noise),
//! then reads hidden probabilities at the reconstruction. Updates carry
//! momentum and weight decay, and the interaction matrix is rescaled
//! whenever its largest eigenvalue approaches 1, which keeps every model
//! on the normalizable side of the parameter space.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{derive_seed, lambda_max_symmetric};
use crate::model::{HiddenState, LrbmModel, SequenceSample};

/// Training hyperparameters. [`Default`] gives the standard recipe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Hidden layer width of the trained model.
    pub n_h: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    /// Contrastive-divergence chain length.
    pub cd_steps: usize,
    /// Mean-field sweeps per reconstruction.
    pub mf_sweeps: usize,
    pub momentum: f64,
    pub weight_decay: f64,
    pub minibatch: usize,
    /// Independently initialized models trained per class; the best by the
    /// rank criterion is kept.
    pub candidates: usize,
    /// Margin delta keeping the largest interaction eigenvalue at or below
    /// `1 - delta`.
    pub stability_margin: f64,
    pub seed: u64,
    /// Visible biases stay frozen at zero unless enabled.
    pub learn_visible_bias: bool,
    /// Freeze the interaction matrix at zero, reducing training to a plain
    /// Gaussian-binary restricted Boltzmann machine.
    pub freeze_u: bool,
    /// Replace deterministic mean-field reconstruction with Gibbs sweeps
    /// (conditional mean plus unit-variance noise).
    pub stochastic_reconstruction: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            n_h: 16,
            epochs: 250,
            learning_rate: 1e-3,
            cd_steps: 1,
            mf_sweeps: 10,
            momentum: 0.5,
            weight_decay: 1e-4,
            minibatch: 16,
            candidates: 10,
            stability_margin: 0.05,
            seed: 0,
            learn_visible_bias: false,
            freeze_u: false,
            stochastic_reconstruction: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("epochs must be at least 1".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "learning rate must be finite and non-negative, got {}",
                self.learning_rate
            )));
        }
        if self.cd_steps == 0 {
            return Err(Error::InvalidConfig("cd_steps must be at least 1".into()));
        }
        if self.mf_sweeps == 0 {
            return Err(Error::InvalidConfig(
                "reconstruction needs at least one sweep".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidConfig(format!(
                "momentum must lie in [0, 1), got {}",
                self.momentum
            )));
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "weight decay must be finite and non-negative, got {}",
                self.weight_decay
            )));
        }
        if self.minibatch == 0 {
            return Err(Error::InvalidConfig("minibatch must be at least 1".into()));
        }
        if self.candidates == 0 {
            return Err(Error::InvalidConfig("candidates must be at least 1".into()));
        }
        if !(self.stability_margin > 0.0 && self.stability_margin < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "stability margin must lie in (0, 1), got {}",
                self.stability_margin
            )));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, recorded in provenance so a
    /// persisted model can be matched to the configuration that made it.
    pub fn config_hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let json = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        let mut hex = String::with_capacity(64);
        for byte in digest {
            use std::fmt::Write;
            write!(hex, "{byte:02x}").expect("writing to a string cannot fail");
        }
        hex
    }
}

/// Parameter gradients for one update, shaped exactly like the model.
///
/// The interaction block `du` is kept exactly symmetric with a zero
/// diagonal after every accumulation, mirroring the model invariant.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientAccumulator {
    pub dw: Vec<DMatrix<f64>>,
    pub db: DVector<f64>,
    pub du: DMatrix<f64>,
    pub da: DMatrix<f64>,
}

impl GradientAccumulator {
    pub fn zeros_like(m: &LrbmModel) -> Self {
        GradientAccumulator {
            dw: (0..m.n_t()).map(|_| DMatrix::zeros(m.d(), m.n_h())).collect(),
            db: DVector::zeros(m.n_h()),
            du: DMatrix::zeros(m.d(), m.d()),
            da: DMatrix::zeros(m.d(), m.n_t()),
        }
    }

    /// Multiplies every entry by `s` (used to average over a batch).
    pub fn scale(&mut self, s: f64) {
        for wi in &mut self.dw {
            *wi *= s;
        }
        self.db *= s;
        self.du *= s;
        self.da *= s;
    }

    /// Largest absolute entry across all parameter blocks.
    pub fn amax(&self) -> f64 {
        let mut m: f64 = 0.0;
        for wi in &self.dw {
            m = m.max(wi.amax());
        }
        if self.db.len() > 0 {
            m = m.max(self.db.amax());
        }
        if self.du.nrows() > 0 {
            m = m.max(self.du.amax());
        }
        m.max(self.da.amax())
    }
}

fn sample_bernoulli<R: Rng + ?Sized>(probs: &DVector<f64>, rng: &mut R) -> DVector<f64> {
    DVector::from_iterator(
        probs.len(),
        probs.iter().map(|&p| if rng.gen::<f64>() < p { 1.0 } else { 0.0 }),
    )
}

/// One contrastive-divergence gradient estimate averaged over a batch.
///
/// Hidden statistics on both sides of the contrast use activation
/// probabilities; binary samples appear only to drive the reconstruction.
/// The chain starts at each data sample, and with more than one step each
/// step re-reads hidden probabilities at the latest reconstruction.
pub fn cd_gradient<R: Rng + ?Sized>(
    model: &LrbmModel,
    batch: &[&SequenceSample],
    config: &TrainConfig,
    rng: &mut R,
) -> Result<GradientAccumulator> {
    if batch.is_empty() {
        return Err(Error::InvalidConfig("cannot take a gradient of an empty batch".into()));
    }
    let (d, n_t) = (model.d(), model.n_t());
    let mut grad = GradientAccumulator::zeros_like(model);
    for &v in batch {
        let pos = model.hidden_activation(v)?;
        let mut recon = v.clone();
        let mut probs = pos.clone();
        for _ in 0..config.cd_steps {
            let h = HiddenState::Binary(sample_bernoulli(probs.values(), rng));
            recon = if config.stochastic_reconstruction {
                model.gibbs_reconstruct(&h, &recon, config.mf_sweeps, rng)?
            } else {
                model.mean_field_reconstruct(&h, &recon, config.mf_sweeps)?
            };
            probs = model.hidden_activation(&recon)?;
        }
        let (p_pos, p_neg) = (pos.values(), probs.values());
        grad.db += p_pos - p_neg;
        for i in 0..n_t {
            let vi = v.frames.column(i);
            let ri = recon.frames.column(i);
            grad.dw[i] += vi * p_pos.transpose() - ri * p_neg.transpose();
            grad.da.set_column(i, &(grad.da.column(i) + (vi - ri)));
            for r in 0..d {
                for s in (r + 1)..d {
                    grad.du[(r, s)] += vi[r] * vi[s] - ri[r] * ri[s];
                }
            }
        }
    }
    grad.scale(1.0 / batch.len() as f64);
    for r in 0..d {
        for s in (r + 1)..d {
            grad.du[(s, r)] = grad.du[(r, s)];
        }
    }
    Ok(grad)
}

/// Rescales a symmetric interaction matrix so its largest eigenvalue is at
/// most `1 - margin`; matrices already inside the bound pass through
/// untouched. Rescaling preserves symmetry and the zero diagonal exactly.
pub fn stabilize_u(u: &DMatrix<f64>, margin: f64) -> DMatrix<f64> {
    let bound = 1.0 - margin;
    let lambda = lambda_max_symmetric(u);
    if lambda > bound {
        u * (bound / lambda)
    } else {
        u.clone()
    }
}

/// Momentum velocities, one buffer per parameter family.
#[derive(Debug, Clone, PartialEq)]
pub struct UpdateState {
    pub vw: Vec<DMatrix<f64>>,
    pub vb: DVector<f64>,
    pub vu: DMatrix<f64>,
    pub va: DMatrix<f64>,
}

impl UpdateState {
    pub fn zeros_like(m: &LrbmModel) -> Self {
        UpdateState {
            vw: (0..m.n_t()).map(|_| DMatrix::zeros(m.d(), m.n_h())).collect(),
            vb: DVector::zeros(m.n_h()),
            vu: DMatrix::zeros(m.d(), m.d()),
            va: DMatrix::zeros(m.d(), m.n_t()),
        }
    }
}

/// Applies one gradient step in place:
///
/// ```text
/// velocity <- momentum * velocity + gradient
/// theta    <- theta + lr * velocity - lr * weight_decay * theta
/// ```
///
/// Frozen families (the interaction matrix under `freeze_u`, visible biases
/// unless `learn_visible_bias`) are left untouched, velocities included.
/// After the step the interaction matrix is rescaled back inside the
/// stability bound if needed. Errors if any parameter becomes non-finite.
pub fn apply_update(
    model: &mut LrbmModel,
    velocity: &mut UpdateState,
    grad: &GradientAccumulator,
    config: &TrainConfig,
) -> Result<()> {
    let lr = config.learning_rate;
    let shrink = lr * config.weight_decay;
    for i in 0..model.n_t() {
        velocity.vw[i] *= config.momentum;
        velocity.vw[i] += &grad.dw[i];
        let step = &velocity.vw[i] * lr - &model.w[i] * shrink;
        model.w[i] += step;
    }
    velocity.vb *= config.momentum;
    velocity.vb += &grad.db;
    let step = &velocity.vb * lr - &model.b * shrink;
    model.b += step;
    if !config.freeze_u {
        velocity.vu *= config.momentum;
        velocity.vu += &grad.du;
        let step = &velocity.vu * lr - &model.u * shrink;
        model.u += step;
        model.u = stabilize_u(&model.u, config.stability_margin);
    }
    if config.learn_visible_bias {
        velocity.va *= config.momentum;
        velocity.va += &grad.da;
        let step = &velocity.va * lr - &model.a * shrink;
        model.a += step;
    }
    if !model.params_finite() {
        return Err(Error::Numerical(
            "parameters became non-finite during an update".into(),
        ));
    }
    Ok(())
}

/// Trains one model on the given class's sequences. Fully deterministic
/// given the config (the seed drives initialization, shuffling, and hidden
/// sampling).
///
/// Initialization: weights from a centered Gaussian with standard deviation
/// 0.01, everything else zero. Minibatches are reshuffled every epoch.
pub fn train_class_model(samples: &[SequenceSample], config: &TrainConfig) -> Result<LrbmModel> {
    config.validate()?;
    if samples.is_empty() {
        return Err(Error::Data("cannot train on an empty sample set".into()));
    }
    let (d, n_t) = (samples[0].d(), samples[0].n_t());
    for (k, s) in samples.iter().enumerate() {
        if s.d() != d || s.n_t() != n_t {
            return Err(Error::Data(format!(
                "sample {k} is {}x{}, expected {d}x{n_t}; train on a \
                 preprocessed fixed-length dataset",
                s.d(),
                s.n_t()
            )));
        }
        if !s.frames.iter().all(|x| x.is_finite()) {
            return Err(Error::Data(format!("sample {k} contains non-finite values")));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = LrbmModel::zeros(d, n_t, config.n_h);
    for i in 0..n_t {
        for c in 0..config.n_h {
            for r in 0..d {
                let z: f64 = rng.sample(StandardNormal);
                model.w[i][(r, c)] = 0.01 * z;
            }
        }
    }
    let mut velocity = UpdateState::zeros_like(&model);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.minibatch) {
            let batch: Vec<&SequenceSample> = chunk.iter().map(|&ix| &samples[ix]).collect();
            let grad = cd_gradient(&model, &batch, config, &mut rng)?;
            apply_update(&mut model, &mut velocity, &grad, config).map_err(|e| {
                Error::Numerical(format!("epoch {epoch}: {e}"))
            })?;
        }
    }
    Ok(model)
}

/// Trains `config.candidates` models with independently derived seeds.
/// Candidate `k` uses the seed stream `k`; results are returned in candidate
/// order, so the output is deterministic regardless of thread scheduling.
pub fn train_candidates(
    samples: &[SequenceSample],
    config: &TrainConfig,
) -> Result<Vec<LrbmModel>> {
    config.validate()?;
    (0..config.candidates)
        .into_par_iter()
        .map(|k| {
            let mut cfg = config.clone();
            cfg.seed = derive_seed(config.seed, k as u64);
            train_class_model(samples, &cfg)
        })
        .collect()
}

/// Picks the candidate whose own-class samples rank highest by unnormalized
/// log-likelihood.
///
/// All samples (own class first, then others) are sorted by descending
/// score per candidate; the candidate minimizing the rank sum of the
/// own-class samples wins. Ties in score keep input order; ties in rank sum
/// go to the lowest candidate index.
pub fn select_candidate(
    candidates: &[LrbmModel],
    own: &[&SequenceSample],
    other: &[&SequenceSample],
) -> Result<usize> {
    if candidates.is_empty() {
        return Err(Error::InvalidConfig("no candidates to select from".into()));
    }
    if own.is_empty() {
        return Err(Error::Data("candidate selection needs own-class samples".into()));
    }
    let pool: Vec<&SequenceSample> = own.iter().chain(other.iter()).copied().collect();
    let mut best = 0usize;
    let mut best_sum = u64::MAX;
    for (k, cand) in candidates.iter().enumerate() {
        let mut scores = Vec::with_capacity(pool.len());
        for s in &pool {
            let g = cand.unnormalized_loglik(s)?;
            if !g.is_finite() {
                return Err(Error::Numerical(format!(
                    "candidate {k} produced a non-finite score"
                )));
            }
            scores.push(g);
        }
        let mut idx: Vec<usize> = (0..pool.len()).collect();
        idx.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap());
        let mut rank_sum = 0u64;
        for (rank, &pool_ix) in idx.iter().enumerate() {
            if pool_ix < own.len() {
                rank_sum += rank as u64 + 1;
            }
        }
        if rank_sum < best_sum {
            best_sum = rank_sum;
            best = k;
        }
    }
    Ok(best)
}
