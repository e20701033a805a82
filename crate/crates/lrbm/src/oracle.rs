//! Exact reference computations for tiny models.
//!
//! Everything here enumerates the `2^n_h` binary hidden configurations, so
//! it is only tractable for models within [`OracleLimits`]. The point of the
//! module is to provide ground truth the scalable implementations are tested
//! against: an exact partition function, an exact log-likelihood computed
//! through an independent brute-force route, exact gradients from Gaussian
//! moments, an exact sampler, and a synthetic dataset generator with known
//! generating models.
//!
//! With the hidden state fixed, each time slice of the visible layer is
//! Gaussian with mean `m_i(h) = (I - U)^{-1} (a_i + W_i h)` and covariance
//! `(I - U)^{-1}`. Integrating the visibles out gives the per-configuration
//! weight used throughout:
//!
//! ```text
//! log w(h) = b'h + sum_i 1/2 m_i(h)' (I - U) m_i(h)
//! ```

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::math::{derive_seed, logsumexp};
use crate::model::{LrbmModel, SequenceSample};
use crate::train::GradientAccumulator;

/// Size caps under which exact enumeration stays cheap.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleLimits {
    pub max_d: usize,
    pub max_n_t: usize,
    pub max_n_h: usize,
}

impl Default for OracleLimits {
    fn default() -> Self {
        OracleLimits { max_d: 4, max_n_t: 4, max_n_h: 12 }
    }
}

impl OracleLimits {
    pub fn check(&self, m: &LrbmModel) -> Result<()> {
        if m.d() > self.max_d || m.n_t() > self.max_n_t || m.n_h() > self.max_n_h {
            return Err(Error::LimitExceeded(format!(
                "model of shape d={}, n_t={}, n_h={} exceeds exact limits \
                 d<={}, n_t<={}, n_h<={}",
                m.d(),
                m.n_t(),
                m.n_h(),
                self.max_d,
                self.max_n_t,
                self.max_n_h
            )));
        }
        Ok(())
    }
}

/// Per-configuration quantities shared by the exact operations.
struct Enumeration {
    chol: Cholesky<f64, Dyn>,
    /// `log w(h)` for every hidden configuration, indexed by bit pattern.
    log_weights: Vec<f64>,
    /// Conditional mean frames `m_i(h)`, one `d x n_t` matrix per configuration.
    means: Vec<DMatrix<f64>>,
    /// `logsumexp` of the log weights.
    log_norm: f64,
    /// `1/2 sum_i |a_i|^2`.
    a_quad: f64,
    /// `log det(I - U)`.
    log_det: f64,
}

fn enumerate(model: &LrbmModel) -> Result<Enumeration> {
    model.validate()?;
    OracleLimits::default().check(model)?;
    let (d, n_t, n_h) = (model.d(), model.n_t(), model.n_h());
    let iu = DMatrix::<f64>::identity(d, d) - &model.u;
    let chol = Cholesky::new(iu).ok_or_else(|| {
        Error::Numerical(
            "model is not normalizable: I - U is not positive definite".into(),
        )
    })?;
    let log_det = 2.0 * chol.l().diagonal().iter().map(|x| x.ln()).sum::<f64>();
    let a_quad = 0.5 * model.a.iter().map(|x| x * x).sum::<f64>();

    let n_cfg = 1usize << n_h;
    let mut log_weights = Vec::with_capacity(n_cfg);
    let mut means = Vec::with_capacity(n_cfg);
    for bits in 0..n_cfg {
        let h = DVector::from_fn(n_h, |j, _| ((bits >> j) & 1) as f64);
        let mut lw = model.b.dot(&h);
        let mut mean = DMatrix::zeros(d, n_t);
        for i in 0..n_t {
            let c = model.a.column(i) + &model.w[i] * &h;
            let m = chol.solve(&c);
            // 1/2 c'm = 1/2 m'(I - U)m.
            lw += 0.5 * c.dot(&m);
            mean.set_column(i, &m);
        }
        log_weights.push(lw);
        means.push(mean);
    }
    let log_norm = logsumexp(&log_weights);
    Ok(Enumeration { chol, log_weights, means, log_norm, a_quad, log_det })
}

/// Exact log partition function by enumeration over hidden configurations
/// and analytic integration over the Gaussian visibles.
pub fn exact_log_partition(model: &LrbmModel) -> Result<f64> {
    let e = enumerate(model)?;
    let (d, n_t) = (model.d() as f64, model.n_t() as f64);
    Ok(e.log_norm - e.a_quad + n_t * (d / 2.0) * (2.0 * std::f64::consts::PI).ln()
        - (n_t / 2.0) * e.log_det)
}

/// Joint energy evaluated with plain index loops. Kept deliberately
/// independent of the model's own energy and likelihood code so agreement
/// between the two routes is evidence, not tautology.
fn naive_energy(model: &LrbmModel, frames: &DMatrix<f64>, bits: usize) -> f64 {
    let (d, n_t, n_h) = (model.d(), model.n_t(), model.n_h());
    let mut e = 0.0;
    for i in 0..n_t {
        for r in 0..d {
            let diff = frames[(r, i)] - model.a[(r, i)];
            e += 0.5 * diff * diff;
        }
    }
    for j in 0..n_h {
        if (bits >> j) & 1 == 1 {
            e -= model.b[j];
        }
    }
    for i in 0..n_t {
        for j in 0..n_h {
            if (bits >> j) & 1 == 1 {
                for r in 0..d {
                    e -= frames[(r, i)] * model.w[i][(r, j)];
                }
            }
        }
    }
    for i in 0..n_t {
        for r in 0..d {
            for s in 0..d {
                e -= 0.5 * frames[(r, i)] * model.u[(r, s)] * frames[(s, i)];
            }
        }
    }
    e
}

/// Exact normalized log-likelihood `log p(V)`.
///
/// The hidden sum is brute-forced over all configurations using
/// [`naive_energy`], then normalized by [`exact_log_partition`]. This is the
/// reference the single-pass unnormalized log-likelihood is validated
/// against.
pub fn exact_loglik(model: &LrbmModel, v: &SequenceSample) -> Result<f64> {
    model.validate()?;
    OracleLimits::default().check(model)?;
    if v.d() != model.d() || v.n_t() != model.n_t() {
        return Err(Error::Dimension(format!(
            "sequence is {}x{}, model expects {}x{}",
            v.d(),
            v.n_t(),
            model.d(),
            model.n_t()
        )));
    }
    let log_z = exact_log_partition(model)?;
    let n_cfg = 1usize << model.n_h();
    let terms: Vec<f64> =
        (0..n_cfg).map(|bits| -naive_energy(model, &v.frames, bits)).collect();
    Ok(logsumexp(&terms) - log_z)
}

/// Exact gradient of `log p(V)` with respect to every parameter family.
///
/// Data statistics use the closed-form hidden posterior at `V`; model
/// statistics use the exact hidden marginal together with the Gaussian
/// moments `E[v_i | h] = m_i(h)` and `E[v_i v_i' | h] = (I-U)^{-1} +
/// m_i m_i'`. Off-diagonal interaction entries are treated as symmetric
/// pairs tied to a single parameter.
pub fn exact_gradient(model: &LrbmModel, v: &SequenceSample) -> Result<GradientAccumulator> {
    let e = enumerate(model)?;
    if v.d() != model.d() || v.n_t() != model.n_t() {
        return Err(Error::Dimension(format!(
            "sequence is {}x{}, model expects {}x{}",
            v.d(),
            v.n_t(),
            model.d(),
            model.n_t()
        )));
    }
    let (d, n_t, n_h) = (model.d(), model.n_t(), model.n_h());
    let n_cfg = 1usize << n_h;
    let sigma_inv = e.chol.inverse();

    // Model-side expectations under the exact hidden marginal.
    let mut eh = DVector::<f64>::zeros(n_h);
    let mut emh: Vec<DMatrix<f64>> = (0..n_t).map(|_| DMatrix::zeros(d, n_h)).collect();
    let mut em: DMatrix<f64> = DMatrix::zeros(d, n_t);
    let mut smm: DMatrix<f64> = DMatrix::zeros(d, d);
    for bits in 0..n_cfg {
        let p = (e.log_weights[bits] - e.log_norm).exp();
        if p == 0.0 {
            continue;
        }
        let mean = &e.means[bits];
        for i in 0..n_t {
            let mi = mean.column(i);
            for r in 0..d {
                em[(r, i)] += p * mi[r];
                for s in 0..d {
                    smm[(r, s)] += p * mi[r] * mi[s];
                }
            }
        }
        for j in 0..n_h {
            if (bits >> j) & 1 == 1 {
                eh[j] += p;
                for i in 0..n_t {
                    let mi = mean.column(i);
                    for r in 0..d {
                        emh[i][(r, j)] += p * mi[r];
                    }
                }
            }
        }
    }

    // Data-side statistics at V.
    let probs = model.hidden_activation(v)?;
    let sig = probs.values();

    let mut grad = GradientAccumulator::zeros_like(model);
    grad.db = sig - &eh;
    for i in 0..n_t {
        let vi = v.frames.column(i);
        grad.dw[i] = vi * sig.transpose() - &emh[i];
        grad.da.set_column(i, &(vi - em.column(i)));
    }
    // Interaction: data term sum_i v_i v_i', model term n_t * Sigma + smm.
    let mut du = DMatrix::<f64>::zeros(d, d);
    for i in 0..n_t {
        let vi = v.frames.column(i);
        for r in 0..d {
            for s in 0..d {
                du[(r, s)] += vi[r] * vi[s];
            }
        }
    }
    du -= smm + sigma_inv * n_t as f64;
    // Upper triangle is canonical; mirror it and zero the diagonal.
    for r in 0..d {
        du[(r, r)] = 0.0;
        for s in (r + 1)..d {
            du[(s, r)] = du[(r, s)];
        }
    }
    grad.du = du;
    Ok(grad)
}

/// Exact sampler: draws the hidden configuration from its enumerated
/// marginal, then the visibles from the conditional Gaussian.
///
/// Building the sampler costs the full enumeration; each draw is then cheap,
/// so reuse one sampler for many draws.
pub struct ExactSampler {
    cumulative: Vec<f64>,
    means: Vec<DMatrix<f64>>,
    /// Upper-triangular `L'` from `I - U = L L'`; sampling solves
    /// `L' x = z` so that `x` has covariance `(I - U)^{-1}`.
    lt: DMatrix<f64>,
    d: usize,
    n_t: usize,
}

impl ExactSampler {
    pub fn new(model: &LrbmModel) -> Result<Self> {
        let e = enumerate(model)?;
        let mut cumulative = Vec::with_capacity(e.log_weights.len());
        let mut acc = 0.0;
        for lw in &e.log_weights {
            acc += (lw - e.log_norm).exp();
            cumulative.push(acc);
        }
        // Guard against round-off in the final bucket.
        if let Some(last) = cumulative.last_mut() {
            *last = 1.0;
        }
        Ok(ExactSampler {
            cumulative,
            means: e.means,
            lt: e.chol.l().transpose(),
            d: model.d(),
            n_t: model.n_t(),
        })
    }

    /// One exact draw. Deterministic for a fixed RNG state.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> SequenceSample {
        let u: f64 = rng.gen();
        let k = self
            .cumulative
            .partition_point(|&c| c <= u)
            .min(self.cumulative.len() - 1);
        let mut frames = self.means[k].clone();
        for i in 0..self.n_t {
            let z = DVector::from_fn(self.d, |_, _| rng.sample::<f64, _>(StandardNormal));
            let x = self
                .lt
                .solve_upper_triangular(&z)
                .expect("Cholesky factor has positive diagonal");
            frames.set_column(i, &(frames.column(i) + x));
        }
        SequenceSample::new(frames)
    }
}

/// Convenience wrapper drawing a single exact sample.
pub fn exact_sample<R: Rng + ?Sized>(model: &LrbmModel, rng: &mut R) -> Result<SequenceSample> {
    Ok(ExactSampler::new(model)?.sample(rng))
}

/// Exact Bayes classifier over a set of tiny models: scores are the exact
/// normalized log-likelihoods, prediction is the argmax (lowest index wins
/// ties). This is the accuracy ceiling any approximate pipeline is compared
/// against.
pub struct BayesClassifier {
    models: Vec<LrbmModel>,
    log_z: Vec<f64>,
}

impl BayesClassifier {
    pub fn new(models: Vec<LrbmModel>) -> Result<Self> {
        if models.is_empty() {
            return Err(Error::InvalidConfig("need at least one model".into()));
        }
        let log_z = models.iter().map(exact_log_partition).collect::<Result<Vec<_>>>()?;
        Ok(BayesClassifier { models, log_z })
    }

    /// `log p(V | class k)` for every class.
    pub fn scores(&self, v: &SequenceSample) -> Result<Vec<f64>> {
        self.models
            .iter()
            .zip(&self.log_z)
            .map(|(m, lz)| Ok(m.unnormalized_loglik(v)? - lz))
            .collect()
    }

    pub fn predict(&self, v: &SequenceSample) -> Result<usize> {
        let scores = self.scores(v)?;
        let mut best = 0;
        for (i, &s) in scores.iter().enumerate() {
            if s > scores[best] {
                best = i;
            }
        }
        Ok(best)
    }
}

/// Configuration for the synthetic benchmark generator.
///
/// One tiny generating model is drawn per class; `separation` scales every
/// drawn parameter, so 0 gives identical (all-zero) classes and larger
/// values give an easier problem. Weight slices are smoothed across time so
/// the sampled sequences vary smoothly, as motion-like data does.
#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub classes: usize,
    pub per_class: usize,
    /// Held-out samples per class, drawn from the same generating models.
    pub test_per_class: usize,
    pub d: usize,
    pub n_t: usize,
    pub n_h: usize,
    pub separation: f64,
    /// Scale of visible-hidden weights before separation scaling.
    pub w_sigma: f64,
    /// Scale of hidden biases before separation scaling.
    pub b_sigma: f64,
    /// Target largest eigenvalue of the interaction matrix at separation 1,
    /// clipped to 0.95 so every generated model stays normalizable.
    pub u_lambda: f64,
    /// Centered moving-average window applied to weights across time slices
    /// (odd; 1 disables smoothing).
    pub smooth_window: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            classes: 3,
            per_class: 100,
            test_per_class: 0,
            d: 3,
            n_t: 4,
            n_h: 8,
            separation: 1.0,
            w_sigma: 0.3,
            b_sigma: 0.3,
            u_lambda: 0.4,
            smooth_window: 3,
            seed: 0,
        }
    }
}

/// A generated benchmark: labeled train and test splits plus the generating
/// models (class `k` is labeled `class{k}`).
pub struct SyntheticData {
    pub train: Vec<SequenceSample>,
    pub test: Vec<SequenceSample>,
    pub truth: Vec<LrbmModel>,
}

/// Draws one generating model per class and exact samples from each.
/// Fully deterministic given the config.
pub fn make_synthetic_dataset(cfg: &SynthConfig) -> Result<SyntheticData> {
    if cfg.classes == 0 {
        return Err(Error::InvalidConfig("need at least one class".into()));
    }
    if cfg.d == 0 || cfg.n_t == 0 {
        return Err(Error::InvalidConfig("need d >= 1 and n_t >= 1".into()));
    }
    let limits = OracleLimits::default();
    if cfg.d > limits.max_d || cfg.n_t > limits.max_n_t || cfg.n_h > limits.max_n_h {
        return Err(Error::LimitExceeded(format!(
            "synthetic dims d={}, n_t={}, n_h={} exceed exact limits \
             d<={}, n_t<={}, n_h<={}",
            cfg.d, cfg.n_t, cfg.n_h, limits.max_d, limits.max_n_t, limits.max_n_h
        )));
    }
    if cfg.smooth_window == 0 || cfg.smooth_window % 2 == 0 {
        return Err(Error::InvalidConfig(format!(
            "smoothing window must be odd and positive, got {}",
            cfg.smooth_window
        )));
    }
    if !(cfg.separation.is_finite() && cfg.separation >= 0.0) {
        return Err(Error::InvalidConfig(format!(
            "separation must be finite and non-negative, got {}",
            cfg.separation
        )));
    }

    let mut train = Vec::with_capacity(cfg.classes * cfg.per_class);
    let mut test = Vec::with_capacity(cfg.classes * cfg.test_per_class);
    let mut truth = Vec::with_capacity(cfg.classes);
    for k in 0..cfg.classes {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, k as u64));
        let model = draw_generating_model(cfg, &mut rng);
        let sampler = ExactSampler::new(&model)?;
        let label = format!("class{k}");
        for j in 0..cfg.per_class {
            let mut s = sampler.sample(&mut rng);
            s.label = Some(label.clone());
            s.id = Some(format!("{label}-train-{j:04}"));
            train.push(s);
        }
        for j in 0..cfg.test_per_class {
            let mut s = sampler.sample(&mut rng);
            s.label = Some(label.clone());
            s.id = Some(format!("{label}-test-{j:04}"));
            test.push(s);
        }
        truth.push(model);
    }
    Ok(SyntheticData { train, test, truth })
}

fn draw_generating_model<R: Rng + ?Sized>(cfg: &SynthConfig, rng: &mut R) -> LrbmModel {
    let mut model = LrbmModel::zeros(cfg.d, cfg.n_t, cfg.n_h);
    let w_scale = cfg.w_sigma * cfg.separation;
    for i in 0..cfg.n_t {
        for c in 0..cfg.n_h {
            for r in 0..cfg.d {
                let z: f64 = rng.sample(StandardNormal);
                model.w[i][(r, c)] = w_scale * z;
            }
        }
    }
    model.w = smooth_slices(&model.w, cfg.smooth_window);
    let b_scale = cfg.b_sigma * cfg.separation;
    for j in 0..cfg.n_h {
        let z: f64 = rng.sample(StandardNormal);
        model.b[j] = b_scale * z;
    }
    let u_target = (cfg.u_lambda * cfg.separation).min(0.95);
    if cfg.d >= 2 && u_target > 0.0 {
        let mut u = DMatrix::<f64>::zeros(cfg.d, cfg.d);
        for r in 0..cfg.d {
            for s in (r + 1)..cfg.d {
                let z: f64 = rng.sample(StandardNormal);
                u[(r, s)] = z;
                u[(s, r)] = z;
            }
        }
        let radius = u.clone().symmetric_eigen().eigenvalues.amax();
        if radius > 0.0 {
            u *= u_target / radius;
        }
        model.u = u;
    }
    model
}

/// Centered moving average across a sequence of equally shaped matrices,
/// with windows shrinking symmetrically at the ends. Rescaled by the square
/// root of the window so the typical entry magnitude is preserved.
fn smooth_slices(slices: &[DMatrix<f64>], window: usize) -> Vec<DMatrix<f64>> {
    if window <= 1 || slices.len() <= 1 {
        return slices.to_vec();
    }
    let half = window / 2;
    let n = slices.len();
    let boost = (window as f64).sqrt();
    (0..n)
        .map(|i| {
            let reach = half.min(i).min(n - 1 - i);
            let lo = i - reach;
            let hi = i + reach;
            let mut acc = slices[lo].clone();
            for s in &slices[lo + 1..=hi] {
                acc += s;
            }
            acc * (boost / (hi - lo + 1) as f64)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::HiddenState;
    use nalgebra::{dmatrix, dvector};
    use std::f64::consts::PI;

    fn tiny_model() -> LrbmModel {
        let mut m = LrbmModel::zeros(3, 2, 3);
        m.a = dmatrix![0.2, -0.1; 0.0, 0.3; -0.4, 0.1];
        m.b = dvector![0.3, -0.2, 0.1];
        m.w[0] = dmatrix![0.4, -0.1, 0.2; 0.0, 0.3, -0.2; 0.1, 0.0, 0.25];
        m.w[1] = dmatrix![-0.3, 0.2, 0.0; 0.1, -0.15, 0.3; 0.0, 0.2, -0.1];
        m.u = dmatrix![0.0, 0.25, -0.15; 0.25, 0.0, 0.1; -0.15, 0.1, 0.0];
        m
    }

    #[test]
    fn zero_model_partition_matches_closed_form() {
        // All parameters zero: Z = 2^n_h (2 pi)^(n_t d / 2).
        let m = LrbmModel::zeros(1, 1, 1);
        let lz = exact_log_partition(&m).unwrap();
        let expect = 2f64.ln() + 0.5 * (2.0 * PI).ln();
        assert!((lz - expect).abs() < 1e-12, "lz = {lz}, expect = {expect}");

        let m = LrbmModel::zeros(2, 3, 0);
        let lz = exact_log_partition(&m).unwrap();
        assert!((lz - 3.0 * (2.0 * PI).ln()).abs() < 1e-12);
    }

    #[test]
    fn visible_bias_shift_leaves_partition_unchanged_when_decoupled() {
        // With W = 0, b = 0, U = 0 the bias only relocates the Gaussian.
        let mut m = LrbmModel::zeros(2, 2, 2);
        m.a = dmatrix![1.5, -2.0; 0.7, 3.1];
        let lz = exact_log_partition(&m).unwrap();
        let expect = 2.0 * 2f64.ln() + 2.0 * (2.0 * PI).ln();
        assert!((lz - expect).abs() < 1e-12);
    }

    /// Composite Simpson rule on a uniform grid.
    fn simpson<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, n: usize) -> f64 {
        assert!(n % 2 == 0);
        let h = (hi - lo) / n as f64;
        let mut s = f(lo) + f(hi);
        for k in 1..n {
            let w = if k % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(lo + h * k as f64);
        }
        s * h / 3.0
    }

    #[test]
    fn partition_matches_quadrature_in_one_dimension() {
        let mut m = LrbmModel::zeros(1, 1, 2);
        m.a = dmatrix![0.3];
        m.b = dvector![0.2, -0.4];
        m.w[0] = dmatrix![0.7, -0.5];
        let lz = exact_log_partition(&m).unwrap();
        let z_quad = simpson(
            |v| {
                let seq = SequenceSample::new(dmatrix![v]);
                (0..4usize)
                    .map(|bits| {
                        let h = HiddenState::Binary(DVector::from_fn(2, |j, _| {
                            ((bits >> j) & 1) as f64
                        }));
                        (-m.energy(&seq, &h).unwrap()).exp()
                    })
                    .sum::<f64>()
            },
            -25.0,
            25.0,
            50_000,
        );
        assert!(
            (lz - z_quad.ln()).abs() < 1e-9,
            "lz = {lz}, quadrature = {}",
            z_quad.ln()
        );
    }

    #[test]
    fn loglik_normalizes_to_one_in_one_dimension() {
        let mut m = LrbmModel::zeros(1, 1, 2);
        m.a = dmatrix![-0.2];
        m.b = dvector![0.5, 0.1];
        m.w[0] = dmatrix![0.4, 0.6];
        let total = simpson(
            |v| {
                exact_loglik(&m, &SequenceSample::new(dmatrix![v])).unwrap().exp()
            },
            -25.0,
            25.0,
            50_000,
        );
        assert!((total - 1.0).abs() < 1e-9, "integral = {total}");
    }

    #[test]
    fn brute_force_loglik_agrees_with_single_pass_formula() {
        // Dual route: naive energy enumeration vs softplus form.
        let m = tiny_model();
        for (seed, scale) in [(1u64, 0.5), (2, 1.0), (3, 2.0)] {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let frames = DMatrix::from_fn(3, 2, |_, _| {
                scale * rng.sample::<f64, _>(StandardNormal)
            });
            let v = SequenceSample::new(frames);
            let direct = m.unnormalized_loglik(&v).unwrap()
                - exact_log_partition(&m).unwrap();
            let brute = exact_loglik(&m, &v).unwrap();
            assert!(
                (direct - brute).abs() <= 1e-10 * direct.abs().max(1.0),
                "direct = {direct}, brute = {brute}"
            );
        }
    }

    #[test]
    fn partition_is_invariant_under_hidden_and_visible_permutations() {
        let m = tiny_model();
        let lz = exact_log_partition(&m).unwrap();

        // Swap hidden units 0 and 2.
        let mut hp = m.clone();
        hp.b.swap_rows(0, 2);
        for wi in &mut hp.w {
            wi.swap_columns(0, 2);
        }
        let lz_h = exact_log_partition(&hp).unwrap();
        assert!((lz - lz_h).abs() < 1e-10);

        // Swap visible dimensions 0 and 1 (rows of a and W, rows+cols of U).
        let mut vp = m.clone();
        vp.a.swap_rows(0, 1);
        for wi in &mut vp.w {
            wi.swap_rows(0, 1);
        }
        vp.u.swap_rows(0, 1);
        vp.u.swap_columns(0, 1);
        let lz_v = exact_log_partition(&vp).unwrap();
        assert!((lz - lz_v).abs() < 1e-10);
    }

    #[test]
    fn non_normalizable_interaction_is_rejected() {
        let mut m = LrbmModel::zeros(2, 1, 1);
        m.u = dmatrix![0.0, 1.1; 1.1, 0.0];
        let err = exact_log_partition(&m).unwrap_err();
        assert!(matches!(err, Error::Numerical(_)), "got {err:?}");
    }

    #[test]
    fn enumeration_limits_are_enforced() {
        let m = LrbmModel::zeros(1, 1, 13);
        assert!(matches!(
            exact_log_partition(&m).unwrap_err(),
            Error::LimitExceeded(_)
        ));
        let m = LrbmModel::zeros(5, 1, 1);
        assert!(matches!(exact_loglik(
            &m,
            &SequenceSample::new(DMatrix::zeros(5, 1))
        )
        .unwrap_err(), Error::LimitExceeded(_)));
    }

    /// Central finite difference of the exact log-likelihood.
    fn fd_loglik(m: &LrbmModel, v: &SequenceSample, bump: impl Fn(&mut LrbmModel, f64)) -> f64 {
        let h = 1e-5;
        let mut plus = m.clone();
        bump(&mut plus, h);
        let mut minus = m.clone();
        bump(&mut minus, -h);
        (exact_loglik(&plus, v).unwrap() - exact_loglik(&minus, v).unwrap()) / (2.0 * h)
    }

    #[test]
    fn exact_gradient_matches_finite_differences_for_all_families() {
        let m = tiny_model();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let v = SequenceSample::new(DMatrix::from_fn(3, 2, |_, _| {
            rng.sample::<f64, _>(StandardNormal)
        }));
        let g = exact_gradient(&m, &v).unwrap();

        let rel = |got: f64, want: f64| (got - want).abs() / want.abs().max(1e-8);

        for j in 0..3 {
            let fd = fd_loglik(&m, &v, |mm, h| mm.b[j] += h);
            assert!(rel(g.db[j], fd) < 1e-5, "db[{j}]: {} vs {}", g.db[j], fd);
        }
        for i in 0..2 {
            for r in 0..3 {
                for c in 0..3 {
                    let fd = fd_loglik(&m, &v, |mm, h| mm.w[i][(r, c)] += h);
                    assert!(
                        rel(g.dw[i][(r, c)], fd) < 1e-5,
                        "dw[{i}][{r},{c}]: {} vs {}",
                        g.dw[i][(r, c)],
                        fd
                    );
                }
            }
        }
        for i in 0..2 {
            for r in 0..3 {
                let fd = fd_loglik(&m, &v, |mm, h| mm.a[(r, i)] += h);
                assert!(
                    rel(g.da[(r, i)], fd) < 1e-5,
                    "da[{r},{i}]: {} vs {}",
                    g.da[(r, i)],
                    fd
                );
            }
        }
        // Interaction entries are symmetric pairs: bump both together.
        for r in 0..3 {
            for s in (r + 1)..3 {
                let fd = fd_loglik(&m, &v, |mm, h| {
                    mm.u[(r, s)] += h;
                    mm.u[(s, r)] += h;
                });
                assert!(
                    rel(g.du[(r, s)], fd) < 1e-5,
                    "du[{r},{s}]: {} vs {}",
                    g.du[(r, s)],
                    fd
                );
            }
        }
    }

    #[test]
    fn exact_gradient_interaction_block_is_symmetric_with_zero_diagonal() {
        let m = tiny_model();
        let v = SequenceSample::new(dmatrix![0.5, -1.0; 1.2, 0.1; -0.3, 0.8]);
        let g = exact_gradient(&m, &v).unwrap();
        for r in 0..3 {
            assert_eq!(g.du[(r, r)], 0.0);
            for s in 0..3 {
                assert_eq!(g.du[(r, s)], g.du[(s, r)]);
            }
        }
    }

    #[test]
    fn sampler_is_deterministic_given_the_seed() {
        let m = tiny_model();
        let sampler = ExactSampler::new(&m).unwrap();
        let mut r1 = ChaCha8Rng::seed_from_u64(5);
        let mut r2 = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            assert_eq!(sampler.sample(&mut r1).frames, sampler.sample(&mut r2).frames);
        }
    }

    #[test]
    fn sampler_moments_match_enumerated_expectations() {
        let m = tiny_model();
        let e = enumerate(&m).unwrap();
        // Expected mean of slice 0 under the hidden marginal.
        let mut want = DVector::<f64>::zeros(3);
        for (bits, lw) in e.log_weights.iter().enumerate() {
            let p = (lw - e.log_norm).exp();
            want += e.means[bits].column(0) * p;
        }

        let sampler = ExactSampler::new(&m).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let n = 100_000;
        let mut got = DVector::<f64>::zeros(3);
        for _ in 0..n {
            got += sampler.sample(&mut rng).frames.column(0);
        }
        got /= n as f64;
        let err = (got.clone() - &want).amax();
        assert!(err < 0.02, "sample mean {got:?} vs exact {want:?}");
    }

    #[test]
    fn sampler_covariance_includes_interaction_structure() {
        // Single hidden configuration (n_h = 0) isolates the Gaussian:
        // covariance must equal (I - U)^{-1}.
        let mut m = LrbmModel::zeros(2, 1, 0);
        m.u = dmatrix![0.0, 0.6; 0.6, 0.0];
        let sampler = ExactSampler::new(&m).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let n = 200_000;
        let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
        for _ in 0..n {
            let s = sampler.sample(&mut rng);
            let (x, y) = (s.frames[(0, 0)], s.frames[(1, 0)]);
            sxx += x * x;
            syy += y * y;
            sxy += x * y;
        }
        let inv = (DMatrix::<f64>::identity(2, 2) - &m.u).try_inverse().unwrap();
        assert!((sxx / n as f64 - inv[(0, 0)]).abs() < 0.03);
        assert!((syy / n as f64 - inv[(1, 1)]).abs() < 0.03);
        assert!((sxy / n as f64 - inv[(0, 1)]).abs() < 0.03);
    }

    #[test]
    fn bayes_classifier_breaks_ties_toward_lowest_index() {
        let m = LrbmModel::zeros(2, 2, 1);
        let clf = BayesClassifier::new(vec![m.clone(), m]).unwrap();
        let v = SequenceSample::new(dmatrix![0.4, -0.2; 0.1, 0.3]);
        assert_eq!(clf.predict(&v).unwrap(), 0);
    }

    #[test]
    fn synthetic_dataset_shapes_labels_and_determinism() {
        let cfg = SynthConfig {
            classes: 2,
            per_class: 5,
            test_per_class: 3,
            seed: 9,
            ..SynthConfig::default()
        };
        let a = make_synthetic_dataset(&cfg).unwrap();
        let b = make_synthetic_dataset(&cfg).unwrap();
        assert_eq!(a.train.len(), 10);
        assert_eq!(a.test.len(), 6);
        assert_eq!(a.truth.len(), 2);
        assert_eq!(a.train[0].label.as_deref(), Some("class0"));
        assert_eq!(a.train[5].label.as_deref(), Some("class1"));
        assert_eq!(a.train[3].id.as_deref(), Some("class0-train-0003"));
        for (x, y) in a.train.iter().zip(&b.train) {
            assert_eq!(x.frames, y.frames);
        }
        for t in &a.truth {
            t.validate().unwrap();
        }
        // Train and test are distinct draws.
        assert_ne!(a.train[0].frames, a.test[0].frames);
    }

    #[test]
    fn zero_separation_collapses_classes_to_chance() {
        let cfg = SynthConfig {
            classes: 3,
            per_class: 30,
            separation: 0.0,
            seed: 4,
            ..SynthConfig::default()
        };
        let data = make_synthetic_dataset(&cfg).unwrap();
        for t in &data.truth {
            assert_eq!(t.u.amax(), 0.0);
            assert_eq!(t.b.amax(), 0.0);
            assert!(t.w.iter().all(|wi| wi.amax() == 0.0));
        }
        // Identical models score identically; ties resolve to class 0,
        // so accuracy over balanced data is exactly 1/3.
        let clf = BayesClassifier::new(data.truth).unwrap();
        let mut hits = 0;
        for s in &data.train {
            let want = s.label.as_deref() == Some("class0");
            let got = clf.predict(s).unwrap() == 0;
            assert_eq!(clf.predict(s).unwrap(), 0);
            if want && got {
                hits += 1;
            }
        }
        assert_eq!(hits, 30);
    }

    #[test]
    fn large_separation_is_nearly_bayes_separable() {
        let cfg = SynthConfig {
            classes: 3,
            per_class: 60,
            separation: 2.0,
            seed: 12,
            ..SynthConfig::default()
        };
        let data = make_synthetic_dataset(&cfg).unwrap();
        let clf = BayesClassifier::new(data.truth).unwrap();
        let mut hits = 0;
        for s in &data.train {
            let want: usize = s.label.as_deref().unwrap()[5..].parse().unwrap();
            if clf.predict(s).unwrap() == want {
                hits += 1;
            }
        }
        let acc = hits as f64 / data.train.len() as f64;
        assert!(acc > 0.95, "bayes accuracy {acc}");
    }

    #[test]
    fn smoothing_window_preserves_constant_slices() {
        let slices: Vec<DMatrix<f64>> =
            (0..4).map(|_| DMatrix::from_element(2, 2, 1.0)).collect();
        let out = smooth_slices(&slices, 3);
        // Constant input stays constant up to the scale boost.
        let boost = 3f64.sqrt();
        for s in &out {
            for x in s.iter() {
                assert!((x - boost).abs() < 1e-12);
            }
        }
        // Window 1 is the identity.
        let out = smooth_slices(&slices, 1);
        assert_eq!(out, slices);
    }
}
