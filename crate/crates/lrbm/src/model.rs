//! Model parameters, energy, conditionals, and the unnormalized
//! log-likelihood used for classification.
//!
//! A sequence is a `d x n_t` real matrix: one column per time slice, one row
//! per feature dimension. The model couples every visible unit to a shared
//! binary hidden layer and, within each time slice, couples visible
//! dimensions to each other through a symmetric interaction matrix `U` with
//! zero diagonal. `U` is shared across slices. Visible units are Gaussian
//! with unit conditional variance.
//!
//! Energy of a joint configuration `(V, h)`:
//!
//! ```text
//! E(V, h) = 1/2 sum_i |v_i - a_i|^2  -  b'h  -  sum_i v_i' W_i h
//!           - 1/2 sum_i v_i' U v_i
//! ```
//!
//! where `v_i` is slice `i` of the sequence, `a_i` its visible bias column,
//! and `W_i` the `d x n_h` weight slice for time `i`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{sigmoid, softplus};

/// A fixed-length sequence: `frames` is `d x n_t` (dimension by time).
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceSample {
    pub frames: DMatrix<f64>,
    /// Class label, when known.
    pub label: Option<String>,
    /// Stable identifier carried through prediction output.
    pub id: Option<String>,
}

impl SequenceSample {
    pub fn new(frames: DMatrix<f64>) -> Self {
        SequenceSample { frames, label: None, id: None }
    }

    pub fn with_label(frames: DMatrix<f64>, label: impl Into<String>) -> Self {
        SequenceSample { frames, label: Some(label.into()), id: None }
    }

    /// Feature dimension per time slice.
    pub fn d(&self) -> usize {
        self.frames.nrows()
    }

    /// Number of time slices.
    pub fn n_t(&self) -> usize {
        self.frames.ncols()
    }
}

/// Hidden layer state: binary samples or activation probabilities.
/// Both are `n_h` vectors; binary states hold only 0.0 and 1.0.
#[derive(Debug, Clone, PartialEq)]
pub enum HiddenState {
    Binary(DVector<f64>),
    Probability(DVector<f64>),
}

impl HiddenState {
    pub fn values(&self) -> &DVector<f64> {
        match self {
            HiddenState::Binary(v) | HiddenState::Probability(v) => v,
        }
    }

    pub fn is_binary(&self) -> bool {
        matches!(self, HiddenState::Binary(_))
    }

    pub fn len(&self) -> usize {
        self.values().len()
    }

    pub fn is_empty(&self) -> bool {
        self.values().len() == 0
    }
}

/// Model parameters.
///
/// Invariants, checked by [`LrbmModel::validate`]:
/// - `u` is `d x d`, exactly symmetric, with zero diagonal;
/// - all parameters are finite;
/// - shapes are consistent (`a` is `d x n_t`, `b` is `n_h`, `w` holds `n_t`
///   slices of `d x n_h`).
///
/// Normalizability additionally requires the largest eigenvalue of `u` to
/// stay below 1; training enforces a configurable margin below that bound.
#[derive(Debug, Clone, PartialEq)]
pub struct LrbmModel {
    /// Visible biases, `d x n_t` (column `i` biases time slice `i`).
    pub a: DMatrix<f64>,
    /// Hidden biases, length `n_h`.
    pub b: DVector<f64>,
    /// Visible-to-hidden weights: one `d x n_h` matrix per time slice.
    pub w: Vec<DMatrix<f64>>,
    /// Within-slice interaction matrix, `d x d`, symmetric, zero diagonal.
    pub u: DMatrix<f64>,
}

impl LrbmModel {
    /// All-zero model of the given shape (weights included).
    pub fn zeros(d: usize, n_t: usize, n_h: usize) -> Self {
        LrbmModel {
            a: DMatrix::zeros(d, n_t),
            b: DVector::zeros(n_h),
            w: (0..n_t).map(|_| DMatrix::zeros(d, n_h)).collect(),
            u: DMatrix::zeros(d, d),
        }
    }

    pub fn d(&self) -> usize {
        self.a.nrows()
    }

    pub fn n_t(&self) -> usize {
        self.a.ncols()
    }

    pub fn n_h(&self) -> usize {
        self.b.len()
    }

    /// Checks the structural invariants listed on the type.
    pub fn validate(&self) -> Result<()> {
        let (d, n_t, n_h) = (self.d(), self.n_t(), self.n_h());
        if d == 0 || n_t == 0 {
            return Err(Error::Dimension(format!(
                "model needs d >= 1 and n_t >= 1, got d={d}, n_t={n_t}"
            )));
        }
        if self.w.len() != n_t {
            return Err(Error::Dimension(format!(
                "expected {n_t} weight slices, got {}",
                self.w.len()
            )));
        }
        for (i, wi) in self.w.iter().enumerate() {
            if wi.nrows() != d || wi.ncols() != n_h {
                return Err(Error::Dimension(format!(
                    "weight slice {i} is {}x{}, expected {d}x{n_h}",
                    wi.nrows(),
                    wi.ncols()
                )));
            }
        }
        if self.u.nrows() != d || self.u.ncols() != d {
            return Err(Error::Dimension(format!(
                "interaction matrix is {}x{}, expected {d}x{d}",
                self.u.nrows(),
                self.u.ncols()
            )));
        }
        for r in 0..d {
            if self.u[(r, r)] != 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "interaction diagonal must be zero, u[{r},{r}] = {}",
                    self.u[(r, r)]
                )));
            }
            for c in (r + 1)..d {
                if self.u[(r, c)] != self.u[(c, r)] {
                    return Err(Error::InvalidConfig(format!(
                        "interaction matrix must be exactly symmetric, \
                         u[{r},{c}] = {} vs u[{c},{r}] = {}",
                        self.u[(r, c)],
                        self.u[(c, r)]
                    )));
                }
            }
        }
        if !self.params_finite() {
            return Err(Error::Numerical("model contains non-finite parameters".into()));
        }
        Ok(())
    }

    /// True when every parameter is finite.
    pub fn params_finite(&self) -> bool {
        self.a.iter().all(|x| x.is_finite())
            && self.b.iter().all(|x| x.is_finite())
            && self.w.iter().all(|wi| wi.iter().all(|x| x.is_finite()))
            && self.u.iter().all(|x| x.is_finite())
    }

    fn check_sequence(&self, v: &SequenceSample) -> Result<()> {
        if v.d() != self.d() || v.n_t() != self.n_t() {
            return Err(Error::Dimension(format!(
                "sequence is {}x{}, model expects {}x{}",
                v.d(),
                v.n_t(),
                self.d(),
                self.n_t()
            )));
        }
        Ok(())
    }

    fn check_hidden(&self, h: &HiddenState) -> Result<()> {
        if h.len() != self.n_h() {
            return Err(Error::Dimension(format!(
                "hidden state has {} units, model expects {}",
                h.len(),
                self.n_h()
            )));
        }
        Ok(())
    }

    /// Joint energy `E(V, h)` for a binary hidden state.
    ///
    /// Deterministic: identical inputs give bit-identical results.
    pub fn energy(&self, v: &SequenceSample, h: &HiddenState) -> Result<f64> {
        self.check_sequence(v)?;
        self.check_hidden(h)?;
        if !h.is_binary() {
            return Err(Error::InvalidConfig(
                "energy is defined for binary hidden states".into(),
            ));
        }
        let hv = h.values();
        let mut e = -self.b.dot(hv);
        for i in 0..self.n_t() {
            let vi = v.frames.column(i);
            let ai = self.a.column(i);
            let resid = vi - ai;
            e += 0.5 * resid.dot(&resid);
            e -= vi.dot(&(&self.w[i] * hv));
            e -= 0.5 * vi.dot(&(&self.u * vi));
        }
        Ok(e)
    }

    /// Hidden pre-activations `b_j + sum_i v_i' w_ij`, length `n_h`.
    ///
    /// Independent of `u`: the interaction term couples visibles only, so it
    /// cancels from the hidden conditional.
    pub fn hidden_preactivation(&self, v: &SequenceSample) -> Result<DVector<f64>> {
        self.check_sequence(v)?;
        let mut pre = self.b.clone();
        for i in 0..self.n_t() {
            pre += self.w[i].tr_mul(&v.frames.column(i));
        }
        Ok(pre)
    }

    /// Hidden activation probabilities `p(h_j = 1 | V)` (logistic of the
    /// pre-activations).
    pub fn hidden_activation(&self, v: &SequenceSample) -> Result<HiddenState> {
        let pre = self.hidden_preactivation(v)?;
        Ok(HiddenState::Probability(pre.map(sigmoid)))
    }

    /// Bernoulli sample of the hidden layer given `V`.
    /// Deterministic for a fixed RNG state.
    pub fn sample_hidden<R: Rng + ?Sized>(
        &self,
        v: &SequenceSample,
        rng: &mut R,
    ) -> Result<HiddenState> {
        let probs = self.hidden_preactivation(v)?.map(sigmoid);
        let draws =
            DVector::from_iterator(probs.len(), probs.iter().map(|&p| {
                if rng.gen::<f64>() < p { 1.0 } else { 0.0 }
            }));
        Ok(HiddenState::Binary(draws))
    }

    /// Mean of the Gaussian conditional for visible unit `(dim, slice)`
    /// given the hidden state and the other visible units of the same slice:
    /// `a[dim, slice] + w[slice] h + sum_{k != dim} v_k u[k, dim]`.
    /// The conditional variance is 1.
    pub fn visible_conditional_mean(
        &self,
        h: &HiddenState,
        slice: usize,
        dim: usize,
        current_slice: &DVector<f64>,
    ) -> Result<f64> {
        self.check_hidden(h)?;
        if slice >= self.n_t() || dim >= self.d() {
            return Err(Error::Dimension(format!(
                "unit ({dim}, {slice}) outside model of shape {}x{}",
                self.d(),
                self.n_t()
            )));
        }
        if current_slice.len() != self.d() {
            return Err(Error::Dimension(format!(
                "slice vector has {} entries, expected {}",
                current_slice.len(),
                self.d()
            )));
        }
        // u has zero diagonal, so the dim term contributes nothing.
        let coupling = self.u.column(dim).dot(current_slice);
        Ok(self.a[(dim, slice)] + self.w[slice].row(dim).tr_dot(h.values()) + coupling)
    }

    /// Deterministic mean-field reconstruction of the visible layer given a
    /// hidden state.
    ///
    /// Runs `sweeps` Gauss-Seidel passes per slice: each visible unit is set
    /// to its conditional mean given the hidden state and the latest values
    /// of the other units in its slice. With the largest absolute
    /// interaction eigenvalue below 1 the iteration contracts to the unique
    /// fixed point `(I - U)^{-1} (a_i + W_i h)` per slice.
    pub fn mean_field_reconstruct(
        &self,
        h: &HiddenState,
        init: &SequenceSample,
        sweeps: usize,
    ) -> Result<SequenceSample> {
        self.check_hidden(h)?;
        self.check_sequence(init)?;
        let d = self.d();
        let mut frames = init.frames.clone();
        for i in 0..self.n_t() {
            // Per-slice constant part: a_i + W_i h.
            let base = self.a.column(i) + &self.w[i] * h.values();
            let mut v = frames.column(i).clone_owned();
            for _ in 0..sweeps {
                for s in 0..d {
                    v[s] = base[s] + self.u.column(s).dot(&v);
                }
            }
            frames.set_column(i, &v);
        }
        Ok(SequenceSample { frames, label: init.label.clone(), id: init.id.clone() })
    }

    /// Stochastic counterpart of [`mean_field_reconstruct`]: after each unit
    /// update the conditional mean is perturbed with unit-variance Gaussian
    /// noise, giving a Gibbs pass over the visible layer.
    ///
    /// [`mean_field_reconstruct`]: LrbmModel::mean_field_reconstruct
    pub fn gibbs_reconstruct<R: Rng + ?Sized>(
        &self,
        h: &HiddenState,
        init: &SequenceSample,
        sweeps: usize,
        rng: &mut R,
    ) -> Result<SequenceSample> {
        self.check_hidden(h)?;
        self.check_sequence(init)?;
        let d = self.d();
        let mut frames = init.frames.clone();
        for i in 0..self.n_t() {
            let base = self.a.column(i) + &self.w[i] * h.values();
            let mut v = frames.column(i).clone_owned();
            for _ in 0..sweeps {
                for s in 0..d {
                    let noise: f64 = rng.sample(rand_distr::StandardNormal);
                    v[s] = base[s] + self.u.column(s).dot(&v) + noise;
                }
            }
            frames.set_column(i, &v);
        }
        Ok(SequenceSample { frames, label: init.label.clone(), id: init.id.clone() })
    }

    /// Unnormalized log-likelihood `g(V)`: the log of the joint density with
    /// the hidden layer summed out, up to the log partition function.
    ///
    /// ```text
    /// g(V) = -1/2 sum_i |v_i - a_i|^2 + 1/2 sum_i v_i' U v_i
    ///        + sum_j softplus(b_j + sum_i v_i' w_ij)
    /// ```
    ///
    /// The softplus is evaluated in its overflow-safe form, so large
    /// pre-activations saturate gracefully. `exp(g)` integrated over all
    /// sequences equals the partition function; see the exact module for the
    /// enumeration-based counterpart.
    pub fn unnormalized_loglik(&self, v: &SequenceSample) -> Result<f64> {
        self.check_sequence(v)?;
        let mut g = 0.0;
        for i in 0..self.n_t() {
            let vi = v.frames.column(i);
            let resid = vi - self.a.column(i);
            g -= 0.5 * resid.dot(&resid);
            g += 0.5 * vi.dot(&(&self.u * vi));
        }
        let pre = self.hidden_preactivation(v)?;
        g += pre.iter().map(|&x| softplus(x)).sum::<f64>();
        Ok(g)
    }
}

/// Serializable training provenance attached to persisted models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainProvenance {
    pub seed: u64,
    pub epochs: usize,
    pub config_hash: String,
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{dmatrix, dvector};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// d=1, n_t=1, n_h=1 model with a=0, b=0, w=1, u=0.
    fn scalar_model() -> LrbmModel {
        let mut m = LrbmModel::zeros(1, 1, 1);
        m.w[0][(0, 0)] = 1.0;
        m
    }

    fn seq(frames: DMatrix<f64>) -> SequenceSample {
        SequenceSample::new(frames)
    }

    #[test]
    fn energy_of_scalar_model_hand_computed() {
        // v=1.2, h=1: E = 0.5*1.44 - 0 - 1.2*1 - 0 = -0.48.
        let m = scalar_model();
        let v = seq(dmatrix![1.2]);
        let h = HiddenState::Binary(dvector![1.0]);
        let e = m.energy(&v, &h).unwrap();
        assert!((e - (-0.48)).abs() < 1e-15, "e = {e}");
    }

    #[test]
    fn energy_decomposes_into_quadratic_bias_weight_interaction_terms() {
        // d=2, n_t=1, n_h=1; a=0, b=0.5, w column (1, -1), u off-diagonal 0.25.
        let mut m = LrbmModel::zeros(2, 1, 1);
        m.b[0] = 0.5;
        m.w[0] = dmatrix![1.0; -1.0];
        m.u = dmatrix![0.0, 0.25; 0.25, 0.0];
        let v = seq(dmatrix![2.0; 1.0]);
        let h = HiddenState::Binary(dvector![1.0]);
        // quadratic: 0.5*(4+1) = 2.5; bias: -0.5; weights: -(2-1) = -1;
        // interaction: -0.5 * 2 * (2*1*0.25) = -0.5.
        let e = m.energy(&v, &h).unwrap();
        assert!((e - (2.5 - 0.5 - 1.0 - 0.5)).abs() < 1e-15, "e = {e}");
    }

    #[test]
    fn energy_with_all_zero_parameters_is_squared_norm_half() {
        let m = LrbmModel::zeros(2, 3, 4);
        let v = seq(dmatrix![1.0, 0.0, 2.0; -1.0, 1.0, 0.0]);
        let h = HiddenState::Binary(dvector![0.0, 1.0, 0.0, 1.0]);
        let e = m.energy(&v, &h).unwrap();
        let norm2: f64 = v.frames.iter().map(|x| x * x).sum();
        assert!((e - 0.5 * norm2).abs() < 1e-15);
    }

    #[test]
    fn energy_rejects_mismatched_shapes_and_probability_states() {
        let m = scalar_model();
        let v_bad = seq(dmatrix![1.0, 2.0]);
        let h = HiddenState::Binary(dvector![1.0]);
        assert!(m.energy(&v_bad, &h).is_err());
        let v = seq(dmatrix![1.0]);
        let h_bad = HiddenState::Binary(dvector![1.0, 0.0]);
        assert!(m.energy(&v, &h_bad).is_err());
        let h_prob = HiddenState::Probability(dvector![0.5]);
        assert!(m.energy(&v, &h_prob).is_err());
    }

    #[test]
    fn hidden_activation_matches_logistic_of_preactivation() {
        // Pre-activation 0 gives exactly 0.5.
        let m = scalar_model();
        let act = m.hidden_activation(&seq(dmatrix![0.0])).unwrap();
        assert_eq!(act.values()[0], 0.5);
        // v=2, w=1, b=0: sigmoid(2).
        let act = m.hidden_activation(&seq(dmatrix![2.0])).unwrap();
        assert!((act.values()[0] - 0.880_797_077_977_882_3).abs() < 1e-15);
        assert!(!act.is_binary());
    }

    #[test]
    fn hidden_activation_ignores_interaction_matrix() {
        let mut m = LrbmModel::zeros(3, 2, 4);
        m.b = dvector![0.1, -0.2, 0.3, 0.0];
        m.w[0] = DMatrix::from_fn(3, 4, |r, c| 0.1 * (r as f64) - 0.05 * (c as f64));
        m.w[1] = DMatrix::from_fn(3, 4, |r, c| 0.02 * (r as f64 + c as f64));
        let v = seq(dmatrix![0.5, -1.0; 2.0, 0.3; -0.7, 1.1]);
        let before = m.hidden_activation(&v).unwrap();
        m.u = dmatrix![0.0, 0.4, -0.2; 0.4, 0.0, 0.1; -0.2, 0.1, 0.0];
        let after = m.hidden_activation(&v).unwrap();
        assert_eq!(before.values(), after.values());
    }

    #[test]
    fn sample_hidden_is_reproducible_and_respects_saturation() {
        let mut m = LrbmModel::zeros(1, 1, 3);
        m.b = dvector![50.0, -50.0, 0.0];
        let v = seq(dmatrix![0.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let s1 = m.sample_hidden(&v, &mut rng).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let s2 = m.sample_hidden(&v, &mut rng).unwrap();
        assert_eq!(s1.values(), s2.values());
        assert!(s1.is_binary());
        // Saturated units are deterministic.
        assert_eq!(s1.values()[0], 1.0);
        assert_eq!(s1.values()[1], 0.0);
        // All draws are exactly 0 or 1.
        assert!(s1.values().iter().all(|&x| x == 0.0 || x == 1.0));
    }

    #[test]
    fn visible_conditional_mean_includes_within_slice_coupling() {
        // d=2, u off-diagonal 0.3: mean of unit 0 depends on unit 1 only.
        let mut m = LrbmModel::zeros(2, 1, 1);
        m.a[(0, 0)] = 0.5;
        m.w[0] = dmatrix![2.0; 0.0];
        m.u = dmatrix![0.0, 0.3; 0.3, 0.0];
        let h = HiddenState::Binary(dvector![1.0]);
        let cur = dvector![9.0, 4.0]; // own value 9.0 must not matter
        let mean = m.visible_conditional_mean(&h, 0, 0, &cur).unwrap();
        // 0.5 + 2.0*1 + 0.3*4.0 = 3.7
        assert!((mean - 3.7).abs() < 1e-15, "mean = {mean}");
        // With h=0 the weight term drops.
        let h0 = HiddenState::Binary(dvector![0.0]);
        let mean0 = m.visible_conditional_mean(&h0, 0, 0, &cur).unwrap();
        assert!((mean0 - (0.5 + 1.2)).abs() < 1e-15);
    }

    #[test]
    fn visible_conditional_mean_with_zero_interaction_is_bias_plus_weights() {
        let mut m = LrbmModel::zeros(2, 2, 2);
        m.a = dmatrix![0.1, 0.2; 0.3, 0.4];
        m.w[1] = dmatrix![1.0, -1.0; 0.5, 0.5];
        let h = HiddenState::Binary(dvector![1.0, 1.0]);
        let cur = dvector![100.0, -100.0]; // ignored when u = 0
        let mean = m.visible_conditional_mean(&h, 1, 0, &cur).unwrap();
        assert!((mean - (0.2 + 0.0)).abs() < 1e-15);
        let mean = m.visible_conditional_mean(&h, 1, 1, &cur).unwrap();
        assert!((mean - (0.4 + 1.0)).abs() < 1e-15);
    }

    #[test]
    fn mean_field_converges_to_linear_fixed_point() {
        // Fixed point solves (I - U) v = a_i + W_i h per slice.
        let mut m = LrbmModel::zeros(3, 2, 2);
        m.a = dmatrix![0.2, -0.1; 0.0, 0.3; 0.5, 0.1];
        m.w[0] = dmatrix![0.4, 0.0; -0.2, 0.1; 0.0, 0.3];
        m.w[1] = dmatrix![0.1, 0.2; 0.0, -0.1; 0.2, 0.0];
        m.u = dmatrix![0.0, 0.2, -0.1; 0.2, 0.0, 0.15; -0.1, 0.15, 0.0];
        let h = HiddenState::Binary(dvector![1.0, 0.0]);
        let init = seq(DMatrix::zeros(3, 2));
        let recon = m.mean_field_reconstruct(&h, &init, 200).unwrap();
        let iu = DMatrix::<f64>::identity(3, 3) - &m.u;
        let lu = iu.lu();
        for i in 0..2 {
            let rhs = m.a.column(i) + &m.w[i] * h.values();
            let exact = lu.solve(&rhs).unwrap();
            let err = (recon.frames.column(i) - exact).amax();
            assert!(err < 1e-12, "slice {i} err {err}");
        }
    }

    #[test]
    fn mean_field_with_zero_interaction_converges_in_one_sweep() {
        let mut m = LrbmModel::zeros(2, 2, 1);
        m.a = dmatrix![1.0, 2.0; 3.0, 4.0];
        m.w[0] = dmatrix![0.5; -0.5];
        let h = HiddenState::Binary(dvector![1.0]);
        let init = seq(dmatrix![9.0, 9.0; 9.0, 9.0]);
        let one = m.mean_field_reconstruct(&h, &init, 1).unwrap();
        let expect = dmatrix![1.5, 2.0; 2.5, 4.0];
        assert!((one.frames.clone() - &expect).amax() < 1e-15);
        // Further sweeps change nothing.
        let ten = m.mean_field_reconstruct(&h, &init, 10).unwrap();
        assert_eq!(one.frames, ten.frames);
    }

    #[test]
    fn mean_field_zero_sweeps_returns_init() {
        let m = scalar_model();
        let init = seq(dmatrix![3.25]);
        let h = HiddenState::Binary(dvector![1.0]);
        let out = m.mean_field_reconstruct(&h, &init, 0).unwrap();
        assert_eq!(out.frames, init.frames);
    }

    #[test]
    fn gibbs_reconstruct_is_seed_deterministic_and_differs_from_mean_field() {
        let mut m = LrbmModel::zeros(2, 1, 1);
        m.w[0] = dmatrix![0.5; 0.5];
        m.u = dmatrix![0.0, 0.2; 0.2, 0.0];
        let h = HiddenState::Binary(dvector![1.0]);
        let init = seq(dmatrix![0.0; 0.0]);
        let mut r1 = ChaCha8Rng::seed_from_u64(3);
        let g1 = m.gibbs_reconstruct(&h, &init, 2, &mut r1).unwrap();
        let mut r2 = ChaCha8Rng::seed_from_u64(3);
        let g2 = m.gibbs_reconstruct(&h, &init, 2, &mut r2).unwrap();
        assert_eq!(g1.frames, g2.frames);
        let mf = m.mean_field_reconstruct(&h, &init, 2).unwrap();
        assert_ne!(g1.frames, mf.frames);
    }

    #[test]
    fn loglik_of_scalar_model_hand_computed() {
        // g(v) = -v^2/2 + softplus(v) for a=0, b=0, w=1, u=0.
        let m = scalar_model();
        let v = seq(dmatrix![1.2]);
        let g = m.unnormalized_loglik(&v).unwrap();
        let expect = -0.72 + softplus(1.2);
        assert!((g - expect).abs() < 1e-15);
    }

    #[test]
    fn loglik_interaction_term_carries_one_half() {
        // d=2, all else zero, u off-diagonal q: g = -|v|^2/2 + q*v0*v1
        // + n_h*log 2. The cross term appears once, matching the energy's
        // half on the symmetric pair.
        let mut m = LrbmModel::zeros(2, 1, 3);
        let q = 0.37;
        m.u = dmatrix![0.0, q; q, 0.0];
        let v = seq(dmatrix![1.5; -2.0]);
        let g = m.unnormalized_loglik(&v).unwrap();
        let expect = -0.5 * (1.5f64 * 1.5 + 4.0) + q * 1.5 * (-2.0) + 3.0 * 2f64.ln();
        assert!((g - expect).abs() < 1e-14, "g = {g}, expect = {expect}");
    }

    #[test]
    fn loglik_is_stable_for_huge_preactivations() {
        let mut m = LrbmModel::zeros(1, 1, 2);
        m.b = dvector![1000.0, -1000.0];
        let g = m.unnormalized_loglik(&seq(dmatrix![0.0])).unwrap();
        // softplus(1000) = 1000, softplus(-1000) ~ 0.
        assert!((g - 1000.0).abs() < 1e-12);
        assert!(g.is_finite());
    }

    #[test]
    fn loglik_equals_logsumexp_of_negative_energy_over_hidden_states() {
        // Enumerates all 2^n_h binary hidden configurations.
        let mut m = LrbmModel::zeros(2, 2, 3);
        m.a = dmatrix![0.3, -0.2; 0.0, 0.4];
        m.b = dvector![0.2, -0.5, 0.1];
        m.w[0] = dmatrix![0.3, -0.1, 0.2; 0.0, 0.25, -0.3];
        m.w[1] = dmatrix![-0.2, 0.1, 0.0; 0.15, 0.0, 0.35];
        m.u = dmatrix![0.0, 0.3; 0.3, 0.0];
        let v = seq(dmatrix![0.7, -1.2; 0.4, 0.9]);
        let mut terms = Vec::new();
        for bits in 0u32..8 {
            let h = HiddenState::Binary(DVector::from_fn(3, |j, _| {
                f64::from((bits >> j) & 1)
            }));
            terms.push(-m.energy(&v, &h).unwrap());
        }
        let lse = crate::math::logsumexp(&terms);
        let g = m.unnormalized_loglik(&v).unwrap();
        assert!((g - lse).abs() < 1e-10, "g = {g}, lse = {lse}");
    }

    #[test]
    fn zero_interaction_reduces_to_standard_rbm_free_energy() {
        // Independent reference: Gaussian-binary RBM free energy written as
        // plain loops over a flattened visible vector.
        let mut m = LrbmModel::zeros(2, 2, 2);
        m.a = dmatrix![0.1, -0.3; 0.2, 0.0];
        m.b = dvector![0.4, -0.1];
        m.w[0] = dmatrix![0.2, -0.4; 0.1, 0.3];
        m.w[1] = dmatrix![0.0, 0.5; -0.2, 0.1];
        let v = seq(dmatrix![0.8, -0.5; 1.1, 0.2]);

        let mut reference = 0.0;
        for i in 0..2 {
            for r in 0..2 {
                let diff: f64 = v.frames[(r, i)] - m.a[(r, i)];
                reference -= 0.5 * diff * diff;
            }
        }
        for j in 0..2 {
            let mut pre = m.b[j];
            for i in 0..2 {
                for r in 0..2 {
                    pre += v.frames[(r, i)] * m.w[i][(r, j)];
                }
            }
            reference += softplus(pre);
        }
        let g = m.unnormalized_loglik(&v).unwrap();
        assert!((g - reference).abs() < 1e-14);
    }

    #[test]
    fn validate_accepts_good_and_rejects_bad_models() {
        let m = scalar_model();
        assert!(m.validate().is_ok());

        let mut asym = LrbmModel::zeros(2, 1, 1);
        asym.u[(0, 1)] = 0.2;
        assert!(asym.validate().is_err());

        let mut diag = LrbmModel::zeros(2, 1, 1);
        diag.u[(0, 0)] = 0.1;
        assert!(diag.validate().is_err());

        let mut nan = scalar_model();
        nan.b[0] = f64::NAN;
        assert!(nan.validate().is_err());

        let mut wrong_w = scalar_model();
        wrong_w.w.push(DMatrix::zeros(1, 1));
        assert!(wrong_w.validate().is_err());
    }

    #[test]
    fn zero_hidden_units_are_supported() {
        let mut m = LrbmModel::zeros(2, 1, 0);
        m.u = dmatrix![0.0, 0.1; 0.1, 0.0];
        m.validate().unwrap();
        let v = seq(dmatrix![1.0; 2.0]);
        let h = HiddenState::Binary(DVector::zeros(0));
        // Energy reduces to quadratic minus interaction.
        let e = m.energy(&v, &h).unwrap();
        assert!((e - (0.5 * 5.0 - 0.1 * 2.0)).abs() < 1e-15);
        let g = m.unnormalized_loglik(&v).unwrap();
        assert!((g - (-0.5 * 5.0 + 0.1 * 2.0)).abs() < 1e-15);
        let act = m.hidden_activation(&v).unwrap();
        assert_eq!(act.len(), 0);
    }

    #[test]
    fn energy_and_loglik_are_bit_deterministic() {
        let m = scalar_model();
        let v = seq(dmatrix![0.7]);
        let h = HiddenState::Binary(dvector![1.0]);
        let e = m.energy(&v, &h).unwrap();
        let g = m.unnormalized_loglik(&v).unwrap();
        for _ in 0..8 {
            assert_eq!(e.to_bits(), m.energy(&v, &h).unwrap().to_bits());
            assert_eq!(g.to_bits(), m.unnormalized_loglik(&v).unwrap().to_bits());
        }
        let copy = m.clone();
        assert_eq!(g.to_bits(), copy.unnormalized_loglik(&v).unwrap().to_bits());
    }

    mod proptests {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

            /// The Gauss-Seidel sweep never moves away from its fixed point
            /// in the energy norm of `I - U`, the norm in which the
            /// iteration provably contracts for positive definite systems.
            #[test]
            fn mean_field_distance_to_fixed_point_never_increases(
                seed in 0u64..1000,
                d in 2usize..5,
                n_t in 1usize..4,
                scale in 0.1f64..0.9,
            ) {
                use rand::{Rng, SeedableRng};
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
                let mut m = LrbmModel::zeros(d, n_t, 2);
                m.a = DMatrix::from_fn(d, n_t, |_, _| rng.gen_range(-1.0..1.0));
                for w in &mut m.w {
                    *w = DMatrix::from_fn(d, 2, |_, _| rng.gen_range(-1.0..1.0));
                }
                let raw = DMatrix::from_fn(d, d, |r, c| {
                    if r == c { 0.0 } else { rng.gen_range(-1.0..1.0) }
                });
                let sym = (&raw + raw.transpose()) * 0.5;
                let lam = crate::math::lambda_max_symmetric(&sym).abs().max(1e-9);
                m.u = sym * (scale / lam);
                m.validate().unwrap();

                let h = HiddenState::Binary(DVector::from_fn(2, |_, _| {
                    if rng.gen::<bool>() { 1.0 } else { 0.0 }
                }));
                let init = seq(DMatrix::from_fn(d, n_t, |_, _| rng.gen_range(-2.0..2.0)));

                let system = DMatrix::<f64>::identity(d, d) - &m.u;
                let lu = system.clone().lu();
                let mut fixed = DMatrix::zeros(d, n_t);
                for i in 0..n_t {
                    let rhs = m.a.column(i) + &m.w[i] * h.values();
                    fixed.set_column(i, &lu.solve(&rhs).unwrap());
                }

                let dist = |frames: &DMatrix<f64>| -> f64 {
                    let mut acc = 0.0;
                    for i in 0..n_t {
                        let e = frames.column(i) - fixed.column(i);
                        acc += (&system * &e).dot(&e);
                    }
                    acc.sqrt()
                };

                let mut prev = dist(&init.frames);
                for sweeps in 1..=12 {
                    let rec = m.mean_field_reconstruct(&h, &init, sweeps).unwrap();
                    let now = dist(&rec.frames);
                    prop_assert!(now <= prev + 1e-12, "sweep {sweeps}: {now} > {prev}");
                    prev = now;
                }
            }
        }
    }
}
