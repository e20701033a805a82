//! Sequence ingestion and preprocessing: resampling to a fixed length,
//! smoothing, z-score normalization, skeleton renormalization, and the
//! corruption operators used for robustness studies.
//!
//! Raw sequences vary in length; models require a fixed number of time
//! slices. The canonical pipeline is: skeleton renormalization (when the
//! dimensions are joint coordinates), feature selection, temporal
//! smoothing, linear interpolation to the target length, then z-score
//! normalization with statistics fitted on training data only.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::SequenceSample;

/// A variable-length sequence straight from ingestion: `frames` is
/// `d x n_frames` (dimension by time), any number of frames.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSequence {
    pub frames: DMatrix<f64>,
    pub label: Option<String>,
    pub id: Option<String>,
}

impl RawSequence {
    pub fn new(frames: DMatrix<f64>) -> Self {
        RawSequence { frames, label: None, id: None }
    }

    pub fn d(&self) -> usize {
        self.frames.nrows()
    }

    pub fn n_frames(&self) -> usize {
        self.frames.ncols()
    }
}

/// Declarative preprocessing description, persisted alongside trained
/// bundles so a pipeline can be reproduced. Fields are applied in the
/// order they are declared here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct PreprocessConfig {
    /// Skeleton renormalization, when dimensions are 3D joint coordinates.
    pub skeleton: Option<SkeletonSpec>,
    /// Dimensions to keep, in the given order.
    pub feature_subset: Option<Vec<usize>>,
    /// Centered moving-average window (odd).
    pub smooth_window: Option<usize>,
    /// Interpolation target length.
    pub target_length: Option<usize>,
    /// Whether z-score normalization is applied.
    pub normalize: bool,
}

/// Skeleton description for renormalization: `parents[j]` is joint `j`'s
/// parent, `None` for roots. Bone `j` connects joint `j` to its parent, and
/// `target_bone_lengths[j]` is its rescaled length (root entries ignored).
/// Absent target lengths are averaged from the training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkeletonSpec {
    pub parents: Vec<Option<usize>>,
    pub target_bone_lengths: Option<Vec<f64>>,
}

/// Validated skeleton tree used by the renormalization pass.
#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonTopology {
    parents: Vec<Option<usize>>,
    /// Joint indices ordered parents-before-children.
    order: Vec<usize>,
}

impl SkeletonTopology {
    pub fn new(parents: Vec<Option<usize>>) -> Result<Self> {
        let n = parents.len();
        if n == 0 {
            return Err(Error::InvalidConfig("skeleton needs at least one joint".into()));
        }
        for (j, p) in parents.iter().enumerate() {
            if let Some(p) = p {
                if *p >= n {
                    return Err(Error::InvalidConfig(format!(
                        "joint {j} names parent {p}, but there are only {n} joints"
                    )));
                }
                if *p == j {
                    return Err(Error::InvalidConfig(format!("joint {j} is its own parent")));
                }
            }
        }
        // Parents-before-children order; failure to place every joint
        // means the parent graph contains a cycle.
        let mut order = Vec::with_capacity(n);
        let mut placed = vec![false; n];
        loop {
            let mut progressed = false;
            for j in 0..n {
                if !placed[j] && parents[j].map_or(true, |p| placed[p]) {
                    placed[j] = true;
                    order.push(j);
                    progressed = true;
                }
            }
            if order.len() == n {
                break;
            }
            if !progressed {
                return Err(Error::InvalidConfig("skeleton parent graph has a cycle".into()));
            }
        }
        Ok(SkeletonTopology { parents, order })
    }

    pub fn n_joints(&self) -> usize {
        self.parents.len()
    }

    pub fn parents(&self) -> &[Option<usize>] {
        &self.parents
    }
}

/// Linear interpolation to exactly `n_t` frames.
///
/// Endpoints map exactly (bit-identical first and last frames), and when
/// the length already matches, the output equals the input bit for bit. A
/// single-frame input repeats; a single-frame target takes the first frame.
pub fn interpolate(raw: &RawSequence, n_t: usize) -> Result<SequenceSample> {
    if n_t == 0 {
        return Err(Error::InvalidConfig("target length must be at least 1".into()));
    }
    let n = raw.n_frames();
    if n == 0 {
        return Err(Error::Data("cannot interpolate an empty sequence".into()));
    }
    let d = raw.d();
    let mut frames = DMatrix::zeros(d, n_t);
    for k in 0..n_t {
        let pos = if n_t == 1 || n == 1 {
            0.0
        } else {
            // Exact at the endpoints: the product is an integer below 2^53.
            (k * (n - 1)) as f64 / (n_t - 1) as f64
        };
        let lo = pos.floor() as usize;
        let frac = pos - lo as f64;
        if frac == 0.0 {
            frames.set_column(k, &raw.frames.column(lo));
        } else {
            let hi = (lo + 1).min(n - 1);
            let col = raw.frames.column(lo) * (1.0 - frac) + raw.frames.column(hi) * frac;
            frames.set_column(k, &col);
        }
    }
    Ok(SequenceSample { frames, label: raw.label.clone(), id: raw.id.clone() })
}

/// Centered moving average along time with an odd window; at the sequence
/// ends the window is clipped to the available frames. Window 1 is the
/// identity.
pub fn smooth(raw: &RawSequence, window: usize) -> Result<RawSequence> {
    if window == 0 || window % 2 == 0 {
        return Err(Error::InvalidConfig(format!(
            "smoothing window must be odd and positive, got {window}"
        )));
    }
    if window == 1 {
        return Ok(raw.clone());
    }
    let (d, n) = (raw.d(), raw.n_frames());
    let half = window / 2;
    let mut frames = DMatrix::zeros(d, n);
    for t in 0..n {
        let lo = t.saturating_sub(half);
        let hi = (t + half).min(n.saturating_sub(1));
        let mut acc = DVector::zeros(d);
        for s in lo..=hi {
            acc += raw.frames.column(s);
        }
        frames.set_column(t, &(acc / (hi - lo + 1) as f64));
    }
    Ok(RawSequence { frames, label: raw.label.clone(), id: raw.id.clone() })
}

/// Keeps the listed dimensions, in the given order.
pub fn select_features(raw: &RawSequence, keep: &[usize]) -> Result<RawSequence> {
    if keep.is_empty() {
        return Err(Error::InvalidConfig("feature subset must not be empty".into()));
    }
    let d = raw.d();
    for &r in keep {
        if r >= d {
            return Err(Error::InvalidConfig(format!(
                "feature index {r} out of range for {d} dimensions"
            )));
        }
    }
    let mut frames = DMatrix::zeros(keep.len(), raw.n_frames());
    for (out, &r) in keep.iter().enumerate() {
        frames.set_row(out, &raw.frames.row(r));
    }
    Ok(RawSequence { frames, label: raw.label.clone(), id: raw.id.clone() })
}

/// Per-dimension z-score statistics, fitted on training data only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: Vec<f64>,
    /// Population standard deviation, floored at 1e-6 so constant
    /// dimensions normalize to zero instead of exploding.
    pub std: Vec<f64>,
}

const STD_FLOOR: f64 = 1e-6;

/// Fits per-dimension mean and standard deviation over every frame of every
/// sequence. Sequence lengths may vary; the dimension must not.
pub fn normalize_fit(seqs: &[RawSequence]) -> Result<NormStats> {
    let first = seqs.first().ok_or_else(|| {
        Error::Data("cannot fit normalization statistics on an empty set".into())
    })?;
    let d = first.d();
    let mut count = 0usize;
    let mut sum = vec![0.0f64; d];
    let mut sq = vec![0.0f64; d];
    for (k, s) in seqs.iter().enumerate() {
        if s.d() != d {
            return Err(Error::Data(format!(
                "sequence {k} has dimension {}, expected {d}",
                s.d()
            )));
        }
        for t in 0..s.n_frames() {
            for r in 0..d {
                let x = s.frames[(r, t)];
                sum[r] += x;
                sq[r] += x * x;
            }
        }
        count += s.n_frames();
    }
    if count == 0 {
        return Err(Error::Data("cannot fit normalization statistics on zero frames".into()));
    }
    let mean: Vec<f64> = sum.iter().map(|s| s / count as f64).collect();
    let std: Vec<f64> = sq
        .iter()
        .zip(&mean)
        .map(|(q, m)| (q / count as f64 - m * m).max(0.0).sqrt().max(STD_FLOOR))
        .collect();
    Ok(NormStats { mean, std })
}

/// Applies fitted z-score statistics: `(x - mean) / std` per dimension.
pub fn normalize_apply(raw: &RawSequence, stats: &NormStats) -> Result<RawSequence> {
    let d = raw.d();
    if stats.mean.len() != d || stats.std.len() != d {
        return Err(Error::Data(format!(
            "normalization statistics cover {} dimensions, data has {d}",
            stats.mean.len()
        )));
    }
    let mut frames = raw.frames.clone();
    for t in 0..raw.n_frames() {
        for r in 0..d {
            frames[(r, t)] = (frames[(r, t)] - stats.mean[r]) / stats.std[r];
        }
    }
    Ok(RawSequence { frames, label: raw.label.clone(), id: raw.id.clone() })
}

/// Average bone lengths over every frame of every sequence, indexed by
/// child joint (root entries are zero). Used when a skeleton spec does not
/// pin target lengths explicitly.
pub fn average_bone_lengths(seqs: &[RawSequence], topo: &SkeletonTopology) -> Result<Vec<f64>> {
    let nj = topo.n_joints();
    let mut sums = vec![0.0f64; nj];
    let mut frames_seen = 0usize;
    for s in seqs {
        if s.d() != 3 * nj {
            return Err(Error::Data(format!(
                "skeleton with {nj} joints needs dimension {}, got {}",
                3 * nj,
                s.d()
            )));
        }
        for t in 0..s.n_frames() {
            for j in 0..nj {
                if let Some(p) = topo.parents[j] {
                    let mut len2 = 0.0;
                    for axis in 0..3 {
                        let diff = s.frames[(3 * j + axis, t)] - s.frames[(3 * p + axis, t)];
                        len2 += diff * diff;
                    }
                    sums[j] += len2.sqrt();
                }
            }
            frames_seen += 1;
        }
    }
    if frames_seen == 0 {
        return Err(Error::Data("no frames to average bone lengths over".into()));
    }
    Ok(sums.into_iter().map(|s| s / frames_seen as f64).collect())
}

/// Rescales every bone to its target length while preserving bone
/// directions, frame by frame, walking the tree from roots to leaves.
///
/// Zero-length bones have no direction; those reuse the direction observed
/// in the most recent frame, fall back to the x axis on the first frame,
/// and raise the returned warning flag either way.
pub fn skeleton_renormalize(
    raw: &RawSequence,
    topo: &SkeletonTopology,
    target_lengths: &[f64],
) -> Result<(RawSequence, bool)> {
    let nj = topo.n_joints();
    if raw.d() != 3 * nj {
        return Err(Error::Data(format!(
            "skeleton with {nj} joints needs dimension {}, got {}",
            3 * nj,
            raw.d()
        )));
    }
    if target_lengths.len() != nj {
        return Err(Error::InvalidConfig(format!(
            "need one target length per joint ({nj}), got {}",
            target_lengths.len()
        )));
    }
    for (j, &len) in target_lengths.iter().enumerate() {
        if topo.parents[j].is_some() && !(len.is_finite() && len >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "target length for joint {j} must be finite and non-negative, got {len}"
            )));
        }
    }

    let mut frames = raw.frames.clone();
    let mut warned = false;
    let mut last_dir: Vec<Option<[f64; 3]>> = vec![None; nj];
    for t in 0..raw.n_frames() {
        let mut new_pos = vec![[0.0f64; 3]; nj];
        for &j in &topo.order {
            match topo.parents[j] {
                None => {
                    for axis in 0..3 {
                        new_pos[j][axis] = raw.frames[(3 * j + axis, t)];
                    }
                }
                Some(p) => {
                    let mut dir = [0.0f64; 3];
                    let mut len2 = 0.0;
                    for axis in 0..3 {
                        dir[axis] =
                            raw.frames[(3 * j + axis, t)] - raw.frames[(3 * p + axis, t)];
                        len2 += dir[axis] * dir[axis];
                    }
                    let len = len2.sqrt();
                    let unit = if len > 1e-12 {
                        let u = [dir[0] / len, dir[1] / len, dir[2] / len];
                        last_dir[j] = Some(u);
                        u
                    } else {
                        warned = true;
                        last_dir[j].unwrap_or([1.0, 0.0, 0.0])
                    };
                    for axis in 0..3 {
                        new_pos[j][axis] = new_pos[p][axis] + unit[axis] * target_lengths[j];
                    }
                }
            }
        }
        for j in 0..nj {
            for axis in 0..3 {
                frames[(3 * j + axis, t)] = new_pos[j][axis];
            }
        }
    }
    Ok((RawSequence { frames, label: raw.label.clone(), id: raw.id.clone() }, warned))
}

fn pick_entries<R: Rng + ?Sized>(
    total: usize,
    fraction: f64,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if !(fraction.is_finite() && (0.0..=1.0).contains(&fraction)) {
        return Err(Error::InvalidConfig(format!(
            "corruption fraction must lie in [0, 1], got {fraction}"
        )));
    }
    let count = (fraction * total as f64).floor() as usize;
    let mut idx: Vec<usize> = (0..total).collect();
    for k in 0..count {
        let j = rng.gen_range(k..total);
        idx.swap(k, j);
    }
    idx.truncate(count);
    Ok(idx)
}

/// Multiplies `floor(fraction * d * n_t)` uniformly chosen entries by
/// `1 + z` with standard normal `z`. Fraction 0 returns the input
/// unchanged. Deterministic for a fixed RNG state.
pub fn inject_noise<R: Rng + ?Sized>(
    sample: &SequenceSample,
    fraction: f64,
    rng: &mut R,
) -> Result<SequenceSample> {
    let (d, n_t) = (sample.d(), sample.n_t());
    let picked = pick_entries(d * n_t, fraction, rng)?;
    let mut out = sample.clone();
    for e in picked {
        let (r, t) = (e / n_t, e % n_t);
        let z: f64 = rng.sample(StandardNormal);
        out.frames[(r, t)] *= 1.0 + z;
    }
    Ok(out)
}

/// A sequence with some entries marked missing; masked entries are zeroed
/// in the frames and recorded in the mask.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskedSequence {
    pub sample: SequenceSample,
    pub mask: DMatrix<bool>,
}

/// Marks `floor(fraction * d * n_t)` uniformly chosen entries missing.
pub fn inject_missing<R: Rng + ?Sized>(
    sample: &SequenceSample,
    fraction: f64,
    rng: &mut R,
) -> Result<MaskedSequence> {
    let (d, n_t) = (sample.d(), sample.n_t());
    let picked = pick_entries(d * n_t, fraction, rng)?;
    let mut out = sample.clone();
    let mut mask = DMatrix::from_element(d, n_t, false);
    for e in picked {
        let (r, t) = (e / n_t, e % n_t);
        out.frames[(r, t)] = 0.0;
        mask[(r, t)] = true;
    }
    Ok(MaskedSequence { sample: out, mask })
}

/// Fills missing entries from temporal neighbors in the same dimension:
/// the mean of the originally present neighbors at `t-1` and `t+1`, else
/// the value of the nearest originally present frame (earlier frame wins
/// ties), else 0 when the whole dimension is missing.
pub fn impute_missing(masked: &MaskedSequence) -> Result<SequenceSample> {
    let (d, n_t) = (masked.sample.d(), masked.sample.n_t());
    if masked.mask.nrows() != d || masked.mask.ncols() != n_t {
        return Err(Error::Dimension(format!(
            "mask is {}x{}, frames are {d}x{n_t}",
            masked.mask.nrows(),
            masked.mask.ncols()
        )));
    }
    let mut out = masked.sample.clone();
    for r in 0..d {
        for t in 0..n_t {
            if !masked.mask[(r, t)] {
                continue;
            }
            let left = t.checked_sub(1).filter(|&s| !masked.mask[(r, s)]);
            let right = (t + 1 < n_t && !masked.mask[(r, t + 1)]).then_some(t + 1);
            out.frames[(r, t)] = match (left, right) {
                (Some(l), Some(rr)) => {
                    0.5 * (masked.sample.frames[(r, l)] + masked.sample.frames[(r, rr)])
                }
                (Some(l), None) => masked.sample.frames[(r, l)],
                (None, Some(rr)) => masked.sample.frames[(r, rr)],
                (None, None) => nearest_available(masked, r, t),
            };
        }
    }
    Ok(out)
}

fn nearest_available(masked: &MaskedSequence, r: usize, t: usize) -> f64 {
    let n_t = masked.sample.n_t();
    for k in 1..n_t {
        if t >= k && !masked.mask[(r, t - k)] {
            return masked.sample.frames[(r, t - k)];
        }
        if t + k < n_t && !masked.mask[(r, t + k)] {
            return masked.sample.frames[(r, t + k)];
        }
    }
    0.0
}
