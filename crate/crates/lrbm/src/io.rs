//! On-disk formats: JSON Lines datasets, JSON model files, and JSON
//! classifier bundles.
//!
//! All floating-point values round-trip bit exactly (the JSON writer emits
//! the shortest decimal that parses back to the same double), and writers
//! emit fields in a fixed order, so rewriting unchanged content produces
//! byte-identical files.
//!
//! A dataset file starts with a header line
//! `{"format":"lrbm-dataset","version":1,"d":<int>}` followed by one JSON
//! object per sequence: `{"id":...,"label":...,"frames":[[..d reals..],
//! ...]}` with one inner array per time frame. Sequence lengths may vary
//! within a file; the dimension may not.
//!
//! Model and bundle files store the interaction matrix as its strict upper
//! triangle in row-major order, which makes asymmetry unrepresentable, and
//! weights as `[n_t][n_h][d]` nested arrays.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::classify::{ClassifierBundle, PairwiseCalibration};
use crate::data::{NormStats, PreprocessConfig, RawSequence};
use crate::error::{Error, Result};
use crate::model::{LrbmModel, SequenceSample, TrainProvenance};

const DATASET_FORMAT: &str = "lrbm-dataset";
const MODEL_FORMAT: &str = "lrbm-model";
const BUNDLE_FORMAT: &str = "lrbm-bundle";
const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct DatasetHeader {
    format: String,
    version: u32,
    d: usize,
}

#[derive(Serialize, Deserialize)]
struct DatasetRow {
    id: Option<String>,
    label: Option<String>,
    /// One inner array per time frame, each `d` long.
    frames: Vec<Vec<f64>>,
}

/// Reads a JSON Lines dataset. Errors name the offending 1-based line.
pub fn read_dataset(path: &Path) -> Result<Vec<RawSequence>> {
    let file = File::open(path)?;
    let mut lines = BufReader::new(file).lines();
    let header_line = match lines.next() {
        Some(line) => line?,
        None => {
            return Err(Error::Data(format!(
                "{}: empty file, expected a dataset header",
                path.display()
            )))
        }
    };
    let header: DatasetHeader = serde_json::from_str(&header_line)
        .map_err(|e| Error::Data(format!("{}: line 1: bad header: {e}", path.display())))?;
    if header.format != DATASET_FORMAT {
        return Err(Error::Data(format!(
            "{}: not a dataset file (format {:?})",
            path.display(),
            header.format
        )));
    }
    if header.version != FORMAT_VERSION {
        return Err(Error::Data(format!(
            "{}: unsupported dataset version {}",
            path.display(),
            header.version
        )));
    }
    if header.d == 0 {
        return Err(Error::Data(format!(
            "{}: dataset dimension must be at least 1",
            path.display()
        )));
    }

    let mut out = Vec::new();
    for (k, line) in lines.enumerate() {
        let line_no = k + 2;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row: DatasetRow = serde_json::from_str(&line).map_err(|e| {
            Error::Data(format!("{}: line {line_no}: {e}", path.display()))
        })?;
        if row.frames.is_empty() {
            return Err(Error::Data(format!(
                "{}: line {line_no}: sequence has no frames",
                path.display()
            )));
        }
        let n = row.frames.len();
        let mut frames = DMatrix::zeros(header.d, n);
        for (t, frame) in row.frames.iter().enumerate() {
            if frame.len() != header.d {
                return Err(Error::Data(format!(
                    "{}: line {line_no}: frame {t} has {} values, header says {}",
                    path.display(),
                    frame.len(),
                    header.d
                )));
            }
            for (r, &x) in frame.iter().enumerate() {
                frames[(r, t)] = x;
            }
        }
        out.push(RawSequence { frames, label: row.label, id: row.id });
    }
    Ok(out)
}

/// Writes a JSON Lines dataset; the dimension comes from the first
/// sequence and every sequence must match it.
pub fn write_dataset(path: &Path, seqs: &[RawSequence]) -> Result<()> {
    let first = seqs.first().ok_or_else(|| {
        Error::Data("cannot write an empty dataset: the header needs a dimension".into())
    })?;
    let d = first.d();
    for (k, s) in seqs.iter().enumerate() {
        if s.d() != d {
            return Err(Error::Data(format!(
                "sequence {k} has dimension {}, expected {d}",
                s.d()
            )));
        }
        if !s.frames.iter().all(|x| x.is_finite()) {
            return Err(Error::Data(format!(
                "sequence {k} contains a non-finite value"
            )));
        }
    }
    let mut out = BufWriter::new(File::create(path)?);
    let header =
        DatasetHeader { format: DATASET_FORMAT.into(), version: FORMAT_VERSION, d };
    serde_json::to_writer(&mut out, &header)?;
    out.write_all(b"\n")?;
    for s in seqs {
        let frames: Vec<Vec<f64>> = (0..s.n_frames())
            .map(|t| s.frames.column(t).iter().copied().collect())
            .collect();
        let row = DatasetRow { id: s.id.clone(), label: s.label.clone(), frames };
        serde_json::to_writer(&mut out, &row)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Converts raw sequences to fixed-length samples, requiring every
/// sequence to have the same number of frames.
pub fn to_fixed(seqs: Vec<RawSequence>) -> Result<Vec<SequenceSample>> {
    let n_t = match seqs.first() {
        Some(s) => s.n_frames(),
        None => return Ok(Vec::new()),
    };
    seqs.into_iter()
        .enumerate()
        .map(|(k, s)| {
            if s.n_frames() != n_t {
                return Err(Error::Data(format!(
                    "sequence {k} has {} frames but earlier sequences have {n_t}; \
                     interpolate to a fixed length first",
                    s.n_frames()
                )));
            }
            Ok(SequenceSample { frames: s.frames, label: s.label, id: s.id })
        })
        .collect()
}

#[derive(Serialize, Deserialize)]
struct ModelJson {
    format: String,
    version: u32,
    d: usize,
    n_t: usize,
    n_h: usize,
    /// Visible biases, row-major `d x n_t`.
    a: Vec<f64>,
    b: Vec<f64>,
    /// Weights as `[n_t][n_h][d]`.
    w: Vec<Vec<Vec<f64>>>,
    /// Strict upper triangle of the interaction matrix, row-major.
    u_upper: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    train_provenance: Option<TrainProvenance>,
}

fn model_to_json(model: &LrbmModel, provenance: Option<&TrainProvenance>) -> ModelJson {
    let (d, n_t, n_h) = (model.d(), model.n_t(), model.n_h());
    let a = (0..d).flat_map(|r| (0..n_t).map(move |t| model.a[(r, t)])).collect();
    let w = (0..n_t)
        .map(|i| {
            (0..n_h)
                .map(|j| (0..d).map(|r| model.w[i][(r, j)]).collect())
                .collect()
        })
        .collect();
    let u_upper =
        (0..d).flat_map(|r| (r + 1..d).map(move |s| model.u[(r, s)])).collect();
    ModelJson {
        format: MODEL_FORMAT.into(),
        version: FORMAT_VERSION,
        d,
        n_t,
        n_h,
        a,
        b: model.b.iter().copied().collect(),
        w,
        u_upper,
        train_provenance: provenance.cloned(),
    }
}

fn model_from_json(json: &ModelJson, origin: &Path) -> Result<LrbmModel> {
    if json.format != MODEL_FORMAT {
        return Err(Error::Data(format!(
            "{}: not a model file (format {:?})",
            origin.display(),
            json.format
        )));
    }
    if json.version != FORMAT_VERSION {
        return Err(Error::Data(format!(
            "{}: unsupported model version {}",
            origin.display(),
            json.version
        )));
    }
    let (d, n_t, n_h) = (json.d, json.n_t, json.n_h);
    let bad = |what: &str| -> Error {
        Error::Data(format!("{}: malformed model: {what}", origin.display()))
    };
    if json.a.len() != d * n_t {
        return Err(bad(&format!(
            "visible biases hold {} values, expected {}",
            json.a.len(),
            d * n_t
        )));
    }
    if json.b.len() != n_h {
        return Err(bad(&format!(
            "hidden biases hold {} values, expected {n_h}",
            json.b.len()
        )));
    }
    if json.u_upper.len() != d * (d - 1) / 2 {
        return Err(bad(&format!(
            "interaction triangle holds {} values, expected {}",
            json.u_upper.len(),
            d * (d - 1) / 2
        )));
    }
    if json.w.len() != n_t {
        return Err(bad(&format!("{} weight slices, expected {n_t}", json.w.len())));
    }

    let a = DMatrix::from_fn(d, n_t, |r, t| json.a[r * n_t + t]);
    let b = DVector::from_column_slice(&json.b);
    let mut w = Vec::with_capacity(n_t);
    for (i, slice) in json.w.iter().enumerate() {
        if slice.len() != n_h {
            return Err(bad(&format!(
                "weight slice {i} has {} hidden columns, expected {n_h}",
                slice.len()
            )));
        }
        let mut m = DMatrix::zeros(d, n_h);
        for (j, col) in slice.iter().enumerate() {
            if col.len() != d {
                return Err(bad(&format!(
                    "weight slice {i}, hidden unit {j}: {} values, expected {d}",
                    col.len()
                )));
            }
            for (r, &x) in col.iter().enumerate() {
                m[(r, j)] = x;
            }
        }
        w.push(m);
    }
    let mut u = DMatrix::zeros(d, d);
    let mut k = 0;
    for r in 0..d {
        for s in r + 1..d {
            u[(r, s)] = json.u_upper[k];
            u[(s, r)] = json.u_upper[k];
            k += 1;
        }
    }
    let model = LrbmModel { a, b, w, u };
    model.validate()?;
    Ok(model)
}

/// Writes a model with optional training provenance as pretty JSON.
pub fn write_model(
    path: &Path,
    model: &LrbmModel,
    provenance: Option<&TrainProvenance>,
) -> Result<()> {
    model.validate()?;
    let json = model_to_json(model, provenance);
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut out, &json)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

/// Reads a model file; validates shapes and invariants before returning.
pub fn read_model(path: &Path) -> Result<(LrbmModel, Option<TrainProvenance>)> {
    let file = File::open(path)?;
    let json: ModelJson = serde_json::from_reader(BufReader::new(file))
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    let model = model_from_json(&json, path)?;
    Ok((model, json.train_provenance))
}

#[derive(Serialize, Deserialize)]
struct BundleJson {
    format: String,
    version: u32,
    class_labels: Vec<String>,
    models: Vec<ModelJson>,
    /// Pairwise thresholds for `i < j`, row-major.
    c_upper: Vec<f64>,
    alpha: f64,
    norm_stats: Option<NormStats>,
    preprocess: Option<PreprocessConfig>,
}

/// Writes a classifier bundle as pretty JSON.
pub fn write_bundle(path: &Path, bundle: &ClassifierBundle) -> Result<()> {
    bundle.validate()?;
    let models = bundle
        .models
        .iter()
        .enumerate()
        .map(|(k, m)| {
            let prov = bundle.provenance.as_ref().map(|p| &p[k]);
            model_to_json(m, prov)
        })
        .collect();
    let json = BundleJson {
        format: BUNDLE_FORMAT.into(),
        version: FORMAT_VERSION,
        class_labels: bundle.class_labels.clone(),
        models,
        c_upper: bundle.calibration.c_upper().to_vec(),
        alpha: bundle.calibration.alpha,
        norm_stats: bundle.norm_stats.clone(),
        preprocess: bundle.preprocess.clone(),
    };
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut out, &json)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

/// Reads and validates a classifier bundle.
pub fn read_bundle(path: &Path) -> Result<ClassifierBundle> {
    let file = File::open(path)?;
    let json: BundleJson = serde_json::from_reader(BufReader::new(file))
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    if json.format != BUNDLE_FORMAT {
        return Err(Error::Data(format!(
            "{}: not a bundle file (format {:?})",
            path.display(),
            json.format
        )));
    }
    if json.version != FORMAT_VERSION {
        return Err(Error::Data(format!(
            "{}: unsupported bundle version {}",
            path.display(),
            json.version
        )));
    }
    let mut models = Vec::with_capacity(json.models.len());
    let mut provenance = Vec::with_capacity(json.models.len());
    let mut all_provenanced = true;
    for mj in &json.models {
        models.push(model_from_json(mj, path)?);
        match &mj.train_provenance {
            Some(p) => provenance.push(p.clone()),
            None => all_provenanced = false,
        }
    }
    let n = json.class_labels.len();
    let calibration = PairwiseCalibration::new(n, json.c_upper, json.alpha)?;
    let bundle = ClassifierBundle {
        class_labels: json.class_labels,
        models,
        calibration,
        norm_stats: json.norm_stats,
        preprocess: json.preprocess,
        provenance: all_provenanced.then_some(provenance),
    };
    bundle.validate()?;
    Ok(bundle)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::SkeletonSpec;
    use nalgebra::dmatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use tempfile::tempdir;

    fn awkward_raw() -> Vec<RawSequence> {
        // Values chosen to expose any decimal round-trip sloppiness.
        let mut a = RawSequence::new(dmatrix![
            0.1, 0.30000000000000004, 1e-300;
            -1.5, 2.2250738585072014e-308, 9.007199254740993e15
        ]);
        a.id = Some("seq-a".into());
        a.label = Some("walk".into());
        let mut b = RawSequence::new(dmatrix![7.25; -0.0]);
        b.id = Some("seq-b".into());
        b.label = None;
        vec![a, b]
    }

    #[test]
    fn datasets_round_trip_bit_exactly_with_ragged_lengths() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("data.jsonl");
        let seqs = awkward_raw();
        write_dataset(&path, &seqs).unwrap();
        let back = read_dataset(&path).unwrap();
        assert_eq!(back, seqs);
    }

    #[test]
    fn rewriting_a_dataset_is_byte_identical() {
        let dir = tempdir().unwrap();
        let p1 = dir.path().join("one.jsonl");
        let p2 = dir.path().join("two.jsonl");
        let seqs = awkward_raw();
        write_dataset(&p1, &seqs).unwrap();
        write_dataset(&p2, &read_dataset(&p1).unwrap()).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
    }

    #[test]
    fn dataset_errors_name_the_offending_line() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        std::fs::write(
            &path,
            "{\"format\":\"lrbm-dataset\",\"version\":1,\"d\":2}\n\
             {\"id\":\"x\",\"label\":null,\"frames\":[[1.0,2.0]]}\n\
             {\"id\":\"y\",\"label\":null,\"frames\":[[1.0]]}\n",
        )
        .unwrap();
        let err = read_dataset(&path).unwrap_err().to_string();
        assert!(err.contains("line 3"), "{err}");

        std::fs::write(&path, "{\"format\":\"lrbm-dataset\",\"version\":1,\"d\":2}\nnot json\n")
            .unwrap();
        let err = read_dataset(&path).unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
    }

    #[test]
    fn dataset_header_must_match_format_and_version() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        std::fs::write(&path, "{\"format\":\"other\",\"version\":1,\"d\":2}\n").unwrap();
        assert!(matches!(read_dataset(&path).unwrap_err(), Error::Data(_)));
        std::fs::write(&path, "{\"format\":\"lrbm-dataset\",\"version\":9,\"d\":2}\n")
            .unwrap();
        assert!(matches!(read_dataset(&path).unwrap_err(), Error::Data(_)));
        std::fs::write(&path, "").unwrap();
        assert!(matches!(read_dataset(&path).unwrap_err(), Error::Data(_)));
    }

    #[test]
    fn fixed_length_conversion_requires_uniform_lengths() {
        let seqs = awkward_raw();
        let err = to_fixed(seqs).unwrap_err().to_string();
        assert!(err.contains("interpolate"), "{err}");
        let ok = to_fixed(vec![RawSequence::new(dmatrix![1.0, 2.0])]).unwrap();
        assert_eq!(ok[0].n_t(), 2);
    }

    fn random_model(seed: u64) -> LrbmModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (d, n_t, n_h) = (3, 2, 4);
        let mut m = LrbmModel::zeros(d, n_t, n_h);
        m.a = DMatrix::from_fn(d, n_t, |_, _| rng.gen_range(-1.0..1.0));
        m.b = DVector::from_fn(n_h, |_, _| rng.gen_range(-1.0..1.0));
        m.w = (0..n_t)
            .map(|_| DMatrix::from_fn(d, n_h, |_, _| rng.gen_range(-1.0..1.0)))
            .collect();
        for r in 0..d {
            for s in r + 1..d {
                let x = rng.gen_range(-0.2..0.2);
                m.u[(r, s)] = x;
                m.u[(s, r)] = x;
            }
        }
        m
    }

    #[test]
    fn models_round_trip_bit_exactly_with_provenance() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("model.json");
        let model = random_model(3);
        let prov = TrainProvenance {
            seed: 42,
            epochs: 250,
            config_hash: "ab".repeat(32),
        };
        write_model(&path, &model, Some(&prov)).unwrap();
        let (back, back_prov) = read_model(&path).unwrap();
        assert_eq!(back, model);
        assert_eq!(back_prov, Some(prov));

        write_model(&path, &model, None).unwrap();
        let (_, none_prov) = read_model(&path).unwrap();
        assert_eq!(none_prov, None);
    }

    #[test]
    fn model_files_reject_malformed_shapes() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("model.json");
        let model = random_model(4);
        write_model(&path, &model, None).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();

        // Drop one hidden bias: the reader counts values against n_h.
        let broken = text.replacen("\"n_h\": 4", "\"n_h\": 5", 1);
        std::fs::write(&path, broken).unwrap();
        assert!(matches!(read_model(&path).unwrap_err(), Error::Data(_)));

        let broken = text.replacen("\"format\": \"lrbm-model\"", "\"format\": \"zzz\"", 1);
        std::fs::write(&path, broken).unwrap();
        assert!(matches!(read_model(&path).unwrap_err(), Error::Data(_)));

        std::fs::write(&path, "{").unwrap();
        assert!(matches!(read_model(&path).unwrap_err(), Error::Data(_)));
    }

    fn small_bundle() -> ClassifierBundle {
        ClassifierBundle {
            class_labels: vec!["jump".into(), "walk".into()],
            models: vec![random_model(1), random_model(2)],
            calibration: PairwiseCalibration::new(2, vec![0.75], 3.5).unwrap(),
            norm_stats: Some(NormStats {
                mean: vec![0.1, -0.2, 0.3],
                std: vec![1.0, 2.0, 0.5],
            }),
            preprocess: Some(PreprocessConfig {
                skeleton: Some(SkeletonSpec {
                    parents: vec![None],
                    target_bone_lengths: Some(vec![0.0]),
                }),
                feature_subset: None,
                smooth_window: Some(3),
                target_length: Some(2),
                normalize: true,
            }),
            provenance: Some(vec![
                TrainProvenance { seed: 1, epochs: 10, config_hash: "aa".repeat(32) },
                TrainProvenance { seed: 2, epochs: 10, config_hash: "aa".repeat(32) },
            ]),
        }
    }

    #[test]
    fn bundles_round_trip_bit_exactly() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bundle.json");
        let bundle = small_bundle();
        write_bundle(&path, &bundle).unwrap();
        let back = read_bundle(&path).unwrap();
        assert_eq!(back, bundle);

        // Rewriting what was read is byte identical.
        let path2 = dir.path().join("bundle2.json");
        write_bundle(&path2, &back).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&path2).unwrap());
    }

    #[test]
    fn bundles_reject_inconsistent_contents() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bundle.json");
        let mut bundle = small_bundle();
        bundle.class_labels = vec!["walk".into(), "jump".into()]; // unsorted
        assert!(write_bundle(&path, &bundle).is_err());

        let bundle = small_bundle();
        write_bundle(&path, &bundle).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let broken = text.replacen("\"format\": \"lrbm-bundle\"", "\"format\": \"x\"", 1);
        std::fs::write(&path, broken).unwrap();
        assert!(matches!(read_bundle(&path).unwrap_err(), Error::Data(_)));
    }

    #[test]
    fn missing_files_surface_io_errors() {
        let err = read_dataset(Path::new("/nonexistent/x.jsonl")).unwrap_err();
        assert!(matches!(err, Error::Io(_)));
        assert_eq!(err.exit_code(), 3);
    }
}
