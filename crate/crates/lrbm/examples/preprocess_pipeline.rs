//! Turns ragged raw recordings into fixed-shape, normalized model input.
//!
//! The stages run in the order the `preprocess` command applies them:
//! skeleton renormalization, feature selection, temporal smoothing, linear
//! interpolation to a fixed length, and z-score normalization with stats
//! fitted on the training set.

use nalgebra::DMatrix;

use lrbm::data::{
    average_bone_lengths, interpolate, normalize_apply, normalize_fit, select_features,
    skeleton_renormalize, smooth, RawSequence, SkeletonTopology,
};

fn main() -> lrbm::Result<()> {
    // Two joints in 3-d: a root and one child, so six values per frame.
    // Recordings have different lengths and slightly different limb sizes,
    // as different subjects would.
    let rec_a = RawSequence::new(DMatrix::from_row_slice(
        6,
        5,
        &[
            0.0, 0.1, 0.2, 0.3, 0.4, // root x
            0.0, 0.0, 0.1, 0.1, 0.0, // root y
            0.0, 0.0, 0.0, 0.0, 0.0, // root z
            1.0, 1.1, 1.3, 1.4, 1.5, // child x
            0.2, 0.3, 0.3, 0.2, 0.1, // child y
            0.0, 0.0, 0.0, 0.0, 0.0, // child z
        ],
    ));
    let rec_b = RawSequence::new(DMatrix::from_row_slice(
        6,
        3,
        &[
            0.5, 0.6, 0.7, //
            0.0, 0.1, 0.0, //
            0.0, 0.0, 0.0, //
            2.1, 2.2, 2.4, // longer arm than subject a
            0.1, 0.2, 0.2, //
            0.0, 0.0, 0.0, //
        ],
    ));
    println!(
        "raw lengths: {} and {} frames",
        rec_a.n_frames(),
        rec_b.n_frames()
    );

    // Rescale every bone to the corpus-average length so subjects become
    // comparable; directions are preserved.
    let topo = SkeletonTopology::new(vec![None, Some(0)])?;
    let targets = average_bone_lengths(&[rec_a.clone(), rec_b.clone()], &topo)?;
    println!("average bone lengths: {targets:.4?}");
    let (rec_a, _) = skeleton_renormalize(&rec_a, &topo, &targets)?;
    let (rec_b, _) = skeleton_renormalize(&rec_b, &topo, &targets)?;

    // Keep the child joint only, smooth it, then resample to four slices.
    let mut fixed = Vec::new();
    for rec in [&rec_a, &rec_b] {
        let arm = select_features(rec, &[3, 4, 5])?;
        let smoothed = smooth(&arm, 3)?;
        fixed.push(interpolate(&smoothed, 4)?);
    }
    println!(
        "after interpolation: every sample is {} x {}",
        fixed[0].d(),
        fixed[0].n_t()
    );

    // Normalization stats come from the processed training data and are
    // then applied to anything scored later.
    let as_raw: Vec<RawSequence> =
        fixed.iter().map(|s| RawSequence::new(s.frames.clone())).collect();
    let stats = normalize_fit(&as_raw)?;
    println!("\nper-dimension mean: {:.4?}", stats.mean);
    println!("per-dimension std:  {:.4?}", stats.std);
    for (k, raw) in as_raw.iter().enumerate() {
        let z = normalize_apply(raw, &stats)?;
        println!("normalized sample {k}, slice 0: {:.4?}", z.frames.column(0).as_slice());
    }
    Ok(())
}
