//! Reference baseline pipeline: turn a record set and a split into evaluation
//! samples for the test part, using only training-split information.
//!
//! Depth is predicted by the average-depth baseline, stones by the training
//! mean, horizon labels by uniformly random labels pushed through the
//! embedding decode, and categorical features by seeded random rankings.

use htk_core::decode::rank_labels;
use htk_core::embed::EmbeddingMatrix;
use htk_core::simgen::{
    average_depth_baseline, average_stones_baseline, random_class_rankings, random_labels,
    ProfileRecord, SplitIndices,
};
use htk_core::taxonomy::TaxonomyGraph;

use crate::error::CliError;
use crate::samples::SampleLine;

pub fn build_baseline_samples(
    records: &[ProfileRecord],
    split: &SplitIndices,
    matrix: &EmbeddingMatrix,
    g: &TaxonomyGraph,
    seed: u64,
) -> Result<Vec<SampleLine>, CliError> {
    let train: Vec<ProfileRecord> = split.train.iter().map(|i| records[*i].clone()).collect();
    if train.is_empty() {
        return Err(CliError::domain("split has an empty training part"));
    }
    if split.test.is_empty() {
        return Err(CliError::domain("split has an empty test part"));
    }
    let depth_baseline = average_depth_baseline(&train)?;
    let stones_baseline = average_stones_baseline(&train)?;

    let test_records: Vec<&ProfileRecord> = split.test.iter().map(|i| &records[*i]).collect();
    let total_stripes: usize = test_records.iter().map(|r| r.horizon_count()).sum();
    let labels = random_labels(seed, g, total_stripes);

    let feature_count = test_records
        .first()
        .map(|r| r.categorical[0].len())
        .unwrap_or(0);
    // Class counts are inferred from the records, per feature.
    let mut classes = vec![0usize; feature_count];
    for record in records {
        for stripe in &record.categorical {
            for (f, class) in stripe.iter().enumerate() {
                classes[f] = classes[f].max(*class as usize + 1);
            }
        }
    }
    let rankings: Vec<Vec<Vec<usize>>> = classes
        .iter()
        .enumerate()
        .map(|(f, count)| random_class_rankings(seed.wrapping_add(1000 + f as u64), *count, total_stripes))
        .collect();

    let mut samples = Vec::with_capacity(test_records.len());
    let mut stripe_cursor = 0usize;
    for record in &test_records {
        let d = record.horizon_count();
        let mut ranked_labels = Vec::with_capacity(d);
        let mut pred_categorical = Vec::with_capacity(d);
        for stripe in 0..d {
            let label = &labels[stripe_cursor + stripe];
            let column = matrix
                .column_of(label)
                .ok_or_else(|| CliError::domain(format!("label \"{}\" missing from the embedding", label.render())))?;
            let prediction = rank_labels(matrix, column).map_err(|e| CliError::domain(e.to_string()))?;
            ranked_labels.push(prediction.ranked.into_iter().map(|r| r.label).collect());
            pred_categorical.push(
                rankings
                    .iter()
                    .map(|per_feature| per_feature[stripe_cursor + stripe].clone())
                    .collect(),
            );
        }
        samples.push(SampleLine {
            id: record.id,
            truth_depths: record.depths.markers().to_vec(),
            pred_depths: depth_baseline.markers().to_vec(),
            truth_labels: record.horizons.iter().map(|h| h.render()).collect(),
            ranked_labels: Some(ranked_labels),
            pred_embeddings: None,
            truth_stones: record.stones.iter().map(|s| *s as f64).collect(),
            pred_stones: vec![stones_baseline; d],
            truth_categorical: record.categorical.clone(),
            pred_categorical,
        });
        stripe_cursor += d;
    }
    Ok(samples)
}

pub fn write_samples(samples: &[SampleLine], writer: &mut dyn std::io::Write) -> Result<(), CliError> {
    for sample in samples {
        serde_json::to_writer(&mut *writer, sample)?;
        writeln!(writer)?;
    }
    Ok(())
}
