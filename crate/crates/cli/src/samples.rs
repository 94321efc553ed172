//! Evaluation samples (JSON lines, one profile per line) and report assembly.
//!
//! Per-stripe predictions (labels, stones, categorical classes) are aligned
//! to the truth stripes; only the predicted depth sequence may have a
//! different horizon count, which the 1D-IoU handles by index pairing.

use std::collections::BTreeMap;
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use htk_core::decode::rank_labels;
use htk_core::embed::EmbeddingMatrix;
use htk_core::grammar::HorizonLabel;
use htk_core::metrics::{
    aggregated_accuracy, classification_metrics, iou_1d, mse, normalize_depths, topk_metrics,
    DepthSequence, EvalReport, FeatureMetrics, LabelMetrics, MetricsError, DEPTH_EPSILON,
};
use htk_core::taxonomy::TaxonomyGraph;

use crate::error::CliError;

/// Feature names used when a file carries exactly the five default
/// categorical features.
pub const DEFAULT_FEATURE_NAMES: [&str; 5] =
    ["soil_type", "soil_color", "carbonate", "humus", "rooting"];

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleLine {
    pub id: u64,
    pub truth_depths: Vec<f64>,
    pub pred_depths: Vec<f64>,
    pub truth_labels: Vec<String>,
    /// Per stripe: labels ranked by descending similarity. Either this or
    /// `pred_embeddings` must be present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ranked_labels: Option<Vec<Vec<String>>>,
    /// Per stripe: a raw embedding prediction to be decoded.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pred_embeddings: Option<Vec<Vec<f64>>>,
    pub truth_stones: Vec<f64>,
    pub pred_stones: Vec<f64>,
    pub truth_categorical: Vec<Vec<u16>>,
    /// Per stripe, per feature: class indices ranked by the predictor.
    pub pred_categorical: Vec<Vec<Vec<usize>>>,
}

/// A validated sample with labels resolved to leaf positions.
#[derive(Debug, Clone)]
pub struct EvalInput {
    pub id: u64,
    pub truth_depths: DepthSequence,
    pub pred_depths: DepthSequence,
    pub truth_leaves: Vec<usize>,
    pub ranked_leaves: Vec<Vec<usize>>,
    pub truth_stones: Vec<f64>,
    pub pred_stones: Vec<f64>,
    pub truth_categorical: Vec<Vec<u16>>,
    pub pred_categorical: Vec<Vec<Vec<usize>>>,
}

fn sample_error(id: u64, message: impl std::fmt::Display) -> CliError {
    CliError::math(format!("record {id}: {message}"))
}

/// Validates one sample against the taxonomy, decoding raw embedding
/// predictions through the matrix when present.
pub fn resolve_sample(
    line: &SampleLine,
    g: &TaxonomyGraph,
    matrix: &EmbeddingMatrix,
) -> Result<EvalInput, CliError> {
    let id = line.id;
    let truth_depths =
        DepthSequence::new(line.truth_depths.clone()).map_err(|e| sample_error(id, e))?;
    // Predicted markers are model output under the stop-token contract: the
    // first marker within the margin of the stop value is rounded to it and
    // trailing padding is dropped.
    let pred_depths =
        normalize_depths(&line.pred_depths, DEPTH_EPSILON).map_err(|e| sample_error(id, e))?;
    let stripes = truth_depths.horizon_count();

    let resolve_leaf = |label: &str| {
        g.leaf_position(label)
            .ok_or_else(|| sample_error(id, format!("label \"{label}\" is not in the taxonomy")))
    };
    let truth_leaves: Vec<usize> = line
        .truth_labels
        .iter()
        .map(|l| resolve_leaf(l))
        .collect::<Result<_, _>>()?;

    let ranked_leaves: Vec<Vec<usize>> = match (&line.ranked_labels, &line.pred_embeddings) {
        (Some(ranked), None) => ranked
            .iter()
            .map(|stripe| stripe.iter().map(|l| resolve_leaf(l)).collect())
            .collect::<Result<_, _>>()?,
        (None, Some(embeddings)) => embeddings
            .iter()
            .map(|vector| {
                let prediction = rank_labels(matrix, vector).map_err(|e| sample_error(id, e))?;
                prediction
                    .ranked
                    .iter()
                    .map(|r| resolve_leaf(&r.label))
                    .collect()
            })
            .collect::<Result<_, _>>()?,
        (Some(_), Some(_)) => {
            return Err(sample_error(id, "both ranked_labels and pred_embeddings present"))
        }
        (None, None) => {
            return Err(sample_error(id, "one of ranked_labels or pred_embeddings is required"))
        }
    };

    let check_len = |what: &str, len: usize| {
        if len != stripes {
            Err(sample_error(id, format!("{what} has length {len}, expected {stripes}")))
        } else {
            Ok(())
        }
    };
    check_len("truth_labels", truth_leaves.len())?;
    check_len("ranked predictions", ranked_leaves.len())?;
    check_len("truth_stones", line.truth_stones.len())?;
    check_len("pred_stones", line.pred_stones.len())?;
    check_len("truth_categorical", line.truth_categorical.len())?;
    check_len("pred_categorical", line.pred_categorical.len())?;
    for ranking in &ranked_leaves {
        if ranking.is_empty() {
            return Err(sample_error(id, "empty label ranking"));
        }
    }

    Ok(EvalInput {
        id,
        truth_depths,
        pred_depths,
        truth_leaves,
        ranked_leaves,
        truth_stones: line.truth_stones.clone(),
        pred_stones: line.pred_stones.clone(),
        truth_categorical: line.truth_categorical.clone(),
        pred_categorical: line.pred_categorical.clone(),
    })
}

pub fn read_sample_lines(reader: &mut dyn BufRead) -> Result<Vec<SampleLine>, CliError> {
    let mut lines = Vec::new();
    for (number, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: SampleLine = serde_json::from_str(&line)
            .map_err(|e| CliError::io(format!("samples line {}: {e}", number + 1)))?;
        lines.push(parsed);
    }
    Ok(lines)
}

fn metrics_error(e: MetricsError) -> CliError {
    CliError::math(e.to_string())
}

/// Computes the full report over validated samples.
///
/// `ks` selects the @k variants; a k is reported for a target only when every
/// ranking covers it, so a 3-class feature simply omits @5.
pub fn evaluate_samples(
    inputs: &[EvalInput],
    g: &TaxonomyGraph,
    ks: &[usize],
) -> Result<EvalReport, CliError> {
    if inputs.is_empty() {
        return Err(CliError::domain("no samples to evaluate"));
    }
    let feature_count = inputs[0].truth_categorical[0].len();

    let mut iou_sum = 0.0;
    let mut stripes = 0usize;
    let mut stones_pred = Vec::new();
    let mut stones_truth = Vec::new();
    let mut horizon_pairs: Vec<(usize, usize)> = Vec::new();
    let mut horizon_ranked: Vec<(usize, Vec<usize>)> = Vec::new();
    let mut label_pairs: Vec<(HorizonLabel, HorizonLabel)> = Vec::new();
    let mut min_horizon_ranking = usize::MAX;
    let mut feature_pairs: Vec<Vec<(usize, usize)>> = vec![Vec::new(); feature_count];
    let mut feature_ranked: Vec<Vec<(usize, Vec<usize>)>> = vec![Vec::new(); feature_count];
    let mut feature_classes: Vec<usize> = vec![0; feature_count];
    let mut min_feature_ranking: Vec<usize> = vec![usize::MAX; feature_count];

    for input in inputs {
        iou_sum += iou_1d(&input.pred_depths, &input.truth_depths);
        for stripe in 0..input.truth_depths.horizon_count() {
            stripes += 1;
            stones_truth.push(input.truth_stones[stripe]);
            stones_pred.push(input.pred_stones[stripe]);

            let truth_leaf = input.truth_leaves[stripe];
            let ranking = &input.ranked_leaves[stripe];
            min_horizon_ranking = min_horizon_ranking.min(ranking.len());
            horizon_pairs.push((truth_leaf, ranking[0]));
            horizon_ranked.push((truth_leaf, ranking.clone()));
            label_pairs.push((g.leaf(truth_leaf).clone(), g.leaf(ranking[0]).clone()));

            let truth_row = &input.truth_categorical[stripe];
            let pred_row = &input.pred_categorical[stripe];
            if truth_row.len() != feature_count || pred_row.len() != feature_count {
                return Err(sample_error(
                    input.id,
                    format!("expected {feature_count} categorical features per stripe"),
                ));
            }
            for f in 0..feature_count {
                let truth_class = truth_row[f] as usize;
                let ranking = &pred_row[f];
                if ranking.is_empty() {
                    return Err(sample_error(input.id, format!("feature {f}: empty ranking")));
                }
                min_feature_ranking[f] = min_feature_ranking[f].min(ranking.len());
                let top = ranking[0];
                feature_classes[f] = feature_classes[f]
                    .max(truth_class + 1)
                    .max(ranking.iter().max().unwrap() + 1);
                feature_pairs[f].push((truth_class, top));
                feature_ranked[f].push((truth_class, ranking.clone()));
            }
        }
    }

    let num_labels = g.leaf_count();
    let horizon = LabelMetrics {
        metrics: classification_metrics(&horizon_pairs, num_labels).map_err(metrics_error)?,
        at_k: at_k_table(&horizon_ranked, ks, num_labels, min_horizon_ranking)?,
    };
    let aggregated_main_accuracy = aggregated_accuracy(&label_pairs, g).map_err(metrics_error)?;

    let mut features = Vec::with_capacity(feature_count);
    for f in 0..feature_count {
        let name = if feature_count == DEFAULT_FEATURE_NAMES.len() {
            DEFAULT_FEATURE_NAMES[f].to_string()
        } else {
            format!("feature_{f}")
        };
        features.push(FeatureMetrics {
            name,
            classes: feature_classes[f],
            label_metrics: LabelMetrics {
                metrics: classification_metrics(&feature_pairs[f], feature_classes[f])
                    .map_err(metrics_error)?,
                at_k: at_k_table(&feature_ranked[f], ks, feature_classes[f], min_feature_ranking[f])?,
            },
        });
    }

    Ok(EvalReport {
        samples: inputs.len(),
        stripes,
        iou: iou_sum / inputs.len() as f64,
        stones_mse: mse(&stones_pred, &stones_truth).map_err(metrics_error)?,
        features,
        horizon,
        aggregated_main_accuracy,
    })
}

fn at_k_table(
    samples: &[(usize, Vec<usize>)],
    ks: &[usize],
    num_classes: usize,
    min_ranking: usize,
) -> Result<BTreeMap<usize, htk_core::metrics::TopKMetrics>, CliError> {
    let mut table = BTreeMap::new();
    for &k in ks {
        if k == 0 || k > min_ranking {
            continue;
        }
        table.insert(k, topk_metrics(samples, k, num_classes).map_err(metrics_error)?);
    }
    Ok(table)
}
