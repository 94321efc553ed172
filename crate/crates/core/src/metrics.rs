//! Evaluation metrics: depth-marker 1D-IoU, classification and top-k metrics,
//! main-symbol aggregated accuracy, regression MSE and the multitask loss
//! arithmetic.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::grammar::HorizonLabel;
use crate::taxonomy::TaxonomyGraph;

/// Stop value: the final depth marker of every sequence (1 meter).
pub const STOP_MARKER: f64 = 1.0;

/// Default rounding margin around the stop value.
pub const DEPTH_EPSILON: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricsError {
    #[error("depth sequence is empty")]
    EmptySequence,
    #[error("marker {value} at index {index} is not strictly increasing")]
    NonMonotone { index: usize, value: f64 },
    #[error("marker at index {index} is not finite")]
    InvalidMarker { index: usize },
    #[error("no marker reaches the stop value within the margin")]
    NoTerminator,
    #[error("sample set is empty")]
    EmptySampleSet,
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("k = {k} exceeds the {available} available ranked labels")]
    KOutOfRange { k: usize, available: usize },
    #[error("class {class} is out of range for {num_classes} classes")]
    ClassOutOfRange { class: usize, num_classes: usize },
    #[error("label \"{label}\" is not in the taxonomy")]
    UnknownLabel { label: String },
    #[error("loss component {value} is negative")]
    NegativeLoss { value: f64 },
    #[error("loss component is not finite")]
    NonFiniteLoss,
    #[error("decay epoch count must be positive")]
    NonPositiveEpochCount,
}

/// Strictly increasing depth markers in `(0, 1]`, ending at the stop value.
///
/// Marker `d_t` is the lower boundary of horizon stripe `t`, with an implicit
/// surface marker `d_0 = 0`; the final marker is always exactly
/// [`STOP_MARKER`].
#[derive(Debug, Clone, PartialEq)]
pub struct DepthSequence {
    markers: Vec<f64>,
}

impl DepthSequence {
    pub fn new(markers: Vec<f64>) -> Result<Self, MetricsError> {
        if markers.is_empty() {
            return Err(MetricsError::EmptySequence);
        }
        let mut prev = 0.0;
        for (index, &value) in markers.iter().enumerate() {
            if !value.is_finite() {
                return Err(MetricsError::InvalidMarker { index });
            }
            if value <= prev {
                return Err(MetricsError::NonMonotone { index, value });
            }
            prev = value;
        }
        if *markers.last().unwrap() != STOP_MARKER {
            return Err(MetricsError::NoTerminator);
        }
        Ok(DepthSequence { markers })
    }

    pub fn markers(&self) -> &[f64] {
        &self.markers
    }

    /// Number of horizon stripes.
    pub fn horizon_count(&self) -> usize {
        self.markers.len()
    }

    /// Stripe `t` as `(upper, lower)` boundaries, `t < horizon_count()`.
    pub fn stripe(&self, t: usize) -> (f64, f64) {
        let lo = if t == 0 { 0.0 } else { self.markers[t - 1] };
        (lo, self.markers[t])
    }

    pub fn stripes(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        (0..self.horizon_count()).map(|t| self.stripe(t))
    }
}

/// Normalizes a raw marker sequence: the first marker within `epsilon` of the
/// stop value is rounded to it and truncates the rest (trailing values are
/// padding); everything before must be strictly increasing.
pub fn normalize_depths(raw: &[f64], epsilon: f64) -> Result<DepthSequence, MetricsError> {
    if raw.is_empty() {
        return Err(MetricsError::EmptySequence);
    }
    let mut markers = Vec::with_capacity(raw.len());
    let mut prev = 0.0;
    for (index, &value) in raw.iter().enumerate() {
        if !value.is_finite() {
            return Err(MetricsError::InvalidMarker { index });
        }
        if (value - STOP_MARKER).abs() <= epsilon {
            if STOP_MARKER <= prev {
                return Err(MetricsError::NonMonotone { index, value });
            }
            markers.push(STOP_MARKER);
            return DepthSequence::new(markers);
        }
        if value <= prev {
            return Err(MetricsError::NonMonotone { index, value });
        }
        markers.push(value);
        prev = value;
    }
    Err(MetricsError::NoTerminator)
}

/// Mean per-stripe intersection-over-union of two depth sequences.
///
/// Stripes are paired by index; disjoint pairs score 0 and unmatched stripes
/// (when the horizon counts differ) also score 0, averaged over the larger
/// count. Identical sequences score exactly 1.
pub fn iou_1d(pred: &DepthSequence, truth: &DepthSequence) -> f64 {
    let pairs = pred.horizon_count().max(truth.horizon_count());
    let mut total = 0.0;
    for t in 0..pred.horizon_count().min(truth.horizon_count()) {
        let (plo, phi) = pred.stripe(t);
        let (tlo, thi) = truth.stripe(t);
        let intersection = (phi.min(thi) - plo.max(tlo)).max(0.0);
        let union = (phi - plo) + (thi - tlo) - intersection;
        total += if union > 0.0 {
            intersection / union
        } else if plo == tlo {
            // Two coinciding zero-length stripes count as a perfect match.
            1.0
        } else {
            0.0
        };
    }
    total / pairs as f64
}

/// Accuracy and macro precision/recall of top-k candidate sets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TopKMetrics {
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
}

/// Top-k metrics over `(truth class, ranked classes)` samples.
///
/// `accuracy` is the fraction of samples whose truth appears in the top `k`.
/// Recall is macro-averaged over classes with truth support; precision also
/// includes classes that were predicted into some top-k without support, with
/// a zero contribution when a supported class was never predicted.
pub fn topk_metrics(
    samples: &[(usize, Vec<usize>)],
    k: usize,
    num_classes: usize,
) -> Result<TopKMetrics, MetricsError> {
    if samples.is_empty() {
        return Err(MetricsError::EmptySampleSet);
    }
    if k == 0 {
        return Err(MetricsError::KOutOfRange { k, available: 0 });
    }
    let mut support = alloc::vec![0usize; num_classes];
    let mut predicted = alloc::vec![0usize; num_classes];
    let mut hits = alloc::vec![0usize; num_classes];
    let mut correct = 0usize;
    for (truth, ranked) in samples {
        if *truth >= num_classes {
            return Err(MetricsError::ClassOutOfRange {
                class: *truth,
                num_classes,
            });
        }
        if ranked.len() < k {
            return Err(MetricsError::KOutOfRange {
                k,
                available: ranked.len(),
            });
        }
        support[*truth] += 1;
        let mut seen = alloc::collections::BTreeSet::new();
        for &class in &ranked[..k] {
            if class >= num_classes {
                return Err(MetricsError::ClassOutOfRange {
                    class,
                    num_classes,
                });
            }
            if !seen.insert(class) {
                continue;
            }
            predicted[class] += 1;
            if class == *truth {
                hits[class] += 1;
                correct += 1;
            }
        }
    }
    let accuracy = correct as f64 / samples.len() as f64;
    let mut precision_sum = 0.0;
    let mut precision_classes = 0usize;
    let mut recall_sum = 0.0;
    let mut recall_classes = 0usize;
    for c in 0..num_classes {
        if support[c] > 0 || predicted[c] > 0 {
            precision_classes += 1;
            if predicted[c] > 0 {
                precision_sum += hits[c] as f64 / predicted[c] as f64;
            }
        }
        if support[c] > 0 {
            recall_classes += 1;
            recall_sum += hits[c] as f64 / support[c] as f64;
        }
    }
    Ok(TopKMetrics {
        accuracy,
        macro_precision: precision_sum / precision_classes as f64,
        macro_recall: recall_sum / recall_classes as f64,
    })
}

/// Accuracy plus macro F1/precision/recall from a confusion matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassificationMetrics {
    pub accuracy: f64,
    pub macro_f1: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
}

/// Standard confusion-matrix metrics over `(truth, predicted)` class pairs.
/// Classes with neither support nor predictions stay out of the macro means.
pub fn classification_metrics(
    samples: &[(usize, usize)],
    num_classes: usize,
) -> Result<ClassificationMetrics, MetricsError> {
    if samples.is_empty() {
        return Err(MetricsError::EmptySampleSet);
    }
    let mut tp = alloc::vec![0usize; num_classes];
    let mut fp = alloc::vec![0usize; num_classes];
    let mut fnc = alloc::vec![0usize; num_classes];
    let mut correct = 0usize;
    for (truth, predicted) in samples {
        for class in [truth, predicted] {
            if *class >= num_classes {
                return Err(MetricsError::ClassOutOfRange {
                    class: *class,
                    num_classes,
                });
            }
        }
        if truth == predicted {
            tp[*truth] += 1;
            correct += 1;
        } else {
            fnc[*truth] += 1;
            fp[*predicted] += 1;
        }
    }
    let mut precision_sum = 0.0;
    let mut recall_sum = 0.0;
    let mut f1_sum = 0.0;
    let mut classes = 0usize;
    for c in 0..num_classes {
        if tp[c] + fp[c] + fnc[c] == 0 {
            continue;
        }
        classes += 1;
        let precision = if tp[c] + fp[c] > 0 {
            tp[c] as f64 / (tp[c] + fp[c]) as f64
        } else {
            0.0
        };
        let recall = if tp[c] + fnc[c] > 0 {
            tp[c] as f64 / (tp[c] + fnc[c]) as f64
        } else {
            0.0
        };
        precision_sum += precision;
        recall_sum += recall;
        if precision + recall > 0.0 {
            f1_sum += 2.0 * precision * recall / (precision + recall);
        }
    }
    Ok(ClassificationMetrics {
        accuracy: correct as f64 / samples.len() as f64,
        macro_f1: f1_sum / classes as f64,
        macro_precision: precision_sum / classes as f64,
        macro_recall: recall_sum / classes as f64,
    })
}

/// Accuracy after mapping both sides to their main symbol (mixtures count
/// towards the second member's main symbol).
pub fn aggregated_accuracy(
    samples: &[(HorizonLabel, HorizonLabel)],
    g: &TaxonomyGraph,
) -> Result<f64, MetricsError> {
    if samples.is_empty() {
        return Err(MetricsError::EmptySampleSet);
    }
    let mut correct = 0usize;
    for (truth, predicted) in samples {
        for label in [truth, predicted] {
            if g.leaf_position(&label.render()).is_none() {
                return Err(MetricsError::UnknownLabel {
                    label: label.render(),
                });
            }
        }
        if truth.main_symbol() == predicted.main_symbol() {
            correct += 1;
        }
    }
    Ok(correct as f64 / samples.len() as f64)
}

/// Mean squared error.
pub fn mse(pred: &[f64], truth: &[f64]) -> Result<f64, MetricsError> {
    if pred.len() != truth.len() {
        return Err(MetricsError::LengthMismatch {
            left: pred.len(),
            right: truth.len(),
        });
    }
    if pred.is_empty() {
        return Err(MetricsError::EmptySampleSet);
    }
    let sum: f64 = pred
        .iter()
        .zip(truth)
        .map(|(p, t)| (p - t) * (p - t))
        .sum();
    Ok(sum / pred.len() as f64)
}

/// Weight of the depth loss in the multitask total.
pub const DEPTH_LOSS_WEIGHT: f64 = 10.0;
/// Weight of the stones regression loss.
pub const STONES_LOSS_WEIGHT: f64 = 0.1;
/// Weight of the horizon classification loss.
pub const HORIZON_LOSS_WEIGHT: f64 = 10.0;
/// Number of categorical morphological features.
pub const CATEGORICAL_FEATURES: usize = 5;

/// Weighted multitask loss:
/// `10 * depth + 0.1 * stones + sum(categorical) + 10 * horizon`.
pub fn total_loss(
    depth: f64,
    stones: f64,
    categorical: &[f64; CATEGORICAL_FEATURES],
    horizon: f64,
) -> Result<f64, MetricsError> {
    for &component in [depth, stones, horizon].iter().chain(categorical) {
        if !component.is_finite() {
            return Err(MetricsError::NonFiniteLoss);
        }
        if component < 0.0 {
            return Err(MetricsError::NegativeLoss { value: component });
        }
    }
    let categorical_sum: f64 = categorical.iter().sum();
    Ok(DEPTH_LOSS_WEIGHT * depth
        + STONES_LOSS_WEIGHT * stones
        + categorical_sum
        + HORIZON_LOSS_WEIGHT * horizon)
}

/// Teacher-forcing schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TeacherForcing {
    /// Ground truth is fed at every epoch.
    Full,
    /// Rate decays linearly from 1 to 0 across the given number of epochs.
    LinearDecay { epochs: u32 },
}

/// Teacher-forcing rate at an epoch (epoch 0 is the first).
pub fn teacher_forcing_rate(schedule: TeacherForcing, epoch: u32) -> Result<f64, MetricsError> {
    match schedule {
        TeacherForcing::Full => Ok(1.0),
        TeacherForcing::LinearDecay { epochs } => {
            if epochs == 0 {
                return Err(MetricsError::NonPositiveEpochCount);
            }
            Ok((1.0 - epoch as f64 / epochs as f64).max(0.0))
        }
    }
}

/// Top-1 plus per-k metrics for one classification target.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelMetrics {
    pub metrics: ClassificationMetrics,
    pub at_k: BTreeMap<usize, TopKMetrics>,
}

/// Metrics of one categorical tabular feature.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMetrics {
    pub name: String,
    pub classes: usize,
    pub label_metrics: LabelMetrics,
}

/// The full per-task metric bundle of an evaluation run. All rates are stored
/// in `[0, 1]`; rendering as percentages is up to the caller.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub samples: usize,
    pub stripes: usize,
    pub iou: f64,
    pub stones_mse: f64,
    pub features: Vec<FeatureMetrics>,
    pub horizon: LabelMetrics,
    pub aggregated_main_accuracy: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::{parse_label, Alphabet};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn seq(markers: &[f64]) -> DepthSequence {
        DepthSequence::new(markers.to_vec()).unwrap()
    }

    #[test]
    fn normalization_rounds_the_terminator() {
        let s = normalize_depths(&[0.3, 0.7, 0.995], DEPTH_EPSILON).unwrap();
        assert_eq!(s.markers(), &[0.3, 0.7, 1.0]);
        let s = normalize_depths(&[0.5, 1.0], DEPTH_EPSILON).unwrap();
        assert_eq!(s.markers(), &[0.5, 1.0]);
        let s = normalize_depths(&[1.005], DEPTH_EPSILON).unwrap();
        assert_eq!(s.markers(), &[1.0]);
        // Padding after the terminator is dropped.
        let s = normalize_depths(&[0.3, 0.999, 0.5, 0.7], DEPTH_EPSILON).unwrap();
        assert_eq!(s.markers(), &[0.3, 1.0]);
    }

    #[test]
    fn normalization_errors() {
        assert_eq!(
            normalize_depths(&[0.3, 0.98], DEPTH_EPSILON).unwrap_err(),
            MetricsError::NoTerminator
        );
        assert!(matches!(
            normalize_depths(&[0.3, 0.2, 1.0], DEPTH_EPSILON).unwrap_err(),
            MetricsError::NonMonotone { index: 1, .. }
        ));
        assert!(matches!(
            normalize_depths(&[0.0, 1.0], DEPTH_EPSILON).unwrap_err(),
            MetricsError::NonMonotone { index: 0, .. }
        ));
        assert_eq!(
            normalize_depths(&[], DEPTH_EPSILON).unwrap_err(),
            MetricsError::EmptySequence
        );
        assert!(matches!(
            normalize_depths(&[f64::NAN, 1.0], DEPTH_EPSILON).unwrap_err(),
            MetricsError::InvalidMarker { index: 0 }
        ));
    }

    #[test]
    fn sequence_constructor_enforces_invariants() {
        assert!(DepthSequence::new(vec![0.5, 1.0]).is_ok());
        assert_eq!(
            DepthSequence::new(vec![0.5, 0.9]).unwrap_err(),
            MetricsError::NoTerminator
        );
        assert!(matches!(
            DepthSequence::new(vec![0.5, 0.5, 1.0]).unwrap_err(),
            MetricsError::NonMonotone { index: 1, .. }
        ));
        let s = seq(&[0.3, 0.7, 1.0]);
        let stripes: Vec<(f64, f64)> = s.stripes().collect();
        assert_eq!(stripes, vec![(0.0, 0.3), (0.3, 0.7), (0.7, 1.0)]);
    }

    #[test]
    fn iou_identical_sequences_score_exactly_one() {
        for markers in [vec![1.0], vec![0.5, 1.0], vec![0.1, 0.2, 0.3, 0.9, 1.0]] {
            let s = seq(&markers);
            assert_eq!(iou_1d(&s, &s), 1.0);
        }
    }

    #[test]
    fn iou_worked_examples() {
        let pred = seq(&[0.4, 1.0]);
        let truth = seq(&[0.5, 1.0]);
        let expected = (0.4 / 0.5 + 0.5 / 0.6) / 2.0;
        assert!((iou_1d(&pred, &truth) - expected).abs() < 1e-12);
        assert!((iou_1d(&pred, &truth) - 0.81667).abs() < 1e-5);

        let pred = seq(&[0.2, 0.5, 1.0]);
        let truth = seq(&[0.5, 1.0]);
        // Pair 0 overlaps 0.2 of 0.5, pair 1 is disjoint, pair 2 unmatched.
        let expected = (0.2 / 0.5 + 0.0 + 0.0) / 3.0;
        assert!((iou_1d(&pred, &truth) - expected).abs() < 1e-12);
        assert!((iou_1d(&pred, &truth) - 0.1333).abs() < 1e-4);
    }

    #[test]
    fn iou_is_symmetric_and_one_only_for_identical() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let a = random_sequence(&mut rng);
            let b = random_sequence(&mut rng);
            let ab = iou_1d(&a, &b);
            assert_eq!(ab, iou_1d(&b, &a));
            assert!((0.0..=1.0).contains(&ab));
            if a != b {
                assert!(ab < 1.0);
            }
        }
    }

    fn random_sequence(rng: &mut ChaCha8Rng) -> DepthSequence {
        let count = rng.random_range(1..=7usize);
        let mut markers: Vec<f64> = (0..count)
            .map(|_| (rng.random_range(1..99u32) as f64) / 100.0)
            .collect();
        markers.sort_by(f64::total_cmp);
        markers.dedup();
        markers.push(1.0);
        DepthSequence::new(markers).unwrap()
    }

    /// Dumb oracle: rasterize `[0, 1]` and count cells per stripe pair.
    fn rasterized_iou(pred: &DepthSequence, truth: &DepthSequence, step: f64) -> f64 {
        let pairs = pred.horizon_count().max(truth.horizon_count());
        let cells = (1.0 / step) as usize;
        let mut total = 0.0;
        for t in 0..pairs {
            if t >= pred.horizon_count() || t >= truth.horizon_count() {
                continue;
            }
            let (plo, phi) = pred.stripe(t);
            let (tlo, thi) = truth.stripe(t);
            let mut intersection = 0usize;
            let mut union = 0usize;
            for cell in 0..cells {
                let x = (cell as f64 + 0.5) * step;
                let in_pred = x > plo && x < phi;
                let in_truth = x > tlo && x < thi;
                if in_pred && in_truth {
                    intersection += 1;
                }
                if in_pred || in_truth {
                    union += 1;
                }
            }
            if union > 0 {
                total += intersection as f64 / union as f64;
            }
        }
        total / pairs as f64
    }

    #[test]
    fn iou_matches_rasterized_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let a = random_sequence(&mut rng);
            let b = random_sequence(&mut rng);
            let analytic = iou_1d(&a, &b);
            let rasterized = rasterized_iou(&a, &b, 1e-4);
            assert!(
                (analytic - rasterized).abs() <= 1e-3,
                "{:?} vs {:?}: {analytic} vs {rasterized}",
                a.markers(),
                b.markers()
            );
        }
    }

    #[test]
    fn topk_toy_example() {
        // Classes: 0 = A, 1 = B.
        let samples = vec![(0, vec![0, 1]), (1, vec![0, 1]), (1, vec![1, 0])];
        let m = topk_metrics(&samples, 1, 2).unwrap();
        assert!((m.accuracy - 2.0 / 3.0).abs() < 1e-12);
        assert!((m.macro_recall - (1.0 + 0.5) / 2.0).abs() < 1e-12);
        assert!((m.macro_precision - (0.5 + 1.0) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn topk_perfect_and_full_ranking() {
        let samples: Vec<(usize, Vec<usize>)> =
            (0..4).map(|c| (c, vec![c, (c + 1) % 4, (c + 2) % 4, (c + 3) % 4])).collect();
        let at1 = topk_metrics(&samples, 1, 4).unwrap();
        assert_eq!(at1.accuracy, 1.0);
        assert_eq!(at1.macro_precision, 1.0);
        assert_eq!(at1.macro_recall, 1.0);
        let full = topk_metrics(&samples, 4, 4).unwrap();
        assert_eq!(full.accuracy, 1.0);
        assert_eq!(full.macro_recall, 1.0);
    }

    #[test]
    fn topk_accuracy_is_monotone_in_k() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let num_classes = 9;
        let samples: Vec<(usize, Vec<usize>)> = (0..150)
            .map(|_| {
                let truth = rng.random_range(0..num_classes);
                let mut ranked: Vec<usize> = (0..num_classes).collect();
                for i in (1..ranked.len()).rev() {
                    let j = rng.random_range(0..=i);
                    ranked.swap(i, j);
                }
                (truth, ranked)
            })
            .collect();
        let mut last = 0.0;
        for k in 1..=num_classes {
            let m = topk_metrics(&samples, k, num_classes).unwrap();
            assert!(m.accuracy >= last, "accuracy@{k} dropped");
            last = m.accuracy;
        }
        assert_eq!(last, 1.0, "accuracy@N must be 1");
    }

    #[test]
    fn topk_errors() {
        assert!(matches!(
            topk_metrics(&[], 1, 2),
            Err(MetricsError::EmptySampleSet)
        ));
        assert!(matches!(
            topk_metrics(&[(0, vec![0])], 2, 2),
            Err(MetricsError::KOutOfRange { .. })
        ));
        assert!(matches!(
            topk_metrics(&[(5, vec![0])], 1, 2),
            Err(MetricsError::ClassOutOfRange { .. })
        ));
    }

    #[test]
    fn classification_perfect_and_degenerate() {
        let perfect: Vec<(usize, usize)> = (0..6).map(|c| (c % 3, c % 3)).collect();
        let m = classification_metrics(&perfect, 3).unwrap();
        assert_eq!(
            (m.accuracy, m.macro_f1, m.macro_precision, m.macro_recall),
            (1.0, 1.0, 1.0, 1.0)
        );

        // Always predicting class 0 on balanced two-class truth.
        let degenerate = vec![(0, 0), (1, 0), (0, 0), (1, 0)];
        let m = classification_metrics(&degenerate, 2).unwrap();
        assert_eq!(m.accuracy, 0.5);
        // class 0: precision 0.5, recall 1; class 1: precision 0, recall 0.
        assert!((m.macro_precision - 0.25).abs() < 1e-12);
        assert!((m.macro_recall - 0.5).abs() < 1e-12);
        assert!((m.macro_f1 - (2.0 * 0.5 / 1.5) / 2.0).abs() < 1e-12);
    }

    /// Naive counting oracle used to pin the confusion-matrix arithmetic.
    fn classification_oracle(samples: &[(usize, usize)], num_classes: usize) -> ClassificationMetrics {
        let count = |f: &dyn Fn(usize, usize, usize) -> bool, c: usize| {
            samples.iter().filter(|(t, p)| f(*t, *p, c)).count() as f64
        };
        let mut precision = 0.0;
        let mut recall = 0.0;
        let mut f1 = 0.0;
        let mut classes = 0.0;
        for c in 0..num_classes {
            let tp = count(&|t, p, c| t == c && p == c, c);
            let fp = count(&|t, p, c| t != c && p == c, c);
            let fn_ = count(&|t, p, c| t == c && p != c, c);
            if tp + fp + fn_ == 0.0 {
                continue;
            }
            classes += 1.0;
            let prec = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
            let rec = if tp + fn_ > 0.0 { tp / (tp + fn_) } else { 0.0 };
            precision += prec;
            recall += rec;
            if prec + rec > 0.0 {
                f1 += 2.0 * prec * rec / (prec + rec);
            }
        }
        ClassificationMetrics {
            accuracy: samples.iter().filter(|(t, p)| t == p).count() as f64 / samples.len() as f64,
            macro_f1: f1 / classes,
            macro_precision: precision / classes,
            macro_recall: recall / classes,
        }
    }

    #[test]
    fn classification_matches_counting_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        for _ in 0..50 {
            let num_classes = rng.random_range(2..12usize);
            let samples: Vec<(usize, usize)> = (0..100)
                .map(|_| (rng.random_range(0..num_classes), rng.random_range(0..num_classes)))
                .collect();
            let got = classification_metrics(&samples, num_classes).unwrap();
            let want = classification_oracle(&samples, num_classes);
            assert!((got.accuracy - want.accuracy).abs() < 1e-12);
            assert!((got.macro_f1 - want.macro_f1).abs() < 1e-12);
            assert!((got.macro_precision - want.macro_precision).abs() < 1e-12);
            assert!((got.macro_recall - want.macro_recall).abs() < 1e-12);
        }
    }

    fn label(name: &str) -> HorizonLabel {
        parse_label(name, &Alphabet::universal()).unwrap()
    }

    fn metric_graph() -> TaxonomyGraph {
        TaxonomyGraph::build(&[
            label("Ah"), label("Bv"), label("Bt"), label("Sd"), label("Sw"), label("Cv"),
            label("Ah-Bv"),
        ])
        .unwrap()
    }

    #[test]
    fn aggregated_accuracy_maps_mixtures_to_the_second_main() {
        let g = metric_graph();
        // Truth Ah-Bv counts as B, so predicting Bt is a main-symbol hit.
        let samples = vec![(label("Ah-Bv"), label("Bt"))];
        assert_eq!(aggregated_accuracy(&samples, &g).unwrap(), 1.0);
        let samples = vec![(label("Ah"), label("Bv"))];
        assert_eq!(aggregated_accuracy(&samples, &g).unwrap(), 0.0);
        let samples = vec![
            (label("Ah-Bv"), label("Bv")),
            (label("Sd"), label("Sw")),
            (label("Cv"), label("Ah")),
        ];
        assert!((aggregated_accuracy(&samples, &g).unwrap() - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn aggregated_accuracy_never_below_exact_accuracy() {
        let g = metric_graph();
        let names = ["Ah", "Bv", "Bt", "Sd", "Sw", "Cv", "Ah-Bv"];
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        for _ in 0..50 {
            let samples: Vec<(HorizonLabel, HorizonLabel)> = (0..80)
                .map(|_| {
                    (
                        label(names[rng.random_range(0..names.len())]),
                        label(names[rng.random_range(0..names.len())]),
                    )
                })
                .collect();
            let aggregated = aggregated_accuracy(&samples, &g).unwrap();
            let exact = samples.iter().filter(|(t, p)| t == p).count() as f64 / samples.len() as f64;
            assert!(aggregated >= exact);
        }
    }

    #[test]
    fn aggregated_accuracy_rejects_unknown_labels() {
        let g = metric_graph();
        let samples = vec![(label("Ah"), label("Xq"))];
        assert!(matches!(
            aggregated_accuracy(&samples, &g),
            Err(MetricsError::UnknownLabel { .. })
        ));
    }

    #[test]
    fn mse_basics_and_oracle() {
        assert_eq!(mse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mse(&[3.0], &[5.0]).unwrap(), 4.0);
        assert!(matches!(
            mse(&[1.0], &[1.0, 2.0]),
            Err(MetricsError::LengthMismatch { .. })
        ));
        assert!(matches!(mse(&[], &[]), Err(MetricsError::EmptySampleSet)));

        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..50 {
            let n = rng.random_range(1..40usize);
            let a: Vec<f64> = (0..n).map(|_| rng.random_range(-50.0..50.0)).collect();
            let b: Vec<f64> = (0..n).map(|_| rng.random_range(-50.0..50.0)).collect();
            let mut sum = 0.0;
            for i in 0..n {
                sum += (a[i] - b[i]) * (a[i] - b[i]);
            }
            assert_eq!(mse(&a, &b).unwrap(), sum / n as f64);
        }
    }

    #[test]
    fn total_loss_weights() {
        assert_eq!(total_loss(1.0, 1.0, &[1.0; 5], 1.0).unwrap(), 25.1);
        assert_eq!(total_loss(0.0, 0.0, &[0.0; 5], 0.0).unwrap(), 0.0);
        assert_eq!(total_loss(0.2, 2.0, &[0.1; 5], 0.5).unwrap(), 7.7);
        assert!(matches!(
            total_loss(-0.1, 0.0, &[0.0; 5], 0.0),
            Err(MetricsError::NegativeLoss { .. })
        ));
        assert!(matches!(
            total_loss(f64::INFINITY, 0.0, &[0.0; 5], 0.0),
            Err(MetricsError::NonFiniteLoss)
        ));
    }

    #[test]
    fn total_loss_is_linear_in_each_component() {
        let base = total_loss(0.25, 0.5, &[0.125; 5], 0.75).unwrap();
        let close = |x: f64, y: f64| (x - y).abs() < 1e-12;
        assert!(close(total_loss(1.25, 0.5, &[0.125; 5], 0.75).unwrap() - base, 10.0));
        assert!(close(total_loss(0.25, 1.5, &[0.125; 5], 0.75).unwrap() - base, 0.1));
        assert!(close(total_loss(0.25, 0.5, &[1.125; 5], 0.75).unwrap() - base, 5.0));
        assert!(close(total_loss(0.25, 0.5, &[0.125; 5], 1.75).unwrap() - base, 10.0));
    }

    #[test]
    fn teacher_forcing_rates() {
        for epoch in [0, 3, 100] {
            assert_eq!(teacher_forcing_rate(TeacherForcing::Full, epoch).unwrap(), 1.0);
        }
        let decay = TeacherForcing::LinearDecay { epochs: 5 };
        for epoch in 0..=6u32 {
            let expected = (1.0 - epoch as f64 / 5.0).max(0.0);
            assert_eq!(teacher_forcing_rate(decay, epoch).unwrap(), expected);
        }
        assert_eq!(teacher_forcing_rate(decay, 2).unwrap(), 0.6);
        assert_eq!(teacher_forcing_rate(decay, 5).unwrap(), 0.0);
        assert!(matches!(
            teacher_forcing_rate(TeacherForcing::LinearDecay { epochs: 0 }, 1),
            Err(MetricsError::NonPositiveEpochCount)
        ));
    }
}
