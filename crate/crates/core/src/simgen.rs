//! Seeded generator of synthetic soil-profile records plus reference baseline
//! predictors, so the full pipeline (cluster, embed, decode, evaluate) can be
//! exercised end to end without field data.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::grammar::HorizonLabel;
use crate::math;
use crate::metrics::DepthSequence;
use crate::taxonomy::TaxonomyGraph;

/// Profiles carry at least this many horizons...
pub const MIN_HORIZONS: usize = 2;
/// ...and at most this many.
pub const MAX_HORIZONS: usize = 8;
/// Stones counts are integers in `0..=MAX_STONES`.
pub const MAX_STONES: u32 = 100;

/// Internal depth markers are kept inside this band so that none of them
/// lands in the stop-rounding margin.
const MARKER_LOW: f64 = 0.02;
const MARKER_HIGH: f64 = 0.98;
const MARKER_MIN_GAP: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimgenError {
    #[error("invalid generator config: {reason}")]
    InvalidConfig { reason: String },
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("too few records to split")]
    TooFewRecords,
    #[error("split fractions sum to {sum}, expected 1")]
    InvalidFractions { sum: f64 },
}

/// Long-tail shape of the generated label frequencies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LabelSkew {
    Uniform,
    /// Weight `ratio^rank` for the label at `rank` in leaf order.
    Geometric { ratio: f64 },
    /// Weight `1 / (rank + 1)^exponent`.
    Zipf { exponent: f64 },
}

/// Everything the generator needs; the seed fixes the output byte for byte.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorConfig {
    pub seed: u64,
    pub count: usize,
    /// Relative weights of horizon counts 2..=8.
    pub horizon_weights: Vec<f64>,
    pub skew: LabelSkew,
    /// Class counts of the categorical tabular features.
    pub feature_classes: Vec<usize>,
}

impl GeneratorConfig {
    /// Paper-shaped defaults: uniform horizon counts, geometric label skew
    /// and the five categorical features (soil type, color, carbonate,
    /// humus, rooting) with their class counts.
    pub fn new(seed: u64, count: usize) -> Self {
        GeneratorConfig {
            seed,
            count,
            horizon_weights: alloc::vec![1.0; MAX_HORIZONS - MIN_HORIZONS + 1],
            skew: LabelSkew::Geometric { ratio: 0.9 },
            feature_classes: alloc::vec![17, 74, 7, 8, 7],
        }
    }

    pub fn validate(&self) -> Result<(), SimgenError> {
        let invalid = |reason: &str| SimgenError::InvalidConfig {
            reason: String::from(reason),
        };
        if self.horizon_weights.len() != MAX_HORIZONS - MIN_HORIZONS + 1 {
            return Err(invalid("horizon_weights must cover horizon counts 2..=8"));
        }
        if self.horizon_weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(invalid("horizon_weights must be non-negative"));
        }
        if self.horizon_weights.iter().sum::<f64>() <= 0.0 {
            return Err(invalid("horizon_weights must not all be zero"));
        }
        match self.skew {
            LabelSkew::Uniform => {}
            LabelSkew::Geometric { ratio } => {
                if !(ratio > 0.0 && ratio <= 1.0) {
                    return Err(invalid("geometric ratio must be in (0, 1]"));
                }
            }
            LabelSkew::Zipf { exponent } => {
                if !(exponent >= 0.0 && exponent.is_finite()) {
                    return Err(invalid("zipf exponent must be non-negative"));
                }
            }
        }
        if self.feature_classes.is_empty() {
            return Err(invalid("at least one categorical feature is required"));
        }
        if self.feature_classes.iter().any(|c| *c == 0 || *c > u16::MAX as usize) {
            return Err(invalid("feature class counts must be in 1..=65535"));
        }
        Ok(())
    }
}

/// One synthetic soil profile: depth truth, one label and one tabular tuple
/// per stripe.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileRecord {
    pub id: u64,
    pub depths: DepthSequence,
    pub horizons: Vec<HorizonLabel>,
    pub stones: Vec<u32>,
    /// Per stripe, one class index per categorical feature.
    pub categorical: Vec<Vec<u16>>,
}

impl ProfileRecord {
    pub fn horizon_count(&self) -> usize {
        self.depths.horizon_count()
    }
}

fn label_weights(skew: LabelSkew, n: usize) -> Vec<f64> {
    let mut weights = Vec::with_capacity(n);
    match skew {
        LabelSkew::Uniform => weights.resize(n, 1.0),
        LabelSkew::Geometric { ratio } => {
            let mut w = 1.0;
            for _ in 0..n {
                weights.push(w);
                w *= ratio;
            }
        }
        LabelSkew::Zipf { exponent } => {
            for rank in 0..n {
                weights.push(1.0 / math::powf((rank + 1) as f64, exponent));
            }
        }
    }
    weights
}

/// Generates `config.count` records over the taxonomy's leaves,
/// deterministically per seed.
pub fn generate(config: &GeneratorConfig, g: &TaxonomyGraph) -> Result<Vec<ProfileRecord>, SimgenError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let horizon_dist = WeightedIndex::new(&config.horizon_weights)
        .map_err(|e| SimgenError::InvalidConfig {
            reason: alloc::format!("horizon weights: {e}"),
        })?;
    let weights = label_weights(config.skew, g.leaf_count());
    let label_dist = WeightedIndex::new(&weights).map_err(|e| SimgenError::InvalidConfig {
        reason: alloc::format!("label weights: {e}"),
    })?;

    let mut records = Vec::with_capacity(config.count);
    for id in 0..config.count {
        let horizons_count = MIN_HORIZONS + horizon_dist.sample(&mut rng);
        let markers = random_markers(&mut rng, horizons_count);
        let depths = DepthSequence::new(markers).expect("generated markers are valid");
        let horizons: Vec<HorizonLabel> = (0..horizons_count)
            .map(|_| g.leaf(label_dist.sample(&mut rng)).clone())
            .collect();
        let stones: Vec<u32> = (0..horizons_count)
            .map(|_| rng.random_range(0..=MAX_STONES))
            .collect();
        let categorical: Vec<Vec<u16>> = (0..horizons_count)
            .map(|_| {
                config
                    .feature_classes
                    .iter()
                    .map(|classes| rng.random_range(0..*classes) as u16)
                    .collect()
            })
            .collect();
        records.push(ProfileRecord {
            id: id as u64,
            depths,
            horizons,
            stones,
            categorical,
        });
    }
    Ok(records)
}

fn random_markers(rng: &mut ChaCha8Rng, horizons: usize) -> Vec<f64> {
    loop {
        let mut markers: Vec<f64> = (0..horizons - 1)
            .map(|_| rng.random_range(MARKER_LOW..MARKER_HIGH))
            .collect();
        markers.sort_by(f64::total_cmp);
        let separated = markers.windows(2).all(|w| w[1] - w[0] >= MARKER_MIN_GAP);
        if separated {
            markers.push(crate::metrics::STOP_MARKER);
            return markers;
        }
    }
}

/// The constant depth predictor: per-position mean over the training records
/// that have that position, cut to the modal training length and renormalized
/// into a valid sequence ending at the stop value.
pub fn average_depth_baseline(train: &[ProfileRecord]) -> Result<DepthSequence, SimgenError> {
    if train.is_empty() {
        return Err(SimgenError::EmptyTrainingSet);
    }
    let mut length_counts: BTreeMap<usize, usize> = BTreeMap::new();
    for record in train {
        *length_counts.entry(record.horizon_count()).or_insert(0) += 1;
    }
    let modal = length_counts
        .iter()
        .max_by(|(la, ca), (lb, cb)| ca.cmp(cb).then_with(|| lb.cmp(la)))
        .map(|(length, _)| *length)
        .unwrap();

    let mut markers = Vec::with_capacity(modal);
    let mut prev = 0.0;
    for position in 0..modal.saturating_sub(1) {
        let values: Vec<f64> = train
            .iter()
            .filter(|r| r.horizon_count() > position)
            .map(|r| r.depths.markers()[position])
            .collect();
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        // Drop positions that would break monotonicity or reach the stop.
        if mean > prev && mean < crate::metrics::STOP_MARKER {
            markers.push(mean);
            prev = mean;
        }
    }
    markers.push(crate::metrics::STOP_MARKER);
    Ok(DepthSequence::new(markers).expect("renormalized markers are valid"))
}

/// Mean stones count over all training stripes, the constant regression
/// baseline.
pub fn average_stones_baseline(train: &[ProfileRecord]) -> Result<f64, SimgenError> {
    let mut sum = 0.0;
    let mut count = 0usize;
    for record in train {
        for stones in &record.stones {
            sum += *stones as f64;
            count += 1;
        }
    }
    if count == 0 {
        return Err(SimgenError::EmptyTrainingSet);
    }
    Ok(sum / count as f64)
}

/// Uniformly random taxonomy leaves; the "random chance" label predictor.
pub fn random_labels(seed: u64, g: &TaxonomyGraph, count: usize) -> Vec<HorizonLabel> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| g.leaf(rng.random_range(0..g.leaf_count())).clone())
        .collect()
}

/// Seeded random permutations of `0..num_classes`, one per requested sample;
/// the "random chance" ranking predictor for categorical features.
pub fn random_class_rankings(seed: u64, num_classes: usize, count: usize) -> Vec<Vec<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let mut ranking: Vec<usize> = (0..num_classes).collect();
            for i in (1..ranking.len()).rev() {
                let j = rng.random_range(0..=i);
                ranking.swap(i, j);
            }
            ranking
        })
        .collect()
}

/// Record indices of the three split parts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl SplitIndices {
    pub fn parts(&self) -> [&[usize]; 3] {
        [&self.train, &self.val, &self.test]
    }
}

/// Greedy multilabel stratified split.
///
/// Exact part sizes come from the fractions by largest remainder. Records are
/// assigned one by one, those carrying the globally rarest labels first; each
/// record goes to the part with the greatest remaining per-label demand
/// (summed over the record's labels and normalized by the part fraction, so
/// all parts compete on equal footing). Ties fall to the part with the most
/// remaining capacity, then to a seeded coin.
pub fn stratified_split(
    records: &[ProfileRecord],
    fractions: (f64, f64, f64),
    seed: u64,
) -> Result<SplitIndices, SimgenError> {
    let parts = [fractions.0, fractions.1, fractions.2];
    if parts.iter().any(|f| !f.is_finite() || *f < 0.0) {
        return Err(SimgenError::InvalidFractions {
            sum: parts.iter().sum(),
        });
    }
    let sum: f64 = parts.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(SimgenError::InvalidFractions { sum });
    }
    if records.is_empty() {
        return Err(SimgenError::TooFewRecords);
    }

    let n = records.len();
    let sizes = apportion(n, &parts);

    // Per-record label sets and global per-label record counts.
    let label_sets: Vec<BTreeSet<String>> = records
        .iter()
        .map(|r| r.horizons.iter().map(|h| h.render()).collect())
        .collect();
    let mut label_counts: BTreeMap<&str, usize> = BTreeMap::new();
    for set in &label_sets {
        for label in set {
            *label_counts.entry(label.as_str()).or_insert(0) += 1;
        }
    }
    // Remaining demand: how many more records with this label each part
    // wants to end up proportional.
    let mut demand: BTreeMap<&str, [f64; 3]> = label_counts
        .iter()
        .map(|(label, count)| (*label, [0, 1, 2].map(|s| parts[s] * *count as f64)))
        .collect();

    // Hardest records first: those containing the rarest label.
    let rarity: Vec<usize> = label_sets
        .iter()
        .map(|set| set.iter().map(|l| label_counts[l.as_str()]).min().unwrap_or(0))
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|idx| (rarity[*idx], *idx));

    let mut capacity = sizes;
    let mut assigned: Vec<Option<usize>> = alloc::vec![None; n];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for idx in order {
        let eligible: Vec<usize> = (0..3).filter(|s| capacity[*s] > 0).collect();
        // capacity > 0 implies a positive fraction, so the division is sound.
        let score = |s: usize| -> f64 {
            label_sets[idx]
                .iter()
                .map(|l| demand[l.as_str()][s])
                .sum::<f64>()
                / parts[s]
        };
        let best = *eligible
            .iter()
            .max_by(|a, b| {
                score(**a)
                    .total_cmp(&score(**b))
                    .then_with(|| capacity[**a].cmp(&capacity[**b]))
            })
            .expect("total capacity equals the number of unassigned records");
        let ties: Vec<usize> = eligible
            .iter()
            .copied()
            .filter(|s| score(*s) == score(best) && capacity[*s] == capacity[best])
            .collect();
        let part = ties[rng.random_range(0..ties.len())];
        assigned[idx] = Some(part);
        capacity[part] -= 1;
        for l in &label_sets[idx] {
            demand.get_mut(l.as_str()).unwrap()[part] -= 1.0;
        }
    }

    let mut split = SplitIndices {
        train: Vec::with_capacity(sizes[0]),
        val: Vec::with_capacity(sizes[1]),
        test: Vec::with_capacity(sizes[2]),
    };
    for (idx, part) in assigned.iter().enumerate() {
        match part.expect("every record was assigned") {
            0 => split.train.push(idx),
            1 => split.val.push(idx),
            _ => split.test.push(idx),
        }
    }
    Ok(split)
}

/// Largest-remainder apportionment of `n` into three integer sizes.
fn apportion(n: usize, fractions: &[f64; 3]) -> [usize; 3] {
    let raw = fractions.map(|f| f * n as f64);
    let mut sizes = raw.map(|r| r as usize);
    let mut leftover = n - sizes.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|a, b| {
        let ra = raw[*a] - sizes[*a] as f64;
        let rb = raw[*b] - sizes[*b] as f64;
        rb.total_cmp(&ra).then_with(|| a.cmp(b))
    });
    for s in order {
        if leftover == 0 {
            break;
        }
        sizes[s] += 1;
        leftover -= 1;
    }
    sizes
}

/// Worst per-label presence-frequency deviation between any split part and
/// the whole record set. Lower is better stratified.
pub fn split_label_deviation(records: &[ProfileRecord], split: &SplitIndices) -> f64 {
    let label_sets: Vec<BTreeSet<String>> = records
        .iter()
        .map(|r| r.horizons.iter().map(|h| h.render()).collect())
        .collect();
    let mut labels: BTreeSet<&str> = BTreeSet::new();
    for set in &label_sets {
        labels.extend(set.iter().map(|s| s.as_str()));
    }
    let global = |label: &str| {
        label_sets.iter().filter(|s| s.contains(label)).count() as f64 / records.len() as f64
    };
    let mut worst: f64 = 0.0;
    for label in labels {
        let g = global(label);
        for part in split.parts() {
            if part.is_empty() {
                continue;
            }
            let freq = part
                .iter()
                .filter(|idx| label_sets[**idx].contains(label))
                .count() as f64
                / part.len() as f64;
            worst = worst.max(math::abs(freq - g));
        }
    }
    worst
}
