//! Rare-label clustering: map labels with too few samples onto the retained
//! label set by minimum edit distance, with an override table for corrections
//! that distance alone gets wrong.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use crate::grammar::HorizonLabel;

/// Labels need strictly more samples than this to be retained by default.
pub const DEFAULT_THRESHOLD: u64 = 10;

/// Levenshtein distance: the minimum number of character insertions,
/// deletions and substitutions transforming `a` into `b`.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    // Single-row DP over b.
    let mut row: Vec<usize> = (0..=b.len()).collect();
    for (i, ca) in a.iter().enumerate() {
        let mut diagonal = row[0];
        row[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let substitution = diagonal + usize::from(ca != cb);
            diagonal = row[j + 1];
            row[j + 1] = substitution.min(diagonal + 1).min(row[j] + 1);
        }
    }
    row[b.len()]
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ClusterError {
    #[error("no label has more than {threshold} samples")]
    EmptyRetainedSet { threshold: u64 },
    #[error("override target \"{target}\" is not a retained label")]
    OverrideTargetNotRetained { target: String },
    #[error("override source \"{label}\" is itself retained")]
    OverrideSourceRetained { label: String },
}

/// The rare-to-retained mapping. Retained labels map to themselves, so
/// applying the map is idempotent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterMap {
    threshold: u64,
    retained: BTreeSet<String>,
    mapping: BTreeMap<String, String>,
    overrides: BTreeMap<String, String>,
}

impl ClusterMap {
    pub fn threshold(&self) -> u64 {
        self.threshold
    }

    pub fn retained(&self) -> impl Iterator<Item = &str> + '_ {
        self.retained.iter().map(|s| s.as_str())
    }

    pub fn retained_count(&self) -> usize {
        self.retained.len()
    }

    pub fn is_retained(&self, rendered: &str) -> bool {
        self.retained.contains(rendered)
    }

    /// Full mapping including the identity entries for retained labels.
    pub fn mapping(&self) -> &BTreeMap<String, String> {
        &self.mapping
    }

    /// Overrides that replaced distance-based targets.
    pub fn overrides(&self) -> &BTreeMap<String, String> {
        &self.overrides
    }

    /// Retained label a rendered label maps to, if the label was seen when
    /// the map was built.
    pub fn apply(&self, rendered: &str) -> Option<&str> {
        self.mapping.get(rendered).map(|s| s.as_str())
    }
}

/// Builds the cluster map from per-label sample counts.
///
/// Labels with `count > threshold` form the retained set; every other label
/// maps to the retained label at minimum Levenshtein distance over rendered
/// strings. Ties prefer a candidate sharing the rare label's main symbol,
/// then the higher sample count, then the lexicographically smaller label.
/// Overrides are applied last and must target retained labels.
pub fn build_cluster_map(
    counts: &[(HorizonLabel, u64)],
    threshold: u64,
    overrides: &[(HorizonLabel, HorizonLabel)],
) -> Result<ClusterMap, ClusterError> {
    // Aggregate duplicate rows.
    let mut totals: BTreeMap<String, u64> = BTreeMap::new();
    let mut mains: BTreeMap<String, char> = BTreeMap::new();
    for (label, count) in counts {
        let rendered = label.render();
        *totals.entry(rendered.clone()).or_insert(0) += count;
        mains.insert(rendered, label.main_symbol().as_char());
    }

    let retained: BTreeSet<String> = totals
        .iter()
        .filter(|(_, count)| **count > threshold)
        .map(|(label, _)| label.clone())
        .collect();
    if retained.is_empty() {
        return Err(ClusterError::EmptyRetainedSet { threshold });
    }

    let mut mapping = BTreeMap::new();
    for rendered in totals.keys() {
        if retained.contains(rendered) {
            mapping.insert(rendered.clone(), rendered.clone());
            continue;
        }
        let rare_main = mains[rendered];
        let target = retained
            .iter()
            .min_by(|a, b| {
                let da = levenshtein(rendered, a);
                let db = levenshtein(rendered, b);
                da.cmp(&db)
                    .then_with(|| {
                        let share_a = mains[*a] == rare_main;
                        let share_b = mains[*b] == rare_main;
                        share_b.cmp(&share_a)
                    })
                    .then_with(|| totals[*b].cmp(&totals[*a]))
                    .then_with(|| a.cmp(b))
            })
            .expect("retained set is non-empty");
        mapping.insert(rendered.clone(), target.clone());
    }

    let mut applied = BTreeMap::new();
    for (source, target) in overrides {
        let (source, target) = (source.render(), target.render());
        if !retained.contains(&target) {
            return Err(ClusterError::OverrideTargetNotRetained { target });
        }
        if retained.contains(&source) {
            return Err(ClusterError::OverrideSourceRetained { label: source });
        }
        mapping.insert(source.clone(), target.clone());
        applied.insert(source, target);
    }

    Ok(ClusterMap {
        threshold,
        retained,
        mapping,
        overrides: applied,
    })
}
