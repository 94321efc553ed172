//! Unit-sphere label embeddings whose inner products reproduce the taxonomy
//! similarities.
//!
//! Non-mixture leaves are placed one at a time in leaf order. Placing leaf `k`
//! solves the lower-triangular system `column_k · column_j = similarity(k, j)`
//! for all previously placed `j` by forward substitution over the first `k-1`
//! coordinates, then spends coordinate `k` on restoring unit norm. Mixture
//! columns are normalized weighted sums of their member columns, weighting the
//! second (dominant) member twice as much.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::grammar::HorizonLabel;
use crate::math;
use crate::taxonomy::{PairRelation, TaxonomyGraph};

/// Radicands in `[-NEGATIVE_RADICAND_TOLERANCE, 0]` are treated as float noise
/// and clamped to zero; anything below means the requested similarities are
/// inconsistent.
pub const NEGATIVE_RADICAND_TOLERANCE: f64 = 1e-9;

/// Pivots smaller than this abort the forward substitution.
pub const PIVOT_TOLERANCE: f64 = 1e-12;

const MIXTURE_FIRST_WEIGHT: f64 = 1.0 / 3.0;
const MIXTURE_SECOND_WEIGHT: f64 = 2.0 / 3.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EmbedError {
    #[error("hierarchy infeasible at \"{label}\" (strongest conflict with \"{conflicting}\", radicand {radicand:e})")]
    InfeasibleHierarchy {
        label: String,
        conflicting: String,
        radicand: f64,
    },
    #[error("singular step while placing \"{label}\": pivot of \"{pivot_label}\" is {pivot:e}")]
    SingularStep {
        label: String,
        pivot_label: String,
        pivot: f64,
    },
    #[error("mixture parent \"{label}\" is not an embedded non-mixture column")]
    ParentNotEmbedded { label: String },
    #[error("mixture parents share the main symbol '{symbol}'")]
    SameMainSymbol { symbol: char },
    #[error("invalid embedding matrix: {reason}")]
    InvalidMatrix { reason: String },
}

/// Dense `dim x N` matrix of unit-norm label embeddings, one column per leaf
/// in leaf order.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    dim: usize,
    labels: Vec<HorizonLabel>,
    rendered: Vec<String>,
    index: BTreeMap<String, usize>,
    columns: Vec<Vec<f64>>,
    non_mixture_count: usize,
}

impl EmbeddingMatrix {
    /// Assembles a matrix from raw columns, e.g. when importing a file.
    ///
    /// Columns are stored verbatim so that exports and re-imports round-trip
    /// bit-identically.
    pub fn from_columns(labels: Vec<HorizonLabel>, columns: Vec<Vec<f64>>) -> Result<Self, EmbedError> {
        if labels.is_empty() || labels.len() != columns.len() {
            return Err(EmbedError::InvalidMatrix {
                reason: alloc::format!(
                    "{} labels vs {} columns",
                    labels.len(),
                    columns.len()
                ),
            });
        }
        let dim = columns[0].len();
        if dim == 0 {
            return Err(EmbedError::InvalidMatrix {
                reason: "zero-dimensional columns".to_string(),
            });
        }
        let mut index = BTreeMap::new();
        let mut rendered = Vec::with_capacity(labels.len());
        for (i, (label, column)) in labels.iter().zip(&columns).enumerate() {
            if column.len() != dim {
                return Err(EmbedError::InvalidMatrix {
                    reason: alloc::format!(
                        "column \"{}\" has {} coordinates, expected {dim}",
                        label.render(),
                        column.len()
                    ),
                });
            }
            if column.iter().any(|x| !x.is_finite()) {
                return Err(EmbedError::InvalidMatrix {
                    reason: alloc::format!("column \"{}\" has non-finite coordinates", label.render()),
                });
            }
            if column.iter().all(|x| *x == 0.0) {
                return Err(EmbedError::InvalidMatrix {
                    reason: alloc::format!("column \"{}\" is all zeros", label.render()),
                });
            }
            let key = label.render();
            if index.insert(key.clone(), i).is_some() {
                return Err(EmbedError::InvalidMatrix {
                    reason: alloc::format!("duplicate label \"{key}\""),
                });
            }
            rendered.push(key);
        }
        let non_mixture_count = labels.iter().filter(|l| !l.is_mixture()).count();
        Ok(EmbeddingMatrix {
            dim,
            labels,
            rendered,
            index,
            columns,
            non_mixture_count,
        })
    }

    /// Embedding dimension (number of non-mixture leaves for built matrices).
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of columns.
    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    /// `(dim, columns)`, e.g. `(61, 99)` for the shipped default taxonomy.
    pub fn shape(&self) -> (usize, usize) {
        (self.dim, self.columns.len())
    }

    pub fn non_mixture_count(&self) -> usize {
        self.non_mixture_count
    }

    pub fn label(&self, index: usize) -> &HorizonLabel {
        &self.labels[index]
    }

    pub fn rendered(&self, index: usize) -> &str {
        &self.rendered[index]
    }

    pub fn labels(&self) -> &[HorizonLabel] {
        &self.labels
    }

    pub fn column(&self, index: usize) -> &[f64] {
        &self.columns[index]
    }

    pub fn index_of(&self, rendered: &str) -> Option<usize> {
        self.index.get(rendered).copied()
    }

    pub fn column_of(&self, label: &HorizonLabel) -> Option<&[f64]> {
        self.index_of(&label.render()).map(|i| self.column(i))
    }

    pub fn dot(&self, i: usize, j: usize) -> f64 {
        math::dot(&self.columns[i], &self.columns[j])
    }

    pub fn norm(&self, i: usize) -> f64 {
        math::norm(&self.columns[i])
    }
}

/// Places one new column against already placed triangular columns.
///
/// `prior[j]` must have zeros above coordinate `j`; `targets[j]` is the
/// required inner product with `prior[j]`. The new column uses coordinate
/// `prior.len()` for the unit-norm remainder, keeping the block triangular.
fn place_column(dim: usize, prior: &[Vec<f64>], targets: &[f64]) -> Result<Vec<f64>, PlacementError> {
    debug_assert_eq!(prior.len(), targets.len());
    let k = prior.len();
    debug_assert!(k < dim);
    let mut coords = alloc::vec![0.0; dim];
    for j in 0..k {
        let partial = math::dot(&coords[..j], &prior[j][..j]);
        let pivot = prior[j][j];
        if math::abs(pivot) < PIVOT_TOLERANCE {
            return Err(PlacementError::Singular { step: j, pivot });
        }
        coords[j] = (targets[j] - partial) / pivot;
    }
    let radicand = 1.0 - math::dot(&coords[..k], &coords[..k]);
    if radicand < -NEGATIVE_RADICAND_TOLERANCE {
        // Report the dominant constraint as the conflict.
        let worst = (0..k)
            .max_by(|a, b| math::abs(coords[*a]).total_cmp(&math::abs(coords[*b])))
            .unwrap_or(0);
        return Err(PlacementError::Infeasible { step: worst, radicand });
    }
    coords[k] = math::sqrt(radicand.max(0.0));
    Ok(coords)
}

#[derive(Debug)]
enum PlacementError {
    Singular { step: usize, pivot: f64 },
    Infeasible { step: usize, radicand: f64 },
}

/// Builds the full embedding matrix for a taxonomy.
///
/// Non-mixture leaves are processed in leaf order; mixture columns are
/// appended afterwards from their member columns.
pub fn embed_taxonomy(g: &TaxonomyGraph) -> Result<EmbeddingMatrix, EmbedError> {
    let dim = g.non_mixture_count();
    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(g.leaf_count());
    for k in 0..dim {
        let targets: Vec<f64> = (0..k).map(|j| g.required_similarity_by_pos(k, j)).collect();
        let column = place_column(dim, &columns, &targets).map_err(|e| match e {
            PlacementError::Singular { step, pivot } => EmbedError::SingularStep {
                label: g.leaf(k).render(),
                pivot_label: g.leaf(step).render(),
                pivot,
            },
            PlacementError::Infeasible { step, radicand } => EmbedError::InfeasibleHierarchy {
                label: g.leaf(k).render(),
                conflicting: g.leaf(step).render(),
                radicand,
            },
        })?;
        columns.push(column);
    }
    for pos in dim..g.leaf_count() {
        let (m1, m2) = g
            .member_positions(pos)
            .expect("leaves after the non-mixture block are mixtures");
        let column = combine_members(&columns[m1], &columns[m2]);
        columns.push(column);
    }
    let labels: Vec<HorizonLabel> = g.leaf_labels().cloned().collect();
    EmbeddingMatrix::from_columns(labels, columns)
}

fn combine_members(first: &[f64], second: &[f64]) -> Vec<f64> {
    let mut column: Vec<f64> = first
        .iter()
        .zip(second)
        .map(|(a, b)| MIXTURE_FIRST_WEIGHT * a + MIXTURE_SECOND_WEIGHT * b)
        .collect();
    let norm = math::norm(&column);
    for x in &mut column {
        *x /= norm;
    }
    column
}

/// Embedding of a mixture from two embedded non-mixture parents: the
/// normalized sum of one part first parent and two parts second parent. For
/// orthogonal parents this equals `(first + 2 * second) / sqrt(5)`.
pub fn mixture_embedding(
    matrix: &EmbeddingMatrix,
    parent1: &HorizonLabel,
    parent2: &HorizonLabel,
) -> Result<Vec<f64>, EmbedError> {
    let resolve = |parent: &HorizonLabel| {
        if parent.is_mixture() {
            return Err(EmbedError::ParentNotEmbedded {
                label: parent.render(),
            });
        }
        matrix
            .column_of(parent)
            .ok_or_else(|| EmbedError::ParentNotEmbedded {
                label: parent.render(),
            })
    };
    let first = resolve(parent1)?;
    let second = resolve(parent2)?;
    if parent1.main_symbol() == parent2.main_symbol() {
        return Err(EmbedError::SameMainSymbol {
            symbol: parent1.main_symbol().as_char(),
        });
    }
    Ok(combine_members(first, second))
}

/// Deviation statistics for one pair relation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CaseStats {
    pub pairs: usize,
    pub max_deviation: f64,
    pub worst_pair: Option<(String, String)>,
}

/// Result of checking every leaf-pair inner product against its target.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentityReport {
    pub tolerance: f64,
    pub cases: BTreeMap<PairRelation, CaseStats>,
    pub max_deviation: f64,
    pub worst_pair: Option<(String, String)>,
    /// Pairs whose deviation exceeds the tolerance.
    pub violations: usize,
    pub max_norm_deviation: f64,
    /// Matrix labels that could not be resolved in the taxonomy.
    pub unmatched_labels: Vec<String>,
}

impl IdentityReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
            && self.max_norm_deviation <= self.tolerance
            && self.unmatched_labels.is_empty()
    }
}

/// Compares every unordered leaf pair's inner product with the closed-form
/// target and every column norm with 1. Violations are reported, not thrown.
pub fn verify_identities(matrix: &EmbeddingMatrix, g: &TaxonomyGraph, tolerance: f64) -> IdentityReport {
    let mut report = IdentityReport {
        tolerance,
        cases: BTreeMap::new(),
        max_deviation: 0.0,
        worst_pair: None,
        violations: 0,
        max_norm_deviation: 0.0,
        unmatched_labels: Vec::new(),
    };
    let mut positions: Vec<Option<usize>> = Vec::with_capacity(matrix.len());
    for i in 0..matrix.len() {
        let pos = g.leaf_position(matrix.rendered(i));
        if pos.is_none() {
            report.unmatched_labels.push(matrix.rendered(i).to_string());
        }
        positions.push(pos);
        let norm_dev = math::abs(matrix.norm(i) - 1.0);
        if norm_dev > report.max_norm_deviation {
            report.max_norm_deviation = norm_dev;
        }
    }
    for i in 0..matrix.len() {
        let Some(pi) = positions[i] else { continue };
        #[allow(clippy::needless_range_loop)]
        for j in (i + 1)..matrix.len() {
            let Some(pj) = positions[j] else { continue };
            let relation = g.pair_relation_by_pos(pi, pj);
            let expected = g.required_similarity_by_pos(pi, pj);
            let deviation = math::abs(matrix.dot(i, j) - expected);
            let stats = report.cases.entry(relation).or_default();
            stats.pairs += 1;
            if deviation > stats.max_deviation {
                stats.max_deviation = deviation;
                stats.worst_pair = Some((matrix.rendered(i).to_string(), matrix.rendered(j).to_string()));
            }
            if deviation > report.max_deviation {
                report.max_deviation = deviation;
                report.worst_pair = Some((matrix.rendered(i).to_string(), matrix.rendered(j).to_string()));
            }
            if deviation > tolerance {
                report.violations += 1;
            }
        }
    }
    report
}
