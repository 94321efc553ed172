//! Nearest-embedding decoding: turn a predicted embedding vector into a
//! ranking of all labels by cosine similarity.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::embed::EmbeddingMatrix;
use crate::math;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DecodeError {
    #[error("prediction vector has length {got}, embedding dimension is {expected}")]
    DimensionMismatch { got: usize, expected: usize },
    #[error("prediction vector has zero norm")]
    ZeroVector,
    #[error("prediction vector has non-finite coordinates")]
    NonFiniteVector,
    #[error("k = {k} is out of range 1..={n}")]
    KOutOfRange { k: usize, n: usize },
}

/// One entry of a ranking.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedLabel {
    pub label: String,
    pub score: f64,
}

/// A decoded prediction: the input vector and all labels ranked by descending
/// cosine similarity, ties broken by leaf order.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub vector: Vec<f64>,
    pub ranked: Vec<RankedLabel>,
}

impl Prediction {
    /// Highest-ranked label.
    pub fn best(&self) -> &RankedLabel {
        &self.ranked[0]
    }

    /// The first `k` ranked labels.
    pub fn top_k(&self, k: usize) -> Result<Vec<&str>, DecodeError> {
        if k == 0 || k > self.ranked.len() {
            return Err(DecodeError::KOutOfRange {
                k,
                n: self.ranked.len(),
            });
        }
        Ok(self.ranked[..k].iter().map(|r| r.label.as_str()).collect())
    }
}

/// Ranks every matrix column against `vector` by cosine similarity.
///
/// The score is scale-free, so any positive rescaling of `vector` produces
/// the same ranking. Ties are broken by leaf order, keeping batch runs
/// reproducible.
pub fn rank_labels(matrix: &EmbeddingMatrix, vector: &[f64]) -> Result<Prediction, DecodeError> {
    if vector.len() != matrix.dim() {
        return Err(DecodeError::DimensionMismatch {
            got: vector.len(),
            expected: matrix.dim(),
        });
    }
    if vector.iter().any(|x| !x.is_finite()) {
        return Err(DecodeError::NonFiniteVector);
    }
    let norm = math::norm(vector);
    if norm == 0.0 {
        return Err(DecodeError::ZeroVector);
    }
    let mut order: Vec<(usize, f64)> = (0..matrix.len())
        .map(|i| {
            let column = matrix.column(i);
            let score = math::dot(column, vector) / (norm * math::norm(column));
            (i, score)
        })
        .collect();
    order.sort_by(|(i, a), (j, b)| b.total_cmp(a).then_with(|| i.cmp(j)));
    Ok(Prediction {
        vector: vector.to_vec(),
        ranked: order
            .into_iter()
            .map(|(i, score)| RankedLabel {
                label: matrix.rendered(i).to_string(),
                score,
            })
            .collect(),
    })
}

/// Free-function form of [`Prediction::top_k`].
pub fn top_k(prediction: &Prediction, k: usize) -> Result<Vec<&str>, DecodeError> {
    prediction.top_k(k)
}
