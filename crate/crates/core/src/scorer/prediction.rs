use serde::{Deserialize, Serialize};

use super::math::{decode_best_span, entropy_unchecked, validate_distribution};
use crate::corpus::ContextDoc;
use crate::{Error, Result, Scalar};

/// Start/end distributions over a context's tokens and the decoded span.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpanPrediction<T> {
    pub start_probs: Vec<T>,
    pub end_probs: Vec<T>,
    /// Inclusive token indices.
    pub best_span: (usize, usize),
    pub answer_text: String,
}

impl<T: Scalar> SpanPrediction<T> {
    /// Validates both distributions against `doc` and decodes the best span.
    pub fn from_distributions(
        start_probs: Vec<T>,
        end_probs: Vec<T>,
        doc: &ContextDoc,
        max_span_len: usize,
    ) -> Result<Self> {
        let n = doc.n_tokens();
        if start_probs.len() != n || end_probs.len() != n {
            return Err(Error::Shape(format!(
                "context {} has {n} tokens but got {} start / {} end probabilities",
                doc.doc_id,
                start_probs.len(),
                end_probs.len()
            )));
        }
        validate_distribution(&start_probs)?;
        validate_distribution(&end_probs)?;
        let best_span = decode_best_span(&start_probs, &end_probs, max_span_len)?;
        let answer_text = doc
            .token_span_text(best_span.0, best_span.1)
            .expect("decoded span lies inside the document")
            .to_string();
        Ok(Self {
            start_probs,
            end_probs,
            best_span,
            answer_text,
        })
    }

    /// Mean of the start and end entropies, in nats.
    pub fn uncertainty(&self) -> T {
        uncertainty(self)
    }
}

/// Mean of the start and end entropies, in nats.
pub fn uncertainty<T: Scalar>(pred: &SpanPrediction<T>) -> T {
    (entropy_unchecked(&pred.start_probs) + entropy_unchecked(&pred.end_probs)) / T::of(2.0)
}
