//! Entailment scoring of (premise, hypothesis) pairs through an NLI backend.

use serde::{Deserialize, Serialize};

use crate::backend::{NliBackend, NliRequest, NliResponse};
use crate::error::{Error, Result};

const SUM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntailmentScore {
    pub p_entail: f64,
    pub p_neutral: f64,
    pub p_contradiction: f64,
    pub backend_id: String,
}

impl EntailmentScore {
    /// Validates and, if needed, renormalizes a three-way distribution.
    pub fn new(
        p_entail: f64,
        p_neutral: f64,
        p_contradiction: f64,
        backend_id: impl Into<String>,
    ) -> Result<Self> {
        let backend_id = backend_id.into();
        let probs = [p_entail, p_neutral, p_contradiction];
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::backend(
                &backend_id,
                format!("invalid NLI probabilities {probs:?}"),
                false,
            ));
        }
        let sum: f64 = probs.iter().sum();
        if sum <= 0.0 {
            return Err(Error::backend(&backend_id, "NLI probabilities sum to zero", false));
        }
        let mut score = Self {
            p_entail,
            p_neutral,
            p_contradiction,
            backend_id,
        };
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            log::warn!(
                "{}: NLI probabilities sum to {sum}, renormalizing",
                score.backend_id
            );
            score.p_entail /= sum;
            score.p_neutral /= sum;
            score.p_contradiction /= sum;
        }
        Ok(score)
    }

    /// Two-class model: the non-entailed mass goes to `p_contradiction`.
    pub fn binary(p_entail: f64, backend_id: impl Into<String>) -> Result<Self> {
        Self::new(p_entail, 0.0, 1.0 - p_entail, backend_id)
    }

    pub fn from_response(resp: &NliResponse) -> Result<Self> {
        Self::new(
            resp.p_entail,
            resp.p_neutral,
            resp.p_contradiction,
            resp.backend_id.clone(),
        )
    }

    /// Argmax decision: entailment beats both other classes.
    pub fn accepts(&self) -> bool {
        self.p_entail > self.p_neutral.max(self.p_contradiction)
    }

    pub fn accepts_at(&self, threshold: f64) -> bool {
        self.p_entail >= threshold
    }
}

pub fn score(premise: &str, hypothesis: &str, backend: &dyn NliBackend) -> Result<EntailmentScore> {
    let resp = backend.nli(&NliRequest {
        premise: premise.to_string(),
        hypothesis: hypothesis.to_string(),
    })?;
    EntailmentScore::from_response(&resp)
}

/// Scores many pairs with one batched backend call.
pub fn score_batch(
    pairs: &[(String, String)],
    backend: &dyn NliBackend,
) -> Result<Vec<EntailmentScore>> {
    let reqs: Vec<NliRequest> = pairs
        .iter()
        .map(|(premise, hypothesis)| NliRequest {
            premise: premise.clone(),
            hypothesis: hypothesis.clone(),
        })
        .collect();
    backend
        .nli_batch(&reqs)?
        .iter()
        .map(EntailmentScore::from_response)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::MockBackend;

    #[test]
    fn renormalizes_off_by_more_than_tolerance() {
        let s = EntailmentScore::new(0.5, 0.5, 0.5, "x").unwrap();
        assert!((s.p_entail - 1.0 / 3.0).abs() < 1e-12);
        let s = EntailmentScore::new(0.2, 0.3, 0.5 + 1e-9, "x").unwrap();
        assert_eq!(s.p_contradiction, 0.5 + 1e-9);
    }

    #[test]
    fn rejects_nan_and_negative() {
        assert!(EntailmentScore::new(f64::NAN, 0.5, 0.5, "x").is_err());
        assert!(EntailmentScore::new(-0.1, 0.6, 0.5, "x").is_err());
        assert!(EntailmentScore::new(0.0, 0.0, 0.0, "x").is_err());
    }

    #[test]
    fn binary_and_decisions() {
        let s = EntailmentScore::binary(0.7, "b").unwrap();
        assert!(s.accepts());
        assert!(s.accepts_at(0.7));
        assert!(!s.accepts_at(0.8));
        assert_eq!(s.p_neutral, 0.0);
        assert!(EntailmentScore::new(0.6, 0.3, 0.1, "x").unwrap().accepts());
        assert!(!EntailmentScore::new(0.3, 0.4, 0.3, "x").unwrap().accepts());
        let third = 1.0 / 3.0;
        assert!(!EntailmentScore::new(third, third, third, "x").unwrap().accepts());
    }

    #[test]
    fn mock_scores_identity_as_entailed() {
        let s = score("Ted Danson plays Michael.", "Ted Danson plays Michael.", &MockBackend).unwrap();
        assert_eq!(s.p_entail, 1.0);
        assert_eq!(s.backend_id, "mock");
        let batch = score_batch(
            &[("a b".into(), "a".into()), ("cats".into(), "dogs".into())],
            &MockBackend,
        )
        .unwrap();
        assert!(batch[0].accepts());
        assert!(!batch[1].accepts());
    }
}
