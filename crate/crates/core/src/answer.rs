//! Base QA predictions and their scoring against gold answers.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::backend::{QaBackend, QaRequest};
use crate::corpus::QaInstance;
use crate::error::{Error, Result};
use crate::scoring::{self, MatchResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerCandidate {
    pub instance_id: String,
    pub text: String,
    /// Char span in the context, `-1` when the backend gave none.
    pub char_start: i64,
    pub char_end: i64,
    pub p_qa: f64,
    #[serde(default)]
    pub top5: Vec<f64>,
    pub backend_id: String,
}

impl AnswerCandidate {
    pub fn span(&self) -> Option<(usize, usize)> {
        (self.char_start >= 0 && self.char_end > self.char_start)
            .then_some((self.char_start as usize, self.char_end as usize))
    }
}

/// The instance metadata travels with the request. The first gold answer is
/// added as `gold`/`gold_start`/`gold_end` unless already set; model
/// backends ignore it and the mock answers with it.
pub fn qa_request(instance: &QaInstance) -> QaRequest {
    let mut meta = instance.meta.clone();
    if let Some(gold) = instance.gold_answers.first() {
        if !meta.contains_key("gold") {
            meta.insert("gold".into(), gold.text.clone());
            meta.insert("gold_start".into(), gold.start.to_string());
            meta.insert("gold_end".into(), gold.end.to_string());
        }
    }
    QaRequest {
        question: instance.question.clone(),
        context: instance.context.clone(),
        meta,
    }
}

/// One base-QA prediction.
pub fn answer_one(instance: &QaInstance, backend: &dyn QaBackend) -> Result<AnswerCandidate> {
    let resp = backend.answer(&qa_request(instance))?;
    if !resp.p.is_finite() || !(0.0..=1.0).contains(&resp.p) {
        return Err(Error::backend(
            resp.backend_id,
            format!("answer confidence {} outside [0, 1] for `{}`", resp.p, instance.id),
            false,
        ));
    }
    Ok(AnswerCandidate {
        instance_id: instance.id.clone(),
        text: resp.span_text,
        char_start: resp.char_start,
        char_end: resp.char_end,
        p_qa: resp.p,
        top5: resp.top5,
        backend_id: resp.backend_id,
    })
}

/// Runs the base QA model over every instance; output order follows input.
pub fn answer_instances(
    instances: &[QaInstance],
    backend: &dyn QaBackend,
) -> Result<Vec<AnswerCandidate>> {
    instances
        .par_iter()
        .map(|inst| answer_one(inst, backend))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerScore {
    pub instance_id: String,
    pub prediction: String,
    #[serde(flatten)]
    pub result: MatchResult,
}

/// Index by id, failing on duplicates.
pub fn index_by_id<T>(
    items: &[T],
    id: impl Fn(&T) -> &str,
) -> Result<HashMap<&str, &T>> {
    let mut map = HashMap::with_capacity(items.len());
    for item in items {
        if map.insert(id(item), item).is_some() {
            return Err(Error::Validation {
                id: id(item).to_string(),
                message: "duplicate id".into(),
            });
        }
    }
    Ok(map)
}

/// Scores predictions against golds. Every instance needs a prediction.
pub fn score_answers(
    instances: &[QaInstance],
    candidates: &[AnswerCandidate],
) -> Result<Vec<AnswerScore>> {
    let by_id = index_by_id(candidates, |c| c.instance_id.as_str())?;
    let missing: Vec<String> = instances
        .iter()
        .filter(|i| !by_id.contains_key(i.id.as_str()))
        .map(|i| i.id.clone())
        .collect();
    if !missing.is_empty() {
        return Err(Error::Join { missing });
    }
    Ok(instances
        .iter()
        .map(|inst| {
            let cand = by_id[inst.id.as_str()];
            let golds: Vec<&str> = inst.gold_answers.iter().map(|g| g.text.as_str()).collect();
            AnswerScore {
                instance_id: inst.id.clone(),
                prediction: cand.text.clone(),
                result: scoring::match_answer(&cand.text, &golds),
            }
        })
        .collect())
}
