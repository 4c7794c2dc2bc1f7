//! Deterministic stand-ins for the four model backends.
//!
//! These rules are part of the wire contract: the model server's mock mode
//! must reproduce them bit for bit (see `tests/data/mock_golden.jsonl`).

use crate::error::{Error, Result};
use crate::text;

use super::wire::*;
use super::{ConvertBackend, DecontextBackend, NliBackend, QaBackend};

pub const MOCK_ID: &str = "mock";
pub const MOCK_MODEL: &str = "mock";
pub const MOCK_VERSION: &str = "1";

pub const MOCK_P_RIGHT: f64 = 0.9;
pub const MOCK_P_WRONG: f64 = 0.6;
pub const MOCK_WRONG_ANSWER: &str = "unknown";

#[derive(Debug, Clone, Copy, Default)]
pub struct MockBackend;

fn top5(p: f64) -> Vec<f64> {
    let rest = 1.0 - p;
    vec![p, rest / 2.0, rest / 4.0, rest / 8.0, rest / 16.0]
}

/// First run of capitalized whitespace tokens, trailing punctuation trimmed.
/// Returns the char span.
fn first_capitalized_run(context: &str) -> Option<(usize, usize)> {
    let chars: Vec<char> = context.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if chars[i].is_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        while i < chars.len() && !chars[i].is_whitespace() {
            i += 1;
        }
        tokens.push((start, i));
    }
    let is_cap = |(s, _): (usize, usize)| chars[s].is_uppercase();
    let trim_end = |(s, mut e): (usize, usize)| {
        while e > s && !chars[e - 1].is_alphanumeric() {
            e -= 1;
        }
        (s, e)
    };
    let first = tokens.iter().position(|t| is_cap(*t))?;
    let mut end_tok = first;
    while end_tok + 1 < tokens.len() && is_cap(tokens[end_tok + 1]) {
        let (_, e) = tokens[end_tok];
        if !chars[e - 1].is_alphanumeric() {
            break;
        }
        end_tok += 1;
    }
    let (s, _) = tokens[first];
    let (_, e) = trim_end(tokens[end_tok]);
    (e > s).then_some((s, e))
}

fn gold_from_meta(req: &QaRequest) -> Option<(String, i64, i64)> {
    let gold = req.meta.get("gold")?;
    let start = req.meta.get("gold_start").and_then(|s| s.parse::<i64>().ok());
    let end = req.meta.get("gold_end").and_then(|s| s.parse::<i64>().ok());
    match (start, end) {
        (Some(s), Some(e)) if s >= 0 && e > s => Some((gold.clone(), s, e)),
        _ => match text::find_case_insensitive(&req.context, gold) {
            Some((s, e)) => Some((gold.clone(), s as i64, e as i64)),
            None => Some((gold.clone(), -1, -1)),
        },
    }
}

impl MockBackend {
    fn response_qa(span_text: String, start: i64, end: i64, p: f64) -> QaResponse {
        QaResponse {
            backend_id: MOCK_ID.into(),
            model: MOCK_MODEL.into(),
            version: MOCK_VERSION.into(),
            span_text,
            char_start: start,
            char_end: end,
            p,
            top5: top5(p),
            warnings: Vec::new(),
        }
    }
}

impl QaBackend for MockBackend {
    fn backend_id(&self) -> String {
        MOCK_ID.into()
    }

    /// `mock_answer=wrong` yields a fixed wrong string at p=0.6; otherwise the
    /// first gold from the metadata, or else the first capitalized token run,
    /// at p=0.9.
    fn answer(&self, req: &QaRequest) -> Result<QaResponse> {
        if req.meta.get("mock_answer").map(String::as_str) == Some("wrong") {
            return Ok(Self::response_qa(MOCK_WRONG_ANSWER.into(), -1, -1, MOCK_P_WRONG));
        }
        if let Some((gold, s, e)) = gold_from_meta(req) {
            return Ok(Self::response_qa(gold, s, e, MOCK_P_RIGHT));
        }
        match first_capitalized_run(&req.context) {
            Some((s, e)) => {
                let span = text::char_slice(&req.context, s, e).unwrap_or_default();
                Ok(Self::response_qa(span.into(), s as i64, e as i64, MOCK_P_RIGHT))
            }
            None => Ok(Self::response_qa(String::new(), -1, -1, MOCK_P_RIGHT)),
        }
    }
}

const MOCK_CONNECTIVES: [&str; 3] = ["", "indeed ", "reportedly "];
const LEADING_WH: &[&str] = &[
    "who", "what", "when", "where", "which", "why", "whose", "whom", "how",
];

/// `ANSWER [connective] VERB-PHRASE.` where the verb phrase is the question
/// minus its wh-word and the connective is picked by an FNV-1a hash of the
/// request.
pub fn mock_convert_text(question: &str, answer: &str) -> String {
    let q = question.trim().trim_end_matches('?').trim();
    let mut tokens: Vec<&str> = q.split_whitespace().collect();
    if let Some(first) = tokens.first().map(|t| t.to_lowercase()) {
        if LEADING_WH.contains(&first.as_str()) {
            tokens.remove(0);
            if first == "how"
                && tokens
                    .first()
                    .is_some_and(|t| matches!(t.to_lowercase().as_str(), "many" | "much" | "old" | "long"))
            {
                tokens.remove(0);
            }
        }
    }
    let key = format!("{question}\u{1f}{answer}");
    let connective = MOCK_CONNECTIVES[(text::fnv1a64(key.as_bytes()) % 3) as usize];
    if tokens.is_empty() {
        format!("{answer}.")
    } else {
        format!("{answer} {connective}{}.", tokens.join(" "))
    }
}

impl ConvertBackend for MockBackend {
    fn backend_id(&self) -> String {
        MOCK_ID.into()
    }

    fn convert(&self, req: &ConvertRequest) -> Result<ConvertResponse> {
        Ok(ConvertResponse {
            backend_id: MOCK_ID.into(),
            model: MOCK_MODEL.into(),
            version: MOCK_VERSION.into(),
            text: mock_convert_text(&req.question, &req.answer),
        })
    }
}

impl DecontextBackend for MockBackend {
    fn backend_id(&self) -> String {
        MOCK_ID.into()
    }

    /// Prefixes the title (`"<title>: <sentence>"`). Single-sentence contexts,
    /// empty titles, and sentences already naming the title are `unnecessary`.
    fn decontext(&self, req: &DecontextRequest) -> Result<DecontextResponse> {
        let target = req.sentences.get(req.target_index).ok_or_else(|| {
            Error::backend(
                MOCK_ID,
                format!(
                    "target_index {} out of range for {} sentences",
                    req.target_index,
                    req.sentences.len()
                ),
                false,
            )
        })?;
        let title = req.title.trim();
        let (text, category) = if req.sentences.len() <= 1
            || title.is_empty()
            || target.to_lowercase().contains(&title.to_lowercase())
        {
            (target.clone(), DecontextCategory::Unnecessary)
        } else {
            (format!("{title}: {target}"), DecontextCategory::Done)
        };
        Ok(DecontextResponse {
            backend_id: MOCK_ID.into(),
            model: MOCK_MODEL.into(),
            version: MOCK_VERSION.into(),
            text,
            category,
        })
    }
}

/// Content-word Jaccard between hypothesis and premise, raised to 1 when the
/// hypothesis words are contained in the premise; the remainder is split 2:1
/// between neutral and contradiction.
pub fn mock_nli_probs(premise: &str, hypothesis: &str) -> (f64, f64, f64) {
    let p = text::content_word_set(premise);
    let h = text::content_word_set(hypothesis);
    let entail = if h.is_subset(&p) {
        1.0
    } else {
        text::jaccard(&h, &p)
    };
    let rest = 1.0 - entail;
    let neutral = rest * 2.0 / 3.0;
    (entail, neutral, rest - neutral)
}

impl NliBackend for MockBackend {
    fn backend_id(&self) -> String {
        MOCK_ID.into()
    }

    fn nli(&self, req: &NliRequest) -> Result<NliResponse> {
        let (p_entail, p_neutral, p_contradiction) = mock_nli_probs(&req.premise, &req.hypothesis);
        Ok(NliResponse {
            backend_id: MOCK_ID.into(),
            model: MOCK_MODEL.into(),
            version: MOCK_VERSION.into(),
            p_entail,
            p_neutral,
            p_contradiction,
        })
    }
}

pub fn mock_manifest() -> Vec<BackendManifest> {
    [Task::Qa, Task::Convert, Task::Decontext, Task::Nli]
        .into_iter()
        .map(|task| BackendManifest {
            backend_id: MOCK_ID.into(),
            task,
            checkpoint: "mock".into(),
            decoding: Default::default(),
            max_input_length: 0,
        })
        .collect()
}
