//! Dataset ingestion: MRQA line-delimited records and SQuAD-v2 documents are
//! normalized into [`QaInstance`] records, Natural Questions is filtered for
//! narrative and table-based items, and premise/hypothesis statistics are
//! computed over built pairs.
//!
//! All char offsets are Unicode scalar indices (the unit both source formats
//! use) with an exclusive end; `-1` marks an unknown offset.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::io::BufRead;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::nli_dataset::NliPair;
use crate::text;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Dataset {
    #[serde(rename = "NQ")]
    Nq,
    TriviaQA,
    BioASQ,
    SQuAD2,
    SQuADAdv,
    Other,
}

impl Dataset {
    pub fn as_str(&self) -> &'static str {
        match self {
            Dataset::Nq => "NQ",
            Dataset::TriviaQA => "TriviaQA",
            Dataset::BioASQ => "BioASQ",
            Dataset::SQuAD2 => "SQuAD2",
            Dataset::SQuADAdv => "SQuADAdv",
            Dataset::Other => "Other",
        }
    }
}

impl fmt::Display for Dataset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Dataset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        Ok(match key.as_str() {
            "nq" | "naturalquestions" => Dataset::Nq,
            "triviaqa" | "tqa" => Dataset::TriviaQA,
            "bioasq" => Dataset::BioASQ,
            "squad2" | "squad20" | "squadv2" => Dataset::SQuAD2,
            "squadadv" | "adversarialsquad" => Dataset::SQuADAdv,
            "other" => Dataset::Other,
            _ => return Err(Error::Invalid(format!("unknown dataset `{s}`"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldAnswer {
    pub text: String,
    pub start: i64,
    pub end: i64,
}

impl GoldAnswer {
    pub fn has_offsets(&self) -> bool {
        self.start >= 0 && self.end >= 0
    }

    pub fn span(&self) -> Option<(usize, usize)> {
        self.has_offsets()
            .then_some((self.start as usize, self.end as usize))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaInstance {
    pub id: String,
    pub dataset: Dataset,
    pub question: String,
    pub context: String,
    pub gold_answers: Vec<GoldAnswer>,
    pub answerable: bool,
    #[serde(default)]
    pub meta: BTreeMap<String, String>,
}

impl QaInstance {
    pub fn title(&self) -> &str {
        self.meta.get("title").map(String::as_str).unwrap_or("")
    }

    /// Checks the record-level invariants: nonempty id, in-range spans whose
    /// slice equals the answer text, and no golds on unanswerable items.
    pub fn validate(&self) -> Result<()> {
        let fail = |message: String| Error::Validation {
            id: self.id.clone(),
            message,
        };
        if self.id.is_empty() {
            return Err(fail("empty id".into()));
        }
        if !self.answerable && !self.gold_answers.is_empty() {
            return Err(fail("unanswerable instance carries gold answers".into()));
        }
        let len = text::char_len(&self.context);
        for gold in &self.gold_answers {
            if !gold.has_offsets() {
                continue;
            }
            let (start, end) = (gold.start as usize, gold.end as usize);
            if start >= end || end > len {
                return Err(fail(format!(
                    "answer `{}` span {start}..{end} outside context of length {len}",
                    gold.text
                )));
            }
            let slice = text::char_slice(&self.context, start, end).unwrap_or_default();
            if slice != gold.text {
                return Err(fail(format!(
                    "answer `{}` does not match context slice `{slice}` at {start}..{end}",
                    gold.text
                )));
            }
        }
        Ok(())
    }
}

/// Resolves offset-less answers to their first case-insensitive occurrence.
/// The stored text is replaced by the context slice so the span invariant holds.
fn resolve_offsets(context: &str, gold: &mut GoldAnswer) {
    if gold.has_offsets() {
        return;
    }
    if let Some((s, e)) = text::find_case_insensitive(context, &gold.text) {
        gold.start = s as i64;
        gold.end = e as i64;
        if let Some(slice) = text::char_slice(context, s, e) {
            gold.text = slice.to_string();
        }
    } else {
        gold.start = -1;
        gold.end = -1;
    }
}

fn dedup_golds(golds: Vec<GoldAnswer>) -> Vec<GoldAnswer> {
    let mut out: Vec<GoldAnswer> = Vec::with_capacity(golds.len());
    for g in golds {
        if !out.contains(&g) {
            out.push(g);
        }
    }
    out
}

fn check_unique_ids(instances: &[QaInstance]) -> Result<()> {
    let mut seen = HashSet::new();
    for inst in instances {
        if !seen.insert(inst.id.as_str()) {
            return Err(Error::Validation {
                id: inst.id.clone(),
                message: "duplicate id".into(),
            });
        }
    }
    Ok(())
}

/// Result of an MRQA parse: good instances plus per-line errors.
#[derive(Debug, Default)]
pub struct MrqaParse {
    pub instances: Vec<QaInstance>,
    pub errors: Vec<Error>,
}

#[derive(Deserialize)]
struct MrqaRecord {
    #[serde(default)]
    id: Option<String>,
    #[serde(default)]
    title: Option<String>,
    context: String,
    qas: Vec<MrqaQa>,
}

#[derive(Deserialize)]
struct MrqaQa {
    qid: String,
    question: String,
    #[serde(default)]
    answers: Vec<String>,
    #[serde(default)]
    detected_answers: Vec<MrqaDetected>,
}

#[derive(Deserialize)]
struct MrqaDetected {
    text: String,
    #[serde(default)]
    char_spans: Vec<[i64; 2]>,
}

fn parse_mrqa_line(line: &str, line_no: usize, dataset: Dataset) -> Result<Vec<Result<QaInstance>>> {
    let value: Value = serde_json::from_str(line).map_err(|e| Error::Parse {
        line: line_no,
        message: e.to_string(),
    })?;
    if value.get("header").is_some() {
        return Ok(Vec::new());
    }
    let record: MrqaRecord = serde_json::from_value(value).map_err(|e| Error::Parse {
        line: line_no,
        message: e.to_string(),
    })?;

    let mut out = Vec::with_capacity(record.qas.len());
    for qa in record.qas {
        let mut golds = Vec::new();
        if qa.detected_answers.is_empty() {
            for text in qa.answers {
                let mut g = GoldAnswer {
                    text,
                    start: -1,
                    end: -1,
                };
                resolve_offsets(&record.context, &mut g);
                golds.push(g);
            }
        } else {
            for det in qa.detected_answers {
                if det.char_spans.is_empty() {
                    let mut g = GoldAnswer {
                        text: det.text.clone(),
                        start: -1,
                        end: -1,
                    };
                    resolve_offsets(&record.context, &mut g);
                    golds.push(g);
                }
                for [s, e_incl] in det.char_spans {
                    // MRQA spans are inclusive on both ends.
                    golds.push(GoldAnswer {
                        text: det.text.clone(),
                        start: s,
                        end: e_incl + 1,
                    });
                }
            }
        }
        let golds = dedup_golds(golds);
        let mut meta = BTreeMap::new();
        if let Some(t) = &record.title {
            meta.insert("title".to_string(), t.clone());
        }
        if let Some(id) = &record.id {
            meta.insert("context_id".to_string(), id.clone());
        }
        let inst = QaInstance {
            id: qa.qid,
            dataset,
            question: qa.question,
            context: record.context.clone(),
            answerable: !golds.is_empty(),
            gold_answers: golds,
            meta,
        };
        out.push(inst.validate().map(|_| inst));
    }
    Ok(out)
}

/// Parses MRQA-style line-delimited records (one context with its questions per
/// line). Malformed lines and span mismatches are collected, not fatal. Lines
/// are parsed in parallel; output keeps input order.
pub fn parse_mrqa<R: BufRead>(reader: R, dataset: Dataset) -> Result<MrqaParse> {
    let mut lines = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        lines.push((i + 1, line));
    }
    let parsed: Vec<_> = lines
        .par_iter()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(no, l)| parse_mrqa_line(l, *no, dataset))
        .collect();

    let mut result = MrqaParse::default();
    let mut seen = HashSet::new();
    for line in parsed {
        match line {
            Err(e) => result.errors.push(e),
            Ok(items) => {
                for item in items {
                    match item {
                        Ok(inst) if !seen.insert(inst.id.clone()) => {
                            result.errors.push(Error::Validation {
                                id: inst.id,
                                message: "duplicate id".into(),
                            })
                        }
                        Ok(inst) => result.instances.push(inst),
                        Err(e) => result.errors.push(e),
                    }
                }
            }
        }
    }
    Ok(result)
}

fn field<'a>(node: &'a Value, key: &str, path: &str) -> Result<&'a Value> {
    node.get(key).ok_or_else(|| Error::Structure {
        path: format!("{path}.{key}"),
        message: "missing required field".into(),
    })
}

fn str_field<'a>(node: &'a Value, key: &str, path: &str) -> Result<&'a str> {
    field(node, key, path)?.as_str().ok_or_else(|| Error::Structure {
        path: format!("{path}.{key}"),
        message: "expected a string".into(),
    })
}

fn array_field<'a>(node: &'a Value, key: &str, path: &str) -> Result<&'a Vec<Value>> {
    field(node, key, path)?.as_array().ok_or_else(|| Error::Structure {
        path: format!("{path}.{key}"),
        message: "expected an array".into(),
    })
}

/// Parses a SQuAD-v2 document. `is_impossible` items become unanswerable with no
/// golds; `plausible_answers` are ignored.
pub fn parse_squad(document: &str, dataset: Dataset) -> Result<Vec<QaInstance>> {
    let root: Value = serde_json::from_str(document).map_err(|e| Error::Parse {
        line: e.line(),
        message: e.to_string(),
    })?;
    let mut out = Vec::new();
    for (ai, article) in array_field(&root, "data", "$")?.iter().enumerate() {
        let apath = format!("$.data[{ai}]");
        let title = article.get("title").and_then(Value::as_str).map(str::to_string);
        for (pi, para) in array_field(article, "paragraphs", &apath)?.iter().enumerate() {
            let ppath = format!("{apath}.paragraphs[{pi}]");
            let context = str_field(para, "context", &ppath)?;
            for (qi, qa) in array_field(para, "qas", &ppath)?.iter().enumerate() {
                let qpath = format!("{ppath}.qas[{qi}]");
                let id = str_field(qa, "id", &qpath)?;
                let question = str_field(qa, "question", &qpath)?;
                let impossible = qa
                    .get("is_impossible")
                    .and_then(Value::as_bool)
                    .unwrap_or(false);
                let mut golds = Vec::new();
                if !impossible {
                    for (ni, ans) in array_field(qa, "answers", &qpath)?.iter().enumerate() {
                        let npath = format!("{qpath}.answers[{ni}]");
                        let text = str_field(ans, "text", &npath)?.to_string();
                        let start = field(ans, "answer_start", &npath)?
                            .as_i64()
                            .ok_or_else(|| Error::Structure {
                                path: format!("{npath}.answer_start"),
                                message: "expected an integer".into(),
                            })?;
                        let end = start + text::char_len(&text) as i64;
                        golds.push(GoldAnswer { text, start, end });
                    }
                }
                let golds = dedup_golds(golds);
                let mut meta = BTreeMap::new();
                if let Some(t) = &title {
                    meta.insert("title".to_string(), t.clone());
                }
                let inst = QaInstance {
                    id: id.to_string(),
                    dataset,
                    question: question.to_string(),
                    context: context.to_string(),
                    answerable: !impossible && !golds.is_empty(),
                    gold_answers: golds,
                    meta,
                };
                inst.validate()?;
                out.push(inst);
            }
        }
    }
    check_unique_ids(&out)?;
    Ok(out)
}

const WH_WORDS: &[&str] = &[
    "who", "what", "when", "where", "which", "why", "how", "whose", "whom",
];
const AUX_WORDS: &[&str] = &[
    "is", "are", "was", "were", "do", "does", "did", "can", "could", "will", "would", "should",
    "has", "have", "had", "may", "might", "must",
];

/// Interrogative heuristic: leading wh-word or auxiliary/modal, or a terminal '?'.
pub fn is_question(text: &str) -> bool {
    let trimmed = text.trim();
    if trimmed.ends_with('?') {
        return true;
    }
    let first = trimmed
        .split_whitespace()
        .next()
        .map(|w| {
            w.trim_matches(|c: char| !c.is_alphanumeric())
                .to_lowercase()
        })
        .unwrap_or_default();
    WH_WORDS.contains(&first.as_str()) || AUX_WORDS.contains(&first.as_str())
}

const TABLE_MARKERS: &[&str] = &["<table>", "<tr>", "<td>"];

/// True when the context carries table markup or a line with at least three
/// tab- or pipe-separated cells.
pub fn is_table_context(context: &str) -> bool {
    let lower = context.to_lowercase();
    if TABLE_MARKERS.iter().any(|m| lower.contains(m)) {
        return true;
    }
    context.lines().any(|line| {
        line.contains(['\t', '|'])
            && line
                .split(['\t', '|'])
                .filter(|cell| !cell.trim().is_empty())
                .count()
                >= 3
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    Narrative,
    Table,
}

/// Drops narrative (non-question) items and table-based contexts.
pub fn filter_nq(instances: Vec<QaInstance>) -> (Vec<QaInstance>, Vec<(String, DropReason)>) {
    let mut kept = Vec::with_capacity(instances.len());
    let mut dropped = Vec::new();
    for inst in instances {
        if !is_question(&inst.question) {
            dropped.push((inst.id, DropReason::Narrative));
        } else if is_table_context(&inst.context) {
            dropped.push((inst.id, DropReason::Table));
        } else {
            kept.push(inst);
        }
    }
    (kept, dropped)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub premise_len_mean: f64,
    pub hypothesis_len_mean: f64,
    pub jaccard_overlap_mean: f64,
    pub count: usize,
}

/// Mean content-word lengths of premises and hypotheses and their mean
/// Jaccard overlap (lowercased, stopwords removed).
pub fn compute_stats(pairs: &[NliPair]) -> Result<CorpusStats> {
    if pairs.is_empty() {
        return Err(Error::Empty("corpus has no pairs".into()));
    }
    let (mut prem, mut hyp, mut overlap) = (0.0, 0.0, 0.0);
    for pair in pairs {
        let p = text::content_words(&pair.premise);
        let h = text::content_words(&pair.hypothesis);
        prem += p.len() as f64;
        hyp += h.len() as f64;
        let ps: BTreeSet<String> = p.into_iter().collect();
        let hs: BTreeSet<String> = h.into_iter().collect();
        overlap += text::jaccard(&ps, &hs);
    }
    let n = pairs.len() as f64;
    Ok(CorpusStats {
        premise_len_mean: prem / n,
        hypothesis_len_mean: hyp / n,
        jaccard_overlap_mean: overlap / n,
        count: pairs.len(),
    })
}
