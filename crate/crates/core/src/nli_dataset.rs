//! NLI training pairs derived from QA predictions, and mixing with external
//! NLI corpora.

use std::collections::{BTreeMap, BTreeSet};
use std::io::BufRead;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::answer::{index_by_id, AnswerCandidate};
use crate::corpus::QaInstance;
use crate::decontext::Premise;
use crate::error::{Error, Result};
use crate::qconvert::Hypothesis;
use crate::scoring::Correctness;

pub const DEFAULT_SEED: u64 = 0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Entailed,
    NotEntailed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    QaDerived,
    ExternalNli,
    Eval,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NliPair {
    pub premise: String,
    pub hypothesis: String,
    pub label: Label,
    pub origin: Origin,
    #[serde(default)]
    pub instance_id: Option<String>,
    #[serde(default)]
    pub meta: BTreeMap<String, String>,
}

impl NliPair {
    pub fn validate(&self) -> Result<()> {
        let id = self.instance_id.clone().unwrap_or_else(|| "<unnamed pair>".into());
        if self.premise.trim().is_empty() || self.hypothesis.trim().is_empty() {
            return Err(Error::Validation {
                id,
                message: "empty premise or hypothesis".into(),
            });
        }
        if self.origin == Origin::QaDerived && self.instance_id.is_none() {
            return Err(Error::Validation {
                id,
                message: "QA-derived pair without instance id".into(),
            });
        }
        Ok(())
    }
}

/// Ids present in some inputs but not all, sorted.
fn missing_ids(id_sets: &[BTreeSet<&str>]) -> Vec<String> {
    let union: BTreeSet<&str> = id_sets.iter().flatten().copied().collect();
    union
        .into_iter()
        .filter(|id| id_sets.iter().any(|s| !s.contains(id)))
        .map(str::to_string)
        .collect()
}

/// One pair per instance: label is `entailed` iff the candidate is correct
/// under `correctness`. All four inputs must cover the same ids.
pub fn build_qa_nli(
    instances: &[QaInstance],
    candidates: &[AnswerCandidate],
    premises: &[Premise],
    hypotheses: &[Hypothesis],
    correctness: Correctness,
) -> Result<Vec<NliPair>> {
    let inst = index_by_id(instances, |i| i.id.as_str())?;
    let cand = index_by_id(candidates, |c| c.instance_id.as_str())?;
    let prem = index_by_id(premises, |p| p.instance_id.as_str())?;
    let hyp = index_by_id(hypotheses, |h| h.source_question_id.as_str())?;
    let missing = missing_ids(&[
        inst.keys().copied().collect(),
        cand.keys().copied().collect(),
        prem.keys().copied().collect(),
        hyp.keys().copied().collect(),
    ]);
    if !missing.is_empty() {
        return Err(Error::Join { missing });
    }

    let mut out = Vec::with_capacity(instances.len());
    for instance in instances {
        let id = instance.id.as_str();
        let golds: Vec<&str> = instance.gold_answers.iter().map(|g| g.text.as_str()).collect();
        let label = if correctness.judge(&cand[id].text, &golds) {
            Label::Entailed
        } else {
            Label::NotEntailed
        };
        let premise = prem[id];
        let hypothesis = hyp[id];
        let mut meta = BTreeMap::new();
        meta.insert("dataset".to_string(), instance.dataset.to_string());
        meta.insert("premise_mode".to_string(), premise.mode.to_string());
        meta.insert("hypothesis_method".to_string(), hypothesis.method.to_string());
        let pair = NliPair {
            premise: premise.text.clone(),
            hypothesis: hypothesis.text.clone(),
            label,
            origin: Origin::QaDerived,
            instance_id: Some(instance.id.clone()),
            meta,
        };
        pair.validate()?;
        out.push(pair);
    }
    Ok(out)
}

/// QA pairs plus an equal-size uniform sample (without replacement) of the
/// external pairs, shuffled. Deterministic for a given seed.
pub fn mix_with_external(
    qa_pairs: &[NliPair],
    external: &[NliPair],
    seed: u64,
) -> Result<Vec<NliPair>> {
    if external.len() < qa_pairs.len() {
        return Err(Error::Size {
            needed: qa_pairs.len(),
            available: external.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picked = rand::seq::index::sample(&mut rng, external.len(), qa_pairs.len());
    let mut out: Vec<NliPair> = qa_pairs.to_vec();
    out.extend(picked.into_iter().map(|i| external[i].clone()));
    out.shuffle(&mut rng);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExternalFormat {
    Mnli,
    FeverNli,
}

impl std::str::FromStr for ExternalFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mnli" => Ok(Self::Mnli),
            "fever-nli" | "fever_nli" => Ok(Self::FeverNli),
            _ => Err(Error::Invalid(format!("unknown external NLI format `{s}`"))),
        }
    }
}

#[derive(Debug, Default)]
pub struct ExternalImport {
    pub pairs: Vec<NliPair>,
    pub errors: Vec<Error>,
    /// Count of records per raw label string, including rejected ones.
    pub label_counts: BTreeMap<String, usize>,
}

impl ExternalImport {
    pub fn summary(&self) -> String {
        let counts: Vec<String> = self
            .label_counts
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect();
        format!(
            "{} pairs imported, {} records rejected ({})",
            self.pairs.len(),
            self.errors.len(),
            counts.join(", ")
        )
    }
}

fn collapse(format: ExternalFormat, raw: &str) -> Option<Label> {
    match format {
        ExternalFormat::Mnli => match raw {
            "entailment" => Some(Label::Entailed),
            "neutral" | "contradiction" => Some(Label::NotEntailed),
            _ => None,
        },
        ExternalFormat::FeverNli => match raw.to_ascii_uppercase().replace(['_', ' '], "").as_str() {
            "SUPPORTS" => Some(Label::Entailed),
            "REFUTES" | "NOTENOUGHINFO" => Some(Label::NotEntailed),
            _ => None,
        },
    }
}

fn first_str<'a>(v: &'a Value, keys: &[&str]) -> Option<&'a str> {
    keys.iter().find_map(|k| v.get(*k).and_then(Value::as_str))
}

/// Reads MNLI (`sentence1`, `sentence2`, `gold_label`) or FEVER-NLI
/// (`premise`|`context`, `hypothesis`|`query`, `label`) line records and
/// collapses labels to binary. Bad records are collected, not fatal.
pub fn import_external_nli<R: BufRead>(reader: R, format: ExternalFormat) -> Result<ExternalImport> {
    let (premise_keys, hypothesis_keys, label_keys): (&[&str], &[&str], &[&str]) = match format {
        ExternalFormat::Mnli => (&["sentence1"], &["sentence2"], &["gold_label"]),
        ExternalFormat::FeverNli => (&["premise", "context"], &["hypothesis", "query"], &["label"]),
    };
    let mut out = ExternalImport::default();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let value: Value = match serde_json::from_str(&line) {
            Ok(v) => v,
            Err(e) => {
                out.errors.push(Error::Parse {
                    line: line_no,
                    message: e.to_string(),
                });
                continue;
            }
        };
        let fields = (
            first_str(&value, premise_keys),
            first_str(&value, hypothesis_keys),
            first_str(&value, label_keys),
        );
        let (Some(premise), Some(hypothesis), Some(raw)) = fields else {
            out.errors.push(Error::Parse {
                line: line_no,
                message: "missing premise, hypothesis or label".into(),
            });
            continue;
        };
        *out.label_counts.entry(raw.to_string()).or_default() += 1;
        let Some(label) = collapse(format, raw) else {
            out.errors.push(Error::Parse {
                line: line_no,
                message: format!("unknown label `{raw}`"),
            });
            continue;
        };
        let id = first_str(&value, &["pairID", "id", "cid", "uid"]).map(str::to_string);
        let mut meta = BTreeMap::new();
        meta.insert("source".to_string(), match format {
            ExternalFormat::Mnli => "mnli".to_string(),
            ExternalFormat::FeverNli => "fever_nli".to_string(),
        });
        if let Some(genre) = first_str(&value, &["genre"]) {
            meta.insert("genre".to_string(), genre.to_string());
        }
        let pair = NliPair {
            premise: premise.to_string(),
            hypothesis: hypothesis.to_string(),
            label,
            origin: Origin::ExternalNli,
            instance_id: id,
            meta,
        };
        match pair.validate() {
            Ok(()) => out.pairs.push(pair),
            Err(e) => out.errors.push(e),
        }
    }
    if !out.errors.is_empty() {
        log::warn!("{}", out.summary());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ext(n: usize) -> Vec<NliPair> {
        (0..n)
            .map(|i| NliPair {
                premise: format!("p{i}"),
                hypothesis: format!("h{i}"),
                label: if i % 2 == 0 { Label::Entailed } else { Label::NotEntailed },
                origin: Origin::ExternalNli,
                instance_id: None,
                meta: BTreeMap::new(),
            })
            .collect()
    }

    fn qa(n: usize) -> Vec<NliPair> {
        ext(n)
            .into_iter()
            .enumerate()
            .map(|(i, mut p)| {
                p.origin = Origin::QaDerived;
                p.instance_id = Some(format!("q{i}"));
                p
            })
            .collect()
    }

    #[test]
    fn mix_sizes_and_errors() {
        let mixed = mix_with_external(&qa(100), &ext(500), 0).unwrap();
        assert_eq!(mixed.len(), 200);
        assert_eq!(mixed.iter().filter(|p| p.origin == Origin::QaDerived).count(), 100);
        assert!(matches!(
            mix_with_external(&qa(10), &ext(9), 0),
            Err(Error::Size { needed: 10, available: 9 })
        ));
    }

    #[test]
    fn reseeding_changes_order_not_contents() {
        let (q, e) = (qa(5), ext(5));
        let a = mix_with_external(&q, &e, 1).unwrap();
        let b = mix_with_external(&q, &e, 2).unwrap();
        assert_eq!(a, mix_with_external(&q, &e, 1).unwrap());
        assert_ne!(a, b);
        let (mut sa, mut sb) = (a.clone(), b.clone());
        sa.sort();
        sb.sort();
        assert_eq!(sa, sb);
    }

    #[test]
    fn mnli_and_fever_collapse() {
        let mnli = [
            r#"{"sentence1":"a","sentence2":"b","gold_label":"entailment"}"#,
            r#"{"sentence1":"a","sentence2":"b","gold_label":"neutral"}"#,
            r#"{"sentence1":"a","sentence2":"b","gold_label":"contradiction"}"#,
            r#"{"sentence1":"a","sentence2":"b","gold_label":"-"}"#,
        ]
        .join("\n");
        let got = import_external_nli(mnli.as_bytes(), ExternalFormat::Mnli).unwrap();
        let labels: Vec<Label> = got.pairs.iter().map(|p| p.label).collect();
        assert_eq!(labels, vec![Label::Entailed, Label::NotEntailed, Label::NotEntailed]);
        assert_eq!(got.errors.len(), 1);
        assert_eq!(got.label_counts["-"], 1);

        let fever = [
            r#"{"premise":"a","hypothesis":"b","label":"SUPPORTS"}"#,
            r#"{"context":"a","query":"b","label":"NOT ENOUGH INFO"}"#,
            r#"{"premise":"a","hypothesis":"b","label":"REFUTES"}"#,
        ]
        .join("\n");
        let got = import_external_nli(fever.as_bytes(), ExternalFormat::FeverNli).unwrap();
        let labels: Vec<Label> = got.pairs.iter().map(|p| p.label).collect();
        assert_eq!(labels, vec![Label::Entailed, Label::NotEntailed, Label::NotEntailed]);
        assert!(got.pairs.iter().all(|p| p.origin == Origin::ExternalNli));
    }

    #[test]
    fn missing_ids_are_listed() {
        let a: BTreeSet<&str> = ["x", "y"].into_iter().collect();
        let b: BTreeSet<&str> = ["y", "z"].into_iter().collect();
        assert_eq!(missing_ids(&[a, b]), vec!["x".to_string(), "z".to_string()]);
    }

    proptest! {
        #[test]
        fn mix_is_qa_plus_sample(n in 0usize..30, extra in 0usize..30, seed in any::<u64>()) {
            let (q, e) = (qa(n), ext(n + extra));
            let mixed = mix_with_external(&q, &e, seed).unwrap();
            prop_assert_eq!(mixed.len(), 2 * n);
            let from_ext: BTreeSet<&NliPair> = mixed.iter().filter(|p| p.origin == Origin::ExternalNli).collect();
            prop_assert_eq!(from_ext.len(), n);
            prop_assert!(from_ext.iter().all(|p| e.contains(p)));
            prop_assert!(q.iter().all(|p| mixed.contains(p)));
        }

        #[test]
        fn pair_roundtrip(p in "[a-z ]{1,12}", h in "[a-z ]{1,12}", k in "[a-z]{1,4}", v in ".{0,6}") {
            let mut meta = BTreeMap::new();
            meta.insert(k, v);
            let pair = NliPair { premise: p, hypothesis: h, label: Label::NotEntailed, origin: Origin::Eval, instance_id: Some("i".into()), meta };
            let line = serde_json::to_string(&pair).unwrap();
            prop_assert_eq!(serde_json::from_str::<NliPair>(&line).unwrap(), pair);
        }
    }
}
