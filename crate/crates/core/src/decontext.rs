//! Premise construction: sentence splitting, answer-sentence location, and the
//! three premise modes (raw sentence, decontextualized sentence, full context).

use std::collections::HashSet;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::backend::{DecontextBackend, DecontextCategory, DecontextRequest};
use crate::corpus::QaInstance;
use crate::error::{Error, Result};
use crate::text;

const ABBREVIATIONS_SRC: &str = include_str!("../data/abbreviations.txt");

pub fn abbreviations() -> &'static HashSet<&'static str> {
    static SET: OnceLock<HashSet<&'static str>> = OnceLock::new();
    SET.get_or_init(|| {
        ABBREVIATIONS_SRC
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .collect()
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub text: String,
    pub char_start: usize,
    pub char_end: usize,
}

fn is_terminal(c: char) -> bool {
    matches!(c, '.' | '?' | '!')
}

fn is_closer(c: char) -> bool {
    matches!(c, '"' | '\'' | '”' | '’' | ')' | ']')
}

/// Word ending at `dot` (exclusive), lowercased, leading brackets/quotes dropped.
fn word_before(chars: &[char], dot: usize) -> String {
    let mut s = dot;
    while s > 0 && !chars[s - 1].is_whitespace() {
        s -= 1;
    }
    chars[s..dot]
        .iter()
        .collect::<String>()
        .trim_start_matches(|c: char| !c.is_alphanumeric())
        .to_lowercase()
}

/// Rule-based splitter. A sentence ends at `.`, `?` or `!` (plus any closing
/// quotes or brackets) followed by whitespace or the end of text, unless the
/// `.` closes a listed abbreviation. Spans exclude surrounding whitespace.
pub fn split_sentences(context: &str) -> Vec<Sentence> {
    let chars: Vec<char> = context.chars().collect();
    let n = chars.len();
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    let mut i = 0;
    let push = |s: usize, e: usize, out: &mut Vec<Sentence>| {
        out.push(Sentence {
            text: chars[s..e].iter().collect(),
            char_start: s,
            char_end: e,
        })
    };
    while i < n {
        let c = chars[i];
        if start.is_none() {
            if !c.is_whitespace() {
                start = Some(i);
            } else {
                i += 1;
                continue;
            }
        }
        if is_terminal(c) {
            let mut end = i + 1;
            while end < n && (is_terminal(chars[end]) || is_closer(chars[end])) {
                end += 1;
            }
            let at_break = end == n || chars[end].is_whitespace();
            let abbreviated = c == '.'
                && end == i + 1
                && abbreviations().contains(word_before(&chars, i).as_str());
            if at_break && !abbreviated {
                push(start.take().unwrap_or(i), end, &mut out);
            }
            i = end;
            continue;
        }
        i += 1;
    }
    if let Some(s) = start {
        let mut e = n;
        while e > s && chars[e - 1].is_whitespace() {
            e -= 1;
        }
        if e > s {
            push(s, e, &mut out);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceLocation {
    pub index: usize,
    /// The answer span runs past the end of the chosen sentence.
    pub crosses_boundary: bool,
}

/// Index of the sentence containing `start`. Whitespace between sentences
/// belongs to the preceding sentence.
pub fn locate_answer_sentence(
    sentences: &[Sentence],
    context_len: usize,
    span: (usize, usize),
) -> Result<SentenceLocation> {
    let (start, end) = span;
    if start >= end || end > context_len {
        return Err(Error::Range {
            start: start as i64,
            end: end as i64,
            len: context_len,
        });
    }
    let index = sentences
        .iter()
        .rposition(|s| s.char_start <= start)
        .unwrap_or(0);
    let crosses_boundary = sentences
        .get(index)
        .is_some_and(|s| end > s.char_end && index + 1 < sentences.len());
    Ok(SentenceLocation {
        index,
        crosses_boundary,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PremiseMode {
    Sentence,
    Decontext,
    Full,
}

impl std::str::FromStr for PremiseMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sentence" => Ok(Self::Sentence),
            "decontext" => Ok(Self::Decontext),
            "full" => Ok(Self::Full),
            _ => Err(Error::Invalid(format!("unknown premise mode `{s}`"))),
        }
    }
}

impl std::fmt::Display for PremiseMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Sentence => "sentence",
            Self::Decontext => "decontext",
            Self::Full => "full",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Premise {
    #[serde(default)]
    pub instance_id: String,
    pub text: String,
    pub mode: PremiseMode,
    /// `-1` for full-context premises.
    pub sentence_index: i64,
    pub category: DecontextCategory,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub crosses_boundary: bool,
}

/// Resolves where the predicted answer sits in the context: the given span if
/// valid, else the first case-insensitive occurrence of `answer_text`, else the
/// first gold span, else the start of the context.
pub fn resolve_answer_span(
    instance: &QaInstance,
    span: Option<(usize, usize)>,
    answer_text: &str,
) -> (usize, usize) {
    let len = text::char_len(&instance.context);
    if let Some((s, e)) = span {
        if s < e && e <= len {
            return (s, e);
        }
    }
    if let Some(found) = text::find_case_insensitive(&instance.context, answer_text) {
        return found;
    }
    if let Some(gold) = instance.gold_answers.iter().find_map(|g| g.span()) {
        return gold;
    }
    (0, len.min(1))
}

pub fn make_premise(
    instance: &QaInstance,
    answer_span: (usize, usize),
    mode: PremiseMode,
    client: Option<&dyn DecontextBackend>,
) -> Result<Premise> {
    if instance.context.trim().is_empty() {
        return Err(Error::Empty(format!("context of `{}`", instance.id)));
    }
    let len = text::char_len(&instance.context);
    if mode == PremiseMode::Full {
        let (s, e) = answer_span;
        if s >= e || e > len {
            return Err(Error::Range {
                start: s as i64,
                end: e as i64,
                len,
            });
        }
        return Ok(Premise {
            instance_id: instance.id.clone(),
            text: instance.context.clone(),
            mode,
            sentence_index: -1,
            category: DecontextCategory::None,
            crosses_boundary: false,
        });
    }
    let sentences = split_sentences(&instance.context);
    let loc = locate_answer_sentence(&sentences, len, answer_span)?;
    if loc.crosses_boundary {
        log::debug!("{}: answer crosses a sentence boundary", instance.id);
    }
    let raw = &sentences[loc.index].text;
    let mut premise = Premise {
        instance_id: instance.id.clone(),
        text: raw.clone(),
        mode,
        sentence_index: loc.index as i64,
        category: DecontextCategory::None,
        crosses_boundary: loc.crosses_boundary,
    };
    if mode == PremiseMode::Sentence {
        return Ok(premise);
    }
    let client = client.ok_or_else(|| {
        Error::Config("decontext premise mode requires a decontext backend".into())
    })?;
    let resp = client.decontext(&DecontextRequest {
        title: instance.title().to_string(),
        sentences: sentences.iter().map(|s| s.text.clone()).collect(),
        target_index: loc.index,
    })?;
    let rewritten = resp.text.trim();
    match resp.category {
        DecontextCategory::Infeasible => premise.category = DecontextCategory::Infeasible,
        _ if rewritten.is_empty() => premise.category = DecontextCategory::Infeasible,
        DecontextCategory::Unnecessary => premise.category = DecontextCategory::Unnecessary,
        category => {
            premise.text = rewritten.to_string();
            premise.category = category;
        }
    }
    Ok(premise)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{DecontextResponse, MockBackend};
    use crate::corpus::{Dataset, GoldAnswer};
    use proptest::prelude::*;
    use std::collections::BTreeMap;

    fn texts(s: &str) -> Vec<String> {
        split_sentences(s).into_iter().map(|s| s.text).collect()
    }

    #[test]
    fn splits_on_terminals() {
        assert_eq!(texts("A. B? C!"), vec!["A.", "B?", "C!"]);
        assert_eq!(texts("Dr. Smith arrived. He left."), vec!["Dr. Smith arrived.", "He left."]);
        assert_eq!(texts("He said \"go.\" Then left"), vec!["He said \"go.\"", "Then left"]);
        assert_eq!(texts("Pi is 3.14 roughly. Yes."), vec!["Pi is 3.14 roughly.", "Yes."]);
        assert_eq!(texts("Made in the U.S. by hand."), vec!["Made in the U.S. by hand."]);
        assert!(texts("   ").is_empty());
    }

    #[test]
    fn abbreviation_list_size() {
        assert!((55..=70).contains(&abbreviations().len()));
    }

    fn sents(s: &str) -> Vec<Sentence> {
        split_sentences(s)
    }

    #[test]
    fn locate_examples() {
        let ctx = "One. Two. Three. Four. Five.";
        let s = sents(ctx);
        let len = text::char_len(ctx);
        assert_eq!(locate_answer_sentence(&s, len, (0, 3)).unwrap().index, 0);
        assert_eq!(locate_answer_sentence(&s, len, (10, 15)).unwrap().index, 2);
        let straddle = locate_answer_sentence(&s, len, (5, 12)).unwrap();
        assert_eq!(straddle, SentenceLocation { index: 1, crosses_boundary: true });
        assert!(matches!(locate_answer_sentence(&s, len, (3, 99)), Err(Error::Range { .. })));
        assert!(locate_answer_sentence(&s, len, (4, 4)).is_err());
    }

    fn instance(context: &str, title: &str) -> QaInstance {
        let mut meta = BTreeMap::new();
        meta.insert("title".to_string(), title.to_string());
        QaInstance {
            id: "i".into(),
            dataset: Dataset::Nq,
            question: "who plays michael on the good place".into(),
            context: context.into(),
            gold_answers: vec![GoldAnswer { text: "Ted Danson".into(), start: 38, end: 48 }],
            answerable: true,
            meta,
        }
    }

    const GOOD_PLACE: &str = "It is a comedy show. The series stars Ted Danson as Michael.";

    #[test]
    fn premise_modes() {
        let inst = instance(GOOD_PLACE, "The Good Place");
        let span = text::find_case_insensitive(GOOD_PLACE, "Ted Danson").unwrap();
        let s = make_premise(&inst, span, PremiseMode::Sentence, None).unwrap();
        assert_eq!(s.text, "The series stars Ted Danson as Michael.");
        assert_eq!(s.sentence_index, 1);

        let f = make_premise(&inst, span, PremiseMode::Full, None).unwrap();
        assert_eq!((f.text.as_str(), f.sentence_index), (GOOD_PLACE, -1));

        let d = make_premise(&inst, span, PremiseMode::Decontext, Some(&MockBackend)).unwrap();
        assert_eq!(d.text, "The Good Place: The series stars Ted Danson as Michael.");
        assert_eq!(d.category, DecontextCategory::Done);

        assert!(matches!(
            make_premise(&inst, span, PremiseMode::Decontext, None),
            Err(Error::Config(_))
        ));
    }

    struct Refuses(DecontextCategory, &'static str);
    impl DecontextBackend for Refuses {
        fn backend_id(&self) -> String {
            "r".into()
        }
        fn decontext(&self, _: &DecontextRequest) -> Result<DecontextResponse> {
            Ok(DecontextResponse {
                backend_id: "r".into(),
                model: "r".into(),
                version: "0".into(),
                text: self.1.into(),
                category: self.0,
            })
        }
    }

    #[test]
    fn infeasible_and_empty_fall_back_to_sentence() {
        let inst = instance(GOOD_PLACE, "The Good Place");
        let span = (38, 48);
        for backend in [
            Refuses(DecontextCategory::Infeasible, "garbage"),
            Refuses(DecontextCategory::Done, "  "),
        ] {
            let p = make_premise(&inst, span, PremiseMode::Decontext, Some(&backend)).unwrap();
            assert_eq!(p.category, DecontextCategory::Infeasible);
            assert_eq!(p.text, "The series stars Ted Danson as Michael.");
        }
        let p = make_premise(
            &inst,
            span,
            PremiseMode::Decontext,
            Some(&Refuses(DecontextCategory::Unnecessary, "other")),
        )
        .unwrap();
        assert_eq!(p.text, "The series stars Ted Danson as Michael.");
    }

    #[test]
    fn span_resolution_order() {
        let inst = instance(GOOD_PLACE, "t");
        assert_eq!(resolve_answer_span(&inst, Some((3, 5)), "x"), (3, 5));
        assert_eq!(resolve_answer_span(&inst, None, "comedy"), (8, 14));
        assert_eq!(resolve_answer_span(&inst, Some((9, 999)), "unknown"), (38, 48));
    }

    fn context_strategy() -> impl Strategy<Value = String> {
        prop::collection::vec(
            prop::sample::select(vec![
                "word", "Dr.", "end.", "why?", "wow!", "\"q.\"", "3.5", " ", "  ", "\n", "e.g.", "x",
            ]),
            1..30,
        )
        .prop_map(|v| v.join(" "))
    }

    proptest! {
        #[test]
        fn spans_cover_nonwhitespace(ctx in context_strategy()) {
            let s = split_sentences(&ctx);
            let chars: Vec<char> = ctx.chars().collect();
            let mut covered = vec![false; chars.len()];
            let mut prev_end = 0;
            for sent in &s {
                prop_assert!(sent.char_start >= prev_end);
                prop_assert!(sent.char_start < sent.char_end);
                prop_assert_eq!(text::char_slice(&ctx, sent.char_start, sent.char_end).unwrap(), sent.text.as_str());
                for c in &mut covered[sent.char_start..sent.char_end] { *c = true; }
                prev_end = sent.char_end;
            }
            for (i, c) in chars.iter().enumerate() {
                prop_assert!(covered[i] || c.is_whitespace());
            }
        }

        #[test]
        fn located_sentence_contains_start(ctx in context_strategy(), a in 0usize..200, w in 1usize..10) {
            let len = text::char_len(&ctx);
            let s = split_sentences(&ctx);
            prop_assume!(!s.is_empty() && a < len);
            let start = a.max(s[0].char_start);
            prop_assume!(start < len);
            let end = (start + w).min(len);
            let loc = locate_answer_sentence(&s, len, (start, end)).unwrap();
            let sent = &s[loc.index];
            prop_assert!(sent.char_start <= start);
            let next = s.get(loc.index + 1).map(|n| n.char_start).unwrap_or(usize::MAX);
            prop_assert!(start < next);
        }
    }
}
