//! Question + answer → declarative hypothesis.
//!
//! The rule path is an ordered table, first match wins:
//!
//! 1. **wh-subject**: a leading `who`/`what`/`which`/`where`/`when` (for
//!    `what`/`which`, optionally followed by up to three nominal tokens) and
//!    then a verb: the wh-phrase is replaced by the answer.
//! 2. **how-quantity**: `how many`/`how much`/`how old`/`how long` + noun
//!    phrase + verb: `how X` is replaced by the answer, the noun phrase kept.
//! 3. **auxiliary-fronted**: an auxiliary opens the clause (after an optional
//!    wh-phrase). `do`-support is dropped, other auxiliaries move before a
//!    trailing participle or to the end of the clause, and the answer fills
//!    the wh-slot (`in`, `because`, `by`, a stranded preposition, or a bare
//!    object). Without a wh-phrase the answer is appended as `— <answer>`.
//! 4. **copula-final**: `... was?` → `... was <answer>.`
//! 5. **fallback**: `<question>, <answer>.`
//!
//! A copula followed by a clause ending in a participle (`what year was X
//! signed`) is treated as a passive and routed to rule 3. Nothing is truecased
//! or re-inflected.

use serde::{Deserialize, Serialize};

use crate::backend::{ConvertBackend, ConvertRequest};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HypothesisMethod {
    Rule,
    Neural,
    Concat,
}

impl std::str::FromStr for HypothesisMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rule" => Ok(Self::Rule),
            "neural" => Ok(Self::Neural),
            "concat" => Ok(Self::Concat),
            _ => Err(Error::Invalid(format!("unknown hypothesis mode `{s}`"))),
        }
    }
}

impl std::fmt::Display for HypothesisMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Rule => "rule",
            Self::Neural => "neural",
            Self::Concat => "concat",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConversionRule {
    WhSubject,
    HowQuantity,
    AuxiliaryFronted,
    CopulaFinal,
    Fallback,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub text: String,
    pub method: HypothesisMethod,
    pub source_question_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rule: Option<ConversionRule>,
    /// Set when a neural conversion came back empty and the rule path was used.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub fallback: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub backend_id: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl Hypothesis {
    pub fn for_question(mut self, id: impl Into<String>) -> Self {
        self.source_question_id = id.into();
        self
    }
}

const AUX: &[&str] = &[
    "is", "are", "was", "were", "do", "does", "did", "can", "could", "will", "would", "should",
    "has", "have", "had", "may", "might", "must",
];
const DO_AUX: &[&str] = &["do", "does", "did"];
const COPULA: &[&str] = &["is", "are", "was", "were"];
const WH_SUBJECT: &[&str] = &["who", "what", "which", "where", "when"];
const WH_ANY: &[&str] = &[
    "who", "whom", "whose", "what", "which", "where", "when", "why", "how",
];
const HOW_QUANTITY: &[&str] = &["many", "much", "old", "long"];
const PREPOSITIONS: &[&str] = &[
    "by", "of", "in", "for", "to", "from", "with", "on", "at", "about", "into", "after", "before",
];
const TIME_IN: &[&str] = &["year", "century", "decade", "month", "season", "era", "period"];
const TIME_ON: &[&str] = &["day", "date"];

const VERBS: &[&str] = &[
    "play", "plays", "played", "sing", "sings", "sang", "sung", "write", "writes", "wrote",
    "win", "wins", "won", "make", "makes", "made", "become", "becomes", "became", "invent",
    "invents", "invented", "discover", "discovers", "discovered", "direct", "directs",
    "directed", "found", "founds", "founded", "create", "creates", "created", "develop",
    "develops", "developed", "produce", "produces", "produced", "star", "stars", "starred",
    "voice", "voices", "voiced", "say", "says", "said", "come", "comes", "came", "go", "goes",
    "went", "take", "takes", "took", "give", "gives", "gave", "build", "builds", "built", "run",
    "runs", "ran", "lead", "leads", "led", "begin", "begins", "began", "hold", "holds", "held",
    "sell", "sells", "sold", "buy", "buys", "bought", "tell", "tells", "told", "know", "knows",
    "knew", "see", "sees", "saw", "meet", "meets", "met", "kill", "kills", "killed", "die",
    "dies", "died", "live", "lives", "lived", "own", "owns", "owned", "control", "controls",
    "controlled", "represent", "represents", "represented", "host", "hosts", "hosted", "paint",
    "paints", "painted", "design", "designs", "designed", "compose", "composes", "composed",
    "coin", "coins", "coined", "introduce", "introduces", "introduced", "sign", "signs",
    "signed", "name", "names", "named", "happen", "happens", "happened", "cause", "causes",
    "caused", "mean", "means", "meant", "lie", "lies", "lay", "flow", "flows", "flowed",
    "score", "scores", "scored", "replace", "replaces", "replaced", "serve", "serves", "served",
    "rule", "rules", "ruled", "invade", "invades", "invaded", "sank", "sink", "sinks", "fought",
    "fight", "fights", "taught", "teach", "teaches", "drew", "draw", "draws", "spoke", "speak",
    "speaks", "wore", "wear", "wears", "used", "uses", "use", "get", "gets", "got", "has",
    "have", "had",
];
const PARTICIPLES: &[&str] = &[
    "born", "made", "built", "written", "called", "named", "founded", "released", "discovered",
    "invented", "created", "held", "played", "killed", "elected", "signed", "published",
    "located", "buried", "set", "filmed", "recorded", "established", "based", "produced",
    "introduced", "used", "known", "given", "taken", "sung", "won", "shot", "painted",
    "designed", "directed", "composed", "built", "destroyed", "formed", "passed", "launched",
];

fn is_in(list: &[&str], word: &str) -> bool {
    list.contains(&word)
}

fn looks_like_verb(word: &str) -> bool {
    if is_in(VERBS, word) {
        return true;
    }
    word.len() >= 4
        && word.chars().all(|c| c.is_ascii_alphabetic())
        && !crate::text::is_stopword(word)
        && (word.ends_with("ed")
            || (word.ends_with('s')
                && !word.ends_with("ss")
                && !word.ends_with("us")
                && !word.ends_with("is")))
}

fn is_participle(word: &str) -> bool {
    is_in(PARTICIPLES, word) || (word.len() >= 5 && word.ends_with("ed"))
}

struct Question<'a> {
    tokens: Vec<&'a str>,
    lower: Vec<String>,
    body: &'a str,
    has_qmark: bool,
}

impl<'a> Question<'a> {
    fn parse(question: &'a str) -> Self {
        let trimmed = question.trim();
        let has_qmark = trimmed.ends_with('?');
        let body = trimmed.trim_end_matches('?').trim_end();
        let tokens: Vec<&str> = body.split_whitespace().collect();
        let lower = tokens
            .iter()
            .map(|t| {
                t.trim_matches(|c: char| !c.is_alphanumeric())
                    .to_lowercase()
            })
            .collect();
        Question {
            tokens,
            lower,
            body,
            has_qmark,
        }
    }

    fn len(&self) -> usize {
        self.tokens.len()
    }

    fn word(&self, i: usize) -> &str {
        self.lower.get(i).map(String::as_str).unwrap_or("")
    }

    fn join(&self, range: std::ops::Range<usize>) -> String {
        self.tokens[range].join(" ")
    }
}

/// Copula followed by a (possibly preposition-stranded) participle: a passive.
fn is_passive_after(q: &Question, aux_idx: usize) -> bool {
    if !is_in(COPULA, q.word(aux_idx)) || aux_idx + 1 >= q.len() {
        return false;
    }
    let mut last = q.len() - 1;
    if is_in(PREPOSITIONS, q.word(last)) && last > aux_idx + 1 {
        last -= 1;
    }
    last > aux_idx && is_participle(q.word(last))
}

fn join_parts(parts: &[&str]) -> String {
    parts
        .iter()
        .filter(|p| !p.is_empty())
        .copied()
        .collect::<Vec<_>>()
        .join(" ")
}

/// Rule 1. Returns the end of the wh-phrase that the answer replaces.
fn wh_subject(q: &Question) -> Option<usize> {
    let first = q.word(0);
    if !is_in(WH_SUBJECT, first) || q.len() < 2 {
        return None;
    }
    let next = q.word(1);
    if is_in(DO_AUX, next) {
        return None;
    }
    let verb_at = |i: usize| {
        let w = q.word(i);
        is_in(AUX, w) || is_in(VERBS, w) || (first == "who" && looks_like_verb(w))
    };
    match first {
        "where" | "when" => {
            (!is_in(AUX, next) && looks_like_verb(next)).then_some(1)
        }
        "who" => (verb_at(1) && !is_passive_after(q, 1)).then_some(1),
        _ => {
            if verb_at(1) {
                return (!is_passive_after(q, 1)).then_some(1);
            }
            for j in 2..q.len().min(5) {
                let w = q.word(j);
                if is_in(DO_AUX, w) {
                    return None;
                }
                if is_in(AUX, w) || looks_like_verb(w) {
                    return (!is_passive_after(q, j)).then_some(j);
                }
            }
            None
        }
    }
}

/// Rule 2. Returns the index where the noun phrase ends.
fn how_quantity(q: &Question) -> Option<usize> {
    if q.word(0) != "how" || !is_in(HOW_QUANTITY, q.word(1)) || q.len() < 3 {
        return None;
    }
    let mut j = 2;
    while j < q.len() && j < 6 && !is_in(AUX, q.word(j)) && !is_in(VERBS, q.word(j)) {
        j += 1;
    }
    if j == 2 || (j < q.len() && is_in(DO_AUX, q.word(j))) {
        return None;
    }
    Some(j)
}

/// Rule 3: index of the fronted auxiliary.
fn fronted_aux(q: &Question) -> Option<usize> {
    if is_in(AUX, q.word(0)) {
        return (q.len() > 1).then_some(0);
    }
    if !is_in(WH_ANY, q.word(0)) {
        return None;
    }
    (1..q.len().min(6))
        .find(|&i| is_in(AUX, q.word(i)))
        .filter(|&i| i + 1 < q.len())
}

fn auxiliary_fronted(q: &Question, aux_idx: usize, answer: &str) -> String {
    let aux = q.tokens[aux_idx];
    let mut rest: Vec<&str> = q.tokens[aux_idx + 1..].to_vec();
    let mut rest_lower: Vec<&str> = q.lower[aux_idx + 1..].iter().map(String::as_str).collect();

    let stranded = match rest_lower.last() {
        Some(w) if is_in(PREPOSITIONS, w) && rest.len() > 1 => {
            rest_lower.pop();
            rest.pop()
        }
        _ => None,
    };

    let clause = if is_in(DO_AUX, &aux.to_lowercase()) {
        rest.join(" ")
    } else if rest_lower.last().is_some_and(|w| is_participle(w)) {
        let n = rest.len();
        join_parts(&[&rest[..n - 1].join(" "), aux, rest[n - 1]])
    } else {
        join_parts(&[&rest.join(" "), aux])
    };

    let wh: Vec<&str> = q.lower[..aux_idx].iter().map(String::as_str).collect();
    if let Some(prep) = stranded {
        return join_parts(&[&clause, prep, answer]);
    }
    let Some(&head) = wh.first() else {
        return format!("{clause} — {answer}");
    };
    let slot = match head {
        "where" | "when" => "in",
        "why" => "because",
        "how" if wh.len() == 1 => "by",
        "what" | "which" if wh[1..].iter().any(|w| is_in(TIME_IN, w)) => "in",
        "what" | "which" if wh[1..].iter().any(|w| is_in(TIME_ON, w)) => "on",
        _ => "",
    };
    // "how many games did they win" → "they win 10 games"
    let trailing_np = if head == "how" && wh.len() > 2 {
        q.join(2..aux_idx)
    } else {
        String::new()
    };
    join_parts(&[&clause, slot, answer, &trailing_np])
}

fn type_warnings(q: &Question, answer: &str) -> Vec<String> {
    let has_digit = answer.chars().any(|c| c.is_ascii_digit());
    let mut out = Vec::new();
    let first = q.word(0);
    if first == "how" && is_in(HOW_QUANTITY, q.word(1)) && !has_digit {
        out.push(format!(
            "answer `{answer}` carries no number for a `how {}` question",
            q.word(1)
        ));
    }
    if first == "when" && !has_digit {
        out.push(format!("answer `{answer}` carries no date for a `when` question"));
    }
    if first == "who" && !answer.is_empty() && answer.chars().all(|c| c.is_ascii_digit() || c.is_whitespace()) {
        out.push(format!("answer `{answer}` is numeric for a `who` question"));
    }
    out
}

/// Deterministic rule-table conversion; always produces output.
pub fn convert_rule(question: &str, answer: &str) -> Hypothesis {
    let q = Question::parse(question);
    let answer = answer.trim();

    let (text, rule) = if let Some(end) = wh_subject(&q) {
        (
            join_parts(&[answer, &q.join(end..q.len())]),
            ConversionRule::WhSubject,
        )
    } else if let Some(np_end) = how_quantity(&q) {
        let np = q.join(2..np_end);
        let np_in_answer = crate::text::words(answer)
            .iter()
            .any(|w| crate::text::words(&np).contains(w));
        let head = if np_in_answer {
            answer.to_string()
        } else {
            join_parts(&[answer, &np])
        };
        (
            join_parts(&[&head, &q.join(np_end..q.len())]),
            ConversionRule::HowQuantity,
        )
    } else if let Some(aux_idx) = fronted_aux(&q) {
        (
            auxiliary_fronted(&q, aux_idx, answer),
            ConversionRule::AuxiliaryFronted,
        )
    } else if q.has_qmark && q.len() > 0 && is_in(COPULA, q.word(q.len() - 1)) {
        (format!("{} {answer}.", q.body), ConversionRule::CopulaFinal)
    } else {
        (format!("{}, {answer}.", q.body), ConversionRule::Fallback)
    };

    let warnings = type_warnings(&q, answer);
    for w in &warnings {
        log::warn!("{w}");
    }
    Hypothesis {
        text,
        method: HypothesisMethod::Rule,
        source_question_id: String::new(),
        rule: Some(rule),
        fallback: false,
        backend_id: None,
        warnings,
    }
}

/// `question + " " + answer`, verbatim.
pub fn concat_baseline(question: &str, answer: &str) -> Result<Hypothesis> {
    if question.is_empty() || answer.is_empty() {
        return Err(Error::Invalid(
            "concat baseline needs a nonempty question and answer".into(),
        ));
    }
    Ok(Hypothesis {
        text: format!("{question} {answer}"),
        method: HypothesisMethod::Concat,
        source_question_id: String::new(),
        rule: None,
        fallback: false,
        backend_id: None,
        warnings: Vec::new(),
    })
}

/// Converts through a model backend. Empty generations fall back to the rule
/// path with `fallback` set; transport errors propagate.
pub fn convert_neural(
    question: &str,
    answer: &str,
    client: &dyn ConvertBackend,
) -> Result<Hypothesis> {
    let resp = client.convert(&ConvertRequest {
        question: question.to_string(),
        answer: answer.to_string(),
    })?;
    let generated = resp.text.trim();
    if generated.is_empty() {
        let mut h = convert_rule(question, answer);
        h.fallback = true;
        h.backend_id = Some(resp.backend_id);
        return Ok(h);
    }
    let mut text = generated.to_string();
    if !text.ends_with(['.', '!', '?']) {
        text.push('.');
    }
    Ok(Hypothesis {
        text,
        method: HypothesisMethod::Neural,
        source_question_id: String::new(),
        rule: None,
        fallback: false,
        backend_id: Some(resp.backend_id),
        warnings: Vec::new(),
    })
}

/// Dispatches on the configured method.
pub fn convert(
    method: HypothesisMethod,
    question: &str,
    answer: &str,
    client: Option<&dyn ConvertBackend>,
) -> Result<Hypothesis> {
    match method {
        HypothesisMethod::Rule => Ok(convert_rule(question, answer)),
        HypothesisMethod::Concat => concat_baseline(question, answer),
        HypothesisMethod::Neural => {
            let client = client.ok_or_else(|| {
                Error::Config("neural conversion requires a convert backend".into())
            })?;
            convert_neural(question, answer, client)
        }
    }
}
