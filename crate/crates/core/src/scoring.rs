//! Answer correctness: SQuAD-style normalization, exact match and token F1.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

/// Lowercase, drop ASCII punctuation, drop the articles `a`/`an`/`the`, and
/// collapse whitespace.
pub fn normalize(text: &str) -> String {
    let lowered = text.to_lowercase();
    let no_punct: String = lowered
        .chars()
        .filter(|c| !c.is_ascii_punctuation())
        .collect();
    no_punct
        .split_whitespace()
        .filter(|w| !matches!(*w, "a" | "an" | "the"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn tokens(text: &str) -> Vec<String> {
    normalize(text)
        .split_whitespace()
        .map(str::to_string)
        .collect()
}

pub fn exact_match(pred: &str, gold: &str) -> bool {
    normalize(pred) == normalize(gold)
}

/// Token-level F1 over normalized multisets. Both empty scores 1, exactly one
/// empty scores 0.
pub fn token_f1(pred: &str, gold: &str) -> f64 {
    let p = tokens(pred);
    let g = tokens(gold);
    if p.is_empty() || g.is_empty() {
        return if p.is_empty() && g.is_empty() { 1.0 } else { 0.0 };
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for t in &g {
        *counts.entry(t.as_str()).or_default() += 1;
    }
    let mut same = 0usize;
    for t in &p {
        if let Some(c) = counts.get_mut(t.as_str()) {
            if *c > 0 {
                *c -= 1;
                same += 1;
            }
        }
    }
    if same == 0 {
        return 0.0;
    }
    let precision = same as f64 / p.len() as f64;
    let recall = same as f64 / g.len() as f64;
    (2.0 * precision * recall) / (precision + recall)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub em: bool,
    pub f1: f64,
    /// Index of the best-F1 gold (lowest index on ties), `-1` without golds.
    pub best_gold_index: i64,
}

/// Best EM and F1 over the gold answers. With no golds the item is
/// unanswerable and only an empty prediction is correct.
pub fn match_answer<S: AsRef<str>>(pred: &str, golds: &[S]) -> MatchResult {
    if golds.is_empty() {
        let abstained = normalize(pred).is_empty();
        return MatchResult {
            em: abstained,
            f1: if abstained { 1.0 } else { 0.0 },
            best_gold_index: -1,
        };
    }
    let mut best = MatchResult {
        em: false,
        f1: -1.0,
        best_gold_index: -1,
    };
    for (i, gold) in golds.iter().enumerate() {
        let f1 = token_f1(pred, gold.as_ref());
        best.em |= exact_match(pred, gold.as_ref());
        if f1 > best.f1 {
            best.f1 = f1;
            best.best_gold_index = i as i64;
        }
    }
    best
}

/// Labeling rule used when turning predictions into training targets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "metric", rename_all = "snake_case")]
#[derive(Default)]
pub enum Correctness {
    #[default]
    ExactMatch,
    F1AtLeast { threshold: f64 },
}


impl Correctness {
    pub const DEFAULT_F1_THRESHOLD: f64 = 0.8;

    pub fn is_correct(&self, result: &MatchResult) -> bool {
        match self {
            Correctness::ExactMatch => result.em,
            Correctness::F1AtLeast { threshold } => result.f1 >= *threshold,
        }
    }

    pub fn judge<S: AsRef<str>>(&self, pred: &str, golds: &[S]) -> bool {
        self.is_correct(&match_answer(pred, golds))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn normalization_examples() {
        assert_eq!(normalize("The Good Place!"), "good place");
        assert_eq!(normalize("a an the"), "");
        assert_eq!(normalize("Branson, Missouri"), "branson missouri");
        assert_eq!(normalize("  Theater  of   the Absurd "), "theater of absurd");
    }

    #[test]
    fn f1_examples() {
        assert!((token_f1("branson", "branson missouri") - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(token_f1("Ted Danson", "ted danson"), 1.0);
        assert_eq!(token_f1("alpha beta", "gamma delta"), 0.0);
        assert_eq!(token_f1("the", "a"), 1.0);
        assert_eq!(token_f1("", "x"), 0.0);
    }

    #[test]
    fn f1_counts_multiset_overlap() {
        // pred "x x" vs gold "x": overlap 1, P = 1/2, R = 1.
        assert!((token_f1("x x", "x") - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn match_examples() {
        let golds = ["Branson", "Branson, Missouri"];
        let r = match_answer("Branson", &golds);
        assert_eq!((r.em, r.f1, r.best_gold_index), (true, 1.0, 0));
        let r = match_answer("Missouri", &golds);
        assert!(!r.em);
        assert!((r.f1 - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(r.best_gold_index, 1);
        let r = match_answer::<&str>("Paris", &[]);
        assert_eq!((r.em, r.f1, r.best_gold_index), (false, 0.0, -1));
        let r = match_answer::<&str>("", &[]);
        assert!(r.em);
    }

    #[test]
    fn correctness_modes() {
        let golds = ["Branson, Missouri"];
        assert!(!Correctness::ExactMatch.judge("Branson", &golds));
        assert!(!Correctness::F1AtLeast { threshold: 0.8 }.judge("Branson", &golds));
        assert!(Correctness::F1AtLeast { threshold: 0.6 }.judge("Branson", &golds));
    }

    fn small_text() -> impl Strategy<Value = String> {
        prop::collection::vec(prop::sample::select(vec!["x", "y", "z", "the", "w,"]), 0..5)
            .prop_map(|v| v.join(" "))
    }

    proptest! {
        #[test]
        fn f1_is_symmetric_and_bounded(a in small_text(), b in small_text()) {
            let ab = token_f1(&a, &b);
            prop_assert_eq!(ab, token_f1(&b, &a));
            prop_assert!((0.0..=1.0).contains(&ab));
        }

        #[test]
        fn f1_is_one_iff_equal_multisets(a in small_text(), b in small_text()) {
            let mut ta = tokens(&a);
            let mut tb = tokens(&b);
            ta.sort();
            tb.sort();
            prop_assert_eq!(token_f1(&a, &b) == 1.0, ta == tb);
        }

        #[test]
        fn singleton_match_equals_direct(a in small_text(), b in small_text()) {
            let r = match_answer(&a, &[b.as_str()]);
            prop_assert_eq!(r.f1, token_f1(&a, &b));
            prop_assert_eq!(r.em, exact_match(&a, &b));
            prop_assert!(!r.em || r.f1 == 1.0);
        }
    }
}
