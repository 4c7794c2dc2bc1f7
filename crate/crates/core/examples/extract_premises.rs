//! Sentence splitting and the three premise modes for one instance.
//!
//!     cargo run --example extract_premises

use std::collections::BTreeMap;

use qaverify::backend::MockBackend;
use qaverify::corpus::{Dataset, GoldAnswer, QaInstance};
use qaverify::decontext::{self, PremiseMode};

fn main() -> qaverify::Result<()> {
    let context = "The Good Place is an American fantasy comedy. It was created by Michael Schur. \
                   Ted Danson plays Michael, an immortal architect. Dr. Chidi Anagonye teaches ethics.";
    for s in decontext::split_sentences(context) {
        println!("[{:>3}, {:>3})  {}", s.char_start, s.char_end, s.text);
    }

    let answer = "Michael Schur";
    let start = context.find(answer).unwrap();
    let instance = QaInstance {
        id: "demo".into(),
        dataset: Dataset::Nq,
        question: "who created the good place".into(),
        context: context.into(),
        gold_answers: vec![GoldAnswer {
            text: answer.into(),
            start: start as i64,
            end: (start + answer.len()) as i64,
        }],
        answerable: true,
        meta: BTreeMap::from([("title".to_string(), "The Good Place".to_string())]),
    };
    let span = decontext::resolve_answer_span(&instance, None, answer);
    println!();
    for mode in [PremiseMode::Sentence, PremiseMode::Decontext, PremiseMode::Full] {
        let p = decontext::make_premise(&instance, span, mode, Some(&MockBackend))?;
        println!("{mode:<9} ({}) {}", p.category, p.text);
    }
    Ok(())
}
