//! Accept or reject QA predictions by NLI: answer → hypothesis, answer
//! sentence → premise, entailment decides. Uses the mock backends.
//!
//!     cargo run --example verify_answers

use std::path::Path;

use qaverify::answer;
use qaverify::backend::MockBackend;
use qaverify::calibrate::{self, Decision};
use qaverify::corpus::QaInstance;
use qaverify::decontext::{self, PremiseMode};
use qaverify::{jsonl, nli, qconvert};

fn main() -> qaverify::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/fixtures/adversarial.jsonl");
    let instances: Vec<QaInstance> = jsonl::read_file(path)?;
    let mock = MockBackend;
    let mut items = Vec::new();
    for inst in &instances {
        let cand = answer::answer_one(inst, &mock)?;
        let hyp = qconvert::convert_rule(&inst.question, &cand.text);
        let span = decontext::resolve_answer_span(inst, cand.span(), &cand.text);
        let premise = decontext::make_premise(inst, span, PremiseMode::Sentence, None)?;
        let score = nli::score(&premise.text, &hyp.text, &mock)?;
        println!(
            "{:<8} {:<11} p_entail={:.2}  {}  ⊨?  {}",
            inst.id,
            if score.accepts() { "ACCEPT" } else { "reject" },
            score.p_entail,
            premise.text,
            hyp.text
        );
        items.push((inst.answerable, score));
    }
    let rates = calibrate::rejection_rates(&items, Decision::Argmax)?;
    println!(
        "\nunanswerable rejected {:.0}%, answerable accepted {:.0}%",
        100.0 * rates.reject_rate_unanswerable,
        100.0 * rates.accept_rate_answerable
    );
    Ok(())
}
