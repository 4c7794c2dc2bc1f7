//! QA-derived NLI training pairs from pipeline stage outputs, mixed 1:1 with
//! an external NLI corpus.
//!
//!     cargo run --example build_nli_dataset

use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use qaverify::answer;
use qaverify::backend::MockBackend;
use qaverify::corpus::{self, QaInstance};
use qaverify::decontext::{self, PremiseMode};
use qaverify::nli_dataset::{self, ExternalFormat, Label, Origin};
use qaverify::scoring::Correctness;
use qaverify::{jsonl, qconvert};

fn main() -> qaverify::Result<()> {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/fixtures");
    let instances: Vec<QaInstance> = jsonl::read_file(data.join("pipeline50.jsonl"))?;
    let mock = MockBackend;

    let candidates = answer::answer_instances(&instances, &mock)?;
    let mut hypotheses = Vec::new();
    let mut premises = Vec::new();
    for (inst, cand) in instances.iter().zip(&candidates) {
        hypotheses.push(qconvert::convert_rule(&inst.question, &cand.text).for_question(&inst.id));
        let span = decontext::resolve_answer_span(inst, cand.span(), &cand.text);
        premises.push(decontext::make_premise(inst, span, PremiseMode::Decontext, Some(&mock))?);
    }
    let pairs = nli_dataset::build_qa_nli(&instances, &candidates, &premises, &hypotheses, Correctness::ExactMatch)?;
    let entailed = pairs.iter().filter(|p| p.label == Label::Entailed).count();
    println!("{} QA pairs: {entailed} entailed, {} not entailed", pairs.len(), pairs.len() - entailed);
    println!("{:?}", corpus::compute_stats(&pairs)?);

    let reader = BufReader::new(File::open(data.join("mnli_sample.jsonl")).map_err(|e| qaverify::Error::io(&data, e))?);
    let external = nli_dataset::import_external_nli(reader, ExternalFormat::Mnli)?;
    println!("{}", external.summary());

    let mixed = nli_dataset::mix_with_external(&pairs, &external.pairs, 0)?;
    let qa = mixed.iter().filter(|p| p.origin == Origin::QaDerived).count();
    println!("mixed: {} pairs, {qa} from QA", mixed.len());
    for p in mixed.iter().take(3) {
        println!("  {:?} {:?}: {} ⊨ {}", p.origin, p.label, p.premise, p.hypothesis);
    }
    Ok(())
}
