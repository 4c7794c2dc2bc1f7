//! Loading MRQA and SQuAD 2.0 files, and the NQ question/table filter.
//!
//!     cargo run --example ingest_corpus

use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use qaverify::corpus::{self, Dataset, QaInstance};
use qaverify::jsonl;

fn main() -> qaverify::Result<()> {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/fixtures");

    let file = data.join("mrqa3.jsonl");
    let reader = BufReader::new(File::open(&file).map_err(|e| qaverify::Error::io(&file, e))?);
    let mrqa = corpus::parse_mrqa(reader, Dataset::Nq)?;
    println!("MRQA: {} instances, {} bad lines", mrqa.instances.len(), mrqa.errors.len());
    for e in &mrqa.errors {
        println!("  {e}");
    }

    let squad = corpus::parse_squad(&jsonl::read_to_string(data.join("squad_small.json"))?, Dataset::SQuAD2)?;
    for inst in &squad {
        let golds: Vec<&str> = inst.gold_answers.iter().map(|g| g.text.as_str()).collect();
        println!("SQuAD {}: {} -> {golds:?}", inst.id, inst.question);
    }

    let nq: Vec<QaInstance> = jsonl::read_file(data.join("nq_filter20.jsonl"))?;
    let (kept, dropped) = corpus::filter_nq(nq);
    println!("NQ filter: kept {}, dropped {}", kept.len(), dropped.len());
    for (id, why) in dropped {
        println!("  {id}: {why:?}");
    }
    Ok(())
}
