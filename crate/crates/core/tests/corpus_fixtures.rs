use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use qaverify::corpus::{self, Dataset, DropReason, QaInstance};
use qaverify::jsonl;
use qaverify::Error;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data/fixtures").join(name)
}

#[test]
fn mrqa_fixture_keeps_good_lines() {
    let reader = BufReader::new(File::open(fixture("mrqa3.jsonl")).unwrap());
    let parsed = corpus::parse_mrqa(reader, Dataset::Nq).unwrap();
    assert_eq!(parsed.instances.len(), 2);
    assert_eq!(parsed.errors.len(), 1);
    assert!(matches!(parsed.errors[0], Error::Parse { line: 2, .. }));
    let first = &parsed.instances[0];
    assert_eq!(first.id, "mrqa-1");
    let (s, e) = first.gold_answers[0].span().unwrap();
    assert_eq!(qaverify::text::char_slice(&first.context, s, e), Some("Ted Danson"));
    // No detected spans: offsets come from the first occurrence.
    assert_eq!(parsed.instances[1].gold_answers[0].span(), Some((56, 64)));
}

#[test]
fn squad_fixture_has_five_questions() {
    let doc = std::fs::read_to_string(fixture("squad_small.json")).unwrap();
    let instances = corpus::parse_squad(&doc, Dataset::SQuAD2).unwrap();
    assert_eq!(instances.len(), 5);
    assert_eq!(instances.iter().filter(|i| !i.answerable).count(), 1);
    let impossible = instances.iter().find(|i| i.id == "sq-3").unwrap();
    assert!(impossible.gold_answers.is_empty());
    assert!(instances.iter().all(|i| i.title() == "Normans"));
}

#[test]
fn nq_filter_fixture() {
    let instances: Vec<QaInstance> = jsonl::read_file(fixture("nq_filter20.jsonl")).unwrap();
    assert_eq!(instances.len(), 20);
    let (kept, dropped) = corpus::filter_nq(instances);
    assert_eq!(kept.len(), 15);
    let count = |r: DropReason| dropped.iter().filter(|(_, why)| *why == r).count();
    assert_eq!(count(DropReason::Narrative), 3);
    assert_eq!(count(DropReason::Table), 2);
}

#[test]
fn fixture_instances_validate() {
    for name in ["pipeline50.jsonl", "nq_filter20.jsonl", "adversarial.jsonl"] {
        let instances: Vec<QaInstance> = jsonl::read_file(fixture(name)).unwrap();
        for inst in &instances {
            inst.validate().unwrap_or_else(|e| panic!("{name}: {e}"));
        }
    }
    let p50: Vec<QaInstance> = jsonl::read_file(fixture("pipeline50.jsonl")).unwrap();
    let wrong = p50.iter().filter(|i| i.meta.contains_key("mock_answer")).count();
    assert_eq!((p50.len(), wrong), (50, 20));
}
