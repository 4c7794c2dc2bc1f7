//! Drives the `qaverify` binary through every subcommand on the fixtures.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data/fixtures").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qaverify")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

#[test]
fn stages_one_at_a_time() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let input = fixture("pipeline50.jsonl");
    let input = input.to_str().unwrap();

    ok(&["answer", "--backend", "mock", "--in", input, "--out", &p(d, "cand.jsonl")]);
    ok(&["convert", "--mode", "rule", "--in", input, "--answers", &p(d, "cand.jsonl"), "--out", &p(d, "hyp.jsonl")]);
    ok(&["premise", "--mode", "decontext", "--backend", "mock", "--in", input, "--answers", &p(d, "cand.jsonl"), "--out", &p(d, "prem.jsonl")]);
    let stats = ok(&[
        "build-nli", "--instances", input, "--answers", &p(d, "cand.jsonl"), "--premises", &p(d, "prem.jsonl"),
        "--hypotheses", &p(d, "hyp.jsonl"), "--out", &p(d, "pairs.jsonl"),
    ]);
    assert!(stats.contains("\"count\":50"), "{stats}");
    let mixed = ok(&[
        "mix-nli", "--seed", "4", "--qa", &p(d, "pairs.jsonl"), "--external", fixture("mnli_sample.jsonl").to_str().unwrap(),
        "--external-format", "mnli", "--out", &p(d, "mixed.jsonl"),
    ]);
    assert!(mixed.starts_with("100 pairs"), "{mixed}");
    ok(&["score-nli", "--backend", "mock", "--in", &p(d, "pairs.jsonl"), "--out", &p(d, "scores.jsonl")]);
    let em = ok(&["score-answers", "--pred", &p(d, "cand.jsonl"), "--gold", input, "--out", &p(d, "ans.jsonl")]);
    assert!(em.starts_with("EM 60.0  F1 60.0"), "{em}");
    ok(&["evaluate", "records", "--instances", input, "--answers", &p(d, "cand.jsonl"), "--scores", &p(d, "scores.jsonl"), "--out", &p(d, "rec.jsonl")]);
    ok(&["calibrate", "fit-combiner", "--in", &p(d, "rec.jsonl"), "--out", &p(d, "comb.json"), "--bias"]);
    ok(&["calibrate", "fit-selective", "--in", &p(d, "rec.jsonl"), "--out", &p(d, "sel.json")]);
    let table = ok(&["evaluate", "curve", "--in", &p(d, "rec.jsonl"), "--confidence", "qa,nli,combined", "--model", &p(d, "comb.json"), "--out", &p(d, "curves.tsv")]);
    assert!(table.starts_with("coverage\tqa\tnli\tcombined"), "{table}");
    let sel = ok(&["evaluate", "curve", "--in", &p(d, "rec.jsonl"), "--confidence", "selective", "--model", &p(d, "sel.json"), "--grid", "0.5,1.0"]);
    assert_eq!(sel.lines().count(), 3, "{sel}");

    // Per-stage files must match what the all-in-one run writes.
    let cfg = format!("input = {input:?}\noutput = {:?}\n[backends]\ndefault = \"mock\"\n", p(d, "run"));
    std::fs::write(d.join("cfg.toml"), cfg).unwrap();
    ok(&["--config", &p(d, "cfg.toml"), "pipeline"]);
    for (mine, theirs) in [("cand.jsonl", "candidates.jsonl"), ("hyp.jsonl", "hypotheses.jsonl"), ("prem.jsonl", "premises.jsonl"), ("pairs.jsonl", "pairs.jsonl"), ("rec.jsonl", "records.jsonl")] {
        assert_eq!(
            std::fs::read_to_string(d.join(mine)).unwrap(),
            std::fs::read_to_string(d.join("run").join(theirs)).unwrap(),
            "{mine}"
        );
    }
}

#[test]
fn ingest_formats() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let out = run(&["ingest", "--format", "mrqa", "--dataset", "NQ", "--in", fixture("mrqa3.jsonl").to_str().unwrap(), "--out", &p(d, "a.jsonl")]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("1 malformed lines skipped"));
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "2 instances");
    let s = ok(&["ingest", "--format", "squad2", "--dataset", "squad2", "--in", fixture("squad_small.json").to_str().unwrap(), "--out", &p(d, "b.jsonl")]);
    assert_eq!(s.trim(), "5 instances");
}

#[test]
fn errors_report_and_agreement() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let cfg = format!(
        "input = {:?}\noutput = {:?}\n[backends]\ndefault = \"mock\"\n",
        fixture("pipeline50.jsonl").to_str().unwrap(),
        p(d, "run")
    );
    std::fs::write(d.join("cfg.toml"), cfg).unwrap();
    ok(&["--config", &p(d, "cfg.toml"), "pipeline"]);
    let rows = ok(&["report", "errors", "--run", &p(d, "run"), "--out", &p(d, "sheet.tsv")]);
    let n: usize = rows.split_whitespace().next().unwrap().parse().unwrap();
    assert!(n > 0);

    // Three annotators: two agree on every row, the third differs on one.
    let sheet = std::fs::read_to_string(d.join("sheet.tsv")).unwrap();
    let classes = ["entailment", "decontext", "question_conversion"];
    for (rater, flip) in [("a", false), ("b", false), ("c", true)] {
        let mut row = 0;
        let filled: Vec<String> = sheet
            .lines()
            .map(|line| {
                if line.starts_with('#') || line.starts_with("instance_id") {
                    return line.to_string();
                }
                let label = if flip && row == 0 { "wrong_context" } else { classes[row % 3] };
                row += 1;
                let mut cols: Vec<&str> = line.split('\t').collect();
                *cols.last_mut().unwrap() = label;
                cols.join("\t")
            })
            .collect();
        std::fs::write(d.join(format!("{rater}.tsv")), filled.join("\n") + "\n").unwrap();
    }
    let kappa = ok(&["report", "kappa", "--sheets", &p(d, "a.tsv"), &p(d, "b.tsv"), &p(d, "c.tsv")]);
    let k: f64 = kappa.lines().next().unwrap().split('\t').nth(1).unwrap().parse().unwrap();
    assert!(k > 0.5 && k < 1.0, "{kappa}");
    let table = ok(&["report", "breakdown", "--sheet", &p(d, "a.tsv")]);
    assert!(table.lines().count() > 2, "{table}");
}

#[test]
fn ablate_writes_six_columns() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let cfg = format!(
        "input = {:?}\noutput = {:?}\ngrid = [0.2, 0.5, 1.0]\n[backends]\ndefault = \"mock\"\n",
        fixture("pipeline50.jsonl").to_str().unwrap(),
        p(d, "abl")
    );
    std::fs::write(d.join("cfg.toml"), cfg).unwrap();
    let table = ok(&["--config", &p(d, "cfg.toml"), "--jobs", "2", "ablate"]);
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines.len(), 4);
    assert_eq!(lines[0].split('\t').count(), 7);
    assert!(!table.contains("FAILED"));
    assert!(d.join("abl/concat-full/manifest.json").exists());
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    // Bad usage and validation failures exit 2.
    assert_eq!(run(&["convert", "--mode", "bogus"]).status.code(), Some(2));
    assert_eq!(run(&["answer", "--backend", "mock", "--in", &p(d, "missing.jsonl"), "--out", &p(d, "x")]).status.code(), Some(2));
    assert_eq!(run(&["pipeline"]).status.code(), Some(2));
    // Unreachable backend exits 3.
    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let out = run(&[
        "answer", "--backend", &format!("http:127.0.0.1:{port}"), "--in", fixture("pipeline50.jsonl").to_str().unwrap(),
        "--out", &p(d, "x"),
    ]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}
