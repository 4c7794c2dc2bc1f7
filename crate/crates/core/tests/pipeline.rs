use std::net::TcpListener;
use std::path::{Path, PathBuf};

use qaverify::backend::BackendSpec;
use qaverify::calibrate::{self, Confidence, ConfidenceRecord};
use qaverify::corpus::QaInstance;
use qaverify::decontext::{Premise, PremiseMode};
use qaverify::jsonl;
use qaverify::pipeline::{self, CombinerSettings, Manifest, PipelineConfig, FAILED};
use qaverify::qconvert::{Hypothesis, HypothesisMethod};
use qaverify::Error;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data/fixtures").join(name)
}

fn manifest(dir: &Path) -> Manifest {
    serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn stage_files_are_id_aligned() {
    let tmp = tempfile::tempdir().unwrap();
    let config = PipelineConfig::new(fixture("pipeline50.jsonl"), tmp.path());
    pipeline::run_pipeline(&config, 3).unwrap();
    let instances: Vec<QaInstance> = jsonl::read_file(tmp.path().join("instances.jsonl")).unwrap();
    let hyps: Vec<Hypothesis> = jsonl::read_file(tmp.path().join("hypotheses.jsonl")).unwrap();
    let prems: Vec<Premise> = jsonl::read_file(tmp.path().join("premises.jsonl")).unwrap();
    let recs: Vec<ConfidenceRecord> = jsonl::read_file(tmp.path().join("records.jsonl")).unwrap();
    for (((i, h), p), r) in instances.iter().zip(&hyps).zip(&prems).zip(&recs) {
        assert_eq!(i.id, h.source_question_id);
        assert_eq!(i.id, p.instance_id);
        assert_eq!(i.id, r.instance_id);
    }
    let m = manifest(tmp.path());
    assert_eq!(m.status, "ok");
    assert_eq!(m.premise_mode, PremiseMode::Decontext);
    assert_eq!(m.backends["decontext"], "mock");
}

#[test]
fn invalid_record_aborts_ingest_with_partial_output() {
    let tmp = tempfile::tempdir().unwrap();
    let mut lines: Vec<String> = std::fs::read_to_string(fixture("pipeline50.jsonl"))
        .unwrap()
        .lines()
        .take(5)
        .map(str::to_string)
        .collect();
    let mut bad: QaInstance = serde_json::from_str(&lines[3]).unwrap();
    bad.gold_answers[0].end = 10_000;
    lines[3] = serde_json::to_string(&bad).unwrap();
    let input = tmp.path().join("in.jsonl");
    std::fs::write(&input, lines.join("\n") + "\n").unwrap();

    let out = tmp.path().join("out");
    let err = pipeline::run_pipeline(&PipelineConfig::new(&input, &out), 2).unwrap_err();
    match &err {
        Error::Stage { stage, completed, .. } => assert_eq!((stage.as_str(), *completed), ("ingest", 3)),
        other => panic!("unexpected {other}"),
    }
    assert_eq!(err.exit_code(), 2);
    let kept: Vec<QaInstance> = jsonl::read_file(out.join("instances.jsonl")).unwrap();
    assert_eq!(kept.len(), 3);
    let m = manifest(&out);
    assert_eq!(m.status, FAILED);
    let failure = m.failure.unwrap();
    assert_eq!((failure.stage.as_str(), failure.completed), ("ingest", 3));
}

#[test]
fn unreachable_nli_backend_fails_the_score_stage() {
    let tmp = tempfile::tempdir().unwrap();
    let port = {
        let l = TcpListener::bind("127.0.0.1:0").unwrap();
        l.local_addr().unwrap().port()
    };
    let mut config = PipelineConfig::new(fixture("pipeline50.jsonl"), tmp.path());
    config.backends.nli = Some(BackendSpec::Http(format!("http://127.0.0.1:{port}")));
    let err = pipeline::run_pipeline(&config, 2).unwrap_err();
    assert!(matches!(&err, Error::Stage { stage, completed: 0, .. } if stage == "score"), "{err}");
    assert_eq!(err.exit_code(), 3);
    let m = manifest(tmp.path());
    assert_eq!(m.status, FAILED);
    let done: Vec<&str> = m.stages.iter().filter(|s| s.status == "ok").map(|s| s.name.as_str()).collect();
    assert_eq!(done, ["ingest", "answer", "convert", "premise", "pair"]);
    assert!(tmp.path().join("pairs.jsonl").exists());
}

#[test]
fn missing_endpoints_are_config_errors() {
    let mut config = PipelineConfig::new("in", "out");
    config.backends = Default::default();
    config.backends.qa = Some(BackendSpec::Mock);
    config.backends.nli = Some(BackendSpec::Mock);
    config.hypothesis_mode = Some(HypothesisMethod::Neural);
    assert!(matches!(pipeline::run_pipeline(&config, 1), Err(Error::Config(_))));
    config.hypothesis_mode = Some(HypothesisMethod::Rule);
    config.premise_mode = Some(PremiseMode::Decontext);
    assert!(matches!(config.validate(), Err(Error::Config(_))));
    config.premise_mode = None;
    assert_eq!(config.effective_premise_mode(), PremiseMode::Sentence);
    config.validate().unwrap();
}

#[test]
fn ablation_has_six_cells_matching_standalone_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let base = PipelineConfig::new(fixture("pipeline50.jsonl"), tmp.path().join("ablation"));
    let ablation = pipeline::run_ablation(&base, 4).unwrap();
    assert_eq!(ablation.cells.len(), 6);
    assert!(ablation.cells.iter().all(|c| c.curve.is_ok()));
    let labels: Vec<String> = ablation.cells.iter().map(|c| c.label()).collect();
    assert_eq!(
        labels,
        ["rule+sentence", "rule+decontext", "rule+full", "concat+sentence", "concat+decontext", "concat+full"]
    );

    let mut solo = base.clone();
    solo.hypothesis_mode = Some(HypothesisMethod::Rule);
    solo.premise_mode = Some(PremiseMode::Sentence);
    solo.output = tmp.path().join("solo");
    let out = pipeline::run_pipeline(&solo, 1).unwrap();
    let curve = calibrate::coverage_curve(&out.records, &Confidence::Nli, &base.grid).unwrap();
    assert_eq!(ablation.cells[0].curve.as_ref().unwrap(), &curve);

    let table = ablation.table();
    assert_eq!(table.lines().count(), 1 + ablation.grid.len());
    assert_eq!(table.lines().next().unwrap().split('\t').count(), 7);
}

#[test]
fn ablation_marks_failed_cells() {
    let tmp = tempfile::tempdir().unwrap();
    let port = {
        let l = TcpListener::bind("127.0.0.1:0").unwrap();
        l.local_addr().unwrap().port()
    };
    let mut base = PipelineConfig::new(fixture("pipeline50.jsonl"), tmp.path());
    base.backends.decontext = Some(BackendSpec::Http(format!("http://127.0.0.1:{port}")));
    let ablation = pipeline::run_ablation(&base, 2).unwrap();
    let failed: Vec<String> = ablation.cells.iter().filter(|c| c.curve.is_err()).map(|c| c.label()).collect();
    assert_eq!(failed, ["rule+decontext", "concat+decontext"]);
    let table = ablation.table();
    let first_row = table.lines().nth(1).unwrap();
    assert_eq!(first_row.matches("FAILED").count(), 2);
}

#[test]
fn combiner_holdout_writes_a_model() {
    let tmp = tempfile::tempdir().unwrap();
    let mut config = PipelineConfig::new(fixture("pipeline50.jsonl"), tmp.path());
    config.combiner = Some(CombinerSettings { holdout: 20, fit_bias: true });
    pipeline::run_pipeline(&config, 2).unwrap();
    let model: calibrate::CombinerModel =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("combiner.json")).unwrap()).unwrap();
    assert!(model.w1.is_finite() && model.w2.is_finite());
    let curves = std::fs::read_to_string(tmp.path().join("curves.tsv")).unwrap();
    assert!(curves.contains("macro/combined"));
}

#[test]
fn config_changes_change_the_hash() {
    let tmp = tempfile::tempdir().unwrap();
    let a = PipelineConfig::new(fixture("pipeline50.jsonl"), tmp.path().join("a"));
    let mut b = a.clone();
    b.grid = vec![0.2, 0.4, 1.0];
    b.output = a.output.clone();
    let ha = pipeline::run_pipeline(&a, 1).unwrap().manifest.config_hash;
    let hb = pipeline::run_pipeline(&b, 1).unwrap().manifest.config_hash;
    assert_ne!(ha, hb);
    let text = std::fs::read_to_string(a.output.join("config.toml")).unwrap();
    assert_eq!(PipelineConfig::from_toml(&text).unwrap(), b);
}
