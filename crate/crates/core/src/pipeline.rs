//! End-to-end staged runs: answer → convert → premise → pair → score →
//! records → curves → error sheet, each stage written to its own file, plus
//! the hypothesis × premise ablation grid.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::answer::{self, AnswerCandidate};
use crate::backend::{BackendSpec, ConvertBackend, DecontextBackend, ModelClient, NliBackend, QaBackend};
use crate::calibrate::{self, Confidence, ConfidenceRecord, CoverageCurve, Decision, FitConfig};
use crate::corpus::QaInstance;
use crate::decontext::{self, Premise, PremiseMode};
use crate::error::{Error, Result};
use crate::jsonl;
use crate::nli::{self, EntailmentScore};
use crate::nli_dataset::{self, NliPair};
use crate::qconvert::{self, Hypothesis, HypothesisMethod};
use crate::report::{self, SheetArtifacts, Verdict};
use crate::scoring::{self, Correctness};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Backends {
    /// Used for any task without its own endpoint.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default: Option<BackendSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qa: Option<BackendSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub convert: Option<BackendSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decontext: Option<BackendSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nli: Option<BackendSpec>,
}

impl Backends {
    pub fn all_mock() -> Self {
        Self {
            default: Some(BackendSpec::Mock),
            ..Self::default()
        }
    }

    fn resolve(&self, task: Option<&BackendSpec>) -> Option<BackendSpec> {
        task.or(self.default.as_ref()).cloned()
    }

    pub fn qa(&self) -> Option<BackendSpec> {
        self.resolve(self.qa.as_ref())
    }
    pub fn convert(&self) -> Option<BackendSpec> {
        self.resolve(self.convert.as_ref())
    }
    pub fn decontext(&self) -> Option<BackendSpec> {
        self.resolve(self.decontext.as_ref())
    }
    pub fn nli(&self) -> Option<BackendSpec> {
        self.resolve(self.nli.as_ref())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CombinerSettings {
    /// Records held out (seeded, disjoint) to fit the combiner.
    pub holdout: usize,
    #[serde(default)]
    pub fit_bias: bool,
}

fn default_grid() -> Vec<f64> {
    calibrate::DEFAULT_GRID.to_vec()
}

fn default_decision() -> Decision {
    Decision::Argmax
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// Normalized corpus (one `QaInstance` per line).
    pub input: PathBuf,
    /// Directory for stage files and the manifest.
    pub output: PathBuf,
    /// Unset: `neural` when a convert endpoint is configured, else `rule`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hypothesis_mode: Option<HypothesisMethod>,
    /// Unset: `decontext` when a decontext endpoint resolves, else `sentence`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub premise_mode: Option<PremiseMode>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_grid")]
    pub grid: Vec<f64>,
    #[serde(default)]
    pub correctness: Correctness,
    #[serde(default = "default_decision")]
    pub decision: Decision,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error_sheet_cap: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub combiner: Option<CombinerSettings>,
    #[serde(default)]
    pub backends: Backends,
}

impl PipelineConfig {
    pub fn new(input: impl Into<PathBuf>, output: impl Into<PathBuf>) -> Self {
        Self {
            input: input.into(),
            output: output.into(),
            hypothesis_mode: None,
            premise_mode: None,
            seed: 0,
            grid: default_grid(),
            correctness: Correctness::default(),
            decision: Decision::Argmax,
            error_sheet_cap: None,
            combiner: None,
            backends: Backends::all_mock(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml(&jsonl::read_to_string(path)?)
    }

    pub fn effective_hypothesis_mode(&self) -> HypothesisMethod {
        self.hypothesis_mode.unwrap_or(if self.backends.convert.is_some() {
            HypothesisMethod::Neural
        } else {
            HypothesisMethod::Rule
        })
    }

    pub fn effective_premise_mode(&self) -> PremiseMode {
        self.premise_mode.unwrap_or(if self.backends.decontext().is_some() {
            PremiseMode::Decontext
        } else {
            PremiseMode::Sentence
        })
    }

    pub fn validate(&self) -> Result<()> {
        let need = |spec: Option<BackendSpec>, what: &str| {
            spec.map(|_| ())
                .ok_or_else(|| Error::Config(format!("no {what} backend configured")))
        };
        need(self.backends.qa(), "qa")?;
        need(self.backends.nli(), "nli")?;
        if self.effective_hypothesis_mode() == HypothesisMethod::Neural {
            need(self.backends.convert(), "convert")?;
        }
        if self.effective_premise_mode() == PremiseMode::Decontext {
            need(self.backends.decontext(), "decontext")?;
        }
        calibrate::validate_grid(&self.grid)?;
        Ok(())
    }

    /// SHA-256 over the canonical JSON form of the config.
    pub fn hash(&self) -> Result<String> {
        let canonical = serde_json::to_vec(self)?;
        Ok(hex::encode(Sha256::digest(&canonical)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageEntry {
    pub name: String,
    pub file: String,
    pub count: usize,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub stage: String,
    pub completed: usize,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub status: String,
    pub seed: u64,
    pub hypothesis_mode: HypothesisMethod,
    pub premise_mode: PremiseMode,
    pub backends: BTreeMap<String, String>,
    pub stages: Vec<StageEntry>,
    pub metrics: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<Failure>,
}

pub const OK: &str = "ok";
pub const FAILED: &str = "FAILED";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const RECORDS_FILE: &str = "records.jsonl";

/// One confidence score per instance from the NLI stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub instance_id: String,
    #[serde(flatten)]
    pub score: EntailmentScore,
    pub accepted: bool,
}

struct Run {
    dir: PathBuf,
    manifest: Manifest,
}

impl Run {
    fn write_manifest(&self) -> Result<()> {
        let mut text = serde_json::to_string_pretty(&self.manifest)?;
        text.push('\n');
        jsonl::write_string(self.dir.join(MANIFEST_FILE), &text)
    }

    fn fail(&mut self, name: &str, file: &str, completed: usize, err: Error) -> Error {
        self.manifest.status = FAILED.into();
        self.manifest.stages.push(StageEntry {
            name: name.into(),
            file: file.into(),
            count: completed,
            status: FAILED.into(),
        });
        self.manifest.failure = Some(Failure {
            stage: name.into(),
            completed,
            error: err.to_string(),
        });
        if let Err(e) = self.write_manifest() {
            log::error!("could not write manifest: {e}");
        }
        Error::Stage {
            stage: name.into(),
            completed,
            source: Box::new(err),
        }
    }

    /// Writes the successful prefix of a per-record stage; the first failure
    /// aborts the run.
    fn records<T: Serialize>(&mut self, name: &str, file: &str, items: Vec<Result<T>>) -> Result<Vec<T>> {
        let mut done = Vec::with_capacity(items.len());
        let mut failure = None;
        for item in items {
            match item {
                Ok(v) => done.push(v),
                Err(e) => {
                    failure = Some(e);
                    break;
                }
            }
        }
        jsonl::write_file(self.dir.join(file), &done)?;
        if let Some(e) = failure {
            return Err(self.fail(name, file, done.len(), e));
        }
        log::info!("{name}: {} records", done.len());
        self.manifest.stages.push(StageEntry {
            name: name.into(),
            file: file.into(),
            count: done.len(),
            status: OK.into(),
        });
        Ok(done)
    }

    fn text(&mut self, name: &str, file: &str, result: Result<(String, usize)>) -> Result<()> {
        match result {
            Ok((contents, count)) => {
                jsonl::write_string(self.dir.join(file), &contents)?;
                self.manifest.stages.push(StageEntry {
                    name: name.into(),
                    file: file.into(),
                    count,
                    status: OK.into(),
                });
                Ok(())
            }
            Err(e) => Err(self.fail(name, file, 0, e)),
        }
    }
}

fn client(spec: Option<BackendSpec>, what: &str) -> Result<ModelClient> {
    let spec = spec.ok_or_else(|| Error::Config(format!("no {what} backend configured")))?;
    ModelClient::from_spec(&spec)
}

/// Builds a confidence record from the per-stage outputs of one instance.
pub fn confidence_record(
    instance: &QaInstance,
    candidate: &AnswerCandidate,
    p_nli: Option<f64>,
) -> ConfidenceRecord {
    let golds: Vec<&str> = instance.gold_answers.iter().map(|g| g.text.as_str()).collect();
    let m = scoring::match_answer(&candidate.text, &golds);
    ConfidenceRecord {
        instance_id: instance.id.clone(),
        dataset: Some(instance.dataset.to_string()),
        p_qa: candidate.p_qa,
        p_nli,
        p_qa2: None,
        features: Some(calibrate::selective_features(
            &instance.context,
            &candidate.text,
            &candidate.top5,
        )),
        f1: m.f1,
        em: m.em,
    }
}

/// Curves for each confidence source, per dataset and macro-averaged.
pub fn curve_set(
    records: &[ConfidenceRecord],
    sources: &[Confidence],
    grid: &[f64],
) -> Result<Vec<(String, CoverageCurve)>> {
    let groups = calibrate::by_dataset(records);
    let mut out = Vec::new();
    for source in sources {
        let mut per = Vec::new();
        for (dataset, recs) in &groups {
            let curve = calibrate::coverage_curve(recs, source, grid)?;
            out.push((format!("{dataset}/{}", source.name()), curve.clone()));
            per.push(curve);
        }
        let refs: Vec<&CoverageCurve> = per.iter().collect();
        out.push((format!("macro/{}", source.name()), calibrate::macro_average(&refs)?));
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub manifest: Manifest,
    pub records: Vec<ConfidenceRecord>,
}

fn thread_pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Invalid(format!("thread pool: {e}")))
}

/// Runs every stage. Output bytes depend only on the config and the backends,
/// not on `jobs`.
pub fn run_pipeline(config: &PipelineConfig, jobs: usize) -> Result<PipelineOutput> {
    config.validate()?;
    let pool = thread_pool(jobs)?;
    pool.install(|| run_stages(config))
}

fn run_stages(config: &PipelineConfig) -> Result<PipelineOutput> {
    let hyp_mode = config.effective_hypothesis_mode();
    let prem_mode = config.effective_premise_mode();
    std::fs::create_dir_all(&config.output).map_err(|e| Error::io(&config.output, e))?;

    let qa = client(config.backends.qa(), "qa")?;
    let nli_client = client(config.backends.nli(), "nli")?;
    let convert = match hyp_mode {
        HypothesisMethod::Neural => Some(client(config.backends.convert(), "convert")?),
        _ => None,
    };
    let decontext = match prem_mode {
        PremiseMode::Decontext => Some(client(config.backends.decontext(), "decontext")?),
        _ => None,
    };

    let mut backends = BTreeMap::new();
    backends.insert("qa".to_string(), QaBackend::backend_id(&qa));
    backends.insert("nli".to_string(), NliBackend::backend_id(&nli_client));
    if let Some(c) = &convert {
        backends.insert("convert".to_string(), ConvertBackend::backend_id(c));
    }
    if let Some(d) = &decontext {
        backends.insert("decontext".to_string(), DecontextBackend::backend_id(d));
    }

    let mut run = Run {
        dir: config.output.clone(),
        manifest: Manifest {
            config_hash: config.hash()?,
            status: OK.into(),
            seed: config.seed,
            hypothesis_mode: hyp_mode,
            premise_mode: prem_mode,
            backends,
            stages: Vec::new(),
            metrics: BTreeMap::new(),
            failure: None,
        },
    };
    jsonl::write_string(config.output.join("config.toml"), &config.to_toml()?)?;

    let loaded: Result<Vec<QaInstance>> = jsonl::read_file(&config.input);
    let items: Vec<Result<QaInstance>> = match loaded {
        Ok(v) => v.into_iter().map(|i| i.validate().map(|_| i)).collect(),
        Err(e) => vec![Err(e)],
    };
    let instances = run.records("ingest", "instances.jsonl", items)?;
    if instances.is_empty() {
        return Err(run.fail("ingest", "instances.jsonl", 0, Error::Empty("input corpus".into())));
    }

    let items: Vec<_> = instances
        .par_iter()
        .map(|inst| answer::answer_one(inst, &qa))
        .collect();
    let candidates = run.records("answer", "candidates.jsonl", items)?;

    let items: Vec<Result<Hypothesis>> = instances
        .par_iter()
        .zip(&candidates)
        .map(|(inst, cand)| {
            let conv = convert.as_ref().map(|c| c as &dyn ConvertBackend);
            qconvert::convert(hyp_mode, &inst.question, &cand.text, conv)
                .map(|h| h.for_question(&inst.id))
        })
        .collect();
    let hypotheses = run.records("convert", "hypotheses.jsonl", items)?;

    let items: Vec<Result<Premise>> = instances
        .par_iter()
        .zip(&candidates)
        .map(|(inst, cand)| {
            let span = decontext::resolve_answer_span(inst, cand.span(), &cand.text);
            let dc = decontext.as_ref().map(|d| d as &dyn DecontextBackend);
            decontext::make_premise(inst, span, prem_mode, dc)
        })
        .collect();
    let premises = run.records("premise", "premises.jsonl", items)?;

    let items: Vec<Result<NliPair>> = match nli_dataset::build_qa_nli(
        &instances,
        &candidates,
        &premises,
        &hypotheses,
        config.correctness,
    ) {
        Ok(pairs) => pairs.into_iter().map(Ok).collect(),
        Err(e) => vec![Err(e)],
    };
    let pairs = run.records("pair", "pairs.jsonl", items)?;

    let items: Vec<Result<ScoreRecord>> = pairs
        .par_iter()
        .zip(&instances)
        .map(|(pair, inst)| {
            let score = nli::score(&pair.premise, &pair.hypothesis, &nli_client)?;
            Ok(ScoreRecord {
                instance_id: inst.id.clone(),
                accepted: config.decision.accepts(&score),
                score,
            })
        })
        .collect();
    let scores = run.records("score", "scores.jsonl", items)?;

    let items: Vec<Result<ConfidenceRecord>> = instances
        .iter()
        .zip(&candidates)
        .zip(&scores)
        .map(|((inst, cand), s)| Ok(confidence_record(inst, cand, Some(s.score.p_entail))))
        .collect();
    let records = run.records("records", RECORDS_FILE, items)?;

    let curves = curves_stage(config, &records);
    let curve_text = curves.as_ref().map(|(tsv, n, _)| (tsv.clone(), *n)).map_err(clone_err);
    run.text("curves", "curves.tsv", curve_text)?;
    if let Ok((_, _, Some(model))) = &curves {
        let mut text = serde_json::to_string_pretty(model)?;
        text.push('\n');
        jsonl::write_string(config.output.join("combiner.json"), &text)?;
    }

    let verdicts: Vec<Verdict> = records
        .iter()
        .zip(&scores)
        .map(|(r, s)| Verdict {
            instance_id: r.instance_id.clone(),
            dataset: r.dataset.clone().unwrap_or_default(),
            accepted: s.accepted,
            correct: r.is_correct(config.correctness),
        })
        .collect();
    let errors = report::detect_errors(&verdicts);
    let artifacts = sheet_artifacts(&instances, &candidates, &premises, &hypotheses, &scores);
    let mut sheet = Vec::new();
    let sheet_result = report::export_annotation_sheet(&mut sheet, &errors, &artifacts, config.error_sheet_cap)
        .map(|n| (String::from_utf8_lossy(&sheet).into_owned(), n));
    run.text("errors", "errors.tsv", sheet_result)?;

    run.manifest.metrics = metrics(&records, &scores, &instances, &verdicts, config);
    run.write_manifest()?;
    Ok(PipelineOutput {
        manifest: run.manifest,
        records,
    })
}

fn clone_err(e: &Error) -> Error {
    Error::Invalid(e.to_string())
}

type CurveStage = (String, usize, Option<calibrate::CombinerModel>);

fn curves_stage(config: &PipelineConfig, records: &[ConfidenceRecord]) -> Result<CurveStage> {
    let mut sources = vec![Confidence::Qa, Confidence::Nli];
    let mut eval: Vec<ConfidenceRecord> = records.to_vec();
    let mut model = None;
    if let Some(settings) = &config.combiner {
        let (held, rest) = calibrate::holdout_split(records, settings.holdout, config.seed)?;
        let fit = FitConfig {
            fit_bias: settings.fit_bias,
            seed: config.seed,
            ..FitConfig::default()
        };
        let mut m = calibrate::fit_combiner(&held, config.correctness, &fit)?;
        if let Some(meta) = &mut m.fit_meta {
            meta.loss_trace.clear();
        }
        sources.push(Confidence::Combined(m.clone()));
        model = Some(m);
        eval = rest;
    }
    let curves = curve_set(&eval, &sources, &config.grid)?;
    let n = curves.len();
    Ok((calibrate::curves_tsv(&curves), n, model))
}

fn sheet_artifacts(
    instances: &[QaInstance],
    candidates: &[AnswerCandidate],
    premises: &[Premise],
    hypotheses: &[Hypothesis],
    scores: &[ScoreRecord],
) -> HashMap<String, SheetArtifacts> {
    instances
        .iter()
        .zip(candidates)
        .zip(premises)
        .zip(hypotheses)
        .zip(scores)
        .map(|((((inst, cand), prem), hyp), score)| {
            (
                inst.id.clone(),
                SheetArtifacts {
                    question: Some(inst.question.clone()),
                    answer: Some(cand.text.clone()),
                    gold_answers: Some(inst.gold_answers.iter().map(|g| g.text.clone()).collect()),
                    premise: Some(prem.text.clone()),
                    premise_mode: Some(prem.mode.to_string()),
                    decontext_category: Some(
                        serde_json::to_value(prem.category)
                            .ok()
                            .and_then(|v| v.as_str().map(str::to_string))
                            .unwrap_or_default(),
                    ),
                    hypothesis: Some(hyp.text.clone()),
                    hypothesis_method: Some(hyp.method.to_string()),
                    p_entail: Some(score.score.p_entail),
                    p_qa: Some(cand.p_qa),
                },
            )
        })
        .collect()
}

fn metrics(
    records: &[ConfidenceRecord],
    scores: &[ScoreRecord],
    instances: &[QaInstance],
    verdicts: &[Verdict],
    config: &PipelineConfig,
) -> BTreeMap<String, f64> {
    let n = records.len() as f64;
    let mut m = BTreeMap::new();
    m.insert("answer_em".into(), records.iter().filter(|r| r.em).count() as f64 / n);
    m.insert("answer_f1".into(), records.iter().map(|r| r.f1).sum::<f64>() / n);
    m.insert(
        "correct".into(),
        records.iter().filter(|r| r.is_correct(config.correctness)).count() as f64,
    );
    m.insert("accepted".into(), scores.iter().filter(|s| s.accepted).count() as f64);
    let errors = report::detect_errors(verdicts);
    m.insert("false_positives".into(), errors.iter().filter(|e| e.polarity == report::Polarity::FalsePositive).count() as f64);
    m.insert("false_negatives".into(), errors.iter().filter(|e| e.polarity == report::Polarity::FalseNegative).count() as f64);
    let items: Vec<(bool, EntailmentScore)> = instances
        .iter()
        .zip(scores)
        .map(|(i, s)| (i.answerable, s.score.clone()))
        .collect();
    if let Ok(rates) = calibrate::rejection_rates(&items, config.decision) {
        m.insert("accept_rate_answerable".into(), rates.accept_rate_answerable);
        m.insert("reject_rate_unanswerable".into(), rates.reject_rate_unanswerable);
    }
    m
}

/// One ablation cell: a hypothesis mode crossed with a premise mode.
#[derive(Debug, Clone)]
pub struct AblationCell {
    pub hypothesis_mode: HypothesisMethod,
    pub premise_mode: PremiseMode,
    pub output: PathBuf,
    /// Pooled curve ranked by NLI confidence, or the failure message.
    pub curve: std::result::Result<CoverageCurve, String>,
}

impl AblationCell {
    pub fn label(&self) -> String {
        format!("{}+{}", self.hypothesis_mode, self.premise_mode)
    }
}

#[derive(Debug, Clone)]
pub struct Ablation {
    pub grid: Vec<f64>,
    pub cells: Vec<AblationCell>,
}

pub const ABLATION_PREMISES: [PremiseMode; 3] = [PremiseMode::Sentence, PremiseMode::Decontext, PremiseMode::Full];

/// {converted, concat} × {sentence, decontext, full}. Converted is the base
/// config's rule or neural mode. Each cell is a full pipeline run under
/// `<output>/<hypothesis>-<premise>/`; failures stay inside their cell.
pub fn run_ablation(base: &PipelineConfig, jobs: usize) -> Result<Ablation> {
    let converted = match base.effective_hypothesis_mode() {
        HypothesisMethod::Concat => HypothesisMethod::Rule,
        m => m,
    };
    let grid = calibrate::validate_grid(&base.grid)?;
    let mut cells = Vec::new();
    for hyp in [converted, HypothesisMethod::Concat] {
        for prem in ABLATION_PREMISES {
            let mut config = base.clone();
            config.hypothesis_mode = Some(hyp);
            config.premise_mode = Some(prem);
            config.output = base.output.join(format!("{hyp}-{prem}"));
            let curve = run_pipeline(&config, jobs)
                .and_then(|out| calibrate::coverage_curve(&out.records, &Confidence::Nli, &grid))
                .map_err(|e| {
                    log::warn!("ablation cell {hyp}+{prem} failed: {e}");
                    e.to_string()
                });
            cells.push(AblationCell {
                hypothesis_mode: hyp,
                premise_mode: prem,
                output: config.output,
                curve,
            });
        }
    }
    Ok(Ablation { grid, cells })
}

impl Ablation {
    /// Coverage rows × cell columns of F1 (×100); failed cells print `FAILED`.
    pub fn table(&self) -> String {
        let mut out = String::from("coverage");
        for c in &self.cells {
            let _ = write!(out, "\t{}", c.label());
        }
        out.push('\n');
        for (i, k) in self.grid.iter().enumerate() {
            let _ = write!(out, "{k:.2}");
            for c in &self.cells {
                match &c.curve {
                    Ok(curve) => {
                        let _ = write!(out, "\t{:.1}", 100.0 * curve.points[i].f1);
                    }
                    Err(_) => out.push_str("\tFAILED"),
                }
            }
            out.push('\n');
        }
        out
    }
}
