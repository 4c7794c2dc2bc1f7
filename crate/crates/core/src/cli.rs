//! Command-line front end. Every stage can run alone on line-delimited files,
//! or all at once through `pipeline`.

use std::collections::HashMap;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::answer::{self, AnswerCandidate};
use crate::backend::{BackendSpec, ModelClient, NliBackend};
use crate::calibrate::{self, Confidence, ConfidenceRecord, Decision, FitConfig};
use crate::corpus::{self, Dataset, QaInstance};
use crate::decontext::{self, Premise, PremiseMode};
use crate::error::{Error, Result};
use crate::jsonl;
use crate::nli::{self, EntailmentScore};
use crate::nli_dataset::{self, ExternalFormat, NliPair};
use crate::pipeline::{self, PipelineConfig, ScoreRecord};
use crate::qconvert::{self, Hypothesis, HypothesisMethod};
use crate::report::{self, SheetArtifacts, Verdict};
use crate::scoring::Correctness;

#[derive(Debug, Parser)]
#[command(name = "qaverify", version, about = "Verify QA answers with NLI")]
pub struct Cli {
    /// Pipeline config (TOML). Supplies backends for single-stage commands.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for sampling and splits.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for backend calls.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Normalize MRQA or SQuAD 2.0 files into instance records.
    Ingest(IngestArgs),
    /// Run the base QA model.
    Answer(AnswerArgs),
    /// Turn (question, answer) into a hypothesis.
    Convert(ConvertArgs),
    /// Extract the premise around each answer.
    Premise(PremiseArgs),
    /// Join stage outputs into labeled NLI pairs.
    BuildNli(BuildNliArgs),
    /// Mix QA-derived pairs 1:1 with external NLI pairs.
    MixNli(MixNliArgs),
    /// Score NLI pairs.
    ScoreNli(ScoreNliArgs),
    /// EM/F1 of predictions against gold answers.
    ScoreAnswers(ScoreAnswersArgs),
    /// Fit the confidence combiner or the selective calibrator.
    #[command(subcommand)]
    Calibrate(CalibrateCommand),
    /// Confidence records and coverage curves.
    #[command(subcommand)]
    Evaluate(EvaluateCommand),
    /// Error sheets, annotator agreement and breakdowns.
    #[command(subcommand)]
    Report(ReportCommand),
    /// Hypothesis × premise ablation grid.
    Ablate(RunArgs),
    /// All stages end to end.
    Pipeline(RunArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum InputFormat {
    Mrqa,
    Squad2,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long, value_enum)]
    pub format: InputFormat,
    #[arg(long)]
    pub dataset: String,
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Drop narrative (non-question) and table-context NQ items.
    #[arg(long)]
    pub filter_nq: bool,
}

#[derive(Debug, Args)]
pub struct AnswerArgs {
    /// `mock` or `http:<url>`.
    #[arg(long)]
    pub backend: Option<BackendSpec>,
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ConvertArgs {
    #[arg(long)]
    pub mode: HypothesisMethod,
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub answers: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub backend: Option<BackendSpec>,
}

#[derive(Debug, Args)]
pub struct PremiseArgs {
    #[arg(long)]
    pub mode: PremiseMode,
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub answers: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub backend: Option<BackendSpec>,
}

#[derive(Debug, Args)]
pub struct BuildNliArgs {
    #[arg(long)]
    pub instances: PathBuf,
    #[arg(long)]
    pub answers: PathBuf,
    #[arg(long)]
    pub premises: PathBuf,
    #[arg(long)]
    pub hypotheses: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// `em` or `f1:<threshold>`.
    #[arg(long, default_value = "em", value_parser = parse_correctness)]
    pub correct: Correctness,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ExternalInput {
    /// Already in pair form.
    Pairs,
    Mnli,
    FeverNli,
}

#[derive(Debug, Args)]
pub struct MixNliArgs {
    #[arg(long)]
    pub qa: PathBuf,
    #[arg(long)]
    pub external: PathBuf,
    #[arg(long, value_enum, default_value = "pairs")]
    pub external_format: ExternalInput,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ScoreNliArgs {
    #[arg(long)]
    pub backend: Option<BackendSpec>,
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Accept at `p_entail >= t` instead of argmax.
    #[arg(long)]
    pub threshold: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ScoreAnswersArgs {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub gold: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum CalibrateCommand {
    /// Logistic combination of QA and NLI confidence.
    FitCombiner(FitCombinerArgs),
    /// Feature-based selective-QA calibrator.
    FitSelective(FitSelectiveArgs),
}

#[derive(Debug, Args)]
pub struct FitCombinerArgs {
    /// Confidence records.
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Fit a bias term (frozen at 0 otherwise).
    #[arg(long)]
    pub bias: bool,
    /// Combine two QA posteriors (`p_qa`, `p_qa2`) instead of QA and NLI.
    #[arg(long)]
    pub ensemble: bool,
    /// Fit on a seeded holdout of this many records.
    #[arg(long)]
    pub holdout: Option<usize>,
    #[arg(long, default_value = "em", value_parser = parse_correctness)]
    pub correct: Correctness,
}

#[derive(Debug, Args)]
pub struct FitSelectiveArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub holdout: Option<usize>,
    #[arg(long, default_value = "em", value_parser = parse_correctness)]
    pub correct: Correctness,
}

#[derive(Debug, Subcommand)]
pub enum EvaluateCommand {
    /// Join instances, answers and NLI scores into confidence records.
    Records(RecordsArgs),
    /// Coverage–F1 curves, per dataset and macro-averaged.
    Curve(CurveArgs),
}

#[derive(Debug, Args)]
pub struct RecordsArgs {
    #[arg(long)]
    pub instances: PathBuf,
    #[arg(long)]
    pub answers: PathBuf,
    #[arg(long)]
    pub scores: Option<PathBuf>,
    /// Answers of a second QA model, stored as `p_qa2`.
    #[arg(long)]
    pub second_answers: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, ValueEnum)]
pub enum ConfidenceKind {
    Qa,
    Nli,
    Oracle,
    Combined,
    Ensemble,
    Selective,
}

#[derive(Debug, Args)]
pub struct CurveArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "qa,nli")]
    pub confidence: Vec<ConfidenceKind>,
    /// Fitted combiner or calibrator, for `combined`, `ensemble`, `selective`.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub grid: Option<Vec<f64>>,
    /// Long-form curve file; the macro comparison table goes to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum ReportCommand {
    /// Export verifier errors as an annotation sheet.
    Errors(ErrorsArgs),
    /// Fleiss' kappa over annotated sheets.
    Kappa(KappaArgs),
    /// Error-class counts by dataset and polarity.
    Breakdown(BreakdownArgs),
}

#[derive(Debug, Args)]
pub struct ErrorsArgs {
    /// A pipeline output directory; stage files supply the sheet columns.
    #[arg(long)]
    pub run: PathBuf,
    /// At most this many rows per dataset and polarity.
    #[arg(long)]
    pub cap: Option<usize>,
    #[arg(long, default_value = "em", value_parser = parse_correctness)]
    pub correct: Correctness,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct KappaArgs {
    #[arg(long, num_args = 2.., required = true)]
    pub sheets: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BreakdownArgs {
    #[arg(long)]
    pub sheet: PathBuf,
    #[arg(long, value_delimiter = ',')]
    pub datasets: Option<Vec<String>>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Overrides the config's output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn parse_correctness(s: &str) -> std::result::Result<Correctness, String> {
    match s {
        "em" | "exact_match" => Ok(Correctness::ExactMatch),
        _ => {
            let t = s
                .strip_prefix("f1:")
                .and_then(|t| t.parse::<f64>().ok())
                .filter(|t| (0.0..=1.0).contains(t))
                .ok_or_else(|| format!("expected `em` or `f1:<threshold in [0,1]>`, got `{s}`"))?;
            Ok(Correctness::F1AtLeast { threshold: t })
        }
    }
}

struct Ctx {
    config: Option<PipelineConfig>,
    seed: u64,
    jobs: usize,
}

impl Ctx {
    fn backend(&self, explicit: Option<&BackendSpec>, pick: fn(&pipeline::Backends) -> Option<BackendSpec>, what: &str) -> Result<ModelClient> {
        let spec = explicit
            .cloned()
            .or_else(|| self.config.as_ref().and_then(|c| pick(&c.backends)))
            .ok_or_else(|| Error::Config(format!("pass --backend or a --config with a {what} backend")))?;
        ModelClient::from_spec(&spec)
    }

    fn pool(&self) -> Result<rayon::ThreadPool> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.jobs)
            .build()
            .map_err(|e| Error::Invalid(format!("thread pool: {e}")))
    }

    fn pipeline_config(&self, out: Option<&PathBuf>) -> Result<PipelineConfig> {
        let mut config = self
            .config
            .clone()
            .ok_or_else(|| Error::Config("--config is required".into()))?;
        config.seed = self.seed;
        if let Some(out) = out {
            config.output = out.clone();
        }
        Ok(config)
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::io(path, e))
}

fn by_id<'a, T>(items: &'a [T], ids: &[&str], id: impl Fn(&T) -> &str, what: &str) -> Result<Vec<&'a T>> {
    let map = answer::index_by_id(items, id)?;
    let missing: Vec<String> = ids
        .iter()
        .filter(|i| !map.contains_key(*i))
        .map(|i| format!("{what}:{i}"))
        .collect();
    if !missing.is_empty() {
        return Err(Error::Join { missing });
    }
    Ok(ids.iter().map(|i| map[*i]).collect())
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    jsonl::write_string(path, &text)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&jsonl::read_to_string(path)?)?)
}

fn split_for_fit(records: Vec<ConfidenceRecord>, holdout: Option<usize>, seed: u64) -> Result<Vec<ConfidenceRecord>> {
    match holdout {
        Some(n) => Ok(calibrate::holdout_split(&records, n, seed)?.0),
        None => Ok(records),
    }
}

/// Parses arguments, runs, and maps errors to exit codes.
pub fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let config = cli.config.as_deref().map(PipelineConfig::load).transpose()?;
    let ctx = Ctx {
        seed: cli
            .seed
            .or(config.as_ref().map(|c| c.seed))
            .unwrap_or(nli_dataset::DEFAULT_SEED),
        jobs: cli
            .jobs
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
            .max(1),
        config,
    };
    match cli.command {
        Command::Ingest(a) => ingest(a),
        Command::Answer(a) => {
            let qa = ctx.backend(a.backend.as_ref(), pipeline::Backends::qa, "qa")?;
            let instances: Vec<QaInstance> = jsonl::read_file(&a.input)?;
            let out = ctx.pool()?.install(|| answer::answer_instances(&instances, &qa))?;
            jsonl::write_file(&a.out, &out)?;
            println!("{} answers", out.len());
            Ok(())
        }
        Command::Convert(a) => {
            let client = match a.mode {
                HypothesisMethod::Neural => Some(ctx.backend(a.backend.as_ref(), pipeline::Backends::convert, "convert")?),
                _ => None,
            };
            let instances: Vec<QaInstance> = jsonl::read_file(&a.input)?;
            let answers: Vec<AnswerCandidate> = jsonl::read_file(&a.answers)?;
            let ids: Vec<&str> = instances.iter().map(|i| i.id.as_str()).collect();
            let cands = by_id(&answers, &ids, |c| c.instance_id.as_str(), "answer")?;
            let out: Vec<Hypothesis> = ctx.pool()?.install(|| {
                use rayon::prelude::*;
                instances
                    .par_iter()
                    .zip(cands)
                    .map(|(inst, cand)| {
                        let conv = client.as_ref().map(|c| c as &dyn crate::backend::ConvertBackend);
                        qconvert::convert(a.mode, &inst.question, &cand.text, conv).map(|h| h.for_question(&inst.id))
                    })
                    .collect::<Result<Vec<_>>>()
            })?;
            let fallbacks = out.iter().filter(|h| h.fallback).count();
            jsonl::write_file(&a.out, &out)?;
            println!("{} hypotheses ({fallbacks} fallbacks)", out.len());
            Ok(())
        }
        Command::Premise(a) => {
            let client = match a.mode {
                PremiseMode::Decontext => Some(ctx.backend(a.backend.as_ref(), pipeline::Backends::decontext, "decontext")?),
                _ => None,
            };
            let instances: Vec<QaInstance> = jsonl::read_file(&a.input)?;
            let answers: Vec<AnswerCandidate> = jsonl::read_file(&a.answers)?;
            let ids: Vec<&str> = instances.iter().map(|i| i.id.as_str()).collect();
            let cands = by_id(&answers, &ids, |c| c.instance_id.as_str(), "answer")?;
            let out: Vec<Premise> = ctx.pool()?.install(|| {
                use rayon::prelude::*;
                instances
                    .par_iter()
                    .zip(cands)
                    .map(|(inst, cand)| {
                        let span = decontext::resolve_answer_span(inst, cand.span(), &cand.text);
                        let dc = client.as_ref().map(|c| c as &dyn crate::backend::DecontextBackend);
                        decontext::make_premise(inst, span, a.mode, dc)
                    })
                    .collect::<Result<Vec<_>>>()
            })?;
            jsonl::write_file(&a.out, &out)?;
            println!("{} premises", out.len());
            Ok(())
        }
        Command::BuildNli(a) => {
            let pairs = nli_dataset::build_qa_nli(
                &jsonl::read_file::<QaInstance>(&a.instances)?,
                &jsonl::read_file::<AnswerCandidate>(&a.answers)?,
                &jsonl::read_file::<Premise>(&a.premises)?,
                &jsonl::read_file::<Hypothesis>(&a.hypotheses)?,
                a.correct,
            )?;
            jsonl::write_file(&a.out, &pairs)?;
            let stats = corpus::compute_stats(&pairs)?;
            println!("{}", serde_json::to_string(&stats)?);
            Ok(())
        }
        Command::MixNli(a) => {
            let qa: Vec<NliPair> = jsonl::read_file(&a.qa)?;
            let external: Vec<NliPair> = match a.external_format {
                ExternalInput::Pairs => jsonl::read_file(&a.external)?,
                ExternalInput::Mnli | ExternalInput::FeverNli => {
                    let format = if matches!(a.external_format, ExternalInput::Mnli) {
                        ExternalFormat::Mnli
                    } else {
                        ExternalFormat::FeverNli
                    };
                    let import = nli_dataset::import_external_nli(open(&a.external)?, format)?;
                    eprintln!("{}", import.summary());
                    import.pairs
                }
            };
            let mixed = nli_dataset::mix_with_external(&qa, &external, ctx.seed)?;
            jsonl::write_file(&a.out, &mixed)?;
            println!("{} pairs (seed {})", mixed.len(), ctx.seed);
            Ok(())
        }
        Command::ScoreNli(a) => {
            let client = ctx.backend(a.backend.as_ref(), pipeline::Backends::nli, "nli")?;
            let pairs: Vec<NliPair> = jsonl::read_file(&a.input)?;
            let decision = match a.threshold {
                Some(p_entail) => Decision::Threshold { p_entail },
                None => Decision::Argmax,
            };
            let inputs: Vec<(String, String)> = pairs.iter().map(|p| (p.premise.clone(), p.hypothesis.clone())).collect();
            let scores: Vec<EntailmentScore> = ctx.pool()?.install(|| nli::score_batch(&inputs, &client as &dyn NliBackend))?;
            let out: Vec<ScoreRecord> = pairs
                .iter()
                .zip(scores)
                .enumerate()
                .map(|(i, (p, score))| ScoreRecord {
                    instance_id: p.instance_id.clone().unwrap_or_else(|| format!("pair-{i}")),
                    accepted: decision.accepts(&score),
                    score,
                })
                .collect();
            jsonl::write_file(&a.out, &out)?;
            println!("{} scores, {} accepted", out.len(), out.iter().filter(|s| s.accepted).count());
            Ok(())
        }
        Command::ScoreAnswers(a) => {
            let instances: Vec<QaInstance> = jsonl::read_file(&a.gold)?;
            let preds: Vec<AnswerCandidate> = jsonl::read_file(&a.pred)?;
            let scores = answer::score_answers(&instances, &preds)?;
            jsonl::write_file(&a.out, &scores)?;
            let n = scores.len().max(1) as f64;
            let em = scores.iter().filter(|s| s.result.em).count() as f64 / n;
            let f1 = scores.iter().map(|s| s.result.f1).sum::<f64>() / n;
            println!("EM {:.1}  F1 {:.1}  (n={})", 100.0 * em, 100.0 * f1, scores.len());
            Ok(())
        }
        Command::Calibrate(CalibrateCommand::FitCombiner(a)) => {
            let records = split_for_fit(jsonl::read_file(&a.input)?, a.holdout, ctx.seed)?;
            let config = FitConfig {
                fit_bias: a.bias,
                seed: ctx.seed,
                ..FitConfig::default()
            };
            let model = if a.ensemble {
                calibrate::fit_ensemble(&records, a.correct, &config)?
            } else {
                calibrate::fit_combiner(&records, a.correct, &config)?
            };
            write_json(&a.out, &model)?;
            println!("w1={:.6} w2={:.6} bias={:.6}", model.w1, model.w2, model.bias);
            Ok(())
        }
        Command::Calibrate(CalibrateCommand::FitSelective(a)) => {
            let records = split_for_fit(jsonl::read_file(&a.input)?, a.holdout, ctx.seed)?;
            let config = FitConfig {
                seed: ctx.seed,
                ..calibrate::calibrator_config()
            };
            let model = calibrate::fit_calibrator(&records, a.correct, &config)?;
            write_json(&a.out, &model)?;
            let weights: Vec<String> = calibrate::FEATURE_NAMES
                .iter()
                .zip(model.weights)
                .map(|(n, w)| format!("{n}={w:.4}"))
                .collect();
            println!("{} bias={:.4}", weights.join(" "), model.bias);
            Ok(())
        }
        Command::Evaluate(EvaluateCommand::Records(a)) => evaluate_records(a),
        Command::Evaluate(EvaluateCommand::Curve(a)) => evaluate_curve(a, ctx.config.as_ref()),
        Command::Report(ReportCommand::Errors(a)) => report_errors(a),
        Command::Report(ReportCommand::Kappa(a)) => {
            let sheets = a
                .sheets
                .iter()
                .map(|p| report::import_annotation_sheet(open(p)?))
                .collect::<Result<Vec<_>>>()?;
            let result = report::kappa_from_sheets(&sheets)?;
            println!("kappa\t{:.6}\nitems\t{}\nraters\t{}", result.kappa, result.n_items, result.n_raters);
            Ok(())
        }
        Command::Report(ReportCommand::Breakdown(a)) => {
            let records = report::import_annotation_sheet(open(&a.sheet)?)?;
            let table = report::breakdown_table(&records, a.datasets.as_deref()).to_tsv();
            match &a.out {
                Some(p) => jsonl::write_string(p, &table)?,
                None => print!("{table}"),
            }
            Ok(())
        }
        Command::Ablate(a) => {
            let config = ctx.pipeline_config(a.out.as_ref())?;
            let ablation = pipeline::run_ablation(&config, ctx.jobs)?;
            let table = ablation.table();
            jsonl::write_string(config.output.join("ablation.tsv"), &table)?;
            print!("{table}");
            let failed = ablation.cells.iter().filter(|c| c.curve.is_err()).count();
            if failed > 0 {
                eprintln!("{failed} of {} cells failed", ablation.cells.len());
            }
            Ok(())
        }
        Command::Pipeline(a) => {
            let config = ctx.pipeline_config(a.out.as_ref())?;
            let out = pipeline::run_pipeline(&config, ctx.jobs)?;
            println!(
                "{} instances, config {}, output {}",
                out.records.len(),
                &out.manifest.config_hash[..12],
                config.output.display()
            );
            Ok(())
        }
    }
}

fn ingest(a: IngestArgs) -> Result<()> {
    let dataset: Dataset = a.dataset.parse()?;
    let mut instances = match a.format {
        InputFormat::Mrqa => {
            let parsed = corpus::parse_mrqa(open(&a.input)?, dataset)?;
            for e in &parsed.errors {
                log::warn!("{}: {e}", a.input.display());
            }
            if !parsed.errors.is_empty() {
                eprintln!("{} malformed lines skipped", parsed.errors.len());
            }
            parsed.instances
        }
        InputFormat::Squad2 => corpus::parse_squad(&jsonl::read_to_string(&a.input)?, dataset)?,
    };
    if a.filter_nq {
        let (kept, dropped) = corpus::filter_nq(instances);
        for (id, why) in &dropped {
            log::info!("dropped {id}: {why:?}");
        }
        eprintln!("{} dropped by the NQ filter", dropped.len());
        instances = kept;
    }
    if instances.is_empty() {
        return Err(Error::Empty(format!("no instances in {}", a.input.display())));
    }
    jsonl::write_file(&a.out, &instances)?;
    println!("{} instances", instances.len());
    Ok(())
}

fn evaluate_records(a: RecordsArgs) -> Result<()> {
    let instances: Vec<QaInstance> = jsonl::read_file(&a.instances)?;
    let answers: Vec<AnswerCandidate> = jsonl::read_file(&a.answers)?;
    let ids: Vec<&str> = instances.iter().map(|i| i.id.as_str()).collect();
    let cands = by_id(&answers, &ids, |c| c.instance_id.as_str(), "answer")?;
    let scores: Option<Vec<ScoreRecord>> = a.scores.as_deref().map(jsonl::read_file).transpose()?;
    let score_refs = scores
        .as_ref()
        .map(|s| by_id(s, &ids, |r| r.instance_id.as_str(), "score"))
        .transpose()?;
    let mut records: Vec<ConfidenceRecord> = instances
        .iter()
        .zip(&cands)
        .enumerate()
        .map(|(i, (inst, cand))| {
            let p_nli = score_refs.as_ref().map(|s| s[i].score.p_entail);
            pipeline::confidence_record(inst, cand, p_nli)
        })
        .collect();
    if let Some(path) = &a.second_answers {
        let second: Vec<AnswerCandidate> = jsonl::read_file(path)?;
        let seconds = by_id(&second, &ids, |c| c.instance_id.as_str(), "second answer")?;
        for (r, c) in records.iter_mut().zip(seconds) {
            r.p_qa2 = Some(c.p_qa);
        }
    }
    jsonl::write_file(&a.out, &records)?;
    println!("{} records", records.len());
    Ok(())
}

fn evaluate_curve(a: CurveArgs, config: Option<&PipelineConfig>) -> Result<()> {
    let records: Vec<ConfidenceRecord> = jsonl::read_file(&a.input)?;
    let grid = a
        .grid
        .or_else(|| config.map(|c| c.grid.clone()))
        .unwrap_or_else(|| calibrate::DEFAULT_GRID.to_vec());
    let model_path = || {
        a.model
            .as_deref()
            .ok_or_else(|| Error::Config("--model is required for fitted confidences".into()))
    };
    let sources = a
        .confidence
        .iter()
        .map(|kind| {
            Ok(match kind {
                ConfidenceKind::Qa => Confidence::Qa,
                ConfidenceKind::Nli => Confidence::Nli,
                ConfidenceKind::Oracle => Confidence::Oracle,
                ConfidenceKind::Combined => Confidence::Combined(read_json(model_path()?)?),
                ConfidenceKind::Ensemble => Confidence::Ensemble(read_json(model_path()?)?),
                ConfidenceKind::Selective => Confidence::Selective(read_json(model_path()?)?),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let curves = pipeline::curve_set(&records, &sources, &grid)?;
    if let Some(out) = &a.out {
        jsonl::write_string(out, &calibrate::curves_tsv(&curves))?;
    }
    let macros: Vec<(String, calibrate::CoverageCurve)> = curves
        .into_iter()
        .filter_map(|(name, c)| name.strip_prefix("macro/").map(|n| (n.to_string(), c)))
        .collect();
    print!("{}", calibrate::comparison_table(&macros)?);
    Ok(())
}

fn report_errors(a: ErrorsArgs) -> Result<()> {
    let dir = &a.run;
    let instances: Vec<QaInstance> = jsonl::read_file(dir.join("instances.jsonl"))?;
    let answers: Vec<AnswerCandidate> = jsonl::read_file(dir.join("candidates.jsonl"))?;
    let premises: Vec<Premise> = jsonl::read_file(dir.join("premises.jsonl"))?;
    let hypotheses: Vec<Hypothesis> = jsonl::read_file(dir.join("hypotheses.jsonl"))?;
    let scores: Vec<ScoreRecord> = jsonl::read_file(dir.join("scores.jsonl"))?;
    let records: Vec<ConfidenceRecord> = jsonl::read_file(dir.join(pipeline::RECORDS_FILE))?;
    let ids: Vec<&str> = records.iter().map(|r| r.instance_id.as_str()).collect();
    let scores_by = by_id(&scores, &ids, |s| s.instance_id.as_str(), "score")?;
    let verdicts: Vec<Verdict> = records
        .iter()
        .zip(&scores_by)
        .map(|(r, s)| Verdict {
            instance_id: r.instance_id.clone(),
            dataset: r.dataset.clone().unwrap_or_default(),
            accepted: s.accepted,
            correct: r.is_correct(a.correct),
        })
        .collect();
    let errors = report::detect_errors(&verdicts);
    let inst = answer::index_by_id(&instances, |i| i.id.as_str())?;
    let cand = answer::index_by_id(&answers, |c| c.instance_id.as_str())?;
    let prem = answer::index_by_id(&premises, |p| p.instance_id.as_str())?;
    let hyp = answer::index_by_id(&hypotheses, |h| h.source_question_id.as_str())?;
    let score = answer::index_by_id(&scores, |s| s.instance_id.as_str())?;
    let artifacts: HashMap<String, SheetArtifacts> = errors
        .iter()
        .map(|e| {
            let id = e.instance_id.as_str();
            let art = SheetArtifacts {
                question: inst.get(id).map(|i| i.question.clone()),
                answer: cand.get(id).map(|c| c.text.clone()),
                gold_answers: inst.get(id).map(|i| i.gold_answers.iter().map(|g| g.text.clone()).collect()),
                premise: prem.get(id).map(|p| p.text.clone()),
                premise_mode: prem.get(id).map(|p| p.mode.to_string()),
                decontext_category: prem.get(id).map(|p| p.category.to_string()),
                hypothesis: hyp.get(id).map(|h| h.text.clone()),
                hypothesis_method: hyp.get(id).map(|h| h.method.to_string()),
                p_entail: score.get(id).map(|s| s.score.p_entail),
                p_qa: cand.get(id).map(|c| c.p_qa),
            };
            (e.instance_id.clone(), art)
        })
        .collect();
    let file = File::create(&a.out).map_err(|e| Error::io(&a.out, e))?;
    let rows = report::export_annotation_sheet(file, &errors, &artifacts, a.cap)?;
    println!("{rows} rows ({} errors)", errors.len());
    Ok(())
}
