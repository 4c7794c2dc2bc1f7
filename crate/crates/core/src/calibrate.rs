//! Selective QA: coverage–F1 curves, the two-posterior logistic combiner, the
//! seven-feature calibrator and the QA ensemble.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nli::EntailmentScore;
use crate::scoring::{Correctness, MatchResult};

pub const N_FEATURES: usize = 7;

pub const FEATURE_NAMES: [&str; N_FEATURES] = [
    "passage_len",
    "answer_len",
    "top1",
    "top2",
    "top3",
    "top4",
    "top5",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceRecord {
    pub instance_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<String>,
    pub p_qa: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_nli: Option<f64>,
    /// Second QA model's posterior, for the ensemble.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_qa2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<[f64; N_FEATURES]>,
    pub f1: f64,
    pub em: bool,
}

impl ConfidenceRecord {
    pub fn validate(&self) -> Result<()> {
        let fail = |message: String| Error::Validation {
            id: self.instance_id.clone(),
            message,
        };
        for (name, p) in [("p_qa", Some(self.p_qa)), ("p_nli", self.p_nli), ("p_qa2", self.p_qa2)] {
            if let Some(p) = p {
                if !(0.0..=1.0).contains(&p) {
                    return Err(fail(format!("{name} = {p} outside [0, 1]")));
                }
            }
        }
        if let Some(f) = &self.features {
            if f.iter().any(|x| !x.is_finite()) {
                return Err(fail("non-finite feature".into()));
            }
            if f[2..].windows(2).any(|w| w[0] < w[1]) {
                return Err(fail("top-5 probabilities not sorted descending".into()));
            }
        }
        Ok(())
    }

    pub fn is_correct(&self, rule: Correctness) -> bool {
        rule.is_correct(&MatchResult {
            em: self.em,
            f1: self.f1,
            best_gold_index: 0,
        })
    }

    fn require_nli(&self) -> Result<f64> {
        self.p_nli.ok_or_else(|| Error::Validation {
            id: self.instance_id.clone(),
            message: "record has no p_nli".into(),
        })
    }

    fn require_qa2(&self) -> Result<f64> {
        self.p_qa2.ok_or_else(|| Error::Validation {
            id: self.instance_id.clone(),
            message: "record has no second QA posterior".into(),
        })
    }

    fn require_features(&self) -> Result<&[f64; N_FEATURES]> {
        self.features.as_ref().ok_or_else(|| Error::Validation {
            id: self.instance_id.clone(),
            message: "record has no feature vector".into(),
        })
    }
}

/// Passage length and answer length in whitespace tokens, then the top-5
/// probabilities (zero-padded).
pub fn selective_features(context: &str, answer: &str, top5: &[f64]) -> [f64; N_FEATURES] {
    let mut f = [0.0; N_FEATURES];
    f[0] = context.split_whitespace().count() as f64;
    f[1] = answer.split_whitespace().count() as f64;
    for (slot, p) in f[2..].iter_mut().zip(top5) {
        *slot = *p;
    }
    f
}

pub const DEFAULT_GRID: [f64; 10] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub coverage: f64,
    pub threshold: f64,
    pub f1: f64,
    pub selected: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageCurve {
    pub points: Vec<CurvePoint>,
    pub n_total: usize,
}

impl CoverageCurve {
    pub fn at(&self, coverage: f64) -> Option<&CurvePoint> {
        self.points
            .iter()
            .find(|p| (p.coverage - coverage).abs() < 1e-12)
    }
}

/// Number of records answered at coverage `k`: ⌈k·N⌉, clamped to [1, N]. The
/// small epsilon keeps products like 0.3·10 from rounding up to 4.
pub fn selection_size(coverage: f64, n: usize) -> usize {
    let size = (coverage * n as f64 - 1e-9).ceil();
    (size.max(1.0) as usize).min(n)
}

/// Sorted, deduplicated grid with 1.0 appended if absent.
pub fn validate_grid(grid: &[f64]) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(grid.len() + 1);
    for &k in grid {
        if !(k > 0.0 && k <= 1.0) {
            return Err(Error::Invalid(format!("coverage {k} outside (0, 1]")));
        }
        out.push(k);
    }
    if !out.contains(&1.0) {
        out.push(1.0);
    }
    out.sort_by(f64::total_cmp);
    out.dedup();
    Ok(out)
}

/// Ranking by descending confidence, ties by ascending id.
pub fn rank(ids: &[&str], confidence: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..ids.len()).collect();
    order.sort_by(|&a, &b| {
        confidence[b]
            .total_cmp(&confidence[a])
            .then_with(|| ids[a].cmp(ids[b]))
    });
    order
}

/// Curve over parallel arrays. F1 at each coverage is the mean over the top
/// ⌈k·N⌉ records, summed in input order so coverage 1.0 reproduces the plain
/// mean bit for bit.
pub fn coverage_curve_from(
    ids: &[&str],
    confidence: &[f64],
    f1: &[f64],
    grid: &[f64],
) -> Result<CoverageCurve> {
    let n = ids.len();
    if n == 0 {
        return Err(Error::Empty("no records for coverage curve".into()));
    }
    if confidence.len() != n || f1.len() != n {
        return Err(Error::Invalid("confidence, f1 and id arrays differ in length".into()));
    }
    if let Some(i) = confidence.iter().position(|c| c.is_nan()) {
        return Err(Error::Validation {
            id: ids[i].to_string(),
            message: "NaN confidence".into(),
        });
    }
    let grid = validate_grid(grid)?;
    let order = rank(ids, confidence);
    let mut points = Vec::with_capacity(grid.len());
    for k in grid {
        let size = selection_size(k, n);
        let mut chosen = order[..size].to_vec();
        chosen.sort_unstable();
        let sum: f64 = chosen.iter().map(|&i| f1[i]).sum();
        points.push(CurvePoint {
            coverage: k,
            threshold: confidence[order[size - 1]],
            f1: sum / size as f64,
            selected: size,
        });
    }
    Ok(CoverageCurve { points, n_total: n })
}

pub fn coverage_curve(
    records: &[ConfidenceRecord],
    confidence: &Confidence,
    grid: &[f64],
) -> Result<CoverageCurve> {
    let ids: Vec<&str> = records.iter().map(|r| r.instance_id.as_str()).collect();
    let conf = records
        .iter()
        .map(|r| confidence.score(r))
        .collect::<Result<Vec<_>>>()?;
    let f1: Vec<f64> = records.iter().map(|r| r.f1).collect();
    coverage_curve_from(&ids, &conf, &f1, grid)
}

/// Which score ranks the records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Confidence {
    Qa,
    Nli,
    /// Oracle ranking by the record's own F1.
    Oracle,
    Combined(CombinerModel),
    Ensemble(CombinerModel),
    Selective(CalibratorModel),
}

impl Confidence {
    pub fn score(&self, r: &ConfidenceRecord) -> Result<f64> {
        Ok(match self {
            Confidence::Qa => r.p_qa,
            Confidence::Nli => r.require_nli()?,
            Confidence::Oracle => r.f1,
            Confidence::Combined(m) => m.combine(r)?,
            Confidence::Ensemble(m) => m.ensemble(r.p_qa, r.require_qa2()?),
            Confidence::Selective(m) => m.predict(r.require_features()?),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Confidence::Qa => "qa",
            Confidence::Nli => "nli",
            Confidence::Oracle => "oracle",
            Confidence::Combined(_) => "combined",
            Confidence::Ensemble(_) => "ensemble",
            Confidence::Selective(_) => "selective",
        }
    }
}

/// Per-coverage mean over curves that share a grid.
pub fn macro_average(curves: &[&CoverageCurve]) -> Result<CoverageCurve> {
    let first = curves
        .first()
        .ok_or_else(|| Error::Empty("no curves to average".into()))?;
    for c in curves {
        if c.points.len() != first.points.len()
            || c.points
                .iter()
                .zip(&first.points)
                .any(|(a, b)| a.coverage != b.coverage)
        {
            return Err(Error::Invalid("curves use different coverage grids".into()));
        }
    }
    let m = curves.len() as f64;
    let points = first
        .points
        .iter()
        .enumerate()
        .map(|(i, p)| CurvePoint {
            coverage: p.coverage,
            threshold: f64::NAN,
            f1: curves.iter().map(|c| c.points[i].f1).sum::<f64>() / m,
            selected: curves.iter().map(|c| c.points[i].selected).sum(),
        })
        .collect();
    Ok(CoverageCurve {
        points,
        n_total: curves.iter().map(|c| c.n_total).sum(),
    })
}

/// Long-form TSV: `name  coverage  threshold  f1  selected`.
pub fn curves_tsv(curves: &[(String, CoverageCurve)]) -> String {
    let mut out = String::from("name\tcoverage\tthreshold\tf1\tselected\n");
    for (name, curve) in curves {
        for p in &curve.points {
            let _ = writeln!(
                out,
                "{name}\t{:.2}\t{:.6}\t{:.6}\t{}",
                p.coverage, p.threshold, p.f1, p.selected
            );
        }
    }
    out
}

/// Wide table: one row per coverage, one F1 column per named curve (×100).
pub fn comparison_table(curves: &[(String, CoverageCurve)]) -> Result<String> {
    let refs: Vec<&CoverageCurve> = curves.iter().map(|(_, c)| c).collect();
    macro_average(&refs)?;
    let mut out = String::from("coverage");
    for (name, _) in curves {
        let _ = write!(out, "\t{name}");
    }
    out.push('\n');
    for (i, p) in curves[0].1.points.iter().enumerate() {
        let _ = write!(out, "{:.2}", p.coverage);
        for (_, c) in curves {
            let _ = write!(out, "\t{:.1}", 100.0 * c.points[i].f1);
        }
        out.push('\n');
    }
    Ok(out)
}

/// Groups records by `dataset` (missing → `""`), preserving input order.
pub fn by_dataset(records: &[ConfidenceRecord]) -> BTreeMap<String, Vec<ConfidenceRecord>> {
    let mut groups: BTreeMap<String, Vec<ConfidenceRecord>> = BTreeMap::new();
    for r in records {
        groups
            .entry(r.dataset.clone().unwrap_or_default())
            .or_default()
            .push(r.clone());
    }
    groups
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub step: f64,
    pub clip_norm: f64,
    pub max_iters: usize,
    pub tol: f64,
    pub fit_bias: bool,
    /// Recorded in the fit metadata; the optimizer itself is deterministic.
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            step: 0.1,
            clip_norm: 10.0,
            max_iters: 10_000,
            tol: 1e-8,
            fit_bias: false,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitMeta {
    pub iterations: usize,
    pub final_loss: f64,
    pub converged: bool,
    pub degenerate: bool,
    pub seed: u64,
    /// Loss before the first step and after every step.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub loss_trace: Vec<f64>,
}

pub fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn dot(w: &[f64], x: &[f64]) -> f64 {
    w.iter().zip(x).map(|(a, b)| a * b).sum()
}

/// Mean logistic loss of `logistic(w·x + b)` against 0/1 targets.
pub fn logistic_loss(xs: &[Vec<f64>], ys: &[f64], w: &[f64], b: f64) -> f64 {
    let total: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let z = dot(w, x) + b;
            softplus(z) - y * z
        })
        .sum();
    total / xs.len() as f64
}

/// Analytic gradient of [`logistic_loss`]: (∂w, ∂b).
pub fn logistic_gradient(xs: &[Vec<f64>], ys: &[f64], w: &[f64], b: f64) -> (Vec<f64>, f64) {
    let n = xs.len() as f64;
    let mut gw = vec![0.0; w.len()];
    let mut gb = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        let r = logistic(dot(w, x) + b) - y;
        for (g, xi) in gw.iter_mut().zip(x) {
            *g += r * xi;
        }
        gb += r;
    }
    gw.iter_mut().for_each(|g| *g /= n);
    (gw, gb / n)
}

/// Full-batch gradient descent from zero weights.
pub fn fit_logistic(xs: &[Vec<f64>], ys: &[f64], config: &FitConfig) -> Result<(Vec<f64>, f64, FitMeta)> {
    let n = xs.len();
    if n < 2 {
        return Err(Error::Size {
            needed: 2,
            available: n,
        });
    }
    let dim = xs[0].len();
    if xs.iter().any(|x| x.len() != dim || x.iter().any(|v| !v.is_finite())) {
        return Err(Error::Invalid("ragged or non-finite design matrix".into()));
    }
    let positives = ys.iter().filter(|&&y| y > 0.5).count();
    let degenerate = positives == 0 || positives == n;
    if degenerate {
        log::warn!("logistic fit: all {n} targets are one class");
    }

    let mut w = vec![0.0; dim];
    let mut b = 0.0;
    let mut loss = logistic_loss(xs, ys, &w, b);
    let mut trace = vec![loss];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < config.max_iters {
        let (mut gw, mut gb) = logistic_gradient(xs, ys, &w, b);
        if !config.fit_bias {
            gb = 0.0;
        }
        let norm = (gw.iter().map(|g| g * g).sum::<f64>() + gb * gb).sqrt();
        if norm > config.clip_norm {
            let scale = config.clip_norm / norm;
            gw.iter_mut().for_each(|g| *g *= scale);
            gb *= scale;
        }
        for (wi, g) in w.iter_mut().zip(&gw) {
            *wi -= config.step * g;
        }
        b -= config.step * gb;
        iterations += 1;
        let next = logistic_loss(xs, ys, &w, b);
        trace.push(next);
        let delta = (loss - next).abs();
        loss = next;
        if delta < config.tol {
            converged = true;
            break;
        }
    }
    Ok((
        w,
        b,
        FitMeta {
            iterations,
            final_loss: loss,
            converged,
            degenerate,
            seed: config.seed,
            loss_trace: trace,
        },
    ))
}

/// `logistic(w1·a + w2·b + bias)`, used both for QA+NLI and for the QA ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombinerModel {
    pub w1: f64,
    pub w2: f64,
    #[serde(default)]
    pub bias: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit_meta: Option<FitMeta>,
}

impl CombinerModel {
    pub fn new(w1: f64, w2: f64, bias: f64) -> Self {
        Self {
            w1,
            w2,
            bias,
            fit_meta: None,
        }
    }

    pub fn apply(&self, a: f64, b: f64) -> f64 {
        logistic(self.w1 * a + self.w2 * b + self.bias)
    }

    pub fn combine(&self, r: &ConfidenceRecord) -> Result<f64> {
        Ok(self.apply(r.p_qa, r.require_nli()?))
    }

    pub fn ensemble(&self, p_qa_1: f64, p_qa_2: f64) -> f64 {
        self.apply(p_qa_1, p_qa_2)
    }
}

fn targets(records: &[ConfidenceRecord], rule: Correctness) -> Vec<f64> {
    records
        .iter()
        .map(|r| if r.is_correct(rule) { 1.0 } else { 0.0 })
        .collect()
}

fn fit_pairwise(
    records: &[ConfidenceRecord],
    second: impl Fn(&ConfidenceRecord) -> Result<f64>,
    rule: Correctness,
    config: &FitConfig,
) -> Result<CombinerModel> {
    let xs = records
        .iter()
        .map(|r| Ok(vec![r.p_qa, second(r)?]))
        .collect::<Result<Vec<_>>>()?;
    let (w, bias, meta) = fit_logistic(&xs, &targets(records, rule), config)?;
    Ok(CombinerModel {
        w1: w[0],
        w2: w[1],
        bias,
        fit_meta: Some(meta),
    })
}

/// Fits `logistic(w1·p_qa + w2·p_nli [+ bias])` to answer correctness.
pub fn fit_combiner(
    records: &[ConfidenceRecord],
    rule: Correctness,
    config: &FitConfig,
) -> Result<CombinerModel> {
    fit_pairwise(records, |r| r.require_nli(), rule, config)
}

/// Same functional form over two QA posteriors (`p_qa`, `p_qa2`).
pub fn fit_ensemble(
    records: &[ConfidenceRecord],
    rule: Correctness,
    config: &FitConfig,
) -> Result<CombinerModel> {
    fit_pairwise(records, |r| r.require_qa2(), rule, config)
}

pub fn ensemble_qa(p_qa_1: f64, p_qa_2: f64, model: &CombinerModel) -> f64 {
    model.ensemble(p_qa_1, p_qa_2)
}

/// Copies the second model's `p_qa` into `p_qa2` of the first, by id.
pub fn join_ensemble(
    primary: &[ConfidenceRecord],
    secondary: &[ConfidenceRecord],
) -> Result<Vec<ConfidenceRecord>> {
    let second = crate::answer::index_by_id(secondary, |r| r.instance_id.as_str())?;
    let mut missing: Vec<String> = primary
        .iter()
        .filter(|r| !second.contains_key(r.instance_id.as_str()))
        .map(|r| r.instance_id.clone())
        .collect();
    let first: std::collections::HashSet<&str> =
        primary.iter().map(|r| r.instance_id.as_str()).collect();
    missing.extend(
        secondary
            .iter()
            .filter(|r| !first.contains(r.instance_id.as_str()))
            .map(|r| r.instance_id.clone()),
    );
    if !missing.is_empty() {
        missing.sort();
        return Err(Error::Join { missing });
    }
    Ok(primary
        .iter()
        .map(|r| {
            let mut out = r.clone();
            out.p_qa2 = Some(second[r.instance_id.as_str()].p_qa);
            out
        })
        .collect())
}

/// Z-score parameters from the training set. Constant columns are inactive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: [f64; N_FEATURES],
    pub std: [f64; N_FEATURES],
    pub active: [bool; N_FEATURES],
}

impl Standardizer {
    pub fn fit(rows: &[[f64; N_FEATURES]]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Empty("no feature rows".into()));
        }
        let n = rows.len() as f64;
        let mut mean = [0.0; N_FEATURES];
        let mut std = [0.0; N_FEATURES];
        let mut active = [false; N_FEATURES];
        for j in 0..N_FEATURES {
            mean[j] = rows.iter().map(|r| r[j]).sum::<f64>() / n;
            let var = rows.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / n;
            std[j] = var.sqrt();
            active[j] = std[j] > 1e-12;
        }
        Ok(Self { mean, std, active })
    }

    /// Standardized active columns only.
    pub fn transform(&self, row: &[f64; N_FEATURES]) -> Vec<f64> {
        (0..N_FEATURES)
            .filter(|&j| self.active[j])
            .map(|j| (row[j] - self.mean[j]) / self.std[j])
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibratorModel {
    /// One weight per feature in standardized space; dropped columns are 0.
    pub weights: [f64; N_FEATURES],
    pub bias: f64,
    pub standardizer: Standardizer,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit_meta: Option<FitMeta>,
}

impl CalibratorModel {
    pub fn predict(&self, features: &[f64; N_FEATURES]) -> f64 {
        let z: f64 = (0..N_FEATURES)
            .filter(|&j| self.standardizer.active[j])
            .map(|j| self.weights[j] * (features[j] - self.standardizer.mean[j]) / self.standardizer.std[j])
            .sum();
        logistic(z + self.bias)
    }
}

/// Calibrator fits default to a free bias, since standardized features are
/// centered.
pub fn calibrator_config() -> FitConfig {
    FitConfig {
        fit_bias: true,
        ..FitConfig::default()
    }
}

pub fn fit_calibrator(
    records: &[ConfidenceRecord],
    rule: Correctness,
    config: &FitConfig,
) -> Result<CalibratorModel> {
    let rows = records
        .iter()
        .map(|r| r.require_features().copied())
        .collect::<Result<Vec<_>>>()?;
    let standardizer = Standardizer::fit(&rows)?;
    let xs: Vec<Vec<f64>> = rows.iter().map(|r| standardizer.transform(r)).collect();
    let (w, bias, meta) = fit_logistic(&xs, &targets(records, rule), config)?;
    let mut weights = [0.0; N_FEATURES];
    let mut it = w.into_iter();
    for (wj, &active) in weights.iter_mut().zip(&standardizer.active) {
        if active {
            *wj = it.next().unwrap_or(0.0);
        }
    }
    Ok(CalibratorModel {
        weights,
        bias,
        standardizer,
        fit_meta: Some(meta),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum Decision {
    Argmax,
    Threshold { p_entail: f64 },
}

impl Decision {
    pub fn accepts(&self, score: &EntailmentScore) -> bool {
        match self {
            Decision::Argmax => score.accepts(),
            Decision::Threshold { p_entail } => score.accepts_at(*p_entail),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RejectionRates {
    pub reject_rate_unanswerable: f64,
    pub accept_rate_answerable: f64,
    pub n_unanswerable: usize,
    pub n_answerable: usize,
}

/// Per-partition decision rates over `(answerable, score)` items.
pub fn rejection_rates(items: &[(bool, EntailmentScore)], decision: Decision) -> Result<RejectionRates> {
    let (mut n_ans, mut n_unans, mut accepted, mut rejected) = (0, 0, 0, 0);
    for (answerable, score) in items {
        let acc = decision.accepts(score);
        if *answerable {
            n_ans += 1;
            accepted += usize::from(acc);
        } else {
            n_unans += 1;
            rejected += usize::from(!acc);
        }
    }
    if n_unans == 0 {
        return Err(Error::Empty("unanswerable partition".into()));
    }
    if n_ans == 0 {
        return Err(Error::Empty("answerable partition".into()));
    }
    Ok(RejectionRates {
        reject_rate_unanswerable: rejected as f64 / n_unans as f64,
        accept_rate_answerable: accepted as f64 / n_ans as f64,
        n_unanswerable: n_unans,
        n_answerable: n_ans,
    })
}

/// Disjoint random split: `n` held-out records and the rest, both in input order.
pub fn holdout_split<T: Clone>(items: &[T], n: usize, seed: u64) -> Result<(Vec<T>, Vec<T>)> {
    if n > items.len() {
        return Err(Error::Size {
            needed: n,
            available: items.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = vec![false; items.len()];
    for i in rand::seq::index::sample(&mut rng, items.len(), n) {
        picked[i] = true;
    }
    let (mut held, mut rest) = (Vec::with_capacity(n), Vec::with_capacity(items.len() - n));
    for (item, p) in items.iter().zip(picked) {
        if p {
            held.push(item.clone());
        } else {
            rest.push(item.clone());
        }
    }
    Ok((held, rest))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rec(id: &str, p_qa: f64, f1: f64) -> ConfidenceRecord {
        ConfidenceRecord {
            instance_id: id.into(),
            dataset: None,
            p_qa,
            p_nli: None,
            p_qa2: None,
            features: None,
            f1,
            em: f1 == 1.0,
        }
    }

    #[test]
    fn six_right_four_wrong() {
        let records: Vec<_> = (0..10)
            .map(|i| {
                let f1 = if i < 6 { 1.0 } else { 0.0 };
                rec(&format!("r{i}"), f1, f1)
            })
            .collect();
        let curve = coverage_curve(&records, &Confidence::Qa, &DEFAULT_GRID).unwrap();
        assert_eq!(curve.at(0.5).unwrap().f1, 1.0);
        assert_eq!(curve.at(1.0).unwrap().f1, 0.6);
        assert_eq!(curve.at(0.3).unwrap().selected, 3);
        assert_eq!(curve.points.len(), 10);
    }

    #[test]
    fn grid_rules() {
        assert!(validate_grid(&[0.0]).is_err());
        assert!(validate_grid(&[1.5]).is_err());
        assert_eq!(validate_grid(&[0.5, 0.2, 0.5]).unwrap(), vec![0.2, 0.5, 1.0]);
        assert!(coverage_curve_from(&[], &[], &[], &DEFAULT_GRID).is_err());
    }

    #[test]
    fn ties_break_by_id() {
        let ids = ["b", "a", "c"];
        assert_eq!(rank(&ids, &[0.5, 0.5, 0.9]), vec![2, 1, 0]);
    }

    #[test]
    fn combine_examples() {
        let r = ConfidenceRecord { p_nli: Some(0.3), ..rec("x", 0.0, 0.0) };
        assert_eq!(CombinerModel::new(0.0, 0.0, 0.0).combine(&r).unwrap(), 0.5);
        assert_eq!(CombinerModel::new(1.0, 0.0, 0.0).combine(&r).unwrap(), 0.5);
        let m = CombinerModel::new(0.3, 2.0, 0.0);
        let lo = m.combine(&r).unwrap();
        let hi = m.combine(&ConfidenceRecord { p_nli: Some(0.31), ..r.clone() }).unwrap();
        assert!(hi > lo);
        assert!(m.combine(&rec("y", 0.1, 0.0)).is_err());
    }

    #[test]
    fn all_positive_targets_predict_positive() {
        let records: Vec<_> = (0..20)
            .map(|i| ConfidenceRecord {
                p_nli: Some(i as f64 / 20.0),
                ..rec(&format!("r{i}"), 1.0 - i as f64 / 40.0, 1.0)
            })
            .collect();
        let m = fit_combiner(&records, Correctness::ExactMatch, &FitConfig::default()).unwrap();
        assert!(m.fit_meta.as_ref().unwrap().degenerate);
        assert!(records.iter().all(|r| m.combine(r).unwrap() > 0.5));
    }

    #[test]
    fn missing_nli_is_an_error() {
        let records = vec![rec("a", 0.5, 1.0), rec("b", 0.5, 0.0)];
        assert!(fit_combiner(&records, Correctness::ExactMatch, &FitConfig::default()).is_err());
    }

    #[test]
    fn rejection_extremes() {
        let one = EntailmentScore::new(1.0, 0.0, 0.0, "m").unwrap();
        let items = vec![(true, one.clone()), (false, one.clone())];
        let r = rejection_rates(&items, Decision::Argmax).unwrap();
        assert_eq!((r.accept_rate_answerable, r.reject_rate_unanswerable), (1.0, 0.0));
        assert!(matches!(rejection_rates(&items[..1], Decision::Argmax), Err(Error::Empty(_))));
    }

    #[test]
    fn constant_column_gets_zero_weight() {
        let records: Vec<_> = (0..40)
            .map(|i| {
                let x = i as f64 / 40.0;
                ConfidenceRecord {
                    features: Some([100.0, 2.0 + (i % 3) as f64, x, x / 2.0, x / 4.0, x / 8.0, 0.0]),
                    ..rec(&format!("r{i}"), 0.5, if x > 0.5 { 1.0 } else { 0.0 })
                }
            })
            .collect();
        let m = fit_calibrator(&records, Correctness::ExactMatch, &calibrator_config()).unwrap();
        assert_eq!(m.weights[0], 0.0);
        assert_eq!(m.weights[6], 0.0);
        assert!(!m.standardizer.active[0]);
        assert!(m.predict(records[39].features.as_ref().unwrap()) > 0.5);
    }

    #[test]
    fn holdout_is_disjoint_and_seeded() {
        let items: Vec<usize> = (0..50).collect();
        let (h, r) = holdout_split(&items, 10, 7).unwrap();
        assert_eq!((h.len(), r.len()), (10, 40));
        assert!(h.iter().all(|x| !r.contains(x)));
        assert_eq!(holdout_split(&items, 10, 7).unwrap().0, h);
    }

    proptest! {
        #[test]
        fn full_coverage_is_plain_mean(f1 in prop::collection::vec(0.0f64..=1.0, 1..40), seed in any::<u64>()) {
            let conf: Vec<f64> = f1.iter().enumerate().map(|(i, _)| ((i as u64).wrapping_mul(seed | 1) % 97) as f64).collect();
            let names: Vec<String> = (0..f1.len()).map(|i| format!("{i:03}")).collect();
            let ids: Vec<&str> = names.iter().map(String::as_str).collect();
            let curve = coverage_curve_from(&ids, &conf, &f1, &DEFAULT_GRID).unwrap();
            let mean = f1.iter().sum::<f64>() / f1.len() as f64;
            prop_assert_eq!(curve.at(1.0).unwrap().f1, mean);
        }

        #[test]
        fn monotone_transform_invariance(conf in prop::collection::vec(-5.0f64..5.0, 1..30)) {
            let f1: Vec<f64> = conf.iter().map(|c| (c.sin() + 1.0) / 2.0).collect();
            let names: Vec<String> = (0..conf.len()).map(|i| format!("{i:03}")).collect();
            let ids: Vec<&str> = names.iter().map(String::as_str).collect();
            let squashed: Vec<f64> = conf.iter().map(|&c| logistic(c)).collect();
            let a = coverage_curve_from(&ids, &conf, &f1, &DEFAULT_GRID).unwrap();
            let b = coverage_curve_from(&ids, &squashed, &f1, &DEFAULT_GRID).unwrap();
            let fa: Vec<f64> = a.points.iter().map(|p| p.f1).collect();
            let fb: Vec<f64> = b.points.iter().map(|p| p.f1).collect();
            prop_assert_eq!(fa, fb);
        }

        #[test]
        fn combine_in_open_unit_interval(w1 in -20.0f64..20.0, w2 in -20.0f64..20.0, a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
            let y = CombinerModel::new(w1, w2, 0.0).apply(a, b);
            prop_assert!(y > 0.0 && y < 1.0);
        }

        #[test]
        fn equal_weights_depend_on_sum(w in 0.1f64..5.0, a in 0.0f64..=1.0, b in 0.0f64..=1.0, c in 0.0f64..=1.0, d in 0.0f64..=1.0) {
            let m = CombinerModel::new(w, w, 0.0);
            if a + b < c + d {
                prop_assert!(m.ensemble(a, b) <= m.ensemble(c, d));
            }
        }
    }
}
