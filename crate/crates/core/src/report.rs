//! Verifier error analysis: false positive/negative detection, hand-annotation
//! sheets over the seven error classes, Fleiss' kappa, and per-dataset
//! breakdown tables.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::{self, Write as _};
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorClass {
    QuestionConversion,
    Decontext,
    Entailment,
    WrongContext,
    InsufficientContext,
    SpanShifting,
    Annotation,
}

impl ErrorClass {
    pub const ALL: [ErrorClass; 7] = [
        ErrorClass::QuestionConversion,
        ErrorClass::Decontext,
        ErrorClass::Entailment,
        ErrorClass::WrongContext,
        ErrorClass::InsufficientContext,
        ErrorClass::SpanShifting,
        ErrorClass::Annotation,
    ];

    pub fn key(&self) -> &'static str {
        match self {
            ErrorClass::QuestionConversion => "question_conversion",
            ErrorClass::Decontext => "decontext",
            ErrorClass::Entailment => "entailment",
            ErrorClass::WrongContext => "wrong_context",
            ErrorClass::InsufficientContext => "insufficient_context",
            ErrorClass::SpanShifting => "span_shifting",
            ErrorClass::Annotation => "annotation",
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            ErrorClass::QuestionConversion => "Question Conversion",
            ErrorClass::Decontext => "Decontext",
            ErrorClass::Entailment => "Entailment",
            ErrorClass::WrongContext => "Wrong Context",
            ErrorClass::InsufficientContext => "Insufficient Context",
            ErrorClass::SpanShifting => "Span Shifting",
            ErrorClass::Annotation => "Annotation",
        }
    }

    fn description(&self) -> &'static str {
        match self {
            ErrorClass::QuestionConversion => "the hypothesis misstates the question",
            ErrorClass::Decontext => "the rewritten premise lost or changed meaning",
            ErrorClass::Entailment => "the NLI decision itself is wrong",
            ErrorClass::WrongContext => "right answer, but the premise does not support it",
            ErrorClass::InsufficientContext => "support exists only elsewhere in the context",
            ErrorClass::SpanShifting => "prediction overlaps the gold and is acceptable",
            ErrorClass::Annotation => "the gold annotation is wrong",
        }
    }
}

impl fmt::Display for ErrorClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for ErrorClass {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace([' ', '-'], "_");
        ErrorClass::ALL
            .into_iter()
            .find(|c| c.key() == key)
            .ok_or_else(|| Error::Invalid(format!("unknown error class `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    FalsePositive,
    FalseNegative,
}

impl Polarity {
    pub fn key(&self) -> &'static str {
        match self {
            Polarity::FalsePositive => "false_positive",
            Polarity::FalseNegative => "false_negative",
        }
    }
}

impl FromStr for Polarity {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "false_positive" | "fp" | "FP" => Ok(Polarity::FalsePositive),
            "false_negative" | "fn" | "FN" => Ok(Polarity::FalseNegative),
            _ => Err(Error::Invalid(format!("unknown polarity `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub instance_id: String,
    #[serde(default)]
    pub dataset: String,
    pub polarity: Polarity,
    /// `None` until a human assigns a class.
    #[serde(default)]
    pub error_class: Option<ErrorClass>,
}

/// Verifier decision and answer correctness for one instance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub instance_id: String,
    #[serde(default)]
    pub dataset: String,
    pub accepted: bool,
    pub correct: bool,
}

/// Accepted-but-wrong and rejected-but-right instances, in input order.
pub fn detect_errors(verdicts: &[Verdict]) -> Vec<ErrorRecord> {
    verdicts
        .iter()
        .filter_map(|v| {
            let polarity = match (v.accepted, v.correct) {
                (true, false) => Polarity::FalsePositive,
                (false, true) => Polarity::FalseNegative,
                _ => return None,
            };
            Some(ErrorRecord {
                instance_id: v.instance_id.clone(),
                dataset: v.dataset.clone(),
                polarity,
                error_class: None,
            })
        })
        .collect()
}

/// Pipeline outputs shown to annotators for one instance.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SheetArtifacts {
    pub question: Option<String>,
    pub answer: Option<String>,
    pub gold_answers: Option<Vec<String>>,
    pub premise: Option<String>,
    pub premise_mode: Option<String>,
    pub decontext_category: Option<String>,
    pub hypothesis: Option<String>,
    pub hypothesis_method: Option<String>,
    pub p_entail: Option<f64>,
    pub p_qa: Option<f64>,
}

pub const SHEET_HEADER: [&str; 15] = [
    "instance_id",
    "dataset",
    "polarity",
    "question",
    "answer",
    "gold_answers",
    "premise",
    "premise_mode",
    "decontext_category",
    "hypothesis",
    "hypothesis_method",
    "p_entail",
    "p_qa",
    "missing",
    "error_class",
];

fn legend() -> String {
    let mut out = String::from("# Fill the error_class column with one of:\n");
    for c in ErrorClass::ALL {
        let _ = writeln!(out, "#   {:<22}{}", c.key(), c.description());
    }
    out.push_str("# Leave it empty (or `unlabeled`) to skip a row.\n");
    out
}

/// Writes a tab-separated annotation sheet: a `#` legend, a header, then one
/// row per error with an empty class column. At most `per_dataset_cap` rows
/// per dataset are kept (first in input order). Missing artifacts leave empty
/// cells and are named in the `missing` column.
pub fn export_annotation_sheet<W: Write>(
    mut writer: W,
    errors: &[ErrorRecord],
    artifacts: &HashMap<String, SheetArtifacts>,
    per_dataset_cap: Option<usize>,
) -> Result<usize> {
    let io_err = |e| Error::io("<annotation sheet>", e);
    writer.write_all(legend().as_bytes()).map_err(io_err)?;
    let mut csv = csv::WriterBuilder::new()
        .delimiter(b'\t')
        .from_writer(writer);
    csv.write_record(SHEET_HEADER)?;
    let mut per_dataset: HashMap<&str, usize> = HashMap::new();
    let mut rows = 0;
    for err in errors {
        let seen = per_dataset.entry(err.dataset.as_str()).or_default();
        if per_dataset_cap.is_some_and(|cap| *seen >= cap) {
            continue;
        }
        *seen += 1;
        let empty = SheetArtifacts::default();
        let a = artifacts.get(&err.instance_id).unwrap_or(&empty);
        let mut missing = Vec::new();
        let mut cell = |name: &str, v: Option<String>| {
            v.unwrap_or_else(|| {
                missing.push(name.to_string());
                String::new()
            })
        };
        let fields = [
            cell("question", a.question.clone()),
            cell("answer", a.answer.clone()),
            cell("gold_answers", a.gold_answers.as_ref().map(|g| g.join(" | "))),
            cell("premise", a.premise.clone()),
            cell("premise_mode", a.premise_mode.clone()),
            cell("decontext_category", a.decontext_category.clone()),
            cell("hypothesis", a.hypothesis.clone()),
            cell("hypothesis_method", a.hypothesis_method.clone()),
            cell("p_entail", a.p_entail.map(|p| format!("{p:.6}"))),
            cell("p_qa", a.p_qa.map(|p| format!("{p:.6}"))),
        ];
        let class = err.error_class.map(|c| c.key().to_string()).unwrap_or_default();
        let mut record = vec![
            err.instance_id.clone(),
            err.dataset.clone(),
            err.polarity.key().to_string(),
        ];
        record.extend(fields);
        record.push(missing.join(","));
        record.push(class);
        csv.write_record(&record)?;
        rows += 1;
    }
    csv.flush().map_err(io_err)?;
    Ok(rows)
}

/// Reads a (possibly filled) sheet back into error records.
pub fn import_annotation_sheet<R: BufRead>(reader: R) -> Result<Vec<ErrorRecord>> {
    let mut csv = csv::ReaderBuilder::new()
        .delimiter(b'\t')
        .comment(Some(b'#'))
        .flexible(false)
        .from_reader(reader);
    let header = csv.headers()?.clone();
    let col = |name: &str| {
        header.iter().position(|h| h == name).ok_or_else(|| Error::Structure {
            path: format!("header.{name}"),
            message: "missing column".into(),
        })
    };
    let (id_col, ds_col, pol_col, class_col) =
        (col("instance_id")?, col("dataset")?, col("polarity")?, col("error_class")?);
    let mut out = Vec::new();
    for row in csv.records() {
        let row = row?;
        let line = row.position().map(|p| p.line() as usize).unwrap_or(0);
        let get = |i: usize| row.get(i).unwrap_or("").trim();
        let parse_err = |message: String| Error::Parse { line, message };
        let polarity = get(pol_col).parse::<Polarity>().map_err(|e| parse_err(e.to_string()))?;
        let class = match get(class_col) {
            "" | "unlabeled" => None,
            s => Some(s.parse::<ErrorClass>().map_err(|e| parse_err(e.to_string()))?),
        };
        out.push(ErrorRecord {
            instance_id: get(id_col).to_string(),
            dataset: get(ds_col).to_string(),
            polarity,
            error_class: class,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementResult {
    pub kappa: f64,
    pub n_items: usize,
    pub n_raters: usize,
    /// Share of all assignments per category.
    pub per_class_proportions: BTreeMap<String, f64>,
}

/// Fleiss' kappa from an items × categories count matrix where every row sums
/// to the same number of raters.
pub fn fleiss_kappa_counts(counts: &[Vec<usize>], categories: &[String]) -> Result<AgreementResult> {
    let n_items = counts.len();
    if n_items == 0 {
        return Err(Error::Empty("no items to rate".into()));
    }
    let k = counts[0].len();
    if k != categories.len() || counts.iter().any(|r| r.len() != k) {
        return Err(Error::Invalid("count rows must have one cell per category".into()));
    }
    let n: usize = counts[0].iter().sum();
    if n < 2 {
        return Err(Error::Invalid("need at least 2 raters per item".into()));
    }
    if let Some(i) = counts.iter().position(|r| r.iter().sum::<usize>() != n) {
        return Err(Error::Invalid(format!(
            "item {i} has a different number of ratings than item 0"
        )));
    }
    let (nf, itemsf) = (n as f64, n_items as f64);
    let p_bar = counts
        .iter()
        .map(|row| {
            let sq: usize = row.iter().map(|c| c * c).sum();
            (sq - n) as f64 / (nf * (nf - 1.0))
        })
        .sum::<f64>()
        / itemsf;
    let p_j: Vec<f64> = (0..k)
        .map(|j| counts.iter().map(|r| r[j]).sum::<usize>() as f64 / (itemsf * nf))
        .collect();
    let p_e: f64 = p_j.iter().map(|p| p * p).sum();
    if (1.0 - p_e).abs() < 1e-15 {
        return Err(Error::UndefinedKappa);
    }
    Ok(AgreementResult {
        kappa: (p_bar - p_e) / (1.0 - p_e),
        n_items,
        n_raters: n,
        per_class_proportions: categories.iter().cloned().zip(p_j).collect(),
    })
}

/// Fleiss' kappa from an items × raters label matrix.
pub fn fleiss_kappa<L: Ord + Clone + fmt::Display>(labels: &[Vec<L>]) -> Result<AgreementResult> {
    if labels.is_empty() {
        return Err(Error::Empty("no items to rate".into()));
    }
    let raters = labels[0].len();
    if labels.iter().any(|row| row.len() != raters) {
        return Err(Error::Invalid("every item needs a label from every rater".into()));
    }
    let cats: Vec<L> = labels
        .iter()
        .flatten()
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let counts: Vec<Vec<usize>> = labels
        .iter()
        .map(|row| {
            cats.iter()
                .map(|c| row.iter().filter(|l| *l == c).count())
                .collect()
        })
        .collect();
    let names: Vec<String> = cats.iter().map(ToString::to_string).collect();
    fleiss_kappa_counts(&counts, &names)
}

/// Kappa over several annotators' filled sheets. Sheets must label the same
/// instances, with no unlabeled rows.
pub fn kappa_from_sheets(sheets: &[Vec<ErrorRecord>]) -> Result<AgreementResult> {
    if sheets.len() < 2 {
        return Err(Error::Invalid("need at least 2 annotation sheets".into()));
    }
    let mut maps = Vec::with_capacity(sheets.len());
    for sheet in sheets {
        let mut m = BTreeMap::new();
        for rec in sheet {
            let class = rec.error_class.ok_or_else(|| Error::Validation {
                id: rec.instance_id.clone(),
                message: "unlabeled row".into(),
            })?;
            m.insert(rec.instance_id.clone(), class);
        }
        maps.push(m);
    }
    let all: BTreeSet<&String> = maps.iter().flat_map(|m| m.keys()).collect();
    let missing: Vec<String> = all
        .iter()
        .filter(|id| maps.iter().any(|m| !m.contains_key(**id)))
        .map(|id| id.to_string())
        .collect();
    if !missing.is_empty() {
        return Err(Error::Join { missing });
    }
    let labels: Vec<Vec<ErrorClass>> = all
        .iter()
        .map(|id| maps.iter().map(|m| m[*id]).collect())
        .collect();
    fleiss_kappa(&labels)
}

/// Class × dataset counts split by polarity, with an unlabeled row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Breakdown {
    pub datasets: Vec<String>,
    /// Row label → per-dataset `[false_positive, false_negative]`.
    pub rows: Vec<(String, Vec<[usize; 2]>)>,
    pub totals: Vec<[usize; 2]>,
}

pub const UNLABELED: &str = "Unlabeled";

/// Counts per class and dataset. Columns follow `datasets` when given, else
/// first-seen order.
pub fn breakdown_table(errors: &[ErrorRecord], datasets: Option<&[String]>) -> Breakdown {
    let datasets: Vec<String> = match datasets {
        Some(d) => d.to_vec(),
        None => {
            let mut seen = Vec::new();
            for e in errors {
                if !seen.contains(&e.dataset) {
                    seen.push(e.dataset.clone());
                }
            }
            seen
        }
    };
    let col = |d: &str| datasets.iter().position(|x| x == d);
    let mut labels: Vec<String> = ErrorClass::ALL.iter().map(|c| c.label().to_string()).collect();
    labels.push(UNLABELED.to_string());
    let mut counts = vec![vec![[0usize; 2]; datasets.len()]; labels.len()];
    for e in errors {
        let Some(j) = col(&e.dataset) else { continue };
        let row = e
            .error_class
            .map(|c| ErrorClass::ALL.iter().position(|x| *x == c).unwrap_or(0))
            .unwrap_or(ErrorClass::ALL.len());
        let p = match e.polarity {
            Polarity::FalsePositive => 0,
            Polarity::FalseNegative => 1,
        };
        counts[row][j][p] += 1;
    }
    let totals = (0..datasets.len())
        .map(|j| {
            let mut t = [0, 0];
            for row in &counts {
                t[0] += row[j][0];
                t[1] += row[j][1];
            }
            t
        })
        .collect();
    Breakdown {
        datasets,
        rows: labels.into_iter().zip(counts).collect(),
        totals,
    }
}

impl Breakdown {
    /// Tab-separated, one `FP FN` column pair per dataset, totals last.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("class");
        for d in &self.datasets {
            let _ = write!(out, "\t{d} FP\t{d} FN");
        }
        out.push('\n');
        let mut line = |label: &str, cells: &[[usize; 2]]| {
            out.push_str(label);
            for [fp, fneg] in cells {
                let _ = write!(out, "\t{fp}\t{fneg}");
            }
            out.push('\n');
        };
        for (label, cells) in &self.rows {
            line(label, cells);
        }
        line("Total", &self.totals);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn verdict(id: &str, accepted: bool, correct: bool) -> Verdict {
        Verdict {
            instance_id: id.into(),
            dataset: "NQ".into(),
            accepted,
            correct,
        }
    }

    #[test]
    fn polarity_rules() {
        let errs = detect_errors(&[
            verdict("a", true, false),
            verdict("b", false, true),
            verdict("c", true, true),
            verdict("d", false, false),
        ]);
        assert_eq!(errs.len(), 2);
        assert_eq!(errs[0].polarity, Polarity::FalsePositive);
        assert_eq!(errs[1].polarity, Polarity::FalseNegative);
        assert!(errs.iter().all(|e| e.error_class.is_none()));
    }

    fn five_errors() -> Vec<ErrorRecord> {
        let mut v = Vec::new();
        for i in 0..3 {
            v.push(verdict(&format!("fp{i}"), true, false));
        }
        for i in 0..2 {
            v.push(verdict(&format!("fn{i}"), false, true));
        }
        detect_errors(&v)
    }

    #[test]
    fn sheet_roundtrip_with_gaps() {
        let errors = five_errors();
        let mut artifacts = HashMap::new();
        artifacts.insert(
            "fp0".to_string(),
            SheetArtifacts {
                question: Some("who\tplays michael".into()),
                answer: Some("Ted Danson".into()),
                ..Default::default()
            },
        );
        let mut buf = Vec::new();
        assert_eq!(export_annotation_sheet(&mut buf, &errors, &artifacts, None).unwrap(), 5);
        let text = String::from_utf8(buf).unwrap();
        for c in ErrorClass::ALL {
            assert!(text.contains(&format!("#   {}", c.key())));
        }
        assert!(text.contains("gold_answers,premise"));

        let mut back = import_annotation_sheet(text.as_bytes()).unwrap();
        assert_eq!(back, errors);

        back[0].error_class = Some(ErrorClass::SpanShifting);
        let mut buf = Vec::new();
        export_annotation_sheet(&mut buf, &back, &artifacts, None).unwrap();
        assert_eq!(import_annotation_sheet(buf.as_slice()).unwrap(), back);
    }

    #[test]
    fn sheet_cap_per_dataset() {
        let mut buf = Vec::new();
        assert_eq!(export_annotation_sheet(&mut buf, &five_errors(), &HashMap::new(), Some(2)).unwrap(), 2);
    }

    #[test]
    fn unknown_class_is_a_parse_error() {
        let sheet = "instance_id\tdataset\tpolarity\terror_class\nx\tNQ\tfalse_positive\tbogus\n";
        assert!(matches!(import_annotation_sheet(sheet.as_bytes()), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn kappa_extremes() {
        let same = vec![vec!["a", "a", "a"], vec!["b", "b", "b"], vec!["a", "a", "a"]];
        assert_eq!(fleiss_kappa(&same).unwrap().kappa, 1.0);
        let one_class = vec![vec!["a", "a"], vec!["a", "a"]];
        assert!(matches!(fleiss_kappa(&one_class), Err(Error::UndefinedKappa)));
        assert!(fleiss_kappa(&[vec!["a"]]).is_err());
    }

    #[test]
    fn kappa_near_zero_for_independent_raters() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let labels: Vec<Vec<u8>> = (0..10_000)
            .map(|_| vec![rng.gen_range(0..2), rng.gen_range(0..2)])
            .collect();
        let r = fleiss_kappa(&labels).unwrap();
        assert!(r.kappa.abs() < 0.05, "{}", r.kappa);
        let total: f64 = r.per_class_proportions.values().sum();
        assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn kappa_permutation_invariant() {
        let labels = vec![
            vec![1, 2, 2],
            vec![1, 1, 3],
            vec![3, 3, 3],
            vec![2, 1, 2],
        ];
        let base = fleiss_kappa(&labels).unwrap().kappa;
        let raters: Vec<Vec<i32>> = labels.iter().map(|r| vec![r[2], r[0], r[1]]).collect();
        let items: Vec<Vec<i32>> = labels.iter().rev().cloned().collect();
        assert!((fleiss_kappa(&raters).unwrap().kappa - base).abs() < 1e-12);
        assert!((fleiss_kappa(&items).unwrap().kappa - base).abs() < 1e-12);
    }

    #[test]
    fn sheets_must_align() {
        let mut a = five_errors();
        a.iter_mut().for_each(|e| e.error_class = Some(ErrorClass::Entailment));
        let mut b = a.clone();
        b[0].error_class = Some(ErrorClass::Annotation);
        let r = kappa_from_sheets(&[a.clone(), b.clone()]).unwrap();
        assert_eq!(r.n_items, 5);
        b.pop();
        assert!(matches!(kappa_from_sheets(&[a, b]), Err(Error::Join { .. })));
    }

    #[test]
    fn breakdown_counts_and_totals() {
        let empty = breakdown_table(&[], Some(&["NQ".to_string()]));
        assert!(empty.rows.iter().all(|(_, c)| c[0] == [0, 0]));
        assert_eq!(empty.rows.len(), 8);

        let mut errors = five_errors();
        errors[0].error_class = Some(ErrorClass::SpanShifting);
        errors[3].error_class = Some(ErrorClass::WrongContext);
        errors[4].dataset = "TQA".into();
        let t = breakdown_table(&errors, None);
        assert_eq!(t.datasets, vec!["NQ", "TQA"]);
        let row = |label: &str| t.rows.iter().find(|(l, _)| l == label).unwrap().1.clone();
        assert_eq!(row("Span Shifting")[0], [1, 0]);
        assert_eq!(row("Wrong Context")[0], [0, 1]);
        assert_eq!(row(UNLABELED)[0], [2, 0]);
        assert_eq!(row(UNLABELED)[1], [0, 1]);
        assert_eq!(t.totals, vec![[3, 1], [0, 1]]);
        assert!(t.to_tsv().starts_with("class\tNQ FP\tNQ FN\tTQA FP\tTQA FN\n"));
    }
}
