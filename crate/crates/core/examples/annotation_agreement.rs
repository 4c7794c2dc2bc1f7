//! Fleiss' kappa over error-class annotations, and the per-dataset breakdown.
//!
//!     cargo run --example annotation_agreement

use qaverify::report::{self, ErrorClass, ErrorRecord, Polarity};

fn main() -> qaverify::Result<()> {
    // Three raters label the same eight verifier errors.
    use ErrorClass::*;
    let raters = [
        [Entailment, Decontext, QuestionConversion, WrongContext, Entailment, Entailment, Decontext, SpanShifting],
        [Entailment, Decontext, QuestionConversion, WrongContext, Entailment, Decontext, Decontext, SpanShifting],
        [Entailment, Entailment, QuestionConversion, WrongContext, Entailment, Entailment, Decontext, SpanShifting],
    ];
    let per_item: Vec<Vec<ErrorClass>> = (0..8).map(|i| raters.iter().map(|r| r[i]).collect()).collect();
    let agreement = report::fleiss_kappa(&per_item)?;
    println!("kappa {:.3} over {} items, {} raters", agreement.kappa, agreement.n_items, agreement.n_raters);
    for (class, p) in &agreement.per_class_proportions {
        println!("  {class:<22} {p:.3}");
    }

    let records: Vec<ErrorRecord> = (0..8)
        .map(|i| ErrorRecord {
            instance_id: format!("e{i}"),
            dataset: if i < 5 { "NQ" } else { "SQuAD2" }.into(),
            polarity: if i % 3 == 0 { Polarity::FalseNegative } else { Polarity::FalsePositive },
            error_class: Some(raters[0][i]),
        })
        .collect();
    print!("\n{}", report::breakdown_table(&records, None).to_tsv());
    Ok(())
}
