//! Selective QA: rank by a confidence, keep the top k%, report F1 on what is
//! kept. Compares QA confidence, NLI confidence and a fitted combination.
//!
//!     cargo run --example coverage_curves

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qaverify::calibrate::{self, Confidence, ConfidenceRecord, FitConfig};
use qaverify::scoring::Correctness;

fn main() -> qaverify::Result<()> {
    // Synthetic records: NLI is informative about correctness, QA less so.
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let records: Vec<ConfidenceRecord> = (0..400)
        .map(|i| {
            let correct = rng.gen_bool(0.6);
            let c = f64::from(correct);
            ConfidenceRecord {
                instance_id: format!("r{i:03}"),
                dataset: Some(if i % 2 == 0 { "NQ" } else { "SQuAD2" }.into()),
                p_qa: (0.4 + 0.2 * c + 0.4 * rng.gen::<f64>()).min(1.0),
                p_nli: Some((0.1 + 0.5 * c + 0.4 * rng.gen::<f64>()).min(1.0)),
                p_qa2: None,
                features: None,
                f1: c,
                em: correct,
            }
        })
        .collect();

    let (train, test) = calibrate::holdout_split(&records, 100, 7)?;
    let fit = FitConfig { fit_bias: true, ..FitConfig::default() };
    let model = calibrate::fit_combiner(&train, Correctness::ExactMatch, &fit)?;
    println!("combiner: w_qa={:.3} w_nli={:.3} bias={:.3}\n", model.w1, model.w2, model.bias);

    let grid = [0.1, 0.2, 0.3, 0.5, 0.8, 1.0];
    let mut curves = Vec::new();
    for source in [Confidence::Qa, Confidence::Nli, Confidence::Combined(model), Confidence::Oracle] {
        let per: Vec<_> = calibrate::by_dataset(&test)
            .values()
            .map(|recs| calibrate::coverage_curve(recs, &source, &grid))
            .collect::<qaverify::Result<_>>()?;
        let refs: Vec<_> = per.iter().collect();
        curves.push((source.name().to_string(), calibrate::macro_average(&refs)?));
    }
    print!("{}", calibrate::comparison_table(&curves)?);
    Ok(())
}
