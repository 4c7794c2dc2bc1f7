//! Feature-based calibrator for selective QA: context length, answer length
//! and the top-5 span probabilities, standardized, into a logistic model.
//!
//!     cargo run --example selective_calibrator

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qaverify::calibrate::{self, Confidence, ConfidenceRecord, FEATURE_NAMES};
use qaverify::scoring::Correctness;

fn main() -> qaverify::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let records: Vec<ConfidenceRecord> = (0..300)
        .map(|i| {
            let p1: f64 = rng.gen_range(0.2..0.95);
            let rest = 1.0 - p1;
            let top5 = [p1, rest * 0.5, rest * 0.25, rest * 0.15, rest * 0.1];
            let answer = "x ".repeat(rng.gen_range(1..6));
            let context = "w ".repeat(rng.gen_range(20..200));
            let correct = rng.gen::<f64>() < p1;
            ConfidenceRecord {
                instance_id: format!("q{i}"),
                dataset: None,
                p_qa: p1,
                p_nli: None,
                p_qa2: None,
                features: Some(calibrate::selective_features(&context, &answer, &top5)),
                f1: f64::from(correct),
                em: correct,
            }
        })
        .collect();
    let model = calibrate::fit_calibrator(&records, Correctness::ExactMatch, &calibrate::calibrator_config())?;
    for (name, w) in FEATURE_NAMES.iter().zip(model.weights) {
        println!("{name:<16} {w:+.4}");
    }
    println!("{:<16} {:+.4}", "bias", model.bias);

    let grid = [0.2, 0.5, 1.0];
    let qa = calibrate::coverage_curve(&records, &Confidence::Qa, &grid)?;
    let sel = calibrate::coverage_curve(&records, &Confidence::Selective(model), &grid)?;
    print!("\n{}", calibrate::comparison_table(&[("qa".into(), qa), ("selective".into(), sel)])?);
    Ok(())
}
