//! Question + answer → declarative hypothesis, with each converter.
//!
//!     cargo run --example convert_questions

use qaverify::backend::MockBackend;
use qaverify::qconvert::{self, HypothesisMethod};

fn main() -> qaverify::Result<()> {
    let pairs = [
        ("who plays michael on the good place", "Ted Danson"),
        ("the first vice president of India who became the president later was?", "Venkaiah Naidu"),
        ("how many players are on a soccer team", "11"),
        ("where was albert einstein born", "Ulm"),
        ("did the beatles play at woodstock", "no"),
        ("largest city of brazil by population", "São Paulo"),
    ];
    let mock = MockBackend;
    for (q, a) in pairs {
        let rule = qconvert::convert_rule(q, a);
        println!("{q}  [{a}]");
        println!("  rule    {:?}: {}", rule.rule.unwrap(), rule.text);
        for w in &rule.warnings {
            println!("          warning: {w}");
        }
        let concat = qconvert::convert(HypothesisMethod::Concat, q, a, None)?;
        println!("  concat  {}", concat.text);
        let neural = qconvert::convert(HypothesisMethod::Neural, q, a, Some(&mock))?;
        println!("  neural  {}", neural.text);
    }
    Ok(())
}
