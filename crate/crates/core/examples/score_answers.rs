//! Normalized exact match and token F1 against several gold answers.
//!
//!     cargo run --example score_answers

use qaverify::scoring::{self, Correctness};

fn main() {
    let golds = ["Richard Branson", "Sir Richard Branson"];
    for pred in ["richard branson", "The Richard Branson!", "Branson", "Virgin Group", ""] {
        let m = scoring::match_answer(pred, &golds);
        println!(
            "{pred:<22} normalized={:<18} EM={} F1={:.3} correct@F1>=0.6={}",
            format!("{:?}", scoring::normalize(pred)),
            m.em as u8,
            m.f1,
            Correctness::F1AtLeast { threshold: 0.6 }.is_correct(&m),
        );
    }
}
