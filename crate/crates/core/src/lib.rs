//! Answer verification for extractive QA: each (question, predicted answer,
//! context) triple is recast as an NLI problem, with the question rewritten as
//! a declarative hypothesis and the answer sentence as the premise, and the
//! entailment probability used to accept, reject or rank the answer.

pub mod answer;
pub mod backend;
pub mod calibrate;
pub mod cli;
pub mod corpus;
pub mod decontext;
pub mod error;
pub mod jsonl;
pub mod nli;
pub mod nli_dataset;
pub mod pipeline;
pub mod qconvert;
pub mod report;
pub mod scoring;
pub mod text;

pub use error::{Error, Result};
