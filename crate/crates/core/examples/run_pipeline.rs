//! The whole pipeline on the 50-instance fixture with mock backends, then
//! the hypothesis × premise ablation. Output goes to a temp directory unless
//! one is given.
//!
//!     cargo run --example run_pipeline [-- <out-dir>]

use std::path::{Path, PathBuf};

use qaverify::pipeline::{self, PipelineConfig};

fn main() -> qaverify::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("qaverify-example"));
    let input = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/fixtures/pipeline50.jsonl");

    let mut config = PipelineConfig::new(input, out.join("run"));
    config.grid = vec![0.1, 0.2, 0.5, 1.0];
    println!("{}", config.to_toml()?);

    let run = pipeline::run_pipeline(&config, 4)?;
    for stage in &run.manifest.stages {
        println!("{:<8} {:>3}  {}", stage.name, stage.count, stage.file);
    }
    println!("metrics {:?}\n", run.manifest.metrics);

    config.output = out.join("ablation");
    let ablation = pipeline::run_ablation(&config, 4)?;
    print!("{}", ablation.table());
    println!("\nartifacts in {}", out.display());
    Ok(())
}
