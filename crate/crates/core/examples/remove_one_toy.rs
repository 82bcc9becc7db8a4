//! Finds the most similar LF pair and scores removing either member.

use std::path::Path;

use lfrefine::data::{validate_bundle, Metric, TaskConfig};
use lfrefine::eval::remove_one_toy;
use lfrefine::io;
use lfrefine::labelmodel::Inference;
use lfrefine::synth::{generate, SynthSpec};

fn main() -> lfrefine::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/data/synth_clique.json");
    let spec: SynthSpec = io::read_json(&path, "synth spec")?;
    let data = generate(&spec)?;
    let cfg = TaskConfig::new("clique", spec.class_prior, Metric::Accuracy)?;
    let bundle = validate_bundle(data.votes, data.embeddings, Some(data.gold), cfg)?;

    let report = remove_one_toy(&bundle, Inference::default())?;
    print!("{}", report.to_markdown());
    Ok(())
}
