//! Sweeps removal rates and edge budgets over a synthetic clique dataset.

use std::path::Path;

use lfrefine::data::{validate_bundle, Metric, TaskConfig};
use lfrefine::eval::{sweep, Provenance, SweepConfig};
use lfrefine::io;
use lfrefine::synth::{generate, SynthSpec};

fn main() -> lfrefine::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/data/synth_clique.json");
    let spec: SynthSpec = io::read_json(&path, "synth spec")?;
    let data = generate(&spec)?;
    let cfg = TaskConfig::new("clique", spec.class_prior, Metric::Accuracy)?;
    let bundle = validate_bundle(data.votes, data.embeddings, Some(data.gold), cfg)?;

    let report = sweep(&bundle, &SweepConfig::default(), Provenance::Synthetic)?;
    print!("{}", report.to_markdown());
    if let Some(best) = report.best() {
        println!(
            "\nbest: rate {} edges {} -> {:.4} (reference {:.4})",
            best.removal_rate, best.edge_budget, best.metric, report.rows[0].metric
        );
    }
    Ok(())
}
