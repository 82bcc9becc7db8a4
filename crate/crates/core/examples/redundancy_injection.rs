//! Appends noisy near-duplicates of every LF, then checks how many of them
//! greedy removal catches.

use std::path::Path;

use lfrefine::io;
use lfrefine::refine::lare;
use lfrefine::similarity::cosine_matrix;
use lfrefine::synth::{generate, inject_redundancy, SynthSpec};

fn main() -> lfrefine::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/data/synth_clique.json");
    let spec: SynthSpec = io::read_json(&path, "synth spec")?;
    let data = generate(&spec)?;
    let aug = inject_redundancy(&data.embeddings, &data.votes, 1, 0.01, 0.05, 7)?;

    let cos = cosine_matrix(&aug.embeddings)?;
    let removal = lare(&cos, aug.duplicates.len())?;
    let caught = removal
        .removed
        .iter()
        .filter(|&&r| aug.duplicates.iter().any(|d| d.index == r || d.source == r))
        .count();
    println!(
        "{} LFs after injection, removed {} of which {} belong to a duplicate pair",
        aug.votes.m(),
        removal.removed.len(),
        caught
    );
    for p in &removal.picks {
        println!(
            "  {} ~ {} ({:.4})",
            aug.votes.lf_names()[p.i],
            aug.votes.lf_names()[p.j],
            p.value
        );
    }
    Ok(())
}
