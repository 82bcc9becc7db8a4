//! Loads the 11 Spouse prompted LFs, renders one prompt, and looks up the
//! template embeddings from a file provider.

use std::path::Path;

use lfrefine::embed::{embed_prompts, read_prompted_lfs, render_relation_prompt, ProviderConfig, ProviderKind};

fn main() -> lfrefine::Result<()> {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/data");
    let lfs = read_prompted_lfs(&data.join("spouse_lfs.json"))?;

    let rendered = render_relation_prompt(&lfs[10], "Ann and Bob wed in June.", "Ann", "Bob");
    println!("{}\n", rendered.prompt);
    println!("answer `Yes` -> {}", lfs[10].label_map("Yes"));
    println!("answer `no` -> {}\n", lfs[10].label_map("no"));

    let cfg = ProviderConfig::new(ProviderKind::File(data.join("spouse_embeddings.json")));
    let set = embed_prompts(&lfs, &cfg)?;
    println!("{} vectors of dimension {}", set.len(), set.dim);
    Ok(())
}
