//! Cosine similarity over the Spouse prompt embeddings, then one removal
//! and two dependency edges.

use std::path::Path;

use lfrefine::io;
use lfrefine::refine::{refine_pipeline, EdgeBudget, RefineParams, RemovalBudget};
use lfrefine::similarity::cosine_matrix;

fn main() -> lfrefine::Result<()> {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/data");
    let emb = io::read_embeddings(&data.join("spouse_embeddings.json"))?;
    let cos = cosine_matrix(&emb)?;

    println!("{}", io::similarity_heatmap_csv(&cos, &emb.lf_names));

    let params = RefineParams {
        removal: RemovalBudget::Count(1),
        edges: EdgeBudget::Count(2),
    };
    let s = refine_pipeline(&cos, &params)?;
    let name = |i: usize| emb.lf_names[i].as_str();
    println!("removed: {:?}", s.removed.iter().map(|&i| name(i)).collect::<Vec<_>>());
    if let Some([a, b]) = s.anchors {
        println!("anchors: {} / {}", name(a), name(b));
    }
    for [a, b] in &s.edges {
        println!("edge: {} -- {}", name(*a), name(*b));
    }
    Ok(())
}
