//! Fits the triplet label model on a tiny hand-built vote matrix where two
//! LFs are marked dependent, and prints per-LF parameters and posteriors.

use lfrefine::data::{DependencyStructure, Metric, TaskConfig, VoteMatrix};
use lfrefine::labelmodel::{fit, predict};

fn main() -> lfrefine::Result<()> {
    let names = ["a", "a_copy", "b", "c", "d"].map(String::from).to_vec();
    let rows = vec![
        vec![1, 1, 1, 0, 1],
        vec![1, 1, -1, 1, 1],
        vec![-1, -1, -1, -1, 0],
        vec![-1, -1, 1, -1, -1],
        vec![1, 1, 1, 1, -1],
        vec![0, 0, -1, -1, -1],
        vec![1, 1, 0, 1, 1],
        vec![-1, -1, -1, 1, -1],
    ];
    let votes = VoteMatrix::new(names, rows)?;
    let cfg = TaskConfig::new("toy", 0.5, Metric::Accuracy)?;

    let mut structure = DependencyStructure::empty(votes.m());
    structure.edges.push([0, 1]);
    structure.validate(votes.m())?;

    let params = fit(&votes, &structure, &cfg)?;
    for lf in &params.lfs {
        println!(
            "{:>7}: a = {:.3}, p = {:.3}, w = {:+.3}, triplets = {}",
            lf.name, lf.accuracy_moment, lf.conditional_accuracy, lf.weight, lf.triplets
        );
    }
    println!("components: {:?}\n", params.components);
    print!("{}", predict(&params, &votes)?.to_csv());
    Ok(())
}
