//! Similarity-driven refinement of prompted labeling functions (LFs).
//!
//! The pipeline takes one embedding per LF and an `n x m` vote matrix,
//! removes redundant LFs, generates a dependency structure among the
//! survivors, and feeds that structure into a triplet-method label model.
//!
//! * [`data`] and [`io`]: domain types and file formats
//! * [`embed`]: prompt templates and embedding providers
//! * [`similarity`]: cosine, agreement and double-fault matrices
//! * [`refine`]: greedy LF removal and structure generation
//! * [`labelmodel`]: structure-aware triplet label model
//! * [`synth`]: synthetic datasets with planted structure
//! * [`eval`]: metrics, savings accounting, sweeps and reports
//! * [`cli`]: the `lfrefine` command line

pub mod cli;
pub mod data;
pub mod embed;
pub mod error;
pub mod eval;
pub mod io;
pub mod labelmodel;
pub mod refine;
pub mod similarity;
pub mod synth;

pub use data::{
    validate_bundle, Bundle, DependencyStructure, EmbeddingSet, GoldLabels, Metric, SimilarityKind, SimilarityMatrix,
    TaskConfig, VoteMatrix,
};
pub use error::{Error, Result};
