//! Greedy structure refinement over an LF similarity matrix.
//!
//! Two passes run in sequence:
//!
//! 1. **Removal.** Repeatedly pick the most similar pair of still-present LFs
//!    and drop the member with the larger index.
//! 2. **Structure generation.** On the survivors, fix the least similar pair
//!    as an independent anchor pair (no edges may touch it), then add the
//!    `m_e` most similar remaining pairs as dependency edges.
//!
//! Both passes scan only the strict upper triangle, so the diagonal never
//! participates. Ties go to the lexicographically smallest `(i, j)` with
//! `i < j`. Rows and columns of removed LFs and of the anchors are masked out
//! of later scans, and a pair already taken as an edge is never taken again;
//! a vertex may still collect several edges.

use serde::{Deserialize, Serialize};

use crate::data::{max_edges, DependencyStructure, SimilarityKind, SimilarityMatrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RemovalBudget {
    Count(usize),
    /// Fraction of all LFs, in `[0, 1)`.
    Rate(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeBudget {
    Count(usize),
    /// Fraction of [`max_edges`] for the survivor count, in `[0, 1]`.
    Rate(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RefineParams {
    pub removal: RemovalBudget,
    pub edges: EdgeBudget,
}

impl RefineParams {
    pub fn counts(m_r: usize, m_e: usize) -> Self {
        RefineParams {
            removal: RemovalBudget::Count(m_r),
            edges: EdgeBudget::Count(m_e),
        }
    }

    /// Resolves both budgets against `m` LFs into `(m_r, m_e)`.
    pub fn resolve(&self, m: usize) -> Result<(usize, usize)> {
        let m_r = match self.removal {
            RemovalBudget::Count(c) => c,
            RemovalBudget::Rate(r) => resolve_removal_count(r, m)?,
        };
        if m_r >= m {
            return Err(Error::InvalidParameter(format!("m_r = {m_r} must be below m = {m}")));
        }
        let survivors = m - m_r;
        let m_e = match self.edges {
            EdgeBudget::Count(c) => c,
            EdgeBudget::Rate(r) => resolve_edge_count(r, survivors)?,
        };
        if m_e > max_edges(survivors) {
            return Err(Error::InvalidParameter(format!(
                "m_e = {m_e} exceeds the bound {} for {survivors} surviving LFs",
                max_edges(survivors)
            )));
        }
        Ok((m_r, m_e))
    }
}

/// `round_half_even(rate * m)`.
pub fn resolve_removal_count(rate: f64, m: usize) -> Result<usize> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::InvalidParameter(format!("removal rate {rate} outside [0, 1)")));
    }
    Ok((rate * m as f64).round_ties_even() as usize)
}

/// `round_half_even(rate * max_edges(survivors))`.
pub fn resolve_edge_count(rate: f64, survivors: usize) -> Result<usize> {
    if !(0.0..=1.0).contains(&rate) {
        return Err(Error::InvalidParameter(format!("edge rate {rate} outside [0, 1]")));
    }
    Ok((rate * max_edges(survivors) as f64).round_ties_even() as usize)
}

/// One greedy pick: the pair and the matrix value that won.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pick {
    pub i: usize,
    pub j: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Removal {
    /// In removal order.
    pub removed: Vec<usize>,
    /// Ascending.
    pub survivors: Vec<usize>,
    pub picks: Vec<Pick>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generated {
    pub anchors: Pick,
    /// Edges as `[i, j]`, `i < j`, in selection order.
    pub edges: Vec<[usize; 2]>,
    pub picks: Vec<Pick>,
}

#[derive(Clone, Copy)]
enum Extremum {
    Max,
    Min,
}

/// Scans the upper triangle for the extremum among admissible pairs. The
/// first pair reaching the extremum in row-major order wins, which is the
/// lexicographically smallest one.
fn scan(matrix: &SimilarityMatrix, want: Extremum, admissible: impl Fn(usize, usize) -> bool) -> Option<Pick> {
    let mut best: Option<Pick> = None;
    for i in 0..matrix.m() {
        for j in i + 1..matrix.m() {
            if !admissible(i, j) {
                continue;
            }
            let value = matrix.get(i, j);
            let better = match (best, want) {
                (None, _) => true,
                (Some(b), Extremum::Max) => value > b.value,
                (Some(b), Extremum::Min) => value < b.value,
            };
            if better {
                best = Some(Pick { i, j, value });
            }
        }
    }
    best
}

fn check_finite(matrix: &SimilarityMatrix) -> Result<()> {
    if matrix.upper_triangle().iter().any(|v| !v.is_finite()) {
        return Err(Error::malformed("similarity matrix", "non-finite entry"));
    }
    Ok(())
}

/// Removes `m_r` LFs, each time dropping the larger index of the most
/// similar surviving pair.
pub fn lare(matrix: &SimilarityMatrix, m_r: usize) -> Result<Removal> {
    let m = matrix.m();
    if m_r >= m {
        return Err(Error::InvalidParameter(format!("m_r = {m_r} must be below m = {m}")));
    }
    check_finite(matrix)?;
    let mut present = vec![true; m];
    let mut removed = Vec::with_capacity(m_r);
    let mut picks = Vec::with_capacity(m_r);
    for _ in 0..m_r {
        let pick = scan(matrix, Extremum::Max, |i, j| present[i] && present[j])
            .expect("at least two LFs remain while m_r < m");
        // j > i always, so j is the larger index
        present[pick.j] = false;
        removed.push(pick.j);
        picks.push(pick);
    }
    let survivors = (0..m).filter(|&i| present[i]).collect();
    Ok(Removal {
        removed,
        survivors,
        picks,
    })
}

/// Picks the least similar pair as anchors, then the `m_e` most similar
/// non-anchor pairs as edges. Indices are local to `matrix`.
pub fn cosgen(matrix: &SimilarityMatrix, m_e: usize) -> Result<Generated> {
    let m = matrix.m();
    if m < 2 {
        return Err(Error::InvalidParameter(format!(
            "structure generation needs at least 2 LFs, got {m}"
        )));
    }
    if m_e > max_edges(m) {
        return Err(Error::InvalidParameter(format!(
            "m_e = {m_e} exceeds the bound (m-2)(m-3)/2 = {} for m = {m}",
            max_edges(m)
        )));
    }
    check_finite(matrix)?;
    let anchors = scan(matrix, Extremum::Min, |_, _| true).expect("m >= 2");
    let mut free = vec![true; m];
    free[anchors.i] = false;
    free[anchors.j] = false;
    let mut taken = vec![false; m * m];
    let mut edges = Vec::with_capacity(m_e);
    let mut picks = Vec::with_capacity(m_e);
    for _ in 0..m_e {
        let pick = scan(matrix, Extremum::Max, |i, j| free[i] && free[j] && !taken[i * m + j])
            .expect("bound guarantees an untaken pair");
        taken[pick.i * m + pick.j] = true;
        edges.push([pick.i, pick.j]);
        picks.push(pick);
    }
    Ok(Generated { anchors, edges, picks })
}

fn structure_from(matrix: &SimilarityMatrix, params: &RefineParams) -> Result<DependencyStructure> {
    let (m_r, m_e) = params.resolve(matrix.m())?;
    let removal = lare(matrix, m_r)?;
    let restricted = matrix.submatrix(&removal.survivors);
    let generated = cosgen(&restricted, m_e)?;
    let orig = |k: usize| removal.survivors[k];
    let structure = DependencyStructure {
        anchors: Some([orig(generated.anchors.i), orig(generated.anchors.j)]),
        edges: generated.edges.iter().map(|&[i, j]| [orig(i), orig(j)]).collect(),
        removed: removal.removed,
        survivors: removal.survivors,
    };
    debug_assert!(structure.validate(matrix.m()).is_ok());
    Ok(structure)
}

/// Removal followed by structure generation on the cosine similarity
/// matrix. All indices in the result are original LF indices.
pub fn refine_pipeline(cosine: &SimilarityMatrix, params: &RefineParams) -> Result<DependencyStructure> {
    if cosine.kind() != SimilarityKind::Cosine {
        return Err(Error::InvalidParameter(format!(
            "refine_pipeline expects a cosine matrix, got {}",
            cosine.kind().as_str()
        )));
    }
    structure_from(cosine, params)
}

/// Same procedure driven by the empirical vote-agreement matrix; a
/// data-driven baseline to compare against the embedding route.
pub fn empirical_structure(agreement: &SimilarityMatrix, params: &RefineParams) -> Result<DependencyStructure> {
    if agreement.kind() != SimilarityKind::Agreement {
        return Err(Error::InvalidParameter(format!(
            "empirical_structure expects an agreement matrix, got {}",
            agreement.kind().as_str()
        )));
    }
    structure_from(agreement, params)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cos(rows: Vec<Vec<f64>>) -> SimilarityMatrix {
        SimilarityMatrix::from_rows(SimilarityKind::Cosine, rows).unwrap()
    }

    #[test]
    fn removal_count_examples() {
        assert_eq!(resolve_removal_count(0.30, 73).unwrap(), 22);
        assert_eq!(resolve_removal_count(0.50, 73).unwrap(), 36);
        assert_eq!(resolve_removal_count(0.50, 11).unwrap(), 6);
        assert_eq!(resolve_removal_count(0.10, 10).unwrap(), 1);
        assert!(resolve_removal_count(1.0, 10).is_err());
        assert!(resolve_removal_count(-0.1, 10).is_err());
    }

    #[test]
    fn zero_removals_is_a_no_op() {
        let m = cos(vec![vec![1.0, 0.3, 0.2], vec![0.3, 1.0, 0.1], vec![0.2, 0.1, 1.0]]);
        let r = lare(&m, 0).unwrap();
        assert!(r.removed.is_empty());
        assert_eq!(r.survivors, vec![0, 1, 2]);
    }

    #[test]
    fn three_lf_removal_drops_larger_index() {
        let m = cos(vec![vec![1.0, 0.9, 0.2], vec![0.9, 1.0, 0.1], vec![0.2, 0.1, 1.0]]);
        let r = lare(&m, 1).unwrap();
        assert_eq!(r.removed, vec![1]);
        assert_eq!(r.survivors, vec![0, 2]);
        assert!(lare(&m, 3).is_err());
    }

    #[test]
    fn negative_similarities_never_reselect_removed_lfs() {
        let m = cos(vec![
            vec![1.0, -0.2, -0.5, -0.6],
            vec![-0.2, 1.0, -0.7, -0.9],
            vec![-0.5, -0.7, 1.0, -0.3],
            vec![-0.6, -0.9, -0.3, 1.0],
        ]);
        let r = lare(&m, 3).unwrap();
        assert_eq!(r.removed, vec![1, 3, 2]);
        assert_eq!(r.survivors, vec![0]);
    }

    #[test]
    fn cosgen_empty_structure_and_bound() {
        let rows: Vec<Vec<f64>> = (0..11)
            .map(|i| {
                (0..11)
                    .map(|j| {
                        if i == j {
                            1.0
                        } else {
                            0.01 * ((i * 7 + j * 7) % 13) as f64
                        }
                    })
                    .collect()
            })
            .collect();
        let m = cos(rows);
        let g = cosgen(&m, 0).unwrap();
        assert!(g.edges.is_empty());
        assert_eq!(max_edges(11), 36);
        assert_eq!(cosgen(&m, 36).unwrap().edges.len(), 36);
        assert!(cosgen(&m, 37).is_err());
    }

    #[test]
    fn cosgen_allows_degree_above_one() {
        let m = cos(vec![
            vec![1.0, 0.0, 0.1, 0.1, 0.1],
            vec![0.0, 1.0, 0.1, 0.1, 0.1],
            vec![0.1, 0.1, 1.0, 0.9, 0.8],
            vec![0.1, 0.1, 0.9, 1.0, 0.3],
            vec![0.1, 0.1, 0.8, 0.3, 1.0],
        ]);
        let g = cosgen(&m, 3).unwrap();
        assert_eq!((g.anchors.i, g.anchors.j), (0, 1));
        assert_eq!(g.edges, vec![[2, 3], [2, 4], [3, 4]]);
    }

    #[test]
    fn cosgen_needs_two_lfs() {
        assert!(cosgen(&cos(vec![vec![1.0]]), 0).is_err());
        let g = cosgen(&cos(vec![vec![1.0, 0.4], vec![0.4, 1.0]]), 0).unwrap();
        assert_eq!((g.anchors.i, g.anchors.j), (0, 1));
    }

    #[test]
    fn duplicate_block_pipeline() {
        // LFs 1 and 3 are exact duplicates; after removing 3 the top pair is (1, 2)
        let m = cos(vec![
            vec![1.0, 0.1, 0.2, 0.1],
            vec![0.1, 1.0, 0.6, 1.0],
            vec![0.2, 0.6, 1.0, 0.6],
            vec![0.1, 1.0, 0.6, 1.0],
        ]);
        let s = refine_pipeline(&m, &RefineParams::counts(1, 0)).unwrap();
        assert_eq!(s.removed, vec![3]);
        assert_eq!(s.survivors, vec![0, 1, 2]);
        assert_eq!(s.anchors, Some([0, 1]));
        assert!(s.edges.is_empty());
    }

    #[test]
    fn pipeline_reports_original_indices() {
        let m = cos(vec![
            vec![1.0, 0.95, 0.1, 0.2, 0.3, 0.0],
            vec![0.95, 1.0, 0.1, 0.2, 0.3, 0.0],
            vec![0.1, 0.1, 1.0, 0.8, 0.4, 0.05],
            vec![0.2, 0.2, 0.8, 1.0, 0.5, 0.1],
            vec![0.3, 0.3, 0.4, 0.5, 1.0, 0.2],
            vec![0.0, 0.0, 0.05, 0.1, 0.2, 1.0],
        ]);
        let s = refine_pipeline(&m, &RefineParams::counts(1, 1)).unwrap();
        assert_eq!(s.removed, vec![1]);
        assert_eq!(s.survivors, vec![0, 2, 3, 4, 5]);
        assert_eq!(s.anchors, Some([0, 5]));
        assert_eq!(s.edges, vec![[2, 3]]);
        s.validate(6).unwrap();
    }

    #[test]
    fn pass_through_and_kind_checks() {
        let m = cos(vec![vec![1.0, 0.3, 0.2], vec![0.3, 1.0, 0.1], vec![0.2, 0.1, 1.0]]);
        let s = refine_pipeline(&m, &RefineParams::counts(0, 0)).unwrap();
        assert_eq!(s.survivors, vec![0, 1, 2]);
        assert!(s.edges.is_empty() && s.removed.is_empty());
        assert!(empirical_structure(&m, &RefineParams::counts(0, 0)).is_err());
    }

    #[test]
    fn youtube_ten_percent() {
        let rows: Vec<Vec<f64>> = (0..10)
            .map(|i| {
                (0..10)
                    .map(|j| if i == j { 1.0 } else { 1.0 / (1.0 + (i + j) as f64) })
                    .collect()
            })
            .collect();
        let params = RefineParams {
            removal: RemovalBudget::Rate(0.1),
            edges: EdgeBudget::Count(0),
        };
        let s = refine_pipeline(&cos(rows), &params).unwrap();
        assert_eq!(s.removed.len(), 1);
        assert_eq!(s.survivors.len(), 9);
    }

    #[test]
    fn params_resolution() {
        let p = RefineParams {
            removal: RemovalBudget::Rate(0.5),
            edges: EdgeBudget::Rate(0.25),
        };
        // 11 LFs -> 6 removed, 5 survivors, max edges 3, 0.75 rounds to 1
        assert_eq!(p.resolve(11).unwrap(), (6, 1));
        assert!(RefineParams::counts(2, 1).resolve(5).is_err());
        assert!(RefineParams::counts(5, 0).resolve(5).is_err());
        assert!(resolve_edge_count(1.5, 6).is_err());
    }
}
