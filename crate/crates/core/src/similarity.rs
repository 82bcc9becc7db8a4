//! Pairwise LF matrices: embedding cosine similarity, vote agreement and
//! double-fault rate, plus a rank-correlation diagnostic between two of them.

use rayon::prelude::*;

use crate::data::{EmbeddingSet, GoldLabels, SimilarityKind, SimilarityMatrix, VoteMatrix};
use crate::error::{Error, Result};

/// Fills the upper triangle row by row with `f(i, j)` and mirrors it.
fn symmetric_from<F>(kind: SimilarityKind, m: usize, diagonal: impl Fn(usize) -> f64, f: F) -> SimilarityMatrix
where
    F: Fn(usize, usize) -> f64 + Sync,
{
    let upper: Vec<Vec<f64>> = (0..m)
        .into_par_iter()
        .map(|i| (i + 1..m).map(|j| f(i, j)).collect())
        .collect();
    let mut data = vec![0.0; m * m];
    for (i, row) in upper.into_iter().enumerate() {
        data[i * m + i] = diagonal(i);
        for (off, v) in row.into_iter().enumerate() {
            let j = i + 1 + off;
            data[i * m + j] = v;
            data[j * m + i] = v;
        }
    }
    SimilarityMatrix::from_parts(kind, m, data)
}

pub fn cosine_matrix(emb: &EmbeddingSet) -> Result<SimilarityMatrix> {
    let norms: Vec<f64> = emb
        .vectors
        .iter()
        .map(|v| v.iter().map(|x| x * x).sum::<f64>().sqrt())
        .collect();
    if let Some(i) = norms.iter().position(|&n| n == 0.0 || !n.is_finite()) {
        return Err(Error::ZeroVector(i));
    }
    for (index, v) in emb.vectors.iter().enumerate() {
        if v.len() != emb.dim {
            return Err(Error::DimensionDisagreement {
                index,
                expected: emb.dim,
                found: v.len(),
            });
        }
    }
    Ok(symmetric_from(
        SimilarityKind::Cosine,
        emb.len(),
        |_| 1.0,
        |i, j| {
            let dot: f64 = emb.vectors[i].iter().zip(&emb.vectors[j]).map(|(a, b)| a * b).sum();
            (dot / (norms[i] * norms[j])).clamp(-1.0, 1.0)
        },
    ))
}

/// Fraction of co-voted examples on which two LFs cast the same vote.
/// Pairs that never co-vote score 0.
pub fn agreement_matrix(votes: &VoteMatrix) -> SimilarityMatrix {
    symmetric_from(
        SimilarityKind::Agreement,
        votes.m(),
        |_| 1.0,
        |i, j| {
            let (agree, both) = co_vote_counts(votes, i, j);
            agree as f64 / both.max(1) as f64
        },
    )
}

/// `(agreeing, co-voting)` example counts for LFs `i` and `j`.
pub fn co_vote_counts(votes: &VoteMatrix, i: usize, j: usize) -> (usize, usize) {
    votes.rows().fold((0, 0), |(agree, both), row| {
        let (a, b) = (row[i], row[j]);
        if a != 0 && b != 0 {
            (agree + usize::from(a == b), both + 1)
        } else {
            (agree, both)
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DoubleFaultNorm {
    /// Divide by the number of examples.
    #[default]
    Examples,
    /// Divide by the number of examples both LFs vote on.
    CoVotes,
}

/// Rate of examples on which both LFs vote and both are wrong. The diagonal
/// is the LF's own error count under the same normalization.
pub fn double_fault_matrix(votes: &VoteMatrix, gold: &GoldLabels, norm: DoubleFaultNorm) -> Result<SimilarityMatrix> {
    if gold.len() != votes.n() {
        return Err(Error::DimensionMismatch {
            axis: "n (example count: gold vs votes)",
            expected: votes.n(),
            found: gold.len(),
        });
    }
    if !gold.is_complete() {
        return Err(Error::MissingGold(format!(
            "double-fault needs a label for every example ({} of {} labeled)",
            gold.labeled_count(),
            gold.len()
        )));
    }
    let y: Vec<i8> = gold.labels().iter().map(|l| l.expect("checked complete")).collect();
    let n = votes.n();
    let rate = |i: usize, j: usize| {
        let (mut faults, mut both) = (0usize, 0usize);
        for (row, &truth) in votes.rows().zip(&y) {
            let (a, b) = (row[i], row[j]);
            if a != 0 && b != 0 {
                both += 1;
                if a != truth && b != truth {
                    faults += 1;
                }
            }
        }
        let denom = match norm {
            DoubleFaultNorm::Examples => n,
            DoubleFaultNorm::CoVotes => both,
        };
        faults as f64 / denom.max(1) as f64
    };
    Ok(symmetric_from(
        SimilarityKind::DoubleFault,
        votes.m(),
        |i| rate(i, i),
        rate,
    ))
}

/// Average ranks (1-based), ties sharing the mean of their positions.
fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let rank = (start + end + 1) as f64 / 2.0;
        for &k in &order[start..end] {
            ranks[k] = rank;
        }
        start = end;
    }
    ranks
}

fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return None;
    }
    Some((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman correlation between the off-diagonal upper triangles of two
/// matrices of equal size.
pub fn matrix_rank_correlation(a: &SimilarityMatrix, b: &SimilarityMatrix) -> Result<f64> {
    if a.m() != b.m() {
        return Err(Error::DimensionMismatch {
            axis: "matrix size",
            expected: a.m(),
            found: b.m(),
        });
    }
    if a.m() < 3 {
        return Err(Error::InvalidParameter(format!(
            "rank correlation needs m >= 3 (got {}), fewer than 3 pairs is degenerate",
            a.m()
        )));
    }
    let (ra, rb) = (average_ranks(&a.upper_triangle()), average_ranks(&b.upper_triangle()));
    pearson(&ra, &rb).ok_or_else(|| {
        Error::InvalidParameter("rank correlation undefined: one matrix is constant off the diagonal".into())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::SimilarityKind;

    fn names(m: usize) -> Vec<String> {
        (0..m).map(|i| format!("lf{i}")).collect()
    }

    #[test]
    fn identical_and_orthogonal_vectors() {
        let emb = EmbeddingSet::new(names(3), vec![vec![1.0, 0.0], vec![2.0, 0.0], vec![0.0, 3.0]]).unwrap();
        let m = cosine_matrix(&emb).unwrap();
        assert_eq!(m.get(0, 1), 1.0);
        assert_eq!(m.get(0, 2), 0.0);
        assert_eq!(m.get(2, 2), 1.0);
        m.validate().unwrap();
    }

    #[test]
    fn agreement_identity_and_vacuous() {
        let votes = VoteMatrix::new(
            names(3),
            vec![vec![1, 1, 0], vec![-1, -1, 0], vec![1, 1, 0], vec![0, 0, 1]],
        )
        .unwrap();
        let a = agreement_matrix(&votes);
        assert_eq!(a.get(0, 1), 1.0);
        // LF 2 never co-votes with 0 or 1
        assert_eq!(a.get(0, 2), 0.0);
        assert_eq!(co_vote_counts(&votes, 0, 2), (0, 0));
    }

    #[test]
    fn double_fault_extremes() {
        let gold = GoldLabels::complete(vec![1, -1, 1, -1]).unwrap();
        let perfect = VoteMatrix::new(names(2), vec![vec![1, 1], vec![-1, -1], vec![1, 1], vec![-1, -1]]).unwrap();
        let df = double_fault_matrix(&perfect, &gold, DoubleFaultNorm::Examples).unwrap();
        assert!(df.rows().iter().flatten().all(|&v| v == 0.0));

        let wrong = perfect.negated();
        let df = double_fault_matrix(&wrong, &gold, DoubleFaultNorm::Examples).unwrap();
        assert_eq!(df.get(0, 1), 1.0);
        assert_eq!(df.get(0, 0), 1.0);
    }

    #[test]
    fn double_fault_normalizations_differ() {
        let gold = GoldLabels::complete(vec![1, 1, 1, 1]).unwrap();
        let votes = VoteMatrix::new(names(2), vec![vec![-1, -1], vec![1, 0], vec![0, 0], vec![0, 1]]).unwrap();
        let by_n = double_fault_matrix(&votes, &gold, DoubleFaultNorm::Examples).unwrap();
        let by_co = double_fault_matrix(&votes, &gold, DoubleFaultNorm::CoVotes).unwrap();
        assert_eq!(by_n.get(0, 1), 0.25);
        assert_eq!(by_co.get(0, 1), 1.0);
    }

    #[test]
    fn double_fault_requires_full_gold() {
        let votes = VoteMatrix::new(names(2), vec![vec![1, 1], vec![1, 1]]).unwrap();
        let gold = GoldLabels::new(vec![Some(1), None]).unwrap();
        assert!(matches!(
            double_fault_matrix(&votes, &gold, DoubleFaultNorm::Examples),
            Err(Error::MissingGold(_))
        ));
    }

    #[test]
    fn rank_correlation_identity_and_reversal() {
        let rows = vec![
            vec![1.0, 0.2, 0.5, 0.1],
            vec![0.2, 1.0, 0.3, 0.7],
            vec![0.5, 0.3, 1.0, 0.4],
            vec![0.1, 0.7, 0.4, 1.0],
        ];
        let a = SimilarityMatrix::from_rows(SimilarityKind::Cosine, rows.clone()).unwrap();
        let neg: Vec<Vec<f64>> = rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                r.iter()
                    .enumerate()
                    .map(|(j, &v)| if i == j { 1.0 } else { -v })
                    .collect()
            })
            .collect();
        let b = SimilarityMatrix::from_rows(SimilarityKind::Cosine, neg).unwrap();
        assert!((matrix_rank_correlation(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        assert!((matrix_rank_correlation(&a, &b).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn rank_correlation_rejects_small_m() {
        let a = SimilarityMatrix::from_rows(SimilarityKind::Cosine, vec![vec![1.0, 0.2], vec![0.2, 1.0]]).unwrap();
        assert!(matrix_rank_correlation(&a, &a).is_err());
    }

    #[test]
    fn average_ranks_share_ties() {
        assert_eq!(average_ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }
}
