//! Shared domain types: votes, gold labels, embeddings, similarity matrices
//! and dependency structures.
//!
//! LFs are indexed from 0 in every type and file. Votes are encoded as
//! `-1` (negative class), `0` (abstain) and `+1` (positive class).

use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const NEGATIVE: i8 = -1;
pub const ABSTAIN: i8 = 0;
pub const POSITIVE: i8 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Metric {
    #[default]
    #[serde(rename = "accuracy")]
    Accuracy,
    #[serde(rename = "f1-positive")]
    F1Positive,
}

fn default_prior() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskConfig {
    pub task_name: String,
    /// `(negative, positive)` class names.
    pub label_names: (String, String),
    #[serde(default = "default_prior")]
    pub class_prior: f64,
    #[serde(default)]
    pub metric: Metric,
}

impl TaskConfig {
    pub fn new(task_name: impl Into<String>, class_prior: f64, metric: Metric) -> Result<Self> {
        let cfg = TaskConfig {
            task_name: task_name.into(),
            label_names: ("negative".into(), "positive".into()),
            class_prior,
            metric,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.class_prior > 0.0 && self.class_prior < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "class_prior must lie in (0, 1), got {}",
                self.class_prior
            )));
        }
        if self.label_names.0 == self.label_names.1 {
            return Err(Error::InvalidParameter(format!(
                "label names must be distinct, both are `{}`",
                self.label_names.0
            )));
        }
        Ok(())
    }

    /// `ln(prior / (1 - prior))`.
    pub fn prior_log_odds(&self) -> f64 {
        self.class_prior.ln() - (1.0 - self.class_prior).ln()
    }
}

fn check_names(names: &[String]) -> Result<()> {
    let mut seen = HashSet::with_capacity(names.len());
    for name in names {
        if !seen.insert(name.as_str()) {
            return Err(Error::DuplicateName(name.clone()));
        }
    }
    Ok(())
}

/// Dense `n x m` vote matrix, stored row-major (one row per example).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VoteMatrix {
    n: usize,
    m: usize,
    votes: Vec<i8>,
    lf_names: Vec<String>,
}

impl VoteMatrix {
    pub fn new(lf_names: Vec<String>, rows: Vec<Vec<i64>>) -> Result<Self> {
        let m = lf_names.len();
        check_names(&lf_names)?;
        let n = rows.len();
        let mut votes = Vec::with_capacity(n * m);
        for (row, values) in rows.into_iter().enumerate() {
            if values.len() != m {
                return Err(Error::DimensionMismatch {
                    axis: "vote row length (m)",
                    expected: m,
                    found: values.len(),
                });
            }
            for (col, value) in values.into_iter().enumerate() {
                if !(-1..=1).contains(&value) {
                    return Err(Error::VoteOutOfRange { value, row, col });
                }
                votes.push(value as i8);
            }
        }
        Ok(VoteMatrix { n, m, votes, lf_names })
    }

    /// Builds from a flat row-major buffer that is already known to hold
    /// only `{-1, 0, 1}`.
    pub fn from_flat(lf_names: Vec<String>, n: usize, votes: Vec<i8>) -> Result<Self> {
        let m = lf_names.len();
        check_names(&lf_names)?;
        if votes.len() != n * m {
            return Err(Error::DimensionMismatch {
                axis: "vote buffer length (n*m)",
                expected: n * m,
                found: votes.len(),
            });
        }
        if let Some(pos) = votes.iter().position(|v| !(-1..=1).contains(v)) {
            return Err(Error::VoteOutOfRange {
                value: votes[pos] as i64,
                row: pos / m.max(1),
                col: pos % m.max(1),
            });
        }
        Ok(VoteMatrix { n, m, votes, lf_names })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn lf_names(&self) -> &[String] {
        &self.lf_names
    }

    #[inline]
    pub fn get(&self, example: usize, lf: usize) -> i8 {
        self.votes[example * self.m + lf]
    }

    pub fn row(&self, example: usize) -> &[i8] {
        &self.votes[example * self.m..(example + 1) * self.m]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[i8]> {
        // chunks_exact panics on 0, and an m = 0 matrix has no meaningful rows
        self.votes
            .chunks_exact(self.m.max(1))
            .take(if self.m == 0 { 0 } else { self.n })
    }

    pub fn column(&self, lf: usize) -> Vec<i8> {
        (0..self.n).map(|x| self.get(x, lf)).collect()
    }

    /// Keeps the listed columns, in the listed order.
    pub fn select_columns(&self, cols: &[usize]) -> Result<VoteMatrix> {
        if let Some(&bad) = cols.iter().find(|&&c| c >= self.m) {
            return Err(Error::InvalidParameter(format!(
                "column {bad} out of range for m = {}",
                self.m
            )));
        }
        let names = cols.iter().map(|&c| self.lf_names[c].clone()).collect();
        let mut votes = Vec::with_capacity(self.n * cols.len());
        for row in self.rows() {
            votes.extend(cols.iter().map(|&c| row[c]));
        }
        VoteMatrix::from_flat(names, self.n, votes)
    }

    /// Swaps the two classes everywhere.
    pub fn negated(&self) -> VoteMatrix {
        VoteMatrix {
            n: self.n,
            m: self.m,
            votes: self.votes.iter().map(|v| -v).collect(),
            lf_names: self.lf_names.clone(),
        }
    }

    pub fn as_flat(&self) -> &[i8] {
        &self.votes
    }
}

/// Gold labels; `None` marks an unlabeled example.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GoldLabels {
    labels: Vec<Option<i8>>,
}

impl GoldLabels {
    pub fn new(labels: Vec<Option<i8>>) -> Result<Self> {
        for (row, label) in labels.iter().enumerate() {
            if let Some(v) = label {
                if *v != NEGATIVE && *v != POSITIVE {
                    return Err(Error::VoteOutOfRange {
                        value: *v as i64,
                        row,
                        col: 0,
                    });
                }
            }
        }
        Ok(GoldLabels { labels })
    }

    pub fn complete(labels: Vec<i8>) -> Result<Self> {
        Self::new(labels.into_iter().map(Some).collect())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn get(&self, example: usize) -> Option<i8> {
        self.labels[example]
    }

    pub fn labels(&self) -> &[Option<i8>] {
        &self.labels
    }

    pub fn is_complete(&self) -> bool {
        self.labels.iter().all(Option::is_some)
    }

    pub fn labeled_count(&self) -> usize {
        self.labels.iter().filter(|l| l.is_some()).count()
    }
}

/// One embedding vector per LF.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingSet {
    pub lf_names: Vec<String>,
    pub dim: usize,
    pub vectors: Vec<Vec<f64>>,
}

impl EmbeddingSet {
    pub fn new(lf_names: Vec<String>, vectors: Vec<Vec<f64>>) -> Result<Self> {
        let dim = vectors.first().map_or(0, Vec::len);
        let set = EmbeddingSet { lf_names, dim, vectors };
        set.validate()?;
        Ok(set)
    }

    pub fn validate(&self) -> Result<()> {
        check_names(&self.lf_names)?;
        if self.vectors.len() != self.lf_names.len() {
            return Err(Error::DimensionMismatch {
                axis: "embedding count vs lf_names",
                expected: self.lf_names.len(),
                found: self.vectors.len(),
            });
        }
        if self.dim == 0 {
            return Err(Error::InvalidParameter("embedding dimension must be >= 1".into()));
        }
        for (index, v) in self.vectors.iter().enumerate() {
            if v.len() != self.dim {
                return Err(Error::DimensionDisagreement {
                    index,
                    expected: self.dim,
                    found: v.len(),
                });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::malformed("embedding", format!("non-finite entry in LF {index}")));
            }
            if v.iter().all(|&x| x == 0.0) {
                return Err(Error::ZeroVector(index));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimilarityKind {
    Cosine,
    Agreement,
    DoubleFault,
}

impl SimilarityKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SimilarityKind::Cosine => "cosine",
            SimilarityKind::Agreement => "agreement",
            SimilarityKind::DoubleFault => "double_fault",
        }
    }
}

pub const SYMMETRY_TOL: f64 = 1e-9;

/// Square, symmetric matrix of pairwise LF scores.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    kind: SimilarityKind,
    m: usize,
    data: Vec<f64>,
}

impl SimilarityMatrix {
    pub fn from_rows(kind: SimilarityKind, rows: Vec<Vec<f64>>) -> Result<Self> {
        let m = rows.len();
        let mut data = Vec::with_capacity(m * m);
        for row in rows {
            if row.len() != m {
                return Err(Error::DimensionMismatch {
                    axis: "similarity row length",
                    expected: m,
                    found: row.len(),
                });
            }
            data.extend(row);
        }
        let out = SimilarityMatrix { kind, m, data };
        out.validate()?;
        Ok(out)
    }

    /// Skips validation; callers construct symmetric data by mirroring.
    pub(crate) fn from_parts(kind: SimilarityKind, m: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), m * m);
        SimilarityMatrix { kind, m, data }
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.m;
        for i in 0..m {
            for j in 0..m {
                let v = self.get(i, j);
                if !v.is_finite() {
                    return Err(Error::malformed(
                        "similarity matrix",
                        format!("non-finite entry at ({i}, {j})"),
                    ));
                }
                if (v - self.get(j, i)).abs() > SYMMETRY_TOL {
                    return Err(Error::malformed(
                        "similarity matrix",
                        format!("asymmetric at ({i}, {j})"),
                    ));
                }
                let in_range = match self.kind {
                    SimilarityKind::Cosine => (-1.0..=1.0).contains(&v),
                    _ => (0.0..=1.0).contains(&v),
                };
                if !in_range {
                    return Err(Error::malformed(
                        "similarity matrix",
                        format!("entry {v} at ({i}, {j}) out of range for {}", self.kind.as_str()),
                    ));
                }
            }
            if self.kind == SimilarityKind::Cosine && self.get(i, i) != 1.0 {
                return Err(Error::malformed(
                    "similarity matrix",
                    format!("cosine diagonal at {i} is not 1"),
                ));
            }
        }
        Ok(())
    }

    pub fn kind(&self) -> SimilarityKind {
        self.kind
    }

    pub fn m(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.m + j]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.data
            .chunks(self.m.max(1))
            .take(self.m)
            .map(<[f64]>::to_vec)
            .collect()
    }

    /// Restriction to the listed indices (rows and columns), in order.
    pub fn submatrix(&self, idx: &[usize]) -> SimilarityMatrix {
        let k = idx.len();
        let mut data = Vec::with_capacity(k * k);
        for &i in idx {
            for &j in idx {
                data.push(self.get(i, j));
            }
        }
        SimilarityMatrix {
            kind: self.kind,
            m: k,
            data,
        }
    }

    /// Upper-triangle off-diagonal entries in `(0,1), (0,2), ..., (m-2,m-1)` order.
    pub fn upper_triangle(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.m * self.m.saturating_sub(1) / 2);
        for i in 0..self.m {
            for j in i + 1..self.m {
                out.push(self.get(i, j));
            }
        }
        out
    }
}

/// Removed LFs, survivors, the independent anchor pair, and the undirected
/// dependency edges. All indices refer to the original LF numbering.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DependencyStructure {
    /// In removal order.
    pub removed: Vec<usize>,
    /// Ascending.
    pub survivors: Vec<usize>,
    /// `None` for structures not produced by the greedy generator (e.g. planted ones).
    pub anchors: Option<[usize; 2]>,
    /// Each edge stored as `[i, j]` with `i < j`, in selection order.
    pub edges: Vec<[usize; 2]>,
}

/// Most edges a generated structure over `survivors` LFs may hold.
pub fn max_edges(survivors: usize) -> usize {
    if survivors < 4 {
        0
    } else {
        (survivors - 2) * (survivors - 3) / 2
    }
}

impl DependencyStructure {
    /// Every LF survives; no anchors, no edges.
    pub fn empty(m: usize) -> Self {
        DependencyStructure {
            removed: Vec::new(),
            survivors: (0..m).collect(),
            anchors: None,
            edges: Vec::new(),
        }
    }

    pub fn validate(&self, m: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidStructure(msg));
        let mut all = BTreeSet::new();
        for &i in self.removed.iter().chain(&self.survivors) {
            if i >= m {
                return bad(format!("index {i} out of range for m = {m}"));
            }
            if !all.insert(i) {
                return bad(format!("index {i} listed twice across removed/survivors"));
            }
        }
        if all.len() != m {
            return bad(format!("removed and survivors cover {} of {m} LFs", all.len()));
        }
        if self.survivors.windows(2).any(|w| w[0] >= w[1]) {
            return bad("survivors must be strictly ascending".into());
        }
        let surviving: HashSet<usize> = self.survivors.iter().copied().collect();
        if let Some([a, b]) = self.anchors {
            if a == b || !surviving.contains(&a) || !surviving.contains(&b) {
                return bad(format!("anchors ({a}, {b}) must be two distinct survivors"));
            }
        }
        let mut seen = HashSet::new();
        for &[i, j] in &self.edges {
            if i == j {
                return bad(format!("self-loop at {i}"));
            }
            if !surviving.contains(&i) || !surviving.contains(&j) {
                return bad(format!("edge ({i}, {j}) touches a non-surviving LF"));
            }
            if let Some([a, b]) = self.anchors {
                if i == a || i == b || j == a || j == b {
                    return bad(format!("edge ({i}, {j}) touches an anchor"));
                }
            }
            if !seen.insert((i.min(j), i.max(j))) {
                return bad(format!("duplicate edge ({i}, {j})"));
            }
        }
        if self.anchors.is_some() && self.edges.len() > max_edges(self.survivors.len()) {
            return bad(format!(
                "{} edges exceed the bound {} for {} survivors",
                self.edges.len(),
                max_edges(self.survivors.len()),
                self.survivors.len()
            ));
        }
        Ok(())
    }

    /// Connected components of `(survivors, edges)`, each sorted ascending,
    /// ordered by smallest member.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let pos: std::collections::HashMap<usize, usize> =
            self.survivors.iter().enumerate().map(|(k, &i)| (i, k)).collect();
        let mut parent: Vec<usize> = (0..self.survivors.len()).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for &[i, j] in &self.edges {
            let (Some(&a), Some(&b)) = (pos.get(&i), pos.get(&j)) else {
                continue;
            };
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra != rb {
                parent[ra.max(rb)] = ra.min(rb);
            }
        }
        let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
        for k in 0..self.survivors.len() {
            let root = find(&mut parent, k);
            groups.entry(root).or_default().push(self.survivors[k]);
        }
        let mut out: Vec<Vec<usize>> = groups.into_values().collect();
        out.sort_by_key(|c| c[0]);
        out
    }
}

/// Votes, embeddings, optional gold labels and task configuration that
/// passed the cross-type checks.
#[derive(Debug, Clone)]
pub struct Bundle {
    pub votes: VoteMatrix,
    pub embeddings: EmbeddingSet,
    pub gold: Option<GoldLabels>,
    pub config: TaskConfig,
}

pub fn validate_bundle(
    votes: VoteMatrix,
    embeddings: EmbeddingSet,
    gold: Option<GoldLabels>,
    config: TaskConfig,
) -> Result<Bundle> {
    config.validate()?;
    embeddings.validate()?;
    if embeddings.len() != votes.m() {
        return Err(Error::DimensionMismatch {
            axis: "m (LF count: embeddings vs votes)",
            expected: votes.m(),
            found: embeddings.len(),
        });
    }
    for (index, (a, b)) in votes.lf_names().iter().zip(&embeddings.lf_names).enumerate() {
        if a != b {
            return Err(Error::NameMismatch {
                index,
                expected: a.clone(),
                found: b.clone(),
            });
        }
    }
    if let Some(g) = &gold {
        if g.len() != votes.n() {
            return Err(Error::DimensionMismatch {
                axis: "n (example count: gold vs votes)",
                expected: votes.n(),
                found: g.len(),
            });
        }
    }
    Ok(Bundle {
        votes,
        embeddings,
        gold,
        config,
    })
}
