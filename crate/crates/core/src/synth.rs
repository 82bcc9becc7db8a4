//! Synthetic weak-supervision datasets with planted accuracies, correlated
//! LF groups and clustered embeddings.
//!
//! # Generative model
//!
//! For each example `y = +1` with probability `class_prior`, else `-1`. Each
//! group draws one latent copy `z` that equals `y` with probability
//! `base_accuracy`. Each member then votes `z` with probability `rho`, or
//! otherwise an independent draw that equals `y` with probability
//! `base_accuracy`; independently of everything it abstains with probability
//! `1 - coverage`. Every LF's embedding is its group center plus
//! `N(0, noise^2 I)`.
//!
//! Closed forms: `E[l_i y] = c (2p - 1)`; within a group
//! `E[l_i l_j] = c^2 (rho^2 + (1 - rho^2)(2p - 1)^2)`; across groups
//! `E[l_i l_j] = c_i c_j (2p_i - 1)(2p_j - 1)`.
//!
//! # Randomness
//!
//! All draws come from ChaCha8 streams (`rand_chacha`). Each purpose has its
//! own key `seed_from_u64(seed ^ DOMAIN)` and each unit gets its own 64-bit
//! stream id, so results do not depend on generation order:
//!
//! * labels and votes: stream = example index; per example draw `u_y`, then
//!   for each group `u_latent`, then for each member `u_copy, u_flip,
//!   u_abstain`, all uniform in `[0, 1)`.
//! * embedding noise: stream = LF index; `dim` standard normals scaled by
//!   the group noise.
//! * seeded centers: key `seed_from_u64(center_seed)`, stream 0, `dim`
//!   standard normals normalized to unit length.
//! * redundancy injection: key `seed_from_u64(seed ^ DOMAIN)`, stream =
//!   index of the copy being created.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{DependencyStructure, EmbeddingSet, GoldLabels, VoteMatrix};
use crate::error::{Error, Result};

const VOTE_DOMAIN: u64 = 0x766f_7465_7300_0001;
const EMBED_DOMAIN: u64 = 0x656d_6265_6400_0002;
const DUP_EMBED_DOMAIN: u64 = 0x6475_7065_6d00_0003;
const DUP_VOTE_DOMAIN: u64 = 0x6475_7076_6f00_0004;

fn rng(key: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(key);
    r.set_stream(stream);
    r
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CenterSpec {
    Vector(Vec<f64>),
    Seed(u64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSpec {
    pub size: usize,
    pub base_accuracy: f64,
    pub coverage: f64,
    #[serde(alias = "rho", default)]
    pub intra_group_vote_correlation: f64,
    pub embedding_center: CenterSpec,
    #[serde(default)]
    pub embedding_noise: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n: usize,
    pub class_prior: f64,
    /// Required when any center is given as a seed.
    #[serde(default)]
    pub dim: Option<usize>,
    pub groups: Vec<GroupSpec>,
    #[serde(default)]
    pub seed: u64,
}

impl SynthSpec {
    pub fn m(&self) -> usize {
        self.groups.iter().map(|g| g.size).sum()
    }

    /// Embedding dimension implied by `dim` and the vector centers.
    pub fn embedding_dim(&self) -> Result<usize> {
        let mut dim = self.dim;
        for g in &self.groups {
            if let CenterSpec::Vector(v) = &g.embedding_center {
                match dim {
                    None => dim = Some(v.len()),
                    Some(d) if d != v.len() => {
                        return Err(Error::InvalidParameter(format!(
                            "group center of length {} disagrees with dimension {d}",
                            v.len()
                        )))
                    }
                    _ => {}
                }
            }
        }
        match dim {
            Some(d) if d >= 1 => Ok(d),
            _ => Err(Error::InvalidParameter(
                "embedding dimension must be given and >= 1".into(),
            )),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.m() < 3 {
            return bad(format!("at least 3 LFs required, spec has {}", self.m()));
        }
        if !(self.class_prior > 0.0 && self.class_prior < 1.0) {
            return bad(format!("class_prior {} outside (0, 1)", self.class_prior));
        }
        for (k, g) in self.groups.iter().enumerate() {
            if !(g.base_accuracy > 0.5 && g.base_accuracy < 1.0) {
                return bad(format!("group {k}: base_accuracy {} outside (0.5, 1)", g.base_accuracy));
            }
            if !(g.coverage > 0.0 && g.coverage <= 1.0) {
                return bad(format!("group {k}: coverage {} outside (0, 1]", g.coverage));
            }
            if !(0.0..=1.0).contains(&g.intra_group_vote_correlation) {
                return bad(format!(
                    "group {k}: rho {} outside [0, 1]",
                    g.intra_group_vote_correlation
                ));
            }
            if !(g.embedding_noise >= 0.0 && g.embedding_noise.is_finite()) {
                return bad(format!("group {k}: embedding_noise must be >= 0"));
            }
            if let CenterSpec::Vector(v) = &g.embedding_center {
                if v.iter().all(|&x| x == 0.0) {
                    return bad(format!("group {k}: zero embedding center"));
                }
            }
        }
        self.embedding_dim().map(|_| ())
    }

    /// Group index of each LF.
    pub fn group_of(&self) -> Vec<usize> {
        self.groups
            .iter()
            .enumerate()
            .flat_map(|(g, spec)| std::iter::repeat_n(g, spec.size))
            .collect()
    }

    pub fn lf_names(&self) -> Vec<String> {
        self.groups
            .iter()
            .enumerate()
            .flat_map(|(g, spec)| (0..spec.size).map(move |k| format!("g{g}_lf{k}")))
            .collect()
    }

    /// `E[l_i y] = coverage * (2 accuracy - 1)` per LF.
    pub fn planted_accuracy_moments(&self) -> Vec<f64> {
        self.group_of()
            .into_iter()
            .map(|g| {
                let s = &self.groups[g];
                s.coverage * (2.0 * s.base_accuracy - 1.0)
            })
            .collect()
    }

    /// Closed-form `E[l_i l_j]`, diagonal = coverage.
    pub fn planted_second_moments(&self) -> Vec<Vec<f64>> {
        let group = self.group_of();
        let m = group.len();
        let mut out = vec![vec![0.0; m]; m];
        for i in 0..m {
            for j in 0..m {
                let (gi, gj) = (&self.groups[group[i]], &self.groups[group[j]]);
                out[i][j] = if i == j {
                    gi.coverage
                } else if group[i] == group[j] {
                    let rho = gi.intra_group_vote_correlation;
                    let q = 2.0 * gi.base_accuracy - 1.0;
                    gi.coverage * gi.coverage * (rho * rho + (1.0 - rho * rho) * q * q)
                } else {
                    gi.coverage * gj.coverage * (2.0 * gi.base_accuracy - 1.0) * (2.0 * gj.base_accuracy - 1.0)
                };
            }
        }
        out
    }

    /// All within-group pairs as edges; nothing removed, no anchors.
    pub fn planted_structure(&self) -> DependencyStructure {
        let mut edges = Vec::new();
        let mut start = 0;
        for g in &self.groups {
            for i in start..start + g.size {
                for j in i + 1..start + g.size {
                    edges.push([i, j]);
                }
            }
            start += g.size;
        }
        DependencyStructure {
            removed: Vec::new(),
            survivors: (0..self.m()).collect(),
            anchors: None,
            edges,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthData {
    pub votes: VoteMatrix,
    pub gold: GoldLabels,
    pub embeddings: EmbeddingSet,
    pub structure: DependencyStructure,
    pub accuracy_moments: Vec<f64>,
}

fn gaussian_vector(r: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| r.sample::<f64, _>(StandardNormal)).collect()
}

fn center(spec: &CenterSpec, dim: usize) -> Vec<f64> {
    match spec {
        CenterSpec::Vector(v) => v.clone(),
        CenterSpec::Seed(s) => {
            let mut v = gaussian_vector(&mut rng(*s, 0), dim);
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.iter_mut().for_each(|x| *x /= norm);
            v
        }
    }
}

pub fn generate(spec: &SynthSpec) -> Result<SynthData> {
    spec.validate()?;
    let dim = spec.embedding_dim()?;
    let m = spec.m();
    let names = spec.lf_names();
    let vote_key = spec.seed ^ VOTE_DOMAIN;

    let rows: Vec<(i8, Vec<i8>)> = (0..spec.n)
        .into_par_iter()
        .map(|x| {
            let mut r = rng(vote_key, x as u64);
            let y: i8 = if r.random::<f64>() < spec.class_prior { 1 } else { -1 };
            let mut row = Vec::with_capacity(m);
            for g in &spec.groups {
                let z = if r.random::<f64>() < g.base_accuracy { y } else { -y };
                for _ in 0..g.size {
                    let (u_copy, u_flip, u_abstain) = (r.random::<f64>(), r.random::<f64>(), r.random::<f64>());
                    let own = if u_flip < g.base_accuracy { y } else { -y };
                    let vote = if u_copy < g.intra_group_vote_correlation {
                        z
                    } else {
                        own
                    };
                    row.push(if u_abstain < g.coverage { vote } else { 0 });
                }
            }
            (y, row)
        })
        .collect();
    let gold = GoldLabels::complete(rows.iter().map(|(y, _)| *y).collect())?;
    let votes = VoteMatrix::from_flat(names.clone(), spec.n, rows.into_iter().flat_map(|(_, r)| r).collect())?;

    let embed_key = spec.seed ^ EMBED_DOMAIN;
    let centers: Vec<Vec<f64>> = spec.groups.iter().map(|g| center(&g.embedding_center, dim)).collect();
    let vectors = spec
        .group_of()
        .into_iter()
        .enumerate()
        .map(|(i, g)| {
            let noise = gaussian_vector(&mut rng(embed_key, i as u64), dim);
            centers[g]
                .iter()
                .zip(noise)
                .map(|(c, e)| c + spec.groups[g].embedding_noise * e)
                .collect()
        })
        .collect();
    let embeddings = EmbeddingSet::new(names, vectors)?;

    Ok(SynthData {
        votes,
        gold,
        embeddings,
        structure: spec.planted_structure(),
        accuracy_moments: spec.planted_accuracy_moments(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Duplicate {
    /// Index of the copy in the augmented set.
    pub index: usize,
    /// Index of the LF it was derived from.
    pub source: usize,
}

#[derive(Debug, Clone)]
pub struct Augmented {
    pub embeddings: EmbeddingSet,
    pub votes: VoteMatrix,
    pub duplicates: Vec<Duplicate>,
}

/// Appends `copies` near-duplicates of every LF. Copy `c` (0-based) of LF
/// `i` lands at index `m * (c + 1) + i`; its embedding gets `N(0, sigma^2 I)`
/// noise and each of its non-abstain votes flips with probability `tau`.
pub fn inject_redundancy(
    emb: &EmbeddingSet,
    votes: &VoteMatrix,
    copies: usize,
    sigma: f64,
    tau: f64,
    seed: u64,
) -> Result<Augmented> {
    if copies == 0 {
        return Err(Error::InvalidParameter("copies must be >= 1".into()));
    }
    if !(0.0..=1.0).contains(&tau) || sigma.is_nan() || sigma < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "need sigma >= 0 and tau in [0, 1], got {sigma}, {tau}"
        )));
    }
    let m = votes.m();
    if emb.len() != m {
        return Err(Error::DimensionMismatch {
            axis: "m (LF count: embeddings vs votes)",
            expected: m,
            found: emb.len(),
        });
    }
    let total = m * (copies + 1);
    let mut names = votes.lf_names().to_vec();
    let mut vectors = emb.vectors.clone();
    let mut columns: Vec<Vec<i8>> = (0..m).map(|i| votes.column(i)).collect();
    let mut duplicates = Vec::with_capacity(m * copies);
    for c in 0..copies {
        for source in 0..m {
            let index = m * (c + 1) + source;
            names.push(format!("{}_dup{}", votes.lf_names()[source], c + 1));
            let noise = gaussian_vector(&mut rng(seed ^ DUP_EMBED_DOMAIN, index as u64), emb.dim);
            vectors.push(
                emb.vectors[source]
                    .iter()
                    .zip(noise)
                    .map(|(v, e)| v + sigma * e)
                    .collect(),
            );
            let mut r = rng(seed ^ DUP_VOTE_DOMAIN, index as u64);
            columns.push(
                columns[source]
                    .iter()
                    .map(|&v| if v != 0 && r.random::<f64>() < tau { -v } else { v })
                    .collect(),
            );
            duplicates.push(Duplicate { index, source });
        }
    }
    let mut flat = Vec::with_capacity(votes.n() * total);
    for x in 0..votes.n() {
        flat.extend(columns.iter().map(|col| col[x]));
    }
    Ok(Augmented {
        embeddings: EmbeddingSet::new(names.clone(), vectors)?,
        votes: VoteMatrix::from_flat(names, votes.n(), flat)?,
        duplicates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn group(size: usize, acc: f64, cov: f64, rho: f64, seed: u64) -> GroupSpec {
        GroupSpec {
            size,
            base_accuracy: acc,
            coverage: cov,
            intra_group_vote_correlation: rho,
            embedding_center: CenterSpec::Seed(seed),
            embedding_noise: 0.05,
        }
    }

    fn spec(groups: Vec<GroupSpec>, n: usize, seed: u64) -> SynthSpec {
        SynthSpec {
            n,
            class_prior: 0.5,
            dim: Some(8),
            groups,
            seed,
        }
    }

    #[test]
    fn planted_moment_is_two_p_minus_one() {
        let s = spec(vec![group(3, 0.8, 1.0, 0.0, 1)], 10, 0);
        for a in s.planted_accuracy_moments() {
            assert!((a - 0.6).abs() < 1e-12);
        }
    }

    #[test]
    fn perfect_copies_agree_on_co_votes() {
        let data = generate(&spec(vec![group(3, 0.7, 0.8, 1.0, 1)], 2000, 5)).unwrap();
        for row in data.votes.rows() {
            let voted: Vec<i8> = row.iter().copied().filter(|&v| v != 0).collect();
            assert!(voted.windows(2).all(|w| w[0] == w[1]));
        }
    }

    #[test]
    fn same_seed_same_output() {
        let s = spec(vec![group(2, 0.7, 0.8, 0.5, 1), group(2, 0.8, 0.6, 0.0, 2)], 500, 9);
        let (a, b) = (generate(&s).unwrap(), generate(&s).unwrap());
        assert_eq!(a.votes, b.votes);
        assert_eq!(a.gold, b.gold);
        assert_eq!(a.embeddings, b.embeddings);
        let c = generate(&SynthSpec { seed: 10, ..s }).unwrap();
        assert_ne!(a.votes, c.votes);
    }

    #[test]
    fn planted_structure_is_within_group_pairs() {
        let s = spec(
            vec![
                group(3, 0.7, 0.8, 0.5, 1),
                group(1, 0.8, 0.6, 0.0, 2),
                group(2, 0.8, 0.6, 0.0, 3),
            ],
            10,
            0,
        );
        assert_eq!(s.planted_structure().edges, vec![[0, 1], [0, 2], [1, 2], [4, 5]]);
    }

    #[test]
    fn spec_validation() {
        assert!(spec(vec![group(2, 0.7, 0.8, 0.0, 1)], 10, 0).validate().is_err());
        assert!(spec(vec![group(3, 0.4, 0.8, 0.0, 1)], 10, 0).validate().is_err());
        assert!(spec(vec![group(3, 0.7, 0.0, 0.0, 1)], 10, 0).validate().is_err());
        let mut s = spec(vec![group(3, 0.7, 0.8, 0.0, 1)], 10, 0);
        s.dim = None;
        assert!(s.validate().is_err());
        s.groups[0].embedding_center = CenterSpec::Vector(vec![1.0, 0.0]);
        assert_eq!(s.embedding_dim().unwrap(), 2);
    }

    #[test]
    fn spec_json_accepts_rho_alias_and_vector_centers() {
        let s: SynthSpec = serde_json::from_str(
            r#"{"n": 5, "class_prior": 0.3, "seed": 4,
                "groups": [{"size": 3, "base_accuracy": 0.7, "coverage": 0.9, "rho": 0.2,
                            "embedding_center": [1, 0, 0], "embedding_noise": 0.1}]}"#,
        )
        .unwrap();
        assert_eq!(s.groups[0].intra_group_vote_correlation, 0.2);
        assert_eq!(s.embedding_dim().unwrap(), 3);
    }

    #[test]
    fn exact_clones_without_noise() {
        let data = generate(&spec(vec![group(4, 0.7, 0.8, 0.0, 1)], 100, 1)).unwrap();
        let aug = inject_redundancy(&data.embeddings, &data.votes, 1, 0.0, 0.0, 3).unwrap();
        assert_eq!(aug.votes.m(), 8);
        for d in &aug.duplicates {
            assert_eq!(aug.votes.column(d.index), aug.votes.column(d.source));
            assert_eq!(aug.embeddings.vectors[d.index], aug.embeddings.vectors[d.source]);
        }
        assert!(inject_redundancy(&data.embeddings, &data.votes, 0, 0.0, 0.0, 3).is_err());
    }
}
