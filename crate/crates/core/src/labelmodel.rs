//! Binary label model fitted by the triplet method of moments.
//!
//! With votes in `{-1, 0, +1}` and LFs conditionally independent given the
//! true label `y`, the second moments factor as `E[l_i l_j] = a_i a_j` where
//! `a_i = E[l_i y]`. Any three mutually independent LFs therefore give
//! `|a_i| = sqrt(|E[l_i l_j] E[l_i l_k] / E[l_j l_k]|)`. The dependency
//! structure decides which triplets qualify: a triplet is skipped if any of
//! its three pairs is an edge.
//!
//! At inference, LFs in the same connected component of the dependency graph
//! share one averaged vote so correlated sources are not counted twice.

use std::collections::HashSet;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{DependencyStructure, TaskConfig, VoteMatrix};
use crate::error::{Error, Result};

/// Floor on `|E[l_j l_k]|` for a triplet to be usable.
pub const DEFAULT_EPS: f64 = 1e-3;
/// Clamp range for the conditional accuracy `p_i`.
pub const P_MIN: f64 = 0.01;
pub const P_MAX: f64 = 0.99;
/// `a_i` is clamped to `[A_MIN * beta_i, A_MAX * beta_i]`.
pub const A_MIN: f64 = 0.02;
pub const A_MAX: f64 = 0.98;
/// Used when no LF has a usable triplet at all.
pub const FALLBACK_ACCURACY: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Inference {
    /// Average the weighted votes within each component.
    #[default]
    ComponentAverage,
    /// Keep only the highest-weight voting LF within each component.
    BestPerComponent,
}

/// Square matrix of `(1/n) sum_x l_i(x) l_j(x)`; the diagonal is coverage.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    m: usize,
    data: Vec<f64>,
}

impl Moments {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.m + j]
    }
}

pub fn second_moments(votes: &VoteMatrix) -> Result<Moments> {
    let (n, m) = (votes.n(), votes.m());
    if n == 0 {
        return Err(Error::InvalidParameter(
            "second moments need at least one example".into(),
        ));
    }
    // integer sums keep the result independent of scheduling
    let sums: Vec<Vec<i64>> = (0..m)
        .into_par_iter()
        .map(|i| {
            let mut acc = vec![0i64; m - i];
            for row in votes.rows() {
                let a = row[i] as i64;
                if a == 0 {
                    continue;
                }
                for (off, &b) in row[i..].iter().enumerate() {
                    acc[off] += a * b as i64;
                }
            }
            acc
        })
        .collect();
    let mut data = vec![0.0; m * m];
    for (i, row) in sums.into_iter().enumerate() {
        for (off, s) in row.into_iter().enumerate() {
            let j = i + off;
            let v = s as f64 / n as f64;
            data[i * m + j] = v;
            data[j * m + i] = v;
        }
    }
    Ok(Moments { m, data })
}

fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let mid = values.len() / 2;
    Some(if values.len() % 2 == 1 {
        values[mid]
    } else {
        (values[mid - 1] + values[mid]) / 2.0
    })
}

/// Per-LF accuracy moments `a_i` (positive sign), indexed locally.
/// `edges` use the same local indexing as `moments`.
#[derive(Debug, Clone, PartialEq)]
pub struct TripletEstimate {
    pub accuracy: Vec<f64>,
    /// Number of usable triplets behind each estimate; 0 means the value
    /// came from the fallback.
    pub triplets: Vec<usize>,
}

pub fn triplet_accuracies(moments: &Moments, edges: &[[usize; 2]], eps: f64) -> Result<TripletEstimate> {
    let m = moments.m();
    if m < 3 {
        return Err(Error::InvalidParameter(format!(
            "triplet estimation needs at least 3 LFs, got {m}"
        )));
    }
    if eps <= 0.0 {
        return Err(Error::InvalidParameter(format!("eps must be positive, got {eps}")));
    }
    let mut linked = vec![false; m * m];
    for &[i, j] in edges {
        if i >= m || j >= m {
            return Err(Error::InvalidStructure(format!(
                "edge ({i}, {j}) out of range for {m} LFs"
            )));
        }
        linked[i * m + j] = true;
        linked[j * m + i] = true;
    }
    let linked = |i: usize, j: usize| linked[i * m + j];

    let per_lf: Vec<(Option<f64>, usize)> = (0..m)
        .into_par_iter()
        .map(|i| {
            let mut estimates = Vec::new();
            for j in 0..m {
                if j == i || linked(i, j) {
                    continue;
                }
                for k in j + 1..m {
                    if k == i || linked(i, k) || linked(j, k) {
                        continue;
                    }
                    let denom = moments.get(j, k);
                    if denom.abs() < eps {
                        continue;
                    }
                    estimates.push((moments.get(i, j) * moments.get(i, k) / denom).abs().sqrt());
                }
            }
            let count = estimates.len();
            (median(&mut estimates), count)
        })
        .collect();

    let mut found: Vec<f64> = per_lf.iter().filter_map(|(a, _)| *a).collect();
    let fallback = median(&mut found).unwrap_or(FALLBACK_ACCURACY);
    let accuracy = per_lf
        .iter()
        .enumerate()
        .map(|(i, (a, _))| {
            let beta = moments.get(i, i);
            a.unwrap_or(fallback).clamp(A_MIN * beta, A_MAX * beta)
        })
        .collect();
    Ok(TripletEstimate {
        accuracy,
        triplets: per_lf.iter().map(|(_, c)| *c).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LfParams {
    /// Original LF index.
    pub index: usize,
    pub name: String,
    /// Estimate of `E[l_i y]`.
    pub accuracy_moment: f64,
    /// `P(l_i != 0)`.
    pub propensity: f64,
    /// `P(l_i = y | l_i != 0)`.
    pub conditional_accuracy: f64,
    /// `ln(p / (1 - p))`.
    pub weight: f64,
    pub triplets: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelModelParams {
    pub class_prior: f64,
    /// Column count of the vote matrix the model was fitted on.
    pub m: usize,
    /// One entry per surviving LF, ascending original index.
    pub lfs: Vec<LfParams>,
    /// Connected components in original indices.
    pub components: Vec<Vec<usize>>,
    #[serde(default)]
    pub inference: Inference,
}

impl LabelModelParams {
    pub fn weights(&self) -> Vec<f64> {
        self.lfs.iter().map(|l| l.weight).collect()
    }

    pub fn with_inference(mut self, inference: Inference) -> Self {
        self.inference = inference;
        self
    }
}

/// Fits accuracies for the survivors of `structure` on the full-width vote
/// matrix `votes`.
pub fn fit(votes: &VoteMatrix, structure: &DependencyStructure, cfg: &TaskConfig) -> Result<LabelModelParams> {
    fit_with_eps(votes, structure, cfg, DEFAULT_EPS)
}

pub fn fit_with_eps(
    votes: &VoteMatrix,
    structure: &DependencyStructure,
    cfg: &TaskConfig,
    eps: f64,
) -> Result<LabelModelParams> {
    cfg.validate()?;
    structure.validate(votes.m())?;
    let local = votes.select_columns(&structure.survivors)?;
    let moments = second_moments(&local)?;
    let position: std::collections::HashMap<usize, usize> =
        structure.survivors.iter().enumerate().map(|(k, &i)| (i, k)).collect();
    let edges: Vec<[usize; 2]> = structure
        .edges
        .iter()
        .map(|&[i, j]| [position[&i], position[&j]])
        .collect();
    let estimate = triplet_accuracies(&moments, &edges, eps)?;

    let lfs = structure
        .survivors
        .iter()
        .enumerate()
        .map(|(k, &index)| {
            let beta = moments.get(k, k);
            let a = estimate.accuracy[k];
            let (p, a) = if beta == 0.0 {
                (0.5, 0.0)
            } else {
                (((1.0 + a / beta.max(eps)) / 2.0).clamp(P_MIN, P_MAX), a)
            };
            LfParams {
                index,
                name: votes.lf_names()[index].clone(),
                accuracy_moment: a,
                propensity: beta,
                conditional_accuracy: p,
                weight: if beta == 0.0 { 0.0 } else { (p / (1.0 - p)).ln() },
                triplets: estimate.triplets[k],
            }
        })
        .collect();
    Ok(LabelModelParams {
        class_prior: cfg.class_prior,
        m: votes.m(),
        lfs,
        components: structure.components(),
        inference: Inference::default(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorLabels {
    /// `P(y = +1 | votes)`.
    pub p_pos: Vec<f64>,
    pub hard: Vec<i8>,
    /// Log-odds for the label model; net vote count for majority vote.
    pub score: Vec<f64>,
    /// Whether any LF voted on the example.
    pub covered: Vec<bool>,
}

impl PosteriorLabels {
    pub fn len(&self) -> usize {
        self.p_pos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p_pos.is_empty()
    }

    /// CSV with header `p_pos,hard_label,score`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("p_pos,hard_label,score\n");
        for ((p, h), s) in self.p_pos.iter().zip(&self.hard).zip(&self.score) {
            out.push_str(&format!("{p},{h},{s}\n"));
        }
        out
    }
}

fn logistic(score: f64) -> f64 {
    if score >= 0.0 {
        1.0 / (1.0 + (-score).exp())
    } else {
        let e = score.exp();
        e / (1.0 + e)
    }
}

fn hard_label(p: f64) -> i8 {
    if p >= 0.5 {
        1
    } else {
        -1
    }
}

pub fn predict(params: &LabelModelParams, votes: &VoteMatrix) -> Result<PosteriorLabels> {
    if votes.m() != params.m {
        return Err(Error::DimensionMismatch {
            axis: "m (vote columns vs fitted model)",
            expected: params.m,
            found: votes.m(),
        });
    }
    let weight_of: std::collections::HashMap<usize, f64> = params.lfs.iter().map(|l| (l.index, l.weight)).collect();
    let components: Vec<Vec<(usize, f64)>> = params
        .components
        .iter()
        .map(|c| {
            c.iter()
                .map(|i| {
                    weight_of
                        .get(i)
                        .map(|&w| (*i, w))
                        .ok_or_else(|| Error::InvalidStructure(format!("component member {i} has no fitted weight")))
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let prior = params.class_prior.ln() - (1.0 - params.class_prior).ln();
    let survivors: HashSet<usize> = params.lfs.iter().map(|l| l.index).collect();

    let rows: Vec<(f64, bool)> = (0..votes.n())
        .into_par_iter()
        .map(|x| {
            let row = votes.row(x);
            let covered = survivors.iter().any(|&i| row[i] != 0);
            let mut score = prior;
            for comp in &components {
                match params.inference {
                    Inference::ComponentAverage => {
                        let (mut sum, mut voters) = (0.0, 0usize);
                        for &(i, w) in comp {
                            if row[i] != 0 {
                                sum += row[i] as f64 * w;
                                voters += 1;
                            }
                        }
                        score += sum / voters.max(1) as f64;
                    }
                    Inference::BestPerComponent => {
                        let best =
                            comp.iter()
                                .filter(|(i, _)| row[*i] != 0)
                                .fold(None::<(usize, f64)>, |acc, &(i, w)| match acc {
                                    Some((_, bw)) if bw >= w => acc,
                                    _ => Some((i, w)),
                                });
                        if let Some((i, w)) = best {
                            score += row[i] as f64 * w;
                        }
                    }
                }
            }
            (score, covered)
        })
        .collect();

    let p_pos: Vec<f64> = rows.iter().map(|(s, _)| logistic(*s)).collect();
    Ok(PosteriorLabels {
        hard: p_pos.iter().map(|&p| hard_label(p)).collect(),
        score: rows.iter().map(|(s, _)| *s).collect(),
        covered: rows.iter().map(|(_, c)| *c).collect(),
        p_pos,
    })
}

/// Unweighted vote. Ties (including all-abstain rows) go to the class with
/// the larger prior, positive when the prior is exactly 0.5. `p_pos` is the
/// fraction of positive votes, or the prior when nobody voted.
pub fn majority_vote(votes: &VoteMatrix, cfg: &TaskConfig) -> PosteriorLabels {
    let tie: i8 = if cfg.class_prior >= 0.5 { 1 } else { -1 };
    let mut out = PosteriorLabels {
        p_pos: Vec::with_capacity(votes.n()),
        hard: Vec::with_capacity(votes.n()),
        score: Vec::with_capacity(votes.n()),
        covered: Vec::with_capacity(votes.n()),
    };
    for row in votes.rows() {
        let pos = row.iter().filter(|&&v| v > 0).count();
        let neg = row.iter().filter(|&&v| v < 0).count();
        let net = pos as i64 - neg as i64;
        out.hard.push(match net.signum() {
            1 => 1,
            -1 => -1,
            _ => tie,
        });
        out.p_pos.push(if pos + neg == 0 {
            cfg.class_prior
        } else {
            pos as f64 / (pos + neg) as f64
        });
        out.score.push(net as f64);
        out.covered.push(pos + neg > 0);
    }
    out
}

/// Median wall-clock seconds of three `fit` + `predict` runs.
pub fn fit_timer(votes: &VoteMatrix, structure: &DependencyStructure, cfg: &TaskConfig) -> Result<f64> {
    let mut samples = Vec::with_capacity(3);
    for _ in 0..3 {
        let start = Instant::now();
        let params = fit(votes, structure, cfg)?;
        std::hint::black_box(predict(&params, votes)?);
        samples.push(start.elapsed().as_secs_f64());
    }
    Ok(median(&mut samples).expect("three samples"))
}
