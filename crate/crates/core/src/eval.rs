//! Metrics, prompt/token savings, removal-rate sweeps and the remove-one
//! experiment, with JSON, Markdown and CSV renderings.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{max_edges, Bundle, DependencyStructure, GoldLabels, Metric, TaskConfig, VoteMatrix};
use crate::error::{Error, Result};
use crate::labelmodel::{self, Inference, PosteriorLabels};
use crate::refine::{self, EdgeBudget, RefineParams, RemovalBudget};
use crate::similarity;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1_positive: f64,
    /// Fraction of examples with at least one non-abstain vote.
    pub coverage: f64,
    /// Examples with a gold label.
    pub labeled: usize,
}

impl Scores {
    pub fn metric(&self, metric: Metric) -> f64 {
        match metric {
            Metric::Accuracy => self.accuracy,
            Metric::F1Positive => self.f1_positive,
        }
    }
}

pub fn metric_name(metric: Metric) -> &'static str {
    match metric {
        Metric::Accuracy => "accuracy",
        Metric::F1Positive => "f1-positive",
    }
}

/// Scores hard labels against the labeled subset of `gold`. Precision,
/// recall and F1 are 0 when their denominators vanish.
pub fn score(pred: &PosteriorLabels, gold: &GoldLabels) -> Result<Scores> {
    if gold.len() != pred.len() {
        return Err(Error::DimensionMismatch {
            axis: "n (predictions vs gold)",
            expected: gold.len(),
            found: pred.len(),
        });
    }
    let (mut tp, mut fp, mut tn, mut fn_) = (0usize, 0usize, 0usize, 0usize);
    for (&h, y) in pred.hard.iter().zip(gold.labels()) {
        match (h, y) {
            (_, None) => {}
            (1, Some(1)) => tp += 1,
            (1, Some(_)) => fp += 1,
            (_, Some(1)) => fn_ += 1,
            (_, Some(_)) => tn += 1,
        }
    }
    let labeled = tp + fp + tn + fn_;
    if labeled == 0 {
        return Err(Error::MissingGold("no labeled examples to score against".into()));
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(Scores {
        accuracy: ratio(tp + tn, labeled),
        precision,
        recall,
        f1_positive: f1,
        coverage: ratio(pred.covered.iter().filter(|&&c| c).count(), pred.len()),
        labeled,
    })
}

/// LLM queries avoided by not running `m_r` prompts over `n` examples.
pub fn prompts_saved(m_r: usize, n: usize) -> usize {
    m_r * n
}

/// `n * sum of per_lf_avg_tokens[i]` over the removed LFs.
pub fn tokens_saved(removed: &[usize], per_lf_avg_tokens: &[f64], n: usize) -> Result<f64> {
    let mut total = 0.0;
    for &i in removed {
        match per_lf_avg_tokens.get(i) {
            Some(t) if t.is_finite() && *t >= 0.0 => total += t,
            _ => return Err(Error::MissingTokenCount(i)),
        }
    }
    Ok(n as f64 * total)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum StructureSource {
    #[default]
    Cosine,
    Agreement,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Synthetic,
    #[default]
    Ingested,
}

/// Builds a structure from the bundle using the chosen similarity source.
pub fn build_structure(bundle: &Bundle, params: &RefineParams, source: StructureSource) -> Result<DependencyStructure> {
    match source {
        StructureSource::Cosine => refine::refine_pipeline(&similarity::cosine_matrix(&bundle.embeddings)?, params),
        StructureSource::Agreement => refine::empirical_structure(&similarity::agreement_matrix(&bundle.votes), params),
    }
}

/// Label-model predictions for the survivors of `structure`; falls back to
/// majority vote over the survivors when fewer than three remain.
pub fn run_label_model(
    votes: &VoteMatrix,
    structure: &DependencyStructure,
    cfg: &TaskConfig,
    inference: Inference,
) -> Result<(PosteriorLabels, &'static str)> {
    if structure.survivors.len() >= 3 {
        let params = labelmodel::fit(votes, structure, cfg)?.with_inference(inference);
        Ok((labelmodel::predict(&params, votes)?, "label_model"))
    } else {
        let kept = votes.select_columns(&structure.survivors)?;
        Ok((labelmodel::majority_vote(&kept, cfg), "majority_vote"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub rates: Vec<f64>,
    pub edges: Vec<EdgeBudget>,
    pub source: StructureSource,
    pub inference: Inference,
    /// Adds a median-of-three fit+predict runtime column.
    pub timing: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            rates: vec![0.0, 0.1, 0.3, 0.5, 0.7],
            edges: vec![EdgeBudget::Count(0), EdgeBudget::Count(1), EdgeBudget::Rate(0.25)],
            source: StructureSource::Cosine,
            inference: Inference::default(),
            timing: false,
        }
    }
}

fn budget_label(b: &EdgeBudget) -> String {
    match b {
        EdgeBudget::Count(c) => c.to_string(),
        EdgeBudget::Rate(r) => format!("{r}*max"),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub removal_rate: f64,
    pub edge_budget: String,
    pub m_r: usize,
    pub m_e: usize,
    pub survivors: usize,
    pub method: String,
    pub metric: f64,
    pub scores: Scores,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub runtime_seconds: Option<f64>,
    pub prompts_saved: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub task: String,
    pub metric: String,
    pub source: StructureSource,
    pub provenance: Provenance,
    pub n: usize,
    pub m: usize,
    /// The first row is always the `(0, 0)` reference.
    pub rows: Vec<SweepRow>,
}

/// Runs one grid point: refine, fit, predict, score.
pub fn sweep_point(
    bundle: &Bundle,
    gold: &GoldLabels,
    rate: f64,
    budget: EdgeBudget,
    cfg: &SweepConfig,
) -> Result<SweepRow> {
    let m = bundle.votes.m();
    let m_r = refine::resolve_removal_count(rate, m)?;
    let survivors = m
        .checked_sub(m_r)
        .filter(|&s| s > 0)
        .ok_or_else(|| Error::InvalidParameter(format!("removal rate {rate} leaves no LFs out of {m}")))?;
    // grid counts larger than the bound for this survivor count are capped
    let m_e = match budget {
        EdgeBudget::Count(c) => c.min(max_edges(survivors)),
        EdgeBudget::Rate(r) => refine::resolve_edge_count(r, survivors)?,
    };
    let params = RefineParams {
        removal: RemovalBudget::Count(m_r),
        edges: EdgeBudget::Count(m_e),
    };
    let structure = build_structure(bundle, &params, cfg.source)?;
    let (pred, method) = run_label_model(&bundle.votes, &structure, &bundle.config, cfg.inference)?;
    let scores = score(&pred, gold)?;
    let runtime_seconds = if cfg.timing && structure.survivors.len() >= 3 {
        Some(labelmodel::fit_timer(&bundle.votes, &structure, &bundle.config)?)
    } else {
        None
    };
    Ok(SweepRow {
        removal_rate: rate,
        edge_budget: budget_label(&budget),
        m_r,
        m_e,
        survivors,
        method: method.to_string(),
        metric: scores.metric(bundle.config.metric),
        scores,
        runtime_seconds,
        prompts_saved: prompts_saved(m_r, bundle.votes.n()),
    })
}

/// Evaluates every `(rate, edge budget)` grid point. Points run in
/// parallel; rows come back in grid order with the `(0, 0)` reference
/// first.
pub fn sweep(bundle: &Bundle, cfg: &SweepConfig, provenance: Provenance) -> Result<SweepReport> {
    let gold = bundle
        .gold
        .as_ref()
        .ok_or_else(|| Error::MissingGold("sweep needs gold labels for scoring".into()))?;
    let reference = (0.0, EdgeBudget::Count(0));
    let mut grid = vec![reference];
    for &rate in &cfg.rates {
        for &budget in &cfg.edges {
            if (rate, budget) != reference {
                grid.push((rate, budget));
            }
        }
    }
    let rows = grid
        .par_iter()
        .map(|&(rate, budget)| sweep_point(bundle, gold, rate, budget, cfg))
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepReport {
        task: bundle.config.task_name.clone(),
        metric: metric_name(bundle.config.metric).to_string(),
        source: cfg.source,
        provenance,
        n: bundle.votes.n(),
        m: bundle.votes.m(),
        rows,
    })
}

impl SweepReport {
    /// The non-reference row with the highest metric (first wins ties).
    pub fn best(&self) -> Option<&SweepRow> {
        self.rows[1..]
            .iter()
            .fold(None, |best: Option<&SweepRow>, r| match best {
                Some(b) if b.metric >= r.metric => Some(b),
                _ => Some(r),
            })
    }

    pub fn to_csv(&self) -> String {
        let timing = self.rows.iter().any(|r| r.runtime_seconds.is_some());
        let mut out = String::from(
            "provenance,removal_rate,edge_budget,m_r,m_e,survivors,method,metric,accuracy,precision,recall,f1_positive,coverage,prompts_saved",
        );
        if timing {
            out.push_str(",runtime_seconds");
        }
        out.push('\n');
        let prov = match self.provenance {
            Provenance::Synthetic => "synthetic",
            Provenance::Ingested => "ingested",
        };
        for r in &self.rows {
            out.push_str(&format!(
                "{prov},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.removal_rate,
                r.edge_budget,
                r.m_r,
                r.m_e,
                r.survivors,
                r.method,
                r.metric,
                r.scores.accuracy,
                r.scores.precision,
                r.scores.recall,
                r.scores.f1_positive,
                r.scores.coverage,
                r.prompts_saved
            ));
            if timing {
                out.push(',');
                if let Some(t) = r.runtime_seconds {
                    out.push_str(&t.to_string());
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn to_markdown(&self) -> String {
        let mut out = format!(
            "# Sweep: {}\n\n{} examples, {} LFs, structure from {:?} similarity, {:?} data.\n\n",
            self.task, self.n, self.m, self.source, self.provenance
        );
        out.push_str(&format!(
            "| removal rate | edges | LFs removed | edges used | {} | prompts saved |\n|---|---|---|---|---|---|\n",
            self.metric
        ));
        for r in &self.rows {
            out.push_str(&format!(
                "| {} | {} | {} | {} | {:.4} | {} |\n",
                r.removal_rate, r.edge_budget, r.m_r, r.m_e, r.metric, r.prompts_saved
            ));
        }
        out
    }
}

/// Below this top similarity the remove-one report is flagged.
pub const TOY_CONFIDENCE_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyRow {
    pub run: String,
    pub removed: Option<usize>,
    pub method: String,
    pub metric: f64,
    pub scores: Scores,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyReport {
    pub task: String,
    pub metric: String,
    pub pair: [usize; 2],
    pub pair_names: [String; 2],
    pub similarity: f64,
    pub low_confidence: bool,
    /// Baseline, then one row per removed pair member.
    pub rows: Vec<ToyRow>,
}

/// Finds the most similar LF pair and compares the full set against each
/// of the two single-removal variants.
pub fn remove_one_toy(bundle: &Bundle, inference: Inference) -> Result<ToyReport> {
    let m = bundle.votes.m();
    if m < 3 {
        return Err(Error::InvalidParameter(format!(
            "remove-one experiment needs m >= 3, got {m}"
        )));
    }
    let gold = bundle
        .gold
        .as_ref()
        .ok_or_else(|| Error::MissingGold("remove-one experiment needs gold labels".into()))?;
    let cosine = similarity::cosine_matrix(&bundle.embeddings)?;
    let pick = refine::lare(&cosine, 1)?.picks[0];
    let metric = bundle.config.metric;
    let run = |label: &str, removed: Option<usize>| -> Result<ToyRow> {
        let mut structure = DependencyStructure::empty(m);
        if let Some(k) = removed {
            structure.survivors.retain(|&i| i != k);
            structure.removed.push(k);
        }
        let (pred, method) = run_label_model(&bundle.votes, &structure, &bundle.config, inference)?;
        let scores = score(&pred, gold)?;
        Ok(ToyRow {
            run: label.to_string(),
            removed,
            method: method.to_string(),
            metric: scores.metric(metric),
            scores,
        })
    };
    let names = bundle.votes.lf_names();
    Ok(ToyReport {
        task: bundle.config.task_name.clone(),
        metric: metric_name(metric).to_string(),
        pair: [pick.i, pick.j],
        pair_names: [names[pick.i].clone(), names[pick.j].clone()],
        similarity: pick.value,
        low_confidence: pick.value < TOY_CONFIDENCE_THRESHOLD,
        rows: vec![
            run("baseline", None)?,
            run(&format!("remove {}", names[pick.i]), Some(pick.i))?,
            run(&format!("remove {}", names[pick.j]), Some(pick.j))?,
        ],
    })
}

impl ToyReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("run,removed,method,metric,accuracy,f1_positive,coverage\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.run,
                r.removed.map(|k| k.to_string()).unwrap_or_default(),
                r.method,
                r.metric,
                r.scores.accuracy,
                r.scores.f1_positive,
                r.scores.coverage
            ));
        }
        out
    }

    pub fn to_markdown(&self) -> String {
        let mut out = format!(
            "# Remove-one: {}\n\nMost similar pair: `{}` and `{}` (cosine {:.4}){}.\n\n| run | {} |\n|---|---|\n",
            self.task,
            self.pair_names[0],
            self.pair_names[1],
            self.similarity,
            if self.low_confidence {
                ", low confidence: no strongly similar pair"
            } else {
                ""
            },
            self.metric
        );
        for r in &self.rows {
            out.push_str(&format!("| {} | {:.4} |\n", r.run, r.metric));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SavingsReport {
    pub m_r: usize,
    pub n: usize,
    pub prompts_saved: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub tokens_saved: Option<f64>,
}

impl SavingsReport {
    pub fn to_csv(&self) -> String {
        format!(
            "m_r,n,prompts_saved,tokens_saved\n{},{},{},{}\n",
            self.m_r,
            self.n,
            self.prompts_saved,
            self.tokens_saved.map(|t| t.to_string()).unwrap_or_default()
        )
    }

    pub fn to_markdown(&self) -> String {
        let mut out = format!(
            "# Savings\n\n| LFs removed | examples | prompts saved | tokens saved |\n|---|---|---|---|\n| {} | {} | {} | ",
            self.m_r, self.n, self.prompts_saved
        );
        out.push_str(
            &self
                .tokens_saved
                .map(|t| format!("{t:.1}"))
                .unwrap_or_else(|| "-".into()),
        );
        out.push_str(" |\n");
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub model: String,
    pub metric: f64,
    pub scores: Scores,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub task: String,
    pub metric: String,
    pub provenance: Provenance,
    pub survivors: usize,
    pub edges: usize,
    pub rows: Vec<EvalRow>,
}

/// Label model under `structure` versus majority vote on all LFs.
pub fn evaluate(
    votes: &VoteMatrix,
    gold: &GoldLabels,
    structure: &DependencyStructure,
    cfg: &TaskConfig,
    inference: Inference,
    provenance: Provenance,
) -> Result<EvalReport> {
    let (pred, method) = run_label_model(votes, structure, cfg, inference)?;
    let lm = score(&pred, gold)?;
    let mv = score(&labelmodel::majority_vote(votes, cfg), gold)?;
    Ok(EvalReport {
        task: cfg.task_name.clone(),
        metric: metric_name(cfg.metric).to_string(),
        provenance,
        survivors: structure.survivors.len(),
        edges: structure.edges.len(),
        rows: vec![
            EvalRow {
                model: method.to_string(),
                metric: lm.metric(cfg.metric),
                scores: lm,
            },
            EvalRow {
                model: "majority_vote_all".to_string(),
                metric: mv.metric(cfg.metric),
                scores: mv,
            },
        ],
    })
}

impl EvalReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("model,metric,accuracy,precision,recall,f1_positive,coverage,labeled\n");
        for r in &self.rows {
            let s = &r.scores;
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                r.model, r.metric, s.accuracy, s.precision, s.recall, s.f1_positive, s.coverage, s.labeled
            ));
        }
        out
    }

    pub fn to_markdown(&self) -> String {
        let mut out = format!(
            "# Evaluation: {}\n\n{} surviving LFs, {} dependency edges.\n\n| model | {} | accuracy | f1 (positive) | coverage |\n|---|---|---|---|---|\n",
            self.task, self.survivors, self.edges, self.metric
        );
        for r in &self.rows {
            out.push_str(&format!(
                "| {} | {:.4} | {:.4} | {:.4} | {:.4} |\n",
                r.model, r.metric, r.scores.accuracy, r.scores.f1_positive, r.scores.coverage
            ));
        }
        out
    }
}
