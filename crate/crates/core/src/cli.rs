//! The `lfrefine` command line.
//!
//! Every subcommand writes its artifacts plus a `manifest.json` (input
//! hashes, parameters, output hashes, tool version) into `--out-dir`.
//! Failures print one JSON line to stderr and exit with 1 (usage),
//! 2 (validation) or 3 (I/O or provider).

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{ArgGroup, Args, ColorChoice, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::data::{max_edges, validate_bundle, DependencyStructure, Metric, TaskConfig};
use crate::embed::{self, Pooling, ProviderConfig, ProviderKind};
use crate::error::Error;
use crate::eval::{self, Provenance, StructureSource, SweepConfig};
use crate::io;
use crate::labelmodel::{self, Inference};
use crate::refine::{self, EdgeBudget, RefineParams, RemovalBudget};
use crate::similarity::{self, DoubleFaultNorm};
use crate::synth::{self, SynthSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Default)]
pub enum Format {
    #[default]
    Json,
    Csv,
    Md,
}

#[derive(Debug, Parser)]
#[command(
    name = "lfrefine",
    version,
    about = "Refine prompted labeling functions via embedding similarity"
)]
pub struct Cli {
    /// Seed for every random draw (default 0).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
    /// Format of the summary printed to stdout.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[arg(long, global = true)]
    pub quiet: bool,
    /// Worker threads (outputs do not depend on this).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Embed LF prompt templates from a file or an HTTP service.
    Embed(EmbedArgs),
    /// Cosine, agreement and double-fault matrices.
    Similarity(SimilarityArgs),
    /// Remove redundant LFs and generate a dependency structure.
    Refine(RefineArgs),
    /// Fit the label model and write probabilistic labels.
    Label(LabelArgs),
    /// Score the label model and majority vote against gold labels.
    Eval(EvalArgs),
    /// Evaluate a grid of removal rates and edge budgets.
    Sweep(SweepArgs),
    /// Generate a synthetic bundle with planted structure.
    Synth(SynthArgs),
    /// Prompt and token savings from removing LFs.
    Savings(SavingsArgs),
    /// Compare removing either member of the most similar LF pair.
    #[command(name = "toy-remove-one")]
    ToyRemoveOne(ToyArgs),
    /// Render a JSON report from eval, sweep, savings or toy-remove-one.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct EmbedArgs {
    /// JSON list of prompted LFs.
    #[arg(long)]
    pub lfs: PathBuf,
    /// `file:<path>` or `http:<url>`.
    #[arg(long)]
    pub provider: String,
    /// Environment variable holding a bearer token for the HTTP provider.
    #[arg(long)]
    pub auth_env: Option<String>,
    #[arg(long, value_enum, default_value_t = PoolingArg::Mean)]
    pub pooling: PoolingArg,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 30.0)]
    pub timeout: f64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PoolingArg {
    Mean,
    First,
    Last,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Cosine,
    Agreement,
    DoubleFault,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum DoubleFaultNormArg {
    Examples,
    CoVotes,
}

#[derive(Debug, Args)]
pub struct SimilarityArgs {
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    #[arg(long)]
    pub votes: Option<PathBuf>,
    #[arg(long)]
    pub gold: Option<PathBuf>,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "cosine")]
    pub kinds: Vec<KindArg>,
    #[arg(long, value_enum, default_value_t = DoubleFaultNormArg::Examples)]
    pub double_fault_norm: DoubleFaultNormArg,
}

#[derive(Debug, Clone, Copy, ValueEnum, PartialEq, Eq)]
pub enum SourceArg {
    Cosine,
    Agreement,
}

impl From<SourceArg> for StructureSource {
    fn from(s: SourceArg) -> Self {
        match s {
            SourceArg::Cosine => StructureSource::Cosine,
            SourceArg::Agreement => StructureSource::Agreement,
        }
    }
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("removal").args(["m_r", "removal_rate"])))]
#[command(group(ArgGroup::new("edge").args(["m_e", "edge_rate"])))]
pub struct RefineArgs {
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    #[arg(long)]
    pub votes: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = SourceArg::Cosine)]
    pub source: SourceArg,
    /// Number of LFs to remove.
    #[arg(long)]
    pub m_r: Option<usize>,
    /// Fraction of LFs to remove, rounded half to even.
    #[arg(long)]
    pub removal_rate: Option<f64>,
    /// Number of dependency edges.
    #[arg(long)]
    pub m_e: Option<usize>,
    /// Fraction of the maximum edge count.
    #[arg(long)]
    pub edge_rate: Option<f64>,
}

#[derive(Debug, Clone, Copy, ValueEnum, PartialEq, Eq)]
pub enum InferenceArg {
    ComponentAverage,
    BestPerComponent,
}

impl From<InferenceArg> for Inference {
    fn from(a: InferenceArg) -> Self {
        match a {
            InferenceArg::ComponentAverage => Inference::ComponentAverage,
            InferenceArg::BestPerComponent => Inference::BestPerComponent,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, PartialEq, Eq)]
pub enum MethodArg {
    LabelModel,
    Majority,
}

#[derive(Debug, Args)]
pub struct LabelArgs {
    #[arg(long)]
    pub votes: PathBuf,
    #[arg(long)]
    pub config: PathBuf,
    /// Dependency structure; all LFs independent when omitted.
    #[arg(long)]
    pub structure: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = InferenceArg::ComponentAverage)]
    pub inference: InferenceArg,
    #[arg(long, value_enum, default_value_t = MethodArg::LabelModel)]
    pub method: MethodArg,
}

#[derive(Debug, Clone, Copy, ValueEnum, PartialEq, Eq)]
pub enum ProvenanceArg {
    Synthetic,
    Ingested,
}

impl From<ProvenanceArg> for Provenance {
    fn from(p: ProvenanceArg) -> Self {
        match p {
            ProvenanceArg::Synthetic => Provenance::Synthetic,
            ProvenanceArg::Ingested => Provenance::Ingested,
        }
    }
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub votes: PathBuf,
    #[arg(long)]
    pub gold: PathBuf,
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub structure: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = InferenceArg::ComponentAverage)]
    pub inference: InferenceArg,
    #[arg(long, value_enum, default_value_t = ProvenanceArg::Ingested)]
    pub provenance: ProvenanceArg,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub votes: PathBuf,
    #[arg(long)]
    pub embeddings: PathBuf,
    #[arg(long)]
    pub gold: PathBuf,
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "0,0.1,0.3,0.5,0.7")]
    pub rates: Vec<f64>,
    /// Edge budgets: integers are counts, decimals are fractions of the maximum.
    #[arg(long, value_delimiter = ',', default_value = "0,1,0.25")]
    pub edges: Vec<String>,
    #[arg(long, value_enum, default_value_t = SourceArg::Cosine)]
    pub source: SourceArg,
    #[arg(long, value_enum, default_value_t = InferenceArg::ComponentAverage)]
    pub inference: InferenceArg,
    /// Add a label-model runtime column (makes outputs machine-dependent).
    #[arg(long)]
    pub timing: bool,
    #[arg(long, value_enum, default_value_t = ProvenanceArg::Ingested)]
    pub provenance: ProvenanceArg,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub spec: PathBuf,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("removed").required(true).args(["m_r", "structure"])))]
pub struct SavingsArgs {
    /// Examples each prompt would have been run on.
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub m_r: Option<usize>,
    #[arg(long)]
    pub structure: Option<PathBuf>,
    /// CSV with one `avg_tokens` column, one row per original LF.
    #[arg(long)]
    pub tokens: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ToyArgs {
    #[arg(long)]
    pub votes: PathBuf,
    #[arg(long)]
    pub embeddings: PathBuf,
    #[arg(long)]
    pub gold: PathBuf,
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, value_enum, default_value_t = InferenceArg::ComponentAverage)]
    pub inference: InferenceArg,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub input: PathBuf,
}

enum Failure {
    Usage(String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

type CmdResult<T> = std::result::Result<T, Failure>;

/// What a subcommand produced, before anything touches the disk.
#[derive(Default)]
struct Outcome {
    parameters: Value,
    inputs: Vec<(&'static str, PathBuf)>,
    files: Vec<(String, Vec<u8>)>,
    summary: Value,
    csv: Option<String>,
    markdown: Option<String>,
    warnings: Vec<String>,
}

impl Outcome {
    fn file(&mut self, name: &str, content: impl Into<Vec<u8>>) {
        self.files.push((name.to_string(), content.into()));
    }

    fn json_file<T: Serialize>(&mut self, name: &str, value: &T) {
        let mut text = serde_json::to_string_pretty(value).expect("serializable");
        text.push('\n');
        self.file(name, text);
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .map(|f| f.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn record(level: &str, code: Option<i32>, kind: &str, message: &str) -> String {
    let mut v = json!({"level": level, "kind": kind, "message": message});
    if let Some(code) = code {
        v["exit_code"] = json!(code);
    }
    v.to_string()
}

/// Parses `argv` (including the program name) and runs the subcommand.
/// Returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let mut cmd = Cli::command();
    if std::env::var_os("NO_COLOR").is_some() {
        cmd = cmd.color(ColorChoice::Never);
    }
    let cli = match cmd.try_get_matches_from(argv).and_then(|m| Cli::from_arg_matches(&m)) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return 0;
            }
            let _ = e.print();
            eprintln!("{}", record("error", Some(1), "usage", &e.kind().to_string()));
            return 1;
        }
    };
    let result = match cli.threads {
        Some(t) => match rayon::ThreadPoolBuilder::new().num_threads(t.max(1)).build() {
            Ok(pool) => pool.install(|| execute(&cli)),
            Err(e) => Err(Failure::Lib(Error::Provider(e.to_string()))),
        },
        None => execute(&cli),
    };
    match result {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            eprintln!("{}", record("error", Some(1), "usage", &msg));
            1
        }
        Err(Failure::Lib(e)) => {
            let code = e.exit_code();
            eprintln!("{}", record("error", Some(code), e.kind(), &e.to_string()));
            code
        }
    }
}

fn execute(cli: &Cli) -> CmdResult<()> {
    let (name, outcome) = match &cli.command {
        Command::Embed(a) => ("embed", cmd_embed(a)?),
        Command::Similarity(a) => ("similarity", cmd_similarity(a)?),
        Command::Refine(a) => ("refine", cmd_refine(a)?),
        Command::Label(a) => ("label", cmd_label(a)?),
        Command::Eval(a) => ("eval", cmd_eval(a)?),
        Command::Sweep(a) => ("sweep", cmd_sweep(a)?),
        Command::Synth(a) => ("synth", cmd_synth(a, cli.seed)?),
        Command::Savings(a) => ("savings", cmd_savings(a)?),
        Command::ToyRemoveOne(a) => ("toy-remove-one", cmd_toy(a)?),
        Command::Report(a) => ("report", cmd_report(a)?),
    };
    if !cli.quiet {
        for w in &outcome.warnings {
            eprintln!("{}", record("warning", None, "guidance", w));
        }
    }
    write_outcome(cli, name, &outcome)?;
    if !cli.quiet {
        let text = match cli.format {
            Format::Json => serde_json::to_string_pretty(&outcome.summary).expect("json"),
            Format::Csv => outcome.csv.clone().unwrap_or_else(|| outcome.summary.to_string()),
            Format::Md => outcome.markdown.clone().unwrap_or_else(|| {
                format!(
                    "```json\n{}\n```",
                    serde_json::to_string_pretty(&outcome.summary).expect("json")
                )
            }),
        };
        println!("{}", text.trim_end());
    }
    Ok(())
}

fn write_outcome(cli: &Cli, command: &str, outcome: &Outcome) -> CmdResult<()> {
    let dir = &cli.out_dir;
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.clone(),
        source: e,
    })?;
    let mut inputs = Vec::new();
    for (role, path) in &outcome.inputs {
        let bytes = std::fs::read(path).map_err(|e| Error::Io {
            path: path.clone(),
            source: e,
        })?;
        inputs.push(json!({"role": role, "file": file_name(path), "sha256": sha256_hex(&bytes)}));
    }
    let mut outputs = Vec::new();
    for (name, content) in &outcome.files {
        io::write_text(&dir.join(name), std::str::from_utf8(content).expect("text outputs"))?;
        outputs.push(json!({"file": name, "sha256": sha256_hex(content)}));
    }
    let manifest = json!({
        "tool": "lfrefine",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "parameters": outcome.parameters,
        "inputs": inputs,
        "outputs": outputs,
    });
    io::write_json(&dir.join("manifest.json"), &manifest)?;
    Ok(())
}

fn require<'a>(path: &'a Option<PathBuf>, flag: &str, why: &str) -> CmdResult<&'a PathBuf> {
    path.as_ref()
        .ok_or_else(|| Failure::Usage(format!("--{flag} is required {why}")))
}

fn cmd_embed(a: &EmbedArgs) -> CmdResult<Outcome> {
    let lfs = embed::read_prompted_lfs(&a.lfs)?;
    let kind: ProviderKind = a.provider.parse().map_err(|e: Error| Failure::Usage(e.to_string()))?;
    let mut cfg = ProviderConfig::new(kind.clone());
    cfg.auth_header_env_var = a.auth_env.clone();
    cfg.pooling = match a.pooling {
        PoolingArg::Mean => Pooling::Mean,
        PoolingArg::First => Pooling::First,
        PoolingArg::Last => Pooling::Last,
    };
    cfg.batch_size = a.batch_size;
    cfg.timeout_seconds = a.timeout;
    let set = embed::embed_prompts(&lfs, &cfg)?;
    let mut out = Outcome {
        parameters: json!({
            "provider": match &kind { ProviderKind::File(p) => format!("file:{}", file_name(p)), ProviderKind::Http(u) => format!("http:{u}") },
            "pooling": format!("{:?}", cfg.pooling).to_lowercase(),
            "batch_size": cfg.batch_size,
        }),
        inputs: vec![("lfs", a.lfs.clone())],
        summary: json!({"m": set.len(), "dim": set.dim, "output": "embeddings.json"}),
        ..Default::default()
    };
    if let ProviderKind::File(p) = &kind {
        out.inputs.push(("embeddings", p.clone()));
    }
    out.json_file("embeddings.json", &set);
    Ok(out)
}

fn cmd_similarity(a: &SimilarityArgs) -> CmdResult<Outcome> {
    let mut out = Outcome {
        parameters: json!({
            "kinds": a.kinds.iter().map(|k| format!("{k:?}").to_lowercase()).collect::<Vec<_>>(),
            "double_fault_norm": format!("{:?}", a.double_fault_norm).to_lowercase(),
        }),
        ..Default::default()
    };
    let emb = match &a.embeddings {
        Some(p) => {
            out.inputs.push(("embeddings", p.clone()));
            Some(io::read_embeddings(p)?)
        }
        None => None,
    };
    let votes = match &a.votes {
        Some(p) => {
            out.inputs.push(("votes", p.clone()));
            Some(io::read_votes(p)?)
        }
        None => None,
    };
    let gold = match &a.gold {
        Some(p) => {
            out.inputs.push(("gold", p.clone()));
            Some(io::read_gold(p)?)
        }
        None => None,
    };
    let mut matrices = Vec::new();
    for kind in dedup(&a.kinds) {
        let matrix = match kind {
            KindArg::Cosine => {
                let emb = emb
                    .as_ref()
                    .ok_or_else(|| Failure::Usage("--embeddings is required for cosine".into()))?;
                (similarity::cosine_matrix(emb)?, emb.lf_names.clone())
            }
            KindArg::Agreement => {
                let v = votes
                    .as_ref()
                    .ok_or_else(|| Failure::Usage("--votes is required for agreement".into()))?;
                (similarity::agreement_matrix(v), v.lf_names().to_vec())
            }
            KindArg::DoubleFault => {
                let v = votes
                    .as_ref()
                    .ok_or_else(|| Failure::Usage("--votes is required for double-fault".into()))?;
                let g = gold
                    .as_ref()
                    .ok_or_else(|| Failure::Usage("--gold is required for double-fault".into()))?;
                let norm = match a.double_fault_norm {
                    DoubleFaultNormArg::Examples => DoubleFaultNorm::Examples,
                    DoubleFaultNormArg::CoVotes => DoubleFaultNorm::CoVotes,
                };
                (similarity::double_fault_matrix(v, g, norm)?, v.lf_names().to_vec())
            }
        };
        matrices.push(matrix);
    }
    if let (Some(e), Some(v)) = (&emb, &votes) {
        if e.len() != v.m() {
            return Err(Error::DimensionMismatch {
                axis: "m (LF count: embeddings vs votes)",
                expected: v.m(),
                found: e.len(),
            }
            .into());
        }
    }
    let mut overlap = Vec::new();
    for x in 0..matrices.len() {
        for y in x + 1..matrices.len() {
            let (a_m, b_m) = (&matrices[x].0, &matrices[y].0);
            let rho = similarity::matrix_rank_correlation(a_m, b_m);
            if let Err(e) = &rho {
                out.warnings.push(format!(
                    "rank correlation {} vs {} skipped: {e}",
                    a_m.kind().as_str(),
                    b_m.kind().as_str()
                ));
            }
            overlap.push(json!({"a": a_m.kind().as_str(), "b": b_m.kind().as_str(), "spearman": rho.ok()}));
        }
    }
    let mut written = Vec::new();
    for (matrix, names) in &matrices {
        let stem = format!("similarity_{}", matrix.kind().as_str());
        out.json_file(&format!("{stem}.json"), &io::similarity_to_json(matrix));
        out.file(&format!("{stem}.csv"), io::similarity_heatmap_csv(matrix, names));
        written.push(stem);
    }
    if !overlap.is_empty() {
        out.json_file("overlap.json", &overlap);
    }
    out.csv = matrices.first().map(|(m, names)| io::similarity_heatmap_csv(m, names));
    out.summary = json!({"matrices": written, "overlap": overlap});
    Ok(out)
}

fn dedup(kinds: &[KindArg]) -> Vec<KindArg> {
    let mut out = Vec::new();
    for k in kinds {
        if !out.contains(k) {
            out.push(*k);
        }
    }
    out
}

/// Parameter-choice warnings for small LF sets.
pub fn guidance_warnings(m: usize, m_r: usize, m_e: usize) -> Vec<String> {
    let mut out = Vec::new();
    if m <= 15 {
        if m_r as f64 > 0.3 * m as f64 {
            out.push(format!(
                "removing {m_r} of only {m} LFs; keep m_r small when there are few LFs"
            ));
        }
        let max = max_edges(m - m_r.min(m));
        if max > 0 && m_e as f64 > 0.25 * max as f64 {
            out.push(format!(
                "{m_e} edges is more than a quarter of the maximum {max}; prefer a sparse structure"
            ));
        }
    }
    out
}

fn cmd_refine(a: &RefineArgs) -> CmdResult<Outcome> {
    let mut out = Outcome::default();
    let matrix = match a.source {
        SourceArg::Cosine => {
            let p = require(&a.embeddings, "embeddings", "when --source cosine")?;
            out.inputs.push(("embeddings", p.clone()));
            similarity::cosine_matrix(&io::read_embeddings(p)?)?
        }
        SourceArg::Agreement => {
            let p = require(&a.votes, "votes", "when --source agreement")?;
            out.inputs.push(("votes", p.clone()));
            similarity::agreement_matrix(&io::read_votes(p)?)
        }
    };
    let params = RefineParams {
        removal: match (a.m_r, a.removal_rate) {
            (_, Some(r)) => RemovalBudget::Rate(r),
            (c, None) => RemovalBudget::Count(c.unwrap_or(0)),
        },
        edges: match (a.m_e, a.edge_rate) {
            (_, Some(r)) => EdgeBudget::Rate(r),
            (c, None) => EdgeBudget::Count(c.unwrap_or(0)),
        },
    };
    let (m_r, m_e) = params.resolve(matrix.m())?;
    out.warnings = guidance_warnings(matrix.m(), m_r, m_e);
    let structure = match a.source {
        SourceArg::Cosine => refine::refine_pipeline(&matrix, &params)?,
        SourceArg::Agreement => refine::empirical_structure(&matrix, &params)?,
    };
    out.parameters =
        json!({"source": format!("{:?}", a.source).to_lowercase(), "budgets": params, "m_r": m_r, "m_e": m_e});
    out.json_file("structure.json", &structure);
    out.summary = serde_json::to_value(&structure).expect("json");
    out.markdown = Some(format!(
        "# Refined structure\n\n- removed: {:?}\n- survivors: {:?}\n- anchors: {:?}\n- edges: {:?}\n",
        structure.removed, structure.survivors, structure.anchors, structure.edges
    ));
    Ok(out)
}

fn load_structure(path: &Option<PathBuf>, m: usize, out: &mut Outcome) -> CmdResult<DependencyStructure> {
    Ok(match path {
        Some(p) => {
            out.inputs.push(("structure", p.clone()));
            let s = io::read_structure(p)?;
            s.validate(m)?;
            s
        }
        None => DependencyStructure::empty(m),
    })
}

fn cmd_label(a: &LabelArgs) -> CmdResult<Outcome> {
    let mut out = Outcome {
        inputs: vec![("votes", a.votes.clone()), ("config", a.config.clone())],
        parameters: json!({
            "method": format!("{:?}", a.method).to_lowercase(),
            "inference": Inference::from(a.inference),
        }),
        ..Default::default()
    };
    let votes = io::read_votes(&a.votes)?;
    let cfg = io::read_config(&a.config)?;
    let structure = load_structure(&a.structure, votes.m(), &mut out)?;
    let post = match a.method {
        MethodArg::LabelModel => {
            let params = labelmodel::fit(&votes, &structure, &cfg)?.with_inference(a.inference.into());
            out.json_file("params.json", &params);
            out.summary = serde_json::to_value(&params).expect("json");
            labelmodel::predict(&params, &votes)?
        }
        MethodArg::Majority => {
            let kept = votes.select_columns(&structure.survivors)?;
            labelmodel::majority_vote(&kept, &cfg)
        }
    };
    let positives = post.hard.iter().filter(|&&h| h > 0).count();
    if a.method == MethodArg::Majority {
        out.summary = json!({"n": post.len(), "predicted_positive": positives});
    }
    let csv = post.to_csv();
    out.file("posteriors.csv", csv.clone());
    out.csv = Some(csv);
    Ok(out)
}

fn cmd_eval(a: &EvalArgs) -> CmdResult<Outcome> {
    let mut out = Outcome {
        inputs: vec![
            ("votes", a.votes.clone()),
            ("gold", a.gold.clone()),
            ("config", a.config.clone()),
        ],
        parameters: json!({"inference": Inference::from(a.inference), "provenance": Provenance::from(a.provenance)}),
        ..Default::default()
    };
    let votes = io::read_votes(&a.votes)?;
    let gold = io::read_gold(&a.gold)?;
    let cfg = io::read_config(&a.config)?;
    if gold.len() != votes.n() {
        return Err(Error::DimensionMismatch {
            axis: "n (example count: gold vs votes)",
            expected: votes.n(),
            found: gold.len(),
        }
        .into());
    }
    let structure = load_structure(&a.structure, votes.m(), &mut out)?;
    let report = eval::evaluate(&votes, &gold, &structure, &cfg, a.inference.into(), a.provenance.into())?;
    out.json_file("eval.json", &report);
    out.file("eval.csv", report.to_csv());
    out.file("eval.md", report.to_markdown());
    out.summary = serde_json::to_value(&report).expect("json");
    out.csv = Some(report.to_csv());
    out.markdown = Some(report.to_markdown());
    Ok(out)
}

fn parse_edge_budget(s: &str) -> CmdResult<EdgeBudget> {
    let s = s.trim();
    if s.contains('.') {
        s.parse::<f64>()
            .map(EdgeBudget::Rate)
            .map_err(|_| Failure::Usage(format!("bad edge budget `{s}`")))
    } else {
        s.parse::<usize>()
            .map(EdgeBudget::Count)
            .map_err(|_| Failure::Usage(format!("bad edge budget `{s}`")))
    }
}

fn load_bundle(
    votes: &Path,
    embeddings: &Path,
    gold: &Path,
    config: &Path,
    out: &mut Outcome,
) -> CmdResult<crate::data::Bundle> {
    out.inputs.extend([
        ("votes", votes.to_path_buf()),
        ("embeddings", embeddings.to_path_buf()),
        ("gold", gold.to_path_buf()),
        ("config", config.to_path_buf()),
    ]);
    Ok(validate_bundle(
        io::read_votes(votes)?,
        io::read_embeddings(embeddings)?,
        Some(io::read_gold(gold)?),
        io::read_config(config)?,
    )?)
}

fn cmd_sweep(a: &SweepArgs) -> CmdResult<Outcome> {
    let mut out = Outcome::default();
    let bundle = load_bundle(&a.votes, &a.embeddings, &a.gold, &a.config, &mut out)?;
    let cfg = SweepConfig {
        rates: a.rates.clone(),
        edges: a.edges.iter().map(|s| parse_edge_budget(s)).collect::<CmdResult<_>>()?,
        source: a.source.into(),
        inference: a.inference.into(),
        timing: a.timing,
    };
    out.parameters = serde_json::to_value(&cfg).expect("json");
    let report = eval::sweep(&bundle, &cfg, a.provenance.into())?;
    out.json_file("sweep.json", &report);
    out.file("sweep.csv", report.to_csv());
    out.file("sweep.md", report.to_markdown());
    out.summary = serde_json::to_value(&report).expect("json");
    out.csv = Some(report.to_csv());
    out.markdown = Some(report.to_markdown());
    Ok(out)
}

fn cmd_synth(a: &SynthArgs, seed: Option<u64>) -> CmdResult<Outcome> {
    let mut spec: SynthSpec = io::read_json(&a.spec, "synth spec json")?;
    if let Some(s) = seed {
        spec.seed = s;
    }
    let data = synth::generate(&spec)?;
    let cfg = TaskConfig {
        task_name: "synthetic".into(),
        label_names: ("negative".into(), "positive".into()),
        class_prior: spec.class_prior,
        metric: Metric::Accuracy,
    };
    let mut out = Outcome {
        inputs: vec![("spec", a.spec.clone())],
        parameters: json!({"seed": spec.seed}),
        summary: json!({"n": spec.n, "m": spec.m(), "seed": spec.seed, "planted_edges": data.structure.edges.len()}),
        ..Default::default()
    };
    out.file("votes.csv", io::votes_to_csv(&data.votes));
    out.file("gold.csv", io::gold_to_csv(&data.gold));
    out.json_file("embeddings.json", &data.embeddings);
    out.json_file("config.json", &cfg);
    out.json_file("planted_structure.json", &data.structure);
    out.json_file(
        "planted_accuracies.json",
        &json!({"lf_names": data.votes.lf_names(), "accuracy_moments": data.accuracy_moments}),
    );
    Ok(out)
}

fn read_token_counts(path: &Path) -> CmdResult<Vec<f64>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::malformed("token csv", e))?;
    let headers = rdr.headers().map_err(|e| Error::malformed("token csv", e))?.clone();
    let col = headers
        .iter()
        .position(|h| h.trim() == "avg_tokens")
        .ok_or_else(|| Error::malformed("token csv", "missing `avg_tokens` column"))?;
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| Error::malformed("token csv", e))?;
        let cell = record.get(col).unwrap_or("").trim();
        out.push(if cell.is_empty() {
            f64::NAN
        } else {
            cell.parse()
                .map_err(|_| Error::malformed("token csv", format!("`{cell}` is not a number")))?
        });
    }
    Ok(out)
}

fn cmd_savings(a: &SavingsArgs) -> CmdResult<Outcome> {
    let mut out = Outcome::default();
    let removed: Vec<usize> = match (&a.structure, a.m_r) {
        (Some(p), _) => {
            out.inputs.push(("structure", p.clone()));
            io::read_structure(p)?.removed
        }
        (None, Some(_)) => Vec::new(),
        (None, None) => unreachable!("clap requires one of --m-r / --structure"),
    };
    let m_r = a.m_r.unwrap_or(removed.len());
    let tokens_saved = match &a.tokens {
        Some(p) => {
            out.inputs.push(("tokens", p.clone()));
            if a.structure.is_none() {
                return Err(Failure::Usage(
                    "--tokens needs --structure to know which LFs were removed".into(),
                ));
            }
            Some(eval::tokens_saved(&removed, &read_token_counts(p)?, a.n)?)
        }
        None => None,
    };
    let report = eval::SavingsReport {
        m_r,
        n: a.n,
        prompts_saved: eval::prompts_saved(m_r, a.n),
        tokens_saved,
    };
    out.parameters = json!({"n": a.n, "m_r": m_r});
    out.json_file("savings.json", &report);
    out.file("savings.csv", report.to_csv());
    out.file("savings.md", report.to_markdown());
    out.summary = serde_json::to_value(&report).expect("json");
    out.csv = Some(report.to_csv());
    out.markdown = Some(report.to_markdown());
    Ok(out)
}

fn cmd_toy(a: &ToyArgs) -> CmdResult<Outcome> {
    let mut out = Outcome {
        parameters: json!({"inference": Inference::from(a.inference)}),
        ..Default::default()
    };
    let bundle = load_bundle(&a.votes, &a.embeddings, &a.gold, &a.config, &mut out)?;
    let report = eval::remove_one_toy(&bundle, a.inference.into())?;
    if report.low_confidence {
        out.warnings.push(format!(
            "most similar pair has cosine {:.4}; no strongly redundant LF pair",
            report.similarity
        ));
    }
    out.json_file("toy.json", &report);
    out.file("toy.csv", report.to_csv());
    out.file("toy.md", report.to_markdown());
    out.summary = serde_json::to_value(&report).expect("json");
    out.csv = Some(report.to_csv());
    out.markdown = Some(report.to_markdown());
    Ok(out)
}

fn cmd_report(a: &ReportArgs) -> CmdResult<Outcome> {
    let value: Value = io::read_json(&a.input, "report json")?;
    let (kind, csv, md) = if let Ok(r) = serde_json::from_value::<eval::SweepReport>(value.clone()) {
        ("sweep", r.to_csv(), r.to_markdown())
    } else if let Ok(r) = serde_json::from_value::<eval::ToyReport>(value.clone()) {
        ("toy-remove-one", r.to_csv(), r.to_markdown())
    } else if let Ok(r) = serde_json::from_value::<eval::EvalReport>(value.clone()) {
        ("eval", r.to_csv(), r.to_markdown())
    } else if let Ok(r) = serde_json::from_value::<eval::SavingsReport>(value.clone()) {
        ("savings", r.to_csv(), r.to_markdown())
    } else {
        return Err(Error::malformed("report json", "not a sweep, toy-remove-one, eval or savings report").into());
    };
    let mut out = Outcome {
        inputs: vec![("report", a.input.clone())],
        parameters: json!({"kind": kind}),
        summary: value,
        csv: Some(csv.clone()),
        markdown: Some(md.clone()),
        ..Default::default()
    };
    out.file("report.md", md);
    out.file("report.csv", csv);
    Ok(out)
}
