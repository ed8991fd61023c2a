//! Command-line front end. Every command writes its outputs together with a
//! run manifest (`<output>.manifest.json`, or `manifest.json` inside the
//! output directory of `ablate`).

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::bounds::{corollary_bound, BoundReport};
use crate::dist::{Distribution, TokenId};
use crate::iqr_ip::{iqr_ip_trace, SamplerConfig};
use crate::lm::{generate_batch, run_cell, Cell, CellResult, LanguageModel, NgramConfig, ToyModel, BUNDLED_CORPUS};
use crate::metrics::{
    extract_trajectories, perplexity_from_logprobs, window_entropies, MetricsReport, ReportOptions, Sample,
    DEFAULT_MIN_COUNT,
};
use crate::sampler::Method;

pub const TOOL: &str = "iqrip";
pub const MODEL_ENV: &str = "IQRIP_MODEL";
pub const BUNDLED: &str = "<bundled>";

#[derive(Debug, Parser)]
#[command(name = "iqrip", version, about = "IQR-based inverse-probability sampling on a toy n-gram model")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train an n-gram model and write it as JSON.
    Train(TrainArgs),
    /// Sample continuations and write them as JSONL.
    Generate(GenerateArgs),
    /// Compute corpus metrics over a JSONL sample file.
    Analyze(AnalyzeArgs),
    /// Check the total-variation bound on JSONL distributions.
    Bound(BoundArgs),
    /// Sweep one sampler parameter and tabulate the metrics.
    Ablate(AblateArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TrainArgs {
    /// UTF-8 text, whitespace tokenized. Defaults to the bundled corpus.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long, default_value_t = 3)]
    pub order: usize,
    #[arg(long, default_value_t = 0.01)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.8)]
    pub lambda: f64,
    /// Keep case when tokenizing.
    #[arg(long)]
    pub no_lowercase: bool,
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SamplerArgs {
    /// iqr-ip, nucleus, top-k or pure.
    #[arg(long, default_value = "iqr-ip")]
    pub method: Method,
    #[arg(long = "top-p", default_value_t = 0.8)]
    pub top_p: f64,
    #[arg(long = "top-k", default_value_t = 640)]
    pub top_k: usize,
    #[arg(long = "top1ctrl-n", default_value_t = 100.0)]
    pub top1ctrl_n: f64,
    #[arg(long, default_value_t = 1.5)]
    pub rho: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long = "max-len", default_value_t = 200)]
    pub max_len: usize,
    /// Recompute IQR bands after pruning.
    #[arg(long, hide = true)]
    pub repartition: bool,
}

impl SamplerArgs {
    pub fn config(&self) -> SamplerConfig {
        SamplerConfig {
            p: self.top_p,
            k: self.top_k,
            n: self.top1ctrl_n,
            rho: self.rho,
            seed: self.seed,
            max_len: self.max_len,
            repartition: self.repartition,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GenerateArgs {
    /// Model file. Falls back to $IQRIP_MODEL, then to a model trained on the bundled corpus.
    #[arg(long, env = MODEL_ENV)]
    pub model: Option<PathBuf>,
    #[command(flatten)]
    pub sampler: SamplerArgs,
    #[arg(long, default_value_t = 1)]
    pub count: usize,
    /// Prompt text. Defaults to the model's stored prompt.
    #[arg(long)]
    pub prompt: Option<String>,
    /// Store the model's raw distribution at every step.
    #[arg(long)]
    pub record_dists: bool,
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct AnalyzeArgs {
    /// JSONL, one `{"tokens": [...], "logprobs": [...]}` object per line.
    #[arg(long)]
    pub samples: PathBuf,
    /// Scores perplexity with this model instead of the stored logprobs.
    #[arg(long, env = MODEL_ENV)]
    pub model: Option<PathBuf>,
    #[arg(long, default_value_t = 200)]
    pub window: usize,
    #[arg(long, default_value_t = 2.0)]
    pub loop_threshold: f64,
    /// References per Self-BLEU hypothesis; 0 uses all other samples.
    #[arg(long, default_value_t = 0)]
    pub ref_count: usize,
    /// Also write `<out>.plot.jsonl` with windowed-entropy and trajectory series.
    #[arg(long)]
    pub emit_plot_data: bool,
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BoundArgs {
    /// JSONL, one `{"ids": [...], "probs": [...], "ref"?: {"ids", "probs"}}` per line.
    #[arg(long)]
    pub dists: PathBuf,
    #[arg(long, default_value_t = 1.5)]
    pub rho: f64,
    #[arg(long = "top-p", default_value_t = 0.8)]
    pub top_p: f64,
    #[arg(long = "top-k", default_value_t = 640)]
    pub top_k: usize,
    #[arg(long = "top1ctrl-n", default_value_t = 100.0)]
    pub top1ctrl_n: f64,
    #[arg(long, hide = true)]
    pub repartition: bool,
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct AblateArgs {
    #[arg(long, env = MODEL_ENV)]
    pub model: Option<PathBuf>,
    /// `<param>=<v1>,<v2>,...` with param one of rho, n, p, k.
    #[arg(long)]
    pub sweep: String,
    #[command(flatten)]
    pub sampler: SamplerArgs,
    /// Samples per cell.
    #[arg(long, default_value_t = 100)]
    pub count: usize,
    #[arg(long)]
    pub prompt: Option<String>,
    #[arg(long, default_value_t = 200)]
    pub window: usize,
    #[arg(long, default_value_t = 0)]
    pub ref_count: usize,
    /// Also write `plot.jsonl` with metric-vs-parameter series.
    #[arg(long)]
    pub emit_plot_data: bool,
    #[arg(long = "out-dir")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

impl FileDigest {
    fn of(path: &str, bytes: &[u8]) -> Self {
        FileDigest { path: path.to_string(), sha256: sha256_hex(bytes) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: Vec<String>,
    pub config: Value,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub wall_clock_ms: u64,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// `dir/name` becomes `dir/name<suffix>`.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

struct Run {
    started: Instant,
    command: Vec<String>,
    config: Value,
    inputs: Vec<FileDigest>,
    outputs: Vec<FileDigest>,
}

impl Run {
    fn new(argv: &[String], config: &impl Serialize) -> Self {
        Run {
            started: Instant::now(),
            command: argv.to_vec(),
            config: serde_json::to_value(config).expect("config serializes"),
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    fn read(&mut self, path: &Path) -> anyhow::Result<String> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        self.inputs.push(FileDigest::of(&path.display().to_string(), text.as_bytes()));
        Ok(text)
    }

    fn write(&mut self, path: &Path, contents: &str) -> anyhow::Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }
        fs::write(path, contents).with_context(|| format!("writing {}", path.display()))?;
        self.outputs.push(FileDigest::of(&path.display().to_string(), contents.as_bytes()));
        Ok(())
    }

    fn finish(self, manifest_path: &Path) -> anyhow::Result<RunManifest> {
        let manifest = RunManifest {
            tool: TOOL.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: self.command,
            config: self.config,
            inputs: self.inputs,
            outputs: self.outputs,
            wall_clock_ms: self.started.elapsed().as_millis() as u64,
        };
        let text = serde_json::to_string_pretty(&manifest)? + "\n";
        fs::write(manifest_path, text).with_context(|| format!("writing {}", manifest_path.display()))?;
        Ok(manifest)
    }
}

fn load_model(run: &mut Run, path: Option<&Path>) -> anyhow::Result<ToyModel> {
    match path {
        Some(p) => {
            let text = run.read(p)?;
            ToyModel::from_json(&text).with_context(|| format!("loading model {}", p.display()))
        }
        None => {
            run.inputs.push(FileDigest::of(BUNDLED, BUNDLED_CORPUS.as_bytes()));
            Ok(ToyModel::train_text(BUNDLED_CORPUS, true, NgramConfig::default())?)
        }
    }
}

fn resolve_prompt(model: &ToyModel, prompt: Option<&str>) -> anyhow::Result<Vec<TokenId>> {
    match prompt {
        Some(text) => {
            let ids = model.vocab().encode(text)?;
            if ids.is_empty() {
                bail!("prompt is empty");
            }
            Ok(ids)
        }
        None => Ok(model.default_prompt().to_vec()),
    }
}

fn to_jsonl<T: Serialize>(items: &[T]) -> String {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item).expect("record serializes"));
        out.push('\n');
    }
    out
}

/// Parses non-blank lines, naming the 1-based line number on failure.
fn parse_jsonl<T: for<'de> Deserialize<'de>>(text: &str, what: &str) -> anyhow::Result<Vec<T>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(line).with_context(|| format!("malformed {what} on line {}", i + 1))?);
    }
    if out.is_empty() {
        bail!("no {what} records in input");
    }
    Ok(out)
}

pub fn cmd_train(argv: &[String], args: &TrainArgs) -> anyhow::Result<RunManifest> {
    let mut run = Run::new(argv, args);
    let text = match &args.corpus {
        Some(p) => run.read(p)?,
        None => {
            run.inputs.push(FileDigest::of(BUNDLED, BUNDLED_CORPUS.as_bytes()));
            BUNDLED_CORPUS.to_string()
        }
    };
    let config = NgramConfig { order: args.order, alpha: args.alpha, lambda: args.lambda };
    let model = ToyModel::train_text(&text, !args.no_lowercase, config)?;
    run.write(&args.out, &(model.to_json() + "\n"))?;
    run.finish(&sibling(&args.out, ".manifest.json"))
}

pub fn cmd_generate(argv: &[String], args: &GenerateArgs) -> anyhow::Result<RunManifest> {
    let mut run = Run::new(argv, args);
    let cfg = args.sampler.config();
    cfg.validate()?;
    let model = load_model(&mut run, args.model.as_deref())?;
    let prompt = resolve_prompt(&model, args.prompt.as_deref())?;
    let samples = generate_batch(&model, &cfg, args.sampler.method, &prompt, args.count, args.record_dists)?;
    run.write(&args.out, &to_jsonl(&samples))?;
    run.finish(&sibling(&args.out, ".manifest.json"))
}

/// Raw model distributions along each sample, for trajectory extraction.
fn attach_distributions<M: LanguageModel>(model: &M, samples: &mut [Sample]) {
    for s in samples.iter_mut().filter(|s| s.step_distributions.is_none()) {
        let mut context = s.prompt.clone();
        let mut dists = Vec::with_capacity(s.tokens.len());
        for &t in &s.tokens {
            dists.push(model.next_distribution(&context));
            context.push(t);
        }
        s.step_distributions = Some(dists);
    }
}

pub fn cmd_analyze(argv: &[String], args: &AnalyzeArgs) -> anyhow::Result<RunManifest> {
    let mut run = Run::new(argv, args);
    let text = run.read(&args.samples)?;
    let mut samples: Vec<Sample> = parse_jsonl(&text, "sample")?;
    for (i, s) in samples.iter().enumerate() {
        s.validate(i).with_context(|| format!("sample on record {}", i + 1))?;
    }
    let opts = ReportOptions { window: args.window, loop_threshold: args.loop_threshold, ref_count: args.ref_count };
    let model = match &args.model {
        Some(p) => Some(load_model(&mut run, Some(p))?),
        None => None,
    };
    let report = match &model {
        Some(m) => MetricsReport::compute(m, &samples, &opts)?,
        None => MetricsReport::with_perplexity(&samples, perplexity_from_logprobs(&samples)?, &opts)?,
    };
    run.write(&args.out, &(serde_json::to_string_pretty(&report)? + "\n"))?;

    if args.emit_plot_data {
        let mut plot = String::new();
        for (i, s) in samples.iter().enumerate() {
            let hs = window_entropies(&s.tokens, args.window)?;
            let x: Vec<usize> = (0..hs.len()).collect();
            let line = json!({"figure": "window_entropy", "sample": i, "x": x, "y": hs});
            writeln!(plot, "{line}")?;
        }
        if let Some(m) = &model {
            attach_distributions(m, &mut samples);
        }
        if samples.iter().all(|s| s.step_distributions.is_some()) {
            for t in extract_trajectories(&samples, args.window, DEFAULT_MIN_COUNT)? {
                let x: Vec<usize> = t.points.iter().map(|p| p.appearance).collect();
                let word = model.as_ref().and_then(|m| m.vocab().word(t.word)).map(str::to_string);
                let series: [(&str, Vec<f64>); 3] = [
                    ("probability", t.points.iter().map(|p| p.probability).collect()),
                    ("rank", t.points.iter().map(|p| p.rank as f64).collect()),
                    ("entropy", t.points.iter().map(|p| p.entropy).collect()),
                ];
                for (name, y) in series {
                    let line = json!({
                        "figure": "trajectory", "series": name, "sample": t.sample,
                        "token": t.word, "word": word, "x": x, "y": y,
                    });
                    writeln!(plot, "{line}")?;
                }
            }
        }
        run.write(&sibling(&args.out, ".plot.jsonl"), &plot)?;
    }
    run.finish(&sibling(&args.out, ".manifest.json"))
}

#[derive(Debug, Deserialize)]
struct BoundInput {
    #[serde(flatten)]
    dist: Distribution,
    #[serde(default, rename = "ref")]
    reference: Option<Distribution>,
}

#[derive(Debug, Serialize)]
struct BoundLine<'a> {
    index: usize,
    very_high: &'a [TokenId],
    #[serde(flatten)]
    report: &'a BoundReport,
}

pub fn cmd_bound(argv: &[String], args: &BoundArgs) -> anyhow::Result<RunManifest> {
    let mut run = Run::new(argv, args);
    let cfg = SamplerConfig {
        p: args.top_p,
        k: args.top_k,
        n: args.top1ctrl_n,
        rho: args.rho,
        repartition: args.repartition,
        ..Default::default()
    };
    cfg.validate()?;
    let text = run.read(&args.dists)?;
    let inputs: Vec<BoundInput> = parse_jsonl(&text, "distribution")?;
    let mut out = String::new();
    let (mut violations, mut pointwise) = (0usize, 0usize);
    for (i, input) in inputs.iter().enumerate() {
        let trace = iqr_ip_trace(&input.dist, &cfg).with_context(|| format!("record {}", i + 1))?;
        let reference = input.reference.as_ref().unwrap_or(&trace.filtered);
        let report = corollary_bound(&trace.filtered, &trace.very_high, reference)
            .with_context(|| format!("record {}", i + 1))?;
        violations += usize::from(!report.satisfied);
        pointwise += usize::from(!report.pointwise_satisfied);
        let line = BoundLine { index: i, very_high: &trace.very_high, report: &report };
        writeln!(out, "{}", serde_json::to_string(&line)?)?;
    }
    let summary = json!({"summary": true, "lines": inputs.len(), "violations": violations, "pointwise_violations": pointwise});
    writeln!(out, "{summary}")?;
    run.write(&args.out, &out)?;
    run.finish(&sibling(&args.out, ".manifest.json"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepParam {
    Rho,
    N,
    P,
    K,
}

impl SweepParam {
    fn apply(self, cfg: &SamplerConfig, value: f64) -> anyhow::Result<SamplerConfig> {
        let mut c = cfg.clone();
        match self {
            SweepParam::Rho => c.rho = value,
            SweepParam::N => c.n = value,
            SweepParam::P => c.p = value,
            SweepParam::K => {
                if value.fract() != 0.0 || value < 1.0 {
                    bail!("k must be a positive integer, got {value}");
                }
                c.k = value as usize;
            }
        }
        c.validate()?;
        Ok(c)
    }

    fn name(self) -> &'static str {
        match self {
            SweepParam::Rho => "rho",
            SweepParam::N => "n",
            SweepParam::P => "p",
            SweepParam::K => "k",
        }
    }
}

/// Parses `rho=1.5,3,5`.
pub fn parse_sweep(spec: &str) -> anyhow::Result<(SweepParam, Vec<f64>)> {
    let (name, values) = spec.split_once('=').ok_or_else(|| anyhow!("sweep must look like <param>=<v1>,<v2>,..."))?;
    let param = match name.trim() {
        "rho" => SweepParam::Rho,
        "n" => SweepParam::N,
        "p" => SweepParam::P,
        "k" => SweepParam::K,
        other => bail!("unknown sweep parameter {other:?} (expected rho, n, p or k)"),
    };
    let values = values
        .split(',')
        .map(|v| v.trim().parse::<f64>().with_context(|| format!("bad sweep value {v:?}")))
        .collect::<anyhow::Result<Vec<_>>>()?;
    if values.is_empty() {
        bail!("sweep lists no values");
    }
    Ok((param, values))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format!("{x:.6}"))
}

pub fn cmd_ablate(argv: &[String], args: &AblateArgs) -> anyhow::Result<RunManifest> {
    let mut run = Run::new(argv, args);
    let (param, values) = parse_sweep(&args.sweep)?;
    let base = args.sampler.config();
    let cells = values
        .iter()
        .map(|&v| Ok(Cell { method: args.sampler.method, config: param.apply(&base, v)? }))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let model = load_model(&mut run, args.model.as_deref())?;
    let prompt = resolve_prompt(&model, args.prompt.as_deref())?;
    let opts = ReportOptions { window: args.window, ref_count: args.ref_count, ..Default::default() };

    let results: Vec<CellResult> = {
        use rayon::prelude::*;
        cells
            .par_iter()
            .map(|cell| {
                let (_, report) = run_cell(&model, cell, args.count, &prompt, &opts, false)?;
                Ok(CellResult { cell: cell.clone(), report })
            })
            .collect::<crate::error::Result<_>>()?
    };

    let mut table = format!("{}\tPPL\tSelf-BLEU4\tSelf-BLEU5\tZipf\tH_rep\n", param.name());
    for (v, r) in values.iter().zip(&results) {
        let rep = &r.report;
        writeln!(
            table,
            "{v}\t{:.6}\t{}\t{}\t{}\t{:.6}",
            rep.perplexity,
            fmt_opt(rep.self_bleu4),
            fmt_opt(rep.self_bleu5),
            fmt_opt(rep.zipf),
            rep.h_rep
        )?;
    }
    run.write(&args.out_dir.join("cells.jsonl"), &to_jsonl(&results))?;
    run.write(&args.out_dir.join("table.tsv"), &table)?;

    if args.emit_plot_data {
        let series: [(&str, Vec<Option<f64>>); 5] = [
            ("perplexity", results.iter().map(|r| Some(r.report.perplexity)).collect()),
            ("self_bleu4", results.iter().map(|r| r.report.self_bleu4).collect()),
            ("self_bleu5", results.iter().map(|r| r.report.self_bleu5).collect()),
            ("zipf", results.iter().map(|r| r.report.zipf).collect()),
            ("h_rep", results.iter().map(|r| Some(r.report.h_rep)).collect()),
        ];
        let mut plot = String::new();
        for (name, y) in series {
            let line = json!({"figure": "ablation", "parameter": param.name(), "series": name, "x": values, "y": y});
            writeln!(plot, "{line}")?;
        }
        run.write(&args.out_dir.join("plot.jsonl"), &plot)?;
    }
    run.finish(&args.out_dir.join("manifest.json"))
}

/// Dispatches a parsed command line.
pub fn run(argv: &[String], cli: &Cli) -> anyhow::Result<RunManifest> {
    match &cli.command {
        Command::Train(a) => cmd_train(argv, a),
        Command::Generate(a) => cmd_generate(argv, a),
        Command::Analyze(a) => cmd_analyze(argv, a),
        Command::Bound(a) => cmd_bound(argv, a),
        Command::Ablate(a) => cmd_ablate(argv, a),
    }
}

/// Machine-readable error object written to stderr.
pub fn error_json(err: &anyhow::Error) -> String {
    let chain: Vec<String> = err.chain().map(ToString::to_string).collect();
    json!({"error": chain.join(": "), "causes": chain}).to_string()
}
