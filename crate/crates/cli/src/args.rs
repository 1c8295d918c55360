use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use warmstart_core::vocab::SpecialIds;

#[derive(Debug, Parser)]
#[command(name = "warmstart", version, about = "Warm-start and pre-training data pipeline for T5-style models")]
pub struct Cli {
    /// `key = value` file supplying defaults for any flag; flags on the
    /// command line win.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Append-only log of run provenance records.
    #[arg(long, global = true, env = "WARMSTART_RUN_LOG", default_value = "warmstart_runs.log")]
    pub run_log: PathBuf,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Initialize target-vocabulary embeddings from a source model.
    Transplant(TransplantArgs),
    /// Tokenize a directory of text files into a sequence store.
    PrepareCorpus(PrepareArgs),
    /// Mask and batch one epoch of a sequence store.
    SampleBatches(SampleArgs),
    /// Write the learning-rate schedule as CSV.
    LrCurve(LrArgs),
    /// Estimate training memory and check it against hardware.
    Memplan(MemplanArgs),
    /// Summarize a sequence store.
    Stats(StatsArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Transplant(_) => "transplant",
            Command::PrepareCorpus(_) => "prepare-corpus",
            Command::SampleBatches(_) => "sample-batches",
            Command::LrCurve(_) => "lr-curve",
            Command::Memplan(_) => "memplan",
            Command::Stats(_) => "stats",
        }
    }
}

/// Special-token ids shared by every vocabulary a run loads.
#[derive(Debug, Clone, Copy, Args)]
pub struct SpecialArgs {
    #[arg(long, default_value_t = 0)]
    pub pad_id: u32,
    #[arg(long, default_value_t = 1)]
    pub eos_id: u32,
    #[arg(long, default_value_t = 2)]
    pub unk_id: u32,
    /// Number of sentinel tokens at the top of the id range.
    #[arg(long, default_value_t = 100)]
    pub sentinels: usize,
}

impl SpecialArgs {
    pub fn ids(&self) -> SpecialIds {
        SpecialIds {
            pad: self.pad_id,
            eos: self.eos_id,
            unk: self.unk_id,
            sentinel_count: self.sentinels,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProviderKind {
    Dict,
    Remote,
    Identity,
}

#[derive(Debug, Args)]
pub struct TransplantArgs {
    /// Source embedding matrix (EMBT file).
    #[arg(long)]
    pub src_emb: PathBuf,
    #[arg(long)]
    pub src_vocab: PathBuf,
    #[arg(long)]
    pub tgt_vocab: PathBuf,
    /// Translation cache; created if missing, appended to as results arrive.
    #[arg(long)]
    pub cache: Option<PathBuf>,
    /// Output embedding matrix.
    #[arg(long)]
    pub out: PathBuf,
    /// Report file (key=value lines); printed to stdout when omitted.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Translation source. Defaults to `dict` when --dict-file is given,
    /// `identity` otherwise.
    #[arg(long, value_enum)]
    pub provider: Option<ProviderKind>,
    /// Tab-separated `token<TAB>translation` lines.
    #[arg(long)]
    pub dict_file: Option<PathBuf>,
    /// Query cached failures again.
    #[arg(long)]
    pub retry_failed: bool,
    /// Remote requests per second, e.g. `5` or `5/s`; 0 disables the limit.
    #[arg(long, value_parser = parse_rate, default_value = "5/s")]
    pub rate_limit: f64,
    /// Hard per-request timeout for the remote service.
    #[arg(long, default_value_t = 10_000)]
    pub timeout_ms: u64,
    /// Translation endpoint (LibreTranslate-compatible `/translate`).
    #[arg(long)]
    pub remote_url: Option<String>,
    /// Language of the target vocabulary.
    #[arg(long, default_value = "da")]
    pub from_lang: String,
    /// Language of the source model.
    #[arg(long, default_value = "en")]
    pub to_lang: String,
    #[arg(long, env = "WARMSTART_API_KEY", hide_env_values = true)]
    pub api_key: Option<String>,
    #[arg(long, default_value_t = 64)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 3)]
    pub max_retries: u32,
    #[arg(long, default_value_t = 1)]
    pub max_in_flight: usize,
    #[command(flatten)]
    pub specials: SpecialArgs,
}

#[derive(Debug, Args)]
pub struct PrepareArgs {
    #[arg(long)]
    pub vocab: PathBuf,
    /// Directory searched recursively for `.txt` files.
    #[arg(long = "in", value_name = "DIR")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 512)]
    pub seq_len: usize,
    /// Shorter document tails are dropped.
    #[arg(long, default_value_t = 16)]
    pub min_tail: usize,
    /// Skip writing the `.idx` side index.
    #[arg(long)]
    pub no_index: bool,
    #[command(flatten)]
    pub specials: SpecialArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Span,
    Iid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BatchFormat {
    Text,
    Binary,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long)]
    pub store: PathBuf,
    #[arg(long)]
    pub vocab: PathBuf,
    #[arg(long, env = "WARMSTART_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0)]
    pub epoch: u64,
    #[arg(long, value_enum, default_value = "span")]
    pub mode: ModeArg,
    #[arg(long, default_value_t = 0.15)]
    pub rate: f64,
    #[arg(long, default_value_t = 3.0)]
    pub mean_span: f64,
    #[arg(long, default_value_t = 16)]
    pub micro_batch: usize,
    #[arg(long, default_value_t = 128)]
    pub effective_batch: usize,
    /// Sort by length within each optimizer step.
    #[arg(long)]
    pub sort_by_length: bool,
    /// Output path; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "text")]
    pub format: BatchFormat,
    /// Per-batch statistics; stderr when omitted.
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[command(flatten)]
    pub specials: SpecialArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ShapeArg {
    Linear,
    InverseSqrt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Emit {
    Csv,
}

#[derive(Debug, Args)]
pub struct LrArgs {
    #[arg(long, default_value_t = 4e-3)]
    pub peak: f64,
    #[arg(long, default_value_t = 5000)]
    pub warmup: u64,
    /// Total optimizer steps. Without it the total is derived from
    /// --store, --epochs and --effective-batch.
    #[arg(long)]
    pub total: Option<u64>,
    #[arg(long)]
    pub store: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    pub epochs: u64,
    #[arg(long, default_value_t = 128)]
    pub effective_batch: u64,
    #[arg(long, value_enum, default_value = "linear")]
    pub shape: ShapeArg,
    #[arg(long, value_enum, default_value = "csv")]
    pub emit: Emit,
    /// Emit every n-th step (the last step is always emitted).
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub every: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PrecisionArg {
    Fp32,
    Fp16,
    Bf16,
}

#[derive(Debug, Args)]
pub struct MemplanArgs {
    /// Parameter count; accepts K, M, B suffixes (e.g. 770M).
    #[arg(long, value_parser = parse_count)]
    pub params: u64,
    #[arg(long, value_enum, default_value = "fp32")]
    pub precision: PrecisionArg,
    /// Keep optimizer state in CPU memory.
    #[arg(long)]
    pub offload: bool,
    #[arg(long, default_value_t = 1)]
    pub gpus: u32,
    /// Memory per GPU in decimal GB.
    #[arg(long, default_value = "40", value_parser = parse_gb)]
    pub gpu_mem: u64,
    /// System RAM in decimal GB.
    #[arg(long, default_value = "512", value_parser = parse_gb)]
    pub ram: u64,
    /// GPUs are bridged in pairs.
    #[arg(long)]
    pub nvlink: bool,
    #[arg(long, default_value_t = 4)]
    pub pcie_gen: u8,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long)]
    pub store: PathBuf,
    /// Histogram bucket width in tokens.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub bin_width: u64,
}

fn parse_rate(s: &str) -> Result<f64, String> {
    let n = s.trim().strip_suffix("/s").unwrap_or(s.trim());
    match n.parse::<f64>() {
        Ok(r) if r >= 0.0 && r.is_finite() => Ok(r),
        _ => Err(format!("expected a non-negative rate like 5 or 5/s, got {s:?}")),
    }
}

fn parse_count(s: &str) -> Result<u64, String> {
    let s = s.trim().replace('_', "");
    let (digits, scale) = match s.chars().last() {
        Some('K' | 'k') => (&s[..s.len() - 1], 1e3),
        Some('M' | 'm') => (&s[..s.len() - 1], 1e6),
        Some('B' | 'b' | 'G' | 'g') => (&s[..s.len() - 1], 1e9),
        _ => (&s[..], 1.0),
    };
    if scale == 1.0 {
        return match digits.parse::<u64>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(format!("expected a positive count, got {s:?}")),
        };
    }
    match digits.parse::<f64>() {
        Ok(x) if x > 0.0 && (x * scale).fract() == 0.0 && x * scale < u64::MAX as f64 => Ok((x * scale) as u64),
        _ => Err(format!("expected a positive whole count, got {s:?}")),
    }
}

fn parse_gb(s: &str) -> Result<u64, String> {
    match s.trim().parse::<f64>() {
        Ok(x) if x >= 0.0 && x.is_finite() => Ok((x * 1e9).round() as u64),
        _ => Err(format!("expected a size in GB, got {s:?}")),
    }
}
