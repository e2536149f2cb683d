//! `ineqcomp`: generate, emit, check and evaluate inequality benchmarks.

mod cmd;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Exit status 1: the inputs were understood but the run failed (violations,
/// exhausted generation, unreadable or malformed data).
/// Exit status 2: bad flags, bad config, missing toolchain.
#[derive(Debug)]
pub enum Failure {
    Domain(anyhow::Error),
    Usage(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Domain(_) => 1,
            Failure::Usage(_) => 2,
        }
    }
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Domain(e.into())
    }
}

pub type Outcome = Result<(), Failure>;

pub fn usage(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Usage(e.into())
}

#[derive(Parser, Debug)]
#[command(name = "ineqcomp", version, about = "Compositional inequality benchmarks: generate, emit, check, evaluate")]
struct Cli {
    /// TOML file; its values sit under the flags.
    #[arg(long, global = true, env = "INEQCOMP_CONFIG")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Type I and Type II variants of every seed.
    ExpandSimp(ExpandSimp),
    /// Random problems from the rule calculus.
    GenerateMix(GenerateMix),
    /// Two-stage fine-tuning corpus and in-context generation tasks.
    MakeFtCorpus(MakeFtCorpus),
    /// Lean files and prompt files for a corpus.
    Emit(Emit),
    /// Numeric oracle over a corpus; exit 1 on any violation.
    Check(Check),
    /// Verify attempts and report pass@k.
    Eval(Eval),
    /// Corpus summary.
    Stats(Stats),
}

#[derive(Args, Debug, Clone)]
pub struct Source {
    /// Corpus JSONL. Defaults to the bundled seeds.
    #[arg(long, short)]
    pub input: Option<PathBuf>,
    /// A bundled corpus instead of a file: seeds, mutations, exclusions.
    #[arg(long, conflicts_with = "input")]
    pub bundled: Option<String>,
    /// Keep only eligible records and list the rest on stderr.
    #[arg(long)]
    pub filter: bool,
}

#[derive(Args, Debug)]
pub struct ExpandSimp {
    #[command(flatten)]
    pub source: Source,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Defaults to OUTPUT with a `.manifest.json` extension.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct GenerateMix {
    #[command(flatten)]
    pub source: Source,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(long)]
    pub depth: Option<usize>,
    /// Comma list of composition, variable-level, problem-level, typeI, typeII, or `all`.
    #[arg(long)]
    pub families: Option<String>,
    /// `composition-only`: one composition per problem, depth 1.
    #[arg(long)]
    pub preset: Option<String>,
    /// `fixed:M,L` or `uniform:LO..=HI`.
    #[arg(long)]
    pub weights: Option<String>,
    #[arg(long)]
    pub no_dedup: bool,
}

#[derive(Args, Debug)]
pub struct MakeFtCorpus {
    #[command(flatten)]
    pub source: Source,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Stage-two size.
    #[arg(long)]
    pub count: Option<usize>,
    /// Seeds of this category train, the rest are held out.
    #[arg(long)]
    pub train_category: Option<String>,
    /// JSON `{"train": [...], "held_out": [...]}`.
    #[arg(long, conflicts_with = "train_category")]
    pub split: Option<PathBuf>,
    /// JSON object from problem id to verified Lean proof.
    #[arg(long)]
    pub proofs: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct Emit {
    #[command(flatten)]
    pub source: Source,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// per-variable or conjunction.
    #[arg(long)]
    pub style: Option<String>,
    /// ASCII operators instead of Unicode.
    #[arg(long)]
    pub ascii: bool,
    /// Also write `<name>.prompt.txt` with this template.
    #[arg(long)]
    pub template: Option<String>,
    /// JSON object from problem id to a list of in-context proofs.
    #[arg(long)]
    pub icl_proofs: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct Check {
    #[command(flatten)]
    pub source: Source,
    /// Samples per problem.
    #[arg(long, short)]
    pub n: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Per-problem reports as JSONL.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct Eval {
    /// `LABEL=PATH`, repeatable. Labels seed, type1, type2, mix print as in the table.
    #[arg(long = "corpus", value_name = "LABEL=PATH")]
    pub corpora: Vec<String>,
    /// Attempts JSONL. With an adapter it is written (or extended on resume).
    #[arg(long)]
    pub attempts: Option<PathBuf>,
    /// Budgets, comma separated.
    #[arg(long)]
    pub k: Option<String>,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub journal: Option<PathBuf>,
    /// Keep journal entries instead of starting over.
    #[arg(long)]
    pub resume: bool,
    #[arg(long)]
    pub resamples: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Lean binary; also INEQCOMP_LEAN.
    #[arg(long)]
    pub toolchain: Option<PathBuf>,
    /// Lake project to compile inside; also INEQCOMP_LEAN_PROJECT.
    #[arg(long)]
    pub lean_project: Option<PathBuf>,
    #[arg(long)]
    pub mathlib_rev: Option<String>,
    /// Seconds per compile.
    #[arg(long)]
    pub timeout: Option<u64>,
    /// proof or statement.
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub style: Option<String>,
    /// Records JSONL.
    #[arg(long)]
    pub records: Option<PathBuf>,
    /// Report JSON.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Prover command line, split on whitespace; the prompt arrives on stdin.
    #[arg(long, conflicts_with = "endpoint")]
    pub adapter_command: Option<String>,
    /// OpenAI-compatible endpoint URL.
    #[arg(long)]
    pub endpoint: Option<String>,
    #[arg(long)]
    pub model: Option<String>,
    /// completions or chat.
    #[arg(long)]
    pub http_style: Option<String>,
    #[arg(long)]
    pub api_key_env: Option<String>,
    #[arg(long)]
    pub template: Option<String>,
    #[arg(long)]
    pub temperature: Option<f64>,
    #[arg(long)]
    pub max_tokens: Option<u32>,
    /// Attempts per problem requested from the adapter.
    #[arg(long)]
    pub samples: Option<usize>,
}

#[derive(Args, Debug)]
pub struct Stats {
    #[command(flatten)]
    pub source: Source,
    #[arg(long)]
    pub json: bool,
}

fn run(cli: Cli) -> Outcome {
    let name = match &cli.command {
        Command::ExpandSimp(_) => "expand-simp",
        Command::GenerateMix(_) => "generate-mix",
        Command::MakeFtCorpus(_) => "make-ft-corpus",
        Command::Emit(_) => "emit",
        Command::Check(_) => "check",
        Command::Eval(_) => "eval",
        Command::Stats(_) => "stats",
    };
    let cfg = config::Config::load(cli.config.as_deref(), name).map_err(usage)?;
    match cli.command {
        Command::ExpandSimp(a) => cmd::expand_simp(a, &cfg),
        Command::GenerateMix(a) => cmd::generate_mix(a, &cfg),
        Command::MakeFtCorpus(a) => cmd::make_ft_corpus(a, &cfg),
        Command::Emit(a) => cmd::emit(a, &cfg),
        Command::Check(a) => cmd::check(a, &cfg),
        Command::Eval(a) => cmd::eval(a, &cfg),
        Command::Stats(a) => cmd::stats(a, &cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (Failure::Domain(e) | Failure::Usage(e)) = &f;
            eprintln!("error: {e:#}");
            ExitCode::from(f.code())
        }
    }
}
