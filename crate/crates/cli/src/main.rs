use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde_json::json;
use token_shapley::corpus::{build_datastore, build_records, load_datastore, save_datastore, tokenize, TokenSeq};
use token_shapley::embedding::{EmbeddingProvider, ProviderSpec, EMBED_URL_ENV};
use token_shapley::eval::{emit_report, evaluate_dataset, gen_kv, load_jsonl, write_jsonl, Report, ReportFormat};
use token_shapley::pipeline::{
    attribute_response, rank_sources, sentence_spans_from_store, AttributionParams, AttributionQuery,
};
use token_shapley::retrieval::{DEFAULT_GAMMA, DEFAULT_M};
use token_shapley::shapley::DEFAULT_WEIGHT_BITS;

#[derive(Parser)]
#[command(name = "tokshap", version, about = "Token-level Shapley attribution of a response to its context")]
struct Cli {
    /// Worker threads for the attribution pipeline (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tokenize a context file and write its prefix datastore.
    BuildStore {
        #[arg(long)]
        context: PathBuf,
        #[arg(long)]
        provider: Option<ProviderSpec>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Attribute response tokens to the context behind a datastore.
    Attribute(AttributeArgs),
    /// Run the pipeline over a JSONL dataset and report top-k metrics.
    Eval {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        provider: Option<ProviderSpec>,
        #[command(flatten)]
        run: RunArgs,
        /// Spans kept per example for precision/recall.
        #[arg(long, default_value_t = 1)]
        top: usize,
        /// Also write the summary as JSON here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate synthetic key-value retrieval examples.
    GenKv {
        #[arg(long, default_value_t = 50)]
        pairs: usize,
        #[arg(long, default_value_t = 1)]
        count: u64,
        /// Example `j` uses seed `seed + j`.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long = "k", short = 'K', default_value_t = 1)]
    k: usize,
    #[arg(long = "m", short = 'M', default_value_t = DEFAULT_M)]
    m: usize,
    #[arg(long, default_value_t = DEFAULT_GAMMA)]
    gamma: f64,
    #[arg(long, default_value_t = DEFAULT_WEIGHT_BITS)]
    weight_bits: u32,
}

#[derive(Args)]
struct AttributeArgs {
    #[arg(long)]
    store: PathBuf,
    /// File holding the query text.
    #[arg(long)]
    query: PathBuf,
    /// File holding the response text.
    #[arg(long)]
    response: PathBuf,
    /// Original context file; needed for faithful HTML rendering.
    #[arg(long)]
    context: Option<PathBuf>,
    /// Comma-separated 1-based response token indices (default: all).
    #[arg(long, value_delimiter = ',')]
    targets: Option<Vec<usize>>,
    /// Defaults to the provider recorded in the store.
    #[arg(long)]
    provider: Option<ProviderSpec>,
    #[command(flatten)]
    run: RunArgs,
    /// Number of ranked spans to report (default: all).
    #[arg(long)]
    top: Option<usize>,
    #[arg(long, default_value = "json")]
    format: ReportFormat,
    #[arg(long)]
    out: PathBuf,
    /// Omit the timestamp so identical runs give identical bytes.
    #[arg(long)]
    no_timestamp: bool,
}

/// Failure with the exit code it maps to.
enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<token_shapley::Error> for Failure {
    fn from(e: token_shapley::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

type CliResult<T = ()> = Result<T, Failure>;

impl RunArgs {
    fn params(&self) -> CliResult<AttributionParams> {
        if self.k == 0 || self.m == 0 {
            return Err(Failure::Usage("K and M must be positive".into()));
        }
        if self.k > self.m {
            return Err(Failure::Usage(format!("K ({}) must not exceed M ({})", self.k, self.m)));
        }
        if self.k == self.m {
            eprintln!("warning: K = M = {}; every retrieved candidate is in the vote", self.k);
        }
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(Failure::Usage(format!("gamma must be positive, got {}", self.gamma)));
        }
        let params = AttributionParams { k: self.k, m: self.m, gamma: self.gamma, weight_bits: self.weight_bits };
        params.validate().map_err(|e| Failure::Usage(e.to_string()))?;
        Ok(params)
    }
}

fn default_provider() -> ProviderSpec {
    if std::env::var_os(EMBED_URL_ENV).is_some() {
        ProviderSpec::Http { url: None }
    } else {
        ProviderSpec::Hash { dim: 256 }
    }
}

fn open_provider(spec: Option<ProviderSpec>) -> CliResult<Box<dyn EmbeddingProvider>> {
    Ok(spec.unwrap_or_else(default_provider).open()?)
}

fn at(path: &Path) -> impl Fn(token_shapley::Error) -> Failure + '_ {
    move |e| Failure::Runtime(format!("{}: {e}", path.display()))
}

fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

fn build_store(context: &Path, provider: Option<ProviderSpec>, out: &Path) -> CliResult {
    let provider = open_provider(provider)?;
    let seq = tokenize(&read_text(context)?);
    let store = build_datastore(&build_records(&seq), provider.as_ref())?;
    save_datastore(&store, out).map_err(at(out))?;
    println!("{} entries, {} sentences, dim {} -> {}", store.len(), store.sentence_count(), store.dim(), out.display());
    Ok(())
}

fn attribute(args: AttributeArgs) -> CliResult {
    let params = args.run.params()?;
    if args.top == Some(0) {
        return Err(Failure::Usage("--top must be positive".into()));
    }
    let store = load_datastore(&args.store).map_err(at(&args.store))?;
    // a store built from hash or file embeddings can be reopened from its id
    let spec = args.provider.or_else(|| store.provider_id().parse().ok().filter(|s| !matches!(s, ProviderSpec::Http { .. })));
    let provider = open_provider(spec)?;
    if provider.provider_id() != store.provider_id() {
        eprintln!("warning: store built with `{}`, querying with `{}`", store.provider_id(), provider.provider_id());
    }
    let context = match &args.context {
        Some(path) => {
            let seq = tokenize(&read_text(path)?);
            if seq.len() != store.len() {
                return Err(Failure::Runtime(format!(
                    "context has {} tokens but the store has {} entries",
                    seq.len(),
                    store.len()
                )));
            }
            seq
        }
        None => TokenSeq::from_surfaces(&store.entries().iter().map(|e| e.value_token.as_str()).collect::<Vec<_>>()),
    };
    let mut aq = AttributionQuery::new(read_text(&args.query)?, context, tokenize(&read_text(&args.response)?));
    if let Some(targets) = args.targets {
        aq = aq.with_targets(targets).map_err(|e| Failure::Usage(e.to_string()))?;
    }
    let matrix = attribute_response(&store, provider.as_ref(), &aq, &params)?;
    let spans = sentence_spans_from_store(&store);
    let rankings = rank_sources(&matrix, &spans, args.top.unwrap_or(spans.len()).max(1))?;
    let mut report = Report::new(&matrix, &rankings, json!({}));
    if !args.no_timestamp {
        report = report.with_timestamp(SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()));
    }
    emit_report(&report, &aq.context, &args.out, args.format).map_err(at(&args.out))?;
    if let Some(best) = rankings.first() {
        let top = &report.span_scores[0];
        println!("top sentence {} (tokens {}..{}) score {:.6}", top.span_id, top.span_start, top.span_end, best.score.score);
    }
    Ok(())
}

fn eval(data: &Path, provider: Option<ProviderSpec>, run: &RunArgs, top: usize, out: Option<&Path>) -> CliResult {
    let params = run.params()?;
    if top == 0 {
        return Err(Failure::Usage("--top must be positive".into()));
    }
    let provider = open_provider(provider)?;
    let examples = load_jsonl(data).map_err(at(data))?;
    let summary = evaluate_dataset(&examples, provider.as_ref(), &params, top)?;
    println!("examples {}", summary.n);
    println!("accuracy {:.3}", summary.accuracy);
    println!("precision@{top} {:.3}", summary.mean_precision);
    println!("recall@{top} {:.3}", summary.mean_recall);
    println!("f1@{top} {:.3}", summary.mean_f1);
    if let Some(out) = out {
        let body = json!({
            "params": {"K": params.k, "M": params.m, "gamma": params.gamma, "provider": provider.provider_id()},
            "examples": summary.n,
            "correct": summary.correct,
            "accuracy": summary.accuracy,
            "k": top,
            "precision": summary.mean_precision,
            "recall": summary.mean_recall,
            "f1": summary.mean_f1,
            "per_example": summary.outcomes.iter().map(|o| json!({
                "id": o.id, "predicted": o.predicted, "gold": o.gold, "correct": o.correct,
            })).collect::<Vec<_>>(),
        });
        fs::write(out, serde_json::to_string_pretty(&body).map_err(|e| Failure::Runtime(e.to_string()))?)?;
    }
    Ok(())
}

fn gen(pairs: usize, count: u64, seed: u64, out: &Path) -> CliResult {
    let examples = (0..count)
        .map(|j| gen_kv(pairs, seed.wrapping_add(j)))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| Failure::Usage(e.to_string()))?;
    write_jsonl(&examples, out).map_err(at(out))?;
    println!("{} examples -> {}", examples.len(), out.display());
    Ok(())
}

fn dispatch(cli: Cli) -> CliResult {
    match cli.command {
        Command::BuildStore { context, provider, out } => build_store(&context, provider, &out),
        Command::Attribute(args) => attribute(args),
        Command::Eval { data, provider, run, top, out } => eval(&data, provider, &run, top, out.as_deref()),
        Command::GenKv { pairs, count, seed, out } => gen(pairs, count, seed, &out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.threads {
        Some(0) => Err(Failure::Usage("--threads must be positive".into())),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| dispatch(cli)),
            Err(e) => Err(Failure::Runtime(e.to_string())),
        },
        None => dispatch(cli),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
