//! Command line front end: verify single claims, run dataset batches,
//! recompute metrics from saved reports, and probe provider connectivity.
//!
//! Exit codes are a stable contract: 0 success, 2 runtime failure, 64 usage
//! error. Settings resolve as flags over config file over built-in defaults.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use aletheia_core::claim::{Claim, ImageRef};
use aletheia_core::evaluate::DomainList;
use aletheia_core::harness::{
    compute_metrics, load_dataset, render_metrics_table, run_batch, DatasetRecord, MetricsSummary,
};
use aletheia_core::label::LabelMap;
use aletheia_core::pipeline::{run_claim, PipelineConfig, RunMode};
use aletheia_core::prompts::PromptSet;
use aletheia_core::providers::cassette::Cassette;
use aletheia_core::providers::http::{
    HttpChat, HttpEmbed, HttpFetcher, HttpImageSearch, HttpProviderConfig, HttpTextSearch,
    DEFAULT_MAX_BODY_BYTES, DEFAULT_TIMEOUT,
};
use aletheia_core::providers::replay::{Recorder, ReplayProviders};
use aletheia_core::providers::{
    ChatMessage, ChatRequest, ProviderSet, Role,
};
use aletheia_core::verify::VerificationReport;

const EXIT_RUNTIME: u8 = 2;
const EXIT_USAGE: u8 = 64;

/// Failures split by who has to fix them: usage errors are the caller's
/// command line or config, runtime errors happened while doing the work.
#[derive(Debug)]
enum CliError {
    Usage(String),
    Runtime(anyhow::Error),
}

impl From<aletheia_core::Error> for CliError {
    fn from(e: aletheia_core::Error) -> Self {
        CliError::Runtime(e.into())
    }
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Runtime(e)
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

#[derive(Debug, Parser)]
#[command(name = "aletheia", version, about = "Evidence-based claim verification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Verify one claim and print its report as JSON on standard output.
    Verify(VerifyArgs),
    /// Verify a JSONL dataset and write reports.jsonl plus metrics.json.
    Batch(BatchArgs),
    /// Recompute metrics from previously written reports.
    Eval(EvalArgs),
    /// Provider utilities.
    Providers(ProvidersCmd),
}

/// Settings shared by every subcommand. Each flag overrides the matching
/// config-file field, which in turn overrides the built-in default.
#[derive(Debug, Clone, Default, Args)]
struct CommonArgs {
    /// JSON config file; flags override its values.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Quality weight on relevance versus integrity, in [0, 1].
    #[arg(long)]
    alpha: Option<f64>,
    /// Minimum credibility an evidence source must reach, in [0, 1].
    #[arg(long, value_name = "T")]
    credibility_threshold: Option<f64>,
    /// Number of ranked evidence items uploaded for verification.
    #[arg(long, value_name = "K")]
    top_k: Option<usize>,
    /// Comma-separated domain suffixes scored zero outright.
    #[arg(long, value_delimiter = ',', value_name = "DOMAINS")]
    blacklist: Option<Vec<String>>,
    /// Comma-separated domain suffixes given the trusted-source bonus.
    #[arg(long, value_delimiter = ',', value_name = "DOMAINS")]
    allowlist: Option<Vec<String>>,
    /// Cap on sub-claims taken from the interpreter.
    #[arg(long, value_name = "N")]
    max_subclaims: Option<usize>,
    /// Search results requested per query.
    #[arg(long, value_name = "N")]
    per_query_limit: Option<usize>,
    /// Page text cap (characters) fed to extraction.
    #[arg(long, value_name = "N")]
    max_extract_chars: Option<usize>,
    /// Concurrent text-search calls.
    #[arg(long, value_name = "N")]
    search_parallelism: Option<usize>,
    /// Concurrent page extractions.
    #[arg(long, value_name = "N")]
    extract_parallelism: Option<usize>,
    /// Concurrent claims in a batch.
    #[arg(long, value_name = "N")]
    claim_parallelism: Option<usize>,
    /// Run mode: full, no_interpret, random_evidence, or direct.
    #[arg(long, value_name = "MODE")]
    mode: Option<String>,
    /// Root seed for the random-evidence ablation.
    #[arg(long)]
    seed: Option<u64>,
    /// Replay all provider traffic from this cassette (no network).
    #[arg(long, value_name = "CASSETTE", conflicts_with = "record")]
    replay: Option<PathBuf>,
    /// Record live provider traffic into this cassette.
    #[arg(long, value_name = "CASSETTE")]
    record: Option<PathBuf>,
    /// Label vocabulary JSON file (true_labels / false_labels arrays).
    #[arg(long, value_name = "PATH")]
    labels: Option<PathBuf>,
    /// Verbose tracing on standard error.
    #[arg(long)]
    trace: bool,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Claim text to verify.
    #[arg(long, value_name = "TEXT", conflicts_with = "claim_file")]
    claim_text: Option<String>,
    /// Image URL or local path forming the claim's visual half.
    #[arg(long, value_name = "IMAGE", conflicts_with = "claim_file")]
    image: Option<String>,
    /// JSON file holding the claim object.
    #[arg(long, value_name = "PATH")]
    claim_file: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BatchArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// JSONL dataset: one {id, text, image?, label} object per line.
    #[arg(long, value_name = "PATH")]
    dataset: PathBuf,
    /// Output directory for reports.jsonl and metrics.json.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// reports.jsonl produced by a batch run.
    #[arg(long, value_name = "PATH")]
    reports: PathBuf,
    /// The dataset those reports were produced from.
    #[arg(long, value_name = "PATH")]
    dataset: PathBuf,
    /// Optional path to write metrics.json.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ProvidersCmd {
    #[command(subcommand)]
    action: ProvidersAction,
}

#[derive(Debug, Subcommand)]
enum ProvidersAction {
    /// Probe each configured provider with a minimal request.
    Check(CheckArgs),
}

#[derive(Debug, Args)]
struct CheckArgs {
    #[command(flatten)]
    common: CommonArgs,
}

/// Live endpoint locations. Credentials never appear here: the API key for
/// e.g. the chat endpoint is read from ALETHEIA_CHAT_KEY at startup.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
struct ProviderEndpoints {
    chat_url: Option<String>,
    embed_url: Option<String>,
    text_search_url: Option<String>,
    image_search_url: Option<String>,
    /// Request timeout in seconds.
    timeout_secs: Option<u64>,
    /// Fetched page size cap in bytes.
    max_body_bytes: Option<usize>,
}

/// The single declarative config document. Pipeline fields sit at the top
/// level so one file describes a whole reproducible run.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
struct AppConfig {
    #[serde(flatten)]
    pipeline: PipelineConfig,
    mode: RunMode,
    trace: bool,
    replay: Option<PathBuf>,
    record: Option<PathBuf>,
    labels: Option<PathBuf>,
    providers: ProviderEndpoints,
}

/// Defaults, then config file, then flags; strictly in that order.
fn effective_config(common: &CommonArgs) -> Result<AppConfig, CliError> {
    let mut cfg = match &common.config {
        Some(path) => {
            let raw = std::fs::read_to_string(path)
                .map_err(|e| usage(format!("config {}: {e}", path.display())))?;
            serde_json::from_str::<AppConfig>(&raw)
                .map_err(|e| usage(format!("config {}: {e}", path.display())))?
        }
        None => AppConfig::default(),
    };

    let ev = &mut cfg.pipeline.evaluator;
    if let Some(v) = common.alpha {
        ev.alpha = v;
    }
    if let Some(v) = common.credibility_threshold {
        ev.credibility_threshold = v;
    }
    if let Some(v) = common.top_k {
        ev.top_k = v;
    }
    if let Some(v) = &common.blacklist {
        ev.blacklist = DomainList::new(v.clone());
    }
    if let Some(v) = &common.allowlist {
        ev.allowlist = DomainList::new(v.clone());
    }
    if let Some(v) = common.max_subclaims {
        cfg.pipeline.max_subclaims = v;
    }
    if let Some(v) = common.per_query_limit {
        cfg.pipeline.per_query_limit = v;
    }
    if let Some(v) = common.max_extract_chars {
        cfg.pipeline.max_extract_chars = v;
    }
    if let Some(v) = common.search_parallelism {
        cfg.pipeline.search_parallelism = v;
    }
    if let Some(v) = common.extract_parallelism {
        cfg.pipeline.extract_parallelism = v;
    }
    if let Some(v) = common.claim_parallelism {
        cfg.pipeline.claim_parallelism = v;
    }
    if let Some(v) = &common.mode {
        cfg.mode = v.parse().map_err(|e| usage(format!("{e}")))?;
    }
    if let Some(v) = common.seed {
        cfg.pipeline.seed = v;
    }
    if let Some(v) = &common.replay {
        cfg.replay = Some(v.clone());
    }
    if let Some(v) = &common.record {
        cfg.record = Some(v.clone());
    }
    if let Some(v) = &common.labels {
        cfg.labels = Some(v.clone());
    }
    if common.trace {
        cfg.trace = true;
    }

    if cfg.replay.is_some() && cfg.record.is_some() {
        return Err(usage("replay and record are mutually exclusive"));
    }
    cfg.pipeline
        .validate()
        .map_err(|e| usage(e.to_string()))?;
    Ok(cfg)
}

fn init_tracing(trace: bool) {
    let default = if trace { "debug" } else { "warn" };
    let filter = tracing_subscriber::EnvFilter::try_from_default_env()
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new(default));
    // A second init (only possible in tests) is harmless; ignore it.
    let _ = tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .try_init();
}

fn load_labels(cfg: &AppConfig) -> Result<LabelMap, CliError> {
    match &cfg.labels {
        Some(path) => LabelMap::from_file(path).map_err(|e| usage(e.to_string())),
        None => Ok(LabelMap::default()),
    }
}

/// Bearer token for one endpoint, from the environment only.
fn api_key_from_env(name: &str) -> Option<String> {
    std::env::var(format!("ALETHEIA_{}_KEY", name.to_uppercase())).ok()
}

fn endpoint_config(
    name: &str,
    url: &Option<String>,
    timeout: Duration,
) -> Result<HttpProviderConfig, CliError> {
    let url = url.clone().ok_or_else(|| {
        CliError::Runtime(anyhow!(
            "no {name} endpoint configured; set providers.{name}_url in the config file or run with --replay"
        ))
    })?;
    let mut cfg = HttpProviderConfig::new(url).with_timeout(timeout);
    if let Some(key) = api_key_from_env(name) {
        cfg = cfg.with_api_key(key);
    }
    Ok(cfg)
}

fn live_providers(endpoints: &ProviderEndpoints) -> Result<ProviderSet, CliError> {
    let timeout = endpoints
        .timeout_secs
        .map(Duration::from_secs)
        .unwrap_or(DEFAULT_TIMEOUT);
    let max_body = endpoints.max_body_bytes.unwrap_or(DEFAULT_MAX_BODY_BYTES);
    Ok(ProviderSet {
        chat: Arc::new(
            HttpChat::new(endpoint_config("chat", &endpoints.chat_url, timeout)?)
                .map_err(|e| CliError::Runtime(e.into()))?,
        ),
        embed: Arc::new(
            HttpEmbed::new(endpoint_config("embed", &endpoints.embed_url, timeout)?)
                .map_err(|e| CliError::Runtime(e.into()))?,
        ),
        text_search: Arc::new(
            HttpTextSearch::new(endpoint_config(
                "text_search",
                &endpoints.text_search_url,
                timeout,
            )?)
            .map_err(|e| CliError::Runtime(e.into()))?,
        ),
        image_search: Arc::new(
            HttpImageSearch::new(endpoint_config(
                "image_search",
                &endpoints.image_search_url,
                timeout,
            )?)
            .map_err(|e| CliError::Runtime(e.into()))?,
        ),
        fetcher: Arc::new(
            HttpFetcher::new(timeout, max_body).map_err(|e| CliError::Runtime(e.into()))?,
        ),
    })
}

/// Wire the provider set for this run: replay, record-wrapped live, or live.
fn build_providers(cfg: &AppConfig) -> Result<(ProviderSet, Option<Arc<Recorder>>), CliError> {
    if let Some(path) = &cfg.replay {
        let set = ReplayProviders::from_path(path)?.provider_set();
        return Ok((set, None));
    }
    let live = live_providers(&cfg.providers)?;
    match &cfg.record {
        Some(path) => {
            let recorder = Recorder::with_path(live, path.clone());
            Ok((recorder.provider_set(), Some(recorder)))
        }
        None => Ok((live, None)),
    }
}

fn read_claim_file(path: &Path) -> Result<Claim, CliError> {
    let raw = std::fs::read_to_string(path)
        .map_err(|e| usage(format!("claim file {}: {e}", path.display())))?;
    serde_json::from_str(&raw).map_err(|e| usage(format!("claim file {}: {e}", path.display())))
}

fn pretty_line<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut out = serde_json::to_string_pretty(value)
        .context("serializing output")
        .map_err(CliError::Runtime)?;
    out.push('\n');
    Ok(out)
}

async fn cmd_verify(args: VerifyArgs) -> Result<(), CliError> {
    let cfg = effective_config(&args.common)?;
    init_tracing(cfg.trace);

    let claim = match (&args.claim_file, &args.claim_text, &args.image) {
        (Some(path), _, _) => read_claim_file(path)?,
        (None, None, None) => {
            return Err(usage(
                "nothing to verify: provide --claim-text and/or --image, or --claim-file",
            ));
        }
        (None, text, image) => Claim {
            id: "cli".into(),
            text: text.clone().unwrap_or_default(),
            image: image.clone().map(ImageRef::from),
            gold_label: None,
            published_at: None,
        },
    };

    let labels = load_labels(&cfg)?;
    let (providers, recorder) = build_providers(&cfg)?;
    let report = run_claim(
        &providers,
        &PromptSet::default(),
        &labels,
        &cfg.pipeline,
        &claim,
        cfg.mode,
    )
    .await?;
    if let Some(recorder) = recorder {
        recorder.save()?;
    }
    print!("{}", pretty_line(&report)?);
    Ok(())
}

fn write_reports_jsonl(path: &Path, reports: &[VerificationReport]) -> Result<(), CliError> {
    let mut out = String::new();
    for report in reports {
        out.push_str(
            &serde_json::to_string(report)
                .context("serializing report")
                .map_err(CliError::Runtime)?,
        );
        out.push('\n');
    }
    std::fs::write(path, out)
        .with_context(|| format!("writing {}", path.display()))
        .map_err(CliError::Runtime)
}

async fn cmd_batch(args: BatchArgs) -> Result<(), CliError> {
    let cfg = effective_config(&args.common)?;
    init_tracing(cfg.trace);

    let labels = load_labels(&cfg)?;
    let records = load_dataset(&args.dataset, &labels)?;
    let (providers, recorder) = build_providers(&cfg)?;
    let reports = run_batch(
        &providers,
        &PromptSet::default(),
        &labels,
        &cfg.pipeline,
        &records,
        cfg.mode,
    )
    .await;
    if let Some(recorder) = recorder {
        recorder.save()?;
    }
    let metrics = compute_metrics(&reports, &records)?;

    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))
        .map_err(CliError::Runtime)?;
    write_reports_jsonl(&args.out.join("reports.jsonl"), &reports)?;
    std::fs::write(args.out.join("metrics.json"), pretty_line(&metrics)?)
        .context("writing metrics.json")
        .map_err(CliError::Runtime)?;
    print!("{}", render_metrics_table(&metrics));
    Ok(())
}

fn read_reports_jsonl(path: &Path) -> Result<Vec<VerificationReport>, CliError> {
    let raw = std::fs::read_to_string(path)
        .map_err(|e| usage(format!("reports {}: {e}", path.display())))?;
    let mut reports = Vec::new();
    for (i, line) in raw.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        reports.push(serde_json::from_str(line).map_err(|e| {
            CliError::Runtime(anyhow!("reports {} line {}: {e}", path.display(), i + 1))
        })?);
    }
    Ok(reports)
}

async fn cmd_eval(args: EvalArgs) -> Result<(), CliError> {
    let cfg = effective_config(&args.common)?;
    init_tracing(cfg.trace);

    let labels = load_labels(&cfg)?;
    let reports = read_reports_jsonl(&args.reports)?;
    let records: Vec<DatasetRecord> = load_dataset(&args.dataset, &labels)?;
    let metrics: MetricsSummary = compute_metrics(&reports, &records)?;
    if let Some(out) = &args.out {
        std::fs::write(out, pretty_line(&metrics)?)
            .with_context(|| format!("writing {}", out.display()))
            .map_err(CliError::Runtime)?;
    }
    print!("{}", render_metrics_table(&metrics));
    Ok(())
}

/// One probe per configured provider; unconfigured providers are reported
/// but do not fail the check.
async fn cmd_providers_check(args: CheckArgs) -> Result<(), CliError> {
    let cfg = effective_config(&args.common)?;
    init_tracing(cfg.trace);

    if let Some(path) = &cfg.replay {
        let cassette = Cassette::load(path)?;
        let mut counts = std::collections::BTreeMap::new();
        for record in cassette.entries.values() {
            *counts.entry(record.provider.clone()).or_insert(0usize) += 1;
        }
        println!("replay cassette {} ({} entries)", path.display(), cassette.len());
        for (provider, count) in counts {
            println!("{provider}: {count} recorded call(s)");
        }
        return Ok(());
    }

    let endpoints = &cfg.providers;
    let timeout = endpoints
        .timeout_secs
        .map(Duration::from_secs)
        .unwrap_or(DEFAULT_TIMEOUT);
    let mut failures = 0usize;
    let mut report = |name: &str, outcome: Option<Result<Duration, aletheia_core::Error>>| {
        match outcome {
            None => println!("{name}: not configured"),
            Some(Ok(latency)) => println!("{name}: ok ({} ms)", latency.as_millis()),
            Some(Err(e)) => {
                failures += 1;
                println!("{name}: FAILED — {e}");
            }
        }
    };

    match &endpoints.chat_url {
        None => report("chat", None),
        Some(url) => {
            let cfg = endpoint_config("chat", &Some(url.clone()), timeout)?;
            let probe = ChatRequest::new(vec![ChatMessage::text(Role::User, "connectivity probe; reply with one word")]);
            let outcome = match HttpChat::new(cfg) {
                Ok(chat) => {
                    use aletheia_core::providers::ChatProvider;
                    chat.chat(&probe).await.map(|(_, meta)| meta.latency)
                }
                Err(e) => Err(e),
            };
            report("chat", Some(outcome));
        }
    }
    match &endpoints.embed_url {
        None => report("embed", None),
        Some(url) => {
            let cfg = endpoint_config("embed", &Some(url.clone()), timeout)?;
            let outcome = match HttpEmbed::new(cfg) {
                Ok(embed) => {
                    use aletheia_core::providers::EmbeddingProvider;
                    embed
                        .embed(&["connectivity probe".to_string()])
                        .await
                        .map(|(_, meta)| meta.latency)
                }
                Err(e) => Err(e),
            };
            report("embed", Some(outcome));
        }
    }
    match &endpoints.text_search_url {
        None => report("text_search", None),
        Some(url) => {
            let cfg = endpoint_config("text_search", &Some(url.clone()), timeout)?;
            let outcome = match HttpTextSearch::new(cfg) {
                Ok(search) => {
                    use aletheia_core::providers::TextSearchProvider;
                    search
                        .search_text("connectivity probe", 1)
                        .await
                        .map(|(_, meta)| meta.latency)
                }
                Err(e) => Err(e),
            };
            report("text_search", Some(outcome));
        }
    }
    match &endpoints.image_search_url {
        None => report("image_search", None),
        Some(url) => {
            let cfg = endpoint_config("image_search", &Some(url.clone()), timeout)?;
            let outcome = match HttpImageSearch::new(cfg) {
                Ok(search) => {
                    use aletheia_core::providers::ImageSearchProvider;
                    search
                        .search_image("https://example.com/probe.jpg", 1)
                        .await
                        .map(|(_, meta)| meta.latency)
                }
                Err(e) => Err(e),
            };
            report("image_search", Some(outcome));
        }
    }

    if failures > 0 {
        return Err(CliError::Runtime(anyhow!("{failures} provider(s) failed the probe")));
    }
    Ok(())
}

async fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Verify(args) => cmd_verify(args).await,
        Command::Batch(args) => cmd_batch(args).await,
        Command::Eval(args) => cmd_eval(args).await,
        Command::Providers(cmd) => match cmd.action {
            ProvidersAction::Check(args) => cmd_providers_check(args).await,
        },
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };

    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .expect("tokio runtime");
    match runtime.block_on(dispatch(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(CliError::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}
