//! Command-line driver.
//!
//! Exit codes: 0 success, 1 error, 2 quality-gate failure or degraded trace
//! (a warning report is still written when possible), 3 insufficient upgrade
//! history.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use upgradescan::batch::run_batch;
use upgradescan::cache::{AstCache, CacheConfig};
use upgradescan::fetch::{ExplorerClient, OfflineFixtures, SourceProvider, API_KEY_ENV};
use upgradescan::history::{assemble_pair, HistoryError};
use upgradescan::pipeline::{run_analysis, AnalyzeOptions, AttribMode, ContractInput};
use upgradescan_core::diff::DiffParams;
use upgradescan_core::matching::MatchOptions;
use upgradescan_core::trace::{EventFilter, TraceError};

#[derive(Parser)]
#[command(
    name = "upgradescan",
    version,
    about = "Security analyzer for upgradeable proxy contract upgrades"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analyze two versions of a contract source file
    Analyze(AnalyzeArgs),
    /// Reconstruct a proxy's upgrade history and analyze the latest pair
    Trace(TraceArgs),
    /// Analyze every pair in a manifest with a worker pool
    Batch(BatchArgs),
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Write the JSON report here
    #[arg(long, value_name = "PATH")]
    report_out: Option<PathBuf>,
    /// Toggle the semantic matching dimension
    #[arg(long, value_name = "BOOL", default_value_t = true, action = clap::ArgAction::Set)]
    enhanced_matching: bool,
    /// Confidence retention threshold (strictly greater-than)
    #[arg(long, default_value_t = 0.6)]
    threshold: f64,
    /// Attribution backend
    #[arg(long, value_enum, default_value_t = AttribChoice::Off)]
    attrib: AttribChoice,
    /// Chat-completions endpoint for --attrib http
    #[arg(long, default_value = "https://api.openai.com/v1/chat/completions")]
    llm_endpoint: String,
    /// Model name for --attrib http
    #[arg(long, default_value = "gpt-4o-mini")]
    llm_model: String,
    /// AST cache directory (no caching when absent)
    #[arg(long, value_name = "DIR")]
    cache_dir: Option<PathBuf>,
    /// Cache entry cap before LRU eviction
    #[arg(long, default_value_t = 1024)]
    cache_max_entries: usize,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum AttribChoice {
    Off,
    Stub,
    Http,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Older version source (.sol; a sibling .ast.json is used when present)
    v1: PathBuf,
    /// Newer version source
    v2: PathBuf,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct TraceArgs {
    /// Proxy contract address
    proxy: String,
    /// Fixture directory holding <proxy>/history.json and implementation
    /// sources
    #[arg(long, value_name = "DIR")]
    fixtures: Option<PathBuf>,
    /// Explorer API base URL for online source fetching
    #[arg(long, value_name = "URL")]
    api_url: Option<String>,
    /// Analyze the adjacent pair starting at this history index instead of
    /// the latest pair
    #[arg(long)]
    at: Option<usize>,
    /// Additional upgrade event topic0 hashes to recognize
    #[arg(long, value_name = "HEX")]
    extra_topic: Vec<String>,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct BatchArgs {
    /// Manifest: JSON array of {"v1","v2"} or whitespace-separated path pairs
    manifest: PathBuf,
    /// Directory for per-pair reports and the summary
    #[arg(long, default_value = "reports")]
    out_dir: PathBuf,
    /// Worker threads
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[command(flatten)]
    common: CommonArgs,
}

fn analyze_options(common: &CommonArgs, pair_label: String) -> AnalyzeOptions {
    AnalyzeOptions {
        diff: DiffParams::default(),
        matching: MatchOptions {
            enhanced: common.enhanced_matching,
            threshold: common.threshold,
        },
        attrib: match common.attrib {
            AttribChoice::Off => AttribMode::Off,
            AttribChoice::Stub => AttribMode::Stub,
            AttribChoice::Http => AttribMode::Http {
                endpoint: common.llm_endpoint.clone(),
                model: common.llm_model.clone(),
            },
        },
        pair_label,
        proxy_address: None,
    }
}

fn open_cache(common: &CommonArgs) -> Result<Option<AstCache>> {
    match &common.cache_dir {
        Some(dir) => {
            let cache = AstCache::open(
                CacheConfig::new(dir).with_max_entries(common.cache_max_entries),
            )
            .with_context(|| format!("opening cache at {}", dir.display()))?;
            Ok(Some(cache))
        }
        None => Ok(None),
    }
}

fn load_input(path: &PathBuf) -> Result<ContractInput> {
    let source = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let ast_path = path.with_extension("ast.json");
    let ast_document = if ast_path.exists() {
        Some(
            serde_json::from_str(&std::fs::read_to_string(&ast_path)?)
                .with_context(|| format!("parsing {}", ast_path.display()))?,
        )
    } else {
        None
    };
    Ok(ContractInput { origin: path.display().to_string(), source, ast_document })
}

fn cmd_analyze(args: &AnalyzeArgs) -> Result<u8> {
    let v1 = load_input(&args.v1)?;
    let v2 = load_input(&args.v2)?;
    let label = format!(
        "{}->{}",
        args.v1.file_stem().and_then(|s| s.to_str()).unwrap_or("v1"),
        args.v2.file_stem().and_then(|s| s.to_str()).unwrap_or("v2")
    );
    let options = analyze_options(&args.common, label);
    let cache = open_cache(&args.common)?;
    let (report, _) = run_analysis(&v1, &v2, cache.as_ref(), &options)?;

    let out = args
        .common
        .report_out
        .clone()
        .unwrap_or_else(|| PathBuf::from("report.json"));
    report.write_to(&out)?;

    println!(
        "verdict: {} | changes: {} | v1 findings: {} | v2 findings: {} | matches: {}",
        report.summary.verdict,
        report.changes.len(),
        report.v1_findings.len(),
        report.v2_findings.len(),
        report.matches.len()
    );
    for warning in &report.warnings {
        eprintln!("warning: {warning}");
    }
    println!("report written to {}", out.display());
    Ok(if report.quality_ok { 0 } else { 2 })
}

fn cmd_trace(args: &TraceArgs) -> Result<u8> {
    let proxy = upgradescan_core::trace::normalize_address(&args.proxy);
    let provider = match (&args.fixtures, &args.api_url) {
        (Some(dir), _) => SourceProvider::Offline(OfflineFixtures::new(dir.join(&proxy))),
        (None, Some(url)) => {
            let key = std::env::var(API_KEY_ENV).unwrap_or_default();
            SourceProvider::Online(ExplorerClient::new(url.clone(), key))
        }
        (None, None) => anyhow::bail!("trace needs --fixtures or --api-url"),
    };
    let filter = EventFilter::with_extra_topics(args.extra_topic.iter().cloned());

    let pair = match assemble_pair(&provider, &filter, args.at) {
        Ok(pair) => pair,
        Err(e) => {
            if let Some(HistoryError::Trace(TraceError::InsufficientHistory { have })) =
                e.downcast_ref::<HistoryError>()
            {
                eprintln!("insufficient history: {have} version(s)");
                return Ok(3);
            }
            if matches!(e.downcast_ref::<HistoryError>(), Some(HistoryError::NoAnalyzablePair)) {
                eprintln!("no adjacent verified pair available: {e}");
                return Ok(2);
            }
            return Err(e);
        }
    };

    let mut options = analyze_options(
        &args.common,
        format!("{}:{}->{}", proxy, pair.v1_address, pair.v2_address),
    );
    options.proxy_address = Some(proxy.clone());
    let cache = open_cache(&args.common)?;
    let (mut report, _) = run_analysis(&pair.v1, &pair.v2, cache.as_ref(), &options)?;
    for addr in &pair.unverified {
        report.warnings.push(format!("implementation {addr} has no verified source"));
    }
    if pair.downgraded {
        report
            .warnings
            .push("latest pair unavailable; analyzed an earlier adjacent pair".to_string());
    }

    let out = args
        .common
        .report_out
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("{proxy}.report.json")));
    report.write_to(&out)?;
    println!(
        "history: {} versions | analyzing {} -> {} | verdict: {}",
        pair.history.len(),
        pair.v1_address,
        pair.v2_address,
        report.summary.verdict
    );
    for warning in &report.warnings {
        eprintln!("warning: {warning}");
    }
    println!("report written to {}", out.display());
    Ok(if pair.downgraded || !report.quality_ok { 2 } else { 0 })
}

fn cmd_batch(args: &BatchArgs) -> Result<u8> {
    let options = analyze_options(&args.common, String::new());
    let cache = open_cache(&args.common)?;
    let summary =
        run_batch(&args.manifest, &args.out_dir, cache.as_ref(), &options, args.jobs)?;
    let summary_path = args.out_dir.join("summary.json");
    std::fs::write(&summary_path, serde_json::to_string_pretty(&summary)?)?;
    println!(
        "batch: {} entries, {} succeeded, {} failed | cache hit rate {:.1}%",
        summary.total,
        summary.succeeded,
        summary.failed.len(),
        100.0 * summary.cache_hit_rate
    );
    for (verdict, count) in &summary.verdict_counts {
        println!("  {verdict}: {count}");
    }
    for failure in &summary.failed {
        eprintln!("failed: {}: {}", failure.label, failure.error);
    }
    println!("summary written to {}", summary_path.display());
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Analyze(args) => cmd_analyze(args),
        Command::Trace(args) => cmd_trace(args),
        Command::Batch(args) => cmd_batch(args),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
