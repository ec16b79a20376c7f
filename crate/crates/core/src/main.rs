use std::io::{self, BufRead, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use nbsearch::app::{self, AppConfig, AppError};
use nbsearch::gateway::ModelGateway;
use nbsearch::query::{Query, QueryType};
use nbsearch::store::ObjectKey;

#[derive(Parser)]
#[command(name = "nbsearch", version, about = "Semantic search over Jupyter notebook repositories")]
struct Cli {
    /// JSON config file (fields of AppConfig; missing fields take defaults)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Use the deterministic offline embedder and summarizer
    #[arg(long, global = true)]
    offline: bool,
    /// Machine-readable JSON output
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Rebuild the index from every notebook in the repository
    Index,
    /// Keep the index in step with the repository
    Sync {
        /// Run a single cycle and exit
        #[arg(long)]
        once: bool,
        /// Seconds between cycles (overrides the config)
        #[arg(long)]
        interval: Option<u64>,
    },
    /// Search the index
    Query {
        text: Option<String>,
        #[arg(long = "type", default_value = "UDQ")]
        qtype: QueryType,
        /// Chunk to summarize for CSQ, as notebook:cell:unit
        #[arg(long)]
        target: Option<String>,
        #[arg(short = 'k')]
        k: Option<usize>,
        /// Read one query per line from stdin
        #[arg(long)]
        repl: bool,
    },
    /// Evaluate a JSON-lines query set
    Eval { file: PathBuf },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn print_json(v: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("json output"));
}

fn run(cli: Cli) -> Result<(), AppError> {
    let mut cfg = match &cli.config {
        Some(path) => AppConfig::from_file(path)?,
        None => AppConfig::default(),
    };
    if cli.offline {
        cfg.model.offline_mode = true;
    }
    let gateway = ModelGateway::new(cfg.model.clone());

    match cli.command {
        Command::Index => {
            let summary = app::cmd_index(&cfg, &gateway)?;
            if cli.json {
                print_json(&serde_json::to_value(summary).expect("summary"));
            } else {
                println!(
                    "indexed {} notebooks, {} chunks ({} cells skipped, {} files with errors)",
                    summary.notebooks, summary.chunks, summary.skipped, summary.errors
                );
            }
        }
        Command::Sync { once, interval } => {
            if let Some(s) = interval {
                cfg.sync_interval_s = s;
            }
            let json = cli.json;
            app::cmd_sync(&cfg, &gateway, once, |s| {
                if json {
                    println!("{}", serde_json::to_string(s).expect("summary"));
                } else {
                    println!(
                        "sync: {} added, {} updated, {} removed, {} errors",
                        s.added, s.updated, s.removed, s.errors
                    );
                }
                let _ = io::stdout().flush();
            })?;
        }
        Command::Query { text, qtype, target, k, repl } => {
            let k = k.unwrap_or(cfg.k_default);
            let target = match target {
                Some(t) => Some(
                    ObjectKey::parse(&t)
                        .ok_or_else(|| AppError::Config(format!("bad --target {t:?}, expected notebook:cell:unit")))?,
                ),
                None => None,
            };
            let build = |text: Option<String>| match qtype {
                QueryType::CSQ => Query { target: target.clone(), ..Query::text(qtype, text.unwrap_or_default(), k) },
                _ => Query::text(qtype, text.unwrap_or_default(), k),
            };
            if repl {
                for line in io::stdin().lock().lines() {
                    let line = line.map_err(|source| AppError::Io { path: "<stdin>".into(), source })?;
                    if line.trim().is_empty() {
                        continue;
                    }
                    match app::cmd_query(&cfg, &gateway, &build(Some(line))) {
                        Ok(hits) => emit_hits(&hits, cli.json),
                        Err(e @ (AppError::MissingIndex(_) | AppError::EmptyStore)) => return Err(e),
                        Err(e) => eprintln!("error: {e}"),
                    }
                }
            } else {
                let hits = app::cmd_query(&cfg, &gateway, &build(text))?;
                emit_hits(&hits, cli.json);
            }
        }
        Command::Eval { file } => {
            let outcome = app::cmd_eval(&cfg, &gateway, &file)?;
            for e in &outcome.line_errors {
                eprintln!("{}: {e}", file.display());
            }
            if cli.json {
                print_json(&outcome.report.to_json());
            } else {
                print!("{}", outcome.report.render_table());
                println!("report written to {}", outcome.report_path.display());
            }
        }
    }
    Ok(())
}

fn emit_hits(hits: &[nbsearch::SearchHit], json: bool) {
    if json {
        print_json(&app::hits_json(hits));
    } else {
        print!("{}", app::render_hits(hits));
    }
}
