//! `gistrag` — index a corpus into a memory graph and query it.
//!
//! Machine-readable results go to stdout; progress, timings, and human
//! summaries go to stderr (via the logger), so stdout can be piped or
//! diffed byte-for-byte between runs.

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use gistrag_cli::config::Config;
use gistrag_cli::pipeline::{
    explain_record, make_embedder, make_provider, retrieve_record, run_eval, run_index,
    run_sweep, write_eval_outputs, Knobs, Retriever,
};
use gistrag_cli::records::AnswerRecord;

#[derive(Parser)]
#[command(
    name = "gistrag",
    version,
    about = "Graph-diffusion retrieval over distilled passage memories"
)]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true, default_value = "gistrag.toml")]
    config: PathBuf,
    /// Force the offline provider and hash embedder (no network calls).
    #[arg(long, global = true)]
    mock: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Segment, extract, embed, and persist the corpus into the store.
    Index {
        /// Discard any existing store and checkpoint before indexing.
        #[arg(long)]
        force: bool,
    },
    /// Retrieve evidence passages for a question.
    Retrieve {
        question: String,
        /// Evidence count (defaults to retrieval.k_final).
        #[arg(long)]
        k: Option<usize>,
        /// Override the structural blend weight for this query.
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Retrieve evidence and generate an answer.
    Answer { question: String },
    /// Score the pipeline over a JSONL question set.
    Eval {
        queries: PathBuf,
        /// Output directory for report.json and trace.jsonl
        /// (defaults to <store_dir>/eval).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print knowledge-graph size statistics.
    Stats,
    /// Show how a question was decomposed, seeded, walked, and ranked.
    Explain {
        question: String,
        #[arg(long)]
        k: Option<usize>,
    },
    /// Evaluate an epsilon x gamma grid over a question set.
    Sweep {
        queries: PathBuf,
        /// Comma-separated blend weights, e.g. 0.5,0.9,0.95.
        #[arg(long, value_delimiter = ',', required = true)]
        epsilons: Vec<f64>,
        /// Comma-separated restart probabilities, e.g. 0.3,0.5.
        #[arg(long, value_delimiter = ',', required = true)]
        gammas: Vec<f64>,
        /// Output file (defaults to <store_dir>/sweep.json).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    let config = Config::load(&cli.config)?;
    match cli.command {
        Command::Index { force } => {
            let provider = make_provider(&config, cli.mock)?;
            let embedder = make_embedder(&config, cli.mock)?;
            let stats = run_index(&config, provider.as_ref(), embedder.as_ref(), force)?;
            println!("{}", serde_json::to_string_pretty(&stats)?);
        }
        Command::Retrieve { question, k, epsilon } => {
            if let Some(e) = epsilon {
                gistrag_cli::config::validate_rerank(e, config.rerank.delta, config.rerank.n_dense)?;
            }
            let retriever = load_retriever(&config, cli.mock)?;
            let k = k.unwrap_or(config.retrieval.k_final);
            let knobs = Knobs {
                epsilon: epsilon.unwrap_or(config.rerank.epsilon),
                gamma: config.diffusion.gamma,
            };
            let outcome = retriever.retrieve_with(&question, k, &knobs)?;
            let record = retrieve_record(&question, k, &outcome);
            println!("{}", serde_json::to_string_pretty(&record)?);
        }
        Command::Answer { question } => {
            let retriever = load_retriever(&config, cli.mock)?;
            let (answer, outcome) = retriever.answer(&question)?;
            let retrieved = retrieve_record(&question, config.retrieval.k_final, &outcome);
            let record = AnswerRecord {
                question: retrieved.question,
                answer,
                decomposed: retrieved.decomposed,
                sub_queries: retrieved.sub_queries,
                evidence: retrieved.evidence,
            };
            println!("{}", serde_json::to_string_pretty(&record)?);
        }
        Command::Eval { queries, out } => {
            let retriever = load_retriever(&config, cli.mock)?;
            let examples = gistrag_core::eval::load_queries(&queries)?;
            let knobs = Knobs {
                epsilon: config.rerank.epsilon,
                gamma: config.diffusion.gamma,
            };
            let (report, traces) = run_eval(
                &retriever,
                &examples,
                &config.eval.recall_ks,
                config.eval.recall_mode,
                &knobs,
            )?;
            let out_dir = out.unwrap_or_else(|| config.store_dir.join("eval"));
            let (report_path, trace_path) = write_eval_outputs(&out_dir, &report, &traces)?;
            log::info!(
                "wrote {} and {}",
                report_path.display(),
                trace_path.display()
            );
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::Stats => {
            let store = gistrag_cli::pipeline::StorePaths::new(&config.store_dir);
            let kg = gistrag_core::graph::load_graph(&store.graph()).with_context(|| {
                format!(
                    "cannot load the graph from `{}`; run `gistrag index` first",
                    config.store_dir.display()
                )
            })?;
            let stats = gistrag_core::graph::graph_stats(&kg);
            println!("{}", serde_json::to_string_pretty(&stats)?);
        }
        Command::Explain { question, k } => {
            let retriever = load_retriever(&config, cli.mock)?;
            let k = k.unwrap_or(config.retrieval.k_final);
            let outcome = retriever.retrieve(&question, k)?;
            let record = explain_record(&question, &outcome, retriever.graph())?;
            println!("{}", serde_json::to_string_pretty(&record)?);
        }
        Command::Sweep { queries, epsilons, gammas, out } => {
            let retriever = load_retriever(&config, cli.mock)?;
            let examples = gistrag_core::eval::load_queries(&queries)?;
            let sweep = run_sweep(
                &retriever,
                &examples,
                &config.eval.recall_ks,
                config.eval.recall_mode,
                &epsilons,
                &gammas,
            )?;
            let out_path = out.unwrap_or_else(|| config.store_dir.join("sweep.json"));
            std::fs::write(&out_path, format!("{}\n", serde_json::to_string_pretty(&sweep)?))?;
            log::info!("wrote {}", out_path.display());
            print_sweep_table(&sweep);
            println!("{}", serde_json::to_string_pretty(&sweep)?);
        }
    }
    Ok(())
}

fn load_retriever(config: &Config, mock: bool) -> Result<Retriever> {
    let provider = make_provider(config, mock)?;
    let embedder = make_embedder(config, mock)?;
    Retriever::load(config, provider, embedder)
}

/// Human-readable grid summary on stderr; stdout keeps the JSON.
fn print_sweep_table(sweep: &gistrag_cli::records::SweepRecord) {
    eprintln!("{:>8} {:>7} {:>7} {:>7}", "epsilon", "gamma", "EM", "F1");
    for cell in &sweep.cells {
        eprintln!(
            "{:>8.3} {:>7.3} {:>7.1} {:>7.1}",
            cell.epsilon, cell.gamma, cell.em, cell.f1
        );
    }
}
