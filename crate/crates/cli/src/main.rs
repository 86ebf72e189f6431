use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use mcr_cli::config::{BackendKind, Overrides, RunConfig};
use mcr_cli::report::{build_report, load_dumps, render_markdown, write_report};
use mcr_cli::runner::{build_backend, run_entries};
use mcr_core::dataset::load_dataset;
use mcr_core::dump::{to_dot, Method, TreeDump};
use mcr_core::env::{Environment, Landscape};

#[derive(Parser)]
#[command(
    name = "mcr",
    version,
    about = "Tree search over catalyst-discovery prompts"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one method over every entry of a dataset.
    Run(RunArgs),
    /// Summarize the dumps in a run directory.
    Report {
        #[arg(long = "run")]
        run_dir: PathBuf,
        /// Print the machine-readable document instead of the table.
        #[arg(long)]
        json: bool,
    },
    /// Print the stored tree of one entry.
    DumpTree {
        #[arg(long = "run")]
        run_dir: PathBuf,
        #[arg(long)]
        entry: String,
        /// Needed when the entry was run with more than one method.
        #[arg(long, value_parser = parse_method)]
        method: Option<Method>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
}

#[derive(clap::Args)]
struct RunArgs {
    #[arg(long, value_parser = parse_method)]
    method: Method,
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, value_enum)]
    backend: Option<BackendKind>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    c: Option<f64>,
    /// Mock reward landscape: uniform, depth_monotone, property_keyed or deceptive.
    #[arg(long, value_parser = parse_landscape)]
    landscape: Option<Landscape>,
    /// Response cache file (JSON lines).
    #[arg(long)]
    cache: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// TOML file with run settings; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Re-run entries that already have a complete dump.
    #[arg(long)]
    force: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Dot,
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse()
}

fn parse_landscape(s: &str) -> Result<Landscape, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

fn run(args: RunArgs) -> Result<()> {
    let overrides = Overrides {
        backend: args.backend,
        seed: args.seed,
        budget: args.budget,
        gamma: args.gamma,
        c: args.c,
        landscape: args.landscape,
        cache: args.cache,
    };
    let config = RunConfig::resolve(args.config.as_deref(), &overrides)?;
    let entries = load_dataset(&args.dataset)
        .with_context(|| format!("loading {}", args.dataset.display()))?;
    let backend = build_backend(&config, &args.out)?;
    let env = Environment::new(backend, config.query.clone());
    let summary = run_entries(args.method, &entries, &config, &env, &args.out, args.force)?;

    let report = build_report(&args.out)?;
    write_report(&args.out, &report).context("writing report")?;
    println!(
        "{}: {} completed, {} skipped, {} failed",
        args.method.as_str(),
        summary.completed.len(),
        summary.skipped.len(),
        summary.failed.len()
    );
    for (id, err) in &summary.failed {
        eprintln!("  {id}: {err}");
    }
    if !summary.failed.is_empty() {
        bail!("{} entries failed", summary.failed.len());
    }
    Ok(())
}

fn dump_tree(run_dir: &Path, entry: &str, method: Option<Method>, format: Format) -> Result<()> {
    let matches: Vec<TreeDump> = load_dumps(run_dir)?
        .into_iter()
        .map(|(_, d)| d)
        .filter(|d| d.entry_id == entry && method.is_none_or(|m| d.method == m))
        .collect();
    let dump = match matches.as_slice() {
        [] => bail!("no dump for entry {entry:?} in {}", run_dir.display()),
        [one] => one,
        many => {
            let methods: Vec<&str> = many.iter().map(|d| d.method.as_str()).collect();
            bail!(
                "entry {entry:?} was run with {}; pick one with --method",
                methods.join(", ")
            )
        }
    };
    match format {
        Format::Json => println!("{}", dump.to_json()),
        Format::Dot => print!("{}", to_dot(&dump.tree()?)),
    }
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Run(args) => run(args),
        Command::Report { run_dir, json } => {
            let report = build_report(&run_dir)?;
            write_report(&run_dir, &report).context("writing report")?;
            if json {
                println!("{}", serde_json::to_string_pretty(&report)?);
            } else {
                print!("{}", render_markdown(&report));
            }
            Ok(())
        }
        Command::DumpTree {
            run_dir,
            entry,
            method,
            format,
        } => dump_tree(&run_dir, &entry, method, format),
    }
}
