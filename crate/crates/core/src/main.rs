use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use alcs::cli::{cmd_bench, cmd_cluster, cmd_select, ConfigOverrides, RunConfig};
use alcs::data::Normalization;
use alcs::error::{Error, ErrorKind};
use alcs::evaluation::Strategy;

const EXIT_CONFIG: u8 = 2;
const EXIT_DATA: u8 = 3;
const EXIT_RUNTIME: u8 = 4;

#[derive(Parser)]
#[command(name = "alcs", version, about = "Clustering-based active learning: cluster, select queries, benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Cluster each dataset and write the cluster summary.
    Cluster(Opts),
    /// Select a query batch from each dataset and write it with provenance.
    Select(Opts),
    /// Run the full benchmark protocol and write reports plus a rank summary.
    Bench(Opts),
}

#[derive(Args)]
struct Opts {
    /// TOML config file; command-line flags take precedence over its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// CSV dataset (repeatable).
    #[arg(long)]
    data: Vec<PathBuf>,
    /// Built-in synthetic dataset, `blobs:<c>:<n>:<overlap>[:<seed>]` (repeatable).
    #[arg(long)]
    synthetic: Vec<String>,
    /// Label column: zero-based index, header name, or `last`.
    #[arg(long)]
    label_col: Option<String>,
    #[arg(long, value_parser = parse_from_str::<Normalization>)]
    normalize: Option<Normalization>,
    /// Fraction of the unlabeled pool to query.
    #[arg(long)]
    budget: Option<f64>,
    /// Boundary share of each cluster's budget.
    #[arg(long)]
    rho: Option<f64>,
    /// Single seed.
    #[arg(long, conflicts_with = "seeds")]
    seed: Option<u64>,
    /// Comma-separated seeds.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Comma-separated strategies: alcs, center, random.
    #[arg(long, value_delimiter = ',', value_parser = parse_from_str::<Strategy>)]
    strategies: Option<Vec<Strategy>>,
    #[arg(long)]
    knn_k: Option<usize>,
    /// Clustering stop ratio.
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    test_fraction: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_from_str<T: std::str::FromStr<Err = Error>>(s: &str) -> Result<T, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

impl Opts {
    fn resolve(self) -> alcs::error::Result<RunConfig> {
        let flags = ConfigOverrides {
            data: (!self.data.is_empty()).then_some(self.data),
            synthetic: (!self.synthetic.is_empty()).then_some(self.synthetic),
            label_col: self.label_col,
            normalize: self.normalize,
            budget: self.budget,
            rho: self.rho,
            strategies: self.strategies,
            seeds: self.seed.map(|s| vec![s]).or(self.seeds),
            knn_k: self.knn_k,
            tau: self.tau,
            test_fraction: self.test_fraction,
            out: self.out,
        };
        RunConfig::resolve(self.config.as_deref(), flags)
    }
}

fn run(cli: Cli) -> alcs::error::Result<()> {
    match cli.command {
        Command::Cluster(opts) => {
            for path in cmd_cluster(&opts.resolve()?)? {
                println!("wrote {}", path.display());
            }
        }
        Command::Select(opts) => {
            for path in cmd_select(&opts.resolve()?)? {
                println!("wrote {}", path.display());
            }
        }
        Command::Bench(opts) => {
            let cfg = opts.resolve()?;
            let outcome = cmd_bench(&cfg)?;
            println!("{} reports written to {}", outcome.reports.len(), cfg.out.display());
            println!("{:<10} {:>10} {:>10}", "strategy", "rank(acc)", "rank(f1)");
            for (i, s) in outcome.accuracy_ranks.strategies.iter().enumerate() {
                println!(
                    "{:<10} {:>10.3} {:>10.3}",
                    s, outcome.accuracy_ranks.mean_ranks[i], outcome.macro_f1_ranks.mean_ranks[i]
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.kind() {
                ErrorKind::Config => EXIT_CONFIG,
                ErrorKind::Data => EXIT_DATA,
                ErrorKind::Runtime => EXIT_RUNTIME,
            })
        }
    }
}
