use std::path::PathBuf;
use std::process::ExitCode;

use attention_core::pipeline::{run_until, RunConfig, RunError, RunReport, Stage};
use attention_core::simulate::{write_simulation, PhaseRates, SyntheticSpec};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "attention", version, about = "Location-descriptor analytics over annotated crisis posts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Run configuration (TOML).
    #[arg(long, short)]
    config: PathBuf,
    /// Overrides the configured output directory.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate the corpus.
    Ingest(RunArgs),
    /// Build the gazetteer index.
    Gazetteer(RunArgs),
    /// Extract mentions and match descriptors.
    Extract(RunArgs),
    /// Build timelines, peaks and figure data.
    Timeline(RunArgs),
    /// Profile authors and write design matrices.
    Features(RunArgs),
    /// Fit every configured analysis.
    Fit(RunArgs),
    /// Write the coefficient report.
    Report(RunArgs),
    /// Run every stage.
    Run(RunArgs),
    /// Write a synthetic corpus, gazetteer, config and truth file.
    Simulate(SimulateArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Directory to write into.
    #[arg(long, short)]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 10_000)]
    posts: usize,
    #[arg(long, default_value_t = 400)]
    authors: usize,
    #[arg(long, default_value_t = 30)]
    locations: usize,
    /// Descriptor rates before, during and after the peak.
    #[arg(long, value_delimiter = ',', num_args = 3, default_values_t = [0.6, 0.5, 0.3])]
    rates: Vec<f64>,
    /// Drop all covariate effects so only the phase rates act.
    #[arg(long)]
    no_covariates: bool,
}

fn load(args: &RunArgs) -> Result<RunConfig, RunError> {
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(dir) = &args.output_dir {
        let cwd = std::env::current_dir().map_err(|e| RunError::Config(e.to_string()))?;
        cfg.output_dir = cwd.join(dir);
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn summarize(report: &RunReport) {
    println!("config_hash {}", report.config_hash);
    println!(
        "posts {} parse_errors {} mentions {} descriptors {}",
        report.post_count, report.parse_errors, report.mention_count, report.descriptor_count
    );
    for a in &report.analyses {
        let converged = if a.model.converged { "converged" } else { "NOT converged" };
        println!("analysis {} rows {} l2 {} {converged}", a.label, a.rows, a.selected_l2);
    }
    for p in &report.artifacts {
        println!("wrote {}", p.display());
    }
}

fn staged(args: &RunArgs, stage: Stage) -> ExitCode {
    let result = load(args).and_then(|cfg| run_until(&cfg, stage));
    match result {
        Ok(report) => {
            summarize(&report);
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            if let RunError::Stage { completed, .. } = &e {
                for p in completed {
                    eprintln!("kept {}", p.display());
                }
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn simulate(args: &SimulateArgs) -> ExitCode {
    let mut spec = SyntheticSpec {
        seed: args.seed,
        n_posts: args.posts,
        n_authors: args.authors,
        n_locations: args.locations,
        phase_rates: PhaseRates { pre: args.rates[0], during: args.rates[1], post: args.rates[2] },
        ..Default::default()
    };
    if args.no_covariates {
        spec.beta.clear();
    }
    match write_simulation(&spec, &args.out) {
        Ok(sim) => {
            println!("wrote {} posts to {}", sim.posts.len(), args.out.display());
            println!("descriptor rate {:.4}", sim.truth.descriptor_rate);
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match &cli.command {
        Command::Ingest(a) => staged(a, Stage::Ingest),
        Command::Gazetteer(a) => staged(a, Stage::Gazetteer),
        Command::Extract(a) => staged(a, Stage::Extract),
        Command::Timeline(a) => staged(a, Stage::Timeline),
        Command::Features(a) => staged(a, Stage::Features),
        Command::Fit(a) => staged(a, Stage::Fit),
        Command::Report(a) | Command::Run(a) => staged(a, Stage::Report),
        Command::Simulate(a) => simulate(a),
    }
}
