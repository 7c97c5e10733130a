//! `btm`: bidirectional topic matching from the command line.
//!
//! Exit status is 0 on success, 1 on bad input and 2 when an internal
//! invariant is violated. Log verbosity follows the `BTM_LOG` variable.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use btm_core::pipeline::{self, AnalysisOptions, RunConfig};
use btm_core::report::{DEFAULT_MERGE_BELOW, DEFAULT_TOP_K};
use btm_core::synth::SynthConfig;
use btm_core::{BtmError, Pool};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "btm", version, about = "Bidirectional topic matching between two topic-modeled corpora")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Assign one corpus's documents to the other model's topics
    Match(MatchArgs),
    /// Run the full pipeline and write report.json and plot_data.csv
    Analyze(AnalyzeArgs),
    /// Cohen's kappa between BTM and cosine topic matching
    Validate(ValidateArgs),
    /// Recompute plot_data.csv from an existing report.json
    PlotData(PlotDataArgs),
    /// Generate a synthetic corpus pair with planted structure
    Synth(SynthArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PoolArg {
    Both,
    Native,
}

impl From<PoolArg> for Pool {
    fn from(p: PoolArg) -> Self {
        match p {
            PoolArg::Both => Pool::Both,
            PoolArg::Native => Pool::NativeOnly,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Apply {
    /// Model 1 applied to corpus 2 (T12)
    #[value(name = "1on2")]
    OneOnTwo,
    /// Model 2 applied to corpus 1 (T21)
    #[value(name = "2on1")]
    TwoOnOne,
}

#[derive(Args, Debug)]
struct BundlePair {
    /// Bundle directory of corpus 1
    #[arg(long)]
    c1: PathBuf,
    /// Bundle directory of corpus 2
    #[arg(long)]
    c2: PathBuf,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
    /// Worker threads for cross assignment (does not affect results)
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args, Debug)]
struct MatchArgs {
    #[command(flatten)]
    bundles: BundlePair,
    #[arg(long, value_enum, default_value = "1on2")]
    apply: Apply,
}

#[derive(Args, Debug)]
struct AnalyzeArgs {
    #[command(flatten)]
    bundles: BundlePair,
    #[arg(long, value_enum, default_value = "both")]
    pool: PoolArg,
    #[arg(long, default_value_t = 0.5)]
    unique_threshold: f64,
    /// Let the cosine rater pick the outlier topic
    #[arg(long, value_enum, default_value = "on")]
    cosine_outlier: Switch,
    #[arg(long, default_value_t = DEFAULT_TOP_K)]
    top_k: usize,
    #[arg(long, default_value_t = DEFAULT_MERGE_BELOW)]
    merge_below: f64,
}

#[derive(Args, Debug)]
struct ValidateArgs {
    #[command(flatten)]
    bundles: BundlePair,
    #[arg(long, value_enum, default_value = "both")]
    pool: PoolArg,
    #[arg(long, value_enum, default_value = "on")]
    cosine_outlier: Switch,
}

#[derive(Args, Debug)]
struct PlotDataArgs {
    /// report.json written by `btm analyze`
    #[arg(long)]
    report: PathBuf,
    #[arg(long, default_value_t = DEFAULT_TOP_K)]
    top_k: usize,
    #[arg(long, default_value_t = DEFAULT_MERGE_BELOW)]
    merge_below: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// Overrides the seed of the config file
    #[arg(long)]
    seed: Option<u64>,
    /// JSON SynthConfig; defaults are used when omitted
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

fn run_config(bundles: BundlePair, options: AnalysisOptions) -> RunConfig {
    RunConfig {
        bundle_1: bundles.c1,
        bundle_2: bundles.c2,
        options,
        out_dir: bundles.out,
        threads: bundles.threads,
    }
}

fn run(command: Command) -> Result<(), BtmError> {
    match command {
        Command::Match(args) => {
            let b = args.bundles;
            let table = pipeline::run_match(
                &b.c1,
                &b.c2,
                matches!(args.apply, Apply::OneOnTwo),
                &b.out,
                b.threads,
            )?;
            println!("assigned {} documents", table.rows.len());
        }
        Command::Analyze(args) => {
            let options = AnalysisOptions {
                pool: args.pool.into(),
                unique_threshold: args.unique_threshold,
                cosine_outlier: matches!(args.cosine_outlier, Switch::On),
                top_k: args.top_k,
                merge_below: args.merge_below,
            };
            let report = pipeline::run_analyze(&run_config(args.bundles, options))?;
            println!("native corpus\tC\tC_w-C\tU\tU_w-U\tA\tA_w-A\trelationship");
            for row in &report.factor_table {
                println!(
                    "{}\t{}\t{:?}",
                    row.native_corpus,
                    row.display.join("\t"),
                    row.relationship
                );
            }
            for d in report.directions() {
                println!(
                    "kappa {}: {:.4} ({} of {} topics agree)",
                    d.measures.direction, d.validation.kappa, d.validation.n_agreements, d.validation.n_topics
                );
            }
        }
        Command::Validate(args) => {
            let options = AnalysisOptions {
                pool: args.pool.into(),
                cosine_outlier: matches!(args.cosine_outlier, Switch::On),
                ..AnalysisOptions::default()
            };
            for v in pipeline::run_validate(&run_config(args.bundles, options))? {
                println!(
                    "kappa {}: {:.4} ({} of {} topics agree)",
                    v.direction, v.kappa, v.n_agreements, v.n_topics
                );
            }
        }
        Command::PlotData(args) => {
            let segments = pipeline::run_plot_data(&args.report, args.top_k, args.merge_below, &args.out)?;
            println!("wrote {} segments", segments.len());
        }
        Command::Synth(args) => {
            let mut config = match &args.config {
                Some(path) => {
                    let text = fs::read_to_string(path).map_err(|e| {
                        BtmError::Config(format!("cannot read {}: {e}", path.display()))
                    })?;
                    serde_json::from_str::<SynthConfig>(&text)
                        .map_err(|e| BtmError::Config(format!("{}: {e}", path.display())))?
                }
                None => SynthConfig::default(),
            };
            if let Some(seed) = args.seed {
                config.seed = seed;
            }
            pipeline::run_synth(&config, &args.out)?;
            println!("wrote synthetic pair to {}", args.out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("BTM_LOG", "warn")).init();

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::debug!("{e:?}");
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
