mod commands;
mod config;
mod sheet;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Bad flags, bad config or bad input data: exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Parser, Debug)]
#[command(name = "opexplain", version, about = "Operator-based concept explanations for texture classifiers")]
struct Cli {
    /// Flat key=value file with defaults for scorer, m, seed, surrogate,
    /// transform, out and inclusion_prob.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Default)]
pub struct RunArgs {
    /// builtin:<name>[:k=v,...] | exec:<command> | http:<url>
    #[arg(long)]
    pub scorer: Option<String>,
    /// Number of unique perturbation plans.
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// lr | dt | rf
    #[arg(long)]
    pub surrogate: Option<String>,
    /// identity | negate | absolute (linear surrogate only)
    #[arg(long)]
    pub transform: Option<String>,
    /// Per-operator inclusion probability when sampling plans.
    #[arg(long)]
    pub inclusion_prob: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Apply operators one at a time and write a PNG per operator plus a
    /// contact sheet.
    Perturb {
        #[arg(long)]
        input: PathBuf,
        /// Comma-separated operator ids, or `all`.
        #[arg(long, default_value = "all")]
        ops: String,
        /// Also write the composition of all selected operators.
        #[arg(long)]
        compose: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write groove and surface masks of an image.
    Segment {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Explain one image: importances, concept ranking, bar charts.
    Explain {
        #[arg(long)]
        input: PathBuf,
        /// Target class; may instead come from --ground-truth.
        #[arg(long)]
        class: Option<String>,
        /// Ground-truth CSV to look the image's class up in.
        #[arg(long)]
        ground_truth: Option<PathBuf>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Order sensitivity of operator subsets, as CSV.
    Cuco {
        #[arg(long, required = true, num_args = 1..)]
        input: Vec<PathBuf>,
        /// Operator subset (comma-separated ids or `all`); repeat for more plans.
        #[arg(long, required = true)]
        ops: Vec<String>,
        #[arg(long, default_value_t = 6)]
        orders: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare explanations with a ground-truth ranking CSV.
    Evaluate {
        #[arg(long)]
        ground_truth: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Generate a synthetic texture corpus with planted rankings.
    Synth {
        /// stripes | horizontal | grooves | smooth | hue | bark | all
        #[arg(long, default_value = "all")]
        kind: String,
        /// Images per kind.
        #[arg(long, default_value_t = 10)]
        n: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<UsageError>().is_some() {
        return 2;
    }
    match err.downcast_ref::<opexplain::Error>() {
        Some(e) if e.is_transport() => 3,
        Some(
            opexplain::Error::InvalidParameter(_)
            | opexplain::Error::UnknownOperator { .. }
            | opexplain::Error::UnknownStrategy { .. }
            | opexplain::Error::RegistryMismatch(_)
            | opexplain::Error::InsufficientSamples { .. }
            | opexplain::Error::Parse { .. }
            | opexplain::Error::Image { .. },
        ) => 2,
        _ => 4,
    }
}

/// The error chain joined with `: `, skipping causes whose text the previous
/// message already includes.
fn describe(err: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in err.chain() {
        let text = cause.to_string();
        if !out.contains(&text) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&text);
        }
    }
    out
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let file = match cli.config.as_deref().map(config::FileConfig::load).transpose() {
        Ok(f) => f.unwrap_or_default(),
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let result = match cli.command {
        Command::Perturb {
            input,
            ops,
            compose,
            out,
        } => commands::perturb(&file, &input, &ops, compose, out),
        Command::Segment { input, out } => commands::segment(&file, &input, out),
        Command::Explain {
            input,
            class,
            ground_truth,
            run,
        } => commands::explain(&file, &input, class, ground_truth.as_deref(), &run),
        Command::Cuco {
            input,
            ops,
            orders,
            seed,
            out,
        } => commands::cuco(&file, &input, &ops, orders, seed, out),
        Command::Evaluate { ground_truth, run } => commands::evaluate(&file, &ground_truth, &run),
        Command::Synth { kind, n, seed, out } => commands::synth(&file, &kind, n, seed, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(exit_code(&e))
        }
    }
}
