use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;
mod output;

use config::{Experiment, KSetting, Scale};
use lsdist_core::lsdistance::WeightScheme;

/// Level-set distances between samples and two-sample tests.
#[derive(Parser, Debug)]
#[command(name = "lsdist", version, about)]
struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true, display_order = 100)]
    threads: Option<usize>,
    /// Exit with code 3 when a numerical degeneracy is flagged.
    #[arg(long, global = true, display_order = 100)]
    strict: bool,
    /// JSON file with base parameters for the command; flags override it.
    #[arg(long, global = true, display_order = 100)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Level-set distance between two CSV point clouds.
    Dist(DistArgs),
    /// Two-sample permutation test.
    Permtest(PermArgs),
    /// Benchmark protocols: threshold searches and the homogeneity table.
    Bench(BenchArgs),
    /// Group test on per-subject clouds.
    Grouptest(GroupArgs),
    /// PGM images to clouds, distance matrix and MDS embedding.
    Shapes(ShapesArgs),
}

#[derive(Args, Debug)]
pub struct DistArgs {
    #[arg(long)]
    p: Option<PathBuf>,
    #[arg(long)]
    q: Option<PathBuf>,
    #[arg(long)]
    bands: Option<usize>,
    /// `auto` or a positive integer.
    #[arg(long)]
    k: Option<KSetting>,
    #[arg(long)]
    scheme: Option<WeightScheme>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct PermArgs {
    #[arg(long)]
    p: Option<PathBuf>,
    #[arg(long)]
    q: Option<PathBuf>,
    /// ls0, ls1, radius, hausdorff, kl, t, energy, mmd, ks, chi2 or wilcoxon.
    #[arg(long)]
    stat: Option<String>,
    #[arg(long)]
    n_perms: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    bands: Option<usize>,
    #[arg(long)]
    k: Option<KSetting>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    #[arg(value_enum)]
    experiment: Option<Experiment>,
    /// Comma-separated dimensions.
    #[arg(long, value_delimiter = ',')]
    dims: Option<Vec<usize>>,
    #[arg(long, value_enum)]
    scale: Option<Scale>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated metric names (default: the full table).
    #[arg(long, value_delimiter = ',')]
    metrics: Option<Vec<String>>,
    /// Replicates for both threshold-search stages.
    #[arg(long)]
    reps: Option<usize>,
    /// Homogeneity permutations per run.
    #[arg(long)]
    n_perms: Option<usize>,
    /// Homogeneity sample size per group.
    #[arg(long)]
    n: Option<usize>,
    /// Homogeneity runs.
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    bands: Option<usize>,
    #[arg(long)]
    k: Option<KSetting>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct GroupArgs {
    /// Directory of per-subject CSV clouds.
    #[arg(long)]
    clouds: Option<PathBuf>,
    /// CSV with header `id,group`; ids are cloud file stems.
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long)]
    n_perms: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    bands: Option<usize>,
    #[arg(long)]
    k: Option<KSetting>,
    #[arg(long)]
    scheme: Option<WeightScheme>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ShapesArgs {
    #[arg(long, num_args = 1..)]
    images: Option<Vec<PathBuf>>,
    #[arg(long)]
    scheme: Option<WeightScheme>,
    /// Embedding dimension.
    #[arg(long)]
    mds: Option<usize>,
    /// Pixels brighter than this are inside the shape.
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    bands: Option<usize>,
    #[arg(long)]
    k: Option<KSetting>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Debug)]
pub struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    pub fn validation(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }

    pub fn numerical(message: impl Into<String>) -> Self {
        Self {
            code: 3,
            message: message.into(),
        }
    }
}

impl From<lsdist_core::Error> for CliError {
    fn from(e: lsdist_core::Error) -> Self {
        CliError::validation(e.to_string())
    }
}

/// Global switches passed to every command.
pub struct Globals {
    pub strict: bool,
    pub config: Option<PathBuf>,
}

impl Globals {
    /// Under `--strict`, any flagged degeneracy becomes exit code 3.
    pub fn check(&self, warnings: &[String]) -> Result<(), CliError> {
        if self.strict && !warnings.is_empty() {
            return Err(CliError::numerical(format!("degenerate result: {}", warnings.join("; "))));
        }
        Ok(())
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let globals = Globals {
        strict: cli.strict,
        config: cli.config,
    };
    let command = cli.command;
    let dispatch = move || match command {
        Command::Dist(a) => commands::dist(a, &globals),
        Command::Permtest(a) => commands::permtest(a, &globals),
        Command::Bench(a) => commands::bench(a, &globals),
        Command::Grouptest(a) => commands::grouptest(a, &globals),
        Command::Shapes(a) => commands::shapes(a, &globals),
    };
    match cli.threads {
        Some(0) => Err(CliError::validation("--threads must be positive")),
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| CliError::validation(format!("thread pool: {e}")))?
            .install(dispatch),
        None => dispatch(),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("lsdist: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
