use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "capset", version, about = "Capacity-set analysis of Basis Pursuit recovery")]
pub struct Cli {
    /// Only print warnings and errors on stderr.
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute coherence, capacity sets and estimation functions.
    Analyze(AnalyzeArgs),
    /// Check the small-support oracles against q, Q and the greedy pairing.
    Oracle(OracleArgs),
    /// Write a generated dictionary to a CSV file.
    Generate(GenerateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Random,
    Spoiled,
    Dct,
}

#[derive(Debug, Clone, Args)]
pub struct DictArgs {
    #[arg(long, value_enum, default_value_t = Family::Random)]
    pub family: Family,
    /// Rows N (for dct, the pair is N×2N).
    #[arg(long)]
    pub n: Option<usize>,
    /// Columns L; defaults to 2N.
    #[arg(long)]
    pub l: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Spoiled family: number of replaced columns.
    #[arg(long, default_value_t = 3)]
    pub spoiled: usize,
    /// Spoiled family: number of source columns per combination.
    #[arg(long, default_value_t = 12)]
    pub combined: usize,
    /// Read the dictionary from a capset-dict CSV instead of generating it.
    #[arg(long, value_name = "PATH", conflicts_with_all = ["n", "l"])]
    pub load: Option<PathBuf>,
    /// Rescale loaded columns to unit norm.
    #[arg(long, requires = "load")]
    pub renormalize: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, ValueEnum)]
pub enum EfKind {
    #[value(name = "cb")]
    Cb,
    #[value(name = "gb")]
    Gb,
    #[value(name = "thmA")]
    ThmA,
    #[value(name = "thmB")]
    ThmB,
    #[value(name = "compB")]
    CompB,
    #[value(name = "count")]
    Count,
    #[value(name = "emp")]
    Emp,
}

impl EfKind {
    pub fn name(self) -> &'static str {
        match self {
            EfKind::Cb => "cb",
            EfKind::Gb => "gb",
            EfKind::ThmA => "thmA",
            EfKind::ThmB => "thmB",
            EfKind::CompB => "compB",
            EfKind::Count => "count",
            EfKind::Emp => "emp",
        }
    }

    pub fn needs_q(self) -> bool {
        matches!(self, EfKind::ThmA | EfKind::Count)
    }

    pub fn needs_pairs(self) -> bool {
        matches!(self, EfKind::ThmB | EfKind::CompB)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CoeffModelArg {
    /// i.i.d. standard normal nonzeros.
    Gaussian,
    /// Uniform ±1 nonzeros.
    Signs,
}

#[derive(Debug, Clone, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub dict: DictArgs,
    /// Estimation functions to compute (emp runs Basis Pursuit and is slow).
    #[arg(long, value_enum, value_delimiter = ',', default_value = "cb,gb,thmA,thmB,compB,count")]
    pub ef: Vec<EfKind>,
    /// Random supports per ℓ for compB and emp.
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    /// Run the sum-variance experiment with this many supports per ℓ.
    #[arg(long, value_name = "M")]
    pub var_samples: Option<usize>,
    /// Quantization levels for the count estimate.
    #[arg(long, default_value_t = 3)]
    pub d: usize,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long, default_value = "capset-out")]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = CoeffModelArg::Gaussian)]
    pub coeff_model: CoeffModelArg,
    /// Seed for the Monte-Carlo stages; defaults to --seed.
    #[arg(long)]
    pub mc_seed: Option<u64>,
    /// Capacity cache directory.
    #[arg(long, value_name = "DIR")]
    pub cache_dir: Option<PathBuf>,
    /// Recompute q and Q even if cached.
    #[arg(long)]
    pub no_cache: bool,
}

#[derive(Debug, Clone, Args)]
pub struct OracleArgs {
    #[command(flatten)]
    pub dict: DictArgs,
    #[arg(long, default_value_t = 100)]
    pub supports: usize,
    #[arg(long, default_value_t = 4)]
    pub max_support: usize,
    /// Halve q and Q before the checks; the sweep must then fail.
    #[arg(long)]
    pub inject_fault: bool,
    /// Allow dictionaries beyond N ≤ 8, L ≤ 16.
    #[arg(long)]
    pub force: bool,
    /// Also write the report to this file.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub dict: DictArgs,
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
}
