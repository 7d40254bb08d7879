mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use coupling_geometry::Error;

#[derive(Parser, Debug)]
#[command(name = "coupling", version, about = "Coupling geometry and nestedness tests for 0/1 matrices")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct GlobalOpts {
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Format of what is printed to stdout.
    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Json)]
    pub format: OutputFormat,
    /// Directory for output files.
    #[arg(long, global = true, env = "COUPLING_OUT_DIR")]
    pub out: Option<PathBuf>,
    /// Leave the creation time out of JSON output.
    #[arg(long, global = true)]
    pub no_timestamp: bool,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Json,
    Csv,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputFormat {
    Dense,
    Csv,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Neighborhood {
    N4,
    N8,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplerArg {
    Exact,
    Checkerboard,
    Curveball,
}

#[derive(Args, Debug, Clone)]
pub struct MatrixInput {
    /// Matrix file: dense text (space-separated 0/1) or labeled CSV (`.csv`).
    pub matrix: PathBuf,
    /// Override the format implied by the file extension.
    #[arg(long, value_enum)]
    pub input_format: Option<InputFormat>,
}

#[derive(Args, Debug, Clone)]
pub struct EnsembleOpts {
    /// Members per ensemble.
    #[arg(short = 'n', long, default_value_t = 1000)]
    pub samples: usize,
    #[arg(long, value_enum, default_value_t = SamplerArg::Exact)]
    pub sampler: SamplerArg,
    /// Chain steps discarded before the first member (chain samplers).
    #[arg(long, default_value_t = coupling_geometry::samplers::DEFAULT_BURN_IN)]
    pub burn_in: usize,
    /// Chain steps between members (chain samplers).
    #[arg(long, default_value_t = coupling_geometry::samplers::DEFAULT_THIN)]
    pub thin: usize,
    /// Memo-state limit for exact counting.
    #[arg(long, default_value_t = coupling_geometry::samplers::DEFAULT_STATE_BUDGET)]
    pub budget: usize,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Compute the coupling geometry of a matrix and save it as geometry.json.
    ///
    /// Prints energy, initial energy, grid shape and the path written.
    /// CSV columns: energy,initial_energy,grid,row_levels,col_levels,path
    Geometry {
        #[command(flatten)]
        input: MatrixInput,
        #[arg(long, value_enum, default_value_t = Neighborhood::N8)]
        neighborhood: Neighborhood,
        /// Tree levels per axis, root included.
        #[arg(long, default_value_t = 4)]
        levels: usize,
        /// Maximum row/column alternation rounds.
        #[arg(long, default_value_t = 10)]
        iterations: usize,
        /// Annealing proposals per axis per round.
        #[arg(long, default_value_t = 20_000)]
        anneal_steps: usize,
    },
    /// Energy of a matrix in its given arrangement.
    ///
    /// CSV columns: energy,neighborhood
    Energy {
        #[command(flatten)]
        input: MatrixInput,
        #[arg(long, value_enum, default_value_t = Neighborhood::N8)]
        neighborhood: Neighborhood,
    },
    /// Exact number of 0/1 matrices with the margins of a matrix, or with
    /// explicit margins.
    ///
    /// CSV columns: count,log10_count
    Count {
        /// Matrix whose margins are used.
        #[arg(required_unless_present = "rows", conflicts_with_all = ["rows", "cols"])]
        matrix: Option<PathBuf>,
        #[arg(long, value_enum)]
        input_format: Option<InputFormat>,
        /// Row sums, comma separated.
        #[arg(long, value_delimiter = ',', requires = "cols")]
        rows: Option<Vec<usize>>,
        /// Column sums, comma separated.
        #[arg(long, value_delimiter = ',', requires = "rows")]
        cols: Option<Vec<usize>>,
        #[arg(long, default_value_t = coupling_geometry::samplers::DEFAULT_STATE_BUDGET)]
        budget: usize,
    },
    /// Draw matrices with the margins of a matrix (or of a geometry grid).
    ///
    /// Without --out the members are printed, separated by blank lines, as
    /// dense text (--format json prints a JSON list of row strings per member).
    /// With --out they are written as sample_<k>.txt or .csv.
    Sample {
        /// Matrix file; omit when --geometry is given.
        #[arg(required_unless_present = "geometry")]
        matrix: Option<PathBuf>,
        #[arg(long, value_enum)]
        input_format: Option<InputFormat>,
        /// Geometry file providing the matrix and grids.
        #[arg(long, conflicts_with = "matrix")]
        geometry: Option<PathBuf>,
        /// Block grid: 1x1, finest, or L<row level>-<col level>.
        #[arg(long, default_value = "1x1")]
        grid: String,
        #[command(flatten)]
        ensemble: EnsembleOpts,
    },
    /// log10 ensemble size for every grid of a geometry, finest first.
    ///
    /// CSV columns: grid,log10_size,count (empty when the budget is exceeded)
    Entropy {
        /// Geometry file written by `geometry`.
        geometry: PathBuf,
        /// Grids to use (comma separated); default is the geometry's series.
        #[arg(long, value_delimiter = ',')]
        grids: Option<Vec<String>>,
        #[arg(long, default_value_t = coupling_geometry::samplers::DEFAULT_STATE_BUDGET)]
        budget: usize,
    },
    /// Distribution of a statistic over the ensemble of each grid.
    ///
    /// Writes profile_<statistic>_<k>_<grid>.csv (columns: index,value) per
    /// grid and profile_<statistic>.json with the summaries into --out.
    /// Printed CSV columns: grid,n,mean,std,q01,q05,q25,q50,q75,q95,q99
    Profile {
        geometry: PathBuf,
        /// energy, n_plus, temperature, nodf or ncg.
        #[arg(long)]
        statistic: String,
        #[arg(long, value_delimiter = ',')]
        grids: Option<Vec<String>>,
        #[command(flatten)]
        ensemble: EnsembleOpts,
    },
    /// Monte Carlo test of a statistic: alternative ensemble against a
    /// coarser null ensemble. Writes test_<statistic>.json into --out.
    ///
    /// CSV columns: statistic,efficient,p_value,p_median,p_q05,p_q95
    Test {
        geometry: PathBuf,
        #[arg(long)]
        statistic: String,
        #[arg(long, default_value = "1x1")]
        null: String,
        #[arg(long, default_value = "finest")]
        alt: String,
        /// Alternative ensemble size; defaults to --samples.
        #[arg(long)]
        alt_samples: Option<usize>,
        #[command(flatten)]
        ensemble: EnsembleOpts,
    },
    /// N+, temperature, NODF and the block-based index of one matrix.
    ///
    /// The block-based index needs a geometry; it is computed with default
    /// parameters when --geometry is not given.
    /// CSV columns: n_plus,temperature,nodf,ncg
    Indices {
        #[command(flatten)]
        input: MatrixInput,
        #[arg(long)]
        geometry: Option<PathBuf>,
    },
    /// Summary statistics of a values CSV written by `profile`.
    ///
    /// CSV columns: n,mean,std,q01,q05,q25,q50,q75,q95,q99
    Summary {
        values: PathBuf,
        #[arg(long, default_value = "value")]
        name: String,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Argument(_) => 2,
        _ => 1,
    }
}
