use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod options;

use rapidhare::ErrorKind;

#[derive(Parser, Debug)]
#[command(
    name = "rapidhare",
    version,
    about = "Streaming activity recognition with rolling-window mixture models"
)]
struct Cli {
    /// Seed for EM initialization, benchmark frames and synthetic data
    /// [default: 0, or the seed in a synth parameter file].
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output style for reports.
    #[arg(long, global = true, value_enum, default_value_t = Format::Table)]
    format: Format,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Table,
    Tsv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Rapidhare,
    Hmm,
}

impl From<MethodArg> for rapidhare::Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Rapidhare => rapidhare::Method::RapidHare,
            MethodArg::Hmm => rapidhare::Method::Hmm,
        }
    }
}

/// Input-space options shared by train, predict and evaluate.
#[derive(Args, Debug, Clone, Default)]
struct FeatureArgs {
    /// Channels to keep, by index or name, comma separated [default: all].
    #[arg(long)]
    channels: Option<String>,

    /// Directional features: `lag=15` uses the thigh x/z accelerometers;
    /// `lag=15,channels=a,b,...` picks the source channels explicitly.
    #[arg(long)]
    df: Option<String>,
}

#[derive(Args, Debug, Clone)]
struct EmArgs {
    /// Per-activity component overrides, e.g. `sitting=2,running=10`
    /// [default: walking=18,running=18,going_up=16,going_down=16,sitting=2,sitting_down=7,standing_up=5,standing=4].
    #[arg(long)]
    components: Option<String>,

    /// Maximum EM iterations per activity.
    #[arg(long, default_value_t = 200)]
    max_iters: usize,

    /// Relative log-likelihood improvement below which EM stops.
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,

    /// Lower bound on every variance.
    #[arg(long, default_value_t = 1e-6)]
    variance_floor: f64,

    /// Independent EM restarts; the best final log-likelihood wins.
    #[arg(long, default_value_t = 1)]
    restarts: usize,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit one mixture per activity and write a model file.
    Train {
        /// Directory of labeled recordings.
        data_dir: PathBuf,
        /// Output model path.
        #[arg(short, long)]
        output: PathBuf,
        #[command(flatten)]
        em: EmArgs,
        #[command(flatten)]
        features: FeatureArgs,
    },
    /// Label every frame of a recording, streaming one output line per frame.
    Predict {
        model: PathBuf,
        /// Recording to label; `-` reads standard input.
        #[arg(default_value = "-")]
        input: PathBuf,
        /// Number of previous frames in the scoring window (the window holds K + 1 frames).
        #[arg(long, default_value_t = rapidhare::predictor::DEFAULT_WINDOW_K)]
        window: usize,
        /// Score every window from scratch instead of streaming.
        #[arg(long)]
        oracle: bool,
        #[command(flatten)]
        features: FeatureArgs,
    },
    /// Leave-one-subject-out cross-validation with raw and border-tolerant metrics.
    Evaluate {
        data_dir: PathBuf,
        /// Frames forgiven on each side of an activity change.
        #[arg(long, default_value_t = 25)]
        tolerance: usize,
        /// Rolling window size K.
        #[arg(long, default_value_t = rapidhare::predictor::DEFAULT_WINDOW_K)]
        window: usize,
        #[arg(long, value_enum, default_value_t = MethodArg::Rapidhare)]
        method: MethodArg,
        /// Viterbi block length for the HMM baseline.
        #[arg(long, default_value_t = rapidhare::hmm::DEFAULT_HMM_WINDOW)]
        hmm_window: usize,
        /// Transition matrix file for the HMM baseline [default: built-in activity matrix].
        #[arg(long)]
        transitions: Option<PathBuf>,
        /// Folds evaluated in parallel.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Also print a summary line per fold.
        #[arg(long)]
        folds: bool,
        #[command(flatten)]
        em: EmArgs,
        #[command(flatten)]
        features: FeatureArgs,
    },
    /// Measure single-threaded per-frame inference time on random frames.
    Bench {
        model: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        frames: usize,
        #[arg(long, default_value_t = 5)]
        repeats: usize,
        #[arg(long, value_enum, default_value_t = MethodArg::Rapidhare)]
        method: MethodArg,
        #[arg(long, default_value_t = rapidhare::predictor::DEFAULT_WINDOW_K)]
        window: usize,
        #[arg(long, default_value_t = rapidhare::hmm::DEFAULT_HMM_WINDOW)]
        hmm_window: usize,
    },
    /// Write synthetic labeled recordings, one file per subject.
    Synth {
        out_dir: PathBuf,
        /// `key = value` parameter file.
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Number of subjects [default: 3].
        #[arg(long)]
        subjects: Option<usize>,
        /// Frames per subject [default: 20000].
        #[arg(long)]
        frames: Option<usize>,
        /// Channels per frame [default: 6].
        #[arg(long)]
        dim: Option<usize>,
        /// Shortest activity segment in frames [default: 200].
        #[arg(long)]
        min_segment: Option<usize>,
    },
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Core(rapidhare::Error),
    Output(std::io::Error),
}

impl From<rapidhare::Error> for CliError {
    fn from(e: rapidhare::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Output(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Output(_) => 2,
            CliError::Core(e) => match e.kind() {
                ErrorKind::Usage => 1,
                ErrorKind::Data => 2,
                ErrorKind::Numeric => 3,
            },
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => f.write_str(m),
            CliError::Core(e) => e.fmt(f),
            CliError::Output(e) => write!(f, "writing output: {e}"),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        // a closed pipe (e.g. `| head`) is not a failure
        Err(CliError::Output(e)) if e.kind() == std::io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
