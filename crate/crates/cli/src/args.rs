use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rahar::changepoint::Signal;
use rahar::cutpoints::CountAxis;
use rahar::ingest::Inclinometer;
use rahar::models::ModelKind;
use rahar::modes::TieBreak;
use rahar::pipeline::FeatureSource;
use rahar::sleepdetect::TruncatedPolicy;

#[derive(Debug, Parser)]
#[command(name = "rahar", version, about = "Sleep detection, activity modes and sleep-quality models from minute-epoch actigraphy")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SignalArg {
    Triaxial,
    Vm3,
}

impl From<SignalArg> for Signal {
    fn from(s: SignalArg) -> Self {
        match s {
            SignalArg::Triaxial => Signal::Triaxial,
            SignalArg::Vm3 => Signal::Vm3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AxisArg {
    Axis1,
    Vm3,
}

impl From<AxisArg> for CountAxis {
    fn from(a: AxisArg) -> Self {
        match a {
            AxisArg::Axis1 => CountAxis::Axis1,
            AxisArg::Vm3 => CountAxis::Vm3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Logreg,
    Adaboost,
    Rf,
}

impl From<ModelArg> for ModelKind {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Logreg => ModelKind::LogReg,
            ModelArg::Adaboost => ModelKind::AdaBoost,
            ModelArg::Rf => ModelKind::RandomForest,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FeaturesArg {
    Raw,
    Smoothed,
}

impl From<FeaturesArg> for FeatureSource {
    fn from(f: FeaturesArg) -> Self {
        match f {
            FeaturesArg::Raw => FeatureSource::Raw,
            FeaturesArg::Smoothed => FeatureSource::Smoothed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TieBreakArg {
    Lower,
    Higher,
}

impl From<TieBreakArg> for TieBreak {
    fn from(t: TieBreakArg) -> Self {
        match t {
            TieBreakArg::Lower => TieBreak::Lower,
            TieBreakArg::Higher => TieBreak::Higher,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TruncatedArg {
    Close,
    Discard,
}

impl From<TruncatedArg> for TruncatedPolicy {
    fn from(t: TruncatedArg) -> Self {
        match t {
            TruncatedArg::Close => TruncatedPolicy::CloseAtLastCandidate,
            TruncatedArg::Discard => TruncatedPolicy::Discard,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FillGaps {
    SedentaryZero,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Subject age in years, used to pick the cut-point row.
    #[arg(long, global = true, default_value_t = 30)]
    pub age: u32,
    /// Cut-point table `age_min,age_max,sedentary_max,light_max,moderate_max`.
    #[arg(long, global = true)]
    pub scale_file: Option<PathBuf>,
    /// Count signal compared against the cut points.
    #[arg(long, global = true, value_enum, default_value = "axis1")]
    pub axis: AxisArg,
    /// Observation vectors fed to change-point detection.
    #[arg(long, global = true, value_enum, default_value = "triaxial")]
    pub signal: SignalArg,
    #[arg(long, global = true, default_value_t = 1.0)]
    pub alpha_exp: f64,
    #[arg(long, global = true, default_value_t = 30)]
    pub min_segment: usize,
    #[arg(long, global = true, default_value_t = 99)]
    pub permutations: usize,
    #[arg(long, global = true, default_value_t = 0.01)]
    pub significance: f64,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, global = true, default_value_t = 0.85)]
    pub efficiency_threshold: f64,
    #[arg(long, global = true, default_value_t = 5)]
    pub folds: usize,
    #[arg(long, global = true, value_enum, default_value = "logreg")]
    pub model: ModelArg,

    /// Seconds per input epoch (a multiple of 60).
    #[arg(long, global = true, default_value_t = 60)]
    pub epoch_secs: u32,
    /// Sum blocks of this many epochs before analysis.
    #[arg(long, global = true)]
    pub aggregate: Option<usize>,
    /// Insert zero-count epochs into gaps instead of rejecting the file.
    #[arg(long, global = true, value_enum)]
    pub fill_gaps: Option<FillGaps>,
    /// Inclinometer states allowed in a sleep candidate.
    #[arg(long, global = true, value_delimiter = ',', default_values = ["off", "standing", "sitting"], value_parser = parse_inclinometer)]
    pub inclinometer_accept: Vec<Inclinometer>,
    #[arg(long, global = true, value_enum, default_value = "close")]
    pub truncated: TruncatedArg,
    /// Drop sleep periods shorter than this.
    #[arg(long, global = true)]
    pub min_sleep_min: Option<usize>,
    /// Drop segments whose awake span is shorter than this.
    #[arg(long, global = true)]
    pub min_awake_min: Option<usize>,
    /// Keep the first segment of each recording in the dataset.
    #[arg(long, global = true)]
    pub keep_first: bool,
    #[arg(long, global = true, value_enum, default_value = "smoothed")]
    pub features: FeaturesArg,
    #[arg(long, global = true, value_enum, default_value = "lower")]
    pub tie_break: TieBreakArg,
    /// Add awake minutes to the model inputs.
    #[arg(long, global = true)]
    pub with_awake_min: bool,
    /// Score at or above which a row is predicted poor.
    #[arg(long, global = true, default_value_t = 0.5)]
    pub class_threshold: f64,
    #[arg(long, global = true, default_value_t = 100)]
    pub trees: usize,
    #[arg(long, global = true)]
    pub mtry: Option<usize>,
    #[arg(long, global = true, default_value_t = 50)]
    pub rounds: usize,
    #[arg(long, global = true, default_value_t = 1e-4)]
    pub l2: f64,
    /// More log output on stderr (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

fn parse_inclinometer(s: &str) -> Result<Inclinometer, String> {
    s.parse().map_err(|t| format!("unknown inclinometer state `{t}`"))
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check an epoch file and print any problems as JSON.
    Validate(InputArgs),
    /// Detect sleep periods and print the sleep report as JSON.
    Sleep(InOut),
    /// Write the sleep-wake segment manifest.
    Segment(InOut),
    /// Write change points of every awake span.
    Changepoints(InOut),
    /// Write the activity modes of every awake span.
    Modes(InOut),
    /// Write the feature dataset.
    Features(InOut),
    /// Fit a model on a dataset file.
    Train {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cross-validate a model kind, or score a fitted model, on a dataset.
    Eval {
        #[arg(long)]
        dataset: PathBuf,
        /// Fitted model to score instead of cross-validating.
        #[arg(long)]
        model_file: Option<PathBuf>,
        #[arg(long)]
        report: PathBuf,
    },
    /// Full pipeline over a file or a directory of files.
    Run {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value = "report")]
        report: PathBuf,
        /// Also cross-validate and fit the selected model.
        #[arg(long)]
        train: bool,
    },
    /// Generate a synthetic recording from a profile.
    Synth {
        #[arg(long)]
        profile: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Where to write the planted ground truth as JSON.
        #[arg(long)]
        truth: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Args)]
pub struct InputArgs {
    /// Epoch file or directory of epoch files.
    #[arg(long = "in")]
    pub input: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct InOut {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
