use clap::{Args, Parser, Subcommand};
use progress_core::dataio::CohortFilter;
use std::path::PathBuf;

/// MCI-to-dementia progression pipeline: synthetic cohorts, data integration,
/// biomarker harmonization, trajectory and survival modelling, evaluation.
#[derive(Debug, Parser)]
#[command(name = "progress", version, arg_required_else_help = true)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Run directory holding every stage's inputs and outputs.
    #[arg(
        long,
        global = true,
        value_name = "DIR",
        default_value = "run",
        alias = "out"
    )]
    pub run_dir: PathBuf,
    /// Master random seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// JSON configuration file; defaults to the run directory's config.json when present.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Baseline diagnoses admitted to the cohort: mci-only or all.
    #[arg(long, global = true)]
    pub cohort_filter: Option<CohortFilter>,
    /// Width of the first hidden layer of both networks.
    #[arg(long, global = true)]
    pub width: Option<usize>,
    /// Prediction horizons in years, comma-separated.
    #[arg(long, global = true, value_delimiter = ',', num_args = 1..)]
    pub horizons: Option<Vec<f64>>,
    /// Smallest center held out in leave-one-center-out evaluation.
    #[arg(long, global = true)]
    pub min_center_n: Option<usize>,
    /// Cross-validation folds.
    #[arg(long, global = true)]
    pub folds: Option<usize>,
    /// Cross-validation repeats.
    #[arg(long, global = true)]
    pub repeats: Option<usize>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Simulate a multi-center cohort into <run-dir>/data.
    Generate {
        /// Number of subjects.
        #[arg(long)]
        n: Option<usize>,
        /// Number of centers.
        #[arg(long)]
        centers: Option<usize>,
        /// Biomarker-to-risk link: linear or nonlinear.
        #[arg(long, value_parser = ["linear", "nonlinear"])]
        link: Option<String>,
    },
    /// Parse and integrate the source CSVs into one record per subject.
    Integrate {
        /// Directory with csf.csv, visits.csv and demographics.csv (default <run-dir>/data).
        #[arg(long, value_name = "DIR")]
        data: Option<PathBuf>,
    },
    /// Harmonize biomarkers across sites and assays and build model features.
    Harmonize,
    /// Fit the CDR-SB mixed model and extract per-subject trajectory parameters.
    FitTrajectories,
    /// Train the trajectory network.
    TrainTraj,
    /// Train the deep survival network and the linear Cox comparator.
    TrainSurv,
    /// Score every subject with the trained models.
    Predict,
    /// Evaluate held-out performance and write metrics.json.
    Evaluate {
        /// Generating truth (JSON lines); defaults to <run-dir>/data/ground_truth.jsonl when present.
        #[arg(long, value_name = "FILE")]
        truth: Option<PathBuf>,
    },
    /// Repeated cross-validation of the deep and linear survival models.
    CvCompare,
    /// Leave-one-center-out evaluation.
    Loco,
    /// Subgroup performance by sex, age and education.
    Fairness,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Generate { .. } => "generate",
            Command::Integrate { .. } => "integrate",
            Command::Harmonize => "harmonize",
            Command::FitTrajectories => "fit-trajectories",
            Command::TrainTraj => "train-traj",
            Command::TrainSurv => "train-surv",
            Command::Predict => "predict",
            Command::Evaluate { .. } => "evaluate",
            Command::CvCompare => "cv-compare",
            Command::Loco => "loco",
            Command::Fairness => "fairness",
        }
    }
}
