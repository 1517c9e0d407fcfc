//! Command-line front end: reproducible train / predict / transduce /
//! sweep-delta / synth / cv runs over DMAT datasets.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use zsldict_core::{Error, Hyperparams};

use commands::CliError;

#[derive(Parser)]
#[command(
    name = "zsldict",
    version,
    about = "Zero-shot classification with joint embedding dictionaries and transductive self-training"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a joint embedding dictionary model on seen-class data.
    Train(TrainArgs),
    /// Score unseen instances with a trained model.
    Predict(PredictArgs),
    /// Run the transductive self-training loop on unseen data.
    Transduce(TransduceArgs),
    /// Accuracy per self-labeled-rate schedule, as CSV.
    SweepDelta(SweepDeltaArgs),
    /// Generate a synthetic zero-shot benchmark.
    Synth(SynthArgs),
    /// Cross-validated hyperparameter search.
    Cv(CvArgs),
}

#[derive(Args, Clone)]
pub struct CommonArgs {
    /// Output directory; refused when non-empty unless --force is set.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    /// Master seed; every random draw derives from it through named streams.
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Worker threads for grid evaluation (1 = fully sequential).
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    /// Allow writing into a non-empty output directory.
    #[arg(long)]
    pub force: bool,
}

#[derive(Args, Clone)]
pub struct HyperArgs {
    /// Weight of the label-consistency term.
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    /// Weight of the prototype energy term.
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    /// Code-pull weight in the transductive refit.
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    /// Anchor weight tying each refit dictionary to the previous round.
    #[arg(long, default_value_t = 1.0)]
    pub mu: f64,
    /// Dictionary atoms; 0 resolves to min(feature dim, instance count).
    #[arg(long, default_value_t = 0)]
    pub latent_dim: usize,
    /// Relative objective tolerance of the outer loops.
    #[arg(long, default_value_t = 1e-5)]
    pub tol: f64,
    /// Outer iteration cap.
    #[arg(long, default_value_t = 100)]
    pub max_iters: usize,
}

impl HyperArgs {
    pub fn to_hyperparams(&self) -> Hyperparams {
        Hyperparams {
            alpha: self.alpha,
            beta: self.beta,
            lambda: self.lambda,
            mu: self.mu,
            latent_dim: self.latent_dim,
            outer_tol: self.tol,
            max_outer_iters: self.max_iters,
            ..Hyperparams::default()
        }
    }
}

#[derive(Args)]
pub struct TrainArgs {
    /// Seen-class dataset manifest (JSON).
    #[arg(long, value_name = "FILE")]
    pub manifest: PathBuf,
    #[command(flatten)]
    pub hyper: HyperArgs,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Args)]
pub struct PredictArgs {
    /// Model directory written by `train`.
    #[arg(long, value_name = "DIR")]
    pub model: PathBuf,
    /// Unseen-class dataset manifest (JSON).
    #[arg(long, value_name = "FILE")]
    pub manifest: PathBuf,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Args)]
pub struct TransduceArgs {
    #[arg(long, value_name = "DIR")]
    pub model: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub manifest: PathBuf,
    /// Strictly increasing self-labeled rates, ending at <= 1.
    #[arg(long, value_delimiter = ',', default_values_t = [0.4, 0.6, 0.8, 1.0])]
    pub schedule: Vec<f64>,
    /// Override the model's stored lambda.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Override the model's stored mu.
    #[arg(long)]
    pub mu: Option<f64>,
    /// Override the refit tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Override the refit iteration cap.
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Args)]
pub struct SweepDeltaArgs {
    #[arg(long, value_name = "DIR")]
    pub model: PathBuf,
    /// Unseen manifest; must carry truth labels.
    #[arg(long, value_name = "FILE")]
    pub manifest: PathBuf,
    /// Repeatable; each occurrence is one comma-separated schedule.
    /// Defaults to the four single-rate schedules 0.4, 0.6, 0.8, 1.0.
    #[arg(long = "schedule", value_name = "D1,D2,...")]
    pub schedules: Vec<String>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub mu: Option<f64>,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 10)]
    pub seen_classes: usize,
    #[arg(long, default_value_t = 5)]
    pub unseen_classes: usize,
    /// Instances per seen class.
    #[arg(long, default_value_t = 30)]
    pub m_per_class: usize,
    /// Instances per unseen class.
    #[arg(long, default_value_t = 30)]
    pub n_per_class: usize,
    #[arg(long, default_value_t = 16)]
    pub feature_dim: usize,
    #[arg(long, default_value_t = 16)]
    pub embed_dim: usize,
    #[arg(long, default_value_t = 12)]
    pub latent_dim: usize,
    /// Latent Gaussian noise level.
    #[arg(long, default_value_t = 0.0)]
    pub noise_sigma: f64,
    /// Latent translation applied to every unseen instance.
    #[arg(long, default_value_t = 0.0)]
    pub shift_magnitude: f64,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Args)]
pub struct CvArgs {
    /// Seen-class dataset manifest (JSON).
    #[arg(long, value_name = "FILE")]
    pub manifest: PathBuf,
    /// Candidate values shared by every searched hyperparameter.
    #[arg(long, value_delimiter = ',', default_values_t = [0.1, 1.0, 10.0])]
    pub values: Vec<f64>,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    /// Fraction of classes held out per fold.
    #[arg(long, default_value_t = 0.2)]
    pub holdout_frac: f64,
    /// Schedule used when scoring (lambda, mu) candidates transductively.
    #[arg(long, value_delimiter = ',', default_values_t = [0.4, 0.6, 0.8, 1.0])]
    pub schedule: Vec<f64>,
    /// Search the full 4-parameter cross product instead of the staged
    /// (alpha, beta) then (lambda, mu) search.
    #[arg(long)]
    pub full: bool,
    #[command(flatten)]
    pub hyper: HyperArgs,
    #[command(flatten)]
    pub common: CommonArgs,
}

fn exit_code(e: &CliError) -> u8 {
    match e {
        CliError::Missing(_) => 4,
        CliError::Core(e) => match e {
            Error::Shape { .. } | Error::Dimension(_) => 3,
            Error::Solver { .. } | Error::Singular { .. } => 5,
            _ => 2,
        },
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("ZSLDICT_LOG", "warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(a) => commands::cmd_train(a),
        Command::Predict(a) => commands::cmd_predict(a),
        Command::Transduce(a) => commands::cmd_transduce(a),
        Command::SweepDelta(a) => commands::cmd_sweep_delta(a),
        Command::Synth(a) => commands::cmd_synth(a),
        Command::Cv(a) => commands::cmd_cv(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
