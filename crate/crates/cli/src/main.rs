//! `seg`: command-line driver for graph self-enhancement experiments.

mod commands;
mod output;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgAction, Parser, Subcommand};

use settings::{ModelArgs, ProtocolArgs};

#[derive(Debug, Parser)]
#[command(name = "seg", version, about = "Self-enhancement of graph neural networks")]
pub struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, env = "SEG_JOBS")]
    pub jobs: Option<usize>,
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = ArgAction::Count)]
    pub verbose: u8,
    /// JSON settings file, or a previous report to reproduce.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, clap::Args)]
pub struct SplitArgs {
    /// JSON file with `train`, `val` and `test` node lists.
    #[arg(long)]
    pub split: Option<PathBuf>,
    /// Index into the protocol's generated splits when no file is given.
    #[arg(long, default_value_t = 0)]
    pub split_index: usize,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a planted-partition dataset.
    Synth {
        #[arg(long, default_value_t = 600)]
        n: usize,
        #[arg(long, default_value_t = 3)]
        c: usize,
        #[arg(long, default_value_t = 0.02)]
        p_intra: f64,
        #[arg(long, default_value_t = 0.005)]
        p_inter: f64,
        #[arg(long, default_value_t = 16)]
        dim: usize,
        #[arg(long, default_value_t = 0.6)]
        signal: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Report the fraction of inter-class edges.
    Noise {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Train one model and report validation and test accuracy.
    Train {
        #[arg(long)]
        graph: PathBuf,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        protocol: ProtocolArgs,
        #[command(flatten)]
        split: SplitArgs,
        /// Where to save the trained model.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tune and apply topology update on one split.
    Tu {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, default_value = "delete")]
        mode: seg_core::topology::TUMode,
        /// JSON array of threshold settings; must contain the rejection setting.
        #[arg(long)]
        grid: Option<PathBuf>,
        /// Proposal models whose decisions are intersected.
        #[arg(long, default_value_t = 1)]
        models: usize,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        protocol: ProtocolArgs,
        #[command(flatten)]
        split: SplitArgs,
        #[arg(long)]
        report: Option<PathBuf>,
        /// Save the updated graph to this directory.
        #[arg(long)]
        out_graph: Option<PathBuf>,
    },
    /// Tune training node augmentation on one split.
    Tna {
        #[arg(long)]
        graph: PathBuf,
        /// Number of proposal models.
        #[arg(long = "L", alias = "models")]
        num_models: Option<usize>,
        /// JSON array of confidence thresholds; must contain a value above 1.
        #[arg(long)]
        tau_grid: Option<PathBuf>,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        protocol: ProtocolArgs,
        #[command(flatten)]
        split: SplitArgs,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Compare a closed-form expectation with simulation.
    Theory {
        #[arg(long)]
        check: commands::TheoryCheck,
        #[arg(long, default_value_t = 0.8)]
        p: f64,
        #[arg(long, default_value_t = 3)]
        c: usize,
        #[arg(long, default_value_t = 0.3)]
        alpha: f64,
        #[arg(long, default_value_t = 0.9)]
        beta: f64,
        /// Edge density m/n^2 for the addition check; sets m.
        #[arg(long)]
        lambda: Option<f64>,
        /// Trials for deletion and addition, samples for tna.
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        m: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the split x seed protocol for one method.
    Protocol {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, default_value = "baseline")]
        method: commands::MethodArg,
        /// Topology mode for `--method tu`.
        #[arg(long, default_value = "delete")]
        mode: seg_core::topology::TUMode,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        protocol: ProtocolArgs,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Per-run accuracies as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Base-model accuracy under ground-truth edits or varying training size.
    Sweep {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        kind: commands::SweepKind,
        #[arg(long, default_value = "delete-inter")]
        perturb: commands::PerturbArg,
        #[arg(long, value_delimiter = ',', default_value = "0,0.25,0.5,0.75,1")]
        fractions: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "5,10,20")]
        sizes: Vec<usize>,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        protocol: ProtocolArgs,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Calibration and correlation curves on test nodes.
    Curves {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        kind: commands::CurveKind,
        #[arg(long, default_value_t = 10)]
        bins: usize,
        /// Node pairs sampled for the correlation curve.
        #[arg(long, default_value_t = 100_000)]
        pairs: usize,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        protocol: ProtocolArgs,
        #[command(flatten)]
        split: SplitArgs,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .try_init();
}

/// 1 for usage and configuration errors, 2 for bad input data, 3 for
/// failures during computation.
fn exit_code(err: &anyhow::Error) -> u8 {
    use seg_core::Error as E;
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<E>() {
            return match e {
                E::InvalidConfig(_) => 1,
                E::Internal(_) | E::NonFiniteLoss { .. } => 3,
                _ => 2,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return 2;
        }
    }
    3
}

/// The cause chain joined by ": ", skipping causes already quoted by their parent.
fn describe(err: &anyhow::Error) -> String {
    let mut out = String::new();
    let mut last = String::new();
    for cause in err.chain() {
        let msg = cause.to_string();
        if !last.ends_with(&msg) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&msg);
        }
        last = msg;
    }
    out
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    init_logging(cli.verbose);
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            eprintln!("error: --jobs must be at least 1");
            return ExitCode::from(1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            log::warn!("could not size the thread pool: {e}");
        }
    }
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(exit_code(&e))
        }
    }
}
