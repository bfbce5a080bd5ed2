use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hybridnorm::classify::{AwakeRule, ThresholdSource};
use hybridnorm::cluster::WeightKind;
use hybridnorm::norm::TransitionMode;
use hybridnorm_cli::config::parse_k_range;
use hybridnorm_cli::stages::{self, PreprocessInput};
use hybridnorm_cli::{Config, Failure};

/// Deviated-behavior detection from indoor location trajectories.
///
/// Every stage reads and writes flat files; `pipeline` runs them all into
/// one directory per stage under `--out`.
#[derive(Parser, Debug)]
#[command(name = "hybridnorm", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    #[command(flatten)]
    global: Global,
}

#[derive(Args, Debug)]
struct Global {
    /// JSON config file; flags below override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Seed for every random choice (synthesis, k-means).
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Worker threads; 0 uses every available core.
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,

    /// Half-width in slots of the similarity window.
    #[arg(long, global = true)]
    h_slots: Option<usize>,

    /// Shortest stay in slots kept by smoothing.
    #[arg(long, global = true)]
    min_stay_slots: Option<usize>,

    /// Minimum share of non-missing slots for a day to count.
    #[arg(long, global = true)]
    min_valid_fraction: Option<f64>,

    /// Slot weighting: Uniform, ActiveDayFocus or OnlyActiveDay.
    #[arg(long, global = true)]
    weight_kind: Option<WeightKind>,

    /// Active-day to night weight ratio for ActiveDayFocus.
    #[arg(long, global = true)]
    active_ratio: Option<f64>,

    /// Awake rule origin test: Uav or Literal.
    #[arg(long, global = true)]
    awake_rule: Option<AwakeRule>,

    /// Group window fusion: Literal or Earliest.
    #[arg(long, global = true)]
    transition_mode: Option<TransitionMode>,

    /// Gap in slots tolerated by day start/end scans and transition fusion.
    #[arg(long, global = true)]
    h_gap: Option<usize>,

    /// Build each day's individual norm without that day.
    #[arg(long, global = true)]
    leave_one_out: bool,

    /// Range of cluster counts for the SSD curve, as MIN:MAX.
    #[arg(long, global = true, value_parser = parse_k_range)]
    k_range: Option<(usize, usize)>,

    /// Fixed cluster count instead of the SSD argmin.
    #[arg(long, global = true)]
    k: Option<usize>,

    /// k-means restarts.
    #[arg(long, global = true)]
    restarts: Option<usize>,

    /// Scans weaker than this (dBm) are dropped before voting.
    #[arg(long, global = true, allow_negative_numbers = true)]
    rssi_threshold_dbm: Option<i32>,

    /// Local time offset from UTC in minutes.
    #[arg(long, global = true, allow_negative_numbers = true)]
    utc_offset_minutes: Option<i32>,

    /// Classification fences: Fitted on the cohort or the Published table.
    #[arg(long, global = true)]
    thresholds: Option<ThresholdSource>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic cohort from a spec file.
    Synth {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Resolve a scan log into per-cycle location fixes.
    Ingest {
        #[arg(long)]
        scans: PathBuf,
        #[arg(long)]
        receivers: PathBuf,
        #[arg(long)]
        registry: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build smoothed origin-relative trajectories from fixes, or smooth a trajectory file.
    Preprocess {
        #[arg(long, requires = "receivers", conflicts_with = "trajectories")]
        fixes: Option<PathBuf>,
        #[arg(long)]
        receivers: Option<PathBuf>,
        #[arg(long, required_unless_present = "fixes")]
        trajectories: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Spectral clustering of aggregated trajectories with an SSD curve.
    Cluster {
        #[arg(long)]
        trajectories: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Hybrid per-day norms from trajectories and clusters.
    Norms {
        #[arg(long)]
        trajectories: PathBuf,
        #[arg(long)]
        clusters: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Deviated slots and episodes against the hybrid norms.
    Detect {
        #[arg(long)]
        trajectories: PathBuf,
        #[arg(long)]
        norms: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Period probabilities, fences and labels per resident.
    Classify {
        #[arg(long)]
        deviations: PathBuf,
        #[arg(long)]
        norms: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cohort label distribution.
    Report {
        #[arg(long)]
        classification: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run every stage from a cohort spec.
    Pipeline {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn config(g: &Global) -> Result<Config, Failure> {
    let mut cfg = match &g.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    macro_rules! over {
        ($($f:ident),*) => { $(if let Some(v) = g.$f.clone() { cfg.$f = v; })* };
    }
    over!(
        h_slots,
        min_stay_slots,
        min_valid_fraction,
        weight_kind,
        active_ratio,
        awake_rule,
        transition_mode,
        h_gap,
        k_range,
        restarts,
        rssi_threshold_dbm,
        utc_offset_minutes,
        thresholds
    );
    if g.k.is_some() {
        cfg.k = g.k;
    }
    if g.leave_one_out {
        cfg.leave_one_out = true;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), Failure> {
    let cfg = config(&cli.global)?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.global.jobs)
        .build_global()
        .map_err(|e| Failure::runtime("setup", e.to_string()))?;
    let seed = cli.global.seed;
    match cli.command {
        Command::Synth { spec, out } => stages::synth(&spec, seed, &out),
        Command::Ingest {
            scans,
            receivers,
            registry,
            out,
        } => stages::ingest(&scans, &receivers, &registry, &out, &cfg),
        Command::Preprocess {
            fixes,
            receivers,
            trajectories,
            out,
        } => {
            let input = match (fixes, receivers, trajectories) {
                (Some(fixes), Some(receivers), None) => PreprocessInput::Fixes { fixes, receivers },
                (None, _, Some(t)) => PreprocessInput::Trajectories(t),
                _ => {
                    return Err(Failure::validation(
                        "preprocess",
                        "give --fixes with --receivers, or --trajectories",
                    ))
                }
            };
            stages::preprocess(&input, &out, &cfg)
        }
        Command::Cluster { trajectories, out } => stages::cluster(&trajectories, &out, &cfg, seed),
        Command::Norms {
            trajectories,
            clusters,
            out,
        } => stages::norms(&trajectories, &clusters, &out, &cfg),
        Command::Detect {
            trajectories,
            norms,
            out,
        } => stages::detect(&trajectories, &norms, &out, &cfg),
        Command::Classify { deviations, norms, out } => stages::classify(&deviations, &norms, &out, &cfg),
        Command::Report { classification, out } => stages::report(&classification, &out),
        Command::Pipeline { spec, out } => stages::pipeline(&spec, seed, &out, &cfg),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{}", f.to_json());
            ExitCode::from(f.exit_code() as u8)
        }
    }
}
