//! `aquagrasp`: collection campaigns, experiment suites, warping, labeling
//! and replay from the command line.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use aquagrasp::camera::{parse_calibration, warp_file, CameraError, Interpolation, WarpFileOptions};
use aquagrasp::harness::{
    self, default_episodes, default_jobs, label_episode, run_campaign, run_suite, CampaignSpec, EpisodeSpec,
    HarnessError, LabelOptions,
};
use aquagrasp::labeling::LabelError;
use clap::{Parser, Subcommand};

const EXIT_HELP: &str = "\
Exit codes:
  0  success (a campaign with failed episodes still completes)
  1  any other runtime failure
  2  configuration error: bad flags, unreadable or invalid spec or calibration, unknown suite
  3  I/O error: missing or unreadable input, unwritable output, missing frame dumps
  4  labeling found no gripper closure in the episode

Set AQUAGRASP_LOG (error, warn, info, debug, trace) to control logging.";

#[derive(Debug, Parser)]
#[command(name = "aquagrasp", version, about, after_help = EXIT_HELP)]
struct Cli {
    /// Raise log verbosity (-v info, -vv debug). AQUAGRASP_LOG takes precedence.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a collection campaign from a TOML spec.
    Collect {
        #[arg(long)]
        spec: PathBuf,
        /// Overrides the spec's seed_base.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (default: logical cores).
        #[arg(long)]
        jobs: Option<usize>,
        /// Overrides the spec's output_dir.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Warp an image from the source camera into the target camera.
    Warp {
        #[arg(long)]
        calib: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long = "out")]
        output: PathBuf,
        /// Input and output are raw little-endian f32 depth maps.
        #[arg(long)]
        depth: bool,
        /// Nearest-neighbour sampling instead of bilinear.
        #[arg(long)]
        nearest: bool,
        /// Directory holding remap tables between runs.
        #[arg(long)]
        cache: Option<PathBuf>,
    },
    /// Export affordance samples from one recorded episode.
    Label {
        #[arg(long)]
        episode: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Fraction of episodes held out for validation.
        #[arg(long, default_value_t = 0.2)]
        val_fraction: f64,
    },
    /// Run a named experiment suite.
    Suite {
        #[arg(long)]
        name: String,
        #[arg(long)]
        out: PathBuf,
        /// Paired episodes per arm (default depends on the suite).
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Render a recorded episode with overlays and a per-frame error table.
    Replay {
        #[arg(long)]
        record: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Failure classes with their exit codes.
#[derive(Debug)]
enum Failure {
    Config(anyhow::Error),
    Io(anyhow::Error),
    NoClosure(anyhow::Error),
    Other(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Other(_) => 1,
            Failure::Config(_) => 2,
            Failure::Io(_) => 3,
            Failure::NoClosure(_) => 4,
        }
    }

    fn error(&self) -> &anyhow::Error {
        match self {
            Failure::Config(e) | Failure::Io(e) | Failure::NoClosure(e) | Failure::Other(e) => e,
        }
    }
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Config(_) | HarnessError::UnknownSuite(_) => Failure::Config(e.into()),
            HarnessError::Io { .. } | HarnessError::MissingFrameData(_) | HarnessError::Format(_) => Failure::Io(e.into()),
            HarnessError::Label(LabelError::NoClosureFound) => Failure::NoClosure(e.into()),
            HarnessError::Label(LabelError::Io { .. } | LabelError::MissingFrame(_)) => Failure::Io(e.into()),
            HarnessError::Label(_) => Failure::Other(e.into()),
        }
    }
}

impl From<CameraError> for Failure {
    fn from(e: CameraError) -> Self {
        match e {
            CameraError::Calibration { .. } | CameraError::InvalidCamera(_) => Failure::Config(e.into()),
            CameraError::Io(_) | CameraError::Image(_) | CameraError::CorruptTable(_) | CameraError::DimensionMismatch { .. } => {
                Failure::Io(e.into())
            }
            _ => Failure::Other(e.into()),
        }
    }
}

fn init_logging(verbose: u8) {
    let default = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("AQUAGRASP_LOG", default)).format_timestamp(None).init();
}

fn jobs_or_default(jobs: Option<usize>) -> usize {
    jobs.filter(|&j| j > 0).unwrap_or_else(default_jobs)
}

fn collect(spec: &Path, seed: Option<u64>, jobs: Option<usize>, out: Option<&Path>) -> Result<(), Failure> {
    let mut spec = CampaignSpec::load(spec)?;
    if let Some(s) = seed {
        spec.seed_base = s;
    }
    if out.is_none() && spec.output_dir.is_none() {
        return Err(Failure::Config(anyhow::anyhow!("no output directory: pass --out or set output_dir in the spec")));
    }
    let report = run_campaign(&spec, out, jobs_or_default(jobs))?;
    print!("{}", report.summary());
    Ok(())
}

fn warp(calib: &Path, input: &Path, output: &Path, depth: bool, nearest: bool, cache: Option<&Path>) -> Result<(), Failure> {
    let text = std::fs::read_to_string(calib)
        .with_context(|| format!("reading calibration {}", calib.display()))
        .map_err(Failure::Config)?;
    let spec = parse_calibration(&text).with_context(|| calib.display().to_string()).map_err(Failure::Config)?;
    if !input.exists() {
        return Err(Failure::Io(anyhow::anyhow!("input {} does not exist", input.display())));
    }
    let opts = WarpFileOptions {
        depth,
        interpolation: if nearest { Interpolation::Nearest } else { Interpolation::Bilinear },
        ..WarpFileOptions::default()
    };
    let valid = warp_file(&spec, input, output, opts, cache)?;
    let total = spec.target.width as usize * spec.target.height as usize;
    println!("wrote {} ({valid}/{total} pixels with a source)", output.display());
    Ok(())
}

fn label(episode: &Path, out: &Path, val_fraction: f64) -> Result<(), Failure> {
    let opts = LabelOptions { val_fraction, ..LabelOptions::default() };
    let s = label_episode(episode, out, &opts)?;
    let e = &s.episodes[0];
    let c = &s.manifest.counts;
    println!("t_star          {:.3} s (frame {})", e.closure.t_star, e.closure.index);
    println!("goal frame      {}", e.goal_frame);
    println!("contact object  {}", e.track.object_id.map_or("-".to_string(), |id| id.to_string()));
    println!("samples         {} (train {}, validation {})", c.samples, c.train_samples, c.validation_samples);
    println!("manifest        {}", out.join(aquagrasp::labeling::MANIFEST_FILE).display());
    Ok(())
}

fn suite(name: &str, out: &Path, episodes: Option<usize>, seed: u64, jobs: Option<usize>) -> Result<(), Failure> {
    let n = episodes.unwrap_or_else(|| default_episodes(name));
    let report = run_suite(name, &EpisodeSpec::default(), n, seed, Some(out), jobs_or_default(jobs))?;
    print!("{}", report.summary());
    Ok(())
}

fn replay(record: &Path, out: &Path) -> Result<(), Failure> {
    let s = harness::replay(record, out)?;
    println!("rendered {} frames into {}", s.frames, out.display());
    println!("errors table    {}", s.csv.display());
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Collect { spec, seed, jobs, out } => collect(&spec, seed, jobs, out.as_deref()),
        Command::Warp { calib, input, output, depth, nearest, cache } => {
            warp(&calib, &input, &output, depth, nearest, cache.as_deref())
        }
        Command::Label { episode, out, val_fraction } => label(&episode, &out, val_fraction),
        Command::Suite { name, out, episodes, seed, jobs } => suite(&name, &out, episodes, seed, jobs),
        Command::Replay { record, out } => replay(&record, &out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(cli.verbose);
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error());
            ExitCode::from(f.code())
        }
    }
}
