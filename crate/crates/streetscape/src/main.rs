use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use streetscape::pipeline::{run_pipeline, RunConfig, Stage, ALL_STAGES};
use streetscape::synth;

/// Streetscape indicator extraction, accident-type modeling, and causal
/// effect estimation.
#[derive(Parser)]
#[command(name = "streetscape", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Pipeline configuration file (JSON); defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the configured output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl RunArgs {
    fn load(&self) -> streetscape::Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
            cfg.causal.seed = seed;
        }
        if let Some(out) = &self.out {
            cfg.output_dir = out.clone();
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Derive per-point indicators from label masks.
    Extract(RunArgs),
    /// Join, impute, split, balance, and grid the accident data.
    Prep(RunArgs),
    /// Train the accident-type classifier.
    Train(RunArgs),
    /// Attribute predictions and emit importance/dependence reports.
    Explain(RunArgs),
    /// Fit treatment models and report covariate balance.
    Causal(RunArgs),
    /// Estimate the treatment-by-outcome effect matrix.
    Matrix(RunArgs),
    /// Run a set of stages end to end.
    All {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated stage subset, e.g. extract,prep,train.
        #[arg(long, value_delimiter = ',')]
        stages: Option<Vec<String>>,
    },
    /// Generate a synthetic input directory with known ground truth.
    Simulate {
        /// Directory to populate.
        #[arg(long)]
        out: PathBuf,
        /// Number of observation points (four views each).
        #[arg(long, default_value_t = 500)]
        points: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn run(cli: Cli) -> streetscape::Result<()> {
    let single = |args: &RunArgs, stage: Stage| -> streetscape::Result<()> {
        let cfg = args.load()?;
        let manifest = run_pipeline(&cfg, &[stage])?;
        for s in &manifest.stages {
            eprintln!("{}: {} ms", s.stage, s.wall_ms);
        }
        Ok(())
    };
    match &cli.command {
        Command::Extract(a) => single(a, Stage::Extract),
        Command::Prep(a) => single(a, Stage::Prep),
        Command::Train(a) => single(a, Stage::Train),
        Command::Explain(a) => single(a, Stage::Explain),
        Command::Causal(a) => single(a, Stage::Causal),
        Command::Matrix(a) => single(a, Stage::Matrix),
        Command::All { run: args, stages } => {
            let cfg = args.load()?;
            let stages: Vec<Stage> = match stages {
                None => ALL_STAGES.to_vec(),
                Some(names) => names
                    .iter()
                    .map(|n| {
                        Stage::from_name(n).ok_or_else(|| {
                            streetscape::Error::Pipeline(format!("unknown stage {n:?}"))
                        })
                    })
                    .collect::<streetscape::Result<_>>()?,
            };
            let manifest = run_pipeline(&cfg, &stages)?;
            for s in &manifest.stages {
                eprintln!("{}: {} ms", s.stage, s.wall_ms);
            }
            Ok(())
        }
        Command::Simulate { out, points, seed } => {
            let city = synth::generate_city(out, *points, *seed)?;
            eprintln!(
                "wrote {} masks for {} points to {}",
                city.n_masks,
                city.n_points,
                out.display()
            );
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
