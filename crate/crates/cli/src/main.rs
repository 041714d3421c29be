use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lampshade::Error;

mod config;
mod stages;

use config::PipelineConfig;
use stages::{Runner, StageOutcome};

#[derive(Parser)]
#[command(
    name = "lampshade",
    version,
    about = "Design perforated lampshades that cast a target image"
)]
struct Cli {
    /// JSON pipeline configuration
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Target grayscale PNG
    #[arg(long, global = true)]
    target: Option<PathBuf>,
    /// Output directory
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Wall raster resolution (pixels per side)
    #[arg(long, global = true)]
    resolution: Option<usize>,
    /// Mesh voxel size (mm)
    #[arg(long, global = true)]
    voxel: Option<f64>,
    /// Rerun stages even when cached, and accept edited upstream artifacts
    #[arg(long, global = true)]
    force: bool,
    /// Worker threads (defaults to all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Build the reference image stack
    Refs,
    /// Convert the target into a disk radius field
    Density,
    /// Pack disks and repair undersized ones
    Pack,
    /// Assign a tube to every disk and validate the layout
    Tubes,
    /// Build and audit the printable shell
    Mesh,
    /// Render the wall illuminance
    Simulate,
    /// Histogram, tilt and contrast evaluation
    Eval,
    /// All stages in order
    Pipeline,
}

impl Command {
    fn stage(self) -> Option<&'static str> {
        Some(match self {
            Command::Refs => "refs",
            Command::Density => "density",
            Command::Pack => "pack",
            Command::Tubes => "tubes",
            Command::Mesh => "mesh",
            Command::Simulate => "simulate",
            Command::Eval => "eval",
            Command::Pipeline => return None,
        })
    }
}

fn resolve_config(cli: &Cli) -> lampshade::Result<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(t) = &cli.target {
        cfg.target = Some(t.clone());
    }
    if let Some(o) = &cli.out {
        cfg.out = o.clone();
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(r) = cli.resolution {
        cfg.resolution = r;
    }
    if let Some(v) = cli.voxel {
        cfg.voxel = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> lampshade::Result<Vec<StageOutcome>> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    let cfg = resolve_config(cli)?;
    let runner = Runner::new(cfg, cli.force);
    match cli.command.stage() {
        Some(s) => Ok(vec![runner.run(s)?]),
        None => runner.pipeline(),
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Constraint(_) => 2,
        Error::Convergence(_) => 3,
        _ => 4,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(outcomes) => {
            let violations: usize = outcomes.iter().map(|o| o.violations).sum();
            if violations > 0 {
                log::error!(
                    "{violations} constraint violation(s), see validation.json and mesh_audit.json"
                );
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
