use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use jumplab_cli::commands::{self, Ctx, StageSummary};
use jumplab_cli::config::ExperimentConfig;
use jumplab_cli::error::CliError;

#[derive(Parser)]
#[command(name = "jumplab", version, about = "Heat-kernel and LIL experiments for long-range jump processes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true, env = "JUMPLAB_THREADS")]
    threads: Option<usize>,
    /// Output directory; overrides `out` in the configuration.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Check the tail-profile assumptions on a grid.
    CheckKernel,
    /// Sample the path ensemble.
    SamplePaths,
    /// Estimate the transition density and fit the regime constants.
    Density,
    /// Evaluate the Davies bounds against the density estimates.
    Bounds,
    /// Run the law-of-the-iterated-logarithm experiments.
    Lil,
    /// Aggregate the stage summaries.
    Report,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::CheckKernel => "check_kernel",
            Command::SamplePaths => "sample_paths",
            Command::Density => "density",
            Command::Bounds => "bounds",
            Command::Lil => "lil",
            Command::Report => "report",
        }
    }
}

/// Wall time per stage, kept apart from the deterministic outputs.
fn record_timing(ctx: &Ctx, stage: &str, seconds: f64) {
    let p = ctx.path("timings.json");
    let mut t: BTreeMap<String, f64> =
        std::fs::read_to_string(&p).ok().and_then(|s| serde_json::from_str(&s).ok()).unwrap_or_default();
    t.insert(stage.into(), seconds);
    let _ = std::fs::write(&p, serde_json::to_string_pretty(&t).expect("timings serialize") + "\n");
}

fn run(cli: &Cli) -> Result<StageSummary, CliError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    let path = cli.config.clone().ok_or_else(|| CliError::Config("--config is required".into()))?;
    let mut cfg = ExperimentConfig::load(&path)?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    let out = cli.out.clone().or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from("out"));
    let ctx = Ctx::new(cfg, out)?;
    let start = Instant::now();
    let summary = match cli.command {
        Command::CheckKernel => commands::check_kernel(&ctx),
        Command::SamplePaths => commands::sample_paths(&ctx),
        Command::Density => commands::density(&ctx),
        Command::Bounds => commands::bounds(&ctx),
        Command::Lil => commands::lil(&ctx),
        Command::Report => commands::report(&ctx),
    }?;
    record_timing(&ctx, cli.command.name(), start.elapsed().as_secs_f64());
    Ok(summary)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli).and_then(|s| s.result()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.reason_line());
            ExitCode::from(e.code() as u8)
        }
    }
}
