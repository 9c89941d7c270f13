use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use becsim::{execute, output_dir, plan, ConfigError, Mode, Request, RunConfig};
use clap::Parser;

/// Open two-mode BEC simulations: mean-field, quasi-steady states, linear
/// response and many-body dynamics.
#[derive(Parser)]
#[command(name = "becsim", version)]
struct Cli {
    mode: Mode,

    /// JSON run config
    #[arg(long)]
    config: Option<PathBuf>,

    /// Seed for trajectory ensembles; overrides the config
    #[arg(long)]
    seed: Option<u64>,

    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,

    /// Worker threads (default: all cores)
    #[arg(long)]
    jobs: Option<usize>,

    /// Figure preset (fig2 ... fig12)
    #[arg(long)]
    preset: Option<String>,

    /// Print the resolved run configs as JSON and exit
    #[arg(long)]
    print_config: bool,
}

fn run(cli: Cli) -> Result<()> {
    if let Some(jobs) = cli.jobs {
        anyhow::ensure!(jobs > 0, "--jobs must be at least 1");
        rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global()?;
    }
    let config: Option<RunConfig> = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            Some(serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?)
        }
        None => None,
    };
    let request = Request { config: config.clone(), preset: cli.preset.clone(), seed: cli.seed };
    let runs = plan(cli.mode, &request)?;
    if cli.print_config {
        let configs: Vec<&RunConfig> = runs.iter().map(|r| &r.config).collect();
        writeln!(std::io::stdout(), "{}", serde_json::to_string_pretty(&configs)?)?;
        return Ok(());
    }
    let out = output_dir(cli.out.as_deref(), config.as_ref());
    let summary = execute(cli.mode, cli.preset.as_deref(), &runs, &out)?;
    let mut stdout = std::io::stdout().lock();
    for r in &summary.runs {
        for f in &r.files {
            writeln!(stdout, "{}", out.join(f).display())?;
        }
    }
    writeln!(stdout, "{}", out.join(becsim::SUMMARY_FILE).display())?;
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if let Some(c) = e.downcast_ref::<ConfigError>() {
                eprint!("error: {c}");
                return ExitCode::from(2);
            }
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
